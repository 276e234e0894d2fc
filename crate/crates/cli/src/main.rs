use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde_json::{json, Value};
use tdgroups::afp::{afp_witness, Amalgam};
use tdgroups::bruhat::{
    conjugation_average, fourier_coefficient, hilbert_inequality_check, random_measure,
    vanishing_check, BruhatMeasure,
};
use tdgroups::burger_mozes::bm_check;
use tdgroups::group::PermGroup;
use tdgroups::haar::{coset_equal, partition_cap, partition_coset, set_partition_cap, Coset};
use tdgroups::hecke::{preset_group, DoubleCosetAlgebra};
use tdgroups::hnn::{britton_reduce, hnn_witness, parse_word, BaumslagSolitar, FiniteBase, HnnBase};
use tdgroups::orbit::{
    default_generators, depth_one_generators, element_closure, growth_certificate, orbit_lower_bound_bfs,
    star_rows_csv, star_rows_json, star_table,
};
use tdgroups::{selftest, AlmostAutomorphism, Error, SubgroupClass, TreeShape};

/// Caps the number of pieces, cosets and group elements any single
/// computation may enumerate.
const CAP_VAR: &str = "TDG_MAX_PARTS";

#[derive(Parser)]
#[command(name = "tdg", version, about = "Exact computations for groups acting on trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct ShapeArgs {
    #[arg(long, default_value_t = 2)]
    d: u32,
    #[arg(long, default_value_t = 2)]
    k: u32,
}

impl ShapeArgs {
    fn shape(&self) -> Result<TreeShape, Error> {
        TreeShape::new(self.d, self.k)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compose, invert, canonicalize or classify almost automorphisms.
    Element {
        #[command(subcommand)]
        op: ElementOp,
    },
    /// Fourier coefficients of finitary measures.
    Fourier {
        #[command(subcommand)]
        op: FourierOp,
    },
    /// Witness lower bounds times the squared measure of K^(n).
    Star {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long)]
        element: String,
        #[arg(long)]
        from: u32,
        #[arg(long)]
        to: u32,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Also certify where the consecutive ratio exceeds 1, checking exactly up to this level.
        #[arg(long)]
        growth_to: Option<u32>,
    },
    /// Breadth-first conjugation-orbit certificate for a coset gK^(n).
    Orbit {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long)]
        element: String,
        #[arg(long)]
        level: u32,
        #[arg(long, default_value_t = 64)]
        budget: usize,
        #[arg(long, value_enum, default_value_t = GeneratorSet::Default)]
        generators: GeneratorSet,
    },
    /// Normal forms in HNN extensions and amalgamated products.
    Nf {
        #[command(subcommand)]
        kind: NfKind,
    },
    /// Conjugation witnesses with growing normal-form length.
    Witness {
        #[command(subcommand)]
        kind: WitnessKind,
    },
    /// Burger–Mozes hypothesis check for a permutation group.
    BmCheck {
        #[arg(long)]
        degree: usize,
        #[arg(long)]
        gens: String,
    },
    /// Double-coset algebra of a finite permutation group.
    Hecke {
        /// Preset (s<n>, aut22, c3xs3) or generators in cycle notation.
        #[arg(long)]
        group: String,
        /// Degree, required when the group is given by generators.
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        subgroup: String,
        /// Generators of a subgroup normalizing the subgroup, for the commutant.
        #[arg(long)]
        h: Option<String>,
    },
    /// Run the built-in invariant suite.
    Selftest,
}

#[derive(Subcommand)]
enum ElementOp {
    Compose {
        #[command(flatten)]
        shape: ShapeArgs,
        /// Applied second.
        g: String,
        /// Applied first.
        h: String,
    },
    Invert {
        #[command(flatten)]
        shape: ShapeArgs,
        g: String,
    },
    Canonical {
        #[command(flatten)]
        shape: ShapeArgs,
        g: String,
    },
    Member {
        #[command(flatten)]
        shape: ShapeArgs,
        g: String,
        /// N, O, K, Kn:<n> or On:<n>.
        #[arg(long)]
        class: String,
    },
}

#[derive(Args)]
struct MeasureArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Measure in JSON form; the shape is read from the file.
    #[arg(long, conflicts_with = "seed")]
    measure: Option<String>,
    /// Seed for a random measure instead of a file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 2)]
    max_level: u32,
}

impl MeasureArgs {
    fn load(&self) -> Result<BruhatMeasure, Error> {
        match (&self.measure, self.seed) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidElement(format!("cannot read {path}: {e}")))?;
                let v: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
                    pos: e.column(),
                    msg: format!("measure JSON line {}: {e}", e.line()),
                })?;
                BruhatMeasure::from_json(&v)
            }
            (None, Some(seed)) => random_measure(self.shape.shape()?, seed, self.max_level, 2, 2),
            (None, None) => Err(Error::InvalidElement("give --measure <file> or --seed <n>".into())),
        }
    }
}

#[derive(Subcommand)]
enum FourierOp {
    /// φ(gK^(n)) for the coset of --rep at --level.
    Coeff {
        #[command(flatten)]
        m: MeasureArgs,
        #[arg(long, default_value = "{->}")]
        rep: String,
        #[arg(long)]
        level: u32,
    },
    /// Compares φ(gK^(n)) with the sum over the level-`to` cosets inside it.
    CheckPartition {
        #[command(flatten)]
        m: MeasureArgs,
        #[arg(long, default_value = "{->}")]
        rep: String,
        #[arg(long)]
        level: u32,
        #[arg(long)]
        to: u32,
    },
    /// Whether all level-n coefficients vanish, cross-checked against f ∗ p_K.
    CheckVanishing {
        #[command(flatten)]
        m: MeasureArgs,
        #[arg(long)]
        level: u32,
    },
    /// ‖f ∗ ξ_K‖² ≥ N |φ(gK)|² over the group generated by the conjugators.
    CheckHilbert {
        #[command(flatten)]
        m: MeasureArgs,
        #[arg(long, default_value = "{->}")]
        rep: String,
        #[arg(long)]
        level: u32,
        /// Semicolon-separated element DSLs.
        #[arg(long)]
        conjugators: String,
        /// Replace f by its average over the generated group first.
        #[arg(long)]
        average: bool,
    },
}

#[derive(Subcommand)]
enum NfKind {
    Hnn {
        /// bs(m,n), c4 or s3.
        #[arg(long, default_value = "bs(2,3)")]
        group: String,
        word: String,
    },
    Afp {
        /// s3s3 or c6c4.
        #[arg(long, default_value = "s3s3")]
        group: String,
        word: String,
    },
}

#[derive(Subcommand)]
enum WitnessKind {
    Hnn {
        #[arg(long, default_value = "bs(2,3)")]
        group: String,
        #[arg(long, default_value_t = 1)]
        m: u32,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        word: String,
    },
    Afp {
        #[arg(long, default_value = "s3s3")]
        group: String,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        /// Require the conjugator letters to normalize K.
        #[arg(long)]
        strict: bool,
        word: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorSet {
    /// Adjacent and crossing ball swaps at the coset level.
    Default,
    /// Child swaps at the displaced ball of the element.
    DepthOne,
}

fn parse_element(shape: TreeShape, s: &str) -> Result<AlmostAutomorphism, Error> {
    let t = s.trim();
    let body = match t.strip_prefix(&format!("{shape}:")) {
        Some(rest) => rest,
        None if t.starts_with("T(") => {
            return Err(Error::InvalidShape(format!("element \"{t}\" is not written for {shape}")));
        }
        None => t,
    };
    AlmostAutomorphism::parse(shape, body)
}

fn show(g: &AlmostAutomorphism) -> String {
    format!("{}:{g}", g.shape())
}

fn rat(q: &BigRational) -> Value {
    json!({"num": q.numer().to_string(), "den": q.denom().to_string()})
}

fn run_element(op: ElementOp) -> Result<Value, Error> {
    Ok(match op {
        ElementOp::Compose { shape, g, h } => {
            let s = shape.shape()?;
            let (g, h) = (parse_element(s, &g)?, parse_element(s, &h)?);
            json!({"result": show(&g.compose(&h))})
        }
        ElementOp::Invert { shape, g } => {
            let g = parse_element(shape.shape()?, &g)?;
            json!({"result": show(&g.inverse())})
        }
        ElementOp::Canonical { shape, g } => {
            let g = parse_element(shape.shape()?, &g)?;
            json!({
                "result": show(&g),
                "leaves": g.pieces().len(),
                "exponents": g.exponents().map(|(a, e)| json!({"leaf": a.to_string(), "exponent": e})).collect::<Vec<_>>(),
            })
        }
        ElementOp::Member { shape, g, class } => {
            let g = parse_element(shape.shape()?, &g)?;
            let c: SubgroupClass = class.parse()?;
            json!({"element": show(&g), "class": c.to_string(), "member": g.membership(c)})
        }
    })
}

fn run_fourier(op: FourierOp) -> Result<Value, Error> {
    match op {
        FourierOp::Coeff { m, rep, level } => {
            let f = m.load()?;
            let c = Coset::new(parse_element(f.shape(), &rep)?, level);
            Ok(json!({"coset": {"rep": show(&c.rep), "level": level}, "phi": rat(&fourier_coefficient(&f, &c))}))
        }
        FourierOp::CheckPartition { m, rep, level, to } => {
            let f = m.load()?;
            let c = Coset::new(parse_element(f.shape(), &rep)?, level);
            let whole = fourier_coefficient(&f, &c);
            let parts = partition_coset(&c, to)?;
            let sum: BigRational = parts.iter().map(|p| fourier_coefficient(&f, p)).sum();
            Ok(json!({
                "coset": {"rep": show(&c.rep), "level": level},
                "parts": parts.len(),
                "phi": rat(&whole),
                "sum_of_parts": rat(&sum),
                "holds": whole == sum,
            }))
        }
        FourierOp::CheckVanishing { m, level } => {
            let f = m.load()?;
            Ok(json!({"level": level, "vanishes": vanishing_check(&f, level)?, "consistent": true}))
        }
        FourierOp::CheckHilbert {
            m,
            rep,
            level,
            conjugators,
            average,
        } => {
            let mut f = m.load()?;
            let shape = f.shape();
            let gens = conjugators
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(|s| parse_element(shape, s))
                .collect::<Result<Vec<_>, _>>()?;
            let group = element_closure(shape, &gens, partition_cap())?;
            if average {
                f = conjugation_average(&f, &group)?;
            }
            let c = Coset::new(parse_element(shape, &rep)?, level);
            let report = hilbert_inequality_check(&f, &group, &c)?;
            let mut distinct = true;
            for (i, a) in report.orbit.iter().enumerate() {
                for b in &report.orbit[..i] {
                    distinct &= !coset_equal(a, b)?;
                }
            }
            Ok(json!({
                "group_order": group.len(),
                "distinct_cosets": report.distinct,
                "distinct_reverified": distinct,
                "phi": rat(&report.phi),
                "lhs": rat(&report.lhs),
                "rhs": rat(&report.rhs),
                "holds": report.holds,
            }))
        }
    }
}

fn hnn_base(name: &str) -> Result<HnnChoice, Error> {
    let t = name.trim().to_ascii_lowercase().replace(' ', "");
    if let Some(args) = t.strip_prefix("bs(").and_then(|r| r.strip_suffix(')')) {
        let (a, b) = args
            .split_once(',')
            .ok_or_else(|| Error::InvalidGroup(format!("expected bs(m,n), got \"{name}\"")))?;
        let parse = |x: &str| x.parse::<i64>().map_err(|_| Error::InvalidGroup(format!("bad BS parameter \"{x}\"")));
        return Ok(HnnChoice::Bs(BaumslagSolitar::new(parse(a)?, parse(b)?)?));
    }
    match t.as_str() {
        "c4" => Ok(HnnChoice::Finite(FiniteBase::cyclic4())),
        "s3" => Ok(HnnChoice::Finite(FiniteBase::s3_transpositions())),
        _ => Err(Error::InvalidGroup(format!("unknown HNN group \"{name}\" (bs(m,n), c4, s3)"))),
    }
}

enum HnnChoice {
    Bs(BaumslagSolitar),
    Finite(FiniteBase),
}

fn hnn_nf<B: HnnBase>(base: &B, word: &str) -> Result<Value, Error> {
    let w = parse_word(base, word)?;
    let r = britton_reduce(base, &w);
    Ok(json!({
        "group": base.name(),
        "input": w.format(base),
        "normal_form": r.format(base),
        "sigma": r.sigma(),
        "tau": r.tau(),
    }))
}

fn hnn_wit<B: HnnBase>(base: &B, word: &str, m: u32, n_max: usize) -> Result<Value, Error>
where
    B::Elem: Clone + Eq,
{
    let g = parse_word(base, word)?;
    Ok(hnn_witness(base, &g, m, None, None, n_max)?.to_json(base))
}

fn run_nf(kind: NfKind) -> Result<Value, Error> {
    match kind {
        NfKind::Hnn { group, word } => match hnn_base(&group)? {
            HnnChoice::Bs(b) => hnn_nf(&b, &word),
            HnnChoice::Finite(b) => hnn_nf(&b, &word),
        },
        NfKind::Afp { group, word } => {
            let am = Amalgam::preset(&group)?;
            let letters = am.parse_letters(&word)?;
            let g = am.normal_form(&letters);
            Ok(json!({"group": am.name, "normal_form": am.format(&g), "length": g.len(), "in_k": am.is_in_k(&g)}))
        }
    }
}

fn run_witness(kind: WitnessKind) -> Result<Value, Error> {
    match kind {
        WitnessKind::Hnn { group, m, n_max, word } => match hnn_base(&group)? {
            HnnChoice::Bs(b) => hnn_wit(&b, &word, m, n_max),
            HnnChoice::Finite(b) => hnn_wit(&b, &word, m, n_max),
        },
        WitnessKind::Afp {
            group,
            n_max,
            strict,
            word,
        } => {
            let am = Amalgam::preset(&group)?;
            let g = am.parse(&word)?;
            Ok(afp_witness(&am, &g, None, None, None, n_max, strict)?.to_json(&am))
        }
    }
}

fn run_hecke(group: &str, degree: Option<usize>, subgroup: &str, h: Option<&str>) -> Result<Value, Error> {
    let q = if group.contains('(') {
        let d = degree.ok_or_else(|| Error::InvalidGroup("--degree is needed with generators".into()))?;
        PermGroup::parse(d, group)?
    } else {
        preset_group(group)?
    };
    let k = PermGroup::parse(q.degree(), subgroup)?;
    let alg = DoubleCosetAlgebra::new(q.clone(), k.clone())?;
    let mut out = alg.to_json();
    let mut dims = vec![json!({"h": "trivial", "dimension": alg.commutant_dimension(&PermGroup::trivial(q.degree()))?})];
    dims.push(json!({"h": "k", "dimension": alg.commutant_dimension(&k)?}));
    if let Some(h) = h {
        let hg = PermGroup::parse(q.degree(), h)?;
        dims.push(json!({
            "h": hg.gens_string(),
            "dimension": alg.commutant_dimension(&hg)?,
            "conjugation_orbits": alg.conjugation_orbit_count(&hg)?,
        }));
    }
    out["commutant_dimensions"] = Value::Array(dims);
    out["note"] = json!("finite-level shadow; factoriality concerns the infinite limit");
    Ok(out)
}

enum Output {
    Json(Value),
    Text(String),
}

fn run(cli: Cli) -> Result<Output, Error> {
    Ok(match cli.command {
        Command::Element { op } => Output::Json(run_element(op)?),
        Command::Fourier { op } => Output::Json(run_fourier(op)?),
        Command::Star {
            shape,
            element,
            from,
            to,
            format,
            growth_to,
        } => {
            let s = shape.shape()?;
            let g = parse_element(s, &element)?;
            let rows = star_table(s, &g, from, to)?;
            match format {
                Format::Csv => Output::Text(star_rows_csv(&rows)),
                Format::Json => {
                    let mut out = json!({"shape": s.to_string(), "element": show(&g), "rows": star_rows_json(&rows)});
                    if let Some(n) = growth_to {
                        out["growth"] = growth_certificate(s, &g, n)?.to_json();
                    }
                    Output::Json(out)
                }
            }
        }
        Command::Orbit {
            shape,
            element,
            level,
            budget,
            generators,
        } => {
            let s = shape.shape()?;
            let g = parse_element(s, &element)?;
            let gens = match generators {
                GeneratorSet::Default => default_generators(s, level)?,
                GeneratorSet::DepthOne => depth_one_generators(&g)?,
            };
            let cert = orbit_lower_bound_bfs(&Coset::new(g, level), &gens, budget)?;
            let mut out = cert.to_json();
            out["generators"] = json!(gens.len());
            out["verified"] = json!(cert.verify()?);
            Output::Json(out)
        }
        Command::Nf { kind } => Output::Json(run_nf(kind)?),
        Command::Witness { kind } => Output::Json(run_witness(kind)?),
        Command::BmCheck { degree, gens } => Output::Json(bm_check(&PermGroup::parse(degree, &gens)?).to_json()),
        Command::Hecke {
            group,
            degree,
            subgroup,
            h,
        } => Output::Json(run_hecke(&group, degree, &subgroup, h.as_deref())?),
        Command::Selftest => {
            let results = selftest::run_all();
            let v = selftest::to_json(&results);
            if !results.iter().all(|r| r.passed) {
                println!("{}", serde_json::to_string_pretty(&v).unwrap());
                return Err(Error::Consistency("selftest failed".into()));
            }
            Output::Json(v)
        }
    })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ResourceLimit(_) => 3,
        Error::Consistency(_) => 1,
        _ => 2,
    }
}

// A closed pipe downstream is not an error worth a panic.
fn emit(text: &str) -> ExitCode {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    if let Ok(v) = std::env::var(CAP_VAR) {
        match v.trim().parse::<usize>() {
            Ok(cap) if cap > 0 => set_partition_cap(cap),
            _ => {
                eprintln!("error: {CAP_VAR} must be a positive integer, got \"{v}\"");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(Output::Json(v)) => emit(&format!("{}\n", serde_json::to_string_pretty(&v).expect("JSON values serialize"))),
        Ok(Output::Text(t)) => emit(&t),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
