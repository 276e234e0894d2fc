use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("invalid tree shape: {0}")]
    InvalidShape(String),

    #[error("invalid address: {0}")]
    InvalidAddress(String),

    #[error("invalid refinement target: {0}")]
    InvalidTarget(String),

    #[error("invalid element: {0}")]
    InvalidElement(String),

    #[error("ball {0} is not rigid for this element; refine first")]
    BallNotRigid(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("the identity has no displaced ball")]
    IdentityInput,

    #[error("coset levels differ ({0} vs {1})")]
    LevelMismatch(u32, u32),

    #[error("element does not normalize K^({level}): {element}")]
    NotNormalizing { element: String, level: u32 },

    #[error("measure is not invariant under conjugation by {0}")]
    InvarianceViolation(String),

    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    #[error("invalid group data: {0}")]
    InvalidGroup(String),

    #[error("internal consistency failure: {0}")]
    Consistency(String),
}

impl Error {
    pub(crate) fn parse(pos: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            pos,
            msg: msg.into(),
        }
    }

    pub fn is_resource_limit(&self) -> bool {
        matches!(self, Error::ResourceLimit(_))
    }
}
