use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("{users} users need {needed} channel pairs, only {available} available (short by {})", needed - available)]
    Capacity {
        users: usize,
        needed: usize,
        available: usize,
    },
    #[error("channel pair ({0}, {1}) is not energy-conjugate about the degenerate frequency")]
    NotConjugate(u32, u32),
    #[error("channel {0} assigned more than once")]
    ChannelReuse(u32),
    #[error("delay slots {a} ps and {b} ps closer than the {min} ps separation")]
    SlotCollision { a: i64, b: i64, min: i64 },
    #[error("time tags not sorted at index {0}")]
    Ordering(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] qlink_core::Error),
}

pub type Result<T> = std::result::Result<T, NetError>;
