use thiserror::Error;

/// Errors produced by the segmentation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("requested capacity {requested} exceeds the limit of {limit}")]
    Capacity { requested: usize, limit: usize },

    #[error("log-factorial table covers n <= {covered}, but n = {needed} is required")]
    TableTooSmall { needed: usize, covered: usize },

    #[error("empty contingency table (n = 0)")]
    EmptyTable,

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("non-positive price {value} at index {index}")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("series must contain at least {min} observations, got {got}")]
    TooShort { min: usize, got: usize },

    #[error("labels: {0}")]
    Labels(String),

    #[error("window {start}..{end} is invalid for a series of length {len}")]
    InvalidWindow { start: usize, end: usize, len: usize },

    #[error("window of length {len} is unsplittable with min_side = {min_side}")]
    Unsplittable { len: usize, min_side: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
