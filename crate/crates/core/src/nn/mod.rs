//! Dense networks with hand-written backpropagation, masked softmax
//! policies, plain SGD and a finite-difference gradient checker.
//!
//! ReLU uses subgradient 0 at 0.

mod io;
mod mlp;
mod ops;

pub use io::{load, save};
pub use mlp::{Activation, Dense, ForwardCache, Mlp, MlpGrads};
pub use ops::{
    argmax_masked, entropy, finite_diff_check, masked_softmax, sample_categorical,
    sample_indices, LrSchedule, MASK_PENALTY,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("input has width {found}, network expects {expected}")]
    Shape { expected: usize, found: usize },
    #[error("every action is masked")]
    AllMasked,
    #[error("non-finite gradient; update skipped")]
    NonFinite,
    #[error("bad checkpoint: {0}")]
    Format(String),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
