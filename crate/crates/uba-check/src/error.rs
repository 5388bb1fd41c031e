use thiserror::Error;

use crate::automata::AmbiguityWitness;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Syntax error in a HOA document, with 1-based line/column.
    #[error("HOA syntax error at {line}:{col}: {msg}")]
    HoaSyntax { line: usize, col: usize, msg: String },

    /// HOA acceptance condition other than state-based Büchi.
    #[error("unsupported HOA acceptance condition: {0} (only `Buchi` / `1 Inf(0)` is supported)")]
    UnsupportedAcceptance(String),

    /// HOA feature outside the supported subset.
    #[error("unsupported HOA feature: {0}")]
    UnsupportedHoaFeature(String),

    /// Syntax or validation error in a DTMC document.
    #[error("DTMC error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Dtmc { line: Option<usize>, msg: String },

    /// The automaton admits two accepting runs over some word.
    #[error("input automaton is ambiguous: word {}({})^ω has two accepting runs",
            witness.prefix_display(), witness.cycle_display())]
    Ambiguous { witness: Box<AmbiguityWitness> },

    /// Chain labels and automaton alphabet disagree.
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    /// An operation was called outside its stated precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Numerical procedure failed to produce a trustworthy result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Invalid engine configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
