use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Fock cutoff must be at least 1, got {0}")]
    InvalidCutoff(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("requested {requested} dressed levels but only {converged} are converged at n_fock = {n_fock}")]
    UnconvergedLevels {
        requested: usize,
        converged: usize,
        n_fock: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("steady state is not unique: null space of the generator has dimension >= 2 (pivot ratio {pivot_ratio:e})")]
    DegenerateNullSpace { pivot_ratio: f64 },

    #[error("shifted generator is numerically singular at z = {re} + {im}i (pivot ratio {pivot_ratio:e})")]
    NearSingular { re: f64, im: f64, pivot_ratio: f64 },

    #[error("no emission at the requested sensor frequency (trace {trace:e} below floor)")]
    NoEmission { trace: f64 },

    #[error("unknown transition symbol `{0}`")]
    UnknownSymbol(String),

    #[error("sensor coupling epsilon = {epsilon:e} violates epsilon << sqrt(Gamma * gamma_Q / 2) = {bound:e}")]
    WeakCouplingViolated { epsilon: f64, bound: f64 },

    #[error("composite Hilbert dimension {dim} exceeds the budget of {budget}")]
    DimensionBudget { dim: usize, budget: usize },

    #[error("grid error: {0}")]
    Grid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
