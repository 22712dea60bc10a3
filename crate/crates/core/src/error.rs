use thiserror::Error;

use crate::spaces::ModeIndex;

/// Errors raised by the lattice-wave library.
///
/// Every variant maps to a stable machine-readable code (see [`Error::code`]),
/// which the CLI forwards in its JSON error documents.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} phases, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("assumption A1 violated: F'(-b) = {alpha1} must be positive")]
    RestoringForce { alpha1: f64 },

    #[error("assumption A2 violated: {0}")]
    PhaseCount(String),

    #[error("sequence norm {norm:.3e} outside convergence domain (limit {limit:.3e})")]
    ConvergenceDomain { norm: f64, limit: f64 },

    #[error("resonant mode {mode}: |sin(<omega,m>/2)| = {sine:.3e} below divisor floor {floor:.1e}")]
    Resonance { mode: ModeIndex, sine: f64, floor: f64 },

    #[error("singular diagonal entry at mode {0}")]
    SingularEntry(ModeIndex),

    #[error("linear system is singular or ill-conditioned (smallest pivot {pivot:.3e})")]
    Conditioning { pivot: f64 },

    #[error("{stage} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("degenerate amplitude: a_{index} = 0")]
    DegenerateAmplitude { index: usize },

    #[error("hypothesis violated at {site}: {detail}")]
    Hypothesis { site: String, detail: String },

    #[error("coupling matrix norm {norm:.3e} exceeds 1/2")]
    Coupling { norm: f64 },

    #[error("force argument {argument:.3e} outside convergence radius {radius:.3e}")]
    ForceDomain { argument: f64, radius: f64 },

    #[error("non-finite state at t = {time}")]
    BlowUp { time: f64 },

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::InvalidInput(_) => "invalid_input",
            Error::RestoringForce { .. } => "assumption_a1",
            Error::PhaseCount(_) => "assumption_a2",
            Error::ConvergenceDomain { .. } => "convergence_domain",
            Error::Resonance { .. } => "resonance",
            Error::SingularEntry(_) => "singular_entry",
            Error::Conditioning { .. } => "conditioning",
            Error::NonConvergence { .. } => "non_convergence",
            Error::DegenerateAmplitude { .. } => "degenerate_amplitude",
            Error::Hypothesis { .. } => "hypothesis",
            Error::Coupling { .. } => "coupling",
            Error::ForceDomain { .. } => "force_domain",
            Error::BlowUp { .. } => "blow_up",
            Error::Inconsistent(_) => "inconsistent",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
