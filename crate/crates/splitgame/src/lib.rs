//! Solver for two-player zero-sum differential games where one player knows
//! the game type and the other only tracks a public belief over types.
//!
//! The informed player's value is computed by backward induction over a time
//! grid: at every collocation point a small minimax problem in the player's
//! atomic (splitting) strategy is solved by projected gradient descent-ascent,
//! and the per-step value is fitted with a function approximator convex in the
//! belief argument. The uninformed player's strategy comes from the analogous
//! dual game over payoff-certificate vectors. A full-approximation-scheme
//! multigrid over the time grid accelerates the induction. Three analytically
//! solvable games (a linear-quadratic pursuit game, a repeated matrix game,
//! and a zero-sum signaling game) serve as built-in ground truth.

pub mod approx;
pub mod eval;
pub mod games;
pub mod induction;
pub mod linalg;
pub mod minimax;
pub mod multigrid;
pub mod oracles;
pub mod simplex;

/// Library-wide error type. CLI exit codes map onto the variants:
/// config errors exit 2, numeric failures exit 3, missing artifacts exit 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
    pub fn missing_artifact(msg: impl Into<String>) -> Self {
        Error::MissingArtifact(msg.into())
    }
}
