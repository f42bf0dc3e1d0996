//! Exact side of the problem: the integer model, its text exports, a
//! branch-and-bound solver and an exhaustive reference for tiny inputs.

mod bound;
mod enumerate;
mod exact;
mod export;
mod model;

use thiserror::Error;

pub use enumerate::{enumerate_optimum, MAX_ENUM_DEMANDS, MAX_ENUM_OENS};
pub use exact::{solve_exact, ExactLimits, ExactOutcome, ExactStatus};
pub use export::{export, ExportFormat};
pub use model::{build_model, IlpModel, ModelOptions, Row, RowKind, Sense, VarKey, Variable};

#[derive(Debug, Error)]
pub enum IlpError {
    #[error("demand {demand} has no route within its delay budget")]
    NoCandidatePath { demand: usize },
    #[error("exhaustive search is limited to {MAX_ENUM_DEMANDS} demands and {MAX_ENUM_OENS} OENs (got {demands} and {oens})")]
    TooLarge { demands: usize, oens: usize },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("search produced an infeasible solution: {0}")]
    Infeasible(String),
}
