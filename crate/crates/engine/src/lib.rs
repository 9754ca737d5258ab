//! A small self-contained linear and mixed-integer programming engine.
//!
//! [`solve_lp`] runs a two-phase dense-tableau primal simplex that reports
//! row duals; [`solve_mip`] wraps it in best-bound branch-and-bound with an
//! optional [`CutCallback`] for lazily generated constraints. Both are meant
//! for desk-scale programs of at most a few tens of thousands of nonzeros.

mod error;
mod mip;
mod model;
mod simplex;

pub use error::EngineError;
pub use mip::{
    solve_mip, solve_relaxation, CutCallback, MipConfig, MipSolution, FEASIBILITY_TOL,
    INTEGRALITY_TOL,
};
pub use model::{LinearProgram, MixedIntegerProgram, Relation, Row, Sense, VarKind, VarMeta};
pub use simplex::{solve_lp, LpSolution};

/// Termination status shared by LP and MIP solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::TimeLimit => "time_limit",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
