//! Linear and mixed-binary program model with a bundled exact solver.
//!
//! The solver is a bounded-variable revised simplex (primal with composite
//! phase 1, dual for warm starts) under branch-and-bound for binaries.

mod driver;
mod factor;
pub mod lpformat;
pub mod model;
mod simplex;
pub mod solution;

pub use driver::{resolve_warm, solve_lp, solve_lp_with, solve_milp, MilpOptions};
pub use lpformat::export_lp_text;
pub use model::{Constraint, ModelError, Objective, ProgramModel, Relation, Sense, VarKind, Variable};
pub use simplex::LpOptions;
pub use solution::{Basis, BasisStatus, Solution, Status};

/// A solver able to process a `ProgramModel`. Alternative engines can be
/// plugged in, e.g. by shelling out with [`export_lp_text`].
pub trait Backend: Send + Sync {
    fn solve(&self, model: &ProgramModel, opts: &MilpOptions) -> Solution;

    fn resolve(&self, model: &ProgramModel, prev: &Solution, opts: &MilpOptions) -> Solution {
        let _ = prev;
        self.solve(model, opts)
    }
}

/// The bundled simplex and branch-and-bound.
#[derive(Clone, Copy, Debug, Default)]
pub struct BundledSolver;

impl Backend for BundledSolver {
    fn solve(&self, model: &ProgramModel, opts: &MilpOptions) -> Solution {
        solve_milp(model, opts)
    }

    fn resolve(&self, model: &ProgramModel, prev: &Solution, opts: &MilpOptions) -> Solution {
        resolve_warm(model, prev, opts)
    }
}
