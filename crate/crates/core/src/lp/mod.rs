//! The relaxed problem `min f(w)` over the capped simplex, solved by
//! projected subgradient descent from an alternating warm start, or exactly
//! by a simplex method on small instances.

mod lagrangian;
mod projection;
mod simplex;
mod solver;

pub use lagrangian::{lagrangian_dual_w, lagrangian_inner_w, warm_start, WARM_START_ROUNDS};
pub use projection::{project_capped_simplex, project_hyperplane, project_two_step};
pub use simplex::solve_lp_simplex;
pub use solver::{
    solve_lp_ltad, InitMode, LpBackend, LpSolution, ProjectionMode, SolveTrace, SolverConfig, StepSchedule,
    SIMPLEX_MAX_CELLS,
};
