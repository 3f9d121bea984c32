//! Independent numerical checks: Monte Carlo welfare, a brute-force grid
//! oracle for the designer's problem, and property checks.

mod checks;
mod grid;
mod report;
mod simulate;

pub use checks::{
    bound_excess, check_breakdown_bound, classify_candidate, full_revelation_count, jensen_contraction_check,
    jensen_gap, myopic_crossings, observation_checks, transparent_breakdowns_stock, BoundSample, BoundVerdict, BreakdownReport,
    CrossingReport, JensenReport, Lottery, ObservationReport,
};
pub use grid::{
    discrete_ic_slack, grid_convergence, grid_search, grid_search_seeded, grid_welfare, GridConvergence, GridProblem, GridSolution,
    GridSpec, ShapeFlags,
};
pub use report::{CheckLine, CheckSuite};
pub use simulate::{simulate, SimConfig, SimEstimate, StateSampling};
