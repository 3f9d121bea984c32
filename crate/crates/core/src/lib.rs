//! Equilibrium adoption with Poisson evidence generation and designed disclosure.
//!
//! Agents with heterogeneous patience decide when to invest in a project of
//! unknown quality. Every unit of investment generates conclusive evidence
//! about the state, and a designer controls when that evidence is made public.
//! The crate computes the transparent benchmark, equilibrium paths under a
//! class of disclosure schedules, the welfare-optimal schedule, and several
//! independent numerical checks of its properties.

pub mod benchmark;
pub mod config;
pub mod designer;
pub mod disclosure;
pub mod error;
pub mod export;
pub mod model;
mod quad;
pub mod verify;

pub use benchmark::{BenchmarkPath, PhaseCoefficients, PhaseMotion, PhaseSolution};
pub use error::{ConfigError, MarketError, Result, SolveError};
pub use model::{BeliefState, Cohort, Market};
pub use designer::{optimal_policy, OptimalPlan};
pub use disclosure::{solve_equilibrium, welfare, CapPoint, DisclosurePolicy, EquilibriumPath, Schedule, WelfareReport};
pub use verify::{SimConfig, SimEstimate};
