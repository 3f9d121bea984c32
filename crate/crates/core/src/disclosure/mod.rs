//! Disclosure policies, equilibrium construction under them, welfare and
//! incentive checks.

mod ic;
mod path;
mod schedule;
mod solve;
pub(crate) mod welfare;

pub use ic::{stopping_value, verify_ic, Constraint, IcReport, IcSample};
pub use path::{
    ChannelMode, EquilibriumPath, EventKind, Jump, JumpKind, Motion, PathEvent, PathState, Piece, Segment,
    WaitCurve,
};
pub use schedule::{CapPoint, DisclosurePolicy, Schedule};
pub use solve::solve_equilibrium;
pub use welfare::{welfare, WelfareDecomposition, WelfareReport};
