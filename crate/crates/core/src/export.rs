//! Plot-ready path tables with a common column schema.

use std::fmt::Write;

use crate::benchmark::BenchmarkPath;
use crate::disclosure::{EquilibriumPath, PathState};
use crate::model::Market;
use crate::verify::GridProblem;

pub const PATH_HEADER: &str = "t,q,z_good,z_bad,x,phase_index";

/// Where rows are taken along a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    /// `points` equally spaced times on `[0, end]`.
    Uniform { points: usize },
    /// Every breakpoint (both sides of a jump) plus `per_piece` interior
    /// points between consecutive breakpoints.
    EventAligned { per_piece: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRow {
    pub t: f64,
    pub q: f64,
    pub z_good: f64,
    pub z_bad: f64,
    pub x: f64,
    /// 1-based index of the marginal cohort.
    pub phase_index: usize,
}

impl PathRow {
    fn new(market: &Market, t: f64, s: PathState) -> Self {
        Self {
            t,
            q: s.q,
            z_good: s.z_good,
            z_bad: s.z_bad,
            x: market.posterior_no_news(s.z_good, s.z_bad),
            phase_index: market.marginal_cohort(s.q) + 1,
        }
    }
}

/// `x` with 12 significant digits in positional notation.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).clamp(0, 340) as usize;
    let s = format!("{x:.decimals$}");
    if s.starts_with("-0") && s.trim_start_matches(['-', '0', '.']).is_empty() {
        return "0".into();
    }
    s
}

fn sample_times(breakpoints: &[f64], end: f64, sampling: Sampling) -> Vec<(f64, bool)> {
    match sampling {
        Sampling::Uniform { points } => {
            let n = points.max(2);
            (0..n).map(|k| (end * k as f64 / (n - 1) as f64, false)).collect()
        }
        Sampling::EventAligned { per_piece } => {
            let mut knots: Vec<f64> = std::iter::once(0.0)
                .chain(breakpoints.iter().copied().filter(|&t| t > 0.0 && t < end))
                .chain(std::iter::once(end))
                .collect();
            knots.dedup();
            let mut out = Vec::new();
            for w in knots.windows(2) {
                out.push((w[0], true));
                let step = (w[1] - w[0]) / (per_piece + 1) as f64;
                out.extend((1..=per_piece).map(|k| (w[0] + k as f64 * step, false)));
            }
            out.push((end, true));
            out
        }
    }
}

/// Rows along an equilibrium path up to `end`. Event-aligned sampling emits
/// the left limit before the right limit at each breakpoint.
pub fn equilibrium_rows(path: &EquilibriumPath, end: f64, sampling: Sampling) -> Vec<PathRow> {
    let market = &path.market;
    let mut rows = Vec::new();
    for (t, at_knot) in sample_times(&path.breakpoints(), end, sampling) {
        let after = path.state_at(t);
        if at_knot && t > 0.0 {
            let before = path.state_before(t);
            if before != after {
                rows.push(PathRow::new(market, t, before));
            }
        }
        rows.push(PathRow::new(market, t, after));
    }
    rows
}

/// Rows along the transparent benchmark, where both channels equal `q`.
pub fn benchmark_rows(market: &Market, path: &BenchmarkPath, end: f64, sampling: Sampling) -> Vec<PathRow> {
    let breakpoints = path.phase_times();
    sample_times(&breakpoints, end, sampling)
        .into_iter()
        .map(|(t, _)| {
            let q = path.q_at(t);
            PathRow::new(market, t, PathState { q, z_good: q, z_bad: q })
        })
        .collect()
}

/// Rows at the grid times of a discretized path.
pub fn grid_rows(market: &Market, path: &GridProblem) -> Vec<PathRow> {
    (0..path.times.len())
        .map(|k| {
            let s = PathState { q: path.q_grid[k], z_good: path.zg_grid[k], z_bad: path.zb_grid[k] };
            PathRow::new(market, path.times[k], s)
        })
        .collect()
}

pub fn to_csv(rows: &[PathRow]) -> String {
    let mut out = String::from(PATH_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            sig12(r.t),
            sig12(r.q),
            sig12(r.z_good),
            sig12(r.z_bad),
            sig12(r.x),
            r.phase_index
        );
    }
    out
}

/// A sampling window that shows the whole adjustment: past the last
/// breakpoint by a quarter, or `fallback` when nothing ends.
pub fn plot_end(breakpoints: &[f64], fallback: f64) -> f64 {
    match breakpoints.iter().copied().filter(|t| t.is_finite() && *t > 0.0).fold(None, |m: Option<f64>, t| {
        Some(m.map_or(t, |m| m.max(t)))
    }) {
        Some(last) => 1.25 * last,
        None => fallback,
    }
}
