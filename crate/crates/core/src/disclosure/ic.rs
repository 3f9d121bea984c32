//! Stopping values along a path and incentive-compatibility checks.

use rayon::prelude::*;

use crate::model::Market;

use super::path::{ChannelMode, EquilibriumPath, JumpKind, PathState, Piece};
use super::schedule::DisclosurePolicy;
use super::welfare::{integration_end, tracking_pickups};

/// Where an agent's information set sits on the path.
#[derive(Debug, Clone, Copy)]
struct InfoPoint {
    time: f64,
    /// Index into `pieces` of the first piece not yet observed.
    first_piece: usize,
    state: PathState,
}

fn info_before(path: &EquilibriumPath, t: f64) -> InfoPoint {
    let first_piece = path
        .pieces
        .iter()
        .position(|p| match p {
            Piece::Jump(j) => j.time >= t,
            Piece::Segment(s) => s.t_end > t,
        })
        .unwrap_or(path.pieces.len());
    InfoPoint { time: t, first_piece, state: path.state_before(t) }
}

fn info_after(path: &EquilibriumPath, t: f64) -> InfoPoint {
    let first_piece = path
        .pieces
        .iter()
        .position(|p| match p {
            Piece::Jump(j) => j.time > t,
            Piece::Segment(s) => s.t_end > t,
        })
        .unwrap_or(path.pieces.len());
    InfoPoint { time: t, first_piece, state: path.state_at(t) }
}

/// Values of "invest at `stop` absent news, at once on good news, never after
/// bad news" for each stop time in `stops` (sorted ascending, all `>= info.time`).
/// Releases at a stop time are observed before stopping.
fn stop_values(market: &Market, path: &EquilibriumPath, cohort: usize, info: InfoPoint, stops: &[f64]) -> Vec<f64> {
    let r = market.cohorts[cohort].discount;
    let k = market.prior * market.v_good;
    let p0 = market.no_news_probability(info.state.z_good, info.state.z_bad);
    let mut out = Vec::with_capacity(stops.len());
    let mut pickups = 0.0;
    let mut state = info.state;
    let mut idx = info.first_piece;
    let mut covered = info.time;
    for &stop in stops {
        while idx < path.pieces.len() {
            match &path.pieces[idx] {
                Piece::Jump(j) => {
                    if j.time > stop {
                        break;
                    }
                    if j.kind == JumpKind::Release {
                        let g = k * ((-market.rate_good * j.before.z_good).exp()
                            - (-market.rate_good * j.after.z_good).exp());
                        pickups += (-r * (j.time - info.time)).exp() * g;
                    }
                    state.z_good = j.after.z_good;
                    state.z_bad = j.after.z_bad;
                    idx += 1;
                }
                Piece::Segment(seg) => {
                    let lo = covered.max(seg.t_start);
                    let end = if stop.is_finite() { seg.t_end.min(stop) } else { integration_end(market, seg) };
                    if end > lo && seg.good == ChannelMode::Tracking {
                        pickups += tracking_pickups(market, seg, r, info.time, lo, end);
                    }
                    if end > lo || seg.t_start <= stop {
                        let s = seg.state_at(if stop.is_finite() { stop.min(seg.t_end) } else { seg.t_end });
                        state.z_good = s.z_good;
                        state.z_bad = s.z_bad;
                    }
                    covered = covered.max(end);
                    if seg.t_end <= stop {
                        idx += 1;
                    } else {
                        break;
                    }
                }
            }
        }
        let terminal = if stop.is_finite() {
            (-r * (stop - info.time)).exp() * market.no_news_value(state.z_good, state.z_bad).max(0.0)
        } else {
            0.0
        };
        out.push((pickups + terminal) / p0);
    }
    out
}

/// Expected payoff at `from_time`, given the information observed just before
/// it, of investing at `stop_time` absent news (or immediately on good news).
pub fn stopping_value(market: &Market, path: &EquilibriumPath, cohort_index: usize, from_time: f64, stop_time: f64) -> f64 {
    let info = info_before(path, from_time);
    if stop_time <= from_time {
        let s = info.state;
        return market.expected_value(market.posterior_no_news(s.z_good, s.z_bad));
    }
    stop_values(market, path, cohort_index, info, &[stop_time])[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// An investing agent must not gain from delaying.
    Invest,
    /// A waiting agent must not gain from investing now.
    Wait,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcSample {
    pub cohort_index: usize,
    pub decision_time: f64,
    pub deviation_stop_time: f64,
    pub slack: f64,
    pub constraint: Constraint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcReport {
    /// Binding deviation for each checked decision.
    pub samples: Vec<IcSample>,
    pub min_slack: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IcReport {
    pub fn worst(&self) -> Option<&IcSample> {
        self.samples.iter().min_by(|a, b| a.slack.total_cmp(&b.slack))
    }
}

struct Decision {
    cohort: usize,
    time: f64,
    info: InfoPoint,
    invest_value: f64,
    constraint: Constraint,
}

const INTERIOR_SAMPLES: usize = 4;

fn investment_decisions(market: &Market, path: &EquilibriumPath) -> Vec<Decision> {
    let mut out = Vec::new();
    for (idx, piece) in path.pieces.iter().enumerate() {
        match piece {
            Piece::Segment(seg) if seg.is_moving() => {
                let span = if seg.t_end.is_finite() {
                    seg.t_end - seg.t_start
                } else {
                    4.0 / market.cohorts[seg.cohort_index].discount
                };
                for k in 0..INTERIOR_SAMPLES {
                    let t = seg.t_start + span * k as f64 / INTERIOR_SAMPLES as f64;
                    let info = info_after(path, t);
                    let s = info.state;
                    out.push(Decision {
                        cohort: seg.cohort_index,
                        time: t,
                        info,
                        invest_value: market.expected_value(market.posterior_no_news(s.z_good, s.z_bad)),
                        constraint: Constraint::Invest,
                    });
                }
            }
            Piece::Jump(j) if j.kind == JumpKind::Investment => {
                let info = InfoPoint { time: j.time, first_piece: idx, state: j.before };
                let value = market.expected_value(market.posterior_no_news(j.before.z_good, j.before.z_bad));
                for c in 0..market.n_cohorts() {
                    let lo = market.mass_before(c);
                    let hi = market.cumulative_mass(c);
                    if j.after.q > lo && j.before.q < hi {
                        out.push(Decision {
                            cohort: c,
                            time: j.time,
                            info,
                            invest_value: value,
                            constraint: Constraint::Invest,
                        });
                    }
                }
            }
            _ => {}
        }
    }
    out
}

fn is_investing_at(path: &EquilibriumPath, cohort: usize, t: f64) -> bool {
    path.pieces.iter().any(|p| match p {
        Piece::Segment(s) => s.is_moving() && s.cohort_index == cohort && s.t_start <= t && t < s.t_end,
        Piece::Jump(j) => {
            j.kind == JumpKind::Investment
                && j.time == t
                && path.market.remaining_in(cohort, j.before.q) > path.market.remaining_in(cohort, j.after.q)
        }
    })
}

/// Checks both incentive constraints along `path`.
///
/// Investing decisions are sampled inside every investment segment and at
/// every atom; waiting decisions at every grid time for cohorts with
/// remaining mass that do not invest then. Deviation stop times are the grid,
/// the path breakpoints, the decision times and never.
pub fn verify_ic(
    market: &Market,
    _policy: &DisclosurePolicy,
    path: &EquilibriumPath,
    deviation_grid: &[f64],
    tolerance: f64,
) -> IcReport {
    let mut decisions = investment_decisions(market, path);
    let mut candidates: Vec<f64> = deviation_grid.iter().copied().filter(|t| t.is_finite() && *t >= 0.0).collect();
    candidates.extend(path.breakpoints());
    candidates.extend(decisions.iter().map(|d| d.time));
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    candidates.push(f64::INFINITY);

    for &t in deviation_grid.iter().filter(|t| t.is_finite() && **t >= 0.0) {
        let q = path.state_before(t).q;
        for c in 0..market.n_cohorts() {
            if market.remaining_in(c, q) > 1e-12 && !is_investing_at(path, c, t) {
                let info = info_before(path, t);
                let s = info.state;
                decisions.push(Decision {
                    cohort: c,
                    time: t,
                    info,
                    invest_value: market.expected_value(market.posterior_no_news(s.z_good, s.z_bad)),
                    constraint: Constraint::Wait,
                });
            }
        }
    }

    let samples: Vec<IcSample> = decisions
        .par_iter()
        .map(|d| {
            let mut stops: Vec<f64> = candidates.iter().copied().filter(|&tau| tau >= d.time).collect();
            if stops.first() != Some(&d.time) {
                stops.insert(0, d.time);
            }
            let values = stop_values(market, path, d.cohort, d.info, &stops);
            let (best_tau, best) = stops
                .iter()
                .zip(&values)
                .filter(|(tau, _)| **tau > d.time || d.constraint == Constraint::Wait)
                .fold((f64::NAN, f64::NEG_INFINITY), |acc, (&tau, &v)| if v > acc.1 { (tau, v) } else { acc });
            let slack = match d.constraint {
                Constraint::Invest => d.invest_value - best,
                Constraint::Wait => best - d.invest_value,
            };
            IcSample {
                cohort_index: d.cohort,
                decision_time: d.time,
                deviation_stop_time: best_tau,
                slack,
                constraint: d.constraint,
            }
        })
        .collect();
    let min_slack = samples.iter().map(|s| s.slack).fold(f64::INFINITY, f64::min);
    IcReport { samples, min_slack, tolerance, pass: min_slack >= -tolerance }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disclosure::{solve_equilibrium, welfare, Schedule};
    use crate::model::Cohort;

    fn grid(end: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| end * k as f64 / n as f64).collect()
    }

    #[test]
    fn stopping_now_is_current_value() {
        let m = Market::two_cohort();
        let path = solve_equilibrium(&m, &DisclosurePolicy::transparent(), 100.0).unwrap();
        let t = 0.05;
        let x = path.belief_at(t);
        assert!((stopping_value(&m, &path, 1, t, t) - m.expected_value(x)).abs() < 1e-14);
    }

    #[test]
    fn cohort_two_value_on_transparent_path() {
        let m = Market::two_cohort();
        let path = solve_equilibrium(&m, &DisclosurePolicy::transparent(), 100.0).unwrap();
        let t1 = path.phase_times[1];
        let v = stopping_value(&m, &path, 1, 0.0, t1);
        assert!((v - 5.410_840_572_893_33).abs() < 1e-9, "{v}");
    }

    #[test]
    fn transparent_path_is_incentive_compatible() {
        let m = Market::two_cohort();
        let policy = DisclosurePolicy::transparent();
        let path = solve_equilibrium(&m, &policy, 100.0).unwrap();
        let report = verify_ic(&m, &policy, &path, &grid(0.4, 40), 1e-8);
        assert!(report.pass, "{:?}", report.worst());
    }

    #[test]
    fn homogeneous_bound_binds() {
        let m = Market {
            rate_good: 1.0,
            rate_bad: 1.0,
            cohorts: vec![Cohort::new(1.0, 1.0)],
            ..Market::two_cohort()
        };
        let t_star = (5.632_120_558_828_558f64 / 5.0).ln();
        let policy = DisclosurePolicy::delayed_good_news(t_star);
        let path = solve_equilibrium(&m, &policy, 100.0).unwrap();
        let v = stopping_value(&m, &path, 0, 0.0, t_star);
        assert!((v - 5.0).abs() < 1e-10, "{v}");
        let report = verify_ic(&m, &policy, &path, &grid(0.3, 30), 1e-8);
        assert!(report.pass, "{:?}", report.worst());
    }

    #[test]
    fn delayed_bad_news_atom_is_incentive_compatible() {
        let m = Market::two_cohort();
        let policy = DisclosurePolicy { good: Schedule::Silent, bad: Schedule::DelayUntil(50.0) };
        let path = solve_equilibrium(&m, &policy, 100.0).unwrap();
        let report = verify_ic(&m, &policy, &path, &grid(60.0, 60), 1e-8);
        assert!(report.pass, "{:?}", report.worst());
    }

    #[test]
    fn payoffs_equalize_within_phase() {
        let m = Market::two_cohort();
        let policy = DisclosurePolicy::transparent();
        let path = solve_equilibrium(&m, &policy, 100.0).unwrap();
        let (t1, t2) = (path.phase_times[1], path.phase_times[2]);
        let first = stopping_value(&m, &path, 1, 0.0, t1);
        for k in 1..=5 {
            let tau = t1 + (t2 - t1) * k as f64 / 5.0;
            assert!((stopping_value(&m, &path, 1, 0.0, tau) - first).abs() < 1e-7);
        }
    }

    #[test]
    fn welfare_equals_sum_of_first_stopping_values() {
        let m = Market::two_cohort();
        for policy in [
            DisclosurePolicy::transparent(),
            DisclosurePolicy { good: Schedule::Silent, bad: Schedule::Transparent },
        ] {
            let path = solve_equilibrium(&m, &policy, 100.0).unwrap();
            let w = welfare(&m, &path);
            let sum: f64 = (0..2)
                .map(|j| {
                    let t = path.first_investment_time(j).unwrap_or(f64::INFINITY);
                    m.cohorts[j].mass * stopping_value(&m, &path, j, 0.0, t)
                })
                .sum();
            assert!((sum - w.total).abs() < 1e-7, "{sum} vs {}", w.total);
        }
    }
}
