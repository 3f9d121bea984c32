use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use super::report::CheckLine;
use crate::designer::homogeneous_lower_bound;
use crate::disclosure::{solve_equilibrium, verify_ic, CapPoint, DisclosurePolicy, EquilibriumPath, Schedule};
use crate::error::{Result, SolveError};
use crate::model::Market;

const SOLVE_HORIZON: f64 = 1e3;
const IC_TOL: f64 = 1e-8;

/// Verdict on one candidate bad-news policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundVerdict {
    /// The candidate path fails the incentive check, so the bound does not apply.
    IcInfeasible { min_slack: f64 },
    Within { excess: f64 },
    Violation { excess: f64 },
}

/// Largest excess of `candidate`'s revealed bad evidence over the
/// transparent-breakdowns stock on `grid`.
pub fn bound_excess(tp: &EquilibriumPath, candidate: &EquilibriumPath, grid: &[f64]) -> f64 {
    grid.iter().map(|&t| candidate.z_bad_at(t) - tp.q_at(t)).fold(f64::NEG_INFINITY, f64::max)
}

pub fn classify_candidate(
    market: &Market,
    policy: &DisclosurePolicy,
    candidate: &EquilibriumPath,
    tp: &EquilibriumPath,
    grid: &[f64],
    tol: f64,
) -> BoundVerdict {
    let ic = verify_ic(market, policy, candidate, grid, IC_TOL);
    if !ic.pass {
        return BoundVerdict::IcInfeasible { min_slack: ic.min_slack };
    }
    let excess = bound_excess(tp, candidate, grid);
    if excess > tol {
        BoundVerdict::Violation { excess }
    } else {
        BoundVerdict::Within { excess }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSample {
    pub policy: DisclosurePolicy,
    pub verdict: BoundVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownReport {
    pub samples: Vec<BoundSample>,
    pub ic_feasible: usize,
    pub violations: usize,
    pub max_excess: f64,
    pub tolerance: f64,
}

impl BreakdownReport {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }

    pub fn lines(&self) -> Vec<CheckLine> {
        vec![CheckLine::new(
            "breakdown_bound",
            self.pass(),
            self.max_excess,
            self.tolerance,
            format!(
                "{} sampled, {} incentive compatible, {} violations",
                self.samples.len(),
                self.ic_feasible,
                self.violations
            ),
        )]
    }
}

/// Random step caps: release count uniform on `1..=6`, release times uniform
/// on `[0, span]`, cap increments from a symmetric Dirichlet(1) over the
/// releases scaled to the total mass.
fn sample_caps(rng: &mut ChaCha8Rng, span: f64, total: f64) -> Schedule {
    let k = rng.random_range(1..=6usize);
    let mut times: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * span).collect();
    times.sort_by(f64::total_cmp);
    let gamma = Gamma::new(1.0, 1.0).expect("unit shape");
    let weights: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = weights.iter().sum();
    let mut cap = 0.0;
    let points = times
        .iter()
        .zip(&weights)
        .map(|(&time, w)| {
            cap += total * w / sum;
            CapPoint { time, cap }
        })
        .collect::<Vec<_>>();
    let mut points = points;
    if let Some(last) = points.last_mut() {
        last.cap = total;
    }
    Schedule::StepCaps(points)
}

/// Samples incentive-compatible bad-news step-cap policies alongside a fixed
/// good-news schedule and checks that none reveals more bad evidence at any
/// time than the transparent-breakdowns path generates.
pub fn check_breakdown_bound(market: &Market, exogenous_good: &Schedule, samples: usize, seed: u64) -> Result<BreakdownReport> {
    market.validate()?;
    let tp_policy = DisclosurePolicy { good: exogenous_good.clone(), bad: Schedule::Transparent };
    let tp = solve_equilibrium(market, &tp_policy, SOLVE_HORIZON)?;
    let span = if tp.terminal_time.is_finite() && tp.terminal_time > 0.0 {
        1.5 * tp.terminal_time
    } else {
        tp.breakpoints().into_iter().fold(1.0, f64::max)
    };
    let grid: Vec<f64> = (0..=100).map(|k| 2.0 * span * k as f64 / 100.0).collect();
    let tolerance = 1e-6;
    let total = market.total_mass();
    let results: Vec<Option<BoundSample>> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let policy = DisclosurePolicy { good: exogenous_good.clone(), bad: sample_caps(&mut rng, span, total) };
            let path = solve_equilibrium(market, &policy, SOLVE_HORIZON).ok()?;
            let mut points = grid.clone();
            points.extend(path.breakpoints());
            points.sort_by(f64::total_cmp);
            points.dedup();
            let verdict = classify_candidate(market, &policy, &path, &tp, &points, tolerance);
            Some(BoundSample { policy, verdict })
        })
        .collect();
    let samples: Vec<BoundSample> = results.into_iter().flatten().collect();
    let mut ic_feasible = 0;
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    for s in &samples {
        match s.verdict {
            BoundVerdict::IcInfeasible { .. } => {}
            BoundVerdict::Within { excess } => {
                ic_feasible += 1;
                max_excess = max_excess.max(excess);
            }
            BoundVerdict::Violation { excess } => {
                ic_feasible += 1;
                violations += 1;
                max_excess = max_excess.max(excess);
            }
        }
    }
    Ok(BreakdownReport { samples, ic_feasible, violations, max_excess, tolerance })
}

/// Two-point lottery over release times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lottery {
    pub times: [f64; 2],
    pub weight_first: f64,
}

impl Lottery {
    pub fn expected_discount(&self, r: f64) -> f64 {
        self.weight_first * (-r * self.times[0]).exp() + (1.0 - self.weight_first) * (-r * self.times[1]).exp()
    }

    /// Certain time with the same expected discount factor at rate `r`.
    pub fn certainty_equivalent(&self, r: f64) -> f64 {
        -self.expected_discount(r).ln() / r
    }
}

/// `e^{-r_other T} - E[e^{-r_other t}]` where `T` is the certainty
/// equivalent of `lottery` at rate `r_ref`. Positive for `r_other < r_ref`,
/// negative for `r_other > r_ref`.
pub fn jensen_gap(lottery: &Lottery, r_ref: f64, r_other: f64) -> f64 {
    let t_hat = lottery.certainty_equivalent(r_ref);
    (-r_other * t_hat).exp() - lottery.expected_discount(r_other)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JensenReport {
    pub instances: usize,
    /// Smallest gain for a more patient agent from replacing the lottery by its certainty equivalent.
    pub min_gap_patient: f64,
    /// Smallest loss for a less patient agent from the same replacement.
    pub min_gap_impatient: f64,
    pub tolerance: f64,
}

impl JensenReport {
    pub fn pass(&self) -> bool {
        self.min_gap_patient > self.tolerance && self.min_gap_impatient > self.tolerance
    }

    pub fn lines(&self) -> Vec<CheckLine> {
        let detail = format!("{} random lotteries", self.instances);
        vec![
            CheckLine::new(
                "jensen_patient",
                self.min_gap_patient > self.tolerance,
                self.min_gap_patient,
                self.tolerance,
                detail.clone(),
            ),
            CheckLine::new(
                "jensen_impatient",
                self.min_gap_impatient > self.tolerance,
                self.min_gap_impatient,
                self.tolerance,
                detail,
            ),
        ]
    }
}

/// Random two-point lotteries and discount triples `r_k < r_i < r_j` drawn
/// around the market's discount rates; the contraction to the certainty
/// equivalent at `r_i` must strictly help `r_k` and strictly hurt `r_j`.
pub fn jensen_contraction_check(market: &Market, random_instances: usize, seed: u64) -> Result<JensenReport> {
    market.validate()?;
    if !(market.rate_good > 0.0) {
        return Err(SolveError::InvalidArgument("contraction check needs good news to arrive".into()));
    }
    let r_lo = 0.5 * market.cohorts.iter().map(|c| c.discount).fold(f64::INFINITY, f64::min);
    let r_hi = 2.0 * market.cohorts.iter().map(|c| c.discount).fold(0.0, f64::max);
    let gaps: Vec<(f64, f64)> = (0..random_instances as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let r_i = rng.random_range(r_lo..=r_hi);
            let r_k = r_i * rng.random_range(0.1..0.9);
            let r_j = r_i * rng.random_range(1.1..3.0);
            let t0 = rng.random_range(0.0..1.0);
            let lottery = Lottery {
                times: [t0, t0 + rng.random_range(0.05..1.0)],
                weight_first: rng.random_range(0.1..0.9),
            };
            (jensen_gap(&lottery, r_i, r_k), -jensen_gap(&lottery, r_i, r_j))
        })
        .collect();
    let min_gap_patient = gaps.iter().map(|g| g.0).fold(f64::INFINITY, f64::min);
    let min_gap_impatient = gaps.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    Ok(JensenReport { instances: random_instances, min_gap_patient, min_gap_impatient, tolerance: 1e-12 })
}

/// Homogeneous full-revelation checks on a grid of `steps` cells over `[0, T*]`
/// with `levels` equal mass cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationReport {
    pub t_star: f64,
    pub steps: usize,
    pub levels: usize,
    /// Full-revelation policies releasing good news before `T*`.
    pub early_good_policies: usize,
    /// Those among them that nevertheless keep agents from waiting until `T*`.
    pub early_good_feasible: usize,
    /// Incentive-compatible full-revelation grid policies.
    pub feasible_policies: u64,
    /// Largest excess of a feasible grid policy's bad evidence over the transparent-breakdowns stock.
    pub bad_excess: f64,
    /// Distance between the closed-form transparent-breakdowns stock and the solver's path on the grid.
    pub path_gap: f64,
}

impl ObservationReport {
    pub fn pass(&self) -> bool {
        self.early_good_feasible == 0 && self.bad_excess <= 1e-9 && self.path_gap <= 1e-6 && self.feasible_policies > 0
    }

    pub fn lines(&self) -> Vec<CheckLine> {
        vec![
            CheckLine::new(
                "hidden_good_news",
                self.early_good_feasible == 0,
                self.early_good_feasible as f64,
                0.0,
                format!("{} policies reveal good news before T*={:.9}", self.early_good_policies, self.t_star),
            ),
            CheckLine::new(
                "transparent_breakdowns_max",
                self.bad_excess <= 1e-9 && self.feasible_policies > 0,
                self.bad_excess,
                1e-9,
                format!("{} feasible full-revelation policies", self.feasible_policies),
            ),
            CheckLine::new(
                "transparent_breakdowns_path",
                self.path_gap <= 1e-6,
                self.path_gap,
                1e-6,
                "closed form vs equilibrium solver",
            ),
        ]
    }
}

struct HomogeneousGrid {
    r: f64,
    lambda: f64,
    x0vg: f64,
    bad: f64,
    value: f64,
    times: Vec<f64>,
    levels: Vec<f64>,
}

impl HomogeneousGrid {
    fn new(market: &Market, t_final: f64, steps: usize, levels: usize) -> Result<Self> {
        if market.n_cohorts() != 1 || market.rate_good != market.rate_bad {
            return Err(SolveError::InvalidArgument("needs a single cohort and equal evidence rates".into()));
        }
        if steps == 0 || levels == 0 {
            return Err(SolveError::InvalidArgument("grid needs at least one step and one level".into()));
        }
        let mass = market.total_mass();
        Ok(Self {
            r: market.cohorts[0].discount,
            lambda: market.rate_good,
            x0vg: market.prior * market.v_good,
            bad: (1.0 - market.prior) * market.v_bad,
            value: market.expected_value(market.prior),
            times: (0..=steps).map(|k| t_final * k as f64 / steps as f64).collect(),
            levels: (0..=levels).map(|k| mass * k as f64 / levels as f64).collect(),
        })
    }

    /// Largest bad-news level allowed at each grid time by the incentive
    /// constraint against waiting there, given the good-news path, or `None`
    /// at a time where even no bad news is too attractive.
    fn bad_bounds(&self, good: &[usize]) -> Vec<Option<usize>> {
        let mut pickups = 0.0;
        let mut out = vec![Some(self.levels.len() - 1)];
        for k in 1..self.times.len() {
            let d = (-self.r * self.times[k]).exp();
            let zg_prev = self.levels[good[k - 1]];
            let zg = self.levels[good[k]];
            pickups += d * self.x0vg * ((-self.lambda * zg_prev).exp() - (-self.lambda * zg).exp());
            let ok = |b: usize| {
                let rhs = pickups + d * (self.x0vg * (-self.lambda * zg).exp() + self.bad * (-self.lambda * self.levels[b]).exp());
                self.value >= rhs - 1e-12 * self.value.abs().max(1.0)
            };
            out.push((0..self.levels.len()).rev().find(|&b| ok(b)));
        }
        out
    }

    /// Number of monotone bad-news paths from 0 to full revelation under `bounds`.
    fn count_bad_paths(&self, bounds: &[Option<usize>]) -> u64 {
        let top = self.levels.len() - 1;
        let mut ways = vec![0u64; top + 1];
        ways[0] = 1;
        for (k, bound) in bounds.iter().enumerate().skip(1) {
            let Some(b) = *bound else { return 0 };
            let mut next = vec![0u64; top + 1];
            let mut run = 0u64;
            for level in 0..=top {
                run += ways[level];
                if level <= b {
                    next[level] = run;
                }
            }
            if k == bounds.len() - 1 {
                return next[top];
            }
            ways = next;
        }
        ways[top]
    }

    fn good_paths(&self) -> Vec<Vec<usize>> {
        let top = self.levels.len() - 1;
        let steps = self.times.len() - 1;
        let mut out = Vec::new();
        let mut path = vec![0usize; steps + 1];
        fn rec(k: usize, steps: usize, top: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if k == steps {
                path[k] = top;
                out.push(path.clone());
                return;
            }
            for level in path[k - 1]..=top {
                path[k] = level;
                rec(k + 1, steps, top, path, out);
            }
        }
        if steps == 0 {
            path[0] = top;
            return vec![path];
        }
        rec(1, steps, top, &mut path, &mut out);
        out
    }
}

/// Number of incentive-compatible grid policies that reveal everything by `t_final`.
pub fn full_revelation_count(market: &Market, t_final: f64, steps: usize, levels: usize) -> Result<u64> {
    let grid = HomogeneousGrid::new(market, t_final, steps, levels)?;
    Ok(grid.good_paths().iter().map(|g| grid.count_bad_paths(&grid.bad_bounds(g))).sum())
}

/// Stock under transparent breakdowns with good news hidden until `T*`.
pub fn transparent_breakdowns_stock(market: &Market, t: f64) -> f64 {
    let r = market.cohorts[0].discount;
    let ratio = (market.expected_value(market.prior) * (r * t).exp() - market.prior * market.v_good)
        / ((1.0 - market.prior) * market.v_bad);
    -ratio.ln() / market.rate_bad
}

pub fn observation_checks(market: &Market, steps: usize, levels: usize) -> Result<ObservationReport> {
    market.validate()?;
    let t_star = homogeneous_lower_bound(market)?;
    if t_star <= 0.0 {
        return Ok(ObservationReport {
            t_star,
            steps,
            levels,
            early_good_policies: 0,
            early_good_feasible: 0,
            feasible_policies: 1,
            bad_excess: 0.0,
            path_gap: 0.0,
        });
    }
    let grid = HomogeneousGrid::new(market, t_star, steps, levels)?;
    let mut early_good_policies = 0;
    let mut early_good_feasible = 0;
    let mut feasible_policies = 0;
    let mut bad_excess = f64::NEG_INFINITY;
    for good in grid.good_paths() {
        let early = good[..steps].iter().any(|&g| g > 0);
        let bounds = grid.bad_bounds(&good);
        let count = grid.count_bad_paths(&bounds);
        if early {
            early_good_policies += 1;
            // Waiting until T* must not pay, whatever the bad-news timing.
            if bounds[steps].is_some_and(|b| b == levels) {
                early_good_feasible += 1;
            }
        }
        if count > 0 {
            feasible_policies += count;
            for (k, b) in bounds.iter().enumerate().take(steps) {
                // The largest level reachable by a feasible monotone path is capped by all later bounds too.
                let reach = bounds[k..].iter().map(|b| b.unwrap_or(0)).min().unwrap_or(0);
                let level = b.map_or(0, |b| b.min(reach));
                let tb = transparent_breakdowns_stock(market, grid.times[k]);
                bad_excess = bad_excess.max(grid.levels[level] - tb);
            }
        }
    }
    let path = solve_equilibrium(market, &DisclosurePolicy::delayed_good_news(t_star), SOLVE_HORIZON)?;
    let path_gap = grid
        .times
        .iter()
        .map(|&t| (path.q_at(t) - transparent_breakdowns_stock(market, t).min(market.total_mass())).abs())
        .fold(0.0, f64::max);
    Ok(ObservationReport {
        t_star,
        steps,
        levels,
        early_good_policies,
        early_good_feasible,
        feasible_policies,
        bad_excess,
        path_gap,
    })
}

/// Sign pattern of `x_t - x^myop` along a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingReport {
    /// Sign changes, ignoring points within `tolerance` of the threshold.
    pub crossings: usize,
    pub starts_above: bool,
    /// Last sampled time with the belief strictly above the threshold.
    pub last_above: f64,
}

impl CrossingReport {
    /// At most one crossing, and it goes downward.
    pub fn single_downward(&self) -> bool {
        self.crossings == 0 || (self.crossings == 1 && self.starts_above)
    }
}

/// Samples the no-news belief at both sides of every breakpoint and on a
/// uniform grid of `samples` points over `[0, end]`.
pub fn myopic_crossings(path: &EquilibriumPath, end: f64, samples: usize, tolerance: f64) -> CrossingReport {
    let market = &path.market;
    let threshold = market.myopic_threshold();
    let n = samples.max(2);
    let mut times: Vec<f64> = (0..n).map(|k| end * k as f64 / (n - 1) as f64).collect();
    times.extend(path.breakpoints().into_iter().filter(|&t| t <= end));
    times.sort_by(f64::total_cmp);
    times.dedup();
    let beliefs = times.iter().flat_map(|&t| {
        let before = path.state_before(t);
        let after = path.state_at(t);
        [(t, before), (t, after)]
    });
    let mut sign = 0i8;
    let mut crossings = 0;
    let mut starts_above = false;
    let mut last_above = f64::NEG_INFINITY;
    for (t, s) in beliefs {
        let gap = market.posterior_no_news(s.z_good, s.z_bad) - threshold;
        let current = if gap > tolerance { 1 } else if gap < -tolerance { -1 } else { 0 };
        if current > 0 {
            last_above = t;
        }
        match (sign, current) {
            (_, 0) => {}
            (0, c) => {
                starts_above = c > 0;
                sign = c;
            }
            (a, c) if a != c => {
                crossings += 1;
                sign = c;
            }
            _ => {}
        }
    }
    CrossingReport { crossings, starts_above, last_above }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disclosure::PathState;
    use crate::model::Cohort;

    fn homogeneous() -> Market {
        Market { rate_good: 1.0, rate_bad: 1.0, cohorts: vec![Cohort::new(1.0, 1.0)], ..Market::two_cohort() }
    }

    #[test]
    fn jensen_example() {
        let lottery = Lottery { times: [0.1, 0.3], weight_first: 0.5 };
        let t_hat = lottery.certainty_equivalent(2.0);
        assert!((t_hat - 0.190_065_964_079_996).abs() < 1e-14);
        assert!(((-t_hat).exp() - 0.826_904_586_144_015).abs() < 1e-14);
        assert!((lottery.expected_discount(1.0) - 0.822_827_819_358_839).abs() < 1e-14);
        assert!(jensen_gap(&lottery, 2.0, 1.0) > 0.0);
        assert!(jensen_gap(&lottery, 2.0, 3.0) < 0.0);
        assert!(jensen_gap(&lottery, 2.0, 2.0).abs() < 1e-15);
        let point = Lottery { times: [0.2, 0.2], weight_first: 0.3 };
        for r in [0.5, 1.0, 4.0] {
            assert!(jensen_gap(&point, 2.0, r).abs() < 1e-15);
        }
    }

    #[test]
    fn jensen_random_instances() {
        let report = jensen_contraction_check(&Market::two_cohort(), 300, 3).unwrap();
        assert!(report.pass(), "{report:?}");
    }

    #[test]
    fn observations_on_twenty_step_grid() {
        let report = observation_checks(&homogeneous(), 20, 4).unwrap();
        assert!(report.pass(), "{report:?}");
        assert!(report.early_good_policies > 0);
    }

    #[test]
    fn no_full_revelation_before_lower_bound() {
        let m = homogeneous();
        let t_star = homogeneous_lower_bound(&m).unwrap();
        assert_eq!(full_revelation_count(&m, 0.95 * t_star, 20, 4).unwrap(), 0);
        assert!(full_revelation_count(&m, t_star, 20, 4).unwrap() > 0);
    }

    #[test]
    fn no_evidence_degenerates() {
        let m = Market { rate_good: 0.0, rate_bad: 0.0, ..homogeneous() };
        let report = observation_checks(&m, 20, 4).unwrap();
        assert_eq!(report.t_star, 0.0);
        assert!(report.pass());
    }

    #[test]
    fn transparent_bad_news_meets_bound() {
        let m = Market::two_cohort();
        let policy = DisclosurePolicy { good: Schedule::Silent, bad: Schedule::Transparent };
        let tp = solve_equilibrium(&m, &policy, SOLVE_HORIZON).unwrap();
        let grid: Vec<f64> = (0..=50).map(|k| 0.004 * k as f64).collect();
        assert!(bound_excess(&tp, &tp, &grid).abs() < 1e-15);
    }

    #[test]
    fn fast_bad_news_is_flagged_infeasible() {
        let m = Market::two_cohort();
        let policy = DisclosurePolicy { good: Schedule::Silent, bad: Schedule::Transparent };
        let tp = solve_equilibrium(&m, &policy, SOLVE_HORIZON).unwrap();
        // Cohort 1 invests at once and its bad news is shown right away.
        let fast = EquilibriumPath::from_samples(
            &m,
            &[
                (0.0, PathState { q: 1.0, z_good: 0.0, z_bad: 0.0 }),
                (0.01, PathState { q: 1.0, z_good: 0.0, z_bad: 1.0 }),
                (0.02, PathState { q: 2.0, z_good: 0.0, z_bad: 1.0 }),
            ],
        );
        let grid: Vec<f64> = (0..=50).map(|k| 0.004 * k as f64).collect();
        assert!(bound_excess(&tp, &fast, &grid) > 0.1);
        let verdict = classify_candidate(&m, &policy, &fast, &tp, &grid, 1e-6);
        assert!(matches!(verdict, BoundVerdict::IcInfeasible { .. }), "{verdict:?}");
    }

    #[test]
    fn sampled_bad_news_policies_respect_bound() {
        let report = check_breakdown_bound(&Market::two_cohort(), &Schedule::Silent, 24, 11).unwrap();
        assert!(report.pass(), "{report:?}");
        assert!(report.ic_feasible > 0);
    }

    #[test]
    fn optimal_paths_cross_the_threshold_once_at_most() {
        let base = Market::two_cohort();
        let withholding = Market { prior: 0.5, rate_good: 2.0, rate_bad: 1.0, ..Market::two_cohort() };
        for m in [base, withholding] {
            let plan = crate::designer::optimal_policy(&m).unwrap();
            let path = solve_equilibrium(&m, &plan.policy, SOLVE_HORIZON).unwrap();
            let end = crate::export::plot_end(&path.breakpoints(), 1.0);
            let report = myopic_crossings(&path, end, 400, 1e-12);
            assert!(report.single_downward(), "{report:?}");
        }
    }
}
