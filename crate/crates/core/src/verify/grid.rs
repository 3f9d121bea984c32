//! Discretized brute-force oracle for the designer's problem.
//!
//! Time runs on `t_k = k dt`, `k = 0..=K`, and stocks on a mass lattice that
//! contains every cohort boundary. At each grid time the designer first
//! discloses evidence generated strictly before it (`z_k <= q_{k-1}`), then
//! agents invest. Cohorts invest in index order. Agents may deviate only to
//! grid stop times; nothing happens after the horizon.
//!
//! The search is a forward dynamic program over lattice states whose labels
//! carry accumulated welfare plus, per cohort, the tightest outstanding
//! incentive bounds. Dominated labels are discarded, so the search is exact
//! unless the label budget is hit.

use std::collections::BTreeMap;

use crate::error::{Result, SolveError};
use crate::model::Market;

/// Numerical slack allowed on discrete incentive constraints.
const IC_TOL: f64 = 1e-12;
const MAX_COHORTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dt: f64,
    pub horizon: f64,
    pub mass_step: f64,
    /// Live labels allowed per sub-step before the search stops being exhaustive.
    pub label_budget: usize,
}

impl GridSpec {
    pub fn new(dt: f64, horizon: f64, mass_step: f64) -> Self {
        Self { dt, horizon, mass_step, label_budget: 2_000_000 }
    }
}

/// A feasible discretized path.
#[derive(Debug, Clone, PartialEq)]
pub struct GridProblem {
    pub dt: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub q_grid: Vec<f64>,
    pub zg_grid: Vec<f64>,
    pub zb_grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeFlags {
    /// Bad news generated by each completed no-news cohort is out within one
    /// cell of the time the next cohort starts investing.
    pub bad_caps_slack_before_tbar: bool,
    /// No good news is disclosed more than one cell before the last no-news phase opens.
    pub good_caps_zero_before_tbar: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    pub paths: GridProblem,
    pub welfare: f64,
    pub ic_ok: bool,
    /// Smallest slack of the discrete incentive constraints, recomputed directly.
    pub min_slack: f64,
    pub shape_flags: ShapeFlags,
    pub hat_i: usize,
    /// Grid time at which the last no-news cohort starts investing.
    pub t_bar: f64,
    pub exhaustive: bool,
    pub labels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Label {
    welfare: f64,
    /// Per cohort, the smallest discounted no-news value among its past
    /// investors net of good news released since; deviations must not beat it.
    invest_bound: [f64; MAX_COHORTS],
    /// Per cohort, the largest discounted no-news value forgone by waiting
    /// agents that no later stop time has matched yet.
    wait_bound: [f64; MAX_COHORTS],
    trace: u32,
}

impl Label {
    fn dominates(&self, other: &Label, n: usize) -> bool {
        self.welfare >= other.welfare
            && (0..n).all(|i| self.invest_bound[i] >= other.invest_bound[i] && self.wait_bound[i] <= other.wait_bound[i])
    }
}

#[derive(Debug, Clone, Copy)]
struct TraceNode {
    parent: u32,
    iq: u8,
    ig: u8,
    ib: u8,
}

const NO_PARENT: u32 = u32::MAX;

type Key = (u8, u8, u8);

fn insert(front: &mut Vec<Label>, label: Label, n: usize) {
    if front.iter().any(|l| l.dominates(&label, n)) {
        return;
    }
    front.retain(|l| !label.dominates(l, n));
    front.push(label);
}

struct Lattice {
    levels: Vec<f64>,
    times: Vec<f64>,
}

impl Lattice {
    fn new(market: &Market, spec: &GridSpec) -> Result<Self> {
        if !(spec.dt > 0.0 && spec.mass_step > 0.0 && spec.horizon >= 0.0) {
            return Err(SolveError::InvalidArgument("grid needs positive dt and mass step".into()));
        }
        let total = market.total_mass();
        let mut levels: Vec<f64> = (0..)
            .map(|k| k as f64 * spec.mass_step)
            .take_while(|&q| q < total - 1e-12)
            .chain((0..market.n_cohorts()).map(|i| market.cumulative_mass(i)))
            .collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        if levels.len() > u8::MAX as usize {
            return Err(SolveError::InvalidArgument(format!("{} mass levels is too many", levels.len())));
        }
        let steps = (spec.horizon / spec.dt + 1e-9).floor() as usize;
        let times = (0..=steps).map(|k| k as f64 * spec.dt).collect();
        Ok(Self { levels, times })
    }
}

/// Mass of each cohort strictly between stocks `lo` and `hi`.
fn cohort_split(market: &Market, lo: f64, hi: f64) -> [f64; MAX_COHORTS] {
    let mut out = [0.0; MAX_COHORTS];
    for (i, m) in out.iter_mut().enumerate().take(market.n_cohorts()) {
        *m = market.remaining_in(i, lo) - market.remaining_in(i, hi);
    }
    out
}

struct Search<'a> {
    market: &'a Market,
    n: usize,
    levels: Vec<f64>,
    times: Vec<f64>,
    good_left: Vec<f64>,
    bad_left: Vec<f64>,
    remaining: Vec<[f64; MAX_COHORTS]>,
    /// Welfare-to-go ignoring incentives, per step, sub-step and state.
    upper: Vec<[Vec<f64>; 3]>,
    /// The same bound for each cohort's welfare separately.
    cohort_upper: Vec<Vec<[Vec<f64>; 3]>>,
    /// `cap[k][i][j]`: largest ratio of cohort `j`'s to cohort `i`'s discount
    /// factor from step `k` to the horizon.
    cap: Vec<[[f64; MAX_COHORTS]; MAX_COHORTS]>,
}

/// Sub-steps within a grid time.
const BEFORE_GOOD: usize = 0;
const BEFORE_BAD: usize = 1;
const BEFORE_INVEST: usize = 2;

struct Outcome {
    best: Option<(f64, Vec<TraceNode>)>,
    labels: usize,
    truncated: bool,
}

impl<'a> Search<'a> {
    fn new(market: &'a Market, lattice: Lattice) -> Self {
        let n = market.n_cohorts();
        let Lattice { levels, times } = lattice;
        let good_value = market.prior * market.v_good;
        let bad_value = (1.0 - market.prior) * market.v_bad;
        let good_left = levels.iter().map(|&z| good_value * (-market.rate_good * z).exp()).collect();
        let bad_left = levels.iter().map(|&z| bad_value * (-market.rate_bad * z).exp()).collect();
        let remaining = levels
            .iter()
            .map(|&q| {
                let mut r = [0.0; MAX_COHORTS];
                for (i, v) in r.iter_mut().enumerate().take(n) {
                    *v = market.remaining_in(i, q);
                }
                r
            })
            .collect();
        let horizon = times.last().copied().unwrap_or(0.0);
        let cap = times
            .iter()
            .map(|&t| {
                let mut c = [[1.0; MAX_COHORTS]; MAX_COHORTS];
                for (i, ci) in market.cohorts.iter().enumerate() {
                    for (j, cj) in market.cohorts.iter().enumerate() {
                        let gap = ci.discount - cj.discount;
                        c[i][j] = (gap * if gap > 0.0 { horizon } else { t }).exp();
                    }
                }
                c
            })
            .collect();
        let mut search = Self {
            market,
            n,
            levels,
            times,
            good_left,
            bad_left,
            remaining,
            upper: Vec::new(),
            cohort_upper: Vec::new(),
            cap,
        };
        search.upper = search.upper_bounds(None);
        search.cohort_upper = (0..n).map(|i| search.upper_bounds(Some(i))).collect();
        search
    }

    /// `path` held piecewise constant on this search's grid, if it lies on
    /// the lattice and respects the disclosure lag there.
    fn embed(&self, path: &GridProblem) -> Option<GridProblem> {
        let level = |v: f64| self.levels.iter().position(|&l| (l - v).abs() < 1e-12);
        let mut out = GridProblem {
            dt: self.times.get(1).copied().unwrap_or(path.dt),
            horizon: self.times.last().copied().unwrap_or(0.0),
            times: self.times.clone(),
            q_grid: Vec::with_capacity(self.times.len()),
            zg_grid: Vec::with_capacity(self.times.len()),
            zb_grid: Vec::with_capacity(self.times.len()),
        };
        let mut q_prev = 0.0;
        for &t in &self.times {
            let k = path.times.iter().rposition(|&s| s <= t + 1e-12)?;
            let (q, zg, zb) = (path.q_grid[k], path.zg_grid[k], path.zb_grid[k]);
            level(q)?;
            level(zg)?;
            level(zb)?;
            if zg > q_prev + 1e-12 || zb > q_prev + 1e-12 {
                return None;
            }
            out.q_grid.push(q);
            out.zg_grid.push(zg);
            out.zb_grid.push(zb);
            q_prev = q;
        }
        Some(out)
    }

    fn index(&self, (iq, ig, ib): Key) -> usize {
        let l = self.levels.len();
        (iq as usize * l + ig as usize) * l + ib as usize
    }

    fn discounts(&self, t: f64) -> [f64; MAX_COHORTS] {
        let mut d = [0.0; MAX_COHORTS];
        for (v, c) in d.iter_mut().zip(&self.market.cohorts) {
            *v = (-c.discount * t).exp();
        }
        d
    }

    fn cohorts(&self, only: Option<usize>) -> std::ops::Range<usize> {
        only.map_or(0..self.n, |i| i..i + 1)
    }

    fn release_gain(&self, iq: u8, ig: u8, ig2: u8, disc: &[f64; MAX_COHORTS], only: Option<usize>) -> f64 {
        let released = self.good_left[ig as usize] - self.good_left[ig2 as usize];
        self.cohorts(only).map(|i| self.remaining[iq as usize][i] * disc[i] * released).sum()
    }

    fn invest_gain(&self, iq: u8, iq2: usize, value: f64, disc: &[f64; MAX_COHORTS], only: Option<usize>) -> f64 {
        let split = cohort_split(self.market, self.levels[iq as usize], self.levels[iq2]);
        self.cohorts(only).map(|i| split[i] * disc[i] * value).sum()
    }

    /// Tightest available bound on a label's welfare-to-go. Past investors of
    /// cohort `i` could copy any later stop time, so by their incentive
    /// constraint a remaining unit of cohort `j` collects at most
    /// `invest_bound[i]` scaled by the discount ratio.
    fn label_bound(&self, label: &Label, key: Key, k: usize, stage: usize) -> f64 {
        let idx = self.index(key);
        let per_cohort: f64 = (0..self.n)
            .map(|j| {
                let free = self.cohort_upper[j][k][stage][idx];
                let left = self.remaining[key.0 as usize][j];
                if left <= 0.0 {
                    return free;
                }
                let unit = (0..self.n)
                    .map(|i| label.invest_bound[i].max(0.0) * self.cap[k][i][j])
                    .fold(f64::INFINITY, f64::min);
                free.min(left * unit)
            })
            .sum();
        per_cohort.min(self.upper[k][stage][idx])
    }

    fn upper_bounds(&self, only: Option<usize>) -> Vec<[Vec<f64>; 3]> {
        let l = self.levels.len();
        let size = l * l * l;
        let keys: Vec<Key> = (0..l as u8)
            .flat_map(|iq| (0..=iq).flat_map(move |ig| (0..=iq).map(move |ib| (iq, ig, ib))))
            .collect();
        let mut next = vec![0.0; size];
        let mut out = vec![[vec![0.0; size], vec![0.0; size], vec![0.0; size]]; self.times.len()];
        for k in (0..self.times.len()).rev() {
            let disc = self.discounts(self.times[k]);
            let mut stage = [vec![f64::NEG_INFINITY; size], vec![f64::NEG_INFINITY; size], vec![f64::NEG_INFINITY; size]];
            for &key in &keys {
                let (iq, ig, ib) = key;
                let value = self.good_left[ig as usize] + self.bad_left[ib as usize];
                stage[BEFORE_INVEST][self.index(key)] = (iq as usize..l)
                    .map(|iq2| self.invest_gain(iq, iq2, value, &disc, only) + next[self.index((iq2 as u8, ig, ib))])
                    .fold(f64::NEG_INFINITY, f64::max);
            }
            for &key in &keys {
                let (iq, ig, ib) = key;
                stage[BEFORE_BAD][self.index(key)] =
                    (ib..=iq).map(|ib2| stage[BEFORE_INVEST][self.index((iq, ig, ib2))]).fold(f64::NEG_INFINITY, f64::max);
            }
            for &key in &keys {
                let (iq, ig, ib) = key;
                stage[BEFORE_GOOD][self.index(key)] = (ig..=iq)
                    .map(|ig2| self.release_gain(iq, ig, ig2, &disc, only) + stage[BEFORE_BAD][self.index((iq, ig2, ib))])
                    .fold(f64::NEG_INFINITY, f64::max);
            }
            next = stage[BEFORE_GOOD].clone();
            out[k] = stage;
        }
        out
    }

    /// Drops labels that cannot beat `incumbent`; with a beam, also keeps only
    /// the `beam` most promising labels.
    fn prune(&self, map: &mut BTreeMap<Key, Vec<Label>>, k: usize, stage: usize, incumbent: f64, beam: Option<usize>) -> (usize, bool) {
        let mut count = 0;
        for (key, front) in map.iter_mut() {
            front.retain(|l| l.welfare + self.label_bound(l, *key, k, stage) >= incumbent - 1e-12);
            count += front.len();
        }
        let mut truncated = false;
        if let Some(beam) = beam.filter(|&b| count > b) {
            let mut scores: Vec<f64> = map
                .iter()
                .flat_map(|(key, f)| f.iter().map(move |l| l.welfare + self.label_bound(l, *key, k, stage)))
                .collect();
            scores.sort_by(|a, b| b.total_cmp(a));
            let cut = scores[beam - 1];
            for (key, front) in map.iter_mut() {
                front.retain(|l| l.welfare + self.label_bound(l, *key, k, stage) >= cut);
            }
            truncated = true;
        }
        map.retain(|_, f| !f.is_empty());
        (count, truncated)
    }

    fn run(&self, incumbent: f64, beam: Option<usize>) -> Outcome {
        let n = self.n;
        let top = self.levels.len() - 1;
        let mut trace: Vec<TraceNode> = Vec::new();
        let mut labels = 0usize;
        let mut truncated = false;
        let mut current: BTreeMap<Key, Vec<Label>> = BTreeMap::new();
        current.insert(
            (0, 0, 0),
            vec![Label {
                welfare: 0.0,
                invest_bound: [f64::INFINITY; MAX_COHORTS],
                wait_bound: [f64::NEG_INFINITY; MAX_COHORTS],
                trace: NO_PARENT,
            }],
        );
        let mut tally = |(count, cut): (usize, bool)| {
            labels += count;
            truncated |= cut;
        };

        for (k, &t) in self.times.iter().enumerate() {
            let disc = self.discounts(t);

            // Good-news release, preferring smaller releases on ties.
            let mut after_good: BTreeMap<Key, Vec<Label>> = BTreeMap::new();
            for (&(iq, ig, ib), front) in &current {
                for ig2 in ig..=iq {
                    let released = self.good_left[ig as usize] - self.good_left[ig2 as usize];
                    for l in front {
                        let mut next = *l;
                        for i in 0..n {
                            let d = disc[i] * released;
                            next.welfare += self.remaining[iq as usize][i] * d;
                            next.invest_bound[i] -= d;
                            next.wait_bound[i] -= d;
                        }
                        insert(after_good.entry((iq, ig2, ib)).or_default(), next, n);
                    }
                }
            }
            tally(self.prune(&mut after_good, k, BEFORE_BAD, incumbent, beam));

            // Bad-news release, preferring larger releases on ties, then the
            // incentive checks against stopping at this grid time.
            let mut after_bad: BTreeMap<Key, Vec<Label>> = BTreeMap::new();
            for (&(iq, ig, ib), front) in &after_good {
                for ib2 in (ib..=iq).rev() {
                    let stop = (self.good_left[ig as usize] + self.bad_left[ib2 as usize]).max(0.0);
                    for l in front {
                        let mut next = *l;
                        if (0..n).any(|i| disc[i] * stop > next.invest_bound[i] + IC_TOL) {
                            continue;
                        }
                        for i in 0..n {
                            if disc[i] * stop >= next.wait_bound[i] - IC_TOL {
                                next.wait_bound[i] = f64::NEG_INFINITY;
                            }
                        }
                        insert(after_bad.entry((iq, ig, ib2)).or_default(), next, n);
                    }
                }
            }
            tally(self.prune(&mut after_bad, k, BEFORE_INVEST, incumbent, beam));

            // Investment. Bounds that no later stop time can reach are
            // normalized away so equivalent labels merge.
            let mut after_invest: BTreeMap<Key, Vec<Label>> = BTreeMap::new();
            for (&(iq, ig, ib), front) in &after_bad {
                let value = self.good_left[ig as usize] + self.bad_left[ib as usize];
                for iq2 in iq as usize..=top {
                    let split = cohort_split(self.market, self.levels[iq as usize], self.levels[iq2]);
                    for l in front {
                        let mut next = *l;
                        for i in 0..n {
                            let v = disc[i] * value;
                            next.welfare += split[i] * v;
                            if split[i] > 0.0 {
                                next.invest_bound[i] = next.invest_bound[i].min(v);
                            }
                            if self.remaining[iq2][i] > 1e-12 {
                                next.wait_bound[i] = next.wait_bound[i].max(v);
                            }
                            if next.invest_bound[i] >= disc[i] * self.good_left[ig as usize] + IC_TOL {
                                next.invest_bound[i] = f64::INFINITY;
                            }
                            if next.wait_bound[i] <= IC_TOL {
                                next.wait_bound[i] = f64::NEG_INFINITY;
                            }
                        }
                        trace.push(TraceNode { parent: l.trace, iq: iq2 as u8, ig, ib });
                        next.trace = (trace.len() - 1) as u32;
                        insert(after_invest.entry((iq2 as u8, ig, ib)).or_default(), next, n);
                    }
                }
            }
            if k + 1 < self.times.len() {
                tally(self.prune(&mut after_invest, k + 1, BEFORE_GOOD, incumbent, beam));
            }
            current = after_invest;
        }

        let best = current
            .values()
            .flatten()
            .filter(|l| (0..n).all(|i| l.invest_bound[i] >= -IC_TOL && l.wait_bound[i] <= IC_TOL))
            .fold(None::<&Label>, |acc, l| match acc {
                Some(b) if b.welfare >= l.welfare => Some(b),
                _ => Some(l),
            })
            .map(|l| {
                let mut nodes = Vec::with_capacity(self.times.len());
                let mut cursor = l.trace;
                while cursor != NO_PARENT {
                    let node = trace[cursor as usize];
                    nodes.push(node);
                    cursor = node.parent;
                }
                nodes.reverse();
                (l.welfare, nodes)
            });
        Outcome { best, labels, truncated }
    }
}

/// Labels kept by the quick pass that supplies the first incumbent.
const INCUMBENT_BEAM: usize = 4_000;
const BEAM_PASSES: usize = 2;

/// Welfare-maximal discretized path subject to the discrete incentive constraints.
///
/// Beam passes find a feasible incumbent; the exact pass then discards
/// labels whose welfare plus an incentive-free bound on welfare-to-go falls
/// short of it.
pub fn grid_search(market: &Market, spec: &GridSpec) -> Result<GridSolution> {
    grid_search_seeded(market, spec, None)
}

/// As [`grid_search`], with a known path (typically the optimum of a coarser
/// grid) offered as the first incumbent. The seed is held piecewise constant
/// on the new grid and used only if it passes the direct incentive recheck
/// there, so it never changes the optimum, only the running time.
pub fn grid_search_seeded(market: &Market, spec: &GridSpec, seed: Option<&GridProblem>) -> Result<GridSolution> {
    market.validate()?;
    let n = market.n_cohorts();
    if n > MAX_COHORTS {
        return Err(SolveError::InvalidArgument(format!("grid search supports at most {MAX_COHORTS} cohorts")));
    }
    let search = Search::new(market, Lattice::new(market, spec)?);
    let seed = seed.and_then(|s| search.embed(s)).filter(|p| discrete_ic_slack(market, p) >= -IC_TOL);
    let seed_welfare = seed.as_ref().map_or(f64::NEG_INFINITY, |p| grid_welfare(market, p));
    let beam = Some(INCUMBENT_BEAM.min(spec.label_budget));
    let mut labels = 0;
    let mut incumbent = seed_welfare;
    let mut quick_best = None;
    for _ in 0..BEAM_PASSES {
        let quick = search.run(incumbent, beam);
        labels += quick.labels;
        if let Some((w, nodes)) = quick.best {
            if w > incumbent {
                incumbent = w;
                quick_best = Some(nodes);
            }
        }
    }
    let exact = search.run(incumbent, Some(spec.label_budget));
    labels += exact.labels;
    let exhaustive = !exact.truncated;
    let levels = &search.levels;
    let from_nodes = |nodes: Vec<TraceNode>| GridProblem {
        dt: spec.dt,
        horizon: spec.horizon,
        times: search.times.clone(),
        q_grid: nodes.iter().map(|nd| levels[nd.iq as usize]).collect(),
        zg_grid: nodes.iter().map(|nd| levels[nd.ig as usize]).collect(),
        zb_grid: nodes.iter().map(|nd| levels[nd.ib as usize]).collect(),
    };
    let paths = exact
        .best
        .map(|(_, nodes)| nodes)
        .or(quick_best)
        .map(from_nodes)
        .or(seed)
        .ok_or_else(|| SolveError::ConstraintViolation("no incentive-compatible grid path".into()))?;
    let min_slack = discrete_ic_slack(market, &paths);
    let (hat_i, t_bar, shape_flags) = shape(market, &paths);
    Ok(GridSolution {
        welfare: grid_welfare(market, &paths),
        ic_ok: min_slack >= -1e-9,
        min_slack,
        shape_flags,
        hat_i,
        t_bar,
        paths,
        exhaustive,
        labels,
    })
}

/// Designer objective of a discretized path.
pub fn grid_welfare(market: &Market, p: &GridProblem) -> f64 {
    let x0vg = market.prior * market.v_good;
    let mut total = 0.0;
    let mut q_prev = 0.0;
    let mut zg_prev = 0.0;
    for k in 0..p.times.len() {
        let t = p.times[k];
        let released = x0vg * ((-market.rate_good * zg_prev).exp() - (-market.rate_good * p.zg_grid[k]).exp());
        let value = market.no_news_value(p.zg_grid[k], p.zb_grid[k]);
        for (i, c) in market.cohorts.iter().enumerate() {
            let d = (-c.discount * t).exp();
            total += market.remaining_in(i, q_prev) * d * released;
            total += (market.remaining_in(i, q_prev) - market.remaining_in(i, p.q_grid[k])) * d * value;
        }
        q_prev = p.q_grid[k];
        zg_prev = p.zg_grid[k];
    }
    total
}

/// Smallest slack over every discrete incentive constraint, by direct
/// enumeration of decision and stop times. Negative means violated.
pub fn discrete_ic_slack(market: &Market, p: &GridProblem) -> f64 {
    let x0vg = market.prior * market.v_good;
    let steps = p.times.len();
    let mut worst = f64::INFINITY;
    for (i, c) in market.cohorts.iter().enumerate() {
        let r = c.discount;
        // Discounted good-news pickups accumulated through each step, and the
        // value of stopping there.
        let mut pickups = Vec::with_capacity(steps);
        let mut acc = 0.0;
        let mut zg_prev = 0.0;
        for k in 0..steps {
            acc += (-r * p.times[k]).exp()
                * x0vg
                * ((-market.rate_good * zg_prev).exp() - (-market.rate_good * p.zg_grid[k]).exp());
            pickups.push(acc);
            zg_prev = p.zg_grid[k];
        }
        let now = |k: usize| (-r * p.times[k]).exp() * market.no_news_value(p.zg_grid[k], p.zb_grid[k]);
        let stop = |k: usize, m: usize| pickups[m] - pickups[k] + now(m).max(0.0);
        let never = |k: usize| pickups[steps - 1] - pickups[k];
        let mut q_prev = 0.0;
        for k in 0..steps {
            let invested = market.remaining_in(i, q_prev) - market.remaining_in(i, p.q_grid[k]);
            let waiting = market.remaining_in(i, p.q_grid[k]);
            let best_later = (k + 1..steps).map(|m| stop(k, m)).fold(never(k), f64::max);
            if invested > 1e-12 {
                worst = worst.min(now(k) - best_later);
            }
            if waiting > 1e-12 {
                worst = worst.min(best_later - now(k));
            }
            q_prev = p.q_grid[k];
        }
    }
    worst
}

fn shape(market: &Market, p: &GridProblem) -> (usize, f64, ShapeFlags) {
    let q_end = p.q_grid.last().copied().unwrap_or(0.0);
    let hat_i = (0..market.n_cohorts()).filter(|&i| market.mass_before(i) < q_end - 1e-12).count();
    if hat_i == 0 {
        let flags = ShapeFlags { bad_caps_slack_before_tbar: true, good_caps_zero_before_tbar: true };
        return (0, 0.0, flags);
    }
    let start_level = market.mass_before(hat_i - 1);
    let k_bar = p.q_grid.iter().position(|&q| q > start_level + 1e-12).unwrap_or(0);
    let good_zero = p.zg_grid.iter().take(k_bar.saturating_sub(1)).all(|&z| z <= 1e-12);
    let bad_out = (0..hat_i - 1).all(|i| {
        let f = market.cumulative_mass(i);
        // Phase i ends when cohort i + 1 starts investing.
        match p.q_grid.iter().position(|&q| q > f + 1e-12) {
            Some(k) => p.zb_grid[k..].iter().take(2).any(|&z| z >= f - 1e-12),
            None => true,
        }
    });
    let flags = ShapeFlags { bad_caps_slack_before_tbar: bad_out, good_caps_zero_before_tbar: good_zero };
    (hat_i, p.times[k_bar], flags)
}

/// Grid optima over successively halved time steps with error estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConvergence {
    pub dts: Vec<f64>,
    pub welfare: Vec<f64>,
    /// Limit estimated by first-order Richardson extrapolation on the two finest grids.
    pub extrapolated: f64,
    /// Distance of each grid optimum from the extrapolated limit.
    pub error: Vec<f64>,
    pub solutions: Vec<GridSolution>,
}

pub fn grid_convergence(market: &Market, dts: &[f64], horizon: f64, mass_step: f64) -> Result<GridConvergence> {
    if dts.len() < 2 {
        return Err(SolveError::InvalidArgument("convergence needs at least two time steps".into()));
    }
    let solutions = dts
        .iter()
        .try_fold(Vec::<GridSolution>::new(), |mut acc, &dt| {
            let seed = acc.last().map(|s| &s.paths);
            acc.push(grid_search_seeded(market, &GridSpec::new(dt, horizon, mass_step), seed)?);
            Ok::<_, SolveError>(acc)
        })?;
    let welfare: Vec<f64> = solutions.iter().map(|s| s.welfare).collect();
    let k = dts.len();
    let ratio = dts[k - 2] / dts[k - 1];
    let extrapolated = welfare[k - 1] + (welfare[k - 1] - welfare[k - 2]) / (ratio - 1.0);
    let error = welfare.iter().map(|w| (w - extrapolated).abs()).collect();
    Ok(GridConvergence { dts: dts.to_vec(), welfare, extrapolated, error, solutions })
}
