use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::disclosure::welfare::integration_end;
use crate::disclosure::{ChannelMode, DisclosurePolicy, EquilibriumPath, JumpKind, Piece, Segment};
use crate::error::{Result, SolveError};
use crate::model::Market;
use crate::quad::integrate;

const QUAD_TOL: f64 = 1e-12;

/// How replications treat the state of the world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StateSampling {
    /// Draw the state with probability equal to the prior.
    Drawn,
    /// Weight the payoffs of both states by the prior, sharing one arrival
    /// variate. Unbiased, with no variance from the state draw.
    #[default]
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Spacing of the tabulated discounted-investment integrals.
    pub time_step: f64,
    pub states: StateSampling,
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self { n_paths, seed, time_step: 1e-3, states: StateSampling::Averaged }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || !(self.time_step > 0.0 && self.time_step.is_finite()) {
            return Err(SolveError::InvalidArgument(format!(
                "simulation needs n_paths >= 1 and a positive time step, got {} and {}",
                self.n_paths, self.time_step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEstimate {
    pub mean_total: f64,
    pub std_error: f64,
    pub per_cohort_mean: Vec<f64>,
    pub n_paths: usize,
}

/// Cumulative `integral e^{-r t} dq` over a moving segment, tabulated on a
/// uniform grid so each replication integrates at most one partial cell.
struct SegmentTable {
    discount: f64,
    start: f64,
    end: f64,
    step: f64,
    cumulative: Vec<f64>,
}

impl SegmentTable {
    fn new(market: &Market, seg: &Segment, step: f64) -> Self {
        let discount = market.cohorts[seg.cohort_index].discount;
        let start = seg.t_start;
        let end = integration_end(market, seg);
        let cells = ((end - start) / step).ceil().max(1.0) as usize;
        let step = (end - start) / cells as f64;
        let mut cumulative = Vec::with_capacity(cells + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for k in 0..cells {
            let a = start + k as f64 * step;
            acc += integrate(|t| (-discount * t).exp() * seg.flow_at(t), a, a + step, QUAD_TOL);
            cumulative.push(acc);
        }
        Self { discount, start, end, step, cumulative }
    }

    fn upto(&self, seg: &Segment, t: f64) -> f64 {
        let t = t.min(self.end);
        let k = (((t - self.start) / self.step).floor() as usize).min(self.cumulative.len() - 1);
        let node = self.start + k as f64 * self.step;
        let r = self.discount;
        self.cumulative[k] + integrate(|s| (-r * s).exp() * seg.flow_at(s), node, t, QUAD_TOL)
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }
}

fn time_at_stock(seg: &Segment, end: f64, q: f64) -> f64 {
    let (mut lo, mut hi) = (seg.t_start, end);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if seg.q_at(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Discounted payoff by cohort along `path` in state `good`, when the first
/// piece of evidence in that state is generated at stock `threshold`.
fn replicate(market: &Market, path: &EquilibriumPath, tables: &[Option<SegmentTable>], good: bool, threshold: f64, out: &mut [f64]) {
    let payoff = if good { market.v_good } else { market.v_bad };
    let channel = |s: &crate::disclosure::PathState| if good { s.z_good } else { s.z_bad };
    let mut disclosed: Option<(f64, f64)> = None;
    for (piece, table) in path.pieces.iter().zip(tables) {
        match piece {
            Piece::Jump(j) => match j.kind {
                JumpKind::Release => {
                    if channel(&j.before) < threshold && threshold <= channel(&j.after) {
                        disclosed = Some((j.time, j.before.q));
                        break;
                    }
                }
                JumpKind::Investment => {
                    for (c, cohort) in market.cohorts.iter().enumerate() {
                        let mass = market.remaining_in(c, j.before.q) - market.remaining_in(c, j.after.q);
                        if mass > 0.0 {
                            out[c] += mass * (-cohort.discount * j.time).exp() * payoff;
                        }
                    }
                }
            },
            Piece::Segment(seg) => {
                let Some(table) = table else { continue };
                let mode = if good { seg.good } else { seg.bad };
                let crosses = mode == ChannelMode::Tracking && threshold <= seg.q_end;
                if crosses {
                    let tau = time_at_stock(seg, table.end, threshold);
                    out[seg.cohort_index] += payoff * table.upto(seg, tau);
                    disclosed = Some((tau, threshold));
                    break;
                }
                out[seg.cohort_index] += payoff * table.total();
            }
        }
    }
    if let (true, Some((t, q))) = (good, disclosed) {
        for (c, cohort) in market.cohorts.iter().enumerate() {
            out[c] += market.remaining_in(c, q) * (-cohort.discount * t).exp() * market.v_good;
        }
    }
}

/// Monte Carlo estimate of the designer's objective along `path`.
///
/// Each replication draws (or averages over) the state, then the stock at
/// which the first piece of evidence is generated as an exponential variate in stock units (the
/// arrival clock runs on cumulative investment). Evidence is disclosed when
/// the path's revealed stock on that channel first covers it. Replication `k`
/// uses stream `k` of a ChaCha8 generator seeded with `config.seed`, and the
/// sum is taken in replication order, so results are bit-reproducible.
pub fn simulate(market: &Market, _policy: &DisclosurePolicy, path: &EquilibriumPath, config: &SimConfig) -> Result<SimEstimate> {
    market.validate()?;
    config.validate()?;
    let n = market.n_cohorts();
    let tables: Vec<Option<SegmentTable>> = path
        .pieces
        .iter()
        .map(|p| match p {
            Piece::Segment(s) if s.is_moving() => Some(SegmentTable::new(market, s, config.time_step)),
            _ => None,
        })
        .collect();
    let draws: Vec<Vec<f64>> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(k);
            let threshold = |e: f64, rate: f64| if rate > 0.0 { e / rate } else { f64::INFINITY };
            let mut out = vec![0.0; n];
            match config.states {
                StateSampling::Drawn => {
                    let good = rng.random::<f64>() < market.prior;
                    let rate = if good { market.rate_good } else { market.rate_bad };
                    let e: f64 = rng.sample(Exp1);
                    replicate(market, path, &tables, good, threshold(e, rate), &mut out);
                }
                StateSampling::Averaged => {
                    let e: f64 = rng.sample(Exp1);
                    let mut bad = vec![0.0; n];
                    replicate(market, path, &tables, true, threshold(e, market.rate_good), &mut out);
                    replicate(market, path, &tables, false, threshold(e, market.rate_bad), &mut bad);
                    for (g, b) in out.iter_mut().zip(&bad) {
                        *g = market.prior * *g + (1.0 - market.prior) * b;
                    }
                }
            }
            out
        })
        .collect();
    let count = config.n_paths as f64;
    let mut per_cohort_mean = vec![0.0; n];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for d in &draws {
        let total: f64 = d.iter().sum();
        sum += total;
        sum_sq += total * total;
        for (m, v) in per_cohort_mean.iter_mut().zip(d) {
            *m += v;
        }
    }
    per_cohort_mean.iter_mut().for_each(|m| *m /= count);
    let mean_total = sum / count;
    let std_error = if config.n_paths > 1 {
        let var = ((sum_sq - count * mean_total * mean_total) / (count - 1.0)).max(0.0);
        (var / count).sqrt()
    } else {
        0.0
    };
    Ok(SimEstimate { mean_total, std_error, per_cohort_mean, n_paths: config.n_paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designer::optimal_policy;
    use crate::disclosure::{solve_equilibrium, welfare};

    fn config(n_paths: usize) -> SimConfig {
        SimConfig::new(n_paths, 7)
    }

    #[test]
    fn matches_welfare_on_optimal_plan() {
        let m = Market::two_cohort();
        let plan = optimal_policy(&m).unwrap();
        let path = solve_equilibrium(&m, &plan.policy, 100.0).unwrap();
        let exact = welfare(&m, &path).total;
        for states in [StateSampling::Averaged, StateSampling::Drawn] {
            let est = simulate(&m, &plan.policy, &path, &SimConfig { states, ..config(20_000) }).unwrap();
            assert!((est.mean_total - exact).abs() < 3.0 * est.std_error, "{est:?} vs {exact}");
        }
    }

    #[test]
    fn no_evidence_means_no_variance() {
        let m = Market { rate_good: 0.0, rate_bad: 0.0, ..Market::two_cohort() };
        let policy = DisclosurePolicy::transparent();
        let path = solve_equilibrium(&m, &policy, 100.0).unwrap();
        let est = simulate(&m, &policy, &path, &config(500)).unwrap();
        assert!(est.std_error < 1e-12);
        assert!((est.mean_total - 10.0).abs() < 1e-9, "{est:?}");
    }

    #[test]
    fn certain_good_state_never_sees_bad_news() {
        let m = Market { prior: 1.0, ..Market::two_cohort() };
        let policy = DisclosurePolicy::transparent();
        let path = solve_equilibrium(&m, &policy, 100.0).unwrap();
        let est = simulate(&m, &policy, &path, &config(300)).unwrap();
        assert!(est.per_cohort_mean.iter().all(|&v| v > 0.0));
        assert!((est.mean_total - 16.0).abs() < 1e-9, "{est:?}");
    }

    #[test]
    fn reruns_are_bit_identical() {
        let m = Market::two_cohort();
        let policy = DisclosurePolicy::transparent();
        let path = solve_equilibrium(&m, &policy, 100.0).unwrap();
        let a = simulate(&m, &policy, &path, &config(2_000)).unwrap();
        let b = simulate(&m, &policy, &path, &config(2_000)).unwrap();
        assert_eq!(a.mean_total.to_bits(), b.mean_total.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn rejects_empty_config() {
        let m = Market::two_cohort();
        let path = solve_equilibrium(&m, &DisclosurePolicy::transparent(), 100.0).unwrap();
        assert!(simulate(&m, &DisclosurePolicy::transparent(), &path, &config(0)).is_err());
    }
}
