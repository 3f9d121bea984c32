use crate::model::Market;
use crate::quad::integrate;

use super::path::{ChannelMode, EquilibriumPath, JumpKind, Piece, Segment};

const QUAD_TOL: f64 = 1e-13;
/// Infinite segments are integrated up to this many slowest discount time constants.
const TAIL_CONSTANTS: f64 = 42.0;

/// Time-0 expected welfare split by cohort and by source.
#[derive(Debug, Clone, PartialEq)]
pub struct WelfareReport {
    /// Total expected payoff of each cohort (payoff per unit mass times mass).
    pub per_cohort: Vec<f64>,
    pub total: f64,
    pub decomposition: WelfareDecomposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WelfareDecomposition {
    /// Investment triggered by disclosed good news.
    pub good_release_term: f64,
    /// Gradual investment absent news.
    pub no_news_invest_term: f64,
    /// Investment atoms absent news.
    pub atom_term: f64,
}

impl WelfareDecomposition {
    pub fn sum(&self) -> f64 {
        self.good_release_term + self.no_news_invest_term + self.atom_term
    }
}

pub(crate) fn integration_end(market: &Market, seg: &Segment) -> f64 {
    if seg.t_end.is_finite() {
        seg.t_end
    } else {
        let r_min = market.cohorts.iter().map(|c| c.discount).fold(f64::INFINITY, f64::min);
        seg.t_start + TAIL_CONSTANTS / r_min
    }
}

/// Unconditional value of the good-news pickups per unit of remaining mass of
/// cohort `j` accrued on `seg` over `[a, b]`, discounted back to `origin`.
pub(crate) fn tracking_pickups(market: &Market, seg: &Segment, r: f64, origin: f64, a: f64, b: f64) -> f64 {
    if seg.good != ChannelMode::Tracking || !seg.is_moving() || b <= a {
        return 0.0;
    }
    let k = market.prior * market.v_good * market.rate_good;
    integrate(
        |t| (-r * (t - origin)).exp() * k * (-market.rate_good * seg.q_at(t)).exp() * seg.flow_at(t),
        a,
        b,
        QUAD_TOL,
    )
}

/// Evaluates the designer's objective on a constructed path.
pub fn welfare(market: &Market, path: &EquilibriumPath) -> WelfareReport {
    let n = market.n_cohorts();
    let mut per_cohort = vec![0.0; n];
    let mut parts = WelfareDecomposition::default();
    let k = market.prior * market.v_good;
    for piece in &path.pieces {
        match piece {
            Piece::Jump(jump) => {
                let t = jump.time;
                match jump.kind {
                    JumpKind::Release => {
                        let g = k
                            * ((-market.rate_good * jump.before.z_good).exp()
                                - (-market.rate_good * jump.after.z_good).exp());
                        for (j, c) in market.cohorts.iter().enumerate() {
                            let v = market.remaining_in(j, jump.before.q) * (-c.discount * t).exp() * g;
                            per_cohort[j] += v;
                            parts.good_release_term += v;
                        }
                    }
                    JumpKind::Investment => {
                        let payoff = market.no_news_value(jump.before.z_good, jump.before.z_bad);
                        for (j, c) in market.cohorts.iter().enumerate() {
                            let mass = market.remaining_in(j, jump.before.q) - market.remaining_in(j, jump.after.q);
                            let v = mass * (-c.discount * t).exp() * payoff;
                            per_cohort[j] += v;
                            parts.atom_term += v;
                        }
                    }
                }
            }
            Piece::Segment(seg) if seg.is_moving() => {
                let a = seg.t_start;
                let b = integration_end(market, seg);
                let i = seg.cohort_index;
                let r = market.cohorts[i].discount;
                let flow = integrate(
                    |t| {
                        let s = seg.state_at(t);
                        (-r * t).exp() * market.no_news_value(s.z_good, s.z_bad) * seg.flow_at(t)
                    },
                    a,
                    b,
                    QUAD_TOL,
                );
                per_cohort[i] += flow;
                parts.no_news_invest_term += flow;
                if seg.good == ChannelMode::Tracking {
                    for (j, c) in market.cohorts.iter().enumerate() {
                        if market.remaining_in(j, seg.q_start) <= 0.0 {
                            continue;
                        }
                        let v = if j == i {
                            let k = market.prior * market.v_good * market.rate_good;
                            integrate(
                                |t| {
                                    let q = seg.q_at(t);
                                    market.remaining_in(j, q)
                                        * (-c.discount * t).exp()
                                        * k
                                        * (-market.rate_good * q).exp()
                                        * seg.flow_at(t)
                                },
                                a,
                                b,
                                QUAD_TOL,
                            )
                        } else {
                            market.remaining_in(j, seg.q_start) * tracking_pickups(market, seg, c.discount, 0.0, a, b)
                        };
                        per_cohort[j] += v;
                        parts.good_release_term += v;
                    }
                }
            }
            Piece::Segment(_) => {}
        }
    }
    let total = per_cohort.iter().sum();
    WelfareReport { per_cohort, total, decomposition: parts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disclosure::path::PathState;
    use crate::disclosure::{solve_equilibrium, DisclosurePolicy, Schedule};
    use crate::model::Cohort;

    #[test]
    fn transparent_two_cohort_welfare() {
        let m = Market::two_cohort();
        let path = solve_equilibrium(&m, &DisclosurePolicy::transparent(), 100.0).unwrap();
        let w = welfare(&m, &path);
        assert!((w.per_cohort[0] - 5.0).abs() < 1e-10);
        assert!((w.per_cohort[1] - 5.410_840_572_893_33).abs() < 1e-9, "{:?}", w.per_cohort);
        assert!((w.total - w.decomposition.sum()).abs() < 1e-9 * w.total);
    }

    #[test]
    fn silent_good_news_welfare() {
        let m = Market::two_cohort();
        let policy = DisclosurePolicy { good: Schedule::Silent, bad: Schedule::Transparent };
        let path = solve_equilibrium(&m, &policy, 100.0).unwrap();
        let w = welfare(&m, &path);
        assert!((w.total - 10.415_101_437_998_8).abs() < 1e-9, "{}", w.total);
    }

    #[test]
    fn atom_at_zero_pays_prior_value() {
        let m = Market::two_cohort();
        let path = EquilibriumPath::from_samples(&m, &[(0.0, PathState { q: 2.0, z_good: 0.0, z_bad: 0.0 })]);
        let w = welfare(&m, &path);
        assert!((w.total - 10.0).abs() < 1e-12);
        assert_eq!(w.decomposition.atom_term, w.total);
    }

    #[test]
    fn single_cohort_value_is_policy_free() {
        let m = Market { cohorts: vec![Cohort::new(1.5, 2.0)], ..Market::two_cohort() };
        for policy in [
            DisclosurePolicy::transparent(),
            DisclosurePolicy { good: Schedule::Silent, bad: Schedule::Transparent },
            DisclosurePolicy::delayed_good_news(0.1),
        ] {
            let path = solve_equilibrium(&m, &policy, 100.0).unwrap();
            let w = welfare(&m, &path);
            assert!((w.total - 10.0).abs() < 1e-9, "{policy:?}: {}", w.total);
        }
    }
}
