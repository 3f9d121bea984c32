//! Equilibrium adoption under full transparency.
//!
//! Along the transparent path the marginal cohort is kept indifferent between
//! investing now and waiting an instant to watch for bad news, which pins the
//! investment flow as a function of the no-news belief. Within a cohort the
//! flow equation integrates in closed form; [`integrate_transparent`] solves
//! the same equation numerically as an independent check.

use crate::error::{Result, SolveError};
use crate::model::Market;

/// Constants of the closed-form stock trajectory within one phase.
///
/// With `u = q - q_start` the flow is `du/dt = r (b e^{k u} - a) / (rate_bad a)`,
/// where `k = rate_bad - good_drift` and `good_drift` is the good-news rate
/// when good evidence is revealed as it is generated and zero when it is capped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCoefficients {
    pub a: f64,
    pub b: f64,
    pub v0: f64,
    pub exponent_ratio: f64,
    pub discount: f64,
    pub rate_bad: f64,
    pub good_drift: f64,
}

impl PhaseCoefficients {
    pub fn new(market: &Market, discount: f64, x_start: f64, good_drift: f64) -> Self {
        let v0 = market.expected_value(x_start);
        let exponent_ratio =
            if market.rate_bad > 0.0 { discount * good_drift / market.rate_bad } else { f64::INFINITY };
        Self {
            a: (1.0 - x_start) * (-market.v_bad),
            b: x_start * market.v_good,
            v0,
            exponent_ratio,
            discount,
            rate_bad: market.rate_bad,
            good_drift,
        }
    }

    fn evidence_exponent(&self) -> f64 {
        self.rate_bad - self.good_drift
    }

    fn time_exponent(&self) -> f64 {
        self.discount * self.evidence_exponent() / self.rate_bad
    }

    fn is_linear(&self) -> bool {
        self.evidence_exponent().abs() < 1e-14
    }

    /// Stock added `dt` after the phase start.
    pub fn advance(&self, dt: f64) -> f64 {
        if dt <= 0.0 {
            return 0.0;
        }
        if self.is_linear() {
            return self.discount / self.rate_bad * self.v0 / self.a * dt;
        }
        let arg = -(self.v0 / self.a) * (self.time_exponent() * dt).exp_m1();
        if arg <= -1.0 {
            return f64::INFINITY;
        }
        -arg.ln_1p() / self.evidence_exponent()
    }

    /// Time needed to add `du` to the stock, `None` when the flow stalls first.
    pub fn duration_to(&self, du: f64) -> Option<f64> {
        if du <= 0.0 {
            return Some(0.0);
        }
        if self.v0 <= 0.0 {
            return None;
        }
        if self.is_linear() {
            return Some(du * self.a * self.rate_bad / (self.discount * self.v0));
        }
        let arg = -(self.a / self.v0) * (-self.evidence_exponent() * du).exp_m1();
        if arg <= -1.0 {
            return None;
        }
        Some(arg.ln_1p() / self.time_exponent())
    }

    /// Flow when the stock has grown by `du`.
    pub fn flow_after(&self, du: f64) -> f64 {
        let growth = (self.evidence_exponent() * du).exp();
        (self.discount * (self.b * growth - self.a) / (self.rate_bad * self.a)).max(0.0)
    }

    /// Limit of the added stock as time grows, finite only when the belief drifts down.
    pub fn asymptote(&self) -> f64 {
        if self.evidence_exponent() < 0.0 && !self.is_linear() {
            (self.b / self.a).ln() / (-self.evidence_exponent())
        } else {
            f64::INFINITY
        }
    }
}

/// Stock trajectory representation of one phase.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseMotion {
    ClosedForm,
    /// The whole cohort invests at `t_start`.
    Atom,
    /// Numerical solution as `(t, q, flow)` nodes, interpolated by cubic Hermite.
    Sampled(Vec<[f64; 3]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSolution {
    pub cohort_index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub q_start: f64,
    pub q_end: f64,
    pub x_start: f64,
    pub coefficients: PhaseCoefficients,
    pub motion: PhaseMotion,
}

impl PhaseSolution {
    pub fn q_at(&self, t: f64) -> f64 {
        if t <= self.t_start {
            return if t == self.t_start && self.motion == PhaseMotion::Atom {
                self.q_end
            } else {
                self.q_start
            };
        }
        if t >= self.t_end {
            return self.q_end;
        }
        match &self.motion {
            PhaseMotion::ClosedForm => {
                (self.q_start + self.coefficients.advance(t - self.t_start)).min(self.q_end)
            }
            PhaseMotion::Atom => self.q_end,
            PhaseMotion::Sampled(nodes) => hermite(nodes, t).min(self.q_end),
        }
    }

    pub fn flow_at(&self, t: f64) -> f64 {
        if t < self.t_start || t >= self.t_end {
            return 0.0;
        }
        match &self.motion {
            PhaseMotion::ClosedForm => self.coefficients.flow_after(self.q_at(t) - self.q_start),
            PhaseMotion::Atom => 0.0,
            PhaseMotion::Sampled(nodes) => hermite_slope(nodes, t),
        }
    }
}

fn bracket(nodes: &[[f64; 3]], t: f64) -> usize {
    let k = nodes.partition_point(|n| n[0] <= t);
    k.clamp(1, nodes.len() - 1) - 1
}

fn hermite(nodes: &[[f64; 3]], t: f64) -> f64 {
    if nodes.len() == 1 {
        return nodes[0][1];
    }
    let k = bracket(nodes, t);
    let [t0, q0, m0] = nodes[k];
    let [t1, q1, m1] = nodes[k + 1];
    let h = t1 - t0;
    let s = ((t - t0) / h).clamp(0.0, 1.0);
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * q0
        + (s3 - 2.0 * s2 + s) * h * m0
        + (-2.0 * s3 + 3.0 * s2) * q1
        + (s3 - s2) * h * m1
}

fn hermite_slope(nodes: &[[f64; 3]], t: f64) -> f64 {
    if nodes.len() == 1 {
        return nodes[0][2];
    }
    let k = bracket(nodes, t);
    let [t0, q0, m0] = nodes[k];
    let [t1, q1, m1] = nodes[k + 1];
    let h = t1 - t0;
    let s = ((t - t0) / h).clamp(0.0, 1.0);
    let s2 = s * s;
    ((6.0 * s2 - 6.0 * s) * q0 + (6.0 * s - 6.0 * s2) * q1) / h
        + (3.0 * s2 - 4.0 * s + 1.0) * m0
        + (3.0 * s2 - 2.0 * s) * m1
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPath {
    pub phases: Vec<PhaseSolution>,
    /// Asymptotic stock when investment dries out below total mass.
    pub dryout: Option<f64>,
    pub terminal_time: f64,
}

impl BenchmarkPath {
    /// Phase boundaries `T_0 = 0, T_1, ...` of the completed phases.
    pub fn phase_times(&self) -> Vec<f64> {
        let mut times = vec![0.0];
        times.extend(self.phases.iter().filter(|p| p.t_end.is_finite()).map(|p| p.t_end));
        times
    }

    pub fn q_at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self.phases.iter().find(|p| t < p.t_end) {
            Some(p) => p.q_at(t),
            None => self.phases.last().map_or(0.0, |p| p.q_end),
        }
    }

    pub fn flow_at(&self, t: f64) -> f64 {
        self.phases.iter().find(|p| t >= p.t_start && t < p.t_end).map_or(0.0, |p| p.flow_at(t))
    }

    pub fn final_stock(&self) -> f64 {
        self.phases.last().map_or(0.0, |p| p.q_end)
    }
}

/// Investment flow keeping `cohort_index` indifferent at belief `x` under transparency.
pub fn flow_rate(market: &Market, cohort_index: usize, x: f64) -> Result<f64> {
    if market.rate_bad == 0.0 || x >= 1.0 {
        return Err(SolveError::RateDegenerate);
    }
    let r = market.cohorts[cohort_index].discount;
    Ok(r * market.expected_value(x).max(0.0) / (market.rate_bad * (1.0 - x) * (-market.v_bad)))
}

/// Stock at time `t` on a phase in closed form.
pub fn phase_closed_form(phase: &PhaseSolution, t: f64) -> f64 {
    (phase.q_start + phase.coefficients.advance(t - phase.t_start)).min(phase.q_end)
}

fn atom_path(market: &Market) -> BenchmarkPath {
    let phases = (0..market.n_cohorts())
        .map(|i| {
            let q_start = market.mass_before(i);
            let x_start = market.transparency_belief(0.0);
            PhaseSolution {
                cohort_index: i,
                t_start: 0.0,
                t_end: 0.0,
                q_start,
                q_end: q_start + market.cohorts[i].mass,
                x_start,
                coefficients: PhaseCoefficients::new(
                    market,
                    market.cohorts[i].discount,
                    x_start,
                    market.rate_good,
                ),
                motion: PhaseMotion::Atom,
            }
        })
        .collect();
    BenchmarkPath { phases, dryout: None, terminal_time: 0.0 }
}

fn is_degenerate(market: &Market) -> bool {
    market.rate_bad == 0.0 || market.prior >= 1.0
}

/// Closed-form transparent equilibrium.
pub fn solve_transparent(market: &Market) -> Result<BenchmarkPath> {
    market.validate()?;
    if is_degenerate(market) {
        return Ok(atom_path(market));
    }
    let mut phases = Vec::new();
    let mut t = 0.0;
    for (i, cohort) in market.cohorts.iter().enumerate() {
        let q_start = market.mass_before(i);
        let x_start = market.transparency_belief(q_start);
        let coefficients = PhaseCoefficients::new(market, cohort.discount, x_start, market.rate_good);
        if coefficients.v0 <= 0.0 {
            return Ok(BenchmarkPath { phases, dryout: Some(q_start), terminal_time: f64::INFINITY });
        }
        match coefficients.duration_to(cohort.mass) {
            Some(dt) => {
                phases.push(PhaseSolution {
                    cohort_index: i,
                    t_start: t,
                    t_end: t + dt,
                    q_start,
                    q_end: q_start + cohort.mass,
                    x_start,
                    coefficients,
                    motion: PhaseMotion::ClosedForm,
                });
                t += dt;
            }
            None => {
                let q_bar = dryout_level(market).unwrap_or(q_start + coefficients.asymptote());
                phases.push(PhaseSolution {
                    cohort_index: i,
                    t_start: t,
                    t_end: f64::INFINITY,
                    q_start,
                    q_end: q_bar,
                    x_start,
                    coefficients,
                    motion: PhaseMotion::ClosedForm,
                });
                return Ok(BenchmarkPath { phases, dryout: Some(q_bar), terminal_time: f64::INFINITY });
            }
        }
    }
    Ok(BenchmarkPath { phases, dryout: None, terminal_time: t })
}

/// Stock at which the transparent belief reaches the myopic threshold, if it ever does.
pub fn dryout_level(market: &Market) -> Option<f64> {
    if market.rate_good <= market.rate_bad || market.prior >= 1.0 {
        return None;
    }
    let ratio = market.prior * market.v_good / ((1.0 - market.prior) * (-market.v_bad));
    Some(ratio.ln() / (market.rate_good - market.rate_bad))
}

const STALL_FLOW: f64 = 1e-10;
const MAX_STEP_SHARE: f64 = 0.1;

fn rk4(f: &dyn Fn(f64) -> f64, q: f64, h: f64) -> f64 {
    let k1 = f(q);
    let k2 = f(q + 0.5 * h * k1);
    let k3 = f(q + 0.5 * h * k2);
    let k4 = f(q + h * k3);
    q + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Fixed-step RK4 solution of the transparent flow equation.
///
/// The last step of each phase is shortened by bisection so that it lands on
/// the cohort boundary. When the belief drifts toward the threshold the phase
/// is closed once the flow falls below `1e-10`.
pub fn integrate_transparent(market: &Market, step: f64) -> Result<BenchmarkPath> {
    market.validate()?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(SolveError::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if is_degenerate(market) {
        return Ok(atom_path(market));
    }
    let mut phases = Vec::new();
    let mut t = 0.0;
    for (i, cohort) in market.cohorts.iter().enumerate() {
        let q_start = market.mass_before(i);
        let q_target = q_start + cohort.mass;
        let x_start = market.transparency_belief(q_start);
        let coefficients = PhaseCoefficients::new(market, cohort.discount, x_start, market.rate_good);
        let flow = |q: f64| flow_rate(market, i, market.transparency_belief(q)).unwrap_or(0.0);
        let t_start = t;
        let mut q = q_start;
        let mut nodes = vec![[t, q, flow(q)]];
        let stalled = loop {
            let next = rk4(&flow, q, step);
            if next - q > MAX_STEP_SHARE * cohort.mass {
                return Err(SolveError::StepTooLarge { step, overshoot: next - q });
            }
            if next >= q_target {
                let (mut lo, mut hi) = (0.0, step);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if rk4(&flow, q, mid) < q_target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-15 {
                        break;
                    }
                }
                t += 0.5 * (lo + hi);
                q = q_target;
                nodes.push([t, q, flow(q)]);
                break false;
            }
            t += step;
            q = next;
            let slope = flow(q);
            nodes.push([t, q, slope]);
            if slope < STALL_FLOW {
                break true;
            }
        };
        phases.push(PhaseSolution {
            cohort_index: i,
            t_start,
            t_end: if stalled { f64::INFINITY } else { t },
            q_start,
            q_end: q,
            x_start,
            coefficients,
            motion: PhaseMotion::Sampled(nodes),
        });
        if stalled {
            return Ok(BenchmarkPath { phases, dryout: Some(q), terminal_time: f64::INFINITY });
        }
    }
    Ok(BenchmarkPath { phases, dryout: None, terminal_time: t })
}
