//! Welfare-optimal disclosure: transparent bad news, delayed good news.
//!
//! A plan is indexed by `hat_i`, the number of cohorts that invest absent
//! news. Cohorts before it invest in phases during which no good news is
//! shown. When `hat_i < n` all good evidence generated by the first `hat_i`
//! cohorts is released at a single time chosen so that cohort `hat_i` is
//! indifferent between investing when its phase opens and waiting for the
//! release; the remaining cohorts invest only on good news.

use crate::disclosure::DisclosurePolicy;
use crate::error::{Result, SolveError};
use crate::model::Market;

/// Tolerance on the relaxed incentive constraints when screening perturbations.
const IC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPlan {
    pub hat_i: usize,
    /// `T_0 = 0, T_1, ..., T_{hat_i - 1}`.
    pub phase_times: Vec<f64>,
    /// Good-news release time when some cohorts invest only on good news.
    pub release_time: Option<f64>,
    pub policy: DisclosurePolicy,
    pub welfare: f64,
    pub per_cohort: Vec<f64>,
    /// Relaxed-objective value of every candidate `hat_i = 1..=n`, `None` when infeasible.
    pub candidates: Vec<Option<f64>>,
}

/// Relaxed objective with its named intermediates.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedValue {
    pub total: f64,
    pub per_cohort: Vec<f64>,
    /// `x0 v_G e^{-l_G z_{i-1}} + (1 - x0) v_B e^{-l_B F_{i-1}}`: unconditional value at phase `i` opening.
    pub v_tilde: Vec<f64>,
    /// `x0 v_G e^{-l_G z_{i-1}} + (1 - x0) v_B e^{-l_B F_i}`: the same after the phase's bad news.
    pub v_hat: Vec<f64>,
}

/// Length of the phase in which `cohort_index` invests with good news hidden,
/// starting from belief `x_start`.
pub fn designer_phase_duration(market: &Market, cohort_index: usize, x_start: f64) -> Result<f64> {
    let v = market.expected_value(x_start);
    if !(v > 0.0) {
        return Err(SolveError::InvalidArgument(format!(
            "phase start belief {x_start} is not above the myopic threshold"
        )));
    }
    let c = market.cohorts[cohort_index];
    let waited = x_start * market.v_good + (1.0 - x_start) * market.v_bad * (-market.rate_bad * c.mass).exp();
    debug_assert!(waited >= v);
    Ok((waited / v).ln() / c.discount)
}

/// Release time that makes cohort `hat_i` (zero-based index `hat_i - 1`)
/// indifferent between investing at `t_prev` and waiting for all good news
/// generated up to `F_{hat_i}`.
pub fn final_release_time(market: &Market, hat_i: usize, t_prev: f64, x_prev: f64) -> Result<f64> {
    if hat_i == 0 || hat_i > market.n_cohorts() {
        return Err(SolveError::InvalidArgument(format!("hat_i {hat_i} out of range")));
    }
    let z = market.cumulative_mass(hat_i - 1);
    let value_release = x_prev * -(-market.rate_good * z).exp_m1() * market.v_good;
    let value_now = market.expected_value(x_prev);
    if !(value_release >= value_now) {
        return Err(SolveError::InfeasibleRelease { hat_i, value_release, value_now });
    }
    Ok(t_prev + (value_release / value_now).ln() / market.cohorts[hat_i - 1].discount)
}

/// Derivative of the release time with respect to the released amount.
pub fn release_time_slope(market: &Market, hat_i: usize, z: f64) -> f64 {
    let lg = market.rate_good;
    lg * (-lg * z).exp() / (market.cohorts[hat_i - 1].discount * -(-lg * z).exp_m1())
}

/// Relaxed designer objective over cumulative good-news releases `z_1..z_{hat_i}`
/// at phase ends `T_1..T_{hat_i}` (the last time may be omitted when `hat_i = n`).
pub fn relaxed_objective(market: &Market, hat_i: usize, z_levels: &[f64], t_levels: &[f64]) -> Result<RelaxedValue> {
    let n = market.n_cohorts();
    if hat_i == 0 || hat_i > n {
        return Err(SolveError::InvalidArgument(format!("hat_i {hat_i} out of range")));
    }
    if z_levels.len() < hat_i {
        return Err(SolveError::InvalidArgument(format!("need {hat_i} release levels")));
    }
    let needed_times = if hat_i == n { hat_i - 1 } else { hat_i };
    if t_levels.len() < needed_times {
        return Err(SolveError::InvalidArgument(format!("need {needed_times} phase times")));
    }
    let mut z_prev = 0.0;
    let mut t_prev = 0.0;
    for i in 0..hat_i {
        let z = z_levels[i];
        let cap = market.cumulative_mass(i);
        if !(z >= z_prev - 1e-15 && z <= cap + 1e-15) {
            return Err(SolveError::ConstraintViolation(format!(
                "release level z_{} = {z} outside [{z_prev}, {cap}]",
                i + 1
            )));
        }
        if let Some(&t) = t_levels.get(i) {
            if t < t_prev {
                return Err(SolveError::ConstraintViolation(format!("phase times must not decrease at T_{}", i + 1)));
            }
            t_prev = t;
        }
        z_prev = z;
    }

    let k = market.prior * market.v_good;
    let bad = (1.0 - market.prior) * market.v_bad;
    let mut per_cohort = vec![0.0; n];
    let mut v_tilde = Vec::with_capacity(hat_i);
    let mut v_hat = Vec::with_capacity(hat_i);
    for i in 0..hat_i {
        let z_before = if i == 0 { 0.0 } else { z_levels[i - 1] };
        let t_open = if i == 0 { 0.0 } else { t_levels[i - 1] };
        let good_left = k * (-market.rate_good * z_before).exp();
        let vt = good_left + bad * (-market.rate_bad * market.mass_before(i)).exp();
        let vh = good_left + bad * (-market.rate_bad * market.cumulative_mass(i)).exp();
        v_tilde.push(vt);
        v_hat.push(vh);
        let c = market.cohorts[i];
        per_cohort[i] += c.mass * (-c.discount * t_open).exp() * vt;
        let released = good_left - k * (-market.rate_good * z_levels[i]).exp();
        if released != 0.0 {
            let t_i = t_levels[i];
            for j in (i + 1)..n {
                let cj = market.cohorts[j];
                per_cohort[j] += released * cj.mass * (-cj.discount * t_i).exp();
            }
        }
    }
    let total = per_cohort.iter().sum();
    Ok(RelaxedValue { total, per_cohort, v_tilde, v_hat })
}

/// Phase times at which every relaxed incentive constraint binds for the given
/// release levels, or `None` when some constraint cannot hold.
pub fn binding_phase_times(market: &Market, hat_i: usize, z_levels: &[f64]) -> Option<Vec<f64>> {
    let n = market.n_cohorts();
    let k = market.prior * market.v_good;
    let bad = (1.0 - market.prior) * market.v_bad;
    let mut times = Vec::with_capacity(hat_i);
    let mut t_prev = 0.0;
    for i in 0..hat_i {
        if i + 1 == n && hat_i == n {
            break;
        }
        let z_before = if i == 0 { 0.0 } else { z_levels[i - 1] };
        let g_before = k * (-market.rate_good * z_before).exp();
        let g_after = k * (-market.rate_good * z_levels[i]).exp();
        let lhs = g_before + bad * (-market.rate_bad * market.mass_before(i)).exp();
        let rhs = g_before - g_after + (g_after + bad * (-market.rate_bad * market.cumulative_mass(i)).exp()).max(0.0);
        if !(lhs > 0.0 && rhs >= lhs * (1.0 - 1e-14)) {
            return None;
        }
        t_prev += (rhs / lhs).ln().max(0.0) / market.cohorts[i].discount;
        times.push(t_prev);
    }
    Some(times)
}

/// Whether the relaxed incentive constraints hold at the given levels and times.
pub fn relaxed_constraints_hold(market: &Market, hat_i: usize, z_levels: &[f64], t_levels: &[f64]) -> bool {
    let n = market.n_cohorts();
    let k = market.prior * market.v_good;
    let bad = (1.0 - market.prior) * market.v_bad;
    (0..hat_i).all(|i| {
        let Some(&t_i) = t_levels.get(i) else { return i + 1 == n };
        let t_open = if i == 0 { 0.0 } else { t_levels[i - 1] };
        let r = market.cohorts[i].discount;
        let z_before = if i == 0 { 0.0 } else { z_levels[i - 1] };
        let g_before = k * (-market.rate_good * z_before).exp();
        let g_after = k * (-market.rate_good * z_levels[i]).exp();
        let lhs = (-r * t_open).exp() * (g_before + bad * (-market.rate_bad * market.mass_before(i)).exp());
        let rhs = (-r * t_i).exp()
            * (g_before - g_after + (g_after + bad * (-market.rate_bad * market.cumulative_mass(i)).exp()).max(0.0));
        lhs >= rhs - IC_TOL * lhs.abs().max(1.0)
    })
}

struct Candidate {
    phase_times: Vec<f64>,
    release_time: Option<f64>,
    terminal_phase_end: f64,
    value: RelaxedValue,
}

fn candidate(market: &Market, k: usize) -> Result<Candidate> {
    let n = market.n_cohorts();
    let mut phase_times = vec![0.0];
    for i in 0..k - 1 {
        let x = market.posterior_no_news(0.0, market.mass_before(i));
        let t = phase_times[i] + designer_phase_duration(market, i, x)?;
        phase_times.push(t);
    }
    let t_open = phase_times[k - 1];
    let x_open = market.posterior_no_news(0.0, market.mass_before(k - 1));
    if k < n {
        let f_k = market.cumulative_mass(k - 1);
        if market.no_news_value(f_k, f_k) > 0.0 {
            return Err(SolveError::InvalidArgument(format!(
                "candidate {k}: cohort {} would still invest after the release",
                k + 1
            )));
        }
        let release = final_release_time(market, k, t_open, x_open)?;
        let mut z = vec![0.0; k];
        z[k - 1] = f_k;
        let mut times = phase_times[1..].to_vec();
        times.push(release);
        let value = relaxed_objective(market, k, &z, &times)?;
        Ok(Candidate { phase_times, release_time: Some(release), terminal_phase_end: release, value })
    } else {
        let z = vec![0.0; k];
        let value = relaxed_objective(market, k, &z, &phase_times[1..])?;
        let end = t_open + designer_phase_duration(market, k - 1, x_open)?;
        Ok(Candidate { phase_times, release_time: None, terminal_phase_end: end, value })
    }
}

/// Best plan over all candidates `hat_i = 1..=n`; ties go to the larger `hat_i`.
pub fn optimal_policy(market: &Market) -> Result<OptimalPlan> {
    market.validate()?;
    let n = market.n_cohorts();
    let mut best: Option<(usize, Candidate)> = None;
    let mut values = Vec::with_capacity(n);
    for k in 1..=n {
        match candidate(market, k) {
            Ok(c) => {
                values.push(Some(c.value.total));
                if best.as_ref().is_none_or(|(_, b)| c.value.total >= b.value.total) {
                    best = Some((k, c));
                }
            }
            Err(SolveError::Market(e)) => return Err(e.into()),
            Err(_) => values.push(None),
        }
    }
    let (hat_i, c) = best.expect("the all-cohort candidate is always feasible");
    let release = match c.release_time {
        Some(t) => t,
        None => {
            // Releasing at the last phase opening is harmless unless it would
            // push the last investing cohort's post-release belief to the threshold.
            let f = market.mass_before(n - 1);
            if n > 1 && market.no_news_value(f, f) <= 0.0 {
                c.terminal_phase_end
            } else {
                *c.phase_times.last().unwrap()
            }
        }
    };
    Ok(OptimalPlan {
        hat_i,
        phase_times: c.phase_times,
        release_time: c.release_time,
        policy: DisclosurePolicy::delayed_good_news(release),
        welfare: c.value.total,
        per_cohort: c.value.per_cohort,
        candidates: values,
    })
}

/// Earliest full-revelation time for a single cohort with equal evidence rates.
pub fn homogeneous_lower_bound(market: &Market) -> Result<f64> {
    market.validate()?;
    if market.n_cohorts() != 1 || market.rate_good != market.rate_bad {
        return Err(SolveError::InvalidArgument(
            "bound needs a single cohort and equal evidence rates".into(),
        ));
    }
    let lambda = market.rate_good * market.cohorts[0].mass;
    let x0 = market.prior;
    let waited = x0 * market.v_good + (-lambda).exp() * (1.0 - x0) * market.v_bad;
    Ok((waited / market.expected_value(x0)).ln() / market.cohorts[0].discount)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub label: String,
    pub feasible: bool,
    /// Objective change; zero when infeasible.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderReport {
    pub perturbations: Vec<Perturbation>,
    pub pass: bool,
}

/// Perturbs the plan's release levels and phase times and checks that no
/// feasible perturbation raises the relaxed objective by more than `1e-10`.
///
/// Release-level perturbations re-solve the phase times that keep the relaxed
/// incentive constraints binding, which couples the release time to the
/// released amount through `release_time_slope`.
pub fn first_order_check(market: &Market, plan: &OptimalPlan, epsilon: f64) -> Result<FirstOrderReport> {
    let n = market.n_cohorts();
    let h = plan.hat_i;
    let mut z = vec![0.0; h];
    if h < n {
        z[h - 1] = market.cumulative_mass(h - 1);
    }
    let mut times = plan.phase_times[1..].to_vec();
    if let Some(t) = plan.release_time {
        times.push(t);
    }
    let base = relaxed_objective(market, h, &z, &times)?.total;
    let mut out = Vec::new();
    let mut evaluate = |label: String, z_new: Vec<f64>, t_new: Option<Vec<f64>>| {
        let in_box = z_new
            .iter()
            .enumerate()
            .all(|(i, &v)| v >= 0.0 && v <= market.cumulative_mass(i) + 1e-15 && (i == 0 || v >= z_new[i - 1]));
        let t_new = if in_box { t_new.or_else(|| binding_phase_times(market, h, &z_new)) } else { None };
        let feasible = t_new.as_ref().is_some_and(|t| relaxed_constraints_hold(market, h, &z_new, t));
        let delta = match (&t_new, feasible) {
            (Some(t), true) => relaxed_objective(market, h, &z_new, t).map(|v| v.total - base).unwrap_or(0.0),
            _ => 0.0,
        };
        out.push(Perturbation { label, feasible, delta });
    };
    for i in 0..h.saturating_sub(1) {
        let mut z_new = z.clone();
        for v in z_new.iter_mut().take(h - 1).skip(i) {
            *v += epsilon;
        }
        if h == n {
            z_new[h - 1] = z_new[h - 1].max(z_new[h - 2]);
        }
        evaluate(format!("release {epsilon:e} more good news at T_{}", i + 1), z_new, None);
    }
    if h < n {
        let mut z_new = z.clone();
        z_new[h - 1] -= epsilon;
        evaluate(format!("withhold {epsilon:e} of the final release"), z_new, None);
        let mut z_new = z.clone();
        z_new[h - 1] += epsilon;
        evaluate(format!("release {epsilon:e} beyond F_{h}"), z_new, None);
    }
    for i in 0..times.len() {
        for sign in [1.0, -1.0] {
            let mut t_new = times.clone();
            t_new[i] += sign * epsilon;
            evaluate(format!("shift T_{} by {:+e}", i + 1, sign * epsilon), z.clone(), Some(t_new));
        }
    }
    let pass = out.iter().all(|p| !p.feasible || p.delta <= 1e-10);
    Ok(FirstOrderReport { perturbations: out, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disclosure::Schedule;
    use crate::model::Cohort;

    const D1: f64 = 0.079_753_700_622_496_9;
    const D2: f64 = 0.019_756_880_360_769_4;

    fn withholding_market() -> Market {
        Market { prior: 0.5, rate_good: 2.0, rate_bad: 1.0, ..Market::two_cohort() }
    }

    #[test]
    fn phase_duration_examples() {
        let m = Market::two_cohort();
        assert!((designer_phase_duration(&m, 0, 0.75).unwrap() - D1).abs() < 1e-15);
        let x1 = m.posterior_no_news(0.0, 1.0);
        assert!((designer_phase_duration(&m, 1, x1).unwrap() - D2).abs() < 1e-15);
        let tiny = Market { cohorts: vec![Cohort::new(1.0, 1e-12)], ..m };
        assert!(designer_phase_duration(&tiny, 0, 0.75).unwrap() < 1e-11);
    }

    #[test]
    fn release_time_examples() {
        let m = withholding_market();
        let t = final_release_time(&m, 1, 0.0, 0.5).unwrap();
        assert!((t - 0.273_866_861_345_543).abs() < 1e-14);
        let certain = Market { rate_good: 60.0, ..m.clone() };
        let limit = (0.5 * 8.0 / 2.0f64).ln() / 2.0;
        assert!((final_release_time(&certain, 1, 0.0, 0.5).unwrap() - limit).abs() < 1e-14);
        let weak = Market { rate_good: 0.01, ..m };
        assert!(matches!(final_release_time(&weak, 1, 0.0, 0.5), Err(SolveError::InfeasibleRelease { .. })));
    }

    #[test]
    fn relaxed_objective_examples() {
        let m = Market::two_cohort();
        let v = relaxed_objective(&m, 2, &[0.0, 0.0], &[D1]).unwrap();
        assert!((v.total - 10.415_101_437_998_8).abs() < 1e-12);
        assert!((v.per_cohort[0] - 5.0).abs() < 1e-14);
        let single = Market { cohorts: vec![Cohort::new(1.0, 1.0)], ..m.clone() };
        for t in [0.0, 0.3, 2.0] {
            assert!((relaxed_objective(&single, 1, &[0.0], &[t]).unwrap().total - 5.0).abs() < 1e-14);
        }
        assert!(matches!(relaxed_objective(&m, 2, &[1.5, 0.0], &[D1]), Err(SolveError::ConstraintViolation(_))));
    }

    #[test]
    fn two_cohort_plan() {
        let m = Market::two_cohort();
        let plan = optimal_policy(&m).unwrap();
        assert_eq!(plan.hat_i, 2);
        assert!((plan.phase_times[1] - D1).abs() < 1e-15);
        assert_eq!(plan.release_time, None);
        assert_eq!(plan.policy.good, Schedule::DelayUntil(plan.phase_times[1]));
        assert_eq!(plan.policy.bad, Schedule::Transparent);
        assert!((plan.welfare - 10.415_101_437_998_8).abs() < 1e-12);
        assert!(first_order_check(&m, &plan, 1e-4).unwrap().pass);
    }

    #[test]
    fn withholding_instance_withholds_from_last_cohort() {
        let m = withholding_market();
        let plan = optimal_policy(&m).unwrap();
        assert_eq!(plan.hat_i, 1);
        assert!((plan.welfare - 4.630_079_415_931_6).abs() < 1e-12);
        assert!((plan.candidates[1].unwrap() - 4.555_089_476_968_32).abs() < 1e-12);
        let report = first_order_check(&m, &plan, 1e-4).unwrap();
        assert!(report.pass, "{report:?}");
        let beyond = report.perturbations.iter().find(|p| p.label.contains("beyond")).unwrap();
        assert!(!beyond.feasible);
    }

    #[test]
    fn homogeneous_bound() {
        let m = Market {
            rate_good: 1.0,
            rate_bad: 1.0,
            cohorts: vec![Cohort::new(1.0, 1.0)],
            ..Market::two_cohort()
        };
        assert!((homogeneous_lower_bound(&m).unwrap() - 0.119_048_112_234_537).abs() < 1e-15);
        let quiet = Market { rate_good: 1e-9, rate_bad: 1e-9, ..m.clone() };
        assert!(homogeneous_lower_bound(&quiet).unwrap() < 1e-8);
        let impatient = Market { cohorts: vec![Cohort::new(1e9, 1.0)], ..m };
        assert!(homogeneous_lower_bound(&impatient).unwrap() < 1e-9);
    }

    #[test]
    fn single_cohort_time_shift_is_neutral() {
        let m = Market { cohorts: vec![Cohort::new(1.0, 1.0)], ..Market::two_cohort() };
        let plan = optimal_policy(&m).unwrap();
        assert_eq!(plan.hat_i, 1);
        assert!((plan.welfare - 5.0).abs() < 1e-14);
        assert!(first_order_check(&m, &plan, 1e-3).unwrap().pass);
    }

    #[test]
    fn release_slope_matches_finite_difference() {
        let m = withholding_market();
        let x = 0.5;
        let h = 1e-6;
        let z = 1.0;
        let t = |z: f64| {
            let v = x * -(-m.rate_good * z).exp_m1() * m.v_good;
            (v / m.expected_value(x)).ln() / m.cohorts[0].discount
        };
        let numeric = (t(z + h) - t(z - h)) / (2.0 * h);
        assert!((numeric - release_time_slope(&m, 1, z)).abs() < 1e-7);
    }
}
