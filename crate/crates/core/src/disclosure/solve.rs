//! Event-driven construction of the no-news equilibrium path.

use crate::benchmark::{PhaseCoefficients, PhaseMotion, PhaseSolution};
use crate::error::{Result, SolveError};
use crate::model::Market;

use super::path::{
    count_invested_cohorts, ChannelMode, EquilibriumPath, EventKind, Jump, JumpKind, Motion, PathEvent,
    PathState, Piece, Segment, WaitCurve,
};
use super::schedule::DisclosurePolicy;

/// Times closer than this are treated as coincident.
const SNAP: f64 = 1e-12;
/// Relative tolerance for sitting exactly on a wait-for-release curve.
const ON_CURVE: f64 = 1e-9;
const MAX_STEPS: usize = 100_000;

struct Builder<'a> {
    market: &'a Market,
    policy: &'a DisclosurePolicy,
    horizon: f64,
    t: f64,
    state: PathState,
    pieces: Vec<Piece>,
    events: Vec<PathEvent>,
    phase_times: Vec<f64>,
    shortfall: Option<f64>,
    released_at_t: bool,
}

enum Step {
    Continue,
    Done(f64),
}

/// Builds the equilibrium path under `policy` up to `horizon`.
///
/// Between releases the marginal cohort invests at the rate that keeps it
/// indifferent to waiting, or follows the curve that keeps it indifferent to
/// waiting for a pending decisive good-news release. While bad news is capped
/// agents invest in an atom until waiting for the next release becomes as
/// attractive as investing.
pub fn solve_equilibrium(market: &Market, policy: &DisclosurePolicy, horizon: f64) -> Result<EquilibriumPath> {
    market.validate()?;
    policy.validate().map_err(|e| SolveError::UnsupportedPolicy(e.to_string()))?;
    if !(horizon > 0.0) {
        return Err(SolveError::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let mut b = Builder {
        market,
        policy,
        horizon,
        t: 0.0,
        state: PathState::default(),
        pieces: Vec::new(),
        events: Vec::new(),
        phase_times: vec![0.0],
        shortfall: None,
        released_at_t: false,
    };
    for _ in 0..MAX_STEPS {
        if let Step::Done(terminal) = b.step()? {
            let hat_i = count_invested_cohorts(market, b.state.q);
            return Ok(EquilibriumPath {
                market: market.clone(),
                pieces: b.pieces,
                events: b.events,
                hat_i,
                phase_times: b.phase_times,
                terminal_time: terminal,
                shortfall: b.shortfall,
            });
        }
    }
    Err(SolveError::HorizonTooShort { horizon })
}

impl Builder<'_> {
    fn total(&self) -> f64 {
        self.market.total_mass()
    }

    fn no_news_value(&self, z_good: f64, z_bad: f64) -> f64 {
        self.market.no_news_value(z_good, z_bad)
    }

    fn apply_releases(&mut self) {
        let cap_g = self.policy.good.cap_at(self.t);
        let cap_b = self.policy.bad.cap_at(self.t);
        let s = self.state;
        let after = PathState {
            q: s.q,
            z_good: s.z_good.max(cap_g.min(s.q)),
            z_bad: s.z_bad.max(cap_b.min(s.q)),
        };
        self.released_at_t = false;
        if after.z_good > s.z_good || after.z_bad > s.z_bad {
            self.pieces.push(Piece::Jump(Jump { time: self.t, before: s, after, kind: JumpKind::Release }));
            self.events.push(PathEvent {
                time: self.t,
                kind: EventKind::ReleaseAtom { good: after.z_good - s.z_good, bad: after.z_bad - s.z_bad },
            });
            self.state = after;
            self.released_at_t = true;
        }
    }

    /// Ends construction; later releases are still recorded so that the
    /// revealed-evidence processes stay complete.
    fn finish(&mut self, kind: EventKind, terminal: f64) -> Step {
        self.events.push(PathEvent { time: terminal, kind });
        if terminal.is_finite() {
            while let Some(rel) = self.policy.next_release_after(self.t) {
                let s = self.state;
                self.push_segment(rel, s.q, ChannelMode::Fixed(s.z_good), ChannelMode::Fixed(s.z_bad), Motion::Hold);
                self.apply_releases();
            }
        }
        Step::Done(terminal)
    }

    fn record_completed(&mut self, q_from: f64, q_to: f64, time: f64) {
        for i in 0..self.market.n_cohorts() {
            let f = self.market.cumulative_mass(i);
            if q_from < f - SNAP && q_to >= f - SNAP {
                self.phase_times.push(time);
                self.events.push(PathEvent { time, kind: EventKind::PhaseChange { cohort: i } });
            }
        }
    }

    fn push_segment(&mut self, t_end: f64, q_end: f64, good: ChannelMode, bad: ChannelMode, motion: Motion) {
        let q_start = self.state.q;
        self.pieces.push(Piece::Segment(Segment {
            t_start: self.t,
            t_end,
            cohort_index: self.market.marginal_cohort(q_start),
            q_start,
            q_end,
            good,
            bad,
            motion,
        }));
        let channel = |mode: ChannelMode| match mode {
            ChannelMode::Fixed(c) => c,
            ChannelMode::Tracking => q_end,
        };
        let end = PathState { q: q_end, z_good: channel(good), z_bad: channel(bad) };
        self.record_completed(q_start, q_end, t_end);
        self.state = end;
        self.t = t_end;
    }

    fn hold_until(&mut self, t_end: f64) -> Result<Step> {
        if t_end > self.horizon {
            return Err(SolveError::HorizonTooShort { horizon: self.horizon });
        }
        let s = self.state;
        self.push_segment(t_end, s.q, ChannelMode::Fixed(s.z_good), ChannelMode::Fixed(s.z_bad), Motion::Hold);
        Ok(Step::Continue)
    }

    fn step(&mut self) -> Result<Step> {
        if self.t > self.horizon {
            return Err(SolveError::HorizonTooShort { horizon: self.horizon });
        }
        self.apply_releases();
        if self.state.q >= self.total() - SNAP {
            return Ok(self.finish(EventKind::Termination, self.t));
        }
        let cap_g = self.policy.good.cap_at(self.t);
        let cap_b = self.policy.bad.cap_at(self.t);
        let s = self.state;
        let bad_flows = cap_b > s.q + SNAP;
        let informative = self.market.rate_bad > 0.0 && self.market.prior < 1.0;
        if bad_flows && informative {
            self.bad_flowing(cap_g, cap_b)
        } else {
            self.bad_capped(cap_g)
        }
    }

    fn bad_flowing(&mut self, cap_g: f64, cap_b: f64) -> Result<Step> {
        let m = self.market;
        let s = self.state;
        if self.no_news_value(s.z_good, s.z_bad) <= 0.0 {
            let kind = if self.released_at_t { EventKind::Termination } else { EventKind::Stall };
            return Ok(self.finish(kind, self.t));
        }
        let good_flows = cap_g > s.q + SNAP;
        let i = m.marginal_cohort(s.q);
        let r = m.cohorts[i].discount;
        let mut q_target = m.cumulative_mass(i).min(cap_b);
        if good_flows {
            q_target = q_target.min(cap_g);
        }
        let release = self.policy.next_release_after(self.t);

        // A pending release that discloses good news and leaves the no-news
        // belief at or below the threshold makes waiting for it valuable.
        let wait = match release {
            Some(rel) if !good_flows => {
                let c = s.z_good;
                let c_next = self.policy.good.cap_at(rel).min(q_target);
                let zb_next = self.policy.bad.cap_at(rel).min(q_target).max(s.z_bad);
                (c_next > c + SNAP && self.no_news_value(c_next, zb_next) <= 0.0).then(|| {
                    let odds_bad = (1.0 - m.prior) / m.prior;
                    WaitCurve {
                        release_time: rel,
                        discount: r,
                        gain: -(-m.rate_good * (c_next - c)).exp_m1() * m.v_good,
                        scale: -m.v_bad * odds_bad * (m.rate_good * c).exp(),
                        v_good: m.v_good,
                        rate_bad: m.rate_bad,
                    }
                })
            }
            _ => None,
        };

        if let Some(curve) = wait {
            let x = m.posterior_no_news(s.z_good, s.z_bad);
            let invest_now = m.expected_value(x) / x;
            let wait_now = (-r * (curve.release_time - self.t)).exp() * curve.gain;
            if (invest_now - wait_now).abs() <= ON_CURVE * curve.gain {
                return self.follow_curve(curve, q_target);
            }
            if invest_now < wait_now {
                return self.hold_until(curve.release_time);
            }
        }

        let good_mode = if good_flows { ChannelMode::Tracking } else { ChannelMode::Fixed(s.z_good) };
        let drift = if good_flows { m.rate_good } else { 0.0 };
        let x = m.posterior_no_news(s.z_good, s.z_bad);
        let coefficients = PhaseCoefficients::new(m, r, x, drift);
        let to_target = coefficients.duration_to(q_target - s.q).map(|d| self.t + d);
        let mut t_end = to_target.unwrap_or(f64::INFINITY);
        let mut reaches_target = to_target.is_some();
        if let Some(rel) = release {
            if (t_end - rel).abs() < SNAP {
                t_end = rel;
            } else if rel < t_end {
                t_end = rel;
                reaches_target = false;
            }
        }
        let mut phase = PhaseSolution {
            cohort_index: i,
            t_start: self.t,
            t_end,
            q_start: s.q,
            q_end: q_target,
            x_start: x,
            coefficients,
            motion: PhaseMotion::ClosedForm,
        };
        if let Some(curve) = wait {
            // Local flow until waiting for the release becomes as good as investing.
            let gap = |t: f64| {
                let q = s.q + coefficients.advance(t - self.t);
                let phi = m.v_good - curve.scale * (-m.rate_bad * q).exp();
                phi - (-r * (curve.release_time - t)).exp() * curve.gain
            };
            let horizon_end = if t_end.is_finite() { t_end } else { curve.release_time };
            if gap(horizon_end) < 0.0 {
                let (mut lo, mut hi) = (self.t, horizon_end);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if gap(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-15 {
                        break;
                    }
                }
                t_end = hi;
                reaches_target = false;
            }
        }
        if t_end == f64::INFINITY {
            let q_lim = (s.q + coefficients.asymptote()).min(q_target);
            phase.q_end = q_lim;
            self.push_segment(f64::INFINITY, q_lim, good_mode, ChannelMode::Tracking, Motion::Flow(phase));
            return Ok(self.finish(EventKind::Stall, f64::INFINITY));
        }
        if t_end > self.horizon {
            return Err(SolveError::HorizonTooShort { horizon: self.horizon });
        }
        let q_end = if reaches_target { q_target } else { (s.q + coefficients.advance(t_end - self.t)).min(q_target) };
        phase.t_end = t_end;
        phase.q_end = q_end;
        self.push_segment(t_end, q_end, good_mode, ChannelMode::Tracking, Motion::Flow(phase));
        Ok(Step::Continue)
    }

    fn follow_curve(&mut self, curve: WaitCurve, q_target: f64) -> Result<Step> {
        let s = self.state;
        let phi_target = curve.v_good - curve.scale * (-curve.rate_bad * q_target).exp();
        let (t_end, q_end) = if phi_target <= curve.gain * (1.0 + ON_CURVE) {
            let t_hit = curve.time_at(q_target).clamp(self.t, curve.release_time);
            let t_hit = if curve.release_time - t_hit < SNAP { curve.release_time } else { t_hit };
            (t_hit, q_target)
        } else {
            let q_rel = curve.q_at(curve.release_time).clamp(s.q, q_target);
            self.shortfall = Some(self.shortfall.unwrap_or(0.0) + (q_target - q_rel));
            (curve.release_time, q_rel)
        };
        if t_end > self.horizon {
            return Err(SolveError::HorizonTooShort { horizon: self.horizon });
        }
        self.push_segment(
            t_end,
            q_end,
            ChannelMode::Fixed(s.z_good),
            ChannelMode::Tracking,
            Motion::WaitForRelease(curve),
        );
        Ok(Step::Continue)
    }

    /// Value of waiting until `release` for the agent at stock `q_star` when the
    /// stock is raised to `q_star` now, relative to the common no-news probability.
    fn wait_value(&self, q_star: f64, release: f64, cap_g: f64) -> f64 {
        let m = self.market;
        let s = self.state;
        let r = m.cohorts[m.marginal_cohort(q_star)].discount;
        let g0 = m.prior * m.v_good * (-m.rate_good * s.z_good).exp();
        let zg_now = s.z_good.max(cap_g.min(q_star));
        let g_now = m.prior * m.v_good * (-m.rate_good * zg_now).exp();
        let immediate = g0 - g_now;
        let invest_after = self.no_news_value(zg_now, s.z_bad).max(0.0);
        if release == f64::INFINITY {
            return immediate + invest_after;
        }
        let zg_rel = zg_now.max(self.policy.good.cap_at(release).min(q_star));
        let zb_rel = s.z_bad.max(self.policy.bad.cap_at(release).min(q_star));
        let g_rel = m.prior * m.v_good * (-m.rate_good * zg_rel).exp();
        let at_release =
            (-r * (release - self.t)).exp() * (g_now - g_rel + self.no_news_value(zg_rel, zb_rel).max(0.0));
        immediate + at_release.max(invest_after)
    }

    fn bad_capped(&mut self, cap_g: f64) -> Result<Step> {
        let s = self.state;
        let release = self.policy.next_release_after(self.t);
        let invest_now = self.no_news_value(s.z_good, s.z_bad);
        if invest_now <= 0.0 {
            let bad_pending = s.q > s.z_bad + SNAP && self.policy.bad.releases_above(self.t, s.z_bad);
            return match release {
                Some(rel) if bad_pending => self.hold_until(rel),
                _ => {
                    let kind = if self.released_at_t { EventKind::Termination } else { EventKind::Stall };
                    Ok(self.finish(kind, self.t))
                }
            };
        }
        let good_flows = cap_g > s.q + SNAP;
        let rel = release.unwrap_or(f64::INFINITY);
        let total = self.total();
        let ok = |q_star: f64| invest_now >= self.wait_value(q_star, rel, if good_flows { cap_g } else { 0.0 });
        let q_star = if (!good_flows && rel == f64::INFINITY) || ok(total) {
            total
        } else if !ok(s.q) {
            s.q
        } else {
            let (mut lo, mut hi) = (s.q, total);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if ok(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-14 {
                    break;
                }
            }
            lo
        };
        if q_star > s.q {
            let after = PathState { q: q_star, ..s };
            self.pieces.push(Piece::Jump(Jump { time: self.t, before: s, after, kind: JumpKind::Investment }));
            self.events.push(PathEvent { time: self.t, kind: EventKind::InvestmentAtom { mass: q_star - s.q } });
            self.record_completed(s.q, q_star, self.t);
            self.state = after;
            if good_flows {
                let z_good = s.z_good.max(cap_g.min(q_star));
                if z_good > s.z_good {
                    let disclosed = PathState { z_good, ..after };
                    self.pieces.push(Piece::Jump(Jump {
                        time: self.t,
                        before: after,
                        after: disclosed,
                        kind: JumpKind::Release,
                    }));
                    self.events.push(PathEvent {
                        time: self.t,
                        kind: EventKind::ReleaseAtom { good: z_good - s.z_good, bad: 0.0 },
                    });
                    self.state = disclosed;
                    if q_star < total - SNAP {
                        return Ok(Step::Continue);
                    }
                }
            }
        }
        if self.state.q >= total - SNAP {
            return Ok(self.finish(EventKind::Termination, self.t));
        }
        match release {
            Some(rel) => self.hold_until(rel),
            None => Ok(self.finish(EventKind::Stall, self.t)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::solve_transparent;
    use crate::disclosure::schedule::Schedule;
    use crate::model::Cohort;

    const HORIZON: f64 = 100.0;

    #[test]
    fn transparent_matches_benchmark() {
        let m = Market::two_cohort();
        let path = solve_equilibrium(&m, &DisclosurePolicy::transparent(), HORIZON).unwrap();
        let bench = solve_transparent(&m).unwrap();
        for k in 0..=200 {
            let t = 0.25 * k as f64 / 200.0;
            assert!((path.q_at(t) - bench.q_at(t)).abs() < 1e-12);
        }
        assert!((path.phase_times[1] - 0.119_048_112_234_537).abs() < 1e-13);
        assert_eq!(path.hat_i, 2);
    }

    #[test]
    fn silent_good_news_phase_times() {
        let m = Market::two_cohort();
        let policy = DisclosurePolicy { good: Schedule::Silent, bad: Schedule::Transparent };
        let path = solve_equilibrium(&m, &policy, HORIZON).unwrap();
        assert!((path.phase_times[1] - 0.079_753_700_622_496_9).abs() < 1e-13);
        assert!((path.phase_times[2] - 0.099_510_580_983_266_2).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_delay_reaches_full_mass_at_bound() {
        let m = Market {
            rate_good: 1.0,
            rate_bad: 1.0,
            cohorts: vec![Cohort::new(1.0, 1.0)],
            ..Market::two_cohort()
        };
        let t_star = 0.119_048_112_234_537;
        let path = solve_equilibrium(&m, &DisclosurePolicy::delayed_good_news(t_star), HORIZON).unwrap();
        assert!((path.terminal_time - t_star).abs() < 1e-12);
        let q = 0.06;
        let t = path.phase_times[0] + 0.05;
        let s = path.state_at(t);
        assert!(s.q > 0.0 && s.z_good == 0.0 && s.z_bad == s.q);
        assert!(path.belief_at(t) > 0.75 && q > 0.0);
    }

    #[test]
    fn delayed_bad_news_triggers_full_atom() {
        let m = Market::two_cohort();
        let policy = DisclosurePolicy { good: Schedule::Silent, bad: Schedule::DelayUntil(1e3) };
        let path = solve_equilibrium(&m, &policy, 1e4).unwrap();
        assert_eq!(path.q_at(0.0), 2.0);
        assert_eq!(path.terminal_time, 0.0);
    }

    #[test]
    fn dryout_stalls() {
        let m = Market {
            prior: 0.5,
            rate_good: 2.0,
            rate_bad: 1.0,
            cohorts: vec![Cohort::new(1.0, 3.0)],
            ..Market::two_cohort()
        };
        let path = solve_equilibrium(&m, &DisclosurePolicy::transparent(), HORIZON).unwrap();
        assert_eq!(path.terminal_time, f64::INFINITY);
        assert!((path.final_state().q - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(matches!(path.events.last().unwrap().kind, EventKind::Stall));
    }

    #[test]
    fn short_horizon_is_reported() {
        let m = Market::two_cohort();
        let err = solve_equilibrium(&m, &DisclosurePolicy::transparent(), 0.05).unwrap_err();
        assert_eq!(err, SolveError::HorizonTooShort { horizon: 0.05 });
    }

    #[test]
    fn revealed_evidence_law_for_step_caps() {
        use crate::disclosure::schedule::CapPoint;
        let m = Market::two_cohort();
        let bad = Schedule::StepCaps(vec![
            CapPoint { time: 0.0, cap: 0.3 },
            CapPoint { time: 0.05, cap: 0.9 },
            CapPoint { time: 0.2, cap: 2.0 },
        ]);
        let policy = DisclosurePolicy { good: Schedule::Silent, bad: bad.clone() };
        let path = solve_equilibrium(&m, &policy, HORIZON).unwrap();
        for k in 0..=400 {
            let t = 0.5 * k as f64 / 400.0;
            let s = path.state_at(t);
            assert_eq!(s.z_bad, bad.cap_at(t).min(s.q), "t={t}");
            assert_eq!(s.z_good, 0.0);
        }
    }
}
