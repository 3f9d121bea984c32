use crate::benchmark::PhaseSolution;
use crate::model::Market;

/// Stock and revealed evidence at an instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathState {
    pub q: f64,
    pub z_good: f64,
    pub z_bad: f64,
}

/// How a channel's revealed evidence moves within a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelMode {
    Fixed(f64),
    /// Revealed as generated, `z = q`.
    Tracking,
}

/// Stock trajectory that keeps the marginal cohort indifferent between
/// investing now and waiting for a pending good-news release at `release_time`:
/// `v_good - scale e^{-rate_bad q} = e^{-discount (release_time - t)} gain`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitCurve {
    pub release_time: f64,
    pub discount: f64,
    pub gain: f64,
    pub scale: f64,
    pub v_good: f64,
    pub rate_bad: f64,
}

impl WaitCurve {
    fn head(&self, t: f64) -> f64 {
        (-self.discount * (self.release_time - t)).exp() * self.gain
    }

    pub fn q_at(&self, t: f64) -> f64 {
        -((self.v_good - self.head(t)) / self.scale).ln() / self.rate_bad
    }

    pub fn flow_at(&self, t: f64) -> f64 {
        let h = self.head(t);
        self.discount * h / (self.rate_bad * (self.v_good - h))
    }

    /// Time at which the curve passes through stock `q`.
    pub fn time_at(&self, q: f64) -> f64 {
        let phi = self.v_good - self.scale * (-self.rate_bad * q).exp();
        self.release_time + (phi / self.gain).ln() / self.discount
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    /// Local indifference flow in closed form.
    Flow(PhaseSolution),
    WaitForRelease(WaitCurve),
    Hold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub cohort_index: usize,
    pub q_start: f64,
    pub q_end: f64,
    pub good: ChannelMode,
    pub bad: ChannelMode,
    pub motion: Motion,
}

impl Segment {
    pub fn q_at(&self, t: f64) -> f64 {
        if t <= self.t_start {
            return self.q_start;
        }
        if t >= self.t_end {
            return self.q_end;
        }
        let q = match &self.motion {
            Motion::Flow(phase) => phase.q_at(t),
            Motion::WaitForRelease(curve) => curve.q_at(t),
            Motion::Hold => self.q_start,
        };
        q.clamp(self.q_start, self.q_end)
    }

    pub fn flow_at(&self, t: f64) -> f64 {
        if t < self.t_start || t > self.t_end {
            return 0.0;
        }
        match &self.motion {
            Motion::Flow(phase) => phase.coefficients.flow_after(self.q_at(t) - phase.q_start),
            Motion::WaitForRelease(curve) => curve.flow_at(t),
            Motion::Hold => 0.0,
        }
    }

    pub fn is_moving(&self) -> bool {
        !matches!(self.motion, Motion::Hold) && self.q_end > self.q_start
    }

    pub fn state_at(&self, t: f64) -> PathState {
        let q = self.q_at(t);
        let channel = |mode: ChannelMode| match mode {
            ChannelMode::Fixed(c) => c,
            ChannelMode::Tracking => q,
        };
        PathState { q, z_good: channel(self.good), z_bad: channel(self.bad) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpKind {
    Release,
    Investment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub before: PathState,
    pub after: PathState,
    pub kind: JumpKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    PhaseChange { cohort: usize },
    ReleaseAtom { good: f64, bad: f64 },
    InvestmentAtom { mass: f64 },
    Stall,
    Termination,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEvent {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Piece {
    Segment(Segment),
    Jump(Jump),
}

impl Piece {
    pub fn start(&self) -> f64 {
        match self {
            Piece::Segment(s) => s.t_start,
            Piece::Jump(j) => j.time,
        }
    }
}

/// Equilibrium trajectory of the stock and revealed evidence absent news.
///
/// Pieces are stored in time order; several jumps may share a time, in which
/// case they apply in storage order. Accessors are right-continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPath {
    pub market: Market,
    pub pieces: Vec<Piece>,
    pub events: Vec<PathEvent>,
    /// Number of cohorts with positive investment absent news.
    pub hat_i: usize,
    /// `T_0 = 0` followed by the times at which each completed cohort finishes.
    pub phase_times: Vec<f64>,
    pub terminal_time: f64,
    /// Mass a wait-for-release phase failed to reach by its release.
    pub shortfall: Option<f64>,
}

impl EquilibriumPath {
    /// Right-continuous step path through `(t, q, z_good, z_bad)` samples.
    ///
    /// Each sample sets the state from its time on. Investment at a sample is
    /// applied before the disclosure at the same sample.
    pub fn from_samples(market: &Market, samples: &[(f64, PathState)]) -> Self {
        let mut pieces = Vec::new();
        let mut events = Vec::new();
        let mut state = PathState::default();
        let mut t_prev = 0.0;
        let mut phase_times = vec![0.0];
        let n = market.n_cohorts();
        for &(t, next) in samples {
            if t > t_prev {
                pieces.push(Piece::Segment(hold(t_prev, t, state, market)));
            }
            if next.q > state.q {
                let after = PathState { q: next.q, ..state };
                pieces.push(Piece::Jump(Jump { time: t, before: state, after, kind: JumpKind::Investment }));
                events.push(PathEvent { time: t, kind: EventKind::InvestmentAtom { mass: next.q - state.q } });
                for i in 0..n {
                    let f = market.cumulative_mass(i);
                    if state.q < f - 1e-12 && next.q >= f - 1e-12 {
                        phase_times.push(t);
                    }
                }
                state = after;
            }
            if next.z_good > state.z_good || next.z_bad > state.z_bad {
                pieces.push(Piece::Jump(Jump { time: t, before: state, after: next, kind: JumpKind::Release }));
                events.push(PathEvent {
                    time: t,
                    kind: EventKind::ReleaseAtom {
                        good: next.z_good - state.z_good,
                        bad: next.z_bad - state.z_bad,
                    },
                });
            }
            state = next;
            t_prev = t;
        }
        pieces.push(Piece::Segment(hold(t_prev, f64::INFINITY, state, market)));
        events.push(PathEvent { time: f64::INFINITY, kind: EventKind::Termination });
        let hat_i = count_invested_cohorts(market, state.q);
        Self {
            market: market.clone(),
            pieces,
            events,
            hat_i,
            phase_times,
            terminal_time: t_prev,
            shortfall: None,
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = &Segment> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Segment(s) => Some(s),
            Piece::Jump(_) => None,
        })
    }

    pub fn jumps(&self) -> impl Iterator<Item = &Jump> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Jump(j) => Some(j),
            Piece::Segment(_) => None,
        })
    }

    fn state_with(&self, t: f64, include_jumps_at_t: bool) -> PathState {
        let mut state = PathState::default();
        for piece in &self.pieces {
            match piece {
                Piece::Jump(j) => {
                    if j.time < t || (include_jumps_at_t && j.time == t) {
                        state = j.after;
                    } else {
                        break;
                    }
                }
                Piece::Segment(s) => {
                    if s.t_start > t {
                        break;
                    }
                    state = s.state_at(t.min(s.t_end));
                }
            }
        }
        state
    }

    pub fn state_at(&self, t: f64) -> PathState {
        self.state_with(t, true)
    }

    /// Left limit of the state at `t`, which is what agents observe when deciding at `t`.
    pub fn state_before(&self, t: f64) -> PathState {
        self.state_with(t, false)
    }

    pub fn q_at(&self, t: f64) -> f64 {
        self.state_at(t).q
    }

    pub fn z_good_at(&self, t: f64) -> f64 {
        self.state_at(t).z_good
    }

    pub fn z_bad_at(&self, t: f64) -> f64 {
        self.state_at(t).z_bad
    }

    pub fn belief_at(&self, t: f64) -> f64 {
        let s = self.state_at(t);
        self.market.posterior_no_news(s.z_good, s.z_bad)
    }

    pub fn final_state(&self) -> PathState {
        self.state_at(f64::INFINITY)
    }

    /// Finite times at which pieces start or end.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .pieces
            .iter()
            .flat_map(|p| match p {
                Piece::Segment(s) => [s.t_start, s.t_end],
                Piece::Jump(j) => [j.time, j.time],
            })
            .filter(|t| t.is_finite())
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }

    /// First time cohort `i` invests absent news, if ever.
    pub fn first_investment_time(&self, i: usize) -> Option<f64> {
        let lo = self.market.mass_before(i);
        let hi = self.market.cumulative_mass(i);
        self.pieces.iter().find_map(|p| match p {
            Piece::Segment(s) if s.is_moving() && s.q_end > lo && s.q_start < hi => {
                let t = if s.q_start >= lo { s.t_start } else { time_at_stock(s, lo) };
                Some(t)
            }
            Piece::Jump(j) if j.kind == JumpKind::Investment && j.after.q > lo && j.before.q < hi => {
                Some(j.time)
            }
            _ => None,
        })
    }
}

fn time_at_stock(s: &Segment, q: f64) -> f64 {
    let (mut lo, mut hi) = (s.t_start, s.t_end.min(s.t_start + 1e6));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if s.q_at(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn hold(t_start: f64, t_end: f64, state: PathState, market: &Market) -> Segment {
    Segment {
        t_start,
        t_end,
        cohort_index: market.marginal_cohort(state.q),
        q_start: state.q,
        q_end: state.q,
        good: ChannelMode::Fixed(state.z_good),
        bad: ChannelMode::Fixed(state.z_bad),
        motion: Motion::Hold,
    }
}

pub(crate) fn count_invested_cohorts(market: &Market, q: f64) -> usize {
    (0..market.n_cohorts()).filter(|&i| market.mass_before(i) < q - 1e-12).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_path_accessors() {
        let m = Market::two_cohort();
        let samples = [
            (0.0, PathState { q: 0.5, z_good: 0.0, z_bad: 0.5 }),
            (0.1, PathState { q: 1.5, z_good: 0.0, z_bad: 1.5 }),
            (0.2, PathState { q: 1.5, z_good: 1.5, z_bad: 1.5 }),
        ];
        let path = EquilibriumPath::from_samples(&m, &samples);
        assert_eq!(path.q_at(0.0), 0.5);
        assert_eq!(path.state_before(0.0), PathState::default());
        assert_eq!(path.q_at(0.05), 0.5);
        assert_eq!(path.state_before(0.1).q, 0.5);
        assert_eq!(path.z_bad_at(0.1), 1.5);
        assert_eq!(path.z_good_at(0.15), 0.0);
        assert_eq!(path.z_good_at(0.2), 1.5);
        assert_eq!(path.hat_i, 2);
        assert_eq!(path.phase_times, vec![0.0, 0.1]);
        assert_eq!(path.first_investment_time(1), Some(0.1));
    }

    #[test]
    fn wait_curve_round_trip() {
        let c = WaitCurve {
            release_time: 0.3,
            discount: 2.0,
            gain: 6.0,
            scale: 4.0,
            v_good: 8.0,
            rate_bad: 1.0,
        };
        for t in [0.0, 0.1, 0.2] {
            let q = c.q_at(t);
            assert!((c.time_at(q) - t).abs() < 1e-12);
            let h = 1e-6;
            let numeric = (c.q_at(t + h) - c.q_at(t - h)) / (2.0 * h);
            assert!((numeric - c.flow_at(t)).abs() < 1e-6);
        }
    }
}
