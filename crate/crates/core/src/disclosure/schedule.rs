use serde::{Deserialize, Serialize};

use crate::error::SolveError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapPoint {
    pub time: f64,
    pub cap: f64,
}

/// Release schedule for one evidence channel.
///
/// The cap is the largest amount of generated evidence that may have been made
/// public by time `t`; revealed evidence is `min(cap, q)`. Caps are
/// right-continuous in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Transparent,
    Silent,
    /// Nothing before the release time, everything from then on.
    DelayUntil(f64),
    /// Step function through the points, zero before the first point.
    StepCaps(Vec<CapPoint>),
}

impl Schedule {
    pub fn validate(&self) -> Result<(), SolveError> {
        match self {
            Schedule::Transparent | Schedule::Silent => Ok(()),
            Schedule::DelayUntil(t) if *t >= 0.0 && !t.is_nan() => Ok(()),
            Schedule::DelayUntil(t) => {
                Err(SolveError::InvalidArgument(format!("release time {t} must be nonnegative")))
            }
            Schedule::StepCaps(points) => {
                if points.iter().any(|p| !(p.time >= 0.0 && p.time.is_finite() && p.cap >= 0.0)) {
                    return Err(SolveError::InvalidArgument(
                        "step caps need finite nonnegative times and nonnegative caps".into(),
                    ));
                }
                for w in points.windows(2) {
                    if w[1].time <= w[0].time {
                        return Err(SolveError::InvalidArgument(format!(
                            "step cap times must increase ({} then {})",
                            w[0].time, w[1].time
                        )));
                    }
                    if w[1].cap < w[0].cap {
                        return Err(SolveError::InvalidArgument(format!(
                            "step caps must not decrease ({} then {})",
                            w[0].cap, w[1].cap
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn cap_at(&self, t: f64) -> f64 {
        match self {
            Schedule::Transparent => f64::INFINITY,
            Schedule::Silent => 0.0,
            Schedule::DelayUntil(release) => {
                if t >= *release {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Schedule::StepCaps(points) => {
                let k = points.partition_point(|p| p.time <= t);
                if k == 0 {
                    0.0
                } else {
                    points[k - 1].cap
                }
            }
        }
    }

    /// First time strictly after `t` at which the cap increases.
    pub fn next_release_after(&self, t: f64) -> Option<f64> {
        match self {
            Schedule::Transparent | Schedule::Silent => None,
            Schedule::DelayUntil(release) => (*release > t).then_some(*release),
            Schedule::StepCaps(points) => {
                let mut current = self.cap_at(t);
                for p in points.iter().filter(|p| p.time > t) {
                    if p.cap > current {
                        return Some(p.time);
                    }
                    current = p.cap;
                }
                None
            }
        }
    }

    /// Whether some release after `t` lifts the cap above `level`.
    pub fn releases_above(&self, t: f64, level: f64) -> bool {
        match self {
            Schedule::Transparent => true,
            Schedule::Silent => false,
            Schedule::DelayUntil(release) => *release > t,
            Schedule::StepCaps(points) => points.iter().any(|p| p.time > t && p.cap > level),
        }
    }
}

/// A pair of release schedules, one per evidence channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisclosurePolicy {
    pub good: Schedule,
    pub bad: Schedule,
}

impl DisclosurePolicy {
    pub fn transparent() -> Self {
        Self { good: Schedule::Transparent, bad: Schedule::Transparent }
    }

    /// Bad news revealed as generated, good news withheld until `release`.
    pub fn delayed_good_news(release: f64) -> Self {
        Self { good: Schedule::DelayUntil(release), bad: Schedule::Transparent }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        self.good.validate()?;
        self.bad.validate()
    }

    pub fn next_release_after(&self, t: f64) -> Option<f64> {
        match (self.good.next_release_after(t), self.bad.next_release_after(t)) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn steps() -> Schedule {
        Schedule::StepCaps(vec![
            CapPoint { time: 0.1, cap: 0.5 },
            CapPoint { time: 0.2, cap: 0.5 },
            CapPoint { time: 0.3, cap: 1.5 },
        ])
    }

    #[test]
    fn caps_are_right_continuous() {
        let s = steps();
        assert_eq!(s.cap_at(0.0), 0.0);
        assert_eq!(s.cap_at(0.1), 0.5);
        assert_eq!(s.cap_at(0.299), 0.5);
        assert_eq!(s.cap_at(0.3), 1.5);
        let d = Schedule::DelayUntil(0.25);
        assert_eq!(d.cap_at(0.2499), 0.0);
        assert_eq!(d.cap_at(0.25), f64::INFINITY);
    }

    #[test]
    fn next_release_skips_flat_points() {
        let s = steps();
        assert_eq!(s.next_release_after(0.0), Some(0.1));
        assert_eq!(s.next_release_after(0.1), Some(0.3));
        assert_eq!(s.next_release_after(0.3), None);
        assert_eq!(Schedule::Transparent.next_release_after(0.0), None);
        let p = DisclosurePolicy { good: Schedule::DelayUntil(0.2), bad: s };
        assert_eq!(p.next_release_after(0.1), Some(0.2));
    }

    #[test]
    fn invalid_step_caps() {
        let decreasing = Schedule::StepCaps(vec![
            CapPoint { time: 0.1, cap: 0.5 },
            CapPoint { time: 0.2, cap: 0.4 },
        ]);
        assert!(decreasing.validate().is_err());
        let unordered = Schedule::StepCaps(vec![
            CapPoint { time: 0.2, cap: 0.5 },
            CapPoint { time: 0.2, cap: 0.6 },
        ]);
        assert!(unordered.validate().is_err());
        assert!(steps().validate().is_ok());
    }
}
