//! Model primitives: payoffs, prior, evidence rates and discount cohorts.
//!
//! Cohorts are indexed from zero in code. Cohort `i` owns the mass interval
//! `[F_{i-1}, F_i)` of the investment stock, and cohorts are ordered from the
//! least to the most patient.

use serde::{Deserialize, Serialize};

use crate::error::MarketError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub discount: f64,
    pub mass: f64,
}

impl Cohort {
    pub fn new(discount: f64, mass: f64) -> Self {
        Self { discount, mass }
    }
}

/// All primitives of the adoption game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Market {
    pub v_good: f64,
    pub v_bad: f64,
    pub prior: f64,
    pub rate_good: f64,
    pub rate_bad: f64,
    pub cohorts: Vec<Cohort>,
}

/// No-news belief together with the revealed evidence levels that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefState {
    pub belief: f64,
    pub revealed_good: f64,
    pub revealed_bad: f64,
}

impl Market {
    /// Two cohorts of unit mass with discount rates 2 and 1.
    pub fn two_cohort() -> Self {
        Self {
            v_good: 8.0,
            v_bad: -4.0,
            prior: 0.75,
            rate_good: 1.0,
            rate_bad: 2.0,
            cohorts: vec![Cohort::new(2.0, 1.0), Cohort::new(1.0, 1.0)],
        }
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        if !(self.v_good > 0.0 && self.v_bad < 0.0) || !self.v_good.is_finite() || !self.v_bad.is_finite()
        {
            return Err(MarketError::PayoffSign { v_good: self.v_good, v_bad: self.v_bad });
        }
        for (name, value) in [("rate_good", self.rate_good), ("rate_bad", self.rate_bad)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(MarketError::NegativeRate { name, value });
            }
        }
        let threshold = self.myopic_threshold();
        if !(self.prior <= 1.0 && self.prior >= 0.0) {
            return Err(MarketError::PriorRange { prior: self.prior, threshold });
        }
        if self.prior <= threshold {
            return Err(MarketError::PriorBelowThreshold { prior: self.prior, threshold });
        }
        if self.cohorts.is_empty() {
            return Err(MarketError::NoCohorts);
        }
        for (index, c) in self.cohorts.iter().enumerate() {
            if !(c.discount > 0.0 && c.discount.is_finite() && c.mass > 0.0 && c.mass.is_finite()) {
                return Err(MarketError::CohortValue { index, discount: c.discount, mass: c.mass });
            }
        }
        for (index, pair) in self.cohorts.windows(2).enumerate() {
            if pair[0].discount <= pair[1].discount {
                return Err(MarketError::CohortOrder {
                    index: index + 1,
                    previous: pair[0].discount,
                    current: pair[1].discount,
                });
            }
        }
        Ok(())
    }

    pub fn n_cohorts(&self) -> usize {
        self.cohorts.len()
    }

    /// Belief at which immediate investment is worth exactly zero.
    pub fn myopic_threshold(&self) -> f64 {
        -self.v_bad / (self.v_good - self.v_bad)
    }

    pub fn expected_value(&self, x: f64) -> f64 {
        x * self.v_good + (1.0 - x) * self.v_bad
    }

    /// Log-odds of the good state after `z_good`, `z_bad` units of revealed evidence
    /// without news. Infinite when the prior is one.
    pub fn log_odds(&self, z_good: f64, z_bad: f64) -> f64 {
        let prior_logit = if self.prior >= 1.0 {
            f64::INFINITY
        } else {
            (self.prior / (1.0 - self.prior)).ln()
        };
        prior_logit - self.rate_good * z_good + self.rate_bad * z_bad
    }

    /// No-news posterior that the state is good.
    pub fn posterior_no_news(&self, z_good: f64, z_bad: f64) -> f64 {
        logistic(self.log_odds(z_good, z_bad))
    }

    /// No-news belief when both channels reveal everything generated, `z_good = z_bad = q`.
    pub fn transparency_belief(&self, q: f64) -> f64 {
        self.posterior_no_news(q, q)
    }

    pub fn belief_state(&self, z_good: f64, z_bad: f64) -> BeliefState {
        BeliefState {
            belief: self.posterior_no_news(z_good, z_bad),
            revealed_good: z_good,
            revealed_bad: z_bad,
        }
    }

    /// Unconditional probability that no evidence has been disclosed.
    pub fn no_news_probability(&self, z_good: f64, z_bad: f64) -> f64 {
        self.prior * (-self.rate_good * z_good).exp()
            + (1.0 - self.prior) * (-self.rate_bad * z_bad).exp()
    }

    /// Unconditional value of investing when no news has been disclosed:
    /// `P(no news) * V(x)`.
    pub fn no_news_value(&self, z_good: f64, z_bad: f64) -> f64 {
        self.prior * self.v_good * (-self.rate_good * z_good).exp()
            + (1.0 - self.prior) * self.v_bad * (-self.rate_bad * z_bad).exp()
    }

    pub fn total_mass(&self) -> f64 {
        self.cohorts.iter().map(|c| c.mass).sum()
    }

    /// `F_i`: mass of cohorts `0..=i`.
    pub fn cumulative_mass(&self, i: usize) -> f64 {
        self.cohorts[..=i].iter().map(|c| c.mass).sum()
    }

    /// `F_{i-1}`: mass of the cohorts strictly before `i`.
    pub fn mass_before(&self, i: usize) -> f64 {
        self.cohorts[..i].iter().map(|c| c.mass).sum()
    }

    /// Index of the marginal cohort at stock `q`; the last cohort at `q >= F_n`.
    pub fn marginal_cohort(&self, q: f64) -> usize {
        let mut upper = 0.0;
        for (i, c) in self.cohorts.iter().enumerate() {
            upper += c.mass;
            if q < upper {
                return i;
            }
        }
        self.cohorts.len() - 1
    }

    pub fn discount_at(&self, q: f64) -> f64 {
        self.cohorts[self.marginal_cohort(q)].discount
    }

    /// Mass of cohort `i` that has not invested when the stock is `q`.
    pub fn remaining_in(&self, i: usize, q: f64) -> f64 {
        let lo = self.mass_before(i);
        let hi = lo + self.cohorts[i].mass;
        hi - q.clamp(lo, hi)
    }
}

pub(crate) fn logistic(logit: f64) -> f64 {
    if logit == f64::INFINITY {
        1.0
    } else if logit >= 0.0 {
        1.0 / (1.0 + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG_THRESHOLD: f64 = 1.0 / 3.0;

    #[test]
    fn two_cohort_market_is_valid() {
        assert!(Market::two_cohort().validate().is_ok());
    }

    #[test]
    fn low_prior_is_rejected() {
        let m = Market { prior: 0.2, ..Market::two_cohort() };
        match m.validate() {
            Err(MarketError::PriorBelowThreshold { threshold, .. }) => {
                assert!((threshold - FIG_THRESHOLD).abs() < 1e-15)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cohort_order_is_enforced() {
        let m = Market {
            cohorts: vec![Cohort::new(1.0, 1.0), Cohort::new(2.0, 1.0)],
            ..Market::two_cohort()
        };
        assert!(matches!(m.validate(), Err(MarketError::CohortOrder { index: 1, .. })));
    }

    #[test]
    fn distinct_violation_reports() {
        let base = Market::two_cohort();
        let sign = Market { v_bad: 1.0, ..base.clone() };
        assert!(matches!(sign.validate(), Err(MarketError::PayoffSign { .. })));
        let rate = Market { rate_bad: -1.0, ..base.clone() };
        assert!(matches!(rate.validate(), Err(MarketError::NegativeRate { name: "rate_bad", .. })));
        let range = Market { prior: 1.5, ..base.clone() };
        assert!(matches!(range.validate(), Err(MarketError::PriorRange { .. })));
        let empty = Market { cohorts: vec![], ..base };
        assert!(matches!(empty.validate(), Err(MarketError::NoCohorts)));
    }

    #[test]
    fn degenerate_inputs_are_accepted() {
        let m = Market { prior: 1.0, rate_good: 0.0, rate_bad: 0.0, ..Market::two_cohort() };
        assert!(m.validate().is_ok());
        assert_eq!(m.posterior_no_news(3.0, 0.0), 1.0);
    }

    #[test]
    fn myopic_threshold_examples() {
        assert!((Market::two_cohort().myopic_threshold() - FIG_THRESHOLD).abs() < 1e-15);
        let sym = Market { v_good: 1.0, v_bad: -1.0, ..Market::two_cohort() };
        assert_eq!(sym.myopic_threshold(), 0.5);
        let cheap = Market { v_bad: -1e-300, ..Market::two_cohort() };
        assert!(cheap.myopic_threshold() < 1e-299);
    }

    #[test]
    fn expected_value_examples() {
        let m = Market::two_cohort();
        assert_eq!(m.expected_value(1.0), 8.0);
        assert!(m.expected_value(m.myopic_threshold()).abs() < 1e-14);
        assert!((m.expected_value(0.75) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn posterior_examples() {
        let m = Market::two_cohort();
        assert_eq!(m.posterior_no_news(0.0, 0.0), 0.75);
        // 0.75 e^{-1} / (0.75 e^{-1} + 0.25 e^{-2})
        assert!((m.posterior_no_news(1.0, 1.0) - 0.890_768_227_426_964).abs() < 1e-14);
        // 0.75 / (0.75 + 0.25 e^{-4})
        assert!((m.posterior_no_news(0.0, 2.0) - 0.993_931_834_479_883).abs() < 1e-14);
    }

    #[test]
    fn transparency_belief_examples() {
        let m = Market::two_cohort();
        assert_eq!(m.transparency_belief(0.0), 0.75);
        assert!((m.transparency_belief(2.0) - 0.956_835_467_020_004).abs() < 1e-14);
        let withholding = Market {
            prior: 0.5,
            rate_good: 2.0,
            rate_bad: 1.0,
            ..Market::two_cohort()
        };
        let x = withholding.transparency_belief(1.0);
        assert!((x - 1.0 / (1.0 + std::f64::consts::E)).abs() < 1e-15);
        assert!(x < withholding.myopic_threshold());
    }

    #[test]
    fn large_evidence_does_not_underflow() {
        let m = Market::two_cohort();
        let x = m.posterior_no_news(0.0, 500.0);
        assert_eq!(x, 1.0);
        let y = m.posterior_no_news(700.0, 0.0);
        assert!(y > 0.0 && y < 1e-300);
    }

    #[test]
    fn cohort_accessors() {
        let m = Market::two_cohort();
        assert_eq!(m.cumulative_mass(1), 2.0);
        assert_eq!(m.mass_before(1), 1.0);
        assert_eq!(m.marginal_cohort(0.5), 0);
        assert_eq!(m.marginal_cohort(1.0), 1);
        assert_eq!(m.marginal_cohort(2.0), 1);
        assert_eq!(m.remaining_in(1, 1.25), 0.75);
        assert_eq!(m.remaining_in(0, 1.25), 0.0);
    }
}
