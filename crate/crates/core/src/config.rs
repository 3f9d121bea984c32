//! TOML formats for markets and disclosure policies.
//!
//! A market file names the primitives directly:
//!
//! ```toml
//! v_good = 8.0
//! v_bad = -4.0
//! prior = 0.75
//! rate_good = 1.0
//! rate_bad = 2.0
//! cohorts = [{ discount = 2.0, mass = 1.0 }, { discount = 1.0, mass = 1.0 }]
//! ```
//!
//! A policy file has one entry per channel:
//!
//! ```toml
//! good = { delay_until = 0.0797537006224969 }
//! bad = "transparent"
//! ```
//!
//! Step schedules are written `{ step_caps = [{ time = 0.1, cap = 0.5 }, ...] }`.

use std::fs;
use std::path::Path;

use crate::disclosure::DisclosurePolicy;
use crate::error::ConfigError;
use crate::model::Market;

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })
}

/// Parses and validates a market.
pub fn parse_market(text: &str) -> Result<Market, ConfigError> {
    let market: Market = toml::from_str(text)?;
    market.validate()?;
    Ok(market)
}

pub fn load_market(path: &Path) -> Result<Market, ConfigError> {
    parse_market(&read(path)?)
}

pub fn market_to_toml(market: &Market) -> Result<String, ConfigError> {
    Ok(toml::to_string(market)?)
}

/// Parses and validates a disclosure policy.
pub fn parse_policy(text: &str) -> Result<DisclosurePolicy, ConfigError> {
    let policy: DisclosurePolicy = toml::from_str(text)?;
    policy.validate().map_err(|e| ConfigError::Schedule(e.to_string()))?;
    Ok(policy)
}

pub fn load_policy(path: &Path) -> Result<DisclosurePolicy, ConfigError> {
    parse_policy(&read(path)?)
}

pub fn policy_to_toml(policy: &DisclosurePolicy) -> Result<String, ConfigError> {
    Ok(toml::to_string(policy)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disclosure::{CapPoint, Schedule};
    use crate::error::MarketError;

    const TWO_COHORT: &str = r#"
        v_good = 8.0
        v_bad = -4.0
        prior = 0.75
        rate_good = 1.0
        rate_bad = 2.0
        cohorts = [{ discount = 2.0, mass = 1.0 }, { discount = 1.0, mass = 1.0 }]
    "#;

    #[test]
    fn parses_two_cohort() {
        assert_eq!(parse_market(TWO_COHORT).unwrap(), Market::two_cohort());
    }

    #[test]
    fn market_round_trip() {
        let m = Market::two_cohort();
        assert_eq!(parse_market(&market_to_toml(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn rejects_invalid_market() {
        let text = TWO_COHORT.replace("prior = 0.75", "prior = 1.5");
        assert!(matches!(parse_market(&text), Err(ConfigError::Invalid(_))));
        let unsorted = TWO_COHORT.replace("discount = 2.0", "discount = 0.5");
        assert!(matches!(parse_market(&unsorted), Err(ConfigError::Invalid(MarketError::CohortOrder { .. }))));
        assert!(matches!(parse_market("v_good = 1.0"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn policy_formats() {
        let p = parse_policy("good = { delay_until = 0.0797537 }\nbad = \"transparent\"\n").unwrap();
        assert_eq!(p, DisclosurePolicy::delayed_good_news(0.0797537));
        let steps = DisclosurePolicy {
            good: Schedule::Silent,
            bad: Schedule::StepCaps(vec![CapPoint { time: 0.1, cap: 0.5 }, CapPoint { time: 0.3, cap: 2.0 }]),
        };
        let text = policy_to_toml(&steps).unwrap();
        assert_eq!(parse_policy(&text).unwrap(), steps);
        let exact = DisclosurePolicy::delayed_good_news(0.0797537006224969);
        assert_eq!(parse_policy(&policy_to_toml(&exact).unwrap()).unwrap(), exact);
    }

    #[test]
    fn rejects_bad_schedule() {
        assert!(parse_policy("good = { delay_until = -1.0 }\nbad = \"silent\"\n").is_err());
        assert!(parse_policy("good = \"sometimes\"\nbad = \"silent\"\n").is_err());
    }
}
