//! Fixture markets shared by the solver benchmarks.

use adoption_core::{Cohort, Market};

/// `n` cohorts with geometrically falling patience and unit mass.
pub fn cohort_ladder(n: usize) -> Market {
    let cohorts = (0..n).map(|i| Cohort::new(2.0 * 0.7f64.powi(i as i32), 1.0)).collect();
    Market { cohorts, ..Market::two_cohort() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_is_valid() {
        for n in 1..=6 {
            assert!(cohort_ladder(n).validate().is_ok());
        }
    }
}
