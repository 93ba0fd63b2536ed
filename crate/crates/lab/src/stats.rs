//! Small statistical helpers for the verification suites.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Critical value of the χ² distribution: `P(X > value) = alpha`.
pub fn chi_square_critical(df: f64, alpha: f64) -> f64 {
    ChiSquared::new(df)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha)
}

/// Pearson χ² statistic of observed counts against expected probabilities.
pub fn chi_square_statistic(observed: &[u64], probabilities: &[f64]) -> f64 {
    assert_eq!(observed.len(), probabilities.len());
    let total: u64 = observed.iter().sum();
    let mut chi2 = 0.0;
    for (&o, &p) in observed.iter().zip(probabilities) {
        let e = p * total as f64;
        if e > 0.0 {
            let d = o as f64 - e;
            chi2 += d * d / e;
        }
    }
    chi2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_df2_closed_form() {
        // for df = 2 the CDF is 1 - exp(-x/2), so the critical value at
        // alpha is exactly -2·ln(alpha)
        let c = chi_square_critical(2.0, 1e-6);
        assert!((c - (-2.0 * (1e-6f64).ln())).abs() < 1e-8, "{c}");
    }

    #[test]
    fn statistic_is_zero_on_perfect_fit() {
        let obs = [250u64, 250, 500];
        let probs = [0.25, 0.25, 0.5];
        assert!(chi_square_statistic(&obs, &probs) < 1e-12);
    }
}
