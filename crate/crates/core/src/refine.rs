//! Observed convergence orders from refinement studies.

/// `log₂(e_coarse / e_fine)` for one halving of the step.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Orders between consecutive levels of a halving sequence.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| observed_order(w[0], w[1])).collect()
}

/// Order from three solutions at steps `h`, `h/2`, `h/4` without a reference:
/// `log₂(‖a − b‖ / ‖b − c‖)`.
pub fn richardson_order(diff_coarse: f64, diff_fine: f64) -> f64 {
    observed_order(diff_coarse, diff_fine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_orders() {
        let errs: Vec<f64> = (0..4).map(|k| 3.0 * 0.5f64.powi(2 * k)).collect();
        for p in observed_orders(&errs) {
            assert!((p - 2.0).abs() < 1e-12);
        }
        assert!((richardson_order(16.0, 1.0) - 4.0).abs() < 1e-12);
    }
}
