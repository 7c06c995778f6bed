//! Numerically careful tail functions shared by the score modules.

use libm::erfc;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// `ln(erfc(t))`, accurate where `erfc` itself underflows.
pub(crate) fn ln_erfc(t: f64) -> f64 {
    if t < 20.0 {
        return erfc(t).ln();
    }
    // Asymptotic expansion; relative error of the series is below 1e-10 at t = 20.
    let inv2 = 1.0 / (2.0 * t * t);
    let series = 1.0 - inv2 + 3.0 * inv2 * inv2 - 15.0 * inv2 * inv2 * inv2;
    -t * t - (t * SQRT_PI).ln() + series.ln()
}

/// `ln P{Z >= z}` for a standard normal `Z`.
pub(crate) fn ln_normal_upper(z: f64) -> f64 {
    ln_erfc(z / std::f64::consts::SQRT_2) - std::f64::consts::LN_2
}

/// `ln(exp(a) + exp(b))`.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Numerically stable `ln Σ exp(v)`.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Sample mean and unbiased standard deviation. Single-element input yields std 0.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_erfc_matches_direct_evaluation_below_switch() {
        for &t in &[0.0, 0.5, 1.0, 3.0, 10.0, 19.9] {
            assert!((ln_erfc(t) - erfc(t).ln()).abs() < 1e-12 * (1.0 + erfc(t).ln().abs()));
        }
    }

    #[test]
    fn ln_erfc_is_continuous_at_switch() {
        let below = erfc(19.999_999).ln();
        let above = ln_erfc(20.0);
        assert!((below - above).abs() < 1e-3, "{below} vs {above}");
        assert!(ln_erfc(40.0).is_finite());
        assert!(ln_erfc(40.0) < ln_erfc(30.0));
    }

    #[test]
    fn log_sum_exp_handles_large_values() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
    }
}
