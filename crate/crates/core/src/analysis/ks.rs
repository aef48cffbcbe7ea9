//! One-sample Kolmogorov–Smirnov distance and the inverse-gamma scale fit
//! used to check the law of the exponential functional.

use statrs::distribution::{ContinuousCDF, InverseGamma};

use crate::error::{FlockError, Result};

/// `sup_x |F_n(x) - F(x)|`. Sorts `sample` in place.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Asymptotic critical value of the KS distance at significance `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(0.5 * alpha).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Maximum-likelihood scale (the `rate` of `InverseGamma(shape, rate)`,
/// density `~ x^{-shape-1} exp(-rate/x)`) for a known shape.
pub fn inverse_gamma_scale_mle(sample: &[f64], shape: f64) -> Result<f64> {
    if sample.is_empty() || sample.iter().any(|&x| !(x > 0.0)) {
        return Err(FlockError::domain("inverse-gamma fit needs a nonempty positive sample"));
    }
    let inv_sum: f64 = sample.iter().map(|x| 1.0 / x).sum();
    Ok(shape * sample.len() as f64 / inv_sum)
}

pub fn inverse_gamma(shape: f64, scale: f64) -> Result<InverseGamma> {
    InverseGamma::new(shape, scale).map_err(|e| FlockError::domain(format!("inverse gamma({shape}, {scale}): {e}")))
}

/// KS distance of `sample` to `InverseGamma(shape, scale)`.
pub fn ks_inverse_gamma(sample: &mut [f64], shape: f64, scale: f64) -> Result<f64> {
    let dist = inverse_gamma(shape, scale)?;
    Ok(ks_statistic(sample, |x| dist.cdf(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    #[test]
    fn uniform_sample_distance() {
        let mut s: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_statistic(&mut s, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
    }

    #[test]
    fn critical_value() {
        // sqrt(ln(2/0.05)/2) = 1.358
        assert!((ks_critical(1, 0.05) - 1.3581).abs() < 1e-4);
    }

    #[test]
    fn recovers_inverse_gamma_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Gamma::new(0.5, 1.0 / 2.0).unwrap();
        let mut sample: Vec<f64> = (0..20_000).map(|_| 1.0 / g.sample(&mut rng)).collect();
        let scale = inverse_gamma_scale_mle(&sample, 0.5).unwrap();
        assert!((scale - 2.0).abs() < 0.1, "{scale}");
        let d = ks_inverse_gamma(&mut sample, 0.5, scale).unwrap();
        assert!(d < ks_critical(20_000, 1e-3));
    }
}
