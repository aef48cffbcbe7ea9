use crate::error::{FlockError, Result};
use crate::kernels::Kernel;

/// `sqrt(sum_{i,j in idx} |y_i - y_j|^2)`, ordered pairs. `idx` is
/// zero-based.
pub fn cluster_norm(y: &[f64], d: usize, idx: &[usize]) -> Result<f64> {
    if d == 0 || !y.len().is_multiple_of(d) {
        return Err(FlockError::config("cluster_norm needs an N x d array"));
    }
    let n = y.len() / d;
    if idx.is_empty() {
        return Err(FlockError::BadIndex("empty index set".into()));
    }
    if let Some(i) = idx.iter().find(|&&i| i >= n) {
        return Err(FlockError::BadIndex(format!("index {i} out of range for N={n}")));
    }
    let mut sorted = idx.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(FlockError::BadIndex("repeated index".into()));
    }
    let mut s = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let r2: f64 = (0..d).map(|k| (y[i * d + k] - y[j * d + k]).powi(2)).sum();
            s += 2.0 * r2;
        }
    }
    Ok(s.sqrt())
}

/// `(|v|_l + (lambda/N) Psi(|x|_l), |v|_l - (lambda/N) Psi(|x|_l))` over the
/// cluster `idx`; `kernel` must have a closed-form primitive.
pub fn collision_lyapunov(
    x: &[f64],
    v: &[f64],
    d: usize,
    idx: &[usize],
    kernel: &Kernel,
    lambda: f64,
) -> Result<(f64, f64)> {
    let n = x.len() / d.max(1);
    let xl = cluster_norm(x, d, idx)?;
    let vl = cluster_norm(v, d, idx)?;
    if xl == 0.0 {
        return Err(FlockError::domain("cluster positions coincide"));
    }
    let pot = lambda / n as f64 * kernel.primitive(xl)?;
    Ok((vl + pot, vl - pot))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let x = [0.0, 3.0, 7.0];
        assert_eq!(cluster_norm(&x, 1, &[2]).unwrap(), 0.0);
        assert!((cluster_norm(&x, 1, &[0, 1]).unwrap() - 3.0 * 2f64.sqrt()).abs() < 1e-14);
        assert!(matches!(cluster_norm(&x, 1, &[0, 3]), Err(FlockError::BadIndex(_))));
        assert!(matches!(cluster_norm(&x, 1, &[]), Err(FlockError::BadIndex(_))));
        assert!(matches!(cluster_norm(&x, 1, &[1, 1]), Err(FlockError::BadIndex(_))));
    }

    #[test]
    fn lyapunov_examples() {
        let k = Kernel::power(1.0).unwrap();
        // |x|_l = sqrt(2) * |x_1 - x_2|; pick |x_1 - x_2| so that |x|_l = 1, then e
        let s = 1.0 / 2f64.sqrt();
        let (ep, em) = collision_lyapunov(&[0.0, s], &[0.5, 0.5], 1, &[0, 1], &k, 2.0).unwrap();
        assert!(ep.abs() < 1e-15 && em.abs() < 1e-15);
        let e = std::f64::consts::E;
        let (ep, em) = collision_lyapunov(&[0.0, e * s], &[0.0, s], 1, &[0, 1], &k, 2.0).unwrap();
        assert!((ep - 2.0).abs() < 1e-14 && em.abs() < 1e-14);
        assert!(collision_lyapunov(&[1.0, 1.0], &[0.0, 1.0], 1, &[0, 1], &k, 1.0).is_err());
    }
}
