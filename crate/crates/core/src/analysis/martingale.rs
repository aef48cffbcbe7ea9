use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};
use crate::paths::{BrownianPath, MartingaleTrack};

fn grid_index(times: &[f64], t: f64) -> Result<usize> {
    let k = times.partition_point(|&s| s < t - 1e-12 * (1.0 + t.abs()));
    if k < times.len() && (times[k] - t).abs() <= 1e-12 * (1.0 + t.abs()) {
        Ok(k)
    } else {
        Err(FlockError::Grid(format!("t={t} is not a grid time")))
    }
}

/// `E(t) = exp(M_t - [M]_t / 2)` at a grid time.
pub fn exp_martingale(track: &MartingaleTrack, t: f64) -> Result<f64> {
    let k = grid_index(&track.times, t)?;
    Ok(exp_martingale_value(track.m_values[k], track.qv_values[k]))
}

#[inline]
pub fn exp_martingale_value(m: f64, qv: f64) -> f64 {
    (m - 0.5 * qv).exp()
}

/// Dominating process `V(t) = |v(0)|_p exp(-lambda psi_* t) E(t)`.
pub fn comparison_process(track: &MartingaleTrack, psi_star: f64, lambda: f64, v0_norm: f64, t: f64) -> Result<f64> {
    let k = grid_index(&track.times, t)?;
    Ok(comparison_value(v0_norm, psi_star, lambda, t, track.m_values[k], track.qv_values[k]))
}

#[inline]
pub fn comparison_value(v0_norm: f64, psi_star: f64, lambda: f64, t: f64, m: f64, qv: f64) -> f64 {
    if v0_norm == 0.0 {
        return 0.0;
    }
    v0_norm * (-lambda * psi_star * t + m - 0.5 * qv).exp()
}

/// Truncated exponential functional of Brownian motion with a bound on the
/// discarded tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFunctional {
    /// Trapezoidal `int_0^T exp(-c s + a W(s)) ds`.
    pub value: f64,
    /// `exp(a W(T) - c T) / (c - |a| c_lil)`, assuming `W` grows at most
    /// linearly with slope `c_lil` after `T`; infinite when `c <= |a| c_lil`.
    pub tail_bound: f64,
    /// The truncation time actually used (last grid node not after `T`).
    pub t_trunc: f64,
}

pub fn exp_functional(
    path: &BrownianPath,
    drift_coef: f64,
    vol_coef: f64,
    t_trunc: f64,
    c_lil: f64,
) -> Result<ExpFunctional> {
    if !(drift_coef > 0.0) {
        return Err(FlockError::domain(format!("exponential functional needs drift > 0, got {drift_coef}")));
    }
    if !(t_trunc > 0.0) {
        return Err(FlockError::domain(format!("truncation time must be positive, got {t_trunc}")));
    }
    if path.horizon() < t_trunc * (1.0 - 1e-12) {
        return Err(FlockError::Grid(format!("path ends at {} before the truncation time {t_trunc}", path.horizon())));
    }
    let times = path.times();
    let values = path.values();
    let f = |k: usize| (-drift_coef * times[k] + vol_coef * values[k]).exp();
    let mut value = 0.0;
    let mut last = 0;
    let mut f_prev = f(0);
    for k in 1..times.len() {
        if times[k] > t_trunc * (1.0 + 1e-12) {
            break;
        }
        let f_k = f(k);
        value += 0.5 * (f_prev + f_k) * (times[k] - times[k - 1]);
        f_prev = f_k;
        last = k;
    }
    let denom = drift_coef - vol_coef.abs() * c_lil;
    let tail_bound = if denom > 0.0 { f(last) / denom } else { f64::INFINITY };
    Ok(ExpFunctional { value, tail_bound, t_trunc: times[last] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseIntensity;
    use crate::paths::stochastic_integral;

    fn flat_path(horizon: f64, n: usize) -> BrownianPath {
        let times: Vec<f64> = (0..=n).map(|k| horizon * k as f64 / n as f64).collect();
        BrownianPath::from_nodes(0, times, vec![0.0; n + 1]).unwrap()
    }

    #[test]
    fn exp_martingale_examples() {
        let p = BrownianPath::sample(2.0, 0.01, 3).unwrap();
        let tr = stochastic_integral(&p, &NoiseIntensity::constant(0.5).unwrap());
        assert_eq!(exp_martingale(&tr, 0.0).unwrap(), 1.0);
        let off = stochastic_integral(&p, &NoiseIntensity::constant(0.0).unwrap());
        for &t in &p.times()[..50] {
            assert_eq!(exp_martingale(&off, t).unwrap(), 1.0);
        }
        assert!(exp_martingale(&tr, 0.005).is_err());
        let w = p.values()[100];
        let expect = (0.5 * w - 0.125).exp();
        assert!((exp_martingale(&tr, 1.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn comparison_process_examples() {
        let p = BrownianPath::sample(1.0, 0.1, 8).unwrap();
        let tr = stochastic_integral(&p, &NoiseIntensity::constant(0.4).unwrap());
        for &t in p.times() {
            let e = exp_martingale(&tr, t).unwrap();
            assert!((comparison_process(&tr, 0.0, 2.0, 1.5, t).unwrap() - 1.5 * e).abs() < 1e-12);
            assert_eq!(comparison_process(&tr, 1.0, 1.0, 0.0, t).unwrap(), 0.0);
            let damped = comparison_process(&tr, 0.5, 2.0, 1.0, t).unwrap();
            assert!((damped - e * (-t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn exp_functional_deterministic_cases() {
        // vol = 0: truncated value plus the exact tail recovers int_0^inf e^{-s} = 1
        let p = flat_path(40.0, 400_000);
        let ef = exp_functional(&p, 1.0, 0.0, 40.0, 0.0).unwrap();
        assert!((ef.value + ef.tail_bound - 1.0).abs() < 1e-8);

        let p = flat_path(10.0, 200_000);
        let ef = exp_functional(&p, 2.0, 1.0, 10.0, 0.5).unwrap();
        assert!((ef.value - (1.0 - (-20f64).exp()) / 2.0).abs() < 1e-9);
        assert!((ef.tail_bound - (-20f64).exp() / 1.5).abs() < 1e-20);

        assert!(matches!(exp_functional(&p, 0.0, 1.0, 10.0, 0.0), Err(FlockError::Domain(_))));
        assert!(matches!(exp_functional(&p, 1.0, 1.0, 20.0, 0.0), Err(FlockError::Grid(_))));
        assert!(exp_functional(&p, 1.0, 4.0, 10.0, 0.5).unwrap().tail_bound.is_infinite());
    }
}
