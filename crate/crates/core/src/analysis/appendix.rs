//! The two-particle non-flocking example and the concave-envelope bound
//! used for weakly decaying power-law weights.

use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};
use crate::integrator::PathResult;
use crate::kernels::Kernel;

use super::stats::Series;

/// Per-path indicator of `v(0) >= lambda int_{x(0)}^inf psi`, where
/// `(x, v)` are the relative position and velocity of a two-particle run.
pub fn appendix_a_mask(results: &[PathResult], kernel: &Kernel, lambda: f64) -> Result<Vec<bool>> {
    results
        .iter()
        .map(|r| {
            let rel = r.relative_pair.as_ref().ok_or_else(|| FlockError::WrongScenario("needs N=2, d=1".into()))?;
            let (x0, v0) = rel[0];
            if x0 <= 0.0 {
                return Ok(false);
            }
            Ok(v0 >= lambda * kernel.tail_integral(x0)?)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoParticleBound {
    pub times: Vec<f64>,
    pub count: usize,
    /// `E(v(t) | A)`
    pub mean_v: Series,
    /// `lambda E(int_{x(t)}^inf psi | A)`
    pub mean_tail: Series,
    /// Paired difference `v(t) - lambda int_{x(t)}^inf psi`.
    pub mean_gap: Series,
}

pub fn two_particle_lower_bound(
    results: &[PathResult],
    kernel: &Kernel,
    lambda: f64,
    mask: &[bool],
) -> Result<TwoParticleBound> {
    let first = results.first().ok_or(FlockError::EmptyEnsemble)?;
    if mask.len() != results.len() {
        return Err(FlockError::config("mask length differs from ensemble size"));
    }
    let len = first.times.len();
    let mut v_rows = Vec::new();
    let mut tail_rows = Vec::new();
    let mut gap_rows = Vec::new();
    for (r, _) in results.iter().zip(mask).filter(|(_, m)| **m) {
        let rel = r.relative_pair.as_ref().ok_or_else(|| FlockError::WrongScenario("needs N=2, d=1".into()))?;
        if r.times != first.times {
            return Err(FlockError::config("results do not share an output grid"));
        }
        let v: Vec<f64> = rel.iter().map(|p| p.1).collect();
        let tail = rel.iter().map(|&(x, _)| Ok(lambda * kernel.tail_integral(x)?)).collect::<Result<Vec<f64>>>()?;
        gap_rows.push(v.iter().zip(&tail).map(|(a, b)| a - b).collect::<Vec<f64>>());
        v_rows.push(v);
        tail_rows.push(tail);
    }
    if v_rows.is_empty() {
        return Err(FlockError::EmptyMask);
    }
    let series = |rows: &Vec<Vec<f64>>| Series::from_rows(rows.iter().map(|r| r.as_slice()), len);
    Ok(TwoParticleBound {
        times: first.times.clone(),
        count: v_rows.len(),
        mean_v: series(&v_rows),
        mean_tail: series(&tail_rows),
        mean_gap: series(&gap_rows),
    })
}

fn check_envelope_params(t: f64, a: f64, alpha: f64, lambda: f64, r: f64) -> Result<f64> {
    if !(t > 0.0) || !(a > 1.0) || !(alpha > 0.0 && alpha < 1.0) || !(lambda > 0.0) || !(r >= 0.0) {
        return Err(FlockError::domain(format!(
            "envelope needs t > 0, a > 1, alpha in (0,1), lambda > 0, r >= 0; got t={t}, a={a}, alpha={alpha}, lambda={lambda}, r={r}"
        )));
    }
    Ok(a / (a - 1.0))
}

/// `F(r) = exp(-a' lambda (2r)^{-alpha} t)` with `a' = a/(a-1)`.
pub fn envelope_target(t: f64, a: f64, alpha: f64, lambda: f64, r: f64) -> Result<f64> {
    let ap = check_envelope_params(t, a, alpha, lambda, r)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    Ok((-ap * lambda * (2.0 * r).powf(-alpha) * t).exp())
}

/// Branch point `r* = (alpha a' lambda t)^{1/alpha} / 2` of the envelope.
pub fn envelope_branch_point(t: f64, a: f64, alpha: f64, lambda: f64) -> Result<f64> {
    let ap = check_envelope_params(t, a, alpha, lambda, 0.0)?;
    Ok(0.5 * (alpha * ap * lambda * t).powf(1.0 / alpha))
}

/// Smallest concave majorant of `F`: the tangent line from the origin up to
/// the branch point, `F` itself beyond it.
pub fn concave_envelope(t: f64, a: f64, alpha: f64, lambda: f64, r: f64) -> Result<f64> {
    let ap = check_envelope_params(t, a, alpha, lambda, r)?;
    let k = alpha * ap * lambda * t;
    let r_star = 0.5 * k.powf(1.0 / alpha);
    if r <= r_star {
        Ok(2.0 * r * (std::f64::consts::E * k).powf(-1.0 / alpha))
    } else {
        Ok((-ap * lambda * (2.0 * r).powf(-alpha) * t).exp())
    }
}
