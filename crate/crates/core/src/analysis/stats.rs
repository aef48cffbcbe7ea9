use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};
use crate::integrator::{PathResult, PathStatus};

use super::fit::RateFit;
use super::martingale::exp_martingale_value;

/// 97.5% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Per-time Monte Carlo mean and standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

impl Series {
    /// Column statistics of a `paths x times` table.
    pub fn from_rows<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, len: usize) -> Series {
        let mut mean = vec![0.0; len];
        let mut count = 0usize;
        for r in rows.clone() {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
            count += 1;
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let mut ss = vec![0.0; len];
        for r in rows {
            for ((s, x), m) in ss.iter_mut().zip(r).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let se =
            ss.iter().map(|s| if count > 1 { (s / (count - 1) as f64 / count as f64).sqrt() } else { 0.0 }).collect();
        Series { mean, se }
    }
}

/// Binomial proportion with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub count: usize,
    pub n: usize,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Frequency {
    pub fn wilson(count: usize, n: usize, z: f64) -> Frequency {
        if n == 0 {
            return Frequency { count, n, estimate: 0.0, lo: 0.0, hi: 1.0 };
        }
        let nf = n as f64;
        let p = count as f64 / nf;
        let z2 = z * z;
        let denom = 1.0 + z2 / nf;
        let center = (p + z2 / (2.0 * nf)) / denom;
        let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
        let lo = if count == 0 { 0.0 } else { (center - half).max(0.0) };
        let hi = if count == n { 1.0 } else { (center + half).min(1.0) };
        Frequency { count, n, estimate: p, lo, hi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub p: f64,
    pub mean_vnorm: Series,
    pub mean_xnorm: Series,
    /// Restricted to paths with mask `Some(true)`.
    pub cond_vnorm: Option<Series>,
    pub cond_xnorm: Option<Series>,
    /// Restricted to paths with mask `Some(false)`.
    pub compl_vnorm: Option<Series>,
    pub compl_xnorm: Option<Series>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub grid: Vec<f64>,
    pub n_paths: usize,
    pub norms: Vec<NormStats>,
    pub collision_frequency: Frequency,
    /// `P(A)` over the determinate paths.
    pub event_frequency: Option<Frequency>,
    pub event_count: usize,
    pub indeterminate: usize,
    pub martingale_mean: Series,
    #[serde(default)]
    pub fits: Vec<RateFit>,
}

impl EnsembleStats {
    pub fn norm(&self, p: f64) -> Option<&NormStats> {
        self.norms.iter().find(|s| s.p == p)
    }
}

fn check_grid(results: &[PathResult]) -> Result<&[f64]> {
    let first = results.first().ok_or(FlockError::EmptyEnsemble)?;
    if results.iter().any(|r| r.times != first.times || r.norms.len() != first.norms.len()) {
        return Err(FlockError::config("results do not share an output grid"));
    }
    Ok(&first.times)
}

/// `(vnorm, xnorm)` series over the paths whose mask equals `want`.
pub fn conditional(results: &[PathResult], p: f64, mask: &[Option<bool>], want: bool) -> Result<(Series, Series)> {
    let grid = check_grid(results)?;
    if mask.len() != results.len() {
        return Err(FlockError::config("mask length differs from ensemble size"));
    }
    let selected: Vec<&PathResult> =
        results.iter().zip(mask).filter(|(_, m)| **m == Some(want)).map(|(r, _)| r).collect();
    if selected.is_empty() {
        return Err(FlockError::EmptyMask);
    }
    let series = |f: fn(&crate::integrator::NormSeries) -> &Vec<f64>| -> Result<Series> {
        let rows: Vec<&[f64]> = selected
            .iter()
            .map(|r| {
                r.norm(p).map(|s| f(s).as_slice()).ok_or_else(|| FlockError::config(format!("p={p} not recorded")))
            })
            .collect::<Result<_>>()?;
        Ok(Series::from_rows(rows.iter().copied(), grid.len()))
    };
    Ok((series(|s| &s.v)?, series(|s| &s.x)?))
}

fn omit_empty(r: Result<(Series, Series)>) -> Result<(Option<Series>, Option<Series>)> {
    match r {
        Ok((v, x)) => Ok((Some(v), Some(x))),
        Err(FlockError::EmptyMask) => Ok((None, None)),
        Err(e) => Err(e),
    }
}

/// Ensemble means, standard errors, event-conditional versions, collision
/// frequency and the mean of the exponential martingale. Reductions run in
/// input order.
pub fn flocking_metrics(results: &[PathResult], mask: Option<&[Option<bool>]>) -> Result<EnsembleStats> {
    let grid = check_grid(results)?.to_vec();
    let n = results.len();
    let mut norms = Vec::new();
    for (k, s0) in results[0].norms.iter().enumerate() {
        let p = s0.p;
        let mean_vnorm = Series::from_rows(results.iter().map(|r| r.norms[k].v.as_slice()), grid.len());
        let mean_xnorm = Series::from_rows(results.iter().map(|r| r.norms[k].x.as_slice()), grid.len());
        let ((cond_vnorm, cond_xnorm), (compl_vnorm, compl_xnorm)) = match mask {
            Some(m) => (omit_empty(conditional(results, p, m, true))?, omit_empty(conditional(results, p, m, false))?),
            None => ((None, None), (None, None)),
        };
        norms.push(NormStats { p, mean_vnorm, mean_xnorm, cond_vnorm, cond_xnorm, compl_vnorm, compl_xnorm });
    }
    let collided = results.iter().filter(|r| r.status == PathStatus::Collided).count();
    let (event_frequency, event_count, indeterminate) = match mask {
        Some(m) => {
            let inside = m.iter().filter(|f| **f == Some(true)).count();
            let outside = m.iter().filter(|f| **f == Some(false)).count();
            (Some(Frequency::wilson(inside, inside + outside, Z95)), inside, n - inside - outside)
        }
        None => (None, 0, 0),
    };
    let e_rows: Vec<Vec<f64>> =
        results.iter().map(|r| r.m.iter().zip(&r.qv).map(|(&m, &q)| exp_martingale_value(m, q)).collect()).collect();
    let martingale_mean = Series::from_rows(e_rows.iter().map(|r| r.as_slice()), grid.len());
    Ok(EnsembleStats {
        grid,
        n_paths: n,
        norms,
        collision_frequency: Frequency::wilson(collided, n, Z95),
        event_frequency,
        event_count,
        indeterminate,
        martingale_mean,
        fits: Vec::new(),
    })
}

/// Mean and standard error of a plain sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let s = Series::from_rows(xs.iter().map(std::slice::from_ref), 1);
    (s.mean[0], s.se[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_interval() {
        let f = Frequency::wilson(0, 2000, Z95);
        assert_eq!(f.lo, 0.0);
        assert!((f.hi - Z95 * Z95 / (2000.0 + Z95 * Z95)).abs() < 1e-12);
        let all = Frequency::wilson(50, 50, Z95);
        assert_eq!(all.hi, 1.0);
        assert!(all.lo > 0.9);
        let mid = Frequency::wilson(500, 1000, Z95);
        assert!(mid.lo < 0.5 && mid.hi > 0.5);
        assert!((mid.hi - mid.lo - 2.0 * 0.0309).abs() < 1e-3);
    }

    #[test]
    fn series_from_rows() {
        let rows = [vec![1.0, 2.0], vec![3.0, 2.0]];
        let s = Series::from_rows(rows.iter().map(|r| r.as_slice()), 2);
        assert_eq!(s.mean, vec![2.0, 2.0]);
        assert!((s.se[0] - 1.0).abs() < 1e-15);
        assert_eq!(s.se[1], 0.0);
        let (m, se) = mean_se(&[5.0]);
        assert_eq!((m, se), (5.0, 0.0));
    }
}
