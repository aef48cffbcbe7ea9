use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};
use crate::kernels::Kernel;
use crate::noise::NoiseIntensity;

use super::sampler::InitialSampler;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
    pub kernel: Kernel,
    pub noise: NoiseIntensity,
    pub sampler: InitialSampler,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(FlockError::config(format!("need N >= 1 and d >= 1, got N={}, d={}", self.n, self.d)));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(FlockError::config(format!("coupling must be positive, got {}", self.lambda)));
        }
        self.sampler.check(self.n, self.d)
    }
}

/// Center of mass `(x_bar, v_bar)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroState {
    pub x_bar: Vec<f64>,
    pub v_bar: Vec<f64>,
}

/// Split of raw data into center of mass and centered fluctuations.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub macro_state: MacroState,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

fn mean_rows(y: &[f64], d: usize) -> Vec<f64> {
    let n = y.len() / d;
    let mut m = vec![0.0; d];
    for row in y.chunks_exact(d) {
        for (mk, yk) in m.iter_mut().zip(row) {
            *mk += yk;
        }
    }
    m.iter_mut().for_each(|mk| *mk /= n as f64);
    m
}

fn subtract_rows(y: &[f64], center: &[f64]) -> Vec<f64> {
    let d = center.len();
    y.iter().enumerate().map(|(k, yk)| yk - center[k % d]).collect()
}

/// Center of mass and fluctuations of raw `N x d` data.
pub fn decompose(x_raw: &[f64], v_raw: &[f64], d: usize) -> Result<Decomposition> {
    if d == 0 || x_raw.is_empty() || !x_raw.len().is_multiple_of(d) || x_raw.len() != v_raw.len() {
        return Err(FlockError::config("decompose needs matching nonempty N x d arrays"));
    }
    let x_bar = mean_rows(x_raw, d);
    let v_bar = mean_rows(v_raw, d);
    Ok(Decomposition {
        x: subtract_rows(x_raw, &x_bar),
        v: subtract_rows(v_raw, &v_bar),
        macro_state: MacroState { x_bar, v_bar },
    })
}

/// Free transport of the center of mass.
pub fn macro_evolution(initial: &MacroState, t: f64) -> Result<MacroState> {
    if t.is_nan() || t < 0.0 {
        return Err(FlockError::domain(format!("macro evolution to t={t}")));
    }
    Ok(MacroState {
        x_bar: initial.x_bar.iter().zip(&initial.v_bar).map(|(x, v)| x + v * t).collect(),
        v_bar: initial.v_bar.clone(),
    })
}

/// Outer `l^p` norm over particles of the inner Euclidean norms;
/// `p = f64::INFINITY` gives the max.
pub fn lp_norm(y: &[f64], d: usize, p: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(FlockError::domain(format!("lp norm needs p >= 2, got {p}")));
    }
    if d == 0 || !y.len().is_multiple_of(d) {
        return Err(FlockError::config("lp_norm needs an N x d array"));
    }
    Ok(lp_norm_unchecked(y, d, p))
}

pub(crate) fn lp_norm_unchecked(y: &[f64], d: usize, p: f64) -> f64 {
    let rows = y.chunks_exact(d).map(|r| r.iter().map(|a| a * a).sum::<f64>().sqrt());
    if p.is_infinite() {
        rows.fold(0.0, f64::max)
    } else if p == 2.0 {
        y.iter().map(|a| a * a).sum::<f64>().sqrt()
    } else {
        rows.map(|r| r.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Euclidean norm of the particle sum.
pub(crate) fn sum_norm(y: &[f64], d: usize) -> f64 {
    let mut s = vec![0.0; d];
    for row in y.chunks_exact(d) {
        for (sk, yk) in s.iter_mut().zip(row) {
            *sk += yk;
        }
    }
    s.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub n: usize,
    pub d: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// `W(t)`
    pub w_now: f64,
    /// `M_t`
    pub m_now: f64,
    /// `[M]_t`
    pub qv_now: f64,
    min_dist: f64,
    closest: (usize, usize),
}

impl SystemState {
    pub fn new(x: Vec<f64>, v: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || x.is_empty() || !x.len().is_multiple_of(d) || x.len() != v.len() {
            return Err(FlockError::config("state needs matching nonempty N x d arrays"));
        }
        let n = x.len() / d;
        let mut s = SystemState {
            t: 0.0,
            n,
            d,
            x,
            v,
            w_now: 0.0,
            m_now: 0.0,
            qv_now: 0.0,
            min_dist: f64::INFINITY,
            closest: (0, 0),
        };
        s.refresh_min_dist();
        Ok(s)
    }

    /// `min_{i != j} |x_i - x_j|`; infinite for a single particle.
    pub fn min_dist(&self) -> f64 {
        self.min_dist
    }

    pub fn closest_pair(&self) -> (usize, usize) {
        self.closest
    }

    pub(crate) fn refresh_min_dist(&mut self) {
        let (d, n) = (self.d, self.n);
        let mut best = f64::INFINITY;
        let mut pair = (0, 0);
        for i in 0..n {
            for j in i + 1..n {
                let r = dist(&self.x[i * d..(i + 1) * d], &self.x[j * d..(j + 1) * d]);
                if r < best {
                    best = r;
                    pair = (i, j);
                }
            }
        }
        self.min_dist = best;
        self.closest = pair;
    }
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decompose_examples() {
        let x = vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        let dec = decompose(&x, &x, 2).unwrap();
        assert_eq!(dec.macro_state.x_bar, vec![1.0, 2.0]);
        assert!(dec.x.iter().all(|&a| a == 0.0));

        let centered = vec![-1.0, 0.5, 1.0, -0.5];
        let dec = decompose(&centered, &centered, 2).unwrap();
        assert_eq!(dec.macro_state.x_bar, vec![0.0, 0.0]);
        assert_eq!(dec.x, centered);
        assert!(decompose(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn macro_evolution_examples() {
        let m = MacroState { x_bar: vec![0.0, 0.0], v_bar: vec![1.0, 0.0] };
        assert_eq!(macro_evolution(&m, 3.0).unwrap().x_bar, vec![3.0, 0.0]);
        assert_eq!(macro_evolution(&m, 3.0).unwrap().v_bar, m.v_bar);
        let still = MacroState { x_bar: vec![2.0], v_bar: vec![0.0] };
        assert_eq!(macro_evolution(&still, 10.0).unwrap().x_bar, vec![2.0]);
        assert!(macro_evolution(&m, -1.0).is_err());
    }

    #[test]
    fn lp_norm_examples() {
        assert_eq!(lp_norm(&[3.0, -4.0], 1, 2.0).unwrap(), 5.0);
        assert_eq!(lp_norm(&[0.0; 6], 2, 3.0).unwrap(), 0.0);
        let y = [3.0, 4.0, 0.0, 1.0, 6.0, 8.0];
        assert_eq!(lp_norm(&y, 2, f64::INFINITY).unwrap(), 10.0);
        let p3 = lp_norm(&y, 2, 3.0).unwrap();
        assert!((p3 - (125.0f64 + 1.0 + 1000.0).cbrt()).abs() < 1e-12);
        assert!(matches!(lp_norm(&y, 2, 1.5), Err(FlockError::Domain(_))));
    }

    #[test]
    fn min_dist_matches_scan() {
        let s = SystemState::new(vec![0.0, 0.0, 3.0, 4.0, 0.0, 1.0], vec![0.0; 6], 2).unwrap();
        assert_eq!(s.min_dist(), 1.0);
        assert_eq!(s.closest_pair(), (0, 2));
        let single = SystemState::new(vec![0.0], vec![0.0], 1).unwrap();
        assert!(single.min_dist().is_infinite());
    }
}
