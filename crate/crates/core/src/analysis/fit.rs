use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayModel {
    /// `y = C exp(-rate t)`
    Exponential,
    /// `y = C (1 + t)^{-rate}`
    Algebraic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub model: DecayModel,
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Ordinary least squares `y = a + b u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

pub fn linear_fit(u: &[f64], y: &[f64]) -> Result<LinearFit> {
    if u.len() != y.len() || u.len() < 2 {
        return Err(FlockError::DegenerateFit("need at least two paired points".into()));
    }
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let suu: f64 = u.iter().map(|a| (a - mu) * (a - mu)).sum();
    let suy: f64 = u.iter().zip(y).map(|(a, b)| (a - mu) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if suu == 0.0 {
        return Err(FlockError::DegenerateFit("abscissae are all equal".into()));
    }
    let slope = suy / suu;
    let intercept = my - slope * mu;
    let ss_res: f64 = u.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(LinearFit { intercept, slope, r_squared })
}

/// Log-linear least squares over the points with `t` in `window`.
pub fn fit_decay(t: &[f64], y: &[f64], model: DecayModel, window: (f64, f64)) -> Result<RateFit> {
    if t.len() != y.len() {
        return Err(FlockError::config("time and value series differ in length"));
    }
    let (lo, hi) = window;
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(s, _)| **s >= lo && **s <= hi).map(|(s, v)| (*s, *v)).collect();
    if pts.len() < 5 {
        return Err(FlockError::DegenerateFit(format!("{} points in window [{lo}, {hi}], need 5", pts.len())));
    }
    if let Some((s, v)) = pts.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(FlockError::DegenerateFit(format!("non-positive value {v} at t={s}")));
    }
    let (ymin, ymax) = pts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), (_, v)| (a.min(*v), b.max(*v)));
    if ymax / ymin < 1.01 {
        return Err(FlockError::DegenerateFit("series is flat (max/min < 1.01)".into()));
    }
    let u: Vec<f64> = pts
        .iter()
        .map(|(s, _)| match model {
            DecayModel::Exponential => *s,
            DecayModel::Algebraic => s.ln_1p(),
        })
        .collect();
    let ly: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let lf = linear_fit(&u, &ly)?;
    Ok(RateFit { model, rate: -lf.slope, intercept: lf.intercept.exp(), r_squared: lf.r_squared, window })
}

/// Default fit window `[0.2 T, T]`.
pub fn default_window(horizon: f64) -> (f64, f64) {
    (0.2 * horizon, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, t_max: f64) -> Vec<f64> {
        (0..=n).map(|k| t_max * k as f64 / n as f64).collect()
    }

    #[test]
    fn exact_exponential() {
        let t = grid(50, 5.0);
        let y: Vec<f64> = t.iter().map(|s| 3.0 * (-2.0 * s).exp()).collect();
        let f = fit_decay(&t, &y, DecayModel::Exponential, (0.0, 5.0)).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-8);
        assert!((f.intercept - 3.0).abs() < 1e-8);
        assert!(f.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn exact_algebraic() {
        let t = grid(50, 20.0);
        let y: Vec<f64> = t.iter().map(|s| (1.0 + s).powf(-0.5)).collect();
        let f = fit_decay(&t, &y, DecayModel::Algebraic, (0.0, 20.0)).unwrap();
        assert!((f.rate - 0.5).abs() < 1e-8);
    }

    #[test]
    fn degenerate_inputs() {
        let t = grid(10, 1.0);
        let flat = vec![1.0; 11];
        assert!(matches!(fit_decay(&t, &flat, DecayModel::Exponential, (0.0, 1.0)), Err(FlockError::DegenerateFit(_))));
        let y: Vec<f64> = t.iter().map(|s| (-s).exp()).collect();
        assert!(fit_decay(&t, &y, DecayModel::Exponential, (0.0, 0.3)).is_err());
        let mut neg = y.clone();
        neg[3] = -1.0;
        assert!(fit_decay(&t, &neg, DecayModel::Exponential, (0.0, 1.0)).is_err());
    }

    #[test]
    fn window_restricts_points() {
        let t = grid(100, 10.0);
        // transient before t = 2, clean exponential after
        let y: Vec<f64> = t.iter().map(|&s| if s < 2.0 { 5.0 } else { (-0.7 * s).exp() }).collect();
        let f = fit_decay(&t, &y, DecayModel::Exponential, default_window(10.0)).unwrap();
        assert!((f.rate - 0.7).abs() < 1e-10);
        assert_eq!(f.window, (2.0, 10.0));
    }
}
