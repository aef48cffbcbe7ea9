use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};

pub const DEFAULT_FIRST_CUTOFF: f64 = 1e-2;
pub const DEFAULT_COLLISION_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_C_CFL: f64 = 0.1;
pub const DEFAULT_C_STIFF: f64 = 0.5;

/// Step-size and cutoff policy.
///
/// The step is `min(dt_base, c_cfl * min_dist / (1 + |v|_2), c_stiff / rate)`
/// clamped below by `dt_min`, where `rate` is the largest row sum
/// `(lambda/N) sum_j psi(|x_i - x_j|)` of the alignment operator. Setting a
/// coefficient to infinity disables that limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepController {
    pub dt_base: f64,
    pub dt_min: f64,
    /// Strictly decreasing cutoff radii, ending at the collision threshold.
    pub cutoffs: Vec<f64>,
    pub collision_threshold: f64,
    #[serde(with = "crate::serde_util::lenient_f64")]
    pub c_cfl: f64,
    #[serde(with = "crate::serde_util::lenient_f64")]
    pub c_stiff: f64,
}

/// `a_n = a_1 2^{1-n}` while above `threshold`, then `threshold` itself.
pub fn cutoff_sequence(a1: f64, threshold: f64) -> Result<Vec<f64>> {
    if !(threshold > 0.0 && a1 > threshold && a1.is_finite()) {
        return Err(FlockError::config(format!(
            "cutoff sequence needs a_1 > threshold > 0, got a_1={a1}, threshold={threshold}"
        )));
    }
    let mut seq = Vec::new();
    let mut a = a1;
    while a > threshold {
        seq.push(a);
        a *= 0.5;
    }
    seq.push(threshold);
    Ok(seq)
}

impl StepController {
    pub fn new(dt_base: f64) -> Result<Self> {
        let c = StepController {
            dt_base,
            dt_min: dt_base * 1e-6,
            cutoffs: cutoff_sequence(DEFAULT_FIRST_CUTOFF, DEFAULT_COLLISION_THRESHOLD)?,
            collision_threshold: DEFAULT_COLLISION_THRESHOLD,
            c_cfl: DEFAULT_C_CFL,
            c_stiff: DEFAULT_C_STIFF,
        };
        c.validate()?;
        Ok(c)
    }

    /// Fixed step `dt_base`, no shrinking.
    pub fn fixed(dt_base: f64) -> Result<Self> {
        let mut c = StepController::new(dt_base)?;
        c.c_cfl = f64::INFINITY;
        c.c_stiff = f64::INFINITY;
        Ok(c)
    }

    pub fn with_cutoffs(mut self, a1: f64, threshold: f64) -> Result<Self> {
        self.cutoffs = cutoff_sequence(a1, threshold)?;
        self.collision_threshold = threshold;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_base > 0.0 && self.dt_base.is_finite()) {
            return Err(FlockError::config(format!("dt_base must be positive, got {}", self.dt_base)));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_base) {
            return Err(FlockError::config(format!("need 0 < dt_min <= dt_base, got {}", self.dt_min)));
        }
        if self.cutoffs.is_empty() || self.cutoffs.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(FlockError::config("cutoff radii must be strictly decreasing"));
        }
        if *self.cutoffs.last().unwrap() != self.collision_threshold || !(self.collision_threshold > 0.0) {
            return Err(FlockError::config("cutoff radii must end at the positive collision threshold"));
        }
        if !(self.c_cfl > 0.0) || !(self.c_stiff > 0.0) {
            return Err(FlockError::config("step coefficients must be positive"));
        }
        Ok(())
    }

    /// Index of the coarsest cutoff strictly below `min_dist`; the last
    /// level once `min_dist` is at or below the threshold.
    pub fn active_level(&self, min_dist: f64) -> usize {
        self.cutoffs.iter().position(|&a| a < min_dist).unwrap_or(self.cutoffs.len() - 1)
    }

    pub fn step_size(&self, min_dist: f64, v_norm2: f64, relax_rate: f64) -> f64 {
        let mut dt = self.dt_base;
        if self.c_cfl.is_finite() && min_dist.is_finite() {
            dt = dt.min(self.c_cfl * min_dist / (1.0 + v_norm2));
        }
        if self.c_stiff.is_finite() && relax_rate > 0.0 {
            dt = dt.min(self.c_stiff / relax_rate);
        }
        dt.max(self.dt_min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sequence_halves_down_to_threshold() {
        let seq = cutoff_sequence(1e-2, 1e-6).unwrap();
        assert_eq!(seq[0], 1e-2);
        assert_eq!(seq[1], 5e-3);
        assert_eq!(*seq.last().unwrap(), 1e-6);
        assert!(seq.windows(2).all(|w| w[1] < w[0]));
        assert!(cutoff_sequence(1e-6, 1e-2).is_err());
    }

    #[test]
    fn step_size_stays_in_range() {
        let c = StepController::new(1e-3).unwrap();
        assert_eq!(c.step_size(1.0, 0.0, 0.0), 1e-3);
        assert!((c.step_size(1e-3, 1.0, 0.0) - 0.5e-4).abs() < 1e-18);
        assert_eq!(c.step_size(1e-20, 1.0, 0.0), c.dt_min);
        assert!((c.step_size(1.0, 0.0, 1e4) - 0.5e-4).abs() < 1e-18);
        let f = StepController::fixed(1e-2).unwrap();
        assert_eq!(f.step_size(1e-9, 1e3, 1e9), 1e-2);
    }

    #[test]
    fn active_level_is_coarsest_noop_cutoff() {
        let c = StepController::new(1e-3).unwrap();
        assert_eq!(c.active_level(1.0), 0);
        assert_eq!(c.active_level(0.006), 1);
        assert_eq!(c.active_level(1e-7), c.cutoffs.len() - 1);
    }
}
