use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};

/// Initial data generators. Output is raw (not yet centered); the
/// integrator splits off the center of mass before integrating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum InitialSampler {
    /// Positions uniform in `[-half_width, half_width]^d`, velocities
    /// `N(0, sigma_v^2)` per coordinate.
    UniformGaussian { half_width: f64, sigma_v: f64 },
    /// Gaussian positions and velocities.
    Gaussian { sigma_x: f64, sigma_v: f64 },
    /// Deterministic: particle `i` at `i * spacing` on the first axis with
    /// velocity `(-1)^i * speed`. Diagnostics only.
    Lattice { spacing: f64, speed: f64 },
    /// Lattice with neighbors moving toward each other, plus uniform
    /// position jitter and Gaussian velocity jitter (both scaled by
    /// `jitter`).
    Crossing { spacing: f64, speed: f64, jitter: f64 },
    /// Two particles on a line with relative position `x` and relative
    /// velocity `v`, placed antisymmetrically.
    Pair { x: f64, v: f64 },
}

impl InitialSampler {
    pub fn check(&self, n: usize, d: usize) -> Result<()> {
        let nonneg = |name: &str, a: f64| -> Result<()> {
            if a.is_finite() && a >= 0.0 {
                Ok(())
            } else {
                Err(FlockError::config(format!("sampler parameter {name} must be finite and >= 0, got {a}")))
            }
        };
        match *self {
            InitialSampler::UniformGaussian { half_width, sigma_v } => {
                nonneg("half_width", half_width)?;
                nonneg("sigma_v", sigma_v)
            }
            InitialSampler::Gaussian { sigma_x, sigma_v } => {
                nonneg("sigma_x", sigma_x)?;
                nonneg("sigma_v", sigma_v)
            }
            InitialSampler::Lattice { spacing, speed } => {
                if !(spacing > 0.0) || !speed.is_finite() {
                    return Err(FlockError::config("lattice needs spacing > 0 and a finite speed"));
                }
                Ok(())
            }
            InitialSampler::Crossing { spacing, speed, jitter } => {
                if !(spacing > 0.0) || !speed.is_finite() || !(0.0..1.0).contains(&jitter) {
                    return Err(FlockError::config("crossing needs spacing > 0, finite speed, jitter in [0, 1)"));
                }
                Ok(())
            }
            InitialSampler::Pair { x, v } => {
                if n != 2 || d != 1 {
                    return Err(FlockError::config(format!("pair sampler needs N=2, d=1, got N={n}, d={d}")));
                }
                if x == 0.0 || !x.is_finite() || !v.is_finite() {
                    return Err(FlockError::config("pair sampler needs finite x != 0 and finite v"));
                }
                Ok(())
            }
        }
    }

    /// Draws `(x, v)` as row-major `n x d` arrays.
    pub fn sample<R: Rng>(&self, n: usize, d: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mut x = vec![0.0; n * d];
        let mut v = vec![0.0; n * d];
        match *self {
            InitialSampler::UniformGaussian { half_width, sigma_v } => {
                for (xi, vi) in x.iter_mut().zip(v.iter_mut()) {
                    *xi = half_width * (2.0 * rng.random::<f64>() - 1.0);
                    *vi = sigma_v * rng.sample::<f64, _>(StandardNormal);
                }
            }
            InitialSampler::Gaussian { sigma_x, sigma_v } => {
                for (xi, vi) in x.iter_mut().zip(v.iter_mut()) {
                    *xi = sigma_x * rng.sample::<f64, _>(StandardNormal);
                    *vi = sigma_v * rng.sample::<f64, _>(StandardNormal);
                }
            }
            InitialSampler::Lattice { spacing, speed } => {
                for i in 0..n {
                    x[i * d] = i as f64 * spacing;
                    v[i * d] = if i % 2 == 0 { speed } else { -speed };
                }
            }
            InitialSampler::Crossing { spacing, speed, jitter } => {
                for i in 0..n {
                    let u: f64 = rng.random();
                    let z: f64 = rng.sample(StandardNormal);
                    x[i * d] = spacing * (i as f64 + jitter * (u - 0.5));
                    v[i * d] = (if i % 2 == 0 { speed } else { -speed }) * (1.0 + jitter * z);
                }
            }
            InitialSampler::Pair { x: rel_x, v: rel_v } => {
                x[0] = 0.5 * rel_x;
                x[1] = -0.5 * rel_x;
                v[0] = 0.5 * rel_v;
                v[1] = -0.5 * rel_v;
            }
        }
        (x, v)
    }
}

impl fmt::Display for InitialSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialSampler::UniformGaussian { half_width, sigma_v } => write!(f, "uniform:{half_width}:{sigma_v}"),
            InitialSampler::Gaussian { sigma_x, sigma_v } => write!(f, "gauss:{sigma_x}:{sigma_v}"),
            InitialSampler::Lattice { spacing, speed } => write!(f, "lattice:{spacing}:{speed}"),
            InitialSampler::Crossing { spacing, speed, jitter } => write!(f, "crossing:{spacing}:{speed}:{jitter}"),
            InitialSampler::Pair { x, v } => write!(f, "pair:{x}:{v}"),
        }
    }
}

impl FromStr for InitialSampler {
    type Err = FlockError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let nums = parts[1..]
            .iter()
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|_| FlockError::config(format!("bad number in sampler spec `{s}`")))?;
        match (parts[0], nums.as_slice()) {
            ("uniform", &[half_width, sigma_v]) => Ok(InitialSampler::UniformGaussian { half_width, sigma_v }),
            ("gauss", &[sigma_x, sigma_v]) => Ok(InitialSampler::Gaussian { sigma_x, sigma_v }),
            ("lattice", &[spacing, speed]) => Ok(InitialSampler::Lattice { spacing, speed }),
            ("crossing", &[spacing, speed, jitter]) => Ok(InitialSampler::Crossing { spacing, speed, jitter }),
            ("pair", &[x, v]) => Ok(InitialSampler::Pair { x, v }),
            _ => Err(FlockError::config(format!("unrecognized sampler spec `{s}`"))),
        }
    }
}

impl From<InitialSampler> for String {
    fn from(s: InitialSampler) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for InitialSampler {
    type Error = FlockError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spec_strings_roundtrip() {
        for s in ["uniform:1:0.5", "gauss:0.3:0.02", "lattice:1:0.5", "crossing:1:1:0.2", "pair:1:2"] {
            assert_eq!(s.parse::<InitialSampler>().unwrap().to_string(), s);
        }
        assert!("gauss:1".parse::<InitialSampler>().is_err());
        assert!("pair:1:x".parse::<InitialSampler>().is_err());
    }

    #[test]
    fn pair_is_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (x, v) = InitialSampler::Pair { x: 1.0, v: 2.0 }.sample(2, 1, &mut rng);
        assert_eq!(x, vec![0.5, -0.5]);
        assert_eq!(v, vec![1.0, -1.0]);
        assert!(InitialSampler::Pair { x: 1.0, v: 2.0 }.check(3, 1).is_err());
    }

    #[test]
    fn crossing_neighbors_approach() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, v) = InitialSampler::Crossing { spacing: 1.0, speed: 1.0, jitter: 0.2 }.sample(5, 1, &mut rng);
        for i in 0..4 {
            assert!(x[i + 1] > x[i]);
        }
        // even-indexed particles move right, odd-indexed left
        assert!(v[0] > 0.0 && v[1] < 0.0 && v[2] > 0.0);
    }
}
