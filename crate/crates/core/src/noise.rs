//! Deterministic noise intensities `D(t)` and their running quadratic
//! variation `int_0^t D(s)^2 ds`, both in closed form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum NoiseIntensity {
    Constant {
        d0: f64,
    },
    /// `d0 * (1 + t)^{-gamma}`
    PowerDecay {
        d0: f64,
        gamma: f64,
    },
}

impl NoiseIntensity {
    pub fn constant(d0: f64) -> Result<Self> {
        if !d0.is_finite() {
            return Err(FlockError::config(format!("noise intensity {d0} is not finite")));
        }
        Ok(NoiseIntensity::Constant { d0 })
    }

    pub fn power_decay(d0: f64, gamma: f64) -> Result<Self> {
        if !d0.is_finite() || !(gamma.is_finite() && gamma > 0.0) {
            return Err(FlockError::config(format!(
                "power-decay noise needs finite d0 and gamma > 0, got ({d0}, {gamma})"
            )));
        }
        Ok(NoiseIntensity::PowerDecay { d0, gamma })
    }

    /// Whether `int_0^inf D^2` is finite.
    pub fn square_integrable(&self) -> bool {
        match *self {
            NoiseIntensity::Constant { d0 } => d0 == 0.0,
            NoiseIntensity::PowerDecay { d0, gamma } => d0 == 0.0 || gamma > 0.5,
        }
    }

    pub fn intensity_at(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(FlockError::domain(format!("noise intensity at t={t}")));
        }
        Ok(self.at(t))
    }

    #[inline]
    pub(crate) fn at(&self, t: f64) -> f64 {
        match *self {
            NoiseIntensity::Constant { d0 } => d0,
            NoiseIntensity::PowerDecay { d0, gamma } => d0 * (1.0 + t).powf(-gamma),
        }
    }

    /// `int_0^t D(s)^2 ds`; `t = f64::INFINITY` is allowed for
    /// square-integrable intensities.
    pub fn quad_variation(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(FlockError::domain(format!("quadratic variation at t={t}")));
        }
        if t.is_infinite() && !self.square_integrable() {
            return Err(FlockError::domain(format!("{self} is not square integrable on [0, inf)")));
        }
        Ok(self.qv(t))
    }

    #[inline]
    pub(crate) fn qv(&self, t: f64) -> f64 {
        match *self {
            NoiseIntensity::Constant { d0 } => {
                if d0 == 0.0 {
                    0.0
                } else {
                    d0 * d0 * t
                }
            }
            NoiseIntensity::PowerDecay { d0, gamma } => {
                if d0 == 0.0 {
                    return 0.0;
                }
                let e = 1.0 - 2.0 * gamma;
                if e == 0.0 {
                    d0 * d0 * t.ln_1p()
                } else if t.is_infinite() {
                    // e < 0 here
                    -d0 * d0 / e
                } else {
                    // ((1+t)^e - 1)/e without cancellation for small e*log(1+t)
                    d0 * d0 * (e * t.ln_1p()).exp_m1() / e
                }
            }
        }
    }
}

impl fmt::Display for NoiseIntensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseIntensity::Constant { d0 } => write!(f, "const:{d0}"),
            NoiseIntensity::PowerDecay { d0, gamma } => write!(f, "powdec:{d0}:{gamma}"),
        }
    }
}

impl FromStr for NoiseIntensity {
    type Err = FlockError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let number = |t: &str| -> Result<f64> {
            t.trim().parse::<f64>().map_err(|_| FlockError::config(format!("bad number `{t}` in noise spec `{s}`")))
        };
        match parts.as_slice() {
            ["const", d0] => NoiseIntensity::constant(number(d0)?),
            ["powdec", d0, gamma] => NoiseIntensity::power_decay(number(d0)?, number(gamma)?),
            _ => Err(FlockError::config(format!("unrecognized noise spec `{s}`"))),
        }
    }
}

impl From<NoiseIntensity> for String {
    fn from(n: NoiseIntensity) -> String {
        n.to_string()
    }
}

impl TryFrom<String> for NoiseIntensity {
    type Error = FlockError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intensity_examples() {
        assert_eq!(NoiseIntensity::constant(0.5).unwrap().intensity_at(7.0).unwrap(), 0.5);
        let pd = NoiseIntensity::power_decay(1.0, 1.0).unwrap();
        assert!((pd.intensity_at(1.0).unwrap() - 0.5).abs() < 1e-15);
        let pd2 = NoiseIntensity::power_decay(2.0, 0.75).unwrap();
        assert_eq!(pd2.intensity_at(0.0).unwrap(), 2.0);
        assert!(pd2.intensity_at(-1.0).is_err());
    }

    #[test]
    fn quad_variation_examples() {
        let c = NoiseIntensity::constant(0.5).unwrap();
        assert!((c.quad_variation(4.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(c.quad_variation(f64::INFINITY), Err(FlockError::Domain(_))));
        let pd = NoiseIntensity::power_decay(1.0, 1.0).unwrap();
        assert!((pd.quad_variation(f64::INFINITY).unwrap() - 1.0).abs() < 1e-15);
        let half = NoiseIntensity::power_decay(1.0, 0.5).unwrap();
        assert!(half.quad_variation(f64::INFINITY).is_err());
        for n in [c, pd, half] {
            assert_eq!(n.quad_variation(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn quad_variation_matches_trapezoid() {
        let families = [
            NoiseIntensity::constant(0.7).unwrap(),
            NoiseIntensity::power_decay(1.3, 0.75).unwrap(),
            NoiseIntensity::power_decay(0.4, 0.5).unwrap(),
            NoiseIntensity::power_decay(2.0, 0.2).unwrap(),
        ];
        for noise in families {
            for t in [0.1, 1.0, 10.0] {
                let n = 200_000;
                let h = t / n as f64;
                let f = |s: f64| noise.intensity_at(s).unwrap().powi(2);
                let mut s = 0.5 * (f(0.0) + f(t));
                for i in 1..n {
                    s += f(i as f64 * h);
                }
                let trap = s * h;
                let exact = noise.quad_variation(t).unwrap();
                assert!((trap - exact).abs() <= 1e-6 * exact.abs(), "{noise} t={t}: {trap} vs {exact}");
            }
        }
    }

    #[test]
    fn config_strings() {
        for s in ["const:0.5", "powdec:1:0.75"] {
            assert_eq!(s.parse::<NoiseIntensity>().unwrap().to_string(), s);
        }
        assert!("powdec:1".parse::<NoiseIntensity>().is_err());
        assert!("powdec:1:0".parse::<NoiseIntensity>().is_err());
    }
}
