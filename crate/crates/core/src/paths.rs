//! The scalar Brownian path shared by all particles of one trajectory.
//!
//! A path is a grid of `(t, W(t))` nodes. The base grid is drawn from a
//! stream keyed by the path seed; nodes inserted later by Brownian-bridge
//! sampling draw from streams keyed by `(seed, t_left, t_right, t_new)`, so
//! a refinement reproduces bit-for-bit no matter when or on which thread it
//! happens.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};
use crate::noise::NoiseIntensity;
use crate::rng::{self, TAG_BASE, TAG_BRIDGE, TAG_EXTEND};

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    seed: u64,
    times: Vec<f64>,
    values: Vec<f64>,
}

/// `M_t = int_0^t D dW` (left-endpoint sums) and `[M]_t` on the path grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleTrack {
    pub times: Vec<f64>,
    pub m_values: Vec<f64>,
    pub qv_values: Vec<f64>,
}

/// Draws `W(t)` given `W(t0) = w0` and `W(t1) = w1`, `t0 < t < t1`.
pub fn bridge_sample(seed: u64, left: (f64, f64), right: (f64, f64), t: f64) -> f64 {
    let (t0, w0) = left;
    let (t1, w1) = right;
    let span = t1 - t0;
    let mean = w0 + (t - t0) / span * (w1 - w0);
    let var = (t - t0) * (t1 - t) / span;
    let z = rng::normal_from_key(&[seed, TAG_BRIDGE, t0.to_bits(), t1.to_bits(), t.to_bits()]);
    mean + var.max(0.0).sqrt() * z
}

fn uniform_times(start: f64, horizon: f64, dt: f64) -> Vec<f64> {
    let steps = ((horizon - start) / dt - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..steps).map(|k| start + k as f64 * dt).collect();
    times.push(horizon);
    times
}

impl BrownianPath {
    /// Samples `W` on a uniform grid of step `dt` over `[0, horizon]` (last
    /// step possibly shorter).
    pub fn sample(horizon: f64, dt: f64, seed: u64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) || !(dt > 0.0 && dt <= horizon) {
            return Err(FlockError::config(format!(
                "path needs horizon > 0 and 0 < dt <= horizon, got horizon={horizon}, dt={dt}"
            )));
        }
        let times = uniform_times(0.0, horizon, dt);
        let mut stream = rng::stream(&[seed, TAG_BASE]);
        let mut values = Vec::with_capacity(times.len());
        let mut w = 0.0;
        values.push(w);
        for pair in times.windows(2) {
            let z: f64 = stream.sample(StandardNormal);
            w += z * (pair[1] - pair[0]).sqrt();
            values.push(w);
        }
        Ok(BrownianPath { seed, times, values })
    }

    /// Builds a path from explicit nodes.
    pub fn from_nodes(seed: u64, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(FlockError::Grid("path needs matching, nonempty time and value arrays".into()));
        }
        if times[0] != 0.0 || values[0] != 0.0 {
            return Err(FlockError::Grid("path must start at (0, 0)".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FlockError::Grid("path times must be strictly increasing".into()));
        }
        Ok(BrownianPath { seed, times, values })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("path is nonempty")
    }

    /// Inserts `parts - 1` equally spaced nodes between the adjacent nodes
    /// `t0` and `t1`. Existing nodes are untouched.
    pub fn refine(&self, t0: f64, t1: f64, parts: usize) -> Result<Self> {
        let mut out = self.clone();
        out.refine_in_place(t0, t1, parts)?;
        Ok(out)
    }

    pub fn refine_in_place(&mut self, t0: f64, t1: f64, parts: usize) -> Result<()> {
        if parts < 2 {
            return Err(FlockError::Grid(format!("refinement needs parts >= 2, got {parts}")));
        }
        let i = self
            .times
            .binary_search_by(|t| t.total_cmp(&t0))
            .map_err(|_| FlockError::Grid(format!("{t0} is not a grid node")))?;
        if i + 1 >= self.times.len() || self.times[i + 1] != t1 {
            return Err(FlockError::Grid(format!("{t0} and {t1} are not adjacent grid nodes")));
        }
        let right = (t1, self.values[i + 1]);
        let h = (t1 - t0) / parts as f64;
        let mut left = (t0, self.values[i]);
        let mut new_t = Vec::with_capacity(parts - 1);
        let mut new_w = Vec::with_capacity(parts - 1);
        for j in 1..parts {
            let t = t0 + j as f64 * h;
            let w = bridge_sample(self.seed, left, right, t);
            new_t.push(t);
            new_w.push(w);
            left = (t, w);
        }
        self.times.splice(i + 1..i + 1, new_t);
        self.values.splice(i + 1..i + 1, new_w);
        Ok(())
    }

    /// Appends fresh increments on a uniform grid of step `dt` up to
    /// `horizon`. The existing prefix is untouched.
    pub fn extend(&mut self, horizon: f64, dt: f64) -> Result<()> {
        let start = self.horizon();
        if !(horizon > start) || !(dt > 0.0) {
            return Err(FlockError::config(format!(
                "cannot extend a path ending at {start} to {horizon} with dt={dt}"
            )));
        }
        let times = uniform_times(start, horizon, dt.min(horizon - start));
        let mut stream = rng::stream(&[self.seed, TAG_EXTEND, start.to_bits()]);
        let mut w = *self.values.last().expect("path is nonempty");
        for pair in times.windows(2) {
            let z: f64 = stream.sample(StandardNormal);
            w += z * (pair[1] - pair[0]).sqrt();
            self.times.push(pair[1]);
            self.values.push(w);
        }
        Ok(())
    }

    /// Keeps every `stride`-th node (and the last one).
    pub fn coarsen(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let last = self.times.len() - 1;
        let keep: Vec<usize> = (0..=last).filter(|k| k % stride == 0 || *k == last).collect();
        BrownianPath {
            seed: self.seed,
            times: keep.iter().map(|&k| self.times[k]).collect(),
            values: keep.iter().map(|&k| self.values[k]).collect(),
        }
    }

    /// Little-endian dump: `u64` seed, `u64` node count, then `(f64 t, f64 w)` pairs.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&(self.times.len() as u64).to_le_bytes())?;
        for (t, w) in self.times.iter().zip(&self.values) {
            out.write_all(&t.to_le_bytes())?;
            out.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |input: &mut R| -> Result<[u8; 8]> {
            input.read_exact(&mut word)?;
            Ok(word)
        };
        let seed = u64::from_le_bytes(next(&mut input)?);
        let count = u64::from_le_bytes(next(&mut input)?) as usize;
        let mut times = Vec::with_capacity(count);
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            times.push(f64::from_le_bytes(next(&mut input)?));
            values.push(f64::from_le_bytes(next(&mut input)?));
        }
        BrownianPath::from_nodes(seed, times, values)
    }
}

/// Left-endpoint Ito sums of `D dW` along the path, with `[M]_t` taken from
/// the closed form of the intensity.
pub fn stochastic_integral(path: &BrownianPath, noise: &NoiseIntensity) -> MartingaleTrack {
    let mut m_values = Vec::with_capacity(path.len());
    let mut m = 0.0;
    m_values.push(m);
    for k in 0..path.len() - 1 {
        m += noise.at(path.times[k]) * (path.values[k + 1] - path.values[k]);
        m_values.push(m);
    }
    MartingaleTrack {
        times: path.times.clone(),
        qv_values: path.times.iter().map(|&t| noise.qv(t)).collect(),
        m_values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_grid_shape() {
        let p = BrownianPath::sample(1.0, 0.5, 3).unwrap();
        assert_eq!(p.times(), &[0.0, 0.5, 1.0]);
        assert_eq!(p.values()[0], 0.0);
        let q = BrownianPath::sample(1.0, 0.3, 3).unwrap();
        assert_eq!(q.len(), 5);
        assert_eq!(q.horizon(), 1.0);
        assert!(BrownianPath::sample(0.0, 0.1, 1).is_err());
        assert!(BrownianPath::sample(1.0, 2.0, 1).is_err());
        assert!(BrownianPath::sample(1.0, -0.1, 1).is_err());
    }

    #[test]
    fn sample_is_reproducible() {
        assert_eq!(BrownianPath::sample(2.0, 0.01, 11).unwrap(), BrownianPath::sample(2.0, 0.01, 11).unwrap());
        assert_ne!(BrownianPath::sample(2.0, 0.01, 11).unwrap(), BrownianPath::sample(2.0, 0.01, 12).unwrap());
    }

    #[test]
    fn refine_midpoint_and_preservation() {
        let p = BrownianPath::sample(1.0, 1.0, 5).unwrap();
        let r = p.refine(0.0, 1.0, 2).unwrap();
        assert_eq!(r.times(), &[0.0, 0.5, 1.0]);
        assert_eq!(r.values()[0], p.values()[0]);
        assert_eq!(r.values()[2].to_bits(), p.values()[1].to_bits());
        let rr = r.refine(0.5, 1.0, 3).unwrap();
        assert_eq!(rr.len(), 5);
        for (t, w) in p.times().iter().zip(p.values()) {
            let k = rr.times().iter().position(|s| s == t).unwrap();
            assert_eq!(rr.values()[k].to_bits(), w.to_bits());
        }
        // same refinement history, same draws
        assert_eq!(rr, p.refine(0.0, 1.0, 2).unwrap().refine(0.5, 1.0, 3).unwrap());
    }

    #[test]
    fn refine_rejects_non_adjacent_nodes() {
        let p = BrownianPath::sample(1.0, 0.25, 5).unwrap();
        assert!(matches!(p.refine(0.0, 0.5, 2), Err(FlockError::Grid(_))));
        assert!(matches!(p.refine(0.1, 0.25, 2), Err(FlockError::Grid(_))));
        assert!(matches!(p.refine(0.0, 0.25, 1), Err(FlockError::Grid(_))));
    }

    #[test]
    fn extend_keeps_prefix() {
        let mut p = BrownianPath::sample(1.0, 0.1, 9).unwrap();
        let before = p.clone();
        p.extend(3.0, 0.5).unwrap();
        assert_eq!(&p.values()[..before.len()], before.values());
        assert_eq!(p.horizon(), 3.0);
        assert!(p.times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn coarsen_subsamples() {
        let p = BrownianPath::sample(1.0, 0.1, 2).unwrap();
        let c = p.coarsen(5);
        assert_eq!(c.len(), 3);
        assert_eq!(c.values()[1], p.values()[5]);
        assert_eq!(c.values()[2], p.values()[10]);
    }

    #[test]
    fn binary_dump_roundtrip() {
        let p = BrownianPath::sample(1.0, 0.125, 77).unwrap().refine(0.0, 0.125, 3).unwrap();
        let mut buf = Vec::new();
        p.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 16 * p.len());
        assert_eq!(u64::from_le_bytes(buf[..8].try_into().unwrap()), 77);
        assert_eq!(BrownianPath::read_from(buf.as_slice()).unwrap(), p);
        assert!(BrownianPath::read_from(&buf[..20]).is_err());
    }

    #[test]
    fn stochastic_integral_special_cases() {
        let p = BrownianPath::sample(1.0, 0.01, 4).unwrap();
        let unit = stochastic_integral(&p, &NoiseIntensity::constant(1.0).unwrap());
        for (m, w) in unit.m_values.iter().zip(p.values()) {
            assert!((m - w).abs() < 1e-12);
        }
        let zero = stochastic_integral(&p, &NoiseIntensity::constant(0.0).unwrap());
        assert!(zero.m_values.iter().all(|&m| m == 0.0));
        assert!(zero.qv_values.iter().all(|&q| q == 0.0));
        let pd = stochastic_integral(&p, &NoiseIntensity::power_decay(1.0, 1.0).unwrap());
        assert_eq!(pd.m_values[0], 0.0);
        assert!(pd.qv_values.windows(2).all(|w| w[1] >= w[0]));
    }
}
