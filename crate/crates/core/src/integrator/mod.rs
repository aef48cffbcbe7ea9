//! Euler–Maruyama integration of the centered particle system
//!
//! ```text
//! dx_i = v_i dt
//! dv_i = (lambda/N) sum_j psi(|x_i - x_j|) (v_j - v_i) dt + D(t) v_i dW
//! ```
//!
//! driven by one scalar Brownian path. Near the singularity the step is
//! shrunk and the path is refined by Brownian-bridge sampling; the kernel is
//! evaluated through a cutoff at the coarsest radius below the current
//! minimum distance, so the cutoff never alters an evaluated weight. When
//! the minimum distance falls below the collision threshold the trajectory
//! is frozen and the first collision is recorded.

mod controller;
mod sampler;
mod state;

pub use controller::{cutoff_sequence, StepController};
pub use sampler::InitialSampler;
pub use state::{decompose, lp_norm, macro_evolution, Decomposition, MacroState, SystemConfig, SystemState};

use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};
use crate::kernels::CutoffKernel;
use crate::paths::{bridge_sample, BrownianPath};
use crate::rng::{self, TAG_INIT};

use state::{dist, lp_norm_unchecked, sum_norm};

/// Alignment force `b_i = (lambda/N) sum_j psi_n(|x_i - x_j|)(v_j - v_i)`.
pub fn drift(state: &SystemState, cfg: &SystemConfig, cutoff: &CutoffKernel) -> Vec<f64> {
    let mut out = vec![0.0; state.x.len()];
    drift_into(state, cfg.lambda, cutoff, &mut out);
    out
}

/// Writes the drift into `out` and returns the largest row sum of the
/// alignment operator, `max_i (lambda/N) sum_j psi_n(|x_i - x_j|)`.
fn drift_into(state: &SystemState, lambda: f64, cutoff: &CutoffKernel, out: &mut [f64]) -> f64 {
    let (n, d) = (state.n, state.d);
    let scale = lambda / n as f64;
    out.iter_mut().for_each(|b| *b = 0.0);
    let mut rows = [0.0f64; 16];
    let mut rows_heap;
    let rows: &mut [f64] = if n <= rows.len() {
        &mut rows[..n]
    } else {
        rows_heap = vec![0.0; n];
        &mut rows_heap
    };
    for i in 0..n {
        let xi = &state.x[i * d..(i + 1) * d];
        for j in i + 1..n {
            let w = cutoff.eval(dist(xi, &state.x[j * d..(j + 1) * d]));
            rows[i] += w;
            rows[j] += w;
            for k in 0..d {
                let dv = w * (state.v[j * d + k] - state.v[i * d + k]);
                out[i * d + k] += dv;
                out[j * d + k] -= dv;
            }
        }
    }
    out.iter_mut().for_each(|b| *b *= scale);
    rows.iter().fold(0.0f64, |m, r| m.max(*r)) * scale
}

/// One Euler–Maruyama step with increment `dW` over `dt`.
pub fn em_step(
    state: &SystemState,
    dt: f64,
    dw: f64,
    cfg: &SystemConfig,
    cutoff: &CutoffKernel,
) -> Result<SystemState> {
    if !(dt > 0.0) {
        return Err(FlockError::config(format!("step size must be positive, got {dt}")));
    }
    let mut next = state.clone();
    let mut b = vec![0.0; state.x.len()];
    drift_into(state, cfg.lambda, cutoff, &mut b);
    advance(&mut next, &b, state.t + dt, dw, cfg)?;
    Ok(next)
}

fn advance(state: &mut SystemState, b: &[f64], t_new: f64, dw: f64, cfg: &SystemConfig) -> Result<()> {
    let dt = t_new - state.t;
    let d_now = cfg.noise.at(state.t);
    let gain = d_now * dw;
    for ((x, v), bk) in state.x.iter_mut().zip(state.v.iter_mut()).zip(b) {
        let vk = *v;
        *x += vk * dt;
        *v = vk + bk * dt + gain * vk;
    }
    state.t = t_new;
    state.w_now += dw;
    state.m_now += gain;
    state.qv_now = cfg.noise.qv(state.t);
    if state.x.iter().chain(&state.v).any(|a| !a.is_finite()) {
        return Err(FlockError::Numerical { t: state.t, msg: "non-finite coordinate after step".into() });
    }
    state.refresh_min_dist();
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathStatus {
    Completed,
    Collided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    /// Step time at which `min_dist` first fell below the threshold.
    pub time: f64,
    /// First output time at or after `time`.
    pub output_time: Option<f64>,
    pub pair: (usize, usize),
}

/// `|x(t)|_p`, `|v(t)|_p` and the running bound
/// `|x(0)|_p + sum_steps |v|_p dt` at the output times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSeries {
    pub p: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub x_bound: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub seed: u64,
    pub times: Vec<f64>,
    pub norms: Vec<NormSeries>,
    pub min_dist: Vec<f64>,
    pub w: Vec<f64>,
    pub m: Vec<f64>,
    pub qv: Vec<f64>,
    /// `|sum_i v_i|` and `|sum_i x_i|` at the output times.
    pub momentum_residual: Vec<f64>,
    pub center_residual: Vec<f64>,
    pub macro_init: MacroState,
    pub status: PathStatus,
    pub collision: Option<Collision>,
    /// First time `min_dist` dropped below each cutoff radius.
    pub level_crossings: Vec<Option<f64>>,
    /// `(x_1 - x_2, v_1 - v_2)` for two particles on a line.
    pub relative_pair: Option<Vec<(f64, f64)>>,
    pub steps: usize,
    pub bridge_draws: usize,
}

impl PathResult {
    pub fn norm(&self, p: f64) -> Option<&NormSeries> {
        self.norms.iter().find(|s| s.p == p)
    }

    /// `sup_{s <= t_k} |x(s)|_p` over the output grid.
    pub fn running_sup_x(&self, p: f64) -> Option<Vec<f64>> {
        let s = self.norm(p)?;
        let mut best = f64::NEG_INFINITY;
        Some(
            s.x.iter()
                .map(|&a| {
                    best = best.max(a);
                    best
                })
                .collect(),
        )
    }
}

fn validate_outputs(grid: &[f64], horizon: f64, p_list: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(FlockError::config("output grid is empty"));
    }
    if grid[0] < 0.0 || *grid.last().unwrap() > horizon * (1.0 + 1e-12) {
        return Err(FlockError::config(format!("output grid must lie in [0, {horizon}]")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FlockError::config("output grid must be strictly increasing"));
    }
    if let Some(p) = p_list.iter().find(|p| !(**p >= 2.0)) {
        return Err(FlockError::domain(format!("norm exponent must be >= 2, got {p}")));
    }
    Ok(())
}

/// Draws initial data, centers it, and integrates on a freshly sampled path.
pub fn simulate_path(
    cfg: &SystemConfig,
    controller: &StepController,
    horizon: f64,
    seed: u64,
    output_grid: &[f64],
    p_list: &[f64],
) -> Result<PathResult> {
    cfg.validate()?;
    controller.validate()?;
    let path = BrownianPath::sample(horizon, controller.dt_base.min(horizon), seed)?;
    let mut init_rng = rng::stream(&[seed, TAG_INIT]);
    let (x_raw, v_raw) = cfg.sampler.sample(cfg.n, cfg.d, &mut init_rng);
    let dec = decompose(&x_raw, &v_raw, cfg.d)?;
    integrate_on_path(cfg, controller, &path, dec.x, dec.v, dec.macro_state, output_grid, p_list)
}

struct Recorder<'a> {
    p_list: &'a [f64],
    res: PathResult,
    /// `|x(0)|_p + sum |v|_p dt` per p
    bounds: Vec<f64>,
}

impl Recorder<'_> {
    fn record(&mut self, t_out: f64, s: &SystemState) {
        let d = s.d;
        self.res.times.push(t_out);
        for (k, &p) in self.p_list.iter().enumerate() {
            let series = &mut self.res.norms[k];
            series.x.push(lp_norm_unchecked(&s.x, d, p));
            series.v.push(lp_norm_unchecked(&s.v, d, p));
            series.x_bound.push(self.bounds[k]);
        }
        self.res.min_dist.push(s.min_dist());
        self.res.w.push(s.w_now);
        self.res.m.push(s.m_now);
        self.res.qv.push(s.qv_now);
        self.res.momentum_residual.push(sum_norm(&s.v, d));
        self.res.center_residual.push(sum_norm(&s.x, d));
        if let Some(rel) = self.res.relative_pair.as_mut() {
            rel.push((s.x[0] - s.x[1], s.v[0] - s.v[1]));
        }
    }
}

/// Integrates from the given (centered) data along a given Brownian path.
/// The path is refined locally, by bridge sampling, wherever the step
/// controller asks for a step shorter than the grid spacing.
#[allow(clippy::too_many_arguments)]
pub fn integrate_on_path(
    cfg: &SystemConfig,
    controller: &StepController,
    path: &BrownianPath,
    x0: Vec<f64>,
    v0: Vec<f64>,
    macro_init: MacroState,
    output_grid: &[f64],
    p_list: &[f64],
) -> Result<PathResult> {
    let horizon = path.horizon();
    validate_outputs(output_grid, horizon, p_list)?;
    let d = cfg.d;
    let mut state = SystemState::new(x0, v0, d)?;
    if state.n != cfg.n {
        return Err(FlockError::config(format!("state has {} particles, config says {}", state.n, cfg.n)));
    }
    state.qv_now = cfg.noise.qv(0.0);
    let seed = path.seed();
    let times = path.times();
    let values = path.values();

    let mut rec = Recorder {
        p_list,
        bounds: p_list.iter().map(|&p| lp_norm_unchecked(&state.x, d, p)).collect(),
        res: PathResult {
            seed,
            times: Vec::with_capacity(output_grid.len()),
            norms: p_list
                .iter()
                .map(|&p| NormSeries { p, x: Vec::new(), v: Vec::new(), x_bound: Vec::new() })
                .collect(),
            min_dist: Vec::new(),
            w: Vec::new(),
            m: Vec::new(),
            qv: Vec::new(),
            momentum_residual: Vec::new(),
            center_residual: Vec::new(),
            macro_init,
            status: PathStatus::Completed,
            collision: None,
            level_crossings: vec![None; controller.cutoffs.len()],
            relative_pair: (cfg.n == 2 && d == 1).then(Vec::new),
            steps: 0,
            bridge_draws: 0,
        },
    };

    let eps = |t: f64| 1e-12 * (1.0 + t.abs());
    let mut out_i = 0;
    while out_i < output_grid.len() && output_grid[out_i] <= eps(0.0) {
        rec.record(output_grid[out_i], &state);
        out_i += 1;
    }
    if state.min_dist() < controller.collision_threshold {
        return Err(FlockError::config("initial data already closer than the collision threshold"));
    }

    let mut b = vec![0.0; state.x.len()];
    let mut node = 1;
    let mut right = (times[node.min(times.len() - 1)], values[node.min(values.len() - 1)]);
    while out_i < output_grid.len() {
        if node >= times.len() {
            return Err(FlockError::Grid(format!("output time {} lies beyond the path", output_grid[out_i])));
        }
        let level = controller.active_level(state.min_dist());
        let cutoff = CutoffKernel::new(cfg.kernel.clone(), controller.cutoffs[level])?;
        let relax_rate = drift_into(&state, cfg.lambda, &cutoff, &mut b);
        let v_norm2 = lp_norm_unchecked(&state.v, d, 2.0);
        let dt_eff = controller.step_size(state.min_dist(), v_norm2, relax_rate);

        let t_out = output_grid[out_i];
        let mut target = state.t + dt_eff;
        if t_out <= target + eps(target) {
            target = t_out;
        }
        let (t_new, w_new) = if target >= right.0 - eps(right.0) {
            let hit = right;
            node += 1;
            if node < times.len() {
                right = (times[node], values[node]);
            }
            hit
        } else {
            rec.res.bridge_draws += 1;
            (target, bridge_sample(seed, (state.t, state.w_now), right, target))
        };
        let dt = t_new - state.t;
        if !(dt > 0.0) {
            return Err(FlockError::Numerical { t: state.t, msg: format!("non-positive step {dt}") });
        }
        let v_norms: Vec<f64> = p_list.iter().map(|&p| lp_norm_unchecked(&state.v, d, p)).collect();
        let dw = w_new - state.w_now;
        advance(&mut state, &b, t_new, dw, cfg)?;
        state.w_now = w_new;
        rec.res.steps += 1;
        for (bound, vn) in rec.bounds.iter_mut().zip(&v_norms) {
            *bound += vn * dt;
        }

        let md = state.min_dist();
        for (k, &a) in controller.cutoffs.iter().enumerate() {
            if md >= a {
                break;
            }
            rec.res.level_crossings[k].get_or_insert(state.t);
        }
        let collided = md < controller.collision_threshold;
        if collided {
            rec.res.status = PathStatus::Collided;
            rec.res.collision = Some(Collision { time: state.t, output_time: None, pair: state.closest_pair() });
        }
        while out_i < output_grid.len() && (output_grid[out_i] - state.t).abs() <= eps(state.t) {
            rec.record(output_grid[out_i], &state);
            out_i += 1;
        }
        if collided {
            let at_step = rec.res.times.last().copied().filter(|&t| (t - state.t).abs() <= eps(state.t));
            if let Some(c) = rec.res.collision.as_mut() {
                c.output_time = at_step.or(output_grid.get(out_i).copied());
            }
            // frozen from here on
            while out_i < output_grid.len() {
                rec.record(output_grid[out_i], &state);
                out_i += 1;
            }
        }
    }
    Ok(rec.res)
}
