use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, appendix_a_mask, concave_envelope, event_a, fit_decay, flocking_metrics, inverse_gamma_scale_mle,
    ks_critical, ks_inverse_gamma, linear_fit, mean_se, EnsembleStats, EventAParams, EventClass, Frequency, RateFit,
    TwoParticleBound, Z95,
};
use crate::error::{FlockError, Result};
use crate::integrator::{
    decompose, integrate_on_path, lp_norm, simulate_path, PathResult, PathStatus, StepController, SystemConfig,
};
use crate::noise::NoiseIntensity;
use crate::paths::{stochastic_integral, BrownianPath};
use crate::rng::{self, mix, path_seed, TAG_CONTRAST, TAG_FUNCTIONAL, TAG_HOLDOUT, TAG_INIT, TAG_STRONG};

use super::criteria::{evaluate, CriterionOutcome};
use super::scenario::{Analysis, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleCheck {
    pub noise: NoiseIntensity,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCheck {
    pub p: f64,
    pub band: f64,
    pub pairs: usize,
    pub violations: usize,
    /// Largest `|v(t)|_p / V(t)` over all pairs with `V(t) > 0`.
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastCheck {
    pub paths: usize,
    pub collided: usize,
    pub collision_times: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCheck {
    pub params: EventAParams,
    pub in_a: usize,
    pub not_in_a: usize,
    pub indeterminate: usize,
    pub frequency: Frequency,
    /// Slope of `E(|x|_p | A)` over the last half of the horizon and its
    /// Monte Carlo standard error.
    pub x_slope: Option<f64>,
    pub x_slope_se: Option<f64>,
    /// Algebraic fit of `E(|v|_p | A)` over the default window.
    pub v_fit: Option<RateFit>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixCheck {
    pub selected: usize,
    pub bound: Option<TwoParticleBound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongOrderCheck {
    pub dts: Vec<f64>,
    /// `E | |v_dt(T)|_2 - |v(T)|_2 |` per step size.
    pub errors: Vec<f64>,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalCheck {
    pub shape: f64,
    pub scale: f64,
    pub n: usize,
    pub holdout: usize,
    pub ks: f64,
    /// Asymptotic KS critical value at level 0.001, for reference.
    pub critical_001: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub times: Vec<f64>,
    /// Sample mean of `F(X_t)` and its standard error.
    pub mean_of_envelope: Vec<f64>,
    pub se: Vec<f64>,
    /// `F(sample mean of X_t)`.
    pub envelope_of_mean: Vec<f64>,
    /// `min_t [F(mean X_t) - mean F(X_t)]`; nonnegative by concavity.
    pub min_gap: f64,
}

/// Outputs of the requested analysis passes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub martingale: Vec<MartingaleCheck>,
    pub comparison: Option<ComparisonCheck>,
    pub contrast: Option<ContrastCheck>,
    pub event: Option<EventCheck>,
    pub appendix: Option<AppendixCheck>,
    pub strong_order: Option<StrongOrderCheck>,
    pub functional: Option<FunctionalCheck>,
    pub envelope: Option<EnvelopeCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: Scenario,
    pub version: String,
    pub master_seed: u64,
    /// Informational; every other field is independent of timing and of the
    /// worker count.
    pub wall_time_s: f64,
    pub criteria: Vec<CriterionOutcome>,
    pub analyses: AnalysisReport,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

/// Everything a run produces, including the per-path results.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub stats: EnsembleStats,
    pub manifest: RunManifest,
    pub results: Vec<PathResult>,
}

/// Maps `f` over `0..n` on the pool, keeping index order. The first error by
/// index wins, so failures are reported deterministically.
fn par_indexed<T: Send>(pool: &rayon::ThreadPool, n: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let out: Vec<Result<T>> = pool.install(|| (0..n).into_par_iter().map(&f).collect());
    out.into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| FlockError::Path { index: i, source: Box::new(e) }))
        .collect()
}

fn grid_index(grid: &[f64], t: f64) -> Result<usize> {
    grid.iter()
        .position(|&s| (s - t).abs() <= 1e-9 * (1.0 + t.abs()))
        .ok_or_else(|| FlockError::Grid(format!("t={t} is not an output time")))
}

pub fn run_ensemble(scenario: &Scenario, workers: usize) -> Result<(EnsembleStats, RunManifest)> {
    let run = execute(scenario, workers)?;
    Ok((run.stats, run.manifest))
}

/// Simulates the ensemble, runs every requested analysis and evaluates the
/// declared expectations.
pub fn execute(scenario: &Scenario, workers: usize) -> Result<EnsembleRun> {
    let started = Instant::now();
    scenario.validate()?;
    if scenario.n_paths == 0 {
        return Err(FlockError::EmptyEnsemble);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| FlockError::config(format!("cannot start worker pool: {e}")))?;
    let grid = scenario.output_grid();
    let seed = scenario.master_seed;
    let results = par_indexed(&pool, scenario.n_paths, |i| {
        simulate_path(
            &scenario.cfg,
            &scenario.controller,
            scenario.horizon,
            path_seed(seed, i as u64),
            &grid,
            &scenario.p_list,
        )
    })?;

    let mut report = AnalysisReport::default();
    let mut mask: Option<Vec<Option<bool>>> = None;
    let mut fits = Vec::new();
    for a in &scenario.analyses {
        match a {
            Analysis::Martingale { times, extra_noise } => {
                report.martingale = martingale_checks(scenario, &pool, &results, times, extra_noise)?;
            }
            Analysis::Comparison { p, band } => {
                report.comparison = Some(comparison_check(scenario, &results, *p, *band)?)
            }
            Analysis::Contrast { n, d, kernel, noise, sampler, paths, horizon } => {
                let cfg = SystemConfig {
                    n: *n,
                    d: *d,
                    lambda: scenario.cfg.lambda,
                    kernel: kernel.clone(),
                    noise: *noise,
                    sampler: *sampler,
                };
                report.contrast = Some(contrast_check(&pool, &cfg, &scenario.controller, seed, *paths, *horizon)?);
            }
            Analysis::EventA { p, beta, q, constant, t_trunc, c_lil, ext_dt } => {
                let d0 = match scenario.cfg.noise {
                    NoiseIntensity::Constant { d0 } => d0,
                    _ => return Err(FlockError::WrongScenario("event analysis needs a constant intensity".into())),
                };
                let params = EventAParams {
                    beta: *beta,
                    q: *q,
                    lambda: scenario.cfg.lambda,
                    d: d0,
                    t_trunc: *t_trunc,
                    c_lil: *c_lil,
                    constant: *constant,
                };
                let (check, flags) = event_check(scenario, &pool, &results, *p, params, *ext_dt)?;
                report.event = Some(check);
                mask = Some(flags);
            }
            Analysis::AppendixA => {
                let sel = appendix_a_mask(&results, &scenario.cfg.kernel, scenario.cfg.lambda)?;
                let bound =
                    match analysis::two_particle_lower_bound(&results, &scenario.cfg.kernel, scenario.cfg.lambda, &sel)
                    {
                        Ok(b) => Some(b),
                        Err(FlockError::EmptyMask) => None,
                        Err(e) => return Err(e),
                    };
                report.appendix = Some(AppendixCheck { selected: sel.iter().filter(|b| **b).count(), bound });
                if mask.is_none() {
                    mask = Some(sel.into_iter().map(Some).collect());
                }
            }
            Analysis::StrongOrder { dts, paths } => {
                report.strong_order = Some(strong_order_check(scenario, &pool, dts, *paths)?);
            }
            Analysis::Functional { beta, dt, t_trunc, holdout } => {
                report.functional = Some(functional_check(scenario, &pool, *beta, *dt, *t_trunc, *holdout)?);
            }
            Analysis::Envelope { p, a, alpha } => {
                report.envelope = Some(envelope_check(scenario, &results, *p, *a, *alpha)?)
            }
            Analysis::RateFit { .. } => {}
        }
    }

    let mut stats = flocking_metrics(&results, mask.as_deref())?;
    for a in &scenario.analyses {
        if let Analysis::RateFit { p, model, window } = a {
            let series = stats.norm(*p).ok_or_else(|| FlockError::config(format!("p={p} not recorded")))?;
            let w = window.unwrap_or_else(|| analysis::default_window(scenario.horizon));
            fits.push(fit_decay(&grid, &series.mean_vnorm.mean, *model, w)?);
        }
    }
    stats.fits = fits;

    let criteria = evaluate(scenario, &stats, &report, &results);
    let manifest = RunManifest {
        scenario: scenario.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: seed,
        wall_time_s: started.elapsed().as_secs_f64(),
        criteria,
        analyses: report,
    };
    Ok(EnsembleRun { stats, manifest, results })
}

/// The Brownian path a scenario path was driven by.
fn scenario_path(scenario: &Scenario, index: usize) -> Result<BrownianPath> {
    let dt = scenario.controller.dt_base.min(scenario.horizon);
    BrownianPath::sample(scenario.horizon, dt, path_seed(scenario.master_seed, index as u64))
}

fn martingale_checks(
    scenario: &Scenario,
    pool: &rayon::ThreadPool,
    results: &[PathResult],
    times: &[f64],
    extra: &[NoiseIntensity],
) -> Result<Vec<MartingaleCheck>> {
    let grid = &results[0].times;
    let idx = times.iter().map(|&t| grid_index(grid, t)).collect::<Result<Vec<_>>>()?;
    let summarize = |noise: &NoiseIntensity, rows: Vec<Vec<f64>>| {
        let (mean, se) = (0..times.len()).map(|k| mean_se(&rows.iter().map(|r| r[k]).collect::<Vec<_>>())).unzip();
        MartingaleCheck { noise: *noise, times: times.to_vec(), mean, se }
    };
    let own: Vec<Vec<f64>> = results
        .iter()
        .map(|r| idx.iter().map(|&k| analysis::exp_martingale_value(r.m[k], r.qv[k])).collect())
        .collect();
    let mut out = vec![summarize(&scenario.cfg.noise, own)];
    for noise in extra {
        let rows = par_indexed(pool, results.len(), |i| {
            let track = stochastic_integral(&scenario_path(scenario, i)?, noise);
            times.iter().map(|&t| analysis::exp_martingale(&track, t)).collect::<Result<Vec<f64>>>()
        })?;
        out.push(summarize(noise, rows));
    }
    Ok(out)
}

fn comparison_check(scenario: &Scenario, results: &[PathResult], p: f64, band: f64) -> Result<ComparisonCheck> {
    let psi_star = scenario.cfg.kernel.psi_star();
    let lambda = scenario.cfg.lambda;
    let (mut pairs, mut violations, mut max_ratio) = (0usize, 0usize, 0.0f64);
    for r in results {
        let s = r.norm(p).ok_or_else(|| FlockError::config(format!("p={p} not recorded")))?;
        let v0 = s.v[0];
        for (k, &t) in r.times.iter().enumerate() {
            let bound = analysis::comparison_value(v0, psi_star, lambda, t, r.m[k], r.qv[k]);
            pairs += 1;
            if s.v[k] > bound * (1.0 + band) {
                violations += 1;
            }
            if bound > 0.0 {
                max_ratio = max_ratio.max(s.v[k] / bound);
            }
        }
    }
    Ok(ComparisonCheck { p, band, pairs, violations, max_ratio })
}

fn contrast_check(
    pool: &rayon::ThreadPool,
    cfg: &SystemConfig,
    controller: &StepController,
    master: u64,
    paths: usize,
    horizon: f64,
) -> Result<ContrastCheck> {
    let seed = mix(&[master, TAG_CONTRAST]);
    let grid = [0.0, horizon];
    let res = par_indexed(pool, paths, |i| {
        simulate_path(cfg, controller, horizon, path_seed(seed, i as u64), &grid, &[2.0])
    })?;
    Ok(ContrastCheck {
        paths,
        collided: res.iter().filter(|r| r.status == PathStatus::Collided).count(),
        collision_times: res.iter().map(|r| r.collision.as_ref().map(|c| c.time)).collect(),
    })
}

/// Per-path least-squares slope over `[lo, hi]`; linear in the data, so the
/// slope of the mean is the mean of the slopes.
fn slope_weights(grid: &[f64], lo: f64, hi: f64) -> Vec<(usize, f64)> {
    let idx: Vec<usize> = (0..grid.len()).filter(|&k| grid[k] >= lo - 1e-12 && grid[k] <= hi + 1e-12).collect();
    let mean = idx.iter().map(|&k| grid[k]).sum::<f64>() / idx.len() as f64;
    let sxx: f64 = idx.iter().map(|&k| (grid[k] - mean).powi(2)).sum();
    idx.iter().map(|&k| (k, (grid[k] - mean) / sxx)).collect()
}

fn event_check(
    scenario: &Scenario,
    pool: &rayon::ThreadPool,
    results: &[PathResult],
    p: f64,
    params: EventAParams,
    ext_dt: f64,
) -> Result<(EventCheck, Vec<Option<bool>>)> {
    params.validate()?;
    let t_trunc = params.truncation();
    let classes = par_indexed(pool, results.len(), |i| {
        let s = results[i].norm(p).ok_or_else(|| FlockError::config(format!("p={p} not recorded")))?;
        let mut path = scenario_path(scenario, i)?;
        if t_trunc > path.horizon() {
            path.extend(t_trunc, ext_dt)?;
        }
        Ok(event_a(s.x[0], s.v[0], &params, &path)?.class)
    })?;
    let flags: Vec<Option<bool>> = classes.iter().map(|c| c.as_flag()).collect();
    let count = |c: EventClass| classes.iter().filter(|k| **k == c).count();
    let (in_a, not_in_a, indeterminate) =
        (count(EventClass::InA), count(EventClass::NotInA), count(EventClass::Indeterminate));
    let frequency = Frequency::wilson(in_a, in_a + not_in_a, Z95);

    let grid = &results[0].times;
    let mut check = EventCheck {
        params,
        in_a,
        not_in_a,
        indeterminate,
        frequency,
        x_slope: None,
        x_slope_se: None,
        v_fit: None,
        note: None,
    };
    if in_a == 0 {
        check.note = Some("no path classified in the event".into());
        return Ok((check, flags));
    }
    let weights = slope_weights(grid, 0.5 * scenario.horizon, scenario.horizon);
    let slopes: Vec<f64> = results
        .iter()
        .zip(&flags)
        .filter(|(_, f)| **f == Some(true))
        .map(|(r, _)| {
            let x = &r.norm(p).expect("checked above").x;
            weights.iter().map(|&(k, w)| w * x[k]).sum()
        })
        .collect();
    let (slope, se) = mean_se(&slopes);
    check.x_slope = Some(slope);
    check.x_slope_se = Some(se);
    let (cond_v, _) = analysis::conditional(results, p, &flags, true)?;
    match fit_decay(grid, &cond_v.mean, analysis::DecayModel::Algebraic, analysis::default_window(scenario.horizon)) {
        Ok(f) => check.v_fit = Some(f),
        Err(e) => check.note = Some(format!("velocity fit failed: {e}")),
    }
    Ok((check, flags))
}

fn strong_order_check(
    scenario: &Scenario,
    pool: &rayon::ThreadPool,
    dts: &[f64],
    paths: usize,
) -> Result<StrongOrderCheck> {
    let cfg = &scenario.cfg;
    let (c, d0) = match (&cfg.kernel, &cfg.noise) {
        (crate::kernels::Kernel::Constant { c }, NoiseIntensity::Constant { d0 }) => (*c, *d0),
        _ => return Err(FlockError::WrongScenario("strong-order analysis needs constant kernel and intensity".into())),
    };
    let horizon = scenario.horizon;
    let fine = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let strides = dts
        .iter()
        .map(|&dt| {
            let s = (dt / fine).round();
            if (s * fine - dt).abs() > 1e-9 * dt {
                Err(FlockError::config(format!("step {dt} is not a multiple of the finest step {fine}")))
            } else {
                Ok(s as usize)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let base = mix(&[scenario.master_seed, TAG_STRONG]);
    let rate = cfg.lambda * c;
    let errors_per_path = par_indexed(pool, paths, |i| {
        let seed = path_seed(base, i as u64);
        let path = BrownianPath::sample(horizon, fine, seed)?;
        let (x_raw, v_raw) = cfg.sampler.sample(cfg.n, cfg.d, &mut rng::stream(&[seed, TAG_INIT]));
        let dec = decompose(&x_raw, &v_raw, cfg.d)?;
        let v0 = lp_norm(&dec.v, cfg.d, 2.0)?;
        let w_t = *path.values().last().expect("nonempty path");
        // centered velocities solve a scalar geometric Brownian motion
        let exact = v0 * (-(rate + 0.5 * d0 * d0) * horizon + d0 * w_t).exp();
        strides
            .iter()
            .zip(dts)
            .map(|(&stride, &dt)| {
                let coarse = path.coarsen(stride);
                let ctl = StepController::fixed(dt)?;
                let r = integrate_on_path(
                    cfg,
                    &ctl,
                    &coarse,
                    dec.x.clone(),
                    dec.v.clone(),
                    dec.macro_state.clone(),
                    &[horizon],
                    &[2.0],
                )?;
                Ok((r.norms[0].v[0] - exact).abs())
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let errors: Vec<f64> =
        (0..dts.len()).map(|k| errors_per_path.iter().map(|e| e[k]).sum::<f64>() / paths as f64).collect();
    let lx: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let slope = linear_fit(&lx, &ly)?.slope;
    Ok(StrongOrderCheck { dts: dts.to_vec(), errors, slope })
}

fn functional_check(
    scenario: &Scenario,
    pool: &rayon::ThreadPool,
    beta: f64,
    dt: f64,
    t_trunc: f64,
    holdout: usize,
) -> Result<FunctionalCheck> {
    let d0 = match scenario.cfg.noise {
        NoiseIntensity::Constant { d0 } => d0,
        _ => return Err(FlockError::WrongScenario("functional analysis needs a constant intensity".into())),
    };
    let params = EventAParams::new(beta, 2.0, scenario.cfg.lambda, d0)?;
    let (drift, vol) = (params.drift_coef(), params.vol_coef());
    let sample_from = |master: u64, n: usize| {
        par_indexed(pool, n, |i| {
            let path = BrownianPath::sample(t_trunc, dt, path_seed(master, i as u64))?;
            Ok(analysis::exp_functional(&path, drift, vol, t_trunc, 0.0)?.value)
        })
    };
    let n = scenario.n_paths;
    let mut sample = sample_from(mix(&[scenario.master_seed, TAG_FUNCTIONAL]), n)?;
    let held = sample_from(mix(&[scenario.master_seed, TAG_HOLDOUT]), holdout)?;
    let shape = (beta - 2.0) / beta;
    let scale = inverse_gamma_scale_mle(&held, shape)?;
    let ks = ks_inverse_gamma(&mut sample, shape, scale)?;
    Ok(FunctionalCheck { shape, scale, n, holdout, ks, critical_001: ks_critical(n, 1e-3) })
}

fn envelope_check(scenario: &Scenario, results: &[PathResult], p: f64, a: f64, alpha: f64) -> Result<EnvelopeCheck> {
    let lambda = scenario.cfg.lambda;
    let sups = results
        .iter()
        .map(|r| r.running_sup_x(p).ok_or_else(|| FlockError::config(format!("p={p} not recorded"))))
        .collect::<Result<Vec<_>>>()?;
    let grid = &results[0].times;
    let mut out = EnvelopeCheck {
        times: Vec::new(),
        mean_of_envelope: Vec::new(),
        se: Vec::new(),
        envelope_of_mean: Vec::new(),
        min_gap: f64::MAX,
    };
    for (k, &t) in grid.iter().enumerate().filter(|(_, t)| **t > 0.0) {
        let vals = sups.iter().map(|s| concave_envelope(t, a, alpha, lambda, s[k])).collect::<Result<Vec<f64>>>()?;
        let (m, se) = mean_se(&vals);
        let mean_x = sups.iter().map(|s| s[k]).sum::<f64>() / sups.len() as f64;
        let at_mean = concave_envelope(t, a, alpha, lambda, mean_x)?;
        out.times.push(t);
        out.mean_of_envelope.push(m);
        out.se.push(se);
        out.envelope_of_mean.push(at_mean);
        out.min_gap = out.min_gap.min(at_mean - m);
    }
    Ok(out)
}
