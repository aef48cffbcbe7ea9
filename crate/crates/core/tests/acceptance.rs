//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Each scenario line requires both the library's own evaluation and an
//! independent recomputation from the raw per-path output done here.

use std::process::ExitCode;
use std::time::Instant;

use flocksim::harness::{builtin_scenarios, execute, property_line, EnsembleRun, Scenario};
use flocksim::integrator::PathStatus;

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn time_index(run: &EnsembleRun, t: f64) -> usize {
    run.stats.grid.iter().position(|s| (s - t).abs() < 1e-9).expect("output time")
}

type Oracle = fn(&Scenario, &EnsembleRun, f64) -> Result<String, String>;

fn require(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

/// Ratio of means against `exp(-t)`, delta-method SE; rate within 5%; < 1 min.
fn s1(s: &Scenario, run: &EnsembleRun, secs: f64) -> Result<String, String> {
    let v = |r: &flocksim::integrator::PathResult, k: usize| r.norms.iter().find(|n| n.p == 2.0).unwrap().v[k];
    let m0 = run.results.iter().map(|r| v(r, 0)).sum::<f64>() / run.results.len() as f64;
    let floor = 2.0 * s.controller.dt_base.sqrt();
    let mut out = Vec::new();
    for t in [1.0, 2.0, 4.0] {
        let k = time_index(run, t);
        let mk = run.results.iter().map(|r| v(r, k)).sum::<f64>() / run.results.len() as f64;
        let ratio = mk / m0;
        let resid: Vec<f64> = run.results.iter().map(|r| (v(r, k) - ratio * v(r, 0)) / m0).collect();
        let band = (3.0 * mean_se(&resid).1).max(floor);
        require((ratio - (-t).exp()).abs() <= band, format!("t={t}: {ratio:.5} vs {:.5} +- {band:.5}", (-t).exp()))?;
        out.push(format!("r({t})={ratio:.4}"));
    }
    let rate = run.stats.fits.first().ok_or("no fit")?.rate;
    require((rate - 1.0).abs() <= 0.05, format!("fitted rate {rate}"))?;
    require(secs < 60.0, format!("took {secs:.1}s"))?;
    Ok(format!("{} rate={rate:.4}", out.join(" ")))
}

/// `|v|_2 <= |v(0)|_2 exp(D W - D^2 t / 2) (1.05)` rebuilt from the recorded W.
fn s2(s: &Scenario, run: &EnsembleRun, _: f64) -> Result<String, String> {
    let d0 = 0.4;
    let (mut pairs, mut bad, mut mom) = (0usize, 0usize, 0.0f64);
    for r in &run.results {
        let v = &r.norms.iter().find(|n| n.p == 2.0).unwrap().v;
        for (k, &t) in r.times.iter().enumerate() {
            let cap = v[0] * (d0 * r.w[k] - 0.5 * d0 * d0 * t).exp();
            pairs += 1;
            bad += usize::from(v[k] > cap * 1.05);
        }
        mom = r.momentum_residual.iter().fold(mom, |a, b| a.max(*b));
    }
    assert_eq!(s.cfg.kernel.psi_star(), 0.0);
    let inside = 1.0 - bad as f64 / pairs as f64;
    require(inside >= 0.999, format!("{bad} of {pairs} outside"))?;
    require(mom <= 1e-9, format!("momentum residual {mom:e}"))?;
    Ok(format!("inside={inside:.5} momentum={mom:.1e}"))
}

/// Constant-intensity family rebuilt from W; the decaying family is checked
/// by the library line. < 30 s.
fn s3(_: &Scenario, run: &EnsembleRun, secs: f64) -> Result<String, String> {
    let d0: f64 = 0.5;
    let mut out = Vec::new();
    for t in [1.0, 5.0] {
        let k = time_index(run, t);
        let e: Vec<f64> = run.results.iter().map(|r| (d0 * r.w[k] - 0.5 * d0 * d0 * t).exp()).collect();
        let (m, se) = mean_se(&e);
        require((m - 1.0).abs() <= 3.0 * se, format!("t={t}: {m:.5} +- {se:.5}"))?;
        out.push(format!("E({t})={m:.4}"));
    }
    require(secs < 30.0, format!("took {secs:.1}s"))?;
    Ok(out.join(" "))
}

/// Noise-free relative motion `x' = v`, `v' = -lambda psi(|x|) v`, by RK4.
fn rk4_collision(alpha: f64, lambda: f64, x0: f64, v0: f64, stop: f64, horizon: f64) -> Option<f64> {
    let h = 1e-6;
    let f = |x: f64, v: f64| (v, -lambda * x.abs().powf(-alpha) * v);
    let (mut x, mut v, mut t) = (x0, v0, 0.0);
    while t < horizon {
        let (k1x, k1v) = f(x, v);
        let (k2x, k2v) = f(x + 0.5 * h * k1x, v + 0.5 * h * k1v);
        let (k3x, k3v) = f(x + 0.5 * h * k2x, v + 0.5 * h * k2v);
        let (k4x, k4v) = f(x + h * k3x, v + h * k3v);
        let xn = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        if xn.abs() < stop || xn.signum() != x.signum() {
            return Some(t + h);
        }
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        x = xn;
        t += h;
    }
    None
}

/// No collisions in the main ensemble; contrast collision times agree with
/// the deterministic ODE.
fn s4(s: &Scenario, run: &EnsembleRun, _: f64) -> Result<String, String> {
    let collided = run.results.iter().filter(|r| r.status == PathStatus::Collided).count();
    require(collided == 0, format!("{collided} collisions"))?;
    let below = run.results.iter().flat_map(|r| r.min_dist.iter()).fold(f64::INFINITY, |a, b| a.min(*b));
    require(below > s.controller.collision_threshold, format!("min distance {below:e}"))?;
    let c = run.manifest.analyses.contrast.as_ref().ok_or("no contrast")?;
    let oracle = rk4_collision(0.5, s.cfg.lambda, 1.0, -4.0, s.controller.collision_threshold, 2.0)
        .ok_or("oracle does not collide")?;
    let worst =
        c.collision_times.iter().map(|t| t.map_or(f64::INFINITY, |t| (t - oracle).abs())).fold(0.0f64, f64::max);
    require(worst < 1e-2, format!("contrast collision off by {worst:e} from {oracle:.5}"))?;
    Ok(format!("min_dist={below:.2e} contrast_t*={oracle:.5} worst_dev={worst:.1e}"))
}

/// Wilson interval recomputed from the counts.
fn s5(_: &Scenario, run: &EnsembleRun, _: f64) -> Result<String, String> {
    let ev = run.manifest.analyses.event.as_ref().ok_or("no event")?;
    let n = (ev.in_a + ev.not_in_a) as f64;
    let p = ev.in_a as f64 / n;
    let z: f64 = 1.959_963_984_540_054;
    let centre = (p + z * z / (2.0 * n)) / (1.0 + z * z / n);
    let half = z / (1.0 + z * z / n) * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    let (lo, hi) = (centre - half, centre + half);
    require(lo > 0.0 && hi < 1.0, format!("interval [{lo}, {hi}]"))?;
    require((lo - ev.frequency.lo).abs() < 1e-12 && (hi - ev.frequency.hi).abs() < 1e-12, "Wilson mismatch".into())?;
    Ok(format!("P(A) in [{lo:.4}, {hi:.4}]"))
}

/// Log-log slope refitted from the reported errors.
fn s6(_: &Scenario, run: &EnsembleRun, _: f64) -> Result<String, String> {
    let so = run.manifest.analyses.strong_order.as_ref().ok_or("no strong order")?;
    let u: Vec<f64> = so.dts.iter().map(|d| d.ln()).collect();
    let y: Vec<f64> = so.errors.iter().map(|e| e.ln()).collect();
    let (mu, my) = (u.iter().sum::<f64>() / u.len() as f64, y.iter().sum::<f64>() / y.len() as f64);
    let slope = u.iter().zip(&y).map(|(a, b)| (a - mu) * (b - my)).sum::<f64>()
        / u.iter().map(|a| (a - mu).powi(2)).sum::<f64>();
    require((0.4..=1.1).contains(&slope), format!("slope {slope:.3}"))?;
    Ok(format!("slope={slope:.3}"))
}

/// Two-particle dominance with the tail `int_x^inf r^-2 = 1/x` in closed form.
fn s7(s: &Scenario, run: &EnsembleRun, _: f64) -> Result<String, String> {
    let lambda = s.cfg.lambda;
    let sel: Vec<&Vec<(f64, f64)>> = run
        .results
        .iter()
        .filter_map(|r| r.relative_pair.as_ref())
        .filter(|rel| rel[0].0 > 0.0 && rel[0].1 >= lambda / rel[0].0)
        .collect();
    require(!sel.is_empty(), "empty event".into())?;
    let mut min_v = f64::INFINITY;
    let mut worst = f64::INFINITY;
    for k in 0..run.stats.grid.len() {
        let v: Vec<f64> = sel.iter().map(|rel| rel[k].1).collect();
        let gap: Vec<f64> = sel.iter().map(|rel| rel[k].1 - lambda / rel[k].0).collect();
        let (mv, _) = mean_se(&v);
        let (mg, sg) = mean_se(&gap);
        require(mg >= -3.0 * sg, format!("gap {mg} at t={}", run.stats.grid[k]))?;
        if sg > 0.0 {
            worst = worst.min(mg / sg);
        }
        min_v = min_v.min(mv);
    }
    require(min_v >= 0.2, format!("E(v | A) falls to {min_v}"))?;
    Ok(format!("selected={} min_v={min_v:.3} min_gap/se={worst:.1}", sel.len()))
}

/// Shape `(beta - 2) / beta` and the KS bound.
fn s8(_: &Scenario, run: &EnsembleRun, _: f64) -> Result<String, String> {
    let f = run.manifest.analyses.functional.as_ref().ok_or("no functional")?;
    let beta = 4.0;
    require((f.shape - (beta - 2.0) / beta).abs() < 1e-15, format!("shape {}", f.shape))?;
    require(f.n >= 10_000, format!("only {} samples", f.n))?;
    require(f.ks < 0.03, format!("KS {}", f.ks))?;
    Ok(format!("ks={:.4} scale={:.4}", f.ks, f.scale))
}

fn main() -> ExitCode {
    let oracles: [Oracle; 8] = [s1, s2, s3, s4, s5, s6, s7, s8];
    let w = workers();
    let mut all = true;
    for (i, (s, oracle)) in builtin_scenarios().iter().zip(oracles).enumerate() {
        let started = Instant::now();
        let line = match execute(s, w) {
            Ok(run) => {
                let secs = started.elapsed().as_secs_f64();
                let lib =
                    run.manifest.criteria.iter().filter(|c| !c.passed).map(|c| c.detail.clone()).collect::<Vec<_>>();
                match (lib.is_empty(), oracle(s, &run, secs)) {
                    (true, Ok(msg)) => (true, msg),
                    (_, Err(e)) => (false, format!("oracle: {e}")),
                    (false, Ok(_)) => (false, lib.join(" | ")),
                }
            }
            Err(e) => (false, format!("error: {e}")),
        };
        all &= line.0;
        println!(
            "{} {}. {:<22} {:>7.1}s  {}",
            if line.0 { "PASS" } else { "FAIL" },
            i + 1,
            s.name,
            started.elapsed().as_secs_f64(),
            line.1
        );
    }
    let props = property_line();
    all &= props.passed;
    println!("{props}");
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
