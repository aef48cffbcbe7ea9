use serde::{Deserialize, Serialize};

use crate::analysis::{mean_se, DecayModel, EnsembleStats};
use crate::integrator::{PathResult, PathStatus};

use super::run::AnalysisReport;
use super::scenario::{Expectation, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub scenario: String,
    pub expectation: String,
    pub passed: bool,
    /// Named measured values, in the order they were checked.
    pub measured: Vec<(String, f64)>,
    pub detail: String,
}

struct Outcome {
    passed: bool,
    measured: Vec<(String, f64)>,
    detail: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { passed: true, measured: Vec::new(), detail: Vec::new() }
    }

    fn value(&mut self, name: impl Into<String>, x: f64) {
        self.measured.push((name.into(), x));
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.passed = false;
            self.detail.push(what.into());
        }
    }

    fn missing(mut self, what: &str) -> Self {
        self.passed = false;
        self.detail.push(format!("{what} not available"));
        self
    }
}

fn index_of(grid: &[f64], t: f64) -> Option<usize> {
    grid.iter().position(|&s| (s - t).abs() <= 1e-9 * (1.0 + t.abs()))
}

/// Checks every declared expectation of `scenario`.
pub fn evaluate(
    scenario: &Scenario,
    stats: &EnsembleStats,
    report: &AnalysisReport,
    results: &[PathResult],
) -> Vec<CriterionOutcome> {
    scenario
        .expected
        .iter()
        .map(|e| {
            let o = check(scenario, e, stats, report, results);
            CriterionOutcome {
                scenario: scenario.name.clone(),
                expectation: e.to_string(),
                passed: o.passed,
                measured: o.measured,
                detail: o.detail.join("; "),
            }
        })
        .collect()
}

fn check(
    scenario: &Scenario,
    e: &Expectation,
    stats: &EnsembleStats,
    report: &AnalysisReport,
    results: &[PathResult],
) -> Outcome {
    let mut o = Outcome::new();
    match e {
        Expectation::ExpDecay { p, times, tol } => {
            let rate = scenario.cfg.lambda * scenario.cfg.kernel.psi_star();
            let floor = 2.0 * scenario.controller.dt_base.sqrt();
            let Some(s) = stats.norm(*p) else { return o.missing("norm series") };
            let m0 = s.mean_vnorm.mean[0];
            for &t in times {
                let Some(k) = index_of(&stats.grid, t) else {
                    o.require(false, format!("t={t} is not an output time"));
                    continue;
                };
                let ratio = s.mean_vnorm.mean[k] / m0;
                // delta method: residuals (y_i - r x_i) / mean(x)
                let resid: Vec<f64> = results
                    .iter()
                    .map(|r| {
                        let n = r.norm(*p).expect("recorded");
                        (n.v[k] - ratio * n.v[0]) / m0
                    })
                    .collect();
                let se = mean_se(&resid).1;
                let target = (-rate * t).exp();
                let band = (3.0 * se).max(floor);
                o.value(format!("ratio(t={t})"), ratio);
                o.value(format!("target(t={t})"), target);
                o.value(format!("band(t={t})"), band);
                o.require(
                    (ratio - target).abs() <= band,
                    format!("ratio at t={t} is {ratio:.5}, target {target:.5} +- {band:.5}"),
                );
            }
            match stats.fits.iter().find(|f| f.model == DecayModel::Exponential) {
                Some(f) => {
                    o.value("fitted_rate", f.rate);
                    o.require((f.rate - rate).abs() <= tol * rate, format!("fitted rate {:.4} vs {rate}", f.rate));
                }
                None => o = o.missing("exponential fit"),
            }
        }
        Expectation::Dominated { fraction, conservation } => {
            let Some(c) = &report.comparison else { return o.missing("comparison") };
            let inside = 1.0 - c.violations as f64 / c.pairs as f64;
            let residual = results.iter().flat_map(|r| r.momentum_residual.iter().copied()).fold(0.0f64, f64::max);
            o.value("fraction_inside", inside);
            o.value("max_ratio", c.max_ratio);
            o.value("max_momentum", residual);
            o.require(inside >= *fraction, format!("{} of {} pairs outside the band", c.violations, c.pairs));
            o.require(residual <= *conservation, format!("momentum residual {residual:e}"));
        }
        Expectation::UnitMean { z } => {
            if report.martingale.is_empty() {
                return o.missing("martingale");
            }
            for m in &report.martingale {
                for ((t, mean), se) in m.times.iter().zip(&m.mean).zip(&m.se) {
                    o.value(format!("mean[{}](t={t})", m.noise), *mean);
                    o.value(format!("se[{}](t={t})", m.noise), *se);
                    o.require(
                        (mean - 1.0).abs() <= z * se,
                        format!("{}: mean {mean:.5} at t={t}, se {se:.5}", m.noise),
                    );
                }
            }
        }
        Expectation::NoCollisions { upper } => {
            let f = &stats.collision_frequency;
            o.value("collided", f.count as f64);
            o.value("wilson_hi", f.hi);
            o.require(f.count == 0, format!("{} of {} paths collided", f.count, f.n));
            o.require(f.hi < *upper, format!("Wilson upper bound {:.5} >= {upper}", f.hi));
        }
        Expectation::ContrastCollides => {
            let Some(c) = &report.contrast else { return o.missing("contrast") };
            o.value("contrast_collided", c.collided as f64);
            o.value("contrast_paths", c.paths as f64);
            o.require(c.collided == c.paths, format!("{} of {} contrast paths collided", c.collided, c.paths));
        }
        Expectation::EventInterior { z } => {
            let Some(ev) = &report.event else { return o.missing("event") };
            o.value("p_a", ev.frequency.estimate);
            o.value("p_a_lo", ev.frequency.lo);
            o.value("p_a_hi", ev.frequency.hi);
            o.value("indeterminate", ev.indeterminate as f64);
            o.require(ev.frequency.lo > 0.0 && ev.frequency.hi < 1.0, "P(A) interval touches 0 or 1");
            match (ev.x_slope, ev.x_slope_se) {
                (Some(s), Some(se)) => {
                    o.value("x_slope", s);
                    o.value("x_slope_se", se);
                    o.require(s <= z * se, format!("conditional position slope {s:e} > {z} x {se:e}"));
                }
                _ => o = o.missing("conditional position slope"),
            }
            match &ev.v_fit {
                Some(f) => {
                    o.value("v_exponent", f.rate);
                    o.require(f.rate > 0.0, format!("velocity exponent {:.4} is not positive", f.rate));
                }
                None => o = o.missing("velocity fit"),
            }
        }
        Expectation::StrongSlope { lo, hi } => {
            let Some(s) = &report.strong_order else { return o.missing("strong order") };
            for (dt, err) in s.dts.iter().zip(&s.errors) {
                o.value(format!("error(dt={dt})"), *err);
            }
            o.value("slope", s.slope);
            o.require(s.slope >= *lo && s.slope <= *hi, format!("slope {:.3} outside [{lo}, {hi}]", s.slope));
        }
        Expectation::AppendixDominance { z, floor } => {
            let Some(a) = &report.appendix else { return o.missing("two-particle bound") };
            let Some(b) = &a.bound else { return o.missing("conditional series (empty event)") };
            o.value("selected", a.selected as f64);
            let mut worst_z = f64::INFINITY;
            let mut min_v = f64::INFINITY;
            for k in 0..b.times.len() {
                let (gap, se) = (b.mean_gap.mean[k], b.mean_gap.se[k]);
                if se > 0.0 {
                    worst_z = worst_z.min(gap / se);
                }
                o.require(gap >= -z * se, format!("gap {gap:.4} at t={} below -{z} SE", b.times[k]));
                min_v = min_v.min(b.mean_v.mean[k]);
            }
            o.value("min_gap_over_se", worst_z);
            o.value("min_mean_v", min_v);
            o.require(min_v >= *floor, format!("E(v | A) falls to {min_v:.4}"));
        }
        Expectation::KsBelow { limit } => {
            let Some(f) = &report.functional else { return o.missing("functional") };
            o.value("ks", f.ks);
            o.value("scale", f.scale);
            o.require(f.ks < *limit, format!("KS distance {:.4} >= {limit}", f.ks));
        }
    }
    if !o.passed && results.iter().any(|r| r.status == PathStatus::Collided) {
        o.detail.push("some paths collided".into());
    }
    o
}
