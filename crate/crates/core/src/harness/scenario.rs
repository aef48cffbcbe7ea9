use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{DecayModel, EventConstant};
use crate::error::{FlockError, Result};
use crate::integrator::{InitialSampler, StepController, SystemConfig};
use crate::kernels::Kernel;
use crate::noise::NoiseIntensity;

/// A requested post-processing pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Analysis {
    /// Decay fit of the ensemble mean of `|v|_p`.
    RateFit { p: f64, model: DecayModel, window: Option<(f64, f64)> },
    /// Mean of the exponential martingale at `times`, for the scenario noise
    /// and for each extra intensity (computed on the same Brownian paths).
    Martingale { times: Vec<f64>, extra_noise: Vec<NoiseIntensity> },
    /// Pathwise check `|v(t)|_p <= V(t) (1 + band)`.
    Comparison { p: f64, band: f64 },
    /// A second ensemble with its own system, reusing the scenario coupling
    /// and controller.
    Contrast {
        n: usize,
        d: usize,
        kernel: Kernel,
        noise: NoiseIntensity,
        sampler: InitialSampler,
        paths: usize,
        horizon: f64,
    },
    /// Event classification on the extended Brownian path, conditional
    /// statistics given the event.
    EventA { p: f64, beta: f64, q: f64, constant: EventConstant, t_trunc: Option<f64>, c_lil: Option<f64>, ext_dt: f64 },
    /// Two-particle lower bound conditioned on `v(0) >= lambda int psi`.
    AppendixA,
    /// Strong error against the closed-form solution for a constant kernel
    /// and constant intensity, on paths coarsened from the finest step.
    StrongOrder { dts: Vec<f64>, paths: usize },
    /// Law of the exponential functional against an inverse gamma with
    /// shape `(beta-2)/beta` and scale fitted on held-out paths.
    Functional { beta: f64, dt: f64, t_trunc: f64, holdout: usize },
    /// Jensen gap of the concave envelope evaluated at `sup_s |x(s)|_p`.
    Envelope { p: f64, a: f64, alpha: f64 },
}

/// A declared acceptance band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Expectation {
    /// `E|v(t)|_p / E|v(0)|_p` within `max(3 SE, 2 sqrt(dt))` of
    /// `exp(-lambda psi_* t)` and the fitted exponential rate within `tol`
    /// (relative) of `lambda psi_*`.
    ExpDecay { p: f64, times: Vec<f64>, tol: f64 },
    /// Fraction of (path, time) pairs inside the comparison band at least
    /// `fraction`, and `|sum v_i| <= conservation` everywhere.
    Dominated { fraction: f64, conservation: f64 },
    /// Martingale means within `z` standard errors of one.
    UnitMean { z: f64 },
    /// No collisions and a Wilson upper bound below `upper`.
    NoCollisions { upper: f64 },
    /// Every path of the contrast ensemble collides.
    ContrastCollides,
    /// `P(A)` interval inside `(0, 1)`, no upward trend of the conditional
    /// `E(|x|_p | A)` over the last half window (slope `<= z SE`), positive
    /// algebraic decay exponent of `E(|v|_p | A)`.
    EventInterior { z: f64 },
    /// Log-log slope of the strong error in `[lo, hi]`.
    StrongSlope { lo: f64, hi: f64 },
    /// `E(v | A) >= lambda E(tail(x) | A) - z SE` and `E(v | A) >= floor`.
    AppendixDominance { z: f64, floor: f64 },
    /// Kolmogorov–Smirnov distance below `limit`.
    KsBelow { limit: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub cfg: SystemConfig,
    pub controller: StepController,
    pub horizon: f64,
    /// Output grid spacing; the grid is `0, dt, 2 dt, ..., horizon`.
    pub output_dt: f64,
    pub p_list: Vec<f64>,
    pub n_paths: usize,
    pub master_seed: u64,
    pub analyses: Vec<Analysis>,
    pub expected: Vec<Expectation>,
}

impl Scenario {
    pub fn output_grid(&self) -> Vec<f64> {
        let k = (self.horizon / self.output_dt - 1e-9).ceil().max(1.0) as usize;
        let mut g: Vec<f64> = (0..k).map(|i| i as f64 * self.output_dt).collect();
        g.push(self.horizon);
        g
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        self.controller.validate()?;
        if self.name.trim().is_empty() || self.name.contains(char::is_whitespace) {
            return Err(FlockError::config("scenario name must be a nonempty word"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(FlockError::config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.output_dt > 0.0 && self.output_dt <= self.horizon) {
            return Err(FlockError::config(format!("output_dt must lie in (0, horizon], got {}", self.output_dt)));
        }
        if self.p_list.is_empty() || self.p_list.iter().any(|p| !(*p >= 2.0)) {
            return Err(FlockError::config("p must be a nonempty list of exponents >= 2"));
        }
        let has_p = |p: f64| self.p_list.contains(&p);
        let const_noise = matches!(self.cfg.noise, NoiseIntensity::Constant { .. });
        for a in &self.analyses {
            match a {
                Analysis::RateFit { p, .. } | Analysis::Comparison { p, .. } | Analysis::Envelope { p, .. }
                    if !has_p(*p) =>
                {
                    return Err(FlockError::config(format!("analysis `{a}` uses p={p}, which is not recorded")));
                }
                Analysis::EventA { p, beta, q, .. } => {
                    if !has_p(*p) {
                        return Err(FlockError::config(format!("event analysis uses p={p}, which is not recorded")));
                    }
                    if !const_noise {
                        return Err(FlockError::WrongScenario("event analysis needs a constant intensity".into()));
                    }
                    if !(*beta > 2.0) || !(*q > 1.0) {
                        return Err(FlockError::config("event analysis needs beta > 2 and q > 1"));
                    }
                }
                Analysis::AppendixA if !(self.cfg.n == 2 && self.cfg.d == 1) => {
                    return Err(FlockError::WrongScenario("two-particle analysis needs N=2, d=1".into()));
                }
                Analysis::StrongOrder { dts, paths } => {
                    if !matches!(self.cfg.kernel, Kernel::Constant { .. }) || !const_noise {
                        return Err(FlockError::WrongScenario(
                            "strong-order analysis needs a constant kernel and a constant intensity".into(),
                        ));
                    }
                    if dts.len() < 2 || *paths == 0 || dts.iter().any(|d| !(*d > 0.0 && *d <= self.horizon)) {
                        return Err(FlockError::config("strong-order analysis needs two or more steps and paths > 0"));
                    }
                }
                Analysis::Functional { beta, dt, t_trunc, .. } => {
                    if !const_noise {
                        return Err(FlockError::WrongScenario("functional analysis needs a constant intensity".into()));
                    }
                    if !(*beta > 2.0) || !(*dt > 0.0 && dt < t_trunc) {
                        return Err(FlockError::config("functional analysis needs beta > 2 and 0 < dt < t_trunc"));
                    }
                }
                Analysis::Contrast { n, d, sampler, paths, horizon, .. } => {
                    sampler.check(*n, *d)?;
                    if *paths == 0 || !(*horizon > 0.0) {
                        return Err(FlockError::config("contrast needs paths > 0 and horizon > 0"));
                    }
                }
                Analysis::Envelope { a, alpha, .. } if !(*a > 1.0 && *alpha > 0.0 && *alpha < 1.0) => {
                    return Err(FlockError::config("envelope needs a > 1 and alpha in (0, 1)"));
                }
                _ => {}
            }
        }
        let needs = |pred: fn(&Analysis) -> bool, what: &str| -> Result<()> {
            if self.analyses.iter().any(pred) {
                Ok(())
            } else {
                Err(FlockError::config(format!("expectation needs a {what} analysis")))
            }
        };
        for e in &self.expected {
            match e {
                Expectation::ExpDecay { p, .. } => {
                    if !self
                        .analyses
                        .iter()
                        .any(|a| matches!(a, Analysis::RateFit { p: q, model: DecayModel::Exponential, .. } if q == p))
                    {
                        return Err(FlockError::config(format!("exp_decay needs an exponential rate_fit for p={p}")));
                    }
                }
                Expectation::Dominated { .. } => needs(|a| matches!(a, Analysis::Comparison { .. }), "comparison")?,
                Expectation::UnitMean { .. } => needs(|a| matches!(a, Analysis::Martingale { .. }), "martingale")?,
                Expectation::ContrastCollides => needs(|a| matches!(a, Analysis::Contrast { .. }), "contrast")?,
                Expectation::EventInterior { .. } => needs(|a| matches!(a, Analysis::EventA { .. }), "event_a")?,
                Expectation::StrongSlope { .. } => {
                    needs(|a| matches!(a, Analysis::StrongOrder { .. }), "strong_order")?
                }
                Expectation::AppendixDominance { .. } => needs(|a| matches!(a, Analysis::AppendixA), "appendix_a")?,
                Expectation::KsBelow { .. } => needs(|a| matches!(a, Analysis::Functional { .. }), "functional")?,
                Expectation::NoCollisions { .. } => {}
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// `kind key=value ...` syntax for analyses and expectations

struct Args {
    kind: String,
    map: BTreeMap<String, String>,
    source: String,
}

impl Args {
    fn parse(s: &str) -> Result<Args> {
        let mut tokens = s.split_whitespace();
        let kind = tokens.next().ok_or_else(|| FlockError::config("empty analysis entry"))?.to_string();
        let mut map = BTreeMap::new();
        for t in tokens {
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| FlockError::config(format!("expected key=value, got `{t}` in `{s}`")))?;
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(FlockError::config(format!("repeated key `{k}` in `{s}`")));
            }
        }
        Ok(Args { kind, map, source: s.to_string() })
    }

    fn raw(&mut self, key: &str) -> Result<String> {
        self.map.remove(key).ok_or_else(|| FlockError::config(format!("missing `{key}` in `{}`", self.source)))
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let raw = self.raw(key)?;
        raw.parse().map_err(|_| FlockError::config(format!("bad value `{raw}` for `{key}` in `{}`", self.source)))
    }

    fn opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        if self.map.contains_key(key) {
            self.get(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let raw = self.map.remove(key).unwrap_or_default();
        raw.split(',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse().map_err(|_| FlockError::config(format!("bad list item `{t}` for `{key}`"))))
            .collect()
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(FlockError::config(format!("unknown key `{k}` in `{}`", self.source))),
            None => Ok(()),
        }
    }
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn model_name(m: DecayModel) -> &'static str {
    match m {
        DecayModel::Exponential => "exponential",
        DecayModel::Algebraic => "algebraic",
    }
}

fn parse_model(s: &str) -> Result<DecayModel> {
    match s {
        "exponential" => Ok(DecayModel::Exponential),
        "algebraic" => Ok(DecayModel::Algebraic),
        _ => Err(FlockError::config(format!("unknown decay model `{s}`"))),
    }
}

fn parse_window(s: &str) -> Result<(f64, f64)> {
    let bad = || FlockError::config(format!("window must be lo:hi, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Analysis::RateFit { p, model, window } => {
                write!(f, "rate_fit p={p} model={}", model_name(*model))?;
                if let Some((lo, hi)) = window {
                    write!(f, " window={lo}:{hi}")?;
                }
                Ok(())
            }
            Analysis::Martingale { times, extra_noise } => {
                write!(f, "martingale times={}", join(times))?;
                if !extra_noise.is_empty() {
                    write!(f, " extra_noise={}", join(extra_noise))?;
                }
                Ok(())
            }
            Analysis::Comparison { p, band } => write!(f, "comparison p={p} band={band}"),
            Analysis::Contrast { n, d, kernel, noise, sampler, paths, horizon } => write!(
                f,
                "contrast n={n} d={d} kernel={kernel} noise={noise} sampler={sampler} paths={paths} horizon={horizon}"
            ),
            Analysis::EventA { p, beta, q, constant, t_trunc, c_lil, ext_dt } => {
                let c = match constant {
                    EventConstant::Derived => "derived",
                    EventConstant::Stated => "stated",
                };
                write!(f, "event_a p={p} beta={beta} q={q} constant={c} ext_dt={ext_dt}")?;
                if let Some(t) = t_trunc {
                    write!(f, " t_trunc={t}")?;
                }
                if let Some(c) = c_lil {
                    write!(f, " c_lil={c}")?;
                }
                Ok(())
            }
            Analysis::AppendixA => write!(f, "appendix_a"),
            Analysis::StrongOrder { dts, paths } => write!(f, "strong_order dts={} paths={paths}", join(dts)),
            Analysis::Functional { beta, dt, t_trunc, holdout } => {
                write!(f, "functional beta={beta} dt={dt} t_trunc={t_trunc} holdout={holdout}")
            }
            Analysis::Envelope { p, a, alpha } => write!(f, "envelope p={p} a={a} alpha={alpha}"),
        }
    }
}

impl FromStr for Analysis {
    type Err = FlockError;

    fn from_str(s: &str) -> Result<Self> {
        let mut a = Args::parse(s)?;
        let out = match a.kind.as_str() {
            "rate_fit" => Analysis::RateFit {
                p: a.get("p")?,
                model: parse_model(&a.raw("model")?)?,
                window: a.opt::<String>("window")?.map(|w| parse_window(&w)).transpose()?,
            },
            "martingale" => Analysis::Martingale { times: a.list("times")?, extra_noise: a.list("extra_noise")? },
            "comparison" => Analysis::Comparison { p: a.get("p")?, band: a.get("band")? },
            "contrast" => Analysis::Contrast {
                n: a.get("n")?,
                d: a.get("d")?,
                kernel: a.get("kernel")?,
                noise: a.get("noise")?,
                sampler: a.get("sampler")?,
                paths: a.get("paths")?,
                horizon: a.get("horizon")?,
            },
            "event_a" => Analysis::EventA {
                p: a.get("p")?,
                beta: a.get("beta")?,
                q: a.get("q")?,
                constant: match a.opt::<String>("constant")?.as_deref() {
                    None | Some("derived") => EventConstant::Derived,
                    Some("stated") => EventConstant::Stated,
                    Some(o) => return Err(FlockError::config(format!("unknown event constant `{o}`"))),
                },
                t_trunc: a.opt("t_trunc")?,
                c_lil: a.opt("c_lil")?,
                ext_dt: a.get("ext_dt")?,
            },
            "appendix_a" => Analysis::AppendixA,
            "strong_order" => Analysis::StrongOrder { dts: a.list("dts")?, paths: a.get("paths")? },
            "functional" => Analysis::Functional {
                beta: a.get("beta")?,
                dt: a.get("dt")?,
                t_trunc: a.get("t_trunc")?,
                holdout: a.get("holdout")?,
            },
            "envelope" => Analysis::Envelope { p: a.get("p")?, a: a.get("a")?, alpha: a.get("alpha")? },
            k => return Err(FlockError::config(format!("unknown analysis `{k}`"))),
        };
        a.finish()?;
        Ok(out)
    }
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expectation::ExpDecay { p, times, tol } => write!(f, "exp_decay p={p} times={} tol={tol}", join(times)),
            Expectation::Dominated { fraction, conservation } => {
                write!(f, "dominated fraction={fraction} conservation={conservation}")
            }
            Expectation::UnitMean { z } => write!(f, "unit_mean z={z}"),
            Expectation::NoCollisions { upper } => write!(f, "no_collisions upper={upper}"),
            Expectation::ContrastCollides => write!(f, "contrast_collides"),
            Expectation::EventInterior { z } => write!(f, "event_interior z={z}"),
            Expectation::StrongSlope { lo, hi } => write!(f, "strong_slope lo={lo} hi={hi}"),
            Expectation::AppendixDominance { z, floor } => write!(f, "appendix_dominance z={z} floor={floor}"),
            Expectation::KsBelow { limit } => write!(f, "ks_below limit={limit}"),
        }
    }
}

impl FromStr for Expectation {
    type Err = FlockError;

    fn from_str(s: &str) -> Result<Self> {
        let mut a = Args::parse(s)?;
        let out = match a.kind.as_str() {
            "exp_decay" => Expectation::ExpDecay { p: a.get("p")?, times: a.list("times")?, tol: a.get("tol")? },
            "dominated" => {
                Expectation::Dominated { fraction: a.get("fraction")?, conservation: a.get("conservation")? }
            }
            "unit_mean" => Expectation::UnitMean { z: a.get("z")? },
            "no_collisions" => Expectation::NoCollisions { upper: a.get("upper")? },
            "contrast_collides" => Expectation::ContrastCollides,
            "event_interior" => Expectation::EventInterior { z: a.get("z")? },
            "strong_slope" => Expectation::StrongSlope { lo: a.get("lo")?, hi: a.get("hi")? },
            "appendix_dominance" => Expectation::AppendixDominance { z: a.get("z")?, floor: a.get("floor")? },
            "ks_below" => Expectation::KsBelow { limit: a.get("limit")? },
            k => return Err(FlockError::config(format!("unknown expectation `{k}`"))),
        };
        a.finish()?;
        Ok(out)
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl From<$t> for String {
            fn from(x: $t) -> String {
                x.to_string()
            }
        }
        impl TryFrom<String> for $t {
            type Error = FlockError;
            fn try_from(s: String) -> Result<Self> {
                s.parse()
            }
        }
    };
}
string_serde!(Analysis);
string_serde!(Expectation);

// ---------------------------------------------------------------------------
// Scenario files

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.cfg;
        let k = &self.controller;
        writeln!(f, "name = {}", self.name)?;
        writeln!(f, "horizon = {}", self.horizon)?;
        writeln!(f, "output_dt = {}", self.output_dt)?;
        writeln!(f, "p = {}", join(&self.p_list))?;
        writeln!(f, "paths = {}", self.n_paths)?;
        writeln!(f, "seed = {}", self.master_seed)?;
        writeln!(f, "\n[system]")?;
        writeln!(f, "n = {}\nd = {}\nlambda = {}", c.n, c.d, c.lambda)?;
        writeln!(f, "kernel = {}\nnoise = {}\nsampler = {}", c.kernel, c.noise, c.sampler)?;
        writeln!(f, "\n[controller]")?;
        writeln!(f, "dt = {}\ndt_min = {}", k.dt_base, k.dt_min)?;
        writeln!(f, "first_cutoff = {}\ncollision_threshold = {}", k.cutoffs[0], k.collision_threshold)?;
        writeln!(f, "c_cfl = {}\nc_stiff = {}", k.c_cfl, k.c_stiff)?;
        writeln!(f, "\n[analysis]")?;
        for a in &self.analyses {
            writeln!(f, "analysis = {a}")?;
        }
        for e in &self.expected {
            writeln!(f, "expect = {e}")?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Section {
    values: BTreeMap<String, (usize, String)>,
}

impl Section {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some((line, raw)) => raw
                .parse()
                .map(Some)
                .map_err(|_| FlockError::config(format!("line {line}: bad value `{raw}` for `{key}`"))),
        }
    }

    fn require<T: FromStr>(&mut self, section: &str, key: &str) -> Result<T> {
        self.take(key)?.ok_or_else(|| FlockError::config(format!("[{section}] is missing `{key}`")))
    }

    fn finish(self, section: &str) -> Result<()> {
        match self.values.into_iter().next() {
            Some((k, (line, _))) => Err(FlockError::config(format!("line {line}: unknown key `{k}` in [{section}]"))),
            None => Ok(()),
        }
    }
}

impl FromStr for Scenario {
    type Err = FlockError;

    /// Line-oriented `key = value` with `[system]`, `[controller]` and
    /// `[analysis]` sections; run-level keys come before the first section.
    /// `#` starts a comment. Unknown keys are errors.
    fn from_str(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<&str, Section> = BTreeMap::new();
        let mut analyses = Vec::new();
        let mut expected = Vec::new();
        let mut current = "";
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = match name.trim() {
                    "system" => "system",
                    "controller" => "controller",
                    "analysis" => "analysis",
                    other => return Err(FlockError::config(format!("line {line_no}: unknown section [{other}]"))),
                };
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| FlockError::config(format!("line {line_no}: expected key = value")))?;
            let (key, value) = (key.trim(), value.trim());
            if current == "analysis" {
                match key {
                    "analysis" => analyses.push(value.parse::<Analysis>().map_err(|e| at_line(line_no, e))?),
                    "expect" => expected.push(value.parse::<Expectation>().map_err(|e| at_line(line_no, e))?),
                    _ => return Err(FlockError::config(format!("line {line_no}: unknown key `{key}` in [analysis]"))),
                }
                continue;
            }
            let sec = sections.entry(current).or_default();
            if sec.values.insert(key.to_string(), (line_no, value.to_string())).is_some() {
                return Err(FlockError::config(format!("line {line_no}: repeated key `{key}`")));
            }
        }

        let mut top = sections.remove("").unwrap_or_default();
        let mut sys = sections.remove("system").unwrap_or_default();
        let mut ctl = sections.remove("controller").unwrap_or_default();

        let name: String = top.require("run", "name")?;
        let horizon: f64 = top.require("run", "horizon")?;
        let output_dt: f64 = top.take("output_dt")?.unwrap_or(horizon / 100.0);
        let p_list: Vec<f64> = match top.values.remove("p") {
            None => vec![2.0],
            Some((line, raw)) => raw
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| FlockError::config(format!("line {line}: bad p list `{raw}`"))))
                .collect::<Result<_>>()?,
        };
        let n_paths: usize = top.require("run", "paths")?;
        let master_seed: u64 = top.take("seed")?.unwrap_or(0);
        top.finish("run")?;

        let cfg = SystemConfig {
            n: sys.require("system", "n")?,
            d: sys.require("system", "d")?,
            lambda: sys.take("lambda")?.unwrap_or(1.0),
            kernel: sys.require("system", "kernel")?,
            noise: sys.require("system", "noise")?,
            sampler: sys.require("system", "sampler")?,
        };
        sys.finish("system")?;

        let dt: f64 = ctl.require("controller", "dt")?;
        let mut controller = StepController::new(dt)?;
        if let Some(m) = ctl.take("dt_min")? {
            controller.dt_min = m;
        }
        let a1: Option<f64> = ctl.take("first_cutoff")?;
        let thr: Option<f64> = ctl.take("collision_threshold")?;
        if a1.is_some() || thr.is_some() {
            let a1 = a1.unwrap_or(controller.cutoffs[0]);
            let thr = thr.unwrap_or(controller.collision_threshold);
            controller = controller.with_cutoffs(a1, thr)?;
        }
        if let Some(c) = ctl.take("c_cfl")? {
            controller.c_cfl = c;
        }
        if let Some(c) = ctl.take("c_stiff")? {
            controller.c_stiff = c;
        }
        ctl.finish("controller")?;

        let s =
            Scenario { name, cfg, controller, horizon, output_dt, p_list, n_paths, master_seed, analyses, expected };
        s.validate()?;
        Ok(s)
    }
}

fn at_line(line: usize, e: FlockError) -> FlockError {
    FlockError::Config(format!("line {line}: {e}"))
}

// ---------------------------------------------------------------------------
// Built-in suite

fn scenario(
    name: &str,
    cfg: SystemConfig,
    controller: StepController,
    horizon: f64,
    output_dt: f64,
    n_paths: usize,
    master_seed: u64,
) -> Scenario {
    Scenario {
        name: name.into(),
        cfg,
        controller,
        horizon,
        output_dt,
        p_list: vec![2.0],
        n_paths,
        master_seed,
        analyses: Vec::new(),
        expected: Vec::new(),
    }
}

fn sys(n: usize, d: usize, kernel: &str, noise: &str, sampler: &str) -> SystemConfig {
    SystemConfig {
        n,
        d,
        lambda: 1.0,
        kernel: kernel.parse().expect("builtin kernel"),
        noise: noise.parse().expect("builtin noise"),
        sampler: sampler.parse().expect("builtin sampler"),
    }
}

/// The acceptance suite S1–S8.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let adaptive = |dt: f64| StepController::new(dt).expect("builtin controller");
    let fixed = |dt: f64| StepController::fixed(dt).expect("builtin controller");

    let mut s1 = scenario(
        "S1-exp-flock",
        sys(4, 2, "const:1", "const:0.5", "uniform:1:1"),
        adaptive(1e-3),
        5.0,
        0.1,
        20_000,
        101,
    );
    s1.analyses.push(Analysis::RateFit { p: 2.0, model: DecayModel::Exponential, window: None });
    s1.expected.push(Expectation::ExpDecay { p: 2.0, times: vec![1.0, 2.0, 4.0], tol: 0.05 });

    let mut s2 = scenario(
        "S2-comparison",
        sys(5, 2, "power:1.2", "const:0.4", "uniform:1:1"),
        adaptive(1e-3),
        2.0,
        0.05,
        1_000,
        202,
    );
    s2.analyses.push(Analysis::Comparison { p: 2.0, band: 0.05 });
    s2.expected.push(Expectation::Dominated { fraction: 0.999, conservation: 1e-9 });

    let mut s3 = scenario(
        "S3-martingale",
        sys(2, 2, "const:1", "const:0.5", "uniform:1:1"),
        fixed(1e-2),
        5.0,
        1.0,
        100_000,
        303,
    );
    s3.analyses.push(Analysis::Martingale {
        times: vec![1.0, 5.0],
        extra_noise: vec!["powdec:0.5:0.75".parse().expect("builtin noise")],
    });
    s3.expected.push(Expectation::UnitMean { z: 3.0 });

    let mut s4 = scenario(
        "S4-collision-avoid",
        sys(5, 1, "power:1.5", "const:0.3", "crossing:1:1:0.5"),
        adaptive(5e-3),
        10.0,
        0.1,
        2_000,
        404,
    );
    s4.analyses.push(Analysis::Contrast {
        n: 2,
        d: 1,
        kernel: "power:0.5".parse().expect("builtin kernel"),
        noise: "const:0".parse().expect("builtin noise"),
        sampler: "pair:1:-4".parse().expect("builtin sampler"),
        paths: 16,
        horizon: 2.0,
    });
    s4.expected.push(Expectation::NoCollisions { upper: 2e-3 });
    s4.expected.push(Expectation::ContrastCollides);

    let mut s5 = scenario(
        "S5-event-A",
        sys(4, 2, "reg:1", "const:0.5", "gauss:1:0.002"),
        adaptive(1e-2),
        20.0,
        0.2,
        10_000,
        505,
    );
    s5.analyses.push(Analysis::EventA {
        p: 2.0,
        beta: 4.0,
        q: 2.0,
        constant: EventConstant::Derived,
        t_trunc: None,
        c_lil: None,
        ext_dt: 0.05,
    });
    s5.analyses.push(Analysis::Envelope { p: 2.0, a: 2.0, alpha: 0.5 });
    s5.expected.push(Expectation::EventInterior { z: 3.0 });

    let mut s6 =
        scenario("S6-strong-order", sys(3, 2, "const:1", "const:0.5", "uniform:1:1"), fixed(1e-4), 1.0, 0.1, 200, 606);
    s6.analyses.push(Analysis::StrongOrder { dts: vec![1e-2, 1e-3, 1e-4], paths: 400 });
    s6.expected.push(Expectation::StrongSlope { lo: 0.4, hi: 1.1 });

    let mut s7 =
        scenario("S7-appendixA", sys(2, 1, "power:2", "const:0.3", "pair:1:2"), adaptive(1e-3), 5.0, 0.1, 10_000, 707);
    s7.analyses.push(Analysis::AppendixA);
    s7.expected.push(Expectation::AppendixDominance { z: 3.0, floor: 0.2 });

    let mut s8 =
        scenario("S8-dufresne", sys(2, 2, "const:1", "const:0.5", "uniform:1:1"), fixed(1e-2), 1.0, 0.1, 10_000, 808);
    s8.analyses.push(Analysis::Functional { beta: 4.0, dt: 1e-2, t_trunc: 200.0, holdout: 10_000 });
    s8.expected.push(Expectation::KsBelow { limit: 0.03 });

    vec![s1, s2, s3, s4, s5, s6, s7, s8]
}

/// Looks up a built-in scenario by exact name, or by its `S<k>` prefix.
pub fn builtin(name: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.name == name || s.name.split('-').next() == Some(name))
}
