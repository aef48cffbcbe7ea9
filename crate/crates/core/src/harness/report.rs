use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{DecayModel, EnsembleStats, Series};
use crate::error::{FlockError, Result};
use crate::integrator::PathResult;

use super::run::RunManifest;
use super::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl FromStr for Format {
    type Err = FlockError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            o => Err(FlockError::config(format!("unknown format `{o}` (csv, json, svg)"))),
        }
    }
}

/// The JSON document: statistics plus what is needed to replay them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsDocument {
    pub master_seed: u64,
    pub scenario: Scenario,
    pub stats: EnsembleStats,
}

pub fn stats_json(stats: &EnsembleStats, manifest: &RunManifest) -> Result<String> {
    let doc =
        StatsDocument { master_seed: manifest.master_seed, scenario: manifest.scenario.clone(), stats: stats.clone() };
    serde_json::to_string_pretty(&doc).map_err(|e| FlockError::Io(e.to_string()))
}

pub fn parse_stats_json(text: &str) -> Result<StatsDocument> {
    serde_json::from_str(text).map_err(|e| FlockError::Io(e.to_string()))
}

/// One header row, then one row per output time.
pub fn stats_csv(stats: &EnsembleStats) -> String {
    let mut cols: Vec<(String, &[f64])> = Vec::new();
    fn push<'a>(cols: &mut Vec<(String, &'a [f64])>, name: String, s: &'a Series) {
        cols.push((format!("{name}_mean"), &s.mean));
        cols.push((format!("{name}_se"), &s.se));
    }
    for n in &stats.norms {
        let p = n.p;
        push(&mut cols, format!("vnorm_p{p}"), &n.mean_vnorm);
        push(&mut cols, format!("xnorm_p{p}"), &n.mean_xnorm);
        for (tag, s) in [
            ("cond_vnorm", &n.cond_vnorm),
            ("cond_xnorm", &n.cond_xnorm),
            ("compl_vnorm", &n.compl_vnorm),
            ("compl_xnorm", &n.compl_xnorm),
        ] {
            if let Some(s) = s {
                push(&mut cols, format!("{tag}_p{p}"), s);
            }
        }
    }
    push(&mut cols, "martingale".into(), &stats.martingale_mean);

    let mut out = String::from("t");
    for (name, _) in &cols {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (k, t) in stats.grid.iter().enumerate() {
        let _ = write!(out, "{t}");
        for (_, col) in &cols {
            let _ = write!(out, ",{}", col[k]);
        }
        out.push('\n');
    }
    out
}

/// Per-path table for `--dump-paths`.
pub fn path_csv(r: &PathResult) -> String {
    let mut out = String::from("t,w,m,qv,min_dist,momentum_residual");
    for n in &r.norms {
        let _ = write!(out, ",x_p{0},v_p{0}", n.p);
    }
    out.push('\n');
    for k in 0..r.times.len() {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            r.times[k], r.w[k], r.m[k], r.qv[k], r.min_dist[k], r.momentum_residual[k]
        );
        for n in &r.norms {
            let _ = write!(out, ",{},{}", n.x[k], n.v[k]);
        }
        out.push('\n');
    }
    out
}

const W: f64 = 720.0;
const H: f64 = 260.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Panel {
    top: f64,
    t_max: f64,
    lo: f64,
    hi: f64,
    log: bool,
}

impl Panel {
    fn new(top: f64, t_max: f64, values: impl Iterator<Item = f64>, log: bool) -> Panel {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        Panel { top, t_max, lo, hi, log }
    }

    fn x(&self, t: f64) -> f64 {
        PAD + (W - 2.0 * PAD) * t / self.t_max
    }

    fn y(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v > 0.0 {
                v.log10()
            } else {
                return None;
            }
        } else {
            v
        };
        Some(self.top + H - PAD - (H - 2.0 * PAD) * (v - self.lo) / (self.hi - self.lo))
    }

    fn points(&self, t: &[f64], y: &[f64]) -> String {
        t.iter()
            .zip(y)
            .filter_map(|(&t, &v)| self.y(v).map(|py| format!("{:.2},{:.2}", self.x(t), py)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn frame(&self, out: &mut String, title: &str) {
        let (x0, x1) = (PAD, W - PAD);
        let (y0, y1) = (self.top + PAD, self.top + H - PAD);
        let _ = writeln!(
            out,
            r##"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            x1 - x0,
            y1 - y0
        );
        let _ = writeln!(out, r#"<text x="{x0}" y="{}" font-size="13">{title}</text>"#, y0 - 8.0);
        let fmt = |v: f64| if self.log { format!("1e{v:.1}") } else { format!("{v:.3}") };
        let _ = writeln!(out, r#"<text x="4" y="{y0}" font-size="10">{}</text>"#, fmt(self.hi));
        let _ = writeln!(out, r#"<text x="4" y="{y1}" font-size="10">{}</text>"#, fmt(self.lo));
        let _ = writeln!(
            out,
            r#"<text x="{x1}" y="{}" font-size="10" text-anchor="end">t = {}</text>"#,
            y1 + 14.0,
            self.t_max
        );
    }
}

/// Two stacked charts: `E|v|_p` on a log scale with fitted-rate overlays, and
/// `E|x|_p` on a linear scale.
pub fn stats_svg(stats: &EnsembleStats) -> String {
    let t = &stats.grid;
    let t_max = t.last().copied().unwrap_or(1.0).max(1e-12);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{}" viewBox="0 0 {W} {}">"#,
        2.0 * H,
        2.0 * H
    );
    let top = Panel::new(0.0, t_max, stats.norms.iter().flat_map(|n| n.mean_vnorm.mean.iter().copied()), true);
    top.frame(&mut out, "mean |v|_p (log scale)");
    for (i, n) in stats.norms.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(
            out,
            r#"<polyline class="vnorm" data-p="{}" fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#,
            n.p,
            top.points(t, &n.mean_vnorm.mean)
        );
    }
    for f in &stats.fits {
        let ts: Vec<f64> = t.iter().copied().filter(|s| *s >= f.window.0 && *s <= f.window.1).collect();
        let ys: Vec<f64> = ts
            .iter()
            .map(|&s| match f.model {
                DecayModel::Exponential => f.intercept * (-f.rate * s).exp(),
                DecayModel::Algebraic => f.intercept * (1.0 + s).powf(-f.rate),
            })
            .collect();
        let d = top.points(&ts, &ys).replacen(' ', " L ", usize::MAX);
        if !d.is_empty() {
            let _ =
                writeln!(out, r##"<path class="fit" fill="none" stroke="#000" stroke-dasharray="5,4" d="M {d}"/>"##);
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-size="11">fitted rate {:.4}</text>"#,
                W - 200.0,
                PAD + 16.0,
                f.rate
            );
        }
    }
    let bottom = Panel::new(H, t_max, stats.norms.iter().flat_map(|n| n.mean_xnorm.mean.iter().copied()), false);
    bottom.frame(&mut out, "mean |x|_p");
    for (i, n) in stats.norms.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(
            out,
            r#"<polyline class="xnorm" data-p="{}" fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#,
            n.p,
            bottom.points(t, &n.mean_xnorm.mean)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Writes the requested formats plus `manifest.json` and `scenario.cfg`
/// into `dir`. Returns the files written.
pub fn emit_report(
    stats: &EnsembleStats,
    manifest: &RunManifest,
    formats: &[Format],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    for f in formats {
        match f {
            Format::Csv => put("stats.csv", stats_csv(stats))?,
            Format::Json => put("stats.json", stats_json(stats, manifest)?)?,
            Format::Svg => put("report.svg", stats_svg(stats))?,
        }
    }
    put("manifest.json", serde_json::to_string_pretty(manifest).map_err(|e| FlockError::Io(e.to_string()))?)?;
    put("scenario.cfg", manifest.scenario.to_string())?;
    Ok(written)
}

pub fn dump_paths(results: &[PathResult], dir: &Path) -> Result<()> {
    let sub = dir.join("paths");
    fs::create_dir_all(&sub)?;
    for (i, r) in results.iter().enumerate() {
        fs::write(sub.join(format!("path_{i:06}.csv")), path_csv(r))?;
    }
    Ok(())
}
