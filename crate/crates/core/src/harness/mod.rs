//! Scenarios, deterministic parallel ensembles, acceptance checks and
//! report emission.

mod criteria;
mod report;
mod run;
mod scenario;
mod selfcheck;

pub use criteria::{evaluate, CriterionOutcome};
pub use report::{
    dump_paths, emit_report, parse_stats_json, path_csv, stats_csv, stats_json, stats_svg, Format, StatsDocument,
};
pub use run::{
    execute, run_ensemble, AnalysisReport, AppendixCheck, ComparisonCheck, ContrastCheck, EnsembleRun, EnvelopeCheck,
    EventCheck, FunctionalCheck, MartingaleCheck, RunManifest, StrongOrderCheck,
};
pub use scenario::{builtin, builtin_scenarios, Analysis, Expectation, Scenario};
pub use selfcheck::{determinism_probe, property_suite};

use crate::error::Result;

/// One line of the acceptance table.
#[derive(Debug, Clone)]
pub struct SuiteLine {
    pub number: usize,
    pub name: String,
    pub passed: bool,
    pub summary: String,
    pub outcomes: Vec<CriterionOutcome>,
    pub wall_time_s: f64,
}

impl std::fmt::Display for SuiteLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}. {:<22} {:>7.1}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.number,
            self.name,
            self.wall_time_s,
            self.summary
        )
    }
}

fn summarize(outcomes: &[CriterionOutcome]) -> String {
    let mut parts = Vec::new();
    for o in outcomes {
        if o.passed {
            let shown: Vec<String> = o.measured.iter().take(4).map(|(k, v)| format!("{k}={v:.4e}")).collect();
            if !shown.is_empty() {
                parts.push(shown.join(" "));
            }
        } else {
            parts.push(format!("[{}] {}", o.expectation, o.detail));
        }
    }
    parts.join(" | ")
}

/// Runs one built-in scenario as an acceptance line.
pub fn run_criterion(number: usize, scenario: &Scenario, workers: usize) -> Result<SuiteLine> {
    let (_, manifest) = run_ensemble(scenario, workers)?;
    Ok(SuiteLine {
        number,
        name: scenario.name.clone(),
        passed: manifest.passed(),
        summary: summarize(&manifest.criteria),
        outcomes: manifest.criteria,
        wall_time_s: manifest.wall_time_s,
    })
}

/// The property suite as acceptance line 9.
pub fn property_line() -> SuiteLine {
    let started = std::time::Instant::now();
    let outcomes = property_suite();
    let failed: Vec<&CriterionOutcome> = outcomes.iter().filter(|o| !o.passed).collect();
    SuiteLine {
        number: 9,
        name: "properties".into(),
        passed: failed.is_empty(),
        summary: if failed.is_empty() {
            format!("{} deterministic checks", outcomes.len())
        } else {
            failed.iter().map(|o| format!("[{}] {}", o.expectation, o.detail)).collect::<Vec<_>>().join(" | ")
        },
        outcomes,
        wall_time_s: started.elapsed().as_secs_f64(),
    }
}
