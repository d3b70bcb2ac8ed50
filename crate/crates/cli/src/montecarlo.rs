//! Scenario runs of the synthetic process and their summary files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use hetiv::montecarlo::{run_mc_with, EstimatorKind, McOptions, McSummary};
use hetiv::regression::VceKind;
use hetiv::report::{Cell, RenderedTable, Row};
use log::info;
use serde::Serialize;

use crate::config::{MonteCarloConfig, ResolvedConfig};
use crate::error::Result;
use crate::output::{write_atomic, Timing};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub name: String,
    pub summary: McSummary,
}

#[derive(Debug, Clone)]
pub struct McRun {
    pub scenarios: Vec<ScenarioResult>,
    pub timings: Vec<Timing>,
}

pub fn options(r: &ResolvedConfig) -> McOptions {
    let mc = r.montecarlo();
    McOptions {
        vce: r.config.vce,
        weak_floor: mc.weak_floor,
        j_level: mc.j_level,
        ci_level: mc.ci_level,
    }
}

pub fn run_montecarlo(r: &ResolvedConfig) -> Result<McRun> {
    let mc = r.montecarlo();
    let opts = options(r);
    let mut scenarios = Vec::new();
    let mut timings = Vec::new();
    for s in mc.resolve_scenarios()? {
        info!("scenario `{}`: {} replications", s.name, mc.reps);
        let t = Instant::now();
        let summary = run_mc_with(&s.dgp, &mc.estimators, mc.reps, &opts)?;
        timings.push(Timing {
            stage: s.name.clone(),
            seconds: t.elapsed().as_secs_f64(),
        });
        scenarios.push(ScenarioResult {
            name: s.name,
            summary,
        });
    }
    Ok(McRun { scenarios, timings })
}

/// `Some(median F < floor)` for IV estimators.
pub fn weak_flag(summary: &McSummary, kind: EstimatorKind, floor: f64) -> Option<bool> {
    summary.estimator(kind)?.median_f.map(|f| f < floor)
}

pub fn summary_csv(run: &McRun, mc: &MonteCarloConfig) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["scenario"];
    header.extend_from_slice(McSummary::csv_header());
    header.push("weak_flag");
    w.write_record(&header).expect("write to memory");
    for s in &run.scenarios {
        for (row, e) in s.summary.csv_rows().into_iter().zip(&s.summary.estimators) {
            let flag = match weak_flag(&s.summary, e.estimator, mc.weak_floor) {
                Some(true) => "1",
                Some(false) => "0",
                None => "NA",
            };
            let mut rec = vec![s.name.clone()];
            rec.extend(row);
            rec.push(flag.to_string());
            w.write_record(&rec).expect("write to memory");
        }
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8")
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    seed: u64,
    reps: usize,
    estimators: &'a [EstimatorKind],
    vce: VceKind,
    weak_floor: f64,
    j_level: f64,
    ci_level: f64,
    scenarios: &'a [ScenarioResult],
}

/// Per-scenario summaries with their full process configuration. Contains
/// nothing that depends on timing or thread count.
pub fn summary_json(run: &McRun, r: &ResolvedConfig) -> String {
    let mc = r.montecarlo();
    let file = SummaryFile {
        seed: r.config.seed,
        reps: mc.reps,
        estimators: &mc.estimators,
        vce: r.config.vce,
        weak_floor: mc.weak_floor,
        j_level: mc.j_level,
        ci_level: mc.ci_level,
        scenarios: &run.scenarios,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("summary serializes");
    s.push('\n');
    s
}

/// Bias and coverage by scenario and estimator.
pub fn comparison_table(run: &McRun, mc: &MonteCarloConfig) -> RenderedTable {
    let headers = vec![[
        "True β",
        "Mean",
        "Bias",
        "RMSE",
        "SD",
        "Mean SE",
        "Coverage",
        "Median F",
        "Weak share",
        "J rejection",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()];
    let opt = |v: Option<f64>| v.map_or(Cell::Empty, |x| Cell::number(x, 3));
    let mut body = Vec::new();
    for s in &run.scenarios {
        for e in &s.summary.estimators {
            let mut label = format!("{} / {}", s.name, e.estimator);
            if weak_flag(&s.summary, e.estimator, mc.weak_floor) == Some(true) {
                label.push_str(" (weak)");
            }
            body.push(Row::new(
                label,
                vec![
                    Cell::number(s.summary.config.beta, 3),
                    Cell::number(e.mean, 3),
                    Cell::number(e.bias, 3),
                    Cell::number(e.rmse, 3),
                    Cell::number(e.sd, 3),
                    Cell::number(e.mean_se, 3),
                    Cell::number(e.coverage, 3),
                    opt(e.median_f),
                    opt(e.weak_rate),
                    opt(e.j_rejection_rate),
                ],
            ));
        }
    }
    RenderedTable {
        title: format!("Monte Carlo summary ({} replications per scenario)", mc.reps),
        headers,
        body,
        footer: Vec::new(),
        notes: vec![
            format!(
                "Coverage of the nominal {}% robust confidence interval.",
                mc.ci_level * 100.0
            ),
            format!(
                "Weak share: replications with first-stage F below {}; (weak) marks a median F below it.",
                mc.weak_floor
            ),
            format!("J rejection: Hansen J test at the {}% level.", mc.j_level * 100.0),
        ],
        legend: false,
    }
}

/// Writes the summary CSV, the JSON summary and the rendered table.
pub fn write_summaries(run: &McRun, r: &ResolvedConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let mc = r.montecarlo();
    let table = comparison_table(run, mc).render(r.config.format.format());
    let files = [
        (out.join("mc_summary.csv"), summary_csv(run, mc)),
        (out.join("mc_summary.json"), summary_json(run, r)),
        (out.join(format!("mc_table.{}", r.config.format.extension())), table),
    ];
    let mut written = Vec::new();
    for (path, contents) in files {
        write_atomic(&path, contents.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
