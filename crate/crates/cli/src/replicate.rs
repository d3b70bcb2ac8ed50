//! Table replication on survey microdata: descriptives, the OLS/IV grid,
//! subgroup grids with difference rows, and the annex re-runs.

use std::path::{Path, PathBuf};

use hetiv::iv::{difference_test, external_iv_fit, lewbel_fit, Estimate, IvOptions};
use hetiv::linalg::weighted_mean;
use hetiv::regression::{build_design, ols_fit, ColumnRole, ModelSpec};
use hetiv::report::{estimation_table, Cell, ColumnResult, EstimateCell, RenderedTable, Row, TableLayout};
use hetiv::survey::{
    apply_restrictions, class_column, code_drug_use, load_table, weighted_descriptives, Column,
    Dataset, Schema,
};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{band_label, InstrumentMode, ModelConfig, ResolvedConfig};
use crate::error::{CliError, Result};
use crate::output::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Ols,
    Lewbel,
    External,
}

#[derive(Debug, Clone)]
pub struct TableOutput {
    /// File name without extension, e.g. `table2`.
    pub stem: String,
    pub table: RenderedTable,
}

#[derive(Debug, Clone)]
pub struct ReplicationOutput {
    pub tables: Vec<TableOutput>,
    pub failed_cells: usize,
    pub total_cells: usize,
    /// Tables that could not be built from the data, with the reason.
    pub skipped: Vec<String>,
    /// Load, restriction and coding log.
    pub filters: Vec<String>,
}

impl ReplicationOutput {
    pub fn table(&self, stem: &str) -> Option<&RenderedTable> {
        self.tables.iter().find(|t| t.stem == stem).map(|t| &t.table)
    }

    pub fn write(&self, r: &ResolvedConfig, out: &Path) -> Result<Vec<PathBuf>> {
        let f = r.config.format;
        let mut written = Vec::new();
        for t in &self.tables {
            let path = out.join(format!("{}.{}", t.stem, f.extension()));
            write_atomic(&path, t.table.render(f.format()).as_bytes())?;
            written.push(path);
        }
        Ok(written)
    }
}

struct Job {
    data: usize,
    spec: ModelSpec,
    estimator: Estimator,
}

struct CellFit {
    column: ColumnResult,
    estimate: Estimate,
    weak: bool,
}

struct PlannedColumn {
    group: String,
    method: String,
    job: usize,
}

struct TablePlan {
    stem: String,
    layout: TableLayout,
    columns: Vec<PlannedColumn>,
    /// Column pairs whose difference is reported under the first of the two.
    diffs: Vec<(usize, usize)>,
    outcomes: Vec<String>,
}

struct Planner<'a> {
    m: &'a ModelConfig,
    datasets: Vec<Dataset>,
    jobs: Vec<Job>,
    tables: Vec<TablePlan>,
    skipped: Vec<String>,
    iv: Estimator,
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

impl<'a> Planner<'a> {
    fn spec(&self, outcome: &str, treatment: &str, est: Estimator, exclude: &[String]) -> ModelSpec {
        let m = self.m;
        let keep = |v: &[String]| -> Vec<String> { v.iter().filter(|c| !exclude.contains(c)).cloned().collect() };
        ModelSpec {
            outcome: outcome.to_string(),
            treatment: Some(treatment.to_string()),
            controls: keep(&m.controls),
            squared: keep(&m.squared),
            factors: keep(&m.factors),
            fixed_effects: m.fixed_effects.clone(),
            required: match est {
                Estimator::External => m.external_instrument.iter().cloned().collect(),
                _ => Vec::new(),
            },
            row_mask: m.masks.get(outcome).cloned(),
            no_intercept: false,
            weighted: m.weighted,
        }
    }

    fn job(&mut self, data: usize, spec: ModelSpec, estimator: Estimator) -> usize {
        self.jobs.push(Job { data, spec, estimator });
        self.jobs.len() - 1
    }

    fn check_rows(&self, exclude: &[String]) -> Vec<String> {
        let m = self.m;
        let mut rows = Vec::new();
        if m.controls.iter().chain(&m.squared).chain(&m.factors).any(|c| !exclude.contains(c)) {
            rows.push("Control variables".to_string());
        }
        for fe in &m.fixed_effects {
            rows.push(format!("{} fixed effects", capitalize(fe)));
        }
        rows
    }

    fn notes(&self, exclude: &[String], with_ols: bool) -> Vec<String> {
        let m = self.m;
        let mut notes = Vec::new();
        if with_ols {
            notes.push("OLS columns are linear probability models estimated by least squares.".to_string());
        }
        notes.push(match self.iv {
            Estimator::External => format!(
                "IV columns are 2SLS estimates instrumenting drug use with `{}`.",
                m.external_instrument.as_deref().unwrap_or_default()
            ),
            _ => "IV columns are 2SLS estimates with heteroskedasticity-based instruments built from the exogenous controls."
                .to_string(),
        });
        let mut controls: Vec<String> = Vec::new();
        for c in &m.controls {
            if !exclude.contains(c) {
                controls.push(c.clone());
            }
        }
        for c in &m.squared {
            if !exclude.contains(c) {
                if !controls.contains(c) {
                    controls.push(c.clone());
                }
                controls.push(format!("{c} squared"));
            }
        }
        for c in &m.factors {
            if !exclude.contains(c) {
                controls.push(c.clone());
            }
        }
        if !controls.is_empty() {
            notes.push(format!("The control variables are {}.", controls.join(", ")));
        }
        if m.weighted {
            notes.push("Regressions use sampling weights.".to_string());
        }
        notes.push("Heteroskedasticity-robust standard errors are in parentheses.".to_string());
        notes
    }

    /// OLS and IV side by side for every outcome.
    fn ols_iv_grid(&mut self, stem: &str, title: String, exclude: &[String]) {
        let outcomes = self.m.outcomes.clone();
        let treatment = self.m.treatment_column().expect("validated");
        let mut columns = Vec::new();
        for o in &outcomes {
            let label = self.m.label(o).to_string();
            for (method, est) in [("OLS", Estimator::Ols), ("IV", self.iv)] {
                let spec = self.spec(o, &treatment, est, exclude);
                let job = self.job(0, spec, est);
                columns.push(PlannedColumn {
                    group: label.clone(),
                    method: method.to_string(),
                    job,
                });
            }
        }
        self.tables.push(TablePlan {
            stem: stem.to_string(),
            layout: TableLayout {
                title,
                row_label: "Drug use".into(),
                check_rows: self.check_rows(exclude),
                notes: self.notes(exclude, true),
                ..Default::default()
            },
            columns,
            diffs: Vec::new(),
            outcomes,
        });
    }

    /// IV estimates in each subsample (one dataset per group), differenced
    /// pairwise when there are exactly two groups.
    fn subgroup_grid(&mut self, stem: &str, title: String, groups: Vec<(String, Dataset)>, extra_notes: Vec<String>) {
        let treatment = self.m.treatment_column().expect("validated");
        let first = self.datasets.len();
        let labels: Vec<String> = groups.iter().map(|(l, _)| l.clone()).collect();
        self.datasets.extend(groups.into_iter().map(|(_, d)| d));
        let outcomes = self.m.outcomes.clone();
        let mut columns = Vec::new();
        let mut diffs = Vec::new();
        for o in &outcomes {
            let label = self.m.label(o).to_string();
            let start = columns.len();
            for (g, method) in labels.iter().enumerate() {
                let spec = self.spec(o, &treatment, self.iv, &[]);
                let job = self.job(first + g, spec, self.iv);
                columns.push(PlannedColumn {
                    group: label.clone(),
                    method: method.clone(),
                    job,
                });
            }
            if labels.len() == 2 {
                diffs.push((start, start + 1));
            }
        }
        let mut notes = self.notes(&[], false);
        if labels.len() == 2 {
            notes.push(format!(
                "Difference: {} minus {}, with standard error sqrt(se₁² + se₂²) and a normal p-value.",
                labels[0], labels[1]
            ));
        }
        notes.extend(extra_notes);
        self.tables.push(TablePlan {
            stem: stem.to_string(),
            layout: TableLayout {
                title,
                row_label: "Drug use".into(),
                check_rows: self.check_rows(&[]),
                notes,
                ..Default::default()
            },
            columns,
            diffs,
            outcomes,
        });
    }

    /// IV estimates with each class indicator of `pairs` as the treatment.
    fn drug_type_grid(&mut self, stem: &str, title: String, data: usize, pairs: &[[String; 2]]) {
        let outcomes = self.m.outcomes.clone();
        let mut columns = Vec::new();
        let mut diffs = Vec::new();
        for o in &outcomes {
            let label = self.m.label(o).to_string();
            for pair in pairs {
                let start = columns.len();
                for class in pair {
                    let spec = self.spec(o, &class_column(class), self.iv, &[]);
                    let job = self.job(data, spec, self.iv);
                    columns.push(PlannedColumn {
                        group: label.clone(),
                        method: capitalize(class),
                        job,
                    });
                }
                diffs.push((start, start + 1));
            }
        }
        let mut notes = self.notes(&[], false);
        notes.push(
            "A respondent can use drugs of both types, so the two columns of a pair come from overlapping samples and the difference test treats them as independent only approximately."
                .to_string(),
        );
        self.tables.push(TablePlan {
            stem: stem.to_string(),
            layout: TableLayout {
                title,
                row_label: "Drug use".into(),
                check_rows: self.check_rows(&[]),
                notes,
                ..Default::default()
            },
            columns,
            diffs,
            outcomes,
        });
    }

    fn external_grid(&mut self, instrument: &str) {
        let outcomes = self.m.outcomes.clone();
        let treatment = self.m.treatment_column().expect("validated");
        let mut columns = Vec::new();
        for o in &outcomes {
            let spec = self.spec(o, &treatment, Estimator::External, &[]);
            let job = self.job(0, spec, Estimator::External);
            columns.push(PlannedColumn {
                group: self.m.label(o).to_string(),
                method: "IV".into(),
                job,
            });
        }
        let mut notes = vec![format!(
            "2SLS estimates instrumenting drug use with the binary indicator `{instrument}`. They are local average treatment effects for respondents whose drug use responds to the instrument."
        )];
        notes.extend(self.notes(&[], false).into_iter().skip(1));
        self.tables.push(TablePlan {
            stem: "tableA1".into(),
            layout: TableLayout {
                title: format!("Table A1. IV estimates with `{instrument}` as the instrument"),
                row_label: "Drug use".into(),
                instrument_label: Some(format!("First stage: {instrument}")),
                check_rows: self.check_rows(&[]),
                notes,
                ..Default::default()
            },
            columns,
            diffs: Vec::new(),
            outcomes,
        });
    }
}

fn fit_cell(ds: &Dataset, spec: &ModelSpec, est: Estimator, opts: &IvOptions, instrument: Option<&str>) -> hetiv::Result<CellFit> {
    let frame = build_design::<f64>(ds, spec)?;
    let treatment = spec.treatment.as_deref().expect("treatment set");
    let d = frame.treatment.as_deref().expect("treatment requested");
    let w = frame.weights.as_deref();
    let treat_mean = match w {
        Some(w) => weighted_mean(d, w),
        None => hetiv::linalg::mean(d),
    };
    let mut col = ColumnResult {
        n: Some(frame.n()),
        treat_mean: Some(treat_mean),
        ..Default::default()
    };
    let (cell, weak) = match est {
        Estimator::Ols => {
            let x = frame.design.with_column(treatment, d, ColumnRole::Regressor)?;
            let fit = ols_fit(&x, &frame.outcome, w, opts.vce)?;
            let j = fit.index_of(treatment)?;
            col.adj_r2 = Some(fit.adj_r_squared);
            col.dep_mean = Some(fit.dep_mean);
            let cell = EstimateCell {
                coef: fit.coefficients[j],
                se: fit.std_errors[j],
                p: fit.p_values[j],
            };
            (cell, false)
        }
        Estimator::Lewbel | Estimator::External => {
            let fit = if est == Estimator::Lewbel {
                lewbel_fit(&frame.outcome, &frame.design, d, treatment, w, opts)?
            } else {
                let name = instrument.expect("validated");
                let z = frame.aligned(ds, name)?;
                external_iv_fit(&frame.outcome, &frame.design, d, treatment, name, &z, w, opts)?
            };
            for m in &fit.warnings {
                warn!("{} on {}: {m}", spec.outcome, treatment);
            }
            col.dep_mean = Some(fit.fit.dep_mean);
            col.first_stage_f = Some(fit.first_stage_f.statistic);
            col.hansen_p = Some(fit.hansen_j.p_value());
            if let (Some((coef, se)), Some(name)) = (fit.instrument_first_stage, instrument) {
                col.instrument_first_stage = Some(EstimateCell {
                    coef,
                    se,
                    p: fit.first_stage.p_value(name)?,
                });
            }
            let cell = EstimateCell {
                coef: fit.beta(),
                se: fit.beta_se(),
                p: fit.beta_p(),
            };
            (cell, fit.weak)
        }
    };
    col.estimate = Some(Ok(cell));
    Ok(CellFit {
        column: col,
        estimate: Estimate {
            coef: cell.coef,
            se: cell.se,
        },
        weak,
    })
}

fn wave_key(c: &Column, i: usize) -> Option<String> {
    c.level(i).map(str::to_string).or_else(|| c.value(i).map(|v| v.to_string()))
}

/// Waves in which `outcome` is never observed.
fn missing_waves(ds: &Dataset, wave: &str, outcome: &str) -> Result<Vec<String>> {
    let w = ds.column(wave)?;
    let y = ds.column(outcome)?;
    let mut seen: Vec<(String, bool)> = Vec::new();
    for i in 0..ds.rows() {
        let Some(k) = wave_key(w, i) else { continue };
        let observed = !y.is_missing(i);
        match seen.iter_mut().find(|(s, _)| *s == k) {
            Some(e) => e.1 |= observed,
            None => seen.push((k, observed)),
        }
    }
    Ok(seen.into_iter().filter(|(_, o)| !o).map(|(k, _)| k).collect())
}

fn load(r: &ResolvedConfig) -> Result<Dataset> {
    let data = r.config.data.as_ref().expect("validated");
    let mut schema = Schema::new();
    for (name, kind) in &data.columns {
        schema = schema.column(name.clone(), *kind);
    }
    if let Some(w) = &data.weight {
        schema = schema.weight(w.clone());
    }
    let mut ds = load_table(&data.input, &schema)?;
    if let Some(s) = &r.config.sample {
        ds = apply_restrictions(&ds, s)?;
    }
    Ok(ds)
}

/// Loads the data and estimates every table the configuration describes.
///
/// Cell failures become annotated blanks; the caller decides whether their
/// share is acceptable.
pub fn run_replication(r: &ResolvedConfig) -> Result<ReplicationOutput> {
    let m = r.model();
    let restricted = load(r)?;
    let ds = match &m.taxonomy {
        Some(t) => code_drug_use(&restricted, &t.resolve()?, m.window)?,
        None => restricted.clone(),
    };
    let treatment = m.treatment_column().expect("validated");
    let referenced = m
        .outcomes
        .iter()
        .chain(std::iter::once(&treatment))
        .chain(&m.controls)
        .chain(&m.squared)
        .chain(&m.factors)
        .chain(&m.fixed_effects)
        .chain(m.masks.values())
        .chain(m.external_instrument.iter());
    for c in referenced {
        ds.column(c)?;
    }
    info!("estimation sample: {} rows", ds.rows());

    let mut wave_notes: Vec<(String, String)> = Vec::new();
    if let Some(wave) = &r.config.data.as_ref().expect("validated").wave_column {
        for o in &m.outcomes {
            let gaps = missing_waves(&ds, wave, o)?;
            if !gaps.is_empty() {
                let s = if gaps.len() == 1 { "" } else { "s" };
                wave_notes.push((
                    o.clone(),
                    format!(
                        "{} is not observed in wave{s} {}; its columns are estimated on the remaining waves.",
                        m.label(o),
                        gaps.join(", ")
                    ),
                ));
            }
        }
    }

    let iv = if m.instrument == InstrumentMode::External {
        Estimator::External
    } else {
        Estimator::Lewbel
    };
    let mut p = Planner {
        m,
        datasets: vec![ds.clone()],
        jobs: Vec::new(),
        tables: Vec::new(),
        skipped: Vec::new(),
        iv,
    };

    p.ols_iv_grid("table2", "Table 2. Drug use and labour market outcomes: OLS and IV estimates".into(), &[]);

    let sg = r.config.subgroups.as_ref().expect("filled");
    let age = r.config.sample.as_ref().map_or("age", |s| s.age_column.as_str());
    match ds.column(age) {
        Ok(ages) if !sg.age_bands.is_empty() => {
            let groups = sg
                .age_bands
                .iter()
                .map(|b| {
                    let sub = ds.filter(|i| ages.value(i).is_some_and(|a| a >= b[0] && a <= b[1]));
                    (format!("Ages {}", band_label(b)), sub)
                })
                .collect();
            p.subgroup_grid("table3", "Table 3. IV estimates by age group".into(), groups, Vec::new());
        }
        Ok(_) => p.skipped.push("table3: no age bands configured".into()),
        Err(_) => p.skipped.push(format!("table3: no `{age}` column")),
    }

    match ds.column(&sg.education_column) {
        Ok(edu @ Column::Categorical { .. }) => {
            let present: Vec<&str> = (0..ds.rows()).filter_map(|i| edu.level(i)).collect();
            for l in sg.education_low.iter().chain(&sg.education_high) {
                if !present.contains(&l.as_str()) {
                    warn!("education level `{l}` does not occur in the estimation sample");
                }
            }
            let split = |levels: &[String]| ds.filter(|i| edu.level(i).is_some_and(|l| levels.iter().any(|x| x == l)));
            let groups = vec![
                ("Low education".to_string(), split(&sg.education_low)),
                ("High education".to_string(), split(&sg.education_high)),
            ];
            let note = format!(
                "Low education: {}. High education: {}.",
                sg.education_low.join(", "),
                sg.education_high.join(", ")
            );
            p.subgroup_grid("table4", "Table 4. IV estimates by education".into(), groups, vec![note]);
        }
        Ok(_) => p.skipped.push(format!("table4: `{}` is not categorical", sg.education_column)),
        Err(_) => p.skipped.push(format!("table4: no `{}` column", sg.education_column)),
    }

    let pairs_present = |d: &Dataset, pairs: &[[String; 2]]| {
        pairs.iter().flatten().all(|c| d.has_column(&class_column(c)))
    };
    if m.taxonomy.is_none() {
        p.skipped.push("table5: no drug taxonomy configured".into());
    } else if sg.drug_pairs.is_empty() || !pairs_present(&ds, &sg.drug_pairs) {
        p.skipped.push("table5: drug pairs are not classes of the taxonomy".into());
    } else {
        p.drug_type_grid("table5", "Table 5. IV estimates by drug type".into(), 0, &sg.drug_pairs);
    }

    if m.instrument != InstrumentMode::Lewbel {
        let instrument = m.external_instrument.clone().expect("validated");
        p.external_grid(&instrument);
    }

    let v = r.config.variants.as_ref().expect("filled");
    for (stem, exclude) in [("tableA2a", &v.title_exclusions), ("tableA2b", &v.note_exclusions)] {
        let removes = m
            .controls
            .iter()
            .chain(&m.squared)
            .chain(&m.factors)
            .any(|c| exclude.contains(c));
        if removes {
            let title = format!(
                "Table {}. OLS and IV estimates excluding {} from the controls",
                &stem[5..],
                exclude.join(" and ")
            );
            p.ols_iv_grid(stem, title, exclude);
        } else {
            p.skipped.push(format!("{stem}: excluding {} removes no control", exclude.join(", ")));
        }
    }

    match v.alternative_taxonomy.resolve() {
        Ok(t) => match code_drug_use(&restricted, &t, m.window) {
            Ok(alt) if pairs_present(&alt, &v.alternative_pairs) && !v.alternative_pairs.is_empty() => {
                p.datasets.push(alt);
                let data = p.datasets.len() - 1;
                let title = format!("Table A3. IV estimates by drug type, taxonomy `{}`", t.name);
                p.drug_type_grid("tableA3", title, data, &v.alternative_pairs);
            }
            Ok(_) => p.skipped.push("tableA3: alternative pairs are not classes of the taxonomy".into()),
            Err(e) => p.skipped.push(format!("tableA3: {e}")),
        },
        Err(e) => p.skipped.push(format!("tableA3: {e}")),
    }

    let opts = IvOptions {
        vce: r.config.vce,
        weak_floor: m.weak_floor,
        include_fixed_effects: m.include_fixed_effects,
    };
    let instrument = m.external_instrument.as_deref();
    let fits: Vec<std::result::Result<CellFit, String>> = p
        .jobs
        .par_iter()
        .map(|j| {
            fit_cell(&p.datasets[j.data], &j.spec, j.estimator, &opts, instrument).map_err(|e| e.to_string())
        })
        .collect();

    let mut failed = 0;
    let mut total = 0;
    let mut tables = Vec::new();
    let (t1, t1_failed, t1_total) = descriptives_table(&ds, m, &treatment, &wave_notes);
    failed += t1_failed;
    total += t1_total;
    tables.push(TableOutput {
        stem: "table1".into(),
        table: t1,
    });

    for tp in p.tables {
        let cols: Vec<ColumnResult> = tp
            .columns
            .iter()
            .map(|c| match &fits[c.job] {
                Ok(f) => ColumnResult {
                    group: c.group.clone(),
                    method: c.method.clone(),
                    ..f.column.clone()
                },
                Err(msg) => ColumnResult {
                    group: c.group.clone(),
                    method: c.method.clone(),
                    estimate: Some(Err(msg.clone())),
                    ..Default::default()
                },
            })
            .collect();
        total += cols.len();
        failed += tp.columns.iter().filter(|c| fits[c.job].is_err()).count();
        let mut layout = tp.layout;
        if !tp.diffs.is_empty() {
            let mut cells = vec![Cell::Empty; cols.len()];
            for &(a, b) in &tp.diffs {
                cells[a] = match (&fits[tp.columns[a].job], &fits[tp.columns[b].job]) {
                    (Ok(x), Ok(y)) => {
                        let t = difference_test(x.estimate, y.estimate);
                        Cell::Estimate(EstimateCell {
                            coef: t.difference,
                            se: t.se,
                            p: t.p_value,
                        })
                    }
                    _ => Cell::Failed("needs both subgroup estimates".into()),
                };
            }
            layout.difference = Some(cells);
        }
        for (o, note) in &wave_notes {
            if tp.outcomes.contains(o) {
                layout.notes.push(note.clone());
            }
        }
        let weak: Vec<String> = tp
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| fits[c.job].as_ref().is_ok_and(|f| f.weak))
            .map(|(i, _)| format!("({})", hetiv::report::roman(i + 1)))
            .collect();
        if !weak.is_empty() {
            layout.notes.push(format!(
                "First-stage F below {} in column{} {}: the instruments are weak there.",
                m.weak_floor,
                if weak.len() == 1 { "" } else { "s" },
                weak.join(", ")
            ));
        }
        tables.push(TableOutput {
            stem: tp.stem,
            table: estimation_table(&layout, &cols),
        });
    }
    for s in &p.skipped {
        info!("skipped {s}");
    }
    Ok(ReplicationOutput {
        tables,
        failed_cells: failed,
        total_cells: total,
        skipped: p.skipped,
        filters: ds.provenance().filters.clone(),
    })
}

/// Weighted means and SDs of outcomes and drug-use indicators.
fn descriptives_table(
    ds: &Dataset,
    m: &ModelConfig,
    treatment: &str,
    wave_notes: &[(String, String)],
) -> (RenderedTable, usize, usize) {
    let mut vars: Vec<String> = m.outcomes.clone();
    vars.push(treatment.to_string());
    if let Some(t) = m.taxonomy.as_ref().and_then(|t| t.resolve().ok()) {
        vars.extend(t.classes().iter().map(|c| class_column(c)));
    }
    vars.extend(m.descriptives.iter().cloned());
    let mut unique: Vec<String> = Vec::new();
    for v in vars {
        if !unique.contains(&v) {
            unique.push(v);
        }
    }
    let mut failed = 0;
    let body = unique
        .iter()
        .map(|v| {
            let cells = match weighted_descriptives(ds, &[v.as_str()]) {
                Ok(d) => vec![Cell::number(d[0].mean, 3), Cell::number(d[0].sd, 3), Cell::Count(d[0].n)],
                Err(e) => {
                    failed += 1;
                    vec![Cell::Failed(e.to_string()), Cell::Empty, Cell::Empty]
                }
            };
            Row::new(m.label(v), cells)
        })
        .collect();
    let mut notes = Vec::new();
    if ds.weight_column().is_some() {
        notes.push("Means and standard deviations are weighted with sampling weights.".to_string());
    }
    notes.extend(wave_notes.iter().map(|(_, n)| n.clone()));
    let table = RenderedTable {
        title: "Table 1. Descriptive statistics".into(),
        headers: vec![vec!["Mean".into(), "SD".into(), "Observations".into()]],
        body,
        footer: Vec::new(),
        notes,
        legend: false,
    };
    (table, failed, unique.len())
}

/// Fails when the share of failed cells exceeds the configured tolerance.
pub fn check_failures(out: &ReplicationOutput, tolerance: f64) -> Result<()> {
    if out.total_cells > 0 && out.failed_cells as f64 > tolerance * out.total_cells as f64 {
        return Err(CliError::TooManyFailedCells {
            failed: out.failed_cells,
            total: out.total_cells,
            tolerance,
        });
    }
    Ok(())
}
