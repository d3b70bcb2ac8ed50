use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{DgpConfig, SimulatedSample};
use crate::dist::normal_quantile;
use crate::error::{Error, Result};
use crate::iv::{external_iv_fit, lewbel_fit, IvFitResult, IvOptions};
use crate::regression::{ols_fit, DesignMatrix, VceKind};

/// Share of failed replications that aborts a run.
pub const MAX_FAILURE_SHARE: f64 = 0.05;

/// Name of the treatment coefficient in simulated fits.
pub const TREATMENT: &str = "d";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Ols,
    Lewbel,
    External,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Ols => "ols",
            EstimatorKind::Lewbel => "lewbel",
            EstimatorKind::External => "external",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ols" => Ok(EstimatorKind::Ols),
            "lewbel" => Ok(EstimatorKind::Lewbel),
            "external" => Ok(EstimatorKind::External),
            _ => Err(Error::Config(format!("unknown estimator `{s}`"))),
        }
    }
}

/// Estimation settings shared by every replication.
#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    pub vce: VceKind,
    pub weak_floor: f64,
    /// Nominal level of the Hansen J rejection rate.
    pub j_level: f64,
    pub ci_level: f64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            vce: VceKind::Hc1,
            weak_floor: crate::iv::DEFAULT_WEAK_FLOOR,
            j_level: 0.05,
            ci_level: 0.95,
        }
    }
}

/// One estimator's output in one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub estimate: f64,
    pub se: f64,
    pub first_stage_f: Option<f64>,
    pub weak: Option<bool>,
    pub j_p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub rep: usize,
    pub seed: u64,
    /// In the order of the requested estimators; `Err` holds the message.
    pub outcome: std::result::Result<Vec<EstimateRecord>, String>,
    pub clamped_share: f64,
    pub prevalence: f64,
}

/// Per-replication seed: a SplitMix64 finalizer over `(master, r)`.
pub fn replication_seed(master: u64, r: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(master) ^ (r as u64))
}

fn iv_record(f: &IvFitResult<f64>) -> EstimateRecord {
    EstimateRecord {
        estimate: f.beta(),
        se: f.beta_se(),
        first_stage_f: Some(f.first_stage_f.statistic),
        weak: Some(f.weak),
        j_p_value: f.hansen_j.p_value(),
    }
}

/// Fits every requested estimator on one simulated sample.
pub fn fit_sample(
    s: &SimulatedSample,
    estimators: &[EstimatorKind],
    opts: &McOptions,
) -> Result<Vec<EstimateRecord>> {
    let x = DesignMatrix::from_columns(&["x1", "x2"], &[&s.x1[..], &s.x2[..]], true)?;
    let iv_opts = IvOptions {
        vce: opts.vce,
        weak_floor: opts.weak_floor,
        include_fixed_effects: false,
    };
    estimators
        .iter()
        .map(|kind| match kind {
            EstimatorKind::Ols => {
                let xd = DesignMatrix::unpruned(
                    {
                        let mut m = x.matrix().clone();
                        m.push_column(&s.d)?;
                        m
                    },
                    vec!["_cons".into(), "x1".into(), "x2".into(), TREATMENT.into()],
                    {
                        let mut r = x.roles().to_vec();
                        r.push(crate::regression::ColumnRole::Regressor);
                        r
                    },
                )?;
                let f = ols_fit(&xd, &s.y, None, opts.vce)?;
                Ok(EstimateRecord {
                    estimate: f.coefficients[3],
                    se: f.std_errors[3],
                    first_stage_f: None,
                    weak: None,
                    j_p_value: None,
                })
            }
            EstimatorKind::Lewbel => {
                lewbel_fit(&s.y, &x, &s.d, TREATMENT, None, &iv_opts).map(|f| iv_record(&f))
            }
            EstimatorKind::External => {
                let w = s.w.as_ref().ok_or_else(|| {
                    Error::Config("external estimator requires an external instrument in the DGP".into())
                })?;
                external_iv_fit(&s.y, &x, &s.d, TREATMENT, "w", w, None, &iv_opts)
                    .map(|f| iv_record(&f))
            }
        })
        .collect()
}

/// Simulates and fits one replication with an explicit seed.
pub fn run_replication(
    c: &DgpConfig,
    threshold: f64,
    estimators: &[EstimatorKind],
    opts: &McOptions,
    rep: usize,
    seed: u64,
) -> ReplicationResult {
    let s = c.sample_with(seed, threshold);
    let prevalence = s.d_true.iter().sum::<f64>() / s.len() as f64;
    ReplicationResult {
        rep,
        seed,
        outcome: fit_sample(&s, estimators, opts).map_err(|e| e.to_string()),
        clamped_share: s.clamped_share,
        prevalence,
    }
}

/// Runs `reps` replications in parallel on the current rayon pool.
///
/// Results come back in replication order, so anything computed from them
/// is independent of the thread count.
pub fn run_replications(
    c: &DgpConfig,
    estimators: &[EstimatorKind],
    reps: usize,
    opts: &McOptions,
) -> Result<Vec<ReplicationResult>> {
    c.validate()?;
    if reps < 2 {
        return Err(Error::Config(format!("reps = {reps}; at least 2 are required")));
    }
    if estimators.is_empty() {
        return Err(Error::Config("no estimators requested".into()));
    }
    if estimators.contains(&EstimatorKind::External) && c.external.is_none() {
        return Err(Error::Config(
            "external estimator requires an external instrument in the DGP".into(),
        ));
    }
    let t = c.calibrate_threshold()?;
    Ok((0..reps)
        .into_par_iter()
        .map(|r| run_replication(c, t, estimators, opts, r, replication_seed(c.seed, r)))
        .collect())
}

/// Aggregates over successful replications for one estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub mean: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Divisor R, so that `rmse² = bias² + sd²`.
    pub sd: f64,
    pub mean_se: f64,
    pub coverage: f64,
    pub share_negative: f64,
    /// Share with `|estimate| < |beta|`.
    pub share_closer_to_zero: f64,
    pub median_f: Option<f64>,
    pub weak_rate: Option<f64>,
    pub j_rejection_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub config: DgpConfig,
    pub reps: usize,
    pub failed: usize,
    pub mean_prevalence: f64,
    pub mean_clamped_share: f64,
    pub estimators: Vec<EstimatorSummary>,
}

impl McSummary {
    pub fn estimator(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|s| s.estimator == kind)
    }

    /// Machine-readable rows: one per estimator.
    pub fn csv_header() -> &'static [&'static str] {
        &[
            "estimator",
            "reps",
            "failed",
            "beta",
            "mean",
            "bias",
            "rmse",
            "sd",
            "mean_se",
            "coverage",
            "median_f",
            "weak_rate",
            "j_rejection_rate",
            "share_closer_to_zero",
        ]
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
        self.estimators
            .iter()
            .map(|s| {
                vec![
                    s.estimator.to_string(),
                    self.reps.to_string(),
                    self.failed.to_string(),
                    format!("{:.6}", self.config.beta),
                    format!("{:.6}", s.mean),
                    format!("{:.6}", s.bias),
                    format!("{:.6}", s.rmse),
                    format!("{:.6}", s.sd),
                    format!("{:.6}", s.mean_se),
                    format!("{:.6}", s.coverage),
                    opt(s.median_f),
                    opt(s.weak_rate),
                    opt(s.j_rejection_rate),
                    format!("{:.6}", s.share_closer_to_zero),
                ]
            })
            .collect()
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Summarizes replication results in replication order.
pub fn summarize(
    c: &DgpConfig,
    estimators: &[EstimatorKind],
    results: &[ReplicationResult],
    opts: &McOptions,
) -> Result<McSummary> {
    let reps = results.len();
    let failures: Vec<&ReplicationResult> = results.iter().filter(|r| r.outcome.is_err()).collect();
    let failed = failures.len();
    for f in &failures {
        warn!(
            "replication {} (seed {}) skipped: {}",
            f.rep,
            f.seed,
            f.outcome.as_ref().err().map_or("", String::as_str)
        );
    }
    if failed as f64 > MAX_FAILURE_SHARE * reps as f64 || failed == reps {
        return Err(Error::TooManyFailures {
            failed,
            reps,
            first: failures
                .first()
                .and_then(|f| f.outcome.as_ref().err().cloned())
                .unwrap_or_default(),
        });
    }
    let ok: Vec<&Vec<EstimateRecord>> = results.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let m = ok.len() as f64;
    let z = normal_quantile(0.5 + opts.ci_level / 2.0);
    let beta = c.beta;
    let mut out = Vec::with_capacity(estimators.len());
    for (i, &kind) in estimators.iter().enumerate() {
        let recs: Vec<&EstimateRecord> = ok.iter().map(|v| &v[i]).collect();
        let share = |pred: &dyn Fn(&EstimateRecord) -> bool| {
            recs.iter().filter(|r| pred(r)).count() as f64 / m
        };
        let mean = recs.iter().map(|r| r.estimate).sum::<f64>() / m;
        let bias = mean - beta;
        let sd = (recs.iter().map(|r| (r.estimate - mean).powi(2)).sum::<f64>() / m).sqrt();
        let rmse = (recs.iter().map(|r| (r.estimate - beta).powi(2)).sum::<f64>() / m).sqrt();
        let mean_se = recs.iter().map(|r| r.se).sum::<f64>() / m;
        let coverage = share(&|r| (r.estimate - beta).abs() <= z * r.se);
        let mut fs: Vec<f64> = recs.iter().filter_map(|r| r.first_stage_f).collect();
        let median_f = (!fs.is_empty()).then(|| median(&mut fs));
        let weak_rate = (kind != EstimatorKind::Ols).then(|| share(&|r| r.weak == Some(true)));
        let js: Vec<f64> = recs.iter().filter_map(|r| r.j_p_value).collect();
        let j_rejection_rate = (!js.is_empty())
            .then(|| js.iter().filter(|&&p| p < opts.j_level).count() as f64 / js.len() as f64);
        out.push(EstimatorSummary {
            estimator: kind,
            mean,
            bias,
            rmse,
            sd,
            mean_se,
            coverage,
            share_negative: share(&|r| r.estimate < 0.0),
            share_closer_to_zero: share(&|r| r.estimate.abs() < beta.abs()),
            median_f,
            weak_rate,
            j_rejection_rate,
        });
    }
    Ok(McSummary {
        config: c.clone(),
        reps,
        failed,
        mean_prevalence: results.iter().map(|r| r.prevalence).sum::<f64>() / reps as f64,
        mean_clamped_share: results.iter().map(|r| r.clamped_share).sum::<f64>() / reps as f64,
        estimators: out,
    })
}

/// Simulates `reps` replications of `c`, fits each estimator and summarizes.
pub fn run_mc(c: &DgpConfig, estimators: &[EstimatorKind], reps: usize) -> Result<McSummary> {
    run_mc_with(c, estimators, reps, &McOptions::default())
}

pub fn run_mc_with(
    c: &DgpConfig,
    estimators: &[EstimatorKind],
    reps: usize,
    opts: &McOptions,
) -> Result<McSummary> {
    let results = run_replications(c, estimators, reps, opts)?;
    summarize(c, estimators, &results, opts)
}
