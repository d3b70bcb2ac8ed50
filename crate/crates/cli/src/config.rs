//! Run configuration: TOML with one section per stage. Unknown keys are
//! rejected with their location; omitted keys take documented defaults and
//! are listed in the echo.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use hetiv::montecarlo::{DgpConfig, EstimatorKind};
use hetiv::regression::VceKind;
use hetiv::report::Format;
use hetiv::survey::{ColumnKind, DrugTaxonomy, RecallWindow, RestrictionSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUT: &str = "hetiv-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Replicate,
    Montecarlo,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Replicate => "replicate",
            Mode::Montecarlo => "montecarlo",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Human,
    Csv,
}

impl OutputFormat {
    pub fn format(self) -> Format {
        match self {
            OutputFormat::Human => Format::Human,
            OutputFormat::Csv => Format::Csv,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Human => "txt",
            OutputFormat::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstrumentMode {
    #[default]
    Lewbel,
    External,
    Both,
}

/// A built-in taxonomy name or an inline substance-to-class table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TaxonomyChoice {
    Builtin(String),
    Custom(DrugTaxonomy),
}

impl TaxonomyChoice {
    pub fn resolve(&self) -> Result<DrugTaxonomy> {
        match self {
            TaxonomyChoice::Builtin(name) => DrugTaxonomy::builtin(name).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown taxonomy `{name}` (built-ins: soft_hard, recreational_dependency)"
                ))
            }),
            TaxonomyChoice::Custom(t) => {
                t.validate()?;
                Ok(t.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub vce: VceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<RestrictionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgroups: Option<SubgroupConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variants: Option<VariantConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub montecarlo: Option<MonteCarloConfig>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_out() -> PathBuf {
    PathBuf::from(DEFAULT_OUT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub input: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    /// Survey wave; outcomes absent from a whole wave get a footnote.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave_column: Option<String>,
    /// Every column of the file with its type.
    pub columns: BTreeMap<String, ColumnKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub outcomes: Vec<String>,
    /// Treatment column; defaults to `use_any` when a taxonomy is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treatment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<TaxonomyChoice>,
    #[serde(default = "default_window")]
    pub window: RecallWindow,
    #[serde(default)]
    pub controls: Vec<String>,
    #[serde(default)]
    pub squared: Vec<String>,
    #[serde(default)]
    pub factors: Vec<String>,
    #[serde(default)]
    pub fixed_effects: Vec<String>,
    #[serde(default)]
    pub instrument: InstrumentMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_instrument: Option<String>,
    #[serde(default)]
    pub weighted: bool,
    #[serde(default = "default_weak_floor")]
    pub weak_floor: f64,
    #[serde(default)]
    pub include_fixed_effects: bool,
    /// Extra Table 1 variables beyond outcomes and treatments.
    #[serde(default)]
    pub descriptives: Vec<String>,
    /// Share of failed cells above which the run exits with code 4.
    #[serde(default = "default_failure_tolerance")]
    pub failure_tolerance: f64,
    /// Display names of outcomes.
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
    /// Per-outcome binary row masks (e.g. labour-force membership).
    #[serde(default)]
    pub masks: BTreeMap<String, String>,
}

fn default_window() -> RecallWindow {
    RecallWindow::LastYear
}

fn default_weak_floor() -> f64 {
    hetiv::iv::DEFAULT_WEAK_FLOOR
}

fn default_failure_tolerance() -> f64 {
    0.25
}

impl ModelConfig {
    pub fn treatment_column(&self) -> Option<String> {
        self.treatment
            .clone()
            .or_else(|| self.taxonomy.as_ref().map(|_| "use_any".to_string()))
    }

    pub fn label<'a>(&'a self, outcome: &'a str) -> &'a str {
        self.labels.get(outcome).map_or(outcome, String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubgroupConfig {
    /// Inclusive `[low, high]` ages; bands may not overlap.
    pub age_bands: Vec<[f64; 2]>,
    pub education_column: String,
    pub education_low: Vec<String>,
    pub education_high: Vec<String>,
    /// Taxonomy classes compared side by side.
    pub drug_pairs: Vec<[String; 2]>,
}

impl Default for SubgroupConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        Self {
            age_bands: vec![[22.0, 35.0], [36.0, 50.0]],
            education_column: "education".into(),
            education_low: s(&["less than primary", "primary", "lower secondary"]),
            education_high: s(&["upper secondary", "higher"]),
            drug_pairs: vec![["soft".into(), "hard".into()]],
        }
    }
}

pub fn band_label(b: &[f64; 2]) -> String {
    format!("{}-{}", b[0], b[1])
}

/// Covariate-exclusion re-runs and the alternative taxonomy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariantConfig {
    /// Dropped in the first re-run (marital status and education).
    pub title_exclusions: Vec<String>,
    /// Dropped in the second re-run (marital status only).
    pub note_exclusions: Vec<String>,
    pub alternative_taxonomy: TaxonomyChoice,
    pub alternative_pairs: Vec<[String; 2]>,
}

impl Default for VariantConfig {
    fn default() -> Self {
        Self {
            title_exclusions: vec!["marital".into(), "education".into()],
            note_exclusions: vec!["marital".into()],
            alternative_taxonomy: TaxonomyChoice::Builtin("recreational_dependency".into()),
            alternative_pairs: vec![["recreational".into(), "dependency".into()]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    pub reps: usize,
    pub estimators: Vec<EstimatorKind>,
    pub weak_floor: f64,
    /// Level of the Hansen J rejection rate.
    pub j_level: f64,
    pub ci_level: f64,
    /// Every scenario starts from this process.
    pub base: DgpConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<ScenarioConfig>,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            reps: 500,
            estimators: vec![EstimatorKind::Ols, EstimatorKind::Lewbel],
            weak_floor: hetiv::iv::DEFAULT_WEAK_FLOOR,
            j_level: 0.05,
            ci_level: 0.95,
            base: DgpConfig::default(),
            grid: None,
            scenarios: Vec::new(),
        }
    }
}

/// Cartesian product of parameter values; empty axes are not varied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rho: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub delta: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub feedback: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub beta: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub false_negative: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub false_positive: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub exclusion_violation: Vec<f64>,
}

impl GridConfig {
    fn axes(&self) -> Vec<(&'static str, &[f64])> {
        [
            ("rho", &self.rho[..]),
            ("delta", &self.delta[..]),
            ("feedback", &self.feedback[..]),
            ("beta", &self.beta[..]),
            ("false_negative", &self.false_negative[..]),
            ("false_positive", &self.false_positive[..]),
            ("exclusion_violation", &self.exclusion_violation[..]),
        ]
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .collect()
    }
}

fn set_axis(c: &mut DgpConfig, axis: &str, v: f64) {
    match axis {
        "rho" => c.rho = v,
        "delta" => c.delta = v,
        "feedback" => c.feedback = v,
        "beta" => c.beta = v,
        "false_negative" => c.misclass.0 = v,
        "false_positive" => c.misclass.1 = v,
        "exclusion_violation" => c.exclusion_violation = v,
        _ => unreachable!("unknown grid axis {axis}"),
    }
}

/// A named scenario: keys of the synthetic process overriding `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(flatten)]
    pub overrides: toml::Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub dgp: DgpConfig,
}

impl MonteCarloConfig {
    /// Explicit scenarios first, then the grid; `baseline` when neither is set.
    pub fn resolve_scenarios(&self) -> Result<Vec<Scenario>> {
        let mut out = Vec::new();
        for s in &self.scenarios {
            if s.overrides.contains_key("seed") {
                return Err(CliError::Config(format!(
                    "scenario `{}`: set `seed` at the top level, not per scenario",
                    s.name
                )));
            }
            let mut table = toml::Table::try_from(&self.base)
                .map_err(|e| CliError::Config(format!("cannot serialize base process: {e}")))?;
            for (k, v) in &s.overrides {
                table.insert(k.clone(), v.clone());
            }
            let dgp: DgpConfig = toml::Value::Table(table)
                .try_into()
                .map_err(|e| CliError::Config(format!("scenario `{}`: {e}", s.name)))?;
            out.push(Scenario {
                name: s.name.clone(),
                dgp,
            });
        }
        if let Some(g) = &self.grid {
            let axes = g.axes();
            let total: usize = axes.iter().map(|(_, v)| v.len()).product();
            for mut idx in 0..total {
                let mut dgp = self.base.clone();
                let mut parts = Vec::with_capacity(axes.len());
                // last axis varies fastest
                let mut picks = vec![0; axes.len()];
                for (a, (_, values)) in axes.iter().enumerate().rev() {
                    picks[a] = idx % values.len();
                    idx /= values.len();
                }
                for (a, (name, values)) in axes.iter().enumerate() {
                    let v = values[picks[a]];
                    set_axis(&mut dgp, name, v);
                    parts.push(format!("{name}={v}"));
                }
                out.push(Scenario {
                    name: parts.join(" "),
                    dgp,
                });
            }
        }
        if out.is_empty() {
            out.push(Scenario {
                name: "baseline".into(),
                dgp: self.base.clone(),
            });
        }
        let mut names: Vec<&str> = out.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Config(format!("duplicate scenario name `{}`", w[0])));
        }
        Ok(out)
    }
}

/// Values given on the command line; they win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub format: Option<OutputFormat>,
}

/// A validated configuration together with what was filled in for it.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub mode: Mode,
    pub config: RunConfig,
    /// Dotted keys absent from the file that took their default.
    pub defaulted: Vec<String>,
    /// Dotted keys set by command-line flags.
    pub overridden: Vec<String>,
}

impl ResolvedConfig {
    /// The resolved configuration as TOML, preceded by the defaulted keys.
    pub fn echo(&self) -> String {
        let mut s = String::from("# resolved configuration\n");
        if !self.defaulted.is_empty() {
            s.push_str("# defaults applied: ");
            s.push_str(&self.defaulted.join(", "));
            s.push('\n');
        }
        if !self.overridden.is_empty() {
            s.push_str("# set on the command line: ");
            s.push_str(&self.overridden.join(", "));
            s.push('\n');
        }
        s.push_str(&toml::to_string(&self.config).expect("config serializes"));
        s
    }

    pub fn model(&self) -> &ModelConfig {
        self.config.model.as_ref().expect("validated")
    }

    pub fn montecarlo(&self) -> &MonteCarloConfig {
        self.config.montecarlo.as_ref().expect("validated")
    }
}

pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<ResolvedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let base_dir = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base_dir, overrides)
        .map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
}

/// Parses, fills defaults, applies `overrides` and validates. Relative
/// paths in the file are taken relative to `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path, overrides: &Overrides) -> Result<ResolvedConfig> {
    let raw: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    let mut config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;

    let mode = match (config.mode, overrides.mode) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(format!(
                "contradictory modes: the file sets mode = \"{a}\" but the `{b}` subcommand was used"
            )))
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => return Err(CliError::Config("missing required key `mode`".into())),
    };
    config.mode = Some(mode);
    if config.out.is_relative() && raw.contains_key("out") {
        config.out = base_dir.join(&config.out);
    }

    match mode {
        Mode::Replicate => {
            let data = config
                .data
                .as_mut()
                .ok_or_else(|| CliError::Config("missing required key `data.input` for replicate mode".into()))?;
            if data.input.is_relative() {
                data.input = base_dir.join(&data.input);
            }
            if config.model.is_none() {
                return Err(CliError::Config("missing required section [model] for replicate mode".into()));
            }
            config.subgroups.get_or_insert_with(SubgroupConfig::default);
            config.variants.get_or_insert_with(VariantConfig::default);
            if config.montecarlo.is_some() {
                log::warn!("[montecarlo] is ignored in replicate mode");
            }
        }
        Mode::Montecarlo => {
            let mc = config.montecarlo.get_or_insert_with(MonteCarloConfig::default);
            let base_seed = raw
                .get("montecarlo")
                .and_then(|m| m.get("base"))
                .and_then(|b| b.get("seed"))
                .and_then(toml::Value::as_integer);
            match (raw.contains_key("seed"), base_seed) {
                (true, Some(b)) if b as u64 != config.seed => {
                    return Err(CliError::Config(format!(
                        "contradictory seeds: seed = {} but montecarlo.base.seed = {b}",
                        config.seed
                    )))
                }
                (false, Some(b)) => config.seed = b as u64,
                _ => {}
            }
            mc.base.seed = config.seed;
        }
    }

    let resolved_table = toml::Table::try_from(&config)
        .map_err(|e| CliError::Config(format!("cannot serialize configuration: {e}")))?;
    let given = leaf_keys(&raw);
    let mut defaulted: Vec<String> = leaf_keys(&resolved_table)
        .into_iter()
        .filter(|k| !given.iter().any(|g| g == k || k.starts_with(&format!("{g}."))))
        .collect();

    let mut overridden = Vec::new();
    if let Some(seed) = overrides.seed {
        config.seed = seed;
        if let Some(mc) = config.montecarlo.as_mut() {
            mc.base.seed = seed;
        }
        overridden.push("seed".to_string());
    }
    if let Some(out) = &overrides.out {
        config.out = out.clone();
        overridden.push("out".to_string());
    }
    if let Some(t) = overrides.threads {
        config.threads = t;
        overridden.push("threads".to_string());
    }
    if let Some(f) = overrides.format {
        config.format = f;
        overridden.push("format".to_string());
    }
    defaulted.retain(|k| !overridden.contains(k) && !(k == "montecarlo.base.seed" && overridden.iter().any(|o| o == "seed")));

    let resolved = ResolvedConfig {
        mode,
        config,
        defaulted,
        overridden,
    };
    validate(&resolved)?;
    Ok(resolved)
}

fn leaf_keys(t: &toml::Table) -> Vec<String> {
    fn walk(t: &toml::Table, prefix: &str, out: &mut Vec<String>) {
        for (k, v) in t {
            let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            match v {
                toml::Value::Table(inner) if !inner.is_empty() => walk(inner, &key, out),
                _ => out.push(key),
            }
        }
    }
    let mut out = Vec::new();
    walk(t, "", &mut out);
    out
}

fn validate(r: &ResolvedConfig) -> Result<()> {
    let c = &r.config;
    let bad = |m: String| Err(CliError::Config(m));
    match r.mode {
        Mode::Replicate => {
            let data = c.data.as_ref().expect("checked");
            if !data.input.is_file() {
                return bad(format!("input file {} does not exist", data.input.display()));
            }
            if let Some(w) = &data.weight {
                if !data.columns.contains_key(w) {
                    return bad(format!("weight column `{w}` is not listed in data.columns"));
                }
            }
            if let Some(s) = &c.sample {
                s.validate()?;
            }
            let m = r.model();
            if m.outcomes.is_empty() {
                return bad("model.outcomes is empty".into());
            }
            if m.treatment_column().is_none() {
                return bad("missing required key `model.treatment` (or set `model.taxonomy`)".into());
            }
            if let Some(t) = &m.taxonomy {
                t.resolve()?;
            }
            if m.instrument != InstrumentMode::Lewbel && m.external_instrument.is_none() {
                return bad("instrument mode needs `model.external_instrument`".into());
            }
            if !(m.weak_floor > 0.0) {
                return bad(format!("model.weak_floor = {} must be positive", m.weak_floor));
            }
            if !(0.0..=1.0).contains(&m.failure_tolerance) {
                return bad(format!("model.failure_tolerance = {} is outside [0, 1]", m.failure_tolerance));
            }
            let sg = c.subgroups.as_ref().expect("filled");
            validate_bands(&sg.age_bands)?;
            if let Some(level) = sg.education_low.iter().find(|l| sg.education_high.contains(l)) {
                return bad(format!("education level `{level}` is both low and high"));
            }
        }
        Mode::Montecarlo => {
            let mc = r.montecarlo();
            if mc.reps < 2 {
                return bad(format!("montecarlo.reps = {} (need at least 2)", mc.reps));
            }
            if mc.estimators.is_empty() {
                return bad("montecarlo.estimators is empty".into());
            }
            for (i, e) in mc.estimators.iter().enumerate() {
                if mc.estimators[..i].contains(e) {
                    return bad(format!("estimator `{e}` listed twice"));
                }
            }
            for (name, v) in [("ci_level", mc.ci_level), ("j_level", mc.j_level)] {
                if !(v > 0.0 && v < 1.0) {
                    return bad(format!("montecarlo.{name} = {v} is outside (0, 1)"));
                }
            }
            if !(mc.weak_floor > 0.0) {
                return bad(format!("montecarlo.weak_floor = {} must be positive", mc.weak_floor));
            }
            for s in mc.resolve_scenarios()? {
                s.dgp
                    .validate()
                    .map_err(|e| CliError::Config(format!("scenario `{}`: {e}", s.name)))?;
                if mc.estimators.contains(&EstimatorKind::External) && s.dgp.external.is_none() {
                    return bad(format!(
                        "scenario `{}` has no external instrument but the external estimator is requested",
                        s.name
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Bands are inclusive, so touching endpoints overlap.
pub fn validate_bands(bands: &[[f64; 2]]) -> Result<()> {
    for b in bands {
        if !(b[0] <= b[1]) {
            return Err(CliError::Config(format!("age band {} is empty", band_label(b))));
        }
    }
    for (i, a) in bands.iter().enumerate() {
        for b in &bands[i + 1..] {
            if a[0] <= b[1] && b[0] <= a[1] {
                return Err(CliError::Config(format!(
                    "age bands {} and {} overlap",
                    band_label(a),
                    band_label(b)
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mc(text: &str) -> Result<ResolvedConfig> {
        parse_config_str(text, Path::new("."), &Overrides {
            mode: Some(Mode::Montecarlo),
            ..Default::default()
        })
    }

    #[test]
    fn seed_only_config_lists_every_default() {
        let r = mc("seed = 7\n").unwrap();
        assert_eq!(r.montecarlo().base.seed, 7);
        for key in ["out", "format", "montecarlo.reps", "montecarlo.base.delta", "montecarlo.base.n"] {
            assert!(r.defaulted.iter().any(|k| k == key), "{key} missing from {:?}", r.defaulted);
        }
        assert!(!r.defaulted.iter().any(|k| k == "seed"));
        assert!(r.echo().contains("reps = 500"));
    }

    #[test]
    fn unknown_key_is_located() {
        let e = mc("seed = 1\n[montecarlo]\nrepz = 3\n").unwrap_err().to_string();
        assert!(e.contains("repz") && e.contains("line 3"), "{e}");
    }

    #[test]
    fn contradictory_modes() {
        let e = mc("mode = \"replicate\"\n").unwrap_err().to_string();
        assert!(e.contains("contradictory"), "{e}");
    }

    #[test]
    fn overlapping_bands_cite_both() {
        let e = validate_bands(&[[22.0, 35.0], [30.0, 50.0]]).unwrap_err().to_string();
        assert!(e.contains("22-35") && e.contains("30-50"), "{e}");
        validate_bands(&[[22.0, 35.0], [36.0, 50.0]]).unwrap();
    }

    #[test]
    fn grid_is_a_cartesian_product() {
        let r = mc("[montecarlo.grid]\nrho = [0.0, 0.3]\ndelta = [0.0, 1.0]\n").unwrap();
        let s = r.montecarlo().resolve_scenarios().unwrap();
        let names: Vec<&str> = s.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["rho=0 delta=0", "rho=0 delta=1", "rho=0.3 delta=0", "rho=0.3 delta=1"]);
        assert_eq!(s[2].dgp.rho, 0.3);
        assert_eq!(s[2].dgp.delta, 0.0);
    }

    #[test]
    fn scenario_overrides_are_checked() {
        let r = mc("[[montecarlo.scenarios]]\nname = \"fb\"\nfeedback = 0.5\n").unwrap();
        assert_eq!(r.montecarlo().resolve_scenarios().unwrap()[0].dgp.feedback, 0.5);
        assert!(mc("[[montecarlo.scenarios]]\nname = \"x\"\nfedback = 0.5\n").is_err());
    }

    #[test]
    fn flags_override_the_file() {
        let r = parse_config_str("seed = 1\n", Path::new("."), &Overrides {
            mode: Some(Mode::Montecarlo),
            seed: Some(9),
            threads: Some(3),
            ..Default::default()
        })
        .unwrap();
        assert_eq!((r.config.seed, r.montecarlo().base.seed, r.config.threads), (9, 9, 3));
        assert!(r.overridden.contains(&"threads".to_string()));
        assert!(!r.defaulted.contains(&"threads".to_string()));
    }

    #[test]
    fn replicate_needs_an_existing_input() {
        let text = "mode = \"replicate\"\n[data]\ninput = \"nowhere/survey.csv\"\ncolumns = { y = \"binary\" }\n[model]\noutcomes = [\"y\"]\ntreatment = \"d\"\n";
        let e = parse_config_str(text, Path::new("/tmp"), &Overrides::default()).unwrap_err().to_string();
        assert!(e.contains("/tmp/nowhere/survey.csv"), "{e}");
    }
}
