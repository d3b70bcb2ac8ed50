//! Drug taxonomies and class-level use indicators.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::dataset::{Column, Dataset};
use crate::error::{Error, Result};

/// Label of the class that every taxonomy implicitly contains.
pub const ANY_CLASS: &str = "any";

/// Survey recall period of the per-substance indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecallWindow {
    #[serde(rename = "30d")]
    LastMonth,
    #[serde(rename = "12m")]
    LastYear,
    #[serde(rename = "life")]
    Lifetime,
}

impl RecallWindow {
    pub fn suffix(self) -> &'static str {
        match self {
            RecallWindow::LastMonth => "30d",
            RecallWindow::LastYear => "12m",
            RecallWindow::Lifetime => "life",
        }
    }

    /// Name of the indicator column for `substance` in this window, e.g. `cannabis_12m`.
    pub fn column_for(self, substance: &str) -> String {
        format!("{substance}_{}", self.suffix())
    }
}

/// Maps substances to one or more classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrugTaxonomy {
    pub name: String,
    pub substance_to_class: IndexMap<String, Vec<String>>,
}

impl DrugTaxonomy {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            substance_to_class: IndexMap::new(),
        }
    }

    pub fn with(mut self, substance: &str, classes: &[&str]) -> Self {
        self.substance_to_class.insert(
            substance.to_string(),
            classes.iter().map(|c| c.to_string()).collect(),
        );
        self
    }

    /// Soft: tranquilisers, cannabis, inhalants. Hard: everything else surveyed.
    pub fn soft_hard() -> Self {
        let mut t = Self::new("soft_hard");
        for s in ["tranquilisers", "cannabis", "inhalants"] {
            t = t.with(s, &["soft"]);
        }
        for s in [
            "opiates",
            "sedatives",
            "stimulants",
            "cocaine",
            "crack",
            "hallucinogens",
            "heroin",
            "methamphetamines",
        ] {
            t = t.with(s, &["hard"]);
        }
        t
    }

    pub fn recreational_dependency() -> Self {
        let mut t = Self::new("recreational_dependency");
        for s in ["stimulants", "cannabis", "hallucinogens", "inhalants", "methamphetamines"] {
            t = t.with(s, &["recreational"]);
        }
        for s in ["opiates", "cocaine", "crack", "heroin", "tranquilisers", "sedatives"] {
            t = t.with(s, &["dependency"]);
        }
        t
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "soft_hard" => Some(Self::soft_hard()),
            "recreational_dependency" => Some(Self::recreational_dependency()),
            _ => None,
        }
    }

    /// Class labels in first-declared order, ending with `any`.
    pub fn classes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for classes in self.substance_to_class.values() {
            for c in classes {
                if c != ANY_CLASS && !out.contains(c) {
                    out.push(c.clone());
                }
            }
        }
        out.push(ANY_CLASS.to_string());
        out
    }

    /// Substances belonging to `class`; `any` covers every substance.
    pub fn members(&self, class: &str) -> Vec<&str> {
        self.substance_to_class
            .iter()
            .filter(|(_, cs)| class == ANY_CLASS || cs.iter().any(|c| c == class))
            .map(|(s, _)| s.as_str())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.substance_to_class.is_empty() {
            return Err(Error::Config(format!("taxonomy `{}` is empty", self.name)));
        }
        if let Some((s, _)) = self.substance_to_class.iter().find(|(_, c)| c.is_empty()) {
            return Err(Error::Config(format!(
                "taxonomy `{}`: substance `{s}` maps to no class",
                self.name
            )));
        }
        Ok(())
    }
}

/// Name of the indicator column added for `class`.
pub fn class_column(class: &str) -> String {
    format!("use_{class}")
}

/// Combines member indicators: 1 if any member is 1, missing only when all
/// members are missing, 0 otherwise.
pub fn union_with_missing(members: impl IntoIterator<Item = Option<bool>>) -> Option<bool> {
    let mut seen = false;
    for m in members {
        match m {
            Some(true) => return Some(true),
            Some(false) => seen = true,
            None => {}
        }
    }
    seen.then_some(false)
}

/// Adds one binary `use_<class>` column per taxonomy class, including `use_any`.
pub fn code_drug_use(d: &Dataset, t: &DrugTaxonomy, window: RecallWindow) -> Result<Dataset> {
    t.validate()?;
    let mut indicators: IndexMap<&str, &Vec<Option<bool>>> = IndexMap::new();
    for substance in t.substance_to_class.keys() {
        let col = window.column_for(substance);
        match d.column(&col) {
            Ok(Column::Binary(v)) => {
                indicators.insert(substance.as_str(), v);
            }
            Ok(_) => {
                return Err(Error::ColumnType {
                    column: col,
                    expected: "binary",
                })
            }
            Err(_) => {
                return Err(Error::MissingSubstance {
                    taxonomy: t.name.clone(),
                    column: col,
                })
            }
        }
    }
    let mut out = d.clone();
    for class in t.classes() {
        let members = t.members(&class);
        let values: Vec<Option<bool>> = (0..d.rows())
            .map(|i| union_with_missing(members.iter().map(|m| indicators[m][i])))
            .collect();
        out.insert_column(class_column(&class), Column::Binary(values))?;
    }
    out.provenance_mut().filters.push(format!(
        "coded drug use with taxonomy `{}` over window {}",
        t.name,
        window.suffix()
    ));
    Ok(out)
}
