//! Sample restrictions: age window, sex, and main-activity exclusions.

use log::warn;
use serde::{Deserialize, Serialize};

use super::dataset::{Column, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestrictionSpec {
    pub min_age: f64,
    pub max_age: f64,
    #[serde(default = "default_age_column")]
    pub age_column: String,
    /// `(column, level)`: keep only rows whose categorical `column` equals `level`.
    #[serde(default)]
    pub sex_filter: Option<(String, String)>,
    #[serde(default = "default_activity_column")]
    pub activity_column: String,
    /// Levels of the activity column that exclude a row.
    #[serde(default)]
    pub activity_exclusions: Vec<String>,
}

fn default_age_column() -> String {
    "age".into()
}

fn default_activity_column() -> String {
    "activity".into()
}

impl Default for RestrictionSpec {
    /// Men aged 22-50 who are not in education, disabled or retired.
    fn default() -> Self {
        Self {
            min_age: 22.0,
            max_age: 50.0,
            age_column: default_age_column(),
            sex_filter: Some(("sex".into(), "male".into())),
            activity_column: default_activity_column(),
            activity_exclusions: vec!["education".into(), "disabled".into(), "retired".into()],
        }
    }
}

impl RestrictionSpec {
    pub fn age_window(min_age: f64, max_age: f64) -> Self {
        Self {
            min_age,
            max_age,
            age_column: default_age_column(),
            sex_filter: None,
            activity_column: default_activity_column(),
            activity_exclusions: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_age <= self.max_age) {
            return Err(Error::Restriction(format!(
                "min_age {} exceeds max_age {}",
                self.min_age, self.max_age
            )));
        }
        Ok(())
    }
}

/// Keeps the rows that are known to satisfy every restriction.
///
/// Age bounds are inclusive. A row with a missing value in any column a
/// restriction reads is dropped. Row order is preserved and a line per
/// restriction is appended to the filter log.
pub fn apply_restrictions(d: &Dataset, r: &RestrictionSpec) -> Result<Dataset> {
    r.validate()?;
    let age = d.column(&r.age_column)?;
    if age.kind() == super::ColumnKind::Categorical {
        return Err(Error::ColumnType {
            column: r.age_column.clone(),
            expected: "numeric",
        });
    }
    let sex = match &r.sex_filter {
        Some((col, level)) => Some((categorical(d, col)?, level.as_str())),
        None => None,
    };
    let activity = if r.activity_exclusions.is_empty() {
        None
    } else {
        Some(categorical(d, &r.activity_column)?)
    };

    let before = d.rows();
    let mut out = d.filter(|i| {
        let age_ok = age
            .value(i)
            .is_some_and(|a| a >= r.min_age && a <= r.max_age);
        let sex_ok = sex.is_none_or(|(c, level)| c.level(i) == Some(level));
        let act_ok = activity.is_none_or(|c| {
            c.level(i)
                .is_some_and(|l| !r.activity_exclusions.iter().any(|x| x == l))
        });
        age_ok && sex_ok && act_ok
    });
    let after = out.rows();
    out.provenance_mut().filters.push(format!(
        "{} in [{}, {}]{}{}: {} -> {} rows",
        r.age_column,
        r.min_age,
        r.max_age,
        r.sex_filter
            .as_ref()
            .map(|(c, l)| format!("; {c} == {l}"))
            .unwrap_or_default(),
        if r.activity_exclusions.is_empty() {
            String::new()
        } else {
            format!("; {} not in {:?}", r.activity_column, r.activity_exclusions)
        },
        before,
        after
    ));
    if out.rows() == 0 {
        let msg = "restrictions removed every row".to_string();
        warn!("{msg}");
        out.provenance_mut().warnings.push(msg);
    }
    Ok(out)
}

fn categorical<'a>(d: &'a Dataset, name: &str) -> Result<&'a Column> {
    let c = d.column(name)?;
    match c {
        Column::Categorical { .. } => Ok(c),
        _ => Err(Error::ColumnType {
            column: name.to_string(),
            expected: "categorical",
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ages(v: &[f64]) -> Dataset {
        Dataset::new(v.len())
            .with_column("age", Column::Numeric(v.iter().map(|&a| Some(a)).collect()))
            .unwrap()
    }

    #[test]
    fn age_bounds_are_inclusive() {
        let d = ages(&[21.0, 22.0, 50.0, 51.0]);
        let out = apply_restrictions(&d, &RestrictionSpec::age_window(22.0, 50.0)).unwrap();
        let kept: Vec<f64> = (0..out.rows())
            .map(|i| out.column("age").unwrap().value(i).unwrap())
            .collect();
        assert_eq!(kept, vec![22.0, 50.0]);
        assert_eq!(out.provenance().filters.len(), 1);
    }

    #[test]
    fn empty_result_is_valid_with_warning() {
        let d = ages(&[10.0, 60.0]);
        let out = apply_restrictions(&d, &RestrictionSpec::age_window(22.0, 50.0)).unwrap();
        assert_eq!(out.rows(), 0);
        assert_eq!(out.provenance().warnings.len(), 1);
    }

    #[test]
    fn missing_required_column_errors() {
        let d = ages(&[30.0]);
        let r = RestrictionSpec::default();
        assert!(matches!(apply_restrictions(&d, &r), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn inverted_window_rejected() {
        let d = ages(&[30.0]);
        assert!(apply_restrictions(&d, &RestrictionSpec::age_window(50.0, 22.0)).is_err());
    }

    #[test]
    fn activity_and_sex_filters() {
        let d = ages(&[30.0, 31.0, 32.0, 33.0])
            .with_column(
                "sex",
                Column::categorical_from(&[Some("male"), Some("female"), Some("male"), Some("male")]),
            )
            .unwrap()
            .with_column(
                "activity",
                Column::categorical_from(&[Some("working"), Some("working"), Some("retired"), None]),
            )
            .unwrap();
        let out = apply_restrictions(&d, &RestrictionSpec::default()).unwrap();
        assert_eq!(out.rows(), 1);
        assert_eq!(out.column("age").unwrap().value(0), Some(30.0));
    }
}
