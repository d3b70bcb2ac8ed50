//! Design matrices built from datasets and model specifications.

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Qr};
use crate::scalar::Scalar;
use crate::survey::{Column, Dataset};

/// What a design column represents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRole {
    Intercept,
    Regressor,
    Squared { of: String },
    Dummy { factor: String, level: String },
    FixedEffect { factor: String, level: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedColumn {
    pub label: String,
    pub reason: String,
}

/// Regressor matrix with labels and a log of pruned columns.
///
/// Constructors prune exactly or nearly collinear columns (QR pivot at or
/// below `rank_tolerance * |r_11|`), keeping the earlier column.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    matrix: Matrix<T>,
    labels: Vec<String>,
    roles: Vec<ColumnRole>,
    dropped: Vec<DroppedColumn>,
}

impl<T: Scalar> DesignMatrix<T> {
    /// Prunes collinear columns from `matrix`.
    pub fn new(matrix: Matrix<T>, labels: Vec<String>, roles: Vec<ColumnRole>) -> Result<Self> {
        let d = Self::unpruned(matrix, labels, roles)?;
        Ok(d.pruned())
    }

    /// Labels every column as a plain regressor, optionally prepending an intercept.
    pub fn from_columns<C: AsRef<[T]>>(
        labels: &[&str],
        columns: &[C],
        intercept: bool,
    ) -> Result<Self> {
        if labels.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} columns",
                labels.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, |c| c.as_ref().len());
        let mut m = Matrix::zeros(n, 0);
        let mut ls = Vec::new();
        let mut rs = Vec::new();
        if intercept {
            m.push_column(&vec![T::one(); n])?;
            ls.push("_cons".to_string());
            rs.push(ColumnRole::Intercept);
        }
        for (l, c) in labels.iter().zip(columns) {
            m.push_column(c.as_ref())?;
            ls.push(l.to_string());
            rs.push(ColumnRole::Regressor);
        }
        Self::new(m, ls, rs)
    }

    /// Skips pruning; fits on such a matrix report rank deficiency instead.
    pub fn unpruned(matrix: Matrix<T>, labels: Vec<String>, roles: Vec<ColumnRole>) -> Result<Self> {
        if labels.len() != matrix.ncols() || roles.len() != matrix.ncols() {
            return Err(Error::Dimension(format!(
                "{} labels / {} roles for {} columns",
                labels.len(),
                roles.len(),
                matrix.ncols()
            )));
        }
        if matrix.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Design("design contains non-finite entries".into()));
        }
        Ok(Self {
            matrix,
            labels,
            roles,
            dropped: Vec::new(),
        })
    }

    fn pruned(mut self) -> Self {
        let qr = Qr::decompose(&self.matrix, T::rank_tolerance());
        if qr.dropped().is_empty() {
            return self;
        }
        for &j in qr.dropped() {
            info!("dropping collinear column `{}`", self.labels[j]);
            self.dropped.push(DroppedColumn {
                label: self.labels[j].clone(),
                reason: "collinear with earlier columns".into(),
            });
        }
        let keep = qr.kept().to_vec();
        self.matrix = self.matrix.select_columns(&keep);
        self.labels = keep.iter().map(|&j| self.labels[j].clone()).collect();
        self.roles = keep.iter().map(|&j| self.roles[j].clone()).collect();
        self
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn roles(&self) -> &[ColumnRole] {
        &self.roles
    }

    pub fn dropped(&self) -> &[DroppedColumn] {
        &self.dropped
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn has_intercept(&self) -> bool {
        self.roles.contains(&ColumnRole::Intercept)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn column(&self, j: usize) -> &[T] {
        self.matrix.column(j)
    }

    /// Columns eligible as heteroskedasticity instruments: everything but the
    /// intercept, and fixed-effect dummies unless `include_fixed_effects`.
    pub fn instrument_candidates(&self, include_fixed_effects: bool) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| match r {
                ColumnRole::Intercept => false,
                ColumnRole::FixedEffect { .. } => include_fixed_effects,
                _ => true,
            })
            .map(|(j, _)| j)
            .collect()
    }

    /// Design restricted to `columns` (no re-pruning needed: a subset of a
    /// full-rank set is full rank).
    pub fn subset(&self, columns: &[usize]) -> Self {
        Self {
            matrix: self.matrix.select_columns(columns),
            labels: columns.iter().map(|&j| self.labels[j].clone()).collect(),
            roles: columns.iter().map(|&j| self.roles[j].clone()).collect(),
            dropped: Vec::new(),
        }
    }

    /// Appends a column, pruning it if it is collinear with the existing ones.
    pub fn with_column(&self, label: &str, values: &[T], role: ColumnRole) -> Result<Self> {
        let mut m = self.matrix.clone();
        m.push_column(values)?;
        let mut labels = self.labels.clone();
        labels.push(label.to_string());
        let mut roles = self.roles.clone();
        roles.push(role);
        let mut d = Self::new(m, labels, roles)?;
        let mut dropped = self.dropped.clone();
        dropped.append(&mut d.dropped);
        d.dropped = dropped;
        Ok(d)
    }
}

/// Declarative description of one regression.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub outcome: String,
    /// Endogenous treatment column; excluded from the design itself.
    pub treatment: Option<String>,
    /// Numeric or binary controls passed through.
    pub controls: Vec<String>,
    /// Numeric columns entered squared as well (e.g. age).
    pub squared: Vec<String>,
    /// Categorical controls expanded into dummies.
    pub factors: Vec<String>,
    /// Categorical fixed effects expanded into dummies.
    pub fixed_effects: Vec<String>,
    /// Further columns that must be nonmissing (e.g. an external instrument).
    pub required: Vec<String>,
    /// Binary column; only rows where it equals 1 enter the model.
    pub row_mask: Option<String>,
    pub no_intercept: bool,
    pub weighted: bool,
}

/// A design together with the aligned outcome, treatment and weights.
#[derive(Debug, Clone)]
pub struct ModelFrame<T> {
    pub design: DesignMatrix<T>,
    pub outcome: Vec<T>,
    pub treatment: Option<Vec<T>>,
    pub weights: Option<Vec<T>>,
    /// Dataset row indices used, in order.
    pub rows: Vec<usize>,
    /// Rows removed by listwise deletion (mask exclusions not counted).
    pub dropped_missing: usize,
}

impl<T: Scalar> ModelFrame<T> {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Values of a numeric/binary dataset column aligned with this frame.
    pub fn aligned(&self, d: &Dataset, column: &str) -> Result<Vec<T>> {
        let c = d.column(column)?;
        self.rows
            .iter()
            .map(|&i| {
                c.value(i).map(T::of).ok_or_else(|| {
                    Error::Design(format!("column `{column}` missing in estimation sample"))
                })
            })
            .collect()
    }
}

fn squared_label(name: &str) -> String {
    format!("{name}^2")
}

/// Builds the regressor matrix for `spec` on the rows of `d` with no missing
/// value in any referenced column.
///
/// Numeric controls pass through, `squared` columns are appended squared,
/// and each categorical factor becomes `levels - 1` dummies with the most
/// frequent level (ties: first seen) as base. Collinear columns are pruned
/// and logged.
pub fn build_design<T: Scalar>(d: &Dataset, spec: &ModelSpec) -> Result<ModelFrame<T>> {
    let mut referenced: Vec<&str> = vec![spec.outcome.as_str()];
    referenced.extend(spec.treatment.as_deref());
    referenced.extend(spec.controls.iter().map(String::as_str));
    referenced.extend(spec.squared.iter().map(String::as_str));
    referenced.extend(spec.factors.iter().map(String::as_str));
    referenced.extend(spec.fixed_effects.iter().map(String::as_str));
    referenced.extend(spec.required.iter().map(String::as_str));
    let mut cols = Vec::with_capacity(referenced.len());
    for name in &referenced {
        cols.push(d.column(name)?);
    }
    for name in spec
        .controls
        .iter()
        .chain(&spec.squared)
        .chain(std::iter::once(&spec.outcome))
        .chain(spec.treatment.iter())
    {
        if matches!(d.column(name)?, Column::Categorical { .. }) {
            return Err(Error::ColumnType {
                column: name.clone(),
                expected: "numeric or binary",
            });
        }
    }
    for name in spec.factors.iter().chain(&spec.fixed_effects) {
        if !matches!(d.column(name)?, Column::Categorical { .. }) {
            return Err(Error::ColumnType {
                column: name.clone(),
                expected: "categorical",
            });
        }
    }
    let mask = match &spec.row_mask {
        Some(m) => Some(d.column(m)?),
        None => None,
    };
    let weights = if spec.weighted {
        Some(d.weights().ok_or_else(|| {
            Error::Design("weighted estimation requested but the dataset has no weight column".into())
        })?)
    } else {
        None
    };

    let in_mask: Vec<usize> = (0..d.rows())
        .filter(|&i| mask.is_none_or(|m| m.value(i) == Some(1.0)))
        .collect();
    let rows: Vec<usize> = in_mask
        .iter()
        .copied()
        .filter(|&i| cols.iter().all(|c| !c.is_missing(i)))
        .collect();
    let dropped_missing = in_mask.len() - rows.len();
    if dropped_missing > 0 {
        info!(
            "listwise deletion for `{}`: dropped {dropped_missing} of {} rows",
            spec.outcome,
            in_mask.len()
        );
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Design(format!("no complete rows for outcome `{}`", spec.outcome)));
    }

    let numeric = |name: &str| -> Vec<T> {
        let c = d.column(name).expect("checked");
        rows.iter().map(|&i| T::of(c.value(i).expect("complete"))).collect()
    };
    let outcome = numeric(&spec.outcome);
    if outcome.iter().all(|&v| v == outcome[0]) {
        return Err(Error::Design(format!("outcome `{}` is constant", spec.outcome)));
    }

    let mut matrix = Matrix::zeros(n, 0);
    let mut labels = Vec::new();
    let mut roles = Vec::new();
    if !spec.no_intercept {
        matrix.push_column(&vec![T::one(); n])?;
        labels.push("_cons".to_string());
        roles.push(ColumnRole::Intercept);
    }
    for name in &spec.controls {
        matrix.push_column(&numeric(name))?;
        labels.push(name.clone());
        roles.push(ColumnRole::Regressor);
    }
    for name in &spec.squared {
        let v = numeric(name);
        if !spec.controls.contains(name) {
            matrix.push_column(&v)?;
            labels.push(name.clone());
            roles.push(ColumnRole::Regressor);
        }
        matrix.push_column(&v.iter().map(|&x| x * x).collect::<Vec<_>>())?;
        labels.push(squared_label(name));
        roles.push(ColumnRole::Squared { of: name.clone() });
    }
    for (names, fe) in [(&spec.factors, false), (&spec.fixed_effects, true)] {
        for name in names {
            let (dummies, levels) = factor_dummies::<T>(d.column(name)?, &rows, name)?;
            for (v, level) in dummies.into_iter().zip(levels) {
                matrix.push_column(&v)?;
                labels.push(format!("{name}={level}"));
                roles.push(if fe {
                    ColumnRole::FixedEffect {
                        factor: name.clone(),
                        level,
                    }
                } else {
                    ColumnRole::Dummy {
                        factor: name.clone(),
                        level,
                    }
                });
            }
        }
    }
    if matrix.ncols() == 0 {
        return Err(Error::Design("model has no regressors".into()));
    }
    let design = DesignMatrix::new(matrix, labels, roles)?;
    let treatment = spec.treatment.as_deref().map(numeric);
    let weights = weights.map(|w| rows.iter().map(|&i| T::of(w[i])).collect());
    Ok(ModelFrame {
        design,
        outcome,
        treatment,
        weights,
        rows,
        dropped_missing,
    })
}

/// Dummies for every observed level except the modal one.
fn factor_dummies<T: Scalar>(
    col: &Column,
    rows: &[usize],
    name: &str,
) -> Result<(Vec<Vec<T>>, Vec<String>)> {
    let Column::Categorical { levels, codes } = col else {
        unreachable!("checked by caller")
    };
    let mut counts = vec![0usize; levels.len()];
    for &i in rows {
        counts[codes[i].expect("complete") as usize] += 1;
    }
    let observed: Vec<usize> = (0..levels.len()).filter(|&l| counts[l] > 0).collect();
    if observed.len() < 2 {
        return Err(Error::Design(format!(
            "factor `{name}` has fewer than two observed levels"
        )));
    }
    let base = observed
        .iter()
        .copied()
        .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
        .expect("nonempty");
    let mut dummies = Vec::new();
    let mut names = Vec::new();
    for &l in observed.iter().filter(|&&l| l != base) {
        dummies.push(
            rows.iter()
                .map(|&i| {
                    if codes[i] == Some(l as u32) {
                        T::one()
                    } else {
                        T::zero()
                    }
                })
                .collect(),
        );
        names.push(levels[l].clone());
    }
    Ok((dummies, names))
}
