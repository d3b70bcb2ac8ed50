//! Typed columnar tables with explicit missing values.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use log::{info, warn};

use crate::error::{Error, Result};

/// Declared type of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Binary,
    Categorical,
}

/// A typed column. `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Binary(Vec<Option<bool>>),
    /// Level codes into `levels`, in first-appearance order.
    Categorical {
        levels: Vec<String>,
        codes: Vec<Option<u32>>,
    },
}

impl Column {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Column::Numeric(_) => ColumnKind::Numeric,
            Column::Binary(_) => ColumnKind::Binary,
            Column::Categorical { .. } => ColumnKind::Categorical,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Binary(v) => v.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Numeric(v) => v[row].is_none(),
            Column::Binary(v) => v[row].is_none(),
            Column::Categorical { codes, .. } => codes[row].is_none(),
        }
    }

    pub fn missing_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_missing(i)).count()
    }

    /// Numeric view: binary columns map to 0/1; categorical has no numeric view.
    pub fn value(&self, row: usize) -> Option<f64> {
        match self {
            Column::Numeric(v) => v[row],
            Column::Binary(v) => v[row].map(|b| if b { 1.0 } else { 0.0 }),
            Column::Categorical { .. } => None,
        }
    }

    /// Level label of a categorical cell.
    pub fn level(&self, row: usize) -> Option<&str> {
        match self {
            Column::Categorical { levels, codes } => codes[row].map(|c| levels[c as usize].as_str()),
            _ => None,
        }
    }

    pub fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&i| v[i]).collect()),
            Column::Binary(v) => Column::Binary(rows.iter().map(|&i| v[i]).collect()),
            Column::Categorical { levels, codes } => Column::Categorical {
                levels: levels.clone(),
                codes: rows.iter().map(|&i| codes[i]).collect(),
            },
        }
    }

    /// Builds a categorical column from optional labels.
    pub fn categorical_from<S: AsRef<str>>(values: &[Option<S>]) -> Column {
        let mut levels: Vec<String> = Vec::new();
        let mut index: HashMap<String, u32> = HashMap::new();
        let codes = values
            .iter()
            .map(|v| {
                v.as_ref().map(|s| {
                    let s = s.as_ref();
                    *index.entry(s.to_string()).or_insert_with(|| {
                        levels.push(s.to_string());
                        (levels.len() - 1) as u32
                    })
                })
            })
            .collect();
        Column::Categorical { levels, codes }
    }
}

/// One column declaration in a load schema.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnDecl {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schema {
    pub columns: Vec<ColumnDecl>,
    /// Name of the sampling-weight column, which must be declared numeric.
    pub weight: Option<String>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn column(mut self, name: impl Into<String>, kind: ColumnKind) -> Self {
        self.columns.push(ColumnDecl {
            name: name.into(),
            kind,
        });
        self
    }

    pub fn weight(mut self, name: impl Into<String>) -> Self {
        self.weight = Some(name.into());
        self
    }
}

/// What happened to a dataset between loading and now.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    pub filters: Vec<String>,
    pub missing_counts: IndexMap<String, usize>,
    pub warnings: Vec<String>,
}

/// Columnar table of survey records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: usize,
    columns: IndexMap<String, Column>,
    weight_column: Option<String>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(rows: usize) -> Self {
        Self {
            rows,
            columns: IndexMap::new(),
            weight_column: None,
            provenance: Provenance::default(),
        }
    }

    pub fn with_column(mut self, name: impl Into<String>, column: Column) -> Result<Self> {
        self.insert_column(name, column)?;
        Ok(self)
    }

    pub fn insert_column(&mut self, name: impl Into<String>, column: Column) -> Result<()> {
        let name = name.into();
        if column.len() != self.rows {
            return Err(Error::Dimension(format!(
                "column `{name}` has {} rows, dataset has {}",
                column.len(),
                self.rows
            )));
        }
        self.columns.insert(name, column);
        Ok(())
    }

    /// Marks `name` as the sampling-weight column after validating it.
    pub fn set_weight_column(&mut self, name: &str) -> Result<()> {
        let col = self.column(name)?;
        let Column::Numeric(values) = col else {
            return Err(Error::ColumnType {
                column: name.to_string(),
                expected: "numeric",
            });
        };
        for (i, w) in values.iter().enumerate() {
            match w {
                Some(w) if w.is_finite() && *w > 0.0 => {}
                other => {
                    return Err(Error::InvalidWeight {
                        row: i + 1,
                        value: other.map_or_else(|| "missing".into(), |w| w.to_string()),
                    })
                }
            }
        }
        self.weight_column = Some(name.to_string());
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .get(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn weight_column(&self) -> Option<&str> {
        self.weight_column.as_deref()
    }

    /// Sampling weights, if a weight column is set.
    pub fn weights(&self) -> Option<Vec<f64>> {
        let name = self.weight_column.as_ref()?;
        match self.columns.get(name) {
            Some(Column::Numeric(v)) => Some(v.iter().map(|w| w.unwrap_or(f64::NAN)).collect()),
            _ => None,
        }
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn provenance_mut(&mut self) -> &mut Provenance {
        &mut self.provenance
    }

    /// New dataset holding `rows` (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            rows: rows.len(),
            columns: self
                .columns
                .iter()
                .map(|(k, c)| (k.clone(), c.select(rows)))
                .collect(),
            weight_column: self.weight_column.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Rows where `pred` holds, preserving order.
    pub fn filter(&self, pred: impl Fn(usize) -> bool) -> Dataset {
        let keep: Vec<usize> = (0..self.rows).filter(|&i| pred(i)).collect();
        self.select_rows(&keep)
    }
}

fn sniff_delimiter(header_line: &str) -> u8 {
    if header_line.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

fn is_missing_marker(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "NA"
}

/// Reads a comma- or tab-delimited UTF-8 file with a header row.
///
/// The header must name exactly the schema's columns (in any order). Cells
/// that are empty, `NA`, or fail to parse as the declared type are stored as
/// missing; per-column missing counts are logged and kept in the provenance.
/// Weights must be present, finite and strictly positive.
pub fn load_table(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let first_line = text.lines().next().unwrap_or("");
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(sniff_delimiter(first_line))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let parse_err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };

    let header: Vec<String> = reader
        .headers()
        .map_err(parse_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let declared: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    let missing: Vec<&str> = declared
        .iter()
        .copied()
        .filter(|d| !header.iter().any(|h| h == d))
        .collect();
    let extra: Vec<&str> = header
        .iter()
        .map(String::as_str)
        .filter(|h| !declared.contains(h))
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Schema(format!(
            "{}: declared but absent {:?}; present but undeclared {:?}",
            path.display(),
            missing,
            extra
        )));
    }
    if let Some(w) = &schema.weight {
        match schema.columns.iter().find(|c| &c.name == w) {
            Some(c) if c.kind == ColumnKind::Numeric => {}
            Some(_) => return Err(Error::Schema(format!("weight column `{w}` must be numeric"))),
            None => return Err(Error::Schema(format!("weight column `{w}` is not declared"))),
        }
    }

    let positions: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| header.iter().position(|h| h == &c.name).expect("checked above"))
        .collect();
    let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); schema.columns.len()];
    let mut unparseable = vec![0usize; schema.columns.len()];
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(parse_err)?;
        rows += 1;
        for (c, &p) in positions.iter().enumerate() {
            let cell = record.get(p).unwrap_or("");
            raw[c].push((!is_missing_marker(cell)).then(|| cell.to_string()));
        }
    }

    let mut ds = Dataset::new(rows);
    for (c, decl) in schema.columns.iter().enumerate() {
        let cells = &raw[c];
        let column = match decl.kind {
            ColumnKind::Numeric => Column::Numeric(
                cells
                    .iter()
                    .map(|s| {
                        let s = s.as_deref()?;
                        let v = s.parse::<f64>().ok().filter(|v| v.is_finite());
                        if v.is_none() {
                            unparseable[c] += 1;
                        }
                        v
                    })
                    .collect(),
            ),
            ColumnKind::Binary => Column::Binary(
                cells
                    .iter()
                    .map(|s| {
                        let s = s.as_deref()?;
                        let v = match s.parse::<f64>() {
                            Ok(v) if v == 0.0 => Some(false),
                            Ok(v) if v == 1.0 => Some(true),
                            _ => None,
                        };
                        if v.is_none() {
                            unparseable[c] += 1;
                        }
                        v
                    })
                    .collect(),
            ),
            ColumnKind::Categorical => Column::categorical_from(cells),
        };
        if Some(&decl.name) == schema.weight.as_ref() {
            if let Column::Numeric(values) = &column {
                for (i, (w, cell)) in values.iter().zip(cells).enumerate() {
                    if !matches!(w, Some(w) if *w > 0.0) {
                        return Err(Error::InvalidWeight {
                            row: i + 1,
                            value: cell.clone().unwrap_or_else(|| "missing".into()),
                        });
                    }
                }
            }
        }
        let missing = column.missing_count();
        if unparseable[c] > 0 {
            warn!(
                "{}: column `{}` had {} unparseable cell(s) stored as missing",
                path.display(),
                decl.name,
                unparseable[c]
            );
        }
        info!("{}: column `{}` missing {missing}/{rows}", path.display(), decl.name);
        ds.provenance.missing_counts.insert(decl.name.clone(), missing);
        ds.insert_column(decl.name.clone(), column)?;
    }
    ds.weight_column = schema.weight.clone();
    ds.provenance.source = Some(path.to_path_buf());
    Ok(ds)
}
