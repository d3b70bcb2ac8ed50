//! Weighted means and standard deviations (Table 1 style).

use super::dataset::{Column, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptive {
    pub variable: String,
    pub mean: f64,
    pub sd: f64,
    /// Nonmissing observations used.
    pub n: usize,
    pub weight_sum: f64,
}

/// Weighted mean `Σwx/Σw` and frequency-weight SD `sqrt(Σw(x-m)²/(Σw-1))`.
///
/// Rows missing `x` are dropped together with their weights. Without a
/// weight column every row has weight 1, which reduces to the ordinary
/// sample mean and SD.
pub fn weighted_descriptives(d: &Dataset, vars: &[&str]) -> Result<Vec<Descriptive>> {
    let weights = d.weights();
    vars.iter()
        .map(|&name| {
            let col = d.column(name)?;
            if matches!(col, Column::Categorical { .. }) {
                return Err(Error::ColumnType {
                    column: name.to_string(),
                    expected: "numeric or binary",
                });
            }
            let pairs: Vec<(f64, f64)> = (0..d.rows())
                .filter_map(|i| {
                    let x = col.value(i)?;
                    let w = weights.as_ref().map_or(1.0, |w| w[i]);
                    Some((x, w))
                })
                .collect();
            if pairs.is_empty() {
                return Err(Error::NoObservations(name.to_string()));
            }
            let (mean, sd, sw) = weighted_mean_sd(&pairs);
            Ok(Descriptive {
                variable: name.to_string(),
                mean,
                sd,
                n: pairs.len(),
                weight_sum: sw,
            })
        })
        .collect()
}

fn weighted_mean_sd(pairs: &[(f64, f64)]) -> (f64, f64, f64) {
    let sw: f64 = pairs.iter().map(|p| p.1).sum();
    let mean = pairs.iter().map(|(x, w)| w * x).sum::<f64>() / sw;
    let ss: f64 = pairs.iter().map(|(x, w)| w * (x - mean).powi(2)).sum();
    let sd = if sw > 1.0 { (ss / (sw - 1.0)).sqrt() } else { f64::NAN };
    (mean, sd, sw)
}
