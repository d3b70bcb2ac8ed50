mod common;

use common::*;
use hetiv::linalg::Matrix;
use hetiv::regression::{hc_vcov, ols_fit, wald_joint, DesignMatrix, VceKind};
use proptest::prelude::*;

struct Fixture {
    cols: Vec<Vec<f64>>,
    y: Vec<f64>,
}

fn fixture(seed: u64, n: usize) -> Fixture {
    let mut r = rng(seed);
    let x1 = normals(&mut r, n);
    let x2 = normals(&mut r, n);
    let x3: Vec<f64> = normals(&mut r, n).iter().map(|v| 2.0 + 0.5 * v).collect();
    let u = normals(&mut r, n);
    let y = (0..n)
        .map(|i| 1.0 + 0.5 * x1[i] - 0.3 * x2[i] + 0.2 * x3[i] + (0.5 + x1[i].abs()) * u[i])
        .collect();
    Fixture {
        cols: vec![x1, x2, x3],
        y,
    }
}

fn design(f: &Fixture) -> DesignMatrix<f64> {
    DesignMatrix::from_columns(&["x1", "x2", "x3"], &f.cols, true).unwrap()
}

fn dense_with_intercept(cols: &[Vec<f64>]) -> Dense {
    let mut all = vec![vec![1.0; cols[0].len()]];
    all.extend(cols.iter().cloned());
    rows_of(&all)
}

#[test]
fn ols_matches_normal_equations_on_200_rows() {
    let f = fixture(11, 200);
    let t = std::time::Instant::now();
    let fit = ols_fit(&design(&f), &f.y, None, VceKind::Hc1).unwrap();
    assert!(t.elapsed().as_secs_f64() < 1.0);
    let oracle = normal_equations(&dense_with_intercept(&f.cols), &f.y);
    for (b, o) in fit.coefficients.iter().zip(&oracle) {
        assert!(rel_close(*b, *o, 1e-8), "{b} vs {o}");
    }
}

#[test]
fn weighted_ols_matches_scaled_normal_equations() {
    let f = fixture(12, 200);
    let mut r = rng(99);
    let w: Vec<f64> = normals(&mut r, 200).iter().map(|v| 0.5 + v.abs()).collect();
    let fit = ols_fit(&design(&f), &f.y, Some(&w), VceKind::Hc1).unwrap();
    let x = dense_with_intercept(&f.cols);
    let xs: Dense = x
        .iter()
        .zip(&w)
        .map(|(row, wi)| row.iter().map(|v| v * wi.sqrt()).collect())
        .collect();
    let ys: Vec<f64> = f.y.iter().zip(&w).map(|(v, wi)| v * wi.sqrt()).collect();
    for (b, o) in fit.coefficients.iter().zip(normal_equations(&xs, &ys)) {
        assert!(rel_close(*b, o, 1e-8));
    }
}

#[test]
fn hc_vcov_matches_outer_product_loop_on_50_rows() {
    let f = fixture(13, 50);
    let d = design(&f);
    let fit = ols_fit(&d, &f.y, None, VceKind::Hc0).unwrap();
    let x = dense_with_intercept(&f.cols);
    let k = x[0].len();
    let bread = invert(&xtx(&x));
    let mut meat = vec![vec![0.0; k]; k];
    for (row, e) in x.iter().zip(&fit.residuals) {
        for a in 0..k {
            for b in 0..k {
                meat[a][b] += row[a] * row[b] * e * e;
            }
        }
    }
    let mut oracle = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                for e in 0..k {
                    oracle[a][b] += bread[a][c] * meat[c][e] * bread[e][b];
                }
            }
        }
    }
    for kind in [VceKind::Hc0, VceKind::Hc1] {
        let v = hc_vcov(d.matrix(), &fit.residuals, kind).unwrap();
        let scale = if kind == VceKind::Hc1 { 50.0 / 46.0 } else { 1.0 };
        for a in 0..k {
            for b in 0..k {
                assert!(rel_close(v.get(a, b), scale * oracle[a][b], 1e-9));
            }
        }
    }
}

#[test]
fn hc1_over_hc0_is_n_over_n_minus_k() {
    let f = fixture(14, 73);
    let d = design(&f);
    let e = ols_fit(&d, &f.y, None, VceKind::Hc0).unwrap().residuals;
    let v0 = hc_vcov(d.matrix(), &e, VceKind::Hc0).unwrap();
    let v1 = hc_vcov(d.matrix(), &e, VceKind::Hc1).unwrap();
    for a in 0..4 {
        for b in 0..4 {
            assert!((v1.get(a, b) / v0.get(a, b) - 73.0 / 69.0).abs() < 1e-13);
        }
    }
}

fn assert_orthogonal(x: &Matrix<f64>, y: &[f64], e: &[f64], w: Option<&[f64]>) {
    let we: Vec<f64> = match w {
        Some(w) => e.iter().zip(w).map(|(a, b)| a * b).collect(),
        None => e.to_vec(),
    };
    let xte = x.tr_mul_vec(&we);
    let row_sum_max = (0..x.nrows())
        .map(|i| x.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let y_inf = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let w_inf = w.map_or(1.0, |w| w.iter().fold(0.0f64, |m, v| m.max(*v)));
    let bound = 1e-8 * row_sum_max * y_inf * w_inf;
    for v in xte {
        assert!(v.abs() <= bound, "|X'e| = {v} > {bound}");
    }
}

#[test]
fn residuals_are_orthogonal_to_regressors() {
    for seed in 0..10 {
        let f = fixture(100 + seed, 300);
        let d = design(&f);
        let fit = ols_fit(&d, &f.y, None, VceKind::Hc1).unwrap();
        assert_orthogonal(d.matrix(), &f.y, &fit.residuals, None);
        let w: Vec<f64> = (0..300).map(|i| 1.0 + (i % 7) as f64).collect();
        let fit = ols_fit(&d, &f.y, Some(&w), VceKind::Hc1).unwrap();
        assert_orthogonal(d.matrix(), &f.y, &fit.residuals, Some(&w));
    }
}

#[test]
fn robust_covariance_is_symmetric_psd() {
    for seed in 0..20 {
        let f = fixture(200 + seed, 120);
        let fit = ols_fit(&design(&f), &f.y, None, VceKind::Hc1).unwrap();
        let k = fit.k;
        let dense: Dense = (0..k).map(|a| (0..k).map(|b| fit.vcov.get(a, b)).collect()).collect();
        for a in 0..k {
            for b in 0..k {
                assert_eq!(dense[a][b], dense[b][a]);
            }
            assert_eq!(fit.std_errors[a], fit.vcov.get(a, a).sqrt());
        }
        let trace = fit.vcov.trace();
        for ev in symmetric_eigenvalues(&dense) {
            assert!(ev >= -1e-10 * trace, "eigenvalue {ev}");
        }
    }
}

#[test]
fn two_coefficient_wald_matches_explicit_inverse() {
    let f = fixture(15, 200);
    let fit = ols_fit(&design(&f), &f.y, None, VceKind::Hc1).unwrap();
    let (b1, b2) = (fit.coefficients[1], fit.coefficients[2]);
    let (a, b, d) = (fit.vcov.get(1, 1), fit.vcov.get(1, 2), fit.vcov.get(2, 2));
    let det = a * d - b * b;
    let w = (d * b1 * b1 - 2.0 * b * b1 * b2 + a * b2 * b2) / det;
    let t = wald_joint(&fit, &[1, 2]).unwrap();
    assert!(rel_close(t.chi2, w, 1e-10));
    assert!(rel_close(t.statistic, w / 2.0, 1e-10));
    assert_eq!((t.df1, t.df2), (2, 196));
}

#[test]
fn noise_regressor_does_not_raise_adjusted_r2_beyond_noise() {
    // E[Δ adj R²] = 0 for an independent regressor; the mean change over
    // 200 resamples must stay within two standard errors of zero.
    let mut deltas = Vec::new();
    for seed in 0..200u64 {
        let f = fixture(1000 + seed, 150);
        let base = ols_fit(&design(&f), &f.y, None, VceKind::Hc1).unwrap();
        let mut r = rng(5000 + seed);
        let noise = normals(&mut r, 150);
        let mut cols = f.cols.clone();
        cols.push(noise);
        let aug = DesignMatrix::from_columns(&["x1", "x2", "x3", "noise"], &cols, true).unwrap();
        let fit = ols_fit(&aug, &f.y, None, VceKind::Hc1).unwrap();
        deltas.push(fit.adj_r_squared - base.adj_r_squared);
    }
    let m = deltas.iter().sum::<f64>() / 200.0;
    let sd = (deltas.iter().map(|d| (d - m).powi(2)).sum::<f64>() / 199.0).sqrt();
    assert!(m <= 2.0 * sd / 200f64.sqrt(), "mean Δ = {m}, se = {}", sd / 200f64.sqrt());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn row_permutation_leaves_coefficients_unchanged(seed in 0u64..10_000, shift in 1usize..59) {
        let f = fixture(seed, 60);
        let perm: Vec<usize> = (0..60).map(|i| (i * 7 + shift) % 60).collect();
        let cols_p: Vec<Vec<f64>> = f.cols.iter().map(|c| perm.iter().map(|&i| c[i]).collect()).collect();
        let y_p: Vec<f64> = perm.iter().map(|&i| f.y[i]).collect();
        let a = ols_fit(&design(&f), &f.y, None, VceKind::Hc1).unwrap();
        let b = ols_fit(
            &DesignMatrix::from_columns(&["x1", "x2", "x3"], &cols_p, true).unwrap(),
            &y_p,
            None,
            VceKind::Hc1,
        )
        .unwrap();
        for (p, q) in a.coefficients.iter().zip(&b.coefficients) {
            prop_assert!(rel_close(*p, *q, 1e-10));
        }
    }

    #[test]
    fn scaling_the_outcome_scales_coefficients(seed in 0u64..10_000, c in 0.1f64..50.0) {
        let f = fixture(seed, 40);
        let yc: Vec<f64> = f.y.iter().map(|v| c * v).collect();
        let a = ols_fit(&design(&f), &f.y, None, VceKind::Hc0).unwrap();
        let b = ols_fit(&design(&f), &yc, None, VceKind::Hc0).unwrap();
        for (p, q) in a.coefficients.iter().zip(&b.coefficients) {
            prop_assert!(rel_close(c * p, *q, 1e-9));
        }
    }
}
