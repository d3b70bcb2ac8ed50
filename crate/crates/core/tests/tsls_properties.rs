mod common;

use common::*;
use hetiv::iv::{
    external_iv_fit, first_stage_f, hansen_j, subgroup_difference, tsls_fit, HansenJ, IvOptions,
};
use hetiv::lewbel::InstrumentSet;
use hetiv::linalg::Matrix;
use hetiv::regression::{ols_fit, DesignMatrix, VceKind};
use hetiv::Error;
use rand::Rng;

struct Fixture {
    x1: Vec<f64>,
    z: Vec<Vec<f64>>,
    d: Vec<f64>,
    y: Vec<f64>,
}

fn fixture(seed: u64, n: usize, instruments: usize) -> Fixture {
    let mut r = rng(seed);
    let x1 = normals(&mut r, n);
    let z: Vec<Vec<f64>> = (0..instruments).map(|_| normals(&mut r, n)).collect();
    let u = normals(&mut r, n);
    let e = normals(&mut r, n);
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let idx = 0.3 * x1[i] + z.iter().map(|c| 0.6 * c[i]).sum::<f64>() + u[i];
            if idx > 0.4 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let y = (0..n)
        .map(|i| 1.0 + 0.5 * x1[i] - 0.8 * d[i] + 0.6 * u[i] + 0.5 * e[i])
        .collect();
    Fixture { x1, z, d, y }
}

fn exog(f: &Fixture) -> DesignMatrix<f64> {
    DesignMatrix::from_columns(&["x1"], &[&f.x1[..]], true).unwrap()
}

fn external(labels: &[&str], cols: &[&[f64]]) -> InstrumentSet<f64> {
    InstrumentSet::external(
        labels.iter().map(|s| s.to_string()).collect(),
        Matrix::from_columns(cols).unwrap(),
    )
    .unwrap()
}

fn iv(f: &Fixture, set: &InstrumentSet<f64>) -> hetiv::IvFitResult64 {
    tsls_fit(&f.y, &exog(f), &f.d, "d", set, None, &IvOptions::default()).unwrap()
}

#[test]
fn two_stage_matches_projection_oracle_on_200_rows() {
    let f = fixture(1, 200, 2);
    let set = external(&["z1", "z2"], &[&f.z[0], &f.z[1]]);
    let fit = iv(&f, &set);
    let ones = vec![1.0; 200];
    let full = rows_of(&[ones.clone(), f.x1.clone(), f.z[0].clone(), f.z[1].clone()]);
    let d_hat = project(&full, &f.d);
    let second = rows_of(&[ones, f.x1.clone(), d_hat]);
    let oracle = normal_equations(&second, &f.y);
    assert_eq!(fit.fit.labels, ["_cons", "x1", "d"]);
    for (b, o) in fit.fit.coefficients.iter().zip(&oracle) {
        assert!(rel_close(*b, *o, 1e-8), "{b} vs {o}");
    }
}

#[test]
fn weighted_two_stage_matches_scaled_oracle() {
    let f = fixture(2, 300, 2);
    let w: Vec<f64> = (0..300).map(|i| 0.5 + (i % 4) as f64).collect();
    let set = external(&["z1", "z2"], &[&f.z[0], &f.z[1]]);
    let fit = tsls_fit(&f.y, &exog(&f), &f.d, "d", &set, Some(&w), &IvOptions::default()).unwrap();
    let s: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let sc = |v: &[f64]| v.iter().zip(&s).map(|(a, b)| a * b).collect::<Vec<f64>>();
    let full = rows_of(&[s.clone(), sc(&f.x1), sc(&f.z[0]), sc(&f.z[1])]);
    let d_hat = project(&full, &sc(&f.d));
    let oracle = normal_equations(&rows_of(&[s.clone(), sc(&f.x1), d_hat]), &sc(&f.y));
    for (b, o) in fit.fit.coefficients.iter().zip(&oracle) {
        assert!(rel_close(*b, *o, 1e-8));
    }
}

#[test]
fn self_instrumenting_reproduces_ols() {
    let f = fixture(3, 500, 1);
    let set = external(&["d_iv"], &[&f.d]);
    let fit = iv(&f, &set);
    let xd = DesignMatrix::from_columns(&["x1", "d"], &[&f.x1[..], &f.d[..]], true).unwrap();
    let ols = ols_fit(&xd, &f.y, None, VceKind::Hc1).unwrap();
    for (b, o) in fit.fit.coefficients.iter().zip(&ols.coefficients) {
        assert!(rel_close(*b, *o, 1e-10));
    }
    for (s, o) in fit.fit.std_errors.iter().zip(&ols.std_errors) {
        assert!(rel_close(*s, *o, 1e-8));
    }
    assert!(fit.first_stage_f.statistic > 1e6);
    assert!(!fit.weak);
}

#[test]
fn exactly_identified_fits_report_no_j() {
    for seed in 0..10 {
        let f = fixture(10 + seed, 400, 1);
        let set = external(&["z1"], &[&f.z[0]]);
        let fit = iv(&f, &set);
        assert_eq!(fit.hansen_j, HansenJ::ExactlyIdentified);
        assert_eq!(fit.hansen_j.statistic(), 0.0);
        assert_eq!(fit.hansen_j.p_value(), None);
        assert_eq!(fit.first_stage_f.df1, 1);
        let again = hansen_j(&f.y, &exog(&f), &f.d, &set.instruments, None, &fit).unwrap();
        assert_eq!(again, HansenJ::ExactlyIdentified);
    }
}

#[test]
fn overidentified_degrees_of_freedom() {
    let f = fixture(4, 2000, 3);
    let set = external(&["z1", "z2", "z3"], &[&f.z[0], &f.z[1], &f.z[2]]);
    let fit = iv(&f, &set);
    assert_eq!(fit.instrument_count, 3);
    assert_eq!(fit.first_stage_f.df1, 3);
    assert_eq!(fit.hansen_j.df(), 2);
    let p = fit.hansen_j.p_value().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn duplicate_instrument_is_pruned_and_logged() {
    let f = fixture(5, 1000, 2);
    let base = iv(&f, &external(&["z1", "z2"], &[&f.z[0], &f.z[1]]));
    let dup = iv(&f, &external(&["z1", "z2", "z2_copy"], &[&f.z[0], &f.z[1], &f.z[1]]));
    // the pruning rule removes the later copy, so J keeps df = 1
    assert_eq!(dup.dropped_instruments, ["z2_copy"]);
    assert_eq!(dup.instrument_count, 2);
    assert_eq!(dup.hansen_j.df(), base.hansen_j.df());
    assert!(rel_close(dup.beta(), base.beta(), 1e-8));
}

#[test]
fn instruments_identical_up_to_scale_give_singular_weight() {
    let f = fixture(6, 1000, 1);
    let fit = iv(&f, &external(&["z1"], &[&f.z[0]]));
    let scaled: Vec<f64> = f.z[0].iter().map(|v| 3.0 * v).collect();
    let z = Matrix::from_columns(&[&f.z[0][..], &scaled[..]]).unwrap();
    let r = hansen_j(&f.y, &exog(&f), &f.d, &z, None, &fit);
    assert!(matches!(r, Err(Error::Singular(_))), "{r:?}");
}

#[test]
fn orthogonal_instruments_have_f_near_zero() {
    let f = fixture(7, 1000, 1);
    let mut r = rng(70);
    let noise = normals(&mut r, 1000);
    // residualize the noise on [1, x1, d] so it is exactly orthogonal to D given X
    let base = rows_of(&[vec![1.0; 1000], f.x1.clone(), f.d.clone()]);
    let fitted = project(&base, &noise);
    let z: Vec<f64> = noise.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let x = DesignMatrix::from_columns(&["x1", "z"], &[&f.x1[..], &z[..]], true).unwrap();
    let first = ols_fit(&x, &f.d, None, VceKind::Hc1).unwrap();
    let t = first_stage_f(&first, &[2]).unwrap();
    assert!(t.statistic < 1e-12);
    assert!(t.p_value > 0.999);
    assert_eq!((t.df1, t.df2), (1, 997));
    // D̂ then lies in the span of X, so the second stage is rank deficient
    let r = tsls_fit(&f.y, &exog(&f), &f.d, "d", &external(&["z"], &[&z]), None, &IvOptions::default());
    assert!(matches!(r, Err(Error::RankDeficient(_))));
}

#[test]
fn single_instrument_f_is_squared_t() {
    let f = fixture(8, 800, 1);
    let fit = iv(&f, &external(&["z1"], &[&f.z[0]]));
    let j = fit.first_stage.index_of("z1").unwrap();
    let t = fit.first_stage.coefficients[j] / fit.first_stage.std_errors[j];
    assert!(rel_close(fit.first_stage_f.statistic, t * t, 1e-10));
    let again = first_stage_f(&fit.first_stage, &[j]).unwrap();
    assert_eq!(again, fit.first_stage_f);
}

#[test]
fn perfect_external_instrument_reproduces_ols() {
    let f = fixture(9, 600, 0);
    let fit =
        external_iv_fit(&f.y, &exog(&f), &f.d, "d", "w", &f.d, None, &IvOptions::default()).unwrap();
    let xd = DesignMatrix::from_columns(&["x1", "d"], &[&f.x1[..], &f.d[..]], true).unwrap();
    let ols = ols_fit(&xd, &f.y, None, VceKind::Hc1).unwrap();
    assert!(rel_close(fit.beta(), ols.coefficients[2], 1e-10));
    assert!(fit.late);
    let (g, se) = fit.instrument_first_stage.unwrap();
    assert!((g - 1.0).abs() < 1e-12);
    assert!(se.abs() < 1e-8);
}

#[test]
fn irrelevant_external_instrument_is_flagged_weak() {
    let reps = 200;
    let mut fs = Vec::new();
    let mut weak = 0;
    for rep in 0..reps {
        let f = fixture(1000 + rep, 10_000, 0);
        let mut r = rng(9000 + rep);
        let w: Vec<f64> = (0..10_000).map(|_| if r.random::<f64>() < 0.5 { 1.0 } else { 0.0 }).collect();
        let fit = external_iv_fit(&f.y, &exog(&f), &f.d, "d", "w", &w, None, &IvOptions::default())
            .unwrap();
        fs.push(fit.first_stage_f.statistic);
        weak += fit.weak as usize;
    }
    fs.sort_by(f64::total_cmp);
    let below_one = fs.iter().filter(|&&v| v < 1.0).count() as f64 / reps as f64;
    // F ~ χ²(1) under irrelevance, so P(F < 1) ≈ 0.68 and the median is ≈ 0.45
    assert!(fs[reps as usize / 2] < 1.0);
    assert!(below_one > 0.6, "share below one {below_one}");
    assert!(weak as f64 / reps as f64 >= 0.98);
}

#[test]
fn external_instrument_errors() {
    let f = fixture(11, 300, 1);
    let opts = IvOptions::default();
    let constant = vec![1.0; 300];
    assert!(matches!(
        external_iv_fit(&f.y, &exog(&f), &f.d, "d", "w", &constant, None, &opts),
        Err(Error::DegenerateInstruments(_))
    ));
    assert!(matches!(
        external_iv_fit(&f.y, &exog(&f), &f.d, "d", "w", &f.z[0], None, &opts),
        Err(Error::Design(_))
    ));
}

#[test]
fn subgroup_difference_requires_the_coefficient() {
    let f = fixture(12, 500, 1);
    let a = iv(&f, &external(&["z1"], &[&f.z[0]]));
    let g = fixture(13, 500, 1);
    let b = iv(&g, &external(&["z1"], &[&g.z[0]]));
    let t = subgroup_difference(&a, &b, "d").unwrap();
    assert!(rel_close(t.difference, a.beta() - b.beta(), 1e-15));
    assert!(rel_close(t.se, a.beta_se().hypot(b.beta_se()), 1e-15));
    assert!(matches!(
        subgroup_difference(&a, &b, "cocaine"),
        Err(Error::MissingCoefficient(c)) if c == "cocaine"
    ));
    let same = subgroup_difference(&a, &a, "d").unwrap();
    assert_eq!((same.difference, same.p_value), (0.0, 1.0));
}

#[test]
fn robust_sandwich_uses_actual_treatment() {
    let f = fixture(14, 500, 2);
    let fit = iv(&f, &external(&["z1", "z2"], &[&f.z[0], &f.z[1]]));
    for i in 0..500 {
        let pred = fit.fit.coefficients[0] + fit.fit.coefficients[1] * f.x1[i] + fit.beta() * f.d[i];
        assert!((fit.fit.residuals[i] - (f.y[i] - pred)).abs() < 1e-12);
    }
}
