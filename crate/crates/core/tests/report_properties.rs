use hetiv::report::{
    estimation_table, format_fixed, stars, ColumnResult, EstimateCell, TableLayout, MINUS,
};
use proptest::prelude::*;

fn star_count(p: f64) -> usize {
    stars(p).len()
}

fn parse(s: &str) -> f64 {
    s.replace(',', "").replace(MINUS, "-").parse().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn stars_depend_only_on_thresholds(p in 0.0f64..=1.0) {
        let expect = if p <= 0.01 { 3 } else if p <= 0.05 { 2 } else if p <= 0.10 { 1 } else { 0 };
        prop_assert_eq!(star_count(p), expect);
        prop_assert_eq!(stars(p), stars(p));
    }

    #[test]
    fn smaller_p_never_loses_stars(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(star_count(lo) >= star_count(hi));
    }

    #[test]
    fn rounding_is_within_half_a_unit(x in -1e6f64..1e6) {
        let s = format_fixed(x, 3, false);
        prop_assert!((parse(&s) - x).abs() <= 0.0005 + 1e-9 * x.abs());
        let frac = s.rsplit('.').next().unwrap();
        prop_assert_eq!(frac.len(), 3);
    }

    #[test]
    fn rounding_is_symmetric_about_zero(x in 0.0f64..1e6) {
        let pos = format_fixed(x, 3, true);
        let neg = format_fixed(-x, 3, true);
        if pos.chars().all(|c| c == '0' || c == '.') {
            prop_assert_eq!(neg, pos);
        } else {
            prop_assert_eq!(neg, format!("{MINUS}{pos}"));
        }
    }

    #[test]
    fn output_is_locale_independent(x in -1e7f64..1e7, decimals in 0usize..5) {
        let human = format_fixed(x, decimals, true);
        let machine = format_fixed(x, decimals, false);
        prop_assert!(human.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',' || c == MINUS));
        prop_assert!(!machine.contains(','));
        prop_assert_eq!(human.replace(',', ""), machine);
    }
}

#[test]
fn every_se_sits_in_parentheses_beneath_its_coefficient() {
    let cols: Vec<ColumnResult> = [(-0.038, 0.014, 0.0066), (0.005, 0.051, 0.92), (-0.102, 0.030, 0.0007)]
        .iter()
        .enumerate()
        .map(|(i, &(coef, se, p))| ColumnResult {
            group: if i < 2 { "Employment".into() } else { "Wage".into() },
            method: if i % 2 == 0 { "OLS".into() } else { "IV".into() },
            estimate: Some(Ok(EstimateCell { coef, se, p })),
            n: Some(25_153),
            ..Default::default()
        })
        .collect();
    let t = estimation_table(
        &TableLayout {
            title: "Estimates".into(),
            row_label: "Drug use".into(),
            ..Default::default()
        },
        &cols,
    );
    let text = t.render_human();
    let lines: Vec<&str> = text.lines().collect();
    let row = lines.iter().position(|l| l.starts_with("Drug use")).unwrap();
    let below = lines[row + 1];
    for c in &cols {
        let e = c.estimate.clone().unwrap().unwrap();
        let coef = e.coef_text();
        let se = e.se_text();
        let at = |line: &str, pat: &str| line.find(pat).map(|b| line[..b].chars().count()).unwrap();
        let (a, b) = (at(lines[row], &coef), at(below, &se));
        let mid_a = 2 * a + coef.chars().count();
        let mid_b = 2 * b + se.chars().count();
        assert!(mid_a.abs_diff(mid_b) <= 2, "{coef} / {se} misaligned");
    }
    assert!(text.contains("25,153"));
    assert!(t.render_csv().contains("25153"));
}
