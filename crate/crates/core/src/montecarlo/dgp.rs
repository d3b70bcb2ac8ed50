use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dist::{normal_cdf, normal_quantile};
use crate::error::{Error, Result};
use crate::survey::{Column, Dataset};

/// Outcome probabilities are clamped to this range before the Bernoulli draw.
pub const CLAMP: (f64, f64) = (0.02, 0.98);

/// Share of clamped rows above which a configuration warning is raised.
pub const CLAMP_WARN_SHARE: f64 = 0.05;

/// A binary instrument `w` that only enters the treatment equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExternalInstrument {
    /// `P(w = 1)`.
    pub share: f64,
    /// Change in treatment probability when `w = 1` (non-positive).
    pub effect: f64,
}

impl Default for ExternalInstrument {
    fn default() -> Self {
        Self {
            share: 0.5,
            effect: -0.03,
        }
    }
}

/// Ground truth of the synthetic process.
///
/// Controls are `x1 ~ N(0,1)` and a balanced binary `x2`. Treatment is the
/// union of three routes:
///
/// * heteroskedastic: `γ'x + exp(δ x1)(u + feedback·ε) > t`,
/// * confounded: `c > Φ⁻¹(1 - confounded_share)`, with `c` the shock that
///   also drives the outcome error `ε = ρc + sqrt(1-ρ²)e`,
/// * external (optional): probability `-effect` when `w = 0`.
///
/// `t` is calibrated so that `E[D] = prevalence`. The outcome is Bernoulli
/// with probability `α'x + βD + σε + λ(x2 - ½)(D - prevalence)`, clamped to
/// [`CLAMP`]; `λ = exclusion_violation` lets the `x2` instrument enter the
/// outcome directly. Observed D flips true uses to 0 at the false-negative
/// rate and non-uses to 1 at the false-positive rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DgpConfig {
    pub n: usize,
    pub beta: f64,
    /// Intercept, `x1`, `x2`.
    pub alpha: [f64; 3],
    /// Slopes on `x1`, `x2` in the latent treatment index.
    pub gamma: [f64; 2],
    pub delta: f64,
    pub rho: f64,
    pub feedback: f64,
    /// (false-negative rate, false-positive rate).
    pub misclass: (f64, f64),
    pub seed: u64,
    pub prevalence: f64,
    pub outcome_error_scale: f64,
    pub confounded_share: f64,
    pub exclusion_violation: f64,
    pub external: Option<ExternalInstrument>,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n: 25_000,
            beta: -0.04,
            alpha: [0.90, 0.01, 0.01],
            gamma: [0.0, 0.0],
            delta: 1.0,
            rho: 0.3,
            feedback: 0.0,
            misclass: (0.0, 0.0),
            seed: 42,
            prevalence: 0.033,
            outcome_error_scale: 0.038,
            confounded_share: 0.012,
            exclusion_violation: 0.0,
            external: None,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 100 {
            return bad(format!("n = {} is below the minimum of 100", self.n));
        }
        for (name, r) in [
            ("false-negative rate", self.misclass.0),
            ("false-positive rate", self.misclass.1),
        ] {
            if !(0.0..1.0).contains(&r) && r != 1.0 {
                return bad(format!("{name} {r} outside [0, 1]"));
            }
        }
        if !(self.rho.abs() < 1.0) {
            return bad(format!("|rho| = {} must be below 1", self.rho.abs()));
        }
        if !(self.prevalence > self.confounded_share && self.prevalence < 1.0) {
            return bad(format!(
                "prevalence {} must lie in (confounded_share, 1)",
                self.prevalence
            ));
        }
        if !(0.0..1.0).contains(&self.confounded_share) {
            return bad(format!("confounded_share {} outside [0, 1)", self.confounded_share));
        }
        if let Some(e) = self.external {
            if !(e.share > 0.0 && e.share < 1.0) {
                return bad(format!("external instrument share {} outside (0, 1)", e.share));
            }
            if !(e.effect <= 0.0 && e.effect > -1.0) {
                return bad(format!("external instrument effect {} outside (-1, 0]", e.effect));
            }
        }
        if ![self.beta, self.delta, self.feedback, self.outcome_error_scale, self.exclusion_violation]
            .iter()
            .chain(&self.alpha)
            .chain(&self.gamma)
            .all(|v| v.is_finite())
        {
            return bad("non-finite DGP parameter".into());
        }
        Ok(())
    }

    fn confounded_cutoff(&self) -> f64 {
        if self.confounded_share > 0.0 {
            normal_quantile(1.0 - self.confounded_share)
        } else {
            f64::INFINITY
        }
    }

    /// Population treatment prevalence for threshold `t` (quadrature over `x1`).
    pub fn prevalence_at(&self, t: f64) -> f64 {
        const NODES: usize = 4001;
        let sd = (1.0 + self.feedback * self.feedback).sqrt();
        let pc = self.confounded_share;
        let routes: Vec<(f64, f64)> = match self.external {
            Some(e) => vec![(1.0 - e.share, -e.effect), (e.share, 0.0)],
            None => vec![(1.0, 0.0)],
        };
        let mut total = 0.0;
        let mut mass = 0.0;
        for i in 0..NODES {
            let x1 = -8.0 + 16.0 * i as f64 / (NODES - 1) as f64;
            let wq = (-0.5 * x1 * x1).exp();
            mass += wq;
            for x2 in [0.0, 1.0] {
                let idx = self.gamma[0] * x1 + self.gamma[1] * x2;
                let ph = 1.0 - normal_cdf((t - idx) / ((self.delta * x1).exp() * sd));
                for &(pw, qw) in &routes {
                    total += wq * 0.5 * pw * (1.0 - (1.0 - ph) * (1.0 - pc) * (1.0 - qw));
                }
            }
        }
        total / mass
    }

    /// Threshold `t` matching the prevalence target, by bisection.
    pub fn calibrate_threshold(&self) -> Result<f64> {
        let (mut lo, mut hi) = (-50.0, 50.0);
        let f = |t: f64| self.prevalence_at(t) - self.prevalence;
        if !(f(lo) > 0.0 && f(hi) < 0.0) {
            return Err(Error::Config(format!(
                "prevalence {} is unreachable with these parameters",
                self.prevalence
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Draws one sample with the given seed and a precomputed threshold.
    pub fn sample_with(&self, seed: u64, threshold: f64) -> SimulatedSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n;
        let tc = self.confounded_cutoff();
        let s = (1.0 - self.rho * self.rho).sqrt();
        let (fnr, fpr) = self.misclass;
        let mut x1 = Vec::with_capacity(n);
        let mut x2 = Vec::with_capacity(n);
        let mut w = self.external.map(|_| Vec::with_capacity(n));
        let mut d_true = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut clamped = 0usize;
        for _ in 0..n {
            // fixed draw order per row keeps scenarios on common random numbers
            let a: f64 = rng.sample(StandardNormal);
            let b = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
            let w_u: f64 = rng.random();
            let u: f64 = rng.sample(StandardNormal);
            let c: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            let route_u: f64 = rng.random();
            let y_u: f64 = rng.random();
            let fn_u: f64 = rng.random();
            let fp_u: f64 = rng.random();

            let eps = self.rho * c + s * e;
            let index = self.gamma[0] * a + self.gamma[1] * b;
            let hetero = index + (self.delta * a).exp() * (u + self.feedback * eps) > threshold;
            let confounded = c > tc;
            let external = match self.external {
                Some(ext) => {
                    let wi = if w_u < ext.share { 1.0 } else { 0.0 };
                    w.as_mut().expect("allocated").push(wi);
                    wi == 0.0 && route_u < -ext.effect
                }
                None => false,
            };
            let dt = if hetero || confounded || external { 1.0 } else { 0.0 };
            let mut p = self.alpha[0]
                + self.alpha[1] * a
                + self.alpha[2] * b
                + self.beta * dt
                + self.outcome_error_scale * eps
                + self.exclusion_violation * (b - 0.5) * (dt - self.prevalence);
            if p < CLAMP.0 || p > CLAMP.1 {
                clamped += 1;
                p = p.clamp(CLAMP.0, CLAMP.1);
            }
            let dobs = if dt == 1.0 {
                if fn_u < fnr { 0.0 } else { 1.0 }
            } else if fp_u < fpr {
                1.0
            } else {
                0.0
            };
            x1.push(a);
            x2.push(b);
            d_true.push(dt);
            d.push(dobs);
            y.push(if y_u < p { 1.0 } else { 0.0 });
        }
        let clamped_share = clamped as f64 / n as f64;
        if clamped_share > CLAMP_WARN_SHARE {
            warn!(
                "outcome probability clamped to [{}, {}] on {:.1}% of rows",
                CLAMP.0,
                CLAMP.1,
                100.0 * clamped_share
            );
        }
        SimulatedSample {
            x1,
            x2,
            w,
            d_true,
            d,
            y,
            clamped_share,
        }
    }

    /// Calibrates the threshold and draws one sample with `self.seed`.
    pub fn sample(&self) -> Result<SimulatedSample> {
        self.validate()?;
        let t = self.calibrate_threshold()?;
        Ok(self.sample_with(self.seed, t))
    }
}

/// Raw columns of one synthetic draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSample {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub w: Option<Vec<f64>>,
    pub d_true: Vec<f64>,
    /// Observed (possibly misclassified) treatment.
    pub d: Vec<f64>,
    pub y: Vec<f64>,
    pub clamped_share: f64,
}

impl SimulatedSample {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Columns `x1`, `x2`, `d`, `d_true`, `y` and, when present, `w`.
    pub fn to_dataset(&self) -> Dataset {
        let binary = |v: &[f64]| Column::Binary(v.iter().map(|&x| Some(x == 1.0)).collect());
        let mut ds = Dataset::new(self.len());
        let mut put = |name: &str, c: Column| ds.insert_column(name, c).expect("equal lengths");
        put("x1", Column::Numeric(self.x1.iter().map(|&x| Some(x)).collect()));
        put("x2", binary(&self.x2));
        put("d", binary(&self.d));
        put("d_true", binary(&self.d_true));
        put("y", binary(&self.y));
        if let Some(w) = &self.w {
            put("w", binary(w));
        }
        ds
    }
}

/// Draws the synthetic dataset described by `c`.
pub fn simulate_dgp(c: &DgpConfig) -> Result<Dataset> {
    let mut ds = c.sample()?.to_dataset();
    ds.provenance_mut()
        .filters
        .push(format!("simulated from the synthetic DGP with seed {}", c.seed));
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibrated_prevalence_matches_target() {
        let c = DgpConfig::default();
        let t = c.calibrate_threshold().unwrap();
        assert!((c.prevalence_at(t) - 0.033).abs() < 1e-10);
    }

    #[test]
    fn deterministic_given_seed() {
        let c = DgpConfig {
            n: 500,
            ..Default::default()
        };
        assert_eq!(c.sample().unwrap(), c.sample().unwrap());
        let other = DgpConfig { seed: 43, ..c.clone() };
        assert_ne!(c.sample().unwrap().y, other.sample().unwrap().y);
    }

    #[test]
    fn total_false_negatives() {
        let c = DgpConfig {
            n: 2_000,
            misclass: (1.0, 0.0),
            ..Default::default()
        };
        let s = c.sample().unwrap();
        assert!(s.d.iter().all(|&v| v == 0.0));
        assert!(s.d_true.iter().any(|&v| v == 1.0));
    }

    #[test]
    fn validation() {
        for bad in [
            DgpConfig { n: 99, ..Default::default() },
            DgpConfig { rho: 1.0, ..Default::default() },
            DgpConfig { misclass: (0.3, -0.1), ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn dataset_columns() {
        let c = DgpConfig {
            n: 200,
            external: Some(ExternalInstrument::default()),
            ..Default::default()
        };
        let ds = simulate_dgp(&c).unwrap();
        let names: Vec<&str> = ds.column_names().collect();
        assert_eq!(names, vec!["x1", "x2", "d", "d_true", "y", "w"]);
        assert_eq!(ds.rows(), 200);
    }
}
