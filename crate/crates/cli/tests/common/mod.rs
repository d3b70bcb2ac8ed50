#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use hetiv::montecarlo::DgpConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SUBSTANCES: [&str; 11] = [
    "tranquilisers",
    "cannabis",
    "inhalants",
    "opiates",
    "sedatives",
    "stimulants",
    "cocaine",
    "crack",
    "hallucinogens",
    "heroin",
    "methamphetamines",
];

const EDUCATION: [&str; 5] = ["less than primary", "primary", "lower secondary", "upper secondary", "higher"];

/// Survey-shaped microdata built on the synthetic process: age and urban
/// residence drive heteroskedastic drug use, two waves, and a formality
/// outcome that is never observed in wave 2.
pub fn write_survey(path: &Path, n: usize, seed: u64) {
    let s = DgpConfig {
        n,
        seed,
        ..DgpConfig::default()
    }
    .sample()
    .unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out = String::from("age,sex,activity,education,marital,state,wave,religious,urban,employed,formal,fexp");
    for sub in SUBSTANCES {
        write!(out, ",{sub}_12m").unwrap();
    }
    out.push('\n');
    for i in 0..n {
        // a few rows outside the sample restrictions
        let age = match i % 50 {
            0 => 18.0,
            1 => 57.0,
            _ => (36.0 + 6.0 * s.x1[i]).round().clamp(22.0, 50.0),
        };
        let sex = if i % 40 == 3 { "female" } else { "male" };
        let activity = if s.y[i] > 0.5 { "working" } else { "unemployed" };
        let education = EDUCATION[r.random_range(0..EDUCATION.len())];
        let marital = ["single", "married", "other"][r.random_range(0..3)];
        let state = ["north", "centre", "south", "coast"][r.random_range(0..4)];
        let wave = 1 + i % 2;
        let religious = u8::from(r.random::<f64>() < 0.5);
        let formal = if wave == 2 {
            "NA".to_string()
        } else {
            let p = 0.45 - 0.05 * s.d[i] + 0.05 * s.x2[i];
            u8::from(r.random::<f64>() < p).to_string()
        };
        let weight = r.random_range(50.0..500.0);
        write!(
            out,
            "{age},{sex},{activity},{education},{marital},{state},{wave},{religious},{},{},{formal},{weight:.2}",
            s.x2[i], s.y[i]
        )
        .unwrap();
        // each user takes one soft or one hard substance, some both
        let (soft, hard) = if s.d[i] > 0.5 {
            match r.random_range(0..10) {
                0..=5 => (true, false),
                6..=8 => (false, true),
                _ => (true, true),
            }
        } else {
            (false, false)
        };
        for sub in SUBSTANCES {
            let on = match sub {
                "cannabis" => soft,
                "cocaine" => hard,
                _ => false,
            };
            write!(out, ",{}", u8::from(on)).unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}

pub fn survey_columns() -> String {
    let mut cols = String::from(
        "age = \"numeric\"\nsex = \"categorical\"\nactivity = \"categorical\"\neducation = \"categorical\"\nmarital = \"categorical\"\nstate = \"categorical\"\nwave = \"numeric\"\nreligious = \"binary\"\nurban = \"binary\"\nemployed = \"binary\"\nformal = \"binary\"\nfexp = \"numeric\"\n",
    );
    for sub in SUBSTANCES {
        writeln!(cols, "{sub}_12m = \"binary\"").unwrap();
    }
    cols
}

/// Replicate-mode configuration for [`write_survey`] output.
pub fn survey_config(input: &str) -> String {
    format!(
        r#"mode = "replicate"

[data]
input = "{input}"
weight = "fexp"
wave_column = "wave"

[data.columns]
{cols}
[sample]
min_age = 22
max_age = 50
sex_filter = ["sex", "male"]
activity_exclusions = ["education", "disabled", "retired"]

[model]
outcomes = ["employed", "formal"]
taxonomy = "soft_hard"
controls = ["urban"]
squared = ["age"]
factors = ["education", "marital"]
fixed_effects = ["state"]
instrument = "both"
external_instrument = "religious"
labels = {{ employed = "Employment", formal = "Formal employment" }}
"#,
        cols = survey_columns()
    )
}

/// The synthetic process as a plain CSV with columns x1, x2, d, y.
pub fn write_dgp_csv(path: &Path, c: &DgpConfig) {
    let s = c.sample().unwrap();
    let mut out = String::from("x1,x2,d,y\n");
    for i in 0..s.len() {
        writeln!(out, "{},{},{},{}", s.x1[i], s.x2[i], s.d[i], s.y[i]).unwrap();
    }
    std::fs::write(path, out).unwrap();
}
