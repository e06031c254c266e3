//! `verify`: the streaming engine and the approximants against brute force.

use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use truncvar_core::approx::build_f_c;
use truncvar_core::crossing::variation_profile;
use truncvar_core::oracle::{brute_dtv, brute_tv, brute_utv};
use truncvar_core::path::{sup_distance, total_variation_profile};
use truncvar_core::{CadlagPath, TruncationLevel};

use crate::{input_error, Failure};

const LATTICE: [f64; 4] = [0.0, 0.5, 1.0, 1.5];
const LEVELS: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
const MAX_LATTICE_LEN: usize = 8;
const RANDOM_MAX_LEN: usize = 12;
const TOLERANCE: f64 = 1e-12;

#[derive(Debug, Serialize)]
pub struct Row {
    pub check: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub passed: bool,
}

impl Outcome {
    pub fn table(&self) -> String {
        let mut s = format!("{:<14} {:>8} {:>12}  status\n", "check", "cases", "max_error");
        for r in &self.rows {
            let _ = writeln!(s, "{:<14} {:>8} {:>12.3e}  {}", r.check, r.cases, r.max_error, if r.passed { "pass" } else { "FAIL" });
        }
        let _ = writeln!(s, "overall: {}", if self.passed { "pass" } else { "FAIL" });
        s
    }
}

#[derive(Default)]
struct Tally {
    cases: usize,
    engine: f64,
    approx: f64,
}

impl Tally {
    fn check(&mut self, values: Vec<f64>, c: f64) {
        let path = CadlagPath::from_values(values).expect("finite values");
        let level = TruncationLevel::new(c).expect("positive level");
        let fast = variation_profile(&path, level).final_values();
        let tv = brute_tv(&path, level).expect("within size cap").value;
        let utv = brute_utv(&path, level).expect("within size cap").value;
        let dtv = brute_dtv(&path, level).expect("within size cap").value;
        self.engine = self
            .engine
            .max((fast.tv - tv).abs())
            .max((fast.utv - utv).abs())
            .max((fast.dtv - dtv).abs())
            .max((tv - utv - dtv).abs());

        let bundle = build_f_c(&path, level);
        let ball = (sup_distance(&path, &bundle.f_c).expect("same grid") - c / 2.0).max(0.0);
        let tv_fc = total_variation_profile(&bundle.f_c);
        let value = tv_fc.iter().zip(&bundle.profile.tv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        self.approx = self.approx.max(ball).max(value);
        self.cases += 1;
    }

    fn rows(&self, engine: &'static str, approx: &'static str) -> [Row; 2] {
        [
            Row {
                check: engine,
                cases: self.cases,
                max_error: self.engine,
                passed: self.engine <= TOLERANCE,
            },
            Row {
                check: approx,
                cases: self.cases,
                max_error: self.approx,
                passed: self.approx <= TOLERANCE,
            },
        ]
    }
}

pub fn run(max_n: usize, random: usize, seed: Option<u64>) -> Result<Outcome, Failure> {
    if max_n == 0 || max_n > MAX_LATTICE_LEN {
        return Err(input_error("invalid_argument", format!("--max-n must be in 1..={MAX_LATTICE_LEN}")));
    }
    if random > 0 && seed.is_none() {
        return Err(input_error("usage", "--random needs an explicit --seed"));
    }

    let mut lattice = Tally::default();
    for len in 1..=max_n {
        for code in 0..4usize.pow(len as u32) {
            let values: Vec<f64> = (0..len).map(|k| LATTICE[code / 4usize.pow(k as u32) % 4]).collect();
            for c in LEVELS {
                lattice.check(values.clone(), c);
            }
        }
    }
    let mut rows: Vec<Row> = lattice.rows("lattice", "lattice-approx").into();

    if random > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.expect("checked above"));
        let mut tally = Tally::default();
        for _ in 0..random {
            let len = rng.random_range(1..=RANDOM_MAX_LEN);
            let values: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
            let c = rng.random_range(0.01..2.0);
            tally.check(values, c);
        }
        rows.extend(tally.rows("random", "random-approx"));
    }

    let passed = rows.iter().all(|r| r.passed);
    Ok(Outcome { rows, passed })
}
