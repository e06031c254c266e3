//! Brute-force ground truth for small paths.
//!
//! For a step function the supremum over partitions of `[a; b]` may be taken
//! over increasing subsequences of sample times. Given any partition
//! `s_0 < ... < s_k`, replace every `s_j` by the greatest sample time `<= s_j`.
//! The value at each point is unchanged, and points that collapse onto the same
//! sample contribute a zero increment, which the clamp `max(|.| - c, 0)` maps to
//! zero. Dropping them leaves the sum intact, so every partition sum is matched
//! by a subsequence sum, and subsequences are partitions themselves.
//!
//! The enumeration below visits all `2^n` index subsets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::approx;
use crate::crossing;
use crate::error::{Error, Result};
use crate::path::{self, CadlagPath, TruncationLevel};

pub const DEFAULT_SIZE_CAP: usize = 14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteResult {
    pub value: f64,
    /// Sample indices of one maximising subsequence.
    pub subsequence: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
enum Sign {
    Both,
    Up,
    Down,
}

fn clamp_term(delta: f64, c: f64, sign: Sign) -> f64 {
    let x = match sign {
        Sign::Both => delta.abs(),
        Sign::Up => delta,
        Sign::Down => -delta,
    };
    (x - c).max(0.0)
}

fn enumerate(path: &CadlagPath, c: TruncationLevel, sign: Sign, cap: usize) -> Result<BruteResult> {
    let n = path.len();
    if n > cap {
        return Err(Error::SizeCap { n, cap });
    }
    let values = path.values();
    let c = c.get();
    let mut best = BruteResult {
        value: 0.0,
        subsequence: vec![0],
    };
    for mask in 1u64..(1u64 << n) {
        let mut total = 0.0;
        let mut prev: Option<usize> = None;
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            if let Some(p) = prev {
                total += clamp_term(values[i] - values[p], c, sign);
            }
            prev = Some(i);
        }
        if total > best.value {
            best.value = total;
            best.subsequence = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        }
    }
    Ok(best)
}

pub fn brute_tv(path: &CadlagPath, c: TruncationLevel) -> Result<BruteResult> {
    brute_tv_capped(path, c, DEFAULT_SIZE_CAP)
}

pub fn brute_utv(path: &CadlagPath, c: TruncationLevel) -> Result<BruteResult> {
    brute_utv_capped(path, c, DEFAULT_SIZE_CAP)
}

pub fn brute_dtv(path: &CadlagPath, c: TruncationLevel) -> Result<BruteResult> {
    brute_dtv_capped(path, c, DEFAULT_SIZE_CAP)
}

pub fn brute_tv_capped(path: &CadlagPath, c: TruncationLevel, cap: usize) -> Result<BruteResult> {
    enumerate(path, c, Sign::Both, cap)
}

pub fn brute_utv_capped(path: &CadlagPath, c: TruncationLevel, cap: usize) -> Result<BruteResult> {
    enumerate(path, c, Sign::Up, cap)
}

pub fn brute_dtv_capped(path: &CadlagPath, c: TruncationLevel, cap: usize) -> Result<BruteResult> {
    enumerate(path, c, Sign::Down, cap)
}

/// Replays a subsequence under the given one-sided or two-sided clamp.
pub fn subsequence_sum(path: &CadlagPath, c: TruncationLevel, subsequence: &[usize], up: bool, down: bool) -> f64 {
    let v = path.values();
    subsequence
        .windows(2)
        .map(|w| {
            let d = v[w[1]] - v[w[0]];
            let mut s = 0.0;
            if up {
                s += clamp_term(d, c.get(), Sign::Up);
            }
            if down {
                s += clamp_term(d, c.get(), Sign::Down);
            }
            s
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityGap {
    /// Smallest `TV(g)` found minus `TV^c(f)`.
    pub gap: f64,
    pub best_tv: f64,
    pub tv_c: f64,
    pub best: Vec<f64>,
    pub trials: usize,
}

/// Randomised search for a competitor in the `c/2` ball with smaller total
/// variation than `TV^c(f)`.
///
/// Trial 0 is the lazy approximant itself; later trials start from uniform
/// points of the ball and run coordinate descent with run-flattening moves.
pub fn brute_optimality_gap(path: &CadlagPath, c: TruncationLevel, trials: usize, seed: u64) -> OptimalityGap {
    let half = c.half();
    let values = path.values();
    let lo: Vec<f64> = values.iter().map(|v| v - half).collect();
    let hi: Vec<f64> = values.iter().map(|v| v + half).collect();
    let tv_c = crossing::truncated_variation(path, c);
    let n = values.len();

    let lazy = approx::build_f_c(path, c).f_c.values().to_vec();
    let mut best = lazy.clone();
    let mut best_tv = path::total_variation_of(&best);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 1..trials.max(1) {
        let mut g: Vec<f64> = (0..n).map(|i| rng.random_range(lo[i]..=hi[i])).collect();
        descend(&mut g, &lo, &hi, &mut rng);
        let tv = path::total_variation_of(&g);
        if tv < best_tv {
            best_tv = tv;
            best = g;
        }
    }

    OptimalityGap {
        gap: best_tv - tv_c,
        best_tv,
        tv_c,
        best,
        trials: trials.max(1),
    }
}

fn descend(g: &mut [f64], lo: &[f64], hi: &[f64], rng: &mut ChaCha8Rng) {
    let n = g.len();
    if n < 2 {
        return;
    }
    for _sweep in 0..64 {
        let before = path::total_variation_of(g);
        for i in 0..n {
            g[i] = best_coordinate(g, i, lo[i], hi[i]);
        }
        // flatten a random run to a single admissible level
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let j = rng.random_range(i..n);
            let run_lo = lo[i..=j].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let run_hi = hi[i..=j].iter().copied().fold(f64::INFINITY, f64::min);
            if run_lo > run_hi {
                continue;
            }
            let mut candidates = vec![0.5 * (run_lo + run_hi)];
            if i > 0 {
                candidates.push(g[i - 1].clamp(run_lo, run_hi));
            }
            if j + 1 < n {
                candidates.push(g[j + 1].clamp(run_lo, run_hi));
            }
            let current = path::total_variation_of(g);
            let saved: Vec<f64> = g[i..=j].to_vec();
            let mut accepted = false;
            for v in candidates {
                g[i..=j].iter_mut().for_each(|x| *x = v);
                if path::total_variation_of(g) < current {
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                g[i..=j].copy_from_slice(&saved);
            }
        }
        if path::total_variation_of(g) >= before {
            break;
        }
    }
}

/// Minimiser of `|x - g[i-1]| + |g[i+1] - x|` over `[lo; hi]`, nearest to `g[i]`.
fn best_coordinate(g: &[f64], i: usize, lo: f64, hi: f64) -> f64 {
    let left = if i > 0 { Some(g[i - 1]) } else { None };
    let right = g.get(i + 1).copied();
    let (a, b) = match (left, right) {
        (Some(l), Some(r)) => (l.min(r), l.max(r)),
        (Some(x), None) | (None, Some(x)) => (x, x),
        (None, None) => return g[i],
    };
    let (a, b) = (a.max(lo), b.min(hi));
    if a <= b {
        g[i].clamp(a, b)
    } else if b < lo {
        lo
    } else {
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(values: &[f64]) -> CadlagPath {
        CadlagPath::from_values(values.to_vec()).unwrap()
    }

    fn c(x: f64) -> TruncationLevel {
        TruncationLevel::new(x).unwrap()
    }

    #[test]
    fn four_point_example() {
        let f = p(&[0.0, 1.0, 0.2, 1.2]);
        let tv = brute_tv(&f, c(0.5)).unwrap();
        let utv = brute_utv(&f, c(0.5)).unwrap();
        let dtv = brute_dtv(&f, c(0.5)).unwrap();
        assert!((tv.value - 1.3).abs() < 1e-12);
        assert!((utv.value - 1.0).abs() < 1e-12);
        assert!((dtv.value - 0.3).abs() < 1e-12);
        assert_eq!(tv.subsequence, vec![0, 1, 2, 3]);
        assert_eq!(subsequence_sum(&f, c(0.5), &tv.subsequence, true, true), tv.value);
    }

    #[test]
    fn degenerate_cases() {
        let single = brute_tv(&p(&[4.0]), c(0.1)).unwrap();
        assert_eq!(single.value, 0.0);
        let f = p(&[0.0, 1.0, 0.2, 1.2]);
        assert_eq!(brute_tv(&f, c(1.2)).unwrap().value, 0.0);
        assert_eq!(brute_dtv(&f, c(5.0)).unwrap().value, 0.0);
    }

    #[test]
    fn size_cap() {
        let f = CadlagPath::from_values(vec![0.0; 15]).unwrap();
        assert_eq!(brute_tv(&f, c(1.0)), Err(Error::SizeCap { n: 15, cap: 14 }));
        assert!(brute_tv_capped(&f, c(1.0), 16).is_ok());
    }

    #[test]
    fn optimality_gap_examples() {
        let f = p(&[0.0, 1.0, 0.2, 1.2]);
        let r = brute_optimality_gap(&f, c(1.0), 2000, 7);
        assert!(r.gap >= -1e-10);
        assert!(r.gap.abs() < 1e-12);

        let ramp = p(&[0.0, 0.25, 0.5, 1.0, 2.0]);
        let r = brute_optimality_gap(&ramp, c(0.6), 500, 1);
        assert!(r.gap >= -1e-10);
        assert!((r.best_tv - 1.4).abs() < 1e-12);
    }

    #[test]
    fn flat_competitor_is_found_by_descent() {
        // a random start must descend to the optimum of a monotone ramp
        let ramp = p(&[0.0, 1.0, 2.0, 3.0]);
        let level = c(1.0);
        let lo: Vec<f64> = ramp.values().iter().map(|v| v - 0.5).collect();
        let hi: Vec<f64> = ramp.values().iter().map(|v| v + 0.5).collect();
        let mut g = vec![0.4, 0.6, 2.4, 2.6];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        descend(&mut g, &lo, &hi, &mut rng);
        let tv = path::total_variation_of(&g);
        assert!((tv - crossing::truncated_variation(&ramp, level)).abs() < 1e-12, "{g:?}");
    }
}
