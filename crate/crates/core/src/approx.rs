//! Minimal-total-variation approximants.
//!
//! * `f^c`: the "lazy" function within uniform distance `c/2` of `f` whose
//!   variation on every `[a; s]` equals `TV^c(f, [a; s])`.
//! * `f^{i,c} = UTV^c(f,[a;.]) - DTV^c(f,[a;.])`: starts at 0, its increments stay
//!   within `c` of those of `f`, and it has the same minimal variation.
//! * `X~^c`: an adapted (prefix-determined) process within `c/2` of `f` whose
//!   variation exceeds `TV^c` by at most `c/2`.
//!
//! `f^c` is built directly from the epoch structure; `f^{i,c}` comes from the
//! variation profile. Their difference is the constant `alpha`.

use serde::Serialize;

use crate::crossing::{self, Branch, EpochKind, Leg, VariationProfile};
use crate::error::{Error, Result};
use crate::path::{self, CadlagPath, TruncationLevel};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproximantBundle {
    pub f_c: CadlagPath,
    pub f_ic: CadlagPath,
    /// `h^c = f^c - f`.
    pub h_c: CadlagPath,
    /// `h^{0,c} = f(a) + f^{i,c} - f`.
    pub h_0c: CadlagPath,
    /// `f^c = alpha + f^{i,c}`.
    pub alpha: f64,
    /// The offset minimising `||alpha_0 + h^{0,c}||_inf`.
    pub alpha_0: f64,
    pub branch: Branch,
    pub profile: VariationProfile,
}

pub fn build_f_c(path: &CadlagPath, c: TruncationLevel) -> ApproximantBundle {
    let half = c.half();
    let values = path.values();
    let n = values.len();

    let decomposition = crossing::decompose(path, c);
    let profile = crossing::variation_profile(path, c);

    // before the first epoch f^c holds the level that the first forced move
    // starts from; with no epoch at all, the midpoint of the range
    let (pre_level, alpha) = match decomposition.epochs.first() {
        Some(e) if e.kind == EpochKind::Up => {
            let level = decomposition.pre_min + half;
            (level, level)
        }
        Some(_) => {
            let level = decomposition.pre_max - half;
            (level, level)
        }
        None => {
            let level = 0.5 * (path.min_value() + path.max_value());
            (level, level)
        }
    };

    let mut f_c = vec![pre_level; n];
    for epoch in &decomposition.epochs {
        let end = epoch.end_index.unwrap_or(n);
        let mut leg = Leg::open(epoch.kind, epoch.start_index, epoch.base, values[epoch.start_index]);
        for (i, slot) in f_c.iter_mut().enumerate().take(end).skip(epoch.start_index) {
            leg.step(i, values[i], c.get());
            *slot = leg.extremum() - sign(epoch.kind) * half;
        }
    }

    let f_ic: Vec<f64> = profile.utv.iter().zip(&profile.dtv).map(|(u, d)| u - d).collect();
    let h_c: Vec<f64> = f_c.iter().zip(values).map(|(g, f)| g - f).collect();
    let f_a = values[0];
    let h_0c: Vec<f64> = f_ic.iter().zip(values).map(|(g, f)| f_a + g - f).collect();
    let h0_min = h_0c.iter().copied().fold(f64::INFINITY, f64::min);
    let h0_max = h_0c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let alpha_0 = -h0_min - 0.5 * (h0_max - h0_min);

    let grid = |v: Vec<f64>| path.with_values(v).expect("approximant values are finite");
    ApproximantBundle {
        f_c: grid(f_c),
        f_ic: grid(f_ic),
        h_c: grid(h_c),
        h_0c: grid(h_0c),
        alpha,
        alpha_0,
        branch: decomposition.branch,
        profile,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StoppingIndex {
    pub kind: EpochKind,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptedApproximant {
    pub x_tilde_c: CadlagPath,
    /// Realised `T_{u,k}` (kind Up) and `T_{d,k}` (kind Down) in order.
    pub stopping_indices: Vec<StoppingIndex>,
}

/// The adapted `c/2`-approximant: it stays at `X_a` until the path has moved
/// `c/2` away from its start, then follows the running extremum of each leg at
/// distance `c/2`, legs reversing after a retreat of `c`.
pub fn build_adapted(path: &CadlagPath, c: TruncationLevel) -> AdaptedApproximant {
    let half = c.half();
    let values = path.values();
    let start = values[0];
    let mut out = Vec::with_capacity(values.len());
    let mut stops = Vec::new();
    let (mut lo, mut hi) = (start, start);
    let mut leg: Option<Leg> = None;

    for (i, &x) in values.iter().enumerate() {
        match leg.as_mut() {
            None => {
                lo = lo.min(x);
                hi = hi.max(x);
                let kind = if hi - start >= half {
                    Some(EpochKind::Up)
                } else if start - lo >= half {
                    Some(EpochKind::Down)
                } else {
                    None
                };
                match kind {
                    Some(kind) => {
                        let opened = Leg::open(kind, i, start, x);
                        stops.push(StoppingIndex { kind, index: i });
                        out.push(opened.extremum() - sign(kind) * half);
                        leg = Some(opened);
                    }
                    None => out.push(start),
                }
            }
            Some(current) => {
                if let Some(next) = current.step(i, x, c.get()) {
                    stops.push(StoppingIndex { kind: next.kind, index: i });
                    *current = next;
                }
                out.push(current.extremum() - sign(current.kind) * half);
            }
        }
    }

    AdaptedApproximant {
        x_tilde_c: path.with_values(out).expect("approximant values are finite"),
        stopping_indices: stops,
    }
}

fn sign(kind: EpochKind) -> f64 {
    match kind {
        EpochKind::Up => 1.0,
        EpochKind::Down => -1.0,
    }
}

/// `X^{i,c}` at every sample, computed in one streaming pass.
pub fn increment_process(path: &CadlagPath, c: TruncationLevel) -> Vec<f64> {
    let mut engine = crossing::Engine::new(c.get());
    path.values()
        .iter()
        .map(|&v| {
            engine.push(v);
            let var = engine.variations();
            var.utv - var.dtv
        })
        .collect()
}

/// Slack on ball membership in `competitor_check`, for rounding in `f +/- c/2`.
pub const BALL_SLACK: f64 = 1e-12;

/// Entries of `CompetitorReport::differences` below this count as undercutting.
pub const OPTIMALITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompetitorReport {
    pub times: Vec<f64>,
    /// `TV(g, [a; s]) - TV^c(f, [a; s])` at each sample time `s` of `f`.
    pub differences: Vec<f64>,
    pub min_difference: f64,
    pub sup_distance: f64,
    pub radius: f64,
    pub optimal: bool,
}

/// Compares a competitor `g` with `||f - g||_inf <= c/2` against `TV^c(f, [a; .])`.
pub fn competitor_check(path: &CadlagPath, c: TruncationLevel, competitor: &CadlagPath) -> Result<CompetitorReport> {
    let radius = c.half();
    let distance = path::sup_distance(path, competitor)?;
    if distance > radius + BALL_SLACK {
        return Err(Error::BallViolation { distance, radius });
    }
    Ok(compare_variation(path, c, competitor, distance, radius))
}

/// Compares a competitor whose increments stay within `c` of those of `f`
/// (`||g - f||_osc <= c`) against `TV^c(f, [a; .])`.
pub fn increment_competitor_check(path: &CadlagPath, c: TruncationLevel, competitor: &CadlagPath) -> Result<CompetitorReport> {
    let radius = c.get();
    let diff = path::union_differences(competitor, path)?;
    let lo = diff.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = diff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    if spread > radius + BALL_SLACK {
        return Err(Error::BallViolation { distance: spread, radius });
    }
    Ok(compare_variation(path, c, competitor, spread, radius))
}

fn compare_variation(path: &CadlagPath, c: TruncationLevel, competitor: &CadlagPath, distance: f64, radius: f64) -> CompetitorReport {
    let tv_c = crossing::variation_profile(path, c).tv;
    let tv_g = path::total_variation_profile(competitor);
    let gt = competitor.times();
    let differences: Vec<f64> = path
        .times()
        .iter()
        .zip(&tv_c)
        .map(|(&s, &reference)| {
            let j = gt.partition_point(|&t| t <= s) - 1;
            tv_g[j] - reference
        })
        .collect();
    let min_difference = differences.iter().copied().fold(f64::INFINITY, f64::min);
    CompetitorReport {
        times: path.times().to_vec(),
        optimal: min_difference >= -OPTIMALITY_TOLERANCE,
        differences,
        min_difference,
        sup_distance: distance,
        radius,
    }
}
