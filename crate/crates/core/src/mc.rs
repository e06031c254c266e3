//! Monte Carlo estimation of truncated-variation functionals of Brownian motion
//! with drift, at an exponential killing time or at a fixed horizon.
//!
//! Each work unit (a path, or an antithetic pair) draws from its own ChaCha
//! stream selected by the unit index, so results do not depend on how units are
//! spread over threads. Per-unit outputs are collected in order and reduced
//! sequentially with compensated sums.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{self, BmParams, SeriesConfig};
use crate::approx;
use crate::crossing::{Engine, Variations};
use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;
use crate::path::{CadlagPath, TruncationLevel};

/// Fine grid used for the discretisation-bias estimate: `dt / REFINEMENT`.
pub const REFINEMENT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    /// Path length for the adaptedness test.
    pub horizon: f64,
    pub seed: u64,
    /// Antithetic pairs: normals `Z` and `-Z`, killing times from `U` and `1 - U`.
    /// `n_paths` must be even.
    pub antithetic: bool,
    /// Also simulate at `dt / 4` with common random numbers and report the bias estimate.
    pub richardson: bool,
    /// Turn configuration warnings into errors.
    pub strict: bool,
}

impl McConfig {
    pub fn new(n_paths: usize, dt: f64, seed: u64) -> Self {
        Self {
            n_paths,
            dt,
            horizon: 1.0,
            seed,
            antithetic: false,
            richardson: false,
            strict: false,
        }
    }

    fn validate(&self, levels: &[f64]) -> Result<Vec<String>> {
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive and finite, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive and finite, got {}", self.horizon)));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(Error::Config("antithetic sampling needs an even n_paths".into()));
        }
        let mut warnings = Vec::new();
        if self.n_paths < 100 {
            warnings.push(format!("n_paths = {} is below 100", self.n_paths));
        }
        for &c in levels {
            if self.dt > c * c / 10.0 {
                warnings.push(format!("dt = {} exceeds c^2/10 = {} for c = {}", self.dt, c * c / 10.0, c));
            }
        }
        if self.strict && !warnings.is_empty() {
            return Err(Error::Config(warnings.join("; ")));
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Quantity {
    MeanTV,
    MeanUTV,
    MeanDTV,
    SecondTV,
    SecondUTV,
    SecondDTV,
    CrossExp,
    CovExp,
    MgfTV { lambda: f64 },
    MeanUTVFixedT { t: f64 },
    CrossFixedT { t: f64 },
    CovFixedT { t: f64 },
    CorFixed { t: f64 },
}

#[allow(non_snake_case)]
impl Quantity {
    pub fn MgfTV(lambda: f64) -> Self {
        Quantity::MgfTV { lambda }
    }

    pub fn MeanUTVFixedT(t: f64) -> Self {
        Quantity::MeanUTVFixedT { t }
    }

    pub fn CrossFixedT(t: f64) -> Self {
        Quantity::CrossFixedT { t }
    }

    pub fn CovFixedT(t: f64) -> Self {
        Quantity::CovFixedT { t }
    }

    pub fn CorFixed(t: f64) -> Self {
        Quantity::CorFixed { t }
    }

    /// The deterministic horizon, or `None` for exponential killing.
    pub fn fixed_time(&self) -> Option<f64> {
        match *self {
            Quantity::MeanUTVFixedT { t } | Quantity::CrossFixedT { t } | Quantity::CovFixedT { t } | Quantity::CorFixed { t } => Some(t),
            _ => None,
        }
    }
}

/// The closed form a quantity is checked against, if one exists.
pub fn closed_form(q: &Quantity, p: &BmParams, series: &SeriesConfig) -> Result<Option<f64>> {
    Ok(Some(match *q {
        Quantity::MeanTV => analytics::mean_tv(p),
        Quantity::MeanUTV => analytics::mean_utv(p),
        Quantity::MeanDTV => analytics::mean_dtv(p),
        Quantity::SecondTV => analytics::second_moment_tv(p),
        Quantity::SecondUTV => analytics::second_moment_utv(p),
        Quantity::SecondDTV => analytics::second_moment_dtv(p),
        Quantity::CrossExp => analytics::cross_moment_exp(p),
        Quantity::CovExp => analytics::covariance_exp(p),
        Quantity::MgfTV { lambda } => analytics::mgf_tv(p, lambda)?,
        Quantity::MeanUTVFixedT { t } => analytics::mean_utv_fixed_time(p.mu, p.c, t, series)?,
        Quantity::CrossFixedT { t } => analytics::cross_moment_fixed_time(p.mu, p.c, t, series)?.value,
        Quantity::CovFixedT { t } => analytics::covariance_fixed_time(p.mu, p.c, t, series)?.covariance,
        Quantity::CorFixed { .. } => return Ok(None),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub quantity: Quantity,
    /// Estimate on the `dt` grid.
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    pub dt: f64,
    /// Estimate on the `dt / 4` grid from the same random numbers.
    pub refined_mean: Option<f64>,
    /// `mean - truth` extrapolated from the two grids under a `sqrt(dt)` error
    /// rate: `2 (mean - refined_mean)`.
    pub bias: Option<f64>,
    pub warnings: Vec<String>,
}

impl McEstimate {
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.mean - reference) / self.std_error
    }

    /// `|mean - reference| <= k SE + |bias|`.
    pub fn within(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.std_error + self.bias.unwrap_or(0.0).abs()
    }

    /// z-score after moving the estimate by up to `|bias|` towards the reference.
    pub fn z_score_with_margin(&self, reference: f64) -> f64 {
        let gap = ((self.mean - reference).abs() - self.bias.unwrap_or(0.0).abs()).max(0.0);
        if gap == 0.0 {
            0.0
        } else {
            gap / self.std_error
        }
    }
}

/// `W` on `0, dt, ..., n_steps dt` with `W_0 = 0` and exact Gaussian increments.
pub fn simulate_bm_path<R: Rng + ?Sized>(mu: f64, dt: f64, n_steps: usize, rng: &mut R) -> Result<CadlagPath> {
    if !(dt > 0.0 && dt.is_finite()) || !mu.is_finite() {
        return Err(Error::InvalidArgument("dt must be positive and mu finite".into()));
    }
    let sd = dt.sqrt();
    let mut x = 0.0;
    let mut values = Vec::with_capacity(n_steps + 1);
    values.push(0.0);
    for _ in 0..n_steps {
        let z: f64 = rng.sample(StandardNormal);
        x += mu * dt + sd * z;
        values.push(x);
    }
    Ok(CadlagPath::from_uniform_unchecked(dt, values))
}

#[derive(Debug, Clone, Copy)]
enum Span {
    Exponential(f64),
    Fixed(f64),
}

/// Full steps of length `h` in `[0, span]` and the leftover length.
fn split_span(span: f64, h: f64, snap: bool) -> (usize, f64) {
    let ratio = span / h;
    let nearest = ratio.round();
    let m = if snap && (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest
    } else {
        ratio.floor()
    };
    let rem = span - m * h;
    let rem = if rem <= 1e-12 * span { 0.0 } else { rem };
    (m as usize, rem)
}

/// `(utv, dtv)` for every (copy, grid, level) of one unit, in that nesting order.
struct UnitOut {
    values: Vec<(f64, f64)>,
}

struct Layout {
    copies: usize,
    grids: usize,
    levels: usize,
}

impl Layout {
    fn at(&self, copy: usize, grid: usize, level: usize) -> usize {
        (copy * self.grids + grid) * self.levels + level
    }
}

fn simulate_unit(index: usize, mu: f64, span: Span, levels: &[f64], cfg: &McConfig, layout: &Layout) -> UnitOut {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let u: f64 = match span {
        Span::Exponential(_) => rng.sample(Open01),
        Span::Fixed(_) => 0.0,
    };
    let mut values = Vec::with_capacity(layout.copies * layout.grids * layout.levels);
    for copy in 0..layout.copies {
        // both copies replay the same normals; the second negates them and
        // takes the antithetic uniform for the killing time
        let (sign, uniform) = if copy == 0 { (1.0, u) } else { (-1.0, 1.0 - u) };
        let (length, snap) = match span {
            Span::Exponential(nu) => (-uniform.ln() / nu, false),
            Span::Fixed(t) => (t, true),
        };
        let mut stream = rng.clone();
        run_copy(&mut stream, mu, sign, length, snap, levels, cfg, layout, &mut values);
    }
    UnitOut { values }
}

#[allow(clippy::too_many_arguments)]
fn run_copy(rng: &mut ChaCha8Rng, mu: f64, sign: f64, length: f64, snap: bool, levels: &[f64], cfg: &McConfig, layout: &Layout, out: &mut Vec<(f64, f64)>) {
    let refine = if cfg.richardson { REFINEMENT } else { 1 };
    let h = cfg.dt / refine as f64;
    let (m, rem) = split_span(length, h, snap);
    let sd = h.sqrt();
    let n_levels = layout.levels;
    // grid 0 is the dt grid, grid 1 (if any) the refined one
    let mut engines: Vec<Engine> = (0..layout.grids * n_levels).map(|i| Engine::new(levels[i % n_levels])).collect();
    for e in engines.iter_mut() {
        e.push(0.0);
    }
    let mut x = 0.0;
    for j in 1..=m {
        let z: f64 = rng.sample(StandardNormal);
        x += mu * h + sign * sd * z;
        let active = if j % refine == 0 { &mut engines[..] } else { &mut engines[n_levels..] };
        for e in active.iter_mut() {
            e.push(x);
        }
    }
    if rem > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        x += mu * rem + sign * rem.sqrt() * z;
        for e in engines.iter_mut() {
            e.push(x);
        }
    } else if m % refine != 0 {
        // the dt grid must still end at the endpoint
        for e in engines[..n_levels].iter_mut() {
            e.push(x);
        }
    }
    out.extend(engines.iter().map(|e| {
        let Variations { utv, dtv, .. } = e.variations();
        (utv, dtv)
    }));
}

struct Simulation {
    units: Vec<UnitOut>,
    layout: Layout,
}

fn simulate(mu: f64, span: Span, levels: &[f64], cfg: &McConfig) -> Simulation {
    let copies = if cfg.antithetic { 2 } else { 1 };
    let layout = Layout {
        copies,
        grids: if cfg.richardson { 2 } else { 1 },
        levels: levels.len(),
    };
    let n_units = cfg.n_paths / copies;
    let units = (0..n_units)
        .into_par_iter()
        .map(|i| simulate_unit(i, mu, span, levels, cfg, &layout))
        .collect();
    Simulation { units, layout }
}

fn mean_of<I: IntoIterator<Item = f64>>(xs: I, n: usize) -> f64 {
    xs.into_iter().collect::<NeumaierSum>().value() / n as f64
}

/// Mean and standard error of i.i.d. unit values.
fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mean = mean_of(xs.iter().copied(), n);
    if n < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).collect::<NeumaierSum>().value();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

/// Point estimate and delta-method standard error from per-unit `(utv, dtv)`
/// samples (one per antithetic copy).
fn point_estimate(q: Quantity, units: &[Vec<(f64, f64)>]) -> Result<(f64, f64)> {
    let n = units.len();
    let avg = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        units
            .iter()
            .map(|copies| copies.iter().map(|&(u, d)| f(u, d)).sum::<f64>() / copies.len() as f64)
            .collect()
    };
    let linear = |f: &dyn Fn(f64, f64) -> f64| Ok(mean_and_se(&avg(f)));
    match q {
        Quantity::MeanTV => linear(&|u, d| u + d),
        Quantity::MeanUTV | Quantity::MeanUTVFixedT { .. } => linear(&|u, _| u),
        Quantity::MeanDTV => linear(&|_, d| d),
        Quantity::SecondTV => linear(&|u, d| (u + d) * (u + d)),
        Quantity::SecondUTV => linear(&|u, _| u * u),
        Quantity::SecondDTV => linear(&|_, d| d * d),
        Quantity::CrossExp | Quantity::CrossFixedT { .. } => linear(&|u, d| u * d),
        Quantity::MgfTV { lambda } => linear(&|u, d| (lambda * (u + d)).exp()),
        Quantity::CovExp | Quantity::CovFixedT { .. } => {
            let (hu, hd, hud) = (avg(&|u, _| u), avg(&|_, d| d), avg(&|u, d| u * d));
            let (mu_, md, mud) = (mean_of(hu.iter().copied(), n), mean_of(hd.iter().copied(), n), mean_of(hud.iter().copied(), n));
            let influence: Vec<f64> = (0..n).map(|i| hud[i] - md * hu[i] - mu_ * hd[i]).collect();
            let (_, se) = mean_and_se(&influence);
            Ok((mud - mu_ * md, se))
        }
        Quantity::CorFixed { .. } => {
            let h: [Vec<f64>; 5] = [avg(&|u, _| u), avg(&|_, d| d), avg(&|u, _| u * u), avg(&|_, d| d * d), avg(&|u, d| u * d)];
            let m: Vec<f64> = h.iter().map(|v| mean_of(v.iter().copied(), n)).collect();
            let a = m[4] - m[0] * m[1];
            let b = m[2] - m[0] * m[0];
            let c = m[3] - m[1] * m[1];
            if !(b > 0.0 && c > 0.0) {
                return Err(Error::Degenerate("a variation has zero sample variance".into()));
            }
            let s = (b * c).sqrt();
            let rho = a / s;
            let grad = [-m[1] / s + rho * m[0] / b, -m[0] / s + rho * m[1] / c, -rho / (2.0 * b), -rho / (2.0 * c), 1.0 / s];
            let influence: Vec<f64> = (0..n).map(|i| (0..5).map(|k| grad[k] * h[k][i]).sum()).collect();
            let (_, se) = mean_and_se(&influence);
            Ok((rho, se))
        }
    }
}

fn grid_samples(sim: &Simulation, grid: usize, level: usize) -> Vec<Vec<(f64, f64)>> {
    sim.units
        .iter()
        .map(|u| (0..sim.layout.copies).map(|copy| u.values[sim.layout.at(copy, grid, level)]).collect())
        .collect()
}

fn build_estimate(q: Quantity, sim: &Simulation, level: usize, cfg: &McConfig, warnings: &[String]) -> Result<McEstimate> {
    let (mean, std_error) = point_estimate(q, &grid_samples(sim, 0, level))?;
    let refined = if cfg.richardson {
        Some(point_estimate(q, &grid_samples(sim, 1, level))?.0)
    } else {
        None
    };
    Ok(McEstimate {
        quantity: q,
        mean,
        std_error,
        n: cfg.n_paths,
        dt: cfg.dt,
        refined_mean: refined,
        bias: refined.map(|r| 2.0 * (mean - r)),
        warnings: warnings.to_vec(),
    })
}

fn span_of(q: &Quantity, nu: f64) -> Result<Span> {
    match q.fixed_time() {
        Some(t) if t > 0.0 && t.is_finite() => Ok(Span::Fixed(t)),
        Some(t) => Err(Error::Domain {
            what: "T",
            value: t,
            constraint: "> 0 and finite".into(),
        }),
        None => Ok(Span::Exponential(nu)),
    }
}

fn same_span(a: Span, b: Span) -> bool {
    match (a, b) {
        (Span::Exponential(x), Span::Exponential(y)) | (Span::Fixed(x), Span::Fixed(y)) => x.to_bits() == y.to_bits(),
        _ => false,
    }
}

pub fn estimate(quantity: Quantity, params: &BmParams, cfg: &McConfig) -> Result<McEstimate> {
    Ok(estimate_many(&[quantity], params, cfg)?.remove(0))
}

/// Estimates several quantities; quantities sharing a time span reuse one set of paths.
pub fn estimate_many(quantities: &[Quantity], params: &BmParams, cfg: &McConfig) -> Result<Vec<McEstimate>> {
    let warnings = cfg.validate(&[params.c])?;
    let spans = quantities.iter().map(|q| span_of(q, params.nu)).collect::<Result<Vec<_>>>()?;
    let mut out: Vec<Option<McEstimate>> = vec![None; quantities.len()];
    for i in 0..quantities.len() {
        if out[i].is_some() {
            continue;
        }
        let sim = simulate(params.mu, spans[i], &[params.c], cfg);
        for j in i..quantities.len() {
            if out[j].is_none() && same_span(spans[i], spans[j]) {
                out[j] = Some(build_estimate(quantities[j], &sim, 0, cfg, &warnings)?);
            }
        }
    }
    Ok(out.into_iter().map(|e| e.expect("every quantity estimated")).collect())
}

/// One fixed-time quantity at several truncation levels on the same paths. A
/// level whose estimate is undefined yields an inner error.
pub fn estimate_levels(quantity: Quantity, mu: f64, levels: &[f64], cfg: &McConfig) -> Result<Vec<Result<McEstimate>>> {
    if quantity.fixed_time().is_none() {
        return Err(Error::InvalidArgument("multi-level estimation needs a fixed-time quantity".into()));
    }
    if !mu.is_finite() {
        return Err(Error::Domain {
            what: "mu",
            value: mu,
            constraint: "finite".into(),
        });
    }
    for &c in levels {
        TruncationLevel::new(c)?;
    }
    let warnings = cfg.validate(levels)?;
    let span = span_of(&quantity, 1.0)?;
    let sim = simulate(mu, span, levels, cfg);
    Ok((0..levels.len()).map(|l| build_estimate(quantity, &sim, l, cfg, &warnings)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptednessReport {
    pub paths: usize,
    pub steps: usize,
    /// Largest `|X^{i,c}_t(full path) - X^{i,c}_t(path up to t)|`.
    pub max_discrepancy_increment: f64,
    /// The same for the adapted approximant.
    pub max_discrepancy_adapted: f64,
    pub passed: bool,
}

pub const ADAPTEDNESS_TOLERANCE: f64 = 1e-12;

/// Recomputes `X^{i,c}` and `X~^c` on every prefix of simulated paths on
/// `[0, horizon]` and compares the last value with the full-path computation.
pub fn adaptedness_test(params: &BmParams, cfg: &McConfig) -> Result<AdaptednessReport> {
    cfg.validate(&[params.c])?;
    let c = TruncationLevel::new(params.c)?;
    let (steps, _) = split_span(cfg.horizon, cfg.dt, true);
    let per_path: Vec<(f64, f64)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let path = simulate_bm_path(params.mu, cfg.dt, steps, &mut rng)?;
            Ok(prefix_discrepancy(&path, c))
        })
        .collect::<Result<_>>()?;
    let max_inc = per_path.iter().map(|p| p.0).fold(0.0, f64::max);
    let max_adapted = per_path.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(AdaptednessReport {
        paths: cfg.n_paths,
        steps,
        max_discrepancy_increment: max_inc,
        max_discrepancy_adapted: max_adapted,
        passed: max_inc <= ADAPTEDNESS_TOLERANCE && max_adapted <= ADAPTEDNESS_TOLERANCE,
    })
}

/// Max prefix discrepancies of `X^{i,c}` and `X~^c` along one path.
pub fn prefix_discrepancy(path: &CadlagPath, c: TruncationLevel) -> (f64, f64) {
    let full_inc = approx::increment_process(path, c);
    let full_adapted = approx::build_adapted(path, c).x_tilde_c;
    let (mut d_inc, mut d_adapted) = (0.0f64, 0.0f64);
    for k in 1..=path.len() {
        let prefix = path.prefix(k);
        let inc = approx::increment_process(&prefix, c);
        let adapted = approx::build_adapted(&prefix, c).x_tilde_c;
        d_inc = d_inc.max((inc[k - 1] - full_inc[k - 1]).abs());
        d_adapted = d_adapted.max((adapted.values()[k - 1] - full_adapted.values()[k - 1]).abs());
    }
    (d_inc, d_adapted)
}
