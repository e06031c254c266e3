//! Closed forms for Brownian motion with drift `mu`, killed at an independent
//! exponential time `S` with rate `nu`, and the fixed-time series for
//! `E[UTV^c(W,T) DTV^c(W,T)]`.
//!
//! With `r = sqrt(mu^2 + 2 nu)` and `x = c r`:
//!
//! ```text
//! theta_mu = r coth(x) - mu        V = r / sinh(x)
//! ```

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mc::{self, McConfig, Quantity};
use crate::numeric::{adaptive_simpson, NeumaierSum};

/// Above this argument `coth(x)` is taken as 1 and `sinh` is never formed.
pub const LARGE_ARGUMENT: f64 = 40.0;

/// Relative distance to the pole of the transform at which evaluation is refused.
pub const POLE_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BmParams {
    pub mu: f64,
    pub nu: f64,
    pub c: f64,
}

impl BmParams {
    pub fn new(mu: f64, nu: f64, c: f64) -> Result<Self> {
        check_mu(mu)?;
        check_positive("nu", nu)?;
        check_positive("c", c)?;
        Ok(Self { mu, nu, c })
    }

    pub fn reflected(self) -> Self {
        Self { mu: -self.mu, ..self }
    }

    fn r(&self) -> f64 {
        (self.mu * self.mu + 2.0 * self.nu).sqrt()
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "mu",
            value: mu,
            constraint: "finite".into(),
        })
    }
}

fn check_positive(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value,
            constraint: "> 0 and finite".into(),
        })
    }
}

/// `theta_mu(nu) = sqrt(mu^2 + 2 nu) coth(c sqrt(mu^2 + 2 nu)) - mu`.
pub fn theta(mu: f64, nu: f64, c: f64) -> Result<f64> {
    Ok(theta_of(&BmParams::new(mu, nu, c)?))
}

fn theta_of(p: &BmParams) -> f64 {
    let r = p.r();
    let x = p.c * r;
    // r - mu without cancellation when mu > 0
    let r_minus_mu = if p.mu > 0.0 { 2.0 * p.nu / (r + p.mu) } else { r - p.mu };
    if x > LARGE_ARGUMENT {
        r_minus_mu
    } else {
        // coth(x) - 1 = 2 / (e^{2x} - 1)
        r * 2.0 / (2.0 * x).exp_m1() + r_minus_mu
    }
}

/// `r coth(x)`, the part of theta shared by both signs of the drift.
fn r_coth(p: &BmParams) -> f64 {
    let r = p.r();
    let x = p.c * r;
    if x > LARGE_ARGUMENT {
        r
    } else {
        r + r * 2.0 / (2.0 * x).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VFactor {
    pub value: f64,
    /// Set when `e^{-x}` leaves the normal range and the value is subnormal or zero.
    pub underflow: bool,
}

/// `V_mu(nu) = sqrt(mu^2 + 2 nu) / sinh(c sqrt(mu^2 + 2 nu))`; even in `mu`.
pub fn v_factor(mu: f64, nu: f64, c: f64) -> Result<f64> {
    Ok(v_factor_checked(mu, nu, c)?.value)
}

pub fn v_factor_checked(mu: f64, nu: f64, c: f64) -> Result<VFactor> {
    Ok(v_of(&BmParams::new(mu, nu, c)?))
}

fn v_of(p: &BmParams) -> VFactor {
    let r = p.r();
    let x = p.c * r;
    let value = if x > LARGE_ARGUMENT {
        let e = (-x).exp();
        2.0 * r * e / (1.0 - e * e)
    } else {
        r / x.sinh()
    };
    VFactor {
        value,
        underflow: value < f64::MIN_POSITIVE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MgfDomain {
    /// `min(theta_mu, theta_{-mu})`.
    pub abscissa: f64,
    /// Smaller root of the common denominator `lambda^2 - 2 lambda r coth(x) + 2 nu`.
    /// The transform has a pole here, strictly below `abscissa`.
    pub pole: f64,
    pub upper_root: f64,
}

/// Both denominators of the transform equal `lambda^2 - 2 lambda r coth(x) + 2 nu`,
/// whose roots are `r coth(x) -/+ sqrt(mu^2 + V^2)`.
pub fn mgf_domain(p: &BmParams) -> MgfDomain {
    let rc = r_coth(p);
    let v = v_of(p).value;
    let disc = p.mu.hypot(v);
    let upper_root = rc + disc;
    MgfDomain {
        abscissa: theta_of(p).min(theta_of(&p.reflected())),
        pole: 2.0 * p.nu / upper_root,
        upper_root,
    }
}

/// `E exp(lambda TV^c(W, S))`.
///
/// Evaluated for `lambda` below the pole of the closed form; inside
/// `POLE_GUARD` of it the result is `SingularDenominator`, above it `Domain`.
pub fn mgf_tv(p: &BmParams, lambda: f64) -> Result<f64> {
    Ok(1.0 + mgf_tv_excess(p, lambda)?)
}

/// `E exp(lambda TV^c(W, S)) - 1`, formed without the leading 1.
pub fn mgf_tv_excess(p: &BmParams, lambda: f64) -> Result<f64> {
    if !lambda.is_finite() {
        return Err(Error::Domain {
            what: "lambda",
            value: lambda,
            constraint: "finite".into(),
        });
    }
    let dom = mgf_domain(p);
    let guard = POLE_GUARD * dom.pole.abs().max(1.0);
    if (lambda - dom.pole).abs() <= guard {
        return Err(Error::SingularDenominator {
            lambda,
            root: dom.pole,
            guard,
        });
    }
    if lambda > dom.pole {
        return Err(Error::Domain {
            what: "lambda",
            value: lambda,
            constraint: format!("< {} (pole of the transform)", dom.pole),
        });
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }

    let (mu, nu, c) = (p.mu, p.nu, p.c);
    let th = theta_of(p);
    let th_neg = theta_of(&p.reflected());
    let v = v_of(p).value;
    let (e_plus, e_minus) = ((mu * c).exp(), (-mu * c).exp());
    let l = lambda;

    let t1 = l * (th_neg + e_minus * v - l) / (l * l + 2.0 * nu + 2.0 * l * mu - 2.0 * l * th_neg)
        * (e_plus - v * th_neg / (2.0 * nu) + e_plus * v * v / (2.0 * nu))
        * v
        / th_neg;
    let t2 = l * (th + e_plus * v - l) / (l * l + 2.0 * nu - 2.0 * l * mu - 2.0 * l * th)
        * (e_minus - v * th / (2.0 * nu) + e_minus * v * v / (2.0 * nu))
        * v
        / th;
    Ok(t1 + t2)
}

/// `E TV^c(W,S) = V cosh(mu c) / nu`.
pub fn mean_tv(p: &BmParams) -> f64 {
    v_of(p).value * (p.mu * p.c).cosh() / p.nu
}

/// `E UTV^c(W,S) = e^{mu c} V / (2 nu)`.
pub fn mean_utv(p: &BmParams) -> f64 {
    (p.mu * p.c).exp() * v_of(p).value / (2.0 * p.nu)
}

/// `E DTV^c(W,S) = e^{-mu c} V / (2 nu)`.
pub fn mean_dtv(p: &BmParams) -> f64 {
    (-p.mu * p.c).exp() * v_of(p).value / (2.0 * p.nu)
}

/// `E TV^c(W,S)^2 = V / nu^2 (V + cosh(mu c) theta_mu + e^{mu c} mu)`.
pub fn second_moment_tv(p: &BmParams) -> f64 {
    let v = v_of(p).value;
    v / (p.nu * p.nu) * (v + (p.mu * p.c).cosh() * theta_of(p) + (p.mu * p.c).exp() * p.mu)
}

/// `E UTV^c(W,S)^2 = e^{mu c} V theta_{-mu} / (2 nu^2)`.
pub fn second_moment_utv(p: &BmParams) -> f64 {
    (p.mu * p.c).exp() * v_of(p).value * theta_of(&p.reflected()) / (2.0 * p.nu * p.nu)
}

/// `E DTV^c(W,S)^2 = e^{-mu c} V theta_mu / (2 nu^2)`.
pub fn second_moment_dtv(p: &BmParams) -> f64 {
    (-p.mu * p.c).exp() * v_of(p).value * theta_of(p) / (2.0 * p.nu * p.nu)
}

/// `E[UTV^c(W,S) DTV^c(W,S)] = V^2 / (2 nu^2)`.
pub fn cross_moment_exp(p: &BmParams) -> f64 {
    let v = v_of(p).value;
    v * v / (2.0 * p.nu * p.nu)
}

/// `Cov(UTV^c(W,S), DTV^c(W,S)) = V^2 / (4 nu^2)`.
pub fn covariance_exp(p: &BmParams) -> f64 {
    let v = v_of(p).value;
    v * v / (4.0 * p.nu * p.nu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesConfig {
    /// Hard ceiling on the number of series terms.
    pub k_max: usize,
    /// Relative tolerance for each integral and for the series tail.
    pub quad_tol: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            k_max: 500,
            quad_tol: 1e-10,
        }
    }
}

impl SeriesConfig {
    fn validate(&self) -> Result<()> {
        if self.k_max < 1 {
            return Err(Error::InvalidArgument("k_max must be at least 1".into()));
        }
        check_positive("quad_tol", self.quad_tol)?;
        if self.quad_tol >= 1.0 {
            return Err(Error::Domain {
                what: "quad_tol",
                value: self.quad_tol,
                constraint: "< 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
    /// Bound on the first omitted term.
    pub tail_bound: f64,
}

/// Minimum number of terms before the tail test may stop the series.
pub fn auto_terms(c: f64, t: f64, quad_tol: f64) -> usize {
    ((t * (1.0 / quad_tol).ln()).sqrt() / (c * 2f64.sqrt())).ceil() as usize + 2
}

/// One series family: the `k`-th integrand is
/// `(T - t)^m * (a_k - b t) * t^{-p} * exp(-mu^2 t / 2 - q_k / t)` with weight `w_k`.
struct Family {
    m: i32,
    p: f64,
    b: f64,
    a: fn(usize, f64) -> f64,
    q: fn(usize, f64) -> f64,
    w: fn(usize) -> f64,
}

const CROSS: Family = Family {
    m: 2,
    p: 3.5,
    b: 3.0,
    a: |k, c| 4.0 * ((k + 1) as f64).powi(2) * c * c,
    q: |k, c| 2.0 * ((k + 1) as f64).powi(2) * c * c,
    w: |k| ((k + 1) as f64).powi(2),
};

const INNER: Family = Family {
    m: 1,
    p: 2.5,
    b: 1.0,
    a: |k, c| ((2 * k + 1) as f64).powi(2) * c * c,
    q: |k, c| ((2 * k + 1) as f64).powi(2) * c * c / 2.0,
    w: |_| 1.0,
};

fn integrand(fam: &Family, k: usize, mu: f64, c: f64, horizon: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let q = (fam.q)(k, c);
    let envelope = (-mu * mu * t / 2.0 - q / t - fam.p * t.ln()).exp();
    (horizon - t).powi(fam.m) * ((fam.a)(k, c) - fam.b * t) * envelope
}

/// `w_k * T * sup_(0,T] |integrand_k|`, ignoring the drift factor.
fn term_bound(fam: &Family, k: usize, c: f64, horizon: f64) -> f64 {
    let q = (fam.q)(k, c);
    let t_star = (q / fam.p).min(horizon);
    let envelope = (-q / t_star - fam.p * t_star.ln()).exp();
    (fam.w)(k) * horizon * horizon.powi(fam.m) * ((fam.a)(k, c) + fam.b * horizon) * envelope
}

fn sum_family(fam: &Family, mu: f64, c: f64, horizon: f64, cfg: &SeriesConfig) -> Result<SeriesValue> {
    let min_terms = auto_terms(c, horizon, cfg.quad_tol).min(cfg.k_max);
    let mut acc = NeumaierSum::new();
    for k in 0..cfg.k_max {
        let peak = ((fam.q)(k, c) / fam.p).min(horizon);
        let integral = adaptive_simpson(
            |t| integrand(fam, k, mu, c, horizon, t),
            0.0,
            horizon,
            cfg.quad_tol,
            0.0,
            32,
            &[peak],
        );
        acc.add((fam.w)(k) * integral);
        let sum = acc.value();
        let bound = term_bound(fam, k + 1, c, horizon);
        if k + 1 >= min_terms && (bound == 0.0 || bound < cfg.quad_tol * sum.abs()) {
            return Ok(SeriesValue {
                value: sum,
                terms: k + 1,
                tail_bound: bound,
            });
        }
    }
    Err(Error::NonConvergence {
        k_max: cfg.k_max,
        last_bound: term_bound(fam, cfg.k_max, c, horizon),
        sum: acc.value(),
    })
}

fn check_fixed_time(mu: f64, c: f64, horizon: f64, cfg: &SeriesConfig) -> Result<()> {
    check_mu(mu)?;
    check_positive("c", c)?;
    check_positive("T", horizon)?;
    cfg.validate()
}

/// `E[UTV^c(W,T) DTV^c(W,T)]` at a deterministic time `T`.
pub fn cross_moment_fixed_time(mu: f64, c: f64, horizon: f64, cfg: &SeriesConfig) -> Result<SeriesValue> {
    check_fixed_time(mu, c, horizon, cfg)?;
    let s = sum_family(&CROSS, mu, c, horizon, cfg)?;
    Ok(SeriesValue {
        value: 2.0 * c / (2.0 * PI).sqrt() * s.value,
        ..s
    })
}

/// `sum_k int_0^T (T - t)((2k+1)^2 c^2 - t) t^{-5/2} e^{-mu^2 t/2 - (2k+1)^2 c^2/(2t)} dt / sqrt(2 pi)`,
/// which is `e^{-mu c} E UTV^c(W,T) = e^{mu c} E DTV^c(W,T)`.
fn inner_series(mu: f64, c: f64, horizon: f64, cfg: &SeriesConfig) -> Result<SeriesValue> {
    check_fixed_time(mu, c, horizon, cfg)?;
    let s = sum_family(&INNER, mu, c, horizon, cfg)?;
    Ok(SeriesValue {
        value: s.value / (2.0 * PI).sqrt(),
        ..s
    })
}

pub fn mean_utv_fixed_time(mu: f64, c: f64, horizon: f64, cfg: &SeriesConfig) -> Result<f64> {
    Ok((mu * c).exp() * inner_series(mu, c, horizon, cfg)?.value)
}

pub fn mean_dtv_fixed_time(mu: f64, c: f64, horizon: f64, cfg: &SeriesConfig) -> Result<f64> {
    Ok((-mu * c).exp() * inner_series(mu, c, horizon, cfg)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedTimeCovariance {
    pub covariance: f64,
    pub cross_moment: f64,
    /// `E UTV^c(W,T) * E DTV^c(W,T)`.
    pub mean_product: f64,
    pub negative: bool,
    pub terms: usize,
}

/// `Cov(UTV^c(W,T), DTV^c(W,T))`. The sign is reported, not assumed.
pub fn covariance_fixed_time(mu: f64, c: f64, horizon: f64, cfg: &SeriesConfig) -> Result<FixedTimeCovariance> {
    let cross = cross_moment_fixed_time(mu, c, horizon, cfg)?;
    let inner = inner_series(mu, c, horizon, cfg)?;
    let mean_product = inner.value * inner.value;
    let covariance = cross.value - mean_product;
    Ok(FixedTimeCovariance {
        covariance,
        cross_moment: cross.value,
        mean_product,
        negative: covariance < 0.0,
        terms: cross.terms.max(inner.terms),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationPoint {
    pub c: f64,
    /// `None` when either variation has zero sample variance.
    pub correlation: Option<f64>,
    pub std_error: Option<f64>,
}

/// Monte Carlo `Cor(UTV^c(W,T), DTV^c(W,T))` along a decreasing grid of levels,
/// all levels evaluated on the same simulated paths.
pub fn correlation_smallc_report(mu: f64, c_grid: &[f64], horizon: f64, cfg: &McConfig) -> Result<Vec<CorrelationPoint>> {
    if c_grid.is_empty() {
        return Err(Error::InvalidArgument("c grid is empty".into()));
    }
    if c_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("c grid must be strictly decreasing".into()));
    }
    let estimates = mc::estimate_levels(Quantity::CorFixed(horizon), mu, c_grid, cfg)?;
    Ok(c_grid
        .iter()
        .zip(estimates)
        .map(|(&c, est)| match est {
            Ok(e) => CorrelationPoint {
                c,
                correlation: Some(e.mean),
                std_error: Some(e.std_error),
            },
            Err(_) => CorrelationPoint {
                c,
                correlation: None,
                std_error: None,
            },
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticsReport {
    pub params: BmParams,
    pub theta_mu: f64,
    pub theta_minus_mu: f64,
    pub v: f64,
    pub v_underflow: bool,
    pub mgf_domain: MgfDomain,
    pub mean_tv: f64,
    pub mean_utv: f64,
    pub mean_dtv: f64,
    pub second_moment_tv: f64,
    pub second_moment_utv: f64,
    pub second_moment_dtv: f64,
    pub cross_moment_exp: f64,
    pub covariance_exp: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mgf: Option<MgfPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_time: Option<FixedTimeReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MgfPoint {
    pub lambda: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedTimeReport {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub cross_moment: f64,
    pub covariance: f64,
    pub covariance_negative: bool,
    pub mean_utv: f64,
    pub mean_dtv: f64,
    pub series_terms: usize,
    pub series: SeriesConfig,
}

pub fn analytics_report(p: &BmParams, lambda: Option<f64>, horizon: Option<f64>, series: &SeriesConfig) -> Result<AnalyticsReport> {
    let v = v_of(p);
    let mgf = lambda
        .map(|l| mgf_tv(p, l).map(|value| MgfPoint { lambda: l, value }))
        .transpose()?;
    let fixed_time = horizon
        .map(|t| -> Result<FixedTimeReport> {
            let cov = covariance_fixed_time(p.mu, p.c, t, series)?;
            Ok(FixedTimeReport {
                horizon: t,
                cross_moment: cov.cross_moment,
                covariance: cov.covariance,
                covariance_negative: cov.negative,
                mean_utv: mean_utv_fixed_time(p.mu, p.c, t, series)?,
                mean_dtv: mean_dtv_fixed_time(p.mu, p.c, t, series)?,
                series_terms: cov.terms,
                series: *series,
            })
        })
        .transpose()?;
    Ok(AnalyticsReport {
        params: *p,
        theta_mu: theta_of(p),
        theta_minus_mu: theta_of(&p.reflected()),
        v: v.value,
        v_underflow: v.underflow,
        mgf_domain: mgf_domain(p),
        mean_tv: mean_tv(p),
        mean_utv: mean_utv(p),
        mean_dtv: mean_dtv(p),
        second_moment_tv: second_moment_tv(p),
        second_moment_utv: second_moment_utv(p),
        second_moment_dtv: second_moment_dtv(p),
        cross_moment_exp: cross_moment_exp(p),
        covariance_exp: covariance_exp(p),
        mgf,
        fixed_time,
    })
}
