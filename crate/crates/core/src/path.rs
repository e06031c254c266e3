//! Sampled càdlàg paths.
//!
//! A finite sample `(t_i, f(t_i))` is read as the right-continuous step function
//! `f(s) = f(t_i)` for `t_i <= s < t_{i+1}`. Every supremum over partitions of
//! `[a; b]` is then attained on sample points, so the functionals below are exact.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CadlagPath {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl CadlagPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                times: times.len(),
                values: values.len(),
            });
        }
        if times.is_empty() {
            return Err(Error::EmptyPath);
        }
        for (index, t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::NonFinite { what: "time", index });
            }
        }
        for (index, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { what: "value", index });
            }
        }
        // duplicates are rejected too: the order of two jumps at one instant is ambiguous
        for (index, w) in times.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::NotIncreasing {
                    index: index + 1,
                    prev: w[0],
                    next: w[1],
                });
            }
        }
        Ok(Self { times, values })
    }

    /// Path sampled at `0, 1, 2, ...`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let times = (0..values.len()).map(|i| i as f64).collect();
        Self::new(times, values)
    }

    /// Builds a path on a uniform grid `t_i = i * dt` without re-validating the
    /// grid. Values must be finite.
    pub(crate) fn from_uniform_unchecked(dt: f64, values: Vec<f64>) -> Self {
        let times = (0..values.len()).map(|i| i as f64 * dt).collect();
        Self { times, values }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Left endpoint `a`.
    pub fn start(&self) -> f64 {
        self.times[0]
    }

    /// Right endpoint `b`.
    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `f(s)` for `s` in `[a; b]`: the value at the greatest sample time `<= s`.
    /// Returns `None` outside the domain.
    pub fn value_at(&self, s: f64) -> Option<f64> {
        if s < self.start() || s > self.end() || s.is_nan() {
            return None;
        }
        let idx = self.times.partition_point(|&t| t <= s);
        Some(self.values[idx - 1])
    }

    pub fn negated(&self) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(|v| v + offset).collect(),
        }
    }

    /// The path restricted to its first `len` samples.
    pub fn prefix(&self, len: usize) -> Self {
        assert!(len >= 1 && len <= self.len(), "prefix length out of range");
        Self {
            times: self.times[..len].to_vec(),
            values: self.values[..len].to_vec(),
        }
    }

    /// Same time grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.times.clone(), values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct TruncationLevel(f64);

impl TruncationLevel {
    pub fn new(c: f64) -> Result<Self> {
        if c > 0.0 && c.is_finite() {
            Ok(Self(c))
        } else {
            Err(Error::InvalidTruncation(c))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn half(self) -> f64 {
        0.5 * self.0
    }
}

impl TryFrom<f64> for TruncationLevel {
    type Error = Error;

    fn try_from(c: f64) -> Result<Self> {
        Self::new(c)
    }
}

/// `TV(f, [a; b])`, the sum of absolute increments.
pub fn total_variation(path: &CadlagPath) -> f64 {
    total_variation_of(path.values())
}

pub(crate) fn total_variation_of(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Running `TV(f, [a; t_i])` at every sample.
pub fn total_variation_profile(path: &CadlagPath) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(path.len());
    out.push(0.0);
    for w in path.values().windows(2) {
        acc += (w[1] - w[0]).abs();
        out.push(acc);
    }
    out
}

/// `||f||_osc = max f - min f`.
pub fn oscillation(path: &CadlagPath) -> f64 {
    path.max_value() - path.min_value()
}

/// `sup_s |p(s) - q(s)|`, evaluated on the union of both sample grids.
pub fn sup_distance(p: &CadlagPath, q: &CadlagPath) -> Result<f64> {
    Ok(union_differences(p, q)?.into_iter().fold(0.0, |m, d| m.max(d.abs())))
}

/// `p(s) - q(s)` at every point of the union of both sample grids, in time order.
pub fn union_differences(p: &CadlagPath, q: &CadlagPath) -> Result<Vec<f64>> {
    if p.start() != q.start() || p.end() != q.end() {
        return Err(Error::DomainMismatch {
            a0: p.start(),
            b0: p.end(),
            a1: q.start(),
            b1: q.end(),
        });
    }
    let (pt, pv, qt, qv) = (p.times(), p.values(), q.times(), q.values());
    let (mut i, mut j) = (0usize, 0usize);
    let mut out = Vec::with_capacity(pt.len().max(qt.len()));
    loop {
        out.push(pv[i] - qv[j]);
        let next_p = pt.get(i + 1).copied();
        let next_q = qt.get(j + 1).copied();
        match (next_p, next_q) {
            (None, None) => break,
            (Some(_), None) => i += 1,
            (None, Some(_)) => j += 1,
            (Some(a), Some(b)) => {
                if a <= b {
                    i += 1;
                }
                if b <= a {
                    j += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Minimal (Hahn–Jordan) decomposition `f = f(a) + up - down` with `up`, `down`
/// nondecreasing, starting at 0, and `up + down = TV(f, [a; .])`.
pub fn jordan_decomposition(path: &CadlagPath) -> (Vec<f64>, Vec<f64>) {
    let n = path.len();
    let mut up = Vec::with_capacity(n);
    let mut down = Vec::with_capacity(n);
    let (mut u, mut d) = (0.0, 0.0);
    up.push(0.0);
    down.push(0.0);
    for w in path.values().windows(2) {
        let delta = w[1] - w[0];
        if delta > 0.0 {
            u += delta;
        } else {
            d -= delta;
        }
        up.push(u);
        down.push(d);
    }
    (up, down)
}
