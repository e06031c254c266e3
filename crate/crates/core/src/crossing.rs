//! Single-pass alternating drawup/drawdown decomposition and the running
//! truncated-variation processes.
//!
//! The path is scanned once. Before the first epoch the running minimum and
//! maximum of the whole prefix are tracked; the first epoch opens at the first
//! index where the drawup `f - min` or the drawdown `max - f` reaches `c`.
//! From then on the scan alternates: an Up epoch tracks its running maximum
//! `M_k(s)` and closes where `M_k(s) - f(s) >= c`, a Down epoch tracks its running
//! minimum and closes where `f(s) - m_{k+1}(s) >= c`.
//!
//! A Down epoch is handled as an Up epoch of the reflected values `-f`; this
//! is the same device that lets a path whose first `c`-move is downward be
//! treated as `-f` with upward and downward roles swapped. The truncated
//! variations then read
//!
//! ```text
//! UTV^c(f,[a;s]) = sum over closed Up epochs (M_i - m_i - c)   + open Up leg   M_k(s) - m_k - c
//! DTV^c(f,[a;s]) = sum over closed Down epochs (M_i - m_{i+1} - c) + open Down leg M_k - m_{k+1}(s) - c
//! ```
//!
//! Comparisons are exact (`>= c`, no epsilon); values closer than an ulp to a
//! threshold resolve however float subtraction rounds them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::{CadlagPath, TruncationLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// The first upward `c`-move comes no later than the first downward one
    /// (also used when neither ever happens).
    UpFirst,
    DownFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EpochKind {
    Up,
    Down,
}

impl EpochKind {
    fn sign(self) -> f64 {
        match self {
            EpochKind::Up => 1.0,
            EpochKind::Down => -1.0,
        }
    }

    fn flip(self) -> Self {
        match self {
            EpochKind::Up => EpochKind::Down,
            EpochKind::Down => EpochKind::Up,
        }
    }
}

/// One epoch `[start; end)` of the decomposition, in sample indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Epoch {
    pub kind: EpochKind,
    pub start_index: usize,
    /// Index at which the next epoch opens; `None` if the epoch is still open at `b`.
    pub end_index: Option<usize>,
    /// Running maximum `M_k` (Up) or running minimum `m_{k+1}` (Down) over the epoch.
    pub extremum: f64,
    /// Extremum of the preceding stretch: `m_k` for an Up epoch, `M_k` for a Down epoch.
    pub base: f64,
}

impl Epoch {
    /// Truncated increment contributed by the epoch so far.
    pub fn increment(&self, c: f64) -> f64 {
        self.kind.sign() * (self.extremum - self.base) - c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingDecomposition {
    pub branch: Branch,
    pub epochs: Vec<Epoch>,
    /// Minimum and maximum of `f` before the first epoch opens (the whole path if none does).
    pub pre_min: f64,
    pub pre_max: f64,
    pub c: f64,
}

impl CrossingDecomposition {
    /// Number of completed epochs `K`.
    pub fn completed(&self) -> usize {
        self.epochs.iter().filter(|e| e.end_index.is_some()).count()
    }

    pub fn first_epoch_index(&self) -> Option<usize> {
        self.epochs.first().map(|e| e.start_index)
    }
}

/// Running `UTV^c`, `DTV^c`, `TV^c` on `[a; t_i]` for every sample index `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationProfile {
    pub utv: Vec<f64>,
    pub dtv: Vec<f64>,
    pub tv: Vec<f64>,
}

impl VariationProfile {
    pub fn final_values(&self) -> Variations {
        let last = self.tv.len() - 1;
        Variations {
            utv: self.utv[last],
            dtv: self.dtv[last],
            tv: self.tv[last],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Variations {
    pub utv: f64,
    pub dtv: f64,
    pub tv: f64,
}

/// An open leg, stored in its own orientation: `peak` is the running maximum of
/// `sign * f` since the leg opened and `base` is `sign` times the extremum it
/// started from.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Leg {
    pub kind: EpochKind,
    pub start: usize,
    pub base: f64,
    pub peak: f64,
}

impl Leg {
    pub fn open(kind: EpochKind, start: usize, base: f64, value: f64) -> Self {
        let s = kind.sign();
        Self {
            kind,
            start,
            base: s * base,
            peak: s * value,
        }
    }

    /// Feeds `f(t_i)`. Returns the reversed leg when the retreat from the peak
    /// reaches `c`; the running extremum is updated before the threshold test.
    pub fn step(&mut self, index: usize, value: f64, c: f64) -> Option<Leg> {
        let y = self.kind.sign() * value;
        if y > self.peak {
            self.peak = y;
        }
        if self.peak - y >= c {
            Some(Leg {
                kind: self.kind.flip(),
                start: index,
                base: -self.peak,
                peak: -y,
            })
        } else {
            None
        }
    }

    pub fn increment(&self, c: f64) -> f64 {
        self.peak - self.base - c
    }

    /// Running extremum in the original orientation.
    pub fn extremum(&self) -> f64 {
        self.kind.sign() * self.peak
    }

    pub fn base_value(&self) -> f64 {
        self.kind.sign() * self.base
    }

    fn to_epoch(self, end_index: Option<usize>) -> Epoch {
        Epoch {
            kind: self.kind,
            start_index: self.start,
            end_index,
            extremum: self.extremum(),
            base: self.base_value(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Event {
    Pre,
    Opened,
    Continued,
    Reversed,
}

/// O(1)-state streaming engine.
#[derive(Debug, Clone)]
pub(crate) struct Engine {
    c: f64,
    index: usize,
    pub pre_min: f64,
    pub pre_max: f64,
    pub leg: Option<Leg>,
    /// Completed `(up, down)` mass.
    closed: [f64; 2],
    /// Leg closed by the most recent `Reversed` event.
    pub last_closed: Option<Leg>,
}

impl Engine {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            index: 0,
            pre_min: f64::INFINITY,
            pre_max: f64::NEG_INFINITY,
            leg: None,
            closed: [0.0, 0.0],
            last_closed: None,
        }
    }

    pub fn push(&mut self, value: f64) -> Event {
        let i = self.index;
        self.index += 1;
        let c = self.c;
        match self.leg.as_mut() {
            None => {
                let lo = self.pre_min.min(value);
                let hi = self.pre_max.max(value);
                // on a tie the upward move wins
                let kind = if value - lo >= c {
                    EpochKind::Up
                } else if hi - value >= c {
                    EpochKind::Down
                } else {
                    self.pre_min = lo;
                    self.pre_max = hi;
                    return Event::Pre;
                };
                let base = match kind {
                    EpochKind::Up => self.pre_min,
                    EpochKind::Down => self.pre_max,
                };
                self.leg = Some(Leg::open(kind, i, base, value));
                Event::Opened
            }
            Some(leg) => match leg.step(i, value, c) {
                None => Event::Continued,
                Some(next) => {
                    let done = *leg;
                    self.closed[slot(done.kind)] += done.increment(c);
                    self.last_closed = Some(done);
                    *leg = next;
                    Event::Reversed
                }
            },
        }
    }

    pub fn variations(&self) -> Variations {
        let mut mass = self.closed;
        if let Some(leg) = &self.leg {
            mass[slot(leg.kind)] += leg.increment(self.c);
        }
        Variations {
            utv: mass[0],
            dtv: mass[1],
            tv: mass[0] + mass[1],
        }
    }
}

fn slot(kind: EpochKind) -> usize {
    match kind {
        EpochKind::Up => 0,
        EpochKind::Down => 1,
    }
}

pub fn decompose(path: &CadlagPath, c: TruncationLevel) -> CrossingDecomposition {
    let mut engine = Engine::new(c.get());
    let mut epochs = Vec::new();
    for (i, &v) in path.values().iter().enumerate() {
        if engine.push(v) == Event::Reversed {
            let done = engine.last_closed.expect("reversal records the closed leg");
            epochs.push(done.to_epoch(Some(i)));
        }
    }
    if let Some(leg) = engine.leg {
        epochs.push(leg.to_epoch(None));
    }
    let branch = match epochs.first() {
        Some(e) if e.kind == EpochKind::Down => Branch::DownFirst,
        _ => Branch::UpFirst,
    };
    CrossingDecomposition {
        branch,
        epochs,
        pre_min: engine.pre_min,
        pre_max: engine.pre_max,
        c: c.get(),
    }
}

pub fn variation_profile(path: &CadlagPath, c: TruncationLevel) -> VariationProfile {
    let n = path.len();
    let mut out = VariationProfile {
        utv: Vec::with_capacity(n),
        dtv: Vec::with_capacity(n),
        tv: Vec::with_capacity(n),
    };
    let mut engine = Engine::new(c.get());
    for &v in path.values() {
        engine.push(v);
        let var = engine.variations();
        out.utv.push(var.utv);
        out.dtv.push(var.dtv);
        out.tv.push(var.tv);
    }
    out
}

/// Final `(UTV^c, DTV^c, TV^c)` over a value sequence, without building a profile.
pub fn final_variations<I>(values: I, c: TruncationLevel) -> Variations
where
    I: IntoIterator<Item = f64>,
{
    let mut engine = Engine::new(c.get());
    for v in values {
        engine.push(v);
    }
    engine.variations()
}

pub fn truncated_variation(path: &CadlagPath, c: TruncationLevel) -> f64 {
    final_variations(path.values().iter().copied(), c).tv
}

pub fn upward_tv(path: &CadlagPath, c: TruncationLevel) -> f64 {
    final_variations(path.values().iter().copied(), c).utv
}

pub fn downward_tv(path: &CadlagPath, c: TruncationLevel) -> f64 {
    final_variations(path.values().iter().copied(), c).dtv
}

/// `TV^c(f, [a; b])` evaluated independently at each level of an increasing grid.
pub fn tv_profile_in_c(path: &CadlagPath, c_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if c_grid.is_empty() {
        return Err(Error::InvalidArgument("c grid is empty".into()));
    }
    if c_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "c grid must be strictly increasing".into(),
        ));
    }
    c_grid
        .iter()
        .map(|&c| Ok((c, truncated_variation(path, TruncationLevel::new(c)?))))
        .collect()
}

/// Inclusive `start:stop:count` grid.
pub fn linear_grid(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidArgument("bad grid specification".into()));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| if i == count - 1 { stop } else { start + step * i as f64 })
        .collect())
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
    fn up_first_single_open_epoch() {
        let d = decompose(&p(&[0.0, 1.0, 0.2, 1.2]), c(1.0));
        assert_eq!(d.branch, Branch::UpFirst);
        assert_eq!(d.epochs.len(), 1);
        let e = d.epochs[0];
        assert_eq!(e.kind, EpochKind::Up);
        assert_eq!(e.start_index, 1);
        assert_eq!(e.end_index, None);
        assert_eq!(e.extremum, 1.2);
        assert_eq!(e.base, 0.0);
        assert_eq!(d.completed(), 0);
    }

    #[test]
    fn constant_path_has_no_epochs() {
        for level in [1e-9, 0.5, 10.0] {
            let d = decompose(&p(&[2.0, 2.0, 2.0, 2.0]), c(level));
            assert!(d.epochs.is_empty());
            assert_eq!(d.branch, Branch::UpFirst);
        }
    }

    #[test]
    fn down_first_then_up() {
        let d = decompose(&p(&[0.0, -1.0, 0.5]), c(1.0));
        assert_eq!(d.branch, Branch::DownFirst);
        assert_eq!(d.epochs.len(), 2);
        assert_eq!(d.epochs[0].kind, EpochKind::Down);
        assert_eq!(d.epochs[0].start_index, 1);
        assert_eq!(d.epochs[0].end_index, Some(2));
        assert_eq!(d.epochs[0].base, 0.0);
        assert_eq!(d.epochs[0].extremum, -1.0);
        assert_eq!(d.epochs[1].kind, EpochKind::Up);
        assert_eq!(d.epochs[1].start_index, 2);
        assert_eq!(d.epochs[1].base, -1.0);
        assert_eq!(d.completed(), 1);
        let v = variation_profile(&p(&[0.0, -1.0, 0.5]), c(1.0)).final_values();
        assert_eq!((v.utv, v.dtv), (0.5, 0.0));
    }

    #[test]
    fn profile_examples() {
        let v = variation_profile(&p(&[0.0, 1.0, 0.2, 1.2]), c(0.5)).final_values();
        assert!((v.utv - 1.0).abs() < 1e-12);
        assert!((v.dtv - 0.3).abs() < 1e-12);
        assert!((v.tv - 1.3).abs() < 1e-12);

        let prof = variation_profile(&p(&[0.0, 0.4, 1.0]), c(0.3));
        assert!((prof.utv[2] - 0.7).abs() < 1e-12);
        assert_eq!(prof.dtv[2], 0.0);
        assert!((prof.tv[1] - 0.1).abs() < 1e-12);

        let f = p(&[0.0, 1.0, 0.2, 1.2]);
        let v = variation_profile(&f, c(1.2)).final_values();
        assert_eq!((v.utv, v.dtv, v.tv), (0.0, 0.0, 0.0));
    }

    #[test]
    fn completed_epoch_gaps_exceed_c() {
        let f = p(&[0.0, 2.0, 0.5, 3.0, 1.0, 1.5, -0.5, 0.7]);
        let d = decompose(&f, c(1.0));
        for e in d.epochs.iter().filter(|e| e.end_index.is_some()) {
            assert!(e.increment(1.0) >= 0.0, "{e:?}");
            assert!((e.extremum - e.base).abs() >= 1.0);
        }
        for w in d.epochs.windows(2) {
            assert_ne!(w[0].kind, w[1].kind);
            assert_eq!(w[0].end_index, Some(w[1].start_index));
            assert_eq!(w[0].extremum, w[1].base);
        }
    }

    #[test]
    fn accessors_and_small_c_limit() {
        let f = p(&[0.0, 1.0, 0.2, 1.2]);
        assert!((truncated_variation(&f, c(0.5)) - 1.3).abs() < 1e-12);
        assert!((upward_tv(&f, c(0.5)) - 1.0).abs() < 1e-12);
        assert!((downward_tv(&f, c(0.5)) - 0.3).abs() < 1e-12);
        assert!((truncated_variation(&f, c(1e-12)) - 2.8).abs() < 1e-9);
    }

    #[test]
    fn tv_in_c_grid() {
        let f = p(&[0.0, 1.0, 0.2, 1.2]);
        let prof = tv_profile_in_c(&f, &[0.5, 1.0]).unwrap();
        assert!((prof[0].1 - 1.3).abs() < 1e-12);
        assert!((prof[1].1 - 0.2).abs() < 1e-12);
        let flat = tv_profile_in_c(&p(&[1.0, 1.0]), &[0.1, 0.2, 0.3]).unwrap();
        assert!(flat.iter().all(|&(_, tv)| tv == 0.0));
        assert!(tv_profile_in_c(&f, &[]).is_err());
        assert!(tv_profile_in_c(&f, &[0.5, 0.5]).is_err());
        assert!(tv_profile_in_c(&f, &[-0.5, 0.5]).is_err());
    }

    #[test]
    fn grid_syntax() {
        assert_eq!(linear_grid(0.5, 1.0, 2).unwrap(), vec![0.5, 1.0]);
        assert_eq!(linear_grid(1.0, 2.0, 3).unwrap(), vec![1.0, 1.5, 2.0]);
        assert!(linear_grid(1.0, 2.0, 0).is_err());
    }
}
