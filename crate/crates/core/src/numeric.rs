//! Compensated summation and adaptive Simpson quadrature.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<NeumaierSum>().value()
}

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` over `[a; b]`.
///
/// The interval is first cut at `breakpoints` (sorted, inside `(a, b)`) and into
/// `panels` equal pieces; each piece is refined until the Richardson error
/// estimate is below `max(abs_tol, rel_tol * |I|)`, where `I` is the coarse
/// estimate of the whole integral.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64, panels: usize, breakpoints: &[f64]) -> f64
where
    F: Fn(f64) -> f64,
{
    let mut cuts = vec![a];
    let panels = panels.max(1);
    for i in 1..panels {
        cuts.push(a + (b - a) * i as f64 / panels as f64);
    }
    cuts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    cuts.push(b);
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();

    struct Piece {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
    }
    let pieces: Vec<Piece> = cuts
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let m = 0.5 * (a + b);
            let (fa, fm, fb) = (f(a), f(m), f(b));
            Piece {
                a,
                b,
                fa,
                fm,
                fb,
                whole: (b - a) / 6.0 * (fa + 4.0 * fm + fb),
            }
        })
        .collect();
    let coarse: f64 = compensated_sum(pieces.iter().map(|p| p.whole));
    let scale = coarse.abs().max(compensated_sum(pieces.iter().map(|p| p.whole.abs())) * 1e-3);
    let eps = abs_tol.max(rel_tol * scale);

    #[allow(clippy::too_many_arguments)]
    fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32, acc: &mut NeumaierSum) {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth >= MAX_DEPTH || delta.abs() <= 15.0 * eps {
            acc.add(left + right + delta / 15.0);
        } else {
            refine(f, a, m, fa, flm, fm, left, 0.5 * eps, depth + 1, acc);
            refine(f, m, b, fm, frm, fb, right, 0.5 * eps, depth + 1, acc);
        }
    }

    let mut acc = NeumaierSum::new();
    let per_piece = eps / pieces.len() as f64;
    for p in &pieces {
        refine(&f, p.a, p.b, p.fa, p.fm, p.fb, p.whole, per_piece, 0, &mut acc);
    }
    acc.value()
}
