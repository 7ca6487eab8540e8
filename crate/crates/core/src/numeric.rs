//! Shared numerical utilities: compensated summation, deterministic parallel
//! reduction, Gauss–Legendre quadrature nodes and a few small statistics.

use rayon::prelude::*;
use std::sync::OnceLock;

/// Kahan–Babuska compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Fixed chunk length used by all deterministic parallel reductions.
///
/// Partial sums are produced per chunk and combined in chunk order, so the
/// result is bit-identical for any worker count.
pub const REDUCE_CHUNK: usize = 256;

/// Sum `f(i)` over `0..n` in parallel with a fixed-order chunked reduction.
///
/// Each chunk is accumulated with compensated summation; chunk partials are
/// then folded sequentially in index order. The value is independent of the
/// number of rayon workers.
pub fn par_sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let n_chunks = n.div_ceil(REDUCE_CHUNK);
    let partials: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * REDUCE_CHUNK;
            let hi = (lo + REDUCE_CHUNK).min(n);
            let mut acc = KahanSum::new();
            for i in lo..hi {
                acc.add(f(i));
            }
            acc.value()
        })
        .collect();
    let mut total = KahanSum::new();
    for p in partials {
        total.add(p);
    }
    total.value()
}

/// Fallible variant of [`par_sum_indexed`]: the first error in chunk order
/// wins, so failures are as deterministic as the sums.
pub fn try_par_sum_indexed<F, E>(n: usize, f: F) -> std::result::Result<f64, E>
where
    F: Fn(usize) -> std::result::Result<f64, E> + Sync,
    E: Send,
{
    let n_chunks = n.div_ceil(REDUCE_CHUNK);
    let partials: Vec<std::result::Result<f64, E>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * REDUCE_CHUNK;
            let hi = (lo + REDUCE_CHUNK).min(n);
            let mut acc = KahanSum::new();
            for i in lo..hi {
                acc.add(f(i)?);
            }
            Ok(acc.value())
        })
        .collect();
    let mut total = KahanSum::new();
    for p in partials {
        total.add(p?);
    }
    Ok(total.value())
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Newton iteration on the Legendre recurrence; accurate to ~1e-15.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 2);
    let mut out = Vec::with_capacity(n);
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence: p_k(x), derivative from p_{k-1}.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((-x, w));
    }
    // Mirror to the full rule (roots are symmetric about the origin).
    for i in (0..n - m).rev() {
        let (x, w) = out[i];
        out.push((-x, w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// The 256-node rule used for beta-density quadrature, computed once.
pub fn gauss_legendre_256() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(256))
}

/// Integrate `f` over `[a, b]` with a fixed Gauss–Legendre rule.
pub fn integrate_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, nodes: &[(f64, f64)]) -> f64 {
    if b <= a {
        return 0.0;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = KahanSum::new();
    for &(x, w) in nodes {
        acc.add(w * f(mid + half * x));
    }
    half * acc.value()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n-1 denominator).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    let pos = q.clamp(0.0, 1.0) * (n as f64 - 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

/// Interquartile range of an unsorted sample.
pub fn iqr(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile(&v, 0.75) - quantile(&v, 0.25)
}

/// Two-sided Kolmogorov–Smirnov statistic of a sample against a CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let c = cdf(x);
        d = d.max((c - i as f64 / n).abs()).max(((i + 1) as f64 / n - c).abs());
    }
    d
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.total_cmp(y));
    sb.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        if sa[i] <= sb[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic Kolmogorov critical value `c(alpha)/sqrt(n)`.
///
/// `c(0.01) = 1.628`, `c(0.05) = 1.358`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    let c = if alpha <= 0.01 {
        1.628
    } else if alpha <= 0.05 {
        1.358
    } else {
        1.224
    };
    c / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_adversarial_sum() {
        let mut k = KahanSum::new();
        k.add(1e16);
        for _ in 0..1000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 1000.0);
    }

    #[test]
    fn par_sum_matches_sequential_and_is_thread_invariant() {
        let n = 10_000;
        let f = |i: usize| ((i as f64) * 0.1).sin() / (i as f64 + 1.0);
        let expected = par_sum_indexed(n, f);
        for threads in [1usize, 2, 7] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let got = pool.install(|| par_sum_indexed(n, f));
            assert_eq!(got.to_bits(), expected.to_bits(), "threads={threads}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // n-point GL is exact for degree <= 2n-1.
        let nodes = gauss_legendre(8);
        let val = integrate_gl(|x| x.powi(10) + 3.0 * x.powi(3) - x, 0.0, 2.0, &nodes);
        let exact = 2f64.powi(11) / 11.0 + 3.0 * 2f64.powi(4) / 4.0 - 2.0;
        assert!((val - exact).abs() < 1e-10, "{val} vs {exact}");
    }

    #[test]
    fn gauss_legendre_256_weights_sum_to_two() {
        let s: f64 = gauss_legendre_256().iter().map(|&(_, w)| w).sum();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ks_statistic_detects_wrong_cdf() {
        let sample: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d_uniform = ks_statistic(&sample, |x| x.clamp(0.0, 1.0));
        assert!(d_uniform < 0.01);
        let d_wrong = ks_statistic(&sample, |x| (x * x).clamp(0.0, 1.0));
        assert!(d_wrong > 0.2);
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-12);
    }
}
