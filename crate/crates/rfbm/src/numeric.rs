//! Shared numerical machinery: compensated summation, Monte Carlo
//! summaries, a two-sample Kolmogorov-Smirnov test, and small least-squares
//! fits used by the experiments.

use crate::scalar::Scalar;

/// Neumaier-compensated accumulator. Order-independent to ~1 ulp for the
/// reductions used here.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedSum<S: Scalar> {
    sum: S,
    compensation: S,
}

impl<S: Scalar> Default for CompensatedSum<S> {
    fn default() -> Self {
        Self {
            sum: S::zero(),
            compensation: S::zero(),
        }
    }
}

impl<S: Scalar> CompensatedSum<S> {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: S) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> S {
        self.sum + self.compensation
    }
}

/// Compensated prefix sum: `out[0] = 0`, `out[i] = sum of xs[..i]`.
pub fn compensated_prefix_sum<S: Scalar>(xs: &[S], out: &mut Vec<S>) {
    out.clear();
    out.reserve(xs.len() + 1);
    out.push(S::zero());
    let mut acc = CompensatedSum::new();
    for &x in xs {
        acc.add(x);
        out.push(acc.value());
    }
}

pub fn compensated_total<S: Scalar>(xs: &[S]) -> S {
    let mut acc = CompensatedSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Monte Carlo estimate with its standard error and seed lineage.
#[derive(Debug, Clone)]
pub struct McEstimate<S: Scalar> {
    pub value: S,
    pub std_error: S,
    pub reps: usize,
    /// `(seed, stream prefix)` that generated the replications.
    pub seed_lineage: (u64, String),
    /// 95% binomial (Wilson) interval, present for probability estimates.
    pub ci: Option<(S, S)>,
}

impl<S: Scalar> McEstimate<S> {
    pub fn from_samples(samples: &[S], seed: u64, prefix: &str) -> Self {
        let (mean, se) = mean_and_se(samples);
        Self {
            value: mean,
            std_error: se,
            reps: samples.len(),
            seed_lineage: (seed, prefix.to_string()),
            ci: None,
        }
    }

    /// Binomial proportion estimate from a hit count.
    pub fn from_hits(hits: usize, reps: usize, seed: u64, prefix: &str) -> Self {
        let n = S::of(reps as f64);
        let p = S::of(hits as f64) / n;
        let se = (p * (S::one() - p) / n).sqrt();
        let ci = Some(wilson_interval(hits, reps));
        Self {
            value: p,
            std_error: se,
            reps,
            seed_lineage: (seed, prefix.to_string()),
            ci,
        }
    }
}

pub fn mean_and_se<S: Scalar>(samples: &[S]) -> (S, S) {
    let n = samples.len();
    if n == 0 {
        return (S::nan(), S::nan());
    }
    let mean = compensated_total(samples) / S::of(n as f64);
    if n == 1 {
        return (mean, S::nan());
    }
    let mut acc = CompensatedSum::new();
    for &x in samples {
        let d = x - mean;
        acc.add(d * d);
    }
    let var = acc.value() / S::of((n - 1) as f64);
    (mean, (var / S::of(n as f64)).sqrt())
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval<S: Scalar>(hits: usize, reps: usize) -> (S, S) {
    let z = S::of(1.959_963_984_540_054);
    let n = S::of(reps as f64);
    let p = S::of(hits as f64) / n;
    let z2 = z * z;
    let denom = S::one() + z2 / n;
    let center = (p + z2 / (S::of(2.0) * n)) / denom;
    let half = z * (p * (S::one() - p) / n + z2 / (S::of(4.0) * n * n)).sqrt() / denom;
    (
        (center - half).max(S::zero()),
        (center + half).min(S::one()),
    )
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
#[derive(Debug, Clone, Copy)]
pub struct KsTest<S: Scalar> {
    pub statistic: S,
    pub p_value: S,
}

pub fn two_sample_ks<S: Scalar>(a: &[S], b: &[S]) -> KsTest<S> {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs: Vec<S> = a.to_vec();
    let mut ys: Vec<S> = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = S::zero();
    while i < n && j < m {
        let x = xs[i];
        let y = ys[j];
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        let fa = S::of(i as f64) / S::of(n as f64);
        let fb = S::of(j as f64) / S::of(m as f64);
        d = d.max((fa - fb).abs());
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d.to_f64_lossy();
    KsTest {
        statistic: d,
        p_value: S::of(ks_sf(lambda)),
    }
}

// Kolmogorov survival function Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
fn ks_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Ordinary least squares line `y = intercept + slope * x`.
pub fn linear_fit<S: Scalar>(xs: &[S], ys: &[S]) -> (S, S) {
    assert_eq!(xs.len(), ys.len());
    let n = S::of(xs.len() as f64);
    let sx = compensated_total(xs);
    let sy = compensated_total(ys);
    let mut sxx = CompensatedSum::new();
    let mut sxy = CompensatedSum::new();
    for (&x, &y) in xs.iter().zip(ys) {
        sxx.add(x * x);
        sxy.add(x * y);
    }
    let denom = n * sxx.value() - sx * sx;
    let slope = (n * sxy.value() - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (intercept, slope)
}

/// Weighted least squares line; returns the intercept, its standard error,
/// the slope, and the rms of weighted residuals.
pub fn weighted_line_fit<S: Scalar>(xs: &[S], ys: &[S], sigmas: &[S]) -> (S, S, S, S) {
    assert!(xs.len() == ys.len() && ys.len() == sigmas.len() && xs.len() >= 2);
    let mut s = S::zero();
    let mut sx = S::zero();
    let mut sy = S::zero();
    let mut sxx = S::zero();
    let mut sxy = S::zero();
    for ((&x, &y), &sg) in xs.iter().zip(ys).zip(sigmas) {
        let w = S::one() / (sg * sg);
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let denom = s * sxx - sx * sx;
    let intercept = (sxx * sy - sx * sxy) / denom;
    let slope = (s * sxy - sx * sy) / denom;
    let se_intercept = (sxx / denom).sqrt();
    let mut rss = S::zero();
    for ((&x, &y), &sg) in xs.iter().zip(ys).zip(sigmas) {
        let r = (y - intercept - slope * x) / sg;
        rss += r * r;
    }
    let rms = (rss / S::of(xs.len() as f64)).sqrt();
    (intercept, se_intercept, slope, rms)
}
