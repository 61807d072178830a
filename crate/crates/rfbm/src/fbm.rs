//! Exact sampling of fractional Brownian motion and fractional Gaussian
//! noise on uniform grids.
//!
//! The workhorse is circulant embedding: the fGn autocovariance is embedded
//! in a circulant matrix whose eigenvalues come from one FFT; every sample
//! is then one more FFT. Nonnegativity of the eigenvalues holds analytically
//! for fGn, so any negative values beyond floating noise abort the
//! construction. A dense Cholesky factorization of the path covariance
//! serves as the slow exact reference.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::numeric::compensated_prefix_sum;
use crate::rng::StreamFamily;
use crate::scalar::{Scalar, SimScalar};

/// Maximum path length accepted by the dense oracle (cubic factorization).
pub const DENSE_ORACLE_MAX: usize = 2048;

/// Relative eigenvalue tolerance for the circulant embedding: eigenvalues in
/// `[-EIG_TOL * max, 0)` are clamped to zero, anything lower aborts.
pub const EIG_TOL: f64 = 1e-9;

/// Hurst parameter, restricted to `[0.01, 0.99]` for numerical conditioning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hurst<S: Scalar>(S);

impl<S: Scalar> Hurst<S> {
    pub fn new(value: S) -> Result<Self> {
        if !(value >= S::of(0.01) && value <= S::of(0.99)) {
            return Err(Error::domain(format!(
                "Hurst parameter {value} outside [0.01, 0.99]"
            )));
        }
        Ok(Self(value))
    }

    #[inline]
    pub fn value(self) -> S {
        self.0
    }

    #[inline]
    pub fn two_h(self) -> S {
        self.0 + self.0
    }
}

/// Covariance of fractional Brownian motion:
/// `(|t|^{2H} + |s|^{2H} - |t-s|^{2H}) / 2`.
pub fn fbm_covariance<S: Scalar>(t: S, s: S, h: Hurst<S>) -> S {
    let two_h = h.two_h();
    let half = S::of(0.5);
    half * (t.abs().powf(two_h) + s.abs().powf(two_h) - (t - s).abs().powf(two_h))
}

/// Lag-`k` autocovariance of unit-spaced, unit-variance fGn:
/// `(|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2`.
pub fn fgn_autocovariance<S: Scalar>(k: usize, h: Hurst<S>) -> S {
    let two_h = h.two_h();
    let k = S::of(k as f64);
    let half = S::of(0.5);
    half * ((k + S::one()).powf(two_h) - S::of(2.0) * k.powf(two_h)
        + (k - S::one()).abs().powf(two_h))
}

/// Autocovariance sequence of unit increments, lags `0..=max_lag`.
#[derive(Debug, Clone)]
pub struct FgnAutocovariance<S: Scalar> {
    pub hurst: Hurst<S>,
    pub lags: Vec<S>,
}

impl<S: Scalar> FgnAutocovariance<S> {
    pub fn unit(h: Hurst<S>, max_lag: usize) -> Self {
        let lags = (0..=max_lag).map(|k| fgn_autocovariance(k, h)).collect();
        Self { hurst: h, lags }
    }
}

/// A sampled fBm path on a uniform grid; `values[i] = B_H(i * dt)`,
/// `values[0] = 0`.
#[derive(Debug, Clone)]
pub struct FbmPath<S: Scalar> {
    pub hurst: Hurst<S>,
    pub dt: S,
    pub values: Vec<S>,
}

impl<S: Scalar> FbmPath<S> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn horizon(&self) -> S {
        self.dt * S::of((self.values.len() - 1) as f64)
    }

    pub fn time(&self, i: usize) -> S {
        self.dt * S::of(i as f64)
    }

    pub fn increments(&self) -> impl Iterator<Item = S> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    /// CSV export, header `t,value`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", self.time(i), v)?;
        }
        Ok(())
    }
}

/// Reusable circulant-embedding sampler for unit-spaced, unit-variance fGn
/// of a fixed length. Construction costs one FFT; each sample costs one FFT.
pub struct CirculantFgn<S: SimScalar> {
    hurst: Hurst<S>,
    n_increments: usize,
    m: usize,
    sqrt_eig_over_m: Vec<S>,
    fft: Arc<dyn Fft<S>>,
}

impl<S: SimScalar> CirculantFgn<S> {
    pub fn new(h: Hurst<S>, n_increments: usize) -> Result<Self> {
        assert!(n_increments >= 1);
        let m = (2 * n_increments).next_power_of_two();
        let half = m / 2;
        let gamma: Vec<S> = (0..=half).map(|k| fgn_autocovariance(k, h)).collect();
        let mut buf: Vec<Complex<S>> = (0..m)
            .map(|j| {
                let lag = j.min(m - j);
                Complex::new(gamma[lag], S::zero())
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut buf);

        let mut max_eig = S::zero();
        for c in &buf {
            max_eig = max_eig.max(c.re);
        }
        let tol = S::of(EIG_TOL) * max_eig;
        let m_s = S::of(m as f64);
        let mut sqrt_eig_over_m = Vec::with_capacity(m);
        for c in &buf {
            let lam = c.re;
            if lam < -tol {
                return Err(Error::EmbeddingNotNonnegative {
                    value: lam.to_f64_lossy(),
                    tolerance: tol.to_f64_lossy(),
                });
            }
            sqrt_eig_over_m.push((lam.max(S::zero()) / m_s).sqrt());
        }
        Ok(Self {
            hurst: h,
            n_increments,
            m,
            sqrt_eig_over_m,
            fft,
        })
    }

    pub fn hurst(&self) -> Hurst<S> {
        self.hurst
    }

    pub fn len(&self) -> usize {
        self.n_increments
    }

    pub fn is_empty(&self) -> bool {
        self.n_increments == 0
    }

    /// Circulant eigenvalues (recomputed; test and diagnostics use).
    pub fn eigenvalues(&self) -> Vec<S> {
        let m_s = S::of(self.m as f64);
        self.sqrt_eig_over_m.iter().map(|&s| s * s * m_s).collect()
    }

    /// Writes one exact unit-spaced fGn sample into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<S>) {
        let mut buf: Vec<Complex<S>> = self
            .sqrt_eig_over_m
            .iter()
            .map(|&s| {
                let re: S = S::standard_normal(rng);
                let im: S = S::standard_normal(rng);
                Complex::new(re * s, im * s)
            })
            .collect();
        self.fft.process(&mut buf);
        out.clear();
        out.extend(buf[..self.n_increments].iter().map(|c| c.re));
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<S> {
        let mut out = Vec::with_capacity(self.n_increments);
        self.sample_into(rng, &mut out);
        out
    }
}

/// Builds an fBm path from unit fGn increments: scale by `dt^H` and
/// prefix-sum with compensated arithmetic (controls rounding drift on long
/// paths).
pub fn path_from_unit_fgn<S: Scalar>(unit_fgn: &mut [S], dt: S, h: Hurst<S>) -> FbmPath<S> {
    let scale = dt.powf(h.value());
    for x in unit_fgn.iter_mut() {
        *x *= scale;
    }
    let mut values = Vec::new();
    compensated_prefix_sum(unit_fgn, &mut values);
    FbmPath {
        hurst: h,
        dt,
        values,
    }
}

/// Exact fBm sample of `n` points (spacing `dt`) by circulant embedding.
/// Deterministic for a fixed seed; stream label `fbm/0`.
pub fn sample_fbm_circulant<S: SimScalar>(
    n: usize,
    dt: S,
    h: Hurst<S>,
    seed: u64,
) -> Result<FbmPath<S>> {
    if n < 2 {
        return Err(Error::domain(format!("path needs n >= 2 points, got {n}")));
    }
    if !(dt > S::zero()) {
        return Err(Error::domain("dt must be positive"));
    }
    let sampler = CirculantFgn::new(h, n - 1)?;
    let mut rng = StreamFamily::new(seed).stream("fbm/0");
    let mut inc = sampler.sample(&mut rng);
    Ok(path_from_unit_fgn(&mut inc, dt, h))
}

/// Slow exact reference sampler: dense Cholesky factorization of the path
/// covariance. `n` is capped at [`DENSE_ORACLE_MAX`].
pub fn sample_fbm_dense_oracle<S: SimScalar>(
    n: usize,
    dt: S,
    h: Hurst<S>,
    seed: u64,
) -> Result<FbmPath<S>> {
    if n < 2 {
        return Err(Error::domain(format!("path needs n >= 2 points, got {n}")));
    }
    if n > DENSE_ORACLE_MAX {
        return Err(Error::SizeTooLarge {
            n,
            max: DENSE_ORACLE_MAX,
        });
    }
    if !(dt > S::zero()) {
        return Err(Error::domain("dt must be positive"));
    }
    // covariance of (B(dt), ..., B((n-1) dt)); B(0) = 0 is deterministic
    let d = n - 1;
    let mut cov = vec![S::zero(); d * d];
    for i in 0..d {
        for j in 0..=i {
            let c = fbm_covariance(dt * S::of((i + 1) as f64), dt * S::of((j + 1) as f64), h);
            cov[i * d + j] = c;
            cov[j * d + i] = c;
        }
    }
    let l = cholesky_lower(&cov, d)?;
    let mut rng = StreamFamily::new(seed).stream("fbm-dense/0");
    let z: Vec<S> = (0..d).map(|_| S::standard_normal(&mut rng)).collect();
    let mut values = Vec::with_capacity(n);
    values.push(S::zero());
    for i in 0..d {
        let mut acc = S::zero();
        for j in 0..=i {
            acc += l[i * d + j] * z[j];
        }
        values.push(acc);
    }
    Ok(FbmPath {
        hurst: h,
        dt,
        values,
    })
}

/// Dense path covariance matrix (row-major, dimension `n-1`), exposed so
/// tests can compare it against the closed form entrywise.
pub fn dense_path_covariance<S: Scalar>(n: usize, dt: S, h: Hurst<S>) -> Vec<S> {
    let d = n - 1;
    let mut cov = vec![S::zero(); d * d];
    for i in 0..d {
        for j in 0..d {
            cov[i * d + j] =
                fbm_covariance(dt * S::of((i + 1) as f64), dt * S::of((j + 1) as f64), h);
        }
    }
    cov
}

fn cholesky_lower<S: Scalar>(a: &[S], n: usize) -> Result<Vec<S>> {
    let mut l = vec![S::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= S::zero() {
                    return Err(Error::FactorizationFailure { pivot: i });
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Streaming generator of exact fGn increments already scaled to spacing
/// `dt`. For H = 1/2 the increments are independent and are generated on the
/// fly; otherwise a full-horizon circulant sample is drawn up front.
pub(crate) enum FgnSource<S: SimScalar> {
    Iid { scale: S },
    Precomputed { inc: Vec<S>, pos: usize },
}

impl<S: SimScalar> FgnSource<S> {
    pub(crate) fn new<R: Rng + ?Sized>(h: Hurst<S>, dt: S, n: usize, rng: &mut R) -> Result<Self> {
        if h.value() == S::of(0.5) {
            // Brownian increments are independent; no FFT needed
            Ok(FgnSource::Iid { scale: dt.sqrt() })
        } else {
            let sampler = CirculantFgn::new(h, n)?;
            let mut inc = sampler.sample(rng);
            let scale = dt.powf(h.value());
            for x in inc.iter_mut() {
                *x *= scale;
            }
            Ok(FgnSource::Precomputed { inc, pos: 0 })
        }
    }

    #[inline]
    pub(crate) fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> S {
        match self {
            FgnSource::Iid { scale } => S::standard_normal(rng) * *scale,
            FgnSource::Precomputed { inc, pos } => {
                let x = inc[*pos];
                *pos += 1;
                x
            }
        }
    }
}
