//! Adaptive Gauss-Legendre quadrature and small-dimension normal rectangle
//! probabilities (n <= 4) built on it.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

// 10-point Gauss-Legendre nodes/weights on [-1, 1].
const GL10: [(f64, f64); 10] = [
    (-0.973906528517171720, 0.066671344308688138),
    (-0.865063366688984511, 0.149451349150580593),
    (-0.679409568299024406, 0.219086362515982044),
    (-0.433395394129247191, 0.269266719309996355),
    (-0.148874338981631211, 0.295524224714752870),
    (0.148874338981631211, 0.295524224714752870),
    (0.433395394129247191, 0.269266719309996355),
    (0.679409568299024406, 0.219086362515982044),
    (0.865063366688984511, 0.149451349150580593),
    (0.973906528517171720, 0.066671344308688138),
];

fn gl10_panel<S: Scalar, F: FnMut(S) -> S>(f: &mut F, a: S, b: S) -> S {
    let half = (b - a) * S::of(0.5);
    let mid = (a + b) * S::of(0.5);
    let mut acc = S::zero();
    for &(x, w) in &GL10 {
        acc += S::of(w) * f(mid + half * S::of(x));
    }
    acc * half
}

/// Adaptive Gauss-Legendre integration of `f` over `[a, b]` to absolute
/// tolerance `tol`: a panel is accepted when bisecting it changes the
/// 10-point estimate by less than its share of the tolerance.
pub fn adaptive_gl<S: Scalar, F: FnMut(S) -> S>(f: &mut F, a: S, b: S, tol: S) -> S {
    fn recurse<S: Scalar, F: FnMut(S) -> S>(
        f: &mut F,
        a: S,
        b: S,
        whole: S,
        tol: S,
        depth: u32,
    ) -> S {
        let mid = (a + b) * S::of(0.5);
        let left = gl10_panel(f, a, mid);
        let right = gl10_panel(f, mid, b);
        let refined = left + right;
        if depth >= 40 || (refined - whole).abs() <= tol {
            return refined;
        }
        let half_tol = tol * S::of(0.5);
        recurse(f, a, mid, left, half_tol, depth + 1)
            + recurse(f, mid, b, right, half_tol, depth + 1)
    }
    let whole = gl10_panel(f, a, b);
    recurse(f, a, b, whole, tol, 0)
}

/// Standard normal density.
#[inline]
pub fn normal_pdf<S: Scalar>(x: S) -> S {
    S::of(0.398_942_280_401_432_7) * (-x * x * S::of(0.5)).exp()
}

/// Standard normal CDF via erfc.
#[inline]
pub fn normal_cdf<S: Scalar>(x: S) -> S {
    S::of(0.5) * Scalar::erfc(-x * S::of(core::f64::consts::FRAC_1_SQRT_2))
}

/// Symmetric correlation matrix for the rectangle probabilities, dimension
/// at most 4, unit diagonal, positive semidefinite.
#[derive(Debug, Clone)]
pub struct CorrMatrix<S: Scalar> {
    n: usize,
    data: Vec<S>, // row-major
}

impl<S: Scalar> CorrMatrix<S> {
    pub fn new(n: usize, data: Vec<S>) -> Result<Self> {
        if n == 0 || n > 4 {
            return Err(Error::InvalidCorrelation(format!(
                "dimension {n} not in 1..=4"
            )));
        }
        if data.len() != n * n {
            return Err(Error::InvalidCorrelation("data length != n^2".into()));
        }
        let m = Self { n, data };
        for i in 0..n {
            if (m.get(i, i) - S::one()).abs() > S::of(1e-12) {
                return Err(Error::InvalidCorrelation("diagonal entry != 1".into()));
            }
            for j in 0..i {
                if (m.get(i, j) - m.get(j, i)).abs() > S::of(1e-12) {
                    return Err(Error::InvalidCorrelation("matrix not symmetric".into()));
                }
                if m.get(i, j).abs() > S::one() {
                    return Err(Error::InvalidCorrelation("off-diagonal |rho| > 1".into()));
                }
            }
        }
        m.cholesky()?; // existence check
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![S::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = S::one();
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.n + j]
    }

    /// Lower Cholesky factor, with a tiny diagonal tolerance so exactly
    /// singular correlation matrices (|rho| = 1) still factor.
    fn cholesky(&self) -> Result<Vec<S>> {
        let n = self.n;
        let mut l = vec![S::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.get(i, j);
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum < S::of(-1e-10) {
                        return Err(Error::InvalidCorrelation(format!(
                            "not positive semidefinite (pivot {i})"
                        )));
                    }
                    l[i * n + i] = sum.max(S::of(1e-18)).sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(l)
    }
}

/// P(X_1 <= u_1, ..., X_n <= u_n) for a centered normal vector with the
/// given correlation matrix, by sequential conditioning: the innermost
/// dimension is a normal CDF, outer dimensions are adaptive Gauss-Legendre
/// integrals of the conditional probability against the normal density.
/// Absolute tolerance ~1e-8 for n <= 4.
pub fn normal_rectangle<S: Scalar>(corr: &CorrMatrix<S>, upper: &[S]) -> Result<S> {
    if upper.len() != corr.dim() {
        return Err(Error::InvalidCorrelation(
            "levels length != dimension".into(),
        ));
    }
    let l = corr.cholesky()?;
    Ok(rectangle_recursive(
        &l,
        corr.dim(),
        upper,
        &mut Vec::new(),
        S::of(1e-9),
    ))
}

fn rectangle_recursive<S: Scalar>(l: &[S], n: usize, upper: &[S], fixed: &mut Vec<S>, tol: S) -> S {
    let k = fixed.len();
    // residual bound for coordinate k given z_0..z_{k-1}
    let mut offset = S::zero();
    for (j, &z) in fixed.iter().enumerate() {
        offset += l[k * n + j] * z;
    }
    let scale = l[k * n + k];
    let bound = (upper[k] - offset) / scale;
    if k + 1 == n {
        return normal_cdf(bound);
    }
    let cap = S::of(9.0);
    let hi = bound.min(cap);
    if hi <= -cap {
        return S::zero();
    }
    let mut f = |z: S| {
        fixed.push(z);
        let inner = rectangle_recursive(l, n, upper, fixed, tol * S::of(0.1));
        fixed.pop();
        normal_pdf(z) * inner
    };
    adaptive_gl(&mut f, -cap, hi, tol)
}
