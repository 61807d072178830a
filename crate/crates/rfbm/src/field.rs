//! The rescaled Gaussian field behind the storage process: variance
//! structure, correlation function with its decay envelope, the time-change
//! identity relating queue and field suprema, and a small-dimension numeric
//! check of Berman's comparison inequality.
//!
//! The field is `Z_u(s, tau) = (B_H(u(tau+s)) - B_H(us)) / ((u tau)^H nu(tau))`
//! with `nu(tau) = tau^{-H} + tau^{1-H}`; its law does not depend on u.

use rand::Rng;

use crate::asymptotics::ModelConstants;
use crate::error::{Error, Result};
use crate::fbm::{fbm_covariance, Hurst};
use crate::numeric::McEstimate;
use crate::quad::{normal_rectangle, CorrMatrix};
use crate::rng::StreamFamily;
use crate::scalar::{Scalar, SimScalar};
use crate::storage::{self, WindowSpec};

/// `nu(tau) = tau^{-H} + tau^{1-H}`; strictly convex with minimum at tau0.
pub fn nu<S: Scalar>(tau: S, h: Hurst<S>) -> Result<S> {
    if !(tau > S::zero()) {
        return Err(Error::domain(format!("nu requires tau > 0, got {tau}")));
    }
    let hv = h.value();
    Ok(tau.powf(-hv) + tau.powf(S::one() - hv))
}

/// Field standard deviation `sigma_Z(tau) = 1 / nu(tau)`, maximized at tau0.
pub fn sigma_z<S: Scalar>(tau: S, h: Hurst<S>) -> Result<S> {
    Ok(S::one() / nu(tau, h)?)
}

/// A point of the rescaled field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint<S: Scalar> {
    pub s: S,
    pub tau: S,
}

impl<S: Scalar> FieldPoint<S> {
    pub fn new(s: S, tau: S) -> Result<Self> {
        if !(s >= S::zero()) || !(tau > S::zero()) {
            return Err(Error::domain("field point needs s >= 0 and tau > 0"));
        }
        Ok(Self { s, tau })
    }
}

/// Inputs of the two-point correlation.
#[derive(Debug, Clone, Copy)]
pub struct CorrelationQuery<S: Scalar> {
    pub u: S,
    pub u_prime: S,
    pub p1: FieldPoint<S>,
    pub p2: FieldPoint<S>,
}

impl<S: Scalar> CorrelationQuery<S> {
    pub fn new(u: S, u_prime: S, p1: FieldPoint<S>, p2: FieldPoint<S>) -> Result<Self> {
        if !(u > S::zero()) || !(u_prime > S::zero()) {
            return Err(Error::domain("scalings u, u' must be positive"));
        }
        Ok(Self { u, u_prime, p1, p2 })
    }
}

/// Correlation `r_{u,u'}(s, tau, s', tau')` of the field at two points.
///
/// Away from `us = u's'` this is the closed form in the increment gap
/// `D = us - u's'`; on the diagonal the closed form divides by zero, so the
/// value comes from the defining increment covariance (four fBm covariance
/// calls). Total on its domain.
pub fn field_correlation<S: Scalar>(q: &CorrelationQuery<S>, h: Hurst<S>) -> S {
    let two_h = h.two_h();
    let ut = q.u * q.p1.tau;
    let upt = q.u_prime * q.p2.tau;
    let d = q.u * q.p1.s - q.u_prime * q.p2.s;
    let scale = ut.max(upt).max(d.abs());
    let norm = ut.powf(h.value()) * upt.powf(h.value());
    if d.abs() <= S::of(1e-9) * scale {
        // E (B(b)-B(a))(B(d)-B(c)) via covariances, with a = us = u's' = c
        let half = S::of(0.5);
        let num = half * (ut.powf(two_h) - (ut - upt).abs().powf(two_h) + upt.powf(two_h));
        return num / norm;
    }
    let one = S::one();
    let t1 = (one + ut / d).abs().powf(two_h);
    let t2 = (one + (ut - upt) / d).abs().powf(two_h);
    let t3 = (one - upt / d).abs().powf(two_h);
    d.abs().powf(two_h) / (S::of(2.0) * norm) * (t1 - t2 + t3 - one)
}

/// Correlation through the raw increment covariance; the independent route
/// used by tests and by the diagonal branch.
pub fn field_correlation_via_covariance<S: Scalar>(q: &CorrelationQuery<S>, h: Hurst<S>) -> S {
    let a = q.u * q.p1.s;
    let b = q.u * (q.p1.s + q.p1.tau);
    let c = q.u_prime * q.p2.s;
    let d = q.u_prime * (q.p2.s + q.p2.tau);
    let cov = fbm_covariance(b, d, h) - fbm_covariance(b, c, h) - fbm_covariance(a, d, h)
        + fbm_covariance(a, c, h);
    cov / ((q.u * q.p1.tau).powf(h.value()) * (q.u_prime * q.p2.tau).powf(h.value()))
}

/// Empirical supremum of |r| over the long-range constraint set: both scaled
/// gaps `|us - u's'|/u` and `|us - u's'|/u'` at least `t`, window lengths in
/// `[tau1, tau2]`. Randomized search plus deterministic near-extremal
/// corners; certifies the `t^{-(2-2H)}` decay exponent, not the constant.
pub fn correlation_decay_envelope<S: Scalar>(
    t: S,
    h: Hurst<S>,
    tau1: S,
    tau2: S,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<S> {
    if !(t > S::zero()) || !(tau1 > S::zero()) || !(tau2 > tau1) {
        return Err(Error::domain("need t > 0 and 0 < tau1 < tau2"));
    }
    if samples == 0 {
        return Err(Error::SearchBudgetExceeded);
    }
    let mut best = S::zero();
    let mut eval = |u: S, up: S, s_p: S, tau: S, taup: S, gap: S| -> Result<()> {
        // s solves u s - u' s' = gap >= t * max(u, u')
        let s = (up * s_p + gap) / u;
        let q =
            CorrelationQuery::new(u, up, FieldPoint::new(s, tau)?, FieldPoint::new(s_p, taup)?)?;
        let r = field_correlation(&q, h).abs();
        if r > best {
            best = r;
        }
        Ok(())
    };
    for _ in 0..samples {
        let u = S::of(rng.random_range(0.0..1.0f64) * 10f64.ln()).exp();
        let up = S::of(rng.random_range(0.0..1.0f64) * 10f64.ln()).exp();
        let tau = tau1 + S::of(rng.random_range(0.0..1.0f64)) * (tau2 - tau1);
        let taup = tau1 + S::of(rng.random_range(0.0..1.0f64)) * (tau2 - tau1);
        let s_p = S::of(rng.random_range(0.0..3.0f64));
        let gap = t * u.max(up) * (S::one() + S::of(rng.random_range(0.0..0.5f64)));
        eval(u, up, s_p, tau, taup, gap)?;
    }
    // near-extremal corners: equal scalings, widest windows, minimal gap
    for u in [S::one(), S::of(3.0), S::of(10.0)] {
        eval(u, u, S::one(), tau2, tau2, t * u)?;
        eval(u, u, S::one(), tau2, tau1, t * u)?;
    }
    Ok(best)
}

/// CSV export of an envelope regression, header `t,envelope`, full double
/// precision.
pub fn write_envelope_csv<S: Scalar, W: std::io::Write>(
    points: &[(S, S)],
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "t,envelope")?;
    for (t, env) in points {
        writeln!(out, "{t:.16e},{env:.16e}")?;
    }
    Ok(())
}

/// Monte Carlo parameters for the transformation check.
#[derive(Debug, Clone, Copy)]
pub struct TransformationMcParams<S: Scalar> {
    pub reps: usize,
    pub dt: S,
    /// Truncation of the unbounded tau range on the field side.
    pub tau_max: S,
    pub seed: u64,
}

/// Estimates both sides of the time-change identity
/// `P(sup_{[0,T]} Q > u) = P(sup_{s in [0,T/u], tau} Z_u > u^{1-H})`
/// by independent Monte Carlo. Equality within joint confidence intervals is
/// the caller's assertion.
pub fn transformation_check<S: SimScalar>(
    level_u: S,
    t_window: S,
    mc: &TransformationMcParams<S>,
    h: Hurst<S>,
    k: &ModelConstants<S>,
) -> Result<(McEstimate<S>, McEstimate<S>)> {
    if !(level_u > S::zero()) || !(t_window > S::zero()) {
        return Err(Error::domain("level and window must be positive"));
    }
    let fam = StreamFamily::new(mc.seed);

    // queue side
    let window = WindowSpec::Auto {
        kappa: S::of(8.0),
        max_level: level_u,
    }
    .resolve(k, mc.dt)?;
    let mut left_hits = 0usize;
    for rep in 0..mc.reps {
        let mut rng = fam.replication("transform-queue", rep);
        let qp = storage::simulate_stationary_with_rng(t_window, mc.dt, window, h, &mut rng)?;
        if qp.values.iter().any(|&v| v > level_u) {
            left_hits += 1;
        }
    }

    // field side: evaluate Z_u on the grid of one fBm path per replication
    let threshold = level_u.powf(S::one() - h.value());
    let n_s = (t_window / level_u / mc.dt).to_f64_lossy().ceil() as usize;
    let n_tau = (mc.tau_max / mc.dt).to_f64_lossy().ceil() as usize;
    let n = n_s + n_tau + 1;
    let sampler = crate::fbm::CirculantFgn::new(h, n)?;
    // dt here is the *scaled* grid step; unscaled spacing is u * dt
    let step = level_u * mc.dt;
    let scale = step.powf(h.value());
    let mut right_hits = 0usize;
    let mut nu_cache: Vec<S> = Vec::with_capacity(n_tau + 1);
    nu_cache.push(S::zero()); // unused lag-0 slot
    for j in 1..=n_tau {
        let tau = mc.dt * S::of(j as f64);
        nu_cache.push(tau.powf(h.value()) * nu(tau, h)? * level_u.powf(h.value()));
    }
    let mut inc = Vec::new();
    let mut path = Vec::new();
    for rep in 0..mc.reps {
        let mut rng = fam.replication("transform-field", rep);
        sampler.sample_into(&mut rng, &mut inc);
        for x in inc.iter_mut() {
            *x *= scale;
        }
        crate::numeric::compensated_prefix_sum(&inc, &mut path);
        'scan: for i in 0..=n_s {
            for j in 1..=n_tau {
                let z = (path[i + j] - path[i]) / nu_cache[j];
                if z > threshold {
                    right_hits += 1;
                    break 'scan;
                }
            }
        }
    }

    if left_hits == 0 && right_hits == 0 {
        return Err(Error::InfeasibleLevel {
            reps: mc.reps,
            expected: 0.0,
        });
    }
    let left = McEstimate::from_hits(left_hits, mc.reps, mc.seed, "transform-queue");
    let right = McEstimate::from_hits(right_hits, mc.reps, mc.seed, "transform-field");
    Ok((left, right))
}

/// Random pair of valid correlation matrices (Gram matrices of random unit
/// vectors), for inequality sweeps.
pub fn random_correlation_pair<S: Scalar, R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
) -> (CorrMatrix<S>, CorrMatrix<S>) {
    fn draw<S: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> CorrMatrix<S> {
        loop {
            let vecs: Vec<[f64; 4]> = (0..n)
                .map(|_| {
                    let mut v = [0.0; 4];
                    for x in v.iter_mut() {
                        *x = rng.random_range(-1.0..1.0f64);
                    }
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm < 1e-6 {
                        v[0] = 1.0;
                        return v;
                    }
                    v.map(|x| x / norm)
                })
                .collect();
            let mut data = vec![S::zero(); n * n];
            for i in 0..n {
                for j in 0..n {
                    data[i * n + j] = S::of(
                        vecs[i]
                            .iter()
                            .zip(&vecs[j])
                            .map(|(a, b)| a * b)
                            .sum::<f64>(),
                    );
                }
            }
            if let Ok(m) = CorrMatrix::new(n, data) {
                return m;
            }
        }
    }
    let a = draw(n, rng);
    let b = draw(n, rng);
    (a, b)
}

/// Both sides of Berman's inequality for `n <= 4` standard normal vectors:
/// `lhs = P(xi <= u) - P(eta <= u)` by adaptive quadrature, `rhs` the
/// explicit comparison sum. Berman's comparison bound asserts `lhs <= rhs`.
pub fn berman_gap<S: Scalar>(
    corr1: &CorrMatrix<S>,
    corr0: &CorrMatrix<S>,
    levels: &[S],
) -> Result<(S, S)> {
    let n = corr1.dim();
    if corr0.dim() != n {
        return Err(Error::InvalidCorrelation("dimension mismatch".into()));
    }
    if levels.len() != n {
        return Err(Error::InvalidCorrelation(
            "levels length != dimension".into(),
        ));
    }
    let p1 = normal_rectangle(corr1, levels)?;
    let p0 = normal_rectangle(corr0, levels)?;
    let lhs = p1 - p0;

    let mut rhs = S::zero();
    let two_pi = S::of(core::f64::consts::TAU);
    for i in 0..n {
        for j in (i + 1)..n {
            let l1 = corr1.get(i, j);
            let l0 = corr0.get(i, j);
            let diff = (l1 - l0).max(S::zero());
            if diff == S::zero() {
                continue;
            }
            let rho = l1.abs().max(l0.abs());
            let ui = levels[i];
            let uj = levels[j];
            rhs += diff / two_pi / (S::one() - rho * rho).sqrt()
                * (-(ui * ui + uj * uj) / (S::of(2.0) * (S::one() + rho))).exp();
        }
    }
    Ok((lhs, rhs))
}
