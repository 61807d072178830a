//! Discretization grids for the rescaled field and the grid-vs-continuum
//! comparison experiment.
//!
//! For level v the s-grid has mesh `q = theta v^{-1/H}` over `[0, T]` and
//! the tau-grid covers the band `|tau - tau0| <= tau*(v) = log v / v` with
//! the same mesh.

use crate::asymptotics::ModelConstants;
use crate::error::{Error, Result};
use crate::fbm::{CirculantFgn, Hurst};
use crate::field::nu;
use crate::numeric::McEstimate;
use crate::rng::StreamFamily;
use crate::scalar::{Scalar, SimScalar};

/// Mesh and grid points of the field discretization at level `v`.
#[derive(Debug, Clone)]
pub struct DiscretizationGrid<S: Scalar> {
    pub theta: S,
    pub v: S,
    /// Mesh `q = theta * v^{-1/H}`.
    pub q: S,
    /// Band half-width `tau*(v) = log v / v`.
    pub tau_star: S,
    /// `s_l = l q`, `0 <= l <= L`, `L = floor(T / q)`.
    pub s_points: Vec<S>,
    /// `tau_n = tau0 + n q`, `|n| <= N`, `N = floor(tau*(v) / q)`.
    pub tau_points: Vec<S>,
    pub l_max: usize,
    pub n_max: usize,
}

/// Builds the grid exactly as defined: `v >= e` is required so that
/// `tau*(v) > 0`; the tau band must also stay positive, which adds the
/// guard `tau0 > tau*(v)` (binding only for small H at small v).
pub fn build_grid<S: Scalar>(
    t_horizon: S,
    theta: S,
    v: S,
    k: &ModelConstants<S>,
) -> Result<DiscretizationGrid<S>> {
    if !(t_horizon > S::zero()) || !(theta > S::zero()) {
        return Err(Error::domain("need T > 0 and theta > 0"));
    }
    let e = S::of(core::f64::consts::E);
    if !(v >= e) {
        return Err(Error::domain(format!("need v >= e, got {v}")));
    }
    let tau_star = v.ln() / v;
    if !(k.tau0 > tau_star) {
        return Err(Error::domain(format!(
            "tau band crosses zero: tau0 = {} <= tau*(v) = {tau_star}",
            k.tau0
        )));
    }
    let q = theta * v.powf(-S::one() / k.h.value());
    let l_max = (t_horizon / q).to_f64_lossy().floor() as usize;
    let n_max = (tau_star / q).to_f64_lossy().floor() as usize;
    if l_max < 1 || n_max < 1 {
        return Err(Error::domain(format!(
            "degenerate grid: L = {l_max}, N = {n_max}"
        )));
    }
    let s_points = (0..=l_max).map(|l| q * S::of(l as f64)).collect();
    let tau_points = (-(n_max as i64)..=n_max as i64)
        .map(|n| k.tau0 + q * S::of(n as f64))
        .collect();
    Ok(DiscretizationGrid {
        theta,
        v,
        q,
        tau_star,
        s_points,
        tau_points,
        l_max,
        n_max,
    })
}

/// Result of the grid-vs-continuum exceedance comparison.
#[derive(Debug, Clone)]
pub struct GridExperiment<S: Scalar> {
    pub p_grid: McEstimate<S>,
    pub p_cont: McEstimate<S>,
    /// Replications where the grid maximum exceeded the fine maximum; the
    /// subset construction makes this structurally zero.
    pub violations: usize,
}

/// Compares `P(max over the theta-grid of A Z > v)` against the same
/// probability on a `refine`-times finer grid, with the coarse grid embedded
/// in the fine one and both evaluated on a common field realization per
/// replication.
#[allow(clippy::too_many_arguments)]
pub fn grid_vs_continuum_experiment<S: SimScalar>(
    t_horizon: S,
    theta: S,
    v: S,
    h: Hurst<S>,
    k: &ModelConstants<S>,
    seed: u64,
    reps: usize,
    refine: usize,
) -> Result<GridExperiment<S>> {
    if refine < 2 {
        return Err(Error::domain("refinement factor must be at least 2"));
    }
    if reps < 100 {
        return Err(Error::domain("need at least 100 replications"));
    }
    let grid = build_grid(t_horizon, theta, v, k)?;
    let delta = grid.q / S::of(refine as f64);
    // snap tau0 to the fine lattice so every evaluation point lands on it
    let tau0_steps = (k.tau0 / delta).round();
    let n_band = grid.n_max * refine;
    let tau_lo_steps = tau0_steps.to_f64_lossy() as i64 - n_band as i64;
    if tau_lo_steps < 1 {
        return Err(Error::domain(
            "tau band too close to zero for this refinement",
        ));
    }
    let n_s_fine = grid.l_max * refine;
    let lattice_len = n_s_fine + tau_lo_steps as usize + 2 * n_band + 1;

    // A Z(s, tau) = A (B(s+tau) - B(s)) / (tau^H nu(tau)); precompute the
    // per-tau normalization on the fine band
    let mut coef = Vec::with_capacity(2 * n_band + 1);
    for j in 0..=(2 * n_band) {
        let tau = delta * S::of((tau_lo_steps + j as i64) as f64);
        coef.push(k.big_a / (tau.powf(h.value()) * nu(tau, h)?));
    }

    let sampler = CirculantFgn::new(h, lattice_len)?;
    let scale = delta.powf(h.value());
    let fam = StreamFamily::new(seed);
    let mut grid_hits = 0usize;
    let mut cont_hits = 0usize;
    let mut violations = 0usize;
    let mut inc = Vec::new();
    let mut path = Vec::new();
    for rep in 0..reps {
        let mut rng = fam.replication("grid", rep);
        sampler.sample_into(&mut rng, &mut inc);
        for x in inc.iter_mut() {
            *x *= scale;
        }
        crate::numeric::compensated_prefix_sum(&inc, &mut path);
        let mut fine_max = S::neg_infinity();
        let mut coarse_max = S::neg_infinity();
        for i in 0..=n_s_fine {
            let on_coarse_s = i % refine == 0;
            let base = i + tau_lo_steps as usize;
            for (j, &c) in coef.iter().enumerate() {
                let z = (path[base + j] - path[i]) * c;
                fine_max = fine_max.max(z);
                if on_coarse_s && j % refine == 0 {
                    coarse_max = coarse_max.max(z);
                }
            }
        }
        let g = coarse_max > v;
        let c = fine_max > v;
        grid_hits += usize::from(g);
        cont_hits += usize::from(c);
        if g && !c {
            violations += 1;
        }
    }
    Ok(GridExperiment {
        p_grid: McEstimate::from_hits(grid_hits, reps, seed, "grid"),
        p_cont: McEstimate::from_hits(cont_hits, reps, seed, "grid"),
        violations,
    })
}
