//! Simulation of the reflected / stationary storage process driven by exact
//! fGn increments, supremum tail estimation, and threshold-crossing
//! extraction.
//!
//! Two equivalent routes to the process:
//! * reflected: the Lindley recursion `Q_{i+1} = max(Q_i + dB - dt, 0)`
//!   started from `q0`, which converges to stationarity after a burn-in;
//! * stationary: `Q(t) = max_{s in [t-W, t]} (B(t) - B(s) - (t - s))` on the
//!   grid, a sliding-window minimum of the drifted driver path, exact up to
//!   the truncation window `W`.

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::asymptotics::{piterbarg_tail, ModelConstants, RateMode, ThresholdFamily};
use crate::error::{Error, Result};
use crate::fbm::{CirculantFgn, Hurst};
use crate::numeric::{compensated_prefix_sum, McEstimate};
use crate::rng::StreamFamily;
use crate::scalar::{Scalar, SimScalar};

/// How a queue path was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QueueMode<S: Scalar> {
    Reflected { q0: S, burn_in: S },
    TruncatedSup { window: S },
}

/// Storage-process values on a uniform grid starting at `t_start`.
#[derive(Debug, Clone)]
pub struct QueuePath<S: Scalar> {
    pub hurst: Hurst<S>,
    pub dt: S,
    pub t_start: S,
    /// Drift rate; fixed at 1.
    pub drift: S,
    pub values: Vec<S>,
    pub mode: QueueMode<S>,
}

impl<S: Scalar> QueuePath<S> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> S {
        self.t_start + self.dt * S::of(i as f64)
    }

    pub fn horizon(&self) -> S {
        self.time(self.values.len().saturating_sub(1))
    }

    /// Sub-path from the first grid point at or after `from_t`.
    pub fn restrict(&self, from_t: S) -> QueuePath<S> {
        let offset = ((from_t - self.t_start) / self.dt).ceil().max(S::zero());
        let i0 = (offset.to_f64_lossy() as usize).min(self.values.len());
        QueuePath {
            hurst: self.hurst,
            dt: self.dt,
            t_start: self.time(i0),
            drift: self.drift,
            values: self.values[i0..].to_vec(),
            mode: self.mode,
        }
    }

    /// CSV export, header `t,Q`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,Q")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", self.time(i), v)?;
        }
        Ok(())
    }
}

/// Truncation window for the stationary representation.
#[derive(Debug, Clone, Copy)]
pub enum WindowSpec<S: Scalar> {
    /// `W = kappa * tau0 * max(1, max_level)^{1/(1-H)}`, rounded up to a
    /// multiple of dt. The floor at 1 keeps the window generous for
    /// sub-unit levels (the dominant lag scales like `u * tau0`).
    Auto {
        kappa: S,
        max_level: S,
    },
    Fixed(S),
}

impl<S: Scalar> WindowSpec<S> {
    pub fn resolve(&self, k: &ModelConstants<S>, dt: S) -> Result<S> {
        let w = match *self {
            WindowSpec::Fixed(w) => w,
            WindowSpec::Auto { kappa, max_level } => {
                let h = k.h.value();
                kappa * k.tau0 * max_level.max(S::one()).powf(S::one() / (S::one() - h))
            }
        };
        if !(w > S::zero()) {
            return Err(Error::domain("window must be positive"));
        }
        // dt-aligned, at least one step
        let steps = (w / dt).ceil().max(S::one());
        Ok(steps * dt)
    }
}

/// Lindley recursion over explicit increments; the zero-noise test hook and
/// the reflected simulator share this.
fn lindley<S: Scalar>(q0: S, dt: S, increments: impl Iterator<Item = S>) -> Vec<S> {
    let mut values = Vec::with_capacity(increments.size_hint().0 + 1);
    let mut q = q0;
    values.push(q);
    for db in increments {
        q = (q + db - dt).max(S::zero());
        values.push(q);
    }
    values
}

/// Reflected storage process from `q0` by discrete Skorokhod/Lindley
/// evolution with exact fGn increments; one reflection per step.
pub fn simulate_reflected<S: SimScalar>(
    q0: S,
    horizon: S,
    dt: S,
    h: Hurst<S>,
    seed: u64,
) -> Result<QueuePath<S>> {
    if !(q0 >= S::zero()) {
        return Err(Error::domain("q0 must be nonnegative"));
    }
    if !(horizon >= dt) || !(dt > S::zero()) {
        return Err(Error::domain("need horizon >= dt > 0"));
    }
    let n = (horizon / dt).round().to_f64_lossy() as usize;
    let mut rng = StreamFamily::new(seed).stream("queue-reflected/0");
    let mut src = crate::fbm::FgnSource::new(h, dt, n, &mut rng)?;
    let values = lindley(q0, dt, (0..n).map(|_| src.next(&mut rng)));
    Ok(QueuePath {
        hurst: h,
        dt,
        t_start: S::zero(),
        drift: S::one(),
        values,
        mode: QueueMode::Reflected {
            q0,
            burn_in: S::zero(),
        },
    })
}

/// Drifted driver path `D_i = B(i dt) - i dt` of length `n + 1`.
fn drifted_driver<S: SimScalar, R: Rng + ?Sized>(
    h: Hurst<S>,
    dt: S,
    n: usize,
    rng: &mut R,
    sampler: Option<&CirculantFgn<S>>,
    scratch: &mut Vec<S>,
    out: &mut Vec<S>,
) -> Result<()> {
    scratch.clear();
    if let Some(s) = sampler {
        debug_assert_eq!(s.len(), n);
        s.sample_into(rng, scratch);
        let scale = dt.powf(h.value());
        for x in scratch.iter_mut() {
            *x *= scale;
        }
    } else {
        let scale = dt.sqrt();
        scratch.extend((0..n).map(|_| S::standard_normal(rng) * scale));
    }
    for x in scratch.iter_mut() {
        *x -= dt;
    }
    compensated_prefix_sum(scratch, out);
    Ok(())
}

/// Sliding-window minimum of `xs` over trailing windows of `w` points
/// (inclusive); `out[j] = min(xs[j-w ..= j])` for `j >= w`.
fn sliding_min_tail<S: Scalar>(xs: &[S], w: usize, out: &mut Vec<S>) {
    out.clear();
    let mut deque: VecDeque<usize> = VecDeque::new();
    for (j, &x) in xs.iter().enumerate() {
        while let Some(&back) = deque.back() {
            if xs[back] >= x {
                deque.pop_back();
            } else {
                break;
            }
        }
        deque.push_back(j);
        while let Some(&front) = deque.front() {
            if front + w < j {
                deque.pop_front();
            } else {
                break;
            }
        }
        if j >= w {
            out.push(xs[*deque.front().unwrap()]);
        }
    }
}

fn stationary_values<S: SimScalar, R: Rng + ?Sized>(
    horizon: S,
    dt: S,
    window: S,
    h: Hurst<S>,
    rng: &mut R,
    sampler: Option<&CirculantFgn<S>>,
) -> Result<Vec<S>> {
    let n_w = (window / dt).round().to_f64_lossy() as usize;
    let n_obs = (horizon / dt).round().to_f64_lossy() as usize;
    let n = n_w + n_obs;
    let mut scratch = Vec::new();
    let mut driver = Vec::new();
    drifted_driver(h, dt, n, rng, sampler, &mut scratch, &mut driver)?;
    let mut mins = Vec::new();
    sliding_min_tail(&driver, n_w, &mut mins);
    debug_assert_eq!(mins.len(), n_obs + 1);
    Ok(driver[n_w..]
        .iter()
        .zip(&mins)
        .map(|(&d, &m)| d - m)
        .collect())
}

/// Stationary storage path on `[0, horizon]`:
/// `Q(t) = max_{s in [t-W, t]} (B(t) - B(s) - (t-s))` on the grid. The
/// one-dimensional marginals carry a truncation bias controlled by the
/// window; certify a window choice with [`window_doubling_check`].
pub fn simulate_stationary<S: SimScalar>(
    horizon: S,
    dt: S,
    window: S,
    h: Hurst<S>,
    seed: u64,
) -> Result<QueuePath<S>> {
    let mut rng = StreamFamily::new(seed).stream("queue-stationary/0");
    simulate_stationary_with_rng(horizon, dt, window, h, &mut rng)
}

/// Stationary simulation drawing from a caller-provided stream.
pub fn simulate_stationary_with_rng<S: SimScalar, R: Rng + ?Sized>(
    horizon: S,
    dt: S,
    window: S,
    h: Hurst<S>,
    rng: &mut R,
) -> Result<QueuePath<S>> {
    if !(horizon >= dt) || !(dt > S::zero()) || !(window >= dt) {
        return Err(Error::domain("need horizon >= dt > 0 and window >= dt"));
    }
    let n_w = (window / dt).round().to_f64_lossy() as usize;
    let n_obs = (horizon / dt).round().to_f64_lossy() as usize;
    let sampler = if h.value() == S::of(0.5) {
        None
    } else {
        Some(CirculantFgn::new(h, n_w + n_obs)?)
    };
    let values = stationary_values(horizon, dt, window, h, rng, sampler.as_ref())?;
    Ok(QueuePath {
        hurst: h,
        dt,
        t_start: S::zero(),
        drift: S::one(),
        values,
        mode: QueueMode::TruncatedSup { window },
    })
}

/// Doubling self-check of the truncation window: iid stationary marginals
/// are sampled at `W` and `2W`; the tail estimates on a level grid up to
/// `max_level` must agree within 3 combined standard errors in sup-norm.
pub fn window_doubling_check<S: SimScalar>(
    window: S,
    dt: S,
    max_level: S,
    h: Hurst<S>,
    seed: u64,
    reps: usize,
) -> Result<()> {
    let fam = StreamFamily::new(seed);
    let marginals = |w: S, label: &str| -> Result<Vec<S>> {
        let n = (w / dt).round().to_f64_lossy() as usize;
        let sampler = if h.value() == S::of(0.5) {
            None
        } else {
            Some(CirculantFgn::new(h, n)?)
        };
        let mut out = Vec::with_capacity(reps);
        let mut scratch = Vec::new();
        let mut driver = Vec::new();
        for rep in 0..reps {
            let mut rng = fam.replication(label, rep);
            drifted_driver(
                h,
                dt,
                n,
                &mut rng,
                sampler.as_ref(),
                &mut scratch,
                &mut driver,
            )?;
            let last = *driver.last().unwrap();
            let min = driver.iter().copied().fold(S::infinity(), S::min);
            out.push(last - min);
        }
        Ok(out)
    };
    let a = marginals(window, "window-check-w")?;
    let b = marginals(window + window, "window-check-2w")?;
    let n = S::of(reps as f64);
    let mut level = max_level * S::of(0.25);
    while level <= max_level {
        let pa = S::of(a.iter().filter(|&&q| q > level).count() as f64) / n;
        let pb = S::of(b.iter().filter(|&&q| q > level).count() as f64) / n;
        let se = |p: S| (p * (S::one() - p) / n).sqrt();
        let allowed = S::of(3.0) * (se(pa) + se(pb)) + S::of(1e-12);
        if (pa - pb).abs() > allowed {
            return Err(Error::WindowTooSmall {
                shift: (pa - pb).abs().to_f64_lossy(),
                allowed: allowed.to_f64_lossy(),
            });
        }
        level += max_level * S::of(0.25);
    }
    Ok(())
}

/// Parameters for [`sup_tail_probability`].
#[derive(Debug, Clone, Copy)]
pub struct SupTailParams<S: Scalar> {
    pub interval_t: S,
    pub level: S,
    pub dt: S,
    pub window: WindowSpec<S>,
    pub reps: usize,
    pub seed: u64,
    /// Run the window doubling check (cheap, once) before the replications.
    pub validate_window: bool,
}

/// Monte Carlo estimate of `P(sup_{[0, interval_t]} Q > level)` for the
/// stationary process, with binomial CI. Replications run in parallel on
/// independent substreams; the result does not depend on scheduling.
pub fn sup_tail_probability<S: SimScalar>(
    params: &SupTailParams<S>,
    h: Hurst<S>,
    k: &ModelConstants<S>,
) -> Result<McEstimate<S>> {
    if params.reps < 100 {
        return Err(Error::domain("need at least 100 replications"));
    }
    if params.level < S::zero() {
        return Err(Error::domain("level must be nonnegative"));
    }
    if params.level == S::zero() {
        // sup >= Q(0) > 0 almost surely
        let mut est = McEstimate::from_hits(params.reps, params.reps, params.seed, "tail");
        est.std_error = S::zero();
        return Ok(est);
    }
    let window = params.window.resolve(k, params.dt)?;
    if params.validate_window {
        window_doubling_check(window, params.dt, params.level, h, params.seed, 2000)?;
    }
    let n_w = (window / params.dt).round().to_f64_lossy() as usize;
    let n_obs = (params.interval_t / params.dt).round().to_f64_lossy() as usize;
    let sampler = if h.value() == S::of(0.5) {
        None
    } else {
        Some(CirculantFgn::new(h, n_w + n_obs)?)
    };
    let fam = StreamFamily::new(params.seed);
    let hits: usize = (0..params.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = fam.replication("tail", rep);
            let values = stationary_values(
                params.interval_t,
                params.dt,
                window,
                h,
                &mut rng,
                sampler.as_ref(),
            )
            .expect("replication failed");
            usize::from(values.iter().any(|&q| q > params.level))
        })
        .sum();
    if hits == 0 {
        let t_scale = params.interval_t / params.level;
        let expected = piterbarg_tail(t_scale, params.level, k, S::one())
            .map(|t| t.value.to_f64_lossy() * params.reps as f64)
            .unwrap_or(0.0);
        if expected < 0.1 {
            return Err(Error::InfeasibleLevel {
                reps: params.reps,
                expected,
            });
        }
    }
    Ok(McEstimate::from_hits(
        hits,
        params.reps,
        params.seed,
        "tail",
    ))
}

/// Threshold-crossing data extracted from one queue path.
#[derive(Debug, Clone)]
pub struct CrossingRecord<S: Scalar> {
    pub p: S,
    /// Grid times (inherited from the path).
    pub times: Vec<S>,
    /// Last crossing time at or before t; 0 while no crossing has occurred.
    pub xi: Vec<S>,
    /// First crossing time at or after t; None past the last crossing.
    pub eta: Vec<Option<S>>,
    /// Index into `times` where the gap statistics start (first crossing).
    pub stat_start: usize,
    /// `(xi(t) - t) / h_p(t)` from `stat_start` on.
    pub lil_statistic: Vec<S>,
    /// `log(xi(t)/t) / (h_p(t)/t)` from `stat_start` on.
    pub log_ratio_statistic: Vec<S>,
}

impl<S: Scalar> CrossingRecord<S> {
    /// CSV export `t,xi,lil_stat`; the statistic column is empty before the
    /// first crossing.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,xi,lil_stat")?;
        for (i, (&t, &x)) in self.times.iter().zip(&self.xi).enumerate() {
            if i >= self.stat_start {
                writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e}",
                    t,
                    x,
                    self.lil_statistic[i - self.stat_start]
                )?;
            } else {
                writeln!(out, "{:.16e},{:.16e},", t, x)?;
            }
        }
        Ok(())
    }
}

/// Extracts last/first crossing processes of the threshold curve `f_p` and
/// the two gap statistics. The path grid must start above the family's
/// domain threshold.
pub fn extract_crossings<S: Scalar>(
    qp: &QueuePath<S>,
    fam: &ThresholdFamily<S>,
) -> Result<CrossingRecord<S>> {
    let floor = fam.s_min().max(S::of(core::f64::consts::E).exp());
    if !(qp.t_start > floor) {
        return Err(Error::domain(format!(
            "path grid starts at {} but the threshold family needs t > {floor}; \
             restrict the path first",
            qp.t_start
        )));
    }
    let n = qp.values.len();
    let times: Vec<S> = (0..n).map(|i| qp.time(i)).collect();
    let mut crossing = vec![false; n];
    for i in 0..n {
        crossing[i] = qp.values[i] >= fam.f_p(times[i])?;
    }
    let mut xi = Vec::with_capacity(n);
    let mut last = S::zero();
    let mut stat_start = None;
    for i in 0..n {
        if crossing[i] {
            last = times[i];
            if stat_start.is_none() {
                stat_start = Some(i);
            }
        }
        xi.push(last);
    }
    let mut eta = vec![None; n];
    let mut next: Option<S> = None;
    for i in (0..n).rev() {
        if crossing[i] {
            next = Some(times[i]);
        }
        eta[i] = next;
    }
    let stat_start = stat_start.unwrap_or(n);
    let use_h_p = fam.p > S::zero();
    let mut lil_statistic = Vec::with_capacity(n - stat_start);
    let mut log_ratio_statistic = Vec::with_capacity(n - stat_start);
    for i in stat_start..n {
        let t = times[i];
        let hp = if use_h_p {
            fam.h_p(t, RateMode::Asymptotic)?
        } else {
            S::nan()
        };
        lil_statistic.push((xi[i] - t) / hp);
        log_ratio_statistic.push((xi[i] / t).ln() / (hp / t));
    }
    Ok(CrossingRecord {
        p: fam.p,
        times,
        xi,
        eta,
        stat_start,
        lil_statistic,
        log_ratio_statistic,
    })
}

/// Which gap statistic the experiment tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LilBranch {
    /// p > 1: `(xi(t) - t) / h_p(t)`.
    Linear,
    /// p in (0, 1]: `log(xi(t)/t) / (h_p(t)/t)`.
    Logarithmic,
}

#[derive(Debug, Clone)]
pub struct LilOutcome<S: Scalar> {
    pub record: CrossingRecord<S>,
    pub branch: LilBranch,
    /// Running minimum of the branch statistic.
    pub statistic_running_min: S,
    /// Running maximum of `Q(t) / (log t)^{1/(2(1-H))}`.
    pub growth_running_max: S,
    /// The constant the growth statistic targets.
    pub growth_constant: S,
    pub t_start: S,
}

/// Desk-scale iterated-logarithm experiment: simulates the stationary path,
/// extracts crossings of `f_p`, and reports the running extremes of the gap
/// statistic and of the growth statistic. Statistics start at
/// `start_fraction * horizon` to clear the log-normalization transient.
pub fn lil_experiment<S: SimScalar>(
    fam: &ThresholdFamily<S>,
    horizon: S,
    dt: S,
    seed: u64,
    start_fraction: S,
) -> Result<LilOutcome<S>> {
    if !(fam.p > S::zero()) {
        return Err(Error::domain("the experiment needs p > 0"));
    }
    let ee = S::of(core::f64::consts::E).exp();
    if !(horizon > ee) {
        return Err(Error::domain("horizon too short: need log log horizon > 0"));
    }
    let h = fam.constants.h;
    // window sized for the largest level the experiment can reach
    let max_level =
        fam.f_p(horizon).unwrap_or(S::one()) + limsup_level_margin(&fam.constants, horizon);
    let window = WindowSpec::Auto {
        kappa: S::of(8.0),
        max_level,
    }
    .resolve(&fam.constants, dt)?;
    let qp = simulate_stationary(horizon, dt, window, h, seed)?;
    let t_start = (start_fraction * horizon)
        .max(fam.s_min() * S::of(1.01))
        .max(ee * S::of(1.01));
    let restricted = qp.restrict(t_start);
    let record = extract_crossings(&restricted, fam)?;

    let branch = if fam.p > S::one() {
        LilBranch::Linear
    } else {
        LilBranch::Logarithmic
    };
    let stats = match branch {
        LilBranch::Linear => &record.lil_statistic,
        LilBranch::Logarithmic => &record.log_ratio_statistic,
    };
    let statistic_running_min = stats.iter().copied().fold(S::infinity(), S::min);

    let exponent = S::one() / (S::of(2.0) * (S::one() - h.value()));
    let mut growth_running_max = S::neg_infinity();
    for (i, &q) in restricted.values.iter().enumerate() {
        let t = restricted.time(i);
        growth_running_max = growth_running_max.max(q / t.ln().powf(exponent));
    }
    Ok(LilOutcome {
        record,
        branch,
        statistic_running_min,
        growth_running_max,
        growth_constant: crate::asymptotics::limsup_constant(&fam.constants),
        t_start,
    })
}

// crude upper margin for levels the growth statistic can visit
fn limsup_level_margin<S: Scalar>(k: &ModelConstants<S>, horizon: S) -> S {
    let exponent = S::one() / (S::of(2.0) * (S::one() - k.h.value()));
    crate::asymptotics::limsup_constant(k) * horizon.ln().powf(exponent)
}
