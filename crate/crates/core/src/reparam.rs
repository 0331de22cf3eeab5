//! Trajectory reparametrization by the variable `s = |A^(1/2) u|^2 - s0`.
//!
//! On a window where `psi(t) = |A^(1/2) u(t)|^2 - s0` is strictly monotone the
//! phase curve can be rewritten as `(z(s), w(s)) = (A^(1/2) u, u')` at the
//! matching time. The pair solves
//!
//! ```text
//!   z' =  A^(1/2) w / d(s),      w' = -c(s) A^(1/2) z / d(s),
//!   d(s) = 2 <A^(1/2) z, w>,     c(s) = m(s + s0),
//! ```
//!
//! and time is recovered constructively as `t(s) = int_0^s d sigma / d(sigma)`.
//! When `psi` decreases, the module tracks `s = -psi` instead: the equations
//! keep the same form with the oriented denominator `or * 2 <A^(1/2) z, w>`
//! and the reversed coefficient `m(s0 - s)`, which is what the reflection
//! `u1 -> -u1` produces. The flag `orientation` records the branch.
//!
//! The system is singular at `s = 0` when `<A u0, u1> = 0`; in that case the
//! denominator behaves like `2 sqrt(beta s)` with `beta = psi''(0)/2`, and
//! stepping starts from a short Taylor expansion of the time system instead.

use crate::error::{Error, Result};
use crate::integrate::{initial_signature, Trajectory};
use crate::interp;
use crate::mollify::Coefficient;
use crate::quadrature::cumtrapz;
use crate::spectral::{inner, ModeVector, SpectralOperator};
use serde::Serialize;

/// One point of the reparametrized curve.
#[derive(Debug, Clone)]
pub struct SState {
    pub s: f64,
    /// `A^(1/2) u` at the matching time.
    pub z: ModeVector,
    /// `u'` at the matching time.
    pub w: ModeVector,
}

/// The reparametrized curve on a monotone window, with the oriented
/// denominator and the recovered time aligned with the states.
#[derive(Debug, Clone)]
pub struct STrajectory {
    pub states: Vec<SState>,
    /// +1 when psi increases on the window, -1 when it decreases.
    pub orientation: i8,
    /// Physical time of each state; t(0) = 0, strictly increasing.
    pub recovered_time: Vec<f64>,
    /// Oriented denominator `or * 2 <A^(1/2) z, w>` per state.
    pub denom: Vec<f64>,
    /// `<A u0, u1>` of the source data.
    pub d1: f64,
    /// `psi''(0) / 2` of the source data.
    pub beta: f64,
    /// Set when stepping stopped early at a denominator-degeneracy event.
    pub truncated_at: Option<f64>,
}

impl STrajectory {
    pub fn s_grid(&self) -> Vec<f64> {
        self.states.iter().map(|st| st.s).collect()
    }

    /// Measured leading constant of the startup estimate: the minimum of
    /// `d(s) / (2 sqrt(s))` over states with `0 < s <= s_cut`.
    pub fn measured_gamma1(&self, s_cut: f64) -> Option<f64> {
        let mut best = f64::INFINITY;
        for (st, &d) in self.states.iter().zip(&self.denom) {
            if st.s > 0.0 && st.s <= s_cut {
                best = best.min(d / (2.0 * st.s.sqrt()));
            }
        }
        if best.is_finite() {
            Some(best)
        } else {
            None
        }
    }
}

/// Startup data for the singular origin: `d1 = <A u0, u1>`,
/// `beta = psi''(0)/2`, and the handover point `s_start` below which the
/// square-root asymptotics replace ODE stepping.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StartupParams {
    pub d1: f64,
    pub beta: f64,
    pub s_start: f64,
}

impl StartupParams {
    pub fn new(d1: f64, beta: f64, s_start: f64) -> Result<Self> {
        if d1.abs() + beta.abs() == 0.0 {
            return Err(Error::DegenerateData { magnitude: 0.0, tol: 0.0 });
        }
        if !(s_start > 0.0) {
            return Err(Error::param("s_start", "must be > 0"));
        }
        Ok(StartupParams { d1, beta, s_start })
    }

    pub fn from_data(
        op: &SpectralOperator,
        m: &crate::modulus::Nonlinearity,
        u0: &ModeVector,
        u1: &ModeVector,
        s_start: f64,
    ) -> Result<Self> {
        let (psi1, psi2) = initial_signature(op, m, u0, u1)?;
        StartupParams::new(0.5 * psi1, 0.5 * psi2, s_start)
    }
}

/// Stepping configuration for the s-variable integrator. The handover point
/// defaults to `16 * ds`, where the fixed-step scheme would otherwise lose
/// its order against the `1/sqrt(s)` right-hand side.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SIntegratorConfig {
    pub ds: f64,
    pub s_start: Option<f64>,
}

impl SIntegratorConfig {
    pub fn new(ds: f64) -> Result<Self> {
        if !(ds > 0.0) {
            return Err(Error::param("ds", "must be > 0"));
        }
        Ok(SIntegratorConfig { ds, s_start: None })
    }

    pub fn with_s_start(mut self, s_start: f64) -> Self {
        self.s_start = Some(s_start);
        self
    }

    fn handover(&self) -> f64 {
        self.s_start.unwrap_or(16.0 * self.ds)
    }
}

/// Orientation of the monotone window implied by the initial signature:
/// the sign of `psi'` just after 0, i.e. of `d1` when nonzero, else of `beta`.
pub fn orientation_of(d1: f64, beta: f64) -> Result<i8> {
    if d1 > 0.0 {
        Ok(1)
    } else if d1 < 0.0 {
        Ok(-1)
    } else if beta > 0.0 {
        Ok(1)
    } else if beta < 0.0 {
        Ok(-1)
    } else {
        Err(Error::DegenerateData { magnitude: 0.0, tol: 0.0 })
    }
}

/// Right-hand side of the forward-oriented system at one state:
/// `dz = A^(1/2) w / d`, `dw = -c(s) A^(1/2) z / d` with
/// `d = 2 <A^(1/2) z, w>`. Errors when the denominator is not positive.
pub fn s_rhs(
    op: &SpectralOperator,
    state: &SState,
    c: &dyn Coefficient,
) -> Result<(ModeVector, ModeVector)> {
    oriented_rhs(op, state.s, &state.z, &state.w, c, 1)
}

fn oriented_denominator(
    op: &SpectralOperator,
    z: &ModeVector,
    w: &ModeVector,
    orientation: i8,
) -> Result<f64> {
    let half_z = op.apply_power(0.5, z)?;
    Ok(orientation as f64 * 2.0 * inner(&half_z, w)?)
}

fn oriented_rhs(
    op: &SpectralOperator,
    s: f64,
    z: &ModeVector,
    w: &ModeVector,
    c: &dyn Coefficient,
    orientation: i8,
) -> Result<(ModeVector, ModeVector)> {
    let d = oriented_denominator(op, z, w, orientation)?;
    if !(d > 0.0) {
        return Err(Error::SingularDenominator { s, d });
    }
    let dz = op.apply_power(0.5, w)?.scaled(1.0 / d);
    let dw = op.apply_power(0.5, z)?.scaled(-c.eval(s) / d);
    Ok((dz, dw))
}

/// Integrates the s-system directly from the initial data.
///
/// With `d1 != 0` stepping starts at `s = 0` where the denominator is
/// `2 |d1| > 0`. With `d1 = 0` and a sign-compatible `beta`, the first point
/// at `s_start` comes from a single order-t^2 Taylor step of the time system
/// through `t1 = sqrt(s_start / |beta|)`; fixed-step RK4 continues from there.
/// The caller supplies the coefficient already matching the orientation
/// (`ExtendedCoefficient::new` for +1, `::reflected` for -1).
///
/// Stepping stops early, recording `truncated_at`, when the denominator falls
/// to half of its startup lower-bound prediction.
pub fn integrate_s(
    op: &SpectralOperator,
    c: &dyn Coefficient,
    startup: &StartupParams,
    z0: &ModeVector,
    w0: &ModeVector,
    s_max: f64,
    cfg: &SIntegratorConfig,
) -> Result<STrajectory> {
    if z0.len() != op.dim() || w0.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: z0.len().max(w0.len()) });
    }
    if !(s_max > 0.0) {
        return Err(Error::param("s_max", "must be > 0"));
    }
    if startup.d1.abs() + startup.beta.abs() == 0.0 {
        return Err(Error::DegenerateData { magnitude: 0.0, tol: 0.0 });
    }
    let orientation = orientation_of(startup.d1, startup.beta)?;
    let b_eff = orientation as f64 * startup.beta; // oriented beta; > 0 on the startup path

    let mut states: Vec<SState> = Vec::new();
    let mut denom: Vec<f64> = Vec::new();
    let mut truncated_at = None;

    // Lower-bound guard for a mid-run degeneracy event: half of the predicted
    // startup constant. For d1 != 0 the prediction is scaled so the guard
    // stays below |d1| on the whole range.
    let gamma1_guess = if startup.d1 == 0.0 { b_eff.sqrt() } else { startup.d1.abs() / s_max.sqrt() };
    let guard = |s: f64| 0.5 * gamma1_guess * s.sqrt();

    let (mut s, mut z, mut w) = if startup.d1 != 0.0 {
        let d0 = oriented_denominator(op, z0, w0, orientation)?;
        states.push(SState { s: 0.0, z: z0.clone(), w: w0.clone() });
        denom.push(d0);
        (0.0, z0.clone(), w0.clone())
    } else {
        if !(b_eff > 0.0) {
            // d1 = 0 and beta pointing against the orientation cannot happen
            // (orientation_of picked the sign of beta); defensive branch.
            return Err(Error::NonIntegrableSingularity { beta: startup.beta });
        }
        let s_start = cfg.handover().min(0.5 * s_max);
        states.push(SState { s: 0.0, z: z0.clone(), w: w0.clone() });
        denom.push(0.0);
        // Taylor step of the time system to order t^2, expressed through
        // A-powers of (z0, w0): u'' (0) = -c(0) A u0, u'''(0) = -c(0) A u1.
        let t1 = (s_start / b_eff).sqrt();
        let c0 = c.eval(0.0);
        let half_w0 = op.apply_power(0.5, w0)?;
        let a_z0 = op.apply_power(1.0, z0)?;
        let half_z0 = op.apply_power(0.5, z0)?;
        let a_w0 = op.apply_power(1.0, w0)?;
        let z1 = z0.axpy(t1, &half_w0).axpy(-0.5 * t1 * t1 * c0, &a_z0);
        let w1 = w0.axpy(-t1 * c0, &half_z0).axpy(-0.5 * t1 * t1 * c0, &a_w0);
        let d1s = oriented_denominator(op, &z1, &w1, orientation)?;
        if !(d1s > 0.0) {
            return Err(Error::SingularDenominator { s: s_start, d: d1s });
        }
        states.push(SState { s: s_start, z: z1.clone(), w: w1.clone() });
        denom.push(d1s);
        (s_start, z1, w1)
    };

    let ds = cfg.ds;
    'stepping: while s < s_max - 1e-14 * s_max {
        let step = ds.min(s_max - s);
        // Classical RK4 stage sweep; any singular stage denominator is a
        // degeneracy event that truncates the run.
        let stages = || -> Result<(ModeVector, ModeVector)> {
            let (k1z, k1w) = oriented_rhs(op, s, &z, &w, c, orientation)?;
            let (k2z, k2w) = oriented_rhs(
                op,
                s + 0.5 * step,
                &z.axpy(0.5 * step, &k1z),
                &w.axpy(0.5 * step, &k1w),
                c,
                orientation,
            )?;
            let (k3z, k3w) = oriented_rhs(
                op,
                s + 0.5 * step,
                &z.axpy(0.5 * step, &k2z),
                &w.axpy(0.5 * step, &k2w),
                c,
                orientation,
            )?;
            let (k4z, k4w) = oriented_rhs(
                op,
                s + step,
                &z.axpy(step, &k3z),
                &w.axpy(step, &k3w),
                c,
                orientation,
            )?;
            let dz = k1z
                .axpy(2.0, &k2z)
                .axpy(2.0, &k3z)
                .axpy(1.0, &k4z)
                .scaled(step / 6.0);
            let dw = k1w
                .axpy(2.0, &k2w)
                .axpy(2.0, &k3w)
                .axpy(1.0, &k4w)
                .scaled(step / 6.0);
            Ok((dz, dw))
        };
        let (dz, dw) = match stages() {
            Ok(increments) => increments,
            Err(Error::SingularDenominator { .. }) => {
                truncated_at = Some(s);
                break 'stepping;
            }
            Err(e) => return Err(e),
        };
        let z_next = z.axpy(1.0, &dz);
        let w_next = w.axpy(1.0, &dw);
        let s_next = s + step;
        let d_next = oriented_denominator(op, &z_next, &w_next, orientation)?;
        if d_next <= guard(s_next) {
            truncated_at = Some(s_next);
            break 'stepping;
        }
        if !z_next.is_finite() || !w_next.is_finite() {
            truncated_at = Some(s);
            break 'stepping;
        }
        s = s_next;
        z = z_next;
        w = w_next;
        states.push(SState { s, z: z.clone(), w: w.clone() });
        denom.push(d_next);
    }

    let mut traj = STrajectory {
        states,
        orientation,
        recovered_time: Vec::new(),
        denom,
        d1: startup.d1,
        beta: startup.beta,
        truncated_at,
    };
    traj.recovered_time = recover_time(&traj)?;
    Ok(traj)
}

/// Residuals of the denominator identity
/// `d(s)/2 = sqrt(d1^2 + or * int_0^s (|A^(1/2) w|^2 - c |A^(1/2) z|^2))`,
/// one per state. The radicand is clamped at zero; a dip below -1e-10 is
/// reported as a violation.
#[derive(Debug, Clone, Serialize)]
pub struct DenominatorIdentityReport {
    pub residuals: Vec<f64>,
    pub worst: f64,
    pub violation: Option<(f64, f64)>,
}

pub fn denominator_identity(
    op: &SpectralOperator,
    traj: &STrajectory,
    c: &dyn Coefficient,
    d1: f64,
) -> Result<DenominatorIdentityReport> {
    let s: Vec<f64> = traj.s_grid();
    let mut integrand = Vec::with_capacity(s.len());
    for st in &traj.states {
        let half_w = op.apply_power(0.5, &st.w)?;
        let half_z = op.apply_power(0.5, &st.z)?;
        integrand.push(half_w.norm_sq() - c.eval(st.s) * half_z.norm_sq());
    }
    let q = cumtrapz(&s, &integrand);
    let or = traj.orientation as f64;
    let mut residuals = Vec::with_capacity(s.len());
    let mut violation = None;
    let mut worst = 0.0f64;
    for i in 0..s.len() {
        let radicand = d1 * d1 + or * q[i];
        if radicand < -1e-10 && violation.is_none() {
            violation = Some((s[i], radicand));
        }
        let rhs = radicand.max(0.0).sqrt();
        let res = (0.5 * traj.denom[i] - rhs).abs();
        worst = worst.max(res);
        residuals.push(res);
    }
    Ok(DenominatorIdentityReport { residuals, worst, violation })
}

/// Recovers physical time by quadrature of `1/d` along the curve.
///
/// The integral is computed in the variable `tau = sqrt(s)`, where the
/// integrand `2 tau / d(tau^2)` stays bounded both for a regular origin
/// (`d(0) = 2|d1| > 0`) and for the singular startup (`d ~ 2 sqrt(beta s)`,
/// where the integrand tends to `1/sqrt(beta)`). A grid starting at
/// `s_0 > 0` gets the closed-form offset `t(s_0) = sqrt(s_0 / beta)`.
pub fn recover_time(traj: &STrajectory) -> Result<Vec<f64>> {
    let s = traj.s_grid();
    if s.is_empty() {
        return Err(Error::param("traj", "empty trajectory"));
    }
    let b_eff = traj.orientation as f64 * traj.beta;
    let mut h = Vec::with_capacity(s.len());
    for (i, (&si, &di)) in s.iter().zip(&traj.denom).enumerate() {
        if si > 0.0 {
            if !(di > 0.0) {
                return Err(Error::SingularDenominator { s: si, d: di });
            }
            h.push(2.0 * si.sqrt() / di);
        } else if di > 0.0 {
            h.push(0.0);
        } else {
            // Singular origin: limit of 2 tau / (2 sqrt(beta) tau).
            if !(b_eff > 0.0) {
                return Err(Error::NonIntegrableSingularity { beta: traj.beta });
            }
            h.push(1.0 / b_eff.sqrt());
        }
        let _ = i;
    }
    let mut t = Vec::with_capacity(s.len());
    let t0 = if s[0] > 0.0 {
        if traj.d1 == 0.0 && b_eff > 0.0 {
            (s[0] / b_eff).sqrt()
        } else {
            return Err(Error::GridMismatch {
                reason: "grid must start at s = 0 unless the startup is asymptotic".into(),
            });
        }
    } else {
        0.0
    };
    t.push(t0);
    for i in 1..s.len() {
        let tau_prev = s[i - 1].sqrt();
        let tau = s[i].sqrt();
        let dt = (tau - tau_prev) * 0.5 * (h[i - 1] + h[i]);
        t.push(t[i - 1] + dt);
    }
    Ok(t)
}

/// Resampling options for [`to_s_trajectory`].
#[derive(Debug, Clone, Copy)]
pub struct ResampleOptions {
    /// Number of cells of the uniform s-grid (points = n_cells + 1).
    pub n_cells: usize,
    /// Fraction of the detected monotone span to keep; the parametrization
    /// is ill-conditioned against the turning point where `psi'` vanishes.
    pub window_margin: f64,
}

impl Default for ResampleOptions {
    fn default() -> Self {
        ResampleOptions { n_cells: 1024, window_margin: 0.98 }
    }
}

/// Reparametrizes a time trajectory onto a uniform s-grid over its first
/// monotone window (default options).
pub fn to_s_trajectory(traj: &Trajectory) -> Result<STrajectory> {
    to_s_trajectory_with(traj, &ResampleOptions::default())
}

/// End time and orientation of the first monotone window of
/// `psi(t) = |A^(1/2) u(t)|^2 - s0` along the sampled trajectory.
pub fn monotone_window_end(traj: &Trajectory) -> Result<(f64, i8)> {
    let (window, orientation) = monotone_window(traj)?;
    Ok((traj.samples[window.idx_end].time, orientation))
}

pub fn to_s_trajectory_with(traj: &Trajectory, opts: &ResampleOptions) -> Result<STrajectory> {
    let (window, orientation) = monotone_window(traj)?;
    let sigma_end = opts.window_margin * window.sigma.last().copied().unwrap();
    let n = opts.n_cells.max(2);
    let grid: Vec<f64> = (0..=n).map(|j| sigma_end * j as f64 / n as f64).collect();
    resample_on(traj, &window, orientation, &grid)
}

/// Reparametrizes onto a caller-supplied strictly increasing s-grid
/// (which must start at 0 and stay inside the monotone window).
pub fn to_s_trajectory_on_grid(traj: &Trajectory, s_grid: &[f64]) -> Result<STrajectory> {
    let (window, orientation) = monotone_window(traj)?;
    let max = window.sigma.last().copied().unwrap();
    if s_grid.is_empty() || s_grid[0] != 0.0 {
        return Err(Error::GridMismatch { reason: "s-grid must start at 0".into() });
    }
    if s_grid.last().copied().unwrap() > max {
        return Err(Error::GridMismatch {
            reason: format!("s-grid exceeds the monotone span {max}"),
        });
    }
    resample_on(traj, &window, orientation, s_grid)
}

/// Detected monotone span of the time trajectory: sample indices, the
/// oriented profile `sigma_i = or * psi(t_i)`, and exact slopes.
struct MonotoneWindow {
    idx_end: usize,
    sigma: Vec<f64>,
    /// d sigma / d t at each retained sample (exact, from the equation).
    slope: Vec<f64>,
}

const PSI_HYSTERESIS: f64 = 1e-12;

fn monotone_window(traj: &Trajectory) -> Result<(MonotoneWindow, i8)> {
    let s_vals = traj.s_values();
    if s_vals.len() < 3 {
        return Err(Error::param("traj", "need at least three samples"));
    }
    let psi: Vec<f64> = s_vals.iter().map(|s| s - s_vals[0]).collect();
    // Orientation: sign of the first significant discrete difference.
    let mut orientation: i8 = 0;
    for w in psi.windows(2) {
        let diff = w[1] - w[0];
        if diff.abs() > PSI_HYSTERESIS {
            orientation = if diff > 0.0 { 1 } else { -1 };
            break;
        }
    }
    if orientation == 0 {
        return Err(Error::StationaryData);
    }
    let or = orientation as f64;
    // Window ends at the first difference that stops moving forward.
    let mut idx_end = psi.len() - 1;
    let mut seen_significant = false;
    for (i, w) in psi.windows(2).enumerate() {
        let fwd = or * (w[1] - w[0]);
        if fwd > PSI_HYSTERESIS {
            seen_significant = true;
        } else if seen_significant && fwd <= PSI_HYSTERESIS {
            idx_end = i;
            break;
        } else if !seen_significant && fwd < -PSI_HYSTERESIS {
            return Err(Error::StationaryData);
        }
    }
    let mut sigma: Vec<f64> = psi[..=idx_end].iter().map(|p| or * p).collect();
    // Enforce strict increase sample-to-sample for invertibility.
    let mut cut = sigma.len();
    for i in 1..sigma.len() {
        if sigma[i] <= sigma[i - 1] {
            cut = i;
            break;
        }
    }
    sigma.truncate(cut);
    if sigma.len() < 3 {
        return Err(Error::StationaryData);
    }
    let idx_end = sigma.len() - 1;
    // Exact slope: sigma'(t) = or * 2 <A u, u'>.
    let mut slope = Vec::with_capacity(idx_end + 1);
    for st in &traj.samples[..=idx_end] {
        let au = traj.operator.apply_power(1.0, &st.position)?;
        slope.push(or * 2.0 * inner(&au, &st.velocity)?);
    }
    Ok((MonotoneWindow { idx_end, sigma, slope }, orientation))
}

fn resample_on(
    traj: &Trajectory,
    window: &MonotoneWindow,
    orientation: i8,
    s_grid: &[f64],
) -> Result<STrajectory> {
    let op = &traj.operator;
    let m = &traj.nonlinearity;
    let samples = &traj.samples[..=window.idx_end];
    let times: Vec<f64> = samples.iter().map(|st| st.time).collect();
    let k = op.dim();
    let lambda_sq: Vec<f64> = op.eigenvalues().iter().map(|l| l * l).collect();

    // Accelerations at the samples give exact derivative data for the
    // componentwise cubic interpolation of (u, u').
    let mut acc: Vec<Vec<f64>> = Vec::with_capacity(samples.len());
    for st in samples {
        let s: f64 = st
            .position
            .iter()
            .zip(&lambda_sq)
            .map(|(c, l2)| l2 * c * c)
            .sum();
        let mv = m.eval(s);
        acc.push(
            st.position
                .iter()
                .zip(&lambda_sq)
                .map(|(c, l2)| -mv * l2 * c)
                .collect(),
        );
    }

    let mut states = Vec::with_capacity(s_grid.len());
    let mut denom = Vec::with_capacity(s_grid.len());
    let mut rec_time = Vec::with_capacity(s_grid.len());
    let mut cell = 0usize;
    for &target in s_grid {
        // Locate the sample cell containing the target (grids are increasing,
        // so the search pointer only moves forward).
        while cell + 1 < window.sigma.len() - 1 && window.sigma[cell + 1] < target {
            cell += 1;
        }
        let (i0, i1) = (cell, cell + 1);
        let (x0, x1) = (times[i0], times[i1]);
        let (y0, y1) = (window.sigma[i0], window.sigma[i1]);
        let t_at = if target <= y0 {
            x0
        } else if target >= y1 {
            x1
        } else {
            let (d0, d1) = interp::limit_monotone(y0, y1, window.slope[i0], window.slope[i1], x1 - x0);
            interp::invert_monotone_cell(x0, x1, y0, y1, d0, d1, target)
        };
        // Componentwise cubic interpolation of position and velocity with
        // exact endpoint derivatives (u' = v, v' = a).
        let mut u = Vec::with_capacity(k);
        let mut v = Vec::with_capacity(k);
        #[allow(clippy::needless_range_loop)]
        for j in 0..k {
            let uj = interp::hermite(
                x0,
                x1,
                samples[i0].position.get(j),
                samples[i1].position.get(j),
                samples[i0].velocity.get(j),
                samples[i1].velocity.get(j),
                t_at,
            );
            let vj = interp::hermite(
                x0,
                x1,
                samples[i0].velocity.get(j),
                samples[i1].velocity.get(j),
                acc[i0][j],
                acc[i1][j],
                t_at,
            );
            u.push(uj);
            v.push(vj);
        }
        let u = ModeVector::from(u);
        let w = ModeVector::from(v);
        let z = op.apply_power(0.5, &u)?;
        let d = oriented_denominator(op, &z, &w, orientation)?;
        states.push(SState { s: target, z, w });
        denom.push(d);
        rec_time.push(t_at);
    }

    let (psi1, psi2) = initial_signature(
        op,
        m,
        &traj.samples[0].position,
        &traj.samples[0].velocity,
    )?;
    Ok(STrajectory {
        states,
        orientation,
        recovered_time: rec_time,
        denom,
        d1: 0.5 * psi1,
        beta: 0.5 * psi2,
        truncated_at: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{integrate, IntegratorConfig, Scheme};
    use crate::modulus::Nonlinearity;
    use crate::mollify::ExtendedCoefficient;

    fn op1() -> SpectralOperator {
        SpectralOperator::new(vec![1.0]).unwrap()
    }

    #[test]
    fn rhs_hand_values() {
        let op = op1();
        let state = SState {
            s: 0.0,
            z: ModeVector::from(vec![1.0]),
            w: ModeVector::from(vec![1.0]),
        };
        let c = |_s: f64| 1.0;
        let (dz, dw) = s_rhs(&op, &state, &c).unwrap();
        assert_eq!(dz.get(0), 0.5);
        assert_eq!(dw.get(0), -0.5);
    }

    #[test]
    fn rhs_rejects_vanishing_denominator() {
        let op = op1();
        let state = SState {
            s: 0.1,
            z: ModeVector::from(vec![1.0]),
            w: ModeVector::from(vec![0.0]),
        };
        let c = |_s: f64| 1.0;
        assert!(matches!(
            s_rhs(&op, &state, &c),
            Err(Error::SingularDenominator { .. })
        ));

        // Orthogonal configuration on two modes.
        let op2 = SpectralOperator::new(vec![1.0, 2.0]).unwrap();
        let state = SState {
            s: 0.0,
            z: ModeVector::from(vec![1.0, 0.0]),
            w: ModeVector::from(vec![0.0, 1.0]),
        };
        assert!(s_rhs(&op2, &state, &c).is_err());
    }

    #[test]
    fn recover_time_constant_denominator() {
        let n = 50;
        let states: Vec<SState> = (0..=n)
            .map(|i| SState {
                s: i as f64 / n as f64,
                z: ModeVector::from(vec![1.0]),
                w: ModeVector::from(vec![1.0]),
            })
            .collect();
        let denom = vec![2.0; states.len()];
        let traj = STrajectory {
            states,
            orientation: 1,
            recovered_time: vec![],
            denom,
            d1: 1.0,
            beta: 0.0,
            truncated_at: None,
        };
        let t = recover_time(&traj).unwrap();
        for (i, &ti) in t.iter().enumerate() {
            let s = i as f64 / n as f64;
            assert!((ti - s / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn recover_time_square_root_denominator() {
        // d(s) = 2 sqrt(s) corresponds to beta = 1 and t(s) = sqrt(s).
        let n = 400;
        let states: Vec<SState> = (0..=n)
            .map(|i| SState {
                s: i as f64 / n as f64,
                z: ModeVector::from(vec![1.0]),
                w: ModeVector::from(vec![1.0]),
            })
            .collect();
        let denom: Vec<f64> = (0..=n).map(|i| 2.0 * (i as f64 / n as f64).sqrt()).collect();
        let traj = STrajectory {
            states,
            orientation: 1,
            recovered_time: vec![],
            denom,
            d1: 0.0,
            beta: 1.0,
            truncated_at: None,
        };
        let t = recover_time(&traj).unwrap();
        for (i, &ti) in t.iter().enumerate() {
            let s = i as f64 / n as f64;
            assert!((ti - s.sqrt()).abs() < 1e-10, "t({s}) = {ti}");
        }
    }

    #[test]
    fn constant_configuration_keeps_radicand_constant() {
        // |A^(1/2) w|^2 = c |A^(1/2) z|^2 makes the integrand vanish.
        let states: Vec<SState> = (0..=10)
            .map(|i| SState {
                s: i as f64 * 0.1,
                z: ModeVector::from(vec![1.0]),
                w: ModeVector::from(vec![1.0]),
            })
            .collect();
        let denom = vec![2.0; states.len()];
        let traj = STrajectory {
            states,
            orientation: 1,
            recovered_time: vec![],
            denom,
            d1: 1.0,
            beta: 0.0,
            truncated_at: None,
        };
        let c = |_s: f64| 1.0;
        let report = denominator_identity(&op1(), &traj, &c, 1.0).unwrap();
        assert!(report.worst < 1e-14);
        assert!(report.violation.is_none());
    }

    #[test]
    fn monotone_window_of_linear_solution() {
        // u0 = u1 = 1, m = 1: s(t) = 1 + sin 2t, monotone until t = pi/4.
        let op = op1();
        let m = Nonlinearity::constant(1.0).unwrap();
        let cfg = IntegratorConfig::new(Scheme::StormerVerlet, 1e-4, 2.0, 1).unwrap();
        let traj = integrate(
            &op,
            &m,
            &ModeVector::from(vec![1.0]),
            &ModeVector::from(vec![1.0]),
            &cfg,
        )
        .unwrap();
        let st = to_s_trajectory(&traj).unwrap();
        assert_eq!(st.orientation, 1);
        // The detected span reaches sin(2t) = 1 at t = pi/4; the default 2%
        // margin ends the grid at s = 0.98, i.e. t = asin(0.98) / 2.
        let s_end = st.states.last().unwrap().s;
        assert!((s_end - 0.98).abs() < 1e-3, "s_end = {s_end}");
        let t_end = *st.recovered_time.last().unwrap();
        assert!((t_end - 0.5 * 0.98f64.asin()).abs() < 1e-3, "t_end = {t_end}");
        // s(t) = sin 2t on the window.
        for (st_point, &t) in st.states.iter().zip(&st.recovered_time) {
            assert!((st_point.s - (2.0 * t).sin()).abs() < 1e-6);
        }
    }

    #[test]
    fn orientation_flips_with_velocity_sign() {
        let op = op1();
        let m = Nonlinearity::constant(1.0).unwrap();
        let cfg = IntegratorConfig::new(Scheme::StormerVerlet, 1e-4, 1.2, 1).unwrap();
        let up = integrate(
            &op,
            &m,
            &ModeVector::from(vec![1.0]),
            &ModeVector::from(vec![1.0]),
            &cfg,
        )
        .unwrap();
        let down = integrate(
            &op,
            &m,
            &ModeVector::from(vec![1.0]),
            &ModeVector::from(vec![-1.0]),
            &cfg,
        )
        .unwrap();
        let st_up = to_s_trajectory(&up).unwrap();
        let st_down = to_s_trajectory(&down).unwrap();
        assert_eq!(st_up.orientation, 1);
        assert_eq!(st_down.orientation, -1);
        // |s|-profiles coincide by time reflection.
        let n = st_up.states.len().min(st_down.states.len());
        for i in 0..n {
            let a = &st_up.states[i];
            let b = &st_down.states[i];
            if a.s == b.s {
                assert!((a.z.get(0) - b.z.get(0)).abs() < 1e-8);
                assert!((a.w.get(0) + b.w.get(0)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn stationary_data_is_rejected() {
        // A zero-frequency mode with m(0) = 0 sits still: psi is identically 0.
        let op = SpectralOperator::new(vec![0.0, 1.0]).unwrap();
        let m = Nonlinearity::affine(0.0, 1.0).unwrap();
        let cfg = IntegratorConfig::new(Scheme::StormerVerlet, 1e-3, 0.5, 1).unwrap();
        let traj = integrate(
            &op,
            &m,
            &ModeVector::from(vec![1.0, 0.0]),
            &ModeVector::zeros(2),
            &cfg,
        )
        .unwrap();
        assert!(matches!(to_s_trajectory(&traj), Err(Error::StationaryData)));
    }

    #[test]
    fn integrate_s_regular_start_matches_time_solution() {
        // u0 = u1 = 1, m = 1: d1 = 1, regular start at s = 0.
        let op = op1();
        let m = Nonlinearity::constant(1.0).unwrap();
        let cfg_t = IntegratorConfig::new(Scheme::StormerVerlet, 1e-4, 1.2, 1).unwrap();
        let time_traj = integrate(
            &op,
            &m,
            &ModeVector::from(vec![1.0]),
            &ModeVector::from(vec![1.0]),
            &cfg_t,
        )
        .unwrap();

        let s_max = 0.9;
        let startup = StartupParams::from_data(
            &op,
            &m,
            &ModeVector::from(vec![1.0]),
            &ModeVector::from(vec![1.0]),
            1e-3,
        )
        .unwrap();
        let c = ExtendedCoefficient::new(m.clone(), 1.0, s_max).unwrap();
        let cfg_s = SIntegratorConfig::new(2.5e-4).unwrap();
        let direct = integrate_s(
            &op,
            &c,
            &startup,
            &ModeVector::from(vec![1.0]),
            &ModeVector::from(vec![1.0]),
            s_max,
            &cfg_s,
        )
        .unwrap();
        assert!(direct.truncated_at.is_none());

        let grid = direct.s_grid();
        let resampled = to_s_trajectory_on_grid(&time_traj, &grid).unwrap();
        let mut worst: f64 = 0.0;
        for (a, b) in direct.states.iter().zip(&resampled.states) {
            worst = worst.max((a.z.get(0) - b.z.get(0)).abs());
            worst = worst.max((a.w.get(0) - b.w.get(0)).abs());
        }
        assert!(worst < 1e-6, "sup deviation {worst}");
    }

    #[test]
    fn integrate_s_reflected_branch() {
        // u0 = 1, u1 = 0, m = 1: psi = cos^2 t - 1 decreases; the tracked
        // variable is sigma = sin^2 t with z = sqrt(1 - sigma), w = -sqrt(sigma).
        let op = op1();
        let m = Nonlinearity::constant(1.0).unwrap();
        let startup = StartupParams::from_data(
            &op,
            &m,
            &ModeVector::from(vec![1.0]),
            &ModeVector::from(vec![0.0]),
            1e-4,
        )
        .unwrap();
        assert_eq!(startup.d1, 0.0);
        assert_eq!(startup.beta, -1.0);
        assert_eq!(orientation_of(startup.d1, startup.beta).unwrap(), -1);

        let s_max = 0.9;
        let c = ExtendedCoefficient::reflected(m, 1.0, s_max).unwrap();
        let cfg_s = SIntegratorConfig::new(5e-5).unwrap();
        let traj = integrate_s(
            &op,
            &c,
            &startup,
            &ModeVector::from(vec![1.0]),
            &ModeVector::from(vec![0.0]),
            s_max,
            &cfg_s,
        )
        .unwrap();
        assert_eq!(traj.orientation, -1);
        for st in traj.states.iter().skip(1).step_by(500) {
            assert!((st.z.get(0) - (1.0 - st.s).sqrt()).abs() < 1e-4, "z at s={}", st.s);
            assert!((st.w.get(0) + st.s.sqrt()).abs() < 1e-4, "w at s={}", st.s);
        }
        // Recovered time inverts sigma = sin^2 t.
        for (st, &t) in traj.states.iter().zip(&traj.recovered_time).skip(1).step_by(700) {
            assert!((st.s - t.sin().powi(2)).abs() < 2e-4, "s={} t={}", st.s, t);
        }
    }

    #[test]
    fn integrate_s_rejects_degenerate_pair() {
        // Same-eigenvalue pair with m(s) = s: both startup quantities vanish.
        let op = SpectralOperator::new(vec![1.0, 1.0]).unwrap();
        let m = Nonlinearity::affine(0.0, 1.0).unwrap();
        let r = StartupParams::from_data(
            &op,
            &m,
            &ModeVector::unit(1, 2),
            &ModeVector::unit(2, 2),
            1e-3,
        );
        assert!(matches!(r, Err(Error::DegenerateData { .. })));
    }

    #[test]
    fn startup_denominator_matches_asymptotics_near_zero() {
        // D1 = 0, beta = 1: d(s)/(2 sqrt(beta s)) -> 1 as s -> 0. Checked on
        // a geometric grid reaching 1e-4 of the working range.
        let op = op1();
        let m = Nonlinearity::constant(1.0).unwrap();
        let cfg = IntegratorConfig::new(Scheme::StormerVerlet, 1e-4, 1.5, 1).unwrap();
        let traj = integrate(
            &op,
            &m,
            &ModeVector::from(vec![0.0]),
            &ModeVector::from(vec![1.0]),
            &cfg,
        )
        .unwrap();
        let s_max = 0.9;
        let mut grid = vec![0.0];
        for i in 0..=40 {
            grid.push(s_max * 1e-6 * 1e6f64.powf(i as f64 / 40.0));
        }
        let st = to_s_trajectory_on_grid(&traj, &grid).unwrap();
        assert_eq!(st.d1, 0.0);
        let beta = st.beta;
        assert!(beta > 0.0);
        for (state, &d) in st.states.iter().zip(&st.denom) {
            if state.s > 0.0 && state.s <= 1e-4 * s_max {
                let ratio = d / (2.0 * (beta * state.s).sqrt());
                assert!((ratio - 1.0).abs() <= 0.05, "ratio {ratio} at s = {}", state.s);
            }
        }
    }
}
