//! Coefficient extension and smoothing: builds `c(s) = m(s + offset)` extended
//! constantly outside a working interval, convolves it with a fixed smooth
//! bump, selects per-mode smoothing widths, and measures the constants in the
//! resulting estimates.

use crate::error::{Error, Result};
use crate::modulus::{ContinuityModulus, Hyperbolicity, Nonlinearity};
use crate::quadrature::{adaptive_simpson, bisect_increasing, gauss_legendre_64};
use serde::Serialize;
use std::sync::{Arc, OnceLock};

/// A coefficient evaluator on the real line.
pub trait Coefficient: Send + Sync {
    fn eval(&self, s: f64) -> f64;
}

impl<F> Coefficient for F
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn eval(&self, s: f64) -> f64 {
        self(s)
    }
}

/// The fixed smooth even bump `rho(sigma) = Z exp(-1/(1 - sigma^2))` on
/// |sigma| < 1, with `Z` normalizing the integral to 1.
#[derive(Debug, Clone, Copy)]
pub struct Mollifier {
    normalization: f64,
}

fn raw_bump(sigma: f64) -> f64 {
    if sigma.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - sigma * sigma)).exp()
    }
}

impl Mollifier {
    /// The standard bump; the normalizing constant is computed once by
    /// quadrature to 1e-12.
    pub fn standard() -> Mollifier {
        static Z: OnceLock<f64> = OnceLock::new();
        let z = *Z.get_or_init(|| 1.0 / adaptive_simpson(&raw_bump, -1.0, 1.0, 1e-14));
        Mollifier { normalization: z }
    }

    pub fn rho(&self, sigma: f64) -> f64 {
        self.normalization * raw_bump(sigma)
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }
}

/// Discrete convolution rule: 64-node Gauss-Legendre nodes with weights
/// `w_i rho(x_i)`, renormalized to unit total mass so that constants are
/// reproduced exactly and convex-hull bounds hold to rounding.
fn bump_rule() -> &'static [(f64, f64); 64] {
    static RULE: OnceLock<[(f64, f64); 64]> = OnceLock::new();
    RULE.get_or_init(|| {
        let gl = gauss_legendre_64();
        let rho = Mollifier::standard();
        let mut rule = [(0.0, 0.0); 64];
        let mut total = 0.0;
        for (i, &(x, w)) in gl.iter().enumerate() {
            let q = w * rho.rho(x);
            rule[i] = (x, q);
            total += q;
        }
        for entry in rule.iter_mut() {
            entry.1 /= total;
        }
        rule
    })
}

/// `sum_i q_i c(s + eps x_i)`, the fixed-rule convolution of `c` with the bump.
pub(crate) fn bump_convolution(c: &dyn Coefficient, epsilon: f64, s: f64) -> f64 {
    bump_rule().iter().map(|&(x, q)| q * c.eval(s + epsilon * x)).sum()
}

/// `c(s) = m(clamp(s, 0, s1) + offset)`: the nonlinearity shifted by the
/// initial value of |A^(1/2) u|^2 and extended constantly outside [0, s1].
/// With `orientation = -1` the argument runs backwards: `m(offset - clamp(s))`,
/// which is the coefficient seen when the tracked variable decreases from its
/// initial value.
#[derive(Debug, Clone)]
pub struct ExtendedCoefficient {
    m: Nonlinearity,
    offset: f64,
    s1: f64,
    orientation: f64,
}

impl ExtendedCoefficient {
    pub fn new(m: Nonlinearity, s_offset: f64, s1: f64) -> Result<Self> {
        if !(s1 > 0.0) {
            return Err(Error::param("s1", "must be > 0"));
        }
        if !(s_offset >= 0.0) {
            return Err(Error::param("s_offset", "must be >= 0"));
        }
        Ok(ExtendedCoefficient { m, offset: s_offset, s1, orientation: 1.0 })
    }

    pub fn reflected(m: Nonlinearity, s_offset: f64, s1: f64) -> Result<Self> {
        let mut c = ExtendedCoefficient::new(m, s_offset, s1)?;
        c.orientation = -1.0;
        Ok(c)
    }

    pub fn s1(&self) -> f64 {
        self.s1
    }
}

impl Coefficient for ExtendedCoefficient {
    fn eval(&self, s: f64) -> f64 {
        self.m.eval(self.offset + self.orientation * s.clamp(0.0, self.s1))
    }
}

/// Free-function form of the constructor.
pub fn extend_coefficient(m: &Nonlinearity, s_offset: f64, s1: f64) -> Result<ExtendedCoefficient> {
    ExtendedCoefficient::new(m.clone(), s_offset, s1)
}

/// A smoothed coefficient `c_eps`. In strict mode this is the bump convolution
/// of `c` at width `eps`; in weak mode the convolution is lifted by
/// `omega(eps)` so the result stays above that floor.
pub struct MollifiedCoefficient {
    base: Arc<dyn Coefficient>,
    epsilon: f64,
    mode: Hyperbolicity,
    omega: ContinuityModulus,
}

impl MollifiedCoefficient {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mode(&self) -> Hyperbolicity {
        self.mode
    }

    pub fn base_eval(&self, s: f64) -> f64 {
        self.base.eval(s)
    }

    /// Central-difference derivative with step `eps * 1e-4`.
    pub fn derivative(&self, s: f64) -> f64 {
        let h = self.epsilon * 1e-4;
        (self.eval(s + h) - self.eval(s - h)) / (2.0 * h)
    }
}

impl Coefficient for MollifiedCoefficient {
    fn eval(&self, s: f64) -> f64 {
        let conv = bump_convolution(self.base.as_ref(), self.epsilon, s);
        match self.mode {
            Hyperbolicity::Strict => conv,
            Hyperbolicity::Weak => self.omega.eval(self.epsilon) + conv,
        }
    }
}

/// Builds the smoothed coefficient at width `epsilon`.
pub fn mollify(
    c: Arc<dyn Coefficient>,
    omega: &ContinuityModulus,
    epsilon: f64,
    mode: Hyperbolicity,
) -> Result<MollifiedCoefficient> {
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be > 0"));
    }
    Ok(MollifiedCoefficient { base: c, epsilon, mode, omega: omega.clone() })
}

/// Smoothing width for mode `k`: `1/lambda_k` in the strict regime; in the
/// weak regime the solution of `eps sqrt(omega(eps)) = 1/lambda_k`, found by
/// bisection to relative tolerance 1e-12.
pub fn epsilon_for_mode(
    lambda_k: f64,
    omega: &ContinuityModulus,
    mode: Hyperbolicity,
) -> Result<f64> {
    if !(lambda_k > 0.0) {
        return Err(Error::param("lambda_k", "must be > 0"));
    }
    match mode {
        Hyperbolicity::Strict => Ok(1.0 / lambda_k),
        Hyperbolicity::Weak => {
            let target = 1.0 / lambda_k;
            let h = |eps: f64| eps * omega.eval(eps).sqrt();
            let mut lo = target.min(1.0);
            let mut iters = 0;
            while h(lo) > target {
                lo *= 0.5;
                iters += 1;
                if iters > 4000 {
                    return Err(Error::Schedule {
                        reason: "cannot bracket eps from below".into(),
                    });
                }
            }
            let mut hi = target.max(1.0);
            iters = 0;
            while h(hi) < target {
                hi *= 2.0;
                iters += 1;
                if iters > 4000 {
                    return Err(Error::Schedule { reason: "cannot bracket eps from above".into() });
                }
            }
            // h must be increasing on the bracket for the inverse to exist.
            let mut prev = h(lo);
            for i in 1..=32 {
                let e = lo * (hi / lo).powf(i as f64 / 32.0);
                let v = h(e);
                if v < prev * (1.0 - 1e-9) {
                    return Err(Error::Schedule {
                        reason: format!("eps sqrt(omega(eps)) is not increasing near eps = {e}"),
                    });
                }
                prev = v;
            }
            Ok(bisect_increasing(&|e| h(e) - target, lo, hi, 1e-13))
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpsilonEstimate {
    pub epsilon: f64,
    /// sup over the s-grid of |c_eps(s) - c(s)| / omega(eps).
    pub gamma3: f64,
    /// sup over the s-grid of |c_eps'(s)| eps / omega(eps).
    pub gamma4: f64,
    pub ceps_min: f64,
    pub ceps_max: f64,
}

/// Measured constants of the smoothing estimates over an eps sweep.
#[derive(Debug, Clone, Serialize)]
pub struct MollifierEstimateReport {
    pub per_epsilon: Vec<EpsilonEstimate>,
    /// sup of the per-eps gamma3 values.
    pub gamma3: f64,
    /// sup of the per-eps gamma4 values.
    pub gamma4: f64,
    pub ceps_min: f64,
    pub ceps_max: f64,
}

/// Measures `gamma3 = sup |c_eps - c| / omega(eps)` and
/// `gamma4 = sup |c_eps'| eps / omega(eps)` over the sweep and grid, with the
/// strict-mode convolution; derivatives use central differences with step
/// `eps * 1e-4`.
pub fn verify_mollifier_estimates(
    c: &dyn Coefficient,
    omega: &ContinuityModulus,
    eps_sweep: &[f64],
    s_grid: &[f64],
) -> Result<MollifierEstimateReport> {
    if eps_sweep.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::param("eps_sweep", "entries must be > 0"));
    }
    let mut per_epsilon = Vec::with_capacity(eps_sweep.len());
    for &eps in eps_sweep {
        let w = omega.eval(eps);
        if !(w > 0.0) {
            return Err(Error::DegenerateModulus { sigma: eps });
        }
        let h = eps * 1e-4;
        let mut g3 = 0.0f64;
        let mut g4 = 0.0f64;
        let mut cmin = f64::INFINITY;
        let mut cmax = f64::NEG_INFINITY;
        for &s in s_grid {
            let ceps = bump_convolution(c, eps, s);
            let cval = c.eval(s);
            if !ceps.is_finite() || !cval.is_finite() {
                return Err(Error::NonFinite { context: "coefficient evaluation" });
            }
            let deriv = (bump_convolution(c, eps, s + h) - bump_convolution(c, eps, s - h))
                / (2.0 * h);
            g3 = g3.max((ceps - cval).abs() / w);
            g4 = g4.max(deriv.abs() * eps / w);
            cmin = cmin.min(ceps);
            cmax = cmax.max(ceps);
        }
        per_epsilon.push(EpsilonEstimate { epsilon: eps, gamma3: g3, gamma4: g4, ceps_min: cmin, ceps_max: cmax });
    }
    let gamma3 = per_epsilon.iter().map(|e| e.gamma3).fold(0.0, f64::max);
    let gamma4 = per_epsilon.iter().map(|e| e.gamma4).fold(0.0, f64::max);
    let ceps_min = per_epsilon.iter().map(|e| e.ceps_min).fold(f64::INFINITY, f64::min);
    let ceps_max = per_epsilon.iter().map(|e| e.ceps_max).fold(f64::NEG_INFINITY, f64::max);
    Ok(MollifierEstimateReport { per_epsilon, gamma3, gamma4, ceps_min, ceps_max })
}
