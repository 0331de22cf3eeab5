//! Continuity moduli, the nonlinearity `m` with its metadata, and executable
//! checks of the structural hypotheses tying the modulus to the weight `phi`.

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, cumtrapz};
use crate::spectral::WeightPhi;
use crate::table::SampledTable;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::{Arc, Mutex};

/// Strict hyperbolicity means `m` is bounded below by a positive constant;
/// weak hyperbolicity only asks `m >= 0`. The two regimes select different
/// mollifier schedules and hypothesis checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperbolicity {
    Strict,
    Weak,
}

impl fmt::Display for Hyperbolicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hyperbolicity::Strict => write!(f, "strict"),
            Hyperbolicity::Weak => write!(f, "weak"),
        }
    }
}

#[derive(Clone)]
enum ModulusKind {
    Linear,
    Holder { beta: f64 },
    LogLipschitz,
    BoundedCustom { table: SampledTable, cap: f64 },
    Custom { name: &'static str, f: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

/// A continuity modulus `omega`: continuous, increasing, `omega(0) = 0`,
/// subadditive. Candidate functions that fail these requirements can still be
/// constructed with [`ContinuityModulus::custom`] so the checks below can
/// reject them.
#[derive(Clone)]
pub struct ContinuityModulus {
    kind: ModulusKind,
}

impl fmt::Debug for ContinuityModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContinuityModulus({})", self.name())
    }
}

impl ContinuityModulus {
    /// `omega(sigma) = sigma`.
    pub fn linear() -> Self {
        ContinuityModulus { kind: ModulusKind::Linear }
    }

    /// `omega(sigma) = sigma^beta` with beta in (0, 1).
    pub fn holder(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::param("beta", "must lie in (0, 1)"));
        }
        Ok(ContinuityModulus { kind: ModulusKind::Holder { beta } })
    }

    /// `omega(sigma) = sigma (1 + |log sigma|)` for sigma > 0, `omega(0) = 0`.
    /// The `1 +` keeps the function increasing through sigma = 1.
    pub fn log_lipschitz() -> Self {
        ContinuityModulus { kind: ModulusKind::LogLipschitz }
    }

    /// Sampled modulus capped from above (the bounded modulus used by the
    /// weakly hyperbolic construction). The table must start at (0, 0) with
    /// nondecreasing values; `cap` defaults to twice the value at 1.
    pub fn bounded_custom(table: SampledTable, cap: Option<f64>) -> Result<Self> {
        if table.xs()[0] != 0.0 || table.ys()[0] != 0.0 {
            return Err(Error::Table { reason: "modulus table must start at (0, 0)".into() });
        }
        if table.ys().windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Table { reason: "modulus table must be nondecreasing".into() });
        }
        let cap = cap.unwrap_or(2.0 * table.eval(1.0));
        if !(cap > 0.0) {
            return Err(Error::param("cap", "must be > 0"));
        }
        Ok(ContinuityModulus { kind: ModulusKind::BoundedCustom { table, cap } })
    }

    /// Arbitrary candidate evaluator; used to feed functions into the checks
    /// without asserting they are genuine moduli.
    pub fn custom(name: &'static str, f: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Self {
        ContinuityModulus { kind: ModulusKind::Custom { name, f } }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            ModulusKind::Linear => "linear".into(),
            ModulusKind::Holder { beta } => format!("holder({beta})"),
            ModulusKind::LogLipschitz => "log_lipschitz".into(),
            ModulusKind::BoundedCustom { cap, .. } => format!("bounded_custom(cap={cap})"),
            ModulusKind::Custom { name, .. } => (*name).into(),
        }
    }

    pub fn eval(&self, sigma: f64) -> f64 {
        debug_assert!(sigma >= 0.0);
        match &self.kind {
            ModulusKind::Linear => sigma,
            ModulusKind::Holder { beta } => sigma.powf(*beta),
            ModulusKind::LogLipschitz => {
                if sigma == 0.0 {
                    0.0
                } else {
                    sigma * (1.0 + sigma.ln().abs())
                }
            }
            ModulusKind::BoundedCustom { table, cap } => table.eval(sigma).min(*cap),
            ModulusKind::Custom { f, .. } => f(sigma),
        }
    }

    /// Checks `omega(0) = 0`, monotonicity on the grid, and subadditivity on
    /// all grid pairs (with 1e-12 relative slack).
    pub fn validate_on(&self, grid: &[f64]) -> ModulusValidation {
        let at_zero = self.eval(0.0);
        let mut sorted: Vec<f64> = grid.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut increasing = true;
        for w in sorted.windows(2) {
            if self.eval(w[1]) < self.eval(w[0]) {
                increasing = false;
            }
        }
        let mut worst = f64::INFINITY;
        for &a in &sorted {
            for &b in &sorted {
                let lhs = self.eval(a + b);
                let rhs = self.eval(a) + self.eval(b);
                if rhs > 0.0 {
                    worst = worst.min(rhs / lhs.max(f64::MIN_POSITIVE));
                }
            }
        }
        ModulusValidation {
            at_zero,
            increasing,
            subadditive: worst >= 1.0 - 1e-12,
            worst_subadditive_ratio: worst,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModulusValidation {
    pub at_zero: f64,
    pub increasing: bool,
    pub subadditive: bool,
    /// min over pairs of (omega(a) + omega(b)) / omega(a + b); >= 1 means subadditive.
    pub worst_subadditive_ratio: f64,
}

enum NonlinearityKind {
    Constant { value: f64 },
    Affine { intercept: f64, slope: f64 },
    Power { coeff: f64, exponent: f64 },
    Table { table: SampledTable },
    Custom { name: &'static str, f: Arc<dyn Fn(f64) -> f64 + Send + Sync>, cache: PrimitiveCache },
}

/// The nonlinearity `m` together with the metadata the estimates need: an
/// optional strict-hyperbolicity lower bound `nu`, an optional modulus
/// constant `L`, and the primitive `M(sigma) = integral of m over [0, sigma]`.
pub struct Nonlinearity {
    kind: NonlinearityKind,
    nu: Option<f64>,
    lipschitz: Option<f64>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonlinearity({})", self.name())
    }
}

impl Clone for Nonlinearity {
    fn clone(&self) -> Self {
        let kind = match &self.kind {
            NonlinearityKind::Constant { value } => NonlinearityKind::Constant { value: *value },
            NonlinearityKind::Affine { intercept, slope } => {
                NonlinearityKind::Affine { intercept: *intercept, slope: *slope }
            }
            NonlinearityKind::Power { coeff, exponent } => {
                NonlinearityKind::Power { coeff: *coeff, exponent: *exponent }
            }
            NonlinearityKind::Table { table } => NonlinearityKind::Table { table: table.clone() },
            NonlinearityKind::Custom { name, f, .. } => NonlinearityKind::Custom {
                name,
                f: f.clone(),
                cache: PrimitiveCache::new(),
            },
        };
        Nonlinearity { kind, nu: self.nu, lipschitz: self.lipschitz }
    }
}

impl Nonlinearity {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(Error::param("value", "m must be nonnegative"));
        }
        Ok(Nonlinearity {
            kind: NonlinearityKind::Constant { value },
            nu: if value > 0.0 { Some(value) } else { None },
            lipschitz: Some(0.0),
        })
    }

    /// `m(sigma) = intercept + slope * sigma`.
    pub fn affine(intercept: f64, slope: f64) -> Result<Self> {
        if !(intercept >= 0.0 && slope >= 0.0) {
            return Err(Error::param("affine", "intercept and slope must be >= 0"));
        }
        Ok(Nonlinearity {
            kind: NonlinearityKind::Affine { intercept, slope },
            nu: if intercept > 0.0 { Some(intercept) } else { None },
            lipschitz: Some(slope),
        })
    }

    /// `m(sigma) = coeff * sigma^exponent` with exponent > 0.
    pub fn power(coeff: f64, exponent: f64) -> Result<Self> {
        if !(coeff >= 0.0) || !(exponent > 0.0) {
            return Err(Error::param("power", "coeff >= 0 and exponent > 0 required"));
        }
        Ok(Nonlinearity { kind: NonlinearityKind::Power { coeff, exponent }, nu: None, lipschitz: None })
    }

    /// Sampled nonlinearity; the primitive is the exact integral of the
    /// linear interpolant.
    pub fn table(table: SampledTable) -> Result<Self> {
        if table.xs()[0] < 0.0 {
            return Err(Error::Table { reason: "nonlinearity table must start at x >= 0".into() });
        }
        if table.min_value() < 0.0 {
            return Err(Error::Table { reason: "nonlinearity values must be >= 0".into() });
        }
        let nu = if table.min_value() > 0.0 { Some(table.min_value()) } else { None };
        Ok(Nonlinearity { kind: NonlinearityKind::Table { table }, nu, lipschitz: None })
    }

    /// Black-box evaluator; the primitive is computed by adaptive quadrature
    /// with cumulative results cached on a chunk grid (abs error <= 1e-10).
    pub fn custom(name: &'static str, f: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Self {
        Nonlinearity {
            kind: NonlinearityKind::Custom { name, f, cache: PrimitiveCache::new() },
            nu: None,
            lipschitz: None,
        }
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = Some(nu);
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn nu(&self) -> Option<f64> {
        self.nu
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn name(&self) -> String {
        match &self.kind {
            NonlinearityKind::Constant { value } => format!("constant({value})"),
            NonlinearityKind::Affine { intercept, slope } => format!("affine({intercept}+{slope}s)"),
            NonlinearityKind::Power { coeff, exponent } => format!("power({coeff}*s^{exponent})"),
            NonlinearityKind::Table { .. } => "table".into(),
            NonlinearityKind::Custom { name, .. } => (*name).into(),
        }
    }

    /// Evaluates `m(sigma)`; arguments are clamped to the domain [0, inf).
    pub fn eval(&self, sigma: f64) -> f64 {
        let s = sigma.max(0.0);
        match &self.kind {
            NonlinearityKind::Constant { value } => *value,
            NonlinearityKind::Affine { intercept, slope } => intercept + slope * s,
            NonlinearityKind::Power { coeff, exponent } => coeff * s.powf(*exponent),
            NonlinearityKind::Table { table } => table.eval(s),
            NonlinearityKind::Custom { f, .. } => f(s),
        }
    }

    /// `M(sigma) = integral of m over [0, sigma]`; closed form where the kind
    /// allows it, exact piecewise integration for tables, cached adaptive
    /// quadrature for black-box evaluators.
    pub fn primitive(&self, sigma: f64) -> f64 {
        let s = sigma.max(0.0);
        match &self.kind {
            NonlinearityKind::Constant { value } => value * s,
            NonlinearityKind::Affine { intercept, slope } => intercept * s + 0.5 * slope * s * s,
            NonlinearityKind::Power { coeff, exponent } => {
                coeff * s.powf(exponent + 1.0) / (exponent + 1.0)
            }
            NonlinearityKind::Table { table } => {
                let x0 = table.xs()[0];
                if s <= x0 {
                    s * table.ys()[0]
                } else {
                    x0 * table.ys()[0] + table.integral_from_start(s)
                }
            }
            NonlinearityKind::Custom { f, cache, .. } => cache.eval(f.as_ref(), s),
        }
    }
}

/// Cumulative integrals cached at multiples of a fixed chunk width; the open
/// tail of the current chunk is integrated directly so non-smooth integrands
/// stay within the absolute error budget.
struct PrimitiveCache {
    chunk: f64,
    sums: Mutex<Vec<f64>>,
}

impl PrimitiveCache {
    fn new() -> Self {
        PrimitiveCache { chunk: 0.25, sums: Mutex::new(vec![0.0]) }
    }

    fn eval(&self, f: &(dyn Fn(f64) -> f64 + Send + Sync), sigma: f64) -> f64 {
        let n = (sigma / self.chunk).floor() as usize;
        let mut sums = self.sums.lock().unwrap();
        while sums.len() <= n {
            let k = sums.len();
            let a = (k - 1) as f64 * self.chunk;
            let b = k as f64 * self.chunk;
            let inc = adaptive_simpson(&|x| f(x), a, b, 1e-13);
            let last = *sums.last().unwrap();
            sums.push(last + inc);
        }
        let base = sums[n];
        drop(sums);
        base + adaptive_simpson(&|x| f(x), n as f64 * self.chunk, sigma, 1e-12)
    }
}

/// Geometric grid from `min` to `max` with the given number of points per
/// decade (the default certification density is 81).
pub fn geometric_grid(min: f64, max: f64, points_per_decade: usize) -> Vec<f64> {
    assert!(min > 0.0 && max > min);
    let decades = (max / min).log10();
    let n = ((decades * points_per_decade as f64).ceil() as usize).max(1);
    (0..=n)
        .map(|i| min * 10f64.powf(decades * i as f64 / n as f64))
        .collect()
}

/// Dyadic grid {2^lo, ..., 2^hi}.
pub fn dyadic_grid(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 2f64.powi(e)).collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LowerBoundReport {
    pub passes: bool,
    /// min over the grid of omega(x) (x + 1) / (omega(1) x).
    pub worst_ratio: f64,
}

/// Checks the modulus lower bound `omega(x) >= omega(1) x / (x + 1)` on a
/// positive grid. Any genuine modulus satisfies it; a failing point certifies
/// the candidate is not subadditive.
pub fn lower_bound_check(omega: &ContinuityModulus, grid: &[f64]) -> LowerBoundReport {
    let omega1 = omega.eval(1.0);
    let mut worst = f64::INFINITY;
    for &x in grid {
        debug_assert!(x > 0.0);
        let bound = omega1 * x / (x + 1.0);
        let ratio = if bound == 0.0 { f64::INFINITY } else { omega.eval(x) / bound };
        worst = worst.min(ratio);
    }
    LowerBoundReport { passes: worst >= 1.0 - 1e-12, worst_ratio: worst }
}

/// Largest observed ratio |m(a) - m(b)| / omega(|a - b|) over the pair grid;
/// a lower estimate of the true omega-continuity constant `L`.
pub fn estimate_l(
    m: &Nonlinearity,
    omega: &ContinuityModulus,
    pairs: &[(f64, f64)],
) -> Result<f64> {
    let mut best = 0.0f64;
    for &(a, b) in pairs {
        if a == b {
            continue;
        }
        let dm = (m.eval(a) - m.eval(b)).abs();
        let dw = omega.eval((a - b).abs());
        if dw == 0.0 {
            if dm > 0.0 {
                return Err(Error::DegenerateModulus { sigma: (a - b).abs() });
            }
            continue;
        }
        best = best.max(dm / dw);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSummary {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSummary {
    pub fn of(grid: &[f64]) -> Self {
        GridSummary {
            min: grid.iter().cloned().fold(f64::INFINITY, f64::min),
            max: grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            points: grid.len(),
        }
    }
}

/// Grid-certified estimate of the constant linking the modulus to the weight.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HypothesisReport {
    pub mode: Hyperbolicity,
    /// Measured Lambda: the smallest constant making the inequality hold on the grid.
    pub lambda_estimate: f64,
    pub grid: GridSummary,
    pub satisfied: bool,
}

/// Strict mode certifies `sigma omega(1/sigma) <= Lambda phi(sigma)` on the
/// grid and reports the measured Lambda; weak mode certifies
/// `sigma <= Lambda phi(sigma / sqrt(omega(1/sigma)))`.
pub fn check_hyperbolicity_hypothesis(
    omega: &ContinuityModulus,
    phi: &WeightPhi,
    mode: Hyperbolicity,
    sigma_grid: &[f64],
) -> Result<HypothesisReport> {
    let mut lambda = 0.0f64;
    for &sigma in sigma_grid {
        if !(sigma > 0.0) {
            return Err(Error::param("sigma_grid", "entries must be > 0"));
        }
        let value = match mode {
            Hyperbolicity::Strict => {
                let phi_v = phi.eval(sigma);
                if !(phi_v > 0.0) {
                    return Err(Error::InvalidWeight { sigma, value: phi_v });
                }
                sigma * omega.eval(1.0 / sigma) / phi_v
            }
            Hyperbolicity::Weak => {
                let w = omega.eval(1.0 / sigma);
                if !(w > 0.0) {
                    return Err(Error::DegenerateModulus { sigma: 1.0 / sigma });
                }
                let arg = sigma / w.sqrt();
                let phi_v = phi.eval(arg);
                if !(phi_v > 0.0) {
                    return Err(Error::InvalidWeight { sigma: arg, value: phi_v });
                }
                sigma / phi_v
            }
        };
        lambda = lambda.max(value);
    }
    Ok(HypothesisReport {
        mode,
        lambda_estimate: lambda,
        grid: GridSummary::of(sigma_grid),
        satisfied: lambda.is_finite(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonOutcome {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComparisonReport {
    pub outcome: ComparisonOutcome,
    /// min over samples of RHS - y; nonnegative (up to roundoff) on a pass.
    pub margin: f64,
}

/// Checks the comparison bound `y(t) <= exp(int eta1) * int eta2` at every
/// sample of a common time grid starting at t = 0 with y(0) = 0.
pub fn comparison_bound_check(
    ts: &[f64],
    y: &[f64],
    eta1: &[f64],
    eta2: &[f64],
) -> Result<ComparisonReport> {
    if ts.len() != y.len() || ts.len() != eta1.len() || ts.len() != eta2.len() {
        return Err(Error::GridMismatch { reason: "ts, y, eta1, eta2 must share a grid".into() });
    }
    if ts.len() < 2 {
        return Err(Error::param("ts", "need at least two samples"));
    }
    let scale = y.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    if y[0].abs() > 1e-12 * scale {
        return Err(Error::param("y", "y(0) must vanish"));
    }
    if eta1.iter().chain(eta2.iter()).any(|v| !v.is_finite())
        || eta1.iter().chain(eta2.iter()).any(|v| *v < 0.0)
    {
        return Ok(ComparisonReport { outcome: ComparisonOutcome::Inconclusive, margin: f64::NAN });
    }
    let int1 = cumtrapz(ts, eta1);
    let int2 = cumtrapz(ts, eta2);
    if int1.iter().chain(int2.iter()).any(|v| !v.is_finite()) {
        return Ok(ComparisonReport { outcome: ComparisonOutcome::Inconclusive, margin: f64::NAN });
    }
    let mut margin = f64::INFINITY;
    let mut rhs_scale = 0.0f64;
    for i in 0..ts.len() {
        let rhs = int1[i].exp() * int2[i];
        margin = margin.min(rhs - y[i]);
        rhs_scale = rhs_scale.max(rhs.abs());
    }
    let outcome = if margin >= -1e-9 * (1.0 + rhs_scale) {
        ComparisonOutcome::Pass
    } else {
        ComparisonOutcome::Fail
    };
    Ok(ComparisonReport { outcome, margin })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_bound_linear_at_one() {
        let report = lower_bound_check(&ContinuityModulus::linear(), &[1.0]);
        assert!(report.passes);
        assert!((report.worst_ratio - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lower_bound_holder_half() {
        let omega = ContinuityModulus::holder(0.5).unwrap();
        let report = lower_bound_check(&omega, &[0.01, 1.0, 100.0]);
        assert!(report.passes);
        // Direct check of the inequality at each point.
        for &x in &[0.01, 1.0, 100.0f64] {
            assert!(omega.eval(x) >= omega.eval(1.0) * x / (x + 1.0));
        }
    }

    #[test]
    fn lower_bound_rejects_square() {
        let omega = ContinuityModulus::custom("square", Arc::new(|s: f64| s * s));
        let report = lower_bound_check(&omega, &[0.1]);
        assert!(!report.passes);
        // omega(0.1) = 0.01 against bound 1 * 0.1 / 1.1.
        assert!((report.worst_ratio - 0.01 / (0.1 / 1.1)).abs() < 1e-12);
    }

    #[test]
    fn estimate_l_exact_cases() {
        let pairs: Vec<(f64, f64)> = (0..50).map(|i| (0.1 * i as f64, 0.1 * i as f64 + 0.05)).collect();
        let l = estimate_l(
            &Nonlinearity::affine(0.0, 1.0).unwrap(),
            &ContinuityModulus::linear(),
            &pairs,
        )
        .unwrap();
        assert!((l - 1.0).abs() < 1e-12);

        // |sqrt(b) - sqrt(a)| <= sqrt(b - a) with equality at a = 0.
        let m = Nonlinearity::power(1.0, 0.5).unwrap();
        let omega = ContinuityModulus::holder(0.5).unwrap();
        let pairs: Vec<(f64, f64)> = (1..20).map(|i| (0.0, 0.3 * i as f64)).collect();
        let l = estimate_l(&m, &omega, &pairs).unwrap();
        assert!((l - 1.0).abs() < 1e-12);

        let l = estimate_l(
            &Nonlinearity::constant(3.0).unwrap(),
            &ContinuityModulus::linear(),
            &pairs,
        )
        .unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn estimate_l_degenerate_modulus() {
        let omega = ContinuityModulus::custom("zero", Arc::new(|_| 0.0));
        let m = Nonlinearity::affine(0.0, 1.0).unwrap();
        assert!(matches!(
            estimate_l(&m, &omega, &[(0.0, 1.0)]),
            Err(Error::DegenerateModulus { .. })
        ));
    }

    #[test]
    fn estimate_l_grows_under_refinement() {
        let m = Nonlinearity::power(1.0, 0.5).unwrap();
        let omega = ContinuityModulus::holder(0.5).unwrap();
        let coarse: Vec<(f64, f64)> = vec![(0.5, 1.0), (1.0, 2.0)];
        let mut fine = coarse.clone();
        fine.push((0.0, 0.25));
        let l_coarse = estimate_l(&m, &omega, &coarse).unwrap();
        let l_fine = estimate_l(&m, &omega, &fine).unwrap();
        assert!(l_fine >= l_coarse);
    }

    #[test]
    fn hyperbolicity_power_cancellation() {
        // omega = sigma^a against phi = sigma^(1-a): Lambda = 1 exactly.
        let a = 0.5;
        let omega = ContinuityModulus::holder(a).unwrap();
        let phi = WeightPhi::power(1.0 - a).unwrap();
        let grid = geometric_grid(1e-6, 1e6, 27);
        let report =
            check_hyperbolicity_hypothesis(&omega, &phi, Hyperbolicity::Strict, &grid).unwrap();
        assert!(report.satisfied);
        assert!((report.lambda_estimate - 1.0).abs() < 1e-10);
    }

    #[test]
    fn hyperbolicity_linear_on_unit_tail() {
        // sigma * omega(1/sigma) = 1 <= phi(sigma) = sigma on [1, inf).
        let omega = ContinuityModulus::linear();
        let phi = WeightPhi::identity();
        let grid = geometric_grid(1.0, 2f64.powi(20), 9);
        let report =
            check_hyperbolicity_hypothesis(&omega, &phi, Hyperbolicity::Strict, &grid).unwrap();
        assert!(report.satisfied);
        assert!((report.lambda_estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hyperbolicity_weak_linear_modulus() {
        // omega = sigma, phi = sigma^(2/3): sigma / phi(sigma^(3/2)) = 1.
        let omega = ContinuityModulus::linear();
        let phi = WeightPhi::power(2.0 / 3.0).unwrap();
        let grid = geometric_grid(1e-4, 1e4, 27);
        let report =
            check_hyperbolicity_hypothesis(&omega, &phi, Hyperbolicity::Weak, &grid).unwrap();
        assert!(report.satisfied);
        assert!((report.lambda_estimate - 1.0).abs() < 1e-10);
    }

    #[test]
    fn log_lipschitz_against_log_weight_is_finite() {
        // The log-Lipschitz modulus against phi = 1 + log(1 + sigma): the
        // measured constant is finite (the finite-derivative-loss pairing).
        let omega = ContinuityModulus::log_lipschitz();
        let grid = dyadic_grid(-20, 20);
        let table = SampledTable::from_fn(grid.clone(), |s| 1.0 + (1.0 + s).ln()).unwrap();
        let phi = WeightPhi::table(table).unwrap();
        let report =
            check_hyperbolicity_hypothesis(&omega, &phi, Hyperbolicity::Strict, &grid).unwrap();
        assert!(report.satisfied);
        // sigma omega(1/sigma) = 1 + |log sigma|, so the ratio peaks at the
        // small end of the grid: (1 + 20 log 2) / (1 + log(1 + 2^-20)).
        let expected = (1.0 + 20.0 * 2f64.ln()) / (1.0 + (1.0 + 2f64.powi(-20)).ln());
        assert!((report.lambda_estimate - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn hyperbolicity_rejects_vanishing_weight() {
        let omega = ContinuityModulus::linear();
        let phi = WeightPhi::power(1.0).unwrap(); // phi(0) = 0, but grid > 0 keeps it fine
        let grid = vec![1.0, 2.0];
        assert!(check_hyperbolicity_hypothesis(&omega, &phi, Hyperbolicity::Strict, &grid).is_ok());
        let zero_table =
            SampledTable::new(vec![0.0, 10.0], vec![1.0, 1.0]).unwrap();
        let phi_ok = WeightPhi::table(zero_table).unwrap();
        assert!(
            check_hyperbolicity_hypothesis(&omega, &phi_ok, Hyperbolicity::Strict, &grid).is_ok()
        );
    }

    #[test]
    fn comparison_bound_trivial_and_equality() {
        let ts: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        let zeros = vec![0.0; ts.len()];
        let ones = vec![1.0; ts.len()];

        // y = 0: passes with margin equal to the RHS at the end.
        let r = comparison_bound_check(&ts, &zeros, &ones, &ones).unwrap();
        assert_eq!(r.outcome, ComparisonOutcome::Pass);

        // y = t with eta1 = 0, eta2 = 1: equality.
        let y: Vec<f64> = ts.clone();
        let r = comparison_bound_check(&ts, &y, &zeros, &ones).unwrap();
        assert_eq!(r.outcome, ComparisonOutcome::Pass);
        assert!(r.margin.abs() < 1e-12);

        // y = t e^t with eta1 = eta2 = 1: equality again.
        let y: Vec<f64> = ts.iter().map(|&t| t * t.exp()).collect();
        let r = comparison_bound_check(&ts, &y, &ones, &ones).unwrap();
        assert_eq!(r.outcome, ComparisonOutcome::Pass);
        assert!(r.margin.abs() < 1e-9);

        // A genuine violation is flagged.
        let y: Vec<f64> = ts.iter().map(|&t| 2.0 * t * t.exp() + 0.1 * t).collect();
        let r = comparison_bound_check(&ts, &y, &ones, &ones).unwrap();
        assert_eq!(r.outcome, ComparisonOutcome::Fail);
    }

    #[test]
    fn comparison_bound_inconclusive_on_divergent_eta() {
        let ts: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let zeros = vec![0.0; ts.len()];
        let mut eta = vec![1.0; ts.len()];
        eta[3] = f64::INFINITY;
        let r = comparison_bound_check(&ts, &zeros, &eta, &zeros).unwrap();
        assert_eq!(r.outcome, ComparisonOutcome::Inconclusive);
    }

    #[test]
    fn builtin_moduli_are_valid_on_small_grid() {
        // Subadditivity of the log-Lipschitz form only holds for arguments
        // below 1; the built-in validation grid reflects that.
        let small = dyadic_grid(-20, -1);
        for omega in [
            ContinuityModulus::linear(),
            ContinuityModulus::holder(0.5).unwrap(),
            ContinuityModulus::log_lipschitz(),
        ] {
            let v = omega.validate_on(&small);
            assert_eq!(v.at_zero, 0.0, "{}", omega.name());
            assert!(v.increasing, "{}", omega.name());
            assert!(v.subadditive, "{} worst {}", omega.name(), v.worst_subadditive_ratio);
        }
        // Linear and Holder stay subadditive over the full dyadic range.
        let full = dyadic_grid(-20, 20);
        for omega in [ContinuityModulus::linear(), ContinuityModulus::holder(0.5).unwrap()] {
            assert!(omega.validate_on(&full).subadditive, "{}", omega.name());
        }
    }

    #[test]
    fn bounded_custom_caps_and_defaults() {
        let table = SampledTable::new(vec![0.0, 1.0, 10.0], vec![0.0, 1.0, 10.0]).unwrap();
        let omega = ContinuityModulus::bounded_custom(table, None).unwrap();
        // Default cap is 2 * omega(1).
        assert_eq!(omega.eval(10.0), 2.0);
        assert_eq!(omega.eval(0.5), 0.5);
        assert_eq!(omega.eval(0.0), 0.0);
    }

    #[test]
    fn primitive_closed_forms_and_quadrature_agree() {
        let m = Nonlinearity::affine(1.0, 1.0).unwrap();
        assert!((m.primitive(1.0) - 1.5).abs() < 1e-15);

        let msqrt = Nonlinearity::power(1.0, 0.5).unwrap();
        let mcustom = Nonlinearity::custom("sqrt", Arc::new(|s: f64| s.sqrt()));
        for &s in &[0.3, 1.0, 2.7, 9.4] {
            assert!((msqrt.primitive(s) - mcustom.primitive(s)).abs() < 1e-10);
        }
    }

    #[test]
    fn table_primitive_matches_closed_form() {
        let table = SampledTable::new(vec![0.0, 2.0], vec![0.0, 2.0]).unwrap();
        let m = Nonlinearity::table(table).unwrap();
        assert!((m.primitive(1.5) - 1.125).abs() < 1e-14); // s^2/2
        assert!((m.primitive(3.0) - (2.0 + 2.0)).abs() < 1e-14); // clamped tail
    }
}
