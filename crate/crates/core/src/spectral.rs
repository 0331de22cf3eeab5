//! Spectral representation of the operator `A`, mode-coefficient vectors, and
//! the exponentially weighted norms that define the scale of spaces used by
//! the rest of the crate.
//!
//! The operator is diagonal on the retained basis: the stored numbers are the
//! frequencies `lambda_k`, so `A e_k = lambda_k^2 e_k` and `A^alpha` acts on a
//! coefficient as multiplication by `lambda_k^(2 alpha)`.

use crate::error::{Error, Result};
use crate::table::SampledTable;
use serde::{Deserialize, Serialize};

/// Diagonal nonnegative operator on a K-mode truncation, stored through its
/// frequencies `lambda_k` (nondecreasing by canonicalization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOperator {
    eigenvalues: Vec<f64>,
}

impl SpectralOperator {
    /// Builds an operator from frequencies; the list is sorted into
    /// nondecreasing order. All entries must be finite and nonnegative.
    pub fn new(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::param("eigenvalues", "need at least one mode"));
        }
        if eigenvalues.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::param("eigenvalues", "entries must be finite and >= 0"));
        }
        eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(SpectralOperator { eigenvalues })
    }

    /// `lambda_k = k^p` for k = 1..K.
    pub fn from_power_rule(k: usize, p: f64) -> Result<Self> {
        SpectralOperator::new((1..=k).map(|i| (i as f64).powf(p)).collect())
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn check_dim(&self, u: &ModeVector) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.len() });
        }
        Ok(())
    }

    /// Applies `A^alpha`: multiplies the k-th coefficient by `lambda_k^(2 alpha)`.
    /// A zero frequency sends its component to zero for alpha > 0.
    pub fn apply_power(&self, alpha: f64, u: &ModeVector) -> Result<ModeVector> {
        if !(alpha >= 0.0) {
            return Err(Error::param("alpha", "must be >= 0"));
        }
        self.check_dim(u)?;
        let coeffs = self
            .eigenvalues
            .iter()
            .zip(u.iter())
            .map(|(&l, &c)| {
                if alpha == 0.0 {
                    c
                } else if l == 0.0 {
                    0.0
                } else {
                    l.powf(2.0 * alpha) * c
                }
            })
            .collect();
        Ok(ModeVector::new_unchecked(coeffs))
    }
}

/// Coefficients of a vector on the retained modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeVector(Vec<f64>);

impl ModeVector {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { context: "mode vector" });
        }
        Ok(ModeVector(coefficients))
    }

    pub(crate) fn new_unchecked(coefficients: Vec<f64>) -> Self {
        ModeVector(coefficients)
    }

    pub fn zeros(k: usize) -> Self {
        ModeVector(vec![0.0; k])
    }

    /// Unit vector e_k (1-based index).
    pub fn unit(k: usize, dim: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[k - 1] = 1.0;
        ModeVector(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn scaled(&self, a: f64) -> ModeVector {
        ModeVector(self.0.iter().map(|c| a * c).collect())
    }

    /// self + a * x, componentwise.
    pub fn axpy(&self, a: f64, x: &ModeVector) -> ModeVector {
        debug_assert_eq!(self.len(), x.len());
        ModeVector(self.0.iter().zip(x.iter()).map(|(s, v)| s + a * v).collect())
    }

    pub fn sub(&self, other: &ModeVector) -> ModeVector {
        self.axpy(-1.0, other)
    }
}

impl From<Vec<f64>> for ModeVector {
    fn from(v: Vec<f64>) -> Self {
        ModeVector(v)
    }
}

/// Scalar product of two coefficient vectors.
pub fn inner(u: &ModeVector, v: &ModeVector) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    Ok(u.iter().zip(v.iter()).map(|(a, b)| a * b).sum())
}

/// Position/velocity pair at a given time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseState {
    pub position: ModeVector,
    pub velocity: ModeVector,
    pub time: f64,
}

impl PhaseState {
    pub fn new(position: ModeVector, velocity: ModeVector, time: f64) -> Result<Self> {
        if position.len() != velocity.len() {
            return Err(Error::DimensionMismatch {
                expected: position.len(),
                got: velocity.len(),
            });
        }
        Ok(PhaseState { position, velocity, time })
    }
}

/// The weight `phi` entering the exponential factor of the norm.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightPhi {
    /// `phi(sigma) = sigma^p`, p > 0.
    Power { exponent: f64 },
    /// `phi(sigma) = sigma`.
    Identity,
    /// Sampled table with linear interpolation; values must be positive.
    Table { table: SampledTable },
}

impl WeightPhi {
    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0) {
            return Err(Error::param("exponent", "must be > 0"));
        }
        Ok(WeightPhi::Power { exponent })
    }

    pub fn identity() -> Self {
        WeightPhi::Identity
    }

    pub fn table(table: SampledTable) -> Result<Self> {
        if table.min_value() <= 0.0 {
            return Err(Error::InvalidWeight { sigma: f64::NAN, value: table.min_value() });
        }
        Ok(WeightPhi::Table { table })
    }

    pub fn eval(&self, sigma: f64) -> f64 {
        match self {
            WeightPhi::Power { exponent } => sigma.powf(*exponent),
            WeightPhi::Identity => sigma,
            WeightPhi::Table { table } => table.eval(sigma),
        }
    }
}

/// Parameters (phi, r, alpha) of one space in the scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GevreyParams {
    pub phi: WeightPhi,
    pub r: f64,
    pub alpha: f64,
}

impl GevreyParams {
    pub fn new(phi: WeightPhi, r: f64, alpha: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::param("r", "radius must be > 0"));
        }
        if !(alpha >= 0.0) {
            return Err(Error::param("alpha", "must be >= 0"));
        }
        Ok(GevreyParams { phi, r, alpha })
    }
}

/// Result of a weighted-norm evaluation. The defining sum genuinely diverges
/// for rough data, so overflow is reported as a tagged infinite value rather
/// than an error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GevreyNorm {
    Finite(f64),
    Infinite,
}

impl GevreyNorm {
    pub fn is_finite(&self) -> bool {
        matches!(self, GevreyNorm::Finite(_))
    }

    pub fn value(&self) -> f64 {
        match self {
            GevreyNorm::Finite(v) => *v,
            GevreyNorm::Infinite => f64::INFINITY,
        }
    }
}

/// Weighted norm `( sum_k lambda_k^(4 alpha) u_k^2 exp(r phi(lambda_k)) )^(1/2)`.
///
/// Modes with a zero coefficient contribute nothing even when their
/// exponential factor overflows.
pub fn gevrey_norm(op: &SpectralOperator, u: &ModeVector, p: &GevreyParams) -> Result<GevreyNorm> {
    if u.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: u.len() });
    }
    let mut sum = 0.0f64;
    for (&l, &c) in op.eigenvalues().iter().zip(u.iter()) {
        if c == 0.0 {
            continue;
        }
        let weight = (p.r * p.phi.eval(l)).exp();
        let power = if p.alpha == 0.0 {
            1.0
        } else if l == 0.0 {
            0.0
        } else {
            l.powf(4.0 * p.alpha)
        };
        let term = power * c * c * weight;
        if !term.is_finite() {
            return Ok(GevreyNorm::Infinite);
        }
        sum += term;
    }
    if sum.is_finite() {
        Ok(GevreyNorm::Finite(sum.sqrt()))
    } else {
        Ok(GevreyNorm::Infinite)
    }
}

/// Membership test for the space with the given parameters: finite norm.
pub fn in_space(op: &SpectralOperator, u: &ModeVector, p: &GevreyParams) -> Result<bool> {
    Ok(gevrey_norm(op, u, p)?.is_finite())
}
