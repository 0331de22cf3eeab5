//! Built-in fixtures: small named scenarios used by the test suites and the
//! command-line studies.

use crate::modulus::{ContinuityModulus, Nonlinearity};
use crate::spectral::{ModeVector, SpectralOperator};
use crate::table::SampledTable;

/// A named (operator, nonlinearity, data) triple.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub operator: SpectralOperator,
    pub nonlinearity: Nonlinearity,
    pub u0: ModeVector,
    pub u1: ModeVector,
}

/// Single linear mode released from rest: u = cos t. D1 = 0, D2 = -1, so the
/// monotone branch runs with negative orientation.
pub fn linear_cos() -> Fixture {
    Fixture {
        name: "linear_cos",
        operator: SpectralOperator::new(vec![1.0]).unwrap(),
        nonlinearity: Nonlinearity::constant(1.0).unwrap(),
        u0: ModeVector::from(vec![1.0]),
        u1: ModeVector::from(vec![0.0]),
    }
}

/// Single linear mode with matched data: u = cos t + sin t, D1 = 1.
pub fn linear_mixed() -> Fixture {
    Fixture {
        name: "linear_mixed",
        operator: SpectralOperator::new(vec![1.0]).unwrap(),
        nonlinearity: Nonlinearity::constant(1.0).unwrap(),
        u0: ModeVector::from(vec![1.0]),
        u1: ModeVector::from(vec![1.0]),
    }
}

/// Single linear mode started from the origin: u = sin t. D1 = 0, beta = 1,
/// the singular-startup case with increasing orientation.
pub fn startup_sine() -> Fixture {
    Fixture {
        name: "startup_sine",
        operator: SpectralOperator::new(vec![1.0]).unwrap(),
        nonlinearity: Nonlinearity::constant(1.0).unwrap(),
        u0: ModeVector::from(vec![0.0]),
        u1: ModeVector::from(vec![1.0]),
    }
}

/// Two modes with the affine nonlinearity 1 + s; strongly nondegenerate.
pub fn two_mode_affine() -> Fixture {
    Fixture {
        name: "two_mode_affine",
        operator: SpectralOperator::new(vec![1.0, 2.0]).unwrap(),
        nonlinearity: Nonlinearity::affine(1.0, 1.0).unwrap(),
        u0: ModeVector::from(vec![1.0, 0.5]),
        u1: ModeVector::from(vec![0.3, 0.0]),
    }
}

/// The same-eigenvalue pair with m(s) = s: u rotates on a circle and
/// D1(t) = D2(t) = 0 along the whole orbit.
pub fn eigenpair_rotating() -> Fixture {
    Fixture {
        name: "eigenpair_rotating",
        operator: SpectralOperator::new(vec![1.0, 1.0]).unwrap(),
        nonlinearity: Nonlinearity::affine(0.0, 1.0).unwrap(),
        u0: ModeVector::unit(1, 2),
        u1: ModeVector::unit(2, 2),
    }
}

/// Same eigenvalue pair made nondegenerate by tilting the velocity.
pub fn near_eigenpair() -> Fixture {
    Fixture {
        name: "near_eigenpair",
        operator: SpectralOperator::new(vec![1.0, 1.0]).unwrap(),
        nonlinearity: Nonlinearity::affine(0.0, 1.0).unwrap(),
        u0: ModeVector::from(vec![1.0, 0.0]),
        u1: ModeVector::from(vec![0.5, 1.0]),
    }
}

/// Three modes under the weakly hyperbolic m(s) = sqrt(s); s stays away from
/// zero because the initial s is 2 and low modes trade energy out of phase.
pub fn three_mode_weak() -> Fixture {
    Fixture {
        name: "three_mode_weak",
        operator: SpectralOperator::new(vec![1.0, 2.0, 3.0]).unwrap(),
        nonlinearity: Nonlinearity::power(1.0, 0.5).unwrap(),
        u0: ModeVector::from(vec![1.0, 0.4, 0.2]),
        u1: ModeVector::from(vec![0.2, -0.1, 0.05]),
    }
}

/// Geometrically decaying data on K modes with lambda_k = k; the decay keeps
/// the high-frequency energy share small enough for tight conservation
/// budgets at dt = 1e-4.
pub fn decaying_data(k: usize) -> (ModeVector, ModeVector) {
    let u0: Vec<f64> = (1..=k).map(|j| 0.8 * 4f64.powi(1 - j as i32)).collect();
    let u1: Vec<f64> = (1..=k)
        .map(|j| 0.2 * 4f64.powi(1 - j as i32) * if j % 2 == 0 { -1.0 } else { 1.0 })
        .collect();
    (ModeVector::from(u0), ModeVector::from(u1))
}

/// K-mode scenario with lambda_k = k and a chosen nonlinearity, on the
/// decaying data above. For the weakly hyperbolic square root the velocity is
/// zeroed so s(t) stays below its initial value.
pub fn conservation_fixture(name: &'static str, m: Nonlinearity, k: usize, rest: bool) -> Fixture {
    let operator = SpectralOperator::from_power_rule(k, 1.0).unwrap();
    let (u0, u1) = decaying_data(k);
    Fixture {
        name,
        operator,
        nonlinearity: m,
        u0,
        u1: if rest { ModeVector::zeros(k) } else { u1 },
    }
}

/// The five nondegenerate scenarios used by the agreement studies; all have
/// |D1| + |D2| well above 0.1.
pub fn nondegenerate_suite() -> Vec<Fixture> {
    vec![
        linear_mixed(),
        two_mode_affine(),
        linear_cos(),
        three_mode_weak(),
        near_eigenpair(),
    ]
}

/// Every built-in continuity modulus, for the lemma-style sweeps.
pub fn builtin_moduli() -> Vec<ContinuityModulus> {
    let xs: Vec<f64> = (0..=64).map(|i| i as f64 * 0.25).collect();
    let table = SampledTable::from_fn(xs, |x| x).unwrap();
    vec![
        ContinuityModulus::linear(),
        ContinuityModulus::holder(0.25).unwrap(),
        ContinuityModulus::holder(0.5).unwrap(),
        ContinuityModulus::holder(0.75).unwrap(),
        ContinuityModulus::log_lipschitz(),
        ContinuityModulus::bounded_custom(table, None).unwrap(),
    ]
}
