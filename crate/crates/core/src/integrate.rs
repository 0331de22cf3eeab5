//! Fixed-step integration of the truncated mode system
//! `u_k'' + m(sum_j lambda_j^2 u_j^2) lambda_k^2 u_k = 0` in physical time.
//!
//! Two independent schemes are provided on purpose: agreement between
//! distinct discretizations of the same data is the working uniqueness
//! diagnostic for the rest of the crate.

use crate::error::{Error, Result};
use crate::modulus::Nonlinearity;
use crate::spectral::{inner, ModeVector, PhaseState, SpectralOperator};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Velocity (Stoermer) Verlet: symplectic, second order, one force
    /// evaluation per step. The nonlocal factor m(s) is recomputed at every
    /// position update; the system is Hamiltonian with H = |u'|^2 + M(s).
    StormerVerlet,
    /// Classical fourth-order Runge-Kutta on the first-order system (u, u').
    Rk4,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub sample_stride: usize,
}

impl IntegratorConfig {
    pub fn new(scheme: Scheme, dt: f64, t_end: f64, sample_stride: usize) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", "must be > 0"));
        }
        if !(t_end >= dt) {
            return Err(Error::param("t_end", "must be >= dt"));
        }
        if sample_stride == 0 {
            return Err(Error::param("sample_stride", "must be >= 1"));
        }
        Ok(IntegratorConfig { scheme, dt, t_end, sample_stride })
    }
}

/// Sampled solution of the truncated system.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<PhaseState>,
    pub operator: SpectralOperator,
    pub nonlinearity: Nonlinearity,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    /// `s(t) = |A^(1/2) u(t)|^2` per sample.
    pub fn s_values(&self) -> Vec<f64> {
        let l2: Vec<f64> = self.operator.eigenvalues().iter().map(|l| l * l).collect();
        self.samples
            .iter()
            .map(|st| st.position.iter().zip(&l2).map(|(u, l2)| l2 * u * u).sum())
            .collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|st| energy(&self.operator, &self.nonlinearity, st))
            .collect()
    }

    /// Largest relative deviation of the sampled energy from its initial value.
    pub fn relative_energy_drift(&self) -> f64 {
        let energies = self.energies();
        let e0 = energies[0];
        let scale = if e0.abs() > 0.0 { e0.abs() } else { 1.0 };
        energies.iter().map(|e| (e - e0).abs() / scale).fold(0.0, f64::max)
    }
}

struct System<'a> {
    lambda_sq: Vec<f64>,
    m: &'a Nonlinearity,
}

impl<'a> System<'a> {
    fn new(op: &SpectralOperator, m: &'a Nonlinearity) -> Self {
        System { lambda_sq: op.eigenvalues().iter().map(|l| l * l).collect(), m }
    }

    fn s_of(&self, u: &[f64]) -> f64 {
        self.lambda_sq.iter().zip(u).map(|(l2, c)| l2 * c * c).sum()
    }

    /// Fills `acc` with -m(s) lambda_k^2 u_k; errors if m goes negative.
    fn acceleration(&self, t: f64, u: &[f64], acc: &mut [f64]) -> Result<()> {
        let s = self.s_of(u);
        let mv = self.m.eval(s);
        if mv < 0.0 {
            return Err(Error::Model { t, argument: s, value: mv });
        }
        for ((a, l2), c) in acc.iter_mut().zip(&self.lambda_sq).zip(u) {
            *a = -mv * l2 * c;
        }
        Ok(())
    }
}

/// Integrates the truncated system from (u0, u1) up to `t_end`.
///
/// On divergence (non-finite state) the error carries the partial trajectory
/// up to the last good time.
pub fn integrate(
    op: &SpectralOperator,
    m: &Nonlinearity,
    u0: &ModeVector,
    u1: &ModeVector,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if u0.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: u0.len() });
    }
    if u1.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: u1.len() });
    }
    let k = op.dim();
    let sys = System::new(op, m);
    let dt = cfg.dt;
    let n_steps = (cfg.t_end / dt).round().max(1.0) as usize;

    let mut u: Vec<f64> = u0.as_slice().to_vec();
    let mut v: Vec<f64> = u1.as_slice().to_vec();
    let mut samples = Vec::with_capacity(n_steps / cfg.sample_stride + 2);
    samples.push(PhaseState::new(u0.clone(), u1.clone(), 0.0)?);

    let make_partial = |samples: Vec<PhaseState>| Trajectory {
        samples,
        operator: op.clone(),
        nonlinearity: m.clone(),
    };

    match cfg.scheme {
        Scheme::StormerVerlet => {
            let mut acc = vec![0.0; k];
            let mut acc_new = vec![0.0; k];
            sys.acceleration(0.0, &u, &mut acc)?;
            for step in 1..=n_steps {
                let t_prev = (step - 1) as f64 * dt;
                let t = step as f64 * dt;
                for i in 0..k {
                    u[i] += dt * v[i] + 0.5 * dt * dt * acc[i];
                }
                sys.acceleration(t, &u, &mut acc_new)?;
                for i in 0..k {
                    v[i] += 0.5 * dt * (acc[i] + acc_new[i]);
                }
                std::mem::swap(&mut acc, &mut acc_new);
                if !state_finite(&u, &v) {
                    return Err(Error::Divergence {
                        t: t_prev,
                        partial: Box::new(make_partial(samples)),
                    });
                }
                if step % cfg.sample_stride == 0 || step == n_steps {
                    samples.push(sample_at(t, &u, &v));
                }
            }
        }
        Scheme::Rk4 => {
            let mut ku = vec![vec![0.0; k]; 4];
            let mut kv = vec![vec![0.0; k]; 4];
            let mut ut = vec![0.0; k];
            for step in 1..=n_steps {
                let t_prev = (step - 1) as f64 * dt;
                let t = step as f64 * dt;
                // Stage 1
                ku[0].copy_from_slice(&v);
                sys.acceleration(t_prev, &u, &mut kv[0])?;
                // Stage 2
                for i in 0..k {
                    ut[i] = u[i] + 0.5 * dt * ku[0][i];
                }
                for i in 0..k {
                    ku[1][i] = v[i] + 0.5 * dt * kv[0][i];
                }
                sys.acceleration(t_prev + 0.5 * dt, &ut, &mut kv[1])?;
                // Stage 3
                for i in 0..k {
                    ut[i] = u[i] + 0.5 * dt * ku[1][i];
                }
                for i in 0..k {
                    ku[2][i] = v[i] + 0.5 * dt * kv[1][i];
                }
                sys.acceleration(t_prev + 0.5 * dt, &ut, &mut kv[2])?;
                // Stage 4
                for i in 0..k {
                    ut[i] = u[i] + dt * ku[2][i];
                }
                for i in 0..k {
                    ku[3][i] = v[i] + dt * kv[2][i];
                }
                sys.acceleration(t, &ut, &mut kv[3])?;
                for i in 0..k {
                    u[i] += dt / 6.0 * (ku[0][i] + 2.0 * ku[1][i] + 2.0 * ku[2][i] + ku[3][i]);
                    v[i] += dt / 6.0 * (kv[0][i] + 2.0 * kv[1][i] + 2.0 * kv[2][i] + kv[3][i]);
                }
                if !state_finite(&u, &v) {
                    return Err(Error::Divergence {
                        t: t_prev,
                        partial: Box::new(make_partial(samples)),
                    });
                }
                if step % cfg.sample_stride == 0 || step == n_steps {
                    samples.push(sample_at(t, &u, &v));
                }
            }
        }
    }

    Ok(make_partial(samples))
}

fn state_finite(u: &[f64], v: &[f64]) -> bool {
    u.iter().chain(v.iter()).all(|x| x.is_finite())
}

fn sample_at(t: f64, u: &[f64], v: &[f64]) -> PhaseState {
    PhaseState {
        position: ModeVector::from(u.to_vec()),
        velocity: ModeVector::from(v.to_vec()),
        time: t,
    }
}

/// Conserved energy `|u'|^2 + M(|A^(1/2) u|^2)` with M the primitive of m.
pub fn energy(op: &SpectralOperator, m: &Nonlinearity, state: &PhaseState) -> f64 {
    let s: f64 = op
        .eigenvalues()
        .iter()
        .zip(state.position.iter())
        .map(|(l, c)| l * l * c * c)
        .sum();
    state.velocity.norm_sq() + m.primitive(s)
}

/// Initial derivatives of `psi(t) = |A^(1/2) u(t)|^2 - |A^(1/2) u0|^2`:
/// returns `(psi'(0), psi''(0)) = (2 <A u0, u1>, 2 (|A^(1/2) u1|^2 - m(s0) |A u0|^2))`.
pub fn initial_signature(
    op: &SpectralOperator,
    m: &Nonlinearity,
    u0: &ModeVector,
    u1: &ModeVector,
) -> Result<(f64, f64)> {
    let au0 = op.apply_power(1.0, u0)?;
    let half_u0 = op.apply_power(0.5, u0)?;
    let half_u1 = op.apply_power(0.5, u1)?;
    let d1 = inner(&au0, u1)?;
    let s0 = half_u0.norm_sq();
    let second = half_u1.norm_sq() - m.eval(s0) * au0.norm_sq();
    Ok((2.0 * d1, 2.0 * second))
}
