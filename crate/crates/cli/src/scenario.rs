//! Scenario configuration: one JSON file describes one reproducible
//! experiment. Tables referenced by path are resolved relative to the
//! config file.

use crate::runner::RunError;
use kirchhoff_lab::modulus::Hyperbolicity;
use kirchhoff_lab::spectral::WeightPhi;
use kirchhoff_lab::{
    ContinuityModulus, IntegratorConfig, ModeVector, Nonlinearity, SampledTable, Scheme,
    SpectralOperator,
};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub operator: OperatorSpec,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub modulus: Option<ModulusSpec>,
    #[serde(default)]
    pub phi: Option<PhiSpec>,
    pub initial: InitialData,
    #[serde(default)]
    pub integrator: Option<IntegratorSpec>,
    /// Second scheme for agreement studies.
    #[serde(default)]
    pub integrator_b: Option<IntegratorSpec>,
    #[serde(default)]
    pub s_grid: Option<SGridSpec>,
    /// Optional study name cross-checked against the subcommand.
    #[serde(default)]
    pub study: Option<String>,
    /// Hyperbolicity regime for smoothing studies (default strict).
    #[serde(default)]
    pub mode: Option<Hyperbolicity>,
    #[serde(default)]
    pub eps_sweep: Option<Vec<f64>>,
    #[serde(default)]
    pub s_offset: Option<f64>,
    #[serde(default)]
    pub s_extension: Option<f64>,
    #[serde(default)]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(default)]
    pub tol: Option<f64>,
    /// Output directory; the `--out` flag takes precedence. Consumed by
    /// `main` through a raw-value probe before the study is dispatched.
    #[allow(dead_code)]
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    #[serde(default)]
    pub eigenvalues: Option<Vec<f64>>,
    #[serde(default)]
    pub rule: Option<PowerRule>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerRule {
    pub power: f64,
    pub k: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum NonlinearitySpec {
    Constant { value: f64 },
    Affine { intercept: f64, slope: f64 },
    Power { coeff: f64, exponent: f64 },
    Table { path: PathBuf },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ModulusSpec {
    Linear,
    Holder { beta: f64 },
    LogLipschitz,
    Table {
        path: PathBuf,
        #[serde(default)]
        cap: Option<f64>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum PhiSpec {
    Identity,
    Power { exponent: f64 },
    Table { path: PathBuf },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub scheme: String,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SGridSpec {
    #[serde(default)]
    pub ds: Option<f64>,
    #[serde(default)]
    pub s_max: Option<f64>,
    #[serde(default)]
    pub s_start: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub delta: f64,
    #[serde(default)]
    pub mode_k: Option<usize>,
}

/// Batch of named studies executed in parallel.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub studies: Vec<SweepEntry>,
    /// Output directory; the `--out` flag takes precedence. Sub-studies
    /// always write below it under their own names. Consumed by `main`.
    #[allow(dead_code)]
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEntry {
    pub name: String,
    pub study: String,
    pub config: serde_json::Value,
}

fn config_err(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

impl ScenarioConfig {
    pub fn operator(&self) -> Result<SpectralOperator, RunError> {
        match (&self.operator.eigenvalues, &self.operator.rule) {
            (Some(list), None) => {
                SpectralOperator::new(list.clone()).map_err(|e| config_err(e.to_string()))
            }
            (None, Some(rule)) => SpectralOperator::from_power_rule(rule.k, rule.power)
                .map_err(|e| config_err(e.to_string())),
            _ => Err(config_err("operator: give exactly one of `eigenvalues` or `rule`")),
        }
    }

    pub fn nonlinearity(&self, base_dir: &Path) -> Result<Nonlinearity, RunError> {
        let m = match &self.nonlinearity {
            NonlinearitySpec::Constant { value } => Nonlinearity::constant(*value),
            NonlinearitySpec::Affine { intercept, slope } => {
                Nonlinearity::affine(*intercept, *slope)
            }
            NonlinearitySpec::Power { coeff, exponent } => Nonlinearity::power(*coeff, *exponent),
            NonlinearitySpec::Table { path } => {
                Nonlinearity::table(load_table(base_dir, path)?)
            }
        };
        m.map_err(|e| config_err(e.to_string()))
    }

    pub fn modulus(&self, base_dir: &Path) -> Result<ContinuityModulus, RunError> {
        match &self.modulus {
            None => Ok(ContinuityModulus::linear()),
            Some(ModulusSpec::Linear) => Ok(ContinuityModulus::linear()),
            Some(ModulusSpec::Holder { beta }) => {
                ContinuityModulus::holder(*beta).map_err(|e| config_err(e.to_string()))
            }
            Some(ModulusSpec::LogLipschitz) => Ok(ContinuityModulus::log_lipschitz()),
            Some(ModulusSpec::Table { path, cap }) => {
                ContinuityModulus::bounded_custom(load_table(base_dir, path)?, *cap)
                    .map_err(|e| config_err(e.to_string()))
            }
        }
    }

    pub fn phi(&self, base_dir: &Path) -> Result<WeightPhi, RunError> {
        match &self.phi {
            None => Ok(WeightPhi::identity()),
            Some(PhiSpec::Identity) => Ok(WeightPhi::identity()),
            Some(PhiSpec::Power { exponent }) => {
                WeightPhi::power(*exponent).map_err(|e| config_err(e.to_string()))
            }
            Some(PhiSpec::Table { path }) => WeightPhi::table(load_table(base_dir, path)?)
                .map_err(|e| config_err(e.to_string())),
        }
    }

    pub fn initial(&self, op: &SpectralOperator) -> Result<(ModeVector, ModeVector), RunError> {
        if self.initial.u0.len() != op.dim() || self.initial.u1.len() != op.dim() {
            return Err(config_err(format!(
                "initial data must have {} components",
                op.dim()
            )));
        }
        let u0 = ModeVector::new(self.initial.u0.clone()).map_err(|e| config_err(e.to_string()))?;
        let u1 = ModeVector::new(self.initial.u1.clone()).map_err(|e| config_err(e.to_string()))?;
        Ok((u0, u1))
    }

    pub fn integrator(&self, default: IntegratorConfig) -> Result<IntegratorConfig, RunError> {
        match &self.integrator {
            None => Ok(default),
            Some(spec) => spec.build(),
        }
    }

    pub fn hyperbolicity(&self) -> Hyperbolicity {
        self.mode.unwrap_or(Hyperbolicity::Strict)
    }
}

impl IntegratorSpec {
    pub fn build(&self) -> Result<IntegratorConfig, RunError> {
        let scheme = match self.scheme.as_str() {
            "stormer_verlet" | "verlet" => Scheme::StormerVerlet,
            "rk4" => Scheme::Rk4,
            other => return Err(config_err(format!("unknown scheme '{other}'"))),
        };
        IntegratorConfig::new(scheme, self.dt, self.t_end, self.stride.unwrap_or(100))
            .map_err(|e| config_err(e.to_string()))
    }
}

fn load_table(base_dir: &Path, path: &Path) -> Result<SampledTable, RunError> {
    let resolved = if path.is_absolute() { path.to_path_buf() } else { base_dir.join(path) };
    let text = std::fs::read_to_string(&resolved)
        .map_err(|e| config_err(format!("cannot read table {}: {e}", resolved.display())))?;
    SampledTable::from_csv_str(&text).map_err(|e| config_err(e.to_string()))
}
