//! Study execution: builds core objects from a scenario config, runs the
//! requested study, and emits CSV/JSON artifacts plus a manifest recording
//! the config hash, the tolerances in force, and the measured constants.

use crate::scenario::{ScenarioConfig, SweepConfig};
use kirchhoff_lab::emit::{
    write_energy_trace_csv, write_strajectory_csv, write_trajectory_csv,
};
use kirchhoff_lab::integrate::{integrate, IntegratorConfig, Scheme, Trajectory};
use kirchhoff_lab::modulus::{
    comparison_bound_check, dyadic_grid, lower_bound_check, ComparisonOutcome,
};
use kirchhoff_lab::mollify::{
    epsilon_for_mode, mollify, verify_mollifier_estimates, Coefficient, EpsilonEstimate,
    ExtendedCoefficient, MollifiedCoefficient,
};
use kirchhoff_lab::reparam::{
    integrate_s, orientation_of, recover_time, to_s_trajectory, to_s_trajectory_on_grid,
    SIntegratorConfig, StartupParams,
};
use kirchhoff_lab::uniqueness::{
    classify_eigenpair, cross_solver_agreement, energy_trace, evaluate_criterion,
    iteration_bound_check, scan_degeneracy,
};
use kirchhoff_lab::{scenarios, Error as CoreError, ModeVector, Nonlinearity, SpectralOperator};
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum RunError {
    /// Bad config or unreadable inputs (exit 2).
    Config(String),
    /// The model violated its contract mid-run (exit 3).
    Model(String),
    /// Numerical blowup; partial outputs were kept (exit 4).
    Divergence(f64),
    /// I/O failure (exit 1).
    Io(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(msg) => write!(f, "config error: {msg}"),
            RunError::Model(msg) => write!(f, "model error: {msg}"),
            RunError::Divergence(t) => write!(f, "numerical divergence at t = {t}"),
            RunError::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Model(_) => 3,
            RunError::Divergence(_) => 4,
            RunError::Io(_) => 1,
        }
    }
}

fn map_core(e: CoreError) -> RunError {
    match e {
        CoreError::Divergence { t, .. } => RunError::Divergence(t),
        CoreError::InvalidParameter { .. }
        | CoreError::Table { .. }
        | CoreError::DimensionMismatch { .. } => RunError::Config(e.to_string()),
        other => RunError::Model(other.to_string()),
    }
}

fn io_err<T>(r: std::io::Result<T>) -> Result<T, RunError> {
    r.map_err(|e| RunError::Io(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Simulate,
    Reparam,
    Criterion,
    Agreement,
    Mollifier,
    Lemmas,
    Sweep,
}

impl StudyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::Simulate => "simulate",
            StudyKind::Reparam => "reparam",
            StudyKind::Criterion => "criterion",
            StudyKind::Agreement => "agreement",
            StudyKind::Mollifier => "mollifier",
            StudyKind::Lemmas => "lemmas",
            StudyKind::Sweep => "sweep",
        }
    }

    pub fn from_name(name: &str) -> Option<StudyKind> {
        Some(match name {
            "simulate" => StudyKind::Simulate,
            "reparam" => StudyKind::Reparam,
            "criterion" => StudyKind::Criterion,
            "agreement" => StudyKind::Agreement,
            "mollifier" => StudyKind::Mollifier,
            "lemmas" => StudyKind::Lemmas,
            "sweep" => StudyKind::Sweep,
            _ => return None,
        })
    }
}

#[derive(Serialize)]
struct Manifest {
    study: &'static str,
    config_sha256: String,
    tolerances: BTreeMap<&'static str, f64>,
    constants: BTreeMap<String, f64>,
    outputs: Vec<String>,
}

pub struct Session<'a> {
    pub config_text: String,
    pub base_dir: PathBuf,
    pub out_dir: &'a Path,
    pub seed: Option<u64>,
    pub quiet: bool,
}

/// Reads a config file, returning its text and the directory against which
/// relative table paths resolve.
pub fn read_config(config_path: &Path) -> Result<(String, PathBuf), RunError> {
    let config_text = std::fs::read_to_string(config_path)
        .map_err(|e| RunError::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let base_dir = config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((config_text, base_dir))
}

impl<'a> Session<'a> {
    pub fn from_file(
        config_path: &Path,
        out_dir: &'a Path,
        seed: Option<u64>,
        quiet: bool,
    ) -> Result<Self, RunError> {
        let (config_text, base_dir) = read_config(config_path)?;
        Ok(Session { config_text, base_dir, out_dir, seed, quiet })
    }

    pub fn without_config(out_dir: &'a Path, quiet: bool) -> Self {
        Session {
            config_text: String::new(),
            base_dir: PathBuf::from("."),
            out_dir,
            seed: None,
            quiet,
        }
    }

    fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.config_text.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn scenario(&self) -> Result<ScenarioConfig, RunError> {
        serde_json::from_str(&self.config_text).map_err(|e| RunError::Config(e.to_string()))
    }

    fn say(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn write_file(&self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        io_err(std::fs::create_dir_all(self.out_dir))?;
        io_err(std::fs::write(self.out_dir.join(name), bytes))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), RunError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| RunError::Io(e.to_string()))?;
        text.push('\n');
        self.write_file(name, text.as_bytes())
    }

    fn write_manifest(
        &self,
        study: StudyKind,
        tolerances: BTreeMap<&'static str, f64>,
        constants: BTreeMap<String, f64>,
        outputs: Vec<String>,
    ) -> Result<(), RunError> {
        let manifest = Manifest {
            study: study.name(),
            config_sha256: self.hash(),
            tolerances,
            constants,
            outputs,
        };
        self.write_json("manifest.json", &manifest)
    }
}

/// Dispatches a study; on success the out directory holds the artifacts and
/// `manifest.json`.
pub fn run(kind: StudyKind, session: &Session) -> Result<(), RunError> {
    if kind != StudyKind::Lemmas && kind != StudyKind::Sweep {
        let cfg = session.scenario()?;
        if let Some(declared) = &cfg.study {
            if declared != kind.name() {
                return Err(RunError::Config(format!(
                    "config declares study '{declared}' but subcommand is '{}'",
                    kind.name()
                )));
            }
        }
    }
    match kind {
        StudyKind::Simulate => run_simulate(session),
        StudyKind::Reparam => run_reparam(session),
        StudyKind::Criterion => run_criterion(session),
        StudyKind::Agreement => run_agreement(session),
        StudyKind::Mollifier => run_mollifier(session),
        StudyKind::Lemmas => run_lemmas(session),
        StudyKind::Sweep => run_sweep(session),
    }
}

fn default_integrator() -> IntegratorConfig {
    IntegratorConfig::new(Scheme::StormerVerlet, 1e-4, 10.0, 100).unwrap()
}

/// Integrates, writing the partial trajectory before surfacing a divergence.
fn integrate_with_partial(
    session: &Session,
    op: &SpectralOperator,
    m: &Nonlinearity,
    u0: &ModeVector,
    u1: &ModeVector,
    cfg: &IntegratorConfig,
    csv_name: &str,
) -> Result<Trajectory, RunError> {
    match integrate(op, m, u0, u1, cfg) {
        Ok(traj) => Ok(traj),
        Err(CoreError::Divergence { t, partial }) => {
            let mut buf = Vec::new();
            io_err(write_trajectory_csv(&partial, &mut buf))?;
            self_write(session, csv_name, &buf)?;
            session.say(&format!("divergence at t = {t}; partial {csv_name} kept"));
            Err(RunError::Divergence(t))
        }
        Err(e) => Err(map_core(e)),
    }
}

fn self_write(session: &Session, name: &str, bytes: &[u8]) -> Result<(), RunError> {
    session.write_file(name, bytes)
}

fn s_initial(op: &SpectralOperator, u0: &ModeVector) -> f64 {
    op.eigenvalues().iter().zip(u0.iter()).map(|(l, c)| l * l * c * c).sum()
}

fn oriented_coefficient(
    m: &Nonlinearity,
    s0: f64,
    span: f64,
    orientation: i8,
) -> Result<ExtendedCoefficient, RunError> {
    let c = if orientation >= 0 {
        ExtendedCoefficient::new(m.clone(), s0, span)
    } else {
        ExtendedCoefficient::reflected(m.clone(), s0, span)
    };
    c.map_err(map_core)
}

fn run_simulate(session: &Session) -> Result<(), RunError> {
    let cfg = session.scenario()?;
    let op = cfg.operator()?;
    let m = cfg.nonlinearity(&session.base_dir)?;
    let (u0, u1) = cfg.initial(&op)?;
    let icfg = cfg.integrator(default_integrator())?;

    let traj = integrate_with_partial(session, &op, &m, &u0, &u1, &icfg, "trajectory.csv")?;
    let mut buf = Vec::new();
    io_err(write_trajectory_csv(&traj, &mut buf))?;
    session.write_file("trajectory.csv", &buf)?;

    let drift = traj.relative_energy_drift();
    let mut constants = BTreeMap::new();
    constants.insert("relative_energy_drift".into(), drift);
    constants.insert("final_time".into(), traj.samples.last().unwrap().time);
    constants.insert("n_samples".into(), traj.samples.len() as f64);
    let tolerances = BTreeMap::from([("dt", icfg.dt), ("csv_significant_digits", 17.0)]);
    session.write_manifest(
        StudyKind::Simulate,
        tolerances,
        constants,
        vec!["trajectory.csv".into()],
    )?;
    session.say(&format!(
        "simulate: {} samples, relative energy drift {drift:.3e}",
        traj.samples.len()
    ));
    Ok(())
}

#[derive(Serialize)]
struct ReparamSidecar {
    orientation: i8,
    #[serde(rename = "D1")]
    d1: f64,
    beta: f64,
    gamma1_measured: Option<f64>,
    roundtrip_time_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    direct_agreement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncated_at: Option<f64>,
}

fn run_reparam(session: &Session) -> Result<(), RunError> {
    let cfg = session.scenario()?;
    let op = cfg.operator()?;
    let m = cfg.nonlinearity(&session.base_dir)?;
    let (u0, u1) = cfg.initial(&op)?;
    let icfg = cfg
        .integrator(IntegratorConfig::new(Scheme::StormerVerlet, 1e-4, 10.0, 1).unwrap())?;

    let traj = integrate_with_partial(session, &op, &m, &u0, &u1, &icfg, "trajectory.csv")?;
    let st = to_s_trajectory(&traj).map_err(map_core)?;
    let mut buf = Vec::new();
    io_err(write_strajectory_csv(&st, &mut buf))?;
    session.write_file("strajectory.csv", &buf)?;

    let recomputed = recover_time(&st).map_err(map_core)?;
    let roundtrip = recomputed
        .iter()
        .zip(&st.recovered_time)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);

    let span = st.states.last().unwrap().s;
    let gamma1 = st.measured_gamma1(0.01 * span);

    let mut outputs = vec!["trajectory.csv".into(), "strajectory.csv".into()];
    let mut direct_agreement = None;
    let mut truncated_at = None;
    // Direct s-integration when the startup is nondegenerate.
    if st.d1.abs() + st.beta.abs() > 0.0 {
        let sg = cfg.s_grid;
        let s_max = sg.and_then(|g| g.s_max).unwrap_or(0.9 * span).min(span);
        let ds = sg.and_then(|g| g.ds).unwrap_or(s_max / 8192.0);
        let mut scfg = SIntegratorConfig::new(ds).map_err(map_core)?;
        if let Some(s_start) = sg.and_then(|g| g.s_start) {
            scfg = scfg.with_s_start(s_start);
        }
        let orientation = orientation_of(st.d1, st.beta).map_err(map_core)?;
        let s0 = s_initial(&op, &u0);
        let c = oriented_coefficient(&m, s0, s_max, orientation)?;
        let startup = StartupParams::new(st.d1, st.beta, scfg.s_start.unwrap_or(16.0 * ds))
            .map_err(map_core)?;
        let z0 = op.apply_power(0.5, &u0).map_err(map_core)?;
        let direct = integrate_s(&op, &c, &startup, &z0, &u1, s_max, &scfg).map_err(map_core)?;
        truncated_at = direct.truncated_at;
        let mut buf = Vec::new();
        io_err(write_strajectory_csv(&direct, &mut buf))?;
        session.write_file("strajectory_direct.csv", &buf)?;
        outputs.push("strajectory_direct.csv".into());

        if let Ok(resampled) = to_s_trajectory_on_grid(&traj, &direct.s_grid()) {
            let mut worst = 0.0f64;
            for (a, b) in direct.states.iter().zip(&resampled.states) {
                for j in 0..a.z.len() {
                    worst = worst.max((a.z.get(j) - b.z.get(j)).abs());
                    worst = worst.max((a.w.get(j) - b.w.get(j)).abs());
                }
            }
            direct_agreement = Some(worst);
        }
    }

    let sidecar = ReparamSidecar {
        orientation: st.orientation,
        d1: st.d1,
        beta: st.beta,
        gamma1_measured: gamma1,
        roundtrip_time_error: roundtrip,
        direct_agreement,
        truncated_at,
    };
    session.write_json("reparam.json", &sidecar)?;
    outputs.push("reparam.json".into());

    let mut constants = BTreeMap::new();
    constants.insert("roundtrip_time_error".into(), roundtrip);
    if let Some(g) = gamma1 {
        constants.insert("gamma1_measured".into(), g);
    }
    if let Some(d) = direct_agreement {
        constants.insert("direct_agreement".into(), d);
    }
    let tolerances = BTreeMap::from([("dt", icfg.dt), ("csv_significant_digits", 17.0)]);
    session.write_manifest(StudyKind::Reparam, tolerances, constants, outputs)?;
    session.say(&format!(
        "reparam: orientation {}, roundtrip time error {roundtrip:.3e}",
        st.orientation
    ));
    Ok(())
}

#[derive(Serialize)]
struct CriterionArtifact {
    criterion: kirchhoff_lab::CriterionReport,
    eigenpair: kirchhoff_lab::EigenpairReport,
    scan_tol: f64,
    events: Vec<kirchhoff_lab::DegeneracyEvent>,
}

fn run_criterion(session: &Session) -> Result<(), RunError> {
    let cfg = session.scenario()?;
    let op = cfg.operator()?;
    let m = cfg.nonlinearity(&session.base_dir)?;
    let (u0, u1) = cfg.initial(&op)?;
    let report = evaluate_criterion(&op, &m, &u0, &u1, cfg.tol).map_err(map_core)?;
    let eigenpair = classify_eigenpair(&op, &u0, &u1, &m, cfg.tol).map_err(map_core)?;

    let icfg = cfg
        .integrator(IntegratorConfig::new(Scheme::StormerVerlet, 1e-4, 5.0, 100).unwrap())?;
    let scan_tol = cfg.tol.unwrap_or_else(|| {
        let au0 = op.apply_power(1.0, &u0).map(|v| v.norm_sq().sqrt()).unwrap_or(0.0);
        1e-6 * (1.0 + au0 * u1.norm_sq().sqrt())
    });
    let traj = integrate_with_partial(session, &op, &m, &u0, &u1, &icfg, "trajectory.csv")?;
    let events = scan_degeneracy(&traj, &m, scan_tol);

    let artifact = CriterionArtifact { criterion: report, eigenpair, scan_tol, events };
    session.write_json("criterion.json", &artifact)?;

    let mut constants = BTreeMap::new();
    constants.insert("D1".into(), report.d1);
    constants.insert("D2".into(), report.d2);
    constants.insert("n_events".into(), artifact.events.len() as f64);
    let tolerances = BTreeMap::from([("criterion_tol", report.tol), ("scan_tol", scan_tol)]);
    session.write_manifest(
        StudyKind::Criterion,
        tolerances,
        constants,
        vec!["criterion.json".into()],
    )?;
    session.say(&format!(
        "criterion: D1 = {}, D2 = {}, nondegenerate = {}",
        report.d1, report.d2, report.nondegenerate
    ));
    Ok(())
}

fn perturbation_direction(session: &Session, dim: usize) -> Vec<f64> {
    match session.seed {
        None => {
            let mut dir = vec![0.0; dim];
            dir[0] = 1.0;
            dir
        }
        Some(seed) => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut dir: Vec<f64> =
                (0..dim).map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for x in dir.iter_mut() {
                    *x /= norm;
                }
            } else {
                dir[0] = 1.0;
            }
            dir
        }
    }
}

fn run_agreement(session: &Session) -> Result<(), RunError> {
    let cfg = session.scenario()?;
    let op = cfg.operator()?;
    let m = cfg.nonlinearity(&session.base_dir)?;
    let (u0, u1) = cfg.initial(&op)?;
    let cfg_a = cfg
        .integrator(IntegratorConfig::new(Scheme::StormerVerlet, 1e-4, 5.0, 10).unwrap())?;
    let cfg_b = match &cfg.integrator_b {
        Some(spec) => spec.build()?,
        None => IntegratorConfig::new(Scheme::Rk4, 1e-3, cfg_a.t_end, 1).map_err(map_core)?,
    };

    let report = cross_solver_agreement(&op, &m, &u0, &u1, &cfg_a, &cfg_b).map_err(map_core)?;
    session.write_json("agreement.json", &report)?;
    let mut outputs = vec!["agreement.json".into()];
    let mut constants = BTreeMap::new();
    constants.insert("sup_distance".into(), report.sup_distance);
    constants.insert("n_common".into(), report.n_common as f64);

    if let Some(pert) = &cfg.perturbation {
        let dir = perturbation_direction(session, op.dim());
        let u1b = ModeVector::new(
            u1.iter().zip(&dir).map(|(c, d)| c + pert.delta * d).collect(),
        )
        .map_err(map_core)?;
        let dense = IntegratorConfig::new(cfg_a.scheme, cfg_a.dt, cfg_a.t_end, 1)
            .map_err(map_core)?;
        let ta = integrate(&op, &m, &u0, &u1, &dense).map_err(map_core)?;
        let tb = integrate(&op, &m, &u0, &u1b, &dense).map_err(map_core)?;
        let sa = to_s_trajectory(&ta).map_err(map_core)?;
        let sb = to_s_trajectory(&tb).map_err(map_core)?;
        if sa.orientation != sb.orientation {
            return Err(RunError::Model(
                "perturbed pair has mismatched orientations".into(),
            ));
        }
        let s_end =
            0.95 * sa.states.last().unwrap().s.min(sb.states.last().unwrap().s);
        let n = 1024;
        let grid: Vec<f64> = (0..=n).map(|j| s_end * j as f64 / n as f64).collect();
        let a = to_s_trajectory_on_grid(&ta, &grid).map_err(map_core)?;
        let b = to_s_trajectory_on_grid(&tb, &grid).map_err(map_core)?;

        let omega = cfg.modulus(&session.base_dir)?;
        let phi = cfg.phi(&session.base_dir)?;
        let mode = cfg.hyperbolicity();
        let s0 = s_initial(&op, &u0);
        let base = oriented_coefficient(&m, s0, s_end, sa.orientation)?;
        let base: std::sync::Arc<dyn Coefficient> = std::sync::Arc::new(base);

        let k = pert.mode_k.unwrap_or(1);
        let lambda_k = *op
            .eigenvalues()
            .get(k - 1)
            .ok_or_else(|| RunError::Config(format!("mode_k {k} out of range")))?;
        let eps = epsilon_for_mode(lambda_k, &omega, mode).map_err(map_core)?;
        let c_eps: MollifiedCoefficient =
            mollify(base, &omega, eps, mode).map_err(map_core)?;
        let trace = energy_trace(&op, &phi, &a, &b, &c_eps, k).map_err(map_core)?;
        let name = format!("energy_trace_k{k}.csv");
        let mut buf = Vec::new();
        io_err(write_energy_trace_csv(&trace, &mut buf))?;
        session.write_file(&name, &buf)?;
        outputs.push(name);
        constants.insert(format!("gamma_k{k}"), trace.gamma);
        constants.insert(format!("epsilon_k{k}"), eps);
        let e_max = trace.e.iter().cloned().fold(0.0f64, f64::max);
        constants.insert(
            format!("max_e_over_delta_sq_k{k}"),
            e_max / (pert.delta * pert.delta),
        );
        if let Some(seed) = session.seed {
            constants.insert("seed".into(), seed as f64);
        }
    }

    let tolerances = BTreeMap::from([
        ("dt_a", cfg_a.dt),
        ("dt_b", cfg_b.dt),
        ("time_match_tol", 1e-9),
    ]);
    session.write_manifest(StudyKind::Agreement, tolerances, constants, outputs)?;
    session.say(&format!(
        "agreement: sup distance {:.3e} over {} common samples",
        report.sup_distance, report.n_common
    ));
    if let Some(t) = report.diverged {
        return Err(RunError::Divergence(t));
    }
    Ok(())
}

#[derive(Serialize)]
struct MollifierArtifact {
    per_epsilon: Vec<EpsilonEstimate>,
    gamma3: f64,
    gamma4: f64,
    ceps_min: f64,
    ceps_max: f64,
    s_offset: f64,
    s_extension: f64,
}

fn run_mollifier(session: &Session) -> Result<(), RunError> {
    let cfg = session.scenario()?;
    let op = cfg.operator()?;
    let m = cfg.nonlinearity(&session.base_dir)?;
    let (u0, _) = cfg.initial(&op)?;
    let omega = cfg.modulus(&session.base_dir)?;
    let s_offset = cfg.s_offset.unwrap_or_else(|| s_initial(&op, &u0));
    let s_extension = cfg.s_extension.unwrap_or(2.0);
    let c = ExtendedCoefficient::new(m.clone(), s_offset, s_extension).map_err(map_core)?;

    let sweep: Vec<f64> = cfg
        .eps_sweep
        .clone()
        .unwrap_or_else(|| (2..=12).map(|e| 2f64.powi(-e)).collect());
    // Negated form on purpose: rejects NaN along with nonpositive widths.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if sweep.iter().any(|&e| !(e > 0.0)) {
        return Err(RunError::Config("eps_sweep entries must be > 0".into()));
    }

    // Scale-matched measurement: relative offsets around s = 0 plus fixed
    // far-field points covering both constant extensions.
    let relative: Vec<f64> = (-21..=21).map(|j| j as f64 / 7.0).collect();
    let mut far: Vec<f64> = vec![-0.9, -0.3];
    let n_far = 8;
    for i in 0..=n_far {
        far.push(s_extension * (0.2 + 0.9 * i as f64 / n_far as f64));
    }

    let mut per_epsilon = Vec::new();
    for &eps in &sweep {
        let mut grid: Vec<f64> = relative.iter().map(|g| g * eps).collect();
        grid.extend_from_slice(&far);
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let report =
            verify_mollifier_estimates(&c, &omega, &[eps], &grid).map_err(map_core)?;
        per_epsilon.push(report.per_epsilon[0]);
    }
    let gamma3 = per_epsilon.iter().map(|e| e.gamma3).fold(0.0, f64::max);
    let gamma4 = per_epsilon.iter().map(|e| e.gamma4).fold(0.0, f64::max);
    let ceps_min = per_epsilon.iter().map(|e| e.ceps_min).fold(f64::INFINITY, f64::min);
    let ceps_max = per_epsilon.iter().map(|e| e.ceps_max).fold(f64::NEG_INFINITY, f64::max);
    let artifact = MollifierArtifact {
        per_epsilon,
        gamma3,
        gamma4,
        ceps_min,
        ceps_max,
        s_offset,
        s_extension,
    };
    session.write_json("mollifier.json", &artifact)?;

    let mut constants = BTreeMap::new();
    constants.insert("gamma3".into(), gamma3);
    constants.insert("gamma4".into(), gamma4);
    constants.insert("ceps_min".into(), ceps_min);
    constants.insert("ceps_max".into(), ceps_max);
    let tolerances = BTreeMap::from([
        ("convolution_nodes", 64.0),
        ("derivative_step_factor", 1e-4),
    ]);
    session.write_manifest(
        StudyKind::Mollifier,
        tolerances,
        constants,
        vec!["mollifier.json".into()],
    )?;
    session.say(&format!("mollifier: gamma3 = {gamma3:.4}, gamma4 = {gamma4:.4}"));
    Ok(())
}

#[derive(Serialize)]
struct LemmaChecks {
    omega_lower_bound: Vec<OmegaCheck>,
    comparison_equality: ComparisonCheck,
    iteration_envelope: IterationCheck,
    time_recovery: TimeRecoveryCheck,
    all_pass: bool,
}

#[derive(Serialize)]
struct OmegaCheck {
    name: String,
    worst_ratio: f64,
    passes: bool,
}

#[derive(Serialize)]
struct ComparisonCheck {
    outcome: String,
    margin: f64,
}

#[derive(Serialize)]
struct IterationCheck {
    envelope_ok: bool,
    final_iterate_sup: f64,
}

#[derive(Serialize)]
struct TimeRecoveryCheck {
    max_error: f64,
    passes: bool,
}

fn run_lemmas(session: &Session) -> Result<(), RunError> {
    // Modulus lower bound over the dyadic grid for every built-in.
    let grid = dyadic_grid(-20, 20);
    let omega_lower_bound: Vec<OmegaCheck> = scenarios::builtin_moduli()
        .iter()
        .map(|omega| {
            let r = lower_bound_check(omega, &grid);
            OmegaCheck { name: omega.name(), worst_ratio: r.worst_ratio, passes: r.passes }
        })
        .collect();

    // Comparison bound, equality case y = t e^t.
    let ts: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
    let y: Vec<f64> = ts.iter().map(|t| t * t.exp()).collect();
    let ones = vec![1.0; ts.len()];
    let comp = comparison_bound_check(&ts, &y, &ones, &ones).map_err(map_core)?;
    let comparison_equality = ComparisonCheck {
        outcome: format!("{:?}", comp.outcome),
        margin: comp.margin,
    };

    // Factorial envelope of the iterated singular operator.
    let ts: Vec<f64> = (0..=2000).map(|i| i as f64 / 2000.0).collect();
    let y: Vec<f64> = ts.iter().map(|t| t.sqrt()).collect();
    let iter_report = iteration_bound_check(&ts, &y, 1.0, 12).map_err(map_core)?;
    let iteration_envelope = IterationCheck {
        envelope_ok: iter_report.envelope_ok,
        final_iterate_sup: *iter_report.iterate_sup.last().unwrap(),
    };

    // Constructive time recovery against the stored parametrization.
    let fx = scenarios::linear_mixed();
    let icfg = IntegratorConfig::new(Scheme::StormerVerlet, 1e-4, 1.2, 1).map_err(map_core)?;
    let traj =
        integrate(&fx.operator, &fx.nonlinearity, &fx.u0, &fx.u1, &icfg).map_err(map_core)?;
    let st = to_s_trajectory(&traj).map_err(map_core)?;
    let recomputed = recover_time(&st).map_err(map_core)?;
    let max_error = recomputed
        .iter()
        .zip(&st.recovered_time)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let time_recovery = TimeRecoveryCheck { max_error, passes: max_error <= 1e-5 };

    let all_pass = omega_lower_bound.iter().all(|c| c.passes)
        && comp.outcome == ComparisonOutcome::Pass
        && iteration_envelope.envelope_ok
        && time_recovery.passes;
    let artifact = LemmaChecks {
        omega_lower_bound,
        comparison_equality,
        iteration_envelope,
        time_recovery,
        all_pass,
    };
    session.write_json("lemmas.json", &artifact)?;

    let mut constants = BTreeMap::new();
    constants.insert("all_pass".into(), if all_pass { 1.0 } else { 0.0 });
    constants.insert("time_recovery_error".into(), max_error);
    let tolerances = BTreeMap::from([("time_recovery_tol", 1e-5), ("lower_bound_tol", 1e-12)]);
    session.write_manifest(
        StudyKind::Lemmas,
        tolerances,
        constants,
        vec!["lemmas.json".into()],
    )?;
    session.say(&format!("lemmas: all_pass = {all_pass}"));
    Ok(())
}

fn run_sweep(session: &Session) -> Result<(), RunError> {
    let sweep: SweepConfig =
        serde_json::from_str(&session.config_text).map_err(|e| RunError::Config(e.to_string()))?;
    if sweep.studies.is_empty() {
        return Err(RunError::Config("sweep has no studies".into()));
    }
    let results: Vec<(String, Result<(), RunError>)> = sweep
        .studies
        .par_iter()
        .map(|entry| {
            let run_one = || -> Result<(), RunError> {
                let kind = StudyKind::from_name(&entry.study)
                    .ok_or_else(|| RunError::Config(format!("unknown study '{}'", entry.study)))?;
                if kind == StudyKind::Sweep {
                    return Err(RunError::Config("nested sweeps are not supported".into()));
                }
                let sub_out = session.out_dir.join(&entry.name);
                let sub = Session {
                    config_text: serde_json::to_string_pretty(&entry.config)
                        .map_err(|e| RunError::Config(e.to_string()))?,
                    base_dir: session.base_dir.clone(),
                    out_dir: &sub_out,
                    seed: session.seed,
                    quiet: session.quiet,
                };
                run(kind, &sub)
            };
            (entry.name.clone(), run_one())
        })
        .collect();

    #[derive(Serialize)]
    struct SweepStatus {
        name: String,
        ok: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    }
    let statuses: Vec<SweepStatus> = results
        .iter()
        .map(|(name, r)| SweepStatus {
            name: name.clone(),
            ok: r.is_ok(),
            error: r.as_ref().err().map(|e| e.to_string()),
        })
        .collect();
    session.write_json("sweep.json", &statuses)?;
    let n_ok = statuses.iter().filter(|s| s.ok).count() as f64;
    let mut constants = BTreeMap::new();
    constants.insert("n_studies".into(), statuses.len() as f64);
    constants.insert("n_ok".into(), n_ok);
    session.write_manifest(StudyKind::Sweep, BTreeMap::new(), constants, vec!["sweep.json".into()])?;
    session.say(&format!("sweep: {}/{} studies ok", n_ok as usize, statuses.len()));
    for (_, r) in results {
        r?;
    }
    Ok(())
}
