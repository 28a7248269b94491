//! Executes one configured case and records its report.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use hydromac::anelastic_solver::{ap_convergence_experiment, AnelasticSolver, AnelasticState};
use hydromac::diagnostics::{
    cell_velocity, face_momentum, l1_error_cells, l1_error_faces_axis, relative_internal_sum, total_energy,
};
use hydromac::rusanov_ref::{colocated_init, ColocatedState, RusanovError, RusanovScheme};
use hydromac::{
    build_grid, hydrostatic_from_potential, init_state, CellField, Domain, FaceField, FluidState, GasLaw,
    HydrostaticState, MacGrid, SchemeParams, Solver,
};
use thiserror::Error;

use crate::cases::{self, initial_data, CaseId};
use crate::config::{CaseConfig, ConfigError, SchemeKind};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv error on {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("malformed report {path}: {msg}")]
    Report { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    CrashedAsExpected,
    Failed,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::CrashedAsExpected => "crashed-as-expected",
            RunStatus::Failed => "failed",
        }
    }
}

/// One row of `errors.csv`: named norms at one `(ε, mesh)` point.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub eps: f64,
    pub mesh: Vec<usize>,
    pub norms: Vec<(String, f64)>,
}

impl ErrorRow {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.norms.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub step: usize,
    pub t: f64,
    pub kinetic: f64,
    pub internal_rel: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub newton_iterations: usize,
    pub halvings: usize,
    pub min_density: f64,
    pub dual_balance: f64,
}

/// A sampled field: cell values or one axis family of face values.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub name: String,
    pub coords: Vec<[f64; 2]>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub fields: Vec<Field>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: CaseConfig,
    pub status: RunStatus,
    pub message: Option<String>,
    pub errors: Vec<ErrorRow>,
    pub energy: Vec<EnergyRecord>,
    pub steps: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    /// Directory holding `report.txt`, when output was requested.
    pub dir: Option<PathBuf>,
}

impl RunReport {
    pub fn final_snapshot(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    pub fn field(&self, name: &str) -> Option<&Field> {
        self.final_snapshot()?.fields.iter().find(|f| f.name == name)
    }

    /// `(median, max)` Newton iterations over all steps.
    pub fn newton_stats(&self) -> Option<(usize, usize)> {
        let mut its: Vec<usize> = self.steps.iter().map(|s| s.newton_iterations).collect();
        if its.is_empty() {
            return None;
        }
        its.sort_unstable();
        Some((its[its.len() / 2], *its.last().unwrap()))
    }

    /// Largest step-to-step rise of the total energy.
    pub fn max_energy_increase(&self) -> f64 {
        self.energy.windows(2).map(|w| w[1].total - w[0].total).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_density(&self) -> f64 {
        self.steps.iter().map(|s| s.min_density).fold(f64::INFINITY, f64::min)
    }
}

pub fn make_grid(cfg: &CaseConfig) -> Result<MacGrid, ConfigError> {
    let domain = if cfg.mesh.len() == 1 { Domain::unit_interval() } else { Domain::unit_square() };
    build_grid(domain, &cfg.mesh, cfg.bc.clone())
        .map_err(|e| ConfigError::Value { key: "n".into(), msg: e.to_string() })
}

pub fn make_hydro(cfg: &CaseConfig, grid: &MacGrid) -> Result<HydrostaticState, ConfigError> {
    let law = GasLaw::new(cfg.gamma).map_err(|e| ConfigError::Value { key: "gamma".into(), msg: e.to_string() })?;
    let potential = cfg.potential;
    hydrostatic_from_potential(grid, law, move |x| potential.eval(x), cases::isentropic_constant(cfg.gamma))
        .map_err(|e| ConfigError::Value { key: "potential".into(), msg: e.to_string() })
}

pub fn scheme_params(cfg: &CaseConfig, law: GasLaw, eps: f64) -> SchemeParams {
    let mut p = SchemeParams::new(eps, law);
    p.eta1 = cfg.eta1;
    p.cfl_safety = cfg.cfl_safety;
    p.newton_tol = cfg.newton_tol;
    p.dt_max = cfg.dt_max;
    p.dt_fixed = cfg.dt_fixed;
    p.dt_min = cfg.dt_min;
    p
}

/// Runs the case. Scheme failures are reported through [`RunReport::status`];
/// `Err` means the configuration or the output directory was unusable.
pub fn run_case(cfg: &CaseConfig) -> Result<RunReport, RunError> {
    cfg.validate()?;
    let grid = make_grid(cfg)?;
    let hydro = make_hydro(cfg, &grid)?;
    let mut rec = Recorder::new(cfg)?;
    let outcome = match (cfg.case, cfg.scheme) {
        (CaseId::ApSweep, SchemeKind::Wb) => run_ap_sweep(cfg, &grid, &hydro, &mut rec),
        (CaseId::ApSweep, _) => {
            return Err(
                ConfigError::Value { key: "scheme".into(), msg: "ap_sweep runs the wb scheme only".into() }.into()
            )
        }
        (_, SchemeKind::Wb) => run_wb(cfg, &grid, hydro, &mut rec),
        (_, SchemeKind::Rusanov) => run_rusanov(cfg, &grid, &hydro, &mut rec),
        (_, SchemeKind::Anelastic) => run_anelastic(cfg, &grid, hydro, &mut rec)?,
    };
    rec.finish(outcome)
}

enum Outcome {
    Done,
    Crashed(String),
    Failed(String),
}

struct Recorder {
    report: RunReport,
    case_dir: Option<PathBuf>,
}

impl Recorder {
    fn new(cfg: &CaseConfig) -> Result<Self, RunError> {
        let case_dir = cfg.output.as_ref().map(|d| d.join(cfg.case.name()));
        if let Some(dir) = &case_dir {
            fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.clone(), source })?;
        }
        Ok(Self {
            report: RunReport {
                config: cfg.clone(),
                status: RunStatus::Completed,
                message: None,
                errors: Vec::new(),
                energy: Vec::new(),
                steps: Vec::new(),
                snapshots: Vec::new(),
                dir: case_dir.clone(),
            },
            case_dir,
        })
    }

    fn energy(&mut self, step: usize, t: f64, kinetic: f64, internal_rel: f64) {
        self.report.energy.push(EnergyRecord { step, t, kinetic, internal_rel, total: kinetic + internal_rel });
    }

    fn snapshot(&mut self, step: usize, t: f64, fields: Vec<Field>) -> Result<(), RunError> {
        let mut files = Vec::new();
        if let Some(dir) = &self.case_dir {
            for f in &fields {
                let path = dir.join(format!("{}_{step}.csv", f.name));
                write_field(&path, f)?;
                files.push(path);
            }
        }
        self.report.snapshots.push(Snapshot { step, t, fields, files });
        Ok(())
    }

    fn finish(mut self, outcome: Result<Outcome, RunError>) -> Result<RunReport, RunError> {
        match outcome? {
            Outcome::Done => {}
            Outcome::Crashed(m) => {
                self.report.status = RunStatus::CrashedAsExpected;
                self.report.message = Some(m);
            }
            Outcome::Failed(m) => {
                self.report.status = RunStatus::Failed;
                self.report.message = Some(m);
            }
        }
        if let Some(dir) = &self.case_dir {
            write_outputs(dir, &self.report)?;
        }
        Ok(self.report)
    }
}

/// Output times: snapshots then `t_end`.
fn targets(cfg: &CaseConfig) -> Vec<f64> {
    let mut t: Vec<f64> = cfg.snapshots.clone();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t.push(cfg.t_end);
    t
}

fn cell_coords(grid: &MacGrid) -> Vec<[f64; 2]> {
    (0..grid.n_cells()).map(|k| grid.cell_center(k)).collect()
}

fn face_field(grid: &MacGrid, name: &str, v: &FaceField, axis: usize) -> Field {
    let range = grid.faces_of_axis(axis);
    Field {
        name: name.into(),
        coords: range.clone().map(|s| grid.face(s).center).collect(),
        values: range.map(|s| v[s]).collect(),
    }
}

fn cell_field(grid: &MacGrid, name: &str, v: &[f64]) -> Field {
    Field { name: name.into(), coords: cell_coords(grid), values: v.to_vec() }
}

const FACE_NAMES: [&str; 2] = ["u", "v"];
const CELL_VEL: [&str; 2] = ["vel_x", "vel_y"];

fn mac_fields(grid: &MacGrid, rho: &CellField, u: &FaceField, pi: Option<&CellField>) -> Vec<Field> {
    let mut out = vec![cell_field(grid, "rho", rho)];
    let vel = cell_velocity(grid, u);
    for axis in 0..grid.dim() {
        out.push(cell_field(grid, CELL_VEL[axis], &vel[axis]));
    }
    for axis in 0..grid.dim() {
        out.push(face_field(grid, FACE_NAMES[axis], u, axis));
    }
    if let Some(pi) = pi {
        out.push(cell_field(grid, "pi", pi));
    }
    out
}

fn colocated_fields(grid: &MacGrid, s: &ColocatedState) -> Vec<Field> {
    let mut out = vec![cell_field(grid, "rho", &s.rho)];
    for axis in 0..grid.dim() {
        out.push(cell_field(grid, CELL_VEL[axis], &s.velocity(axis)));
    }
    out
}

fn initial(cfg: &CaseConfig) -> cases::InitialData {
    initial_data(cfg.case, cfg.gamma, cfg.eps, cfg.potential, cfg.zeta)
}

/// Norms of the final MAC state.
fn mac_norms(
    cfg: &CaseConfig,
    grid: &MacGrid,
    hydro: &HydrostaticState,
    init: &FluidState,
    end: &FluidState,
) -> ErrorRow {
    let mut norms: Vec<(String, f64)> = Vec::new();
    let m = face_momentum(grid, &end.rho, &end.u);
    let zero = FaceField::zeros(grid);
    match cfg.case {
        CaseId::Vortex2d => {
            let m0 = face_momentum(grid, &init.rho, &init.u);
            norms.push(("rho".into(), l1_error_cells(grid, &end.rho, &init.rho)));
            norms.push(("rho_u".into(), l1_error_faces_axis(grid, &m, &m0, 0)));
            norms.push(("rho_v".into(), l1_error_faces_axis(grid, &m, &m0, 1)));
        }
        CaseId::Sod1d => {
            let mass = |r: &CellField| (0..grid.n_cells()).map(|k| grid.cell_volume(k) * r[k]).sum::<f64>();
            let m0 = mass(&init.rho);
            norms.push(("mass_drift".into(), (mass(&end.rho) - m0).abs() / m0));
            norms.push(("min_rho".into(), end.rho.min()));
        }
        _ => {
            norms.push(("rho".into(), l1_error_cells(grid, &end.rho, &hydro.rho_tilde)));
            for axis in 0..grid.dim() {
                norms.push((MOM[axis].into(), l1_error_faces_axis(grid, &m, &zero, axis)));
            }
            norms.push(("min_rho".into(), end.rho.min()));
        }
    }
    if matches!(cfg.case, CaseId::Pert1d | CaseId::Pert2d | CaseId::WellBalance1d) {
        let e = total_energy(grid, end, hydro, cfg.eps);
        norms.push(("internal_rel".into(), e.internal_rel));
        norms.push(("kinetic".into(), e.kinetic));
    }
    ErrorRow { eps: cfg.eps, mesh: cfg.mesh.clone(), norms }
}

const MOM: [&str; 2] = ["rho_u", "rho_v"];

fn run_wb(cfg: &CaseConfig, grid: &MacGrid, hydro: HydrostaticState, rec: &mut Recorder) -> Result<Outcome, RunError> {
    let data = initial(cfg);
    let init = match init_state(grid, &data.rho, &data.u) {
        Ok(s) => s,
        Err(e) => return Ok(Outcome::Failed(e.to_string())),
    };
    let solver = match Solver::new(grid.clone(), hydro, scheme_params(cfg, GasLaw::new(cfg.gamma).unwrap(), cfg.eps)) {
        Ok(s) => s,
        Err(e) => return Err(ConfigError::Value { key: "scheme".into(), msg: e.to_string() }.into()),
    };
    let hydro = solver.hydro();
    let e0 = total_energy(grid, &init, hydro, cfg.eps);
    rec.energy(0, 0.0, e0.kinetic, e0.internal_rel);
    rec.snapshot(0, 0.0, mac_fields(grid, &init.rho, &init.u, None))?;
    let mut state = init.clone();
    let mut step = 0;
    for target in targets(cfg) {
        while state.t < target * (1.0 - 1e-14) {
            let (next, r) = match solver.step_towards(&state, target) {
                Ok(x) => x,
                Err(e) => return Ok(Outcome::Failed(format!("step {} at t = {}: {e}", step + 1, state.t))),
            };
            step += 1;
            rec.report.steps.push(StepRecord {
                step,
                t: next.t,
                dt: r.dt,
                newton_iterations: r.newton_iterations,
                halvings: r.halvings,
                min_density: r.min_density,
                dual_balance: r.dual_balance,
            });
            let e = total_energy(grid, &next, hydro, cfg.eps);
            rec.energy(step, next.t, e.kinetic, e.internal_rel);
            state = next;
        }
        rec.snapshot(step, state.t, mac_fields(grid, &state.rho, &state.u, None))?;
    }
    rec.report.errors.push(mac_norms(cfg, grid, hydro, &init, &state));
    Ok(Outcome::Done)
}

fn colocated_energy(grid: &MacGrid, law: &GasLaw, s: &ColocatedState, rho_ref: &CellField, eps: f64) -> (f64, f64) {
    let kinetic = (0..grid.n_cells())
        .map(|k| 0.5 * grid.cell_volume(k) * (s.m[0][k].powi(2) + s.m[1][k].powi(2)) / s.rho[k])
        .sum();
    (kinetic, relative_internal_sum(grid, law, &s.rho, rho_ref) / (eps * eps))
}

const RUSANOV_MAX_STEPS: usize = 50_000_000;

fn run_rusanov(
    cfg: &CaseConfig,
    grid: &MacGrid,
    hydro: &HydrostaticState,
    rec: &mut Recorder,
) -> Result<Outcome, RunError> {
    let scheme = RusanovScheme::new(grid.clone(), hydro, cfg.eps, cfg.cfl)
        .map_err(|e| ConfigError::Value { key: "cfl".into(), msg: e.to_string() })?;
    let data = initial(cfg);
    let init = colocated_init(grid, &data.rho, &data.u);
    let law = hydro.law;
    let (k0, i0) = colocated_energy(grid, &law, &init, &hydro.rho_tilde, cfg.eps);
    rec.energy(0, 0.0, k0, i0);
    rec.snapshot(0, 0.0, colocated_fields(grid, &init))?;
    let mut state = init.clone();
    let mut step = 0;
    for target in targets(cfg) {
        while state.t < target * (1.0 - 1e-14) {
            let crash = |e: RusanovError| {
                let msg = e.to_string();
                if matches!(e, RusanovError::Crashed { .. }) && cfg.eps <= 0.1 {
                    Outcome::Crashed(msg)
                } else {
                    Outcome::Failed(msg)
                }
            };
            if step >= RUSANOV_MAX_STEPS {
                return Ok(crash(RusanovError::StepLimit(RUSANOV_MAX_STEPS)));
            }
            let dt = scheme.time_step(&state).min(target - state.t);
            let next = match scheme.step_with(&state, dt, step) {
                Ok(s) => s,
                Err(e) => return Ok(crash(e)),
            };
            step += 1;
            rec.report.steps.push(StepRecord {
                step,
                t: next.t,
                dt,
                newton_iterations: 0,
                halvings: 0,
                min_density: next.rho.min(),
                dual_balance: 0.0,
            });
            let (k, i) = colocated_energy(grid, &law, &next, &hydro.rho_tilde, cfg.eps);
            rec.energy(step, next.t, k, i);
            state = next;
        }
        rec.snapshot(step, state.t, colocated_fields(grid, &state))?;
    }
    let mut norms: Vec<(String, f64)> = Vec::new();
    if cfg.case == CaseId::Sod1d {
        let m0 = init.mass(grid);
        norms.push(("mass_drift".into(), (state.mass(grid) - m0).abs() / m0));
    } else {
        let reference = if cfg.case == CaseId::Vortex2d { &init.rho } else { &hydro.rho_tilde };
        norms.push(("rho".into(), l1_error_cells(grid, &state.rho, reference)));
        for axis in 0..grid.dim() {
            let reference = if cfg.case == CaseId::Vortex2d { &init.m[axis][..] } else { &vec![0.0; grid.n_cells()] };
            norms.push((MOM[axis].into(), l1_error_cells(grid, &state.m[axis], reference)));
        }
    }
    norms.push(("min_rho".into(), state.rho.min()));
    rec.report.errors.push(ErrorRow { eps: cfg.eps, mesh: cfg.mesh.clone(), norms });
    Ok(Outcome::Done)
}

fn anelastic_dt(cfg: &CaseConfig, grid: &MacGrid, u: &FaceField) -> f64 {
    if let Some(dt) = cfg.dt_fixed {
        return dt;
    }
    let h = grid.spacing().iter().take(grid.dim()).copied().fold(f64::INFINITY, f64::min);
    let umax = u.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let convective = if umax > 0.0 { cfg.cfl_safety * h / (2.0 * grid.dim() as f64 * umax) } else { f64::INFINITY };
    cfg.dt_max.min(convective)
}

fn run_anelastic(
    cfg: &CaseConfig,
    grid: &MacGrid,
    hydro: HydrostaticState,
    rec: &mut Recorder,
) -> Result<Result<Outcome, RunError>, RunError> {
    let solver = AnelasticSolver::new(grid.clone(), hydro.clone(), cfg.eta1)
        .map_err(|e| ConfigError::Value { key: "scheme".into(), msg: e.to_string() })?;
    Ok(anelastic_loop(cfg, grid, &hydro, &solver, rec))
}

fn anelastic_loop(
    cfg: &CaseConfig,
    grid: &MacGrid,
    hydro: &HydrostaticState,
    solver: &AnelasticSolver,
    rec: &mut Recorder,
) -> Result<Outcome, RunError> {
    let data = initial(cfg);
    let mut u0 = FaceField::from_fn(grid, &data.u);
    u0.clear_exterior(grid);
    let u = match solver.project(&u0) {
        Ok(u) => u,
        Err(e) => return Ok(Outcome::Failed(e.to_string())),
    };
    let rho_d = dual_rho(grid, hydro);
    let kinetic = |u: &FaceField| -> f64 {
        grid.faces()
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_interior())
            .map(|(s, f)| 0.5 * f.dual_volume * rho_d[s] * u[s] * u[s])
            .sum()
    };
    let mut state = AnelasticState { u, pi: CellField::zeros(grid), t: 0.0 };
    let init_u = state.u.clone();
    rec.energy(0, 0.0, kinetic(&state.u), 0.0);
    rec.snapshot(0, 0.0, mac_fields(grid, &hydro.rho_tilde, &state.u, Some(&state.pi)))?;
    let mut step = 0;
    for target in targets(cfg) {
        while state.t < target * (1.0 - 1e-14) {
            let rem = target - state.t;
            let dt = anelastic_dt(cfg, grid, &state.u);
            let dt = if dt >= rem { rem } else { rem / (rem / dt * (1.0 - 1e-12)).ceil() };
            let next = match solver.step(&state, dt) {
                Ok(s) => s,
                Err(e) => return Ok(Outcome::Failed(format!("step {} at t = {}: {e}", step + 1, state.t))),
            };
            step += 1;
            rec.report.steps.push(StepRecord {
                step,
                t: next.t,
                dt,
                newton_iterations: 0,
                halvings: 0,
                min_density: hydro.rho_tilde.min(),
                dual_balance: solver.constraint_residual(&state.u, &next.pi, dt),
            });
            rec.energy(step, next.t, kinetic(&next.u), 0.0);
            state = next;
        }
        rec.snapshot(step, state.t, mac_fields(grid, &hydro.rho_tilde, &state.u, Some(&state.pi)))?;
    }
    let m = face_momentum(grid, &hydro.rho_tilde, &state.u);
    let m0 = face_momentum(grid, &hydro.rho_tilde, &init_u);
    let mut norms: Vec<(String, f64)> = Vec::new();
    for axis in 0..grid.dim() {
        norms.push((MOM[axis].into(), l1_error_faces_axis(grid, &m, &m0, axis)));
    }
    let residual = rec.report.steps.iter().map(|s| s.dual_balance).fold(0.0, f64::max);
    norms.push(("constraint".into(), residual));
    rec.report.errors.push(ErrorRow { eps: cfg.eps, mesh: cfg.mesh.clone(), norms });
    Ok(Outcome::Done)
}

fn dual_rho(grid: &MacGrid, hydro: &HydrostaticState) -> FaceField {
    hydromac::mac_grid::dual_average(grid, &hydro.rho_tilde)
}

fn run_ap_sweep(
    cfg: &CaseConfig,
    grid: &MacGrid,
    hydro: &HydrostaticState,
    rec: &mut Recorder,
) -> Result<Outcome, RunError> {
    let law = hydro.law;
    let params = |eps: f64| scheme_params(cfg, law, eps);
    let initial = |eps: f64| {
        let zeta = cases::default_zeta(cfg.case, eps);
        let data = initial_data(cfg.case, cfg.gamma, eps, cfg.potential, zeta);
        init_state(grid, &data.rho, &data.u).expect("positive perturbation")
    };
    let report = match ap_convergence_experiment(grid, hydro, &cfg.eps_list, cfg.t_end, params, initial) {
        Ok(r) => r,
        Err(e) => return Ok(Outcome::Failed(e.to_string())),
    };
    for (i, row) in report.rows.iter().enumerate() {
        rec.energy(i, cfg.t_end, row.kinetic, row.internal_rel);
        rec.report.errors.push(ErrorRow {
            eps: row.eps,
            mesh: cfg.mesh.clone(),
            norms: vec![
                ("rho".into(), row.l1_rho),
                ("internal_rel".into(), row.internal_rel),
                ("kinetic".into(), row.kinetic),
                ("steps".into(), row.steps as f64),
            ],
        });
    }
    rec.report.message = Some(format!("decay order {:.4}", report.decay_order));
    Ok(Outcome::Done)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> RunError + '_ {
    move |source| RunError::Csv { path: path.to_path_buf(), source }
}

fn write_field(path: &Path, f: &Field) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["x", "y", f.name.as_str()]).map_err(csv_err(path))?;
    for (c, v) in f.coords.iter().zip(&f.values) {
        w.write_record([c[0].to_string(), c[1].to_string(), v.to_string()]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_outputs(dir: &Path, r: &RunReport) -> Result<(), RunError> {
    let path = dir.join("errors.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    let names: Vec<String> =
        r.errors.first().map(|e| e.norms.iter().map(|(n, _)| n.clone()).collect()).unwrap_or_default();
    let mut header = vec!["eps".to_string(), "n".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(csv_err(&path))?;
    for row in &r.errors {
        let mut rec = vec![row.eps.to_string(), mesh_text(&row.mesh)];
        rec.extend(row.norms.iter().map(|(_, v)| v.to_string()));
        w.write_record(&rec).map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join("energy.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["step", "t", "kinetic", "internal_rel", "total"]).map_err(csv_err(&path))?;
    for e in &r.energy {
        w.write_record([
            e.step.to_string(),
            e.t.to_string(),
            e.kinetic.to_string(),
            e.internal_rel.to_string(),
            e.total.to_string(),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join("steps.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["step", "t", "dt", "newton_iterations", "halvings", "min_density", "dual_balance"])
        .map_err(csv_err(&path))?;
    for s in &r.steps {
        w.write_record([
            s.step.to_string(),
            s.t.to_string(),
            s.dt.to_string(),
            s.newton_iterations.to_string(),
            s.halvings.to_string(),
            s.min_density.to_string(),
            s.dual_balance.to_string(),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join("config.txt");
    fs::write(&path, r.config.to_text()).map_err(io_err(&path))?;
    let path = dir.join("report.txt");
    fs::write(&path, report_text(r)).map_err(io_err(&path))
}

pub fn mesh_text(mesh: &[usize]) -> String {
    mesh.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
}

fn report_text(r: &RunReport) -> String {
    let c = &r.config;
    let mut s = String::new();
    s += &format!("case = {}\nscheme = {}\nstatus = {}\n", c.case, c.scheme.name(), r.status.name());
    s += &format!("eps = {}\nmesh = {}\nt_end = {}\n", c.eps, mesh_text(&c.mesh), c.t_end);
    s += &format!("steps = {}\n", r.steps.len());
    if let Some(last) = r.final_snapshot() {
        s += &format!("final_step = {}\nfinal_t = {}\n", last.step, last.t);
        let steps: Vec<String> = r.snapshots.iter().map(|x| x.step.to_string()).collect();
        s += &format!("snapshot_steps = {}\n", steps.join(", "));
        let names: Vec<&str> = last.fields.iter().map(|f| f.name.as_str()).collect();
        s += &format!("fields = {}\n", names.join(", "));
    }
    if let Some((med, max)) = r.newton_stats().filter(|_| c.scheme == SchemeKind::Wb) {
        s += &format!("newton_median = {med}\nnewton_max = {max}\n");
    }
    if !r.steps.is_empty() {
        s += &format!("min_density = {}\n", r.min_density());
    }
    if r.energy.len() > 1 && c.case != CaseId::ApSweep {
        s += &format!("max_energy_increase = {}\n", r.max_energy_increase());
    }
    if let Some(m) = &r.message {
        s += &format!("message = {m}\n");
    }
    s
}

/// The `key = value` pairs of a `report.txt`.
pub fn read_report(dir: &Path) -> Result<Vec<(String, String)>, RunError> {
    let path = dir.join("report.txt");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim().to_string())))
        .collect())
}

pub fn read_field(path: &Path) -> Result<Field, RunError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let name = r.headers().map_err(csv_err(path))?.get(2).unwrap_or("value").to_string();
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let num = |i: usize| -> Result<f64, RunError> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| RunError::Report { path: path.to_path_buf(), msg: format!("bad number in column {i}") })
        };
        coords.push([num(0)?, num(1)?]);
        values.push(num(2)?);
    }
    Ok(Field { name, coords, values })
}
