//! Semi-implicit velocity-stabilised scheme.
//!
//! One step consists of
//! 1. `η_σ = η₁ / ρⁿ_{D_σ}`,
//! 2. an explicit time step from the face-wise positivity bound,
//! 3. a Newton solve of the implicit mass balance with stabilised fluxes,
//! 4. an explicit momentum update on the dual cells.
//!
//! The hydrostatic imbalance on a face is evaluated as
//! `ρ_σ ∂(h'(ρ) - h'(ρ̃))_σ`, which equals `(∂p)_σ + ρ_σ(∂φ)_σ` for the
//! reconstructed cell potential and vanishes identically at `ρ = ρ̃`.

use thiserror::Error;

use crate::diagnostics::total_energy;
use crate::fluxes::{dual_convection, dual_fluxes};
use crate::linalg::{LinalgError, SparseSystem};
use crate::mac_grid::{dual_average, BcKind, CellField, FaceField, MacGrid};
use crate::thermo_hydro::{GasLaw, HydrostaticState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid scheme parameters: {0}")]
    InvalidParams(String),
    #[error("density {value} at cell {cell} is not positive")]
    NonPositiveDensity { cell: usize, value: f64 },
    #[error("Newton failed after {iterations} iterations (residual {residual:e}, dt {dt:e})")]
    NewtonFailed { iterations: usize, residual: f64, dt: f64 },
    #[error("step failed after {halvings} time-step halvings at t = {t}: {source}")]
    StepFailed { halvings: usize, t: f64, source: Box<SolverError> },
    #[error("non-finite value in the velocity update at face {0}")]
    NonFinite(usize),
    #[error("admissible time step {dt:e} at t = {t} is below dt_min")]
    StepCollapsed { dt: f64, t: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams {
    pub eps: f64,
    pub law: GasLaw,
    pub eta1: f64,
    pub cfl_safety: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub max_halvings: usize,
    /// Upper bound on the time step.
    pub dt_max: f64,
    /// Bypass the adaptive step with a constant one.
    pub dt_fixed: Option<f64>,
    /// Abort when the adaptive step falls below this value.
    pub dt_min: f64,
}

impl SchemeParams {
    pub fn new(eps: f64, law: GasLaw) -> Self {
        Self {
            eps,
            law,
            eta1: 2.0,
            cfl_safety: 0.9,
            newton_tol: 1e-12,
            newton_max_iter: 20,
            max_halvings: 5,
            dt_max: f64::INFINITY,
            dt_fixed: None,
            dt_min: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidParams(m));
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return bad(format!("eps must lie in (0, 1], got {}", self.eps));
        }
        if !(self.eta1 > 1.5) {
            return bad(format!("eta1 must exceed 3/2, got {}", self.eta1));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return bad("Newton tolerance and iteration cap must be positive".into());
        }
        if !(self.dt_max > 0.0) {
            return bad(format!("dt_max must be positive, got {}", self.dt_max));
        }
        if !(self.dt_min >= 0.0) {
            return bad(format!("dt_min must be non-negative, got {}", self.dt_min));
        }
        if let Some(dt) = self.dt_fixed {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt_fixed must be positive, got {dt}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub rho: CellField,
    pub u: FaceField,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    pub newton_iterations: usize,
    pub newton_residual: f64,
    pub halvings: usize,
    pub min_density: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    pub mass_before: f64,
    pub mass_after: f64,
    /// Largest scaled dual mass balance residual `|r| δt / (|D_σ| max ρⁿ)`.
    pub dual_balance: f64,
    /// Faces where the bound re-evaluated with `ρ^{n+1}` is violated.
    pub dt_violations: usize,
    /// Faces where `η_σ ρ^{n+1}_{D_σ} < 1`.
    pub eta_violations: usize,
}

/// Result of the implicit mass update.
#[derive(Debug, Clone)]
pub struct MassUpdate {
    pub rho: CellField,
    pub delta_u: FaceField,
    /// Converged primal fluxes `G_σ` in the positive axis direction.
    pub flux: FaceField,
    /// `h'(ρ^{n+1}_K) - h'(ρ̃_K)`.
    pub imbalance: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
enum FaceKind {
    Interior {
        k: usize,
        l: usize,
        geo: f64,
    },
    Wall,
    /// Ghost holds the hydrostatic profile; `high` when the ghost is the plus side.
    Steady {
        k: usize,
        high: bool,
        rho_g: f64,
        geo: f64,
    },
    /// Ghost copies the inner cell; the face velocity is extrapolated from `opposite`.
    Open {
        k: usize,
        opposite: usize,
    },
}

/// `η_σ = η₁ / ρⁿ_{D_σ}`.
pub fn choose_eta(grid: &MacGrid, rho_n: &CellField, eta1: f64) -> FaceField {
    let mut eta = dual_average(grid, rho_n);
    for v in eta.iter_mut() {
        *v = eta1 / *v;
    }
    eta
}

/// Cell and face samples of the initial data.
///
/// Wall and steady-ghost exterior faces are set to zero velocity.
pub fn init_state(
    grid: &MacGrid,
    rho0: impl Fn([f64; 2]) -> f64,
    u0: impl Fn(usize, [f64; 2]) -> f64,
) -> Result<FluidState, SolverError> {
    let rho = CellField::from_fn(grid, rho0);
    if let Some((cell, &value)) = rho.iter().enumerate().find(|(_, &r)| !(r > 0.0)) {
        return Err(SolverError::NonPositiveDensity { cell, value });
    }
    let mut u = FaceField::from_fn(grid, u0);
    for (s, f) in grid.faces().iter().enumerate() {
        if let Some(side) = f.boundary {
            if matches!(grid.bc().side(side.axis, side.high), BcKind::Wall | BcKind::SteadyGhost) {
                u[s] = 0.0;
            }
        }
    }
    Ok(FluidState { rho, u, t: 0.0 })
}

struct Assembly {
    d: Vec<f64>,
    residual: Vec<f64>,
    jac: Vec<f64>,
    flux: FaceField,
    delta_u: FaceField,
}

pub struct Solver {
    grid: MacGrid,
    hydro: HydrostaticState,
    params: SchemeParams,
    kinds: Vec<FaceKind>,
    system: SparseSystem,
}

impl std::fmt::Debug for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solver").field("cells", &self.grid.n_cells()).field("params", &self.params).finish()
    }
}

impl Solver {
    pub fn new(grid: MacGrid, hydro: HydrostaticState, params: SchemeParams) -> Result<Self, SolverError> {
        params.validate()?;
        if hydro.law != params.law {
            return Err(SolverError::InvalidParams("hydrostatic state uses a different gas law".into()));
        }
        let mut kinds = Vec::with_capacity(grid.n_faces());
        let mut pattern: Vec<(usize, usize)> = (0..grid.n_cells()).map(|k| (k, k)).collect();
        for (s, f) in grid.faces().iter().enumerate() {
            let kind = match (f.minus, f.plus) {
                (Some(k), Some(l)) => {
                    pattern.extend_from_slice(&[(k, k), (k, l), (l, k), (l, l)]);
                    FaceKind::Interior { k, l, geo: f.area / f.dual_volume }
                }
                _ => {
                    let side = f.boundary.expect("exterior face");
                    let k = f.inner_cell();
                    match grid.bc().side(side.axis, side.high) {
                        BcKind::Wall | BcKind::Periodic => FaceKind::Wall,
                        BcKind::SteadyGhost => {
                            pattern.push((k, k));
                            FaceKind::Steady {
                                k,
                                high: side.high,
                                rho_g: hydro.ghost_rho[s],
                                geo: f.area / grid.ghost_dual_volume(s),
                            }
                        }
                        BcKind::Transmissive => {
                            pattern.push((k, k));
                            FaceKind::Open { k, opposite: grid.opposite_face(s) }
                        }
                    }
                }
            };
            kinds.push(kind);
        }
        let system = SparseSystem::new(grid.n_cells(), &pattern)?;
        Ok(Self { grid, hydro, params, kinds, system })
    }

    pub fn grid(&self) -> &MacGrid {
        &self.grid
    }

    pub fn hydro(&self) -> &HydrostaticState {
        &self.hydro
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut SchemeParams {
        &mut self.params
    }

    pub fn state_at_rest(&self) -> FluidState {
        FluidState { rho: self.hydro.rho_tilde.clone(), u: FaceField::zeros(&self.grid), t: 0.0 }
    }

    pub fn choose_eta(&self, rho_n: &CellField) -> FaceField {
        choose_eta(&self.grid, rho_n, self.params.eta1)
    }

    /// `h'(ρ_K) - h'(ρ̃_K)` from a density field.
    #[inline]
    fn d(&self, rho: &[f64], k: usize) -> f64 {
        let rt = self.hydro.rho_tilde[k];
        self.params.law.h_prime_diff(rho[k] - rt, rt)
    }

    /// Same from the perturbation `w = ρ - ρ̃`.
    #[inline]
    fn d_w(&self, w: &[f64], k: usize) -> f64 {
        self.params.law.h_prime_diff(w[k], self.hydro.rho_tilde[k])
    }

    fn perturbation(&self, rho: &CellField) -> Vec<f64> {
        rho.iter().zip(self.hydro.rho_tilde.iter()).map(|(r, t)| r - t).collect()
    }

    /// Largest admissible step from the face-wise positivity bound, with the
    /// unknown new state replaced by `rho_guess`.
    pub fn compute_dt(&self, state: &FluidState, rho_guess: &CellField, eta: &FaceField) -> f64 {
        let bound = self.dt_bound(state, rho_guess, eta);
        (self.params.cfl_safety * bound).min(self.params.dt_max)
    }

    fn face_dt_bounds(&self, state: &FluidState, rho_guess: &CellField, eta: &FaceField) -> Vec<f64> {
        let law = &self.params.law;
        let rho_n = &state.rho;
        let mut out = vec![f64::INFINITY; self.grid.n_faces()];
        for (s, slot) in out.iter_mut().enumerate() {
            let (mu, per, rho_face, dd) = match self.kinds[s] {
                FaceKind::Interior { k, l, .. } => {
                    let mu = rho_n[k].min(rho_n[l]) / rho_guess[k].max(rho_guess[l]);
                    let per = self.grid.perimeter_ratio(k).max(self.grid.perimeter_ratio(l));
                    let rf = law.gmean(rho_guess[k], rho_guess[l]);
                    (mu, per, rf, self.d(rho_guess, l) - self.d(rho_guess, k))
                }
                FaceKind::Steady { k, rho_g, .. } => {
                    let mu = rho_n[k].min(rho_g) / rho_guess[k].max(rho_g);
                    let rf = law.gmean(rho_guess[k], rho_g);
                    (mu, self.grid.perimeter_ratio(k), rf, self.d(rho_guess, k))
                }
                FaceKind::Open { k, .. } => (rho_n[k] / rho_guess[k], self.grid.perimeter_ratio(k), 0.0, 0.0),
                FaceKind::Wall => continue,
            };
            let speed = state.u[s].abs() + eta[s].sqrt() / self.params.eps * (rho_face * dd).abs().sqrt();
            let denom = per * speed;
            if denom > 0.0 {
                *slot = 1.0f64.min(mu / 3.0) / denom;
            }
        }
        out
    }

    fn dt_bound(&self, state: &FluidState, rho_guess: &CellField, eta: &FaceField) -> f64 {
        self.face_dt_bounds(state, rho_guess, eta).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Residual and Jacobian in the perturbation variable `w = ρ - ρ̃`.
    fn assemble(&self, w: &[f64], w_n: &[f64], u: &FaceField, eta: &FaceField, dt: f64, jac: bool) -> Assembly {
        let law = &self.params.law;
        let inv_eps2 = 1.0 / (self.params.eps * self.params.eps);
        let n = self.grid.n_cells();
        let rt = &self.hydro.rho_tilde;
        let rho: Vec<f64> = (0..n).map(|k| rt[k] + w[k]).collect();
        let d: Vec<f64> = (0..n).map(|k| self.d_w(w, k)).collect();
        let mut residual: Vec<f64> = (0..n).map(|k| self.grid.cell_volume(k) * (w[k] - w_n[k]) / dt).collect();
        let mut values: Vec<f64> =
            if jac { (0..n).map(|k| self.grid.cell_volume(k) / dt).collect() } else { Vec::new() };
        let mut flux = FaceField::zeros(&self.grid);
        let mut delta_u = FaceField::zeros(&self.grid);

        for (s, face) in self.grid.faces().iter().enumerate() {
            let area = face.area;
            match self.kinds[s] {
                FaceKind::Wall => {}
                FaceKind::Open { k, .. } => {
                    let o = if face.minus == Some(k) { 1.0 } else { -1.0 };
                    let g = area * rho[k] * u[s];
                    flux[s] = g;
                    residual[k] += o * g;
                    if jac {
                        values.push(o * area * u[s]);
                    }
                }
                FaceKind::Interior { k, l, geo } => {
                    let rf = law.gmean(rho[k], rho[l]);
                    let dd = d[l] - d[k];
                    let c = eta[s] * dt * inv_eps2 * geo;
                    let du = c * rf * dd;
                    let g = area * rf * (u[s] - du);
                    flux[s] = g;
                    delta_u[s] = du;
                    residual[k] += g;
                    residual[l] -= g;
                    if jac {
                        let (dk, dl) = law.gmean_derivatives(rho[k], rho[l]);
                        let common = u[s] - 2.0 * c * rf * dd;
                        let gk = area * (dk * common + c * rf * rf * law.h_second(rho[k]));
                        let gl = area * (dl * common - c * rf * rf * law.h_second(rho[l]));
                        values.extend_from_slice(&[gk, gl, -gk, -gl]);
                    }
                }
                FaceKind::Steady { k, high, rho_g, geo } => {
                    let (sides, o, sd) = if high { ((rho[k], rho_g), 1.0, -1.0) } else { ((rho_g, rho[k]), -1.0, 1.0) };
                    let rf = law.gmean(sides.0, sides.1);
                    let dd = sd * d[k];
                    let c = eta[s] * dt * inv_eps2 * geo;
                    let du = c * rf * dd;
                    let g = area * rf * (u[s] - du);
                    flux[s] = g;
                    delta_u[s] = du;
                    residual[k] += o * g;
                    if jac {
                        let (dm, dp) = law.gmean_derivatives(sides.0, sides.1);
                        let drf = if high { dm } else { dp };
                        let dg = area * (drf * (u[s] - 2.0 * c * rf * dd) - c * rf * rf * sd * law.h_second(rho[k]));
                        values.push(o * dg);
                    }
                }
            }
        }
        Assembly { residual, jac: values, flux, delta_u, d }
    }

    /// `R_K = |K|(ρ_K - ρⁿ_K)/δt + Σ_σ F_{σ,K}(ρ)` for a trial density.
    pub fn mass_residual(&self, state: &FluidState, rho: &CellField, eta: &FaceField, dt: f64) -> CellField {
        let a = self.assemble(&self.perturbation(rho), &self.perturbation(&state.rho), &state.u, eta, dt, false);
        CellField::from_vec(&self.grid, a.residual).expect("cell count")
    }

    /// Jacobian of [`Solver::mass_residual`] as a dense row-major matrix.
    pub fn mass_jacobian_dense(&self, state: &FluidState, rho: &CellField, eta: &FaceField, dt: f64) -> Vec<Vec<f64>> {
        let n = self.grid.n_cells();
        let a = self.assemble(&self.perturbation(rho), &self.perturbation(&state.rho), &state.u, eta, dt, true);
        let mut m = vec![vec![0.0; n]; n];
        for (&(r, c), &v) in self.pattern().iter().zip(&a.jac) {
            m[r][c] += v;
        }
        m
    }

    fn pattern(&self) -> Vec<(usize, usize)> {
        let mut pattern: Vec<(usize, usize)> = (0..self.grid.n_cells()).map(|k| (k, k)).collect();
        for kind in &self.kinds {
            match *kind {
                FaceKind::Interior { k, l, .. } => pattern.extend_from_slice(&[(k, k), (k, l), (l, k), (l, l)]),
                FaceKind::Steady { k, .. } | FaceKind::Open { k, .. } => pattern.push((k, k)),
                FaceKind::Wall => {}
            }
        }
        pattern
    }

    fn residual_norm(&self, residual: &[f64], dt: f64, rho_scale: f64) -> f64 {
        let m = residual.iter().enumerate().map(|(k, r)| (r / self.grid.cell_volume(k)).abs()).fold(0.0, f64::max);
        m * dt / rho_scale
    }

    /// Newton solve of the implicit mass balance with positivity line search.
    ///
    /// The unknown is the perturbation `w = ρ - ρ̃`, so that near-hydrostatic
    /// states are resolved well below the rounding level of `ρ` itself.
    pub fn newton_mass_update(&self, state: &FluidState, dt: f64, eta: &FaceField) -> Result<MassUpdate, SolverError> {
        let rho_scale = state.rho.max();
        let rt = &self.hydro.rho_tilde;
        let w_n = self.perturbation(&state.rho);
        let mut w = w_n.clone();
        let mut iterations = 0;
        loop {
            let a = self.assemble(&w, &w_n, &state.u, eta, dt, true);
            let residual = self.residual_norm(&a.residual, dt, rho_scale);
            if residual <= self.params.newton_tol {
                let rho: Vec<f64> = w.iter().zip(rt.iter()).map(|(w, t)| t + w).collect();
                return Ok(MassUpdate {
                    rho: CellField::from_vec(&self.grid, rho).expect("cell count"),
                    delta_u: a.delta_u,
                    flux: a.flux,
                    imbalance: a.d,
                    iterations,
                    residual,
                });
            }
            if iterations >= self.params.newton_max_iter || !residual.is_finite() {
                return Err(SolverError::NewtonFailed { iterations, residual, dt });
            }
            let rhs: Vec<f64> = a.residual.iter().map(|r| -r).collect();
            let delta = self.system.solve(&a.jac, &rhs)?;
            iterations += 1;
            let mut lambda = 1.0;
            while !(0..w.len()).all(|k| rt[k] + w[k] + lambda * delta[k] > 0.0) {
                lambda *= 0.5;
                if lambda < 1e-10 {
                    return Err(SolverError::NewtonFailed { iterations, residual, dt });
                }
            }
            for (w, d) in w.iter_mut().zip(&delta) {
                *w += lambda * d;
            }
        }
    }

    /// Explicit momentum update on dual cells from the converged mass fluxes.
    pub fn velocity_update(&self, state: &FluidState, update: &MassUpdate, dt: f64) -> Result<FaceField, SolverError> {
        let inv_eps2 = 1.0 / (self.params.eps * self.params.eps);
        let rho_d_old = dual_average(&self.grid, &state.rho);
        let rho_d_new = dual_average(&self.grid, &update.rho);
        let dual = dual_fluxes(&self.grid, &update.flux);
        let conv = dual_convection(&self.grid, &dual, &state.u);
        let law = &self.params.law;
        let rho = &update.rho;
        let mut u = FaceField::zeros(&self.grid);
        for (s, face) in self.grid.faces().iter().enumerate() {
            if let FaceKind::Interior { k, l, geo } = self.kinds[s] {
                let rf = law.gmean(rho[k], rho[l]);
                let force = geo * rf * (update.imbalance[l] - update.imbalance[k]);
                let mom = rho_d_old[s] * state.u[s] - dt / face.dual_volume * conv[s] - dt * inv_eps2 * force;
                u[s] = mom / rho_d_new[s];
                if !u[s].is_finite() {
                    return Err(SolverError::NonFinite(s));
                }
            }
        }
        for (s, kind) in self.kinds.iter().enumerate() {
            if let FaceKind::Open { opposite, .. } = *kind {
                u[s] = u[opposite];
            }
        }
        Ok(u)
    }

    fn dual_balance(&self, state: &FluidState, update: &MassUpdate, dt: f64) -> f64 {
        let rho_d_old = dual_average(&self.grid, &state.rho);
        let rho_d_new = dual_average(&self.grid, &update.rho);
        let dual = dual_fluxes(&self.grid, &update.flux);
        let scale = state.rho.max();
        let mut worst: f64 = 0.0;
        for (s, face) in self.grid.faces().iter().enumerate() {
            if face.is_interior() {
                let out: f64 = dual.of_face(s).iter().sum();
                let r = face.dual_volume * (rho_d_new[s] - rho_d_old[s]) / dt + out;
                worst = worst.max(r.abs() * dt / (face.dual_volume * scale));
            }
        }
        worst
    }

    fn mass(&self, rho: &CellField) -> f64 {
        (0..self.grid.n_cells()).map(|k| self.grid.cell_volume(k) * rho[k]).sum()
    }

    /// One step with the adaptive (or fixed) time step.
    pub fn step(&self, state: &FluidState) -> Result<(FluidState, StepReport), SolverError> {
        self.step_capped(state, f64::INFINITY)
    }

    /// One step with `dt ≤ dt_cap`.
    pub fn step_capped(&self, state: &FluidState, dt_cap: f64) -> Result<(FluidState, StepReport), SolverError> {
        self.advance(state, |dt| dt.min(dt_cap))
    }

    /// One step towards `t_target`. The remaining interval is split into
    /// equal steps no longer than the admissible one, so the run never ends
    /// on a sliver step.
    pub fn step_towards(&self, state: &FluidState, t_target: f64) -> Result<(FluidState, StepReport), SolverError> {
        let rem = t_target - state.t;
        self.advance(state, |dt| if dt >= rem { rem } else { rem / (rem / dt * (1.0 - 1e-12)).ceil() })
    }

    fn advance(
        &self,
        state: &FluidState,
        pick: impl FnOnce(f64) -> f64,
    ) -> Result<(FluidState, StepReport), SolverError> {
        let eta = self.choose_eta(&state.rho);
        let dt0 = match self.params.dt_fixed {
            Some(dt) => dt,
            None => self.compute_dt(state, &state.rho, &eta),
        };
        if dt0 < self.params.dt_min {
            return Err(SolverError::StepCollapsed { dt: dt0, t: state.t });
        }
        let mut dt = pick(dt0);
        let mut halvings = 0;
        let update = loop {
            match self.newton_mass_update(state, dt, &eta) {
                Ok(up) => break up,
                Err(e) => {
                    if halvings >= self.params.max_halvings {
                        return Err(SolverError::StepFailed { halvings, t: state.t, source: Box::new(e) });
                    }
                    halvings += 1;
                    dt *= 0.5;
                }
            }
        };
        let u = self.velocity_update(state, &update, dt)?;
        let eps = self.params.eps;
        let energy_before = total_energy(&self.grid, state, &self.hydro, eps).total;
        let dual_balance = self.dual_balance(state, &update, dt);

        let bounds = self.face_dt_bounds(state, &update.rho, &eta);
        let dt_violations = bounds.iter().filter(|&&b| dt > b * (1.0 + 1e-12)).count();
        let rho_d_new = dual_average(&self.grid, &update.rho);
        let eta_violations = self
            .grid
            .faces()
            .iter()
            .enumerate()
            .filter(|(s, f)| f.is_interior() && eta[*s] * rho_d_new[*s] < 1.0)
            .count();

        let next = FluidState { rho: update.rho.clone(), u, t: state.t + dt };
        let energy_after = total_energy(&self.grid, &next, &self.hydro, eps).total;
        let report = StepReport {
            dt,
            newton_iterations: update.iterations,
            newton_residual: update.residual,
            halvings,
            min_density: next.rho.min(),
            energy_before,
            energy_after,
            mass_before: self.mass(&state.rho),
            mass_after: self.mass(&next.rho),
            dual_balance,
            dt_violations,
            eta_violations,
        };
        Ok((next, report))
    }

    /// Advance to `t_end`, calling `observe` after every step.
    pub fn run_until(
        &self,
        mut state: FluidState,
        t_end: f64,
        mut observe: impl FnMut(&FluidState, &StepReport),
    ) -> Result<FluidState, SolverError> {
        while state.t < t_end * (1.0 - 1e-14) {
            let (next, report) = self.step_towards(&state, t_end)?;
            observe(&next, &report);
            state = next;
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mac_grid::{build_grid, BoundaryConditions, Domain};
    use crate::thermo_hydro::hydrostatic_from_potential;

    fn wall_solver(n: usize, eps: f64, phi: fn([f64; 2]) -> f64) -> Solver {
        let grid = build_grid(Domain::unit_interval(), &[n], BoundaryConditions::uniform(BcKind::Wall)).unwrap();
        let law = GasLaw::new(1.4).unwrap();
        let hs = hydrostatic_from_potential(&grid, law, phi, 3.5).unwrap();
        let mut p = SchemeParams::new(eps, law);
        p.dt_max = 0.02;
        Solver::new(grid, hs, p).unwrap()
    }

    #[test]
    fn params_validation() {
        let law = GasLaw::new(1.4).unwrap();
        let mut p = SchemeParams::new(0.1, law);
        assert!(p.validate().is_ok());
        p.eta1 = 1.4;
        assert!(p.validate().is_err());
        let mut p = SchemeParams::new(0.0, law);
        assert!(p.validate().is_err());
        p.eps = 1.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn eta_choice() {
        let grid = build_grid(Domain::unit_interval(), &[4], BoundaryConditions::uniform(BcKind::Wall)).unwrap();
        let one = CellField::constant(&grid, 1.0);
        assert!(choose_eta(&grid, &one, 2.0).iter().all(|&e| e == 2.0));
        let two = CellField::constant(&grid, 2.0);
        assert!(choose_eta(&grid, &two, 2.0).iter().all(|&e| e == 1.0));
    }

    #[test]
    fn hydrostatic_step_is_exact() {
        let s = wall_solver(50, 1e-3, |x| (2.0 * std::f64::consts::PI * x[0]).sin());
        let st = s.state_at_rest();
        let eta = s.choose_eta(&st.rho);
        assert_eq!(s.compute_dt(&st, &st.rho, &eta), 0.02);
        let (next, rep) = s.step(&st).unwrap();
        assert_eq!(rep.newton_iterations, 0);
        assert_eq!(next.rho, st.rho);
        assert!(next.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dt_grows_with_eps() {
        let grid = build_grid(Domain::unit_interval(), &[40], BoundaryConditions::uniform(BcKind::Wall)).unwrap();
        let law = GasLaw::new(1.4).unwrap();
        let hs = hydrostatic_from_potential(&grid, law, |x| x[0], 3.5).unwrap();
        let st = init_state(&grid, |x| 1.0 + 0.2 * (-50.0 * (x[0] - 0.5).powi(2)).exp(), |_, _| 0.1).unwrap();
        let mut dts = Vec::new();
        for eps in [0.05, 0.1, 0.2] {
            let s = Solver::new(grid.clone(), hs.clone(), SchemeParams::new(eps, law)).unwrap();
            let eta = s.choose_eta(&st.rho);
            dts.push(s.compute_dt(&st, &st.rho, &eta));
        }
        assert!(dts[0] <= dts[1] && dts[1] <= dts[2], "{dts:?}");
    }

    #[test]
    fn uniform_periodic_flow_is_unchanged() {
        let grid = build_grid(Domain::unit_square(), &[8, 6], BoundaryConditions::uniform(BcKind::Periodic)).unwrap();
        let law = GasLaw::new(2.0).unwrap();
        let hs = hydrostatic_from_potential(&grid, law, |_| 0.0, 2.0).unwrap();
        let s = Solver::new(grid.clone(), hs, SchemeParams::new(0.5, law)).unwrap();
        let st = init_state(&grid, |_| 1.0, |axis, _| if axis == 0 { 0.3 } else { -0.2 }).unwrap();
        let (next, rep) = s.step(&st).unwrap();
        assert!(rep.newton_iterations <= 1);
        for k in 0..grid.n_cells() {
            assert!((next.rho[k] - 1.0).abs() < 1e-14);
        }
        for sidx in 0..grid.n_faces() {
            assert!((next.u[sidx] - st.u[sidx]).abs() < 1e-13);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let grid = build_grid(
            Domain::unit_square(),
            &[4, 3],
            BoundaryConditions::new(BcKind::SteadyGhost, BcKind::Transmissive, BcKind::Wall, BcKind::SteadyGhost),
        )
        .unwrap();
        let law = GasLaw::new(1.4).unwrap();
        let hs = hydrostatic_from_potential(&grid, law, |x| x[0] + x[1], 3.5).unwrap();
        let s = Solver::new(grid.clone(), hs, SchemeParams::new(0.3, law)).unwrap();
        let st = init_state(&grid, |x| 1.0 + 0.3 * x[0] * x[1], |a, x| 0.2 * (a as f64 + 1.0) * x[0]).unwrap();
        let rho = CellField::from_fn(&grid, |x| 0.9 + 0.4 * x[0] - 0.2 * x[1] * x[1]);
        let eta = s.choose_eta(&st.rho);
        let dt = 0.01;
        let jac = s.mass_jacobian_dense(&st, &rho, &eta, dt);
        let n = grid.n_cells();
        for m in 0..n {
            let h = 1e-6;
            let mut rp = rho.clone();
            rp[m] += h;
            let mut rm = rho.clone();
            rm[m] -= h;
            let fp = s.mass_residual(&st, &rp, &eta, dt);
            let fm = s.mass_residual(&st, &rm, &eta, dt);
            for k in 0..n {
                let fd = (fp[k] - fm[k]) / (2.0 * h);
                let scale = jac[k][m].abs().max(1.0);
                assert!((fd - jac[k][m]).abs() / scale < 1e-6, "J[{k}][{m}] = {} vs {fd}", jac[k][m]);
            }
        }
    }

    #[test]
    fn wall_run_conserves_mass() {
        let s = wall_solver(60, 0.1, |x| x[0]);
        let hs = s.hydro().clone();
        let mut st = s.state_at_rest();
        for k in 0..60 {
            let x = s.grid().cell_center(k)[0];
            st.rho[k] = hs.rho_tilde[k] + 0.01 * (-100.0 * (x - 0.5).powi(2)).exp();
        }
        let m0: f64 = st.rho.iter().sum::<f64>() / 60.0;
        let end = s.run_until(st, 0.05, |_, r| assert!(r.energy_after <= r.energy_before + 1e-12)).unwrap();
        let m1: f64 = end.rho.iter().sum::<f64>() / 60.0;
        assert!(((m1 - m0) / m0).abs() < 1e-12);
        assert!((end.t - 0.05).abs() < 1e-14);
    }

    #[test]
    fn init_state_rejects_vacuum() {
        let grid = build_grid(Domain::unit_interval(), &[4], BoundaryConditions::uniform(BcKind::Wall)).unwrap();
        assert!(init_state(&grid, |x| x[0] - 0.5, |_, _| 0.0).is_err());
        let st = init_state(&grid, |_| 2.0, |_, _| 1.0).unwrap();
        assert_eq!(st.u[0], 0.0);
        assert_eq!(st.u[1], 1.0);
    }
}
