//! Limit scheme for `ε → 0`: a linear Neumann problem for the dynamic
//! pressure `π` followed by an explicit momentum update on the dual cells.
//!
//! With `δU_σ = η_σ δt ρ̃_σ (∂π)_σ`, the limit of the compressible
//! stabilisation, the constraint `div_M(ρ̃(Uⁿ - δU)) = 0` becomes
//! `div_M(ρ̃² η δt ∇π) = div_M(ρ̃ Uⁿ)`.

use thiserror::Error;

use crate::diagnostics::{l1_error_cells, total_energy};
use crate::fluxes::{dual_convection, dual_fluxes, mass_flux};
use crate::linalg::{Factorisation, LinalgError, SparseSystem};
use crate::mac_grid::{discrete_gradient, dual_average, weighted_divergence, BcKind, CellField, FaceField, MacGrid};
use crate::thermo_hydro::HydrostaticState;
use crate::wb_solver::{FluidState, SchemeParams, Solver, SolverError};

#[derive(Debug, Error)]
pub enum AnelasticError {
    #[error("right-hand side violates compatibility: Σ|K| f_K = {imbalance:e} (scale {scale:e})")]
    Incompatible { imbalance: f64, scale: f64 },
    #[error("coefficient must be positive on interior faces (face {0})")]
    BadCoefficient(usize),
    #[error("boundary kind {0} is not supported by the limit scheme")]
    Boundary(&'static str),
    #[error("eta1 must exceed 1.5, got {0}")]
    BadEta(f64),
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error("empty parameter list")]
    Empty,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Relative tolerance of the compatibility check.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

/// Factorised `div_M(c ∇_E ·)` with zero-gradient exterior faces.
///
/// The operator is singular with constants in its kernel. One cell is
/// pinned to zero for the factorisation and the result is shifted to zero
/// `|K|`-weighted mean.
pub struct NeumannOperator {
    n: usize,
    volume: Vec<f64>,
    lu: Factorisation,
}

impl std::fmt::Debug for NeumannOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NeumannOperator").field("n", &self.n).finish()
    }
}

impl NeumannOperator {
    pub fn new(grid: &MacGrid, coeff: &FaceField) -> Result<Self, AnelasticError> {
        let n = grid.n_cells();
        let mut pattern = Vec::new();
        let mut values = Vec::new();
        pattern.push((0, 0));
        values.push(1.0);
        for (s, f) in grid.faces().iter().enumerate() {
            let (Some(k), Some(l)) = (f.minus, f.plus) else { continue };
            if !(coeff[s] > 0.0) {
                return Err(AnelasticError::BadCoefficient(s));
            }
            // row K of Σ_σ c |σ|²/|D_σ| (π_L - π_K) = |K| f_K
            let w = coeff[s] * f.area * f.area / f.dual_volume;
            for (row, other) in [(k, l), (l, k)] {
                if row == 0 {
                    continue;
                }
                pattern.push((row, row));
                values.push(-w);
                pattern.push((row, other));
                values.push(w);
            }
        }
        let sys = SparseSystem::new(n, &pattern)?;
        let lu = sys.factor(&values)?;
        let volume = (0..n).map(|k| grid.cell_volume(k)).collect();
        Ok(Self { n, volume, lu })
    }

    /// Zero-mean `π` with `div_M(c ∇π) = rhs`.
    pub fn solve(&self, rhs: &CellField) -> Result<CellField, AnelasticError> {
        self.solve_scaled(rhs, 0.0)
    }

    /// As [`NeumannOperator::solve`] for a right-hand side obtained as a
    /// divergence of face fluxes of total size `flux_scale` (`Σ_σ |σ||F_σ|`).
    /// The rounding-level imbalance of such data is checked against that
    /// scale and removed before the solve.
    pub fn solve_scaled(&self, rhs: &CellField, flux_scale: f64) -> Result<CellField, AnelasticError> {
        let imbalance = check_compatibility(&self.volume, rhs, flux_scale)?;
        let total: f64 = self.volume.iter().sum();
        let mut b: Vec<f64> = (0..self.n).map(|k| self.volume[k] * (rhs[k] - imbalance / total)).collect();
        b[0] = 0.0;
        let mut x = self.lu.solve(&b)?;
        let mean = x.iter().zip(&self.volume).map(|(v, w)| v * w).sum::<f64>() / total;
        for v in x.iter_mut() {
            *v -= mean;
        }
        let mut out = rhs.clone();
        out.copy_from_slice(&x);
        Ok(out)
    }
}

/// Returns `Σ|K| f_K` when it is negligible against the data scale.
fn check_compatibility(volume: &[f64], rhs: &CellField, flux_scale: f64) -> Result<f64, AnelasticError> {
    let imbalance: f64 = volume.iter().zip(rhs.iter()).map(|(w, f)| w * f).sum();
    let scale: f64 = volume.iter().zip(rhs.iter()).map(|(w, f)| (w * f).abs()).sum::<f64>().max(flux_scale);
    if imbalance.abs() > COMPATIBILITY_TOL * scale.max(f64::MIN_POSITIVE) && imbalance != 0.0 {
        return Err(AnelasticError::Incompatible { imbalance, scale });
    }
    Ok(imbalance)
}

/// One-shot form of [`NeumannOperator`].
pub fn neumann_elliptic_solve(
    grid: &MacGrid,
    coeff_face: &FaceField,
    rhs: &CellField,
) -> Result<CellField, AnelasticError> {
    NeumannOperator::new(grid, coeff_face)?.solve(rhs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnelasticState {
    pub u: FaceField,
    pub pi: CellField,
    pub t: f64,
}

/// Limit-scheme integrator with the elliptic operator factorised once.
///
/// The operator is assembled for `c_σ = ρ̃_σ η_σ`; the time step only
/// rescales the pressure.
pub struct AnelasticSolver {
    grid: MacGrid,
    hydro: HydrostaticState,
    eta: FaceField,
    rho_d: FaceField,
    op: NeumannOperator,
}

impl std::fmt::Debug for AnelasticSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnelasticSolver").field("cells", &self.grid.n_cells()).finish()
    }
}

impl AnelasticSolver {
    pub fn new(grid: MacGrid, hydro: HydrostaticState, eta1: f64) -> Result<Self, AnelasticError> {
        if !(eta1 > 1.5) {
            return Err(AnelasticError::BadEta(eta1));
        }
        for side in grid.bc().sides.iter().flatten() {
            if !matches!(side, BcKind::Wall | BcKind::Periodic) {
                return Err(AnelasticError::Boundary(side.name()));
            }
        }
        let rho_d = dual_average(&grid, &hydro.rho_tilde);
        let mut eta = FaceField::zeros(&grid);
        let mut coeff = FaceField::zeros(&grid);
        for (s, f) in grid.faces().iter().enumerate() {
            if f.is_interior() {
                eta[s] = eta1 / rho_d[s];
                coeff[s] = hydro.rho_tilde_face[s].powi(2) * eta[s];
            }
        }
        let op = NeumannOperator::new(&grid, &coeff)?;
        Ok(Self { grid, hydro, eta, rho_d, op })
    }

    pub fn grid(&self) -> &MacGrid {
        &self.grid
    }

    pub fn eta(&self) -> &FaceField {
        &self.eta
    }

    /// `div_M(ρ̃ v)`.
    pub fn constraint(&self, v: &FaceField) -> CellField {
        weighted_divergence(&self.grid, &self.hydro.rho_tilde_face, v)
    }

    /// `Σ_σ |σ| |ρ̃_σ v_σ|`, the size of the fluxes behind [`AnelasticSolver::constraint`].
    fn flux_scale(&self, v: &FaceField) -> f64 {
        self.grid.faces().iter().enumerate().map(|(s, f)| f.area * (self.hydro.rho_tilde_face[s] * v[s]).abs()).sum()
    }

    pub fn step(&self, state: &AnelasticState, dt: f64) -> Result<AnelasticState, AnelasticError> {
        if !(dt > 0.0) {
            return Err(AnelasticError::BadStep(dt));
        }
        let rhs = self.constraint(&state.u);
        let mut pi = self.op.solve_scaled(&rhs, self.flux_scale(&state.u))?;
        for v in pi.iter_mut() {
            *v /= dt;
        }
        let grad = discrete_gradient(&self.grid, &pi);
        let mut du = FaceField::zeros(&self.grid);
        for (s, f) in self.grid.faces().iter().enumerate() {
            if f.is_interior() {
                du[s] = self.eta[s] * dt * self.hydro.rho_tilde_face[s] * grad[s];
            }
        }
        let flux = mass_flux(&self.grid, &self.hydro.rho_tilde_face, &state.u, &du);
        let dual = dual_fluxes(&self.grid, &flux);
        let conv = dual_convection(&self.grid, &dual, &state.u);
        let mut u = FaceField::zeros(&self.grid);
        for (s, f) in self.grid.faces().iter().enumerate() {
            if f.is_interior() {
                let mom = self.rho_d[s] * state.u[s]
                    - dt / f.dual_volume * conv[s]
                    - dt * self.hydro.rho_tilde_face[s] * grad[s];
                u[s] = mom / self.rho_d[s];
            }
        }
        Ok(AnelasticState { u, pi, t: state.t + dt })
    }

    /// `max_K |div_M(ρ̃(U - δU))_K|` for the correction implied by `π`.
    pub fn constraint_residual(&self, u_old: &FaceField, pi: &CellField, dt: f64) -> f64 {
        let grad = discrete_gradient(&self.grid, pi);
        let mut v = u_old.clone();
        for (s, f) in self.grid.faces().iter().enumerate() {
            if f.is_interior() {
                v[s] -= self.eta[s] * dt * self.hydro.rho_tilde_face[s] * grad[s];
            }
        }
        self.constraint(&v).iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Leray-type projection: `U - ∇χ` with `div_M(ρ̃ ∇χ) = div_M(ρ̃ U)`.
    pub fn project(&self, u: &FaceField) -> Result<FaceField, AnelasticError> {
        let mut coeff = FaceField::zeros(&self.grid);
        for (s, f) in self.grid.faces().iter().enumerate() {
            if f.is_interior() {
                coeff[s] = self.hydro.rho_tilde_face[s];
            }
        }
        let chi = NeumannOperator::new(&self.grid, &coeff)?.solve_scaled(&self.constraint(u), self.flux_scale(u))?;
        let grad = discrete_gradient(&self.grid, &chi);
        let mut out = u.clone();
        for (s, f) in self.grid.faces().iter().enumerate() {
            out[s] = if f.is_interior() { u[s] - grad[s] } else { 0.0 };
        }
        Ok(out)
    }
}

/// Single limit-scheme step without a cached operator.
pub fn anelastic_step(
    grid: &MacGrid,
    state: &AnelasticState,
    hydro: &HydrostaticState,
    dt: f64,
    eta1: f64,
) -> Result<AnelasticState, AnelasticError> {
    AnelasticSolver::new(grid.clone(), hydro.clone(), eta1)?.step(state, dt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApRow {
    pub eps: f64,
    pub l1_rho: f64,
    pub internal_rel: f64,
    pub kinetic: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApReport {
    pub rows: Vec<ApRow>,
    /// Least-squares slope of `log ‖ρ^ε - ρ̃‖` against `log ε`.
    pub decay_order: f64,
}

impl ApReport {
    pub fn monotone(&self) -> bool {
        let mut rows: Vec<&ApRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        rows.windows(2).all(|w| w[1].l1_rho < w[0].l1_rho)
    }
}

/// Runs the compressible scheme for every `ε` and tabulates the distance to
/// the hydrostatic state. `initial(ε)` supplies the well-prepared data and
/// `params(ε)` the scheme configuration.
pub fn ap_convergence_experiment(
    grid: &MacGrid,
    hydro: &HydrostaticState,
    eps_list: &[f64],
    t_end: f64,
    params: impl Fn(f64) -> SchemeParams,
    initial: impl Fn(f64) -> FluidState,
) -> Result<ApReport, AnelasticError> {
    if eps_list.is_empty() {
        return Err(AnelasticError::Empty);
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let solver = Solver::new(grid.clone(), hydro.clone(), params(eps))?;
        let mut steps = 0;
        let end = solver.run_until(initial(eps), t_end, |_, _| steps += 1)?;
        let e = total_energy(grid, &end, hydro, eps);
        rows.push(ApRow {
            eps,
            l1_rho: l1_error_cells(grid, &end.rho, &hydro.rho_tilde),
            internal_rel: e.internal_rel,
            kinetic: e.kinetic,
            steps,
        });
    }
    let decay_order = fit_slope(&rows);
    Ok(ApReport { rows, decay_order })
}

fn fit_slope(rows: &[ApRow]) -> f64 {
    if rows.len() < 2 {
        return f64::NAN;
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps.ln(), r.l1_rho.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Face-wise distance `max_σ |u^ε_σ - U_σ|` at `t_end` between the
/// compressible scheme and the limit scheme, both started from the
/// projected velocity with `ρ = ρ̃` and advanced with the same fixed step.
pub fn limit_distance(
    grid: &MacGrid,
    hydro: &HydrostaticState,
    u0: &FaceField,
    eps: f64,
    dt: f64,
    t_end: f64,
    eta1: f64,
) -> Result<f64, AnelasticError> {
    let limit = AnelasticSolver::new(grid.clone(), hydro.clone(), eta1)?;
    let u = limit.project(u0)?;
    let mut params = SchemeParams::new(eps, hydro.law);
    params.eta1 = eta1;
    params.dt_fixed = Some(dt);
    let solver = Solver::new(grid.clone(), hydro.clone(), params)?;
    let comp = solver.run_until(FluidState { rho: hydro.rho_tilde.clone(), u: u.clone(), t: 0.0 }, t_end, |_, _| {})?;
    let mut st = AnelasticState { u, pi: CellField::zeros(grid), t: 0.0 };
    while st.t < t_end * (1.0 - 1e-14) {
        let rem = t_end - st.t;
        let h = if dt >= rem { rem } else { rem / (rem / dt * (1.0 - 1e-12)).ceil() };
        st = limit.step(&st, h)?;
    }
    Ok((0..grid.n_faces()).map(|s| (comp.u[s] - st.u[s]).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mac_grid::{build_grid, discrete_laplacian, BoundaryConditions, Domain};
    use crate::thermo_hydro::{hydrostatic_from_potential, GasLaw};

    fn unit_coeff(grid: &MacGrid) -> FaceField {
        let mut c = FaceField::constant(grid, 1.0);
        c.clear_exterior(grid);
        c
    }

    fn wall_grid(n: &[usize]) -> MacGrid {
        let dom = if n.len() == 1 { Domain::unit_interval() } else { Domain::unit_square() };
        build_grid(dom, n, BoundaryConditions::uniform(BcKind::Wall)).unwrap()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let grid = wall_grid(&[5, 4]);
        let pi = neumann_elliptic_solve(&grid, &unit_coeff(&grid), &CellField::zeros(&grid)).unwrap();
        assert!(pi.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn three_cell_hand_system() {
        // h = 1/3: Σ (|σ|²/|D_σ|)(π_L - π_K) = 3(π_L - π_K) and |K| f = (1,-2,1)/3
        let grid = wall_grid(&[3]);
        let f = CellField::from_vec(&grid, vec![1.0, -2.0, 1.0]).unwrap();
        let pi = neumann_elliptic_solve(&grid, &unit_coeff(&grid), &f).unwrap();
        // 3(π1-π0) = 1/3, 3(π2-π1) = -1/3 ... plus zero mean
        let a = 1.0 / 9.0;
        let expect = [-a / 3.0, 2.0 * a / 3.0, -a / 3.0];
        for k in 0..3 {
            assert!((pi[k] - expect[k]).abs() < 1e-14, "{k}: {}", pi[k]);
        }
    }

    #[test]
    fn laplacian_of_solution_matches_rhs() {
        let grid = wall_grid(&[7, 6]);
        let mut f = CellField::from_fn(&grid, |x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        for v in f.iter_mut() {
            *v -= mean;
        }
        let pi = neumann_elliptic_solve(&grid, &unit_coeff(&grid), &f).unwrap();
        let lap = discrete_laplacian(&grid, &pi);
        for k in 0..grid.n_cells() {
            assert!((lap[k] - f[k]).abs() < 1e-10);
        }
        let m: f64 = (0..grid.n_cells()).map(|k| grid.cell_volume(k) * pi[k]).sum();
        assert!(m.abs() < 1e-14);
    }

    #[test]
    fn incompatible_rhs_rejected() {
        let grid = wall_grid(&[4]);
        let f = CellField::constant(&grid, 1.0);
        match neumann_elliptic_solve(&grid, &unit_coeff(&grid), &f) {
            Err(AnelasticError::Incompatible { imbalance, .. }) => assert!((imbalance - 1.0).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    fn flat_solver(grid: &MacGrid) -> AnelasticSolver {
        let law = GasLaw::new(1.4).unwrap();
        let hs = hydrostatic_from_potential(grid, law, |_| 0.0, 3.5).unwrap();
        AnelasticSolver::new(grid.clone(), hs, 2.0).unwrap()
    }

    #[test]
    fn rest_stays_at_rest() {
        let grid = wall_grid(&[6, 6]);
        let s = flat_solver(&grid);
        let st = AnelasticState { u: FaceField::zeros(&grid), pi: CellField::zeros(&grid), t: 0.0 };
        let next = s.step(&st, 0.01).unwrap();
        assert!(next.u.iter().all(|&v| v == 0.0));
        assert!(next.pi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constraint_after_step() {
        let grid = wall_grid(&[8, 7]);
        let s = flat_solver(&grid);
        let mut u = FaceField::from_fn(&grid, |a, x| if a == 0 { (4.0 * x[1]).cos() } else { x[0] - 0.3 });
        u.clear_exterior(&grid);
        let st = AnelasticState { u: u.clone(), pi: CellField::zeros(&grid), t: 0.0 };
        let next = s.step(&st, 0.01).unwrap();
        assert!(s.constraint_residual(&u, &next.pi, 0.01) < 1e-10);
    }

    #[test]
    fn divergence_free_data_needs_no_pressure() {
        let grid = build_grid(Domain::unit_square(), &[6, 6], BoundaryConditions::uniform(BcKind::Periodic)).unwrap();
        let s = flat_solver(&grid);
        let u = FaceField::from_fn(&grid, |a, _| if a == 0 { 0.3 } else { -0.2 });
        let next = s.step(&AnelasticState { u: u.clone(), pi: CellField::zeros(&grid), t: 0.0 }, 0.05).unwrap();
        assert!(next.pi.iter().all(|v| v.abs() < 1e-13));
        for k in 0..grid.n_faces() {
            assert!((next.u[k] - u[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn projection_satisfies_constraint() {
        let grid = wall_grid(&[9, 9]);
        let law = GasLaw::new(1.4).unwrap();
        let hs = hydrostatic_from_potential(&grid, law, |x| x[0] + x[1], 3.5).unwrap();
        let s = AnelasticSolver::new(grid.clone(), hs, 2.0).unwrap();
        let mut u = FaceField::from_fn(&grid, |a, x| if a == 0 { x[1] * x[0] } else { 1.0 - x[0] });
        u.clear_exterior(&grid);
        let p = s.project(&u).unwrap();
        assert!(s.constraint(&p).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn transmissive_sides_rejected() {
        let grid =
            build_grid(Domain::unit_interval(), &[4], BoundaryConditions::uniform(BcKind::Transmissive)).unwrap();
        let law = GasLaw::new(1.4).unwrap();
        let hs = hydrostatic_from_potential(&grid, law, |_| 0.0, 3.5).unwrap();
        assert!(matches!(AnelasticSolver::new(grid, hs, 2.0), Err(AnelasticError::Boundary(_))));
    }
}
