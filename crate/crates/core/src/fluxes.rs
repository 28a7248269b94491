//! Stabilised primal mass fluxes, dual-cell fluxes and upwinding.
//!
//! Primal fluxes are stored once per face, oriented along the positive axis:
//! `G_σ = |σ| ρ_σ (u_σ - δu_σ)` leaves the minus cell and enters the plus cell.

use crate::mac_grid::{CellField, FaceField, MacGrid};
use crate::thermo_hydro::{GasLaw, HydrostaticState};

/// `δu_σ = ηδt/ε² [(∂p)_σ + ρ_σ(∂φ)_σ]` on interior faces, zero elsewhere.
#[allow(clippy::too_many_arguments)]
pub fn stabilisation_velocity(
    grid: &MacGrid,
    law: &GasLaw,
    eps: f64,
    rho_next: &CellField,
    rho_face_next: &FaceField,
    phi: &CellField,
    eta: &FaceField,
    dt: f64,
) -> FaceField {
    let mut du = FaceField::zeros(grid);
    let inv_eps2 = 1.0 / (eps * eps);
    for (s, f) in grid.faces().iter().enumerate() {
        if let (Some(k), Some(l)) = (f.minus, f.plus) {
            let g = f.area / f.dual_volume;
            let dp = g * (law.p(rho_next[l]) - law.p(rho_next[k]));
            let dphi = g * (phi[l] - phi[k]);
            du[s] = eta[s] * dt * inv_eps2 * (dp + rho_face_next[s] * dphi);
        }
    }
    du
}

/// Same quantity written against a hydrostatic reference:
/// `ηδt/ε² ρ_σ ∂(h'(ρ) - h'(ρ̃))_σ`.
///
/// Equal to [`stabilisation_velocity`] when `φ_K = C - h'(ρ̃_K)` and `ρ_σ` is
/// the γ-mean, and exactly zero at `ρ = ρ̃`.
pub fn stabilisation_velocity_balanced(
    grid: &MacGrid,
    hydro: &HydrostaticState,
    eps: f64,
    rho_next: &CellField,
    rho_face_next: &FaceField,
    eta: &FaceField,
    dt: f64,
) -> FaceField {
    let law = &hydro.law;
    let mut du = FaceField::zeros(grid);
    let inv_eps2 = 1.0 / (eps * eps);
    let d = |k: usize| law.h_prime(rho_next[k]) - law.h_prime(hydro.rho_tilde[k]);
    for (s, f) in grid.faces().iter().enumerate() {
        if let (Some(k), Some(l)) = (f.minus, f.plus) {
            let g = f.area / f.dual_volume;
            du[s] = eta[s] * dt * inv_eps2 * rho_face_next[s] * g * (d(l) - d(k));
        }
    }
    du
}

/// `G_σ = |σ| ρ_σ (u_σ - δu_σ)` on every face.
pub fn mass_flux(grid: &MacGrid, rho_face: &FaceField, u: &FaceField, delta_u: &FaceField) -> FaceField {
    let mut g = FaceField::zeros(grid);
    for (s, f) in grid.faces().iter().enumerate() {
        g[s] = f.area * rho_face[s] * (u[s] - delta_u[s]);
    }
    g
}

/// Flux `F_{σ,K}` leaving cell `K` through face `σ`.
pub fn outward(grid: &MacGrid, flux: &FaceField, s: usize, k: usize) -> f64 {
    if grid.face(s).minus == Some(k) {
        flux[s]
    } else {
        -flux[s]
    }
}

/// Fluxes through the faces of each dual cell, in the order of [`MacGrid::dual_links`].
#[derive(Debug, Clone, PartialEq)]
pub struct DualFluxField {
    flux: Vec<[f64; 4]>,
}

impl DualFluxField {
    /// Outgoing flux of dual cell `s` through its `j`-th dual face.
    pub fn get(&self, s: usize, j: usize) -> f64 {
        self.flux[s][j]
    }

    pub fn of_face(&self, s: usize) -> &[f64; 4] {
        &self.flux[s]
    }
}

/// Each dual face carries half the sum of the two primal fluxes it bisects.
///
/// With this choice the dual mass balance is the half-sum of the primal
/// balances of the two cells forming `D_σ`.
pub fn dual_fluxes(grid: &MacGrid, primal: &FaceField) -> DualFluxField {
    let mut flux = vec![[0.0; 4]; grid.n_faces()];
    for (s, out) in flux.iter_mut().enumerate() {
        for (j, link) in grid.dual_links(s).iter().enumerate() {
            out[j] = link.sign * 0.5 * (primal[link.primal[0]] + primal[link.primal[1]]);
        }
    }
    DualFluxField { flux }
}

/// Donor value: `v_here` for outgoing flux, `v_neighbor` otherwise.
#[inline]
pub fn upwind_value(f_dual: f64, v_here: f64, v_neighbor: f64) -> f64 {
    if f_dual >= 0.0 {
        v_here
    } else {
        v_neighbor
    }
}

/// `Σ_ε F_{ε,σ} v_{ε,up}` for every face; missing neighbours reuse the face value.
pub fn dual_convection(grid: &MacGrid, dual: &DualFluxField, v: &FaceField) -> FaceField {
    let mut out = FaceField::zeros(grid);
    for s in 0..grid.n_faces() {
        let mut acc = 0.0;
        for (j, link) in grid.dual_links(s).iter().enumerate() {
            let f = dual.get(s, j);
            let nb = link.neighbor.map_or(v[s], |n| v[n]);
            acc += f * upwind_value(f, v[s], nb);
        }
        out[s] = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mac_grid::{build_grid, dual_average, BcKind, BoundaryConditions, Domain};
    use crate::thermo_hydro::hydrostatic_from_potential;

    #[test]
    fn stabilisation_hand_value() {
        let grid = build_grid(Domain::unit_interval(), &[2], BoundaryConditions::uniform(BcKind::Wall)).unwrap();
        let law = GasLaw::new(2.0).unwrap();
        let rho = CellField::from_vec(&grid, vec![1.0, 2.0]).unwrap();
        let mut rf = FaceField::zeros(&grid);
        rf[1] = 1.5;
        let phi = CellField::zeros(&grid);
        let eta = FaceField::constant(&grid, 1.0);
        let du = stabilisation_velocity(&grid, &law, 1.0, &rho, &rf, &phi, &eta, 0.1);
        assert!((du[1] - 0.6).abs() < 1e-14);
        assert_eq!(du[0], 0.0);
        assert_eq!(du[2], 0.0);
        let eta2 = FaceField::constant(&grid, 2.0);
        let du2 = stabilisation_velocity(&grid, &law, 1.0, &rho, &rf, &phi, &eta2, 0.1);
        assert!((du2[1] - 1.2).abs() < 1e-14);
    }

    #[test]
    fn hydrostatic_gives_zero_stabilisation() {
        let grid = build_grid(Domain::unit_interval(), &[40], BoundaryConditions::uniform(BcKind::Wall)).unwrap();
        let law = GasLaw::new(1.4).unwrap();
        let hs = hydrostatic_from_potential(&grid, law, |x| x[0] * x[0] / 2.0, 3.5).unwrap();
        let eta = FaceField::constant(&grid, 2.0);
        let du = stabilisation_velocity_balanced(&grid, &hs, 1e-3, &hs.rho_tilde, &hs.rho_tilde_face, &eta, 0.01);
        assert!(du.iter().all(|&v| v == 0.0));
        let dp = stabilisation_velocity(&grid, &law, 1.0, &hs.rho_tilde, &hs.rho_tilde_face, &hs.phi, &eta, 0.01);
        assert!(dp.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn balanced_form_matches_pressure_form() {
        let grid = build_grid(Domain::unit_square(), &[6, 5], BoundaryConditions::uniform(BcKind::Wall)).unwrap();
        let law = GasLaw::new(1.4).unwrap();
        let hs = hydrostatic_from_potential(&grid, law, |x| x[0] + 0.5 * x[1], 3.5).unwrap();
        let rho = CellField::from_fn(&grid, |x| 1.0 + 0.3 * (5.0 * x[0]).sin() * x[1]);
        let mut rf = FaceField::zeros(&grid);
        for (s, f) in grid.faces().iter().enumerate() {
            if let (Some(k), Some(l)) = (f.minus, f.plus) {
                rf[s] = law.gmean(rho[k], rho[l]);
            }
        }
        let eta = FaceField::constant(&grid, 1.3);
        let a = stabilisation_velocity(&grid, &law, 0.5, &rho, &rf, &hs.phi, &eta, 0.02);
        let b = stabilisation_velocity_balanced(&grid, &hs, 0.5, &rho, &rf, &eta, 0.02);
        for s in 0..grid.n_faces() {
            assert!((a[s] - b[s]).abs() < 1e-12 * (1.0 + a[s].abs()), "{s}: {} {}", a[s], b[s]);
        }
    }

    #[test]
    fn mass_flux_cases() {
        let grid = build_grid(Domain::unit_interval(), &[2], BoundaryConditions::uniform(BcKind::Wall)).unwrap();
        let mut rf = FaceField::zeros(&grid);
        rf[1] = 2.0;
        let mut u = FaceField::zeros(&grid);
        u[1] = 0.3;
        let mut du = FaceField::zeros(&grid);
        du[1] = 0.1;
        let g = mass_flux(&grid, &rf, &u, &du);
        assert!((g[1] - 0.4).abs() < 1e-15);
        assert!((outward(&grid, &g, 1, 0) - 0.4).abs() < 1e-15);
        assert!((outward(&grid, &g, 1, 1) + 0.4).abs() < 1e-15);
        let z = mass_flux(&grid, &rf, &u, &u);
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn upwinding() {
        assert_eq!(upwind_value(1.0, 2.0, 5.0), 2.0);
        assert_eq!(upwind_value(-1.0, 2.0, 5.0), 5.0);
        assert_eq!(upwind_value(0.0, 2.0, 5.0), 2.0);
    }

    fn check_dual_balance(grid: &MacGrid) {
        // Primal mass update with arbitrary fluxes, then dual residual.
        let n = grid.n_faces();
        let g = FaceField::from_vec(grid, (0..n).map(|s| ((s * 7 + 3) as f64).sin()).collect()).unwrap();
        let mut g = g;
        g.clear_exterior(grid);
        let rho0 = CellField::from_fn(grid, |x| 1.0 + 0.5 * x[0] + 0.1 * x[1]);
        let dt = 1e-3;
        let mut rho1 = rho0.clone();
        for k in 0..grid.n_cells() {
            let div: f64 = grid.cell_faces(k).iter().map(|&(s, o)| o * g[s]).sum();
            rho1[k] = rho0[k] - dt * div / grid.cell_volume(k);
        }
        let d0 = dual_average(grid, &rho0);
        let d1 = dual_average(grid, &rho1);
        let dual = dual_fluxes(grid, &g);
        for s in 0..n {
            let f = grid.face(s);
            if !f.is_interior() {
                continue;
            }
            let out: f64 = dual.of_face(s).iter().sum();
            let r = f.dual_volume * (d1[s] - d0[s]) / dt + out;
            assert!(r.abs() < 1e-13, "face {s}: {r}");
        }
    }

    #[test]
    fn dual_balance_1d_and_2d() {
        check_dual_balance(
            &build_grid(Domain::unit_interval(), &[9], BoundaryConditions::uniform(BcKind::Wall)).unwrap(),
        );
        check_dual_balance(
            &build_grid(Domain::unit_square(), &[5, 4], BoundaryConditions::uniform(BcKind::Wall)).unwrap(),
        );
        check_dual_balance(
            &build_grid(Domain::unit_square(), &[4, 6], BoundaryConditions::uniform(BcKind::Periodic)).unwrap(),
        );
    }

    #[test]
    fn zero_primal_zero_dual() {
        let grid = build_grid(Domain::unit_square(), &[3, 3], BoundaryConditions::uniform(BcKind::Wall)).unwrap();
        let d = dual_fluxes(&grid, &FaceField::zeros(&grid));
        assert!((0..grid.n_faces()).all(|s| d.of_face(s).iter().all(|&v| v == 0.0)));
    }
}
