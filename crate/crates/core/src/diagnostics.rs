//! Energies, norms, convergence orders and derived flow fields.

use crate::mac_grid::{dual_average, CellField, FaceField, MacGrid};
use crate::thermo_hydro::{GasLaw, HydrostaticState};
use crate::wb_solver::FluidState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub internal_rel: f64,
    pub total: f64,
    pub t: f64,
}

/// `(1/ε²) Σ_K |K| Π(ρ_K|ρ̃_K) + Σ_σ ½ |D_σ| ρ_{D_σ} u_σ²` over interior faces.
pub fn total_energy(grid: &MacGrid, state: &FluidState, hydro: &HydrostaticState, eps: f64) -> EnergyBreakdown {
    let internal_rel = relative_internal_sum(grid, &hydro.law, &state.rho, &hydro.rho_tilde) / (eps * eps);
    let rho_d = dual_average(grid, &state.rho);
    let mut kinetic = 0.0;
    for (s, f) in grid.faces().iter().enumerate() {
        if f.is_interior() {
            kinetic += 0.5 * f.dual_volume * rho_d[s] * state.u[s] * state.u[s];
        }
    }
    EnergyBreakdown { kinetic, internal_rel, total: kinetic + internal_rel, t: state.t }
}

/// `Σ_K |K| Π(ρ_K|ρ̃_K)` without the `1/ε²` weight.
pub fn relative_internal_sum(grid: &MacGrid, law: &GasLaw, rho: &CellField, rho_ref: &CellField) -> f64 {
    (0..grid.n_cells()).map(|k| grid.cell_volume(k) * law.pi_rel(rho[k], rho_ref[k])).sum()
}

/// `Σ_K |K| |a_K - b_K|`.
pub fn l1_error_cells(grid: &MacGrid, a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), grid.n_cells());
    assert_eq!(b.len(), grid.n_cells());
    (0..grid.n_cells()).map(|k| grid.cell_volume(k) * (a[k] - b[k]).abs()).sum()
}

/// `Σ_σ |D_σ| |a_σ - b_σ|` over faces of every axis family.
pub fn l1_error_faces(grid: &MacGrid, a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), grid.n_faces());
    assert_eq!(b.len(), grid.n_faces());
    grid.faces().iter().enumerate().map(|(s, f)| f.dual_volume * (a[s] - b[s]).abs()).sum()
}

/// Same as [`l1_error_faces`] restricted to one axis family.
pub fn l1_error_faces_axis(grid: &MacGrid, a: &[f64], b: &[f64], axis: usize) -> f64 {
    grid.faces_of_axis(axis).map(|s| grid.face(s).dual_volume * (a[s] - b[s]).abs()).sum()
}

/// Dual-cell momentum `ρ_{D_σ} u_σ`.
pub fn face_momentum(grid: &MacGrid, rho: &CellField, u: &FaceField) -> FaceField {
    let mut m = dual_average(grid, rho);
    for s in 0..grid.n_faces() {
        m[s] *= u[s];
    }
    m
}

/// `log2(e_coarse / e_fine)`.
pub fn eoc(err_coarse: f64, err_fine: f64) -> f64 {
    (err_coarse / err_fine).log2()
}

/// Cell velocity from the average of the two faces of each axis.
pub fn cell_velocity(grid: &MacGrid, u: &FaceField) -> [CellField; 2] {
    let mut out = [CellField::zeros(grid), CellField::zeros(grid)];
    for k in 0..grid.n_cells() {
        let cf = grid.cell_faces(k);
        for axis in 0..grid.dim() {
            out[axis][k] = 0.5 * (u[cf[2 * axis].0] + u[cf[2 * axis + 1].0]);
        }
    }
    out
}

/// `ε |u| / c` per cell with `c² = γ p / ρ`. Passing `eps = 1` gives `|u| / c`.
pub fn mach_field(grid: &MacGrid, state: &FluidState, law: &GasLaw, eps: f64) -> CellField {
    let [vx, vy] = cell_velocity(grid, &state.u);
    let mut m = CellField::zeros(grid);
    for k in 0..grid.n_cells() {
        let c = law.sound_speed_sq(state.rho[k]).sqrt();
        m[k] = eps * (vx[k] * vx[k] + vy[k] * vy[k]).sqrt() / c;
    }
    m
}

/// Node-centred `∂v/∂x - ∂u/∂y` on a 2D grid.
///
/// Returns `(nodes, values)` for every grid node that has faces on all four
/// sides (all nodes when both axes are periodic, interior nodes otherwise).
pub fn vorticity_field(grid: &MacGrid, u: &FaceField) -> Vec<([f64; 2], f64)> {
    assert_eq!(grid.dim(), 2, "vorticity needs a 2D grid");
    let [nx, ny] = grid.counts();
    let [hx, hy] = grid.spacing();
    let px = grid.bc().is_periodic(0);
    let py = grid.bc().is_periodic(1);
    let lo = grid.domain().lower;
    let xf = grid.faces_of_axis(0).start;
    let yf = grid.faces_of_axis(1).start;
    let nfx = if px { nx } else { nx + 1 };
    let (i_range, j_range) = (if px { 0..nx } else { 1..nx }, if py { 0..ny } else { 1..ny });
    let mut out = Vec::new();
    for j in j_range {
        for i in i_range.clone() {
            // y-faces left and right of node (i, j): cells (i-1, j) and (i, j) bottom faces
            let il = (i + nx - 1) % nx;
            let v_left = u[yf + il + nx * j];
            let v_right = u[yf + i + nx * j];
            let jb = (j + ny - 1) % ny;
            let u_below = u[xf + i + nfx * jb];
            let u_above = u[xf + i + nfx * j];
            let w = (v_right - v_left) / hx - (u_above - u_below) / hy;
            out.push(([lo[0] + i as f64 * hx, lo[1] + j as f64 * hy], w));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mac_grid::{build_grid, BcKind, BoundaryConditions, Domain};
    use crate::thermo_hydro::hydrostatic_from_potential;

    #[test]
    fn energy_zero_at_rest() {
        let grid = build_grid(Domain::unit_interval(), &[20], BoundaryConditions::uniform(BcKind::Wall)).unwrap();
        let law = GasLaw::new(1.4).unwrap();
        let hs = hydrostatic_from_potential(&grid, law, |x| x[0], 3.5).unwrap();
        let mut st = FluidState { rho: hs.rho_tilde.clone(), u: FaceField::zeros(&grid), t: 0.0 };
        let e = total_energy(&grid, &st, &hs, 0.1);
        assert_eq!(e.total, 0.0);
        st.u[5] = 0.2;
        let e = total_energy(&grid, &st, &hs, 0.1);
        assert_eq!(e.internal_rel, 0.0);
        let rd = 0.5 * (st.rho[4] + st.rho[5]);
        assert!((e.kinetic - 0.5 * 0.05 * rd * 0.04).abs() < 1e-15);
    }

    #[test]
    fn l1_and_eoc() {
        let grid = build_grid(Domain::unit_square(), &[10, 10], BoundaryConditions::uniform(BcKind::Wall)).unwrap();
        let a = vec![0.0; 100];
        let mut b = a.clone();
        assert_eq!(l1_error_cells(&grid, &a, &b), 0.0);
        b[37] = 1.0;
        assert!((l1_error_cells(&grid, &a, &b) - 0.01).abs() < 1e-15);
        assert!((eoc(0.2, 0.1) - 1.0).abs() < 1e-15);
        assert!((eoc(8.3926e-7, 4.6492e-7) - 0.8521).abs() < 1e-4);
        assert_eq!(eoc(0.3, 0.3), 0.0);
    }

    #[test]
    fn mach_of_rest_is_zero() {
        let grid = build_grid(Domain::unit_square(), &[4, 4], BoundaryConditions::uniform(BcKind::Periodic)).unwrap();
        let law = GasLaw::new(2.0).unwrap();
        let st = FluidState { rho: CellField::constant(&grid, 1.0), u: FaceField::zeros(&grid), t: 0.0 };
        assert!(mach_field(&grid, &st, &law, 1.0).iter().all(|&m| m == 0.0));
    }

    #[test]
    fn rigid_rotation_vorticity() {
        let grid = build_grid(Domain::unit_square(), &[40, 40], BoundaryConditions::uniform(BcKind::Periodic)).unwrap();
        let a1 = 0.5;
        // counterclockwise rotation about the centre: (u, v) = a1 (-(y - 1/2), x - 1/2)
        let u = FaceField::from_fn(&grid, |axis, x| if axis == 0 { -a1 * (x[1] - 0.5) } else { a1 * (x[0] - 0.5) });
        for (node, w) in vorticity_field(&grid, &u) {
            let r = ((node[0] - 0.5).powi(2) + (node[1] - 0.5).powi(2)).sqrt();
            if r < 0.3 {
                assert!((w - 2.0 * a1).abs() < 1e-12, "{node:?}: {w}");
            }
        }
    }
}
