//! Explicit colocated Rusanov scheme with a centred gravity source.
//!
//! Not well-balanced. The wave-speed bound carries the scaled sound speed
//! `c/ε`, so the explicit step collapses as `ε → 0`.

use thiserror::Error;

use crate::mac_grid::{BcKind, CellField, MacGrid};
use crate::thermo_hydro::{GasLaw, HydrostaticState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RusanovError {
    #[error("scheme crashed at t = {t} (step {step}, cell {cell}): {what}")]
    Crashed { t: f64, step: usize, cell: usize, what: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("step limit {0} reached")]
    StepLimit(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColocatedState {
    pub rho: CellField,
    /// Momentum components; the second is zero in 1D.
    pub m: [CellField; 2],
    pub t: f64,
}

impl ColocatedState {
    pub fn velocity(&self, axis: usize) -> CellField {
        let mut v = self.m[axis].clone();
        for (k, x) in v.iter_mut().enumerate() {
            *x /= self.rho[k];
        }
        v
    }

    pub fn mass(&self, grid: &MacGrid) -> f64 {
        (0..grid.n_cells()).map(|k| grid.cell_volume(k) * self.rho[k]).sum()
    }

    pub fn momentum(&self, grid: &MacGrid, axis: usize) -> f64 {
        (0..grid.n_cells()).map(|k| grid.cell_volume(k) * self.m[axis][k]).sum()
    }
}

#[derive(Debug, Clone)]
pub struct RusanovScheme {
    grid: MacGrid,
    law: GasLaw,
    eps: f64,
    cfl: f64,
    phi: CellField,
    ghost_phi: Vec<f64>,
    ghost_rho: Vec<f64>,
}

type Cons = [f64; 3];

impl RusanovScheme {
    /// Gravity and ghost data come from `hydro`: its cell potential, and on
    /// steady sides the hydrostatic density at the ghost centroid.
    pub fn new(grid: MacGrid, hydro: &HydrostaticState, eps: f64, cfl: f64) -> Result<Self, RusanovError> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(RusanovError::InvalidParams(format!("eps must lie in (0, 1], got {eps}")));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(RusanovError::InvalidParams(format!("cfl must lie in (0, 1], got {cfl}")));
        }
        Ok(Self {
            law: hydro.law,
            eps,
            cfl,
            phi: hydro.phi.clone(),
            ghost_phi: hydro.ghost_phi.to_vec(),
            ghost_rho: hydro.ghost_rho.to_vec(),
            grid,
        })
    }

    pub fn grid(&self) -> &MacGrid {
        &self.grid
    }

    fn cons(state: &ColocatedState, k: usize, axis: usize) -> Cons {
        [state.rho[k], state.m[axis][k], state.m[1 - axis][k]]
    }

    fn flux(&self, w: &Cons) -> Cons {
        let u = w[1] / w[0];
        [w[1], w[1] * u + self.law.p(w[0]) / (self.eps * self.eps), w[2] * u]
    }

    fn speed(&self, w: &Cons) -> f64 {
        (w[1] / w[0]).abs() + self.law.sound_speed_sq(w[0]).sqrt() / self.eps
    }

    /// Ghost state behind exterior face `s`, in the face's axis frame.
    fn ghost(&self, state: &ColocatedState, s: usize) -> Cons {
        let f = self.grid.face(s);
        let side = f.boundary.expect("exterior face");
        let w = Self::cons(state, f.inner_cell(), f.axis);
        match self.grid.bc().side(side.axis, side.high) {
            BcKind::Wall | BcKind::Periodic => [w[0], -w[1], w[2]],
            BcKind::Transmissive => w,
            BcKind::SteadyGhost => [self.ghost_rho[s], 0.0, 0.0],
        }
    }

    fn face_states(&self, state: &ColocatedState, s: usize) -> (Cons, Cons) {
        let f = self.grid.face(s);
        match (f.minus, f.plus) {
            (Some(k), Some(l)) => (Self::cons(state, k, f.axis), Self::cons(state, l, f.axis)),
            (Some(k), None) => (Self::cons(state, k, f.axis), self.ghost(state, s)),
            (None, Some(l)) => (self.ghost(state, s), Self::cons(state, l, f.axis)),
            (None, None) => unreachable!("face without cells"),
        }
    }

    /// Largest admissible step `cfl / Σ_i (λ_i / h_i)`.
    pub fn time_step(&self, state: &ColocatedState) -> f64 {
        let h = self.grid.spacing();
        let mut lam = [0.0f64; 2];
        for (s, f) in self.grid.faces().iter().enumerate() {
            let (a, b) = self.face_states(state, s);
            lam[f.axis] = lam[f.axis].max(self.speed(&a)).max(self.speed(&b));
        }
        let rate: f64 = (0..self.grid.dim()).map(|i| lam[i] / h[i]).sum();
        self.cfl / rate
    }

    /// Potential difference across cell `k` along `axis` over twice the spacing.
    fn centred_gradient(&self, k: usize, axis: usize) -> f64 {
        let cf = self.grid.cell_faces(k);
        let side_value = |(s, _): (usize, f64)| {
            let f = self.grid.face(s);
            match (f.minus, f.plus) {
                (Some(a), Some(b)) => self.phi[if a == k { b } else { a }],
                _ => self.ghost_phi[s],
            }
        };
        let lo = side_value(cf[2 * axis]);
        let hi = side_value(cf[2 * axis + 1]);
        (hi - lo) / (2.0 * self.grid.spacing()[axis])
    }

    pub fn step(&self, state: &ColocatedState, step_index: usize) -> Result<(ColocatedState, f64), RusanovError> {
        let dt = self.time_step(state);
        self.step_with(state, dt, step_index).map(|s| (s, dt))
    }

    pub fn step_with(
        &self,
        state: &ColocatedState,
        dt: f64,
        step_index: usize,
    ) -> Result<ColocatedState, RusanovError> {
        let g = &self.grid;
        let mut next = state.clone();
        next.t = state.t + dt;
        for (s, f) in g.faces().iter().enumerate() {
            let (a, b) = self.face_states(state, s);
            let fa = self.flux(&a);
            let fb = self.flux(&b);
            let lam = self.speed(&a).max(self.speed(&b));
            let mut num = [0.0; 3];
            for c in 0..3 {
                num[c] = 0.5 * (fa[c] + fb[c]) - 0.5 * lam * (b[c] - a[c]);
            }
            let t_axis = 1 - f.axis;
            for (cell, sign) in [(f.minus, -1.0), (f.plus, 1.0)] {
                let Some(k) = cell else { continue };
                let w = dt * f.area / g.cell_volume(k);
                next.rho[k] += sign * w * num[0];
                next.m[f.axis][k] += sign * w * num[1];
                if g.dim() == 2 {
                    next.m[t_axis][k] += sign * w * num[2];
                }
            }
        }
        let inv_eps2 = 1.0 / (self.eps * self.eps);
        for k in 0..g.n_cells() {
            for axis in 0..g.dim() {
                next.m[axis][k] -= dt * inv_eps2 * state.rho[k] * self.centred_gradient(k, axis);
            }
            let bad = if !next.rho[k].is_finite() || !next.m[0][k].is_finite() || !next.m[1][k].is_finite() {
                Some("non-finite value")
            } else if next.rho[k] <= 0.0 {
                Some("non-positive density")
            } else {
                None
            };
            if let Some(what) = bad {
                return Err(RusanovError::Crashed { t: state.t, step: step_index, cell: k, what });
            }
        }
        Ok(next)
    }

    /// Advances to `t_end`, shortening the last step; returns the state and
    /// the step count.
    pub fn run_until(
        &self,
        mut state: ColocatedState,
        t_end: f64,
        max_steps: usize,
    ) -> Result<(ColocatedState, usize), RusanovError> {
        let mut n = 0;
        while state.t < t_end * (1.0 - 1e-14) {
            if n >= max_steps {
                return Err(RusanovError::StepLimit(max_steps));
            }
            let dt = self.time_step(&state).min(t_end - state.t);
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(RusanovError::Crashed { t: state.t, step: n, cell: 0, what: "degenerate time step" });
            }
            state = self.step_with(&state, dt, n)?;
            n += 1;
        }
        Ok((state, n))
    }
}

/// Cell sampling of `ρ₀` and the velocity components `u₀`.
pub fn colocated_init(
    grid: &MacGrid,
    rho0: impl Fn([f64; 2]) -> f64,
    u0: impl Fn(usize, [f64; 2]) -> f64,
) -> ColocatedState {
    let rho = CellField::from_fn(grid, &rho0);
    let mut m = [CellField::zeros(grid), CellField::zeros(grid)];
    for k in 0..grid.n_cells() {
        let x = grid.cell_center(k);
        for (axis, field) in m.iter_mut().enumerate().take(grid.dim()) {
            field[k] = rho[k] * u0(axis, x);
        }
    }
    ColocatedState { rho, m, t: 0.0 }
}
