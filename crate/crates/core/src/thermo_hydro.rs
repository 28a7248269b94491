//! Barotropic pressure law, Helmholtz energy and discrete hydrostatic states.

use thiserror::Error;

use crate::mac_grid::{BcKind, CellField, FaceField, MacGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThermoError {
    #[error("gamma must be > 1, got {0}")]
    BadGamma(f64),
    #[error("{what} must be {bound}, got {value}")]
    Domain { what: &'static str, bound: &'static str, value: f64 },
    #[error("hydrostatic profile is not positive at ({x}, {y}): C - phi = {value}")]
    NonPositiveProfile { x: f64, y: f64, value: f64 },
    #[error("could not calibrate C for mass {0}")]
    Calibration(f64),
}

fn positive(what: &'static str, value: f64) -> Result<f64, ThermoError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ThermoError::Domain { what, bound: "positive", value })
    }
}

fn nonnegative(what: &'static str, value: f64) -> Result<f64, ThermoError> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ThermoError::Domain { what, bound: "non-negative", value })
    }
}

/// `p(ρ) = ρ^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasLaw {
    gamma: f64,
}

/// Relative width below which the γ-mean collapses to the midpoint.
pub const GAMMA_MEAN_TOL: f64 = 1e-12;

impl GasLaw {
    pub fn new(gamma: f64) -> Result<Self, ThermoError> {
        if gamma > 1.0 && gamma.is_finite() {
            Ok(Self { gamma })
        } else {
            Err(ThermoError::BadGamma(gamma))
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    // Unchecked kernels follow; the free functions below validate their input.

    #[inline]
    pub fn p(&self, rho: f64) -> f64 {
        rho.powf(self.gamma)
    }

    #[inline]
    pub fn h(&self, rho: f64) -> f64 {
        rho.powf(self.gamma) / (self.gamma - 1.0)
    }

    #[inline]
    pub fn h_prime(&self, rho: f64) -> f64 {
        self.gamma / (self.gamma - 1.0) * rho.powf(self.gamma - 1.0)
    }

    #[inline]
    pub fn h_second(&self, rho: f64) -> f64 {
        self.gamma * rho.powf(self.gamma - 2.0)
    }

    /// Inverse of `h'`.
    #[inline]
    pub fn h_prime_inv(&self, y: f64) -> f64 {
        ((self.gamma - 1.0) / self.gamma * y).powf(1.0 / (self.gamma - 1.0))
    }

    /// Squared sound speed `p'(ρ) = γρ^(γ-1)`.
    #[inline]
    pub fn sound_speed_sq(&self, rho: f64) -> f64 {
        self.gamma * rho.powf(self.gamma - 1.0)
    }

    #[inline]
    pub fn pi_rel(&self, rho: f64, rho_ref: f64) -> f64 {
        // h(ρ̃(1+x)) - h(ρ̃) - h'(ρ̃)ρ̃x = ρ̃^γ/(γ-1) ((1+x)^γ - 1 - γx)
        let x = (rho - rho_ref) / rho_ref;
        let v = self.h(rho_ref) * binomial_remainder(self.gamma, x);
        v.max(0.0)
    }

    /// `h'(ρ̃ + w) - h'(ρ̃)` without cancellation for small `w`.
    #[inline]
    pub fn h_prime_diff(&self, w: f64, rho_ref: f64) -> f64 {
        self.h_prime(rho_ref) * ((self.gamma - 1.0) * (w / rho_ref).ln_1p()).exp_m1()
    }

    /// Interface density with `a^γ - b^γ = ρ_ab (h'(a) - h'(b))`.
    pub fn gmean(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if hi - lo <= GAMMA_MEAN_TOL * hi {
            return 0.5 * (a + b);
        }
        let g = self.gamma;
        let ln_r = ((hi - lo) / lo).ln_1p();
        let v = (g - 1.0) / g * lo * (g * ln_r).exp_m1() / ((g - 1.0) * ln_r).exp_m1();
        v.clamp(lo, hi)
    }

    /// `(∂ρ_ab/∂a, ∂ρ_ab/∂b)`.
    pub fn gmean_derivatives(&self, a: f64, b: f64) -> (f64, f64) {
        let swap = a > b;
        let (lo, hi) = if swap { (b, a) } else { (a, b) };
        if hi - lo <= GAMMA_MEAN_TOL * hi {
            return (0.5, 0.5);
        }
        let g = self.gamma;
        let delta = (hi - lo) / lo;
        let ln_r = delta.ln_1p();
        let e1 = ((g - 1.0) * ln_r).exp_m1();
        let value = (g - 1.0) / g * lo * (g * ln_r).exp_m1() / e1;
        let r = hi / lo;
        let d_hi = (g - 1.0) / g * r.powf(g - 2.0) * binomial_remainder(g, delta) / (e1 * e1);
        // Degree-one homogeneity: hi ∂_hi + lo ∂_lo = ρ_ab.
        let d_lo = (value - hi * d_hi) / lo;
        if swap {
            (d_hi, d_lo)
        } else {
            (d_lo, d_hi)
        }
    }
}

/// `(1+δ)^γ - 1 - γδ` for `δ ≥ -1`, without cancellation for small `|δ|`.
fn binomial_remainder(g: f64, delta: f64) -> f64 {
    if delta.abs() < 1e-2 {
        let mut coeff = g * (g - 1.0) / 2.0;
        let mut pow = delta * delta;
        let mut sum = 0.0;
        for k in 2..14 {
            sum += coeff * pow;
            coeff *= (g - k as f64) / (k as f64 + 1.0);
            pow *= delta;
        }
        sum
    } else {
        (g * delta.ln_1p()).exp_m1() - g * delta
    }
}

pub fn pressure(law: &GasLaw, rho: f64) -> Result<f64, ThermoError> {
    Ok(law.p(nonnegative("density", rho)?))
}

pub fn helmholtz(law: &GasLaw, rho: f64) -> Result<f64, ThermoError> {
    Ok(law.h(nonnegative("density", rho)?))
}

pub fn helmholtz_prime(law: &GasLaw, rho: f64) -> Result<f64, ThermoError> {
    Ok(law.h_prime(positive("density", rho)?))
}

/// `Π(ρ|ρ̃) = h(ρ) - h(ρ̃) - h'(ρ̃)(ρ - ρ̃)`.
pub fn relative_internal_energy(law: &GasLaw, rho: f64, rho_ref: f64) -> Result<f64, ThermoError> {
    nonnegative("density", rho)?;
    positive("reference density", rho_ref)?;
    Ok(law.pi_rel(rho, rho_ref))
}

pub fn gamma_mean(law: &GasLaw, rho_k: f64, rho_l: f64) -> Result<f64, ThermoError> {
    positive("density", rho_k)?;
    positive("density", rho_l)?;
    Ok(law.gmean(rho_k, rho_l))
}

pub fn gamma_mean_derivatives(law: &GasLaw, rho_k: f64, rho_l: f64) -> Result<(f64, f64), ThermoError> {
    positive("density", rho_k)?;
    positive("density", rho_l)?;
    Ok(law.gmean_derivatives(rho_k, rho_l))
}

/// Discrete hydrostatic equilibrium `(ρ̃, φ)` on a grid.
///
/// The cell potential is reconstructed as `φ_K = C - h'(ρ̃_K)`, so that
/// `h'(ρ̃) + φ` is cellwise constant and the face balance
/// `(∂p̃)_σ + ρ̃_σ(∂φ)_σ = 0` holds with the γ-mean `ρ̃_σ`.
///
/// Exterior faces carry the ghost values `ghost_rho`, `ghost_phi` evaluated at
/// the mirrored ghost centroid; `rho_tilde_face` there is the γ-mean of the
/// inner cell and the ghost.
#[derive(Debug, Clone)]
pub struct HydrostaticState {
    pub law: GasLaw,
    pub constant: f64,
    pub rho_tilde: CellField,
    pub phi: CellField,
    pub p_tilde: CellField,
    pub rho_tilde_face: FaceField,
    pub ghost_rho: FaceField,
    pub ghost_phi: FaceField,
}

const GAUSS: [&[(f64, f64)]; 3] = [
    &[(0.0, 2.0)],
    &[(-0.577_350_269_189_625_8, 1.0), (0.577_350_269_189_625_8, 1.0)],
    &[(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)],
];

fn profile(law: &GasLaw, phi: &dyn Fn([f64; 2]) -> f64, c: f64, x: [f64; 2]) -> Result<f64, ThermoError> {
    let arg = c - phi(x);
    if !(arg > 0.0) {
        return Err(ThermoError::NonPositiveProfile { x: x[0], y: x[1], value: arg });
    }
    Ok(law.h_prime_inv(arg))
}

/// Average of the profile over the box centred at `center` with `points` Gauss points per axis.
fn cell_profile(
    law: &GasLaw,
    phi: &dyn Fn([f64; 2]) -> f64,
    c: f64,
    center: [f64; 2],
    h: [f64; 2],
    dim: usize,
    points: usize,
) -> Result<f64, ThermoError> {
    let rule = GAUSS[points.clamp(1, 3) - 1];
    let mut sum = 0.0;
    let ys: &[(f64, f64)] = if dim == 2 { rule } else { &[(0.0, 2.0)] };
    for &(qy, wy) in ys {
        for &(qx, wx) in rule {
            let x = [center[0] + 0.5 * h[0] * qx, center[1] + 0.5 * h[1] * qy];
            sum += 0.25 * wx * wy * profile(law, phi, c, x)?;
        }
    }
    Ok(sum)
}

/// Hydrostatic state `ρ̃ = ((γ-1)/γ (C - φ))^(1/(γ-1))` sampled at cell centres.
pub fn hydrostatic_from_potential(
    grid: &MacGrid,
    law: GasLaw,
    phi: impl Fn([f64; 2]) -> f64,
    constant: f64,
) -> Result<HydrostaticState, ThermoError> {
    hydrostatic_with_quadrature(grid, law, phi, constant, 1)
}

/// As [`hydrostatic_from_potential`] with a tensor Gauss rule of 1 to 3 points per axis.
pub fn hydrostatic_with_quadrature(
    grid: &MacGrid,
    law: GasLaw,
    phi: impl Fn([f64; 2]) -> f64,
    constant: f64,
    points: usize,
) -> Result<HydrostaticState, ThermoError> {
    let phi: &dyn Fn([f64; 2]) -> f64 = &phi;
    let h = grid.spacing();
    let dim = grid.dim();
    let mut rho = Vec::with_capacity(grid.n_cells());
    for k in 0..grid.n_cells() {
        rho.push(cell_profile(&law, phi, constant, grid.cell_center(k), h, dim, points)?);
    }
    let rho_tilde = CellField::from_vec(grid, rho).expect("cell count");
    let phi_cells: Vec<f64> = rho_tilde.iter().map(|&r| constant - law.h_prime(r)).collect();
    let p_cells: Vec<f64> = rho_tilde.iter().map(|&r| law.p(r)).collect();

    let mut ghost_rho = FaceField::zeros(grid);
    let mut ghost_phi = FaceField::zeros(grid);
    let mut face_rho = FaceField::zeros(grid);
    for (s, f) in grid.faces().iter().enumerate() {
        match (f.minus, f.plus) {
            (Some(k), Some(l)) => face_rho[s] = law.gmean(rho_tilde[k], rho_tilde[l]),
            _ => {
                let k = f.inner_cell();
                let side = f.boundary.expect("exterior face");
                let needed = grid.bc().side(side.axis, side.high) == BcKind::SteadyGhost;
                let g = match cell_profile(&law, phi, constant, grid.ghost_center(s), h, dim, points) {
                    Ok(g) => g,
                    Err(e) if needed => return Err(e),
                    Err(_) => rho_tilde[k],
                };
                ghost_rho[s] = g;
                ghost_phi[s] = constant - law.h_prime(g);
                face_rho[s] = law.gmean(rho_tilde[k], g);
            }
        }
    }

    Ok(HydrostaticState {
        law,
        constant,
        rho_tilde,
        phi: CellField::from_vec(grid, phi_cells).expect("cell count"),
        p_tilde: CellField::from_vec(grid, p_cells).expect("cell count"),
        rho_tilde_face: face_rho,
        ghost_rho,
        ghost_phi,
    })
}

/// Find `C` such that the hydrostatic state carries total mass `m0`.
pub fn calibrate_constant(
    grid: &MacGrid,
    law: GasLaw,
    phi: impl Fn([f64; 2]) -> f64,
    m0: f64,
) -> Result<f64, ThermoError> {
    positive("mass", m0)?;
    let phi_max = (0..grid.n_cells()).map(|k| phi(grid.cell_center(k))).fold(f64::NEG_INFINITY, f64::max);
    let mass = |c: f64| -> f64 {
        (0..grid.n_cells())
            .map(|k| {
                let arg = (c - phi(grid.cell_center(k))).max(0.0);
                grid.cell_volume(k) * law.h_prime_inv(arg)
            })
            .sum()
    };
    let mut lo = phi_max;
    let mut step = 1.0_f64.max(phi_max.abs());
    let mut hi = phi_max + step;
    let mut guard = 0;
    while mass(hi) < m0 {
        lo = hi;
        step *= 2.0;
        hi += step;
        guard += 1;
        if guard > 200 || !hi.is_finite() {
            return Err(ThermoError::Calibration(m0));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) < m0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
