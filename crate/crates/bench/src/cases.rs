//! The benchmark problems: potentials, initial data and the stationary vortex.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use hydromac::BcKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseId {
    WellBalance1d,
    Rarefaction2d,
    Sod1d,
    Pert1d,
    Pert2d,
    Vortex2d,
    ApSweep,
}

impl CaseId {
    pub const ALL: [CaseId; 7] = [
        CaseId::WellBalance1d,
        CaseId::Rarefaction2d,
        CaseId::Sod1d,
        CaseId::Pert1d,
        CaseId::Pert2d,
        CaseId::Vortex2d,
        CaseId::ApSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseId::WellBalance1d => "wellbalance1d",
            CaseId::Rarefaction2d => "rarefaction2d",
            CaseId::Sod1d => "sod1d",
            CaseId::Pert1d => "pert1d",
            CaseId::Pert2d => "pert2d",
            CaseId::Vortex2d => "vortex2d",
            CaseId::ApSweep => "ap_sweep",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            CaseId::Rarefaction2d | CaseId::Pert2d | CaseId::Vortex2d => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        CaseId::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown case '{s}'"))
    }
}

/// Gravitational potentials by id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Potential {
    /// `x`
    Linear,
    /// `x²/2`
    Quadratic,
    /// `sin 2πx`
    Sine,
    /// `r²` about the domain centre
    Radial,
    /// `½ r²` about the domain centre
    Bowl,
    /// `x + y`
    Diag,
}

impl Potential {
    pub const ALL: [Potential; 6] =
        [Potential::Linear, Potential::Quadratic, Potential::Sine, Potential::Radial, Potential::Bowl, Potential::Diag];

    pub fn name(self) -> &'static str {
        match self {
            Potential::Linear => "linear",
            Potential::Quadratic => "quadratic",
            Potential::Sine => "sine",
            Potential::Radial => "radial",
            Potential::Bowl => "bowl",
            Potential::Diag => "diag",
        }
    }

    pub fn eval(self, x: [f64; 2]) -> f64 {
        let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
        match self {
            Potential::Linear => x[0],
            Potential::Quadratic => 0.5 * x[0] * x[0],
            Potential::Sine => (2.0 * PI * x[0]).sin(),
            Potential::Radial => r2,
            Potential::Bowl => 0.5 * r2,
            Potential::Diag => x[0] + x[1],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Potential::Linear => "x",
            Potential::Quadratic => "x^2/2",
            Potential::Sine => "sin(2 pi x)",
            Potential::Radial => "r^2",
            Potential::Bowl => "r^2/2",
            Potential::Diag => "x+y",
        }
    }
}

impl FromStr for Potential {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Potential::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown potential '{s}'"))
    }
}

/// Equilibrium constant for `ρ̃ = (1 - (γ-1)/γ φ)^{1/(γ-1)}`.
pub fn isentropic_constant(gamma: f64) -> f64 {
    gamma / (gamma - 1.0)
}

/// `(1 - (γ-1)/γ φ)^{1/(γ-1)}`, the hydrostatic profile used by every case.
pub fn isentropic_profile(gamma: f64, phi: f64) -> f64 {
    (1.0 - (gamma - 1.0) / gamma * phi).powf(1.0 / (gamma - 1.0))
}

pub fn default_potential(case: CaseId) -> Potential {
    match case {
        CaseId::Rarefaction2d => Potential::Bowl,
        CaseId::Pert2d => Potential::Diag,
        CaseId::Vortex2d => Potential::Radial,
        _ => Potential::Linear,
    }
}

pub fn default_bc(case: CaseId) -> BcKind {
    match case {
        CaseId::WellBalance1d | CaseId::Sod1d => BcKind::Wall,
        CaseId::Rarefaction2d | CaseId::Pert2d => BcKind::Transmissive,
        CaseId::Pert1d | CaseId::ApSweep => BcKind::SteadyGhost,
        CaseId::Vortex2d => BcKind::Periodic,
    }
}

pub fn default_gamma(case: CaseId) -> f64 {
    match case {
        CaseId::Rarefaction2d | CaseId::Vortex2d => 2.0,
        _ => 1.4,
    }
}

pub fn default_eps(case: CaseId) -> f64 {
    match case {
        CaseId::WellBalance1d => 1e-2,
        CaseId::Vortex2d | CaseId::ApSweep => 1e-1,
        _ => 1.0,
    }
}

pub fn default_mesh(case: CaseId) -> Vec<usize> {
    match case {
        CaseId::Rarefaction2d => vec![100, 100],
        CaseId::Pert2d | CaseId::Vortex2d => vec![50, 50],
        CaseId::Sod1d => vec![200],
        _ => vec![100],
    }
}

pub fn default_t_end(case: CaseId, eps: f64) -> f64 {
    match case {
        CaseId::WellBalance1d => 2.0,
        CaseId::Rarefaction2d => 0.1,
        CaseId::Sod1d => 0.2,
        CaseId::Pert1d | CaseId::ApSweep => 0.25,
        CaseId::Pert2d => {
            if eps >= 1.0 {
                0.05
            } else if eps >= 0.1 {
                0.005
            } else {
                0.001
            }
        }
        CaseId::Vortex2d => 1.0,
    }
}

/// Perturbation amplitude: `ε²` in the stiff regime, otherwise the
/// compressible default of the case.
pub fn default_zeta(case: CaseId, eps: f64) -> f64 {
    match case {
        CaseId::Pert1d | CaseId::ApSweep if eps < 1.0 => eps * eps,
        CaseId::Pert2d if eps < 1.0 => eps * eps,
        CaseId::Pert1d | CaseId::ApSweep => 1e-3,
        CaseId::Pert2d => 1e-1,
        _ => 0.0,
    }
}

/// Parameters of the stationary vortex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VortexParams {
    pub r1: f64,
    pub r2: f64,
    pub a_bar: f64,
    pub center: [f64; 2],
}

impl Default for VortexParams {
    fn default() -> Self {
        Self { r1: 0.2, r2: 0.4, a_bar: 0.1, center: [0.5, 0.5] }
    }
}

impl VortexParams {
    fn coefficients(&self) -> (f64, f64, f64) {
        let a1 = self.a_bar / self.r1;
        let a2 = -self.a_bar * self.r2 / (self.r1 - self.r2);
        let a3 = self.a_bar / (self.r1 - self.r2);
        (a1, a2, a3)
    }

    pub fn u_theta(&self, r: f64) -> f64 {
        let (a1, a2, a3) = self.coefficients();
        if r <= self.r1 {
            a1 * r
        } else if r <= self.r2 {
            a2 + a3 * r
        } else {
            0.0
        }
    }

    /// `∫₀^r u_θ(s)²/s ds` in closed form.
    pub fn integral(&self, r: f64) -> f64 {
        let (a1, a2, a3) = self.coefficients();
        let inner = |r: f64| 0.5 * a1 * a1 * r * r;
        let middle = |r: f64| {
            let r1 = self.r1;
            inner(r1) + a2 * a2 * (r / r1).ln() + 2.0 * a2 * a3 * (r - r1) + 0.5 * a3 * a3 * (r * r - r1 * r1)
        };
        if r <= self.r1 {
            inner(r)
        } else if r <= self.r2 {
            middle(r)
        } else {
            middle(self.r2)
        }
    }
}

/// Exact stationary vortex `(ρ, u, v)` at `x` for the radial potential
/// with `γ = 2` and `ρ(0) = 1`.
pub fn vortex_exact(x: [f64; 2], eps: f64, params: &VortexParams) -> (f64, f64, f64) {
    let dx = x[0] - params.center[0];
    let dy = x[1] - params.center[1];
    let r = (dx * dx + dy * dy).sqrt();
    let rho = 1.0 + 0.5 * eps * eps * params.integral(r) - 0.5 * r * r;
    if r == 0.0 {
        return (rho, 0.0, 0.0);
    }
    let ut = params.u_theta(r);
    (rho, ut * dy / r, -ut * dx / r)
}

/// Initial density and velocity of a case as point functions.
pub struct InitialData {
    pub rho: Box<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
    pub u: Box<dyn Fn(usize, [f64; 2]) -> f64 + Send + Sync>,
}

pub fn initial_data(case: CaseId, gamma: f64, eps: f64, potential: Potential, zeta: f64) -> InitialData {
    let profile = move |x: [f64; 2]| isentropic_profile(gamma, potential.eval(x));
    match case {
        CaseId::WellBalance1d => InitialData { rho: Box::new(profile), u: Box::new(|_, _| 0.0) },
        CaseId::Rarefaction2d => InitialData {
            rho: Box::new(profile),
            u: Box::new(|axis, x| {
                if axis == 0 {
                    if x[0] <= 0.5 {
                        -5.0
                    } else {
                        5.0
                    }
                } else {
                    0.0
                }
            }),
        },
        CaseId::Sod1d => {
            InitialData { rho: Box::new(|x| if x[0] < 0.5 { 1.0 } else { 0.125 }), u: Box::new(|_, _| 0.0) }
        }
        CaseId::Pert1d | CaseId::ApSweep => InitialData {
            rho: Box::new(move |x| profile(x) + zeta * (-100.0 * (x[0] - 0.5).powi(2)).exp()),
            u: Box::new(|_, _| 0.0),
        },
        CaseId::Pert2d => InitialData {
            rho: Box::new(move |x| profile(x) + zeta * (-100.0 * ((x[0] - 0.3).powi(2) + (x[1] - 0.3).powi(2))).exp()),
            u: Box::new(|_, _| 0.0),
        },
        CaseId::Vortex2d => {
            let p = VortexParams::default();
            InitialData {
                rho: Box::new(move |x| vortex_exact(x, eps, &p).0),
                u: Box::new(move |axis, x| {
                    let (_, u, v) = vortex_exact(x, eps, &p);
                    if axis == 0 {
                        u
                    } else {
                        v
                    }
                }),
            }
        }
    }
}
