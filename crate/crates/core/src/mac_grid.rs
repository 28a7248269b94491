//! Rectangular MAC grids in one and two dimensions.
//!
//! Scalars (density, potential, pressure) live on primal cells, the normal
//! velocity component lives on faces. Each face `σ` carries the dual cell
//! `D_σ` made of the two half cells that touch it. Faces are enumerated
//! axis-major: all x-faces, then all y-faces, each family with x varying fastest.
//!
//! Orientation convention: for a face `σ = K|L` with `K` on the low side
//! (`minus`) and `L` on the high side (`plus`), `e^(i)·ν_{σ,K} = +1`. Face
//! values of vector fields are the `i`-th component, so the outward value of
//! `v` seen from `K` is `+v_σ` and from `L` is `-v_σ`.

use std::ops::{Deref, DerefMut};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
    #[error("axis {axis} needs at least 2 cells, got {count}")]
    TooFewCells { axis: usize, count: usize },
    #[error("axis {axis} has non-positive length {length}")]
    BadLength { axis: usize, length: f64 },
    #[error("periodic boundary on axis {0} is not paired with a periodic opposite side")]
    UnpairedPeriodic(usize),
    #[error("field has {got} entries, grid expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
}

/// Boundary treatment of one side of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    /// Zero normal velocity and zero gradient on the exterior face.
    Wall,
    /// Opposite sides are identified.
    Periodic,
    /// Ghost cell copies the adjacent interior cell.
    Transmissive,
    /// Ghost cell holds the hydrostatic profile evaluated at its centroid.
    SteadyGhost,
}

impl BcKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wall" => Some(Self::Wall),
            "periodic" => Some(Self::Periodic),
            "transmissive" | "extrapolation" => Some(Self::Transmissive),
            "steady" | "steadyghost" | "steady_ghost" => Some(Self::SteadyGhost),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Wall => "wall",
            Self::Periodic => "periodic",
            Self::Transmissive => "transmissive",
            Self::SteadyGhost => "steady",
        }
    }
}

/// Boundary tags indexed by `[axis][side]`, side 0 = low, 1 = high.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryConditions {
    pub sides: [[BcKind; 2]; 2],
}

impl BoundaryConditions {
    pub fn uniform(kind: BcKind) -> Self {
        Self { sides: [[kind; 2]; 2] }
    }

    pub fn new(x_low: BcKind, x_high: BcKind, y_low: BcKind, y_high: BcKind) -> Self {
        Self { sides: [[x_low, x_high], [y_low, y_high]] }
    }

    pub fn side(&self, axis: usize, high: bool) -> BcKind {
        self.sides[axis][high as usize]
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.sides[axis][0] == BcKind::Periodic
    }
}

/// Axis-aligned box. In 1D only the first axis is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Self {
        Self { lower: [a, 0.0], upper: [b, 1.0] }
    }

    pub fn rect(x: (f64, f64), y: (f64, f64)) -> Self {
        Self { lower: [x.0, y.0], upper: [x.1, y.1] }
    }

    pub fn unit_interval() -> Self {
        Self::interval(0.0, 1.0)
    }

    pub fn unit_square() -> Self {
        Self::rect((0.0, 1.0), (0.0, 1.0))
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }
}

/// Exterior side a face lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundarySide {
    pub axis: usize,
    pub high: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub axis: usize,
    /// Cell on the low side of the face.
    pub minus: Option<usize>,
    /// Cell on the high side of the face.
    pub plus: Option<usize>,
    /// `|σ|`
    pub area: f64,
    /// `|D_σ|`
    pub dual_volume: f64,
    /// `|D_{σ,K}|` for the minus cell (0 when absent).
    pub dual_minus: f64,
    /// `|D_{σ,L}|` for the plus cell (0 when absent).
    pub dual_plus: f64,
    pub center: [f64; 2],
    pub boundary: Option<BoundarySide>,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        self.minus.is_some() && self.plus.is_some()
    }

    /// The single adjacent cell of an exterior face, or the minus cell.
    pub fn inner_cell(&self) -> usize {
        self.minus.or(self.plus).expect("face without cells")
    }
}

/// One face of a dual cell `D_σ`.
///
/// The mass flux leaving `D_σ` through this dual face is
/// `sign * (G[primal[0]] + G[primal[1]]) / 2` where `G` holds the primal
/// face fluxes in the positive axis direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualLink {
    pub sign: f64,
    pub primal: [usize; 2],
    /// Face whose dual cell lies across this dual face, if any.
    pub neighbor: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct MacGrid {
    dim: usize,
    n: [usize; 2],
    h: [f64; 2],
    domain: Domain,
    bc: BoundaryConditions,
    n_faces_axis: [usize; 2],
    faces_per_row: [usize; 2],
    cell_volume: Vec<f64>,
    faces: Vec<Face>,
    /// `2*dim` entries per cell: (face, e^(i)·ν_{σ,K}) ordered x-low, x-high, y-low, y-high.
    cell_faces: Vec<(usize, f64)>,
    dual_links: Vec<Vec<DualLink>>,
}

/// Build a uniform-per-axis MAC grid over `domain` with `n[i]` cells on axis `i`.
pub fn build_grid(domain: Domain, n: &[usize], bc: BoundaryConditions) -> Result<MacGrid, GridError> {
    MacGrid::new(domain, n, bc)
}

impl MacGrid {
    pub fn new(domain: Domain, n: &[usize], bc: BoundaryConditions) -> Result<Self, GridError> {
        let dim = n.len();
        if dim != 1 && dim != 2 {
            return Err(GridError::BadDimension(dim));
        }
        for (axis, &count) in n.iter().enumerate() {
            if count < 2 {
                return Err(GridError::TooFewCells { axis, count });
            }
            let length = domain.length(axis);
            if !(length > 0.0) {
                return Err(GridError::BadLength { axis, length });
            }
        }
        for axis in 0..dim {
            let lo = bc.side(axis, false) == BcKind::Periodic;
            let hi = bc.side(axis, true) == BcKind::Periodic;
            if lo != hi {
                return Err(GridError::UnpairedPeriodic(axis));
            }
        }

        let nn = [n[0], if dim == 2 { n[1] } else { 1 }];
        let h = [
            domain.length(0) / nn[0] as f64,
            if dim == 2 { domain.length(1) / nn[1] as f64 } else { domain.length(1) },
        ];
        let vol = if dim == 2 { h[0] * h[1] } else { h[0] };
        let n_cells = nn[0] * nn[1];
        let cell_volume = vec![vol; n_cells];

        let mut faces_per_row = [0usize; 2];
        let mut n_faces_axis = [0usize; 2];
        let mut faces = Vec::new();
        for axis in 0..dim {
            let periodic = bc.is_periodic(axis);
            let along = nn[axis];
            let across = nn[1 - axis];
            let per_row = if periodic { along } else { along + 1 };
            faces_per_row[axis] = per_row;
            n_faces_axis[axis] = per_row * across;
            let area = if dim == 2 { h[1 - axis] } else { 1.0 };
            // x-fastest ordering in both families
            let positions: Vec<(usize, usize)> = if axis == 0 {
                (0..across).flat_map(|t| (0..per_row).map(move |f| (f, t))).collect()
            } else {
                (0..per_row).flat_map(|f| (0..across).map(move |t| (f, t))).collect()
            };
            {
                for (f, t) in positions {
                    let cell_at = |a: usize| -> usize {
                        if axis == 0 {
                            a + nn[0] * t
                        } else {
                            t + nn[0] * a
                        }
                    };
                    let (minus, plus) = if periodic {
                        (Some(cell_at((f + along - 1) % along)), Some(cell_at(f)))
                    } else {
                        (
                            if f >= 1 { Some(cell_at(f - 1)) } else { None },
                            if f < along { Some(cell_at(f)) } else { None },
                        )
                    };
                    let dual_minus = if minus.is_some() { vol / 2.0 } else { 0.0 };
                    let dual_plus = if plus.is_some() { vol / 2.0 } else { 0.0 };
                    let mut center = [0.0; 2];
                    center[axis] = domain.lower[axis] + f as f64 * h[axis];
                    center[1 - axis] = domain.lower[1 - axis] + (t as f64 + 0.5) * h[1 - axis];
                    let boundary = match (minus, plus) {
                        (None, _) => Some(BoundarySide { axis, high: false }),
                        (_, None) => Some(BoundarySide { axis, high: true }),
                        _ => None,
                    };
                    faces.push(Face {
                        axis,
                        minus,
                        plus,
                        area,
                        dual_volume: dual_minus + dual_plus,
                        dual_minus,
                        dual_plus,
                        center,
                        boundary,
                    });
                }
            }
        }

        let mut grid = Self {
            dim,
            n: nn,
            h,
            domain,
            bc,
            n_faces_axis,
            faces_per_row,
            cell_volume,
            faces,
            cell_faces: Vec::new(),
            dual_links: Vec::new(),
        };

        let mut cell_faces = Vec::with_capacity(n_cells * 2 * dim);
        for k in 0..n_cells {
            let (i, j) = grid.cell_ij(k);
            for axis in 0..dim {
                let (a, t) = if axis == 0 { (i, j) } else { (j, i) };
                cell_faces.push((grid.face_at(axis, a, t), -1.0));
                cell_faces.push((grid.face_at(axis, a + 1, t), 1.0));
            }
        }
        grid.cell_faces = cell_faces;

        let links = (0..grid.faces.len()).map(|s| grid.build_links(s)).collect();
        grid.dual_links = links;
        Ok(grid)
    }

    /// Face of family `axis` at position `a` along the axis (0..=n) in row `t`.
    /// Wraps `a` for periodic axes.
    fn face_at(&self, axis: usize, a: usize, t: usize) -> usize {
        let per_row = self.faces_per_row[axis];
        let a = if self.bc.is_periodic(axis) { a % self.n[axis] } else { a };
        if axis == 0 {
            a + per_row * t
        } else {
            self.n_faces_axis[0] + t + self.n[0] * a
        }
    }

    /// Position of face `s` as (axis, index along axis, row).
    fn face_pos(&self, s: usize) -> (usize, usize, usize) {
        let axis = self.faces[s].axis;
        if axis == 0 {
            let per_row = self.faces_per_row[0];
            (0, s % per_row, s / per_row)
        } else {
            let local = s - self.n_faces_axis[0];
            (1, local / self.n[0], local % self.n[0])
        }
    }

    fn build_links(&self, s: usize) -> Vec<DualLink> {
        let face = &self.faces[s];
        if !face.is_interior() {
            return Vec::new();
        }
        let (axis, a, t) = self.face_pos(s);
        let along = self.n[axis];
        let periodic = self.bc.is_periodic(axis);
        // Positions of the minus and plus cells along the axis.
        let (a_minus, a_plus) = if periodic { ((a + along - 1) % along, a) } else { (a - 1, a) };

        let mut links = Vec::with_capacity(2 * self.dim);
        let prev = self.face_at(axis, a_minus, t);
        let next = self.face_at(axis, a_plus + 1, t);
        links.push(DualLink { sign: -1.0, primal: [prev, s], neighbor: Some(prev) });
        links.push(DualLink { sign: 1.0, primal: [s, next], neighbor: Some(next) });

        if self.dim == 2 {
            let other = 1 - axis;
            let across = self.n[other];
            let other_periodic = self.bc.is_periodic(other);
            // Transverse faces are indexed (position along `other`, row = cell position along `axis`).
            let low = [self.face_at(other, t, a_minus), self.face_at(other, t, a_plus)];
            let high = [self.face_at(other, t + 1, a_minus), self.face_at(other, t + 1, a_plus)];
            let below = if t >= 1 {
                Some(self.face_at(axis, a, t - 1))
            } else if other_periodic {
                Some(self.face_at(axis, a, across - 1))
            } else {
                None
            };
            let above = if t + 1 < across {
                Some(self.face_at(axis, a, t + 1))
            } else if other_periodic {
                Some(self.face_at(axis, a, 0))
            } else {
                None
            };
            links.push(DualLink { sign: -1.0, primal: low, neighbor: below });
            links.push(DualLink { sign: 1.0, primal: high, neighbor: above });
        }
        links
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis (`[n, 1]` in 1D).
    pub fn counts(&self) -> [usize; 2] {
        self.n
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.h
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn bc(&self) -> &BoundaryConditions {
        &self.bc
    }

    pub fn n_cells(&self) -> usize {
        self.cell_volume.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    /// Range of face indices belonging to axis family `axis`.
    pub fn faces_of_axis(&self, axis: usize) -> std::ops::Range<usize> {
        if axis == 0 {
            0..self.n_faces_axis[0]
        } else {
            self.n_faces_axis[0]..self.n_faces_axis[0] + self.n_faces_axis[1]
        }
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i + self.n[0] * j
    }

    pub fn cell_ij(&self, k: usize) -> (usize, usize) {
        (k % self.n[0], k / self.n[0])
    }

    pub fn cell_volume(&self, k: usize) -> f64 {
        self.cell_volume[k]
    }

    pub fn cell_center(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.cell_ij(k);
        [self.domain.lower[0] + (i as f64 + 0.5) * self.h[0], self.domain.lower[1] + (j as f64 + 0.5) * self.h[1]]
    }

    /// Faces of cell `k` with the orientation `e^(i)·ν_{σ,K}`.
    pub fn cell_faces(&self, k: usize) -> &[(usize, f64)] {
        let m = 2 * self.dim;
        &self.cell_faces[k * m..(k + 1) * m]
    }

    /// `|∂K| / |K|`
    pub fn perimeter_ratio(&self, k: usize) -> f64 {
        let p: f64 = self.cell_faces(k).iter().map(|&(s, _)| self.faces[s].area).sum();
        p / self.cell_volume[k]
    }

    pub fn face(&self, s: usize) -> &Face {
        &self.faces[s]
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn dual_links(&self, s: usize) -> &[DualLink] {
        &self.dual_links[s]
    }

    /// The other face of the same axis family on the inner cell of an exterior face.
    pub fn opposite_face(&self, s: usize) -> usize {
        let face = &self.faces[s];
        let k = face.inner_cell();
        let (lo, hi) = (2 * face.axis, 2 * face.axis + 1);
        let cf = self.cell_faces(k);
        if cf[lo].0 == s {
            cf[hi].0
        } else {
            cf[lo].0
        }
    }

    /// Centroid of the ghost cell mirrored across exterior face `s`.
    pub fn ghost_center(&self, s: usize) -> [f64; 2] {
        let face = &self.faces[s];
        let c = self.cell_center(face.inner_cell());
        let mut g = c;
        g[face.axis] = 2.0 * face.center[face.axis] - c[face.axis];
        g
    }

    /// Dual volume used for gradients across an exterior face towards a ghost cell.
    pub fn ghost_dual_volume(&self, s: usize) -> f64 {
        let face = &self.faces[s];
        2.0 * (face.dual_minus + face.dual_plus)
    }

    pub fn total_volume(&self) -> f64 {
        self.cell_volume.iter().sum()
    }
}

macro_rules! field_type {
    ($name:ident, $count:ident, $what:literal) => {
        #[doc = concat!("One scalar per ", $what, ".")]
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn zeros(grid: &MacGrid) -> Self {
                Self(vec![0.0; grid.$count()])
            }

            pub fn constant(grid: &MacGrid, value: f64) -> Self {
                Self(vec![value; grid.$count()])
            }

            pub fn from_vec(grid: &MacGrid, values: Vec<f64>) -> Result<Self, GridError> {
                if values.len() != grid.$count() {
                    return Err(GridError::ShapeMismatch { expected: grid.$count(), got: values.len() });
                }
                Ok(Self(values))
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn max(&self) -> f64 {
                self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }

            pub fn min(&self) -> f64 {
                self.0.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }
    };
}

field_type!(CellField, n_cells, "primal cell");
field_type!(FaceField, n_faces, "face");

impl CellField {
    /// Sample `f` at cell centers.
    pub fn from_fn(grid: &MacGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self((0..grid.n_cells()).map(|k| f(grid.cell_center(k))).collect())
    }
}

impl FaceField {
    /// Sample `f(axis, x)` at face centers.
    pub fn from_fn(grid: &MacGrid, f: impl Fn(usize, [f64; 2]) -> f64) -> Self {
        Self(grid.faces().iter().map(|face| f(face.axis, face.center)).collect())
    }

    /// Zero the values on exterior faces.
    pub fn clear_exterior(&mut self, grid: &MacGrid) {
        for (v, face) in self.0.iter_mut().zip(grid.faces()) {
            if !face.is_interior() {
                *v = 0.0;
            }
        }
    }
}

/// `(∂q)_σ = |σ|/|D_σ| (q_L − q_K)` on interior faces, zero on exterior faces.
pub fn discrete_gradient(grid: &MacGrid, q: &CellField) -> FaceField {
    assert_eq!(q.len(), grid.n_cells());
    let values = grid
        .faces()
        .iter()
        .map(|f| match (f.minus, f.plus) {
            (Some(k), Some(l)) => f.area / f.dual_volume * (q[l] - q[k]),
            _ => 0.0,
        })
        .collect();
    FaceField(values)
}

/// `(div v)_K = 1/|K| Σ_σ |σ| v_{σ,K}`, exterior face values included as stored.
pub fn discrete_divergence(grid: &MacGrid, v: &FaceField) -> CellField {
    assert_eq!(v.len(), grid.n_faces());
    let values = (0..grid.n_cells())
        .map(|k| {
            let sum: f64 = grid.cell_faces(k).iter().map(|&(s, o)| grid.face(s).area * o * v[s]).sum();
            sum / grid.cell_volume(k)
        })
        .collect();
    CellField(values)
}

/// `(div (q v))_K = 1/|K| Σ_σ |σ| q_σ v_{σ,K}` with interface values `q_σ`.
pub fn weighted_divergence(grid: &MacGrid, q_face: &FaceField, v: &FaceField) -> CellField {
    assert_eq!(q_face.len(), grid.n_faces());
    assert_eq!(v.len(), grid.n_faces());
    let values = (0..grid.n_cells())
        .map(|k| {
            let sum: f64 = grid.cell_faces(k).iter().map(|&(s, o)| grid.face(s).area * q_face[s] * o * v[s]).sum();
            sum / grid.cell_volume(k)
        })
        .collect();
    CellField(values)
}

/// `Δ_M q = div_M(∇_E q)` with zero gradient on exterior faces.
pub fn discrete_laplacian(grid: &MacGrid, q: &CellField) -> CellField {
    discrete_divergence(grid, &discrete_gradient(grid, q))
}

/// Volume-weighted average over dual cells; exterior faces take the adjacent cell value.
pub fn dual_average(grid: &MacGrid, q: &CellField) -> FaceField {
    assert_eq!(q.len(), grid.n_cells());
    let values = grid
        .faces()
        .iter()
        .map(|f| match (f.minus, f.plus) {
            (Some(k), Some(l)) => (f.dual_minus * q[k] + f.dual_plus * q[l]) / f.dual_volume,
            _ => q[f.inner_cell()],
        })
        .collect();
    FaceField(values)
}
