use hydromac::anelastic_solver::NeumannOperator;
use hydromac::diagnostics::l1_error_cells;
use hydromac::mac_grid::{discrete_divergence, discrete_gradient, discrete_laplacian};
use hydromac::{build_grid, BcKind, BoundaryConditions, CellField, Domain, FaceField, MacGrid};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_grid(rng: &mut impl Rng) -> MacGrid {
    let kinds = [BcKind::Wall, BcKind::Periodic];
    let kx = kinds[rng.random_range(0..2)];
    if rng.random_bool(0.3) {
        let n = rng.random_range(2..40);
        build_grid(Domain::interval(0.0, rng.random_range(0.5..3.0)), &[n], BoundaryConditions::uniform(kx)).unwrap()
    } else {
        let ky = kinds[rng.random_range(0..2)];
        let n = [rng.random_range(2..15), rng.random_range(2..15)];
        let dom = Domain::rect((0.0, rng.random_range(0.5..2.0)), (-1.0, rng.random_range(0.0..1.0)));
        build_grid(dom, &n, BoundaryConditions::new(kx, kx, ky, ky)).unwrap()
    }
}

fn random_cells(grid: &MacGrid, rng: &mut impl Rng) -> CellField {
    CellField::from_vec(grid, (0..grid.n_cells()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_faces(grid: &MacGrid, rng: &mut impl Rng) -> FaceField {
    let mut v = FaceField::from_vec(grid, (0..grid.n_faces()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    v.clear_exterior(grid);
    v
}

#[test]
fn divergence_gradient_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let grid = random_grid(&mut rng);
        let q = random_cells(&grid, &mut rng);
        let v = random_faces(&grid, &mut rng);
        let div = discrete_divergence(&grid, &v);
        let grad = discrete_gradient(&grid, &q);
        let cells: f64 = (0..grid.n_cells()).map(|k| grid.cell_volume(k) * q[k] * div[k]).sum();
        let faces: f64 = (0..grid.n_faces()).map(|s| grid.face(s).dual_volume * grad[s] * v[s]).sum();
        let scale: f64 = (0..grid.n_cells()).map(|k| (grid.cell_volume(k) * q[k] * div[k]).abs()).sum::<f64>().max(1.0);
        worst = worst.max((cells + faces).abs() / scale);
    }
    assert!(worst <= 1e-13, "duality defect {worst:e}");
}

#[test]
fn laplacian_is_symmetric_and_negative() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let grid = random_grid(&mut rng);
        let a = random_cells(&grid, &mut rng);
        let b = random_cells(&grid, &mut rng);
        let la = discrete_laplacian(&grid, &a);
        let lb = discrete_laplacian(&grid, &b);
        let ip = |x: &CellField, y: &CellField| -> f64 {
            (0..grid.n_cells()).map(|k| grid.cell_volume(k) * x[k] * y[k]).sum()
        };
        let scale = ip(&a, &la).abs() + ip(&b, &lb).abs() + 1.0;
        assert!((ip(&a, &lb) - ip(&b, &la)).abs() < 1e-12 * scale);
        assert!(ip(&a, &la) <= 1e-12 * scale);
    }
}

/// Dense oracle: assemble `div(c ∇·)` entrywise and solve the bordered system
/// `[A w; wᵀ 0] [x; λ] = [|K| f; 0]` whose solution has zero weighted mean.
fn dense_neumann(grid: &MacGrid, coeff: &FaceField, f: &CellField) -> DVector<f64> {
    let n = grid.n_cells();
    let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
    for (s, face) in grid.faces().iter().enumerate() {
        if let (Some(k), Some(l)) = (face.minus, face.plus) {
            let w = coeff[s] * face.area * face.area / face.dual_volume;
            m[(k, k)] -= w;
            m[(l, l)] -= w;
            m[(k, l)] += w;
            m[(l, k)] += w;
        }
    }
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for k in 0..n {
        m[(k, n)] = grid.cell_volume(k);
        m[(n, k)] = grid.cell_volume(k);
        rhs[k] = grid.cell_volume(k) * f[k];
    }
    let x = m.lu().solve(&rhs).expect("bordered system is regular");
    x.rows(0, n).into_owned()
}

#[test]
fn neumann_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let three = build_grid(Domain::unit_interval(), &[3], BoundaryConditions::uniform(BcKind::Wall)).unwrap();
    let mut grids = vec![three];
    for _ in 0..30 {
        grids.push(random_grid(&mut rng));
    }
    for grid in grids {
        let mut coeff =
            FaceField::from_vec(&grid, (0..grid.n_faces()).map(|_| rng.random_range(0.5..2.0)).collect()).unwrap();
        coeff.clear_exterior(&grid);
        let mut f = random_cells(&grid, &mut rng);
        let total: f64 = (0..grid.n_cells()).map(|k| grid.cell_volume(k)).sum();
        let mean = (0..grid.n_cells()).map(|k| grid.cell_volume(k) * f[k]).sum::<f64>() / total;
        f.iter_mut().for_each(|v| *v -= mean);
        let x = NeumannOperator::new(&grid, &coeff).unwrap().solve(&f).unwrap();
        let oracle = dense_neumann(&grid, &coeff, &f);
        let scale = oracle.amax().max(1.0);
        for k in 0..grid.n_cells() {
            assert!((x[k] - oracle[k]).abs() < 1e-10 * scale, "cell {k}: {} vs {}", x[k], oracle[k]);
        }
    }
}

#[test]
fn three_cell_neumann_by_hand() {
    let grid = build_grid(Domain::unit_interval(), &[3], BoundaryConditions::uniform(BcKind::Wall)).unwrap();
    let mut c = FaceField::constant(&grid, 1.0);
    c.clear_exterior(&grid);
    let f = CellField::from_vec(&grid, vec![1.0, 0.0, -1.0]).unwrap();
    let x = NeumannOperator::new(&grid, &c).unwrap().solve(&f).unwrap();
    // 3 (π₁ - π₀) = 1/3 and 3 (π₁ - π₂) = -1/3 with zero mean
    for (v, e) in x.iter().zip([-1.0 / 9.0, 0.0, 1.0 / 9.0]) {
        assert!((v - e).abs() < 1e-14, "{v} vs {e}");
    }
}

proptest! {
    #[test]
    fn l1_is_a_metric(seed in 0u64..10_000, n in 2usize..30) {
        let grid = build_grid(Domain::unit_interval(), &[n], BoundaryConditions::uniform(BcKind::Wall)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_cells(&grid, &mut rng);
        let b = random_cells(&grid, &mut rng);
        let c = random_cells(&grid, &mut rng);
        let d = |x: &CellField, y: &CellField| l1_error_cells(&grid, x, y);
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-15);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-14);
        prop_assert!(d(&a, &b) >= 0.0);
    }
}
