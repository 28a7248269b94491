use std::fs;
use std::path::{Path, PathBuf};

use hydromac_bench::compare::compare_dirs;
use hydromac_bench::tables::{format_table1, format_table2, table1, table2, TABLE_EPS};
use hydromac_bench::{run_case, CaseConfig, CaseId, RunStatus, SchemeKind};

fn golden(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hydromac-golden-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

#[test]
fn table1_matches_golden() {
    assert_eq!(format_table1(&table1().unwrap()), golden("table1.csv"));
}

#[test]
fn table2_matches_golden() {
    assert_eq!(format_table2(&table2(&[25, 50], &TABLE_EPS).unwrap()), golden("table2.csv"));
}

#[test]
fn sod_first_step_golden() {
    let cfg = CaseConfig::defaults(CaseId::Sod1d);
    let r = run_case(&cfg).unwrap();
    assert_eq!(r.status, RunStatus::Completed);
    let dt = r.steps[0].dt;
    assert_eq!(dt, 5.119017148707448e-5);

    // Hand evaluation of the face-wise bound at the discontinuity face, which
    // is binding: μ = 0.125, |∂K|/|K| = 2/h, η = η₁/ρ_D and the jump
    // ρ_σ ∂(h'(ρ) - h'(ρ̃)) = ∂p + ρ_σ ∂φ with φ = x.
    let (g, h): (f64, f64) = (1.4, 1.0 / 200.0);
    let (a, b) = (1.0f64, 0.125f64);
    let hp = |r: f64| g / (g - 1.0) * r.powf(g - 1.0);
    let rho_face = (a.powf(g) - b.powf(g)) / (hp(a) - hp(b));
    let mu = b / a;
    let eta: f64 = 2.0 / (0.5 * (a + b));
    let jump = ((b.powf(g) - a.powf(g)) / h + rho_face) * h;
    let speed = eta.sqrt() * jump.abs().sqrt();
    let bound = 0.9 * (mu / 3.0) / (2.0 / h * speed);
    // the run splits [0, T] into equal steps no longer than the bound
    let oracle = cfg.t_end / (cfg.t_end / bound).ceil();
    assert!((dt - oracle).abs() < 1e-12 * oracle, "{dt:e} vs {oracle:e}");
}

#[test]
fn sod_agrees_with_fine_rusanov() {
    let dir = scratch("sod");
    let mut wb = CaseConfig::defaults(CaseId::Sod1d);
    wb.output = Some(dir.join("wb"));
    let mut rs = CaseConfig::defaults(CaseId::Sod1d);
    rs.scheme = SchemeKind::Rusanov;
    rs.mesh = vec![2000];
    rs.output = Some(dir.join("rusanov"));
    assert_eq!(run_case(&wb).unwrap().status, RunStatus::Completed);
    assert_eq!(run_case(&rs).unwrap().status, RunStatus::Completed);
    let rows = compare_dirs(&dir.join("wb/sod1d"), &dir.join("rusanov/sod1d")).unwrap();
    let rho = rows.iter().find(|r| r.field == "rho").unwrap();
    assert_eq!(rho.factor, 10);
    assert!(rho.l1 <= 0.02, "L1(rho) = {:e}", rho.l1);
    let _ = fs::remove_dir_all(&dir);
}

fn csv_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (PathBuf::from(p.file_name().unwrap()), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn reruns_are_byte_identical() {
    let dir = scratch("det");
    for case in [CaseId::Pert2d, CaseId::Sod1d] {
        let mut cfg = CaseConfig::defaults(case);
        if case == CaseId::Pert2d {
            cfg.mesh = vec![20, 20];
        }
        cfg.snapshots = vec![0.5 * cfg.t_end];
        let mut files = Vec::new();
        for run in ["a", "b"] {
            cfg.output = Some(dir.join(run));
            run_case(&cfg).unwrap();
            files.push(csv_files(&dir.join(run).join(case.name())));
        }
        assert!(files[0].len() >= 5, "{:?}", files[0].iter().map(|f| &f.0).collect::<Vec<_>>());
        assert_eq!(files[0], files[1], "{case} output differs between runs");
    }
    let _ = fs::remove_dir_all(&dir);
}
