//! Field-wise L¹ distances between two run directories.

use std::path::Path;

use crate::config::parse_mesh;
use crate::run::{read_field, read_report, Field, RunError};

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub field: String,
    pub l1: f64,
    /// Cells of the finer run averaged into one cell of the coarser run.
    pub factor: usize,
}

/// Averages a row-major cell field on `fine` down to `coarse` when every
/// axis is refined by the same integer factor.
pub fn coarsen(values: &[f64], fine: &[usize], coarse: &[usize]) -> Option<Vec<f64>> {
    if fine.len() != coarse.len() || coarse.iter().any(|&c| c == 0) {
        return None;
    }
    let r = fine[0] / coarse[0];
    if r == 0 || fine.iter().zip(coarse).any(|(&f, &c)| f != r * c) {
        return None;
    }
    let nx = fine[0];
    let (cx, cy) = (coarse[0], coarse.get(1).copied().unwrap_or(1));
    let ry = if coarse.len() == 2 { r } else { 1 };
    if values.len() != nx * cy * ry {
        return None;
    }
    let mut out = vec![0.0; cx * cy];
    for (k, v) in values.iter().enumerate() {
        let (i, j) = (k % nx, k / nx);
        out[i / r + cx * (j / ry)] += v;
    }
    let w = 1.0 / (r * ry) as f64;
    out.iter_mut().for_each(|x| *x *= w);
    Some(out)
}

/// `|Ω| · mean |a - b|` on the coarser of the two meshes, the cell-volume
/// weighted L¹ distance for uniform meshes on the unit domain.
pub fn field_distance(a: &Field, mesh_a: &[usize], b: &Field, mesh_b: &[usize]) -> Option<(f64, usize)> {
    let cells = |m: &[usize]| m.iter().product::<usize>();
    let (va, vb, factor) = if a.values.len() == b.values.len() {
        (a.values.clone(), b.values.clone(), 1)
    } else if a.values.len() == cells(mesh_a) && b.values.len() == cells(mesh_b) {
        if cells(mesh_a) < cells(mesh_b) {
            (a.values.clone(), coarsen(&b.values, mesh_b, mesh_a)?, mesh_b[0] / mesh_a[0])
        } else {
            (coarsen(&a.values, mesh_a, mesh_b)?, b.values.clone(), mesh_a[0] / mesh_b[0])
        }
    } else {
        return None;
    };
    let n = va.len() as f64;
    Some((va.iter().zip(&vb).map(|(x, y)| (x - y).abs()).sum::<f64>() / n, factor))
}

fn lookup<'a>(kv: &'a [(String, String)], key: &str, dir: &Path) -> Result<&'a str, RunError> {
    kv.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| RunError::Report { path: dir.to_path_buf(), msg: format!("missing '{key}'") })
}

/// Compares the final snapshots of two run directories (each holding a
/// `report.txt`) field by field. Fields without a common resolution are skipped.
pub fn compare_dirs(a: &Path, b: &Path) -> Result<Vec<CompareRow>, RunError> {
    let load = |dir: &Path| -> Result<(Vec<usize>, usize, Vec<String>), RunError> {
        let kv = read_report(dir)?;
        let bad = |msg: String| RunError::Report { path: dir.to_path_buf(), msg };
        let mesh = parse_mesh(lookup(&kv, "mesh", dir)?).map_err(|e| bad(e.to_string()))?;
        let step = lookup(&kv, "final_step", dir)?.parse().map_err(|_| bad("final_step is not an integer".into()))?;
        let fields = lookup(&kv, "fields", dir)?.split(',').map(|s| s.trim().to_string()).collect();
        Ok((mesh, step, fields))
    };
    let (mesh_a, step_a, fields_a) = load(a)?;
    let (mesh_b, step_b, fields_b) = load(b)?;
    let mut rows = Vec::new();
    for name in fields_a.iter().filter(|f| fields_b.contains(f)) {
        let fa = read_field(&a.join(format!("{name}_{step_a}.csv")))?;
        let fb = read_field(&b.join(format!("{name}_{step_b}.csv")))?;
        if let Some((l1, factor)) = field_distance(&fa, &mesh_a, &fb, &mesh_b) {
            rows.push(CompareRow { field: name.clone(), l1, factor });
        }
    }
    Ok(rows)
}

pub fn format_rows(rows: &[CompareRow]) -> String {
    let mut s = String::from("field,l1,factor\n");
    for r in rows {
        s += &format!("{},{:e},{}\n", r.field, r.l1, r.factor);
    }
    s
}
