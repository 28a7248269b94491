//! Canned reproductions of the well-balancing and vortex tables.

use std::fmt::Write as _;

use hydromac::diagnostics::eoc;

use crate::cases::{CaseId, Potential};
use crate::config::CaseConfig;
use crate::run::{run_case, RunError, RunStatus};

pub const TABLE1_POTENTIALS: [Potential; 3] = [Potential::Linear, Potential::Quadratic, Potential::Sine];
pub const TABLE_EPS: [f64; 3] = [1e-1, 1e-2, 1e-3];
pub const TABLE2_MESHES: [usize; 4] = [25, 50, 100, 200];

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub potential: Potential,
    pub eps: f64,
    pub l1_rho: f64,
    pub l1_mom: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Row {
    pub eps: f64,
    pub n: usize,
    /// L¹ errors of `ρ`, `ρu`, `ρv`.
    pub errors: [f64; 3],
    /// EOC against the previous mesh of the same `ε`.
    pub eoc: Option<[f64; 3]>,
    pub newton_max: usize,
}

fn failed(cfg: &CaseConfig, message: Option<String>) -> RunError {
    RunError::Report {
        path: std::path::PathBuf::from(cfg.case.name()),
        msg: format!("run failed: {}", message.unwrap_or_default()),
    }
}

/// The nine well-balancing runs: hydrostatic data, 100 cells, T = 2.
pub fn table1() -> Result<Vec<Table1Row>, RunError> {
    let mut rows = Vec::new();
    for potential in TABLE1_POTENTIALS {
        for eps in TABLE_EPS {
            let mut cfg = CaseConfig::defaults_with_eps(CaseId::WellBalance1d, eps);
            cfg.potential = potential;
            let r = run_case(&cfg)?;
            if r.status != RunStatus::Completed {
                return Err(failed(&cfg, r.message));
            }
            let e = &r.errors[0];
            rows.push(Table1Row {
                potential,
                eps,
                l1_rho: e.get("rho").unwrap_or(f64::NAN),
                l1_mom: e.get("rho_u").unwrap_or(f64::NAN),
            });
        }
    }
    Ok(rows)
}

pub fn format_table1(rows: &[Table1Row]) -> String {
    let mut s = String::from("potential,eps,l1_rho,l1_rho_u\n");
    for r in rows {
        let _ = writeln!(s, "{},{:e},{:e},{:e}", r.potential.name(), r.eps, r.l1_rho, r.l1_mom);
    }
    s
}

/// Stationary vortex errors against the initial data at T = 1 on `n × n` meshes.
pub fn table2(meshes: &[usize], eps_list: &[f64]) -> Result<Vec<Table2Row>, RunError> {
    let mut rows: Vec<Table2Row> = Vec::new();
    for &eps in eps_list {
        let mut prev: Option<[f64; 3]> = None;
        for &n in meshes {
            let mut cfg = CaseConfig::defaults_with_eps(CaseId::Vortex2d, eps);
            cfg.mesh = vec![n, n];
            let r = run_case(&cfg)?;
            if r.status != RunStatus::Completed {
                return Err(failed(&cfg, r.message));
            }
            let e = &r.errors[0];
            let errors = ["rho", "rho_u", "rho_v"].map(|k| e.get(k).unwrap_or(f64::NAN));
            let eoc = prev.map(|p| [0, 1, 2].map(|i| eoc(p[i], errors[i])));
            rows.push(Table2Row { eps, n, errors, eoc, newton_max: r.newton_stats().map_or(0, |s| s.1) });
            prev = Some(errors);
        }
    }
    Ok(rows)
}

pub fn format_table2(rows: &[Table2Row]) -> String {
    let mut s = String::from("eps,n,l1_rho,eoc_rho,l1_rho_u,eoc_rho_u,l1_rho_v,eoc_rho_v\n");
    for r in rows {
        let _ = write!(s, "{:e},{}", r.eps, r.n);
        for i in 0..3 {
            let _ = write!(s, ",{:e},", r.errors[i]);
            if let Some(e) = r.eoc {
                let _ = write!(s, "{:.4}", e[i]);
            }
        }
        s.push('\n');
    }
    s
}
