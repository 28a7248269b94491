//! Parameter sweeps over `ε` or the mesh.

use std::fmt::Write as _;
use std::path::PathBuf;

use hydromac::diagnostics::eoc;

use crate::config::{CaseConfig, ConfigError};
use crate::run::{mesh_text, run_case, RunError, RunReport, RunStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Eps,
    Mesh,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "eps" => Ok(SweepAxis::Eps),
            "mesh" => Ok(SweepAxis::Mesh),
            _ => Err(format!("unknown sweep axis '{s}' (expected eps or mesh)")),
        }
    }
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Eps => "eps",
            SweepAxis::Mesh => "mesh",
        }
    }
}

#[derive(Debug)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub values: Vec<String>,
    pub runs: Vec<RunReport>,
}

impl SweepResult {
    /// Names of the norms shared by every run, in the order of the first.
    pub fn norm_names(&self) -> Vec<String> {
        let Some(first) = self.runs.first().and_then(|r| r.errors.first()) else {
            return Vec::new();
        };
        first
            .norms
            .iter()
            .map(|(n, _)| n.clone())
            .filter(|n| self.runs.iter().all(|r| r.errors.first().and_then(|e| e.get(n)).is_some()))
            .collect()
    }

    pub fn norm(&self, run: usize, name: &str) -> Option<f64> {
        self.runs[run].errors.first()?.get(name)
    }

    /// EOC of `name` between consecutive runs of a mesh sweep.
    pub fn eocs(&self, name: &str) -> Vec<f64> {
        (1..self.runs.len())
            .map(|i| match (self.norm(i - 1, name), self.norm(i, name)) {
                (Some(a), Some(b)) => eoc(a, b),
                _ => f64::NAN,
            })
            .collect()
    }

    pub fn status(&self) -> RunStatus {
        if self.runs.iter().any(|r| r.status == RunStatus::Failed) {
            RunStatus::Failed
        } else if self.runs.iter().any(|r| r.status == RunStatus::CrashedAsExpected) {
            RunStatus::CrashedAsExpected
        } else {
            RunStatus::Completed
        }
    }

    /// Summary table as CSV; mesh sweeps carry one EOC column per norm.
    pub fn summary(&self) -> String {
        let names = self.norm_names();
        let mut s = format!("{},status", self.axis.name());
        for n in &names {
            s += &format!(",{n}");
            if self.axis == SweepAxis::Mesh {
                s += &format!(",eoc_{n}");
            }
        }
        s.push('\n');
        let eocs: Vec<Vec<f64>> = names.iter().map(|n| self.eocs(n)).collect();
        for (i, r) in self.runs.iter().enumerate() {
            let value = match self.axis {
                SweepAxis::Eps => format!("{:e}", r.config.eps),
                SweepAxis::Mesh => mesh_text(&r.config.mesh),
            };
            let _ = write!(s, "{value},{}", r.status.name());
            for (j, n) in names.iter().enumerate() {
                let _ = write!(s, ",{:e}", self.norm(i, n).unwrap_or(f64::NAN));
                if self.axis == SweepAxis::Mesh {
                    if i == 0 {
                        s += ",";
                    } else {
                        let _ = write!(s, ",{:.4}", eocs[j][i - 1]);
                    }
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Runs `text` once per value with the axis key overridden. Each member
/// writes below `<dir>/<axis>_<value>/` when an output directory is set.
pub fn sweep(text: &str, overrides: &[String], axis: SweepAxis, values: &[String]) -> Result<SweepResult, RunError> {
    if values.is_empty() {
        return Err(ConfigError::Value { key: axis.name().into(), msg: "empty sweep value list".into() }.into());
    }
    let base = CaseConfig::parse(text, overrides)?;
    let mut runs = Vec::with_capacity(values.len());
    for v in values {
        let mut ov = overrides.to_vec();
        match axis {
            SweepAxis::Eps => ov.push(format!("eps={v}")),
            SweepAxis::Mesh => {
                let dims = vec![v.as_str(); base.case.dim()].join("x");
                ov.push(format!("n={}", if v.contains('x') { v.as_str() } else { dims.as_str() }));
            }
        }
        let mut cfg = CaseConfig::parse(text, &ov)?;
        if let Some(dir) = &base.output {
            cfg.output = Some(member_dir(dir, axis, v));
        }
        runs.push(run_case(&cfg)?);
    }
    let result = SweepResult { axis, values: values.to_vec(), runs };
    if let Some(dir) = &base.output {
        let path = dir.join(format!("summary_{}.csv", axis.name()));
        std::fs::write(&path, result.summary()).map_err(|source| RunError::Io { path, source })?;
    }
    Ok(result)
}

fn member_dir(dir: &std::path::Path, axis: SweepAxis, value: &str) -> PathBuf {
    dir.join(format!("{}_{value}", axis.name()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_values_rejected() {
        let err = sweep("case = pert1d\n", &[], SweepAxis::Eps, &[]).unwrap_err();
        assert!(matches!(err, RunError::Config(ConfigError::Value { .. })));
    }

    #[test]
    fn mesh_sweep_reports_eoc() {
        let text = "case = vortex2d\nt_end = 0.05\n";
        let r = sweep(text, &[], SweepAxis::Mesh, &["8".into(), "16".into()]).unwrap();
        assert_eq!(r.runs.len(), 2);
        assert_eq!(r.runs[1].config.mesh, vec![16, 16]);
        let summary = r.summary();
        assert!(summary.starts_with("mesh,status,rho,eoc_rho,rho_u,eoc_rho_u,rho_v,eoc_rho_v\n"), "{summary}");
        assert_eq!(summary.lines().count(), 3);
        assert_eq!(r.eocs("rho").len(), 1);
    }

    #[test]
    fn eps_sweep_rederives_defaults() {
        let r = sweep("case = pert1d\nn = 20\n", &[], SweepAxis::Eps, &["1".into(), "0.1".into()]).unwrap();
        assert_eq!(r.runs[0].config.zeta, 1e-3);
        assert!((r.runs[1].config.zeta - 1e-2).abs() < 1e-16);
        assert_eq!(r.status(), RunStatus::Completed);
    }
}
