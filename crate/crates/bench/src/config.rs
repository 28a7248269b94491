//! Flat `key = value` configuration with optional section headers.
//!
//! ```text
//! # comment
//! case = vortex2d
//!
//! [mesh]
//! n = 50x50
//!
//! [physics]
//! eps = 1e-1        # trailing comments are allowed
//!
//! [boundary]
//! bc = periodic     # or per side: x_low, x_high, y_low, y_high
//!
//! [scheme]
//! scheme = wb
//!
//! [output]
//! dir = out
//! snapshots = 0.5, 1.0
//! ```
//!
//! Every key has one home section and may appear either there or before the
//! first header. Overrides use the same `key=value` form and may qualify the
//! key as `section.key`.

use std::path::PathBuf;

use hydromac::{BcKind, BoundaryConditions};
use thiserror::Error;

use crate::cases::{self, CaseId, Potential};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("key '{key}' belongs in section [{home}], found in [{found}]")]
    WrongSection { key: String, home: &'static str, found: String },
    #[error("invalid value for '{key}': {msg}")]
    Value { key: String, msg: String },
    #[error("missing required key '{0}'")]
    Missing(&'static str),
    #[error("duplicate key '{0}'")]
    Duplicate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Wb,
    Rusanov,
    Anelastic,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Wb => "wb",
            SchemeKind::Rusanov => "rusanov",
            SchemeKind::Anelastic => "anelastic",
        }
    }
}

/// Default `dt_min` as a fraction of `t_end`.
pub const DT_MIN_FRACTION: f64 = 1e-8;

const KEYS: &[(&str, &str)] = &[
    ("case", "case"),
    ("n", "mesh"),
    ("eps", "physics"),
    ("gamma", "physics"),
    ("potential", "physics"),
    ("zeta", "physics"),
    ("t_end", "physics"),
    ("bc", "boundary"),
    ("x_low", "boundary"),
    ("x_high", "boundary"),
    ("y_low", "boundary"),
    ("y_high", "boundary"),
    ("scheme", "scheme"),
    ("eta1", "scheme"),
    ("cfl_safety", "scheme"),
    ("newton_tol", "scheme"),
    ("dt_max", "scheme"),
    ("dt_fixed", "scheme"),
    ("dt_min", "scheme"),
    ("cfl", "scheme"),
    ("eps_list", "scheme"),
    ("dir", "output"),
    ("snapshots", "output"),
];

fn home_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, s)| *s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    pub case: CaseId,
    pub eps: f64,
    pub gamma: f64,
    pub mesh: Vec<usize>,
    pub t_end: f64,
    pub bc: BoundaryConditions,
    pub potential: Potential,
    pub zeta: f64,
    pub scheme: SchemeKind,
    pub eta1: f64,
    pub cfl_safety: f64,
    pub newton_tol: f64,
    pub dt_max: f64,
    pub dt_fixed: Option<f64>,
    /// Runs abort when the adaptive step drops below this.
    pub dt_min: f64,
    /// Courant number of the explicit comparator.
    pub cfl: f64,
    pub eps_list: Vec<f64>,
    pub output: Option<PathBuf>,
    pub snapshots: Vec<f64>,
}

impl CaseConfig {
    /// Case defaults with `ε`-dependent entries resolved for `eps`.
    pub fn defaults(case: CaseId) -> Self {
        Self::defaults_with_eps(case, cases::default_eps(case))
    }

    pub fn defaults_with_eps(case: CaseId, eps: f64) -> Self {
        let t_end = cases::default_t_end(case, eps);
        Self {
            case,
            eps,
            gamma: cases::default_gamma(case),
            mesh: cases::default_mesh(case),
            t_end,
            bc: BoundaryConditions::uniform(cases::default_bc(case)),
            potential: cases::default_potential(case),
            zeta: cases::default_zeta(case, eps),
            scheme: SchemeKind::Wb,
            eta1: 2.0,
            cfl_safety: 0.9,
            newton_tol: 1e-12,
            dt_max: t_end / 100.0,
            dt_fixed: None,
            dt_min: t_end * DT_MIN_FRACTION,
            cfl: 0.45,
            eps_list: vec![1e-1, 1e-2, 1e-3],
            output: None,
            snapshots: Vec::new(),
        }
    }

    /// Parses `text` and applies `overrides` on top.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut entries = parse_entries(text)?;
        for (i, o) in overrides.iter().enumerate() {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, msg: format!("override '{o}' lacks '='") })?;
            let key = key.trim();
            let key = match key.split_once('.') {
                Some((section, k)) => {
                    check_section(k, section)?;
                    k
                }
                None => key,
            };
            if home_of(key).is_none() {
                return Err(ConfigError::UnknownKey(key.to_string()));
            }
            entries.retain(|(k, _)| k != key);
            entries.push((key.to_string(), value.trim().to_string()));
        }
        Self::from_entries(&entries)
    }

    fn from_entries(entries: &[(String, String)]) -> Result<Self, ConfigError> {
        let get = |key: &str| entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let case: CaseId = get("case")
            .ok_or(ConfigError::Missing("case"))?
            .parse()
            .map_err(|msg| ConfigError::Value { key: "case".into(), msg })?;
        let eps = match get("eps") {
            Some(v) => parse_f64("eps", v)?,
            None => cases::default_eps(case),
        };
        let mut cfg = Self::defaults_with_eps(case, eps);
        let t_end_given = get("t_end").is_some();
        let mut sides: Option<[[BcKind; 2]; 2]> = None;
        for (key, value) in entries {
            let v = value.as_str();
            match key.as_str() {
                "case" | "eps" => {}
                "n" => cfg.mesh = parse_mesh(v)?,
                "gamma" => cfg.gamma = parse_f64(key, v)?,
                "potential" => cfg.potential = v.parse().map_err(|msg| ConfigError::Value { key: key.clone(), msg })?,
                "zeta" => cfg.zeta = parse_f64(key, v)?,
                "t_end" => cfg.t_end = parse_f64(key, v)?,
                "bc" => sides = Some([[parse_bc(v)?; 2]; 2]),
                "scheme" => {
                    cfg.scheme = match v {
                        "wb" => SchemeKind::Wb,
                        "rusanov" => SchemeKind::Rusanov,
                        "anelastic" => SchemeKind::Anelastic,
                        _ => return Err(ConfigError::Value { key: key.clone(), msg: format!("unknown scheme '{v}'") }),
                    }
                }
                "eta1" => cfg.eta1 = parse_f64(key, v)?,
                "cfl_safety" => cfg.cfl_safety = parse_f64(key, v)?,
                "newton_tol" => cfg.newton_tol = parse_f64(key, v)?,
                "dt_max" => cfg.dt_max = parse_f64(key, v)?,
                "dt_fixed" => cfg.dt_fixed = Some(parse_f64(key, v)?),
                "dt_min" => cfg.dt_min = parse_f64(key, v)?,
                "cfl" => cfg.cfl = parse_f64(key, v)?,
                "eps_list" => cfg.eps_list = parse_list(key, v)?,
                "dir" => cfg.output = Some(PathBuf::from(v)),
                "snapshots" => cfg.snapshots = parse_list(key, v)?,
                "x_low" | "x_high" | "y_low" | "y_high" => {}
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        let mut sides = sides.unwrap_or(cfg.bc.sides);
        for (name, axis, side) in [("x_low", 0, 0), ("x_high", 0, 1), ("y_low", 1, 0), ("y_high", 1, 1)] {
            if let Some(v) = get(name) {
                sides[axis][side] = parse_bc(v)?;
            }
        }
        cfg.bc = BoundaryConditions { sides };
        if !t_end_given {
            cfg.t_end = cases::default_t_end(case, cfg.eps);
        }
        if get("dt_max").is_none() {
            cfg.dt_max = cfg.t_end / 100.0;
        }
        if get("dt_min").is_none() {
            cfg.dt_min = cfg.t_end * DT_MIN_FRACTION;
        }
        if get("zeta").is_none() {
            cfg.zeta = cases::default_zeta(case, cfg.eps);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: String| Err(ConfigError::Value { key: key.into(), msg });
        if !(self.eps > 0.0) {
            return bad("eps", format!("must be positive, got {}", self.eps));
        }
        if !(self.zeta >= 0.0) {
            return bad("zeta", format!("must be non-negative, got {}", self.zeta));
        }
        if !(self.gamma > 1.0) {
            return bad("gamma", format!("must exceed 1, got {}", self.gamma));
        }
        if !(self.dt_min >= 0.0) {
            return bad("dt_min", format!("must be non-negative, got {}", self.dt_min));
        }
        if !(self.t_end > 0.0) {
            return bad("t_end", format!("must be positive, got {}", self.t_end));
        }
        if self.mesh.len() != self.case.dim() {
            return bad("n", format!("{} needs {} mesh counts, got {}", self.case, self.case.dim(), self.mesh.len()));
        }
        if self.case == CaseId::Vortex2d && self.gamma != 2.0 {
            return bad("gamma", "the stationary vortex is defined for gamma = 2".into());
        }
        if self.case == CaseId::ApSweep && self.eps_list.is_empty() {
            return bad("eps_list", "empty list".into());
        }
        if self.snapshots.iter().any(|&t| !(t > 0.0 && t < self.t_end)) {
            return bad("snapshots", format!("times must lie in (0, {})", self.t_end));
        }
        Ok(())
    }

    /// The configuration as `key = value` lines, parseable by [`CaseConfig::parse`].
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", ");
        let mesh = self.mesh.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x");
        let b = &self.bc.sides;
        let mut s = format!("case = {}\n\n[mesh]\nn = {mesh}\n\n", self.case);
        s += &format!(
            "[physics]\neps = {:e}\ngamma = {}\npotential = {}\nzeta = {:e}\nt_end = {}\n\n",
            self.eps,
            self.gamma,
            self.potential.name(),
            self.zeta,
            self.t_end
        );
        s += &format!(
            "[boundary]\nx_low = {}\nx_high = {}\ny_low = {}\ny_high = {}\n\n",
            b[0][0].name(),
            b[0][1].name(),
            b[1][0].name(),
            b[1][1].name()
        );
        s += &format!(
            "[scheme]\nscheme = {}\neta1 = {}\ncfl_safety = {}\nnewton_tol = {:e}\ndt_max = {:e}\ndt_min = {:e}\ncfl = {}\neps_list = {}\n",
            self.scheme.name(),
            self.eta1,
            self.cfl_safety,
            self.newton_tol,
            self.dt_max,
            self.dt_min,
            self.cfl,
            list(&self.eps_list)
        );
        if let Some(dt) = self.dt_fixed {
            s += &format!("dt_fixed = {dt:e}\n");
        }
        s += "\n[output]\n";
        if let Some(dir) = &self.output {
            s += &format!("dir = {}\n", dir.display());
        }
        if !self.snapshots.is_empty() {
            s += &format!("snapshots = {}\n", list(&self.snapshots));
        }
        s
    }
}

fn check_section(key: &str, section: &str) -> Result<(), ConfigError> {
    match home_of(key) {
        None => Err(ConfigError::UnknownKey(key.to_string())),
        Some(home) if home != section => {
            Err(ConfigError::WrongSection { key: key.to_string(), home, found: section.to_string() })
        }
        Some(_) => Ok(()),
    }
}

fn parse_entries(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut section: Option<String> = None;
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, msg: "unterminated section header".into() })?
                .trim();
            if !KEYS.iter().any(|(_, s)| *s == name) {
                return Err(ConfigError::Syntax { line: i + 1, msg: format!("unknown section [{name}]") });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: i + 1, msg: format!("expected key = value, got '{line}'") })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, msg: "empty key or value".into() });
        }
        match &section {
            Some(s) => check_section(key, s)?,
            None => {
                home_of(key).ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
            }
        }
        if out.iter().any(|(k, _)| k == key) {
            return Err(ConfigError::Duplicate(key.to_string()));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 =
        v.parse().map_err(|_| ConfigError::Value { key: key.into(), msg: format!("'{v}' is not a number") })?;
    if !x.is_finite() {
        return Err(ConfigError::Value { key: key.into(), msg: format!("'{v}' is not finite") });
    }
    Ok(x)
}

pub fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_f64(key, s)).collect()
}

pub fn parse_mesh(v: &str) -> Result<Vec<usize>, ConfigError> {
    v.split(['x', 'X', ','])
        .map(|s| {
            s.trim().parse::<usize>().map_err(|_| ConfigError::Value {
                key: "n".into(),
                msg: format!("'{v}' is not a mesh like 100 or 50x50"),
            })
        })
        .collect()
}

fn parse_bc(v: &str) -> Result<BcKind, ConfigError> {
    BcKind::parse(v).ok_or_else(|| ConfigError::Value { key: "bc".into(), msg: format!("unknown boundary kind '{v}'") })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# vortex run
case = vortex2d

[mesh]
n = 25x25

[physics]
eps = 1e-2   # stiff

[scheme]
scheme = anelastic
eta1 = 2.5

[output]
snapshots = 0.25, 0.5
";

    #[test]
    fn parses_sample() {
        let c = CaseConfig::parse(SAMPLE, &[]).unwrap();
        assert_eq!(c.case, CaseId::Vortex2d);
        assert_eq!(c.mesh, vec![25, 25]);
        assert_eq!(c.eps, 1e-2);
        assert_eq!(c.scheme, SchemeKind::Anelastic);
        assert_eq!(c.eta1, 2.5);
        assert_eq!(c.snapshots, vec![0.25, 0.5]);
        assert_eq!(c.t_end, 1.0);
        assert_eq!(c.dt_max, 0.01);
        assert!(c.bc.is_periodic(0));
    }

    #[test]
    fn overrides_apply() {
        let c = CaseConfig::parse(SAMPLE, &["physics.eps=0.1".into(), "n=50x50".into()]).unwrap();
        assert_eq!(c.eps, 0.1);
        assert_eq!(c.mesh, vec![50, 50]);
        assert!(CaseConfig::parse(SAMPLE, &["scheme.eps=0.1".into()]).is_err());
        assert!(CaseConfig::parse(SAMPLE, &["nonsense=1".into()]).is_err());
    }

    #[test]
    fn eps_dependent_defaults() {
        let c = CaseConfig::parse("case = pert1d\neps = 0.01\n", &[]).unwrap();
        assert_eq!(c.zeta, 1e-4);
        let c = CaseConfig::parse("case = pert2d\neps = 0.1\n", &[]).unwrap();
        assert_eq!(c.t_end, 0.005);
        assert!((c.zeta - 0.01).abs() < 1e-16);
        let c = CaseConfig::parse("case = pert1d\n", &[]).unwrap();
        assert_eq!(c.zeta, 1e-3);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(CaseConfig::parse("eps = 1\n", &[]), Err(ConfigError::Missing("case")));
        assert!(matches!(
            CaseConfig::parse("case = sod1d\n[mesh]\neps = 1\n", &[]),
            Err(ConfigError::WrongSection { .. })
        ));
        assert!(matches!(CaseConfig::parse("case = sod1d\n[bogus]\n", &[]), Err(ConfigError::Syntax { line: 2, .. })));
        assert!(matches!(CaseConfig::parse("case = sod1d\nfoo\n", &[]), Err(ConfigError::Syntax { line: 2, .. })));
        assert!(matches!(CaseConfig::parse("case = sod1d\nn = 10x10\n", &[]), Err(ConfigError::Value { .. })));
        assert!(matches!(CaseConfig::parse("case = pert1d\nzeta = -1\n", &[]), Err(ConfigError::Value { .. })));
        assert!(matches!(CaseConfig::parse("case = pert1d\neps = 0\n", &[]), Err(ConfigError::Value { .. })));
        assert!(matches!(CaseConfig::parse("case = sod1d\ncase = sod1d\n", &[]), Err(ConfigError::Duplicate(_))));
        assert!(matches!(CaseConfig::parse("case = vortex2d\ngamma = 1.4\n", &[]), Err(ConfigError::Value { .. })));
    }

    #[test]
    fn per_side_boundaries() {
        let c = CaseConfig::parse("case = pert1d\n[boundary]\nbc = wall\nx_high = transmissive\n", &[]).unwrap();
        assert_eq!(c.bc.side(0, false), BcKind::Wall);
        assert_eq!(c.bc.side(0, true), BcKind::Transmissive);
    }

    #[test]
    fn text_round_trip() {
        for case in CaseId::ALL {
            let mut c = CaseConfig::defaults(case);
            c.dt_fixed = Some(1e-3);
            c.output = Some("out/x".into());
            let back = CaseConfig::parse(&c.to_text(), &[]).unwrap();
            assert_eq!(back, c, "{case}");
        }
    }
}
