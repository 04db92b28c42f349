//! INI run configuration and its conversion to dimensionless quantities.

use std::path::{Path, PathBuf};

use dmifilm::dynamics::SimConfig;
use dmifilm::linalg::SolverKind;
use dmifilm::{derive_params, Error, MaterialParams, Result};
use ini::Ini;

/// Film thickness used when reporting energies in joules.
pub const SI_THICKNESS_M: f64 = 9e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Disk { diameter_nm: f64, target_h_nm: f64 },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPreset {
    UniformZ,
    UniformX,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub a: f64,
    pub d: f64,
    pub ms: f64,
    pub alpha: f64,
    pub mesh: MeshSource,
    pub dt_s: f64,
    pub t_end_s: f64,
    pub relax_vmax: Option<f64>,
    pub solver: SolverKind,
    pub solver_tol: f64,
    pub renormalize: bool,
    pub initial: InitialPreset,
    pub out_dir: PathBuf,
    pub snapshot_every: usize,
    pub profile_samples: usize,
    pub band_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            a: 8.78e-12,
            d: 1.58e-3,
            ms: 3.84e5,
            alpha: 1.0,
            mesh: MeshSource::Disk {
                diameter_nm: 100.0,
                target_h_nm: 4.45,
            },
            dt_s: 1e-11,
            t_end_s: 1e-9,
            relax_vmax: None,
            solver: SolverKind::Direct,
            solver_tol: 1e-10,
            renormalize: false,
            initial: InitialPreset::UniformZ,
            out_dir: PathBuf::from("out"),
            snapshot_every: 0,
            profile_samples: 401,
            band_tol: dmifilm::analysis::DEFAULT_BAND_TOL,
        }
    }
}

fn number(section: &str, key: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::InvalidParameter(format!("[{section}] {key}: '{raw}' is not a finite number")))
}

fn count(section: &str, key: &str, raw: &str) -> Result<usize> {
    raw.trim()
        .parse::<usize>()
        .map_err(|_| Error::InvalidParameter(format!("[{section}] {key}: '{raw}' is not a nonnegative integer")))
}

fn flag(section: &str, key: &str, raw: &str) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::InvalidParameter(format!(
            "[{section}] {key}: '{raw}' is not a boolean"
        ))),
    }
}

fn positive(section: &str, key: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!(
            "[{section}] {key} must be positive, got {v}"
        )))
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parse INI text; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let ini = Ini::load_from_str_noescape(text).map_err(|e| Error::Parse {
            line: e.line,
            msg: e.msg.to_string(),
        })?;
        let mut cfg = Self::default();
        let known: &[(&str, &[&str])] = &[
            ("material", &["A_J_per_m", "D_J_per_m2", "Ms_A_per_m", "alpha"]),
            ("mesh", &["source", "diameter_nm", "target_h_nm", "path"]),
            (
                "dynamics",
                &["dt_s", "t_end_s", "relax_vmax", "solver", "solver_tol", "renormalize"],
            ),
            ("initial", &["preset", "path"]),
            ("output", &["dir", "snapshot_every", "profile_samples", "band_tol"]),
        ];
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if props.iter().next().is_some() {
                    return Err(Error::InvalidParameter("keys outside of a [section]".into()));
                }
                continue;
            };
            let Some((_, keys)) = known.iter().find(|(s, _)| *s == name) else {
                return Err(Error::InvalidParameter(format!("unknown section [{name}]")));
            };
            for (k, _) in props.iter() {
                if !keys.contains(&k) {
                    return Err(Error::InvalidParameter(format!("unknown key '{k}' in [{name}]")));
                }
            }
        }
        let get = |s: &str, k: &str| ini.section(Some(s)).and_then(|p| p.get(k)).map(str::to_owned);

        if let Some(v) = get("material", "A_J_per_m") {
            cfg.a = positive("material", "A_J_per_m", number("material", "A_J_per_m", &v)?)?;
        }
        if let Some(v) = get("material", "D_J_per_m2") {
            cfg.d = number("material", "D_J_per_m2", &v)?;
        }
        if let Some(v) = get("material", "Ms_A_per_m") {
            cfg.ms = positive("material", "Ms_A_per_m", number("material", "Ms_A_per_m", &v)?)?;
        }
        if let Some(v) = get("material", "alpha") {
            cfg.alpha = positive("material", "alpha", number("material", "alpha", &v)?)?;
        }

        let source = get("mesh", "source").unwrap_or_else(|| "disk".into());
        cfg.mesh = match source.trim() {
            "disk" => {
                if get("mesh", "path").is_some() {
                    return Err(Error::InvalidParameter("[mesh] path given with source = disk".into()));
                }
                let (mut d, mut h) = (100.0, 4.45);
                if let Some(v) = get("mesh", "diameter_nm") {
                    d = positive("mesh", "diameter_nm", number("mesh", "diameter_nm", &v)?)?;
                }
                if let Some(v) = get("mesh", "target_h_nm") {
                    h = positive("mesh", "target_h_nm", number("mesh", "target_h_nm", &v)?)?;
                }
                MeshSource::Disk {
                    diameter_nm: d,
                    target_h_nm: h,
                }
            }
            "file" => {
                if get("mesh", "diameter_nm").is_some() || get("mesh", "target_h_nm").is_some() {
                    return Err(Error::InvalidParameter(
                        "[mesh] disk parameters given with source = file".into(),
                    ));
                }
                let p = get("mesh", "path")
                    .ok_or_else(|| Error::InvalidParameter("[mesh] source = file needs a path".into()))?;
                MeshSource::File(base.join(p.trim()))
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "[mesh] source must be disk or file, got '{other}'"
                )))
            }
        };

        if let Some(v) = get("dynamics", "dt_s") {
            cfg.dt_s = positive("dynamics", "dt_s", number("dynamics", "dt_s", &v)?)?;
        }
        if let Some(v) = get("dynamics", "t_end_s") {
            let t = number("dynamics", "t_end_s", &v)?;
            if t < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "[dynamics] t_end_s must be nonnegative, got {t}"
                )));
            }
            cfg.t_end_s = t;
        }
        if let Some(v) = get("dynamics", "relax_vmax") {
            let v = v.trim();
            cfg.relax_vmax = if v.is_empty() || v == "none" {
                None
            } else {
                Some(positive(
                    "dynamics",
                    "relax_vmax",
                    number("dynamics", "relax_vmax", v)?,
                )?)
            };
        }
        if let Some(v) = get("dynamics", "solver") {
            cfg.solver = v.parse()?;
        }
        if let Some(v) = get("dynamics", "solver_tol") {
            cfg.solver_tol = number("dynamics", "solver_tol", &v)?;
        }
        if let Some(v) = get("dynamics", "renormalize") {
            cfg.renormalize = flag("dynamics", "renormalize", &v)?;
        }

        cfg.initial = match get("initial", "preset").as_deref().map(str::trim) {
            None | Some("uniform_z") => InitialPreset::UniformZ,
            Some("uniform_x") => InitialPreset::UniformX,
            Some("file") => {
                let p = get("initial", "path")
                    .ok_or_else(|| Error::InvalidParameter("[initial] preset = file needs a path".into()))?;
                InitialPreset::File(base.join(p.trim()))
            }
            Some(other) => {
                return Err(Error::InvalidParameter(format!(
                    "[initial] preset must be uniform_z, uniform_x or file, got '{other}'"
                )))
            }
        };

        if let Some(v) = get("output", "dir") {
            cfg.out_dir = base.join(v.trim());
        }
        if let Some(v) = get("output", "snapshot_every") {
            cfg.snapshot_every = count("output", "snapshot_every", &v)?;
        }
        if let Some(v) = get("output", "profile_samples") {
            cfg.profile_samples = count("output", "profile_samples", &v)?;
        }
        if let Some(v) = get("output", "band_tol") {
            cfg.band_tol = positive("output", "band_tol", number("output", "band_tol", &v)?)?;
        }
        cfg.params()?;
        cfg.sim_config(false)?.validate()?;
        Ok(cfg)
    }

    pub fn params(&self) -> Result<MaterialParams> {
        derive_params(self.a, self.d, self.ms, self.alpha)
    }

    /// Dimensionless integrator settings; `relax` enables the vmax stop.
    pub fn sim_config(&self, relax: bool) -> Result<SimConfig> {
        let p = self.params()?;
        Ok(SimConfig {
            tau: p.seconds_to_dimensionless(self.dt_s),
            t_end: p.seconds_to_dimensionless(self.t_end_s),
            solver_tol: self.solver_tol,
            solver: self.solver,
            stop_vmax: if relax { self.relax_vmax } else { None },
            snapshot_every: self.snapshot_every,
            renormalize: self.renormalize,
            ..SimConfig::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
[material]
A_J_per_m = 8.78e-12
D_J_per_m2 = 1.58e-3
Ms_A_per_m = 3.84e5
alpha = 0.28

[mesh]
source = disk
diameter_nm = 140
target_h_nm = 4.45

[dynamics]
# comment line
dt_s = 3.5e-12
t_end_s = 1e-9
solver = iterative
solver_tol = 1e-10

[initial]
preset = uniform_x

[output]
dir = run
snapshot_every = 10
profile_samples = 99
";

    #[test]
    fn parses_all_sections() {
        let c = RunConfig::parse(SAMPLE, Path::new("/base")).unwrap();
        assert_eq!(c.alpha, 0.28);
        assert_eq!(
            c.mesh,
            MeshSource::Disk {
                diameter_nm: 140.0,
                target_h_nm: 4.45
            }
        );
        assert_eq!(c.solver, SolverKind::Iterative);
        assert_eq!(c.initial, InitialPreset::UniformX);
        assert_eq!(c.out_dir, PathBuf::from("/base/run"));
        assert_eq!(c.snapshot_every, 10);
        assert_eq!(c.profile_samples, 99);
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            "[material]\nalpha = -1\n",
            "[material]\nMs_A_per_m = abc\n",
            "[mesh]\nsource = sphere\n",
            "[mesh]\nsource = file\n",
            "[mesh]\nsource = disk\npath = x.mesh\n",
            "[dynamics]\nsolver_tol = 1e-2\n",
            "[dynamics]\nsolver = lu\n",
            "[colour]\nx = 1\n",
            "[material]\nexchange = 1\n",
        ] {
            assert!(
                matches!(RunConfig::parse(bad, Path::new(".")), Err(Error::InvalidParameter(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn si_round_trip_is_exact_to_round_off() {
        let c = RunConfig::parse(SAMPLE, Path::new(".")).unwrap();
        let p = c.params().unwrap();
        let s = c.sim_config(false).unwrap();
        assert!((p.dimensionless_to_seconds(s.tau) - c.dt_s).abs() <= 1e-12 * c.dt_s);
        assert!((p.dimensionless_to_seconds(s.t_end) - c.t_end_s).abs() <= 1e-12 * c.t_end_s);
        let d = 140e-9;
        assert!((p.dimensionless_to_meters(p.meters_to_dimensionless(d)) - d).abs() <= 1e-12 * d);
    }
}
