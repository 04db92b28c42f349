//! Experiment drivers behind the `dmifilm` binary.

pub mod check;
pub mod config;
pub mod studies;

use std::path::{Path, PathBuf};

use dmifilm::analysis::{
    classify_skyrmion, extract_profile, series_csv, write_field, write_vtk, SeriesRecorder, SeriesRow, SkyrmionClass,
};
use dmifilm::dynamics::{ellipticity_check, Ellipticity, EvolveOutcome, Stepper};
use dmifilm::gamma::{
    gamma_study, AnalyticField, ConstantField, DerivativeMode, GammaOptions, GammaTable, RadialProfile,
};
use dmifilm::mesh::NATIVE_HEADER;
use dmifilm::{
    generate_disk, mesh_stats, parse_msh2, parse_native, write_native, AppliedField, Error, MaterialParams,
    NodalVectorField, Result, TriMesh,
};

pub use config::{InitialPreset, MeshSource, RunConfig, SI_THICKNESS_M};

/// Process exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_)
        | Error::Parse { .. }
        | Error::Topology(_)
        | Error::EmptyMesh
        | Error::Assembly(_)
        | Error::PointOutsideMesh { .. }
        | Error::SizeMismatch { .. }
        | Error::EllipticityViolation { .. }
        | Error::Io(_) => 2,
        Error::SolverFailure { .. } => 3,
        Error::DegenerateMagnetization { .. } => 4,
    }
}

/// Read a mesh file, choosing the parser from its first line.
pub fn read_mesh(path: &Path) -> Result<TriMesh> {
    let text = std::fs::read_to_string(path)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("").trim();
    if first.starts_with("$MeshFormat") {
        parse_msh2(&text)
    } else if first == NATIVE_HEADER || path.extension().is_some_and(|e| e == "mesh") {
        parse_native(&text)
    } else {
        Err(Error::Parse {
            line: 1,
            msg: format!("unrecognised mesh header '{first}'"),
        })
    }
}

/// Disk mesh with diameter and mesh size given in nanometres.
pub fn disk_mesh_nm(params: &MaterialParams, diameter_nm: f64, h_nm: f64) -> Result<TriMesh> {
    generate_disk(
        params.meters_to_dimensionless(diameter_nm * 1e-9),
        params.meters_to_dimensionless(h_nm * 1e-9),
    )
}

pub fn build_mesh(cfg: &RunConfig, params: &MaterialParams) -> Result<TriMesh> {
    match &cfg.mesh {
        MeshSource::Disk {
            diameter_nm,
            target_h_nm,
        } => disk_mesh_nm(params, *diameter_nm, *target_h_nm),
        MeshSource::File(p) => read_mesh(p),
    }
}

pub fn initial_state(cfg: &RunConfig, mesh: &TriMesh) -> Result<NodalVectorField> {
    let n = mesh.n_vertices();
    match &cfg.initial {
        InitialPreset::UniformZ => Ok(NodalVectorField::constant(n, dmifilm::vec3::E3)),
        InitialPreset::UniformX => Ok(NodalVectorField::constant(n, dmifilm::vec3::E1)),
        InitialPreset::File(p) => {
            let mut f = dmifilm::analysis::parse_field(&std::fs::read_to_string(p)?, Some(n))?;
            f.normalize_nodes()?;
            Ok(f)
        }
    }
}

/// Everything a relax or evolve run produced.
#[derive(Debug)]
pub struct RunSummary {
    pub mesh: TriMesh,
    pub params: MaterialParams,
    pub outcome: EvolveOutcome,
    pub rows: Vec<SeriesRow>,
    pub class: SkyrmionClass,
    pub out_dir: PathBuf,
    pub csv: String,
}

/// Joules per dimensionless energy unit for the `--si` output.
pub fn si_energy_scale(params: &MaterialParams) -> f64 {
    params.joules_per_unit(SI_THICKNESS_M)
}

/// Ellipticity in SI terms: the error names the admissible `dt` in seconds.
pub fn check_time_step(cfg: &RunConfig) -> Result<()> {
    let p = cfg.params()?;
    let tau = p.seconds_to_dimensionless(cfg.dt_s);
    match ellipticity_check(p.alpha, p.kappa, tau) {
        Ellipticity::Pass => Ok(()),
        Ellipticity::Fail { max_tau } => Err(Error::InvalidParameter(format!(
            "ellipticity-violation: dt_s = {:e} exceeds the admissible maximum dt_s = {:e} (tau = {tau} > {max_tau})",
            cfg.dt_s,
            p.dimensionless_to_seconds(max_tau)
        ))),
    }
}

/// Run the integrator as configured and write every output file.
pub fn run_simulation(cfg: &RunConfig, relax: bool, si: bool) -> Result<RunSummary> {
    let params = cfg.params()?;
    check_time_step(cfg)?;
    let mesh = build_mesh(cfg, &params)?;
    let m0 = initial_state(cfg, &mesh)?;
    let sim = cfg.sim_config(relax)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join("mesh.mesh"), write_native(&mesh))?;
    let stepper = Stepper::thin_film(&mesh, &params, AppliedField::default(), sim)?;
    let mut recorder = SeriesRecorder::new(&mesh, Some(cfg.out_dir.clone()));
    let outcome = stepper.evolve(&m0, &mut recorder)?;
    let (time_scale, energy_scale) = if si {
        (params.time_unit, si_energy_scale(&params))
    } else {
        (1.0, 1.0)
    };
    let csv = series_csv(&recorder.rows, time_scale, energy_scale);
    std::fs::write(cfg.out_dir.join("series.csv"), &csv)?;
    write_field(&outcome.final_state, &cfg.out_dir.join("final.field"))?;
    write_vtk(&mesh, &outcome.final_state, &cfg.out_dir.join("final.vtk"))?;
    let profile = extract_profile(&mesh, &outcome.final_state, cfg.profile_samples)?;
    std::fs::write(cfg.out_dir.join("profile.csv"), profile.to_csv())?;
    let class = classify_skyrmion(&profile, cfg.band_tol);
    std::fs::write(
        cfg.out_dir.join("classification.txt"),
        format!(
            "{}\nalternations={}\nband_tol={}\n",
            class.kind, class.alternations, cfg.band_tol
        ),
    )?;
    let rows = recorder.rows;
    Ok(RunSummary {
        mesh,
        params,
        outcome,
        rows,
        class,
        out_dir: cfg.out_dir.clone(),
        csv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaProfile {
    ConstX,
    ConstZ,
    Radial,
}

impl std::str::FromStr for GammaProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "const-x" => Ok(Self::ConstX),
            "const-z" => Ok(Self::ConstZ),
            "radial" => Ok(Self::Radial),
            other => Err(Error::InvalidParameter(format!(
                "unknown profile '{other}' (const-x, const-z, radial)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaRequest {
    pub profile: GammaProfile,
    pub kappa: f64,
    pub eps: Vec<f64>,
    /// Mesh file for ω; default is a disk of radius one.
    pub mesh: Option<PathBuf>,
    pub mesh_h: f64,
    pub n_gauss_s: usize,
    pub finite_differences: bool,
}

impl Default for GammaRequest {
    fn default() -> Self {
        Self {
            profile: GammaProfile::ConstX,
            kappa: 0.876,
            eps: vec![0.2, 0.1, 0.05, 0.025],
            mesh: None,
            mesh_h: 0.05,
            n_gauss_s: 4,
            finite_differences: false,
        }
    }
}

pub fn parse_eps_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| Error::InvalidParameter(format!("bad eps entry '{t}'")))
        })
        .collect()
}

pub fn run_gamma(req: &GammaRequest) -> Result<GammaTable> {
    let mesh = match &req.mesh {
        Some(p) => read_mesh(p)?,
        None => generate_disk(2.0, req.mesh_h)?,
    };
    let field: Box<dyn AnalyticField> = match req.profile {
        GammaProfile::ConstX => Box::new(ConstantField::new(dmifilm::vec3::E1)?),
        GammaProfile::ConstZ => Box::new(ConstantField::new(dmifilm::vec3::E3)?),
        GammaProfile::Radial => Box::new(RadialProfile {
            radius: mesh.max_radius(),
        }),
    };
    let mode = if req.finite_differences {
        DerivativeMode::FiniteDifference
    } else {
        DerivativeMode::Analytic
    };
    gamma_study(
        field.as_ref(),
        &mesh,
        &req.eps,
        req.kappa,
        GammaOptions {
            n_gauss_s: req.n_gauss_s,
            mode,
        },
    )
}

/// Key/value description of a mesh, lengths also in nanometres.
pub fn describe_mesh(mesh: &TriMesh, params: &MaterialParams) -> String {
    let s = mesh_stats(mesh);
    let nm = |x: f64| params.dimensionless_to_meters(x) * 1e9;
    format!(
        "n_vertices={}\nn_triangles={}\nh_max={}\nh_min={}\nh_max_nm={}\nh_min_nm={}\nmin_angle_deg={}\ntotal_area={}\n",
        s.n_vertices,
        s.n_triangles,
        s.h_max,
        s.h_min,
        nm(s.h_max),
        nm(s.h_min),
        s.min_angle.to_degrees(),
        s.total_area
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(exit_code(&Error::InvalidParameter("x".into())), 2);
        assert_eq!(
            exit_code(&Error::Parse {
                line: 3,
                msg: "x".into()
            }),
            2
        );
        assert_eq!(
            exit_code(&Error::SolverFailure {
                residual: 1.0,
                iterations: 1,
                tol: 1e-10
            }),
            3
        );
        assert_eq!(exit_code(&Error::DegenerateMagnetization { vertex: 0, norm: 0.0 }), 4);
    }

    #[test]
    fn eps_lists_parse() {
        assert_eq!(parse_eps_list("0.2, 0.1,0.05").unwrap(), vec![0.2, 0.1, 0.05]);
        assert!(parse_eps_list("0.2,-1").is_err());
        assert!(parse_eps_list("a").is_err());
    }

    #[test]
    fn large_time_step_reports_admissible_maximum() {
        let cfg = RunConfig {
            alpha: 0.28,
            dt_s: 1e-11,
            ..RunConfig::default()
        };
        let msg = check_time_step(&cfg).unwrap_err().to_string();
        assert!(msg.contains("admissible maximum dt_s = 4.2"), "{msg}");
        let ok = RunConfig {
            alpha: 0.28,
            dt_s: 3.5e-12,
            ..RunConfig::default()
        };
        assert!(check_time_step(&ok).is_ok());
    }
}
