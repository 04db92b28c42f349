use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dmifilm::analysis::average_m3;
use dmifilm::dynamics::{ellipticity_check, monotone_tau_bound, Ellipticity};
use dmifilm::{write_native, MaterialParams, Result};
use dmifilm_cli::check::{run_checks, Level};
use dmifilm_cli::{
    build_mesh, describe_mesh, disk_mesh_nm, exit_code, parse_eps_list, read_mesh, run_gamma, run_simulation,
    GammaProfile, GammaRequest, MeshSource, RunConfig,
};

/// Relaxed vmax stop used by `relax` when the config sets none.
const DEFAULT_RELAX_VMAX: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "dmifilm", version, about = "Thin-film chiral magnet simulator")]
struct Cli {
    /// INI run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file for `mesh-disk`, output directory otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomised checks.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Report time in seconds and energy in joules.
    #[arg(long, global = true)]
    si: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Default)]
struct Overrides {
    /// Disk diameter in nm, replacing the configured mesh.
    #[arg(long)]
    diameter_nm: Option<f64>,
    /// Target mesh size in nm for the disk.
    #[arg(long)]
    h_nm: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    dt_s: Option<f64>,
    #[arg(long)]
    t_end_s: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a disk mesh.
    MeshDisk {
        #[arg(long)]
        diameter_nm: f64,
        #[arg(long, default_value_t = 4.45)]
        h_nm: f64,
    },
    /// Integrate until the velocity falls below the relax threshold.
    Relax {
        #[command(flatten)]
        overrides: Overrides,
        /// Stop once max |v| drops below this value.
        #[arg(long)]
        vmax: Option<f64>,
    },
    /// Integrate over the configured horizon.
    Evolve {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Tabulate the thickness limit of the 3D energy.
    GammaStudy {
        #[arg(long, default_value = "const-x")]
        profile: String,
        #[arg(long, default_value_t = 0.876)]
        kappa: f64,
        /// Comma-separated, strictly decreasing thickness ratios.
        #[arg(long, default_value = "0.2,0.1,0.05,0.025")]
        eps: String,
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        mesh_h: f64,
        #[arg(long, default_value_t = 4)]
        n_gauss: usize,
        /// Use finite differences for the recovery field derivatives.
        #[arg(long)]
        fd: bool,
    },
    /// Run the invariant suites.
    Check {
        #[arg(long, default_value = "fast")]
        level: String,
        /// Mesh used for the energy law suite.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Print derived parameters and time-step limits.
    Info {
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn load_config(cli: &Cli, o: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = o.diameter_nm {
        let h = match (&cfg.mesh, o.h_nm) {
            (_, Some(h)) => h,
            (MeshSource::Disk { target_h_nm, .. }, None) => *target_h_nm,
            (MeshSource::File(_), None) => 4.45,
        };
        cfg.mesh = MeshSource::Disk {
            diameter_nm: d,
            target_h_nm: h,
        };
    } else if let (Some(h), MeshSource::Disk { diameter_nm, .. }) = (o.h_nm, &cfg.mesh) {
        cfg.mesh = MeshSource::Disk {
            diameter_nm: *diameter_nm,
            target_h_nm: h,
        };
    }
    if let Some(a) = o.alpha {
        cfg.alpha = a;
    }
    if let Some(dt) = o.dt_s {
        cfg.dt_s = dt;
    }
    if let Some(t) = o.t_end_s {
        cfg.t_end_s = t;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.params()?;
    cfg.sim_config(false)?.validate()?;
    Ok(cfg)
}

fn simulate(cli: &Cli, overrides: &Overrides, relax: Option<Option<f64>>) -> Result<bool> {
    let mut cfg = load_config(cli, overrides)?;
    if let Some(v) = relax {
        cfg.relax_vmax = Some(v.or(cfg.relax_vmax).unwrap_or(DEFAULT_RELAX_VMAX));
    }
    let run = run_simulation(&cfg, relax.is_some(), cli.si)?;
    let last = run.outcome.series.last().expect("series holds the initial row");
    let time = if cli.si {
        run.params.dimensionless_to_seconds(last.time)
    } else {
        last.time
    };
    println!("steps={}", run.outcome.steps());
    println!("stop={:?}", run.outcome.stop);
    println!("time={time:e}");
    println!(
        "energy={:.15e}",
        last.energy.total
            * if cli.si {
                dmifilm_cli::si_energy_scale(&run.params)
            } else {
                1.0
            }
    );
    println!("vmax={:e}", last.vmax);
    println!("avg_m3={:.12}", average_m3(&run.mesh, &run.outcome.final_state)?);
    println!("classification={}", run.class.kind);
    println!("alternations={}", run.class.alternations);
    println!("out_dir={}", run.out_dir.display());
    Ok(true)
}

fn info(cli: &Cli, overrides: &Overrides) -> Result<bool> {
    let cfg = load_config(cli, overrides)?;
    let p: MaterialParams = cfg.params()?;
    let tau = p.seconds_to_dimensionless(cfg.dt_s);
    let max_tau = match ellipticity_check(p.alpha, p.kappa, f64::INFINITY) {
        Ellipticity::Fail { max_tau } => max_tau,
        Ellipticity::Pass => f64::INFINITY,
    };
    let mono = monotone_tau_bound(p.alpha, p.kappa);
    println!("alpha={}", p.alpha);
    println!("ell_ex_m={:e}", p.ell_ex);
    println!("kappa={}", p.kappa);
    println!("time_unit_s={:e}", p.time_unit);
    println!("tau={tau}");
    println!("max_elliptic_tau={max_tau}");
    println!("max_elliptic_dt_s={:e}", p.dimensionless_to_seconds(max_tau));
    println!("monotone_tau={mono}");
    println!("monotone_dt_s={:e}", p.dimensionless_to_seconds(mono));
    let mesh = build_mesh(&cfg, &p)?;
    print!("{}", describe_mesh(&mesh, &p));
    Ok(true)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::MeshDisk { diameter_nm, h_nm } => {
            let p = MaterialParams::fege(1.0);
            let mesh = disk_mesh_nm(&p, *diameter_nm, *h_nm)?;
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("disk_d{diameter_nm}.mesh")));
            std::fs::write(&out, write_native(&mesh))?;
            print!("{}", describe_mesh(&mesh, &p));
            println!("path={}", out.display());
            Ok(true)
        }
        Command::Relax { overrides, vmax } => simulate(cli, overrides, Some(*vmax)),
        Command::Evolve { overrides } => simulate(cli, overrides, None),
        Command::GammaStudy {
            profile,
            kappa,
            eps,
            mesh,
            mesh_h,
            n_gauss,
            fd,
        } => {
            let req = GammaRequest {
                profile: profile.parse::<GammaProfile>()?,
                kappa: *kappa,
                eps: parse_eps_list(eps)?,
                mesh: mesh.clone(),
                mesh_h: *mesh_h,
                n_gauss_s: *n_gauss,
                finite_differences: *fd,
            };
            let table = run_gamma(&req)?;
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("gamma.csv");
            std::fs::write(&path, table.to_csv())?;
            print!("{}", table.to_csv());
            match table.fitted_order {
                Some(o) => println!("fitted_order={o:.6}"),
                None => println!("fitted_order=exact"),
            }
            println!("monotone={}", table.is_monotone());
            println!("f0_canonical={:.15e}", table.f0.canonical);
            println!("f0_helical_stated={:.15e}", table.f0.helical_stated);
            println!("f0_helical_derived={:.15e}", table.f0.helical_derived);
            println!("path={}", path.display());
            Ok(true)
        }
        Command::Check { level, mesh } => {
            let level: Level = level.parse()?;
            let mesh = mesh.as_deref().map(read_mesh).transpose()?;
            let results = run_checks(level, cli.seed, mesh.as_ref())?;
            for r in &results {
                println!("{}", r.line());
            }
            Ok(results.iter().all(|r| r.passed()))
        }
        Command::Info { overrides } => info(cli, overrides),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
