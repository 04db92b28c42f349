//! Invariant suites run by `dmifilm check`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dmifilm::dynamics::{NullSink, SimConfig, Stepper};
use dmifilm::gamma::{ConstantField, RadialProfile};
use dmifilm::oracle::{dense_assemble, fd_gradient_check, helical_identity_residual, lumped_vs_exact_l2};
use dmifilm::{
    generate_disk, generate_square, AppliedField, EnergyModel, FemOperators, MaterialParams, NodalVectorField, Result,
    TriMesh,
};

use crate::studies::{constraint_order_study, summarize};
use crate::{disk_mesh_nm, run_gamma, GammaProfile, GammaRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

impl std::str::FromStr for Level {
    type Err = dmifilm::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Self::Fast),
            "full" => Ok(Self::Full),
            other => Err(dmifilm::Error::InvalidParameter(format!(
                "unknown level '{other}' (fast, full)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    /// `true` if the value must not exceed the threshold, `false` if it must
    /// reach it.
    pub upper: bool,
}

impl SuiteResult {
    fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            threshold,
            upper: true,
        }
    }

    fn at_least(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            threshold,
            upper: false,
        }
    }

    pub fn passed(&self) -> bool {
        if self.upper {
            self.value <= self.threshold
        } else {
            self.value >= self.threshold
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} value={:e} {} {:e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            if self.upper { "<=" } else { ">=" },
            self.threshold
        )
    }
}

pub fn random_unit_field(n: usize, rng: &mut ChaCha8Rng) -> NodalVectorField {
    let mut f = NodalVectorField::new(
        (0..n)
            .map(|_| {
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect(),
    );
    f.normalize_nodes().expect("random vectors are nonzero almost surely");
    f
}

pub fn random_field(n: usize, rng: &mut ChaCha8Rng) -> NodalVectorField {
    NodalVectorField::new(
        (0..n)
            .map(|_| {
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect(),
    )
}

/// Small mesh with randomly perturbed interior vertices.
pub fn jittered_square(n: usize, rng: &mut ChaCha8Rng) -> Result<TriMesh> {
    let base = generate_square(n, 1.0)?;
    let h = 1.0 / n as f64;
    let boundary = base.boundary_vertices().to_vec();
    let verts = base
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if boundary.binary_search(&i).is_ok() {
                *p
            } else {
                [
                    p[0] + 0.2 * h * rng.gen_range(-1.0..1.0),
                    p[1] + 0.2 * h * rng.gen_range(-1.0..1.0),
                ]
            }
        })
        .collect();
    TriMesh::new(verts, base.triangles().to_vec())
}

/// Worst relative Frobenius mismatch between sparse and dense assembly.
pub fn assembly_mismatch(mesh: &TriMesh) -> Result<f64> {
    let dense = dense_assemble(mesh)?;
    let ops = FemOperators::assemble(mesh)?;
    let mass: f64 = ops
        .mass
        .weights()
        .iter()
        .enumerate()
        .map(|(z, w)| (dense.mass_lumped.get(z, z) - w).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(
        (dense.stiffness.frobenius_diff(&ops.stiffness) / dense.stiffness.frobenius())
            .max(dense.curl_form.frobenius_diff(&ops.curl) / dense.curl_form.frobenius())
            .max(mass / dense.mass_lumped.frobenius()),
    )
}

pub fn run_checks(level: Level, seed: u64, mesh: Option<&TriMesh>) -> Result<Vec<SuiteResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let kappa = 0.876;

    let mut worst: f64 = 0.0;
    for n in [1, 2, 3] {
        worst = worst.max(assembly_mismatch(&jittered_square(n, &mut rng)?)?);
    }
    out.push(SuiteResult::at_most("assembly-vs-dense", worst, 1e-13));

    let two = generate_square(1, 1.0)?;
    let m = random_unit_field(two.n_vertices(), &mut rng);
    let model = EnergyModel::thin_film(kappa, AppliedField([0.05, -0.1, 0.2]));
    let fd = fd_gradient_check(&two, &m, &model, &[1e-3, 1e-4, 1e-5], 8, seed)?;
    out.push(SuiteResult::at_most("fd-gradient", fd.max_deviation, 1e-9));

    let law_mesh = match mesh {
        Some(m) => m.clone(),
        None => generate_square(2, 3.0)?,
    };
    let m0 = random_unit_field(law_mesh.n_vertices(), &mut rng);
    let cfg = SimConfig {
        tau: 0.5,
        t_end: 5.0,
        ..SimConfig::default()
    };
    let stepper = Stepper::new(
        &law_mesh,
        EnergyModel::thin_film(kappa, AppliedField::default()),
        1.0,
        cfg,
    )?;
    let inv = summarize(&stepper.evolve(&m0, &mut NullSink)?);
    out.push(SuiteResult::at_most("energy-law", inv.energy_law, 1e-10));
    out.push(SuiteResult::at_most(
        "energy-decay-violations",
        inv.decay_violations as f64,
        0.0,
    ));
    out.push(SuiteResult::at_most("nodal-length-law", inv.nodal_law, 1e-12));
    out.push(SuiteResult::at_most("tangency", inv.tangency, 1e-10));
    out.push(SuiteResult::at_most(
        "constraint-identity",
        inv.constraint_identity,
        1e-12,
    ));

    let disk = generate_disk(2.0, 0.25)?;
    let helical = helical_identity_residual(&RadialProfile { radius: 1.0 }, &disk, kappa).max(
        helical_identity_residual(&ConstantField::new([1.0, -2.0, 0.5])?, &disk, kappa),
    );
    out.push(SuiteResult::at_most("helical-identity", helical, 1e-10));

    let grid = generate_square(3, 1.0)?;
    let mut margin = f64::INFINITY;
    for _ in 0..100 {
        let (l, e) = lumped_vs_exact_l2(&grid, &random_field(grid.n_vertices(), &mut rng));
        margin = margin.min(l - e);
    }
    out.push(SuiteResult::at_least("lumped-domination", margin, 0.0));

    let mut vmax: f64 = 0.0;
    for dir in [dmifilm::vec3::E1, dmifilm::vec3::E3] {
        let s = Stepper::new(
            &grid,
            EnergyModel::thin_film(0.0, AppliedField::default()),
            1.0,
            SimConfig {
                tau: 0.5,
                ..SimConfig::default()
            },
        )?;
        let (_, v, _) = s.step(&NodalVectorField::constant(grid.n_vertices(), dir), 0)?;
        vmax = vmax.max(v.max_norm());
    }
    out.push(SuiteResult::at_most("equilibria", vmax, 1e-14));

    if level == Level::Full {
        let params = MaterialParams::fege(1.0);
        let disk = disk_mesh_nm(&params, 100.0, 4.45)?;
        let cfg = SimConfig {
            tau: params.seconds_to_dimensionless(1e-11),
            t_end: 20.0 * params.seconds_to_dimensionless(1e-11),
            ..SimConfig::default()
        };
        let inv = summarize(
            &Stepper::thin_film(&disk, &params, AppliedField::default(), cfg)?.evolve(
                &NodalVectorField::constant(disk.n_vertices(), dmifilm::vec3::E3),
                &mut NullSink,
            )?,
        );
        out.push(SuiteResult::at_most("energy-law-disk", inv.energy_law, 1e-10));

        let params2 = params.with_alpha(2.0)?;
        let taus: Vec<f64> = [2e-11, 1e-11, 5e-12]
            .iter()
            .map(|&dt| params2.seconds_to_dimensionless(dt))
            .collect();
        let study = constraint_order_study(
            &disk,
            &params2,
            &NodalVectorField::constant(disk.n_vertices(), dmifilm::vec3::E3),
            &taus,
            params2.seconds_to_dimensionless(2e-10),
        )?;
        out.push(SuiteResult::at_least(
            "constraint-order",
            study.order.unwrap_or(f64::NAN),
            1.9,
        ));

        let g = run_gamma(&GammaRequest {
            profile: GammaProfile::ConstX,
            ..GammaRequest::default()
        })?;
        out.push(SuiteResult::at_least(
            "gamma-const-x-order",
            g.fitted_order.unwrap_or(f64::INFINITY),
            3.5,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_parse() {
        assert_eq!("fast".parse::<Level>().unwrap(), Level::Fast);
        assert_eq!("full".parse::<Level>().unwrap(), Level::Full);
        assert!("slow".parse::<Level>().is_err());
    }

    #[test]
    fn suite_direction_decides_pass() {
        assert!(SuiteResult::at_most("a", 1.0, 1.0).passed());
        assert!(!SuiteResult::at_most("a", 2.0, 1.0).passed());
        assert!(SuiteResult::at_least("b", 2.0, 1.9).passed());
        assert!(!SuiteResult::at_least("b", f64::NAN, 1.9).passed());
        assert!(SuiteResult::at_least("b", 1.0, 1.9).line().starts_with("FAIL b "));
    }

    #[test]
    fn jitter_keeps_boundary_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = generate_square(3, 1.0).unwrap();
        let mesh = jittered_square(3, &mut rng).unwrap();
        for &b in base.boundary_vertices() {
            assert_eq!(base.vertices()[b], mesh.vertices()[b]);
        }
        assert!((mesh.total_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fast_level_passes() {
        let results = run_checks(Level::Fast, 5, None).unwrap();
        assert!(results.iter().all(SuiteResult::passed), "{results:?}");
    }
}
