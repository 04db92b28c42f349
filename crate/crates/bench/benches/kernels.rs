use criterion::{criterion_group, criterion_main, Criterion};

use dmifilm::dynamics::{SimConfig, Stepper};
use dmifilm::gamma::{gamma_study, GammaOptions, RadialProfile};
use dmifilm::vec3::E3;
use dmifilm::{generate_disk, AppliedField, FemOperators, MaterialParams, NodalVectorField};

fn disk_100nm(params: &MaterialParams) -> dmifilm::TriMesh {
    generate_disk(
        params.meters_to_dimensionless(100e-9),
        params.meters_to_dimensionless(4.45e-9),
    )
    .unwrap()
}

fn assembly(c: &mut Criterion) {
    let params = MaterialParams::fege(1.0);
    let mesh = disk_100nm(&params);
    c.bench_function("assemble d=100nm", |b| {
        b.iter(|| FemOperators::assemble(&mesh).unwrap())
    });
}

fn step(c: &mut Criterion) {
    let params = MaterialParams::fege(1.0);
    let mesh = disk_100nm(&params);
    let cfg = SimConfig {
        tau: params.seconds_to_dimensionless(1e-11),
        ..SimConfig::default()
    };
    let stepper = Stepper::thin_film(&mesh, &params, AppliedField::default(), cfg).unwrap();
    let (m, _, _) = stepper
        .step(&NodalVectorField::constant(mesh.n_vertices(), E3), 0)
        .unwrap();
    c.bench_function("step d=100nm", |b| b.iter(|| stepper.step(&m, 1).unwrap()));
}

fn gamma(c: &mut Criterion) {
    let mesh = generate_disk(2.0, 0.1).unwrap();
    let field = RadialProfile {
        radius: mesh.max_radius(),
    };
    c.bench_function("gamma radial h=0.1", |b| {
        b.iter(|| gamma_study(&field, &mesh, &[0.2, 0.1, 0.05], 0.876, GammaOptions::default()).unwrap())
    });
}

criterion_group!(benches, assembly, step, gamma);
criterion_main!(benches);
