//! Brute-force reference computations for checking the production paths.
//!
//! Everything here is deliberately naive: dense storage, element integrals
//! recomputed from the affine map of each triangle, and component formulas
//! written out by hand. Intended for meshes with at most a few hundred
//! unknowns.

use crate::error::{Error, Result};
use crate::fem::{NodalVectorField, SparseOperator};
use crate::gamma::{planar_gradient, AnalyticField};
use crate::mesh::TriMesh;
use crate::model::{AppliedField, EnergyBreakdown, EnergyModel, LocalOperator};
use crate::quadrature::triangle_rule_deg5;
use crate::vec3::{self, Vec3};

/// Largest number of scalar unknowns accepted by the dense oracles.
pub const MAX_UNKNOWNS: usize = 200;

/// Dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseForm {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseForm {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        y.iter().zip(self.apply(x)).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖self − sparse‖_F`.
    pub fn frobenius_diff(&self, sparse: &SparseOperator) -> f64 {
        let mut d = self.data.clone();
        for (i, row) in sparse.matrix().outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                d[i * self.n + j] -= v;
            }
        }
        d.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseForms {
    /// Diagonal lumped mass, N×N.
    pub mass_lumped: DenseForm,
    /// Scalar stiffness, N×N.
    pub stiffness: DenseForm,
    /// Curl form, 3N×3N vertex-major.
    pub curl_form: DenseForm,
}

/// Area and basis gradients from the inverse Jacobian of the map from the
/// reference triangle.
fn affine_gradients(p: [[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let j = [
        [p[1][0] - p[0][0], p[2][0] - p[0][0]],
        [p[1][1] - p[0][1], p[2][1] - p[0][1]],
    ];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    // rows of J⁻¹ are ∇ξ and ∇η
    let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
    let g1 = inv[0];
    let g2 = inv[1];
    let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
    (0.5 * det.abs(), [g0, g1, g2])
}

/// `(∂₂v₃, −∂₁v₃, ∂₁v₂ − ∂₂v₁)` for the field `λ e_j` with `∇λ = g`.
fn curl_components(g: [f64; 2], j: usize) -> Vec3 {
    let mut dv = [[0.0; 3]; 2];
    dv[0][j] = g[0];
    dv[1][j] = g[1];
    [dv[1][2], -dv[0][2], dv[0][1] - dv[1][0]]
}

pub fn dense_assemble(mesh: &TriMesh) -> Result<DenseForms> {
    let n = mesh.n_vertices();
    if 3 * n > MAX_UNKNOWNS {
        return Err(Error::invalid(format!(
            "dense oracle limited to small meshes, got {n} vertices"
        )));
    }
    let mut mass = DenseForm::zeros(n);
    let mut stiff = DenseForm::zeros(n);
    let mut curl = DenseForm::zeros(3 * n);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (area, g) = affine_gradients(mesh.triangle_points(t));
        // ∫λ_a by the edge-midpoint rule (exact for quadratics)
        let mids = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
        let int_lambda: Vec<f64> = (0..3)
            .map(|a| area / 3.0 * mids.iter().map(|m| m[a]).sum::<f64>())
            .collect();
        for a in 0..3 {
            mass.add(tri[a], tri[a], int_lambda[a]);
            for b in 0..3 {
                stiff.add(tri[a], tri[b], area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]));
                for j in 0..3 {
                    let c = curl_components(g[b], j);
                    for (i, ci) in c.iter().enumerate() {
                        curl.add(3 * tri[a] + i, 3 * tri[b] + j, ci * int_lambda[a]);
                    }
                }
            }
        }
    }
    Ok(DenseForms {
        mass_lumped: mass,
        stiffness: stiff,
        curl_form: curl,
    })
}

/// Lumped energy recomputed from the dense forms.
pub fn dense_energy_lumped(forms: &DenseForms, model: &EnergyModel, m: &NodalVectorField) -> f64 {
    let n = m.len();
    let flat = m.to_flat();
    let mut exchange = 0.0;
    for c in 0..3 {
        let comp: Vec<f64> = (0..n).map(|z| flat[3 * z + c]).collect();
        exchange += 0.5 * forms.stiffness.bilinear(&comp, &comp);
    }
    let dmi = model.kappa * forms.curl_form.bilinear(&flat, &flat);
    let mut local = 0.0;
    for z in 0..n {
        let u = m.get(z);
        let w = forms.mass_lumped.get(z, z);
        let pu = model.pi.apply(u);
        local += w * (-0.5 * (pu[0] * u[0] + pu[1] * u[1] + pu[2] * u[2]) - vec3::dot(model.applied.0, u));
    }
    let area: f64 = (0..n).map(|z| forms.mass_lumped.get(z, z)).sum();
    exchange + dmi + local - 0.5 * model.kappa * model.kappa * area
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub deltas: Vec<f64>,
    /// Largest `|central difference + b·φ|` over the directions, per delta.
    pub deviations: Vec<f64>,
    /// Slope of log deviation against log delta; `None` if the deviations are
    /// all at round-off level.
    pub observed_order: Option<f64>,
    pub max_deviation: f64,
    /// Largest mismatch between the frame restriction of `b` lifted back and
    /// the nodewise tangential projection of `b`.
    pub tangent_mismatch: f64,
}

/// Compare the load vector with central differences of the energy along
/// random nodal directions.
pub fn fd_gradient_check(
    mesh: &TriMesh,
    m: &NodalVectorField,
    model: &EnergyModel,
    deltas: &[f64],
    n_directions: usize,
    seed: u64,
) -> Result<FdReport> {
    use rand::{Rng, SeedableRng};
    let forms = dense_assemble(mesh)?;
    let ops = crate::fem::FemOperators::assemble(mesh)?;
    let b = model.assemble_rhs(&ops, m);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vec<f64>> = (0..n_directions)
        .map(|_| (0..b.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let flat = m.to_flat();
    let mut deviations = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let mut worst: f64 = 0.0;
        for phi in &dirs {
            let shifted =
                |s: f64| NodalVectorField::from_flat(&flat.iter().zip(phi).map(|(x, p)| x + s * p).collect::<Vec<_>>());
            let fd = (dense_energy_lumped(&forms, model, &shifted(d))
                - dense_energy_lumped(&forms, model, &shifted(-d)))
                / (2.0 * d);
            let bphi: f64 = b.iter().zip(phi).map(|(x, p)| x * p).sum();
            worst = worst.max((fd + bphi).abs());
        }
        deviations.push(worst);
    }
    let floor = 1e-12;
    let observed_order = if deviations.iter().all(|&e| e <= floor) {
        None
    } else {
        crate::gamma::fit_order(deltas, &deviations)
    };
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    let frame = crate::dynamics::build_tangent_frame(m)?;
    let lifted = frame.lift(&frame.restrict(&b));
    let mut tangent_mismatch: f64 = 0.0;
    for z in 0..m.len() {
        let n = vec3::normalize(m.get(z));
        let bz = [b[3 * z], b[3 * z + 1], b[3 * z + 2]];
        let proj = vec3::axpy(-vec3::dot(bz, n), n, bz);
        tangent_mismatch = tangent_mismatch.max(vec3::norm(vec3::sub(proj, lifted.get(z))));
    }
    Ok(FdReport {
        deltas: deltas.to_vec(),
        deviations,
        observed_order,
        max_deviation,
        tangent_mismatch,
    })
}

/// Degree-5 quadrature of `f` over the mesh, evaluated point by point.
fn quad(mesh: &TriMesh, f: impl Fn([f64; 2]) -> f64) -> f64 {
    let rule = triangle_rule_deg5();
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        let p = mesh.triangle_points(t);
        let (area, _) = affine_gradients(p);
        for q in &rule {
            let x = [
                q.bary[0] * p[0][0] + q.bary[1] * p[1][0] + q.bary[2] * p[2][0],
                q.bary[0] * p[0][1] + q.bary[1] * p[1][1] + q.bary[2] * p[2][1],
            ];
            total += area * q.weight * f(x);
        }
    }
    total
}

/// Thin-film energy of an analytic field by degree-5 quadrature.
pub fn quad_energy(field: &dyn AnalyticField, mesh: &TriMesh, kappa: f64, applied: AppliedField) -> EnergyBreakdown {
    let grad = |p| planar_gradient(field, p, 1e-6);
    let exchange = 0.5
        * quad(mesh, |p| {
            let g = grad(p);
            vec3::norm_sq(g[0]) + vec3::norm_sq(g[1])
        });
    let dmi = kappa
        * quad(mesh, |p| {
            let g = grad(p);
            let u = field.value(p);
            let curl = [g[1][2], -g[0][2], g[0][1] - g[1][0]];
            vec3::dot(curl, u)
        });
    let pi_term = 0.5 * (1.0 + kappa * kappa) * quad(mesh, |p| field.value(p)[2].powi(2));
    let applied_term = -quad(mesh, |p| vec3::dot(applied.0, field.value(p)));
    let constant_term = -0.5 * kappa * kappa * quad(mesh, |_| 1.0);
    EnergyBreakdown {
        exchange,
        dmi,
        pi_term,
        applied_term,
        constant_term,
        total: exchange + dmi + pi_term + applied_term + constant_term,
    }
}

/// `|(exchange + dmi) − (½Σ_{i=1,2}∫|∂_i u − κe_i×u|² − ½κ²∫(1+u₃²))|`.
pub fn helical_identity_residual(field: &dyn AnalyticField, mesh: &TriMesh, kappa: f64) -> f64 {
    let e = quad_energy(field, mesh, kappa, AppliedField::default());
    let grad = |p| planar_gradient(field, p, 1e-6);
    let helical = 0.5
        * quad(mesh, |p| {
            let u = field.value(p);
            let g = grad(p);
            vec3::norm_sq(vec3::axpy(-kappa, vec3::cross(vec3::E1, u), g[0]))
                + vec3::norm_sq(vec3::axpy(-kappa, vec3::cross(vec3::E2, u), g[1]))
        });
    let shift = 0.5 * kappa * kappa * quad(mesh, |p| 1.0 + field.value(p)[2].powi(2));
    ((e.exchange + e.dmi) - (helical - shift)).abs()
}

/// `(∫I_h|v|², ∫|v|²)` with the exact P1 mass matrix on every element.
pub fn lumped_vs_exact_l2(mesh: &TriMesh, v: &NodalVectorField) -> (f64, f64) {
    let mut lumped = 0.0;
    let mut exact = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (area, _) = affine_gradients(mesh.triangle_points(t));
        let vals = tri.map(|z| v.get(z));
        lumped += area / 3.0 * vals.iter().map(|x| vec3::norm_sq(*x)).sum::<f64>();
        // element mass matrix |K|/12 (1 + δ_ab)
        for a in 0..3 {
            for b in 0..3 {
                let m = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                exact += m * vec3::dot(vals[a], vals[b]);
            }
        }
    }
    (lumped, exact)
}

/// Pointwise operator used to exercise the generic π slot.
#[derive(Debug, Clone, Copy)]
pub struct ZeroOperator;

impl LocalOperator for ZeroOperator {
    fn apply(&self, _: Vec3) -> Vec3 {
        [0.0; 3]
    }
}
