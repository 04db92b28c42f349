//! Material parameters, the reduced thin-film energy and its weak gradient.
//!
//! Internally every length is measured in exchange lengths and every energy
//! in units of `μ₀ Ms² ℓ_ex³` (per unit dimensionless thickness).

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{element_geometry, FemOperators, NodalVectorField};
use crate::mesh::TriMesh;
use crate::vec3::{self, Vec3};

/// Vacuum permeability, T·m/A.
pub const MU0: f64 = 4.0e-7 * PI;
/// Electron gyromagnetic ratio, rad/(s·T).
pub const GAMMA_E: f64 = 1.760_859_630e11;

/// Physical constants of the material plus their dimensionless derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Exchange stiffness, J/m.
    pub a: f64,
    /// DMI constant, J/m².
    pub d: f64,
    /// Saturation magnetization, A/m.
    pub ms: f64,
    /// Gilbert damping.
    pub alpha: f64,
    /// Exchange length, m.
    pub ell_ex: f64,
    /// Dimensionless DMI constant.
    pub kappa: f64,
    /// Seconds per dimensionless time unit.
    pub time_unit: f64,
}

pub fn derive_params(a: f64, d: f64, ms: f64, alpha: f64) -> Result<MaterialParams> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::invalid(format!(
            "exchange stiffness A must be positive, got {a}"
        )));
    }
    if !(ms.is_finite() && ms > 0.0) {
        return Err(Error::invalid(format!(
            "saturation magnetization Ms must be positive, got {ms}"
        )));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!("damping alpha must be positive, got {alpha}")));
    }
    if !d.is_finite() {
        return Err(Error::invalid(format!("DMI constant D must be finite, got {d}")));
    }
    let mu0_ms2 = MU0 * ms * ms;
    let ell_ex = (2.0 * a / mu0_ms2).sqrt();
    Ok(MaterialParams {
        a,
        d,
        ms,
        alpha,
        ell_ex,
        kappa: d / (mu0_ms2 * ell_ex),
        time_unit: 1.0 / (GAMMA_E * MU0 * ms),
    })
}

impl MaterialParams {
    /// Iron-germanium: A = 8.78e-12 J/m, D = 1.58e-3 J/m², Ms = 3.84e5 A/m.
    pub fn fege(alpha: f64) -> Self {
        derive_params(8.78e-12, 1.58e-3, 3.84e5, alpha).expect("FeGe constants are valid")
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        derive_params(self.a, self.d, self.ms, alpha)
    }

    /// `μ₀ Ms²`, J/m³.
    pub fn energy_density(&self) -> f64 {
        MU0 * self.ms * self.ms
    }

    pub fn seconds_to_dimensionless(&self, t: f64) -> f64 {
        t / self.time_unit
    }

    pub fn dimensionless_to_seconds(&self, t: f64) -> f64 {
        t * self.time_unit
    }

    pub fn meters_to_dimensionless(&self, x: f64) -> f64 {
        x / self.ell_ex
    }

    pub fn dimensionless_to_meters(&self, x: f64) -> f64 {
        x * self.ell_ex
    }

    /// Joules per dimensionless 2D energy unit for a film of `thickness` metres.
    pub fn joules_per_unit(&self, thickness: f64) -> f64 {
        self.energy_density() * self.ell_ex * self.ell_ex * thickness
    }
}

/// Constant applied field `f` of the Zeeman term `-∫ f·m`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AppliedField(pub Vec3);

/// Pointwise linear self-adjoint operator playing the role of `π[·]`.
///
/// The energy contribution is `-½ ∫ π[m]·m`; implementations must be
/// symmetric (`apply(u)·w == u·apply(w)`).
pub trait LocalOperator: Send + Sync + std::fmt::Debug {
    fn apply(&self, u: Vec3) -> Vec3;

    /// Pointwise bilinear form `π[u]·w`; overrides should be bitwise symmetric.
    fn form(&self, u: Vec3, w: Vec3) -> f64 {
        vec3::dot(self.apply(u), w)
    }
}

/// Thin-film limit operator `π[m] = -(1+κ²)(e₃⊗e₃) m`: shape anisotropy
/// enhanced by the DMI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThinFilmAnisotropy {
    pub kappa: f64,
}

impl LocalOperator for ThinFilmAnisotropy {
    fn apply(&self, u: Vec3) -> Vec3 {
        [0.0, 0.0, -(1.0 + self.kappa * self.kappa) * u[2]]
    }

    fn form(&self, u: Vec3, w: Vec3) -> f64 {
        -(1.0 + self.kappa * self.kappa) * (u[2] * w[2])
    }
}

/// Uniaxial anisotropy `π[m] = 2q (a·m) a`, i.e. energy `-q ∫ (a·m)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniaxialAnisotropy {
    pub q: f64,
    pub axis: Vec3,
}

impl LocalOperator for UniaxialAnisotropy {
    fn apply(&self, u: Vec3) -> Vec3 {
        vec3::scale(2.0 * self.q * vec3::dot(self.axis, u), self.axis)
    }

    fn form(&self, u: Vec3, w: Vec3) -> f64 {
        2.0 * self.q * (vec3::dot(self.axis, u) * vec3::dot(self.axis, w))
    }
}

pub fn pi_thinfilm(field: &NodalVectorField, kappa: f64) -> NodalVectorField {
    apply_local(&ThinFilmAnisotropy { kappa }, field)
}

pub fn apply_local(op: &dyn LocalOperator, field: &NodalVectorField) -> NodalVectorField {
    NodalVectorField::new(field.values().iter().map(|&u| op.apply(u)).collect())
}

/// Individual energy contributions, dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub exchange: f64,
    pub dmi: f64,
    pub pi_term: f64,
    pub applied_term: f64,
    pub constant_term: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn from_parts(exchange: f64, dmi: f64, pi_term: f64, applied_term: f64, constant_term: f64) -> Self {
        Self {
            exchange,
            dmi,
            pi_term,
            applied_term,
            constant_term,
            total: exchange + dmi + pi_term + applied_term + constant_term,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_parts(
            s * self.exchange,
            s * self.dmi,
            s * self.pi_term,
            s * self.applied_term,
            s * self.constant_term,
        )
    }
}

/// The energy functional
/// `G(m) = ½∫|∇m|² + κ∫curl_ω m·m − ½∫π[m]·m − ∫f·m − κ²|ω|/2`.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    pub kappa: f64,
    pub pi: Arc<dyn LocalOperator>,
    pub applied: AppliedField,
}

impl EnergyModel {
    pub fn thin_film(kappa: f64, applied: AppliedField) -> Self {
        Self {
            kappa,
            pi: Arc::new(ThinFilmAnisotropy { kappa }),
            applied,
        }
    }

    pub fn with_operator(kappa: f64, pi: Arc<dyn LocalOperator>, applied: AppliedField) -> Self {
        Self { kappa, pi, applied }
    }

    fn constant_term(&self, area: f64) -> f64 {
        -0.5 * self.kappa * self.kappa * area
    }

    /// Energy with element-exact quadrature of every term.
    pub fn energy(&self, mesh: &TriMesh, field: &NodalVectorField) -> Result<EnergyBreakdown> {
        field.check_len(mesh)?;
        let (mut exchange, mut dmi, mut pi_term, mut applied) = (0.0, 0.0, 0.0, 0.0);
        let f = self.applied.0;
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let g = element_geometry(mesh.triangle_points(t));
            let u = tri.map(|z| field.get(z));
            // ∂_k u, constant on the element
            let mut du = [[0.0; 3]; 2];
            for a in 0..3 {
                for k in 0..2 {
                    du[k] = vec3::axpy(g.grad[a][k], u[a], du[k]);
                }
            }
            exchange += 0.5 * g.area * (vec3::norm_sq(du[0]) + vec3::norm_sq(du[1]));
            let curl = vec3::add(vec3::cross(vec3::E1, du[0]), vec3::cross(vec3::E2, du[1]));
            let centroid = vec3::scale(1.0 / 3.0, vec3::add(vec3::add(u[0], u[1]), u[2]));
            dmi += self.kappa * g.area * vec3::dot(curl, centroid);
            // ∫_K (Pu)·u = |K|/12 (Σ_a Pu_a·u_a + (Σ_a Pu_a)·(Σ_a u_a)) for affine u
            let pu = u.map(|x| self.pi.apply(x));
            let diag: f64 = (0..3).map(|a| vec3::dot(pu[a], u[a])).sum();
            let spu = vec3::add(vec3::add(pu[0], pu[1]), pu[2]);
            let su = vec3::add(vec3::add(u[0], u[1]), u[2]);
            pi_term += -0.5 * g.area / 12.0 * (diag + vec3::dot(spu, su));
            applied -= g.area * vec3::dot(f, centroid);
        }
        Ok(EnergyBreakdown::from_parts(
            exchange,
            dmi,
            pi_term,
            applied,
            self.constant_term(mesh.total_area()),
        ))
    }

    /// Energy with the π and f terms integrated by the trapezoidal rule, the
    /// quadrature under which the discrete energy law of the stepper is exact.
    pub fn energy_lumped(&self, ops: &FemOperators, field: &NodalVectorField) -> EnergyBreakdown {
        let exchange = 0.5 * ops.stiffness_form(field, field);
        let dmi = self.kappa * ops.curl_form(field, field);
        let pi_term = -0.5 * self.pi_form_lumped(ops, field, field);
        let applied = -ops
            .mass
            .weights()
            .iter()
            .zip(field.values())
            .map(|(&w, &u)| w * vec3::dot(self.applied.0, u))
            .sum::<f64>();
        EnergyBreakdown::from_parts(exchange, dmi, pi_term, applied, self.constant_term(ops.mass.total()))
    }

    /// Load vector `b` (vertex-major, length 3N) with
    /// `b·φ = −∫∇m:∇φ + ∫I_h[π[m]·φ] + ∫I_h[f·φ] − κ∫curl m·φ − κ∫m·curl φ`,
    /// which is exactly `−∂G_lumped/∂m`.
    pub fn assemble_rhs(&self, ops: &FemOperators, m: &NodalVectorField) -> Vec<f64> {
        let flat = m.to_flat();
        let km = ops.stiffness_apply(m);
        let cm = ops.curl.apply(&flat);
        let ctm = csr_transpose_apply(ops, &flat);
        let mut b = vec![0.0; flat.len()];
        for (z, (&w, &u)) in ops.mass.weights().iter().zip(m.values()).enumerate() {
            let p = self.pi.apply(u);
            for c in 0..3 {
                let i = 3 * z + c;
                b[i] = -km[i] + w * (p[c] + self.applied.0[c]) - self.kappa * (cm[i] + ctm[i]);
            }
        }
        b
    }

    /// `⟨π[u], w⟩` under the trapezoidal rule.
    pub fn pi_form_lumped(&self, ops: &FemOperators, u: &NodalVectorField, w: &NodalVectorField) -> f64 {
        ops.mass
            .weights()
            .iter()
            .zip(u.values().iter().zip(w.values()))
            .map(|(&wz, (&a, &b))| wz * self.pi.form(a, b))
            .sum()
    }
}

/// `Cᵀ x` without forming the transpose.
pub(crate) fn csr_transpose_apply(ops: &FemOperators, x: &[f64]) -> Vec<f64> {
    let c = ops.curl.matrix();
    let mut y = vec![0.0; c.cols()];
    for (i, row) in c.outer_iterator().enumerate() {
        let xi = x[i];
        if xi != 0.0 {
            for (j, &a) in row.iter() {
                y[j] += a * xi;
            }
        }
    }
    y
}

/// Thin-film energy with element-exact quadrature.
pub fn energy(
    mesh: &TriMesh,
    field: &NodalVectorField,
    params: &MaterialParams,
    applied: AppliedField,
) -> Result<EnergyBreakdown> {
    EnergyModel::thin_film(params.kappa, applied).energy(mesh, field)
}

/// Thin-film load vector; see [`EnergyModel::assemble_rhs`].
pub fn assemble_rhs(
    m: &NodalVectorField,
    params: &MaterialParams,
    applied: AppliedField,
    ops: &FemOperators,
) -> Vec<f64> {
    EnergyModel::thin_film(params.kappa, applied).assemble_rhs(ops, m)
}
