//! Numerical study of the thin-film limit along the helical recovery sequence.
//!
//! For a planar unit field `u₀(σ)` the recovery field on `ω × (0,1)` is
//! `u*_ε = (u₀ + εsκ e₃×u₀) / |u₀ + εsκ e₃×u₀|` and its local energy is
//! `½∫|D_ε u*_ε|²` with the ε-rescaled helical Jacobian
//! `D_ε u = (∂₁u − κe₁×u, ∂₂u − κe₂×u, ε⁻¹∂_s u − κe₃×u)`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::quadrature::{gauss_legendre_unit, triangle_rule_deg5};
use crate::vec3::{self, Vec3, E1, E2, E3};

pub type Point = [f64; 2];

/// A unit vector field on the plane.
pub trait AnalyticField: Send + Sync {
    fn value(&self, p: Point) -> Vec3;

    /// `(∂₁u, ∂₂u)` if known in closed form.
    fn gradient(&self, _p: Point) -> Option<[Vec3; 2]> {
        None
    }
}

/// Planar derivatives of `field`, analytic when available, otherwise central
/// differences with step `h`.
pub fn planar_gradient(field: &dyn AnalyticField, p: Point, h: f64) -> [Vec3; 2] {
    field.gradient(p).unwrap_or_else(|| {
        let d = |k: usize| {
            let mut a = p;
            let mut b = p;
            a[k] += h;
            b[k] -= h;
            vec3::scale(0.5 / h, vec3::sub(field.value(a), field.value(b)))
        };
        [d(0), d(1)]
    })
}

/// Spatially constant unit field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantField(Vec3);

impl ConstantField {
    pub fn new(v: Vec3) -> Result<Self> {
        let n = vec3::norm(v);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::invalid("constant field direction must be nonzero"));
        }
        Ok(Self(vec3::scale(1.0 / n, v)))
    }
}

impl AnalyticField for ConstantField {
    fn value(&self, _: Point) -> Vec3 {
        self.0
    }

    fn gradient(&self, _: Point) -> Option<[Vec3; 2]> {
        Some([[0.0; 3]; 2])
    }
}

/// Hedgehog-type profile `(sin θ cos φ, sin θ sin φ, cos θ)` with
/// `θ = π min(ρ/R, 1)`, so `u₀ = e₃` at the centre and `−e₃` for `ρ ≥ R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialProfile {
    pub radius: f64,
}

impl AnalyticField for RadialProfile {
    fn value(&self, p: Point) -> Vec3 {
        let rho = p[0].hypot(p[1]);
        let theta = std::f64::consts::PI * (rho / self.radius).min(1.0);
        if rho == 0.0 {
            return E3;
        }
        let s = theta.sin() / rho;
        [s * p[0], s * p[1], theta.cos()]
    }

    fn gradient(&self, p: Point) -> Option<[Vec3; 2]> {
        let rho = p[0].hypot(p[1]);
        let inside = rho < self.radius;
        let dtheta = if inside {
            std::f64::consts::PI / self.radius
        } else {
            0.0
        };
        if rho < 1e-14 {
            return Some([[dtheta, 0.0, 0.0], [0.0, dtheta, 0.0]]);
        }
        let theta = std::f64::consts::PI * (rho / self.radius).min(1.0);
        let (sin, cos) = theta.sin_cos();
        let s = sin / rho;
        let ds = (dtheta * cos * rho - sin) / (rho * rho);
        let grad = |i: usize| {
            let xi = p[i];
            let mut out = [0.0; 3];
            for j in 0..2 {
                out[j] = ds * xi * p[j] / rho + if i == j { s } else { 0.0 };
            }
            out[2] = -sin * dtheta * xi / rho;
            out
        };
        Some([grad(0), grad(1)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeMode {
    /// Closed-form derivatives of the normalised perturbation (falls back to
    /// differences of `u₀` if the base field has no gradient).
    #[default]
    Analytic,
    /// Central differences of `u*_ε` with step `1e-6·min(1, ε)`.
    FiniteDifference,
}

/// The recovery field `u*_ε` built from a planar field.
pub struct RecoveryField<'a> {
    base: &'a dyn AnalyticField,
    kappa: f64,
    eps: f64,
    mode: DerivativeMode,
}

impl<'a> RecoveryField<'a> {
    pub fn new(base: &'a dyn AnalyticField, kappa: f64, eps: f64, mode: DerivativeMode) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        Ok(Self { base, kappa, eps, mode })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    fn perturbed(&self, u0: Vec3, s: f64) -> Vec3 {
        vec3::axpy(s * self.eps * self.kappa, vec3::cross(E3, u0), u0)
    }

    pub fn value(&self, p: Point, s: f64) -> Vec3 {
        vec3::normalize(self.perturbed(self.base.value(p), s))
    }

    fn fd_step(&self) -> f64 {
        1e-6 * self.eps.min(1.0)
    }

    /// `(∂₁u*, ∂₂u*, ∂_s u*)`.
    pub fn derivatives(&self, p: Point, s: f64) -> [Vec3; 3] {
        match self.mode {
            DerivativeMode::Analytic => {
                let u0 = self.base.value(p);
                let w = self.perturbed(u0, s);
                let len = vec3::norm(w);
                let u = vec3::scale(1.0 / len, w);
                // ∂u* = u* × (∂w × u*) / |w|
                let project = |dw: Vec3| vec3::scale(1.0 / len, vec3::cross(u, vec3::cross(dw, u)));
                let g = planar_gradient(self.base, p, 1e-6);
                let se = s * self.eps * self.kappa;
                let d1 = project(vec3::axpy(se, vec3::cross(E3, g[0]), g[0]));
                let d2 = project(vec3::axpy(se, vec3::cross(E3, g[1]), g[1]));
                let ds = project(vec3::scale(self.eps * self.kappa, vec3::cross(E3, u0)));
                [d1, d2, ds]
            }
            DerivativeMode::FiniteDifference => {
                let h = self.fd_step();
                let c = |a: Vec3, b: Vec3| vec3::scale(0.5 / h, vec3::sub(a, b));
                [
                    c(self.value([p[0] + h, p[1]], s), self.value([p[0] - h, p[1]], s)),
                    c(self.value([p[0], p[1] + h], s), self.value([p[0], p[1] - h], s)),
                    c(self.value(p, s + h), self.value(p, s - h)),
                ]
            }
        }
    }
}

/// `|D_ε u|²` of the recovery field at `(σ, s)`.
pub fn helical_jacobian_sq(field: &RecoveryField<'_>, p: Point, s: f64) -> f64 {
    let u = field.value(p, s);
    let d = field.derivatives(p, s);
    let k = field.kappa;
    let c1 = vec3::axpy(-k, vec3::cross(E1, u), d[0]);
    let c2 = vec3::axpy(-k, vec3::cross(E2, u), d[1]);
    let c3 = vec3::axpy(-k, vec3::cross(E3, u), vec3::scale(1.0 / field.eps, d[2]));
    vec3::norm_sq(c1) + vec3::norm_sq(c2) + vec3::norm_sq(c3)
}

/// Physical quadrature points and weights of the degree-5 rule on every
/// triangle, grouped per triangle.
pub(crate) fn triangle_points(mesh: &TriMesh) -> Vec<Vec<(Point, f64)>> {
    let rule = triangle_rule_deg5();
    (0..mesh.n_triangles())
        .map(|t| {
            let p = mesh.triangle_points(t);
            let area = mesh.triangle_area(t);
            rule.iter()
                .map(|q| {
                    let x = q.bary[0] * p[0][0] + q.bary[1] * p[1][0] + q.bary[2] * p[2][0];
                    let y = q.bary[0] * p[0][1] + q.bary[1] * p[1][1] + q.bary[2] * p[2][1];
                    ([x, y], q.weight * area)
                })
                .collect()
        })
        .collect()
}

/// `Σ_K Σ_q w_q f(σ_q)`, parallel over triangles, reduced in triangle order.
pub(crate) fn integrate_planar(mesh: &TriMesh, f: impl Fn(Point) -> f64 + Sync) -> f64 {
    let per: Vec<f64> = triangle_points(mesh)
        .par_iter()
        .map(|pts| pts.iter().map(|&(p, w)| w * f(p)).sum())
        .collect();
    per.iter().sum()
}

/// `½∫_{ω×(0,1)} |D_ε u*_ε|²` by the degree-5 triangle rule times an
/// `n_gauss_s`-point Gauss rule in the thickness variable.
pub fn local_energy_3d(field: &RecoveryField<'_>, mesh: &TriMesh, n_gauss_s: usize) -> Result<f64> {
    let gauss = gauss_legendre_unit(n_gauss_s)?;
    Ok(0.5
        * integrate_planar(mesh, |p| {
            gauss.iter().map(|&(s, w)| w * helical_jacobian_sq(field, p, s)).sum()
        }))
}

/// Reference values of the limit functional for a planar field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Reference {
    /// `½ Σ_{i=1,2} ∫|∂_i u − κ e_i×u|²`.
    pub local_part: f64,
    /// `½∫|∇u|² + κ∫curl u·u + (1+κ²)/2 ∫u₃² − κ²|ω|/2`.
    pub canonical: f64,
    /// Helical form with the constant `−κ²|ω|/2`: `local + ½∫u₃² − κ²|ω|/2`.
    pub helical_stated: f64,
    /// Helical form with the constant from expanding the squares:
    /// `local + ½∫u₃² − κ²|ω|`. Equal to `canonical`.
    pub helical_derived: f64,
    pub area: f64,
}

pub fn f0_reference(field: &dyn AnalyticField, mesh: &TriMesh, kappa: f64) -> F0Reference {
    let grad = |p: Point| planar_gradient(field, p, 1e-6);
    let local_part = 0.5
        * integrate_planar(mesh, |p| {
            let u = field.value(p);
            let g = grad(p);
            vec3::norm_sq(vec3::axpy(-kappa, vec3::cross(E1, u), g[0]))
                + vec3::norm_sq(vec3::axpy(-kappa, vec3::cross(E2, u), g[1]))
        });
    let exchange = 0.5
        * integrate_planar(mesh, |p| {
            let g = grad(p);
            vec3::norm_sq(g[0]) + vec3::norm_sq(g[1])
        });
    let dmi = kappa
        * integrate_planar(mesh, |p| {
            let g = grad(p);
            let curl = vec3::add(vec3::cross(E1, g[0]), vec3::cross(E2, g[1]));
            vec3::dot(curl, field.value(p))
        });
    let u3sq = integrate_planar(mesh, |p| field.value(p)[2].powi(2));
    let area = mesh.total_area();
    let k2 = kappa * kappa;
    F0Reference {
        local_part,
        canonical: exchange + dmi + 0.5 * (1.0 + k2) * u3sq - 0.5 * k2 * area,
        helical_stated: local_part + 0.5 * u3sq - 0.5 * k2 * area,
        helical_derived: local_part + 0.5 * u3sq - k2 * area,
        area,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaRow {
    pub eps: f64,
    pub e_local: f64,
    pub e_limit: f64,
    pub abs_error: f64,
}

/// Convergence table of the local energy along the recovery sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTable {
    pub rows: Vec<GammaRow>,
    /// Least-squares slope of `log|error|` against `log ε`; `None` when every
    /// error is at round-off level.
    pub fitted_order: Option<f64>,
    pub e_limit: f64,
    pub f0: F0Reference,
}

/// Errors at or below this level count as exact.
pub const EXACT_TOL: f64 = 1e-12;

impl GammaTable {
    pub fn is_exact(&self) -> bool {
        self.rows.iter().all(|r| r.abs_error <= EXACT_TOL)
    }

    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].abs_error < w[0].abs_error)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,E_local,E_limit,abs_error\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.15e},{:.15e},{:.15e},{:.15e}",
                r.eps, r.e_local, r.e_limit, r.abs_error
            );
        }
        match self.fitted_order {
            Some(p) => {
                let _ = writeln!(out, "# fitted_order={p:.6}");
            }
            None => out.push_str("# fitted_order=exact\n"),
        }
        out
    }
}

/// Least-squares slope of `log y` against `log x` over pairs with `y > 0`.
pub fn fit_order(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&a, &b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaOptions {
    pub n_gauss_s: usize,
    pub mode: DerivativeMode,
}

impl Default for GammaOptions {
    fn default() -> Self {
        Self {
            n_gauss_s: 4,
            mode: DerivativeMode::Analytic,
        }
    }
}

pub fn gamma_study(
    field: &dyn AnalyticField,
    mesh: &TriMesh,
    eps_list: &[f64],
    kappa: f64,
    options: GammaOptions,
) -> Result<GammaTable> {
    if eps_list.len() < 3 {
        return Err(Error::invalid("the eps list needs at least three entries"));
    }
    if !eps_list.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::invalid("the eps list must be strictly decreasing"));
    }
    let f0 = f0_reference(field, mesh, kappa);
    let e_limit = f0.local_part;
    let rows = eps_list
        .iter()
        .map(|&eps| {
            let rec = RecoveryField::new(field, kappa, eps, options.mode)?;
            let e_local = local_energy_3d(&rec, mesh, options.n_gauss_s)?;
            Ok(GammaRow {
                eps,
                e_local,
                e_limit,
                abs_error: (e_local - e_limit).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let exact = rows.iter().all(|r| r.abs_error <= EXACT_TOL);
    let fitted_order = if exact {
        None
    } else {
        let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
        let err: Vec<f64> = rows.iter().map(|r| r.abs_error).collect();
        fit_order(&eps, &err)
    };
    Ok(GammaTable {
        rows,
        fitted_order,
        e_limit,
        f0,
    })
}
