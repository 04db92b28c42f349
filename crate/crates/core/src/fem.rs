//! P1 finite-element machinery on a [`TriMesh`].
//!
//! Vector unknowns are laid out vertex-major, component-minor: the scalar
//! index of component `c` at vertex `z` is `3 z + c`.

use rayon::prelude::*;
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};
use crate::vec3::{self, Vec3};

/// One ℝ³ value per mesh vertex, read as a P1 finite-element function.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalVectorField {
    values: Vec<Vec3>,
}

impl NodalVectorField {
    pub fn new(values: Vec<Vec3>) -> Self {
        Self { values }
    }

    pub fn constant(n: usize, v: Vec3) -> Self {
        Self { values: vec![v; n] }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &TriMesh, f: impl Fn(Point) -> Vec3) -> Self {
        Self {
            values: mesh.vertices().iter().map(|&p| f(p)).collect(),
        }
    }

    /// Nodal interpolant of `f`, normalized to unit length at every vertex.
    pub fn interpolate_unit(mesh: &TriMesh, f: impl Fn(Point) -> Vec3) -> Result<Self> {
        let mut field = Self::interpolate(mesh, f);
        field.normalize_nodes()?;
        Ok(field)
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        Self {
            values: flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec3] {
        &mut self.values
    }

    pub fn get(&self, z: usize) -> Vec3 {
        self.values[z]
    }

    /// Rescales every nodal vector to unit length.
    pub fn normalize_nodes(&mut self) -> Result<()> {
        for (z, v) in self.values.iter_mut().enumerate() {
            let n = vec3::norm(*v);
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::DegenerateMagnetization { vertex: z, norm: n });
            }
            *v = vec3::scale(1.0 / n, *v);
        }
        Ok(())
    }

    /// Largest deviation `| |u(z)| - 1 |` over the vertices.
    pub fn max_unit_deviation(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| (vec3::norm(v) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|&v| vec3::norm(v)).fold(0.0, f64::max)
    }

    pub(crate) fn check_len(&self, mesh: &TriMesh) -> Result<()> {
        if self.len() != mesh.n_vertices() {
            return Err(Error::SizeMismatch {
                expected: mesh.n_vertices(),
                found: self.len(),
            });
        }
        Ok(())
    }
}

/// Trapezoidal-rule nodal weights `w_z = Σ_{K∋z} |K|/3`.
#[derive(Debug, Clone, PartialEq)]
pub struct LumpedMass {
    weights: Vec<f64>,
}

impl LumpedMass {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `∫ I_h[u · w]`.
    pub fn inner(&self, u: &NodalVectorField, w: &NodalVectorField) -> f64 {
        self.weights
            .iter()
            .zip(u.values().iter().zip(w.values()))
            .map(|(&c, (&a, &b))| c * vec3::dot(a, b))
            .sum()
    }

    /// `∫ I_h[|u|²]`.
    pub fn norm_sq(&self, u: &NodalVectorField) -> f64 {
        self.inner(u, u)
    }
}

/// How the rows and columns of a [`SparseOperator`] map to unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// One scalar unknown per vertex.
    Scalar,
    /// Three unknowns per vertex, vertex-major, component-minor.
    VertexMajor3,
}

/// Assembled sparse operator in compressed-row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    matrix: CsMat<f64>,
    layout: Layout,
}

impl SparseOperator {
    pub fn matrix(&self) -> &CsMat<f64> {
        &self.matrix
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        csr_apply(&self.matrix, x)
    }

    /// `yᵀ A x`.
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, row) in self.matrix.outer_iterator().enumerate() {
            let r: f64 = row.iter().map(|(j, &a)| a * x[j]).sum();
            s += y[i] * r;
        }
        s
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in self.matrix.outer_iterator().enumerate() {
            for (j, &a) in row.iter() {
                d[i][j] += a;
            }
        }
        d
    }
}

pub(crate) fn csr_apply(a: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    a.outer_iterator()
        .map(|row| row.iter().map(|(j, &v)| v * x[j]).sum())
        .collect()
}

/// Area and barycentric-coordinate gradients of one triangle.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ElementGeometry {
    pub area: f64,
    pub grad: [[f64; 2]; 3],
}

pub(crate) fn element_geometry(p: [Point; 3]) -> ElementGeometry {
    let two_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut grad = [[0.0; 2]; 3];
    for a in 0..3 {
        let b = p[(a + 1) % 3];
        let c = p[(a + 2) % 3];
        grad[a] = [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area];
    }
    ElementGeometry {
        area: 0.5 * two_area,
        grad,
    }
}

fn checked_geometry(mesh: &TriMesh, t: usize) -> Result<ElementGeometry> {
    let p = mesh.triangle_points(t);
    let g = element_geometry(p);
    let h2 = (0..3)
        .map(|k| {
            let (a, b) = (p[k], p[(k + 1) % 3]);
            (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
        })
        .fold(0.0, f64::max);
    if !(g.area >= 1e-14 * h2) {
        return Err(Error::Assembly(format!(
            "triangle {t} is degenerate (area {:e}, longest edge² {h2:e})",
            g.area
        )));
    }
    Ok(g)
}

fn all_geometry(mesh: &TriMesh) -> Result<Vec<ElementGeometry>> {
    (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| checked_geometry(mesh, t))
        .collect()
}

pub fn assemble_lumped_mass(mesh: &TriMesh) -> LumpedMass {
    let mut weights = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let w = mesh.triangle_area(t) / 3.0;
        for &z in tri {
            weights[z] += w;
        }
    }
    LumpedMass { weights }
}

/// Scalar P1 stiffness `K_ab = Σ_K |K| ∇λ_a · ∇λ_b`, applied component-wise
/// to vector fields.
pub fn assemble_stiffness(mesh: &TriMesh) -> Result<SparseOperator> {
    let geo = all_geometry(mesh)?;
    let n = mesh.n_vertices();
    let mut tri = TriMat::with_capacity((n, n), 9 * mesh.n_triangles());
    for (g, t) in geo.iter().zip(mesh.triangles()) {
        for a in 0..3 {
            for b in 0..3 {
                let v = g.area * (g.grad[a][0] * g.grad[b][0] + g.grad[a][1] * g.grad[b][1]);
                tri.add_triplet(t[a], t[b], v);
            }
        }
    }
    Ok(SparseOperator {
        matrix: tri.to_csr(),
        layout: Layout::Scalar,
    })
}

/// `curl_ω (λ e_j)` for a basis function with gradient `g`, using
/// `curl_ω = e₁×∂₁ + e₂×∂₂`.
#[inline]
pub(crate) fn curl_of_basis(g: [f64; 2], j: usize) -> Vec3 {
    match j {
        0 => [0.0, 0.0, -g[1]],
        1 => [0.0, 0.0, g[0]],
        _ => [g[1], -g[0], 0.0],
    }
}

/// Curl form `C` with `φᵀ C v = ∫_ω curl_ω v · φ` for P1 fields `v`, `φ`.
///
/// `curl_ω v` is elementwise constant, so the centroid rule against the
/// affine `φ` is exact: `C[(a,i),(b,j)] = |K|/3 · (curl_ω(λ_b e_j))_i`.
pub fn assemble_curl_form(mesh: &TriMesh) -> Result<SparseOperator> {
    let geo = all_geometry(mesh)?;
    let n = 3 * mesh.n_vertices();
    let mut tri = TriMat::with_capacity((n, n), 54 * mesh.n_triangles());
    for (g, t) in geo.iter().zip(mesh.triangles()) {
        let w = g.area / 3.0;
        for b in 0..3 {
            for j in 0..3 {
                let c = curl_of_basis(g.grad[b], j);
                for a in 0..3 {
                    for (i, &ci) in c.iter().enumerate() {
                        if ci != 0.0 {
                            tri.add_triplet(3 * t[a] + i, 3 * t[b] + j, w * ci);
                        }
                    }
                }
            }
        }
    }
    Ok(SparseOperator {
        matrix: tri.to_csr(),
        layout: Layout::VertexMajor3,
    })
}

/// Mesh-dependent operators shared by the energy and the time stepper.
#[derive(Debug, Clone)]
pub struct FemOperators {
    pub mass: LumpedMass,
    pub stiffness: SparseOperator,
    pub curl: SparseOperator,
}

impl FemOperators {
    pub fn assemble(mesh: &TriMesh) -> Result<Self> {
        Ok(Self {
            mass: assemble_lumped_mass(mesh),
            stiffness: assemble_stiffness(mesh)?,
            curl: assemble_curl_form(mesh)?,
        })
    }

    /// Stiffness applied component-wise to a vertex-major vector field.
    pub fn stiffness_apply(&self, u: &NodalVectorField) -> Vec<f64> {
        let k = self.stiffness.matrix();
        let mut out = vec![0.0; 3 * u.len()];
        for (z, row) in k.outer_iterator().enumerate() {
            let mut acc = [0.0; 3];
            for (y, &a) in row.iter() {
                acc = vec3::axpy(a, u.get(y), acc);
            }
            out[3 * z..3 * z + 3].copy_from_slice(&acc);
        }
        out
    }

    /// `∫ ∇u : ∇w`.
    pub fn stiffness_form(&self, u: &NodalVectorField, w: &NodalVectorField) -> f64 {
        let ku = self.stiffness_apply(u);
        dot_flat(&ku, w)
    }

    /// `∫ curl_ω u · w`.
    pub fn curl_form(&self, u: &NodalVectorField, w: &NodalVectorField) -> f64 {
        self.curl.bilinear(&w.to_flat(), &u.to_flat())
    }
}

pub(crate) fn dot_flat(flat: &[f64], w: &NodalVectorField) -> f64 {
    flat.chunks_exact(3)
        .zip(w.values())
        .map(|(a, b)| a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
        .sum()
}

/// Barycentric coordinates of `p` in triangle `t`.
pub(crate) fn barycentric(mesh: &TriMesh, t: usize, p: Point) -> [f64; 3] {
    let [a, b, c] = mesh.triangle_points(t);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Triangle containing `p` (within a relative tolerance), if any.
pub fn locate(mesh: &TriMesh, p: Point) -> Option<(usize, [f64; 3])> {
    const TOL: f64 = 1e-10;
    let mut best: Option<(usize, [f64; 3], f64)> = None;
    for t in 0..mesh.n_triangles() {
        let l = barycentric(mesh, t, p);
        let worst = l[0].min(l[1]).min(l[2]);
        if worst >= 0.0 {
            return Some((t, l));
        }
        if worst >= -TOL && best.is_none_or(|b| worst > b.2) {
            best = Some((t, l, worst));
        }
    }
    best.map(|(t, l, _)| (t, l))
}

/// Barycentric P1 interpolation of `field` at `point`.
pub fn interpolate_at(mesh: &TriMesh, field: &NodalVectorField, point: Point) -> Result<Vec3> {
    field.check_len(mesh)?;
    let (t, l) = locate(mesh, point).ok_or(Error::PointOutsideMesh {
        x: point[0],
        y: point[1],
    })?;
    let tri = mesh.triangles()[t];
    let mut out = [0.0; 3];
    for k in 0..3 {
        out = vec3::axpy(l[k], field.get(tri[k]), out);
    }
    Ok(out)
}
