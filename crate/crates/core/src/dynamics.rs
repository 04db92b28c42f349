//! Projection-free tangent plane integrator for the LLG equation.
//!
//! Each step solves for a velocity `v` in the discrete tangent space of the
//! current magnetization,
//!
//! ```text
//! α∫I_h[v·φ] + ∫I_h[(m×v)·φ] + τ∫∇v:∇φ + κτ/2 (∫curl v·φ + ∫v·curl φ) = b(m)·φ
//! ```
//!
//! for all tangent `φ`, then sets `m ← m + τv` without renormalising.

use rayon::prelude::*;
use sprs::CsMat;

use crate::error::{Error, Result};
use crate::fem::{FemOperators, NodalVectorField};
use crate::linalg::{expand_ordering, rcm_ordering, solve_direct, solve_gmres, SolverKind};
use crate::mesh::TriMesh;
use crate::model::{AppliedField, EnergyBreakdown, EnergyModel, MaterialParams};
use crate::vec3::{self, Vec3};

/// Below this nodal length the tangent frame is considered degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 0.1;

/// Per-vertex orthonormal basis of the plane orthogonal to `m(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    pub t1: Vec<Vec3>,
    pub t2: Vec<Vec3>,
}

impl TangentFrame {
    pub fn len(&self) -> usize {
        self.t1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t1.is_empty()
    }

    /// `c₁ t₁(z) + c₂ t₂(z)` for coefficients stored as `[c₁, c₂]` per vertex.
    pub fn lift(&self, coeffs: &[f64]) -> NodalVectorField {
        NodalVectorField::new(
            (0..self.len())
                .map(|z| {
                    vec3::add(
                        vec3::scale(coeffs[2 * z], self.t1[z]),
                        vec3::scale(coeffs[2 * z + 1], self.t2[z]),
                    )
                })
                .collect(),
        )
    }

    /// Frame coefficients of a vertex-major 3N vector.
    pub fn restrict(&self, flat: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.len());
        for z in 0..self.len() {
            let b = [flat[3 * z], flat[3 * z + 1], flat[3 * z + 2]];
            out.push(vec3::dot(self.t1[z], b));
            out.push(vec3::dot(self.t2[z], b));
        }
        out
    }
}

pub fn frame_at(m: Vec3) -> Option<(Vec3, Vec3)> {
    let len = vec3::norm(m);
    if !(len >= DEGENERACY_THRESHOLD) {
        return None;
    }
    let n = vec3::scale(1.0 / len, m);
    let mut a = 0;
    for k in 1..3 {
        if n[k].abs() < n[a].abs() {
            a = k;
        }
    }
    let mut e = [0.0; 3];
    e[a] = 1.0;
    let t1 = vec3::normalize(vec3::cross(e, n));
    let t2 = vec3::cross(n, t1);
    Some((t1, t2))
}

pub fn build_tangent_frame(m: &NodalVectorField) -> Result<TangentFrame> {
    let mut t1 = Vec::with_capacity(m.len());
    let mut t2 = Vec::with_capacity(m.len());
    for (z, &u) in m.values().iter().enumerate() {
        let (a, b) = frame_at(u).ok_or(Error::DegenerateMagnetization {
            vertex: z,
            norm: vec3::norm(u),
        })?;
        t1.push(a);
        t2.push(b);
    }
    Ok(TangentFrame { t1, t2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Dimensionless time step.
    pub tau: f64,
    /// Dimensionless final time.
    pub t_end: f64,
    /// Relative residual required from the linear solver.
    pub solver_tol: f64,
    pub solver: SolverKind,
    /// Stop as soon as the largest nodal `|v|` falls below this value.
    pub stop_vmax: Option<f64>,
    /// Snapshot period in steps; 0 disables periodic snapshots.
    pub snapshot_every: usize,
    /// Debug only: project nodal values back to the sphere after each step.
    pub renormalize: bool,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            t_end: 1.0,
            solver_tol: 1e-10,
            solver: SolverKind::Direct,
            stop_vmax: None,
            snapshot_every: 0,
            renormalize: false,
            gmres_restart: 60,
            gmres_max_iter: 3000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::invalid(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol <= 1e-4) {
            return Err(Error::invalid(format!(
                "solver_tol must lie in (0, 1e-4], got {}",
                self.solver_tol
            )));
        }
        if let Some(v) = self.stop_vmax {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("stop_vmax must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Number of steps needed to reach `t_end`.
    pub fn n_steps(&self) -> usize {
        let r = self.t_end / self.tau;
        let n = r.round();
        if (r - n).abs() <= 1e-9 * r.max(1.0) {
            n as usize
        } else {
            r.ceil() as usize
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ellipticity {
    Pass,
    Fail { max_tau: f64 },
}

/// Sufficient ellipticity condition `τ ≤ α/κ²` for the step bilinear form.
pub fn ellipticity_check(alpha: f64, kappa: f64, tau: f64) -> Ellipticity {
    if kappa == 0.0 {
        return Ellipticity::Pass;
    }
    let max_tau = alpha / (kappa * kappa);
    if tau <= max_tau {
        Ellipticity::Pass
    } else {
        Ellipticity::Fail { max_tau }
    }
}

/// Largest step for which energy decay is guaranteed with the thin-film
/// operator: `τ ≤ 2α/(1+κ²)`.
pub fn monotone_tau_bound(alpha: f64, kappa: f64) -> f64 {
    2.0 * alpha / (1.0 + kappa * kappa)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    /// Lumped energy of the new iterate.
    pub energy: EnergyBreakdown,
    /// `G(m⁺) + ατ‖v‖²_h + τ²/2‖∇v‖² + τ²/2⟨π v, v⟩_h − G(m)`.
    pub energy_law_residual: f64,
    /// `∫ I_h[| |m|² − 1 |]` of the new iterate.
    pub constraint_l1: f64,
    /// Running `τ² Σ ∫ I_h[|v|²]`.
    pub constraint_budget: f64,
    pub vmax: f64,
    pub solver_iterations: usize,
    pub solver_residual: f64,
    /// Largest violation of `|m⁺|² = |m|² + τ²|v|²` over the vertices.
    pub nodal_law_defect: f64,
    /// Largest `|v(z)·m(z)|`.
    pub tangency_defect: f64,
}

/// One entry of the constant part of the step matrix, 3×3 per vertex pair.
#[derive(Debug, Clone)]
struct BlockRow {
    cols: Vec<usize>,
    blocks: Vec<[[f64; 3]; 3]>,
}

/// Reusable integrator for a fixed mesh, model and step size.
#[derive(Debug, Clone)]
pub struct Stepper {
    ops: FemOperators,
    model: EnergyModel,
    alpha: f64,
    config: SimConfig,
    rows: Vec<BlockRow>,
    order: Vec<usize>,
}

fn constraint_l1(ops: &FemOperators, m: &NodalVectorField) -> f64 {
    ops.mass
        .weights()
        .iter()
        .zip(m.values())
        .map(|(&w, &u)| w * (vec3::norm_sq(u) - 1.0).abs())
        .sum()
}

impl Stepper {
    pub fn new(mesh: &TriMesh, model: EnergyModel, alpha: f64, config: SimConfig) -> Result<Self> {
        config.validate()?;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        if let Ellipticity::Fail { max_tau } = ellipticity_check(alpha, model.kappa, config.tau) {
            return Err(Error::EllipticityViolation {
                tau: config.tau,
                max_tau,
            });
        }
        let ops = FemOperators::assemble(mesh)?;
        let adj = mesh.vertex_neighbors();
        let tau = config.tau;
        let kt = 0.5 * model.kappa * tau;
        let k = ops.stiffness.matrix();
        let c = ops.curl.matrix();
        let cget = |r: usize, s: usize| c.get(r, s).copied().unwrap_or(0.0);
        let rows = (0..mesh.n_vertices())
            .into_par_iter()
            .map(|z| {
                let mut cols = adj[z].clone();
                cols.push(z);
                cols.sort_unstable();
                let blocks = cols
                    .iter()
                    .map(|&y| {
                        let kzy = k.get(z, y).copied().unwrap_or(0.0);
                        let mut b = [[0.0; 3]; 3];
                        for (i, bi) in b.iter_mut().enumerate() {
                            for (j, bij) in bi.iter_mut().enumerate() {
                                let mut s = kt * (cget(3 * z + i, 3 * y + j) + cget(3 * y + j, 3 * z + i));
                                if i == j {
                                    s += tau * kzy;
                                    if y == z {
                                        s += alpha * ops.mass.weights()[z];
                                    }
                                }
                                *bij = s;
                            }
                        }
                        b
                    })
                    .collect();
                BlockRow { cols, blocks }
            })
            .collect();
        let order = expand_ordering(&rcm_ordering(&adj), 2);
        Ok(Self {
            ops,
            model,
            alpha,
            config,
            rows,
            order,
        })
    }

    /// Thin-film stepper from material parameters.
    pub fn thin_film(
        mesh: &TriMesh,
        params: &MaterialParams,
        applied: AppliedField,
        config: SimConfig,
    ) -> Result<Self> {
        Self::new(
            mesh,
            EnergyModel::thin_film(params.kappa, applied),
            params.alpha,
            config,
        )
    }

    pub fn operators(&self) -> &FemOperators {
        &self.ops
    }

    pub fn model(&self) -> &EnergyModel {
        &self.model
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn energy(&self, m: &NodalVectorField) -> EnergyBreakdown {
        self.model.energy_lumped(&self.ops, m)
    }

    /// Reduced 2N×2N system matrix at the current magnetization.
    pub fn reduced_matrix(&self, m: &NodalVectorField, frame: &TangentFrame) -> CsMat<f64> {
        let w = self.ops.mass.weights();
        let per_row: Vec<(Vec<usize>, [Vec<f64>; 2])> = self
            .rows
            .par_iter()
            .enumerate()
            .map(|(z, row)| {
                let tz = [frame.t1[z], frame.t2[z]];
                let mut cols = Vec::with_capacity(2 * row.cols.len());
                let mut vals = [
                    Vec::with_capacity(2 * row.cols.len()),
                    Vec::with_capacity(2 * row.cols.len()),
                ];
                for (&y, b) in row.cols.iter().zip(&row.blocks) {
                    let ty = [frame.t1[y], frame.t2[y]];
                    cols.push(2 * y);
                    cols.push(2 * y + 1);
                    for p in 0..2 {
                        for q in 0..2 {
                            let mut bt = [0.0; 3];
                            for (i, bti) in bt.iter_mut().enumerate() {
                                *bti = vec3::dot(b[i], ty[q]);
                            }
                            if y == z {
                                bt = vec3::axpy(w[z], vec3::cross(m.get(z), ty[q]), bt);
                            }
                            vals[p].push(vec3::dot(tz[p], bt));
                        }
                    }
                }
                (cols, vals)
            })
            .collect();
        let n = 2 * self.rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for (cols, vals) in per_row {
            for v in vals {
                indices.extend_from_slice(&cols);
                data.extend_from_slice(&v);
                indptr.push(indices.len());
            }
        }
        CsMat::new((n, n), indptr, indices, data)
    }

    /// Advance one step from `m` (whose step index is `step`).
    pub fn step(
        &self,
        m: &NodalVectorField,
        step: usize,
    ) -> Result<(NodalVectorField, NodalVectorField, StepDiagnostics)> {
        if m.len() != self.rows.len() {
            return Err(Error::SizeMismatch {
                expected: self.rows.len(),
                found: m.len(),
            });
        }
        let tau = self.config.tau;
        let frame = build_tangent_frame(m)?;
        let a = self.reduced_matrix(m, &frame);
        let b = frame.restrict(&self.model.assemble_rhs(&self.ops, m));
        let (coeffs, stats) = match self.config.solver {
            SolverKind::Direct => solve_direct(&a, &b, &self.order, self.config.solver_tol)?,
            SolverKind::Iterative => solve_gmres(
                &a,
                &b,
                None,
                self.config.solver_tol,
                self.config.gmres_restart,
                self.config.gmres_max_iter,
            )?,
        };
        let v = frame.lift(&coeffs);
        let mut next = NodalVectorField::new(
            m.values()
                .iter()
                .zip(v.values())
                .map(|(&mz, &vz)| vec3::axpy(tau, vz, mz))
                .collect(),
        );
        let mut nodal_law_defect: f64 = 0.0;
        let mut tangency_defect: f64 = 0.0;
        for ((&mz, &vz), &nz) in m.values().iter().zip(v.values()).zip(next.values()) {
            let law = vec3::norm_sq(nz) - vec3::norm_sq(mz) - tau * tau * vec3::norm_sq(vz);
            nodal_law_defect = nodal_law_defect.max(law.abs());
            tangency_defect = tangency_defect.max(vec3::dot(mz, vz).abs());
        }
        if self.config.renormalize {
            next.normalize_nodes()?;
        }
        let g_old = self.energy(m).total;
        let energy = self.energy(&next);
        let vnorm = self.ops.mass.norm_sq(&v);
        let residual = energy.total
            + self.alpha * tau * vnorm
            + 0.5 * tau * tau * self.ops.stiffness_form(&v, &v)
            + 0.5 * tau * tau * self.model.pi_form_lumped(&self.ops, &v, &v)
            - g_old;
        let diag = StepDiagnostics {
            step: step + 1,
            time: (step + 1) as f64 * tau,
            energy,
            energy_law_residual: residual,
            constraint_l1: constraint_l1(&self.ops, &next),
            constraint_budget: tau * tau * vnorm,
            vmax: v.max_norm(),
            solver_iterations: stats.iterations,
            solver_residual: stats.relative_residual,
            nodal_law_defect,
            tangency_defect,
        };
        Ok((next, v, diag))
    }

    /// Diagnostics row describing the initial state.
    pub fn initial_diagnostics(&self, m: &NodalVectorField) -> StepDiagnostics {
        StepDiagnostics {
            step: 0,
            time: 0.0,
            energy: self.energy(m),
            constraint_l1: constraint_l1(&self.ops, m),
            ..Default::default()
        }
    }

    /// Iterate until `t_end` or, in relaxation mode, until `vmax < stop_vmax`.
    pub fn evolve(&self, m0: &NodalVectorField, sink: &mut dyn Sink) -> Result<EvolveOutcome> {
        if m0.len() != self.rows.len() {
            return Err(Error::SizeMismatch {
                expected: self.rows.len(),
                found: m0.len(),
            });
        }
        let mut m = m0.clone();
        let first = self.initial_diagnostics(&m);
        sink.on_step(&m, &first)?;
        sink.on_snapshot(0, &m)?;
        let mut series = vec![first];
        let mut budget = 0.0;
        let mut stop = StopReason::TimeHorizon;
        let n_steps = self.config.n_steps();
        let mut last_snapshot = 0;
        for i in 0..n_steps {
            let (next, _v, mut diag) = self.step(&m, i)?;
            budget += diag.constraint_budget;
            diag.constraint_budget = budget;
            m = next;
            sink.on_step(&m, &diag)?;
            if self.config.snapshot_every > 0 && diag.step % self.config.snapshot_every == 0 {
                sink.on_snapshot(diag.step, &m)?;
                last_snapshot = diag.step;
            }
            let vmax = diag.vmax;
            series.push(diag);
            if self.config.stop_vmax.is_some_and(|s| vmax < s) {
                stop = StopReason::Relaxed;
                break;
            }
        }
        let steps = series.len() - 1;
        if last_snapshot != steps {
            sink.on_snapshot(steps, &m)?;
        }
        Ok(EvolveOutcome {
            final_state: m,
            series,
            stop,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    TimeHorizon,
    Relaxed,
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub final_state: NodalVectorField,
    /// Row 0 describes the initial state.
    pub series: Vec<StepDiagnostics>,
    pub stop: StopReason,
}

impl EvolveOutcome {
    pub fn steps(&self) -> usize {
        self.series.len() - 1
    }
}

/// Receives diagnostics rows and snapshots while a run progresses.
pub trait Sink {
    fn on_step(&mut self, state: &NodalVectorField, diag: &StepDiagnostics) -> Result<()>;

    fn on_snapshot(&mut self, _step: usize, _state: &NodalVectorField) -> Result<()> {
        Ok(())
    }
}

/// Sink that discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl Sink for NullSink {
    fn on_step(&mut self, _: &NodalVectorField, _: &StepDiagnostics) -> Result<()> {
        Ok(())
    }
}

/// One step with freshly assembled operators.
pub fn step(
    mesh: &TriMesh,
    m: &NodalVectorField,
    params: &MaterialParams,
    applied: AppliedField,
    config: &SimConfig,
) -> Result<(NodalVectorField, NodalVectorField, StepDiagnostics)> {
    Stepper::thin_film(mesh, params, applied, config.clone())?.step(m, 0)
}

/// Full run with freshly assembled operators.
pub fn evolve(
    mesh: &TriMesh,
    m0: &NodalVectorField,
    params: &MaterialParams,
    applied: AppliedField,
    config: &SimConfig,
    sink: &mut dyn Sink,
) -> Result<EvolveOutcome> {
    Stepper::thin_film(mesh, params, applied, config.clone())?.evolve(m0, sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures::*;
    use crate::mesh::generate_disk;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit_field(n: usize, seed: u64) -> NodalVectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
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
        f.normalize_nodes().unwrap();
        f
    }

    fn config(tau: f64) -> SimConfig {
        SimConfig {
            tau,
            t_end: 10.0 * tau,
            ..Default::default()
        }
    }

    #[test]
    fn frame_for_e3() {
        let (t1, t2) = frame_at(vec3::E3).unwrap();
        assert_eq!(t1, [0.0, -1.0, 0.0]);
        assert_eq!(t2, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn frame_rejects_short_vectors() {
        let m = NodalVectorField::new(vec![vec3::E1, [0.05, 0.0, 0.0]]);
        match build_tangent_frame(&m) {
            Err(Error::DegenerateMagnetization { vertex, .. }) => assert_eq!(vertex, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ellipticity_examples() {
        assert_eq!(ellipticity_check(0.1, 0.0, 100.0), Ellipticity::Pass);
        assert_eq!(ellipticity_check(1.0, 1.0, 0.5), Ellipticity::Pass);
        match ellipticity_check(0.28, 0.876, 0.5) {
            Ellipticity::Fail { max_tau } => assert_relative_eq!(max_tau, 0.28 / (0.876 * 0.876)),
            Ellipticity::Pass => panic!("should fail"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig {
            tau: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            solver_tol: 1e-3,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            t_end: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert_eq!(
            SimConfig {
                tau: 0.1,
                t_end: 1.0,
                ..Default::default()
            }
            .n_steps(),
            10
        );
        assert_eq!(
            SimConfig {
                tau: 0.3,
                t_end: 1.0,
                ..Default::default()
            }
            .n_steps(),
            4
        );
        assert_eq!(
            SimConfig {
                tau: 0.3,
                t_end: 0.0,
                ..Default::default()
            }
            .n_steps(),
            0
        );
    }

    #[test]
    fn stepper_rejects_large_tau() {
        let mesh = unit_square();
        let err = Stepper::new(
            &mesh,
            EnergyModel::thin_film(0.876, AppliedField::default()),
            0.28,
            config(0.5),
        );
        assert!(matches!(err, Err(Error::EllipticityViolation { .. })));
    }

    #[test]
    fn constant_states_are_equilibria_without_dmi() {
        let mesh = square_grid(4, 2.0);
        for m0 in [vec3::E1, vec3::E3] {
            let stepper = Stepper::new(
                &mesh,
                EnergyModel::thin_film(0.0, AppliedField::default()),
                1.0,
                config(0.5),
            )
            .unwrap();
            let m = NodalVectorField::constant(mesh.n_vertices(), m0);
            let (next, v, _) = stepper.step(&m, 0).unwrap();
            assert!(v.max_norm() < 1e-14);
            assert_eq!(next, m);
        }
    }

    #[test]
    fn energy_law_holds_on_two_triangles() {
        let mesh = unit_square();
        let m = random_unit_field(4, 17);
        let stepper = Stepper::new(
            &mesh,
            EnergyModel::thin_film(0.876, AppliedField([0.1, 0.0, -0.2])),
            1.0,
            config(0.5),
        )
        .unwrap();
        let (_, v, d) = stepper.step(&m, 0).unwrap();
        let g = stepper.energy(&m).total;
        assert!(
            d.energy_law_residual.abs() <= 1e-10 * g.abs().max(1.0),
            "{}",
            d.energy_law_residual
        );
        assert!(d.tangency_defect <= 1e-12);
        assert!(d.nodal_law_defect <= 1e-12);
        assert!(v.max_norm() > 0.0);
    }

    #[test]
    fn iterative_and_direct_agree() {
        let mesh = generate_disk(4.0, 0.5).unwrap();
        let m = random_unit_field(mesh.n_vertices(), 4);
        let model = EnergyModel::thin_film(0.876, AppliedField::default());
        let d = Stepper::new(&mesh, model.clone(), 1.0, config(0.3)).unwrap();
        let it = Stepper::new(
            &mesh,
            model,
            1.0,
            SimConfig {
                solver: SolverKind::Iterative,
                ..config(0.3)
            },
        )
        .unwrap();
        let (_, vd, _) = d.step(&m, 0).unwrap();
        let (_, vi, di) = it.step(&m, 0).unwrap();
        assert!(di.solver_iterations > 0);
        for (a, b) in vd.values().iter().zip(vi.values()) {
            assert!(vec3::norm(vec3::sub(*a, *b)) < 1e-7);
        }
    }

    #[test]
    fn evolve_stops_immediately_when_relaxed() {
        let mesh = square_grid(3, 1.0);
        let stepper = Stepper::new(
            &mesh,
            EnergyModel::thin_film(0.0, AppliedField::default()),
            1.0,
            SimConfig {
                stop_vmax: Some(1e-8),
                ..config(0.2)
            },
        )
        .unwrap();
        let out = stepper
            .evolve(&NodalVectorField::constant(mesh.n_vertices(), vec3::E1), &mut NullSink)
            .unwrap();
        assert_eq!(out.steps(), 1);
        assert_eq!(out.stop, StopReason::Relaxed);
    }

    #[test]
    fn zero_horizon_gives_only_the_initial_row() {
        let mesh = unit_square();
        let stepper = Stepper::new(
            &mesh,
            EnergyModel::thin_film(0.5, AppliedField::default()),
            1.0,
            SimConfig {
                t_end: 0.0,
                ..config(0.2)
            },
        )
        .unwrap();
        let out = stepper
            .evolve(&NodalVectorField::constant(4, vec3::E3), &mut NullSink)
            .unwrap();
        assert_eq!(out.series.len(), 1);
        assert_eq!(out.series[0].step, 0);
    }

    #[test]
    fn renormalize_flag_keeps_unit_length() {
        let mesh = generate_disk(3.0, 0.6).unwrap();
        let cfg = SimConfig {
            renormalize: true,
            ..config(0.3)
        };
        let stepper = Stepper::new(&mesh, EnergyModel::thin_film(0.876, AppliedField::default()), 1.0, cfg).unwrap();
        let out = stepper
            .evolve(&random_unit_field(mesh.n_vertices(), 8), &mut NullSink)
            .unwrap();
        assert!(out.final_state.max_unit_deviation() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn frames_are_orthonormal_and_tangent(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let m = [x, y, z];
            prop_assume!(vec3::norm(m) >= DEGENERACY_THRESHOLD);
            let (t1, t2) = frame_at(m).unwrap();
            let n = vec3::normalize(m);
            prop_assert!((vec3::norm(t1) - 1.0).abs() < 1e-12);
            prop_assert!((vec3::norm(t2) - 1.0).abs() < 1e-12);
            prop_assert!(vec3::dot(t1, t2).abs() < 1e-12);
            prop_assert!(vec3::dot(t1, n).abs() < 1e-12);
            prop_assert!(vec3::dot(t2, n).abs() < 1e-12);
        }

        #[test]
        fn step_invariants_on_random_states(seed in any::<u64>(), kappa in 0.0f64..1.5, tau in 0.05f64..0.4) {
            let mesh = square_grid(3, 2.0);
            let alpha = 1.0;
            let stepper = Stepper::new(&mesh, EnergyModel::thin_film(kappa, AppliedField::default()), alpha, config(tau)).unwrap();
            let m0 = random_unit_field(mesh.n_vertices(), seed);
            let out = stepper.evolve(&m0, &mut NullSink).unwrap();
            let mut prev = out.series[0].energy.total;
            for d in &out.series[1..] {
                let g = d.energy.total;
                prop_assert!(d.energy_law_residual.abs() <= 1e-10 * prev.abs().max(1.0));
                prop_assert!(d.tangency_defect <= 1e-10);
                prop_assert!(d.nodal_law_defect <= 1e-12);
                prop_assert!(g <= prev + 1e-12 * prev.abs());
                let rel = (d.constraint_l1 - d.constraint_budget).abs() / d.constraint_budget.max(f64::MIN_POSITIVE);
                prop_assert!(rel <= 1e-12 || d.constraint_budget == 0.0);
                prev = g;
            }
        }
    }
}
