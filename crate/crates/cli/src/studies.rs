//! Refinement studies and run-level invariant summaries.

use dmifilm::dynamics::{EvolveOutcome, NullSink, SimConfig, Stepper};
use dmifilm::gamma::fit_order;
use dmifilm::{AppliedField, MaterialParams, NodalVectorField, Result, TriMesh};

/// Invariants of a finished run, worst case over its steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunInvariants {
    pub steps: usize,
    /// `max |residual| / max(1, |G(m_i)|)`.
    pub energy_law: f64,
    /// Steps with `G(m_{i+1}) > G(m_i) + 1e-12 |G(m_i)|`.
    pub decay_violations: usize,
    /// Steps where the total increased at all.
    pub strict_increases: usize,
    /// `|constraint_l1 − τ²Σ‖v‖²_h| / τ²Σ‖v‖²_h` at the final step.
    pub constraint_identity: f64,
    pub nodal_law: f64,
    pub tangency: f64,
}

pub fn summarize(outcome: &EvolveOutcome) -> RunInvariants {
    let s = &outcome.series;
    let mut inv = RunInvariants {
        steps: s.len() - 1,
        energy_law: 0.0,
        decay_violations: 0,
        strict_increases: 0,
        constraint_identity: 0.0,
        nodal_law: 0.0,
        tangency: 0.0,
    };
    for w in s.windows(2) {
        let g0 = w[0].energy.total;
        let d = &w[1];
        inv.energy_law = inv.energy_law.max(d.energy_law_residual.abs() / g0.abs().max(1.0));
        if d.energy.total > g0 + 1e-12 * g0.abs() {
            inv.decay_violations += 1;
        }
        if d.energy.total > g0 {
            inv.strict_increases += 1;
        }
        inv.nodal_law = inv.nodal_law.max(d.nodal_law_defect);
        inv.tangency = inv.tangency.max(d.tangency_defect);
    }
    if let Some(last) = s.last().filter(|d| d.step > 0) {
        let b = last.constraint_budget;
        inv.constraint_identity = if b > 0.0 {
            (last.constraint_l1 - b).abs() / b
        } else {
            last.constraint_l1
        };
    }
    inv
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintStudy {
    pub taus: Vec<f64>,
    /// Final `∫I_h[| |m|² − 1 |]` per step size.
    pub drifts: Vec<f64>,
    /// Slope of log drift against log τ.
    pub order: Option<f64>,
    pub runs: Vec<RunInvariants>,
}

/// Final constraint violation for each step size on a common horizon.
pub fn constraint_order_study(
    mesh: &TriMesh,
    params: &MaterialParams,
    m0: &NodalVectorField,
    taus: &[f64],
    horizon: f64,
) -> Result<ConstraintStudy> {
    let mut drifts = Vec::with_capacity(taus.len());
    let mut runs = Vec::with_capacity(taus.len());
    for &tau in taus {
        let cfg = SimConfig {
            tau,
            t_end: horizon,
            ..SimConfig::default()
        };
        let out = Stepper::thin_film(mesh, params, AppliedField::default(), cfg)?.evolve(m0, &mut NullSink)?;
        drifts.push(out.series.last().unwrap().constraint_l1);
        runs.push(summarize(&out));
    }
    let order = fit_order(taus, &drifts);
    Ok(ConstraintStudy {
        taus: taus.to_vec(),
        drifts,
        order,
        runs,
    })
}
