//! Validation suites behind the CLI subcommands. Each returns its table
//! rows together with verdicts; writing is left to the caller.

use std::path::Path;

use serde::Serialize;

use crate::elliptic::validate::{self, EstimateRecord, KernelBoundRecord, ManufacturedPoint};
use crate::elliptic::Quadrature;
use crate::error::Result;
use crate::evolution::{linear_exact, Integrator, ModelParams, SimState, SolverSettings};
use crate::lemmas::{self, LemmaSummary, TrialRecord};
use crate::runner::{write_csv, write_jsonl, Verdict};
use crate::spectral::SpectrumField;

pub const LINEAR_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinearRow {
    pub k: usize,
    pub alpha: f64,
    pub t_final: f64,
    pub dt: f64,
    pub steps: usize,
    /// max over steps of |u − u_exact|/|u_exact| for u = (ξ̂_k, ĥ_k)
    pub max_rel_error: f64,
    /// max over steps of Σ_{j≠k}|û_j| relative to the initial |u_k|
    pub max_leakage: f64,
}

/// Full right-hand side at ε = 0 against exp(tM(k)), started from
/// h = cos kx, ξ = sin kx.
pub fn linear_validate(alpha: f64, modes: &[usize], t_final: f64, dt: f64) -> Result<Vec<LinearRow>> {
    let mut rows = Vec::new();
    for &k in modes {
        let n = (2 * k + 2).next_multiple_of(8).max(16);
        let params = ModelParams { alpha, epsilon: 0.0, kappa: 0.0, mu: 0.0 };
        let int = Integrator::new(params, SolverSettings { n_z: 64, ..Default::default() })?;
        let h0 = SpectrumField::cos_mode(n, k, 1.0)?;
        let xi0 = SpectrumField::sin_mode(n, k, 1.0)?;
        let (x0, y0) = (xi0.half()[k], h0.half()[k]);
        let mut state = SimState::new(h0, xi0, 0.0)?;
        let n_steps = (t_final / dt).round() as usize;
        let mut worst = 0.0f64;
        let mut leak = 0.0f64;
        let size0 = (x0.norm_sqr() + y0.norm_sqr()).sqrt();
        for i in 1..=n_steps {
            let step = if i == n_steps { t_final - state.t } else { dt };
            state = int.step(&mut state, step)?;
            let (xe, ye) = linear_exact(k, alpha, state.t, x0, y0);
            let (xs, ys) = (state.xi.half()[k], state.h.half()[k]);
            let err = ((xs - xe).norm_sqr() + (ys - ye).norm_sqr()).sqrt();
            let size = (xe.norm_sqr() + ye.norm_sqr()).sqrt();
            worst = worst.max(err / size);
            let stray: f64 = (0..=n / 2).filter(|&j| j != k).map(|j| state.xi.half()[j].norm() + state.h.half()[j].norm()).sum();
            leak = leak.max(stray / size0);
        }
        rows.push(LinearRow { k, alpha, t_final, dt, steps: n_steps, max_rel_error: worst, max_leakage: leak });
    }
    Ok(rows)
}

pub fn linear_verdicts(rows: &[LinearRow]) -> Vec<Verdict> {
    rows.iter()
        .map(|r| Verdict {
            property: format!("linear_fidelity_k{}", r.k),
            mandatory: true,
            holds: r.max_rel_error <= LINEAR_TOL,
            lhs: r.max_rel_error,
            rhs: LINEAR_TOL,
            detail: format!("alpha = {}, dt = {}, T = {}", r.alpha, r.dt, r.t_final),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ManufacturedRow {
    pub quadrature: &'static str,
    pub n_z: usize,
    pub max_error: f64,
    pub trace_error: f64,
    /// log₂ of the error ratio against the previous row
    pub order: f64,
}

pub const MANUFACTURED_DEPTH: f64 = 8.0;
pub const MANUFACTURED_NZ: [usize; 4] = [128, 256, 512, 1024];
pub const MANUFACTURED_TOL: f64 = 1e-4;

pub fn manufactured_rows() -> Result<Vec<ManufacturedRow>> {
    let mut rows = Vec::new();
    for (name, q) in [("linear", Quadrature::Linear), ("cubic", Quadrature::Cubic)] {
        let (pts, orders): (Vec<ManufacturedPoint>, Vec<f64>) = validate::manufactured_study(MANUFACTURED_DEPTH, &MANUFACTURED_NZ, q)?;
        for (i, p) in pts.iter().enumerate() {
            rows.push(ManufacturedRow {
                quadrature: name,
                n_z: p.n_z,
                max_error: p.max_error,
                trace_error: p.trace_error,
                order: if i == 0 { f64::NAN } else { orders[i - 1] },
            });
        }
    }
    Ok(rows)
}

pub struct EllipticReport {
    pub manufactured: Vec<ManufacturedRow>,
    pub estimates: Vec<EstimateRecord>,
    pub kernels: Vec<KernelBoundRecord>,
    pub verdicts: Vec<Verdict>,
}

pub fn elliptic_validate(trials: usize, seed: u64) -> Result<EllipticReport> {
    let manufactured = manufactured_rows()?;
    let estimates = validate::estimate_ensemble(trials, seed)?;
    let kernels = validate::kernel_bounds(8, 3);
    let mut verdicts = Vec::new();
    let at512 = manufactured.iter().find(|r| r.quadrature == "linear" && r.n_z == 512).expect("512 is in the study");
    verdicts.push(Verdict {
        property: "manufactured_error".into(),
        mandatory: true,
        holds: at512.max_error <= MANUFACTURED_TOL,
        lhs: at512.max_error,
        rhs: MANUFACTURED_TOL,
        detail: "linear rule, N_z = 512, depth 8".into(),
    });
    let orders: Vec<f64> = manufactured.iter().filter(|r| r.quadrature == "linear" && r.order.is_finite()).map(|r| r.order).collect();
    let worst = orders.iter().map(|o| (o - 2.0).abs()).fold(0.0, f64::max);
    verdicts.push(Verdict {
        property: "manufactured_order".into(),
        mandatory: true,
        holds: worst <= 0.1,
        lhs: worst,
        rhs: 0.1,
        detail: format!("largest |order - 2| under N_z doubling, orders {orders:?}"),
    });
    for est in [1u8, 2] {
        let rows: Vec<&EstimateRecord> = estimates.iter().filter(|r| r.estimate == est).collect();
        let worst = rows.iter().map(|r| if r.lhs == 0.0 { 0.0 } else { r.lhs / r.rhs }).fold(0.0, f64::max);
        let bad = rows.iter().filter(|r| !r.holds).count();
        verdicts.push(Verdict {
            property: format!("elliptic_estimate_{est}"),
            mandatory: true,
            holds: bad == 0,
            lhs: worst,
            rhs: 1.0,
            detail: format!("{bad} violations in {} checks over {trials} fields", rows.len()),
        });
    }
    let bad = kernels.iter().filter(|r| !r.holds).count();
    let worst = kernels.iter().map(|r| r.value / r.bound).fold(0.0, f64::max);
    verdicts.push(Verdict {
        property: "kernel_bounds".into(),
        mandatory: true,
        holds: bad == 0,
        lhs: worst,
        rhs: 1.0,
        detail: format!("{bad} violations in {} kernel checks", kernels.len()),
    });
    Ok(EllipticReport { manufactured, estimates, kernels, verdicts })
}

pub fn write_elliptic(dir: &Path, r: &EllipticReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&dir.join("manufactured.csv"), &r.manufactured)?;
    write_csv(&dir.join("estimates.csv"), &r.estimates)?;
    write_csv(&dir.join("kernel_bounds.csv"), &r.kernels)?;
    write_jsonl(&dir.join("verdicts.jsonl"), &r.verdicts)
}

pub struct LintReport {
    pub trials: Vec<TrialRecord>,
    pub summary: Vec<LemmaSummary>,
    pub verdicts: Vec<Verdict>,
}

pub fn lint_inequalities(trials: usize, seed: u64) -> Result<LintReport> {
    let records = lemmas::run_suite(trials, seed)?;
    let summary = lemmas::summarize(&records);
    let verdicts = summary
        .iter()
        .map(|s| Verdict {
            property: s.lemma.into(),
            mandatory: s.mandatory,
            holds: s.violations == 0,
            lhs: s.worst_ratio,
            rhs: 1.0,
            detail: format!("{} violations in {} trials", s.violations, s.trials),
        })
        .collect();
    Ok(LintReport { trials: records, summary, verdicts })
}

pub fn write_lint(dir: &Path, r: &LintReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&dir.join("trials.csv"), &r.trials)?;
    write_csv(&dir.join("summary.csv"), &r.summary)?;
    write_jsonl(&dir.join("verdicts.jsonl"), &r.verdicts)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_validation_is_exact() {
        let rows = linear_validate(3.0, &[1, 2], 0.1, 1e-3).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.max_rel_error < 1e-10, "{r:?}");
        }
        assert!(linear_verdicts(&rows).iter().all(|v| v.holds));
    }

    #[test]
    fn lint_reports_each_family() {
        let r = lint_inequalities(4, 9).unwrap();
        assert_eq!(r.verdicts.len(), 7);
        assert_eq!(r.trials.len(), 28);
    }
}
