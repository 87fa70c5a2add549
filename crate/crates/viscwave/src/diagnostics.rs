//! Monitored quantities along trajectories: Sobolev energy, time-weighted
//! Wiener norms, analyticity radius and decay rate, with the property
//! checks built on them.

use serde::Serialize;

use crate::elliptic::EllipticSolution;
use crate::error::{Error, Result};
use crate::spectral::SpectrumField;
use crate::strip::StripField;
use crate::wiener::{self, resolved, resolved_norm, InequalityReport, NOISE_FLOOR};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagRecord {
    pub t: f64,
    pub sobolev_h3: f64,
    pub sobolev_xi3: f64,
    /// |h|_{1,μt}
    pub wiener_h: f64,
    /// |ξ|_{1,μt}
    pub wiener_xi: f64,
    pub energy: f64,
    /// NaN while the fit is undefined.
    pub radius: f64,
    pub lyapunov: f64,
}

/// |ξ|_{1,μt} + |h|_{1,μt}, over resolved coefficients.
pub fn lyapunov(h: &SpectrumField, xi: &SpectrumField, mu: f64, t: f64) -> Result<f64> {
    Ok(resolved_norm(xi, 1.0, mu * t)? + resolved_norm(h, 1.0, mu * t)?)
}

/// Σ_n (1+|n|)⁵ ∫(|∂₁φ̂|² + |∂₂φ̂|²) dx₂, the bulk stand-in for ‖∇φ‖²_{2.5}.
pub fn bulk_proxy(sol: &EllipticSolution) -> f64 {
    let phi = sol.phi();
    let dz = sol.dz_phi();
    let grid = phi.grid();
    let mut total = 0.0;
    for k in 0..phi.n_modes() / 2 {
        let kf = k as f64;
        let vals: Vec<f64> = phi
            .column(k)
            .iter()
            .zip(dz.column(k))
            .map(|(p, d)| kf * kf * p.norm_sqr() + d.norm_sqr())
            .collect();
        let w = (1.0 + kf).powi(5) * if k == 0 { 1.0 } else { 2.0 };
        total += w * simpson(&vals, grid.dz());
    }
    total
}

fn simpson(v: &[f64], h: f64) -> f64 {
    let n = v.len() - 1;
    let mut s = v[0] + v[n];
    for (j, x) in v.iter().enumerate().take(n).skip(1) {
        s += if j % 2 == 1 { 4.0 * x } else { 2.0 * x };
    }
    s * h / 3.0
}

/// One sample of the energy: the boundary part |h|₃² + |ξ|₃² and the bulk
/// proxy from the elliptic solve at the same time, if one was recorded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergySample {
    pub t: f64,
    pub boundary: f64,
    pub bulk: Option<f64>,
}

impl EnergySample {
    pub fn new(t: f64, h: &SpectrumField, xi: &SpectrumField, sol: Option<&EllipticSolution>) -> Result<Self> {
        let boundary = wiener::sobolev_norm(h, 3.0)?.powi(2) + wiener::sobolev_norm(xi, 3.0)?.powi(2);
        Ok(Self { t, boundary, bulk: sol.map(bulk_proxy) })
    }
}

/// Running max of the boundary part plus the trapezoid integral of the bulk
/// proxy; nondecreasing in t.
#[derive(Clone, Debug, Default)]
pub struct EnergyTracker {
    boundary_max: f64,
    integral: f64,
    last: Option<(f64, f64)>,
}

impl EnergyTracker {
    pub fn push(&mut self, s: &EnergySample) -> Result<f64> {
        let bulk = s.bulk.ok_or(Error::SnapshotGap { t: s.t })?;
        self.boundary_max = self.boundary_max.max(s.boundary);
        if let Some((t0, b0)) = self.last {
            self.integral += 0.5 * (s.t - t0) * (b0 + bulk);
        }
        self.last = Some((s.t, bulk));
        Ok(self.value())
    }

    pub fn value(&self) -> f64 {
        self.boundary_max + self.integral
    }
}

/// 𝓔 at the last sample with t ≤ up_to.
pub fn energy_functional(samples: &[EnergySample], up_to: f64) -> Result<f64> {
    let mut tr = EnergyTracker::default();
    for s in samples.iter().take_while(|s| s.t <= up_to) {
        tr.push(s)?;
    }
    Ok(tr.value())
}

pub const MIN_FIT_MODES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadiusFit {
    pub rho: f64,
    /// Coefficient of determination of the log-linear fit.
    pub r_squared: f64,
    pub modes: usize,
}

/// Least-squares slope of (x, y).
fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// ρ = −slope of log|f̂(n)| against n over the modes n ≥ 1 above the floor
/// (absolute; `None` means NOISE_FLOOR·max|f̂|). `None` if fewer than four
/// modes qualify.
pub fn radius_from_magnitudes(mags: &[f64], noise_floor: Option<f64>) -> Option<RadiusFit> {
    let top = mags.iter().skip(1).cloned().fold(0.0, f64::max);
    let floor = noise_floor.unwrap_or(NOISE_FLOOR * top);
    let (xs, ys): (Vec<f64>, Vec<f64>) = mags
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &m)| m > floor && m > 0.0)
        .map(|(k, m)| (k as f64, m.ln()))
        .unzip();
    if xs.len() < MIN_FIT_MODES {
        return None;
    }
    let (slope, r_squared) = fit_line(&xs, &ys);
    Some(RadiusFit { rho: -slope, r_squared, modes: xs.len() })
}

pub fn analyticity_radius(f: &SpectrumField, noise_floor: Option<f64>) -> Option<RadiusFit> {
    let mags: Vec<f64> = f.half().iter().map(|c| c.norm()).collect();
    radius_from_magnitudes(&mags, noise_floor)
}

/// Radius of the pair (h, ξ), fitted on |ĥ(n)| + |ξ̂(n)|.
pub fn pair_radius(h: &SpectrumField, xi: &SpectrumField) -> Option<RadiusFit> {
    let mags: Vec<f64> = h.half().iter().zip(xi.half()).map(|(a, b)| a.norm() + b.norm()).collect();
    radius_from_magnitudes(&mags, None)
}

/// δ̂ = −slope of log L(t) over t ∈ window.
pub fn decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series.iter().cloned().filter(|&(t, _)| t >= window.0 && t <= window.1).collect();
    if pts.len() < 2 {
        return Err(Error::Domain(format!("fewer than two samples in [{}, {}]", window.0, window.1)));
    }
    if let Some(&(t, v)) = pts.iter().find(|&&(_, v)| !(v > 0.0)) {
        return Err(Error::Domain(format!("nonpositive value {v} at t = {t}")));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().map(|&(t, v)| (t, v.ln())).unzip();
    Ok(-fit_line(&xs, &ys).0)
}

/// One linear oscillation period 2π/√n of the slowest active mode.
pub fn transient_window(n_min: usize) -> f64 {
    2.0 * std::f64::consts::PI / (n_min.max(1) as f64).sqrt()
}

/// Lowest mode n ≥ 1 with a nonzero coefficient in h or ξ.
pub fn slowest_mode(h: &SpectrumField, xi: &SpectrumField) -> Option<usize> {
    (1..h.half().len()).find(|&k| h.half()[k].norm() > 0.0 || xi.half()[k].norm() > 0.0)
}

/// L(t_{i+1}) ≤ L(t_i)(1 + slack) for all pairs with t_i ≥ t_start. The
/// report carries the worst ratio L(t_{i+1})/L(t_i) against 1.
pub fn check_lyapunov_monotone(series: &[(f64, f64)], slack: f64, t_start: f64) -> InequalityReport {
    let mut worst = 0.0f64;
    for w in series.windows(2) {
        let ((t0, a), (_, b)) = (w[0], w[1]);
        if t0 < t_start {
            continue;
        }
        let r = if b == 0.0 {
            0.0
        } else if a == 0.0 {
            f64::INFINITY
        } else {
            b / a
        };
        worst = worst.max(r);
    }
    InequalityReport::new(worst, 1.0, 1.0, slack)
}

/// Data for one sample of the Wiener budget of |ξ|_{1,μt}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BudgetSample {
    pub t: f64,
    pub xi_norm: f64,
    /// −(α−μ)|Λ²ξ|_{1,μt} + |h|_{1,μt} + |N_ξ|_{1,μt}
    pub budget: f64,
}

impl BudgetSample {
    /// `nonlinear` is ξ_t minus its constant-coefficient part.
    pub fn new(
        t: f64,
        h: &SpectrumField,
        xi: &SpectrumField,
        nonlinear: &SpectrumField,
        alpha: f64,
        mu: f64,
    ) -> Result<Self> {
        let lam = mu * t;
        let xi_r = resolved(xi);
        let xi_norm = wiener::wiener_norm(&xi_r, 1.0, lam)?;
        let budget = -(alpha - mu) * wiener::wiener_norm(&xi_r.lambda_pow(2.0), 1.0, lam)?
            + resolved_norm(h, 1.0, lam)?
            + resolved_norm(nonlinear, 1.0, lam)?;
        Ok(Self { t, xi_norm, budget })
    }
}

/// Forward differences of |ξ|_{1,μt} against the larger endpoint budget,
/// padded by `slack` times the endpoint budget magnitudes. The report
/// carries the worst excess (difference minus bound) against 0.
pub fn check_budget(samples: &[BudgetSample], slack: f64) -> InequalityReport {
    let mut worst = f64::NEG_INFINITY;
    let mut scale = 0.0f64;
    for w in samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dt = b.t - a.t;
        if dt <= 0.0 {
            continue;
        }
        let measured = (b.xi_norm - a.xi_norm) / dt;
        let bound = a.budget.max(b.budget) + slack * (a.budget.abs() + b.budget.abs());
        worst = worst.max(measured - bound);
        scale = scale.max(a.budget.abs());
    }
    if worst == f64::NEG_INFINITY {
        worst = 0.0;
    }
    InequalityReport { lhs: worst, rhs: 0.0, constant_used: scale, holds: worst <= 0.0, margin: -worst }
}

/// Empirical C(s) in |A − Id|_{s,λ} ≤ C(s)|Λs|_{s,λ} at x₂ = 0, with
/// s = εh^κ the flattening trace. A − Id there has entries −s,₁/J₀ and
/// 1/J₀ − 1.
pub fn a_minus_id_ratio(s_trace: &SpectrumField, s: f64, lambda: f64) -> Result<Option<f64>> {
    let lam_s = s_trace.lambda();
    let denom = resolved_norm(&lam_s, s, lambda)?;
    if denom == 0.0 {
        return Ok(None);
    }
    let a = s_trace.d1();
    let e21 = SpectrumField::map_pointwise(&[&a, &lam_s], |v| -v[0] / (1.0 + v[1]))?;
    let e22 = SpectrumField::map_pointwise(&[&lam_s], |v| -v[0] / (1.0 + v[0]))?;
    let num = resolved_norm(&e21, s, lambda)? + resolved_norm(&e22, s, lambda)?;
    Ok(Some(num / denom))
}

/// Flags samples where the Lyapunov functional reaches the cap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmallnessMonitor {
    pub cap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmallnessFlag {
    pub t: f64,
    pub lyapunov: f64,
    pub cap: f64,
}

impl SmallnessMonitor {
    pub fn check(&self, t: f64, lyapunov: f64) -> Option<SmallnessFlag> {
        (!(lyapunov < self.cap)).then_some(SmallnessFlag { t, lyapunov, cap: self.cap })
    }
}

/// Σ_n (1+|n|)^s ∫|û|² dx₂ for a strip field; used in tests of the proxy.
pub fn strip_sq_norm(u: &StripField, s: f64) -> f64 {
    let dz = u.grid().dz();
    (0..u.n_modes() / 2)
        .map(|k| {
            let vals: Vec<f64> = u.column(k).iter().map(|c| c.norm_sqr()).collect();
            let w = (1.0 + k as f64).powf(s) * if k == 0 { 1.0 } else { 2.0 };
            w * simpson(&vals, dz)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{solve_phi1, solve_phi2, PicardOptions};
    use crate::geometry::build_geometry;
    use crate::strip::DepthGrid;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn geometric(n: usize, a: f64) -> SpectrumField {
        let modes: Vec<(usize, Complex64)> = (0..n / 2).map(|k| (k, Complex64::new((-a * k as f64).exp(), 0.0))).collect();
        SpectrumField::from_modes(n, &modes).unwrap()
    }

    #[test]
    fn radius_of_exponential_data() {
        let fit = analyticity_radius(&geometric(32, 0.7), None).unwrap();
        assert!((fit.rho - 0.7).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_mode_radius_is_undefined() {
        assert!(analyticity_radius(&SpectrumField::cos_mode(32, 3, 1.0).unwrap(), None).is_none());
        assert!(analyticity_radius(&SpectrumField::zeros(32).unwrap(), None).is_none());
    }

    #[test]
    fn decay_rate_of_exponential() {
        let series: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 0.02, 5.0 * (-3.0 * i as f64 * 0.02).exp())).collect();
        assert!((decay_rate(&series, (0.0, 1.0)).unwrap() - 3.0).abs() < 1e-12);
        let bad = vec![(0.0, 1.0), (0.1, 0.0)];
        assert!(matches!(decay_rate(&bad, (0.0, 1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_series_is_monotone() {
        let series: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.0)).collect();
        assert!(check_lyapunov_monotone(&series, 1e-6, 0.0).holds);
        let up = vec![(0.0, 1.0), (1.0, 1.1), (2.0, 1.0)];
        assert!(!check_lyapunov_monotone(&up, 1e-6, 0.0).holds);
        assert!(check_lyapunov_monotone(&up, 1e-6, 1.0).holds);
    }

    #[test]
    fn energy_of_zero_and_frozen_states() {
        let z = SpectrumField::zeros(16).unwrap();
        let s = EnergySample::new(0.0, &z, &z, None).unwrap();
        assert!(matches!(energy_functional(&[s], 1.0), Err(Error::SnapshotGap { .. })));
        let zs: Vec<EnergySample> = (0..5).map(|i| EnergySample { t: i as f64, boundary: 0.0, bulk: Some(0.0) }).collect();
        assert_eq!(energy_functional(&zs, 10.0).unwrap(), 0.0);
        let frozen: Vec<EnergySample> = (0..5).map(|i| EnergySample { t: i as f64 * 0.5, boundary: 2.0, bulk: Some(3.0) }).collect();
        for (i, _) in frozen.iter().enumerate() {
            let e = energy_functional(&frozen, i as f64 * 0.5).unwrap();
            assert!((e - (2.0 + 3.0 * 0.5 * i as f64)).abs() < 1e-14);
        }
    }

    #[test]
    fn bulk_proxy_of_harmonic_extension() {
        // φ = a e^{k z} sin kx: ∫|∇φ̂|² per sign of n is 2k²|a/2|²/(2k)
        let grid = DepthGrid::new(12.0, 512).unwrap();
        let (k, a) = (2usize, 0.3);
        let xi = SpectrumField::sin_mode(16, k, a).unwrap();
        let phi1 = solve_phi1(&xi, grid).unwrap();
        let b = build_geometry(&SpectrumField::zeros(16).unwrap(), grid, 0.1).unwrap();
        let sol = solve_phi2(&b, &phi1, &PicardOptions::default()).unwrap();
        let kf = k as f64;
        let exact = (1.0 + kf).powi(5) * 2.0 * (2.0 * kf * kf * (a / 2.0).powi(2) / (2.0 * kf));
        assert!((bulk_proxy(&sol) - exact).abs() < 2e-6 * exact, "{} {}", bulk_proxy(&sol), exact);
    }

    #[test]
    fn a_bound_ratio_is_small_for_small_data() {
        let s = SpectrumField::cos_mode(32, 2, 0.01).unwrap();
        let c = a_minus_id_ratio(&s, 1.0, 0.0).unwrap().unwrap();
        // to first order A − Id = (−s,₁, −Λs) and |∂₁s| = |Λs| for one mode
        assert!((c - 2.0).abs() < 0.05, "{c}");
        assert!(a_minus_id_ratio(&SpectrumField::zeros(32).unwrap(), 1.0, 0.0).unwrap().is_none());
    }

    #[test]
    fn budget_holds_for_exact_linear_decay() {
        // pure diffusion ξ̂(t) = e^{−αn²t} with h = 0: |ξ|₁ decays at the budget rate
        let alpha = 2.0;
        let samples: Vec<BudgetSample> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.01;
                let xi = SpectrumField::cos_mode(16, 1, (-alpha * t).exp()).unwrap();
                let zero = SpectrumField::zeros(16).unwrap();
                BudgetSample::new(t, &zero, &xi, &zero, alpha, 0.0).unwrap()
            })
            .collect();
        assert!(check_budget(&samples, 1e-6).holds);
    }

    #[test]
    fn smallness_monitor_flags_cap() {
        let m = SmallnessMonitor { cap: 0.1 };
        assert!(m.check(0.0, 0.05).is_none());
        assert!(m.check(1.0, 0.1).is_some());
        assert!(m.check(1.0, f64::NAN).is_some());
    }

    proptest! {
        #[test]
        fn radius_recovers_any_rate(a in 0.05f64..2.0, c in 0.1f64..10.0) {
            let f = geometric(64, a).scale(c);
            let fit = analyticity_radius(&f, None).unwrap();
            prop_assert!((fit.rho - a).abs() < 1e-9);
        }

        #[test]
        fn energy_is_nondecreasing(bs in proptest::collection::vec((0.0f64..5.0, 0.0f64..5.0), 2..20)) {
            let samples: Vec<EnergySample> = bs.iter().enumerate()
                .map(|(i, &(b, q))| EnergySample { t: i as f64 * 0.1, boundary: b, bulk: Some(q) })
                .collect();
            let mut tr = EnergyTracker::default();
            let mut last = 0.0;
            for s in &samples {
                let e = tr.push(s).unwrap();
                prop_assert!(e >= last);
                last = e;
            }
        }
    }
}
