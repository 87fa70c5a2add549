//! Wiener-algebra norms |·|_{s,λ}, Wiener–Sobolev strip norms, L²-Sobolev
//! norms, and the inequality checks built on them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{padded_len, SpectrumField};
use crate::strip::{StripField, StripNorm};

/// Relative slack for analytic inequalities.
pub const ANALYTIC_SLACK: f64 = 1e-9;
/// Relative slack for inequalities evaluated by depth quadrature.
pub const QUADRATURE_SLACK: f64 = 1e-6;
/// Round-off floor relative to the largest coefficient.
pub const NOISE_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSpec {
    pub s: f64,
    pub lambda: f64,
    pub k: u8,
}

impl NormSpec {
    pub fn new(s: f64, lambda: f64, k: u8) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) || !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("need s, λ ≥ 0, got s = {s}, λ = {lambda}")));
        }
        if k > 3 {
            return Err(Error::Config(format!("vertical derivative count {k} exceeds 3")));
        }
        Ok(Self { s, lambda, k })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub constant_used: f64,
    pub holds: bool,
    pub margin: f64,
}

impl InequalityReport {
    pub fn new(lhs: f64, rhs: f64, constant_used: f64, slack: f64) -> Self {
        Self {
            lhs,
            rhs,
            constant_used,
            holds: lhs <= rhs * (1.0 + slack),
            margin: rhs - lhs,
        }
    }

    /// lhs/rhs, with 0/0 read as 0.
    pub fn ratio(&self) -> f64 {
        if self.lhs == 0.0 {
            0.0
        } else {
            self.lhs / self.rhs
        }
    }
}

fn weight(k: usize, s: f64, lambda: f64) -> f64 {
    let kf = k as f64;
    (1.0 + kf).powf(s) * (lambda * kf).exp()
}

/// |v|_{s,λ} = Σ_n (1+|n|)^s e^{λ|n|} |v̂(n)|
pub fn wiener_norm(f: &SpectrumField, s: f64, lambda: f64) -> Result<f64> {
    f.check_finite()?;
    let mut total = 0.0;
    for (k, c) in f.half().iter().enumerate() {
        let mult = if k == 0 { 1.0 } else { 2.0 };
        total += mult * weight(k, s, lambda) * c.norm();
    }
    Ok(total)
}

/// f with coefficients at or below NOISE_FLOOR·max|f̂| set to zero. The
/// weights e^{λ|n|} of time-weighted norms would otherwise amplify FFT
/// round-off in the top modes past the resolved content.
pub fn resolved(f: &SpectrumField) -> SpectrumField {
    let floor = NOISE_FLOOR * f.max_abs_coeff();
    let half = f.half().iter().map(|&c| if c.norm() > floor { c } else { c * 0.0 }).collect();
    SpectrumField::from_half(f.n_modes(), half).expect("same shape")
}

/// |f|_{s,λ} over the resolved coefficients.
pub fn resolved_norm(f: &SpectrumField, s: f64, lambda: f64) -> Result<f64> {
    wiener_norm(&resolved(f), s, lambda)
}

/// |h|_s = (Σ_n (1+|n|^s)² |ĥ(n)|²)^{1/2}
pub fn sobolev_norm(f: &SpectrumField, s: f64) -> Result<f64> {
    f.check_finite()?;
    let mut total = 0.0;
    for (k, c) in f.half().iter().enumerate() {
        let mult = if k == 0 { 1.0 } else { 2.0 };
        let w = 1.0 + (k as f64).powf(s);
        total += mult * w * w * c.norm_sqr();
    }
    Ok(total.sqrt())
}

/// Σ_n (1+|n|)^s e^{λ|n|} ∫|∂₂^k û(n,x₂)| dx₂, with ∂₂ taken by the
/// fourth-order stencil.
pub fn strip_norm(u: &StripField, spec: NormSpec) -> Result<StripNorm> {
    if u.grid().intervals() < 8 * spec.k as usize {
        return Err(Error::Config(format!(
            "{} depth intervals are too few for {} vertical derivatives",
            u.grid().intervals(),
            spec.k
        )));
    }
    let mut d = u.clone();
    for _ in 0..spec.k {
        d = d.dz_stencil();
    }
    Ok(d.weighted_abs_integral(spec.s, spec.lambda))
}

/// 𝓀_q: 1 on [0,1], 2^q above.
pub fn constant_k(q: f64) -> Result<f64> {
    if !(q >= 0.0) {
        return Err(Error::Domain(format!("𝓀_q needs q ≥ 0, got {q}")));
    }
    Ok(if q <= 1.0 { 1.0 } else { 2f64.powf(q) })
}

/// K_{r,s,n}: n on [0,1]², otherwise c(c^{n−1}−1)/(c−1) with c = 𝓀_r𝓀_s.
pub fn constant_big_k(r: f64, s: f64, n: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("K_(r,s,n) needs n ≥ 2, got {n}")));
    }
    let c = constant_k(r)? * constant_k(s)?;
    if r <= 1.0 && s <= 1.0 {
        return Ok(n as f64);
    }
    Ok(c * (c.powi(n as i32 - 1) - 1.0) / (c - 1.0))
}

/// 𝖦(v) = v/(1+v), evaluated on the padded grid.
pub fn compose_g(v: &SpectrumField) -> Result<SpectrumField> {
    let m = padded_len(v.n_modes());
    let samples = v.sample_on(m);
    let xs = SpectrumField::grid(m);
    let mut out = Vec::with_capacity(m);
    for (j, &x) in samples.iter().enumerate() {
        let d = 1.0 + x;
        if !(d > 0.0) {
            return Err(Error::Singular { index: j, x: xs[j], value: d });
        }
        out.push(x / d);
    }
    SpectrumField::project_samples(&out, v.n_modes())
}

fn even_at_least(n: usize) -> usize {
    n + n % 2
}

/// Exact product of band-limited fields, formed at doubled resolution.
fn full_product(f: &SpectrumField, g: &SpectrumField) -> Result<SpectrumField> {
    let n = 2 * f.n_modes().max(g.n_modes());
    f.resize(n)?.product(&g.resize(n)?)
}

/// |Λʳ(fg)|_{s,λ} ≤ 𝓀_s𝓀_r(|f|_{0,λ}|Λʳg|_{s,λ} + |Λʳf|_{s,λ}|g|_{0,λ}),
/// and the algebra bound |fg|_{0,λ} ≤ |f|_{0,λ}|g|_{0,λ} when r = s = 0.
pub fn check_product_rule(
    f: &SpectrumField,
    g: &SpectrumField,
    r: f64,
    s: f64,
    lambda: f64,
) -> Result<InequalityReport> {
    if r == 0.0 && s == 0.0 {
        return check_algebra_property(f, g, lambda);
    }
    let fg = full_product(f, g)?;
    let lhs = wiener_norm(&fg.lambda_pow(r), s, lambda)?;
    let c = constant_k(s)? * constant_k(r)?;
    let rhs = c
        * (wiener_norm(f, 0.0, lambda)? * wiener_norm(&g.lambda_pow(r), s, lambda)?
            + wiener_norm(&f.lambda_pow(r), s, lambda)? * wiener_norm(g, 0.0, lambda)?);
    Ok(InequalityReport::new(lhs, rhs, c, ANALYTIC_SLACK))
}

/// |fg|_{0,λ} ≤ |f|_{0,λ}|g|_{0,λ}
pub fn check_algebra_property(f: &SpectrumField, g: &SpectrumField, lambda: f64) -> Result<InequalityReport> {
    let lhs = wiener_norm(&full_product(f, g)?, 0.0, lambda)?;
    let rhs = wiener_norm(f, 0.0, lambda)? * wiener_norm(g, 0.0, lambda)?;
    Ok(InequalityReport::new(lhs, rhs, 1.0, ANALYTIC_SLACK))
}

/// |Λʳ(vⁿ)|_{s,λ} ≤ K_{r,s,n}|v|_{0,λ}^{n−1}|Λʳv|_{s,λ}
pub fn check_power_rule(v: &SpectrumField, r: f64, s: f64, lambda: f64, n: u32) -> Result<InequalityReport> {
    let big = even_at_least(v.n_modes() * n as usize);
    let vb = v.resize(big)?;
    let mut p = vb.clone();
    for _ in 1..n {
        p = p.product(&vb)?;
    }
    let lhs = wiener_norm(&p.lambda_pow(r), s, lambda)?;
    let k = constant_big_k(r, s, n)?;
    let rhs = k * wiener_norm(v, 0.0, lambda)?.powi(n as i32 - 1) * wiener_norm(&v.lambda_pow(r), s, lambda)?;
    Ok(InequalityReport::new(lhs, rhs, k, ANALYTIC_SLACK))
}

/// |v|_{s_θ,λ} ≤ |v|_{s₁,λ}^θ |v|_{s₂,λ}^{1−θ} with s_θ = θs₁ + (1−θ)s₂.
pub fn check_interpolation_theta(
    v: &SpectrumField,
    s1: f64,
    s2: f64,
    theta: f64,
    lambda: f64,
) -> Result<InequalityReport> {
    if !(0.0..=1.0).contains(&theta) || s1 > s2 {
        return Err(Error::Domain(format!("need θ ∈ [0,1] and s₁ ≤ s₂, got θ = {theta}, s₁ = {s1}, s₂ = {s2}")));
    }
    let st = theta * s1 + (1.0 - theta) * s2;
    let lhs = wiener_norm(v, st, lambda)?;
    let rhs = wiener_norm(v, s1, lambda)?.powf(theta) * wiener_norm(v, s2, lambda)?.powf(1.0 - theta);
    Ok(InequalityReport::new(lhs, rhs, 1.0, ANALYTIC_SLACK))
}

/// |f|_{s,λ} ≤ 2^{1+s/(s+1)} |f|_{0,λ}^{1/(s+1)} |Λf|_{s,λ}^{1−1/(s+1)} for zero-mean f.
pub fn check_interpolation(f: &SpectrumField, s: f64, lambda: f64) -> Result<InequalityReport> {
    if !f.is_zero_mean() {
        return Err(Error::Domain("interpolation estimate needs a zero-mean field".into()));
    }
    let lhs = wiener_norm(f, s, lambda)?;
    let c = 2f64.powf(1.0 + s / (s + 1.0));
    let a = 1.0 / (s + 1.0);
    let rhs = c * wiener_norm(f, 0.0, lambda)?.powf(a) * wiener_norm(&f.lambda(), s, lambda)?.powf(1.0 - a);
    Ok(InequalityReport::new(lhs, rhs, c, ANALYTIC_SLACK))
}

/// 𝖦∘v at a resolution where the neglected coefficients are below round-off.
pub fn compose_g_resolved(v: &SpectrumField) -> Result<SpectrumField> {
    let mut n = (4 * v.n_modes()).max(64);
    loop {
        let g = compose_g(&v.resize(n)?)?;
        let total = wiener_norm(&g, 0.0, 0.0)?;
        let tail: f64 = g.half()[n / 4..].iter().map(|c| 2.0 * c.norm()).sum();
        if tail <= 1e-15 * total.max(f64::MIN_POSITIVE) || n >= 1 << 16 {
            return Ok(g);
        }
        n *= 2;
    }
}

fn composition_inputs(v: &SpectrumField, s: f64, lambda: f64) -> Result<(f64, f64, f64, f64)> {
    let ks = constant_k(s)?;
    let v0 = wiener_norm(v, 0.0, lambda)?;
    if v0 >= 1.0f64.min(1.0 / ks) {
        return Err(Error::Domain(format!(
            "composition bound needs |v|_(0,λ) < min(1, 1/𝓀_s), got {v0}"
        )));
    }
    let lhs = resolved_norm(&compose_g_resolved(v)?, s, lambda)?;
    Ok((lhs, wiener_norm(v, s, lambda)?, v0, ks))
}

/// |𝖦∘v|_{s,λ} ≤ |v|_{s,λ}/(1 − 𝓀_s|v|_{0,λ})
pub fn check_composition(v: &SpectrumField, s: f64, lambda: f64) -> Result<InequalityReport> {
    let (lhs, vs, v0, ks) = composition_inputs(v, s, lambda)?;
    let c = 1.0 / (1.0 - ks * v0);
    Ok(InequalityReport::new(lhs, c * vs, c, ANALYTIC_SLACK))
}

/// The same composition estimate with the squared denominator
/// |v|_{s,λ}/(1 − 𝓀_s|v|_{0,λ})², which is what summing the power rule gives.
pub fn check_composition_squared(v: &SpectrumField, s: f64, lambda: f64) -> Result<InequalityReport> {
    let (lhs, vs, v0, ks) = composition_inputs(v, s, lambda)?;
    let c = 1.0 / (1.0 - ks * v0).powi(2);
    Ok(InequalityReport::new(lhs, c * vs, c, ANALYTIC_SLACK))
}

/// |u|_{x₂=0}|_{s,λ} ≤ ‖u‖_{𝒜^{s,1}_λ}, with ∂₂u supplied.
pub fn check_trace_pair(
    trace: &SpectrumField,
    du: &StripField,
    s: f64,
    lambda: f64,
    slack: f64,
) -> Result<InequalityReport> {
    let lhs = wiener_norm(trace, s, lambda)?;
    let rhs = du.weighted_abs_integral(s, lambda).value;
    Ok(InequalityReport::new(lhs, rhs, 1.0, slack))
}

/// Trace inequality with ∂₂u formed by the fourth-order stencil.
pub fn check_trace_inequality(u: &StripField, s: f64, lambda: f64) -> Result<InequalityReport> {
    check_trace_pair(&u.trace(), &u.dz_stencil(), s, lambda, QUADRATURE_SLACK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strip::DepthGrid;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cos1() -> SpectrumField {
        SpectrumField::cos_mode(16, 1, 1.0).unwrap()
    }

    fn random_field(seed: u64, n: usize, band: usize) -> SpectrumField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<(usize, Complex64)> = (0..=band)
            .map(|k| (k, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
            .collect();
        SpectrumField::from_modes(n, &modes).unwrap()
    }

    #[test]
    fn wiener_examples() {
        assert!((wiener_norm(&cos1(), 1.0, 0.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((wiener_norm(&cos1(), 0.0, 2f64.ln()).unwrap() - 2.0).abs() < 1e-15);
        let f = SpectrumField::cos_mode(16, 2, 0.3).unwrap();
        assert!((wiener_norm(&f, 2.0, 0.0).unwrap() - 2.7).abs() < 1e-14);
    }

    #[test]
    fn sobolev_examples() {
        assert!((sobolev_norm(&cos1(), 0.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let f = SpectrumField::cos_mode(16, 2, 1.0).unwrap();
        assert!((sobolev_norm(&f, 3.0).unwrap() - 9.0 / 2f64.sqrt()).abs() < 1e-13);
        assert_eq!(sobolev_norm(&SpectrumField::zeros(16).unwrap(), 2.0).unwrap(), 0.0);
    }

    #[test]
    fn strip_norm_examples() {
        let g = DepthGrid::new(8.0, 512).unwrap();
        let u = StripField::from_fn(16, g, |k, z| {
            Complex64::new(if k == 1 { z.exp() / 2.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let n0 = strip_norm(&u, NormSpec::new(0.0, 0.0, 0).unwrap()).unwrap();
        assert!((n0.value - 1.0).abs() < 1e-9, "{n0:?}");
        let n1 = strip_norm(&u, NormSpec::new(1.0, 0.0, 1).unwrap()).unwrap();
        assert!((n1.value - 2.0).abs() < 1e-7, "{n1:?}");
        let z = StripField::zeros(16, g).unwrap();
        assert_eq!(strip_norm(&z, NormSpec::new(1.0, 0.0, 2).unwrap()).unwrap().value, 0.0);
    }

    #[test]
    fn multiplier_lemma_for_poisson_semigroup() {
        // ‖e^{x₂Λ}u‖_{𝒜^{s,j}} ≤ |Λ^{j−1}u|_{s,λ}, with equality off the zero mode
        let g = DepthGrid::new(20.0, 4096).unwrap();
        let xi = random_field(5, 16, 5).without_mean();
        let ext = StripField::from_fn(16, g, |k, z| xi.half()[k] * (k as f64 * z).exp()).unwrap();
        for j in 1..=2u8 {
            let lhs = strip_norm(&ext, NormSpec::new(1.0, 0.2, j).unwrap()).unwrap().value;
            let rhs = wiener_norm(&xi.lambda_pow(j as f64 - 1.0), 1.0, 0.2).unwrap();
            assert!((lhs - rhs).abs() <= 1e-6 * rhs, "j = {j}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn constants_follow_the_display() {
        assert_eq!(constant_k(0.5).unwrap(), 1.0);
        assert_eq!(constant_k(3.0).unwrap(), 8.0);
        assert_eq!(constant_big_k(0.0, 0.7, 5).unwrap(), 5.0);
        assert_eq!(constant_big_k(2.0, 2.0, 2).unwrap(), 16.0);
        assert!(constant_big_k(0.0, 0.0, 1).is_err());
    }

    #[test]
    fn compose_examples() {
        let half = SpectrumField::constant(16, 0.5).unwrap();
        assert!((compose_g(&half).unwrap().mean() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(compose_g(&SpectrumField::zeros(16).unwrap()).unwrap().max_abs_coeff(), 0.0);
        let v = SpectrumField::cos_mode(32, 1, 0.2).unwrap();
        let mut series = SpectrumField::zeros(32).unwrap();
        let mut power = v.clone();
        for m in 1..60 {
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            series = series.axpy(sign, &power);
            power = power.product(&v).unwrap();
        }
        assert!(compose_g(&v).unwrap().max_diff(&series) < 1e-14);
        let bad = SpectrumField::cos_mode(16, 1, 1.5).unwrap();
        assert!(matches!(compose_g(&bad), Err(Error::Singular { .. })));
    }

    #[test]
    fn product_rule_equality_case() {
        let rep = check_product_rule(&cos1(), &cos1(), 0.0, 0.0, 0.0).unwrap();
        assert!((rep.lhs - 1.0).abs() < 1e-15);
        assert!((rep.rhs - 1.0).abs() < 1e-15);
        assert!(rep.holds);
        let general = check_product_rule(&cos1(), &cos1(), 0.0, 0.5, 0.0).unwrap();
        assert!((general.rhs - 2.0 * 2f64.powf(0.5)).abs() < 1e-14);
        let zero = SpectrumField::zeros(16).unwrap();
        let rep = check_product_rule(&cos1(), &zero, 1.0, 1.0, 0.0).unwrap();
        assert_eq!((rep.lhs, rep.rhs), (0.0, 0.0));
        assert!(rep.holds);
    }

    #[test]
    fn interpolation_hand_value() {
        let rep = check_interpolation(&cos1(), 1.0, 0.0).unwrap();
        assert!((rep.lhs - 2.0).abs() < 1e-15);
        assert!((rep.rhs - 4.0).abs() < 1e-14);
        assert!(check_interpolation(&SpectrumField::constant(16, 1.0).unwrap(), 1.0, 0.0).is_err());
    }

    #[test]
    fn composition_counterexample_is_reported() {
        let v = SpectrumField::cos_mode(16, 1, 0.1).unwrap();
        let rep = check_composition(&v, 1.0, 0.0).unwrap();
        assert!((rep.lhs - 0.222783).abs() < 1e-5, "{rep:?}");
        assert!(!rep.holds);
        assert!(check_composition_squared(&v, 1.0, 0.0).unwrap().holds);
    }

    #[test]
    fn trace_equality_case() {
        let g = DepthGrid::new(8.0, 512).unwrap();
        let u = StripField::from_fn(16, g, |k, z| {
            Complex64::new(if k == 1 { z.exp() / 2.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let rep = check_trace_inequality(&u, 0.0, 0.0).unwrap();
        assert!((rep.lhs - 1.0).abs() < 1e-15);
        assert!((rep.rhs - 1.0).abs() < 1e-8);
        assert!(rep.holds);
    }

    proptest! {
        #[test]
        fn wiener_norm_is_a_norm(seed in 0u64..10_000, a in -3.0f64..3.0, s in 0.0f64..3.0, lam in 0.0f64..0.5) {
            let f = random_field(seed, 32, 10);
            let g = random_field(seed + 1, 32, 10);
            let nf = wiener_norm(&f, s, lam).unwrap();
            let ng = wiener_norm(&g, s, lam).unwrap();
            let hom = wiener_norm(&f.scale(a), s, lam).unwrap();
            prop_assert!((hom - a.abs() * nf).abs() <= 1e-12 * nf.max(1.0));
            prop_assert!(wiener_norm(&(&f + &g), s, lam).unwrap() <= (nf + ng) * (1.0 + 1e-12));
        }

        #[test]
        fn wiener_norm_monotone(seed in 0u64..10_000, s in 0.0f64..3.0, ds in 0.0f64..1.0, lam in 0.0f64..0.5) {
            let f = random_field(seed, 32, 10);
            let base = wiener_norm(&f, s, lam).unwrap();
            prop_assert!(wiener_norm(&f, s + ds, lam).unwrap() >= base);
            prop_assert!(wiener_norm(&f, s, lam + ds).unwrap() >= base);
        }

        #[test]
        fn hoelder_interpolation(seed in 0u64..10_000, s1 in 0.0f64..2.0, ds in 0.0f64..2.0, theta in 0.0f64..=1.0) {
            let f = random_field(seed, 32, 10);
            prop_assert!(check_interpolation_theta(&f, s1, s1 + ds, theta, 0.1).unwrap().holds);
        }
    }
}
