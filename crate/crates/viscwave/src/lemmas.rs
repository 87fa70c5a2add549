//! Seeded randomized trials of the Wiener-space inequalities.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::spectral::SpectrumField;
use crate::strip::{DepthGrid, StripField};
use crate::wiener::{self, InequalityReport, QUADRATURE_SLACK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    ProductRule,
    PowerRule,
    Interpolation,
    InterpolationTechnical,
    Composition,
    CompositionSquared,
    Trace,
}

impl Lemma {
    pub const ALL: [Lemma; 7] = [
        Lemma::ProductRule,
        Lemma::PowerRule,
        Lemma::Interpolation,
        Lemma::InterpolationTechnical,
        Lemma::Composition,
        Lemma::CompositionSquared,
        Lemma::Trace,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Lemma::ProductRule => "product_rule",
            Lemma::PowerRule => "power_rule",
            Lemma::Interpolation => "interpolation",
            Lemma::InterpolationTechnical => "interpolation_technical",
            Lemma::Composition => "composition",
            Lemma::CompositionSquared => "composition_squared",
            Lemma::Trace => "trace",
        }
    }

    /// The squared-denominator composition line is informational only.
    pub fn mandatory(self) -> bool {
        !matches!(self, Lemma::CompositionSquared)
    }

    fn stream(self) -> u64 {
        self as u64 + 1
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub lemma: &'static str,
    pub trial: usize,
    pub params: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

impl TrialRecord {
    fn new(lemma: Lemma, trial: usize, params: String, rep: InequalityReport) -> Self {
        Self {
            lemma: lemma.id(),
            trial,
            params,
            lhs: rep.lhs,
            rhs: rep.rhs,
            margin: rep.margin,
            holds: rep.holds,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaSummary {
    pub lemma: &'static str,
    pub mandatory: bool,
    pub trials: usize,
    pub violations: usize,
    pub worst_ratio: f64,
}

const N: usize = 32;
const RS: [f64; 3] = [0.0, 1.0, 2.0];
const LAMBDAS: [f64; 2] = [0.0, 0.3];

fn pick<T: Copy>(rng: &mut ChaCha8Rng, xs: &[T]) -> T {
    xs[rng.random_range(0..xs.len())]
}

/// Random real trig polynomial on modes 0..=band with a random exponential
/// envelope and overall scale.
pub fn random_trig(rng: &mut ChaCha8Rng, band: usize, zero_mean: bool) -> SpectrumField {
    let sigma = rng.random_range(0.0..1.0);
    let scale = 10f64.powf(rng.random_range(-2.0..1.0));
    let first = if zero_mean { 1 } else { 0 };
    let modes: Vec<(usize, Complex64)> = (first..=band)
        .map(|k| {
            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            (k, c * scale * (-sigma * k as f64).exp())
        })
        .collect();
    SpectrumField::from_modes(N, &modes).expect("band fits")
}

fn product_trial(rng: &mut ChaCha8Rng, trial: usize) -> Result<TrialRecord> {
    let band = rng.random_range(1..=8);
    let f = random_trig(rng, band, false);
    let g = random_trig(rng, band, false);
    let (r, s, lam) = (pick(rng, &RS), pick(rng, &RS), pick(rng, &LAMBDAS));
    let rep = wiener::check_product_rule(&f, &g, r, s, lam)?;
    Ok(TrialRecord::new(Lemma::ProductRule, trial, format!("r={r} s={s} lambda={lam} band={band}"), rep))
}

fn power_trial(rng: &mut ChaCha8Rng, trial: usize) -> Result<TrialRecord> {
    let band = rng.random_range(1..=4);
    let v = random_trig(rng, band, false);
    let (r, s, lam) = (pick(rng, &RS), pick(rng, &RS), pick(rng, &LAMBDAS));
    let n = rng.random_range(2..=4u32);
    let rep = wiener::check_power_rule(&v, r, s, lam, n)?;
    Ok(TrialRecord::new(Lemma::PowerRule, trial, format!("r={r} s={s} lambda={lam} n={n} band={band}"), rep))
}

fn interpolation_trial(rng: &mut ChaCha8Rng, trial: usize) -> Result<TrialRecord> {
    let band = rng.random_range(1..=10);
    let v = random_trig(rng, band, false);
    let s1 = rng.random_range(0.0..2.0);
    let s2 = s1 + rng.random_range(0.0..2.0);
    let theta = pick(rng, &[0.25, 0.5, 0.75]);
    let lam = pick(rng, &LAMBDAS);
    let rep = wiener::check_interpolation_theta(&v, s1, s2, theta, lam)?;
    Ok(TrialRecord::new(
        Lemma::Interpolation,
        trial,
        format!("s1={s1:.4} s2={s2:.4} theta={theta} lambda={lam}"),
        rep,
    ))
}

fn technical_trial(rng: &mut ChaCha8Rng, trial: usize) -> Result<TrialRecord> {
    let band = rng.random_range(1..=10);
    let f = random_trig(rng, band, true);
    let s = rng.random_range(0.0..3.0);
    let lam = pick(rng, &LAMBDAS);
    let rep = wiener::check_interpolation(&f, s, lam)?;
    Ok(TrialRecord::new(Lemma::InterpolationTechnical, trial, format!("s={s:.4} lambda={lam}"), rep))
}

fn composition_trials(rng: &mut ChaCha8Rng, trial: usize) -> Result<(TrialRecord, TrialRecord)> {
    let band = rng.random_range(1..=6);
    let s = pick(rng, &[0.0, 0.5, 1.0, 1.5, 2.0]);
    let lam = pick(rng, &LAMBDAS);
    let raw = random_trig(rng, band, false);
    let cap = 1.0f64.min(1.0 / wiener::constant_k(s)?);
    let target = rng.random_range(0.01..0.95) * cap;
    let v = raw.scale(target / wiener::wiener_norm(&raw, 0.0, lam)?);
    let params = format!("s={s} lambda={lam} v0={target:.4} band={band}");
    let first = wiener::check_composition(&v, s, lam)?;
    let second = wiener::check_composition_squared(&v, s, lam)?;
    Ok((
        TrialRecord::new(Lemma::Composition, trial, params.clone(), first),
        TrialRecord::new(Lemma::CompositionSquared, trial, params, second),
    ))
}

/// Random decaying strip field u(n,x₂) = Σ c e^{b x₂} with its exact ∂₂u.
fn trace_trial(rng: &mut ChaCha8Rng, trial: usize, grid: DepthGrid) -> Result<TrialRecord> {
    let band = rng.random_range(1..=6);
    let terms: Vec<Vec<(Complex64, f64)>> = (0..N / 2)
        .map(|k| {
            if k > band {
                return Vec::new();
            }
            (0..rng.random_range(1..=3))
                .map(|_| {
                    let im = if k == 0 { 0.0 } else { rng.random_range(-1.0..1.0) };
                    (Complex64::new(rng.random_range(-1.0..1.0), im), rng.random_range(0.5..4.0))
                })
                .collect()
        })
        .collect();
    let u = StripField::from_fn(N, grid, |k, z| terms[k].iter().map(|&(c, b)| c * (b * z).exp()).sum())?;
    let du = StripField::from_fn(N, grid, |k, z| terms[k].iter().map(|&(c, b)| c * b * (b * z).exp()).sum())?;
    let s = pick(rng, &RS);
    let lam = pick(rng, &LAMBDAS);
    let rep = wiener::check_trace_pair(&u.trace(), &du, s, lam, QUADRATURE_SLACK)?;
    Ok(TrialRecord::new(Lemma::Trace, trial, format!("s={s} lambda={lam} band={band}"), rep))
}

fn rng_for(seed: u64, lemma: Lemma) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(lemma.stream());
    rng
}

/// Runs `trials` trials of every inequality family. Each family draws from
/// its own ChaCha stream, so families are reproducible independently.
pub fn run_suite(trials: usize, seed: u64) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    let mut rng = rng_for(seed, Lemma::ProductRule);
    for t in 0..trials {
        out.push(product_trial(&mut rng, t)?);
    }
    let mut rng = rng_for(seed, Lemma::PowerRule);
    for t in 0..trials {
        out.push(power_trial(&mut rng, t)?);
    }
    let mut rng = rng_for(seed, Lemma::Interpolation);
    for t in 0..trials {
        out.push(interpolation_trial(&mut rng, t)?);
    }
    let mut rng = rng_for(seed, Lemma::InterpolationTechnical);
    for t in 0..trials {
        out.push(technical_trial(&mut rng, t)?);
    }
    let mut rng = rng_for(seed, Lemma::Composition);
    let mut squared = Vec::with_capacity(trials);
    for t in 0..trials {
        let (a, b) = composition_trials(&mut rng, t)?;
        out.push(a);
        squared.push(b);
    }
    out.extend(squared);
    let grid = DepthGrid::new(40.0, 4096)?;
    let mut rng = rng_for(seed, Lemma::Trace);
    for t in 0..trials {
        out.push(trace_trial(&mut rng, t, grid)?);
    }
    Ok(out)
}

pub fn summarize(records: &[TrialRecord]) -> Vec<LemmaSummary> {
    Lemma::ALL
        .iter()
        .filter_map(|&lemma| {
            let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.lemma == lemma.id()).collect();
            if rows.is_empty() {
                return None;
            }
            let worst = rows
                .iter()
                .map(|r| if r.lhs == 0.0 { 0.0 } else { r.lhs / r.rhs })
                .fold(0.0, f64::max);
            Some(LemmaSummary {
                lemma: lemma.id(),
                mandatory: lemma.mandatory(),
                trials: rows.len(),
                violations: rows.iter().filter(|r| !r.holds).count(),
                worst_ratio: worst,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_is_deterministic() {
        let a = run_suite(5, 42).unwrap();
        let b = run_suite(5, 42).unwrap();
        assert_eq!(a.len(), 35);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.lhs.to_bits(), y.lhs.to_bits());
            assert_eq!(x.params, y.params);
        }
    }

    #[test]
    fn summary_counts() {
        let recs = run_suite(3, 1).unwrap();
        let sum = summarize(&recs);
        assert_eq!(sum.len(), 7);
        assert!(sum.iter().all(|s| s.trials == 3));
        assert!(!sum.iter().find(|s| s.lemma == "composition_squared").unwrap().mandatory);
    }
}
