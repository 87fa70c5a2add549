//! Run configuration: a TOML document with sections, parsed strictly and
//! validated with errors anchored to the offending line.

use std::path::PathBuf;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elliptic::Quadrature;
use crate::error::{Error, Result};
use crate::evolution::{ModelParams, SolverSettings};
use crate::spectral::SpectrumField;
use crate::wiener;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub initial: InitialData,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_modes: usize,
    #[serde(default = "default_depth")]
    pub depth: f64,
    #[serde(default = "default_n_z")]
    pub n_z: usize,
    #[serde(default)]
    pub quadrature: Quadrature,
}

fn default_depth() -> f64 {
    8.0
}

fn default_n_z() -> usize {
    256
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_final: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Zero,
    /// h = cos x + ½cos 2x, ξ = sin x + ½sin 2x, scaled to the amplitude.
    SmallTwoMode,
    /// Modes 1..=modes with coefficients e^{−σn} and seeded random phases.
    Geometric,
    /// Explicit mode lists in `h` and `xi`.
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub preset: Preset,
    /// Target |h₀|₁ + |ξ₀|₁; explicit data is used unscaled when absent.
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// [n, re, im] triples
    #[serde(default)]
    pub h: Vec<[f64; 3]>,
    #[serde(default)]
    pub xi: Vec<[f64; 3]>,
}

fn default_sigma() -> f64 {
    0.5
}

fn default_modes() -> usize {
    6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub margin_min: f64,
    pub monotone_slack: f64,
    pub budget_slack: f64,
    pub mean_drift: f64,
    /// Cap on |h|_{1,μt} + |ξ|_{1,μt} for an admissible run.
    pub smallness_cap: f64,
    /// Configured C in |A − Id|_{1,μt} ≤ C|Λh|_{1,μt}.
    pub a_bound_constant: f64,
    /// Allowed shortfall in ρ(t) ≥ μt.
    pub radius_tol: f64,
    pub radius_window: [f64; 2],
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            picard_tol: 1e-10,
            picard_max_iter: 50,
            margin_min: 0.1,
            monotone_slack: 1e-6,
            budget_slack: 0.05,
            mean_drift: 1e-12,
            smallness_cap: 0.05,
            a_bound_constant: 4.0,
            radius_tol: 0.1,
            radius_window: [0.2, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Steps between diagnostic records.
    pub cadence: usize,
    pub snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), cadence: 10, snapshots: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Flags {
    pub linear_only: bool,
    /// Must agree with kappa > 0.
    pub mollified: bool,
    /// Radius fits and the μ < α/2 requirement.
    pub analyticity: bool,
}

/// Which trajectory properties are checked; all are mandatory when on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    pub lyapunov_monotone: bool,
    pub wiener_budget: bool,
    pub a_bound: bool,
    pub energy_bound: bool,
    pub smallness: bool,
    pub radius_growth: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            lyapunov_monotone: true,
            wiener_budget: true,
            a_bound: true,
            energy_bound: true,
            smallness: true,
            radius_growth: false,
        }
    }
}

impl RunConfig {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            depth: self.grid.depth,
            n_z: self.grid.n_z,
            picard_tol: self.tolerances.picard_tol,
            picard_max_iter: self.tolerances.picard_max_iter,
            margin_min: self.tolerances.margin_min,
            quadrature: self.grid.quadrature,
        }
    }

    /// Initial (h, ξ) realized from the preset.
    pub fn initial_state(&self) -> Result<(SpectrumField, SpectrumField)> {
        let n = self.grid.n_modes;
        let init = &self.initial;
        let (h, xi) = match init.preset {
            Preset::Zero => return Ok((SpectrumField::zeros(n)?, SpectrumField::zeros(n)?)),
            Preset::SmallTwoMode => (
                &SpectrumField::cos_mode(n, 1, 1.0)? + &SpectrumField::cos_mode(n, 2, 0.5)?,
                &SpectrumField::sin_mode(n, 1, 1.0)? + &SpectrumField::sin_mode(n, 2, 0.5)?,
            ),
            Preset::Geometric => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut draw = || {
                    let modes: Vec<(usize, Complex64)> = (1..=init.modes)
                        .map(|k| (k, Complex64::from_polar((-init.sigma * k as f64).exp(), rng.random_range(0.0..std::f64::consts::TAU))))
                        .collect();
                    SpectrumField::from_modes(n, &modes)
                };
                let h = draw()?;
                (h, draw()?)
            }
            Preset::Explicit => (modes_field(n, &init.h)?, modes_field(n, &init.xi)?),
        };
        let size = wiener::wiener_norm(&h, 1.0, 0.0)? + wiener::wiener_norm(&xi, 1.0, 0.0)?;
        match (init.amplitude, init.preset) {
            (None, Preset::Explicit) => Ok((h, xi)),
            _ if size == 0.0 => Ok((h, xi)),
            (amp, _) => {
                let c = amp.unwrap_or(0.01) / size;
                Ok((h.scale(c), xi.scale(c)))
            }
        }
    }
}

fn modes_field(n: usize, triples: &[[f64; 3]]) -> Result<SpectrumField> {
    let modes: Vec<(usize, Complex64)> = triples
        .iter()
        .map(|&[k, re, im]| (k as usize, Complex64::new(re, im)))
        .collect();
    if let Some(&[k, _, _]) = triples.iter().find(|t| t[0] < 0.0 || t[0].fract() != 0.0) {
        return Err(Error::Config(format!("mode index {k} is not a nonnegative integer")));
    }
    SpectrumField::from_modes(n, &modes)
}

/// 1-based line of `key` inside `[section]`, or of the section header when
/// the key is absent.
fn line_of(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut header = 1;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = i + 1;
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return i + 1;
                }
            }
        }
    }
    header
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::ConfigAt {
        line: e.span().map(|s| line_at(text, s.start)).unwrap_or(1),
        msg: e.message().to_string(),
    })?;
    let at = |section: &str, key: &str, msg: String| Error::ConfigAt { line: line_of(text, section, key), msg };
    let m = &cfg.model;
    for (key, v) in [("alpha", m.alpha), ("epsilon", m.epsilon), ("kappa", m.kappa), ("mu", m.mu)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(at("model", key, format!("{key} must be finite and nonnegative, got {v}")));
        }
    }
    let n = cfg.grid.n_modes;
    if n < 8 || n % 2 != 0 {
        return Err(at("grid", "n_modes", format!("n_modes must be even and at least 8, got {n}")));
    }
    if cfg.grid.n_z < 8 || cfg.grid.n_z % 2 != 0 {
        return Err(at("grid", "n_z", format!("n_z must be even and at least 8, got {}", cfg.grid.n_z)));
    }
    if !(cfg.grid.depth > 0.0 && cfg.grid.depth.is_finite()) {
        return Err(at("grid", "depth", format!("depth must be positive, got {}", cfg.grid.depth)));
    }
    if !(cfg.time.dt > 0.0 && cfg.time.dt.is_finite()) {
        return Err(at("time", "dt", format!("dt must be positive, got {}", cfg.time.dt)));
    }
    if !(cfg.time.t_final >= 0.0 && cfg.time.t_final.is_finite()) {
        return Err(at("time", "t_final", format!("t_final must be nonnegative, got {}", cfg.time.t_final)));
    }
    if (cfg.analyticity_enabled()) && m.mu >= m.alpha / 2.0 {
        return Err(at("model", "mu", format!("mu = {} must be below alpha/2 = {}", m.mu, m.alpha / 2.0)));
    }
    if cfg.flags.mollified != (m.kappa > 0.0) {
        return Err(at(
            "flags",
            "mollified",
            format!("mollified = {} is inconsistent with kappa = {}", cfg.flags.mollified, m.kappa),
        ));
    }
    if cfg.flags.linear_only && m.kappa > 0.0 {
        return Err(at("flags", "linear_only", "linear_only runs the unmollified propagator; set kappa = 0".into()));
    }
    if cfg.output.cadence == 0 {
        return Err(at("output", "cadence", "cadence must be at least 1".into()));
    }
    let tol = &cfg.tolerances;
    if !(tol.picard_tol > 0.0) || tol.picard_max_iter == 0 {
        return Err(at("tolerances", "picard_tol", "Picard tolerance and iteration cap must be positive".into()));
    }
    if !(tol.margin_min > 0.0 && tol.margin_min < 1.0) {
        return Err(at("tolerances", "margin_min", format!("margin_min must lie in (0, 1), got {}", tol.margin_min)));
    }
    let init = &cfg.initial;
    if let Some(a) = init.amplitude {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(at("initial", "amplitude", format!("amplitude must be nonnegative, got {a}")));
        }
    }
    if init.preset != Preset::Explicit && !(init.h.is_empty() && init.xi.is_empty()) {
        return Err(at("initial", "h", "mode lists are only read by the explicit preset".into()));
    }
    if init.preset == Preset::Geometric && (init.modes == 0 || init.modes >= n / 2) {
        return Err(at("initial", "modes", format!("modes must lie in 1..{}", n / 2)));
    }
    let (h, _) = cfg.initial_state().map_err(|e| at("initial", "preset", e.to_string()))?;
    if h.mean().abs() > 0.0 {
        return Err(at("initial", "h", format!("h must have zero mean, got {:e}", h.mean())));
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn analyticity_enabled(&self) -> bool {
        self.flags.analyticity || self.checks.radius_growth
    }
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[model]
alpha = 3.0
epsilon = 1.0

[grid]
n_modes = 64

[time]
dt = 1e-3
t_final = 1.0

[initial]
preset = \"small_two_mode\"
";

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.grid.n_z, 256);
        assert_eq!(c.grid.depth, 8.0);
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(c.seed, 42);
        let (h, xi) = c.initial_state().unwrap();
        let size = wiener::wiener_norm(&h, 1.0, 0.0).unwrap() + wiener::wiener_norm(&xi, 1.0, 0.0).unwrap();
        assert!((size - 0.01).abs() < 1e-15);
        assert_eq!(h.mean(), 0.0);
    }

    #[test]
    fn mu_above_half_alpha_is_rejected() {
        let text = MINIMAL.replace("epsilon = 1.0", "epsilon = 1.0\nmu = 2.0") + "\n[flags]\nanalyticity = true\n";
        match parse_config(&text) {
            Err(Error::ConfigAt { line, msg }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("alpha/2"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn odd_mode_count_is_rejected() {
        let text = MINIMAL.replace("n_modes = 64", "n_modes = 63");
        assert!(matches!(parse_config(&text), Err(Error::ConfigAt { line: 6, .. })));
    }

    #[test]
    fn unknown_key_is_line_anchored() {
        let text = MINIMAL.replace("dt = 1e-3", "dt = 1e-3\nstep = 2");
        match parse_config(&text) {
            Err(Error::ConfigAt { line, msg }) => {
                assert_eq!(line, 10);
                assert!(msg.contains("step"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mollified_flag_must_match_kappa() {
        let text = MINIMAL.replace("epsilon = 1.0", "epsilon = 1.0\nkappa = 0.01");
        assert!(parse_config(&text).is_err());
        let text = text + "\n[flags]\nmollified = true\n";
        assert!(parse_config(&text).is_ok());
    }

    #[test]
    fn zero_preset_and_nonzero_mean() {
        let c = parse_config(&MINIMAL.replace("small_two_mode", "zero")).unwrap();
        let (h, xi) = c.initial_state().unwrap();
        assert_eq!(h.max_abs_coeff() + xi.max_abs_coeff(), 0.0);
        let text = MINIMAL.replace("\"small_two_mode\"", "\"explicit\"\nh = [[0, 0.1, 0.0]]");
        assert!(matches!(parse_config(&text), Err(Error::ConfigAt { .. })));
    }

    #[test]
    fn geometric_preset_is_seeded() {
        let text = MINIMAL.replace("\"small_two_mode\"", "\"geometric\"\nmodes = 8");
        let a = parse_config(&text).unwrap().initial_state().unwrap();
        let b = parse_config(&text).unwrap().initial_state().unwrap();
        assert_eq!(a.0, b.0);
        let c = parse_config(&format!("seed = 7\n{text}")).unwrap().initial_state().unwrap();
        assert_ne!(a.0, c.0);
    }
}
