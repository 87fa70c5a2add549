//! Simulation driver: advances a configured run, records diagnostics at
//! the configured cadence, evaluates the trajectory properties and writes
//! the series, snapshots and verdicts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::diagnostics::{self as diag, BudgetSample, DiagRecord, EnergySample, EnergyTracker, SmallnessMonitor};
use crate::error::Result;
use crate::evolution::{Integrator, SimState};
use crate::spectral::SpectrumField;
use crate::wiener;

pub const OUT_DIR_ENV: &str = "VISCWAVE_OUT_DIR";
pub const SERIES_HEADER: &str = "# viscwave series v1";

/// The output directory, with the environment override taking precedence.
pub fn output_dir(configured: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => configured.to_path_buf(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub property: String,
    pub mandatory: bool,
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub detail: String,
}

impl Verdict {
    fn new(property: &str, mandatory: bool, holds: bool, lhs: f64, rhs: f64, detail: String) -> Self {
        Self { property: property.into(), mandatory, holds, lhs, rhs, detail }
    }
}

/// True unless some mandatory verdict failed.
pub fn all_mandatory_hold(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.holds || !v.mandatory)
}

#[derive(Clone, Debug, Serialize)]
pub struct Snapshot {
    pub t: f64,
    /// (re, im) of modes 0..=N/2
    pub h: Vec<[f64; 2]>,
    pub xi: Vec<[f64; 2]>,
}

impl Snapshot {
    pub fn of(state: &SimState) -> Self {
        let pairs = |f: &SpectrumField| f.half().iter().map(|c| [c.re, c.im]).collect();
        Self { t: state.t, h: pairs(&state.h), xi: pairs(&state.xi) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepFailure {
    pub t: f64,
    pub message: String,
}

/// Per-record extras that feed the property checks.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RecordExtras {
    pub budget: BudgetSample,
    pub a_ratio: Option<f64>,
    pub picard_iters: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<DiagRecord>,
    pub extras: Vec<RecordExtras>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: SimState,
    pub steps: usize,
    pub max_mean_drift: f64,
    pub failure: Option<StepFailure>,
    pub verdicts: Vec<Verdict>,
}

struct Recorder<'a> {
    cfg: &'a RunConfig,
    int: Integrator,
    tol: f64,
    energy: EnergyTracker,
    records: Vec<DiagRecord>,
    extras: Vec<RecordExtras>,
    snapshots: Vec<Snapshot>,
    flags: Vec<diag::SmallnessFlag>,
}

impl Recorder<'_> {
    fn record(&mut self, state: &mut SimState) -> Result<()> {
        let p = self.cfg.model;
        let lam = p.mu * state.t;
        state.prepare(&self.int.params, &self.int.settings, self.tol)?;
        let cache = state.cache_for(&self.int.params, &self.int.settings)?;
        let picard_iters = cache.elliptic.picard_iters;
        let trace = cache.boundary.s.clone();
        let sample = EnergySample::new(state.t, &state.h, &state.xi, Some(&cache.elliptic))?;
        let energy = self.energy.push(&sample)?;
        let (n_xi, _) = self.int.remainder(state, self.tol)?;
        let budget = BudgetSample::new(state.t, &state.h, &state.xi, &n_xi, p.alpha, p.mu)?;
        let a_ratio = diag::a_minus_id_ratio(&trace, 1.0, lam)?;
        let wiener_h = wiener::resolved_norm(&state.h, 1.0, lam)?;
        let wiener_xi = wiener::resolved_norm(&state.xi, 1.0, lam)?;
        let radius = if self.cfg.analyticity_enabled() {
            diag::pair_radius(&state.h, &state.xi).map_or(f64::NAN, |f| f.rho)
        } else {
            f64::NAN
        };
        let rec = DiagRecord {
            t: state.t,
            sobolev_h3: wiener::sobolev_norm(&state.h, 3.0)?,
            sobolev_xi3: wiener::sobolev_norm(&state.xi, 3.0)?,
            wiener_h,
            wiener_xi,
            energy,
            radius,
            lyapunov: wiener_h + wiener_xi,
        };
        if let Some(f) = (SmallnessMonitor { cap: self.cfg.tolerances.smallness_cap }).check(rec.t, rec.lyapunov) {
            self.flags.push(f);
        }
        self.records.push(rec);
        self.extras.push(RecordExtras { budget, a_ratio, picard_iters });
        if self.cfg.output.snapshots {
            self.snapshots.push(Snapshot::of(state));
        }
        Ok(())
    }
}

/// Runs the configured simulation in memory.
pub fn simulate(cfg: &RunConfig) -> Result<Trajectory> {
    let mut int = Integrator::new(cfg.model, cfg.settings())?;
    int.linear_only = cfg.flags.linear_only;
    let (h, xi) = cfg.initial_state()?;
    let mut state = SimState::new(h, xi, 0.0)?;
    let dt = cfg.time.dt;
    let t_end = cfg.time.t_final;
    let mut rec = Recorder {
        cfg,
        int,
        tol: int.settings.tol_for(dt),
        energy: EnergyTracker::default(),
        records: Vec::new(),
        extras: Vec::new(),
        snapshots: Vec::new(),
        flags: Vec::new(),
    };
    rec.record(&mut state)?;
    let mut steps = 0;
    let mut max_drift = 0.0f64;
    let mut failure = None;
    let n_steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    while steps < n_steps {
        let h_step = if steps + 1 == n_steps { t_end - state.t } else { dt };
        match int.step(&mut state, h_step) {
            Ok(next) => state = next,
            Err(e) => {
                failure = Some(StepFailure { t: state.t, message: e.to_string() });
                break;
            }
        }
        steps += 1;
        max_drift = max_drift.max(state.mean_drift.abs());
        if steps % cfg.output.cadence == 0 || steps == n_steps {
            if let Err(e) = rec.record(&mut state) {
                failure = Some(StepFailure { t: state.t, message: e.to_string() });
                break;
            }
        }
    }
    let mut traj = Trajectory {
        records: rec.records,
        extras: rec.extras,
        snapshots: rec.snapshots,
        final_state: state,
        steps,
        max_mean_drift: max_drift,
        failure,
        verdicts: Vec::new(),
    };
    traj.verdicts = evaluate(cfg, &traj, &rec.flags);
    Ok(traj)
}

fn evaluate(cfg: &RunConfig, traj: &Trajectory, flags: &[diag::SmallnessFlag]) -> Vec<Verdict> {
    let tol = &cfg.tolerances;
    let checks = &cfg.checks;
    let recs = &traj.records;
    let mut out = Vec::new();
    out.push(Verdict::new(
        "completed",
        true,
        traj.failure.is_none(),
        traj.final_state.t,
        cfg.time.t_final,
        traj.failure.as_ref().map_or(String::new(), |f| f.message.clone()),
    ));
    out.push(Verdict::new(
        "mean_conservation",
        true,
        traj.max_mean_drift <= tol.mean_drift,
        traj.max_mean_drift,
        tol.mean_drift,
        format!("largest per-step drift of the mean of h over {} steps", traj.steps),
    ));
    let series: Vec<(f64, f64)> = recs.iter().map(|r| (r.t, r.lyapunov)).collect();
    if checks.lyapunov_monotone {
        let start = cfg
            .initial_state()
            .ok()
            .and_then(|(h, xi)| diag::slowest_mode(&h, &xi))
            .map_or(0.0, diag::transient_window);
        let rep = diag::check_lyapunov_monotone(&series, tol.monotone_slack, start);
        let pairs = series.windows(2).filter(|w| w[0].0 >= start).count();
        out.push(Verdict::new(
            "lyapunov_monotone",
            true,
            rep.holds,
            rep.lhs,
            rep.rhs,
            format!("worst ratio of consecutive values after t = {start:.4} ({pairs} pairs)"),
        ));
    }
    if series.len() >= 2 && series.iter().all(|&(_, v)| v > 0.0) {
        if let Ok(d) = diag::decay_rate(&series, (series[0].0, series[series.len() - 1].0)) {
            out.push(Verdict::new("decay_rate", false, d > 0.0, d, 0.0, "fitted decay rate of the Lyapunov functional".into()));
        }
    }
    if checks.wiener_budget {
        let samples: Vec<BudgetSample> = traj.extras.iter().map(|e| e.budget).collect();
        let rep = diag::check_budget(&samples, tol.budget_slack);
        out.push(Verdict::new(
            "wiener_budget",
            true,
            rep.holds,
            rep.lhs,
            rep.rhs,
            "worst excess of d/dt|xi|_{1,mu t} over its budget".into(),
        ));
    }
    if checks.a_bound {
        let worst = traj.extras.iter().filter_map(|e| e.a_ratio).fold(0.0, f64::max);
        out.push(Verdict::new(
            "a_bound",
            true,
            worst <= tol.a_bound_constant,
            worst,
            tol.a_bound_constant,
            "largest empirical C(1) in |A - Id| <= C |Lambda h|".into(),
        ));
    }
    if checks.energy_bound {
        let e0 = recs.first().map_or(0.0, |r| r.energy);
        let first_bad = recs.iter().position(|r| r.energy > 2.0 * e0);
        let t_star = match first_bad {
            Some(0) | None => recs.last().map_or(0.0, |r| r.t),
            Some(i) => recs[i - 1].t,
        };
        let worst = recs.iter().map(|r| if e0 > 0.0 { r.energy / e0 } else { 0.0 }).fold(0.0, f64::max);
        out.push(Verdict::new(
            "energy_bound",
            true,
            first_bad.is_none(),
            worst,
            2.0,
            format!("largest E(t)/E(0); bound holds up to t = {t_star}"),
        ));
    }
    if checks.smallness {
        let worst = recs.iter().map(|r| r.lyapunov).fold(0.0, f64::max);
        out.push(Verdict::new(
            "smallness",
            true,
            flags.is_empty(),
            worst,
            tol.smallness_cap,
            match flags.first() {
                Some(f) => format!("{} flagged records, first at t = {}", flags.len(), f.t),
                None => "no flagged records".into(),
            },
        ));
    }
    if checks.radius_growth {
        let [t0, t1] = tol.radius_window;
        let inside: Vec<&DiagRecord> = recs.iter().filter(|r| r.t >= t0 && r.t <= t1).collect();
        let defined = inside.iter().all(|r| r.radius.is_finite()) && !inside.is_empty();
        let shortfall = inside.iter().map(|r| cfg.model.mu * r.t - r.radius).fold(f64::NEG_INFINITY, f64::max);
        let drops = inside.windows(2).filter(|w| w[1].radius < w[0].radius).count();
        out.push(Verdict::new(
            "radius_growth",
            true,
            defined && shortfall <= tol.radius_tol && drops == 0,
            shortfall,
            tol.radius_tol,
            format!("largest mu*t - rho(t) on [{t0}, {t1}]; {drops} decreases"),
        ));
    }
    out
}

/// Writes the series CSV with its versioned header.
pub fn write_series(path: &Path, records: &[DiagRecord]) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "{SERIES_HEADER}")?;
    let mut w = csv::Writer::from_writer(file);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(["t", "sobolev_h3", "sobolev_xi3", "wiener_h", "wiener_xi", "energy", "radius", "lyapunov"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut file, r)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a RunConfig,
    steps: usize,
    records: usize,
    final_t: f64,
    failure: &'a Option<StepFailure>,
    passed: bool,
}

/// Simulates and writes series.csv, snapshots.jsonl, verdicts.jsonl and
/// summary.json into `dir`. On a step failure the last good state goes to
/// failure_state.json.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<Trajectory> {
    let traj = simulate(cfg)?;
    fs::create_dir_all(dir)?;
    write_series(&dir.join("series.csv"), &traj.records)?;
    if cfg.output.snapshots {
        write_jsonl(&dir.join("snapshots.jsonl"), &traj.snapshots)?;
    }
    write_jsonl(&dir.join("verdicts.jsonl"), &traj.verdicts)?;
    if traj.failure.is_some() {
        fs::write(dir.join("failure_state.json"), serde_json::to_string(&Snapshot::of(&traj.final_state))?)?;
    }
    let summary = Summary {
        config: cfg,
        steps: traj.steps,
        records: traj.records.len(),
        final_t: traj.final_state.t,
        failure: &traj.failure,
        passed: all_mandatory_hold(&traj.verdicts),
    };
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(traj)
}
