//! Boundary evolution of the interface h and the potential trace ξ.
//!
//! With s = εh^κ the flattening trace, J₀ = 1 + Λs, φ,₂ and φ,₂₂ the
//! boundary traces of the transformed potential and
//! T = −s,₁ξ^κ,₁ + s,₁²φ,₂/J₀ + φ,₂/J₀ the normal flux,
//!
//!   h_t = H_κ T + α h^{κκ},₁₁
//!   ξ_t = H_κ[−(ε/2)((ξ^κ,₁ − s,₁φ,₂/J₀)² + (φ,₂/J₀)²) − h
//!             − α(φ,₂₂/J₀² + s,₁₁φ,₂/J₀³) + ε(φ,₂/J₀)(T + αh^κ,₁₁)]
//!
//! H_κ multiplies mode n by e^{−κn²}; κ = 0 is the unmollified system.
//! Time stepping is Lawson–Heun: the constant-coefficient linear part is
//! integrated exactly, the remainder by Heun's method in the rotated frame.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elliptic::{solve_phi1, solve_phi2, EllipticSolution, PicardOptions, Quadrature};
use crate::error::{Error, Result};
use crate::geometry::{build_geometry, GeometryBundle, DEFAULT_MARGIN_MIN};
use crate::spectral::{padded_len, SpectrumField};
use crate::strip::DepthGrid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub alpha: f64,
    pub epsilon: f64,
    /// Mollification strength; 0 disables H_κ.
    #[serde(default)]
    pub kappa: f64,
    /// Strip growth rate used by the time-weighted norms.
    #[serde(default)]
    pub mu: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { alpha: 3.0, epsilon: 1.0, kappa: 0.0, mu: 0.0 }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("epsilon", self.epsilon), ("kappa", self.kappa), ("mu", self.mu)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// μ < α/2, required by the analyticity diagnostics.
    pub fn check_strip_rate(&self) -> Result<()> {
        if self.mu >= self.alpha / 2.0 {
            return Err(Error::Config(format!(
                "mu = {} must be below alpha/2 = {}",
                self.mu,
                self.alpha / 2.0
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub depth: f64,
    pub n_z: usize,
    /// Upper bound on the Picard tolerance; steps use min(this, dt³).
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub margin_min: f64,
    pub quadrature: Quadrature,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            depth: 8.0,
            n_z: 256,
            picard_tol: 1e-10,
            picard_max_iter: 50,
            margin_min: DEFAULT_MARGIN_MIN,
            quadrature: Quadrature::Cubic,
        }
    }
}

impl SolverSettings {
    pub fn grid(&self) -> Result<DepthGrid> {
        DepthGrid::new(self.depth, self.n_z)
    }

    pub fn tol_for(&self, dt: f64) -> f64 {
        self.picard_tol.min(dt.powi(3))
    }
}

/// Boundary data of one elliptic solve.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    /// ξ^κ, the Dirichlet datum of φ.
    pub xi_b: SpectrumField,
    pub h_kappa: SpectrumField,
    /// s = εh^κ
    pub s: SpectrumField,
    /// φ,₂ at x₂ = 0
    pub dphi: SpectrumField,
    /// φ,₂₂ at x₂ = 0
    pub d2phi: SpectrumField,
}

#[derive(Clone, Debug)]
pub struct Cache {
    h: SpectrumField,
    xi: SpectrumField,
    params: ModelParams,
    settings: SolverSettings,
    tol: f64,
    pub bundle: GeometryBundle,
    pub elliptic: EllipticSolution,
    pub boundary: BoundaryData,
}

impl Cache {
    fn matches(&self, h: &SpectrumField, xi: &SpectrumField, params: &ModelParams, settings: &SolverSettings) -> bool {
        self.h == *h
            && self.xi == *xi
            && self.params.epsilon == params.epsilon
            && self.params.kappa == params.kappa
            && self.settings.depth == settings.depth
            && self.settings.n_z == settings.n_z
            && self.settings.quadrature == settings.quadrature
    }
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub h: SpectrumField,
    pub xi: SpectrumField,
    pub t: f64,
    /// Mean of h removed by the last step's re-projection.
    pub mean_drift: f64,
    cache: Option<Box<Cache>>,
}

pub const MEAN_TOL: f64 = 1e-12;

impl SimState {
    pub fn new(h: SpectrumField, xi: SpectrumField, t: f64) -> Result<Self> {
        if h.n_modes() != xi.n_modes() {
            return Err(Error::Config("h and xi have different mode counts".into()));
        }
        h.check_finite()?;
        xi.check_finite()?;
        if h.mean().abs() > MEAN_TOL * (1.0 + h.max_abs_coeff()) {
            return Err(Error::Config(format!("h must have zero mean, got {:e}", h.mean())));
        }
        Ok(Self { h: h.without_mean(), xi, t, mean_drift: 0.0, cache: None })
    }

    pub fn zeros(n_modes: usize) -> Result<Self> {
        Self::new(SpectrumField::zeros(n_modes)?, SpectrumField::zeros(n_modes)?, 0.0)
    }

    pub fn n_modes(&self) -> usize {
        self.h.n_modes()
    }

    /// Geometry and elliptic solve for the current (h, ξ), reused while
    /// the state, the model and the grid are unchanged.
    pub fn prepare(&mut self, params: &ModelParams, settings: &SolverSettings, tol: f64) -> Result<&Cache> {
        let fresh = match &self.cache {
            Some(c) => c.matches(&self.h, &self.xi, params, settings) && c.tol <= tol,
            None => false,
        };
        if !fresh {
            self.cache = Some(Box::new(build_cache(&self.h, &self.xi, params, settings, tol)?));
        }
        Ok(self.cache.as_deref().expect("cache just built"))
    }

    /// The cache, provided it was built for exactly this state.
    pub fn cache_for(&self, params: &ModelParams, settings: &SolverSettings) -> Result<&Cache> {
        match &self.cache {
            Some(c) if c.matches(&self.h, &self.xi, params, settings) => Ok(c),
            _ => Err(Error::StaleCache),
        }
    }
}

fn build_cache(
    h: &SpectrumField,
    xi: &SpectrumField,
    params: &ModelParams,
    settings: &SolverSettings,
    tol: f64,
) -> Result<Cache> {
    let grid = settings.grid()?;
    let h_kappa = h.mollify(params.kappa)?;
    let xi_b = xi.mollify(params.kappa)?;
    let s = h_kappa.scale(params.epsilon);
    let j0_min = s.lambda().sample_on(padded_len(s.n_modes())).iter().fold(f64::INFINITY, |m, &v| m.min(1.0 + v));
    if j0_min <= settings.margin_min {
        return Err(Error::GeometryDegenerate { margin: j0_min });
    }
    let bundle = build_geometry(&s, grid, settings.margin_min)?;
    let phi1 = solve_phi1(&xi_b, grid)?;
    let opts = PicardOptions { tol, max_iter: settings.picard_max_iter, quadrature: settings.quadrature };
    let elliptic = solve_phi2(&bundle, &phi1, &opts)?;
    let boundary = BoundaryData {
        dphi: elliptic.traces.dphi_dz0(),
        d2phi: elliptic.traces.d2phi_dz0(),
        xi_b,
        h_kappa,
        s,
    };
    Ok(Cache { h: h.clone(), xi: xi.clone(), params: *params, settings: *settings, tol, bundle, elliptic, boundary })
}

#[derive(Clone, Debug)]
pub struct Rhs {
    pub xi_t: SpectrumField,
    pub h_t: SpectrumField,
}

/// Normal flux T and the nonlinear part of the ξ bracket (everything but −h).
fn boundary_terms(b: &BoundaryData, params: &ModelParams) -> Result<(SpectrumField, SpectrumField)> {
    let a = b.s.d1();
    let p = b.s.lambda();
    let s11 = b.s.d11();
    let xi1 = b.xi_b.d1();
    let hk11 = b.h_kappa.d11();
    let fields = [&a, &p, &s11, &xi1, &b.dphi, &b.d2phi, &hk11];
    let flux = |v: &[f64]| {
        let (a, j, xi1, f2) = (v[0], 1.0 + v[1], v[3], v[4]);
        -a * xi1 + a * a * f2 / j + f2 / j
    };
    let t = SpectrumField::map_pointwise(&fields, flux)?;
    let (eps, alpha) = (params.epsilon, params.alpha);
    let bracket = SpectrumField::map_pointwise(&fields, |v| {
        let (a, j, s11, xi1, f2, f22, hk11) = (v[0], 1.0 + v[1], v[2], v[3], v[4], v[5], v[6]);
        let tan = xi1 - a * f2 / j;
        let nor = f2 / j;
        -0.5 * eps * (tan * tan + nor * nor) - alpha * (f22 / (j * j) + s11 * f2 / (j * j * j))
            + eps * nor * (flux(v) + alpha * hk11)
    })?;
    Ok((t, bracket))
}

fn assemble(state: &SimState, cache: &Cache, params: &ModelParams) -> Result<Rhs> {
    let (t, bracket) = boundary_terms(&cache.boundary, params)?;
    let k = params.kappa;
    let h_kk = state.h.mollify(k)?.mollify(k)?;
    let h_t = &t.mollify(k)? + &h_kk.d11().scale(params.alpha);
    let xi_t = (&bracket - &state.h).mollify(k)?;
    xi_t.check_finite()?;
    h_t.check_finite()?;
    Ok(Rhs { xi_t, h_t })
}

/// Full (ξ_t, h_t) for a prepared state.
pub fn rhs(state: &SimState, params: &ModelParams, settings: &SolverSettings) -> Result<Rhs> {
    let cache = state.cache_for(params, settings)?;
    assemble(state, cache, params)
}

pub fn rhs_interface(state: &SimState, params: &ModelParams, settings: &SolverSettings) -> Result<SpectrumField> {
    Ok(rhs(state, params, settings)?.h_t)
}

pub fn rhs_potential(state: &SimState, params: &ModelParams, settings: &SolverSettings) -> Result<SpectrumField> {
    Ok(rhs(state, params, settings)?.xi_t)
}

/// Linear symbol of mode n: ξ̂_t = −dξ̂ − bĥ, ĥ_t = cξ̂ − dĥ with
/// d = αn²e^{−2κn²}, b = e^{−κn²}, c = |n|e^{−2κn²}.
pub fn linear_symbol(n: usize, alpha: f64, kappa: f64) -> (f64, f64, f64) {
    let nf = n as f64;
    let m = (-kappa * nf * nf).exp();
    (alpha * nf * nf * m * m, m, nf * m * m)
}

/// exp(dt·M) acting on (ξ̂, ĥ) for the mollified symbol.
pub fn linear_propagator_mollified(n: usize, alpha: f64, kappa: f64, dt: f64) -> [[f64; 2]; 2] {
    let (d, b, c) = linear_symbol(n, alpha, kappa);
    let damp = (-d * dt).exp();
    let omega = (b * c).sqrt();
    if omega == 0.0 {
        return [[damp, -damp * b * dt], [0.0, damp]];
    }
    let (sn, cs) = (omega * dt).sin_cos();
    [[damp * cs, -damp * b / omega * sn], [damp * c / omega * sn, damp * cs]]
}

/// exp(dt·M(n)), M = [[−αn², −1], [|n|, −αn²]] on (ξ̂, ĥ).
pub fn linear_propagator(n: usize, alpha: f64, dt: f64) -> [[f64; 2]; 2] {
    linear_propagator_mollified(n, alpha, 0.0, dt)
}

/// Applies exp(dt·M) mode by mode.
pub fn propagate(xi: &SpectrumField, h: &SpectrumField, params: &ModelParams, dt: f64) -> Result<(SpectrumField, SpectrumField)> {
    let n = xi.n_modes();
    let mut x = Vec::with_capacity(n / 2 + 1);
    let mut y = Vec::with_capacity(n / 2 + 1);
    for k in 0..=n / 2 {
        let m = linear_propagator_mollified(k, params.alpha, params.kappa, dt);
        let (a, b) = (xi.half()[k], h.half()[k]);
        x.push(a * m[0][0] + b * m[0][1]);
        y.push(a * m[1][0] + b * m[1][1]);
    }
    Ok((SpectrumField::from_half(n, x)?, SpectrumField::from_half(n, y)?))
}

/// Constant-coefficient part M(ξ, h) of the right-hand side.
pub fn linear_part(xi: &SpectrumField, h: &SpectrumField, params: &ModelParams) -> Result<(SpectrumField, SpectrumField)> {
    let n = xi.n_modes();
    let mut x = Vec::with_capacity(n / 2 + 1);
    let mut y = Vec::with_capacity(n / 2 + 1);
    for k in 0..=n / 2 {
        let (d, b, c) = linear_symbol(k, params.alpha, params.kappa);
        let (a, e) = (xi.half()[k], h.half()[k]);
        x.push(-a * d - e * b);
        y.push(a * c - e * d);
    }
    Ok((SpectrumField::from_half(n, x)?, SpectrumField::from_half(n, y)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integrator {
    pub params: ModelParams,
    pub settings: SolverSettings,
    /// Drops the nonlinear remainder, leaving the exact linear flow.
    pub linear_only: bool,
}

impl Integrator {
    pub fn new(params: ModelParams, settings: SolverSettings) -> Result<Self> {
        params.validate()?;
        settings.grid()?;
        Ok(Self { params, settings, linear_only: false })
    }

    /// Full right-hand side minus its linear part.
    pub fn remainder(&self, state: &mut SimState, tol: f64) -> Result<(SpectrumField, SpectrumField)> {
        let n = state.n_modes();
        if self.linear_only {
            return Ok((SpectrumField::zeros(n)?, SpectrumField::zeros(n)?));
        }
        state.prepare(&self.params, &self.settings, tol)?;
        let r = rhs(state, &self.params, &self.settings)?;
        let (lx, lh) = linear_part(&state.xi, &state.h, &self.params)?;
        Ok((&r.xi_t - &lx, &r.h_t - &lh))
    }

    /// u₊ = E(u + dt·N(u)), u_{n+1} = E(u + dt/2·N(u)) + dt/2·N(u₊).
    pub fn step(&self, state: &mut SimState, dt: f64) -> Result<SimState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let t = state.t;
        self.step_inner(state, dt).map_err(|e| Error::Step { t, source: Box::new(e) })
    }

    fn step_inner(&self, state: &mut SimState, dt: f64) -> Result<SimState> {
        let tol = self.settings.tol_for(dt);
        let (n1x, n1h) = self.remainder(state, tol)?;
        let (px, ph) = propagate(&state.xi.axpy(dt, &n1x), &state.h.axpy(dt, &n1h), &self.params, dt)?;
        let mut pred = SimState { h: ph, xi: px, t: state.t + dt, mean_drift: 0.0, cache: None };
        let (n2x, n2h) = self.remainder(&mut pred, tol)?;
        let (ax, ah) = propagate(&state.xi.axpy(0.5 * dt, &n1x), &state.h.axpy(0.5 * dt, &n1h), &self.params, dt)?;
        let xi = ax.axpy(0.5 * dt, &n2x);
        let h = ah.axpy(0.5 * dt, &n2h);
        xi.check_finite()?;
        h.check_finite()?;
        let drift = h.mean();
        Ok(SimState { h: h.without_mean(), xi, t: state.t + dt, mean_drift: drift, cache: None })
    }

    /// Steps of size at most `dt` until `t_end`; the last step is shortened.
    pub fn advance(&self, state: &mut SimState, dt: f64, t_end: f64) -> Result<()> {
        while state.t < t_end - 1e-12 * dt {
            let h = dt.min(t_end - state.t);
            *state = self.step(state, h)?;
        }
        Ok(())
    }
}

/// Closed-form linear solution for the coefficients of mode n.
pub fn linear_exact(n: usize, alpha: f64, t: f64, xi0: Complex64, h0: Complex64) -> (Complex64, Complex64) {
    let m = linear_propagator(n, alpha, t);
    (xi0 * m[0][0] + h0 * m[0][1], xi0 * m[1][0] + h0 * m[1][1])
}
