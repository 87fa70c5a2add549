//! Half-strip Poisson solver Δφ = ∇·g, φ|₀ = 0, ∂₂φ → 0 at depth, mode by mode.
//!
//! With a = |k| the Green's function is G(x,y) = (e^{a(x+y)} − e^{−a|x−y|})/(2a).
//! Writing E = ∫e^{ay}f, L(x) = ∫_{y<x}e^{−a(x−y)}f and R(x) = ∫_{y>x}e^{−a(y−x)}f,
//!
//!   φ̂   = (ik/2a)[e^{ax}E₁ − L₁ − R₁] − ½[e^{ax}E₂ − L₂ + R₂]
//!   ∂₂φ̂ = (ik/2)[e^{ax}E₁ + L₁ − R₁] + ĝ₂ − (a/2)[e^{ax}E₂ + L₂ + R₂]
//!
//! L and R are one-pass recursions. Each step integrates the exponential
//! exactly against a local interpolant of g (product integration). Below
//! −L_d the forcing is continued as g(−L_d)e^{β(y+L_d)}, β fitted from the
//! two bottom nodes, which seeds L(−L_d) = g(−L_d)/(a + β).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strip::{DepthGrid, StripField};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Piecewise-linear interpolant: second order.
    Linear,
    /// Four-point Lagrange interpolant: fourth order.
    #[default]
    Cubic,
}

/// μ_m(z) = ∫₀¹ e^{−zu} u^m du for m = 0..3.
pub(crate) fn moments(z: f64) -> [f64; 4] {
    let mut mu = [0.0; 4];
    if z < 1.0 {
        for (m, out) in mu.iter_mut().enumerate() {
            let mut term = 1.0;
            let mut sum = 0.0;
            for n in 0..60 {
                let t = term / (m + n + 1) as f64;
                sum += t;
                if t.abs() <= 1e-18 * sum.abs() {
                    break;
                }
                term *= -z / (n + 1) as f64;
            }
            *out = sum;
        }
    } else {
        let e = (-z).exp();
        mu[0] = -(-z).exp_m1() / z;
        for m in 1..4 {
            mu[m] = (m as f64 * mu[m - 1] - e) / z;
        }
    }
    mu
}

/// h∫₀¹ e^{−zu} ℓ_q(u) du for the Lagrange basis on nodes `us`.
fn lagrange_weights(us: &[f64], mu: &[f64; 4], h: f64) -> [f64; 4] {
    let mut w = [0.0; 4];
    for q in 0..us.len() {
        let mut poly = [0.0f64; 4];
        poly[0] = 1.0;
        let mut deg = 0;
        let mut denom = 1.0;
        for (r, &ur) in us.iter().enumerate() {
            if r == q {
                continue;
            }
            for d in (0..=deg).rev() {
                poly[d + 1] += poly[d];
                poly[d] *= -ur;
            }
            deg += 1;
            denom *= us[q] - ur;
        }
        w[q] = h * (0..=deg).map(|d| poly[d] * mu[d]).sum::<f64>() / denom;
    }
    w
}

const L_CUBIC: [[f64; 4]; 3] = [[1.0, 0.0, -1.0, -2.0], [2.0, 1.0, 0.0, -1.0], [3.0, 2.0, 1.0, 0.0]];
const R_CUBIC: [[f64; 4]; 3] = [[0.0, 1.0, 2.0, 3.0], [-1.0, 0.0, 1.0, 2.0], [-2.0, -1.0, 0.0, 1.0]];

#[derive(Clone, Debug)]
struct ModeWeights {
    decay: f64,
    l: [[f64; 4]; 3],
    r: [[f64; 4]; 3],
}

impl ModeWeights {
    fn new(a: f64, h: f64, quad: Quadrature) -> Self {
        let mu = moments(a * h);
        let mut l = [[0.0; 4]; 3];
        let mut r = [[0.0; 4]; 3];
        match quad {
            Quadrature::Linear => {
                l[0] = lagrange_weights(&[1.0, 0.0], &mu, h);
                r[0] = lagrange_weights(&[0.0, 1.0], &mu, h);
            }
            Quadrature::Cubic => {
                for c in 0..3 {
                    l[c] = lagrange_weights(&L_CUBIC[c], &mu, h);
                    r[c] = lagrange_weights(&R_CUBIC[c], &mu, h);
                }
            }
        }
        Self { decay: (-a * h).exp(), l, r }
    }
}

#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub phi: StripField,
    pub dz_phi: StripField,
    /// max over modes of |ĝ(n, −L_d)|: forcing handed to the tail model.
    pub bottom_forcing: f64,
    /// |ĝ₂(0, −L_d)|; nonzero means no decaying solution exists for n = 0.
    pub net_flux: f64,
}

impl PoissonSolution {
    pub fn warnings(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.bottom_forcing > tol {
            out.push(format!(
                "forcing has not decayed at the bottom of the strip (|g| = {:.3e}); depth truncation error above {tol:.1e}",
                self.bottom_forcing
            ));
        }
        if self.net_flux > tol {
            out.push(format!(
                "mode 0 carries net flux {:.3e}; no decaying solution",
                self.net_flux
            ));
        }
        out
    }
}

/// Precomputed per-mode weights for one (N, grid, rule).
#[derive(Clone, Debug)]
pub struct PoissonSolver {
    n_modes: usize,
    grid: DepthGrid,
    quad: Quadrature,
    modes: Vec<ModeWeights>,
}

impl PoissonSolver {
    pub fn new(n_modes: usize, grid: DepthGrid, quad: Quadrature) -> Result<Self> {
        crate::spectral::check_modes(n_modes)?;
        let h = grid.dz();
        let modes = (0..n_modes / 2).map(|k| ModeWeights::new(k as f64, h, quad)).collect();
        Ok(Self { n_modes, grid, quad, modes })
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quad
    }

    fn stencil(&self, i: usize) -> (usize, usize, usize) {
        let nz = self.grid.intervals();
        match self.quad {
            Quadrature::Linear => (i, 0, 2),
            Quadrature::Cubic if i == 0 => (0, 0, 4),
            Quadrature::Cubic if i == nz - 1 => (nz - 3, 2, 4),
            Quadrature::Cubic => (i - 1, 1, 4),
        }
    }

    fn sweeps(&self, a: f64, w: &ModeWeights, f: &[Complex64], left: &mut [Complex64], right: &mut [Complex64]) {
        let nz = self.grid.intervals();
        left[0] = Complex64::new(0.0, 0.0);
        if f[0] != Complex64::new(0.0, 0.0) {
            let ratio = f[1].norm() / f[0].norm();
            if ratio > 1.0 {
                let beta = ratio.ln() / self.grid.dz();
                left[0] = f[0] / (a + beta);
            }
        }
        for i in 0..nz {
            let (st, c, width) = self.stencil(i);
            let mut acc = left[i] * w.decay;
            for q in 0..width {
                acc += f[st + q] * w.l[c][q];
            }
            left[i + 1] = acc;
        }
        right[nz] = Complex64::new(0.0, 0.0);
        for i in (0..nz).rev() {
            let (st, c, width) = self.stencil(i);
            let mut acc = right[i + 1] * w.decay;
            for q in 0..width {
                acc += f[st + q] * w.r[c][q];
            }
            right[i] = acc;
        }
    }

    pub fn solve(&self, g1: &StripField, g2: &StripField) -> Result<PoissonSolution> {
        for g in [g1, g2] {
            if g.n_modes() != self.n_modes || g.grid() != self.grid {
                return Err(Error::Config("forcing does not match the solver's grid".into()));
            }
        }
        let nodes = self.grid.nodes();
        let zs = self.grid.zs();
        let mut phi = StripField::zeros(self.n_modes, self.grid)?;
        let mut dz = StripField::zeros(self.n_modes, self.grid)?;
        let zero = Complex64::new(0.0, 0.0);
        let (mut l1, mut r1, mut l2, mut r2) =
            (vec![zero; nodes], vec![zero; nodes], vec![zero; nodes], vec![zero; nodes]);
        let mut bottom: f64 = 0.0;
        let i = Complex64::new(0.0, 1.0);
        for k in 0..self.n_modes / 2 {
            let f1 = g1.column(k);
            let f2 = g2.column(k);
            bottom = bottom.max(f1[0].norm()).max(f2[0].norm());
            let w = &self.modes[k];
            self.sweeps(k as f64, w, f2, &mut l2, &mut r2);
            if k == 0 {
                for (p, r) in phi.column_mut(0).iter_mut().zip(&r2) {
                    *p = Complex64::new(-r.re, 0.0);
                }
                for (d, f) in dz.column_mut(0).iter_mut().zip(f2) {
                    *d = Complex64::new(f.re, 0.0);
                }
                continue;
            }
            self.sweeps(k as f64, w, f1, &mut l1, &mut r1);
            let a = k as f64;
            let (e1, e2) = (l1[nodes - 1], l2[nodes - 1]);
            {
                let p = phi.column_mut(k);
                for j in 0..nodes {
                    let ex = (a * zs[j]).exp();
                    p[j] = i * 0.5 * (e1 * ex - l1[j] - r1[j]) - 0.5 * (e2 * ex - l2[j] + r2[j]);
                }
            }
            let dc = dz.column_mut(k);
            for j in 0..nodes {
                let ex = (a * zs[j]).exp();
                dc[j] = i * (0.5 * a) * (e1 * ex + l1[j] - r1[j]) + f2[j]
                    - 0.5 * a * (e2 * ex + l2[j] + r2[j]);
            }
        }
        Ok(PoissonSolution {
            phi,
            dz_phi: dz,
            bottom_forcing: bottom,
            net_flux: g2.column(0)[0].norm(),
        })
    }
}

/// One-shot solve of Δφ = ∇·(g₁, g₂) on the strip of `g1`.
pub fn poisson_divform(g1: &StripField, g2: &StripField, quad: Quadrature) -> Result<PoissonSolution> {
    PoissonSolver::new(g1.n_modes(), g1.grid(), quad)?.solve(g1, g2)
}
