//! Transformed potential problem. φ = φ₁ + φ₂ with φ₁ = e^{x₂Λ}ξ harmonic and
//! Δφ₂ = −∇·(Q∇(φ₁ + φ₂)), φ₂|₀ = 0, solved by Picard iteration.

mod quadrature;
pub mod validate;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{harmonic_extension, GeometryBundle, QSamples};
use crate::spectral::{PairFft, SpectrumField};
use crate::strip::{top_derivative, DepthGrid, StripField};

pub use quadrature::{poisson_divform, PoissonSolution, PoissonSolver, Quadrature};

/// φ̂₁(n, x₂) = e^{|n|x₂} ξ̂(n)
pub fn solve_phi1(xi: &SpectrumField, grid: DepthGrid) -> Result<StripField> {
    harmonic_extension(xi, grid)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    /// Stop once the relative strip-norm change of ∇φ₂ drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub quadrature: Quadrature,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, quadrature: Quadrature::Cubic }
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryTraces {
    /// Λξ
    pub dphi1_dz0: SpectrumField,
    /// Λ²ξ
    pub d2phi1_dz0: SpectrumField,
    pub dphi2_dz0: SpectrumField,
    pub d2phi2_dz0: SpectrumField,
}

impl BoundaryTraces {
    /// ∂₂φ|₀
    pub fn dphi_dz0(&self) -> SpectrumField {
        &self.dphi1_dz0 + &self.dphi2_dz0
    }

    /// ∂₂²φ|₀
    pub fn d2phi_dz0(&self) -> SpectrumField {
        &self.d2phi1_dz0 + &self.d2phi2_dz0
    }
}

#[derive(Clone, Debug)]
pub struct EllipticSolution {
    pub phi1: StripField,
    pub phi2: StripField,
    pub dz_phi2: StripField,
    /// g = −Q∇φ evaluated at the returned φ.
    pub g_last: [StripField; 2],
    pub traces: BoundaryTraces,
    pub picard_iters: usize,
    pub increments: Vec<f64>,
    /// max |A^ℓ_j(A^k_jφ,_k),_ℓ| over interior nodes, relative to max |∇φ|.
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl EllipticSolution {
    /// ∂₂φ₁ + ∂₂φ₂ as a strip field.
    pub fn dz_phi(&self) -> StripField {
        self.phi1.map_modes(|k| Complex64::new(k as f64, 0.0)).axpy(1.0, &self.dz_phi2)
    }

    pub fn phi(&self) -> StripField {
        self.phi1.axpy(1.0, &self.phi2)
    }

    /// Geometric mean ratio of successive Picard increments.
    pub fn contraction_ratio(&self) -> Option<f64> {
        let inc: Vec<f64> = self.increments.iter().copied().filter(|&x| x > 0.0).collect();
        if inc.len() < 3 {
            return None;
        }
        let n = inc.len() - 1;
        Some(((inc[n].ln() - inc[0].ln()) / n as f64).exp())
    }
}

fn node_half(u: &StripField, j: usize, out: &mut [Complex64]) {
    for (k, o) in out.iter_mut().enumerate() {
        *o = u.column(k)[j];
    }
}

fn set_node_half(u: &mut StripField, j: usize, v: &[Complex64]) {
    for (k, c) in v.iter().enumerate() {
        u.column_mut(k)[j] = *c;
    }
}

/// g = −Q∇φ, pointwise on the padded grid at every depth node.
fn flux(s: &QSamples, fft: &mut PairFft, d1: &StripField, d2: &StripField) -> Result<[StripField; 2]> {
    let (n, grid) = (d1.n_modes(), d1.grid());
    let half = n / 2 + 1;
    let mut g1 = StripField::zeros(n, grid)?;
    let mut g2 = StripField::zeros(n, grid)?;
    let zero = Complex64::new(0.0, 0.0);
    let (mut u, mut v) = (vec![zero; half], vec![zero; half]);
    let (mut bu, mut bv) = (vec![0.0; s.m], vec![0.0; s.m]);
    for j in 0..grid.nodes() {
        node_half(d1, j, &mut u);
        node_half(d2, j, &mut v);
        fft.sample(&u, &v, &mut bu, &mut bv);
        let (q11, q12, q22) = s.node(j);
        for i in 0..s.m {
            let (a, b) = (bu[i], bv[i]);
            bu[i] = -(q11[i] * a + q12[i] * b);
            bv[i] = -(q12[i] * a + q22[i] * b);
        }
        fft.project(&bu, &bv, &mut u, &mut v);
        set_node_half(&mut g1, j, &u);
        set_node_half(&mut g2, j, &v);
    }
    Ok([g1, g2])
}

fn grad_norm(d1: &StripField, d2: &StripField) -> f64 {
    d1.weighted_abs_integral(0.0, 0.0).value + d2.weighted_abs_integral(0.0, 0.0).value
}

/// Δφ₁ = 0 exactly, so (1/J)∂_ℓ(M^{ℓk}φ,_k) = (1/J)[Δφ₂ − ∇·g]. ∂₁ is
/// spectral and ∂₂ the fourth-order stencil; only interior nodes count.
fn full_residual(
    s: &QSamples,
    fft: &mut PairFft,
    grad: [&StripField; 2],
    grad2: [&StripField; 2],
    g: &[StripField; 2],
) -> f64 {
    let f1 = grad2[0].axpy(-1.0, &g[0]);
    let f2 = grad2[1].axpy(-1.0, &g[1]);
    let r = f1.d1().axpy(1.0, &f2.dz_stencil());
    let (n, grid) = (r.n_modes(), r.grid());
    let half = n / 2 + 1;
    let zero = Complex64::new(0.0, 0.0);
    let (mut u, mut v) = (vec![zero; half], vec![zero; half]);
    let (mut bu, mut bv) = (vec![0.0; s.m], vec![0.0; s.m]);
    let mut scale: f64 = 0.0;
    let mut worst: f64 = 0.0;
    let nz = grid.intervals();
    for j in 0..grid.nodes() {
        node_half(grad[0], j, &mut u);
        node_half(grad[1], j, &mut v);
        fft.sample(&u, &v, &mut bu, &mut bv);
        scale = bu.iter().chain(&bv).fold(scale, |m, x| m.max(x.abs()));
        if j < 2 || j > nz - 2 {
            continue;
        }
        node_half(&r, j, &mut u);
        v.iter_mut().for_each(|c| *c = zero);
        fft.sample(&u, &v, &mut bu, &mut bv);
        let (q11, _, _) = s.node(j);
        for i in 0..s.m {
            worst = worst.max((bu[i] / (1.0 + q11[i])).abs());
        }
    }
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

/// ∂₂φ|₀ and ∂₂²φ|₀ split into φ₁ and φ₂ parts. ∂₂²φ|₀ solves the
/// conservative equation pointwise at x₂ = 0, where φ,₁ = ξ,₁, J = 1 + Λs,
/// δψ,₁ = s,₁, δψ,₁₁ = s,₁₁ and δψ,₁₂ = ∂₁Λs:
///   M²²φ,₂₂ = −[Jφ,₁₁ − 2δψ,₁φ,₁₂ + (∂₁M¹² + ∂₂M²²)φ,₂].
pub fn boundary_traces(bundle: &GeometryBundle, phi1: &StripField, dz_phi2: &StripField) -> Result<BoundaryTraces> {
    let xi = phi1.trace();
    let dphi1 = xi.lambda();
    let d2phi1 = xi.lambda_pow(2.0);
    let dphi2 = dz_phi2.trace();
    let s = &bundle.interface;
    let a = s.d1();
    let p = s.lambda();
    let s11 = s.d11();
    let d12 = p.d1();
    let f11 = xi.d11();
    let f2 = &dphi1 + &dphi2;
    let f12 = f2.d1();
    let total = SpectrumField::map_pointwise(&[&a, &p, &s11, &d12, &f11, &f12, &f2], |v| {
        let (a, p, s11, d12, f11, f12, f2) = (v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
        let j = 1.0 + p;
        let c2 = -s11 + 2.0 * a * d12 / j + (1.0 + a * a) * s11 / (j * j);
        -(j * f11 - 2.0 * a * f12 + c2 * f2) * j / (1.0 + a * a)
    })?;
    Ok(BoundaryTraces {
        d2phi2_dz0: &total - &d2phi1,
        dphi1_dz0: dphi1,
        d2phi1_dz0: d2phi1,
        dphi2_dz0: dphi2,
    })
}

/// Independent routes to ∂₂²φ₂|₀, as max coefficient gaps from the traced value.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceCrossCheck {
    /// One-sided stencil on the kernel ∂₂φ₂ column.
    pub kernel_column: f64,
    /// (∂₁g₁ + ∂₂g₂)|₀ with ∂₂g₂ by one-sided stencil.
    pub divergence: f64,
}

pub fn trace_cross_check(sol: &EllipticSolution) -> TraceCrossCheck {
    let grid = sol.dz_phi2.grid();
    let h = grid.dz();
    let target = &sol.traces.d2phi2_dz0;
    let div_g1 = sol.g_last[0].trace().d1();
    let mut kernel: f64 = 0.0;
    let mut div: f64 = 0.0;
    for k in 0..sol.dz_phi2.n_modes() / 2 {
        let t = target.half()[k];
        kernel = kernel.max((top_derivative(sol.dz_phi2.column(k), h) - t).norm());
        let d = div_g1.half()[k] + top_derivative(sol.g_last[1].column(k), h);
        div = div.max((d - t).norm());
    }
    TraceCrossCheck { kernel_column: kernel, divergence: div }
}

/// Picard iteration φ₂^{m+1} = P(−Q∇(φ₁ + φ₂^m)), φ₂^0 = 0.
pub fn solve_phi2(bundle: &GeometryBundle, phi1: &StripField, opts: &PicardOptions) -> Result<EllipticSolution> {
    let (n, grid) = (bundle.n_modes(), bundle.grid());
    if phi1.n_modes() != n || phi1.grid() != grid {
        return Err(Error::Config("φ₁ does not match the geometry grid".into()));
    }
    if !(bundle.diffeo_margin > 0.0) {
        return Err(Error::GeometryDegenerate { margin: bundle.diffeo_margin });
    }
    let solver = PoissonSolver::new(n, grid, opts.quadrature)?;
    let mut fft = PairFft::new(n, bundle.samples.m);
    let d1_phi1 = phi1.d1();
    let d2_phi1 = phi1.map_modes(|k| Complex64::new(k as f64, 0.0));
    let base = grad_norm(&d1_phi1, &d2_phi1);
    let mut phi2 = StripField::zeros(n, grid)?;
    let mut dz2 = StripField::zeros(n, grid)?;
    let mut increments = Vec::new();
    let mut warnings = Vec::new();
    let mut converged = false;
    for it in 1..=opts.max_iter.max(1) {
        let g = flux(&bundle.samples, &mut fft, &d1_phi1.axpy(1.0, &phi2.d1()), &d2_phi1.axpy(1.0, &dz2))?;
        let next = solver.solve(&g[0], &g[1])?;
        let diff = grad_norm(&next.phi.axpy(-1.0, &phi2).d1(), &next.dz_phi.axpy(-1.0, &dz2));
        let inc = if base > 0.0 { diff / base } else { diff };
        increments.push(inc);
        if !inc.is_finite() || inc > 1e6 {
            return Err(Error::Contraction { iterations: it, increment: inc });
        }
        warnings = next.warnings(opts.tol.max(1e-12) * base.max(1.0));
        phi2 = next.phi;
        dz2 = next.dz_phi;
        if inc <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Contraction {
            iterations: increments.len(),
            increment: *increments.last().unwrap_or(&f64::NAN),
        });
    }
    let d1_phi2 = phi2.d1();
    let d1 = d1_phi1.axpy(1.0, &d1_phi2);
    let d2 = d2_phi1.axpy(1.0, &dz2);
    let g_last = flux(&bundle.samples, &mut fft, &d1, &d2)?;
    let residual = full_residual(&bundle.samples, &mut fft, [&d1, &d2], [&d1_phi2, &dz2], &g_last);
    let traces = boundary_traces(bundle, phi1, &dz2)?;
    Ok(EllipticSolution {
        phi1: phi1.clone(),
        phi2,
        dz_phi2: dz2,
        g_last,
        traces,
        picard_iters: increments.len(),
        increments,
        residual,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, DEFAULT_MARGIN_MIN};

    fn setup(n: usize, nz: usize, h_amp: f64, xi_amp: f64) -> (GeometryBundle, StripField) {
        let grid = DepthGrid::new(8.0, nz).unwrap();
        let h = SpectrumField::cos_mode(n, 1, h_amp).unwrap();
        let xi = SpectrumField::sin_mode(n, 1, xi_amp).unwrap();
        let b = build_geometry(&h, grid, DEFAULT_MARGIN_MIN).unwrap();
        let phi1 = solve_phi1(&xi, grid).unwrap();
        (b, phi1)
    }

    #[test]
    fn phi1_closed_forms() {
        let grid = DepthGrid::new(8.0, 64).unwrap();
        let xi = SpectrumField::cos_mode(16, 1, 1.0).unwrap();
        let p = solve_phi1(&xi, grid).unwrap();
        let j = 40;
        assert!((p.column(1)[j].re - 0.5 * grid.z(j).exp()).abs() < 1e-15);
        assert!(p.trace().max_diff(&xi) < 1e-15);
        let xi2 = SpectrumField::cos_mode(16, 2, 1.0).unwrap();
        let b = build_geometry(&SpectrumField::zeros(16).unwrap(), grid, 0.1).unwrap();
        let p2 = solve_phi1(&xi2, grid).unwrap();
        let t = boundary_traces(&b, &p2, &StripField::zeros(16, grid).unwrap()).unwrap();
        assert!(t.d2phi1_dz0.max_diff(&xi2.scale(4.0)) < 1e-15);
        assert!(t.dphi1_dz0.max_diff(&xi2.scale(2.0)) < 1e-15);
        assert!(solve_phi1(&SpectrumField::zeros(16).unwrap(), grid).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn flat_interface_needs_one_iteration() {
        let (b, phi1) = setup(16, 64, 0.0, 0.3);
        let sol = solve_phi2(&b, &phi1, &PicardOptions::default()).unwrap();
        assert_eq!(sol.picard_iters, 1);
        assert_eq!(sol.phi2.max_abs(), 0.0);
        assert_eq!(sol.traces.dphi2_dz0.max_abs_coeff(), 0.0);
        assert!(sol.traces.d2phi2_dz0.max_abs_coeff() < 1e-15);
    }

    #[test]
    fn picard_converges_with_small_residual() {
        let (b, phi1) = setup(64, 512, 0.05, 0.05);
        let sol = solve_phi2(&b, &phi1, &PicardOptions::default()).unwrap();
        assert!(sol.picard_iters <= 20, "{}", sol.picard_iters);
        assert!(sol.residual <= 1e-8, "residual {:e}", sol.residual);
        assert!(sol.phi2.trace().max_abs_coeff() < 1e-15);
        for w in sol.increments.windows(2) {
            if w[1] > 1e-14 {
                assert!(w[1] < 0.5 * w[0], "{:?}", sol.increments);
            }
        }
        let cc = trace_cross_check(&sol);
        assert!(cc.kernel_column < 1e-6 && cc.divergence < 1e-6, "{cc:?}");
    }

    #[test]
    fn large_amplitude_is_reported_as_contraction_failure() {
        let (_, phi1) = setup(32, 128, 0.0, 1.0);
        let h = SpectrumField::cos_mode(32, 3, 0.28).unwrap();
        let b = build_geometry(&h, phi1.grid(), 0.05).unwrap();
        let opts = PicardOptions { tol: 1e-12, max_iter: 6, quadrature: Quadrature::Cubic };
        match solve_phi2(&b, &phi1, &opts) {
            Err(Error::Contraction { .. }) => {}
            other => panic!("expected contraction failure, got {:?}", other.map(|s| s.picard_iters)),
        }
    }
}
