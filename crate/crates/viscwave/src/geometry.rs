//! Flattening map ψ = e + (0, δψ) and the tensors J, A = (∇ψ)⁻¹ and
//! Q = JAAᵀ − Id built from an interface height.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{padded_len, SpectrumField};
use crate::strip::{DepthGrid, StripField};

pub const DEFAULT_MARGIN_MIN: f64 = 0.1;

/// δψ̂(n,x₂) = e^{|n|x₂} ĥ(n)
pub fn harmonic_extension(h: &SpectrumField, grid: DepthGrid) -> Result<StripField> {
    h.check_finite()?;
    StripField::from_fn(h.n_modes(), grid, |k, z| h.half()[k] * (k as f64 * z).exp())
}

/// Q sampled on the padded x₁ grid at every depth node, row-major by node.
#[derive(Clone, Debug)]
pub struct QSamples {
    pub m: usize,
    pub q11: Vec<f64>,
    pub q12: Vec<f64>,
    pub q22: Vec<f64>,
}

impl QSamples {
    pub fn node(&self, j: usize) -> (&[f64], &[f64], &[f64]) {
        let r = j * self.m..(j + 1) * self.m;
        (&self.q11[r.clone()], &self.q12[r.clone()], &self.q22[r])
    }
}

#[derive(Clone, Debug)]
pub struct GeometryBundle {
    pub interface: SpectrumField,
    pub delta_psi: StripField,
    /// δψ,₁
    pub d1_delta_psi: StripField,
    /// δψ,₂
    pub d2_delta_psi: StripField,
    pub jac: StripField,
    pub a: [[StripField; 2]; 2],
    pub q: [[StripField; 2]; 2],
    pub diffeo_margin: f64,
    pub samples: QSamples,
}

impl GeometryBundle {
    pub fn grid(&self) -> DepthGrid {
        self.delta_psi.grid()
    }

    pub fn n_modes(&self) -> usize {
        self.delta_psi.n_modes()
    }

    pub fn is_flat(&self) -> bool {
        self.interface.max_abs_coeff() == 0.0
    }
}

/// Builds δψ, J = 1 + δψ,₂, A = J⁻¹[[J, 0], [−δψ,₁, 1]] and
/// Q = [[δψ,₂, −δψ,₁], [−δψ,₁, (δψ,₁² − δψ,₂)/J]] from the interface `h`.
pub fn build_geometry(h: &SpectrumField, grid: DepthGrid, margin_min: f64) -> Result<GeometryBundle> {
    let n = h.n_modes();
    let delta_psi = harmonic_extension(h, grid)?;
    let d1 = delta_psi.d1();
    let d2 = delta_psi.map_modes(|k| Complex64::new(k as f64, 0.0));
    let m = padded_len(n);
    let nodes = grid.nodes();

    let mut jac = d2.clone();
    for j in 0..nodes {
        jac.column_mut(0)[j] += Complex64::new(1.0, 0.0);
    }
    let mut a21 = StripField::zeros(n, grid)?;
    let mut a22 = StripField::zeros(n, grid)?;
    let mut q22 = StripField::zeros(n, grid)?;
    let mut samples = QSamples {
        m,
        q11: Vec::with_capacity(m * nodes),
        q12: Vec::with_capacity(m * nodes),
        q22: Vec::with_capacity(m * nodes),
    };
    let mut margin = f64::INFINITY;
    let mut buf21 = vec![0.0; m];
    let mut buf22 = vec![0.0; m];
    let mut bufq = vec![0.0; m];
    for j in 0..nodes {
        let a = d1.at_node(j).sample_on(m);
        let p = d2.at_node(j).sample_on(m);
        for i in 0..m {
            let jj = 1.0 + p[i];
            margin = margin.min(jj);
            buf21[i] = -a[i] / jj;
            buf22[i] = 1.0 / jj;
            bufq[i] = (a[i] * a[i] - p[i]) / jj;
        }
        a21.set_node(j, &SpectrumField::project_samples(&buf21, n)?);
        a22.set_node(j, &SpectrumField::project_samples(&buf22, n)?);
        q22.set_node(j, &SpectrumField::project_samples(&bufq, n)?);
        samples.q11.extend_from_slice(&p);
        samples.q12.extend(a.iter().map(|x| -x));
        samples.q22.extend_from_slice(&bufq);
    }
    if !(margin > margin_min) {
        return Err(Error::NotDiffeomorphism { margin, required: margin_min });
    }
    let mut one = StripField::zeros(n, grid)?;
    for j in 0..nodes {
        one.column_mut(0)[j] = Complex64::new(1.0, 0.0);
    }
    let zero = StripField::zeros(n, grid)?;
    let q12 = d1.scale(-1.0);
    Ok(GeometryBundle {
        interface: h.clone(),
        q: [[d2.clone(), q12.clone()], [q12, q22]],
        a: [[one, zero], [a21, a22]],
        jac,
        delta_psi,
        d1_delta_psi: d1,
        d2_delta_psi: d2,
        diffeo_margin: margin,
        samples,
    })
}

fn node_product(a: &StripField, b: &StripField) -> Result<StripField> {
    let mut out = StripField::zeros(a.n_modes(), a.grid())?;
    for j in 0..a.grid().nodes() {
        out.set_node(j, &a.at_node(j).product(&b.at_node(j))?);
    }
    Ok(out)
}

fn max_node_sum(u: &StripField) -> f64 {
    u.node_abs_sums().into_iter().fold(0.0, f64::max)
}

/// max over i and nodes of |(JA¹ᵢ),₁ + (JA²ᵢ),₂|, with ∂₁ spectral and ∂₂ by
/// the fourth-order stencil. Per-node values are bounded by Σ_n|û(n)|.
pub fn check_piola(b: &GeometryBundle) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        let ja1 = node_product(&b.jac, &b.a[0][i])?;
        let ja2 = node_product(&b.jac, &b.a[1][i])?;
        let res = ja1.d1().axpy(1.0, &ja2.dz_stencil());
        worst = worst.max(max_node_sum(&res));
    }
    Ok(worst)
}

/// max over entries and nodes of |A·∇ψ − Id|, ∇ψ = [[1, 0], [δψ,₁, 1 + δψ,₂]].
pub fn check_inverse(b: &GeometryBundle) -> Result<f64> {
    let n = b.n_modes();
    let grid = b.grid();
    let mut one = StripField::zeros(n, grid)?;
    for j in 0..grid.nodes() {
        one.column_mut(0)[j] = Complex64::new(1.0, 0.0);
    }
    let grad = [[one.clone(), StripField::zeros(n, grid)?], [b.d1_delta_psi.clone(), b.jac.clone()]];
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for jx in 0..2 {
            let mut e = node_product(&b.a[i][0], &grad[0][jx])?.axpy(1.0, &node_product(&b.a[i][1], &grad[1][jx])?);
            if i == jx {
                e = e.axpy(-1.0, &one);
            }
            worst = worst.max(max_node_sum(&e));
        }
    }
    Ok(worst)
}

/// Interior residual of Δδψ (spectral ∂₁², fourth-order ∂₂²), relative to max|δψ̂|.
pub fn laplacian_residual(u: &StripField) -> f64 {
    let lap = u.dzz_stencil().axpy(1.0, &u.d1().d1());
    let nodes = u.grid().nodes();
    let mut worst: f64 = 0.0;
    for k in 0..u.n_modes() / 2 {
        for c in &lap.column(k)[2..nodes - 2] {
            worst = worst.max(c.norm());
        }
    }
    worst / u.max_abs().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wiener::wiener_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> DepthGrid {
        DepthGrid::new(8.0, 512).unwrap()
    }

    #[test]
    fn extension_closed_form() {
        let h = SpectrumField::cos_mode(16, 1, 0.1).unwrap();
        let u = harmonic_extension(&h, grid()).unwrap();
        for (j, z) in grid().zs().into_iter().enumerate() {
            assert!((u.coeff(1, j).re - 0.05 * z.exp()).abs() < 1e-16);
        }
        assert_eq!(u.trace(), h);
        let zero = harmonic_extension(&SpectrumField::zeros(16).unwrap(), grid()).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn extension_is_harmonic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let modes: Vec<(usize, Complex64)> = (1..6)
            .map(|k| (k, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
            .collect();
        let h = SpectrumField::from_modes(32, &modes).unwrap();
        let u = harmonic_extension(&h, DepthGrid::new(8.0, 1024).unwrap()).unwrap();
        assert!(laplacian_residual(&u) <= 1e-6, "{}", laplacian_residual(&u));
    }

    #[test]
    fn flat_interface() {
        let b = build_geometry(&SpectrumField::zeros(16).unwrap(), DepthGrid::new(4.0, 32).unwrap(), 0.1).unwrap();
        assert_eq!(b.diffeo_margin, 1.0);
        for row in &b.q {
            for q in row {
                assert_eq!(q.max_abs(), 0.0);
            }
        }
        assert_eq!(b.a[1][0].max_abs(), 0.0);
        assert!((b.a[1][1].coeff(0, 5).re - 1.0).abs() < 1e-15);
        assert_eq!(check_piola(&b).unwrap(), 0.0);
    }

    #[test]
    fn cosine_interface_at_origin() {
        let h = SpectrumField::cos_mode(64, 1, 0.1).unwrap();
        let b = build_geometry(&h, grid(), 0.1).unwrap();
        let top = grid().intervals();
        let at0 = |f: &StripField| f.at_node(top).inverse()[0];
        assert!((at0(&b.jac) - 1.1).abs() < 1e-15);
        assert!((at0(&b.a[1][1]) - 1.0 / 1.1).abs() < 1e-14);
        assert!(at0(&b.a[1][0]).abs() < 1e-15);
        let ext = harmonic_extension(&h, grid()).unwrap();
        let d2 = ext.map_modes(|k| Complex64::new(k as f64, 0.0));
        assert_eq!(b.q[0][0], d2);
        assert_eq!(b.q[0][1], b.q[1][0]);
        assert_eq!(b.a[0][0].coeff(0, 3), Complex64::new(1.0, 0.0));
        assert_eq!(b.a[0][1].max_abs(), 0.0);
    }

    #[test]
    fn piola_and_inverse_identities() {
        let h = SpectrumField::cos_mode(64, 1, 0.1).unwrap();
        let b = build_geometry(&h, grid(), 0.1).unwrap();
        assert!(check_piola(&b).unwrap() <= 1e-8);
        assert!(check_inverse(&b).unwrap() <= 1e-10);
    }

    #[test]
    fn piola_converges_at_fourth_order() {
        let h = SpectrumField::cos_mode(64, 2, 0.05).unwrap();
        let r: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&nz| check_piola(&build_geometry(&h, DepthGrid::new(8.0, nz).unwrap(), 0.1).unwrap()).unwrap())
            .collect();
        for w in r.windows(2) {
            assert!((w[0] / w[1]).log2() > 3.5, "{r:?}");
        }
    }

    #[test]
    fn large_interface_is_rejected() {
        let h = SpectrumField::cos_mode(16, 3, 0.4).unwrap();
        let err = build_geometry(&h, DepthGrid::new(4.0, 32).unwrap(), 0.1).unwrap_err();
        assert!(matches!(err, Error::NotDiffeomorphism { .. }));
    }

    #[test]
    fn margin_tracks_amplitude() {
        // 1 − min J ≤ |δψ,₂|_∞ ≤ |h|_{1,0}
        for amp in [0.01, 0.03, 0.1] {
            let h = &SpectrumField::cos_mode(16, 2, amp).unwrap() + &SpectrumField::sin_mode(16, 1, amp).unwrap();
            let b = build_geometry(&h, DepthGrid::new(4.0, 32).unwrap(), 0.1).unwrap();
            assert!(1.0 - b.diffeo_margin <= wiener_norm(&h, 1.0, 0.0).unwrap());
        }
    }
}
