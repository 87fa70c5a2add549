//! Real periodic functions of x₁ ∈ [0, 2π) stored as Fourier coefficients.
//!
//! Only modes n = 0..=N/2 are stored; negative modes follow from
//! Hermitian symmetry, so every field is real by construction. The
//! Nyquist coefficient is held at zero.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Grid size used for dealiased products: 3N/2 points.
pub fn padded_len(n_modes: usize) -> usize {
    3 * n_modes / 2
}

pub(crate) fn check_modes(n: usize) -> Result<()> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::Config(format!(
            "mode count must be even and at least 4, got {n}"
        )));
    }
    Ok(())
}

/// Transforms two real fields at once through one complex FFT of size m,
/// packing them as u + iv. Used in the per-depth-node hot loops.
pub(crate) struct PairFft {
    m: usize,
    n_modes: usize,
    inv: Arc<dyn Fft<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
}

impl PairFft {
    pub(crate) fn new(n_modes: usize, m: usize) -> Self {
        Self {
            m,
            n_modes,
            inv: plan(m, true),
            fwd: plan(m, false),
            buf: vec![Complex64::new(0.0, 0.0); m],
        }
    }

    /// Samples the fields with half-spectra `u`, `v` (modes 0..N/2) into
    /// `ou`, `ov` on the m-point grid.
    pub(crate) fn sample(&mut self, u: &[Complex64], v: &[Complex64], ou: &mut [f64], ov: &mut [f64]) {
        let i = Complex64::new(0.0, 1.0);
        self.buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        self.buf[0] = Complex64::new(u[0].re, v[0].re);
        for k in 1..self.n_modes / 2 {
            self.buf[k] = u[k] + i * v[k];
            self.buf[self.m - k] = u[k].conj() + i * v[k].conj();
        }
        self.inv.process(&mut self.buf);
        for (j, z) in self.buf.iter().enumerate() {
            ou[j] = z.re;
            ov[j] = z.im;
        }
    }

    /// Projects m-point samples onto modes 0..N/2 (Nyquist zeroed).
    pub(crate) fn project(&mut self, su: &[f64], sv: &[f64], u: &mut [Complex64], v: &mut [Complex64]) {
        for j in 0..self.m {
            self.buf[j] = Complex64::new(su[j], sv[j]);
        }
        self.fwd.process(&mut self.buf);
        let scale = 0.5 / self.m as f64;
        let i = Complex64::new(0.0, 1.0);
        for k in 0..self.n_modes / 2 {
            let a = self.buf[k];
            let b = self.buf[(self.m - k) % self.m].conj();
            u[k] = (a + b) * scale;
            v[k] = (a - b) * (-i) * scale;
        }
        u[0].im = 0.0;
        v[0].im = 0.0;
        u[self.n_modes / 2] = Complex64::new(0.0, 0.0);
        v[self.n_modes / 2] = Complex64::new(0.0, 0.0);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumField {
    n_modes: usize,
    half: Vec<Complex64>,
}

impl SpectrumField {
    pub fn zeros(n_modes: usize) -> Result<Self> {
        check_modes(n_modes)?;
        Ok(Self {
            n_modes,
            half: vec![Complex64::new(0.0, 0.0); n_modes / 2 + 1],
        })
    }

    /// Builds a field from coefficients for n = 0..=N/2. The imaginary part
    /// of the mean and the Nyquist coefficient are discarded.
    pub fn from_half(n_modes: usize, mut half: Vec<Complex64>) -> Result<Self> {
        check_modes(n_modes)?;
        if half.len() != n_modes / 2 + 1 {
            return Err(Error::Config(format!(
                "expected {} coefficients, got {}",
                n_modes / 2 + 1,
                half.len()
            )));
        }
        half[0].im = 0.0;
        half[n_modes / 2] = Complex64::new(0.0, 0.0);
        Ok(Self { n_modes, half })
    }

    /// Sets coeff(k) (and coeff(−k) by symmetry) for each `(k, c)`.
    pub fn from_modes(n_modes: usize, modes: &[(usize, Complex64)]) -> Result<Self> {
        let mut f = Self::zeros(n_modes)?;
        for &(k, c) in modes {
            f.set_coeff(k, c)?;
        }
        Ok(f)
    }

    /// `amp·cos(k x₁)`
    pub fn cos_mode(n_modes: usize, k: usize, amp: f64) -> Result<Self> {
        let c = if k == 0 { amp } else { amp / 2.0 };
        Self::from_modes(n_modes, &[(k, Complex64::new(c, 0.0))])
    }

    /// `amp·sin(k x₁)`
    pub fn sin_mode(n_modes: usize, k: usize, amp: f64) -> Result<Self> {
        Self::from_modes(n_modes, &[(k, Complex64::new(0.0, -amp / 2.0))])
    }

    pub fn constant(n_modes: usize, value: f64) -> Result<Self> {
        Self::from_modes(n_modes, &[(0, Complex64::new(value, 0.0))])
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Largest represented mode (the Nyquist mode is excluded).
    pub fn max_mode(&self) -> usize {
        self.n_modes / 2 - 1
    }

    pub fn half(&self) -> &[Complex64] {
        &self.half
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        let a = k.unsigned_abs() as usize;
        if a >= self.half.len() {
            return Complex64::new(0.0, 0.0);
        }
        if k < 0 {
            self.half[a].conj()
        } else {
            self.half[a]
        }
    }

    pub fn set_coeff(&mut self, k: usize, c: Complex64) -> Result<()> {
        if k > self.max_mode() {
            return Err(Error::Config(format!(
                "mode {k} is not represented with N = {}",
                self.n_modes
            )));
        }
        self.half[k] = if k == 0 { Complex64::new(c.re, 0.0) } else { c };
        Ok(())
    }

    /// Samples on the uniform grid x_j = 2πj/N to coefficients.
    pub fn transform(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        check_modes(n)?;
        Self::project_samples(samples, n)
    }

    /// Values on the N-point grid.
    pub fn inverse(&self) -> Vec<f64> {
        self.sample_on(self.n_modes)
    }

    /// Values on an m-point uniform grid, m ≥ N.
    pub fn sample_on(&self, m: usize) -> Vec<f64> {
        assert!(m >= self.n_modes, "sampling grid smaller than mode count");
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        buf[0] = self.half[0];
        for k in 1..self.n_modes / 2 {
            buf[k] = self.half[k];
            buf[m - k] = self.half[k].conj();
        }
        plan(m, true).process(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Projects samples from an m-point grid (m ≥ N) onto modes |n| < N/2.
    pub fn project_samples(samples: &[f64], n_modes: usize) -> Result<Self> {
        check_modes(n_modes)?;
        let m = samples.len();
        if m < n_modes {
            return Err(Error::Config(format!(
                "cannot project {m} samples onto {n_modes} modes"
            )));
        }
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        plan(m, false).process(&mut buf);
        let scale = 1.0 / m as f64;
        let mut half: Vec<Complex64> = buf[..=n_modes / 2].iter().map(|z| z * scale).collect();
        half[0].im = 0.0;
        half[n_modes / 2] = Complex64::new(0.0, 0.0);
        Ok(Self { n_modes, half })
    }

    /// Grid abscissae x_j = 2πj/m.
    pub fn grid(m: usize) -> Vec<f64> {
        (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect()
    }

    /// coeff_out(n) = m(n)·coeff_in(n). The symbol is evaluated on n ≥ 0 and
    /// extended by m(−n) = conj(m(n)).
    pub fn apply_multiplier<M: Fn(i64) -> Complex64>(&self, m: M) -> Result<Self> {
        let mut out = self.clone();
        for k in 0..self.n_modes / 2 {
            let mk = m(k as i64);
            if !(mk.re.is_finite() && mk.im.is_finite()) {
                return Err(Error::NonFinite { mode: k as i64 });
            }
            out.half[k] = self.half[k] * mk;
        }
        out.half[0].im = 0.0;
        Ok(out)
    }

    /// Multiplier with a real symbol of |n|, known to be finite.
    pub(crate) fn scale_modes<M: Fn(f64) -> f64>(&self, m: M) -> Self {
        let mut out = self.clone();
        for k in 0..self.n_modes / 2 {
            out.half[k] = self.half[k] * m(k as f64);
        }
        out
    }

    /// Calderón operator Λ = |∂₁|.
    pub fn lambda(&self) -> Self {
        self.scale_modes(|k| k)
    }

    /// Λ^p; the zero mode is mapped to zero for p > 0.
    pub fn lambda_pow(&self, p: f64) -> Self {
        if p == 0.0 {
            return self.clone();
        }
        self.scale_modes(|k| if k == 0.0 { 0.0 } else { k.powf(p) })
    }

    pub fn d1(&self) -> Self {
        let mut out = self.clone();
        for k in 0..self.n_modes / 2 {
            out.half[k] = self.half[k] * Complex64::new(0.0, k as f64);
        }
        out
    }

    pub fn d11(&self) -> Self {
        self.scale_modes(|k| -k * k)
    }

    /// Multiplier e^{λ|n|}.
    pub fn exp_weight(&self, lambda: f64) -> Self {
        self.scale_modes(|k| (lambda * k).exp())
    }

    /// Periodic heat kernel at time κ: coeff(n)·e^{−κn²}.
    pub fn mollify(&self, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(Error::Config(format!("mollification κ must be ≥ 0, got {kappa}")));
        }
        if kappa == 0.0 {
            return Ok(self.clone());
        }
        Ok(self.scale_modes(|k| (-kappa * k * k).exp()))
    }

    /// Dealiased product: formed on a 3N/2-point grid, so the result is the
    /// exact projection of f·g onto the represented modes.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.same_size(other)?;
        let m = padded_len(self.n_modes);
        let a = self.sample_on(m);
        let b = other.sample_on(m);
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Self::project_samples(&prod, self.n_modes)
    }

    /// Evaluates `f` pointwise on the padded grid over the given fields and
    /// projects the result back to N modes.
    pub fn map_pointwise<F: Fn(&[f64]) -> f64>(fields: &[&Self], f: F) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| Error::Config("map_pointwise needs at least one field".into()))?;
        for g in fields {
            first.same_size(g)?;
        }
        let m = padded_len(first.n_modes);
        let samples: Vec<Vec<f64>> = fields.iter().map(|g| g.sample_on(m)).collect();
        let mut args = vec![0.0; fields.len()];
        let mut out = Vec::with_capacity(m);
        for j in 0..m {
            for (a, s) in args.iter_mut().zip(&samples) {
                *a = s[j];
            }
            out.push(f(&args));
        }
        Self::project_samples(&out, first.n_modes)
    }

    /// Copies the coefficients into a field with a different mode count,
    /// truncating or zero-padding.
    pub fn resize(&self, n_modes: usize) -> Result<Self> {
        let mut out = Self::zeros(n_modes)?;
        let upto = (n_modes / 2).min(self.n_modes / 2);
        out.half[..upto].copy_from_slice(&self.half[..upto]);
        out.half[n_modes / 2] = Complex64::new(0.0, 0.0);
        Ok(out)
    }

    pub fn mean(&self) -> f64 {
        self.half[0].re
    }

    pub fn without_mean(&self) -> Self {
        let mut out = self.clone();
        out.half[0] = Complex64::new(0.0, 0.0);
        out
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.half.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero_mean(&self) -> bool {
        self.half[0].norm() <= 1e-14 * self.max_abs_coeff()
    }

    pub fn is_finite(&self) -> bool {
        self.half.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        match self.half.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            Some(k) => Err(Error::NonFinite { mode: k as i64 }),
            None => Ok(()),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.half.iter_mut().for_each(|z| *z *= a);
        out
    }

    /// self + a·other
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        assert_eq!(self.n_modes, other.n_modes, "mode count mismatch");
        let mut out = self.clone();
        for (z, w) in out.half.iter_mut().zip(&other.half) {
            *z += w * a;
        }
        out
    }

    /// Largest coefficient difference, for comparisons in tests.
    pub fn max_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n_modes, other.n_modes, "mode count mismatch");
        self.half
            .iter()
            .zip(&other.half)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn same_size(&self, other: &Self) -> Result<()> {
        if self.n_modes != other.n_modes {
            return Err(Error::Config(format!(
                "mode counts differ: {} vs {}",
                self.n_modes, other.n_modes
            )));
        }
        Ok(())
    }
}

impl Add for &SpectrumField {
    type Output = SpectrumField;
    fn add(self, rhs: Self) -> SpectrumField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SpectrumField {
    type Output = SpectrumField;
    fn sub(self, rhs: Self) -> SpectrumField {
        self.axpy(-1.0, rhs)
    }
}

impl Neg for &SpectrumField {
    type Output = SpectrumField;
    fn neg(self) -> SpectrumField {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &SpectrumField {
    type Output = SpectrumField;
    fn mul(self, a: f64) -> SpectrumField {
        self.scale(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_field(rng: &mut ChaCha8Rng, n: usize, band: usize) -> SpectrumField {
        let modes: Vec<(usize, Complex64)> = (0..=band)
            .map(|k| (k, c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
            .collect();
        SpectrumField::from_modes(n, &modes).unwrap()
    }

    #[test]
    fn cosine_samples_give_half_amplitudes() {
        let x = SpectrumField::grid(8);
        let s: Vec<f64> = x.iter().map(|x| x.cos()).collect();
        let f = SpectrumField::transform(&s).unwrap();
        assert!((f.coeff(1) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((f.coeff(-1) - c(0.5, 0.0)).norm() < 1e-15);
        for k in [0, 2, 3] {
            assert!(f.coeff(k).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_samples() {
        let f = SpectrumField::transform(&[0.0; 16]).unwrap();
        assert_eq!(f.max_abs_coeff(), 0.0);
    }

    #[test]
    fn bad_sizes_rejected() {
        assert!(SpectrumField::transform(&[0.0; 7]).is_err());
        assert!(SpectrumField::transform(&[0.0; 2]).is_err());
    }

    #[test]
    fn round_trip_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // band-limited below Nyquist so the round trip is exact
        let f = random_field(&mut rng, 64, 31);
        let s = f.inverse();
        let back = SpectrumField::transform(&s).unwrap().inverse();
        let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = s.iter().zip(&back).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-12 * scale, "err {err}");
    }

    #[test]
    fn multiplier_examples() {
        let cos1 = SpectrumField::cos_mode(16, 1, 1.0).unwrap();
        assert!(cos1.lambda().max_diff(&cos1) < 1e-16);
        assert!(cos1.d11().max_diff(&cos1.scale(-1.0)) < 1e-16);
        let cos2 = SpectrumField::cos_mode(16, 2, 1.0).unwrap();
        let half = cos2.apply_multiplier(|n| c((n.abs() as f64).sqrt(), 0.0)).unwrap();
        assert!(half.max_diff(&cos2.scale(2f64.sqrt())) < 1e-15);
    }

    #[test]
    fn non_finite_symbol_names_mode() {
        let f = SpectrumField::cos_mode(16, 1, 1.0).unwrap();
        let err = f
            .apply_multiplier(|n| if n == 3 { c(f64::INFINITY, 0.0) } else { c(1.0, 0.0) })
            .unwrap_err();
        assert!(matches!(err, Error::NonFinite { mode: 3 }));
    }

    #[test]
    fn mollify_examples() {
        let cos1 = SpectrumField::cos_mode(16, 1, 1.0).unwrap();
        let m = cos1.mollify(0.1).unwrap();
        assert!((m.coeff(1).re - 0.452418709017979).abs() < 1e-12);
        assert_eq!(cos1.mollify(0.0).unwrap(), cos1);
        let cos2 = SpectrumField::cos_mode(16, 2, 1.0).unwrap();
        assert!(cos2.mollify(0.5).unwrap().max_diff(&cos2.scale((-2.0f64).exp())) < 1e-16);
        assert!(cos1.mollify(-1.0).is_err());
    }

    #[test]
    fn product_to_sum() {
        let cos1 = SpectrumField::cos_mode(16, 1, 1.0).unwrap();
        let sq = cos1.product(&cos1).unwrap();
        let expect = &SpectrumField::constant(16, 0.5).unwrap()
            + &SpectrumField::cos_mode(16, 2, 0.5).unwrap();
        assert!(sq.max_diff(&expect) < 1e-15);
        let zero = SpectrumField::zeros(16).unwrap();
        assert_eq!(cos1.product(&zero).unwrap().max_abs_coeff(), 0.0);
        assert!(cos1.product(&SpectrumField::zeros(8).unwrap()).is_err());
    }

    #[test]
    fn product_matches_fine_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_field(&mut rng, 64, 31);
        let g = random_field(&mut rng, 64, 31);
        let coarse = f.product(&g).unwrap();
        let fine = f.resize(256).unwrap().product(&g.resize(256).unwrap()).unwrap();
        let fine_cut = fine.resize(64).unwrap();
        assert!(coarse.max_diff(&fine_cut) < 1e-10);
    }

    #[test]
    fn pair_transform_matches_single_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_field(&mut rng, 32, 15);
        let g = random_field(&mut rng, 32, 15);
        let m = padded_len(32);
        let mut pair = PairFft::new(32, m);
        let (mut a, mut b) = (vec![0.0; m], vec![0.0; m]);
        pair.sample(f.half(), g.half(), &mut a, &mut b);
        let (fa, gb) = (f.sample_on(m), g.sample_on(m));
        for j in 0..m {
            assert!((a[j] - fa[j]).abs() < 1e-13 && (b[j] - gb[j]).abs() < 1e-13);
        }
        let mut u = vec![Complex64::new(0.0, 0.0); 17];
        let mut v = u.clone();
        pair.project(&a, &b, &mut u, &mut v);
        let fu = SpectrumField::from_half(32, u).unwrap();
        let gv = SpectrumField::from_half(32, v).unwrap();
        assert!(fu.max_diff(&f) < 1e-14 && gv.max_diff(&g) < 1e-14);
    }

    #[test]
    fn double_mollify_squares_the_symbol() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_field(&mut rng, 32, 15);
        let twice = f.mollify(0.05).unwrap().mollify(0.05).unwrap();
        for k in 0..16i64 {
            let want = f.coeff(k) * (-0.1 * (k * k) as f64).exp();
            assert!((twice.coeff(k) - want).norm() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn multipliers_compose(seed in 0u64..1000, p in 0.0f64..3.0, lam in 0.0f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_field(&mut rng, 32, 15);
            let a = f.lambda_pow(p).exp_weight(lam);
            let b = f.scale_modes(|k| if k == 0.0 { 0.0 } else { k.powf(p) * (lam * k).exp() });
            let b = if p == 0.0 { f.exp_weight(lam) } else { b };
            prop_assert!(a.max_diff(&b) <= 1e-12 * b.max_abs_coeff().max(1.0));
        }

        #[test]
        fn outputs_stay_real(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_field(&mut rng, 16, 7);
            let g = random_field(&mut rng, 16, 7);
            for out in [f.product(&g).unwrap(), f.d1(), f.lambda(), f.mollify(0.2).unwrap()] {
                prop_assert_eq!(out.coeff(0).im, 0.0);
                prop_assert_eq!(out.coeff(8), Complex64::new(0.0, 0.0));
                for k in 1..8 {
                    prop_assert_eq!(out.coeff(-k), out.coeff(k).conj());
                }
            }
        }
    }
}
