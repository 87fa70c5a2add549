//! Fields on the half-strip 𝕋×(−∞,0], truncated to [−L_d, 0] and stored
//! mode by mode on a uniform depth grid.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{check_modes, SpectrumField};

/// Uniform depth grid with `n_z` intervals on [−depth, 0]. Node `n_z` is the
/// surface x₂ = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthGrid {
    depth: f64,
    n_z: usize,
}

impl DepthGrid {
    pub fn new(depth: f64, n_z: usize) -> Result<Self> {
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(Error::Config(format!("depth must be positive, got {depth}")));
        }
        if n_z < 8 || n_z % 2 != 0 {
            return Err(Error::Config(format!(
                "depth intervals must be even and at least 8, got {n_z}"
            )));
        }
        Ok(Self { depth, n_z })
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn intervals(&self) -> usize {
        self.n_z
    }

    pub fn nodes(&self) -> usize {
        self.n_z + 1
    }

    pub fn dz(&self) -> f64 {
        self.depth / self.n_z as f64
    }

    pub fn z(&self, j: usize) -> f64 {
        if j == self.n_z {
            0.0
        } else {
            -self.depth + j as f64 * self.dz()
        }
    }

    pub fn zs(&self) -> Vec<f64> {
        (0..self.nodes()).map(|j| self.z(j)).collect()
    }
}

/// Weighted strip integral with its estimated truncation tail. `value`
/// already includes `tail`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StripNorm {
    pub value: f64,
    pub tail: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StripField {
    n_modes: usize,
    grid: DepthGrid,
    data: Vec<Complex64>,
}

impl StripField {
    pub fn zeros(n_modes: usize, grid: DepthGrid) -> Result<Self> {
        check_modes(n_modes)?;
        Ok(Self {
            n_modes,
            grid,
            data: vec![Complex64::new(0.0, 0.0); (n_modes / 2 + 1) * grid.nodes()],
        })
    }

    /// Builds columns from `f(k, x₂)` for k = 0..N/2−1.
    pub fn from_fn<F: Fn(usize, f64) -> Complex64>(
        n_modes: usize,
        grid: DepthGrid,
        f: F,
    ) -> Result<Self> {
        let mut u = Self::zeros(n_modes, grid)?;
        let zs = grid.zs();
        for k in 0..n_modes / 2 {
            let col = u.column_mut(k);
            for (c, &z) in col.iter_mut().zip(&zs) {
                *c = f(k, z);
            }
            if k == 0 {
                col.iter_mut().for_each(|c| c.im = 0.0);
            }
        }
        Ok(u)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn grid(&self) -> DepthGrid {
        self.grid
    }

    pub fn column(&self, k: usize) -> &[Complex64] {
        let n = self.grid.nodes();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn column_mut(&mut self, k: usize) -> &mut [Complex64] {
        let n = self.grid.nodes();
        &mut self.data[k * n..(k + 1) * n]
    }

    /// Coefficient of mode n (either sign) at node j.
    pub fn coeff(&self, n: i64, j: usize) -> Complex64 {
        let k = n.unsigned_abs() as usize;
        if k >= self.n_modes / 2 {
            return Complex64::new(0.0, 0.0);
        }
        let c = self.column(k)[j];
        if n < 0 {
            c.conj()
        } else {
            c
        }
    }

    pub fn at_node(&self, j: usize) -> SpectrumField {
        let half: Vec<Complex64> = (0..=self.n_modes / 2)
            .map(|k| if k < self.n_modes / 2 { self.column(k)[j] } else { Complex64::new(0.0, 0.0) })
            .collect();
        SpectrumField::from_half(self.n_modes, half).expect("sizes agree")
    }

    pub fn set_node(&mut self, j: usize, f: &SpectrumField) {
        assert_eq!(f.n_modes(), self.n_modes, "mode count mismatch");
        for k in 0..self.n_modes / 2 {
            self.column_mut(k)[j] = f.half()[k];
        }
    }

    /// Boundary trace at x₂ = 0.
    pub fn trace(&self) -> SpectrumField {
        self.at_node(self.grid.n_z)
    }

    pub fn map_modes<F: Fn(usize) -> Complex64>(&self, m: F) -> Self {
        let mut out = self.clone();
        for k in 0..self.n_modes / 2 {
            let mk = m(k);
            out.column_mut(k).iter_mut().for_each(|c| *c *= mk);
        }
        out
    }

    pub fn d1(&self) -> Self {
        self.map_modes(|k| Complex64::new(0.0, k as f64))
    }

    pub fn lambda_pow(&self, p: f64) -> Self {
        if p == 0.0 {
            return self.clone();
        }
        self.map_modes(|k| Complex64::new(if k == 0 { 0.0 } else { (k as f64).powf(p) }, 0.0))
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|c| *c *= a);
        out
    }

    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        self.same_shape(other);
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x += y * a;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        self.same_shape(other);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Fourth-order finite-difference ∂₂ (central inside, one-sided at both ends).
    pub fn dz_stencil(&self) -> Self {
        let mut out = self.clone();
        let h = self.grid.dz();
        for k in 0..self.n_modes / 2 {
            let d = stencil_d1(self.column(k), h);
            out.column_mut(k).copy_from_slice(&d);
        }
        out
    }

    /// Fourth-order finite-difference ∂₂².
    pub fn dzz_stencil(&self) -> Self {
        let mut out = self.clone();
        let h = self.grid.dz();
        for k in 0..self.n_modes / 2 {
            let d = stencil_d2(self.column(k), h);
            out.column_mut(k).copy_from_slice(&d);
        }
        out
    }

    /// Σ_n (1+|n|)^s e^{λ|n|} ∫|û(n,x₂)| dx₂ over both signs of n.
    pub fn weighted_abs_integral(&self, s: f64, lambda: f64) -> StripNorm {
        let mut value = 0.0;
        let mut tail = 0.0;
        for k in 0..self.n_modes / 2 {
            let (q, t) = abs_integral(self.column(k), k, self.grid);
            let kf = k as f64;
            let w = (1.0 + kf).powf(s) * (lambda * kf).exp() * if k == 0 { 1.0 } else { 2.0 };
            value += w * (q + t);
            tail += w * t;
        }
        StripNorm { value, tail }
    }

    /// Per-node Σ_n |û(n,x₂)|, which bounds the sup over x₁ at that depth.
    pub fn node_abs_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.nodes()];
        for k in 0..self.n_modes / 2 {
            let w = if k == 0 { 1.0 } else { 2.0 };
            for (o, c) in out.iter_mut().zip(self.column(k)) {
                *o += w * c.norm();
            }
        }
        out
    }

    fn same_shape(&self, other: &Self) {
        assert_eq!(self.n_modes, other.n_modes, "mode count mismatch");
        assert_eq!(self.grid, other.grid, "depth grid mismatch");
    }
}

/// ∫_{−L_d}^0 |f| by composite Simpson, plus the tail ∫_{−∞}^{−L_d}|f|
/// extrapolated from the decay rate across the two bottom nodes.
pub fn abs_integral(col: &[Complex64], k: usize, grid: DepthGrid) -> (f64, f64) {
    let a: Vec<f64> = col.iter().map(|c| c.norm()).collect();
    let h = grid.dz();
    let n = a.len() - 1;
    let mut s = a[0] + a[n];
    for (j, v) in a.iter().enumerate().take(n).skip(1) {
        s += if j % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    let quad = s * h / 3.0;
    let tail = if a[0] == 0.0 {
        0.0
    } else {
        let rate = if a[1] > a[0] { (a[1] / a[0]).ln() / h } else { (k as f64).max(1.0) };
        a[0] / rate
    };
    (quad, tail)
}

pub(crate) fn stencil_d1(f: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = f.len();
    assert!(n >= 5, "stencil needs five nodes");
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    let s = 1.0 / (12.0 * h);
    d[0] = (f[0] * -25.0 + f[1] * 48.0 - f[2] * 36.0 + f[3] * 16.0 - f[4] * 3.0) * s;
    d[1] = (f[0] * -3.0 - f[1] * 10.0 + f[2] * 18.0 - f[3] * 6.0 + f[4]) * s;
    for j in 2..n - 2 {
        d[j] = (-f[j + 2] + f[j + 1] * 8.0 - f[j - 1] * 8.0 + f[j - 2]) * s;
    }
    let m = n - 1;
    d[m] = (f[m] * 25.0 - f[m - 1] * 48.0 + f[m - 2] * 36.0 - f[m - 3] * 16.0 + f[m - 4] * 3.0) * s;
    d[m - 1] = (f[m] * 3.0 + f[m - 1] * 10.0 - f[m - 2] * 18.0 + f[m - 3] * 6.0 - f[m - 4]) * s;
    d
}

pub(crate) fn stencil_d2(f: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = f.len();
    assert!(n >= 6, "stencil needs six nodes");
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    let s = 1.0 / (12.0 * h * h);
    let edge0 = |g: &dyn Fn(usize) -> Complex64| {
        (g(0) * 45.0 - g(1) * 154.0 + g(2) * 214.0 - g(3) * 156.0 + g(4) * 61.0 - g(5) * 10.0) * s
    };
    let edge1 = |g: &dyn Fn(usize) -> Complex64| {
        (g(0) * 10.0 - g(1) * 15.0 - g(2) * 4.0 + g(3) * 14.0 - g(4) * 6.0 + g(5)) * s
    };
    d[0] = edge0(&|i| f[i]);
    d[1] = edge1(&|i| f[i]);
    for j in 2..n - 2 {
        d[j] = (-f[j + 2] + f[j + 1] * 16.0 - f[j] * 30.0 + f[j - 1] * 16.0 - f[j - 2]) * s;
    }
    let m = n - 1;
    d[m] = edge0(&|i| f[m - i]);
    d[m - 1] = edge1(&|i| f[m - i]);
    d
}

/// One-sided fourth-order ∂₂ at the top node.
pub(crate) fn top_derivative(f: &[Complex64], h: f64) -> Complex64 {
    let m = f.len() - 1;
    (f[m] * 25.0 - f[m - 1] * 48.0 + f[m - 2] * 36.0 - f[m - 3] * 16.0 + f[m - 4] * 3.0)
        / (12.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_col(grid: DepthGrid, rate: f64) -> Vec<Complex64> {
        grid.zs().iter().map(|&z| Complex64::new((rate * z).exp(), 0.0)).collect()
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(DepthGrid::new(0.0, 64).is_err());
        assert!(DepthGrid::new(8.0, 63).is_err());
        let g = DepthGrid::new(8.0, 64).unwrap();
        assert_eq!(g.z(0), -8.0);
        assert_eq!(g.z(64), 0.0);
    }

    #[test]
    fn stencils_are_fourth_order() {
        let mut errs = Vec::new();
        for nz in [32, 64, 128] {
            let g = DepthGrid::new(2.0, nz).unwrap();
            let f: Vec<Complex64> = g.zs().iter().map(|&z| Complex64::new((2.0 * z).sin(), 0.0)).collect();
            let d1 = stencil_d1(&f, g.dz());
            let d2 = stencil_d2(&f, g.dz());
            let e1 = g.zs().iter().zip(&d1).map(|(&z, d)| (d.re - 2.0 * (2.0 * z).cos()).abs()).fold(0.0, f64::max);
            let e2 = g.zs().iter().zip(&d2).map(|(&z, d)| (d.re + 4.0 * (2.0 * z).sin()).abs()).fold(0.0, f64::max);
            errs.push((e1, e2));
        }
        for w in errs.windows(2) {
            assert!((w[0].0 / w[1].0).log2() > 3.7, "{errs:?}");
            assert!((w[0].1 / w[1].1).log2() > 3.5, "{errs:?}");
        }
    }

    #[test]
    fn simpson_with_tail_recovers_full_integral() {
        let g = DepthGrid::new(8.0, 512).unwrap();
        let (q, t) = abs_integral(&exp_col(g, 1.0), 1, g);
        assert!((q + t - 1.0).abs() < 1e-9, "{q} {t}");
        assert!((t - (-8.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn trace_and_nodes() {
        let g = DepthGrid::new(4.0, 16).unwrap();
        let u = StripField::from_fn(8, g, |k, z| Complex64::new(k as f64 * (z + 1.0), 0.0)).unwrap();
        let tr = u.trace();
        assert_eq!(tr.coeff(2), Complex64::new(2.0, 0.0));
        assert_eq!(u.at_node(0).coeff(-3), Complex64::new(-9.0, 0.0));
    }
}
