//! Spectral differentiation and diagonal solves on the (possibly extended)
//! periodic grid.
//!
//! All derivatives are trigonometric: exact for resolved modes. A slip
//! channel is handled by extending fields onto the doubled periodic grid
//! with the parity of the field, transforming there, and restricting back.
//! Nonlinear products are formed pointwise on the grid and dealiased with
//! the 2/3 rule when they re-enter modal space.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::Result;
use crate::grid::{DomainSpec, Parity, ScalarField, TensorField, VectorField, MAX_DIM};
use crate::scalar::{lit, Scalar};

/// FFT plans plus wavenumber tables for the extended grid.
pub struct SpectralEngine<T: Scalar> {
    dim: usize,
    /// Physical resolution.
    res: [usize; MAX_DIM],
    /// Extended resolution (wall axis doubled).
    ext: [usize; MAX_DIM],
    wall_axis: Option<usize>,
    /// First-derivative multipliers `2π m / L_ext`, Nyquist zeroed.
    kd: [Vec<T>; MAX_DIM],
    /// Squared wavenumbers for the Laplacian symbol, Nyquist kept.
    k2: [Vec<T>; MAX_DIM],
    /// 2/3-rule keep flags per axis.
    keep: [Vec<bool>; MAX_DIM],
    fwd: Vec<Arc<dyn Fft<T>>>,
    inv: Vec<Arc<dyn Fft<T>>>,
}

impl<T: Scalar> SpectralEngine<T> {
    pub fn new(spec: &DomainSpec<T>) -> Self {
        let dim = spec.dim;
        let wall_axis = spec.wall_axis();
        let mut ext = [1usize; MAX_DIM];
        let mut ext_len = [T::one(); MAX_DIM];
        for a in 0..MAX_DIM {
            let doubled = wall_axis == Some(a);
            ext[a] = spec.resolution[a] * if doubled { 2 } else { 1 };
            ext_len[a] = spec.lengths[a] * if doubled { lit(2.0) } else { T::one() };
        }

        let mut planner = FftPlanner::<T>::new();
        let mut fwd = Vec::with_capacity(dim);
        let mut inv = Vec::with_capacity(dim);
        let mut kd: [Vec<T>; MAX_DIM] = Default::default();
        let mut k2: [Vec<T>; MAX_DIM] = Default::default();
        let mut keep: [Vec<bool>; MAX_DIM] = Default::default();
        for a in 0..MAX_DIM {
            let n = ext[a];
            if a < dim {
                fwd.push(planner.plan_fft_forward(n));
                inv.push(planner.plan_fft_inverse(n));
            }
            let two_pi_over_l = lit::<T>(2.0) * T::PI() / ext_len[a];
            let mut kda = Vec::with_capacity(n);
            let mut k2a = Vec::with_capacity(n);
            let mut keepa = Vec::with_capacity(n);
            for i in 0..n {
                let m: i64 = if n == 1 || i < n / 2 { i as i64 } else { i as i64 - n as i64 };
                let k = two_pi_over_l * lit(m as f64);
                let nyquist = n > 1 && i == n / 2;
                kda.push(if nyquist { T::zero() } else { k });
                k2a.push(k * k);
                keepa.push(3 * m.unsigned_abs() as usize <= n);
            }
            kd[a] = kda;
            k2[a] = k2a;
            keep[a] = keepa;
        }

        Self { dim, res: spec.resolution, ext, wall_axis, kd, k2, keep, fwd, inv }
    }

    pub fn ext_points(&self) -> usize {
        self.ext.iter().product()
    }

    pub fn ext_resolution(&self) -> [usize; MAX_DIM] {
        self.ext
    }

    pub fn deriv_table(&self, axis: usize) -> &[T] {
        &self.kd[axis]
    }

    fn ext_multi(&self, flat: usize) -> [usize; MAX_DIM] {
        let nx = self.ext[0];
        let ny = self.ext[1];
        [flat % nx, (flat / nx) % ny, flat / (nx * ny)]
    }

    /// Mirror a physical field onto the extended grid.
    pub fn extend(&self, phys: &[T], parity: Parity) -> Vec<T> {
        let Some(w) = self.wall_axis else {
            return phys.to_vec();
        };
        let nw = self.res[w];
        let mut out = vec![T::zero(); self.ext_points()];
        for (flat, o) in out.iter_mut().enumerate() {
            let mut idx = self.ext_multi(flat);
            let (sign, pw) = if idx[w] >= nw {
                (T::one(), idx[w] - nw)
            } else {
                let s = match parity {
                    Parity::Even => T::one(),
                    Parity::Odd => -T::one(),
                };
                (s, nw - 1 - idx[w])
            };
            idx[w] = pw;
            let phys_flat = idx[0] + self.res[0] * (idx[1] + self.res[1] * idx[2]);
            *o = sign * phys[phys_flat];
        }
        out
    }

    /// Keep the physical half of an extended field.
    pub fn restrict(&self, ext: &[T]) -> Vec<T> {
        let Some(w) = self.wall_axis else {
            return ext.to_vec();
        };
        let nw = self.res[w];
        let npts: usize = self.res.iter().product();
        let mut out = vec![T::zero(); npts];
        for (flat, o) in out.iter_mut().enumerate() {
            let nx = self.res[0];
            let ny = self.res[1];
            let mut idx = [flat % nx, (flat / nx) % ny, flat / (nx * ny)];
            idx[w] += nw;
            let ext_flat = idx[0] + self.ext[0] * (idx[1] + self.ext[1] * idx[2]);
            *o = ext[ext_flat];
        }
        out
    }

    fn fft_axis(&self, buf: &mut [Complex<T>], axis: usize, forward: bool) {
        let n = self.ext[axis];
        if n == 1 {
            return;
        }
        let plan = if forward { &self.fwd[axis] } else { &self.inv[axis] };
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
        if axis == 0 {
            for chunk in buf.chunks_exact_mut(n) {
                plan.process_with_scratch(chunk, &mut scratch);
            }
            return;
        }
        let stride = if axis == 1 { self.ext[0] } else { self.ext[0] * self.ext[1] };
        let nlines = self.ext_points() / n;
        let mut line = vec![Complex::new(T::zero(), T::zero()); n];
        for l in 0..nlines {
            // Base index of this line: fix all coordinates except `axis`.
            let base = if axis == 1 {
                let x = l % self.ext[0];
                let z = l / self.ext[0];
                x + self.ext[0] * self.ext[1] * z
            } else {
                l
            };
            for (i, v) in line.iter_mut().enumerate() {
                *v = buf[base + i * stride];
            }
            plan.process_with_scratch(&mut line, &mut scratch);
            for (i, v) in line.iter().enumerate() {
                buf[base + i * stride] = *v;
            }
        }
    }

    /// Forward transform of an extended real field.
    pub fn forward(&self, ext_real: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> =
            ext_real.iter().map(|&v| Complex::new(v, T::zero())).collect();
        for a in 0..self.dim {
            self.fft_axis(&mut buf, a, true);
        }
        buf
    }

    /// Inverse transform; returns the real part of the normalized result.
    pub fn inverse(&self, mut spec: Vec<Complex<T>>) -> Vec<T> {
        for a in 0..self.dim {
            self.fft_axis(&mut spec, a, false);
        }
        let norm = T::one() / T::from_usize_lossy(self.ext_points());
        spec.into_iter().map(|c| c.re * norm).collect()
    }

    /// Multiply by `i k_axis` (spectral first derivative).
    pub fn derivative(&self, spec: &[Complex<T>], axis: usize) -> Vec<Complex<T>> {
        let mut out = Vec::with_capacity(spec.len());
        for (flat, &c) in spec.iter().enumerate() {
            let idx = self.ext_multi(flat);
            let k = self.kd[axis][idx[axis]];
            out.push(Complex::new(-c.im * k, c.re * k));
        }
        out
    }

    /// Zero every mode outside the 2/3 dealiasing ball (per-axis rule).
    pub fn dealias(&self, spec: &mut [Complex<T>]) {
        for (flat, c) in spec.iter_mut().enumerate() {
            let idx = self.ext_multi(flat);
            let mut ok = true;
            for a in 0..self.dim {
                ok &= self.keep[a][idx[a]];
            }
            if !ok {
                *c = Complex::new(T::zero(), T::zero());
            }
        }
    }

    /// Squared wavenumber of a flat spectral index.
    pub fn k_squared(&self, flat: usize) -> T {
        let idx = self.ext_multi(flat);
        let mut s = T::zero();
        for a in 0..self.dim {
            s += self.k2[a][idx[a]];
        }
        s
    }

    /// First-derivative wavenumber vector of a flat spectral index.
    pub fn k_vector(&self, flat: usize) -> [T; MAX_DIM] {
        let idx = self.ext_multi(flat);
        let mut k = [T::zero(); MAX_DIM];
        for a in 0..self.dim {
            k[a] = self.kd[a][idx[a]];
        }
        k
    }
}

/// A domain bundles the grid description with its spectral machinery.
pub struct Domain<T: Scalar> {
    spec: DomainSpec<T>,
    engine: SpectralEngine<T>,
}

impl<T: Scalar> Domain<T> {
    pub fn new(spec: DomainSpec<T>) -> Self {
        let engine = SpectralEngine::new(&spec);
        Self { spec, engine }
    }

    pub fn spec(&self) -> &DomainSpec<T> {
        &self.spec
    }

    pub fn engine(&self) -> &SpectralEngine<T> {
        &self.engine
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    fn to_spectrum(&self, f: &ScalarField<T>, parity: Parity) -> Vec<Complex<T>> {
        self.engine.forward(&self.engine.extend(&f.data, parity))
    }

    fn from_spectrum(&self, spec: Vec<Complex<T>>) -> ScalarField<T> {
        ScalarField { data: self.engine.restrict(&self.engine.inverse(spec)) }
    }

    /// Spectral gradient of a scalar field.
    pub fn grad_scalar(&self, f: &ScalarField<T>, parity: Parity) -> Result<VectorField<T>> {
        f.check_shape(&self.spec)?;
        let spec = self.to_spectrum(f, parity);
        let comps = (0..self.dim())
            .map(|a| self.from_spectrum(self.engine.derivative(&spec, a)))
            .collect();
        Ok(VectorField { comps })
    }

    /// Gradient tensor of a velocity-like field; entry `(i, j)` is `∂_j v_i`.
    pub fn grad_vector(&self, v: &VectorField<T>, parities: &[Parity]) -> Result<TensorField<T>> {
        v.check_shape(&self.spec, self.dim())?;
        let mut out = TensorField::zeros(&self.spec);
        for i in 0..self.dim() {
            let spec = self.to_spectrum(&v.comps[i], parities[i]);
            for j in 0..self.dim() {
                *out.comp_mut(i, j) = self.from_spectrum(self.engine.derivative(&spec, j));
            }
        }
        Ok(out)
    }

    /// Spectral divergence of a vector field.
    pub fn div_vector(&self, v: &VectorField<T>, parities: &[Parity]) -> Result<ScalarField<T>> {
        v.check_shape(&self.spec, self.dim())?;
        let mut acc = vec![Complex::new(T::zero(), T::zero()); self.engine.ext_points()];
        for a in 0..self.dim() {
            let spec = self.to_spectrum(&v.comps[a], parities[a]);
            let d = self.engine.derivative(&spec, a);
            for (s, x) in acc.iter_mut().zip(d) {
                *s += x;
            }
        }
        Ok(self.from_spectrum(acc))
    }

    /// Row-wise divergence of a tensor field: `(div T)_i = ∂_j T_ij`.
    /// `row_parities` are the parities of the target vector components.
    pub fn div_tensor(&self, t: &TensorField<T>, row_parities: &[Parity]) -> Result<VectorField<T>> {
        let wall = self.spec.wall_axis();
        let mut comps = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let mut acc = vec![Complex::new(T::zero(), T::zero()); self.engine.ext_points()];
            for j in 0..self.dim() {
                let parity = row_parities[i].of_derivative(j, wall);
                let spec = self.to_spectrum(t.comp(i, j), parity);
                let d = self.engine.derivative(&spec, j);
                for (s, x) in acc.iter_mut().zip(d) {
                    *s += x;
                }
            }
            comps.push(self.from_spectrum(acc));
        }
        Ok(VectorField { comps })
    }

    /// Spectral Laplacian.
    pub fn laplacian_scalar(&self, f: &ScalarField<T>, parity: Parity) -> Result<ScalarField<T>> {
        f.check_shape(&self.spec)?;
        let mut spec = self.to_spectrum(f, parity);
        for (flat, c) in spec.iter_mut().enumerate() {
            *c = *c * (-self.engine.k_squared(flat));
        }
        Ok(self.from_spectrum(spec))
    }

    /// Round-trip through modal space with the 2/3 mask applied.
    pub fn dealias_scalar(&self, f: &ScalarField<T>, parity: Parity) -> ScalarField<T> {
        let mut spec = self.to_spectrum(f, parity);
        self.engine.dealias(&mut spec);
        self.from_spectrum(spec)
    }

    /// Solve `(1 - coef Δ) x = f` by the diagonal modal formula.
    pub fn solve_helmholtz(&self, f: &ScalarField<T>, parity: Parity, coef: T) -> Result<ScalarField<T>> {
        f.check_shape(&self.spec)?;
        let mut spec = self.to_spectrum(f, parity);
        for (flat, c) in spec.iter_mut().enumerate() {
            let denom = T::one() + coef * self.engine.k_squared(flat);
            *c = *c / denom;
        }
        Ok(self.from_spectrum(spec))
    }

    /// Solve `Δ p = rhs` with the mean-zero gauge. Modes whose derivative
    /// symbol vanishes (the mean and bare Nyquist lines) are zeroed.
    pub fn solve_poisson_mean_zero(&self, rhs: &ScalarField<T>, parity: Parity) -> Result<ScalarField<T>> {
        rhs.check_shape(&self.spec)?;
        let mut spec = self.to_spectrum(rhs, parity);
        for (flat, c) in spec.iter_mut().enumerate() {
            let k = self.engine.k_vector(flat);
            let mut k2 = T::zero();
            for a in 0..self.dim() {
                k2 += k[a] * k[a];
            }
            if k2 > T::zero() {
                *c = *c / (-k2);
            } else {
                *c = Complex::new(T::zero(), T::zero());
            }
        }
        Ok(self.from_spectrum(spec))
    }

    /// Integral over the physical box.
    pub fn integral(&self, f: &ScalarField<T>) -> T {
        f.integral(&self.spec)
    }
}
