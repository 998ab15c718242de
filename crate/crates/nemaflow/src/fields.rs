//! Simulation state and pointwise assembly of stress and heat flux.
//!
//! The Cauchy stress is `T = μ(ϑ)(∇u + ∇uᵀ) - λ(ϑ)(∇d ⊙ ∇d) - p I` (unit
//! density) and the heat flux is the anisotropic Fourier law
//! `q = -κ(ϑ)∇ϑ - (κ∥-κ⊥)(ϑ) d (d·∇ϑ)`. Assemblies are raw pointwise
//! products of spectrally computed gradients; consumers that return to
//! modal space apply the 2/3 dealiasing rule there.

use crate::error::{Error, Result};
use crate::grid::{DomainSpec, Parity, ScalarField, TensorField, VectorField, DIRECTOR_COMPS};
use crate::material::MaterialLaws;
use crate::scalar::Scalar;
use crate::spectral::Domain;

/// The discrete unknowns: velocity (grid values plus modal coefficients),
/// director, temperature, diagnostic pressure, and the clock.
#[derive(Debug, Clone)]
pub struct FieldState<T> {
    pub u: VectorField<T>,
    /// Coefficients of `u` in the solenoidal basis; length N.
    pub u_modes: Vec<T>,
    /// Director; always three components.
    pub d: VectorField<T>,
    pub theta: ScalarField<T>,
    pub p: ScalarField<T>,
    pub time: T,
}

impl<T: Scalar> FieldState<T> {
    /// State at rest: `u = 0`, `d = (1,0,0)`, `ϑ = 1`, `p = 0`.
    pub fn rest(spec: &DomainSpec<T>, n_modes: usize) -> Self {
        let mut d = VectorField::zeros(spec, DIRECTOR_COMPS);
        for v in &mut d.comps[0].data {
            *v = T::one();
        }
        Self {
            u: VectorField::zeros(spec, spec.dim),
            u_modes: vec![T::zero(); n_modes],
            d,
            theta: ScalarField::constant(spec, T::one()),
            p: ScalarField::zeros(spec),
            time: T::zero(),
        }
    }

    pub fn check_shape(&self, spec: &DomainSpec<T>) -> Result<()> {
        self.u.check_shape(spec, spec.dim)?;
        self.d.check_shape(spec, DIRECTOR_COMPS)?;
        self.theta.check_shape(spec)?;
        self.p.check_shape(spec)?;
        Ok(())
    }

    /// Grid-level validity: solenoidal velocity, positive temperature,
    /// mean-zero pressure. Modal-reconstruction consistency is checked by
    /// the basis (see `solenoidal`).
    pub fn validate(&self, domain: &Domain<T>) -> Result<()> {
        let spec = domain.spec();
        self.check_shape(spec)?;
        // Tolerances follow the working precision (1e-10 and 1e-12 for f64).
        let div_tol = T::lit(1e-10).max(T::epsilon() * T::lit(1e3));
        let mean_tol = T::lit(1e-12).max(T::epsilon() * T::lit(1e2));
        let div = domain.div_vector(&self.u, &spec.velocity_parities())?;
        let div_norm = div.norm_l2(spec);
        let scale = T::one().max(self.u.norm_l2(spec));
        if div_norm > div_tol * scale {
            return Err(Error::Domain(format!(
                "velocity is not solenoidal: |div u| = {div_norm:e}"
            )));
        }
        let min_theta = self.theta.min();
        if !(min_theta > T::zero()) {
            return Err(Error::Domain(format!(
                "temperature must be positive everywhere; min = {min_theta}"
            )));
        }
        let p_mean = self.p.mean(spec).abs();
        if p_mean > mean_tol * T::one().max(self.p.norm_l2(spec)) {
            return Err(Error::Domain(format!("pressure mean {p_mean:e} is not zero")));
        }
        Ok(())
    }
}

/// Gradient of the director: entry `(k, axis)` holds `∂_axis d_k` for the
/// three director components over the `dim` spatial axes.
#[derive(Debug, Clone)]
pub struct DirectorGradient<T> {
    pub dim: usize,
    pub comps: Vec<ScalarField<T>>,
}

impl<T: Scalar> DirectorGradient<T> {
    pub fn comp(&self, k: usize, axis: usize) -> &ScalarField<T> {
        &self.comps[k * self.dim + axis]
    }

    /// Pointwise `|∇d|² = Σ_{k,a} (∂_a d_k)²`.
    pub fn magnitude_sq(&self) -> ScalarField<T> {
        let n = self.comps[0].len();
        let mut out = vec![T::zero(); n];
        for c in &self.comps {
            for (o, &v) in out.iter_mut().zip(&c.data) {
                *o += v * v;
            }
        }
        ScalarField { data: out }
    }
}

/// Spectral gradient of the director field.
pub fn grad_director<T: Scalar>(domain: &Domain<T>, d: &VectorField<T>) -> Result<DirectorGradient<T>> {
    let spec = domain.spec();
    d.check_shape(spec, DIRECTOR_COMPS)?;
    let parities = spec.director_parities();
    let mut comps = Vec::with_capacity(DIRECTOR_COMPS * spec.dim);
    for k in 0..DIRECTOR_COMPS {
        let g = domain.grad_scalar(&d.comps[k], parities[k])?;
        comps.extend(g.comps);
    }
    Ok(DirectorGradient { dim: spec.dim, comps })
}

/// Elastic tension tensor `(∇d ⊙ ∇d)_{ij} = Σ_k ∂_i d_k ∂_j d_k`;
/// symmetric positive semidefinite by construction.
pub fn director_tension<T: Scalar>(spec: &DomainSpec<T>, grad_d: &DirectorGradient<T>) -> TensorField<T> {
    let dim = spec.dim;
    let mut out = TensorField::zeros(spec);
    for i in 0..dim {
        for j in 0..dim {
            let dst = out.comp_mut(i, j);
            for k in 0..DIRECTOR_COMPS {
                let a = grad_d.comp(k, i);
                let b = grad_d.comp(k, j);
                for ((o, &x), &y) in dst.data.iter_mut().zip(&a.data).zip(&b.data) {
                    *o += x * y;
                }
            }
        }
    }
    out
}

/// Evaluate a temperature law on every grid point.
pub fn law_field<T: Scalar>(
    theta: &ScalarField<T>,
    law: impl Fn(T) -> Result<T>,
) -> Result<ScalarField<T>> {
    let mut data = Vec::with_capacity(theta.len());
    for &t in &theta.data {
        data.push(law(t)?);
    }
    Ok(ScalarField { data })
}

/// Cauchy stress from precomputed gradients; the pointwise heart of
/// [`stress`], split out so it can be exercised on hand-built gradients.
pub fn stress_from_parts<T: Scalar>(
    spec: &DomainSpec<T>,
    grad_u: &TensorField<T>,
    grad_d: &DirectorGradient<T>,
    theta: &ScalarField<T>,
    p: &ScalarField<T>,
    laws: &MaterialLaws<T>,
) -> Result<TensorField<T>> {
    let mu = law_field(theta, |t| laws.viscosity(t))?;
    let lambda = law_field(theta, |t| laws.dilatation(t))?;
    let tension = director_tension(spec, grad_d);
    let dim = spec.dim;
    let mut out = TensorField::zeros(spec);
    for i in 0..dim {
        for j in 0..dim {
            {
                let gij = &grad_u.comp(i, j).data;
                let gji = &grad_u.comp(j, i).data;
                let ten = &tension.comp(i, j).data;
                let dst = &mut out.comps[i * dim + j].data;
                for (((((o, &a), &b), &t), &m), &l) in
                    dst.iter_mut().zip(gij).zip(gji).zip(ten).zip(&mu.data).zip(&lambda.data)
                {
                    *o = m * (a + b) - l * t;
                }
            }
            if i == j {
                for (o, &pv) in out.comp_mut(i, j).data.iter_mut().zip(&p.data) {
                    *o -= pv;
                }
            }
        }
    }
    Ok(out)
}

/// Cauchy stress `T = μ(ϑ)(∇u + ∇uᵀ) - λ(ϑ)(∇d ⊙ ∇d) - p I`.
pub fn stress<T: Scalar>(
    domain: &Domain<T>,
    state: &FieldState<T>,
    laws: &MaterialLaws<T>,
) -> Result<TensorField<T>> {
    let spec = domain.spec();
    let grad_u = domain.grad_vector(&state.u, &spec.velocity_parities())?;
    let grad_d = grad_director(domain, &state.d)?;
    stress_from_parts(spec, &grad_u, &grad_d, &state.theta, &state.p, laws)
}

/// Heat flux from a precomputed temperature gradient.
pub fn heat_flux_from_parts<T: Scalar>(
    spec: &DomainSpec<T>,
    grad_theta: &VectorField<T>,
    d: &VectorField<T>,
    theta: &ScalarField<T>,
    laws: &MaterialLaws<T>,
) -> Result<VectorField<T>> {
    let kappa = law_field(theta, |t| laws.conductivity(t).map(|c| c.0))?;
    let kappa_aniso = law_field(theta, |t| laws.conductivity(t).map(|c| c.1))?;
    let dim = spec.dim;
    let npts = theta.len();
    // d·∇ϑ sums over the spatial axes only; out-of-plane director
    // components see no gradient.
    let mut dgrad = vec![T::zero(); npts];
    for a in 0..dim {
        for ((s, &dc), &g) in dgrad.iter_mut().zip(&d.comps[a].data).zip(&grad_theta.comps[a].data) {
            *s += dc * g;
        }
    }
    let mut comps = Vec::with_capacity(dim);
    for a in 0..dim {
        let mut data = Vec::with_capacity(npts);
        for i in 0..npts {
            data.push(
                -kappa.data[i] * grad_theta.comps[a].data[i]
                    - kappa_aniso.data[i] * d.comps[a].data[i] * dgrad[i],
            );
        }
        comps.push(ScalarField { data });
    }
    Ok(VectorField { comps })
}

/// Heat flux `q = -κ(ϑ)∇ϑ - (κ∥-κ⊥)(ϑ) d (d·∇ϑ)`.
pub fn heat_flux<T: Scalar>(
    domain: &Domain<T>,
    state: &FieldState<T>,
    laws: &MaterialLaws<T>,
) -> Result<VectorField<T>> {
    let spec = domain.spec();
    let grad_theta = domain.grad_scalar(&state.theta, Parity::Even)?;
    heat_flux_from_parts(spec, &grad_theta, &state.d, &state.theta, laws)
}
