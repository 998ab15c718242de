//! Time integration of the coupled system at fixed truncation (N, M).
//!
//! One step advances, in order, momentum → director → heat:
//!
//! * momentum: explicit convective `⟨u⊗[u]_M, ∇v⟩`, elastic and
//!   variable-viscosity terms; the constant-coefficient viscous core is
//!   taken implicitly through a `μ̲`-splitting (diagonal per mode);
//! * director: explicit transport `[u]_M·∇d` and penalty `∂W(d)`, implicit
//!   unit-coefficient diffusion (diagonal in modal space);
//! * heat: explicit conservative advection, implicit anisotropic diffusion
//!   with coefficients frozen at the step start, and a source equal to the
//!   exact discrete kinetic-energy decrement of the momentum update.
//!
//! Defining the heat source as the bookkept decrement (rather than an
//! independent quadrature of the stress power) makes conservation of
//! `∫(|u|²/2 + ϑ)` hold to linear-solver tolerance per step. The source is
//! distributed pointwise proportionally to the stress-power density with a
//! uniform correction carrying the `O(dt²)` splitting remainder.

use crate::audit::{energy_ledger, EnergyLedger};
use crate::error::{AbortReason, AbortReport, Error, Result};
use crate::fields::{grad_director, law_field, FieldState};
use crate::grid::{Parity, ScalarField, TensorField, VectorField, DIRECTOR_COMPS};
use crate::material::MaterialLaws;
use crate::scalar::{lit, Scalar};
use crate::solenoidal::{pressure_solve, SolenoidalBasis, TruncationLevels};
use crate::spectral::Domain;
use rustfft::num_complex::Complex;

/// Treatment flags for the temperature equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThetaScheme {
    /// Feed the kinetic-energy decrement into ϑ as an explicit source.
    /// Disabling decouples the heat equation (total energy then drifts).
    pub explicit_source: bool,
    /// Treat `div q` implicitly (unconditionally stable); otherwise the
    /// flux divergence is taken explicitly at the old state.
    pub implicit_diffusion: bool,
}

impl Default for ThetaScheme {
    fn default() -> Self {
        Self { explicit_source: true, implicit_diffusion: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GalerkinConfig<T> {
    pub levels: TruncationLevels,
    pub dt: T,
    pub t_end: T,
    pub theta_scheme: ThetaScheme,
    pub cfl_safety: T,
    pub max_dt_halvings: usize,
}

impl<T: Scalar> GalerkinConfig<T> {
    pub fn new(levels: TruncationLevels, dt: T, t_end: T) -> Result<Self> {
        let cfg = Self {
            levels,
            dt,
            t_end,
            theta_scheme: ThetaScheme::default(),
            cfl_safety: lit(0.5),
            max_dt_halvings: 8,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) {
            return Err(Error::Usage("dt must be positive".into()));
        }
        if !(self.t_end > T::zero()) {
            return Err(Error::Usage("t_end must be positive".into()));
        }
        if !(self.cfl_safety > T::zero() && self.cfl_safety <= T::one()) {
            return Err(Error::Usage("cfl_safety must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-step invariant diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepReport<T> {
    /// Time after the step.
    pub time: T,
    /// Total-energy change over this step (zero up to solver tolerance
    /// when no forcing acts).
    pub energy_drift: T,
    pub production_dir: T,
    pub production_visc: T,
    pub production_heat: T,
    pub min_theta: T,
    pub max_d_sq: T,
    pub dt_used: T,
    pub halvings: usize,
}

/// Exact discrete energy transfers of one momentum update:
/// `ΔKE = convective + elastic - viscous + forcing` to roundoff.
#[derive(Debug, Clone, Copy)]
pub struct StressWork<T> {
    pub viscous: T,
    pub elastic: T,
    pub convective: T,
    pub forcing: T,
}

/// Everything one accepted step produces.
#[derive(Debug, Clone)]
pub struct AdvanceOutcome<T> {
    pub state: FieldState<T>,
    pub report: StepReport<T>,
    pub work: StressWork<T>,
    pub ledger: EnergyLedger<T>,
}

/// Residual of the cumulative kinetic ledger identity
/// `‖u(t)‖² - ‖u₀‖² + 2Σ(W_visc - W_elast - W_conv - W_f)`, using the same
/// quadratures the stepper used; zero to roundoff by construction.
pub fn kinetic_identity_residual<T: Scalar>(
    kinetic_initial: T,
    kinetic_final: T,
    works: &[StressWork<T>],
) -> T {
    let mut acc = kinetic_final - kinetic_initial;
    for w in works {
        acc += w.viscous - w.elastic - w.convective - w.forcing;
    }
    lit::<T>(2.0) * acc
}

fn dealias_tensor<T: Scalar>(domain: &Domain<T>, t: &mut TensorField<T>) {
    let spec = domain.spec();
    let wall = spec.wall_axis();
    let vel = spec.velocity_parities();
    for i in 0..spec.dim {
        for j in 0..spec.dim {
            let parity = vel[i].of_derivative(j, wall);
            let comp = t.comp_mut(i, j);
            *comp = domain.dealias_scalar(comp, parity);
        }
    }
}

/// The three explicit momentum tensors, dealiased: convective `u ⊗ [u]_M`,
/// elastic `λ(ϑ) ∇d⊙∇d`, and viscous `(μ(ϑ) - μ_offset)(∇u + ∇uᵀ)` in its
/// positive orientation (the right-hand side subtracts its pairing).
fn momentum_tensors<T: Scalar>(
    domain: &Domain<T>,
    basis: &SolenoidalBasis<T>,
    state: &FieldState<T>,
    laws: &MaterialLaws<T>,
    levels: TruncationLevels,
    mu_offset: T,
) -> Result<(TensorField<T>, TensorField<T>, TensorField<T>)> {
    let spec = domain.spec();
    if state.u_modes.len() < levels.m_modes {
        return Err(Error::Shape(format!(
            "state carries {} modal coefficients but M = {}",
            state.u_modes.len(),
            levels.m_modes
        )));
    }
    let truncated = basis.reconstruct(domain, &state.u_modes[..levels.m_modes])?;
    let grad_u = domain.grad_vector(&state.u, &spec.velocity_parities())?;
    let grad_d = grad_director(domain, &state.d)?;
    let mu = law_field(&state.theta, |t| laws.viscosity(t).map(|m| m - mu_offset))?;
    let lambda = law_field(&state.theta, |t| laws.dilatation(t))?;

    let mut conv = TensorField::zeros(spec);
    let mut elast = TensorField::zeros(spec);
    let mut visc = TensorField::zeros(spec);
    let npts = spec.num_points();
    for i in 0..spec.dim {
        for j in 0..spec.dim {
            let c = &mut conv.comps[i * spec.dim + j].data;
            let e = &mut elast.comps[i * spec.dim + j].data;
            let v = &mut visc.comps[i * spec.dim + j].data;
            let ui = &state.u.comps[i].data;
            let umj = &truncated.comps[j].data;
            let gij = &grad_u.comp(i, j).data;
            let gji = &grad_u.comp(j, i).data;
            for idx in 0..npts {
                c[idx] = ui[idx] * umj[idx];
                let mut tension = T::zero();
                for k in 0..DIRECTOR_COMPS {
                    tension += grad_d.comp(k, i).data[idx] * grad_d.comp(k, j).data[idx];
                }
                e[idx] = lambda.data[idx] * tension;
                v[idx] = mu.data[idx] * (gij[idx] + gji[idx]);
            }
        }
    }
    dealias_tensor(domain, &mut conv);
    dealias_tensor(domain, &mut elast);
    dealias_tensor(domain, &mut visc);
    Ok((conv, elast, visc))
}

/// Galerkin right-hand side `d/dt ⟨u, v_n⟩` for every basis mode:
/// `⟨u⊗[u]_M, ∇v⟩ - ⟨μ(ϑ)(∇u + ∇uᵀ), ∇v⟩ + ⟨λ(ϑ)∇d⊙∇d, ∇v⟩`,
/// evaluated by dealiased grid quadrature.
pub fn momentum_rhs<T: Scalar>(
    domain: &Domain<T>,
    basis: &SolenoidalBasis<T>,
    state: &FieldState<T>,
    laws: &MaterialLaws<T>,
    levels: TruncationLevels,
) -> Result<Vec<T>> {
    let (conv, elast, visc) =
        momentum_tensors(domain, basis, state, laws, levels, T::zero())?;
    let a = basis.rhs_quadrature(domain, &conv)?;
    let e = basis.rhs_quadrature(domain, &elast)?;
    let v = basis.rhs_quadrature(domain, &visc)?;
    Ok(a.iter().zip(&e).zip(&v).map(|((&a, &e), &v)| a + e - v).collect())
}

/// One semi-implicit director update: explicit `[u]_M·∇d + ∂W(d)`,
/// implicit diffusion `Δd` (homogeneous Neumann via the parity classes).
pub fn director_step<T: Scalar>(
    domain: &Domain<T>,
    basis: &SolenoidalBasis<T>,
    state: &FieldState<T>,
    laws: &MaterialLaws<T>,
    dt: T,
    levels: TruncationLevels,
) -> Result<VectorField<T>> {
    director_step_with(domain, basis, state, laws, dt, levels, true)
}

pub(crate) fn director_step_with<T: Scalar>(
    domain: &Domain<T>,
    basis: &SolenoidalBasis<T>,
    state: &FieldState<T>,
    laws: &MaterialLaws<T>,
    dt: T,
    levels: TruncationLevels,
    diffusion: bool,
) -> Result<VectorField<T>> {
    if !(dt > T::zero()) {
        return Err(Error::Usage("dt must be positive".into()));
    }
    let spec = domain.spec();
    if state.u_modes.len() < levels.m_modes {
        return Err(Error::Shape(format!(
            "state carries {} modal coefficients but M = {}",
            state.u_modes.len(),
            levels.m_modes
        )));
    }
    let transport = basis.reconstruct(domain, &state.u_modes[..levels.m_modes])?;
    let grad_d = grad_director(domain, &state.d)?;
    let parities = spec.director_parities();
    let npts = spec.num_points();

    let mut dw = vec![[T::zero(); 3]; npts];
    for i in 0..npts {
        let d = [state.d.comps[0].data[i], state.d.comps[1].data[i], state.d.comps[2].data[i]];
        let (_, g) = laws.penalty(&d)?;
        dw[i] = g;
    }

    let mut out = VectorField::zeros(spec, DIRECTOR_COMPS);
    for k in 0..DIRECTOR_COMPS {
        let mut rhs = vec![T::zero(); npts];
        for (i, r) in rhs.iter_mut().enumerate() {
            let mut advect = T::zero();
            for a in 0..spec.dim {
                advect += transport.comps[a].data[i] * grad_d.comp(k, a).data[i];
            }
            *r = advect + dw[i][k];
        }
        let rhs = domain.dealias_scalar(&ScalarField { data: rhs }, parities[k]);
        let mut star = state.d.comps[k].clone();
        star.add_scaled(&rhs, -dt);
        out.comps[k] = if diffusion {
            domain.solve_helmholtz(&star, parities[k], dt)?
        } else {
            star
        };
    }
    Ok(out)
}

/// Implicit solve of `(I - dt div(A∇·)) ϑ = rhs` with the frozen
/// conductivity tensor `A = κ I + κa d dᵀ`.
///
/// Uniform coefficients take the exact diagonal modal path; otherwise a
/// preconditioned conjugate-gradient iteration runs in grid space with the
/// operator applied spectrally.
pub(crate) fn heat_implicit_solve<T: Scalar>(
    domain: &Domain<T>,
    rhs: &ScalarField<T>,
    kappa: &ScalarField<T>,
    kappa_aniso: &ScalarField<T>,
    d: &VectorField<T>,
    dt: T,
    force_iterative: bool,
) -> Result<ScalarField<T>> {
    let spec = domain.spec();
    let dim = spec.dim;
    let uniform = |f: &ScalarField<T>| {
        let lo = f.min();
        let hi = f.max();
        (hi - lo).abs() <= lit::<T>(1e-13) * (T::one() + hi.abs())
    };
    let all_uniform = !force_iterative
        && uniform(kappa)
        && uniform(kappa_aniso)
        && (0..dim).all(|a| uniform(&d.comps[a]));

    if all_uniform {
        let kap = kappa.data[0];
        let kap_a = kappa_aniso.data[0];
        let dir: Vec<T> = (0..dim).map(|a| d.comps[a].data[0]).collect();
        let engine = domain.engine();
        let mut spectrum = engine.forward(&engine.extend(&rhs.data, Parity::Even));
        for (flat, c) in spectrum.iter_mut().enumerate() {
            // Built from the first-derivative symbols so the diagonal path
            // agrees exactly with the iterative div-grad composition.
            let kvec = engine.k_vector(flat);
            let mut k2 = T::zero();
            let mut dk = T::zero();
            for a in 0..dim {
                k2 += kvec[a] * kvec[a];
                dk += dir[a] * kvec[a];
            }
            let denom = T::one() + dt * (kap * k2 + kap_a * dk * dk);
            *c = *c / denom;
        }
        return Ok(ScalarField { data: engine.restrict(&engine.inverse(spectrum)) });
    }

    // Effective diffusivity bound for the diagonal preconditioner.
    let mut c_bar = T::zero();
    for i in 0..rhs.data.len() {
        let mut d_sq = T::zero();
        for a in 0..dim {
            d_sq += d.comps[a].data[i] * d.comps[a].data[i];
        }
        c_bar = c_bar.max(kappa.data[i] + kappa_aniso.data[i] * d_sq);
    }

    // The Nyquist-free derivative tables make div the exact negative
    // adjoint of grad in the grid inner product, so the composition below
    // is symmetric positive definite and safe for conjugate gradients.
    let apply = |x: &ScalarField<T>| -> Result<ScalarField<T>> {
        let grad = {
            let engine = domain.engine();
            let spectrum = engine.forward(&engine.extend(&x.data, Parity::Even));
            let comps = (0..dim)
                .map(|a| ScalarField::<T> {
                    data: engine.restrict(&engine.inverse(engine.derivative(&spectrum, a))),
                })
                .collect::<Vec<_>>();
            VectorField { comps }
        };
        let mut flux = VectorField::zeros(spec, dim);
        for i in 0..x.data.len() {
            let mut dg = T::zero();
            for a in 0..dim {
                dg += d.comps[a].data[i] * grad.comps[a].data[i];
            }
            for a in 0..dim {
                flux.comps[a].data[i] = kappa.data[i] * grad.comps[a].data[i]
                    + kappa_aniso.data[i] * d.comps[a].data[i] * dg;
            }
        }
        let engine = domain.engine();
        let vel = spec.velocity_parities();
        let mut acc = vec![Complex::new(T::zero(), T::zero()); engine.ext_points()];
        for a in 0..dim {
            let s = engine.forward(&engine.extend(&flux.comps[a].data, vel[a]));
            let ds = engine.derivative(&s, a);
            for (dst, v) in acc.iter_mut().zip(ds) {
                *dst += v;
            }
        }
        let div = ScalarField::<T> { data: engine.restrict(&engine.inverse(acc)) };
        let mut out = x.clone();
        out.add_scaled(&div, -dt);
        Ok(out)
    };
    let precond = |r: &ScalarField<T>| -> ScalarField<T> {
        domain.solve_helmholtz(r, Parity::Even, dt * c_bar).expect("shape checked")
    };
    let dot = |a: &ScalarField<T>, b: &ScalarField<T>| -> T {
        a.data.iter().zip(&b.data).fold(T::zero(), |s, (&x, &y)| s + x * y)
    };

    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == T::zero() {
        return Ok(ScalarField::zeros(spec));
    }
    let tol = lit::<T>(1e-13).max(T::epsilon() * lit(32.0)) * b_norm;
    let mut x = rhs.clone();
    let ax = apply(&x)?;
    let mut r = rhs.clone();
    r.add_scaled(&ax, -T::one());
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..400 {
        if dot(&r, &r).sqrt() <= tol {
            return Ok(x);
        }
        let ap = apply(&p)?;
        let alpha = rz / dot(&p, &ap);
        x.add_scaled(&p, alpha);
        r.add_scaled(&ap, -alpha);
        z = precond(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        let mut p_next = z.clone();
        p_next.add_scaled(&p, beta);
        p = p_next;
    }
    Err(Error::Conditioning(format!(
        "heat solve did not converge: residual {:e} vs tolerance {:e}",
        dot(&r, &r).sqrt(),
        tol
    )))
}

/// One temperature update: explicit conservative advection `div(ϑu)`,
/// implicit anisotropic diffusion, and the supplied per-step source field
/// (already integrated over the step, `∫ source = kinetic decrement`).
pub fn heat_step<T: Scalar>(
    domain: &Domain<T>,
    state: &FieldState<T>,
    source: &ScalarField<T>,
    dt: T,
    laws: &MaterialLaws<T>,
    scheme: ThetaScheme,
) -> Result<ScalarField<T>> {
    if !(dt > T::zero()) {
        return Err(Error::Usage("dt must be positive".into()));
    }
    let spec = domain.spec();
    state.check_shape(spec)?;
    source.check_shape(spec)?;

    // Conservative advection with dealiased products; its spectral
    // divergence has exactly zero mean, so ∫ϑ only changes by the source.
    let vel = spec.velocity_parities();
    let mut flux = VectorField::zeros(spec, spec.dim);
    for a in 0..spec.dim {
        for i in 0..spec.num_points() {
            flux.comps[a].data[i] = state.theta.data[i] * state.u.comps[a].data[i];
        }
        flux.comps[a] = domain.dealias_scalar(&flux.comps[a], vel[a]);
    }
    let advection = domain.div_vector(&flux, &vel)?;

    let mut rhs = state.theta.clone();
    rhs.add_scaled(&advection, -dt);
    if scheme.explicit_source {
        rhs.add_scaled(source, T::one());
    }

    let kappa = law_field(&state.theta, |t| laws.conductivity(t).map(|c| c.0))?;
    let kappa_aniso = law_field(&state.theta, |t| laws.conductivity(t).map(|c| c.1))?;
    let new_theta = if scheme.implicit_diffusion {
        heat_implicit_solve(domain, &rhs, &kappa, &kappa_aniso, &state.d, dt, false)?
    } else {
        let grad_theta = domain.grad_scalar(&state.theta, Parity::Even)?;
        let q = crate::fields::heat_flux_from_parts(spec, &grad_theta, &state.d, &state.theta, laws)?;
        let mut q_dealiased = q;
        for a in 0..spec.dim {
            q_dealiased.comps[a] = domain.dealias_scalar(&q_dealiased.comps[a], vel[a]);
        }
        let div_q = domain.div_vector(&q_dealiased, &vel)?;
        let mut out = rhs;
        out.add_scaled(&div_q, -dt);
        out
    };

    let min_theta = new_theta.min();
    if !(min_theta > T::zero()) {
        return Err(Error::Positivity { min_theta: min_theta.to_f64_lossy() });
    }
    Ok(new_theta)
}

/// Reusable per-run context: domain, basis, laws, and the cached modal
/// Stokes symbols `∫|∇v_n|²`.
pub struct StepContext<'a, T: Scalar> {
    pub domain: &'a Domain<T>,
    pub basis: &'a SolenoidalBasis<T>,
    pub laws: &'a MaterialLaws<T>,
    mode_k2: Vec<T>,
}

impl<'a, T: Scalar> StepContext<'a, T> {
    pub fn new(
        domain: &'a Domain<T>,
        basis: &'a SolenoidalBasis<T>,
        laws: &'a MaterialLaws<T>,
    ) -> Result<Self> {
        let mode_k2 =
            (0..basis.len()).map(|n| basis.mode_k_squared(domain, n)).collect::<Result<_>>()?;
        Ok(Self { domain, basis, laws, mode_k2 })
    }
}

fn attempt_step<T: Scalar>(
    ctx: &StepContext<'_, T>,
    state: &FieldState<T>,
    cfg: &GalerkinConfig<T>,
    dt: T,
    forcing: Option<&VectorField<T>>,
) -> Result<(FieldState<T>, StressWork<T>, EnergyLedger<T>)> {
    let domain = ctx.domain;
    let basis = ctx.basis;
    let laws = ctx.laws;
    let spec = domain.spec();
    let n = cfg.levels.n_modes;
    if state.u_modes.len() != n {
        return Err(Error::Shape(format!(
            "state carries {} modal coefficients but N = {n}",
            state.u_modes.len()
        )));
    }

    // Momentum: explicit tensors, implicit μ̲ core.
    let mu_lo = laws.consts.mu_lo;
    let (conv_t, elast_t, visc_t) =
        momentum_tensors(domain, basis, state, laws, cfg.levels, mu_lo)?;
    let conv = basis.rhs_quadrature(domain, &conv_t)?;
    let elast = basis.rhs_quadrature(domain, &elast_t)?;
    let visc_expl = basis.rhs_quadrature(domain, &visc_t)?;
    let force = match forcing {
        Some(f) => basis.project(domain, f, n)?,
        None => vec![T::zero(); n],
    };

    let mut new_modes = vec![T::zero(); n];
    for i in 0..n {
        let denom = T::one() + dt * mu_lo * ctx.mode_k2[i];
        new_modes[i] =
            (state.u_modes[i] + dt * (conv[i] + elast[i] - visc_expl[i] + force[i])) / denom;
    }

    // Exact discrete energy transfers of the modal update.
    let mut work = StressWork {
        viscous: T::zero(),
        elastic: T::zero(),
        convective: T::zero(),
        forcing: T::zero(),
    };
    for i in 0..n {
        let cbar = (state.u_modes[i] + new_modes[i]) * lit(0.5);
        work.convective += dt * cbar * conv[i];
        work.elastic += dt * cbar * elast[i];
        work.viscous += dt * (cbar * visc_expl[i] + mu_lo * ctx.mode_k2[i] * cbar * new_modes[i]);
        work.forcing += dt * cbar * force[i];
    }
    let decrement = work.viscous - work.elastic - work.convective;

    let new_u = basis.reconstruct(domain, &new_modes)?;

    // Director sees the updated velocity.
    let mut mid = state.clone();
    mid.u = new_u;
    mid.u_modes = new_modes;
    let new_d = director_step(domain, basis, &mid, laws, dt, cfg.levels)?;
    mid.d = new_d;

    // Heat source: stress-power density of the new velocity/director at the
    // old temperature, rescaled additively so its integral equals the
    // decrement exactly.
    let source = if cfg.theta_scheme.explicit_source {
        let grad_u = domain.grad_vector(&mid.u, &spec.velocity_parities())?;
        let grad_d = grad_director(domain, &mid.d)?;
        let mu = law_field(&state.theta, |t| laws.viscosity(t))?;
        let lambda = law_field(&state.theta, |t| laws.dilatation(t))?;
        let npts = spec.num_points();
        let mut w = vec![T::zero(); npts];
        for idx in 0..npts {
            let mut power = T::zero();
            for a in 0..spec.dim {
                for b in 0..spec.dim {
                    let sym = grad_u.comp(a, b).data[idx] + grad_u.comp(b, a).data[idx];
                    let mut tension = T::zero();
                    for k in 0..DIRECTOR_COMPS {
                        tension += grad_d.comp(k, a).data[idx] * grad_d.comp(k, b).data[idx];
                    }
                    power += (mu.data[idx] * sym - lambda.data[idx] * tension)
                        * grad_u.comp(a, b).data[idx];
                }
            }
            w[idx] = dt * power;
        }
        let mut w = ScalarField { data: w };
        let correction = (decrement - w.integral(spec)) / spec.volume();
        for v in &mut w.data {
            *v += correction;
        }
        w
    } else {
        ScalarField::zeros(spec)
    };

    let new_theta = heat_step(domain, &mid, &source, dt, laws, cfg.theta_scheme)?;
    mid.theta = new_theta;
    mid.time = state.time + dt;
    mid.p = pressure_solve(domain, basis, &mid, laws, cfg.levels)?;

    let ledger = energy_ledger(domain, &mid, laws)?;
    Ok((mid, work, ledger))
}

/// One IMEX step with CFL control and positivity-driven time-step halving.
pub fn advance<T: Scalar>(
    domain: &Domain<T>,
    basis: &SolenoidalBasis<T>,
    state: &FieldState<T>,
    cfg: &GalerkinConfig<T>,
    laws: &MaterialLaws<T>,
) -> Result<(FieldState<T>, StepReport<T>)> {
    let ctx = StepContext::new(domain, basis, laws)?;
    let outcome = advance_full(&ctx, state, cfg, None)?;
    Ok((outcome.state, outcome.report))
}

/// Full-output variant of [`advance`]; `forcing` is an optional external
/// body force (zero in the physical model, available as a test hook).
pub fn advance_full<T: Scalar>(
    ctx: &StepContext<'_, T>,
    state: &FieldState<T>,
    cfg: &GalerkinConfig<T>,
    forcing: Option<&VectorField<T>>,
) -> Result<AdvanceOutcome<T>> {
    cfg.validate()?;
    let spec = ctx.domain.spec();
    let e_before = {
        let kinetic = state.u_modes.iter().fold(T::zero(), |s, &c| s + c * c) * lit(0.5);
        kinetic + state.theta.integral(spec)
    };

    let mut dt = cfg.dt;
    let mut halvings = 0usize;
    // CFL bound from the advective speed.
    let mut max_u = T::zero();
    for c in &state.u.comps {
        max_u = max_u.max(c.norm_linf());
    }
    if max_u > T::zero() {
        let h_min = (0..spec.dim).fold(T::infinity(), |m, a| m.min(spec.spacing(a)));
        let dt_cfl = cfg.cfl_safety * h_min / max_u;
        while dt > dt_cfl && halvings < cfg.max_dt_halvings {
            dt = dt * lit(0.5);
            halvings += 1;
        }
    }

    loop {
        match attempt_step(ctx, state, cfg, dt, forcing) {
            Ok((new_state, work, ledger)) => {
                let report = StepReport {
                    time: new_state.time,
                    energy_drift: ledger.total_energy() - e_before,
                    production_dir: ledger.production_dir,
                    production_visc: ledger.production_visc.unwrap_or(T::nan()),
                    production_heat: ledger.production_heat.unwrap_or(T::nan()),
                    min_theta: ledger.min_theta,
                    max_d_sq: ledger.max_d_sq,
                    dt_used: dt,
                    halvings,
                };
                return Ok(AdvanceOutcome { state: new_state, report, work, ledger });
            }
            Err(Error::Positivity { min_theta }) => {
                if halvings < cfg.max_dt_halvings {
                    dt = dt * lit(0.5);
                    halvings += 1;
                } else {
                    return Err(Error::Abort(AbortReport {
                        reason: AbortReason::PositivityLost,
                        time: state.time.to_f64_lossy(),
                        detail: format!(
                            "min theta {min_theta:e} after exhausting {halvings} halvings"
                        ),
                    }));
                }
            }
            Err(other) => return Err(other),
        }
    }
}

/// Streaming observer of a run.
#[allow(unused_variables)]
pub trait RunSink<T: Scalar> {
    /// Called once with the initial state and its ledger.
    fn on_start(&mut self, state: &FieldState<T>, ledger: &EnergyLedger<T>) -> Result<()> {
        Ok(())
    }
    /// Called after every accepted step.
    fn on_step(&mut self, step: usize, outcome: &AdvanceOutcome<T>) -> Result<()> {
        Ok(())
    }
    /// Called with the final state (also on abort, with the last good one).
    fn on_finish(&mut self, state: &FieldState<T>) -> Result<()> {
        Ok(())
    }
}

/// Sink that ignores everything.
pub struct NullSink;

impl<T: Scalar> RunSink<T> for NullSink {}

/// Everything a completed (or aborted) run produced.
#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub final_state: FieldState<T>,
    pub ledgers: Vec<EnergyLedger<T>>,
    pub reports: Vec<StepReport<T>>,
    pub works: Vec<StressWork<T>>,
    /// Present when the run gave up before `t_end`.
    pub abort: Option<AbortReport>,
}

impl<T: Scalar> RunOutput<T> {
    pub fn completed(&self) -> bool {
        self.abort.is_none()
    }
}

/// March from the initial state to `t_end`, streaming every accepted step
/// to the sink. Deterministic for a fixed config and initial state.
pub fn run<T: Scalar>(
    domain: &Domain<T>,
    basis: &SolenoidalBasis<T>,
    cfg: &GalerkinConfig<T>,
    laws: &MaterialLaws<T>,
    initial: FieldState<T>,
    sink: &mut dyn RunSink<T>,
) -> Result<RunOutput<T>> {
    cfg.validate()?;
    let spec = domain.spec();
    initial.check_shape(spec)?;
    if initial.u_modes.len() != cfg.levels.n_modes {
        return Err(Error::Shape(format!(
            "initial state carries {} modes, config wants N = {}",
            initial.u_modes.len(),
            cfg.levels.n_modes
        )));
    }
    // Admissibility of the data: solenoidal u (consistent with its modal
    // expansion), strictly positive temperature, bounded director.
    initial.validate(domain)?;
    let recon = basis.reconstruct(domain, &initial.u_modes)?;
    let mut diff = recon.clone();
    diff.add_scaled(&initial.u, -T::one());
    let scale = T::one().max(initial.u.norm_l2(spec));
    let recon_tol = lit::<T>(1e-12).max(T::epsilon() * lit(1e2));
    if diff.norm_l2(spec) > recon_tol * scale {
        return Err(Error::Shape(
            "initial velocity does not match its modal expansion".into(),
        ));
    }
    if !initial.d.magnitude_sq().max().is_finite() {
        return Err(Error::Domain("initial director is not finite".into()));
    }
    if initial.theta.min() < laws.consts.theta_floor {
        return Err(Error::Domain(format!(
            "initial temperature must stay above theta_floor = {}",
            laws.consts.theta_floor
        )));
    }

    let ctx = StepContext::new(domain, basis, laws)?;
    let first_ledger = energy_ledger(domain, &initial, laws)?;
    sink.on_start(&initial, &first_ledger)?;

    let mut ledgers = vec![first_ledger];
    let mut reports = Vec::new();
    let mut works = Vec::new();
    let mut state = initial;
    let mut step = 0usize;
    let eps = cfg.dt * lit(1e-9);
    let mut abort = None;
    while state.time + eps < cfg.t_end {
        let mut step_cfg = *cfg;
        step_cfg.dt = cfg.dt.min(cfg.t_end - state.time);
        match advance_full(&ctx, &state, &step_cfg, None) {
            Ok(outcome) => {
                sink.on_step(step, &outcome)?;
                ledgers.push(outcome.ledger.clone());
                reports.push(outcome.report);
                works.push(outcome.work);
                state = outcome.state;
                step += 1;
            }
            Err(Error::Abort(report)) => {
                abort = Some(report);
                break;
            }
            Err(other) => return Err(other),
        }
    }
    sink.on_finish(&state)?;
    Ok(RunOutput { final_state: state, ledgers, reports, works, abort })
}
