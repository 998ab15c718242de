//! Invariant audits: energy/entropy bookkeeping, a priori norm monitors,
//! the maximum-principle check, the total-dissipation balance, and the
//! renormalized heat-equation residual.
//!
//! Audits use the same grid quadrature as the stepper so identities that
//! hold by construction test at machine precision. Entries that need
//! `1/λ(ϑ)` (entropy and two production terms) are flagged as absent
//! rather than clamped when the temperature dips below `theta_floor`: a
//! masked positivity failure would be worse than a gap in the ledger.

use crate::error::{Error, Result};
use crate::fields::{grad_director, heat_flux_from_parts, law_field, FieldState};
use crate::grid::{Parity, ScalarField, VectorField, DIRECTOR_COMPS};
use crate::material::MaterialLaws;
use crate::scalar::{lit, Scalar};
use crate::spectral::Domain;

/// Per-state decomposition of energies and entropy-production rates.
#[derive(Debug, Clone)]
pub struct EnergyLedger<T> {
    pub time: T,
    /// `∫ |u|²/2`; taken from the modal coefficients when present.
    pub kinetic: T,
    /// `∫ ϑ`.
    pub thermal: T,
    /// `∫ |∇d|²/2`.
    pub elastic: T,
    /// `∫ W(d)`.
    pub penalty: T,
    /// `∫ (Λ(ϑ) - |∇d|²/2 - W(d))`; absent when `min ϑ < theta_floor`.
    pub entropy: Option<T>,
    /// `∫ |Δd - ∂W(d)|²`.
    pub production_dir: T,
    /// `∫ S:∇u / λ(ϑ)`; absent below the floor.
    pub production_visc: Option<T>,
    /// `-∫ q·∇ϑ λ'(ϑ)/λ²(ϑ)`; absent below the floor.
    pub production_heat: Option<T>,
    pub min_theta: T,
    pub max_d_sq: T,
}

impl<T: Scalar> EnergyLedger<T> {
    /// Conserved total `kinetic + thermal`.
    pub fn total_energy(&self) -> T {
        self.kinetic + self.thermal
    }

    /// Sum of the three production rates, when all are available.
    pub fn production_total(&self) -> Option<T> {
        Some(self.production_dir + self.production_visc? + self.production_heat?)
    }
}

/// Compute the full ledger for a state.
pub fn energy_ledger<T: Scalar>(
    domain: &Domain<T>,
    state: &FieldState<T>,
    laws: &MaterialLaws<T>,
) -> Result<EnergyLedger<T>> {
    let spec = domain.spec();
    state.check_shape(spec)?;

    let kinetic = if state.u_modes.is_empty() {
        state.u.magnitude_sq().integral(spec) * lit(0.5)
    } else {
        state.u_modes.iter().fold(T::zero(), |s, &c| s + c * c) * lit(0.5)
    };
    let thermal = state.theta.integral(spec);

    let grad_d = grad_director(domain, &state.d)?;
    let gd2 = grad_d.magnitude_sq();
    let elastic = gd2.integral(spec) * lit(0.5);

    let npts = spec.num_points();
    let mut w_field = Vec::with_capacity(npts);
    let mut dw = vec![[T::zero(); 3]; npts];
    for i in 0..npts {
        let d = [state.d.comps[0].data[i], state.d.comps[1].data[i], state.d.comps[2].data[i]];
        let (w, g) = laws.penalty(&d)?;
        w_field.push(w);
        dw[i] = g;
    }
    let penalty = ScalarField { data: w_field.clone() }.integral(spec);

    let min_theta = state.theta.min();
    let max_d_sq = state.d.magnitude_sq().max();

    // Director production: ∫ |Δd - ∂W(d)|².
    let parities = spec.director_parities();
    let mut prod_dir = T::zero();
    for k in 0..DIRECTOR_COMPS {
        let lap = domain.laplacian_scalar(&state.d.comps[k], parities[k])?;
        let mut s = T::zero();
        for (i, &l) in lap.data.iter().enumerate() {
            let r = l - dw[i][k];
            s += r * r;
        }
        prod_dir += s;
    }
    let production_dir = prod_dir * spec.cell_volume();

    let floored = min_theta >= laws.consts.theta_floor;

    let entropy = if floored {
        let mut s = T::zero();
        for (i, &t) in state.theta.data.iter().enumerate() {
            s += laws.dilatation_primitive(t)? - gd2.data[i] * lit(0.5) - w_field[i];
        }
        Some(s * spec.cell_volume())
    } else {
        None
    };

    let grad_u = domain.grad_vector(&state.u, &spec.velocity_parities())?;
    let production_visc = if floored {
        let mu = law_field(&state.theta, |t| laws.viscosity(t))?;
        let lambda = law_field(&state.theta, |t| laws.dilatation(t))?;
        let mut s = T::zero();
        for i in 0..npts {
            let mut sym_sq = T::zero();
            for a in 0..spec.dim {
                for b in 0..spec.dim {
                    let e = grad_u.comp(a, b).data[i] + grad_u.comp(b, a).data[i];
                    sym_sq += e * e;
                }
            }
            s += mu.data[i] / lambda.data[i] * sym_sq * lit(0.5);
        }
        Some(s * spec.cell_volume())
    } else {
        None
    };

    let production_heat = if floored {
        let grad_theta = domain.grad_scalar(&state.theta, Parity::Even)?;
        let q = heat_flux_from_parts(spec, &grad_theta, &state.d, &state.theta, laws)?;
        let lambda = law_field(&state.theta, |t| laws.dilatation(t))?;
        let slope = law_field(&state.theta, |t| laws.dilatation_slope(t))?;
        let mut s = T::zero();
        for i in 0..npts {
            let mut q_dot_g = T::zero();
            for a in 0..spec.dim {
                q_dot_g += q.comps[a].data[i] * grad_theta.comps[a].data[i];
            }
            let lam = lambda.data[i];
            s += -q_dot_g * slope.data[i] / (lam * lam);
        }
        Some(s * spec.cell_volume())
    } else {
        None
    };

    Ok(EnergyLedger {
        time: state.time,
        kinetic,
        thermal,
        elastic,
        penalty,
        entropy,
        production_dir,
        production_visc,
        production_heat,
        min_theta,
        max_d_sq,
    })
}

/// Transform-free cross-check of the ledger entries that took a modal or
/// spectral shortcut; returns the worst relative disagreement. Guards
/// against a shared normalization bug between the stepper and the audit.
pub fn ledger_cross_check<T: Scalar>(
    domain: &Domain<T>,
    state: &FieldState<T>,
    ledger: &EnergyLedger<T>,
) -> T {
    let spec = domain.spec();
    let mut worst = T::zero();
    let mut compare = |primary: T, plain: T| {
        let scale = T::one().max(primary.abs()).max(plain.abs());
        worst = worst.max((primary - plain).abs() / scale);
    };
    // Kinetic: modal sum vs plain Riemann sum of the grid values.
    let grid_kinetic = state.u.magnitude_sq().integral(spec) * lit(0.5);
    compare(ledger.kinetic, grid_kinetic);
    // Thermal: plain Riemann sum vs the spectral mean route.
    let spectral_thermal = {
        let engine = domain.engine();
        let spectrum = engine.forward(&engine.extend(&state.theta.data, Parity::Even));
        let mean = spectrum[0].re / T::from_usize_lossy(engine.ext_points());
        mean * spec.volume()
    };
    compare(ledger.thermal, spectral_thermal);
    worst
}

/// Norm exponents for the a priori monitors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormExponents<T> {
    /// `ν ∈ (0, 1/2)` for `‖∇(1+ϑ)^ν‖_{L²}`.
    pub nu: T,
    /// `q ∈ [1, 5/3)` for `‖ϑ‖_{L^q}`.
    pub q: T,
    /// `p ∈ [1, 5/4)` for `‖∇ϑ‖_{L^p}`.
    pub p: T,
}

impl<T: Scalar> NormExponents<T> {
    pub fn new(nu: T, q: T, p: T) -> Result<Self> {
        if !(nu > T::zero() && nu < lit(0.5)) {
            return Err(Error::Range(format!("nu must lie in (0, 1/2), got {nu}")));
        }
        if !(q >= T::one() && q < lit(5.0 / 3.0)) {
            return Err(Error::Range(format!("q must lie in [1, 5/3), got {q}")));
        }
        if !(p >= T::one() && p < lit(1.25)) {
            return Err(Error::Range(format!("p must lie in [1, 5/4), got {p}")));
        }
        Ok(Self { nu, q, p })
    }
}

impl<T: Scalar> Default for NormExponents<T> {
    fn default() -> Self {
        Self { nu: lit(0.25), q: lit(1.5), p: lit(1.2) }
    }
}

/// The a priori norm functionals of one state.
#[derive(Debug, Clone)]
pub struct NormReport<T> {
    pub exponents: NormExponents<T>,
    pub u_l2: T,
    pub grad_u_l2: T,
    pub grad_d_l2: T,
    pub grad_d_l4: T,
    pub lap_d_l2: T,
    pub d_linf: T,
    pub theta_l1: T,
    pub log_theta_l1: T,
    /// `‖∇(1+ϑ)^ν‖_{L²}`.
    pub grad_theta_pow_l2: T,
    pub theta_lq: T,
    pub grad_theta_lp: T,
    pub p_l53: T,
}

impl<T: Scalar> NormReport<T> {
    pub fn entries(&self) -> Vec<(&'static str, T)> {
        vec![
            ("u_l2", self.u_l2),
            ("grad_u_l2", self.grad_u_l2),
            ("grad_d_l2", self.grad_d_l2),
            ("grad_d_l4", self.grad_d_l4),
            ("lap_d_l2", self.lap_d_l2),
            ("d_linf", self.d_linf),
            ("theta_l1", self.theta_l1),
            ("log_theta_l1", self.log_theta_l1),
            ("grad_theta_pow_l2", self.grad_theta_pow_l2),
            ("theta_lq", self.theta_lq),
            ("grad_theta_lp", self.grad_theta_lp),
            ("p_l53", self.p_l53),
        ]
    }
}

/// Vector L^p norm over all components, cell-volume weighted.
fn vector_lp<T: Scalar>(v: &[&ScalarField<T>], p: T, spec: &crate::grid::DomainSpec<T>) -> T {
    let mut s = T::zero();
    for i in 0..v[0].len() {
        let mut mag_sq = T::zero();
        for c in v {
            mag_sq += c.data[i] * c.data[i];
        }
        s += mag_sq.sqrt().powf(p);
    }
    (s * spec.cell_volume()).powf(T::one() / p)
}

/// Compute every monitored norm of a state.
pub fn apriori_norms<T: Scalar>(
    domain: &Domain<T>,
    state: &FieldState<T>,
    exponents: NormExponents<T>,
) -> Result<NormReport<T>> {
    let spec = domain.spec();
    state.check_shape(spec)?;
    let grad_u = domain.grad_vector(&state.u, &spec.velocity_parities())?;
    let grad_d = grad_director(domain, &state.d)?;
    let grad_theta = domain.grad_scalar(&state.theta, Parity::Even)?;

    let u_l2 = state.u.norm_l2(spec);
    let grad_u_refs: Vec<&ScalarField<T>> = grad_u.comps.iter().collect();
    let grad_u_l2 = vector_lp(&grad_u_refs, lit(2.0), spec);
    let grad_d_refs: Vec<&ScalarField<T>> = grad_d.comps.iter().collect();
    let grad_d_l2 = vector_lp(&grad_d_refs, lit(2.0), spec);
    let grad_d_l4 = vector_lp(&grad_d_refs, lit(4.0), spec);

    let parities = spec.director_parities();
    let mut lap_comps = Vec::with_capacity(DIRECTOR_COMPS);
    for k in 0..DIRECTOR_COMPS {
        lap_comps.push(domain.laplacian_scalar(&state.d.comps[k], parities[k])?);
    }
    let lap_refs: Vec<&ScalarField<T>> = lap_comps.iter().collect();
    let lap_d_l2 = vector_lp(&lap_refs, lit(2.0), spec);

    let d_linf = state.d.magnitude_sq().max().sqrt();
    let theta_l1 = state.theta.norm_lp(T::one(), spec);
    let log_theta_l1 = {
        let mut s = T::zero();
        for &t in &state.theta.data {
            s += t.max(T::min_positive_value()).ln().abs();
        }
        s * spec.cell_volume()
    };

    let pow_field = ScalarField {
        data: state.theta.data.iter().map(|&t| (T::one() + t).powf(exponents.nu)).collect(),
    };
    let grad_pow = domain.grad_scalar(&pow_field, Parity::Even)?;
    let grad_pow_refs: Vec<&ScalarField<T>> = grad_pow.comps.iter().collect();
    let grad_theta_pow_l2 = vector_lp(&grad_pow_refs, lit(2.0), spec);

    let theta_lq = state.theta.norm_lp(exponents.q, spec);
    let grad_theta_refs: Vec<&ScalarField<T>> = grad_theta.comps.iter().collect();
    let grad_theta_lp = vector_lp(&grad_theta_refs, exponents.p, spec);
    let p_l53 = state.p.norm_lp(lit(5.0 / 3.0), spec);

    Ok(NormReport {
        exponents,
        u_l2,
        grad_u_l2,
        grad_d_l2,
        grad_d_l4,
        lap_d_l2,
        d_linf,
        theta_l1,
        log_theta_l1,
        grad_theta_pow_l2,
        theta_lq,
        grad_theta_lp,
        p_l53,
    })
}

/// Gagliardo-Nirenberg interpolation monitor for the director.
#[derive(Debug, Clone, Copy)]
pub struct GnReport<T> {
    /// `‖∇d‖_{L⁴} / (‖Δd‖_{L²}^{1/2} ‖d‖_∞^{1/2} + ‖d‖_∞)`; 0 for `d ≡ 0`.
    pub ratio: T,
    pub grad_d_l4: T,
    pub lap_d_l2: T,
    pub d_linf: T,
}

pub fn gn_monitor<T: Scalar>(domain: &Domain<T>, d: &VectorField<T>) -> Result<GnReport<T>> {
    let spec = domain.spec();
    d.check_shape(spec, DIRECTOR_COMPS)?;
    let grad_d = grad_director(domain, d)?;
    let refs: Vec<&ScalarField<T>> = grad_d.comps.iter().collect();
    let grad_d_l4 = vector_lp(&refs, lit(4.0), spec);
    let parities = spec.director_parities();
    let mut lap_comps = Vec::with_capacity(DIRECTOR_COMPS);
    for k in 0..DIRECTOR_COMPS {
        lap_comps.push(domain.laplacian_scalar(&d.comps[k], parities[k])?);
    }
    let lap_refs: Vec<&ScalarField<T>> = lap_comps.iter().collect();
    let lap_d_l2 = vector_lp(&lap_refs, lit(2.0), spec);
    let d_linf = d.magnitude_sq().max().sqrt();
    let denom = lap_d_l2.sqrt() * d_linf.sqrt() + d_linf;
    let ratio = if denom > T::zero() { grad_d_l4 / denom } else { T::zero() };
    Ok(GnReport { ratio, grad_d_l4, lap_d_l2, d_linf })
}

#[derive(Debug, Clone)]
pub struct MaxPrincipleReport<T> {
    /// `max(max_x |d₀|², D₀²)` plus the slack.
    pub bound: T,
    pub worst_value: T,
    pub worst_time: T,
    pub passed: bool,
}

/// Maximum-principle check over a series of `(time, max |d|²)` samples,
/// ordered in time; the first sample is the initial state.
pub fn max_principle_check<T: Scalar>(
    series: &[(T, T)],
    laws: &MaterialLaws<T>,
) -> Result<MaxPrincipleReport<T>> {
    if series.is_empty() {
        return Err(Error::Usage("maximum-principle check needs at least one sample".into()));
    }
    let d0_sq = laws.consts.d0 * laws.consts.d0;
    let bound = series[0].1.max(d0_sq) + lit(1e-8);
    let mut worst_value = T::neg_infinity();
    let mut worst_time = series[0].0;
    for &(t, v) in series {
        if v > worst_value {
            worst_value = v;
            worst_time = t;
        }
    }
    Ok(MaxPrincipleReport { bound, worst_value, worst_time, passed: worst_value <= bound })
}

#[derive(Debug, Clone)]
pub struct DissipationReport<T> {
    pub k_constant: T,
    pub bracket_initial: T,
    pub bracket_final: T,
    pub production_sum: T,
    /// `bracket(0) - bracket(τ) - Σ dt·productions`; the balance holds when
    /// this is above `-tol`.
    pub slack: T,
    pub passed: bool,
}

/// Total dissipation balance over a trajectory of ledgers.
///
/// With `K` large enough that `Kϑ - Λ(ϑ)` is nondecreasing on the run's
/// temperature range, the bracket `K·(kinetic+thermal) - entropy` must not
/// increase once accumulated production is added back.
pub fn total_dissipation_check<T: Scalar>(
    ledgers: &[EnergyLedger<T>],
    k_constant: Option<T>,
    laws: &MaterialLaws<T>,
) -> Result<DissipationReport<T>> {
    if ledgers.len() < 2 {
        return Err(Error::Usage("dissipation check needs at least two ledger rows".into()));
    }
    let mut theta_min = T::infinity();
    let mut theta_max = T::neg_infinity();
    for l in ledgers {
        theta_min = theta_min.min(l.min_theta);
        theta_max = theta_max.max(l.min_theta);
    }
    if theta_min < laws.consts.theta_floor {
        return Err(Error::Range(format!(
            "run temperature dipped to {theta_min}, below theta_floor"
        )));
    }
    // Default: twice the largest 1/λ over the run's range (λ nondecreasing
    // makes the infimum sit at theta_min), at least 2.
    let k_constant = match k_constant {
        Some(k) => k,
        None => lit::<T>(2.0) * T::one().max(T::one() / laws.dilatation(theta_min)?),
    };
    // Verify K ϑ - Λ(ϑ) is nondecreasing on the sampled range.
    let samples = 64;
    for i in 0..=samples {
        let t = theta_min
            + (theta_max - theta_min) * T::from_usize_lossy(i) / T::from_usize_lossy(samples);
        let lam = laws.dilatation(t)?;
        if k_constant * lam < T::one() {
            return Err(Error::Range(format!(
                "K = {k_constant} too small: K - 1/lambda is negative at theta = {t}"
            )));
        }
    }

    let bracket = |l: &EnergyLedger<T>| -> Result<T> {
        let entropy = l
            .entropy
            .ok_or_else(|| Error::Range("entropy entry flagged; cannot form the bracket".into()))?;
        Ok(k_constant * (l.kinetic + l.thermal) - entropy)
    };
    let bracket_initial = bracket(&ledgers[0])?;
    let bracket_final = bracket(ledgers.last().unwrap())?;
    let mut production_sum = T::zero();
    for pair in ledgers.windows(2) {
        let dt = pair[1].time - pair[0].time;
        let prod = pair[1]
            .production_total()
            .ok_or_else(|| Error::Range("production entry flagged".into()))?;
        production_sum += dt * prod;
    }
    let slack = bracket_initial - bracket_final - production_sum;
    let tol = lit::<T>(1e-8) * T::one().max(bracket_initial.abs());
    Ok(DissipationReport {
        k_constant,
        bracket_initial,
        bracket_final,
        production_sum,
        slack,
        passed: slack >= -tol,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct RenormReport<T> {
    /// `∫ |residual|` of the renormalized equation for `H(ϑ) = (1+ϑ)^ν`.
    pub residual_l1: T,
    /// `∫ H''(ϑ)(κ|∇ϑ|² + κa|d·∇ϑ|²)`; nonpositive for ν < 1.
    pub hpp_term: T,
}

/// Discrete residual of the renormalized heat identity over one step.
///
/// Spatial terms are evaluated one-sidedly at the new state, so the
/// residual of a consistent step scales linearly in `dt`.
pub fn renorm_residual<T: Scalar>(
    domain: &Domain<T>,
    before: &FieldState<T>,
    after: &FieldState<T>,
    nu: T,
    laws: &MaterialLaws<T>,
    dt: T,
) -> Result<RenormReport<T>> {
    if !(nu > T::zero() && nu < lit(0.5)) {
        return Err(Error::Range(format!("nu must lie in (0, 1/2), got {nu}")));
    }
    if !(dt > T::zero()) {
        return Err(Error::Range("dt must be positive".into()));
    }
    let spec = domain.spec();
    before.check_shape(spec)?;
    after.check_shape(spec)?;
    if !(before.theta.min() > T::zero() && after.theta.min() > T::zero()) {
        return Err(Error::Domain("renormalized residual needs positive temperatures".into()));
    }
    let npts = spec.num_points();
    let one = T::one();
    let h = |t: T| (one + t).powf(nu);
    let hp = |t: T| nu * (one + t).powf(nu - one);
    let hpp = |t: T| nu * (nu - one) * (one + t).powf(nu - lit(2.0));

    let theta = &after.theta;
    let grad_theta = domain.grad_scalar(theta, Parity::Even)?;
    let q = heat_flux_from_parts(spec, &grad_theta, &after.d, theta, laws)?;
    let kappa = law_field(theta, |t| laws.conductivity(t).map(|c| c.0))?;
    let kappa_aniso = law_field(theta, |t| laws.conductivity(t).map(|c| c.1))?;
    let mu = law_field(theta, |t| laws.viscosity(t))?;
    let lambda = law_field(theta, |t| laws.dilatation(t))?;
    let grad_u = domain.grad_vector(&after.u, &spec.velocity_parities())?;
    let grad_d = grad_director(domain, &after.d)?;

    // div(H(ϑ) u) and div(H'(ϑ) q), spectral.
    let h_field = ScalarField { data: theta.data.iter().map(|&t| h(t)).collect() };
    let hp_field = ScalarField { data: theta.data.iter().map(|&t| hp(t)).collect() };
    let vel_par = spec.velocity_parities();
    let mut hu = VectorField::zeros(spec, spec.dim);
    let mut hpq = VectorField::zeros(spec, spec.dim);
    for a in 0..spec.dim {
        for i in 0..npts {
            hu.comps[a].data[i] = h_field.data[i] * after.u.comps[a].data[i];
            hpq.comps[a].data[i] = hp_field.data[i] * q.comps[a].data[i];
        }
    }
    let div_hu = domain.div_vector(&hu, &vel_par)?;
    let div_hpq = domain.div_vector(&hpq, &vel_par)?;

    let mut residual_l1 = T::zero();
    let mut hpp_term = T::zero();
    for i in 0..npts {
        let t_new = after.theta.data[i];
        let rate = (h(t_new) - h(before.theta.data[i])) / dt;
        let mut grad_sq = T::zero();
        let mut d_dot_grad = T::zero();
        for a in 0..spec.dim {
            let g = grad_theta.comps[a].data[i];
            grad_sq += g * g;
            d_dot_grad += after.d.comps[a].data[i] * g;
        }
        let hpp_i = hpp(t_new)
            * (kappa.data[i] * grad_sq + kappa_aniso.data[i] * d_dot_grad * d_dot_grad);
        // Stress power (S - λ ∇d⊙∇d) : ∇u at the new state.
        let mut power = T::zero();
        for a in 0..spec.dim {
            for b in 0..spec.dim {
                let sym = grad_u.comp(a, b).data[i] + grad_u.comp(b, a).data[i];
                let mut tension = T::zero();
                for k in 0..DIRECTOR_COMPS {
                    tension += grad_d.comp(k, a).data[i] * grad_d.comp(k, b).data[i];
                }
                power += (mu.data[i] * sym - lambda.data[i] * tension)
                    * grad_u.comp(a, b).data[i];
            }
        }
        let res = rate + div_hu.data[i] + div_hpq.data[i] + hpp_i - hp(t_new) * power;
        residual_l1 += res.abs();
        hpp_term += hpp_i;
    }
    Ok(RenormReport {
        residual_l1: residual_l1 * spec.cell_volume(),
        hpp_term: hpp_term * spec.cell_volume(),
    })
}
