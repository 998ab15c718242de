//! Initial-condition construction from the named presets.
//!
//! Every preset ends with the same admission pipeline: the velocity is
//! Leray-projected and expanded in the first N basis modes (so the state
//! carries a consistent modal representation), the director is low-pass
//! filtered with the 2/3 mask (the discrete analogue of mollifying the
//! initial director), and the temperature must come out strictly positive.

use crate::config::{InitialSpec, PresetKind};
use crate::error::{Error, Result};
use crate::fields::FieldState;
use crate::grid::{ScalarField, VectorField, DIRECTOR_COMPS, MAX_DIM};
use crate::io::read_snapshot;
use crate::material::MaterialLaws;
use crate::rng::SplitMix64;
use crate::scalar::{lit, Scalar};
use crate::solenoidal::{leray_project, SolenoidalBasis};
use crate::spectral::Domain;

/// Build the initial state for a preset.
pub fn make_initial<T: Scalar>(
    domain: &Domain<T>,
    basis: &SolenoidalBasis<T>,
    laws: &MaterialLaws<T>,
    init: &InitialSpec<T>,
) -> Result<FieldState<T>> {
    let spec = domain.spec();
    let n = basis.len();
    let mut state = match init.preset {
        PresetKind::Rest => {
            let mut s = FieldState::rest(spec, n);
            s.theta = ScalarField::constant(spec, init.theta_base);
            for (c, &b) in s.d.comps.iter_mut().zip(&init.director_base) {
                *c = ScalarField::constant(spec, b);
            }
            s
        }
        PresetKind::TaylorGreen => {
            if spec.dim != 2 {
                return Err(Error::Usage("the taylor-green preset is two-dimensional".into()));
            }
            let kx = lit::<T>(2.0) * T::PI() / spec.lengths[0];
            let ky = lit::<T>(2.0) * T::PI() / spec.lengths[1];
            let amp = init.velocity_amplitude;
            let scale = kx.max(ky);
            let mut s = FieldState::rest(spec, n);
            s.u = VectorField {
                comps: vec![
                    ScalarField::from_fn(spec, |x| {
                        amp * (ky / scale) * (kx * x[0]).sin() * (ky * x[1]).cos()
                    }),
                    ScalarField::from_fn(spec, |x| {
                        -amp * (kx / scale) * (kx * x[0]).cos() * (ky * x[1]).sin()
                    }),
                ],
            };
            s.theta = ScalarField::constant(spec, init.theta_base);
            for (c, &b) in s.d.comps.iter_mut().zip(&init.director_base) {
                *c = ScalarField::constant(spec, b);
            }
            s
        }
        PresetKind::RandomSmooth => {
            // Independent streams per field so the synthesized ϑ and d do
            // not depend on how many velocity coefficients a particular
            // basis holds; refinement sweeps then share their initial data.
            let mut rng_u = SplitMix64::new(init.seed);
            let mut rng_theta = SplitMix64::new(init.seed.wrapping_add(0x5133));
            let mut s = FieldState::rest(spec, n);
            // Velocity: random modal coefficients with an exponentially
            // decaying spectrum. The basis ordering is nested, so the same
            // seed generates consistent truncations across N sweeps.
            let decay = init.spectral_decay;
            let active = if init.velocity_modes == 0 { n } else { init.velocity_modes.min(n) };
            let mut coeffs = vec![T::zero(); n];
            for (i, c) in coeffs.iter_mut().enumerate().take(active) {
                let k2 = basis.mode_k_squared(domain, i)?;
                let weight = (-decay * k2.sqrt()).exp();
                *c = lit::<T>(rng_u.next_in(-1.0, 1.0)) * init.velocity_amplitude * weight;
            }
            s.u_modes = coeffs;
            s.u = basis.reconstruct(domain, &s.u_modes)?;
            // Temperature and director: low-wavenumber random trigonometric
            // sums, drawn deterministically from the per-field streams.
            let kcut = init.perturbation_modes as i64;
            let axes = init.perturbation_axes.min(spec.dim).max(1);
            s.theta = random_smooth_scalar(
                domain,
                &mut rng_theta,
                init.theta_base,
                init.theta_amplitude,
                decay,
                kcut,
                axes,
            );
            for (k, (c, &b)) in s.d.comps.iter_mut().zip(&init.director_base).enumerate() {
                let mut rng_d = SplitMix64::new(init.seed.wrapping_add(0xD17 + k as u64));
                *c = random_smooth_scalar(
                    domain,
                    &mut rng_d,
                    b,
                    init.director_amplitude,
                    decay,
                    kcut,
                    axes,
                );
            }
            s
        }
        PresetKind::File => {
            let path = init
                .file
                .as_ref()
                .ok_or_else(|| Error::Usage("file preset without a path".into()))?;
            let (snap_spec, mut s) = read_snapshot::<T>(path)?;
            if snap_spec.dim != spec.dim || snap_spec.resolution != spec.resolution {
                return Err(Error::Shape(format!(
                    "snapshot grid {:?} (dim {}) does not match the domain {:?} (dim {})",
                    &snap_spec.resolution[..snap_spec.dim],
                    snap_spec.dim,
                    &spec.resolution[..spec.dim],
                    spec.dim
                )));
            }
            s.time = T::zero();
            s
        }
    };

    // Admission pipeline shared by every preset.
    let projected = leray_project(domain, &state.u)?;
    state.u_modes = basis.project(domain, &projected, n)?;
    state.u = basis.reconstruct(domain, &state.u_modes)?;
    let parities = spec.director_parities();
    for k in 0..DIRECTOR_COMPS {
        state.d.comps[k] = domain.dealias_scalar(&state.d.comps[k], parities[k]);
    }
    let min_theta = state.theta.min();
    if !(min_theta > T::zero()) {
        return Err(Error::Domain(format!(
            "initial temperature reaches {min_theta}; lower theta_amplitude or raise theta_base"
        )));
    }
    if min_theta < laws.consts.theta_floor {
        return Err(Error::Domain(format!(
            "initial temperature {min_theta} sits below theta_floor {}",
            laws.consts.theta_floor
        )));
    }
    state.p = ScalarField::zeros(spec);
    state.time = T::zero();
    Ok(state)
}

/// Random low-wavenumber field `base + amplitude Σ w_k trig(k·x)` with
/// exponentially decaying weights, normalized so the perturbation peak is
/// of order `amplitude`.
fn random_smooth_scalar<T: Scalar>(
    domain: &Domain<T>,
    rng: &mut SplitMix64,
    base: T,
    amplitude: T,
    decay: T,
    kcut: i64,
    axes: usize,
) -> ScalarField<T> {
    let spec = domain.spec();
    struct Term<T> {
        k: [T; MAX_DIM],
        amp: T,
        phase_cos: bool,
    }
    let mut terms: Vec<Term<T>> = Vec::new();
    let mut weight_sum = T::zero();
    let zrange = if spec.dim == 3 && axes >= 3 { -kcut..=kcut } else { 0..=0 };
    let yrange = if axes >= 2 { -kcut..=kcut } else { 0..=0 };
    for kz in zrange {
        for ky in yrange.clone() {
            for kx in 0..=kcut {
                if kx == 0 && (ky < 0 || (ky == 0 && kz <= 0)) {
                    continue; // canonical half-space, no mean shift
                }
                let mut k = [T::zero(); MAX_DIM];
                let ints = [kx, ky, kz];
                let mut k2 = T::zero();
                for a in 0..spec.dim {
                    k[a] = lit::<T>(2.0) * T::PI() * lit::<T>(ints[a] as f64) / spec.lengths[a];
                    k2 += k[a] * k[a];
                }
                let weight = (-decay * k2.sqrt()).exp();
                let amp = lit::<T>(rng.next_in(-1.0, 1.0)) * weight;
                let phase_cos = rng.next_f64() < 0.5;
                weight_sum += amp.abs();
                terms.push(Term { k, amp, phase_cos });
            }
        }
    }
    let norm = if weight_sum > T::zero() { amplitude / weight_sum } else { T::zero() };
    ScalarField::from_fn(spec, |x| {
        let mut v = base;
        for t in &terms {
            let mut angle = T::zero();
            for a in 0..spec.dim {
                angle += t.k[a] * x[a];
            }
            let trig = if t.phase_cos { angle.cos() } else { angle.sin() };
            v += norm * t.amp * trig;
        }
        v
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::InitialSpec;
    use crate::grid::DomainSpec;
    use crate::solenoidal::build_basis;

    const TWO_PI: f64 = std::f64::consts::TAU;

    fn setup(n_modes: usize) -> (Domain<f64>, SolenoidalBasis<f64>, MaterialLaws<f64>) {
        let dom = Domain::new(DomainSpec::periodic(2, &[TWO_PI, TWO_PI], &[32, 32]).unwrap());
        let basis = build_basis(&dom, n_modes).unwrap();
        (dom, basis, MaterialLaws::standard())
    }

    #[test]
    fn rest_preset() {
        let (dom, basis, laws) = setup(4);
        let init = InitialSpec::default();
        let state = make_initial(&dom, &basis, &laws, &init).unwrap();
        assert!(state.u.norm_l2(dom.spec()) < 1e-14);
        assert!((state.theta.data[0] - 1.0).abs() < 1e-15);
        assert!((state.d.comps[0].data[0] - 1.0).abs() < 1e-12);
        state.validate(&dom).unwrap();
    }

    #[test]
    fn taylor_green_is_divergence_free() {
        let (dom, basis, laws) = setup(8);
        let init = InitialSpec { preset: PresetKind::TaylorGreen, ..Default::default() };
        let state = make_initial(&dom, &basis, &laws, &init).unwrap();
        let div = dom.div_vector(&state.u, &dom.spec().velocity_parities()).unwrap();
        assert!(div.norm_l2(dom.spec()) < 1e-13);
        // The flow is in the span of the first two shells, so projection
        // loses nothing.
        let ke: f64 = state.u_modes.iter().map(|c| c * c).sum();
        assert!(ke > 0.0);
        state.validate(&dom).unwrap();
    }

    #[test]
    fn random_smooth_is_deterministic() {
        let (dom, basis, laws) = setup(12);
        let init = InitialSpec { preset: PresetKind::RandomSmooth, seed: 42, ..Default::default() };
        let a = make_initial(&dom, &basis, &laws, &init).unwrap();
        let b = make_initial(&dom, &basis, &laws, &init).unwrap();
        assert_eq!(a.u_modes, b.u_modes);
        assert_eq!(a.theta.data, b.theta.data);
        assert_eq!(a.d.comps[2].data, b.d.comps[2].data);
        // Different seeds give different fields.
        let init2 = InitialSpec { seed: 43, ..init };
        let c = make_initial(&dom, &basis, &laws, &init2).unwrap();
        assert_ne!(a.u_modes, c.u_modes);
        a.validate(&dom).unwrap();
        assert!(a.theta.min() > 0.0);
    }

    #[test]
    fn random_smooth_truncations_nest() {
        // The same seed at smaller N yields the leading coefficients of the
        // larger basis: the study sweeps rely on this.
        let (dom, basis_large, laws) = setup(12);
        let basis_small = build_basis(&dom, 6).unwrap();
        let init = InitialSpec { preset: PresetKind::RandomSmooth, seed: 7, ..Default::default() };
        let large = make_initial(&dom, &basis_large, &laws, &init).unwrap();
        let small = make_initial(&dom, &basis_small, &laws, &init).unwrap();
        for i in 0..6 {
            // Identical up to the reprojection roundoff of the differing
            // reconstructions.
            assert!(
                (large.u_modes[i] - small.u_modes[i]).abs() < 1e-14,
                "coefficient {i} differs: {} vs {}",
                large.u_modes[i],
                small.u_modes[i]
            );
        }
    }

    #[test]
    fn excessive_theta_amplitude_is_rejected() {
        let (dom, basis, laws) = setup(4);
        let init = InitialSpec {
            preset: PresetKind::RandomSmooth,
            theta_base: 0.1,
            theta_amplitude: 5.0,
            ..Default::default()
        };
        assert!(make_initial(&dom, &basis, &laws, &init).is_err());
    }
}
