//! The numeric core is generic over the scalar type; exercise the whole
//! pipeline in `f32` at tolerances matched to single precision.

use nemaflow::config::{InitialSpec, PresetKind};
use nemaflow::grid::DomainSpec;
use nemaflow::initial::make_initial;
use nemaflow::material::MaterialLaws;
use nemaflow::solenoidal::{build_basis, leray_project, TruncationLevels};
use nemaflow::spectral::Domain;
use nemaflow::stepper::{run, GalerkinConfig, NullSink};

#[test]
fn f32_pipeline_conserves_energy_at_single_precision() {
    let tau = std::f32::consts::TAU;
    let domain = Domain::new(DomainSpec::<f32>::periodic(2, &[tau, tau], &[16, 16]).unwrap());
    let basis = build_basis(&domain, 8).unwrap();
    let laws = MaterialLaws::<f32>::standard();
    let init = InitialSpec::<f32> {
        preset: PresetKind::RandomSmooth,
        seed: 3,
        velocity_amplitude: 0.05,
        theta_amplitude: 0.05,
        director_amplitude: 0.1,
        ..Default::default()
    };
    let state = make_initial(&domain, &basis, &laws, &init).unwrap();
    let cfg = GalerkinConfig::new(TruncationLevels::new(8, 8).unwrap(), 1e-2, 0.2).unwrap();
    let out = run(&domain, &basis, &cfg, &laws, state, &mut NullSink).unwrap();
    assert!(out.completed());
    let e0 = out.ledgers[0].total_energy();
    for l in &out.ledgers {
        let drift = ((l.total_energy() - e0) / e0).abs();
        assert!(drift <= 5e-6, "relative drift {drift} too large for f32");
        assert!(l.min_theta > 0.0);
        assert!(l.production_dir >= -1e-5);
    }
}

#[test]
fn f32_projections_behave() {
    let tau = std::f32::consts::TAU;
    let domain = Domain::new(DomainSpec::<f32>::periodic(2, &[tau, tau], &[16, 16]).unwrap());
    let basis = build_basis(&domain, 6).unwrap();
    let mode = basis.mode_field(&domain, 3).unwrap();
    let projected = leray_project(&domain, &mode).unwrap();
    let mut diff = projected.clone();
    diff.add_scaled(&mode, -1.0);
    assert!(diff.norm_l2(domain.spec()) < 1e-5, "solenoidal mode must be a fixed point");
    let coeffs = basis.project(&domain, &mode, 6).unwrap();
    for (i, c) in coeffs.iter().enumerate() {
        let expect = if i == 3 { 1.0 } else { 0.0 };
        assert!((c - expect).abs() < 1e-5, "coefficient {i} = {c}");
    }
}
