//! Minimal library-level run: build a domain and basis, synthesize smooth
//! initial data, march the coupled system, and print the ledger tail.

use nemaflow::config::{InitialSpec, PresetKind};
use nemaflow::grid::DomainSpec;
use nemaflow::initial::make_initial;
use nemaflow::material::MaterialLaws;
use nemaflow::solenoidal::{build_basis, TruncationLevels};
use nemaflow::spectral::Domain;
use nemaflow::stepper::{run, GalerkinConfig, NullSink};

fn main() -> nemaflow::Result<()> {
    let tau = std::f64::consts::TAU;
    let domain = Domain::new(DomainSpec::periodic(2, &[tau, tau], &[32, 32])?);
    let basis = build_basis(&domain, 16)?;
    let laws = MaterialLaws::standard();
    let init = InitialSpec {
        preset: PresetKind::RandomSmooth,
        seed: 7,
        ..Default::default()
    };
    let state = make_initial(&domain, &basis, &laws, &init)?;
    let cfg = GalerkinConfig::new(TruncationLevels::new(16, 8)?, 1e-3, 0.2)?;
    let out = run(&domain, &basis, &cfg, &laws, state, &mut NullSink)?;

    let first = &out.ledgers[0];
    let last = out.ledgers.last().unwrap();
    println!("steps:          {}", out.reports.len());
    println!("total energy:   {:.12} -> {:.12}", first.total_energy(), last.total_energy());
    println!("kinetic:        {:.6e} -> {:.6e}", first.kinetic, last.kinetic);
    println!("entropy:        {:.6} -> {:.6}", first.entropy.unwrap(), last.entropy.unwrap());
    println!("max |d|^2:      {:.6}", last.max_d_sq);
    println!("min temperature {:.6}", last.min_theta);
    Ok(())
}
