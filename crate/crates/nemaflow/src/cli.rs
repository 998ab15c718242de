//! Command-line driver: `run`, `study`, `audit`, and `validate`
//! subcommands, file emission, and the run-level invariant summary that
//! decides the exit status.
//!
//! The output directory comes from the config's `[output] dir` key and can
//! be overridden with the `NEMAFLOW_OUTDIR` environment variable.

use std::path::{Path, PathBuf};

use crate::audit::{
    apriori_norms, energy_ledger, gn_monitor, ledger_cross_check, max_principle_check,
    total_dissipation_check, EnergyLedger, NormReport,
};
use crate::config::{resolve_config, dump_config, RawConfig, RunConfig};
use crate::error::{Error, Result};
use crate::initial::make_initial;
use crate::io::{
    domain_label, first_slice, read_snapshot, write_heatmap, write_mode_table, write_norms,
    write_snapshot, write_state_csv, LedgerWriter, SummaryWriter,
};

use crate::solenoidal::build_basis;
use crate::stepper::{kinetic_identity_residual, run, AdvanceOutcome, RunOutput, RunSink};
use crate::study::convergence_study;
use crate::Real;

pub const OUTDIR_ENV: &str = "NEMAFLOW_OUTDIR";

const USAGE: &str = "usage:
  nemaflow run <config> [--set section.key=value]...
  nemaflow study <config> --n-list N1,N2,... --m-list M1,M2,... [--set ...]
  nemaflow audit <snapshot> <config> [--set ...]
  nemaflow validate <config> [--set ...]";

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args(args: &[String]) -> i32 {
    match dispatch(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(args: &[String]) -> Result<i32> {
    let Some(command) = args.first() else {
        eprintln!("{USAGE}");
        return Ok(2);
    };
    match command.as_str() {
        "run" => {
            let (paths, sets, _) = split_args(&args[1..])?;
            let [config_path] = paths.as_slice() else {
                return Err(Error::Usage("run expects exactly one config path".into()));
            };
            let cfg = load_config(config_path, &sets)?;
            run_command(&cfg)
        }
        "study" => {
            let (paths, sets, lists) = split_args(&args[1..])?;
            let [config_path] = paths.as_slice() else {
                return Err(Error::Usage("study expects exactly one config path".into()));
            };
            let n_list = lists
                .iter()
                .find(|(k, _)| k == "n-list")
                .ok_or_else(|| Error::Usage("study requires --n-list".into()))?;
            let m_list = lists
                .iter()
                .find(|(k, _)| k == "m-list")
                .ok_or_else(|| Error::Usage("study requires --m-list".into()))?;
            let cfg = load_config(config_path, &sets)?;
            study_command(&cfg, &n_list.1, &m_list.1)
        }
        "audit" => {
            let (paths, sets, _) = split_args(&args[1..])?;
            let [snapshot_path, config_path] = paths.as_slice() else {
                return Err(Error::Usage("audit expects <snapshot> <config>".into()));
            };
            let cfg = load_config(config_path, &sets)?;
            audit_command(Path::new(snapshot_path), &cfg)
        }
        "validate" => {
            let (paths, sets, _) = split_args(&args[1..])?;
            let [config_path] = paths.as_slice() else {
                return Err(Error::Usage("validate expects exactly one config path".into()));
            };
            let cfg = load_config(config_path, &sets)?;
            validate_command(&cfg)
        }
        other => {
            eprintln!("unknown subcommand {other:?}\n{USAGE}");
            Ok(2)
        }
    }
}

type ParsedArgs = (Vec<String>, Vec<String>, Vec<(String, Vec<usize>)>);

/// Split positional paths, `--set` overrides, and `--*-list` options.
fn split_args(args: &[String]) -> Result<ParsedArgs> {
    let mut paths = Vec::new();
    let mut sets = Vec::new();
    let mut lists = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        if arg == "--set" {
            let v = it.next().ok_or_else(|| Error::Usage("--set needs an argument".into()))?;
            sets.push(v.clone());
        } else if let Some(name) = arg.strip_prefix("--").filter(|n| n.ends_with("-list")) {
            let v = it.next().ok_or_else(|| Error::Usage(format!("{arg} needs an argument")))?;
            let values = v
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<usize>().map_err(|_| {
                        Error::Usage(format!("{arg}: bad mode count {tok:?}"))
                    })
                })
                .collect::<Result<Vec<usize>>>()?;
            lists.push((name.to_string(), values));
        } else if arg.starts_with("--") {
            return Err(Error::Usage(format!("unknown option {arg}")));
        } else {
            paths.push(arg.clone());
        }
    }
    Ok((paths, sets, lists))
}

fn load_config(path: &str, sets: &[String]) -> Result<RunConfig<Real>> {
    let path = Path::new(path);
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut raw = RawConfig::parse(&text)?;
    for s in sets {
        raw.set_override(s)?;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    resolve_config(&raw, base)
}

fn output_dir(cfg: &RunConfig<Real>) -> PathBuf {
    match std::env::var_os(OUTDIR_ENV) {
        Some(dir) => PathBuf::from(dir),
        None => cfg.output_dir.clone(),
    }
}

/// Streams ledger rows and periodic snapshots to the output directory.
struct FileSink<'a> {
    spec: &'a crate::grid::DomainSpec<Real>,
    domain: &'a crate::Domain,
    out_dir: &'a Path,
    stride: usize,
    ledger: Option<LedgerWriter>,
    /// Running maximum of the Gagliardo-Nirenberg ratio over the run.
    gn_max: f64,
}

impl<'a> RunSink<Real> for FileSink<'a> {
    fn on_start(
        &mut self,
        state: &crate::fields::FieldState<Real>,
        ledger: &EnergyLedger<Real>,
    ) -> Result<()> {
        if let Some(w) = self.ledger.as_mut() {
            w.write_row(ledger, None)?;
        }
        write_snapshot(&self.out_dir.join("snap_000000.bin"), self.spec, state)
    }

    fn on_step(&mut self, step: usize, outcome: &AdvanceOutcome<Real>) -> Result<()> {
        if let Some(w) = self.ledger.as_mut() {
            w.write_row(&outcome.ledger, Some(&outcome.report))?;
        }
        self.gn_max = self.gn_max.max(gn_monitor(self.domain, &outcome.state.d)?.ratio);
        if self.stride > 0 && (step + 1) % self.stride == 0 {
            let path = self.out_dir.join(format!("snap_{:06}.bin", step + 1));
            write_snapshot(&path, self.spec, &outcome.state)?;
        }
        Ok(())
    }

    fn on_finish(&mut self, state: &crate::fields::FieldState<Real>) -> Result<()> {
        write_snapshot(&self.out_dir.join("snap_final.bin"), self.spec, state)
    }
}

/// Per-invariant outcome destined for the machine-readable summary.
#[derive(Debug, Clone)]
pub struct InvariantOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
}

/// Evaluate the run-level invariant suite from the collected output.
pub fn evaluate_invariants(
    domain: &crate::Domain,
    cfg: &RunConfig<Real>,
    out: &RunOutput<Real>,
) -> Result<Vec<InvariantOutcome>> {
    let mut checks = Vec::new();
    let ledgers = &out.ledgers;
    let first = &ledgers[0];
    let e0 = first.total_energy();
    let scale = e0.abs().max(1e-30);

    checks.push(InvariantOutcome {
        name: "run.completed",
        passed: out.completed(),
        value: if out.completed() { 1.0 } else { 0.0 },
        bound: 1.0,
    });

    let mut max_drift: f64 = 0.0;
    for l in ledgers {
        max_drift = max_drift.max(((l.total_energy() - e0) / scale).abs());
    }
    checks.push(InvariantOutcome {
        name: "energy.max_relative_drift",
        passed: max_drift <= 1e-8,
        value: max_drift,
        bound: 1e-8,
    });

    let mut min_production = f64::INFINITY;
    let mut production_flagged = false;
    for l in &ledgers[1..] {
        for p in [l.production_dir, opt(l.production_visc), opt(l.production_heat)] {
            production_flagged |= p.is_nan();
            min_production = min_production.min(p);
        }
    }
    if ledgers.len() == 1 {
        min_production = 0.0;
    }
    if production_flagged {
        min_production = f64::NAN;
    }
    checks.push(InvariantOutcome {
        name: "entropy.min_production",
        passed: min_production >= -1e-12,
        value: min_production,
        bound: -1e-12,
    });

    // Cumulative entropy inequality: S(τ) - S(0) - Σ dt·production ≥ -tol.
    let entropy_slack = entropy_inequality_slack(ledgers);
    let s0 = opt(first.entropy).abs().max(1e-30);
    checks.push(InvariantOutcome {
        name: "entropy.cumulative_slack_relative",
        passed: entropy_slack / s0 >= -1e-7,
        value: entropy_slack / s0,
        bound: -1e-7,
    });

    let series: Vec<(Real, Real)> = ledgers.iter().map(|l| (l.time, l.max_d_sq)).collect();
    let max_p = max_principle_check(&series, &cfg.laws)?;
    checks.push(InvariantOutcome {
        name: "director.max_principle",
        passed: max_p.passed,
        value: max_p.worst_value,
        bound: max_p.bound,
    });

    let min_theta = ledgers.iter().fold(f64::INFINITY, |m, l| m.min(l.min_theta));
    checks.push(InvariantOutcome {
        name: "temperature.min",
        passed: min_theta > 0.0,
        value: min_theta,
        bound: 0.0,
    });

    let kin_resid = kinetic_identity_residual(
        ledgers[0].kinetic,
        ledgers.last().unwrap().kinetic,
        &out.works,
    );
    let u0_sq = (2.0 * ledgers[0].kinetic).abs().max(1e-30);
    checks.push(InvariantOutcome {
        name: "kinetic.ledger_residual_relative",
        passed: kin_resid.abs() / u0_sq <= 1e-9,
        value: kin_resid.abs() / u0_sq,
        bound: 1e-9,
    });

    if ledgers.len() >= 2 {
        let dissipation = total_dissipation_check(ledgers, None, &cfg.laws)?;
        checks.push(InvariantOutcome {
            name: "entropy.dissipation_balance",
            passed: dissipation.passed,
            value: dissipation.slack,
            bound: -1e-8 * dissipation.bracket_initial.abs().max(1.0),
        });
    }

    let final_ledger = energy_ledger(domain, &out.final_state, &cfg.laws)?;
    let cross = ledger_cross_check(domain, &out.final_state, &final_ledger);
    checks.push(InvariantOutcome {
        name: "audit.cross_check_relative",
        passed: cross <= 1e-4,
        value: cross,
        bound: 1e-4,
    });

    Ok(checks)
}

fn opt(v: Option<Real>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// `S(τ) - S(0) - Σ dt·productions` over a ledger trajectory; NaN when any
/// entropy entry is flagged.
pub fn entropy_inequality_slack(ledgers: &[EnergyLedger<Real>]) -> f64 {
    let Some(first) = ledgers.first() else { return f64::NAN };
    let Some(last) = ledgers.last() else { return f64::NAN };
    let (Some(s0), Some(st)) = (first.entropy, last.entropy) else { return f64::NAN };
    let mut production = 0.0;
    for pair in ledgers.windows(2) {
        let dt = pair[1].time - pair[0].time;
        match pair[1].production_total() {
            Some(p) => production += dt * p,
            None => return f64::NAN,
        }
    }
    st - s0 - production
}

/// Execute a configured run, write all artifacts, and return the exit code
/// (0 only when the run completed and every invariant held).
pub fn run_command(cfg: &RunConfig<Real>) -> Result<i32> {
    let out_dir = output_dir(cfg);
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join("config_resolved.cfg"), dump_config(cfg))?;

    let domain = crate::Domain::new(cfg.domain);
    let basis = build_basis(&domain, cfg.galerkin.levels.n_modes)?;
    write_mode_table(&out_dir.join("modes.csv"), &basis)?;
    let initial = make_initial(&domain, &basis, &cfg.laws, &cfg.initial)?;

    let mut sink = FileSink {
        spec: domain.spec(),
        domain: &domain,
        out_dir: &out_dir,
        stride: cfg.snapshot_stride,
        ledger: Some(LedgerWriter::create(&out_dir.join("ledger.csv"))?),
        gn_max: 0.0,
    };
    let result = run(&domain, &basis, &cfg.galerkin, &cfg.laws, initial, &mut sink);
    if let Some(w) = sink.ledger.take() {
        w.finish()?;
    }
    let gn_running_max = sink.gn_max;
    let out = result?;

    // Final-state artifacts.
    let mut norm_reports: Vec<NormReport<Real>> = Vec::new();
    for exps in cfg.exponent_tuples()? {
        norm_reports.push(apriori_norms(&domain, &out.final_state, exps)?);
    }
    write_norms(&out_dir.join("norms.csv"), &norm_reports)?;
    let (w, h, slice) = first_slice(domain.spec(), &out.final_state.theta);
    write_heatmap(&out_dir.join("theta_final.pgm"), w, h, slice)?;
    if domain.spec().num_points() <= 64 * 64 {
        write_state_csv(&out_dir.join("state_final.csv"), domain.spec(), &out.final_state)?;
    }

    let checks = evaluate_invariants(&domain, cfg, &out)?;
    let gn = gn_monitor(&domain, &out.final_state.d)?;

    let mut summary = SummaryWriter::create(&out_dir.join("summary.txt"))?;
    summary.kv("domain", domain_label(domain.spec()))?;
    summary.kv("modes.n", cfg.galerkin.levels.n_modes)?;
    summary.kv("modes.m", cfg.galerkin.levels.m_modes)?;
    summary.kv("steps", out.reports.len())?;
    summary.kv("final_time", format!("{:?}", out.final_state.time))?;
    summary.kv("seed", cfg.initial.seed)?;
    if let Some(abort) = &out.abort {
        summary.kv("abort", abort)?;
    }
    let mut all_passed = true;
    for c in &checks {
        all_passed &= c.passed;
        summary.kv(&format!("invariant.{}.passed", c.name), c.passed)?;
        summary.kv(&format!("invariant.{}.value", c.name), format!("{:?}", c.value))?;
        summary.kv(&format!("invariant.{}.bound", c.name), format!("{:?}", c.bound))?;
    }
    summary.kv("gn.final_ratio", format!("{:?}", gn.ratio))?;
    summary.kv("gn.running_max", format!("{gn_running_max:?}"))?;
    summary.kv("result", if all_passed { "pass" } else { "fail" })?;
    summary.finish()?;

    for c in &checks {
        println!(
            "{:40} {}  (value {:.3e}, bound {:.3e})",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.value,
            c.bound
        );
    }
    Ok(if all_passed { 0 } else { 1 })
}

/// Run the (N, M) refinement study and write its table.
pub fn study_command(cfg: &RunConfig<Real>, n_list: &[usize], m_list: &[usize]) -> Result<i32> {
    let out_dir = output_dir(cfg);
    std::fs::create_dir_all(&out_dir)?;
    let report = convergence_study(cfg, n_list, m_list)?;
    let csv = report.to_csv();
    std::fs::write(out_dir.join("study.csv"), &csv)?;
    print!("{csv}");
    let any_aborted = report.rows().any(|r| r.aborted);
    Ok(if any_aborted { 1 } else { 0 })
}

/// Recompute the audit suite on a stored snapshot.
pub fn audit_command(snapshot: &Path, cfg: &RunConfig<Real>) -> Result<i32> {
    let (header, state) = read_snapshot::<Real>(snapshot)?;
    if header.dim != cfg.domain.dim || header.resolution != cfg.domain.resolution {
        return Err(Error::Shape(format!(
            "snapshot grid {:?} does not match the configured domain {:?}",
            &header.resolution[..header.dim],
            &cfg.domain.resolution[..cfg.domain.dim]
        )));
    }
    let domain = crate::Domain::new(cfg.domain);
    let ledger = energy_ledger(&domain, &state, &cfg.laws)?;
    println!("time = {:?}", ledger.time);
    println!("kinetic = {:?}", ledger.kinetic);
    println!("thermal = {:?}", ledger.thermal);
    println!("elastic = {:?}", ledger.elastic);
    println!("penalty = {:?}", ledger.penalty);
    match ledger.entropy {
        Some(s) => println!("entropy = {s:?}"),
        None => println!("entropy = flagged (min theta below floor)"),
    }
    println!("production_dir = {:?}", ledger.production_dir);
    println!("production_visc = {}", opt(ledger.production_visc));
    println!("production_heat = {}", opt(ledger.production_heat));
    println!("min_theta = {:?}", ledger.min_theta);
    println!("max_d_sq = {:?}", ledger.max_d_sq);
    let cross = ledger_cross_check(&domain, &state, &ledger);
    println!("cross_check = {cross:?}");
    for exps in cfg.exponent_tuples()? {
        let norms = apriori_norms(&domain, &state, exps)?;
        for (name, v) in norms.entries() {
            println!(
                "norm.{name}[nu={:?},q={:?},p={:?}] = {v:?}",
                exps.nu, exps.q, exps.p
            );
        }
    }
    let gn = gn_monitor(&domain, &state.d)?;
    println!("gn.ratio = {:?}", gn.ratio);
    let healthy = ledger.min_theta > 0.0 && cross <= 1e-4;
    Ok(if healthy { 0 } else { 1 })
}

/// Validate the material hypotheses of a config and print the report.
pub fn validate_command(cfg: &RunConfig<Real>) -> Result<i32> {
    // Parsing already gated on the validator; rerun it for the report.
    let (theta_grid, d_samples) = crate::material::default_validation_samples::<Real>(17);
    let report = cfg.laws.validate_hypotheses(&theta_grid, &d_samples)?;
    print!("{}", report.summary());
    Ok(if report.all_passed() { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_args_handles_sets_and_lists() {
        let args: Vec<String> = [
            "cfg.cfg",
            "--set",
            "galerkin.dt=1e-4",
            "--n-list",
            "8,16,32",
            "--m-list",
            "4",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let (paths, sets, lists) = split_args(&args).unwrap();
        assert_eq!(paths, vec!["cfg.cfg".to_string()]);
        assert_eq!(sets, vec!["galerkin.dt=1e-4".to_string()]);
        assert_eq!(lists[0], ("n-list".to_string(), vec![8, 16, 32]));
        assert_eq!(lists[1], ("m-list".to_string(), vec![4]));
        assert!(split_args(&["--bogus".to_string()]).is_err());
    }

    #[test]
    fn unknown_subcommand_exits_2() {
        assert_eq!(main_with_args(&["frobnicate".to_string()]), 2);
        assert_eq!(main_with_args(&[]), 2);
    }
}
