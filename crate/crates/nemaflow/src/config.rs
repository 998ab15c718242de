//! Run configuration: plain-text section/key-value format, strict parsing
//! (unknown keys are errors), dump/reparse round-trips, and `--set`
//! overrides.
//!
//! ```text
//! [domain]
//! dim = 2
//! lengths = 6.283185307179586 6.283185307179586
//! resolution = 64 64
//! mode = periodic            # or slip-channel (needs wall_axis)
//!
//! [galerkin]
//! n_modes = 64
//! m_modes = 64
//! dt = 0.001
//! t_end = 1.0
//! ```
//!
//! Material parameters live in `[material]`; constitutive laws default to
//! the built-in closures and can be replaced by two-column tables via
//! `*_table` keys. Initial conditions are named presets under `[initial]`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::audit::NormExponents;
use crate::error::{Error, Result};
use crate::grid::{DomainMode, DomainSpec, MAX_DIM};
use crate::material::{default_validation_samples, MaterialLaws, MonotoneTable, ScalarLaw};
use crate::scalar::{lit, Scalar};
use crate::solenoidal::TruncationLevels;
use crate::stepper::GalerkinConfig;

/// Named initial-condition presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Rest,
    TaylorGreen,
    RandomSmooth,
    File,
}

impl PresetKind {
    pub fn name(&self) -> &'static str {
        match self {
            PresetKind::Rest => "rest",
            PresetKind::TaylorGreen => "taylor-green",
            PresetKind::RandomSmooth => "random-smooth",
            PresetKind::File => "file",
        }
    }
}

/// Initial-condition description; unused fields keep their defaults so a
/// dumped config reparses to the same value.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSpec<T> {
    pub preset: PresetKind,
    pub seed: u64,
    pub velocity_amplitude: T,
    pub theta_base: T,
    pub theta_amplitude: T,
    pub director_base: [T; 3],
    pub director_amplitude: T,
    /// Exponential decay rate of the random velocity spectrum in `|κ|`.
    pub spectral_decay: T,
    /// Populate only the first `velocity_modes` random coefficients
    /// (0 = all of them). Refinement studies fix this so every truncation
    /// level starts from the same velocity field.
    pub velocity_modes: usize,
    /// Per-axis wavenumber cutoff of the random ϑ and d perturbations.
    pub perturbation_modes: usize,
    /// Number of axes the ϑ and d perturbations vary along (1 ≤ n ≤ dim).
    /// One-dimensional perturbations give refinement studies data with
    /// cleanly separated harmonic ladders.
    pub perturbation_axes: usize,
    /// Snapshot path for `preset = file`.
    pub file: Option<PathBuf>,
}

impl<T: Scalar> Default for InitialSpec<T> {
    fn default() -> Self {
        Self {
            preset: PresetKind::Rest,
            seed: 42,
            velocity_amplitude: lit(0.1),
            theta_base: T::one(),
            theta_amplitude: lit(0.1),
            director_base: [T::one(), T::zero(), T::zero()],
            director_amplitude: lit(0.2),
            spectral_decay: lit(0.7),
            velocity_modes: 0,
            perturbation_modes: 3,
            perturbation_axes: MAX_DIM,
            file: None,
        }
    }
}

/// Everything a run needs, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig<T: Scalar> {
    pub domain: DomainSpec<T>,
    pub laws: MaterialLaws<T>,
    pub galerkin: GalerkinConfig<T>,
    pub initial: InitialSpec<T>,
    pub output_dir: PathBuf,
    pub snapshot_stride: usize,
    pub audit_nu: Vec<T>,
    pub audit_q: Vec<T>,
    pub audit_p: Vec<T>,
}

impl<T: Scalar> RunConfig<T> {
    /// All (ν, q, p) exponent tuples, one norm report per tuple.
    pub fn exponent_tuples(&self) -> Result<Vec<NormExponents<T>>> {
        let mut out = Vec::new();
        for &nu in &self.audit_nu {
            for &q in &self.audit_q {
                for &p in &self.audit_p {
                    out.push(NormExponents::new(nu, q, p)?);
                }
            }
        }
        Ok(out)
    }
}

/// One raw `key = value` entry with its provenance.
#[derive(Debug, Clone)]
struct RawEntry {
    section: String,
    key: String,
    value: String,
    line: usize,
}

/// First parsing stage: sections and key-value pairs, comments stripped.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: Vec<RawEntry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut section = String::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return Err(Error::Config {
                        line: Some(line_no),
                        message: format!("malformed section header {line:?}"),
                    });
                };
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config {
                    line: Some(line_no),
                    message: format!("expected `key = value`, got {line:?}"),
                });
            };
            if section.is_empty() {
                return Err(Error::Config {
                    line: Some(line_no),
                    message: "key outside any [section]".into(),
                });
            }
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries
                .iter()
                .any(|e: &RawEntry| e.section == section && e.key == key)
            {
                return Err(Error::Config {
                    line: Some(line_no),
                    message: format!("duplicate key {section}.{key}"),
                });
            }
            entries.push(RawEntry { section: section.clone(), key, value, line: line_no });
        }
        Ok(Self { entries })
    }

    /// Apply a `section.key=value` override (replaces or appends).
    pub fn set_override(&mut self, assignment: &str) -> Result<()> {
        let Some((path, value)) = assignment.split_once('=') else {
            return Err(Error::Usage(format!("--set expects section.key=value, got {assignment:?}")));
        };
        let Some((section, key)) = path.trim().split_once('.') else {
            return Err(Error::Usage(format!("--set expects section.key=value, got {assignment:?}")));
        };
        let section = section.trim();
        let key = key.trim();
        let value = value.trim().to_string();
        for e in &mut self.entries {
            if e.section == section && e.key == key {
                e.value = value;
                return Ok(());
            }
        }
        self.entries.push(RawEntry {
            section: section.to_string(),
            key: key.to_string(),
            value,
            line: 0,
        });
        Ok(())
    }

    fn get(&self, section: &str, key: &str) -> Option<&RawEntry> {
        self.entries.iter().find(|e| e.section == section && e.key == key)
    }
}

struct Reader<'a> {
    raw: &'a RawConfig,
    consumed: BTreeSet<(String, String)>,
}

impl<'a> Reader<'a> {
    fn new(raw: &'a RawConfig) -> Self {
        Self { raw, consumed: BTreeSet::new() }
    }

    fn optional(&mut self, section: &str, key: &str) -> Option<&'a RawEntry> {
        self.consumed.insert((section.to_string(), key.to_string()));
        self.raw.get(section, key)
    }

    fn required(&mut self, section: &str, key: &str) -> Result<&'a RawEntry> {
        self.optional(section, key).ok_or_else(|| Error::Config {
            line: None,
            message: format!("missing required key {section}.{key}"),
        })
    }

    fn finish(self) -> Result<()> {
        for e in &self.raw.entries {
            if !self.consumed.contains(&(e.section.clone(), e.key.clone())) {
                return Err(Error::Config {
                    line: Some(e.line),
                    message: format!("unknown key {}.{}", e.section, e.key),
                });
            }
        }
        Ok(())
    }
}

fn parse_value<F: std::str::FromStr>(entry: &RawEntry, what: &str) -> Result<F> {
    entry.value.parse().map_err(|_| Error::Config {
        line: Some(entry.line),
        message: format!("{}.{}: expected {what}, got {:?}", entry.section, entry.key, entry.value),
    })
}

fn parse_scalar<T: Scalar>(entry: &RawEntry) -> Result<T> {
    let v: f64 = parse_value(entry, "a number")?;
    Ok(lit(v))
}

fn parse_scalar_list<T: Scalar>(entry: &RawEntry) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for tok in entry.value.split_whitespace() {
        let v: f64 = tok.parse().map_err(|_| Error::Config {
            line: Some(entry.line),
            message: format!("{}.{}: bad number {tok:?}", entry.section, entry.key),
        })?;
        out.push(lit(v));
    }
    if out.is_empty() {
        return Err(Error::Config {
            line: Some(entry.line),
            message: format!("{}.{}: empty list", entry.section, entry.key),
        });
    }
    Ok(out)
}

fn parse_usize_list(entry: &RawEntry) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for tok in entry.value.split_whitespace() {
        let v: usize = tok.parse().map_err(|_| Error::Config {
            line: Some(entry.line),
            message: format!("{}.{}: bad integer {tok:?}", entry.section, entry.key),
        })?;
        out.push(v);
    }
    Ok(out)
}

fn at_line<E>(entry: &RawEntry) -> impl FnOnce(E) -> Error + '_
where
    E: std::fmt::Display,
{
    move |e| Error::Config {
        line: Some(entry.line),
        message: format!("{}.{}: {e}", entry.section, entry.key),
    }
}

/// Parse and fully validate a run configuration.
///
/// `base_dir` anchors relative file references (tables, snapshots); every
/// referenced file must exist. Material parameters are swept through the
/// hypothesis validator before the config is accepted.
pub fn parse_config<T: Scalar>(text: &str, base_dir: &Path) -> Result<RunConfig<T>> {
    let raw = RawConfig::parse(text)?;
    resolve_config(&raw, base_dir)
}

/// Semantic pass over a raw config (used directly when `--set` overrides
/// have been applied).
pub fn resolve_config<T: Scalar>(raw: &RawConfig, base_dir: &Path) -> Result<RunConfig<T>> {
    let mut r = Reader::new(raw);

    // [domain]
    let dim: usize = parse_value(r.required("domain", "dim")?, "2 or 3")?;
    let lengths: Vec<T> = parse_scalar_list(r.required("domain", "lengths")?)?;
    let resolution = parse_usize_list(r.required("domain", "resolution")?)?;
    let mode_entry = r.optional("domain", "mode");
    let mode = match mode_entry.map(|e| (e.value.as_str(), e)) {
        None | Some(("periodic", _)) => DomainMode::Periodic,
        Some(("slip-channel", _)) => {
            let wall: usize = parse_value(r.required("domain", "wall_axis")?, "an axis index")?;
            DomainMode::SlipChannel { wall_axis: wall }
        }
        Some((other, e)) => {
            return Err(Error::Config {
                line: Some(e.line),
                message: format!("domain.mode: expected periodic or slip-channel, got {other:?}"),
            });
        }
    };
    if mode == DomainMode::Periodic {
        // Consume the key so a stray wall_axis under periodic mode errors.
        if let Some(e) = r.optional("domain", "wall_axis") {
            return Err(Error::Config {
                line: Some(e.line),
                message: "domain.wall_axis is only meaningful for slip-channel mode".into(),
            });
        }
    }
    let domain = DomainSpec::new(dim, &lengths, &resolution, mode)
        .map_err(|e| Error::Config { line: None, message: format!("[domain]: {e}") })?;

    // [material]
    let mut laws = {
        let mut get = |key: &str, default: f64| -> Result<T> {
            match r.optional("material", key) {
                Some(e) => parse_scalar(e),
                None => Ok(lit(default)),
            }
        };
        let consts = crate::material::HypothesisConstants {
            mu_lo: get("mu_lo", 0.5)?,
            mu_hi: get("mu_hi", 1.0)?,
            kappa_lo: get("kappa_lo", 0.5)?,
            kappa_hi: get("kappa_hi", 1.0)?,
            lambda_hi: get("lambda_hi", 1.0)?,
            d0: get("d0", 1.0)?,
            theta_floor: get("theta_floor", 1e-8)?,
        };
        MaterialLaws::with_defaults(consts)
            .map_err(|e| Error::Config { line: None, message: format!("[material]: {e}") })?
    };
    if let Some(e) = r.optional("material", "kappa") {
        laws.kappa_law = ScalarLaw::Constant(parse_scalar(e)?);
    }
    if let Some(e) = r.optional("material", "kappa_aniso") {
        laws.kappa_aniso_law = ScalarLaw::Constant(parse_scalar(e)?);
    }
    let table_law = |r: &mut Reader, key: &str| -> Result<Option<ScalarLaw<T>>> {
        let Some(e) = r.optional("material", key) else { return Ok(None) };
        let path = base_dir.join(&e.value);
        let text = std::fs::read_to_string(&path).map_err(|io| Error::Config {
            line: Some(e.line),
            message: format!("cannot read table {}: {io}", path.display()),
        })?;
        Ok(Some(ScalarLaw::Tabulated(MonotoneTable::parse(&text).map_err(at_line(e))?)))
    };
    if let Some(law) = table_law(&mut r, "viscosity_table")? {
        laws.viscosity_law = law;
    }
    if let Some(law) = table_law(&mut r, "dilatation_table")? {
        laws.dilatation_law = law;
    }
    if let Some(law) = table_law(&mut r, "kappa_table")? {
        laws.kappa_law = law;
    }
    if let Some(law) = table_law(&mut r, "kappa_aniso_table")? {
        laws.kappa_aniso_law = law;
    }
    // Hypothesis validation gates the whole config.
    let (theta_grid, d_samples) = default_validation_samples::<T>(17);
    let report = laws.validate_hypotheses(&theta_grid, &d_samples)?;
    if !report.all_passed() {
        let mut msg = String::from("material laws fail the hypothesis validator:\n");
        msg.push_str(&report.summary());
        return Err(Error::Hypothesis(msg));
    }

    // [galerkin]
    let n_modes: usize = parse_value(r.required("galerkin", "n_modes")?, "a mode count")?;
    let m_modes: usize = match r.optional("galerkin", "m_modes") {
        Some(e) => parse_value(e, "a mode count")?,
        None => n_modes,
    };
    let levels = TruncationLevels::new(n_modes, m_modes)
        .map_err(|e| Error::Config { line: None, message: format!("[galerkin]: {e}") })?;
    let dt_entry = r.required("galerkin", "dt")?;
    let dt: T = parse_scalar(dt_entry)?;
    if !(dt > T::zero()) {
        return Err(Error::Config {
            line: Some(dt_entry.line),
            message: "galerkin.dt must be positive".into(),
        });
    }
    let t_end_entry = r.required("galerkin", "t_end")?;
    let t_end: T = parse_scalar(t_end_entry)?;
    let mut galerkin = GalerkinConfig::new(levels, dt, t_end).map_err(|e| Error::Config {
        line: Some(t_end_entry.line),
        message: format!("[galerkin]: {e}"),
    })?;
    if let Some(e) = r.optional("galerkin", "cfl_safety") {
        galerkin.cfl_safety = parse_scalar(e)?;
    }
    if let Some(e) = r.optional("galerkin", "max_dt_halvings") {
        galerkin.max_dt_halvings = parse_value(e, "a count")?;
    }
    if let Some(e) = r.optional("galerkin", "implicit_diffusion") {
        galerkin.theta_scheme.implicit_diffusion = parse_value(e, "true or false")?;
    }
    if let Some(e) = r.optional("galerkin", "explicit_source") {
        galerkin.theta_scheme.explicit_source = parse_value(e, "true or false")?;
    }
    galerkin
        .validate()
        .map_err(|e| Error::Config { line: None, message: format!("[galerkin]: {e}") })?;

    // [initial]
    let mut initial = InitialSpec::<T>::default();
    if let Some(e) = r.optional("initial", "preset") {
        initial.preset = match e.value.as_str() {
            "rest" => PresetKind::Rest,
            "taylor-green" => PresetKind::TaylorGreen,
            "random-smooth" => PresetKind::RandomSmooth,
            "file" => PresetKind::File,
            other => {
                return Err(Error::Config {
                    line: Some(e.line),
                    message: format!("unknown preset {other:?}"),
                });
            }
        };
    }
    if let Some(e) = r.optional("initial", "seed") {
        initial.seed = parse_value(e, "an unsigned integer")?;
    }
    if let Some(e) = r.optional("initial", "velocity_amplitude") {
        initial.velocity_amplitude = parse_scalar(e)?;
    }
    if let Some(e) = r.optional("initial", "theta_base") {
        initial.theta_base = parse_scalar(e)?;
    }
    if let Some(e) = r.optional("initial", "theta_amplitude") {
        initial.theta_amplitude = parse_scalar(e)?;
    }
    if let Some(e) = r.optional("initial", "director_base") {
        let list: Vec<T> = parse_scalar_list(e)?;
        if list.len() != 3 {
            return Err(Error::Config {
                line: Some(e.line),
                message: "initial.director_base needs exactly three components".into(),
            });
        }
        initial.director_base = [list[0], list[1], list[2]];
    }
    if let Some(e) = r.optional("initial", "director_amplitude") {
        initial.director_amplitude = parse_scalar(e)?;
    }
    if let Some(e) = r.optional("initial", "spectral_decay") {
        initial.spectral_decay = parse_scalar(e)?;
    }
    if let Some(e) = r.optional("initial", "velocity_modes") {
        initial.velocity_modes = parse_value(e, "a mode count")?;
    }
    if let Some(e) = r.optional("initial", "perturbation_modes") {
        initial.perturbation_modes = parse_value(e, "a wavenumber cutoff")?;
        if initial.perturbation_modes == 0 {
            return Err(Error::Config {
                line: Some(e.line),
                message: "initial.perturbation_modes must be at least 1".into(),
            });
        }
    }
    if let Some(e) = r.optional("initial", "perturbation_axes") {
        initial.perturbation_axes = parse_value(e, "an axis count")?;
        if initial.perturbation_axes == 0 || initial.perturbation_axes > dim {
            return Err(Error::Config {
                line: Some(e.line),
                message: format!("initial.perturbation_axes must lie in 1..={dim}"),
            });
        }
    }
    if let Some(e) = r.optional("initial", "file") {
        let path = base_dir.join(&e.value);
        if !path.exists() {
            return Err(Error::Config {
                line: Some(e.line),
                message: format!("snapshot {} does not exist", path.display()),
            });
        }
        initial.file = Some(path);
    }
    // Perturbations cannot vary along more axes than the domain has.
    initial.perturbation_axes = initial.perturbation_axes.min(dim);
    if initial.preset == PresetKind::File && initial.file.is_none() {
        return Err(Error::Config {
            line: None,
            message: "initial.preset = file requires initial.file".into(),
        });
    }
    if !(initial.theta_base > T::zero()) {
        return Err(Error::Config {
            line: None,
            message: "initial.theta_base must be positive".into(),
        });
    }

    // [output]
    let output_dir = match r.optional("output", "dir") {
        Some(e) => PathBuf::from(&e.value),
        None => PathBuf::from("out"),
    };
    let snapshot_stride = match r.optional("output", "snapshot_stride") {
        Some(e) => parse_value(e, "a stride")?,
        None => 100,
    };

    // [audit]
    let audit_nu = match r.optional("audit", "nu") {
        Some(e) => parse_scalar_list(e)?,
        None => vec![lit(0.25)],
    };
    let audit_q = match r.optional("audit", "q") {
        Some(e) => parse_scalar_list(e)?,
        None => vec![lit(1.5)],
    };
    let audit_p = match r.optional("audit", "p") {
        Some(e) => parse_scalar_list(e)?,
        None => vec![lit(1.2)],
    };

    r.finish()?;

    let cfg = RunConfig {
        domain,
        laws,
        galerkin,
        initial,
        output_dir,
        snapshot_stride,
        audit_nu,
        audit_q,
        audit_p,
    };
    // Exponent tuples must validate now, not at audit time.
    cfg.exponent_tuples()?;
    Ok(cfg)
}

fn fmt_list<T: Scalar>(values: &[T]) -> String {
    values.iter().map(|v| format!("{v:?}", v = v.to_f64_lossy())).collect::<Vec<_>>().join(" ")
}

/// Serialize a config in canonical order; `parse(dump(cfg)) == cfg`.
pub fn dump_config<T: Scalar>(cfg: &RunConfig<T>) -> String {
    let mut out = String::new();
    let d = &cfg.domain;
    out.push_str("[domain]\n");
    out.push_str(&format!("dim = {}\n", d.dim));
    out.push_str(&format!("lengths = {}\n", fmt_list(&d.lengths[..d.dim])));
    out.push_str(&format!(
        "resolution = {}\n",
        d.resolution[..d.dim].iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
    ));
    match d.mode {
        DomainMode::Periodic => out.push_str("mode = periodic\n"),
        DomainMode::SlipChannel { wall_axis } => {
            out.push_str("mode = slip-channel\n");
            out.push_str(&format!("wall_axis = {wall_axis}\n"));
        }
    }

    out.push_str("\n[material]\n");
    let c = &cfg.laws.consts;
    for (key, v) in [
        ("mu_lo", c.mu_lo),
        ("mu_hi", c.mu_hi),
        ("kappa_lo", c.kappa_lo),
        ("kappa_hi", c.kappa_hi),
        ("lambda_hi", c.lambda_hi),
        ("d0", c.d0),
        ("theta_floor", c.theta_floor),
    ] {
        out.push_str(&format!("{key} = {:?}\n", v.to_f64_lossy()));
    }
    if let ScalarLaw::Constant(v) = cfg.laws.kappa_law {
        out.push_str(&format!("kappa = {:?}\n", v.to_f64_lossy()));
    }
    if let ScalarLaw::Constant(v) = cfg.laws.kappa_aniso_law {
        out.push_str(&format!("kappa_aniso = {:?}\n", v.to_f64_lossy()));
    }

    out.push_str("\n[galerkin]\n");
    let g = &cfg.galerkin;
    out.push_str(&format!("n_modes = {}\n", g.levels.n_modes));
    out.push_str(&format!("m_modes = {}\n", g.levels.m_modes));
    out.push_str(&format!("dt = {:?}\n", g.dt.to_f64_lossy()));
    out.push_str(&format!("t_end = {:?}\n", g.t_end.to_f64_lossy()));
    out.push_str(&format!("cfl_safety = {:?}\n", g.cfl_safety.to_f64_lossy()));
    out.push_str(&format!("max_dt_halvings = {}\n", g.max_dt_halvings));
    out.push_str(&format!("implicit_diffusion = {}\n", g.theta_scheme.implicit_diffusion));
    out.push_str(&format!("explicit_source = {}\n", g.theta_scheme.explicit_source));

    out.push_str("\n[initial]\n");
    let i = &cfg.initial;
    out.push_str(&format!("preset = {}\n", i.preset.name()));
    out.push_str(&format!("seed = {}\n", i.seed));
    out.push_str(&format!("velocity_amplitude = {:?}\n", i.velocity_amplitude.to_f64_lossy()));
    out.push_str(&format!("theta_base = {:?}\n", i.theta_base.to_f64_lossy()));
    out.push_str(&format!("theta_amplitude = {:?}\n", i.theta_amplitude.to_f64_lossy()));
    out.push_str(&format!("director_base = {}\n", fmt_list(&i.director_base)));
    out.push_str(&format!("director_amplitude = {:?}\n", i.director_amplitude.to_f64_lossy()));
    out.push_str(&format!("spectral_decay = {:?}\n", i.spectral_decay.to_f64_lossy()));
    out.push_str(&format!("velocity_modes = {}\n", i.velocity_modes));
    out.push_str(&format!("perturbation_modes = {}\n", i.perturbation_modes));
    out.push_str(&format!(
        "perturbation_axes = {}\n",
        i.perturbation_axes.min(cfg.domain.dim)
    ));
    if let Some(f) = &i.file {
        out.push_str(&format!("file = {}\n", f.display()));
    }

    out.push_str("\n[output]\n");
    out.push_str(&format!("dir = {}\n", cfg.output_dir.display()));
    out.push_str(&format!("snapshot_stride = {}\n", cfg.snapshot_stride));

    out.push_str("\n[audit]\n");
    out.push_str(&format!("nu = {}\n", fmt_list(&cfg.audit_nu)));
    out.push_str(&format!("q = {}\n", fmt_list(&cfg.audit_q)));
    out.push_str(&format!("p = {}\n", fmt_list(&cfg.audit_p)));
    out
}
