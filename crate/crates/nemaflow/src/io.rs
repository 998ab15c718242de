//! File formats: flat binary snapshots, CSV exports, and PGM heatmaps.
//!
//! Snapshot layout: a 64-byte header (magic `NEMAFLOW`, format version,
//! dim, per-axis resolution, component count, time as an 8-byte float,
//! zero padding) followed by little-endian 8-byte floats in x-fastest
//! order, one block per component in the order u, d, ϑ, p. Values are
//! stored as `f64` regardless of the solver scalar.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::audit::{EnergyLedger, NormReport};
use crate::error::{Error, Result};
use crate::fields::FieldState;
use crate::grid::{DomainMode, DomainSpec, ScalarField, VectorField, DIRECTOR_COMPS, MAX_DIM};
use crate::scalar::{lit, Scalar};
use crate::solenoidal::SolenoidalBasis;
use crate::stepper::StepReport;

const MAGIC: &[u8; 8] = b"NEMAFLOW";
const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

/// Write a state snapshot in the flat binary format.
pub fn write_snapshot<T: Scalar>(
    path: &Path,
    spec: &DomainSpec<T>,
    state: &FieldState<T>,
) -> Result<()> {
    state.check_shape(spec)?;
    let mut header = [0u8; HEADER_LEN];
    header[0..8].copy_from_slice(MAGIC);
    header[8..12].copy_from_slice(&VERSION.to_le_bytes());
    header[12..16].copy_from_slice(&(spec.dim as u32).to_le_bytes());
    for a in 0..MAX_DIM {
        let r = if a < spec.dim { spec.resolution[a] as u32 } else { 1 };
        header[16 + 4 * a..20 + 4 * a].copy_from_slice(&r.to_le_bytes());
    }
    let ncomp = (spec.dim + DIRECTOR_COMPS + 2) as u32;
    header[28..32].copy_from_slice(&ncomp.to_le_bytes());
    header[32..40].copy_from_slice(&state.time.to_f64_lossy().to_le_bytes());

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&header)?;
    let mut write_field = |f: &ScalarField<T>| -> Result<()> {
        for &v in &f.data {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
        Ok(())
    };
    for c in &state.u.comps {
        write_field(c)?;
    }
    for c in &state.d.comps {
        write_field(c)?;
    }
    write_field(&state.theta)?;
    write_field(&state.p)?;
    Ok(())
}

/// Grid metadata recovered from a snapshot header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub resolution: [usize; MAX_DIM],
}

/// Read a snapshot; the returned state has no modal coefficients (project
/// onto a basis before stepping).
pub fn read_snapshot<T: Scalar>(path: &Path) -> Result<(SnapshotHeader, FieldState<T>)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN || &bytes[0..8] != MAGIC {
        return Err(Error::Shape(format!("{} is not a nemaflow snapshot", path.display())));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Shape(format!("unsupported snapshot version {version}")));
    }
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let mut resolution = [1usize; MAX_DIM];
    for (a, r) in resolution.iter_mut().enumerate() {
        *r = u32::from_le_bytes(bytes[16 + 4 * a..20 + 4 * a].try_into().unwrap()) as usize;
    }
    let ncomp = u32::from_le_bytes(bytes[28..32].try_into().unwrap()) as usize;
    let time = f64::from_le_bytes(bytes[32..40].try_into().unwrap());
    if !(2..=MAX_DIM).contains(&dim) || ncomp != dim + DIRECTOR_COMPS + 2 {
        return Err(Error::Shape("snapshot header is inconsistent".into()));
    }
    let npts: usize = resolution.iter().product();
    let expected = HEADER_LEN + 8 * npts * ncomp;
    if bytes.len() != expected {
        return Err(Error::Shape(format!(
            "snapshot length {} does not match header ({expected} expected)",
            bytes.len()
        )));
    }

    let mut offset = HEADER_LEN;
    let mut read_field = || -> ScalarField<T> {
        let mut data = Vec::with_capacity(npts);
        for _ in 0..npts {
            let v = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
            data.push(lit(v));
            offset += 8;
        }
        ScalarField { data }
    };
    let u = VectorField { comps: (0..dim).map(|_| read_field()).collect() };
    let d = VectorField { comps: (0..DIRECTOR_COMPS).map(|_| read_field()).collect() };
    let theta = read_field();
    let p = read_field();
    let header = SnapshotHeader { dim, resolution };
    let state = FieldState { u, u_modes: Vec::new(), d, theta, p, time: lit(time) };
    Ok((header, state))
}

/// Fixed ledger CSV column order.
pub const LEDGER_COLUMNS: &str = "time,kinetic,thermal,elastic,penalty,entropy,\
production_dir,production_visc,production_heat,min_theta,max_d_sq,energy_drift";

fn fmt_opt<T: Scalar>(v: Option<T>) -> String {
    match v {
        Some(x) => format!("{:?}", x.to_f64_lossy()),
        None => "nan".to_string(),
    }
}

/// Incremental CSV writer for the ledger stream.
pub struct LedgerWriter {
    w: BufWriter<File>,
}

impl LedgerWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{LEDGER_COLUMNS}")?;
        Ok(Self { w })
    }

    /// The initial row has no step report; its drift column is zero.
    pub fn write_row<T: Scalar>(
        &mut self,
        ledger: &EnergyLedger<T>,
        report: Option<&StepReport<T>>,
    ) -> Result<()> {
        let drift = report.map_or(0.0, |r| r.energy_drift.to_f64_lossy());
        writeln!(
            self.w,
            "{:?},{:?},{:?},{:?},{:?},{},{:?},{},{},{:?},{:?},{:?}",
            ledger.time.to_f64_lossy(),
            ledger.kinetic.to_f64_lossy(),
            ledger.thermal.to_f64_lossy(),
            ledger.elastic.to_f64_lossy(),
            ledger.penalty.to_f64_lossy(),
            fmt_opt(ledger.entropy),
            ledger.production_dir.to_f64_lossy(),
            fmt_opt(ledger.production_visc),
            fmt_opt(ledger.production_heat),
            ledger.min_theta.to_f64_lossy(),
            ledger.max_d_sq.to_f64_lossy(),
            drift,
        )?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

/// Write norm reports, one row per exponent tuple.
pub fn write_norms<T: Scalar>(path: &Path, reports: &[NormReport<T>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "nu,q,p")?;
    if let Some(first) = reports.first() {
        for (name, _) in first.entries() {
            write!(w, ",{name}")?;
        }
    }
    writeln!(w)?;
    for r in reports {
        write!(
            w,
            "{:?},{:?},{:?}",
            r.exponents.nu.to_f64_lossy(),
            r.exponents.q.to_f64_lossy(),
            r.exponents.p.to_f64_lossy()
        )?;
        for (_, v) in r.entries() {
            write!(w, ",{:?}", v.to_f64_lossy())?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text CSV export of a state for small grids: index, coordinates,
/// then one column per component.
pub fn write_state_csv<T: Scalar>(
    path: &Path,
    spec: &DomainSpec<T>,
    state: &FieldState<T>,
) -> Result<()> {
    state.check_shape(spec)?;
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "index")?;
    for a in 0..spec.dim {
        write!(w, ",x{a}")?;
    }
    for i in 0..spec.dim {
        write!(w, ",u{i}")?;
    }
    for k in 0..DIRECTOR_COMPS {
        write!(w, ",d{k}")?;
    }
    writeln!(w, ",theta,p")?;
    for flat in 0..spec.num_points() {
        let idx = spec.multi_index(flat);
        write!(w, "{flat}")?;
        for a in 0..spec.dim {
            write!(w, ",{:?}", spec.coord(a, idx[a]).to_f64_lossy())?;
        }
        for i in 0..spec.dim {
            write!(w, ",{:?}", state.u.comps[i].data[flat].to_f64_lossy())?;
        }
        for k in 0..DIRECTOR_COMPS {
            write!(w, ",{:?}", state.d.comps[k].data[flat].to_f64_lossy())?;
        }
        writeln!(
            w,
            ",{:?},{:?}",
            state.theta.data[flat].to_f64_lossy(),
            state.p.data[flat].to_f64_lossy()
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Basis summary CSV: index, integer wavevector, polarization.
pub fn write_mode_table<T: Scalar>(path: &Path, basis: &SolenoidalBasis<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "index,k0,k1,k2,pol0,pol1,pol2")?;
    for (i, k, pol) in basis.mode_table() {
        writeln!(w, "{i},{},{},{},{:?},{:?},{:?}", k[0], k[1], k[2], pol[0], pol[1], pol[2])?;
    }
    w.flush()?;
    Ok(())
}

/// Grayscale binary PGM of a 2-D slice with linear min-max normalization;
/// the actual range lands in a `.txt` sidecar. A constant field maps to
/// mid-gray with a note in the sidecar.
pub fn write_heatmap<T: Scalar>(
    path: &Path,
    width: usize,
    height: usize,
    values: &[T],
) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::Shape(format!(
            "heatmap needs {width}x{height} = {} values, got {}",
            width * height,
            values.len()
        )));
    }
    let lo = values.iter().fold(f64::INFINITY, |m, v| m.min(v.to_f64_lossy()));
    let hi = values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.to_f64_lossy()));
    let constant = !(hi > lo);
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{width} {height}\n255\n")?;
    let mut row = Vec::with_capacity(width);
    for y in 0..height {
        row.clear();
        for x in 0..width {
            let v = values[x + width * y].to_f64_lossy();
            let g = if constant { 128u8 } else { ((v - lo) / (hi - lo) * 255.0).round() as u8 };
            row.push(g);
        }
        w.write_all(&row)?;
    }
    w.flush()?;

    let sidecar = path.with_extension("txt");
    let mut s = BufWriter::new(File::create(&sidecar)?);
    writeln!(s, "min = {lo:?}")?;
    writeln!(s, "max = {hi:?}")?;
    if constant {
        writeln!(s, "note = constant field rendered as uniform mid-gray")?;
    }
    s.flush()?;
    Ok(())
}

/// The first 2-D slice of a field (all of it in 2-D, the z = 0 plane in 3-D).
pub fn first_slice<'f, T: Scalar>(
    spec: &DomainSpec<T>,
    f: &'f ScalarField<T>,
) -> (usize, usize, &'f [T]) {
    let nx = spec.resolution[0];
    let ny = spec.resolution[1];
    (nx, ny, &f.data[..nx * ny])
}

/// Append-only `key = value` summary writer.
pub struct SummaryWriter {
    w: BufWriter<File>,
}

impl SummaryWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self { w: BufWriter::new(File::create(path)?) })
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) -> Result<()> {
        writeln!(self.w, "{key} = {value}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

/// Human- and machine-readable domain label for summaries.
pub fn domain_label<T: Scalar>(spec: &DomainSpec<T>) -> String {
    let res: Vec<String> = spec.resolution[..spec.dim].iter().map(|r| r.to_string()).collect();
    let mode = match spec.mode {
        DomainMode::Periodic => "periodic".to_string(),
        DomainMode::SlipChannel { wall_axis } => format!("slip-channel(wall={wall_axis})"),
    };
    format!("{}d {} {}", spec.dim, res.join("x"), mode)
}
