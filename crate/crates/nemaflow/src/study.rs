//! Empirical two-level refinement study: end-state differences under
//! velocity-basis refinement (N) at fixed convective truncation, then
//! under convective refinement (M) at the finest N.
//!
//! The basis ordering is nested, so every N run approximates the same
//! limit problem; differences between consecutive end states quantify the
//! truncation error empirically. Cells whose member run aborted are
//! reported as such rather than failing the study.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fields::{grad_director, FieldState};
use crate::grid::DIRECTOR_COMPS;
use crate::initial::make_initial;
use crate::scalar::Scalar;
use crate::solenoidal::{build_basis, TruncationLevels};
use crate::spectral::Domain;
use crate::stepper::{run, NullSink};

/// One pairwise difference row of the study table.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub phase: &'static str,
    pub label: String,
    pub aborted: bool,
    /// `‖u_a - u_b‖_{L²}` of the end states.
    pub u_l2: f64,
    /// Discrete `W^{1,2}` distance of the directors.
    pub d_w12: f64,
    /// `‖ϑ_a - ϑ_b‖_{L¹}`.
    pub theta_l1: f64,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub n_rows: Vec<StudyRow>,
    pub m_rows: Vec<StudyRow>,
}

impl StudyReport {
    pub fn rows(&self) -> impl Iterator<Item = &StudyRow> {
        self.n_rows.iter().chain(self.m_rows.iter())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,pair,aborted,u_l2,d_w12,theta_l1\n");
        for r in self.rows() {
            out.push_str(&format!(
                "{},{},{},{:?},{:?},{:?}\n",
                r.phase, r.label, r.aborted, r.u_l2, r.d_w12, r.theta_l1
            ));
        }
        out
    }
}

fn end_state<T: Scalar>(
    domain: &Domain<T>,
    cfg: &RunConfig<T>,
    n_modes: usize,
    m_modes: usize,
) -> Result<Option<FieldState<T>>> {
    let basis = build_basis(domain, n_modes)?;
    let initial = make_initial(domain, &basis, &cfg.laws, &cfg.initial)?;
    let mut galerkin = cfg.galerkin;
    galerkin.levels = TruncationLevels::new(n_modes, m_modes)?;
    let out = run(domain, &basis, &galerkin, &cfg.laws, initial, &mut NullSink)?;
    Ok(if out.completed() { Some(out.final_state) } else { None })
}

fn difference_row<T: Scalar>(
    domain: &Domain<T>,
    phase: &'static str,
    label: String,
    a: &Option<FieldState<T>>,
    b: &Option<FieldState<T>>,
) -> Result<StudyRow> {
    let (Some(a), Some(b)) = (a, b) else {
        return Ok(StudyRow {
            phase,
            label,
            aborted: true,
            u_l2: f64::NAN,
            d_w12: f64::NAN,
            theta_l1: f64::NAN,
        });
    };
    let spec = domain.spec();
    let mut du = a.u.clone();
    du.add_scaled(&b.u, -T::one());
    let u_l2 = du.norm_l2(spec).to_f64_lossy();

    let mut dd = a.d.clone();
    dd.add_scaled(&b.d, -T::one());
    let grad = grad_director(domain, &dd)?;
    let mut w12_sq = T::zero();
    for k in 0..DIRECTOR_COMPS {
        w12_sq += dd.comps[k].inner(&dd.comps[k], spec);
    }
    for c in &grad.comps {
        w12_sq += c.inner(c, spec);
    }
    let d_w12 = w12_sq.max(T::zero()).sqrt().to_f64_lossy();

    let mut dt_field = a.theta.clone();
    dt_field.add_scaled(&b.theta, -T::one());
    let theta_l1 = dt_field.norm_lp(T::one(), spec).to_f64_lossy();

    Ok(StudyRow { phase, label, aborted: false, u_l2, d_w12, theta_l1 })
}

/// Run the two refinement sweeps of the study.
///
/// Phase one fixes `M = m_list[0]` and walks `n_list`; phase two fixes
/// `N = max(n_list)` and walks `m_list`. Lists must be ascending.
pub fn convergence_study<T: Scalar>(
    cfg: &RunConfig<T>,
    n_list: &[usize],
    m_list: &[usize],
) -> Result<StudyReport> {
    if n_list.is_empty() || m_list.is_empty() {
        return Err(Error::Usage("study needs nonempty N and M lists".into()));
    }
    if n_list.windows(2).any(|w| w[1] < w[0]) || m_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Usage("study lists must be sorted ascending".into()));
    }
    // The N sweep holds M at the largest level valid for every member,
    // which by nestedness is the smallest N.
    let m_fixed = n_list[0];
    let domain = Domain::new(cfg.domain);

    // Phase one: refine N at fixed M.
    let mut n_states = Vec::with_capacity(n_list.len());
    for &n in n_list {
        n_states.push(end_state(&domain, cfg, n, m_fixed)?);
    }
    let mut n_rows = Vec::new();
    for (i, pair) in n_states.windows(2).enumerate() {
        n_rows.push(difference_row(
            &domain,
            "n-refinement",
            format!("N={} vs N={} (M={m_fixed})", n_list[i], n_list[i + 1]),
            &pair[0],
            &pair[1],
        )?);
    }

    // Phase two: refine M at the finest N.
    let n_fixed = *n_list.last().unwrap();
    let mut m_states = Vec::with_capacity(m_list.len());
    for &m in m_list {
        if m > n_fixed {
            return Err(Error::Usage(format!("M = {m} exceeds N = {n_fixed}")));
        }
        m_states.push(end_state(&domain, cfg, n_fixed, m)?);
    }
    let mut m_rows = Vec::new();
    for (i, pair) in m_states.windows(2).enumerate() {
        m_rows.push(difference_row(
            &domain,
            "m-refinement",
            format!("M={} vs M={} (N={n_fixed})", m_list[i], m_list[i + 1]),
            &pair[0],
            &pair[1],
        )?);
    }

    Ok(StudyReport { n_rows, m_rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, PresetKind};
    use std::path::Path;

    fn study_config(t_end: f64) -> RunConfig<f64> {
        let text = format!(
            "
[domain]
dim = 2
lengths = 6.283185307179586 6.283185307179586
resolution = 24 24

[galerkin]
n_modes = 8
dt = 2e-3
t_end = {t_end}

[initial]
preset = random-smooth
seed = 11
velocity_amplitude = 0.15
theta_amplitude = 0.05
director_amplitude = 0.1
"
        );
        parse_config(&text, Path::new(".")).unwrap()
    }

    #[test]
    fn identical_levels_give_zero_difference() {
        let cfg = study_config(0.02);
        let report = convergence_study(&cfg, &[6, 6], &[4]).unwrap();
        assert_eq!(report.n_rows.len(), 1);
        let row = &report.n_rows[0];
        assert!(!row.aborted);
        assert!(row.u_l2 < 1e-13, "identical runs differ: {}", row.u_l2);
        assert!(row.d_w12 < 1e-12);
        assert!(row.theta_l1 < 1e-12);
    }

    #[test]
    fn refinement_differences_shrink() {
        let cfg = study_config(0.1);
        assert_eq!(cfg.initial.preset, PresetKind::RandomSmooth);
        let report = convergence_study(&cfg, &[4, 8, 16], &[4, 8]).unwrap();
        assert_eq!(report.n_rows.len(), 2);
        assert_eq!(report.m_rows.len(), 1);
        for r in report.rows() {
            assert!(!r.aborted);
        }
        let first = &report.n_rows[0];
        let last = &report.n_rows[1];
        assert!(
            last.u_l2 < first.u_l2,
            "u differences should shrink: {} -> {}",
            first.u_l2,
            last.u_l2
        );
        let csv = report.to_csv();
        assert!(csv.starts_with("phase,pair,aborted"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn unsorted_lists_are_rejected() {
        let cfg = study_config(0.01);
        assert!(convergence_study(&cfg, &[8, 4], &[4]).is_err());
        assert!(convergence_study(&cfg, &[4, 8], &[]).is_err());
        // M beyond the finest N is rejected.
        assert!(convergence_study(&cfg, &[4, 8], &[16]).is_err());
    }
}
