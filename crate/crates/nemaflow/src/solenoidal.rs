//! Divergence-free Galerkin machinery: the N-mode solenoidal basis, the
//! Leray projection, the M-mode truncation `[·]_M`, and the weak-form
//! pressure solve.
//!
//! On a periodic box the basis is analytic: real trigonometric modes
//! `√(2/V) trig(κ·x) e` with `κ·e = 0`, enumerated deterministically by
//! increasing `|κ|²` (cosines of a shell before its sines, lexicographic
//! wavevector tie-break, then polarization index). The ordering makes
//! truncation spans nested: `span(X_M) ⊂ span(X_N)` for `M ≤ N`.
//!
//! On a slip channel the same candidates, built on the doubled lattice, are
//! symmetrized into the velocity parity class and orthonormalized
//! numerically; modes annihilated by the symmetrization are skipped.

use crate::error::{Error, Result};
use crate::fields::{grad_director, stress_from_parts, FieldState};
use crate::grid::{DomainSpec, ScalarField, TensorField, VectorField, MAX_DIM};
#[cfg(test)]
use crate::grid::Parity;
use crate::material::MaterialLaws;
use crate::scalar::{lit, Scalar};
use crate::spectral::Domain;
use rustfft::num_complex::Complex;

/// Velocity mode count N and convective projection count M ≤ N.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationLevels {
    pub n_modes: usize,
    pub m_modes: usize,
}

impl TruncationLevels {
    pub fn new(n_modes: usize, m_modes: usize) -> Result<Self> {
        if m_modes < 1 || m_modes > n_modes {
            return Err(Error::Usage(format!(
                "need 1 <= M <= N, got M = {m_modes}, N = {n_modes}"
            )));
        }
        Ok(Self { n_modes, m_modes })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Cos,
    Sin,
}

/// One real trigonometric solenoidal mode `norm · trig(κ·x) · e`.
#[derive(Debug, Clone)]
pub struct TrigMode<T> {
    /// Integer wavevector on the (extended) lattice.
    pub k_int: [i64; MAX_DIM],
    /// Physical wavevector `2π k_a / L_a`.
    pub kappa: [T; MAX_DIM],
    /// Unit polarization, `κ·e = 0`.
    pub pol: [T; MAX_DIM],
    pub phase: Phase,
    /// Normalization making the mode unit in `L²(Ω)`.
    pub norm: T,
}

impl<T: Scalar> TrigMode<T> {
    fn eval_at(&self, x: &[T; MAX_DIM], dim: usize) -> [T; MAX_DIM] {
        let mut angle = T::zero();
        for a in 0..dim {
            angle += self.kappa[a] * x[a];
        }
        let t = match self.phase {
            Phase::Cos => angle.cos(),
            Phase::Sin => angle.sin(),
        };
        let mut v = [T::zero(); MAX_DIM];
        for (vi, &e) in v.iter_mut().zip(&self.pol) {
            *vi = self.norm * t * e;
        }
        v
    }
}

/// Per-axis tables of `cos/sin(2π m x_j / L_a)` for streaming evaluation.
struct TrigTables<T> {
    tables: Vec<Vec<Vec<(T, T)>>>, // [axis][m][grid index] -> (cos, sin)
}

impl<T: Scalar> TrigTables<T> {
    fn build(spec: &DomainSpec<T>, max_m: &[usize; MAX_DIM]) -> Self {
        let mut tables = Vec::with_capacity(spec.dim);
        for a in 0..spec.dim {
            let mut per_m = Vec::with_capacity(max_m[a] + 1);
            let two_pi_over_l = lit::<T>(2.0) * T::PI() / spec.lengths[a];
            for m in 0..=max_m[a] {
                let k = two_pi_over_l * T::from_usize_lossy(m);
                let row: Vec<(T, T)> = (0..spec.resolution[a])
                    .map(|j| {
                        let x = spec.coord(a, j);
                        ((k * x).cos(), (k * x).sin())
                    })
                    .collect();
                per_m.push(row);
            }
            tables.push(per_m);
        }
        Self { tables }
    }

    /// `(cos, sin)` of `Σ κ_a x_a` at the grid point with per-axis indices `idx`.
    #[inline]
    fn angle(&self, k_int: &[i64; MAX_DIM], idx: &[usize; MAX_DIM], dim: usize) -> (T, T) {
        let mut c = T::one();
        let mut s = T::zero();
        for a in 0..dim {
            let m = k_int[a];
            if m == 0 {
                continue;
            }
            let (ca, mut sa) = self.tables[a][m.unsigned_abs() as usize][idx[a]];
            if m < 0 {
                sa = -sa;
            }
            let nc = c * ca - s * sa;
            s = s * ca + c * sa;
            c = nc;
        }
        (c, s)
    }
}

enum Backend<T: Scalar> {
    Analytic { modes: Vec<TrigMode<T>>, tables: TrigTables<T> },
    Grid { origins: Vec<TrigMode<T>>, modes: Vec<VectorField<T>>, grads: Vec<TensorField<T>> },
}

/// Orthonormal solenoidal basis attached to a domain.
pub struct SolenoidalBasis<T: Scalar> {
    n_modes: usize,
    backend: Backend<T>,
}

/// Enumerate canonical candidate modes in the deterministic order, with
/// per-axis integer wavenumbers bounded by the dealias cap of `res`.
fn enumerate_candidates<T: Scalar>(
    dim: usize,
    lengths: &[T; MAX_DIM],
    res: &[usize; MAX_DIM],
    volume: T,
) -> Vec<TrigMode<T>> {
    let cap: Vec<i64> = (0..dim).map(|a| (res[a] / 3) as i64).collect();
    let mut ks: Vec<[i64; MAX_DIM]> = Vec::new();
    let zrange = if dim == 3 { -cap[2]..=cap[2] } else { 0..=0 };
    for kz in zrange {
        for ky in -cap[1]..=cap[1] {
            for kx in -cap[0]..=cap[0] {
                let k = [kx, ky, kz];
                if k == [0, 0, 0] {
                    continue;
                }
                // Canonical representative of the ±k pair: first nonzero
                // component positive.
                let first = k.iter().find(|&&v| v != 0).copied().unwrap();
                if first < 0 {
                    continue;
                }
                ks.push(k);
            }
        }
    }

    let norm = (lit::<T>(2.0) / volume).sqrt();
    let mut out = Vec::new();
    for k in ks {
        let mut kappa = [T::zero(); MAX_DIM];
        for a in 0..dim {
            kappa[a] = lit::<T>(2.0) * T::PI() * lit::<T>(k[a] as f64) / lengths[a];
        }
        let pols = polarizations(&kappa, dim);
        for phase in [Phase::Cos, Phase::Sin] {
            for pol in &pols {
                out.push(TrigMode { k_int: k, kappa, pol: *pol, phase, norm });
            }
        }
    }
    // Shell ordering: |κ|², then cos before sin, then lexicographic k;
    // polarization order within a wavevector is already stable.
    out.sort_by(|a, b| {
        let ka = kappa_sq(a);
        let kb = kappa_sq(b);
        ka.partial_cmp(&kb)
            .unwrap()
            .then_with(|| phase_rank(a.phase).cmp(&phase_rank(b.phase)))
            .then_with(|| a.k_int.cmp(&b.k_int))
    });
    out
}

fn kappa_sq<T: Scalar>(m: &TrigMode<T>) -> f64 {
    m.kappa.iter().map(|&k| (k * k).to_f64_lossy()).sum()
}

fn phase_rank(p: Phase) -> u8 {
    match p {
        Phase::Cos => 0,
        Phase::Sin => 1,
    }
}

/// Deterministic orthonormal polarization set perpendicular to `κ`.
fn polarizations<T: Scalar>(kappa: &[T; MAX_DIM], dim: usize) -> Vec<[T; MAX_DIM]> {
    let mag = kappa.iter().fold(T::zero(), |s, &k| s + k * k).sqrt();
    if dim == 2 {
        vec![[-kappa[1] / mag, kappa[0] / mag, T::zero()]]
    } else {
        // Reference axis least aligned with κ, ties to the lowest index.
        let mut best = 0;
        for a in 1..3 {
            if kappa[a].abs() < kappa[best].abs() {
                best = a;
            }
        }
        let mut axis = [T::zero(); MAX_DIM];
        axis[best] = T::one();
        let e1 = normalize(cross(kappa, &axis));
        let e2 = normalize(cross(kappa, &e1));
        vec![e1, e2]
    }
}

fn cross<T: Scalar>(a: &[T; MAX_DIM], b: &[T; MAX_DIM]) -> [T; MAX_DIM] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize<T: Scalar>(v: [T; MAX_DIM]) -> [T; MAX_DIM] {
    let mag = v.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
    [v[0] / mag, v[1] / mag, v[2] / mag]
}

/// Construct the first `n_modes` solenoidal basis fields for the domain.
pub fn build_basis<T: Scalar>(domain: &Domain<T>, n_modes: usize) -> Result<SolenoidalBasis<T>> {
    if n_modes == 0 {
        return Err(Error::Usage("basis needs at least one mode".into()));
    }
    let spec = domain.spec();
    match spec.wall_axis() {
        None => {
            let candidates =
                enumerate_candidates(spec.dim, &spec.lengths, &spec.resolution, spec.volume());
            if n_modes > candidates.len() {
                return Err(Error::Capacity { requested: n_modes, maximum: candidates.len() });
            }
            let modes: Vec<TrigMode<T>> = candidates.into_iter().take(n_modes).collect();
            let mut max_m = [0usize; MAX_DIM];
            for m in &modes {
                for a in 0..spec.dim {
                    max_m[a] = max_m[a].max(m.k_int[a].unsigned_abs() as usize);
                }
            }
            let tables = TrigTables::build(spec, &max_m);
            Ok(SolenoidalBasis { n_modes, backend: Backend::Analytic { modes, tables } })
        }
        Some(wall) => build_slip_basis(domain, n_modes, wall),
    }
}

fn build_slip_basis<T: Scalar>(
    domain: &Domain<T>,
    n_modes: usize,
    wall: usize,
) -> Result<SolenoidalBasis<T>> {
    let spec = domain.spec();
    let mut ext_lengths = spec.lengths;
    ext_lengths[wall] = ext_lengths[wall] * lit(2.0);
    let mut ext_res = spec.resolution;
    ext_res[wall] *= 2;
    let mut ext_volume = T::one();
    for a in 0..spec.dim {
        ext_volume = ext_volume * ext_lengths[a];
    }
    let candidates = enumerate_candidates(spec.dim, &ext_lengths, &ext_res, ext_volume);

    let mut origins = Vec::new();
    let mut modes: Vec<VectorField<T>> = Vec::new();
    let mut grads = Vec::new();
    for cand in candidates {
        if modes.len() == n_modes {
            break;
        }
        // Symmetrize into the velocity parity class by averaging the mode
        // with its mirror image, evaluated analytically.
        let mut field = VectorField::zeros(spec, spec.dim);
        let mut x = [T::zero(); MAX_DIM];
        for flat in 0..spec.num_points() {
            let idx = spec.multi_index(flat);
            for a in 0..spec.dim {
                x[a] = spec.coord(a, idx[a]);
            }
            let v = cand.eval_at(&x, spec.dim);
            let mut xm = x;
            xm[wall] = -x[wall];
            let vm = cand.eval_at(&xm, spec.dim);
            for i in 0..spec.dim {
                let sign = if i == wall { -T::one() } else { T::one() };
                field.comps[i].data[flat] = (v[i] + sign * vm[i]) / lit(2.0);
            }
        }
        // Orthogonalize against accepted modes (two passes).
        for _ in 0..2 {
            for prev in &modes {
                let c = field.inner(prev, spec);
                field.add_scaled(prev, -c);
            }
        }
        let norm = field.norm_l2(spec);
        if norm < lit(1e-8) {
            continue;
        }
        field.scale(T::one() / norm);
        let grad = domain.grad_vector(&field, &spec.velocity_parities())?;
        origins.push(cand);
        modes.push(field);
        grads.push(grad);
    }
    if modes.len() < n_modes {
        return Err(Error::Capacity { requested: n_modes, maximum: modes.len() });
    }
    Ok(SolenoidalBasis { n_modes, backend: Backend::Grid { origins, modes, grads } })
}

impl<T: Scalar> SolenoidalBasis<T> {
    pub fn len(&self) -> usize {
        self.n_modes
    }

    pub fn is_empty(&self) -> bool {
        self.n_modes == 0
    }

    /// One row per mode: index, integer wavevector, polarization.
    pub fn mode_table(&self) -> Vec<(usize, [i64; MAX_DIM], [f64; MAX_DIM])> {
        let describe = |m: &TrigMode<T>| {
            (m.k_int, [m.pol[0].to_f64_lossy(), m.pol[1].to_f64_lossy(), m.pol[2].to_f64_lossy()])
        };
        match &self.backend {
            Backend::Analytic { modes, .. } => modes
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let (k, p) = describe(m);
                    (i, k, p)
                })
                .collect(),
            Backend::Grid { origins, .. } => origins
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let (k, p) = describe(m);
                    (i, k, p)
                })
                .collect(),
        }
    }

    /// Grid values of mode `n`.
    pub fn mode_field(&self, domain: &Domain<T>, n: usize) -> Result<VectorField<T>> {
        self.check_index(n)?;
        let spec = domain.spec();
        match &self.backend {
            Backend::Analytic { .. } => {
                let mut out = VectorField::zeros(spec, spec.dim);
                let mut coeffs = vec![T::zero(); n + 1];
                coeffs[n] = T::one();
                self.accumulate(spec, &coeffs, &mut out);
                Ok(out)
            }
            Backend::Grid { modes, .. } => Ok(modes[n].clone()),
        }
    }

    /// Gradient tensor of mode `n`; entry `(i, j) = ∂_j v_i`.
    pub fn mode_grad(&self, domain: &Domain<T>, n: usize) -> Result<TensorField<T>> {
        self.check_index(n)?;
        let spec = domain.spec();
        match &self.backend {
            Backend::Analytic { modes, tables } => {
                let m = &modes[n];
                let mut out = TensorField::zeros(spec);
                for flat in 0..spec.num_points() {
                    let idx = spec.multi_index(flat);
                    let (c, s) = tables.angle(&m.k_int, &idx, spec.dim);
                    let dtrig = match m.phase {
                        Phase::Cos => -s,
                        Phase::Sin => c,
                    };
                    for i in 0..spec.dim {
                        for j in 0..spec.dim {
                            out.comp_mut(i, j).data[flat] = m.norm * m.pol[i] * m.kappa[j] * dtrig;
                        }
                    }
                }
                Ok(out)
            }
            Backend::Grid { grads, .. } => Ok(grads[n].clone()),
        }
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n >= self.n_modes {
            return Err(Error::Range(format!("mode {n} out of range (N = {})", self.n_modes)));
        }
        Ok(())
    }

    fn accumulate(&self, spec: &DomainSpec<T>, coeffs: &[T], out: &mut VectorField<T>) {
        match &self.backend {
            Backend::Analytic { modes, tables } => {
                for (m, &c) in modes.iter().zip(coeffs) {
                    if c == T::zero() {
                        continue;
                    }
                    let amp = c * m.norm;
                    for flat in 0..spec.num_points() {
                        let idx = spec.multi_index(flat);
                        let (cv, sv) = tables.angle(&m.k_int, &idx, spec.dim);
                        let t = match m.phase {
                            Phase::Cos => cv,
                            Phase::Sin => sv,
                        };
                        for i in 0..spec.dim {
                            out.comps[i].data[flat] += amp * m.pol[i] * t;
                        }
                    }
                }
            }
            Backend::Grid { modes, .. } => {
                for (m, &c) in modes.iter().zip(coeffs) {
                    if c != T::zero() {
                        out.add_scaled(m, c);
                    }
                }
            }
        }
    }

    /// `u = Σ c_n v_n` on the grid.
    pub fn reconstruct(&self, domain: &Domain<T>, coeffs: &[T]) -> Result<VectorField<T>> {
        if coeffs.len() > self.n_modes {
            return Err(Error::Range(format!(
                "{} coefficients for a basis of {} modes",
                coeffs.len(),
                self.n_modes
            )));
        }
        let spec = domain.spec();
        let mut out = VectorField::zeros(spec, spec.dim);
        self.accumulate(spec, coeffs, &mut out);
        Ok(out)
    }

    /// Coefficients `⟨v, v_n⟩` for `n < n_coeffs` by grid quadrature.
    pub fn project(&self, domain: &Domain<T>, v: &VectorField<T>, n_coeffs: usize) -> Result<Vec<T>> {
        if n_coeffs > self.n_modes {
            return Err(Error::Range(format!(
                "requested {n_coeffs} coefficients from a basis of {} modes",
                self.n_modes
            )));
        }
        let spec = domain.spec();
        v.check_shape(spec, spec.dim)?;
        let w = spec.cell_volume();
        let mut out = Vec::with_capacity(n_coeffs);
        match &self.backend {
            Backend::Analytic { modes, tables } => {
                for m in modes.iter().take(n_coeffs) {
                    let mut acc = T::zero();
                    for flat in 0..spec.num_points() {
                        let idx = spec.multi_index(flat);
                        let (cv, sv) = tables.angle(&m.k_int, &idx, spec.dim);
                        let t = match m.phase {
                            Phase::Cos => cv,
                            Phase::Sin => sv,
                        };
                        let mut dot = T::zero();
                        for i in 0..spec.dim {
                            dot += m.pol[i] * v.comps[i].data[flat];
                        }
                        acc += t * dot;
                    }
                    out.push(acc * m.norm * w);
                }
            }
            Backend::Grid { modes, .. } => {
                for m in modes.iter().take(n_coeffs) {
                    out.push(v.inner(m, spec));
                }
            }
        }
        Ok(out)
    }

    /// Quadratures `⟨G, ∇v_n⟩ = ∫ Σ_ij G_ij ∂_j v_i` for every mode.
    ///
    /// This is the Galerkin right-hand-side pairing; `G` is expected to be
    /// dealiased by the caller when it contains grid products.
    pub fn rhs_quadrature(&self, domain: &Domain<T>, g: &TensorField<T>) -> Result<Vec<T>> {
        let spec = domain.spec();
        let w = spec.cell_volume();
        let mut out = Vec::with_capacity(self.n_modes);
        match &self.backend {
            Backend::Analytic { modes, tables } => {
                for m in modes {
                    let mut acc = T::zero();
                    for flat in 0..spec.num_points() {
                        let idx = spec.multi_index(flat);
                        let (cv, sv) = tables.angle(&m.k_int, &idx, spec.dim);
                        let dtrig = match m.phase {
                            Phase::Cos => -sv,
                            Phase::Sin => cv,
                        };
                        let mut contraction = T::zero();
                        for i in 0..spec.dim {
                            for j in 0..spec.dim {
                                contraction += m.pol[i] * m.kappa[j] * g.comp(i, j).data[flat];
                            }
                        }
                        acc += dtrig * contraction;
                    }
                    out.push(acc * m.norm * w);
                }
            }
            Backend::Grid { grads, .. } => {
                for gr in grads {
                    let mut acc = T::zero();
                    for (a, b) in g.comps.iter().zip(&gr.comps) {
                        acc += a.inner(b, spec);
                    }
                    out.push(acc);
                }
            }
        }
        Ok(out)
    }

    /// `∫ |∇v_n|²`, the Stokes decay symbol of mode `n` (`|κ|²` for
    /// analytic modes).
    pub fn mode_k_squared(&self, domain: &Domain<T>, n: usize) -> Result<T> {
        self.check_index(n)?;
        match &self.backend {
            Backend::Analytic { modes, .. } => {
                let m = &modes[n];
                let mut s = T::zero();
                for a in 0..domain.dim() {
                    s += m.kappa[a] * m.kappa[a];
                }
                Ok(s)
            }
            Backend::Grid { grads, .. } => {
                let spec = domain.spec();
                let mut s = T::zero();
                for c in &grads[n].comps {
                    s += c.inner(c, spec);
                }
                Ok(s)
            }
        }
    }
}

/// Orthogonal projection onto divergence-free fields.
///
/// In modal space each wavevector loses its component along `κ`; the mean
/// flow (κ = 0), which is already solenoidal, passes through unchanged.
pub fn leray_project<T: Scalar>(domain: &Domain<T>, v: &VectorField<T>) -> Result<VectorField<T>> {
    let spec = domain.spec();
    v.check_shape(spec, spec.dim)?;
    let parities = spec.velocity_parities();
    let engine = domain.engine();
    let dim = spec.dim;
    let mut spectra: Vec<Vec<Complex<T>>> = Vec::with_capacity(dim);
    for i in 0..dim {
        spectra.push(engine.forward(&engine.extend(&v.comps[i].data, parities[i])));
    }
    let npts = engine.ext_points();
    for flat in 0..npts {
        let k = engine.k_vector(flat);
        let mut k2 = T::zero();
        for ka in k.iter().take(dim) {
            k2 += *ka * *ka;
        }
        if k2 == T::zero() {
            continue;
        }
        let mut dot = Complex::new(T::zero(), T::zero());
        for (a, spec_a) in spectra.iter().enumerate().take(dim) {
            dot += spec_a[flat] * k[a];
        }
        let scale = dot / k2;
        for (a, spec_a) in spectra.iter_mut().enumerate().take(dim) {
            spec_a[flat] = spec_a[flat] - scale * k[a];
        }
    }
    let comps = spectra
        .into_iter()
        .map(|s| ScalarField { data: engine.restrict(&engine.inverse(s)) })
        .collect();
    Ok(VectorField { comps })
}

/// Orthogonal projection `[v]_m` onto the span of the first `m` modes.
pub fn mode_truncate<T: Scalar>(
    domain: &Domain<T>,
    basis: &SolenoidalBasis<T>,
    v: &VectorField<T>,
    m: usize,
) -> Result<VectorField<T>> {
    if m > basis.len() {
        return Err(Error::Range(format!("truncation level {m} exceeds N = {}", basis.len())));
    }
    let coeffs = basis.project(domain, v, m)?;
    basis.reconstruct(domain, &coeffs)
}

/// Mean-zero pressure solving `Δp = div div (S - λ(ϑ) ∇d⊙∇d - u⊗[u]_M)`.
///
/// The Neumann compatibility at slip walls is automatic in the symmetry
/// class: the source tensor rows have vector parity, so their divergence
/// has vanishing normal component at the walls.
pub fn pressure_solve<T: Scalar>(
    domain: &Domain<T>,
    basis: &SolenoidalBasis<T>,
    state: &FieldState<T>,
    laws: &MaterialLaws<T>,
    levels: TruncationLevels,
) -> Result<ScalarField<T>> {
    let spec = domain.spec();
    state.check_shape(spec)?;
    let f = pressure_source_tensor(domain, basis, state, laws, levels)?;
    let wall = spec.wall_axis();
    let engine = domain.engine();
    let dim = spec.dim;
    let vel = spec.velocity_parities();
    let mut acc = vec![Complex::new(T::zero(), T::zero()); engine.ext_points()];
    for i in 0..dim {
        for j in 0..dim {
            let parity = vel[i].of_derivative(j, wall);
            let mut spec_ij = engine.forward(&engine.extend(&f.comp(i, j).data, parity));
            engine.dealias(&mut spec_ij);
            for (flat, c) in spec_ij.iter().enumerate() {
                let k = engine.k_vector(flat);
                acc[flat] += *c * (k[i] * k[j]);
            }
        }
    }
    for (flat, c) in acc.iter_mut().enumerate() {
        let k = engine.k_vector(flat);
        let mut k2 = T::zero();
        for ka in k.iter().take(dim) {
            k2 += *ka * *ka;
        }
        if k2 > T::zero() {
            *c = *c / k2;
        } else {
            *c = Complex::new(T::zero(), T::zero());
        }
    }
    Ok(ScalarField { data: engine.restrict(&engine.inverse(acc)) })
}

/// The tensor whose double divergence sources the pressure:
/// `S - λ(ϑ) ∇d⊙∇d - u ⊗ [u]_M` (no pressure term).
pub fn pressure_source_tensor<T: Scalar>(
    domain: &Domain<T>,
    basis: &SolenoidalBasis<T>,
    state: &FieldState<T>,
    laws: &MaterialLaws<T>,
    levels: TruncationLevels,
) -> Result<TensorField<T>> {
    let spec = domain.spec();
    let grad_u = domain.grad_vector(&state.u, &spec.velocity_parities())?;
    let grad_d = grad_director(domain, &state.d)?;
    let zero_p = ScalarField::zeros(spec);
    let mut f = stress_from_parts(spec, &grad_u, &grad_d, &state.theta, &zero_p, laws)?;
    let truncated = if state.u_modes.is_empty() {
        mode_truncate(domain, basis, &state.u, levels.m_modes.min(basis.len()))?
    } else {
        let m = levels.m_modes.min(state.u_modes.len());
        basis.reconstruct(domain, &state.u_modes[..m])?
    };
    for i in 0..spec.dim {
        for j in 0..spec.dim {
            let ui = &state.u.comps[i].data;
            let wj = &truncated.comps[j].data;
            let dst = &mut f.comps[i * spec.dim + j].data;
            for ((o, &a), &b) in dst.iter_mut().zip(ui).zip(wj) {
                *o -= a * b;
            }
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainMode;
    use crate::material::ScalarLaw;
    use crate::rng::SplitMix64;

    const TWO_PI: f64 = std::f64::consts::TAU;

    fn domain2d(n: usize) -> Domain<f64> {
        Domain::new(DomainSpec::periodic(2, &[TWO_PI, TWO_PI], &[n, n]).unwrap())
    }

    fn domain3d(n: usize) -> Domain<f64> {
        Domain::new(DomainSpec::periodic(3, &[TWO_PI, TWO_PI, TWO_PI], &[n, n, n]).unwrap())
    }

    fn random_resolved_velocity(dom: &Domain<f64>, seed: u64, modes: usize) -> VectorField<f64> {
        let basis = build_basis(dom, modes).unwrap();
        let mut rng = SplitMix64::new(seed);
        let coeffs: Vec<f64> = (0..modes).map(|_| rng.next_in(-1.0, 1.0)).collect();
        basis.reconstruct(dom, &coeffs).unwrap()
    }

    #[test]
    fn lowest_modes_match_lattice_enumeration() {
        let dom = domain2d(16);
        let basis = build_basis(&dom, 2).unwrap();
        let table = basis.mode_table();
        assert_eq!(table[0].1, [0, 1, 0]);
        assert_eq!(table[1].1, [1, 0, 0]);
        // Polarizations perpendicular to the wavevectors, up to sign.
        assert!((table[0].2[0].abs() - 1.0).abs() < 1e-14);
        assert!(table[0].2[1].abs() < 1e-14);
        assert!((table[1].2[1].abs() - 1.0).abs() < 1e-14);
        assert!(table[1].2[0].abs() < 1e-14);
    }

    #[test]
    fn modes_are_divergence_free() {
        let dom = domain2d(16);
        let basis = build_basis(&dom, 12).unwrap();
        for n in 0..basis.len() {
            let v = basis.mode_field(&dom, n).unwrap();
            let div = dom.div_vector(&v, &dom.spec().velocity_parities()).unwrap();
            assert!(div.norm_l2(dom.spec()) < 1e-13, "mode {n} has divergence");
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        let dom = domain2d(16);
        let basis = build_basis(&dom, 16).unwrap();
        let fields: Vec<_> = (0..16).map(|n| basis.mode_field(&dom, n).unwrap()).collect();
        for (i, a) in fields.iter().enumerate() {
            for (j, b) in fields.iter().enumerate() {
                let g = a.inner(b, dom.spec());
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-12, "gram[{i}][{j}] = {g}");
            }
        }
    }

    #[test]
    fn gram_matrix_is_identity_3d() {
        let dom = domain3d(8);
        let basis = build_basis(&dom, 10).unwrap();
        let fields: Vec<_> = (0..10).map(|n| basis.mode_field(&dom, n).unwrap()).collect();
        for (i, a) in fields.iter().enumerate() {
            for (j, b) in fields.iter().enumerate() {
                let g = a.inner(b, dom.spec());
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-12, "gram[{i}][{j}] = {g}");
            }
        }
        for n in 0..10 {
            let v = basis.mode_field(&dom, n).unwrap();
            let div = dom.div_vector(&v, &dom.spec().velocity_parities()).unwrap();
            assert!(div.norm_l2(dom.spec()) < 1e-12);
        }
    }

    #[test]
    fn capacity_error_reports_maximum() {
        let dom = domain2d(4);
        match build_basis(&dom, 1000) {
            Err(Error::Capacity { requested, maximum }) => {
                assert_eq!(requested, 1000);
                assert!(maximum < 1000 && maximum > 0);
            }
            other => panic!("expected capacity error, got {:?}", other.map(|b| b.len())),
        }
    }

    #[test]
    fn leray_annihilates_gradients() {
        let dom = domain2d(16);
        let f = ScalarField::from_fn(dom.spec(), |x| (2.0 * x[0]).sin() * x[1].cos());
        let g = dom.grad_scalar(&f, Parity::Even).unwrap();
        let proj = leray_project(&dom, &g).unwrap();
        let norm = proj.norm_l2(dom.spec());
        let scale = g.norm_l2(dom.spec());
        assert!(norm <= 1e-12 * scale, "gradient survived projection: {norm}");
    }

    #[test]
    fn leray_fixes_solenoidal_fields_and_is_idempotent() {
        let dom = domain2d(16);
        let v = random_resolved_velocity(&dom, 5, 12);
        let once = leray_project(&dom, &v).unwrap();
        let mut diff = once.clone();
        diff.add_scaled(&v, -1.0);
        assert!(diff.norm_l2(dom.spec()) <= 1e-12 * v.norm_l2(dom.spec()));
        let twice = leray_project(&dom, &once).unwrap();
        let mut diff2 = twice.clone();
        diff2.add_scaled(&once, -1.0);
        assert!(diff2.norm_l2(dom.spec()) <= 1e-13 * (1.0 + once.norm_l2(dom.spec())));
    }

    #[test]
    fn leray_mode_formula() {
        let dom = domain2d(16);
        let stays = VectorField {
            comps: vec![
                ScalarField::from_fn(dom.spec(), |x| x[1].sin()),
                ScalarField::zeros(dom.spec()),
            ],
        };
        let out = leray_project(&dom, &stays).unwrap();
        let mut diff = out.clone();
        diff.add_scaled(&stays, -1.0);
        assert!(diff.norm_l2(dom.spec()) < 1e-12);

        let dies = VectorField {
            comps: vec![
                ScalarField::from_fn(dom.spec(), |x| x[0].sin()),
                ScalarField::zeros(dom.spec()),
            ],
        };
        let out = leray_project(&dom, &dies).unwrap();
        assert!(out.norm_l2(dom.spec()) < 1e-12);
    }

    #[test]
    fn div_of_projection_vanishes() {
        let dom = domain2d(16);
        let mut rng = SplitMix64::new(9);
        let v = VectorField {
            comps: vec![
                ScalarField::from_fn(dom.spec(), |_| rng.next_in(-1.0, 1.0)),
                ScalarField::from_fn(dom.spec(), |_| rng.next_in(-1.0, 1.0)),
            ],
        };
        let proj = leray_project(&dom, &v).unwrap();
        let div = dom.div_vector(&proj, &dom.spec().velocity_parities()).unwrap();
        assert!(div.norm_l2(dom.spec()) <= 1e-12 * v.norm_l2(dom.spec()));
    }

    #[test]
    fn truncate_identity_orthogonality_pythagoras() {
        let dom = domain2d(16);
        let n = 12;
        let basis = build_basis(&dom, n).unwrap();
        // m = N is the identity on the span.
        let v = random_resolved_velocity(&dom, 21, n);
        let full = mode_truncate(&dom, &basis, &v, n).unwrap();
        let mut diff = full.clone();
        diff.add_scaled(&v, -1.0);
        assert!(diff.norm_l2(dom.spec()) < 1e-12);
        // A mode beyond the cut projects to zero.
        let hi = basis.mode_field(&dom, 7).unwrap();
        let cut = mode_truncate(&dom, &basis, &hi, 7).unwrap();
        assert!(cut.norm_l2(dom.spec()) < 1e-12);
        // Pythagoras for a field with content outside the span too.
        let mut rng = SplitMix64::new(2);
        let w = VectorField {
            comps: vec![
                ScalarField::from_fn(dom.spec(), |_| rng.next_in(-1.0, 1.0)),
                ScalarField::from_fn(dom.spec(), |_| rng.next_in(-1.0, 1.0)),
            ],
        };
        let m = 6;
        let wm = mode_truncate(&dom, &basis, &w, m).unwrap();
        let mut rest = w.clone();
        rest.add_scaled(&wm, -1.0);
        let lhs = wm.inner(&wm, dom.spec()) + rest.inner(&rest, dom.spec());
        let rhs = w.inner(&w, dom.spec());
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn truncation_is_self_adjoint() {
        let dom = domain2d(16);
        let basis = build_basis(&dom, 10).unwrap();
        let u = random_resolved_velocity(&dom, 31, 10);
        let v = random_resolved_velocity(&dom, 32, 10);
        let m = 5;
        let um = mode_truncate(&dom, &basis, &u, m).unwrap();
        let vm = mode_truncate(&dom, &basis, &v, m).unwrap();
        let a = um.inner(&v, dom.spec());
        let b = u.inner(&vm, dom.spec());
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        assert!(um.norm_l2(dom.spec()) <= u.norm_l2(dom.spec()) + 1e-13);
    }

    #[test]
    fn truncate_rejects_m_beyond_n() {
        let dom = domain2d(8);
        let basis = build_basis(&dom, 4).unwrap();
        let v = VectorField::zeros(dom.spec(), 2);
        assert!(matches!(mode_truncate(&dom, &basis, &v, 5), Err(Error::Range(_))));
    }

    #[test]
    fn pressure_of_rest_state_is_zero() {
        let dom = domain2d(16);
        let basis = build_basis(&dom, 4).unwrap();
        let laws = MaterialLaws::standard();
        let mut state = FieldState::rest(dom.spec(), 4);
        state.theta = ScalarField::constant(dom.spec(), 1.3);
        let p = pressure_solve(&dom, &basis, &state, &laws, TruncationLevels::new(4, 4).unwrap())
            .unwrap();
        assert!(p.norm_l2(dom.spec()) < 1e-13);
    }

    #[test]
    fn taylor_green_pressure_closed_form() {
        // u = A (sin x cos y, -cos x sin y) with λ = 0 and constant μ:
        // the convective source integrates to p = (A²/4)(cos 2x + cos 2y).
        let dom = domain2d(32);
        let spec = dom.spec();
        let n = 8;
        let basis = build_basis(&dom, n).unwrap();
        let mut laws = MaterialLaws::standard();
        laws.dilatation_law = ScalarLaw::Constant(0.0);
        laws.viscosity_law = ScalarLaw::Constant(0.8);
        let amp = 1.1;
        let mut state = FieldState::rest(spec, n);
        state.u = VectorField {
            comps: vec![
                ScalarField::from_fn(spec, |x| amp * x[0].sin() * x[1].cos()),
                ScalarField::from_fn(spec, |x| -amp * x[0].cos() * x[1].sin()),
            ],
        };
        state.u_modes = basis.project(&dom, &state.u, n).unwrap();
        let p = pressure_solve(&dom, &basis, &state, &laws, TruncationLevels::new(n, n).unwrap())
            .unwrap();
        let exact = ScalarField::from_fn(spec, |x| {
            amp * amp / 4.0 * ((2.0 * x[0]).cos() + (2.0 * x[1]).cos())
        });
        let mut worst: f64 = 0.0;
        for (a, b) in p.data.iter().zip(&exact.data) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst <= 1e-10, "pressure mismatch {worst}");
        assert!(p.mean(spec).abs() < 1e-13);
    }

    #[test]
    fn pressure_satisfies_weak_identity() {
        // Independently coded weak form: ∫ p Δφ = ∫ F : ∇²φ for analytic
        // trigonometric test functions φ.
        let dom = domain2d(24);
        let spec = dom.spec();
        let n = 16;
        let basis = build_basis(&dom, n).unwrap();
        let laws = MaterialLaws::standard();
        let mut rng = SplitMix64::new(77);
        let coeffs: Vec<f64> = (0..n).map(|_| rng.next_in(-0.5, 0.5)).collect();
        let mut state = FieldState::rest(spec, n);
        state.u = basis.reconstruct(&dom, &coeffs).unwrap();
        state.u_modes = coeffs;
        state.theta =
            ScalarField::from_fn(spec, |x| 1.0 + 0.3 * x[0].cos() + 0.2 * (x[1] * 2.0).sin());
        state.d.comps[1] = ScalarField::from_fn(spec, |x| 0.2 * x[0].cos());
        state.d.comps[2] = ScalarField::from_fn(spec, |x| 0.1 * (x[1] * 2.0).sin());
        let levels = TruncationLevels::new(n, 8).unwrap();
        let p = pressure_solve(&dom, &basis, &state, &laws, levels).unwrap();
        let f = pressure_source_tensor(&dom, &basis, &state, &laws, levels).unwrap();

        let mut worst: f64 = 0.0;
        let mut tested = 0;
        let mut rng_t = SplitMix64::new(500);
        while tested < 20 {
            let kx = rng_t.next_in(-4.0, 5.0).floor();
            let ky = rng_t.next_in(-4.0, 5.0).floor();
            if kx == 0.0 && ky == 0.0 {
                continue;
            }
            tested += 1;
            let use_cos = rng_t.next_f64() < 0.5;
            let phi = ScalarField::from_fn(spec, |x| {
                let a = kx * x[0] + ky * x[1];
                if use_cos {
                    a.cos()
                } else {
                    a.sin()
                }
            });
            let k2 = kx * kx + ky * ky;
            let mut lhs = 0.0;
            for (pv, fv) in p.data.iter().zip(&phi.data) {
                lhs += pv * (-k2) * fv;
            }
            lhs *= spec.cell_volume();
            let kvec = [kx, ky];
            let mut rhs = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let fij = &f.comp(i, j).data;
                    for (fv, ph) in fij.iter().zip(&phi.data) {
                        rhs += fv * (-kvec[i] * kvec[j]) * ph;
                    }
                }
            }
            rhs *= spec.cell_volume();
            let scale = 1.0f64.max(lhs.abs()).max(rhs.abs());
            worst = worst.max((lhs - rhs).abs() / scale);
        }
        assert!(worst <= 1e-9, "weak residual {worst}");
    }

    #[test]
    fn slip_channel_basis_is_orthonormal_and_solenoidal() {
        let dom = Domain::new(
            DomainSpec::new(2, &[TWO_PI, 1.0], &[16, 16], DomainMode::SlipChannel { wall_axis: 1 })
                .unwrap(),
        );
        let basis = build_basis(&dom, 8).unwrap();
        let fields: Vec<_> = (0..8).map(|n| basis.mode_field(&dom, n).unwrap()).collect();
        for (i, a) in fields.iter().enumerate() {
            for (j, b) in fields.iter().enumerate() {
                let g = a.inner(b, dom.spec());
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-10, "gram[{i}][{j}] = {g}");
            }
        }
        for v in &fields {
            let div = dom.div_vector(v, &dom.spec().velocity_parities()).unwrap();
            assert!(div.norm_l2(dom.spec()) < 1e-10);
        }
    }

    #[test]
    fn reconstruct_project_roundtrip() {
        let dom = domain2d(16);
        let n = 14;
        let basis = build_basis(&dom, n).unwrap();
        let mut rng = SplitMix64::new(4);
        let coeffs: Vec<f64> = (0..n).map(|_| rng.next_in(-2.0, 2.0)).collect();
        let v = basis.reconstruct(&dom, &coeffs).unwrap();
        let back = basis.project(&dom, &v, n).unwrap();
        for (a, b) in coeffs.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
