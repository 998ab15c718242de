//! Structured-grid domain description and field containers.
//!
//! Fields live on a uniform collocated grid over a rectangular box, stored
//! flat in x-fastest order. Two domain modes exist:
//!
//! * `Periodic` — every axis periodic;
//! * `SlipChannel` — one axis bounded by an impermeable frictionless wall
//!   pair, realized through mirror-symmetric extension onto a doubled
//!   periodic grid. Along the wall axis the grid is cell-centered so the
//!   reflection maps grid points onto grid points.
//!
//! Parity under the wall reflection decides how each field extends: even
//! fields satisfy a homogeneous Neumann condition at the wall, odd fields
//! vanish there. Velocity takes the vector parity (tangential even, normal
//! odd), which yields `u·n = 0` and zero tangential traction; temperature
//! and pressure are even; director components are even except the one along
//! the wall normal.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

pub const MAX_DIM: usize = 3;

/// Number of director components; the director is a 3-vector even on 2-D
/// domains (out-of-plane tilt is part of the model).
pub const DIRECTOR_COMPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainMode {
    Periodic,
    SlipChannel { wall_axis: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    /// Parity of `∂_axis f` given the parity of `f`.
    pub fn of_derivative(self, axis: usize, wall_axis: Option<usize>) -> Self {
        if wall_axis == Some(axis) {
            self.flip()
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec<T> {
    pub dim: usize,
    pub lengths: [T; MAX_DIM],
    pub resolution: [usize; MAX_DIM],
    pub mode: DomainMode,
}

impl<T: Scalar> DomainSpec<T> {
    pub fn periodic(dim: usize, lengths: &[T], resolution: &[usize]) -> Result<Self> {
        Self::new(dim, lengths, resolution, DomainMode::Periodic)
    }

    pub fn new(dim: usize, lengths: &[T], resolution: &[usize], mode: DomainMode) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::Usage(format!("dim must be 2 or 3, got {dim}")));
        }
        if lengths.len() != dim || resolution.len() != dim {
            return Err(Error::Usage(format!(
                "expected {dim} lengths and resolutions, got {} and {}",
                lengths.len(),
                resolution.len()
            )));
        }
        let mut l = [T::one(); MAX_DIM];
        let mut r = [1usize; MAX_DIM];
        for a in 0..dim {
            if !(lengths[a] > T::zero()) {
                return Err(Error::Usage(format!("length along axis {a} must be positive")));
            }
            if resolution[a] < 4 || resolution[a] % 2 != 0 {
                return Err(Error::Usage(format!(
                    "resolution along axis {a} must be even and at least 4, got {}",
                    resolution[a]
                )));
            }
            l[a] = lengths[a];
            r[a] = resolution[a];
        }
        if let DomainMode::SlipChannel { wall_axis } = mode {
            if wall_axis >= dim {
                return Err(Error::Usage(format!(
                    "wall axis {wall_axis} out of range for dim {dim}"
                )));
            }
        }
        Ok(Self { dim, lengths: l, resolution: r, mode })
    }

    pub fn wall_axis(&self) -> Option<usize> {
        match self.mode {
            DomainMode::Periodic => None,
            DomainMode::SlipChannel { wall_axis } => Some(wall_axis),
        }
    }

    /// Total number of physical grid points.
    pub fn num_points(&self) -> usize {
        self.resolution.iter().product()
    }

    /// Physical volume of the box.
    pub fn volume(&self) -> T {
        let mut v = T::one();
        for a in 0..self.dim {
            v = v * self.lengths[a];
        }
        v
    }

    /// Volume of one grid cell (quadrature weight).
    pub fn cell_volume(&self) -> T {
        self.volume() / T::from_usize_lossy(self.num_points())
    }

    /// Grid spacing along `axis`.
    pub fn spacing(&self, axis: usize) -> T {
        self.lengths[axis] / T::from_usize_lossy(self.resolution[axis])
    }

    /// Coordinate of the grid point with per-axis index `idx[axis]`.
    ///
    /// Periodic axes start at 0; the wall axis is cell-centered on
    /// `(0, length)`.
    pub fn coord(&self, axis: usize, idx: usize) -> T {
        let h = self.spacing(axis);
        match self.mode {
            DomainMode::SlipChannel { wall_axis } if wall_axis == axis => {
                (T::from_usize_lossy(idx) + lit(0.5)) * h
            }
            _ => T::from_usize_lossy(idx) * h,
        }
    }

    /// Flat index of a grid point, x-fastest.
    pub fn flat_index(&self, idx: [usize; MAX_DIM]) -> usize {
        idx[0] + self.resolution[0] * (idx[1] + self.resolution[1] * idx[2])
    }

    /// Per-axis indices of a flat index.
    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        let nx = self.resolution[0];
        let ny = self.resolution[1];
        [flat % nx, (flat / nx) % ny, flat / (nx * ny)]
    }

    /// Parity of velocity component `comp` under the wall reflection.
    pub fn velocity_parity(&self, comp: usize) -> Parity {
        match self.wall_axis() {
            Some(w) if comp == w => Parity::Odd,
            _ => Parity::Even,
        }
    }

    /// Parity of director component `comp` (0..3).
    ///
    /// The director reflects as a vector in 3-space: the component along the
    /// wall normal is odd, so `d·n = 0` at the wall while the tangential
    /// components satisfy the Neumann condition.
    pub fn director_parity(&self, comp: usize) -> Parity {
        match self.wall_axis() {
            Some(w) if comp == w => Parity::Odd,
            _ => Parity::Even,
        }
    }

    pub fn velocity_parities(&self) -> Vec<Parity> {
        (0..self.dim).map(|c| self.velocity_parity(c)).collect()
    }

    pub fn director_parities(&self) -> [Parity; DIRECTOR_COMPS] {
        [
            self.director_parity(0),
            self.director_parity(1),
            self.director_parity(2),
        ]
    }
}

/// Scalar field on the physical grid, flat x-fastest storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    pub data: Vec<T>,
}

impl<T: Scalar> ScalarField<T> {
    pub fn zeros(spec: &DomainSpec<T>) -> Self {
        Self { data: vec![T::zero(); spec.num_points()] }
    }

    pub fn constant(spec: &DomainSpec<T>, value: T) -> Self {
        Self { data: vec![value; spec.num_points()] }
    }

    pub fn from_fn(spec: &DomainSpec<T>, mut f: impl FnMut(&[T; MAX_DIM]) -> T) -> Self {
        let mut data = Vec::with_capacity(spec.num_points());
        let mut x = [T::zero(); MAX_DIM];
        for flat in 0..spec.num_points() {
            let idx = spec.multi_index(flat);
            for a in 0..spec.dim {
                x[a] = spec.coord(a, idx[a]);
            }
            data.push(f(&x));
        }
        Self { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn check_shape(&self, spec: &DomainSpec<T>) -> Result<()> {
        if self.data.len() != spec.num_points() {
            return Err(Error::Shape(format!(
                "field has {} values but the domain has {} points",
                self.data.len(),
                spec.num_points()
            )));
        }
        Ok(())
    }

    /// Discrete integral: cell volume times the grid sum.
    pub fn integral(&self, spec: &DomainSpec<T>) -> T {
        let mut s = T::zero();
        for &v in &self.data {
            s += v;
        }
        s * spec.cell_volume()
    }

    pub fn mean(&self, spec: &DomainSpec<T>) -> T {
        self.integral(spec) / spec.volume()
    }

    pub fn min(&self) -> T {
        self.data.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn max(&self) -> T {
        self.data.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn scale(&mut self, c: T) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    pub fn add_scaled(&mut self, other: &Self, c: T) {
        for (v, &o) in self.data.iter_mut().zip(&other.data) {
            *v += c * o;
        }
    }

    /// Discrete L² inner product `∫ f g`.
    pub fn inner(&self, other: &Self, spec: &DomainSpec<T>) -> T {
        let mut s = T::zero();
        for (&a, &b) in self.data.iter().zip(&other.data) {
            s += a * b;
        }
        s * spec.cell_volume()
    }

    pub fn norm_l2(&self, spec: &DomainSpec<T>) -> T {
        self.inner(self, spec).max(T::zero()).sqrt()
    }

    pub fn norm_lp(&self, p: T, spec: &DomainSpec<T>) -> T {
        let mut s = T::zero();
        for &v in &self.data {
            s += v.abs().powf(p);
        }
        (s * spec.cell_volume()).powf(T::one() / p)
    }

    pub fn norm_linf(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }
}

/// Vector field as a list of scalar components. Velocity carries `dim`
/// components, the director always three.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    pub comps: Vec<ScalarField<T>>,
}

impl<T: Scalar> VectorField<T> {
    pub fn zeros(spec: &DomainSpec<T>, ncomp: usize) -> Self {
        Self { comps: (0..ncomp).map(|_| ScalarField::zeros(spec)).collect() }
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn check_shape(&self, spec: &DomainSpec<T>, ncomp: usize) -> Result<()> {
        if self.comps.len() != ncomp {
            return Err(Error::Shape(format!(
                "vector field has {} components, expected {ncomp}",
                self.comps.len()
            )));
        }
        for c in &self.comps {
            c.check_shape(spec)?;
        }
        Ok(())
    }

    /// Pointwise squared magnitude.
    pub fn magnitude_sq(&self) -> ScalarField<T> {
        let n = self.comps[0].len();
        let mut out = vec![T::zero(); n];
        for c in &self.comps {
            for (o, &v) in out.iter_mut().zip(&c.data) {
                *o += v * v;
            }
        }
        ScalarField { data: out }
    }

    pub fn norm_l2(&self, spec: &DomainSpec<T>) -> T {
        self.magnitude_sq().integral(spec).max(T::zero()).sqrt()
    }

    pub fn add_scaled(&mut self, other: &Self, c: T) {
        for (mine, theirs) in self.comps.iter_mut().zip(&other.comps) {
            mine.add_scaled(theirs, c);
        }
    }

    pub fn scale(&mut self, c: T) {
        for comp in &mut self.comps {
            comp.scale(c);
        }
    }

    pub fn inner(&self, other: &Self, spec: &DomainSpec<T>) -> T {
        let mut s = T::zero();
        for (a, b) in self.comps.iter().zip(&other.comps) {
            s += a.inner(b, spec);
        }
        s
    }
}

/// Rank-2 tensor field; component `(i, j)` is stored at `i * dim + j` and
/// holds `T_ij` with `i` the vector component and `j` the derivative axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField<T> {
    pub dim: usize,
    pub comps: Vec<ScalarField<T>>,
}

impl<T: Scalar> TensorField<T> {
    pub fn zeros(spec: &DomainSpec<T>) -> Self {
        let dim = spec.dim;
        Self { dim, comps: (0..dim * dim).map(|_| ScalarField::zeros(spec)).collect() }
    }

    pub fn comp(&self, i: usize, j: usize) -> &ScalarField<T> {
        &self.comps[i * self.dim + j]
    }

    pub fn comp_mut(&mut self, i: usize, j: usize) -> &mut ScalarField<T> {
        &mut self.comps[i * self.dim + j]
    }

    /// Pointwise trace.
    pub fn trace(&self) -> ScalarField<T> {
        let n = self.comps[0].len();
        let mut out = vec![T::zero(); n];
        for i in 0..self.dim {
            for (o, &v) in out.iter_mut().zip(&self.comp(i, i).data) {
                *o += v;
            }
        }
        ScalarField { data: out }
    }

    /// Pointwise double contraction `A:B = Σ A_ij B_ij`.
    pub fn contract(&self, other: &Self) -> ScalarField<T> {
        let n = self.comps[0].len();
        let mut out = vec![T::zero(); n];
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for ((o, &x), &y) in out.iter_mut().zip(&a.data).zip(&b.data) {
                *o += x * y;
            }
        }
        ScalarField { data: out }
    }
}
