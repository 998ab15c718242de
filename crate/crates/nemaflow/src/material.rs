//! Constitutive laws and their hypothesis validation.
//!
//! The solver accepts any temperature-dependent transport coefficients that
//! satisfy the structural hypotheses: viscosity pinched between positive
//! bounds, conductivities nonnegative with the anisotropic part bounded,
//! and a dilatation coefficient that vanishes at zero temperature and never
//! decreases. `validate_hypotheses` certifies a parameter set by sweeping
//! sample grids and reporting the worst violation per hypothesis.
//!
//! Default closures are the simplest smooth laws satisfying every
//! hypothesis: saturating rational functions in ϑ for μ and λ, constant
//! conductivities, and the quartic double well for the director penalty.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scalar::{lit, Scalar};

/// A scalar law ϑ ↦ value.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarLaw<T> {
    /// `lo + (hi - lo) ϑ / (1 + ϑ)`: rises from `lo` at ϑ = 0 toward `hi`.
    Saturating { lo: T, hi: T },
    Constant(T),
    /// `intercept + slope ϑ`; mainly useful for injecting violations.
    Affine { intercept: T, slope: T },
    /// Monotone-cubic interpolation of tabulated points, constant beyond
    /// the table ends.
    Tabulated(MonotoneTable<T>),
}

impl<T: Scalar> ScalarLaw<T> {
    pub fn eval(&self, theta: T) -> T {
        match self {
            ScalarLaw::Saturating { lo, hi } => *lo + (*hi - *lo) * theta / (T::one() + theta),
            ScalarLaw::Constant(c) => *c,
            ScalarLaw::Affine { intercept, slope } => *intercept + *slope * theta,
            ScalarLaw::Tabulated(t) => t.eval(theta),
        }
    }
}

/// Director penalty W and its gradient ∂W.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyLaw {
    /// `W(d) = (|d|² - 1)²` with `∂W(d) = 4 (|d|² - 1) d`.
    QuarticWell,
    /// No penalty; handy for pure-transport experiments.
    None,
    /// `W(d) = -|d|²`: deliberately violates `W ≥ 0` for validator tests.
    NegativeSquare,
}

impl PenaltyLaw {
    pub fn eval<T: Scalar>(&self, d: &[T; 3]) -> (T, [T; 3]) {
        let sq = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        match self {
            PenaltyLaw::QuarticWell => {
                let excess = sq - T::one();
                let w = excess * excess;
                let c = lit::<T>(4.0) * excess;
                (w, [c * d[0], c * d[1], c * d[2]])
            }
            PenaltyLaw::None => (T::zero(), [T::zero(); 3]),
            PenaltyLaw::NegativeSquare => {
                let c = -lit::<T>(2.0);
                (-sq, [c * d[0], c * d[1], c * d[2]])
            }
        }
    }
}

/// The hypothesis constants bounding the laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisConstants<T> {
    pub mu_lo: T,
    pub mu_hi: T,
    pub kappa_lo: T,
    pub kappa_hi: T,
    pub lambda_hi: T,
    pub d0: T,
    pub theta_floor: T,
}

impl<T: Scalar> HypothesisConstants<T> {
    fn validate(&self) -> Result<()> {
        if !(self.mu_lo > T::zero() && self.mu_lo <= self.mu_hi) {
            return Err(Error::Usage("need 0 < mu_lo <= mu_hi".into()));
        }
        if !(self.kappa_lo > T::zero() && self.kappa_hi >= self.kappa_lo) {
            return Err(Error::Usage("need 0 < kappa_lo <= kappa_hi".into()));
        }
        if !(self.lambda_hi > T::zero()) {
            return Err(Error::Usage("lambda_hi must be positive".into()));
        }
        if !(self.d0 > T::zero()) {
            return Err(Error::Usage("d0 must be positive".into()));
        }
        if !(self.theta_floor > T::zero()) {
            return Err(Error::Usage("theta_floor must be positive".into()));
        }
        Ok(())
    }
}

/// A complete constitutive data set: constants plus the actual laws.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialLaws<T> {
    pub consts: HypothesisConstants<T>,
    pub viscosity_law: ScalarLaw<T>,
    pub dilatation_law: ScalarLaw<T>,
    pub kappa_law: ScalarLaw<T>,
    pub kappa_aniso_law: ScalarLaw<T>,
    pub penalty_law: PenaltyLaw,
}

impl<T: Scalar> MaterialLaws<T> {
    /// Default closures for the given constants.
    pub fn with_defaults(consts: HypothesisConstants<T>) -> Result<Self> {
        consts.validate()?;
        Ok(Self {
            viscosity_law: ScalarLaw::Saturating { lo: consts.mu_lo, hi: consts.mu_hi },
            dilatation_law: ScalarLaw::Saturating { lo: T::zero(), hi: consts.lambda_hi },
            kappa_law: ScalarLaw::Constant(T::one()),
            kappa_aniso_law: ScalarLaw::Constant(lit(0.5)),
            penalty_law: PenaltyLaw::QuarticWell,
            consts,
        })
    }

    /// The nondimensional default parameter set.
    pub fn standard() -> Self {
        Self::with_defaults(HypothesisConstants {
            mu_lo: lit(0.5),
            mu_hi: lit(1.0),
            kappa_lo: lit(0.5),
            kappa_hi: lit(1.0),
            lambda_hi: lit(1.0),
            d0: lit(1.0),
            theta_floor: lit(1e-8),
        })
        .expect("standard constants are valid")
    }

    fn check_theta(&self, theta: T) -> Result<()> {
        if !(theta >= T::zero()) {
            return Err(Error::Domain(format!("temperature must be nonnegative, got {theta}")));
        }
        Ok(())
    }

    /// Viscosity μ(ϑ).
    pub fn viscosity(&self, theta: T) -> Result<T> {
        self.check_theta(theta)?;
        Ok(self.viscosity_law.eval(theta))
    }

    /// Thermal dilatation coefficient λ(ϑ).
    pub fn dilatation(&self, theta: T) -> Result<T> {
        self.check_theta(theta)?;
        Ok(self.dilatation_law.eval(theta))
    }

    /// Derivative λ′(ϑ) by central differences (one-sided at 0).
    pub fn dilatation_slope(&self, theta: T) -> Result<T> {
        self.check_theta(theta)?;
        let h = lit::<T>(1e-6) * T::one().max(theta);
        if theta > h {
            Ok((self.dilatation_law.eval(theta + h) - self.dilatation_law.eval(theta - h))
                / (lit::<T>(2.0) * h))
        } else {
            Ok((self.dilatation_law.eval(theta + h) - self.dilatation_law.eval(theta)) / h)
        }
    }

    /// Λ(ϑ), a primitive of 1/λ(ϑ).
    ///
    /// For the default saturating law this is `(ln ϑ + ϑ) / λ̄` in closed
    /// form; for every other law the integral `∫_1^ϑ ds / λ(s)` is taken by
    /// adaptive quadrature. The additive constant is irrelevant: only
    /// entropy differences enter the audits.
    pub fn dilatation_primitive(&self, theta: T) -> Result<T> {
        if !(theta >= self.consts.theta_floor) {
            return Err(Error::Range(format!(
                "temperature {theta} below theta_floor {}",
                self.consts.theta_floor
            )));
        }
        match self.dilatation_law {
            ScalarLaw::Saturating { lo, hi } if lo == T::zero() => Ok((theta.ln() + theta) / hi),
            _ => adaptive_simpson(
                |s| {
                    let lam = self.dilatation_law.eval(s);
                    if lam > T::zero() {
                        Ok(T::one() / lam)
                    } else {
                        Err(Error::Domain(format!("dilatation is not positive at theta = {s}")))
                    }
                },
                T::one(),
                theta,
                lit(1e-12),
            ),
        }
    }

    /// Heat conductivities `(κ(ϑ), (κ∥ - κ⊥)(ϑ))`.
    pub fn conductivity(&self, theta: T) -> Result<(T, T)> {
        self.check_theta(theta)?;
        Ok((self.kappa_law.eval(theta), self.kappa_aniso_law.eval(theta)))
    }

    /// Penalty energy and gradient `(W(d), ∂W(d))`.
    pub fn penalty(&self, d: &[T; 3]) -> Result<(T, [T; 3])> {
        if !d.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("director sample has non-finite components".into()));
        }
        Ok(self.penalty_law.eval(d))
    }

    /// Sweep the hypotheses over sample grids.
    pub fn validate_hypotheses(
        &self,
        theta_grid: &[T],
        d_samples: &[[T; 3]],
    ) -> Result<HypothesisReport> {
        if theta_grid.is_empty() || d_samples.is_empty() {
            return Err(Error::Usage("hypothesis validation needs nonempty sample sets".into()));
        }
        if theta_grid.iter().any(|&t| t < T::zero()) {
            return Err(Error::Domain("theta grid must lie in [0, inf)".into()));
        }
        let mut sorted = theta_grid.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let mut checks = Vec::new();

        // hyp1: W >= 0 everywhere; dW·d >= 0 outside the D0 ball.
        {
            let mut worst: Option<Violation> = None;
            for d in d_samples {
                let (w, _) = self.penalty(d)?;
                record_min(&mut worst, w, || format!("d = {:?}", fmt3(d)));
            }
            checks.push(check("hyp1.penalty-nonnegative", worst, T::zero()));

            let mut worst: Option<Violation> = None;
            for d in d_samples {
                let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if norm >= self.consts.d0 {
                    let (_, dw) = self.penalty(d)?;
                    let dot = dw[0] * d[0] + dw[1] * d[1] + dw[2] * d[2];
                    record_min(&mut worst, dot, || format!("d = {:?}", fmt3(d)));
                }
            }
            checks.push(check("hyp1.gradient-outward", worst, T::zero()));
        }

        // hyp2: viscosity bounds and conductivity bounds.
        {
            let mut worst: Option<Violation> = None;
            for &t in &sorted {
                let mu = self.viscosity(t)?;
                record_min(&mut worst, mu - self.consts.mu_lo, || format!("theta = {t}"));
                record_min(&mut worst, self.consts.mu_hi - mu, || format!("theta = {t}"));
            }
            checks.push(check("hyp2.viscosity-bounds", worst, T::zero()));

            let mut worst: Option<Violation> = None;
            for &t in &sorted {
                let (kappa, kappa_aniso) = self.conductivity(t)?;
                record_min(&mut worst, kappa - self.consts.kappa_lo, || format!("theta = {t}"));
                record_min(&mut worst, self.consts.kappa_hi - kappa_aniso, || {
                    format!("theta = {t}")
                });
                record_min(&mut worst, kappa_aniso, || format!("theta = {t}"));
            }
            checks.push(check("hyp2.conductivity-bounds", worst, T::zero()));
        }

        // hyp3: lambda(0) = 0, nondecreasing, positive initial slope, bounded.
        {
            let origin = self.dilatation(T::zero())?;
            let mut worst: Option<Violation> = None;
            record_min(&mut worst, -origin.abs(), || "theta = 0".to_string());
            checks.push(check("hyp3.lambda-zero-at-origin", worst, -lit::<T>(1e-12)));

            let mut worst: Option<Violation> = None;
            for pair in sorted.windows(2) {
                if pair[1] > pair[0] {
                    let rise = self.dilatation(pair[1])? - self.dilatation(pair[0])?;
                    record_min(&mut worst, rise, || {
                        format!("theta in [{}, {}]", pair[0], pair[1])
                    });
                }
            }
            checks.push(check("hyp3.lambda-nondecreasing", worst, -lit::<T>(1e-12)));

            let slope0 = self.dilatation_slope(T::zero())?;
            let mut worst: Option<Violation> = None;
            record_min(&mut worst, slope0 - lit(1e-12), || "theta = 0".to_string());
            checks.push(check("hyp3.lambda-initial-slope", worst, T::zero()));

            let mut worst: Option<Violation> = None;
            for &t in &sorted {
                record_min(&mut worst, self.consts.lambda_hi - self.dilatation(t)?, || {
                    format!("theta = {t}")
                });
            }
            checks.push(check("hyp3.lambda-bounded", worst, T::zero()));
        }

        Ok(HypothesisReport { checks })
    }
}

fn fmt3<T: Scalar>(d: &[T; 3]) -> [f64; 3] {
    [d[0].to_f64_lossy(), d[1].to_f64_lossy(), d[2].to_f64_lossy()]
}

/// Worst offender found while sweeping one check.
#[derive(Debug, Clone)]
pub struct Violation {
    /// Where the extreme value occurred.
    pub location: String,
    /// The margin; negative values mean the hypothesis failed there.
    pub margin: f64,
}

fn record_min<T: Scalar>(worst: &mut Option<Violation>, margin: T, loc: impl FnOnce() -> String) {
    let m = margin.to_f64_lossy();
    match worst {
        Some(v) if v.margin <= m => {}
        _ => *worst = Some(Violation { location: loc(), margin: m }),
    }
}

fn check<T: Scalar>(name: &'static str, worst: Option<Violation>, tol: T) -> HypothesisCheck {
    let passed = worst.as_ref().is_none_or(|v| v.margin >= tol.to_f64_lossy());
    HypothesisCheck { name, passed, worst }
}

#[derive(Debug, Clone)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    pub worst: Option<Violation>,
}

#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed { "pass" } else { "FAIL" };
            out.push_str(&format!("{:32} {status}", c.name));
            if let Some(v) = &c.worst {
                out.push_str(&format!("  (worst margin {:+.3e} at {})", v.margin, v.location));
            }
            out.push('\n');
        }
        out
    }
}

/// Default validation sample set: ϑ on [0, 10] with step 0.1 and 100
/// deterministic director samples with |d| ≤ 3.
pub fn default_validation_samples<T: Scalar>(seed: u64) -> (Vec<T>, Vec<[T; 3]>) {
    let theta: Vec<T> = (0..=100).map(|i| lit::<T>(i as f64 * 0.1)).collect();
    let mut rng = SplitMix64::new(seed);
    let mut dirs = Vec::with_capacity(100);
    while dirs.len() < 100 {
        let d = [rng.next_in(-3.0, 3.0), rng.next_in(-3.0, 3.0), rng.next_in(-3.0, 3.0)];
        if d.iter().map(|v| v * v).sum::<f64>() <= 9.0 {
            dirs.push([lit(d[0]), lit(d[1]), lit(d[2])]);
        }
    }
    (theta, dirs)
}

/// Monotone (Fritsch–Carlson) cubic interpolant of tabulated data.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneTable<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    slopes: Vec<T>,
}

impl<T: Scalar> MonotoneTable<T> {
    pub fn new(xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::Usage("table needs at least two (theta, value) rows".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Usage("table abscissae must be strictly ascending".into()));
        }
        let n = xs.len();
        let mut secants = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            secants.push((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
        }
        let mut slopes = vec![T::zero(); n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            if secants[i - 1] * secants[i] > T::zero() {
                slopes[i] = (secants[i - 1] + secants[i]) / lit(2.0);
            }
        }
        // Fritsch-Carlson limiter keeps the interpolant monotone per interval.
        for i in 0..n - 1 {
            if secants[i] == T::zero() {
                slopes[i] = T::zero();
                slopes[i + 1] = T::zero();
                continue;
            }
            let alpha = slopes[i] / secants[i];
            let beta = slopes[i + 1] / secants[i];
            let r = alpha * alpha + beta * beta;
            if r > lit(9.0) {
                let tau = lit::<T>(3.0) / r.sqrt();
                slopes[i] = tau * alpha * secants[i];
                slopes[i + 1] = tau * beta * secants[i];
            }
        }
        Ok(Self { xs, ys, slopes })
    }

    /// Parse the two-column plain-text table format: whitespace-separated
    /// `theta value` rows, `#` comments, ascending theta.
    pub fn parse(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Config {
                    line: Some(i + 1),
                    message: format!("expected two columns, got: {line:?}"),
                });
            };
            let x: f64 = a.parse().map_err(|_| Error::Config {
                line: Some(i + 1),
                message: format!("bad number {a:?}"),
            })?;
            let y: f64 = b.parse().map_err(|_| Error::Config {
                line: Some(i + 1),
                message: format!("bad number {b:?}"),
            })?;
            xs.push(lit(x));
            ys.push(lit(y));
        }
        Self::new(xs, ys)
    }

    /// Hermite evaluation, clamped to the end values outside the table.
    pub fn eval(&self, x: T) -> T {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let mut i = match self.xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        if i >= n - 1 {
            i = n - 2;
        }
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = lit::<T>(2.0) * t3 - lit::<T>(3.0) * t2 + T::one();
        let h10 = t3 - lit::<T>(2.0) * t2 + t;
        let h01 = -lit::<T>(2.0) * t3 + lit::<T>(3.0) * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

/// Adaptive Simpson quadrature with absolute tolerance.
pub fn adaptive_simpson<T: Scalar>(
    f: impl Fn(T) -> Result<T> + Copy,
    a: T,
    b: T,
    tol: T,
) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let (lo, hi, sign) = if a < b { (a, b, T::one()) } else { (b, a, -T::one()) };
    let fa = f(lo)?;
    let fb = f(hi)?;
    let m = (lo + hi) / lit(2.0);
    let fm = f(m)?;
    let whole = simpson(lo, hi, fa, fm, fb);
    let v = simpson_rec(f, lo, hi, fa, fm, fb, whole, tol, 50)?;
    Ok(sign * v)
}

fn simpson<T: Scalar>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / lit(6.0) * (fa + lit::<T>(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<T: Scalar>(
    f: impl Fn(T) -> Result<T> + Copy,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: usize,
) -> Result<T> {
    let m = (a + b) / lit(2.0);
    let lm = (a + m) / lit(2.0);
    let rm = (m + b) / lit(2.0);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= lit::<T>(15.0) * tol {
        return Ok(left + right + err / lit(15.0));
    }
    let half = tol / lit(2.0);
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, half, depth - 1)?
        + simpson_rec(f, m, b, fm, frm, fb, right, half, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laws() -> MaterialLaws<f64> {
        MaterialLaws::standard()
    }

    #[test]
    fn viscosity_endpoints_and_midpoint() {
        let l = laws();
        assert_eq!(l.viscosity(0.0).unwrap(), 0.5);
        assert!((l.viscosity(1.0).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn viscosity_approaches_upper_bound_monotonically() {
        let l = laws();
        let mut prev = l.viscosity(0.0).unwrap();
        let mut theta = 1.0;
        for _ in 0..40 {
            let mu = l.viscosity(theta).unwrap();
            assert!(mu >= prev - 1e-15);
            assert!(mu <= 1.0);
            prev = mu;
            theta *= 4.0;
        }
        assert!(1.0 - prev < 1e-10, "limit not approached: {prev}");
    }

    #[test]
    fn viscosity_rejects_negative_theta() {
        assert!(matches!(laws().viscosity(-0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn dilatation_values_and_slopes() {
        let l = laws();
        assert_eq!(l.dilatation(0.0).unwrap(), 0.0);
        assert!((l.dilatation(1.0).unwrap() - 0.5).abs() < 1e-15);
        for theta in [0.1, 1.0, 10.0] {
            let h = 1e-6;
            let fd = (l.dilatation(theta + h).unwrap() - l.dilatation(theta - h).unwrap()) / (2.0 * h);
            assert!(fd > 0.0, "slope at {theta} is {fd}");
        }
    }

    #[test]
    fn primitive_matches_closed_form() {
        let l = laws();
        assert!((l.dilatation_primitive(1.0).unwrap() - 1.0).abs() < 1e-15);
        // Derivative of the primitive is 1/lambda.
        let h = 1e-6;
        let fd = (l.dilatation_primitive(2.0 + h).unwrap() - l.dilatation_primitive(2.0 - h).unwrap())
            / (2.0 * h);
        let inv_lambda = 1.0 / l.dilatation(2.0).unwrap();
        assert!((fd - inv_lambda).abs() / inv_lambda < 1e-8);
    }

    #[test]
    fn primitive_matches_quadrature_oracle() {
        // Independent oracle: adaptive quadrature of 1/lambda over [0.5, 3].
        let l = laws();
        let oracle = adaptive_simpson(
            |s: f64| Ok(1.0 / l.dilatation(s).unwrap()),
            0.5,
            3.0,
            1e-13,
        )
        .unwrap();
        let diff = l.dilatation_primitive(3.0).unwrap() - l.dilatation_primitive(0.5).unwrap();
        assert!((diff - oracle).abs() < 1e-10, "{diff} vs {oracle}");
    }

    #[test]
    fn primitive_rejects_below_floor() {
        assert!(matches!(laws().dilatation_primitive(1e-12), Err(Error::Range(_))));
    }

    #[test]
    fn conductivity_defaults_are_constant() {
        let l = laws();
        assert_eq!(l.conductivity(0.0).unwrap(), (1.0, 0.5));
        assert_eq!(l.conductivity(7.0).unwrap(), (1.0, 0.5));
        for i in 0..=100 {
            let (kappa, _) = l.conductivity(i as f64).unwrap();
            assert!(kappa >= l.consts.kappa_lo);
        }
    }

    #[test]
    fn penalty_values() {
        let l = laws();
        let (w, dw) = l.penalty(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(w, 0.0);
        assert_eq!(dw, [0.0; 3]);
        let (w, dw) = l.penalty(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(w, 1.0);
        assert_eq!(dw, [0.0; 3]);
        let (_, dw) = l.penalty(&[2.0, 0.0, 0.0]).unwrap();
        let dot = dw[0] * 2.0;
        assert_eq!(dot, 48.0);
    }

    #[test]
    fn penalty_rejects_non_finite() {
        assert!(laws().penalty(&[f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn default_laws_pass_validation() {
        let (theta, dirs) = default_validation_samples::<f64>(17);
        let report = laws().validate_hypotheses(&theta, &dirs).unwrap();
        assert!(report.all_passed(), "{}", report.summary());
    }

    #[test]
    fn decreasing_lambda_is_caught_with_location() {
        let mut l = laws();
        l.dilatation_law = ScalarLaw::Affine { intercept: 1.0, slope: -1.0 };
        let (theta, dirs) = default_validation_samples::<f64>(17);
        let report = l.validate_hypotheses(&theta, &dirs).unwrap();
        assert!(!report.all_passed());
        let failed: Vec<_> = report.failures().map(|c| c.name).collect();
        assert!(failed.contains(&"hyp3.lambda-nondecreasing"), "{failed:?}");
        let worst = report
            .failures()
            .find(|c| c.name == "hyp3.lambda-nondecreasing")
            .and_then(|c| c.worst.as_ref())
            .unwrap();
        assert!(worst.margin < 0.0);
        assert!(worst.location.contains("theta"));
    }

    #[test]
    fn negative_penalty_is_caught() {
        let mut l = laws();
        l.penalty_law = PenaltyLaw::NegativeSquare;
        let (theta, dirs) = default_validation_samples::<f64>(17);
        let report = l.validate_hypotheses(&theta, &dirs).unwrap();
        let failed: Vec<_> = report.failures().map(|c| c.name).collect();
        assert!(failed.contains(&"hyp1.penalty-nonnegative"), "{failed:?}");
    }

    #[test]
    fn viscosity_below_floor_is_caught() {
        let mut l = laws();
        l.viscosity_law = ScalarLaw::Constant(0.25);
        let (theta, dirs) = default_validation_samples::<f64>(17);
        let report = l.validate_hypotheses(&theta, &dirs).unwrap();
        let failed: Vec<_> = report.failures().map(|c| c.name).collect();
        assert!(failed.contains(&"hyp2.viscosity-bounds"), "{failed:?}");
    }

    #[test]
    fn empty_samples_are_usage_errors() {
        let (theta, dirs) = default_validation_samples::<f64>(17);
        assert!(matches!(laws().validate_hypotheses(&[], &dirs), Err(Error::Usage(_))));
        assert!(matches!(laws().validate_hypotheses(&theta, &[]), Err(Error::Usage(_))));
    }

    #[test]
    fn tabulated_law_interpolates_monotonically() {
        let text = "# theta  lambda\n0.0 0.0\n1.0 0.5\n2.0  0.66\n10.0 0.9\n";
        let table = MonotoneTable::<f64>::parse(text).unwrap();
        assert_eq!(table.eval(0.0), 0.0);
        assert_eq!(table.eval(1.0), 0.5);
        assert_eq!(table.eval(20.0), 0.9);
        let mut prev = -1.0;
        for i in 0..=200 {
            let v = table.eval(i as f64 * 0.05);
            assert!(v >= prev - 1e-12, "not monotone at {i}");
            prev = v;
        }
    }

    #[test]
    fn tabulated_parse_errors_carry_line_numbers() {
        let err = MonotoneTable::<f64>::parse("0.0 0.0\nnot-a-number 1.0\n").unwrap_err();
        match err {
            Error::Config { line, .. } => assert_eq!(line, Some(2)),
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn f32_instantiation_works() {
        let l = MaterialLaws::<f32>::standard();
        assert!((l.viscosity(1.0).unwrap() - 0.75).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn penalty_is_nonnegative_and_outward(
            dx in -3.0f64..3.0, dy in -3.0f64..3.0, dz in -3.0f64..3.0
        ) {
            let l = laws();
            let d = [dx, dy, dz];
            let (w, dw) = l.penalty(&d).unwrap();
            prop_assert!(w >= 0.0);
            let norm = (dx * dx + dy * dy + dz * dz).sqrt();
            if norm >= l.consts.d0 {
                prop_assert!(dw[0] * dx + dw[1] * dy + dw[2] * dz >= 0.0);
            }
        }

        #[test]
        fn penalty_gradient_matches_finite_differences(
            dx in -2.0f64..2.0, dy in -2.0f64..2.0, dz in -2.0f64..2.0
        ) {
            let l = laws();
            let d = [dx, dy, dz];
            let (_, dw) = l.penalty(&d).unwrap();
            let h = 1e-6;
            for c in 0..3 {
                let mut hi = d;
                let mut lo = d;
                hi[c] += h;
                lo[c] -= h;
                let fd = (l.penalty(&hi).unwrap().0 - l.penalty(&lo).unwrap().0) / (2.0 * h);
                let scale = 1.0f64.max(dw[c].abs());
                prop_assert!((fd - dw[c]).abs() / scale < 1e-7);
            }
        }

        #[test]
        fn viscosity_respects_bounds(theta in 0.0f64..1e6) {
            let l = laws();
            let mu = l.viscosity(theta).unwrap();
            prop_assert!(mu >= l.consts.mu_lo && mu <= l.consts.mu_hi);
        }
    }
}
