//! Pointwise geometric operators for a rotationally symmetric map
//! `F(s, θ) = (f(s), θ)` and a radial function `H(t, θ) = h(t)` on the target.
//!
//! Everything reduces to scalar expressions in `s`, `f`, `f′`, `f″` and the
//! warps `g`, `j`. Formulas divide by `g(s)`, so every entry point requires `s > 0`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ModelParameters, WarpingFunction};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("radius must be positive, got s = {0}")]
    Domain(f64),
    #[error("energy density vanishes at s = {0}")]
    DegeneratePoint(f64),
    #[error("coefficient of f'' degenerates at s = {s} (|dF|^2 = {energy}, f' = {slope})")]
    DegenerateCoefficient { s: f64, energy: f64, slope: f64 },
    #[error("point s = {s} is outside M+ (h'(f) f' = {product})")]
    OutsideMPlus { s: f64, product: f64 },
    #[error("decomposition undefined at s = {s}: j(f) = {jf}, h'(f) = {hp}")]
    DegenerateDecomposition { s: f64, jf: f64, hp: f64 },
}

/// Profile data at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PointState<T: Real> {
    pub s: T,
    pub f: T,
    pub f1: T,
    pub f2: T,
}

impl<T: Real> PointState<T> {
    pub fn new(s: T, f: T, f1: T, f2: T) -> Self {
        Self { s, f, f1, f2 }
    }
}

#[inline]
fn require_positive_radius<T: Real>(s: T) -> Result<(), OperatorError> {
    if s > T::zero() {
        Ok(())
    } else {
        Err(OperatorError::Domain(s.to_f64_lossy()))
    }
}

/// Warp values needed by every formula, evaluated once.
#[derive(Debug, Clone, Copy)]
struct Frame<T> {
    g: T,
    gp: T,
    j: T,
    jp: T,
}

impl<T: Real> Frame<T> {
    fn at(s: T, f: T, g: &WarpingFunction<T>, j: &WarpingFunction<T>) -> Self {
        let gv = g.eval(s);
        let jv = j.eval(f);
        Self { g: gv.value, gp: gv.d1, j: jv.value, jp: jv.d1 }
    }

    #[inline]
    fn angular(&self, n: T) -> T {
        n * self.j * self.j / (self.g * self.g)
    }
}

/// `|dF|² = (f′)² + n j(f)²/g(s)²`.
pub fn energy_density_sq<T: Real>(
    state: &PointState<T>,
    g: &WarpingFunction<T>,
    j: &WarpingFunction<T>,
    n: u32,
) -> Result<T, OperatorError> {
    require_positive_radius(state.s)?;
    let fr = Frame::at(state.s, state.f, g, j);
    Ok(state.f1 * state.f1 + fr.angular(n_real(n)))
}

/// Radial coefficient of the tension field: `f″ + (n/g²)[g g′ f′ − j(f) j′(f)]`.
pub fn tension<T: Real>(
    state: &PointState<T>,
    g: &WarpingFunction<T>,
    j: &WarpingFunction<T>,
    n: u32,
) -> Result<T, OperatorError> {
    require_positive_radius(state.s)?;
    let fr = Frame::at(state.s, state.f, g, j);
    Ok(state.f2 + tension_drift(&fr, state.f1, n_real(n)))
}

#[inline]
fn tension_drift<T: Real>(fr: &Frame<T>, f1: T, n: T) -> T {
    n / (fr.g * fr.g) * (fr.g * fr.gp * f1 - fr.j * fr.jp)
}

/// `n j/g³ (j′ f′ g − j g′)`: the angular part of `½ (|dF|²)′` not involving `f″`.
#[inline]
fn angular_flux<T: Real>(fr: &Frame<T>, f1: T, n: T) -> T {
    n * fr.j / (fr.g * fr.g * fr.g) * (fr.jp * f1 * fr.g - fr.j * fr.gp)
}

/// The p-harmonicity residual with the positive prefactor `|dF|^{p−2}` removed:
///
/// `τ + (p−2)|dF|⁻² f′ [f′ f″ + n j/g³ (j′ f′ g − j g′)]`.
///
/// Vanishes exactly where the profile satisfies the radial p-harmonic equation.
pub fn p_tension_residual<T: Real>(
    state: &PointState<T>,
    g: &WarpingFunction<T>,
    j: &WarpingFunction<T>,
    params: &ModelParameters<T>,
) -> Result<T, OperatorError> {
    require_positive_radius(state.s)?;
    let n = params.n_real();
    let fr = Frame::at(state.s, state.f, g, j);
    let energy = state.f1 * state.f1 + fr.angular(n);
    if !(energy > T::zero()) {
        return Err(OperatorError::DegeneratePoint(state.s.to_f64_lossy()));
    }
    let tau = state.f2 + tension_drift(&fr, state.f1, n);
    let correction = state.f1 / energy * (state.f1 * state.f2 + angular_flux(&fr, state.f1, n));
    Ok(tau + (params.p - T::lit(2.0)) * correction)
}

/// Full radial p-tension `|dF|^{p−2} · residual`.
pub fn p_tension<T: Real>(
    state: &PointState<T>,
    g: &WarpingFunction<T>,
    j: &WarpingFunction<T>,
    params: &ModelParameters<T>,
) -> Result<T, OperatorError> {
    let residual = p_tension_residual(state, g, j, params)?;
    let energy = energy_density_sq(state, g, j, params.n)?;
    Ok(energy.powf((params.p - T::lit(2.0)) / T::lit(2.0)) * residual)
}

/// The unique `f″` making [`p_tension_residual`] vanish at `(s, f, f′)`.
pub fn solve_second_derivative<T: Real>(
    s: T,
    f: T,
    f1: T,
    g: &WarpingFunction<T>,
    j: &WarpingFunction<T>,
    params: &ModelParameters<T>,
) -> Result<T, OperatorError> {
    require_positive_radius(s)?;
    let n = params.n_real();
    let fr = Frame::at(s, f, g, j);
    let energy = f1 * f1 + fr.angular(n);
    let pm2 = params.p - T::lit(2.0);
    let degenerate = || OperatorError::DegenerateCoefficient {
        s: s.to_f64_lossy(),
        energy: energy.to_f64_lossy(),
        slope: f1.to_f64_lossy(),
    };
    if !(energy > T::min_positive_value()) || !energy.is_finite() {
        return Err(degenerate());
    }
    let weight = f1 / energy;
    let coefficient = T::one() + pm2 * f1 * weight;
    if !(coefficient > T::epsilon()) {
        return Err(degenerate());
    }
    let rhs = tension_drift(&fr, f1, n) + pm2 * weight * angular_flux(&fr, f1, n);
    Ok(-rhs / coefficient)
}

type ProfileEvaluator<T> = Arc<dyn Fn(T) -> (T, T, T) + Send + Sync>;

#[derive(Clone)]
enum ProfileKind<T: Real> {
    /// `Σ c_k t^k`
    Polynomial(Vec<T>),
    Custom(ProfileEvaluator<T>),
}

/// A radial function `h` on the target, with a flag recording whether its
/// convexity (and `h′ > 0`) has been checked on a grid.
#[derive(Clone)]
pub struct ConvexProfile<T: Real> {
    kind: ProfileKind<T>,
    scale: T,
    name: String,
    certified: bool,
}

impl<T: Real> fmt::Debug for ConvexProfile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexProfile")
            .field("name", &self.name)
            .field("scale", &self.scale)
            .field("certified", &self.certified)
            .finish()
    }
}

impl<T: Real> ConvexProfile<T> {
    pub fn polynomial(name: impl Into<String>, coefficients: Vec<T>) -> Self {
        Self { kind: ProfileKind::Polynomial(coefficients), scale: T::one(), name: name.into(), certified: false }
    }

    /// `h(t) = t`
    pub fn linear() -> Self {
        Self::polynomial("linear", vec![T::zero(), T::one()])
    }

    /// `h(t) = t²`
    pub fn quadratic() -> Self {
        Self::polynomial("quadratic", vec![T::zero(), T::zero(), T::one()])
    }

    /// `h(t) = t + t²`
    pub fn linquad() -> Self {
        Self::polynomial("linquad", vec![T::zero(), T::one(), T::one()])
    }

    /// Evaluator returning `(h, h′, h″)`.
    pub fn custom<F>(name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(T) -> (T, T, T) + Send + Sync + 'static,
    {
        Self { kind: ProfileKind::Custom(Arc::new(eval)), scale: T::one(), name: name.into(), certified: false }
    }

    /// `λ·h`; certification carries over since `λ > 0` preserves convexity.
    pub fn scaled(&self, lambda: T) -> Self {
        let mut out = self.clone();
        out.scale = self.scale * lambda;
        out.certified = self.certified && lambda > T::zero();
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_certified(&self) -> bool {
        self.certified
    }

    pub fn coefficients(&self) -> Option<&[T]> {
        match &self.kind {
            ProfileKind::Polynomial(c) => Some(c),
            ProfileKind::Custom(_) => None,
        }
    }

    /// `(h(t), h′(t), h″(t))`
    pub fn eval(&self, t: T) -> (T, T, T) {
        let (v, d1, d2) = match &self.kind {
            ProfileKind::Polynomial(c) => {
                // Horner for the value and both derivatives at once
                let (mut v, mut d1, mut d2) = (T::zero(), T::zero(), T::zero());
                for &ck in c.iter().rev() {
                    d2 = d2 * t + d1 + d1;
                    d1 = d1 * t + v;
                    v = v * t + ck;
                }
                (v, d1, d2)
            }
            ProfileKind::Custom(f) => f(t),
        };
        (self.scale * v, self.scale * d1, self.scale * d2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityViolationKind {
    /// `h″ < 0`: radial Hessian eigenvalue negative.
    NegativeSecondDerivative,
    /// `h′ < 0`
    NegativeSlope,
    /// `j′ j h′ < 0`: angular Hessian eigenvalue negative.
    NegativeAngularEigenvalue,
    /// `h′ = 0` at some `t > 0`, violating the strict-increase requirement.
    NonPositiveSlope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ConvexityViolation<T: Real> {
    pub t: T,
    pub kind: ConvexityViolationKind,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ConvexityReport<T: Real> {
    /// Hessian of `H` is positive semidefinite on every grid point.
    pub convex: bool,
    /// `h′(t) > 0` on every grid point.
    pub strictly_increasing: bool,
    pub grid_points: usize,
    pub grid_min: T,
    pub grid_max: T,
    pub violations: Vec<ConvexityViolation<T>>,
}

/// Absolute tolerance for the sign tests in [`hessian_convexity_check`].
pub const CONVEXITY_TOL: f64 = 1e-12;

/// Checks `Hess(H) = h″ dt² + j′ j h′ dθ² ≥ 0` and `h′ ≥ 0` on `grid`, and sets
/// the certification flag of `h` when the check passes with `h′ > 0` throughout.
pub fn hessian_convexity_check<T: Real>(
    h: &mut ConvexProfile<T>,
    j: &WarpingFunction<T>,
    grid: &[T],
) -> ConvexityReport<T> {
    let tol = T::lit(CONVEXITY_TOL);
    let mut violations = Vec::new();
    let mut convex = !grid.is_empty();
    let mut strictly_increasing = !grid.is_empty();
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for &t in grid {
        lo = lo.min(t);
        hi = hi.max(t);
        let (_, d1, d2) = h.eval(t);
        let jv = j.eval(t);
        let angular = jv.d1 * jv.value * d1;
        let mut flag = |kind, value| violations.push(ConvexityViolation { t, kind, value });
        if !(d2 >= -tol) {
            convex = false;
            flag(ConvexityViolationKind::NegativeSecondDerivative, d2);
        }
        if !(d1 >= -tol) {
            convex = false;
            flag(ConvexityViolationKind::NegativeSlope, d1);
        } else if !(d1 > T::zero()) {
            strictly_increasing = false;
            flag(ConvexityViolationKind::NonPositiveSlope, d1);
        }
        if !(angular >= -tol) {
            convex = false;
            flag(ConvexityViolationKind::NegativeAngularEigenvalue, angular);
        }
    }
    strictly_increasing &= convex;
    h.certified = convex && strictly_increasing;
    ConvexityReport { convex, strictly_increasing, grid_points: grid.len(), grid_min: lo, grid_max: hi, violations }
}

/// Log-uniform grid on `[lo, hi]` with `per_decade` points per decade (endpoints included).
pub fn log_grid<T: Real>(lo: T, hi: T, per_decade: usize) -> Vec<T> {
    let decades = (hi / lo).log10();
    let count = ((decades * T::from_usize_lossy(per_decade)).ceil().to_usize().unwrap_or(0)).max(1);
    let step = decades / T::from_usize_lossy(count);
    let llo = lo.log10();
    let ten = T::lit(10.0);
    (0..=count)
        .map(|i| if i == count { hi } else { ten.powf(llo + step * T::from_usize_lossy(i)) })
        .collect()
}

/// `Δ_p(H∘F)` in its direct form
/// `K { (p−1)[h′ f″ + h″ f′²] + n (g′/g) f′ h′ }` with `K = |h′ f′|^{p−2}`.
///
/// Defined on `M₊ = { h′(f) f′ > 0 }`.
pub fn p_laplacian_composition<T: Real>(
    state: &PointState<T>,
    h: &ConvexProfile<T>,
    g: &WarpingFunction<T>,
    j: &WarpingFunction<T>,
    params: &ModelParameters<T>,
) -> Result<T, OperatorError> {
    composition_terms(state, h, g, j, params).map(|c| c.value)
}

/// Direct-form value plus the sum of absolute values of its terms, used to set
/// a sign-certification margin proportional to the value's scale.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CompositionTerms<T> {
    pub value: T,
    pub magnitude: T,
}

pub(crate) fn composition_terms<T: Real>(
    state: &PointState<T>,
    h: &ConvexProfile<T>,
    g: &WarpingFunction<T>,
    _j: &WarpingFunction<T>,
    params: &ModelParameters<T>,
) -> Result<CompositionTerms<T>, OperatorError> {
    require_positive_radius(state.s)?;
    let (_, hp, hpp) = h.eval(state.f);
    let product = hp * state.f1;
    if !(product > T::zero()) {
        return Err(OperatorError::OutsideMPlus { s: state.s.to_f64_lossy(), product: product.to_f64_lossy() });
    }
    let gv = g.eval(state.s);
    let k = product.powf(params.p - T::lit(2.0));
    let pm1 = params.p - T::one();
    let t1 = pm1 * hp * state.f2;
    let t2 = pm1 * hpp * state.f1 * state.f1;
    let t3 = params.n_real() * gv.d1 / gv.value * state.f1 * hp;
    Ok(CompositionTerms { value: k * (t1 + t2 + t3), magnitude: k * (t1.abs() + t2.abs() + t3.abs()) })
}

/// The grouping `Δ_p(H∘F) = K K̃ (A₁ + A₂ + A₃)`, obtained after substituting
/// the radial equation. It agrees with [`p_laplacian_composition`] only on
/// states satisfying that equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Decomposition<T: Real> {
    pub k: T,
    pub ktilde: T,
    pub a1: T,
    pub a2: T,
    pub a3: T,
    pub sum: T,
    pub product: T,
}

pub fn decomposition<T: Real>(
    state: &PointState<T>,
    h: &ConvexProfile<T>,
    g: &WarpingFunction<T>,
    j: &WarpingFunction<T>,
    params: &ModelParameters<T>,
) -> Result<Decomposition<T>, OperatorError> {
    require_positive_radius(state.s)?;
    let n = params.n_real();
    let p = params.p;
    let fr = Frame::at(state.s, state.f, g, j);
    let (_, hp, hpp) = h.eval(state.f);
    if !(fr.j > T::zero()) || !(hp > T::zero()) {
        return Err(OperatorError::DegenerateDecomposition {
            s: state.s.to_f64_lossy(),
            jf: fr.j.to_f64_lossy(),
            hp: hp.to_f64_lossy(),
        });
    }
    let f1sq = state.f1 * state.f1;
    let angular = fr.angular(n);
    let energy = f1sq + angular;
    let g2 = fr.g * fr.g;

    let k = (hp * state.f1).abs().powf(p - T::lit(2.0));
    let ktilde = n * fr.j * hp / (energy * g2);
    let a1 = fr.jp * ((T::lit(3.0) - p) * f1sq + angular);
    let a2 = (p - T::lit(2.0)) * fr.j * (fr.gp * state.f1 / fr.g + state.f2);
    let a3 = (p - T::one()) * f1sq * hpp * energy * g2 / (n * fr.j * hp);
    let sum = a1 + a2 + a3;
    Ok(Decomposition { k, ktilde, a1, a2, a3, sum, product: k * ktilde * sum })
}

#[inline]
fn n_real<T: Real>(n: u32) -> T {
    T::from_u32(n).expect("dimension representable")
}
