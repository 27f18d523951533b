//! Warped-product model data.
//!
//! Both manifolds are `[0, ∞) × Sⁿ` with metrics `ds² + g(s)² dθ²` and
//! `dt² + j(t)² dθ²`. A warp must vanish at the pole with unit slope and be
//! positive away from it. The two power families used by the counterexample
//! share one closed form, `(r + a)^e − a^e` with `a = e^{−1/(e−1)}`, which is
//! what makes the slope at the origin exactly one.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("domain warp exponent must satisfy delta > 1, got {0}")]
    DomainExponent(f64),
    #[error("target warp exponent must satisfy 0 < sigma < 1, got {0}")]
    TargetExponent(f64),
    #[error("custom warp '{0}' cannot be rebuilt from a serialized descriptor")]
    NotReconstructible(String),
}

/// The parameter tuple `(n, p, δ, σ, α)`.
///
/// `n` is the sphere dimension, so both manifolds are `(n+1)`-dimensional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ModelParameters<T: Real> {
    pub n: u32,
    pub p: T,
    pub delta: T,
    pub sigma: T,
    pub alpha: T,
}

impl<T: Real> ModelParameters<T> {
    pub fn new(n: u32, p: T, delta: T, sigma: T, alpha: T) -> Self {
        Self { n, p, delta, sigma, alpha }
    }

    #[inline]
    pub fn n_real(&self) -> T {
        T::from_u32(self.n).expect("dimension representable")
    }

    /// `n − (p − 2)`, the factor that appears in every decay exponent.
    #[inline]
    pub fn reduced_dimension(&self) -> T {
        self.n_real() - (self.p - T::lit(2.0))
    }

    /// Exponent of the decay law `f′(s) ~ D s^e`, namely `−δ(n − (p − 2))`.
    pub fn decay_exponent(&self) -> T {
        -self.delta * self.reduced_dimension()
    }

    pub fn a1_exponent(&self) -> T {
        -T::lit(2.0) * self.delta
    }

    pub fn a2_exponent(&self) -> T {
        -T::one() + self.decay_exponent()
    }

    pub fn a3_exponent(&self) -> T {
        T::lit(2.0) * self.decay_exponent()
    }
}

/// Value and the first two derivatives of a warp at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpValue<T> {
    pub value: T,
    pub d1: T,
    pub d2: T,
}

/// Serializable description of a built-in warp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "")]
pub enum WarpSpec<T: Real> {
    Euclidean,
    Domain { delta: T },
    Target { sigma: T },
}

type WarpEvaluator<T> = Arc<dyn Fn(T) -> WarpValue<T> + Send + Sync>;

#[derive(Clone)]
enum WarpKind<T: Real> {
    Identity,
    ShiftedPower { exponent: T, shift: T, offset: T },
    Custom(WarpEvaluator<T>),
}

/// A radial warping function with analytic first and second derivatives.
#[derive(Clone)]
pub struct WarpingFunction<T: Real> {
    kind: WarpKind<T>,
    spec: Option<WarpSpec<T>>,
    name: String,
}

impl<T: Real> fmt::Debug for WarpingFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WarpingFunction").field("name", &self.name).finish()
    }
}

impl<T: Real> WarpingFunction<T> {
    /// Wraps an arbitrary evaluator. The caller is responsible for the pole
    /// conditions; [`check_pole_conditions`](Self::check_pole_conditions) tests them.
    pub fn custom<F>(name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(T) -> WarpValue<T> + Send + Sync + 'static,
    {
        Self { kind: WarpKind::Custom(Arc::new(eval)), spec: None, name: name.into() }
    }

    pub fn from_spec(spec: WarpSpec<T>) -> Result<Self, GeometryError> {
        match spec {
            WarpSpec::Euclidean => Ok(make_euclidean_warp()),
            WarpSpec::Domain { delta } => make_domain_warp(delta),
            WarpSpec::Target { sigma } => make_target_warp(sigma),
        }
    }

    pub fn spec(&self) -> Option<WarpSpec<T>> {
        self.spec
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, r: T) -> WarpValue<T> {
        match &self.kind {
            WarpKind::Identity => WarpValue { value: r, d1: T::one(), d2: T::zero() },
            WarpKind::ShiftedPower { exponent, shift, offset } => {
                let e = *exponent;
                let a = *shift;
                // a^e·((1 + r/a)^e − 1) avoids the cancellation of the naive form near 0
                let value = *offset * (e * (r / a).ln_1p()).exp_m1();
                let base = r + a;
                let d1 = e * base.powf(e - T::one());
                let d2 = e * (e - T::one()) * base.powf(e - T::lit(2.0));
                WarpValue { value, d1, d2 }
            }
            WarpKind::Custom(f) => f(r),
        }
    }

    #[inline]
    pub fn value(&self, r: T) -> T {
        self.eval(r).value
    }

    #[inline]
    pub fn derivative(&self, r: T) -> T {
        self.eval(r).d1
    }

    #[inline]
    pub fn second_derivative(&self, r: T) -> T {
        self.eval(r).d2
    }

    /// Constant `C₁` in `g(s) ~ C₁ s^δ`.
    ///
    /// Exact (`1`) for the domain power family with matching exponent;
    /// otherwise estimated as `g(s_ref) / s_ref^δ`.
    pub fn growth_constant(&self, delta: T, s_ref: T) -> T {
        match self.spec {
            Some(WarpSpec::Domain { delta: d }) if d == delta => T::one(),
            Some(WarpSpec::Euclidean) if delta == T::one() => T::one(),
            _ => self.value(s_ref) / s_ref.powf(delta),
        }
    }

    /// Tests `w(0) = 0`, `w′(0) = 1` and `w(r) > 0` on the supplied radii.
    pub fn check_pole_conditions(&self, grid: &[T], tol: T) -> PoleCheck<T> {
        let at0 = self.eval(T::zero());
        let first_nonpositive = grid
            .iter()
            .copied()
            .find(|&r| r > T::zero() && !(self.value(r) > T::zero()));
        PoleCheck {
            value_at_origin: at0.value,
            slope_at_origin: at0.d1,
            vanishes: at0.value.abs() <= tol,
            unit_slope: (at0.d1 - T::one()).abs() <= tol,
            first_nonpositive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleCheck<T> {
    pub value_at_origin: T,
    pub slope_at_origin: T,
    pub vanishes: bool,
    pub unit_slope: bool,
    pub first_nonpositive: Option<T>,
}

impl<T> PoleCheck<T> {
    pub fn passed(&self) -> bool {
        self.vanishes && self.unit_slope && self.first_nonpositive.is_none()
    }
}

fn shifted_power<T: Real>(exponent: T, spec: WarpSpec<T>, name: String) -> WarpingFunction<T> {
    // e·a^{e−1} = 1  ⇔  a = e^{−1/(e−1)}
    let shift = exponent.powf(-T::one() / (exponent - T::one()));
    let offset = shift.powf(exponent);
    WarpingFunction {
        kind: WarpKind::ShiftedPower { exponent, shift, offset },
        spec: Some(spec),
        name,
    }
}

/// `g(s) = (s + δ^{−1/(δ−1)})^δ − δ^{−δ/(δ−1)}`, requires `δ > 1`.
pub fn make_domain_warp<T: Real>(delta: T) -> Result<WarpingFunction<T>, GeometryError> {
    if !(delta > T::one()) || !delta.is_finite() {
        return Err(GeometryError::DomainExponent(delta.to_f64_lossy()));
    }
    Ok(shifted_power(delta, WarpSpec::Domain { delta }, format!("domain_power(delta={delta})")))
}

/// `j(t) = (t + σ^{1/(1−σ)})^σ − σ^{σ/(1−σ)}`, requires `0 < σ < 1`.
///
/// `j′` is positive and non-increasing with `j′(0) = 1`.
pub fn make_target_warp<T: Real>(sigma: T) -> Result<WarpingFunction<T>, GeometryError> {
    if !(sigma > T::zero() && sigma < T::one()) {
        return Err(GeometryError::TargetExponent(sigma.to_f64_lossy()));
    }
    Ok(shifted_power(sigma, WarpSpec::Target { sigma }, format!("target_power(sigma={sigma})")))
}

/// Flat warp `r ↦ r`; with it the identity profile solves the radial equation exactly.
pub fn make_euclidean_warp<T: Real>() -> WarpingFunction<T> {
    WarpingFunction {
        kind: WarpKind::Identity,
        spec: Some(WarpSpec::Euclidean),
        name: "euclidean".to_owned(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    DimensionAtLeastTwo,
    PBelowNPlusOne,
    PAboveMaxTwoN,
    DeltaAboveThreshold,
    ThresholdAboveOne,
    SigmaInUnitInterval,
    AlphaPositive,
    A3DecaysFasterThanA2,
    A1DecaysFasterThanA2,
}

impl Hypothesis {
    pub fn label(self) -> &'static str {
        match self {
            Hypothesis::DimensionAtLeastTwo => "n >= 2",
            Hypothesis::PBelowNPlusOne => "p < n+1",
            Hypothesis::PAboveMaxTwoN => "p > max{2,n}",
            Hypothesis::DeltaAboveThreshold => "delta > 1/(p-n)",
            Hypothesis::ThresholdAboveOne => "1/(p-n) > 1",
            Hypothesis::SigmaInUnitInterval => "0 < sigma < 1",
            Hypothesis::AlphaPositive => "alpha > 0",
            Hypothesis::A3DecaysFasterThanA2 => "-2*delta*(n-(p-2)) < -1-delta*(n-(p-2))",
            Hypothesis::A1DecaysFasterThanA2 => "-2*delta < -1-delta*(n-(p-2))",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub hypothesis: Hypothesis,
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ValidationReport<T: Real> {
    pub parameters: ModelParameters<T>,
    pub checks: Vec<HypothesisCheck>,
    pub epsilon_bound: T,
    pub decay_exponent: T,
    pub a1_exponent: T,
    pub a2_exponent: T,
    pub a3_exponent: T,
    /// `C₁` in `g(s) ~ C₁ s^δ`; one for the domain power family.
    pub growth_constant: T,
}

impl<T: Real> ValidationReport<T> {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, h: Hypothesis) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.hypothesis == h)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn failure_messages(&self) -> Vec<String> {
        self.failures().map(|c| format!("{} violated: {}", c.label, c.detail)).collect()
    }
}

/// Checks every standing hypothesis on `(n, p, δ, σ, α)`. Never fails: infeasible
/// points are reported so parameter sweeps can record them.
pub fn validate_parameters<T: Real>(params: &ModelParameters<T>) -> ValidationReport<T> {
    let two = T::lit(2.0);
    let n = params.n_real();
    let p = params.p;
    let gap = p - n;
    let threshold = T::one() / gap;
    let e_f = params.decay_exponent();
    let e1 = params.a1_exponent();
    let e2 = params.a2_exponent();
    let e3 = params.a3_exponent();

    let mut checks = Vec::with_capacity(9);
    let mut push = |hypothesis: Hypothesis, passed: bool, detail: String| {
        checks.push(HypothesisCheck { hypothesis, label: hypothesis.label().to_owned(), passed, detail });
    };

    push(Hypothesis::DimensionAtLeastTwo, params.n >= 2, format!("n = {}", params.n));
    push(Hypothesis::PBelowNPlusOne, p < n + T::one(), format!("p = {p}, n+1 = {}", n + T::one()));
    let lower = if n > two { n } else { two };
    push(Hypothesis::PAboveMaxTwoN, p > lower, format!("p = {p}, max{{2,n}} = {lower}"));
    push(
        Hypothesis::DeltaAboveThreshold,
        gap > T::zero() && params.delta > threshold,
        if gap > T::zero() {
            format!("delta = {}, 1/(p-n) = {threshold}", params.delta)
        } else {
            format!("p - n = {gap} is not positive, threshold undefined")
        },
    );
    push(
        Hypothesis::ThresholdAboveOne,
        gap > T::zero() && threshold > T::one(),
        format!("p - n = {gap}"),
    );
    push(
        Hypothesis::SigmaInUnitInterval,
        params.sigma > T::zero() && params.sigma < T::one(),
        format!("sigma = {}", params.sigma),
    );
    push(Hypothesis::AlphaPositive, params.alpha > T::zero(), format!("alpha = {}", params.alpha));
    push(Hypothesis::A3DecaysFasterThanA2, e3 < e2, format!("{e3} < {e2}"));
    push(Hypothesis::A1DecaysFasterThanA2, e1 < e2, format!("{e1} < {e2}"));

    let growth_constant = make_domain_warp(params.delta)
        .map(|g| g.growth_constant(params.delta, T::one()))
        .unwrap_or_else(|_| T::nan());

    ValidationReport {
        parameters: *params,
        checks,
        epsilon_bound: epsilon_bound(params),
        decay_exponent: e_f,
        a1_exponent: e1,
        a2_exponent: e2,
        a3_exponent: e3,
        growth_constant,
    }
}

/// `(n+1−p)/(n+3−p)`: the admissible width for ε in the sign argument for `A₂`.
pub fn epsilon_bound<T: Real>(params: &ModelParameters<T>) -> T {
    let n = params.n_real();
    (n + T::one() - params.p) / (n + T::lit(3.0) - params.p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn canonical() -> ModelParameters<f64> {
        ModelParameters::new(2, 2.5, 3.0, 0.5, 1.0)
    }

    #[test]
    fn domain_warp_pole_and_value() {
        let g = make_domain_warp(3.0_f64).unwrap();
        let at0 = g.eval(0.0);
        assert!(at0.value.abs() < 1e-15);
        assert_relative_eq!(at0.d1, 1.0, epsilon = 1e-14);
        let shift = 3f64.powf(-0.5);
        let expected = (1.0 + shift).powi(3) - 3f64.powf(-1.5);
        assert_relative_eq!(g.value(1.0), expected, max_relative = 1e-14);
        assert_relative_eq!(g.second_derivative(1.0), 6.0 * (1.0 + shift), max_relative = 1e-14);
    }

    #[test]
    fn target_warp_half() {
        let j = make_target_warp(0.5_f64).unwrap();
        assert!(j.value(0.0).abs() < 1e-15);
        assert_relative_eq!(j.derivative(0.0), 1.0, epsilon = 1e-14);
        assert_relative_eq!(j.value(0.75), 0.5, max_relative = 1e-14);
        // closed form (t + 1/4)^{1/2} − 1/2
        for t in [0.1, 2.0, 17.0] {
            assert_relative_eq!(j.value(t), (t + 0.25f64).sqrt() - 0.5, max_relative = 1e-13);
        }
    }

    #[test]
    fn euclidean_warp() {
        let g = make_euclidean_warp::<f64>();
        assert_eq!(g.value(0.0), 0.0);
        assert_eq!(g.derivative(5.3), 1.0);
        assert_eq!(g.second_derivative(2.0), 0.0);
    }

    #[test]
    fn constructors_reject_bad_exponents() {
        assert_eq!(make_domain_warp(1.0_f64).unwrap_err(), GeometryError::DomainExponent(1.0));
        assert!(make_domain_warp(0.5_f64).is_err());
        assert!(make_domain_warp(f64::NAN).is_err());
        assert!(make_target_warp(1.0_f64).is_err());
        assert!(make_target_warp(0.0_f64).is_err());
        assert!(make_target_warp(1.5_f64).is_err());
    }

    #[test]
    fn validation_of_canonical_parameters() {
        let r = validate_parameters(&canonical());
        assert!(r.all_passed(), "{:?}", r.failure_messages());
        assert_relative_eq!(r.decay_exponent, -4.5);
        assert_relative_eq!(r.epsilon_bound, 0.2, max_relative = 1e-15);
        assert_relative_eq!(r.a1_exponent, -6.0);
        assert_relative_eq!(r.a2_exponent, -5.5);
        assert_relative_eq!(r.a3_exponent, -9.0);
        assert_eq!(r.growth_constant, 1.0);
    }

    #[test]
    fn validation_names_failed_hypothesis() {
        let mut q = canonical();
        q.p = 3.5;
        let r = validate_parameters(&q);
        assert!(!r.check(Hypothesis::PBelowNPlusOne).unwrap().passed);

        let mut q = canonical();
        q.p = 2.0;
        assert!(!validate_parameters(&q).check(Hypothesis::PAboveMaxTwoN).unwrap().passed);

        let mut q = canonical();
        q.sigma = 1.5;
        let r = validate_parameters(&q);
        let failed: Vec<_> = r.failures().map(|c| c.hypothesis).collect();
        assert_eq!(failed, vec![Hypothesis::SigmaInUnitInterval]);

        let mut q = canonical();
        q.delta = 1.0;
        let r = validate_parameters(&q);
        assert!(!r.check(Hypothesis::DeltaAboveThreshold).unwrap().passed);
        assert!(r.growth_constant.is_nan());

        let mut q = canonical();
        q.alpha = 0.0;
        assert!(!validate_parameters(&q).check(Hypothesis::AlphaPositive).unwrap().passed);
    }

    #[test]
    fn epsilon_bound_limits() {
        let mut q = canonical();
        q.p = 3.0 - 1e-12;
        assert!(epsilon_bound(&q) < 1e-11);
        q.p = 2.0 + 1e-12;
        assert_relative_eq!(epsilon_bound(&q), 1.0 / 3.0, epsilon = 1e-11);
    }

    #[test]
    fn spec_round_trip() {
        let g = make_domain_warp(3.0_f64).unwrap();
        let h = WarpingFunction::from_spec(g.spec().unwrap()).unwrap();
        assert_eq!(g.value(2.5), h.value(2.5));
        let c = WarpingFunction::custom("sinh", |r: f64| WarpValue { value: r.sinh(), d1: r.cosh(), d2: r.sinh() });
        assert!(c.spec().is_none());
        assert!(c.check_pole_conditions(&[0.1, 1.0], 1e-12).passed());
    }

    #[test]
    fn generic_over_f32() {
        let g = make_domain_warp(3.0_f32).unwrap();
        assert!((g.derivative(0.0) - 1.0).abs() < 1e-6);
        assert!(g.value(1e-3) > 0.0);
    }
}
