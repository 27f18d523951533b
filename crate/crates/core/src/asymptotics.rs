//! Large-radius behaviour of a computed profile: the plateau `ĉ = lim f`, the
//! limit `P` of the monotone quantity, the decay constant `D` and the decay
//! exponent of `f′`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ModelParameters, WarpingFunction};
use crate::operators::PointState;
use crate::profile_ode::{evaluate, monotone_quantity_at, ProfileSolution};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("solution reaches only s = {s_max}; limits need s_max >= {required}")]
    ShortRun { s_max: f64, required: f64 },
    #[error("{quantity} has not converged: uncertainty {uncertainty:e} exceeds {tolerance} of value {value:e}")]
    NotConverged { quantity: &'static str, value: f64, uncertainty: f64, tolerance: f64 },
    #[error("fit window [{lo}, {hi}] is insufficient: {reason}")]
    InsufficientWindow { lo: f64, hi: f64, reason: String },
    #[error("non-positive data at s = {s}; cannot take logarithms")]
    NonPositive { s: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

/// Radial window `[lo, hi]` used for regressions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FitWindow<T: Real> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> FitWindow<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    pub fn decades(&self) -> T {
        (self.hi / self.lo).log10()
    }
}

/// Minimum span and population of a regression window.
pub const MIN_WINDOW_DECADES: f64 = 2.0;
pub const MIN_WINDOW_NODES: usize = 50;
/// Plateau tolerance: relative change of `f` and `Q` over the last decade.
pub const PLATEAU_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Limits<T: Real> {
    pub c_hat: T,
    pub c_hat_uncertainty: T,
    pub p_limit: T,
    pub p_uncertainty: T,
}

impl<T: Real> Limits<T> {
    pub fn converged(&self, tolerance: T) -> bool {
        self.c_hat_uncertainty <= tolerance * self.c_hat && self.p_uncertainty <= tolerance * self.p_limit
    }
}

/// `ĉ = f(s_max)` and `P = Q(s_max)`, each with the uncertainty
/// `|X(s_max) − X(s_max/10)|`, without a convergence check.
pub fn plateau_values<T: Real>(solution: &ProfileSolution<T>) -> Result<Limits<T>, AsymptoticsError> {
    let s_hi = solution.s_max();
    let required = T::lit(1e3);
    if s_hi < required {
        return Err(AsymptoticsError::ShortRun { s_max: s_hi.to_f64_lossy(), required: 1e3 });
    }
    let s_lo = s_hi / T::lit(10.0);
    let hi = solution.node(solution.len() - 1);
    let lo = evaluate(solution, s_lo).map_err(|e| AsymptoticsError::Degenerate(e.to_string()))?;
    let q = |st: &PointState<T>| {
        monotone_quantity_at(st, solution.domain_warp(), solution.target_warp(), &solution.params)
            .map_err(|e| AsymptoticsError::Degenerate(e.to_string()))
    };
    let (q_hi, q_lo) = (q(&hi)?, q(&lo)?);
    Ok(Limits {
        c_hat: hi.f,
        c_hat_uncertainty: (hi.f - lo.f).abs(),
        p_limit: q_hi,
        p_uncertainty: (q_hi - q_lo).abs(),
    })
}

/// Like [`plateau_values`], but fails unless both uncertainties are within
/// [`PLATEAU_TOLERANCE`] of their values.
pub fn estimate_limits<T: Real>(solution: &ProfileSolution<T>) -> Result<Limits<T>, AsymptoticsError> {
    let lim = plateau_values(solution)?;
    let tol = T::lit(PLATEAU_TOLERANCE);
    for (quantity, value, unc) in [
        ("c_hat", lim.c_hat, lim.c_hat_uncertainty),
        ("P", lim.p_limit, lim.p_uncertainty),
    ] {
        if !(unc <= tol * value.abs()) {
            return Err(AsymptoticsError::NotConverged {
                quantity,
                value: value.to_f64_lossy(),
                uncertainty: unc.to_f64_lossy(),
                tolerance: PLATEAU_TOLERANCE,
            });
        }
    }
    Ok(lim)
}

/// `D = P C₁^{−n} (C₁² / (n j(ĉ)²))^{(p−2)/2}`.
pub fn theoretical_d<T: Real>(
    p_limit: T,
    c_hat: T,
    params: &ModelParameters<T>,
    c1: T,
    j: &WarpingFunction<T>,
) -> Result<T, AsymptoticsError> {
    if !(p_limit > T::zero() && c_hat > T::zero() && c1 > T::zero()) {
        return Err(AsymptoticsError::Degenerate(format!(
            "P = {p_limit}, c_hat = {c_hat}, C1 = {c1} must all be positive"
        )));
    }
    let jc = j.value(c_hat);
    if !(jc != T::zero()) {
        return Err(AsymptoticsError::Degenerate(format!("j(c_hat) = {jc}")));
    }
    let n = params.n_real();
    let energy = c1 * c1 / (n * jc * jc);
    Ok(p_limit * c1.powf(-n) * energy.powf((params.p - T::lit(2.0)) / T::lit(2.0)))
}

/// Least-squares fit of `log y = slope·log x + log prefactor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PowerLawFit<T: Real> {
    pub slope: T,
    pub prefactor: T,
    /// Largest absolute residual in log space.
    pub max_residual: T,
    pub points: usize,
}

pub fn fit_power_law<T: Real>(xs: &[T], ys: &[T]) -> Result<PowerLawFit<T>, AsymptoticsError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(AsymptoticsError::Degenerate(format!("need >= 2 paired points, got {} and {}", xs.len(), ys.len())));
    }
    let mut lx = Vec::with_capacity(xs.len());
    let mut ly = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x > T::zero() && y > T::zero()) {
            return Err(AsymptoticsError::NonPositive { s: x.to_f64_lossy() });
        }
        lx.push(x.ln());
        ly.push(y.ln());
    }
    let m = T::from_usize_lossy(lx.len());
    let mx = lx.iter().fold(T::zero(), |a, &b| a + b) / m;
    let my = ly.iter().fold(T::zero(), |a, &b| a + b) / m;
    let (mut sxx, mut sxy) = (T::zero(), T::zero());
    for (&x, &y) in lx.iter().zip(&ly) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if !(sxx > T::zero()) {
        return Err(AsymptoticsError::Degenerate("abscissae are all equal".to_owned()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = lx
        .iter()
        .zip(&ly)
        .map(|(&x, &y)| (y - intercept - slope * x).abs())
        .fold(T::zero(), T::max);
    Ok(PowerLawFit { slope, prefactor: intercept.exp(), max_residual, points: lx.len() })
}

/// Node indices inside `window`, after checking its span and population.
pub(crate) fn window_nodes<T: Real>(
    solution: &ProfileSolution<T>,
    window: FitWindow<T>,
) -> Result<std::ops::Range<usize>, AsymptoticsError> {
    let fail = |reason: String| AsymptoticsError::InsufficientWindow {
        lo: window.lo.to_f64_lossy(),
        hi: window.hi.to_f64_lossy(),
        reason,
    };
    if !(window.lo > T::zero() && window.hi > window.lo) {
        return Err(fail("bounds must satisfy 0 < lo < hi".to_owned()));
    }
    if window.lo < solution.s_min() || window.hi > solution.s_max() {
        return Err(fail(format!("solution covers [{}, {}]", solution.s_min(), solution.s_max())));
    }
    if window.decades() < T::lit(MIN_WINDOW_DECADES) - T::lit(1e-9) {
        return Err(fail(format!("spans {} decades, need {MIN_WINDOW_DECADES}", window.decades())));
    }
    let range = solution.window(window.lo, window.hi);
    if range.len() < MIN_WINDOW_NODES {
        return Err(fail(format!("{} nodes, need {MIN_WINDOW_NODES}", range.len())));
    }
    Ok(range)
}

/// Log-log regression of `f′` against `s` over the nodes in `window`.
pub fn fit_decay_exponent<T: Real>(
    solution: &ProfileSolution<T>,
    window: FitWindow<T>,
) -> Result<PowerLawFit<T>, AsymptoticsError> {
    let r = window_nodes(solution, window)?;
    fit_power_law(&solution.s[r.clone()], &solution.f1[r])
}

/// `|dF|² g² / (n j²) − 1`, computed directly as `f′² g² / (n j(f)²)` to avoid cancellation.
pub fn energy_ratio_excess<T: Real>(
    state: &PointState<T>,
    g: &WarpingFunction<T>,
    j: &WarpingFunction<T>,
    n: u32,
) -> T {
    let gs = g.value(state.s);
    let jf = j.value(state.f);
    let n = T::from_u32(n).expect("dimension representable");
    state.f1 * state.f1 * gs * gs / (n * jf * jf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EnergyRatioCheck<T: Real> {
    /// `sup |ratio − 1|` over the window.
    pub max_deviation: T,
    /// Log-log slope of `ratio − 1`; informational only.
    pub decay_slope: Option<T>,
    pub nodes: usize,
}

pub fn check_energy_ratio<T: Real>(
    solution: &ProfileSolution<T>,
    window: FitWindow<T>,
) -> EnergyRatioCheck<T> {
    let r = solution.window(window.lo, window.hi);
    let (g, j) = (solution.domain_warp(), solution.target_warp());
    let excess: Vec<T> = r
        .clone()
        .map(|i| energy_ratio_excess(&solution.node(i), g, j, solution.params.n))
        .collect();
    let max_deviation = excess.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let decay_slope = fit_power_law(&solution.s[r.clone()], &excess).ok().map(|f| f.slope);
    EnergyRatioCheck { max_deviation, decay_slope, nodes: r.len() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AsymptoticsReport<T: Real> {
    pub c_hat: T,
    pub c_hat_uncertainty: T,
    pub p_limit: T,
    pub p_uncertainty: T,
    /// Both plateau uncertainties are within [`PLATEAU_TOLERANCE`].
    pub limits_converged: bool,
    pub plateau_tolerance: T,
    pub c1: T,
    pub d_theory: T,
    pub exponent_theory: T,
    pub exponent_fitted: T,
    pub prefactor_fitted: T,
    pub fit_residual: T,
    pub fit_window: FitWindow<T>,
    pub fit_points: usize,
    pub exponent_rel_deviation: T,
    pub prefactor_rel_deviation: T,
    pub energy_ratio: EnergyRatioCheck<T>,
}

/// Full asymptotic summary. `c1` defaults to the warp's growth constant.
pub fn analyze<T: Real>(
    solution: &ProfileSolution<T>,
    window: FitWindow<T>,
    c1: Option<T>,
) -> Result<AsymptoticsReport<T>, AsymptoticsError> {
    let params = &solution.params;
    let lim = plateau_values(solution)?;
    let c1 = c1.unwrap_or_else(|| solution.domain_warp().growth_constant(params.delta, solution.s_max()));
    let d_theory = theoretical_d(lim.p_limit, lim.c_hat, params, c1, solution.target_warp())?;
    let fit = fit_decay_exponent(solution, window)?;
    let exponent_theory = params.decay_exponent();
    Ok(AsymptoticsReport {
        c_hat: lim.c_hat,
        c_hat_uncertainty: lim.c_hat_uncertainty,
        p_limit: lim.p_limit,
        p_uncertainty: lim.p_uncertainty,
        limits_converged: lim.converged(T::lit(PLATEAU_TOLERANCE)),
        plateau_tolerance: T::lit(PLATEAU_TOLERANCE),
        c1,
        d_theory,
        exponent_theory,
        exponent_fitted: fit.slope,
        prefactor_fitted: fit.prefactor,
        fit_residual: fit.max_residual,
        fit_window: window,
        fit_points: fit.points,
        exponent_rel_deviation: ((fit.slope - exponent_theory) / exponent_theory).abs(),
        prefactor_rel_deviation: ((fit.prefactor - d_theory) / d_theory).abs(),
        energy_ratio: check_energy_ratio(solution, window),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_euclidean_warp, make_target_warp};
    use crate::profile_ode::{integrate, SolverConfig};
    use approx::assert_relative_eq;

    #[test]
    fn exact_power_law_recovered() {
        let xs: Vec<f64> = (0..200).map(|i| 10f64.powf(2.0 + 2.0 * i as f64 / 199.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x.powf(-4.5)).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, -4.5, max_relative = 1e-12);
        assert_relative_eq!(fit.prefactor, 2.0, max_relative = 1e-10);
        assert!(fit.max_residual < 1e-10);
    }

    #[test]
    fn power_law_rejects_bad_data() {
        assert!(matches!(fit_power_law(&[1.0, 2.0], &[1.0, 0.0]), Err(AsymptoticsError::NonPositive { .. })));
        assert!(fit_power_law(&[1.0], &[1.0]).is_err());
        assert!(fit_power_law(&[3.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn theoretical_d_special_cases() {
        let j = make_target_warp(0.5).unwrap();
        let params = ModelParameters::new(2, 2.5, 3.0, 0.5, 1.0);
        let (p, c) = (0.33_f64, 0.22_f64);
        let jc = j.value(c);
        let d = theoretical_d(p, c, &params, 1.0, &j).unwrap();
        assert_relative_eq!(d, p * (2.0 * jc * jc).powf(-0.25), max_relative = 1e-14);
        let two = ModelParameters { p: 2.0, ..params };
        assert_relative_eq!(theoretical_d(p, c, &two, 1.7, &j).unwrap(), p * 1.7f64.powi(-2), max_relative = 1e-14);
        assert!(theoretical_d(p, 0.0, &params, 1.0, &j).is_err());
    }

    #[test]
    fn flat_run_diagnostics() {
        let g = make_euclidean_warp::<f64>();
        let params = ModelParameters::new(2, 2.5, 3.0, 0.5, 1.0);
        let sol = integrate(&params, &g, &g, &SolverConfig::default().with_s_max(1e3)).unwrap();
        let w = FitWindow::new(1.0, 1e3);
        let fit: PowerLawFit<f64> = fit_decay_exponent(&sol, w).unwrap();
        assert!(fit.slope.abs() < 1e-9);
        let er = check_energy_ratio(&sol, w);
        assert_relative_eq!(er.max_deviation, 0.5, max_relative = 1e-9);
        assert!(er.decay_slope.unwrap().abs() < 1e-9);
        let st = PointState::new(2.0, 1.0, 0.0, 0.0);
        assert_eq!(energy_ratio_excess(&st, &g, &g, 2), 0.0);
    }

    #[test]
    fn window_checks() {
        let g = make_euclidean_warp::<f64>();
        let params = ModelParameters::new(2, 2.5, 3.0, 0.5, 1.0);
        let sol = integrate(&params, &g, &g, &SolverConfig::default().with_s_max(1e3)).unwrap();
        assert!(matches!(
            fit_decay_exponent(&sol, FitWindow::new(10.0, 100.0)),
            Err(AsymptoticsError::InsufficientWindow { .. })
        ));
        assert!(fit_decay_exponent(&sol, FitWindow::new(10.0, 1e4)).is_err());
        assert!(matches!(plateau_values(&integrate(&params, &g, &g, &SolverConfig::default().with_s_max(10.0)).unwrap()),
            Err(AsymptoticsError::ShortRun { .. })));
    }
}
