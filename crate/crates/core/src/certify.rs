//! Sign certificates for `Δ_p(H∘F)`.
//!
//! A radius is certified when the p-laplacian of the composition is negative
//! beyond a scale-relative margin in both its direct form and its
//! `K K̃ (A₁ + A₂ + A₃)` grouping, and the two evaluations agree.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{fit_power_law, window_nodes, AsymptoticsError, FitWindow, PowerLawFit};
use crate::geometry::ModelParameters;
use crate::operators::{composition_terms, decomposition, log_grid, ConvexProfile, Decomposition, OperatorError, PointState};
use crate::profile_ode::{evaluate, EvaluateError, ProfileSolution};
use crate::scalar::Real;

pub use crate::geometry::epsilon_bound;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("convex profile '{0}' has not been certified (run hessian_convexity_check first)")]
    NotCertified(String),
    #[error("scan range [{lo}, {hi}] not covered by solution range [{s_min}, {s_max}]")]
    RangeNotCovered { lo: f64, hi: f64, s_min: f64, s_max: f64 },
    #[error("invalid scan grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Evaluate(#[from] EvaluateError),
    #[error(transparent)]
    Window(#[from] AsymptoticsError),
}

/// Certification margin relative to the summed magnitude of the direct-form terms.
pub const SIGN_MARGIN: f64 = 1e-12;
/// Allowed relative disagreement between the two formulas.
pub const DUAL_FORMULA_TOL: f64 = 1e-8;
/// Density multiplier for the refinement pass around certified decades.
pub const REFINEMENT_FACTOR: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScanPoint<T: Real> {
    pub state: PointState<T>,
    /// `Δ_p(H∘F)` in direct form.
    pub direct: T,
    pub terms: Decomposition<T>,
    /// Absolute margin used for the sign test.
    pub margin: T,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Certificate<T: Real> {
    pub params: ModelParameters<T>,
    pub profile: String,
    pub s_lo: T,
    pub s_hi: T,
    pub samples_per_decade: usize,
    pub grid_points: usize,
    pub refinement_points: usize,
    /// Certified radii in increasing order (base grid and refinement merged).
    pub points: Vec<ScanPoint<T>>,
    pub first_negative_radius: Option<T>,
    /// `(s, Δ_p)` of the most negative certified value.
    pub most_negative: Option<(T, T)>,
    /// Fraction of base-grid points that were certified.
    pub negative_fraction: T,
    /// Consecutive evaluated radii between which the certification status flips.
    pub sign_changes: Vec<(T, T)>,
}

impl<T: Real> Certificate<T> {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn scan_point<T: Real>(
    solution: &ProfileSolution<T>,
    h: &ConvexProfile<T>,
    s: T,
) -> Result<ScanPoint<T>, CertifyError> {
    let (g, j, params) = (solution.domain_warp(), solution.target_warp(), &solution.params);
    let state = evaluate(solution, s)?;
    let direct = composition_terms(&state, h, g, j, params)?;
    let terms = decomposition(&state, h, g, j, params)?;
    let margin = T::lit(SIGN_MARGIN) * direct.magnitude;
    let agree = (direct.value - terms.product).abs()
        <= T::lit(DUAL_FORMULA_TOL) * direct.value.abs().max(terms.product.abs());
    let certified = direct.value < -margin && terms.product < -margin && agree;
    Ok(ScanPoint { state, direct: direct.value, terms, margin, certified })
}

fn scan_grid<T: Real>(
    solution: &ProfileSolution<T>,
    h: &ConvexProfile<T>,
    grid: &[T],
) -> Result<Vec<ScanPoint<T>>, CertifyError> {
    grid.par_iter().map(|&s| scan_point(solution, h, s)).collect()
}

/// Evaluates `Δ_p(H∘F)` on a log-uniform grid over `[s_lo, s_hi]` and certifies
/// the negative points. Decades containing a certified point are rescanned at
/// [`REFINEMENT_FACTOR`] times the density.
pub fn scan_sign<T: Real>(
    solution: &ProfileSolution<T>,
    h: &ConvexProfile<T>,
    s_lo: T,
    s_hi: T,
    samples_per_decade: usize,
) -> Result<Certificate<T>, CertifyError> {
    if !h.is_certified() {
        return Err(CertifyError::NotCertified(h.name().to_owned()));
    }
    if samples_per_decade == 0 || !(s_lo > T::zero() && s_hi > s_lo) {
        return Err(CertifyError::Grid(format!(
            "need 0 < s_lo < s_hi and samples_per_decade > 0, got [{s_lo}, {s_hi}], {samples_per_decade}"
        )));
    }
    if s_lo < solution.s_min() || s_hi > solution.s_max() {
        return Err(CertifyError::RangeNotCovered {
            lo: s_lo.to_f64_lossy(),
            hi: s_hi.to_f64_lossy(),
            s_min: solution.s_min().to_f64_lossy(),
            s_max: solution.s_max().to_f64_lossy(),
        });
    }

    let grid = log_grid(s_lo, s_hi, samples_per_decade);
    let base = scan_grid(solution, h, &grid)?;
    let certified_base = base.iter().filter(|p| p.certified).count();

    let mut decades: Vec<i32> = base
        .iter()
        .filter(|p| p.certified)
        .map(|p| p.state.s.log10().floor().to_i32().unwrap_or(0))
        .collect();
    decades.dedup();
    let mut refined_grid = Vec::new();
    for d in decades {
        let lo = T::lit(10.0).powi(d).max(s_lo);
        let hi = T::lit(10.0).powi(d + 1).min(s_hi);
        if hi > lo {
            refined_grid.extend(log_grid(lo, hi, samples_per_decade * REFINEMENT_FACTOR));
        }
    }
    let refined = scan_grid(solution, h, &refined_grid)?;

    let mut all: Vec<ScanPoint<T>> = base.iter().chain(refined.iter()).copied().collect();
    all.sort_by(|a, b| a.state.s.partial_cmp(&b.state.s).expect("finite radii"));
    all.dedup_by(|a, b| a.state.s == b.state.s);

    let sign_changes = all
        .windows(2)
        .filter(|w| w[0].certified != w[1].certified)
        .map(|w| (w[0].state.s, w[1].state.s))
        .collect();
    let points: Vec<ScanPoint<T>> = all.into_iter().filter(|p| p.certified).collect();
    let most_negative = points
        .iter()
        .min_by(|a, b| a.direct.partial_cmp(&b.direct).expect("finite values"))
        .map(|p| (p.state.s, p.direct));

    Ok(Certificate {
        params: solution.params,
        profile: h.name().to_owned(),
        s_lo,
        s_hi,
        samples_per_decade,
        grid_points: grid.len(),
        refinement_points: refined_grid.len(),
        first_negative_radius: points.first().map(|p| p.state.s),
        most_negative,
        negative_fraction: T::from_usize_lossy(certified_base) / T::from_usize_lossy(grid.len()),
        points,
        sign_changes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TermFit<T: Real> {
    pub term: String,
    /// `None` when the term is not strictly positive on the window.
    pub fit: Option<PowerLawFit<T>>,
    pub theory_slope: T,
    pub slope_rel_deviation: Option<T>,
    pub theory_prefactor: Option<T>,
    pub prefactor_rel_deviation: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TermDiagnostics<T: Real> {
    pub window: FitWindow<T>,
    pub profile: String,
    pub terms: Vec<TermFit<T>>,
    /// Terms at the last node in the window.
    pub far_end: Decomposition<T>,
    /// `|A₂| > A₁` and `|A₂| > A₃` at the far end.
    pub a2_dominates: bool,
}

/// Known plateau `ĉ` and decay constant `D`, used for theoretical prefactors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AsymptoticConstants<T: Real> {
    pub c_hat: T,
    pub d: T,
    pub c1: T,
}

/// Log-log decay fits of `A₁`, `|A₂|`, `A₃` and `g′f′/g` over `window`.
pub fn analyze_terms<T: Real>(
    solution: &ProfileSolution<T>,
    h: &ConvexProfile<T>,
    window: FitWindow<T>,
    constants: Option<AsymptoticConstants<T>>,
) -> Result<TermDiagnostics<T>, CertifyError> {
    let range = window_nodes(solution, window)?;
    let (g, j, params) = (solution.domain_warp(), solution.target_warp(), &solution.params);
    let s: Vec<T> = solution.s[range.clone()].to_vec();
    let mut cols: [Vec<T>; 4] = Default::default();
    let mut far_end = None;
    for i in range {
        let st = solution.node(i);
        let d = decomposition(&st, h, g, j, params)?;
        let gv = g.eval(st.s);
        cols[0].push(d.a1);
        cols[1].push(d.a2.abs());
        cols[2].push(d.a3);
        cols[3].push(gv.d1 * st.f1 / gv.value);
        far_end = Some(d);
    }
    let far_end = far_end.expect("window has nodes");

    let n = params.n_real();
    let pm2 = params.p - T::lit(2.0);
    let e = params.decay_exponent();
    let theory_prefactors: [Option<T>; 4] = match constants {
        Some(c) => {
            let jv = j.eval(c.c_hat);
            let (_, hp, hpp) = h.eval(c.c_hat);
            [
                Some(n * jv.d1 * jv.value * jv.value / (c.c1 * c.c1)),
                Some(pm2 * jv.value * params.delta * c.d * (params.reduced_dimension() - T::one())),
                if hpp > T::zero() {
                    Some((params.p - T::one()) * c.d * c.d * hpp / hp * jv.value)
                } else {
                    None
                },
                Some(params.delta * c.d),
            ]
        }
        None => [None; 4],
    };
    let slopes = [params.a1_exponent(), params.a2_exponent(), params.a3_exponent(), e - T::one()];
    let names = ["A1", "|A2|", "A3", "g'f'/g"];

    let terms = (0..4)
        .map(|k| {
            let fit = fit_power_law(&s, &cols[k]).ok();
            let rel = |a: T, b: T| ((a - b) / b).abs();
            TermFit {
                term: names[k].to_owned(),
                slope_rel_deviation: fit.map(|f| rel(f.slope, slopes[k])),
                prefactor_rel_deviation: match (fit, theory_prefactors[k]) {
                    (Some(f), Some(t)) => Some(rel(f.prefactor, t)),
                    _ => None,
                },
                fit,
                theory_slope: slopes[k],
                theory_prefactor: theory_prefactors[k],
            }
        })
        .collect();

    let a2 = far_end.a2.abs();
    Ok(TermDiagnostics {
        window,
        profile: h.name().to_owned(),
        terms,
        a2_dominates: a2 > far_end.a1 && a2 > far_end.a3,
        far_end,
    })
}

/// `1 − (n − (p−2)) < 0`, i.e. `p < n + 1`: the condition making `A₂`
/// eventually negative (given `D > 0`).
pub fn a2_sign_condition<T: Real>(params: &ModelParameters<T>) -> bool {
    T::one() - params.reduced_dimension() < T::zero()
}
