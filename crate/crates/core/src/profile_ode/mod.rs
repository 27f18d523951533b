//! Radial profile of a rotationally symmetric p-harmonic map.
//!
//! Integrates the first-order system `(f, f′)′ = (f′, f″(s, f, f′))` from a
//! small radius `s_start` out to `s_max`, with `f″` resolved algebraically from
//! the p-harmonicity equation. The equation is singular at `s = 0` (the warp
//! vanishes there), so the run starts from first-order Taylor data.

mod dopri;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{validate_parameters, ModelParameters, WarpSpec, WarpingFunction};
use crate::operators::{
    energy_density_sq, p_tension_residual, solve_second_derivative, OperatorError, PointState,
};
use crate::scalar::Real;

use dopri::{trial_step, PiController, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct SolverConfig<T: Real> {
    pub s_max: T,
    pub rel_tol: T,
    pub abs_tol: T,
    pub s_start: T,
    /// Budget of step attempts (accepted plus rejected).
    pub max_steps: usize,
    /// Keep every `store_stride`-th accepted step as an output node.
    pub store_stride: usize,
    /// Upper bound on `h / s`. Steps grow with the radius, so accepted
    /// nodes are close to log-uniform once this bound is active.
    pub max_step_ratio: T,
    /// Integrate even when the parameters fail validation.
    pub allow_inadmissible: bool,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            s_max: T::lit(1e4),
            rel_tol: T::lit(1e-9),
            abs_tol: T::lit(1e-12),
            s_start: T::lit(1e-6),
            max_steps: 1_000_000,
            store_stride: 1,
            max_step_ratio: T::lit(5e-3),
            allow_inadmissible: false,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn with_s_max(mut self, s_max: T) -> Self {
        self.s_max = s_max;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let tol_max = T::lit(1e-2);
        if !(self.s_start > T::zero() && self.s_start < tol_max) {
            return Err(format!("s_start must lie in (0, 1e-2), got {}", self.s_start));
        }
        if !(self.s_max > self.s_start) || !self.s_max.is_finite() {
            return Err(format!("s_max = {} must exceed s_start = {}", self.s_max, self.s_start));
        }
        if !(self.rel_tol > T::zero() && self.rel_tol < tol_max) {
            return Err(format!("rel_tol must lie in (0, 1e-2), got {}", self.rel_tol));
        }
        if !(self.abs_tol > T::zero() && self.abs_tol < tol_max) {
            return Err(format!("abs_tol must lie in (0, 1e-2), got {}", self.abs_tol));
        }
        if self.store_stride == 0 || self.max_steps == 0 {
            return Err("store_stride and max_steps must be positive".to_owned());
        }
        if !(self.max_step_ratio > T::zero() && self.max_step_ratio <= T::one()) {
            return Err(format!("max_step_ratio must lie in (0, 1], got {}", self.max_step_ratio));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SolverStats<T: Real> {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest `|p_tension_residual|` over the stored nodes.
    pub max_residual: T,
}

#[derive(Debug, Error)]
pub enum SolveError<T: Real> {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("parameters are inadmissible: {}", .0.join("; "))]
    Inadmissible(Vec<String>),
    #[error("step budget of {budget} attempts exhausted at s = {s}")]
    StepBudget { s: T, budget: usize, partial: Box<ProfileSolution<T>> },
    #[error("step size underflow at s = {s}")]
    StepUnderflow { s: T, partial: Box<ProfileSolution<T>> },
    #[error("radial equation degenerates at s = {s}: {source}")]
    Degenerate {
        s: T,
        #[source]
        source: OperatorError,
        partial: Box<ProfileSolution<T>>,
    },
    #[error("f' lost positivity at s = {s} (f' = {slope})")]
    Monotonicity { s: T, slope: T, partial: Box<ProfileSolution<T>> },
    #[error("non-finite state at s = {s}")]
    NonFinite { s: T, partial: Box<ProfileSolution<T>> },
}

impl<T: Real> SolveError<T> {
    /// Nodes computed before the failure, if integration had started.
    pub fn partial(&self) -> Option<&ProfileSolution<T>> {
        match self {
            SolveError::Config(_) | SolveError::Inadmissible(_) => None,
            SolveError::StepBudget { partial, .. }
            | SolveError::StepUnderflow { partial, .. }
            | SolveError::Degenerate { partial, .. }
            | SolveError::Monotonicity { partial, .. }
            | SolveError::NonFinite { partial, .. } => Some(partial),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluateError {
    #[error("radius {s} outside the solution range [{lo}, {hi}]")]
    OutOfRange { s: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Computed radial profile on a strictly increasing set of nodes.
#[derive(Debug, Clone)]
pub struct ProfileSolution<T: Real> {
    pub s: Vec<T>,
    pub f: Vec<T>,
    pub f1: Vec<T>,
    pub f2: Vec<T>,
    pub params: ModelParameters<T>,
    pub config: SolverConfig<T>,
    pub stats: SolverStats<T>,
    g: WarpingFunction<T>,
    j: WarpingFunction<T>,
}

/// Serializable form of a [`ProfileSolution`] built from built-in warps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SolutionDump<T: Real> {
    pub params: ModelParameters<T>,
    pub config: SolverConfig<T>,
    pub stats: SolverStats<T>,
    pub domain_warp: WarpSpec<T>,
    pub target_warp: WarpSpec<T>,
    pub s: Vec<T>,
    pub f: Vec<T>,
    pub f1: Vec<T>,
    pub f2: Vec<T>,
}

impl<T: Real> ProfileSolution<T> {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn domain_warp(&self) -> &WarpingFunction<T> {
        &self.g
    }

    pub fn target_warp(&self) -> &WarpingFunction<T> {
        &self.j
    }

    pub fn s_min(&self) -> T {
        self.s[0]
    }

    pub fn s_max(&self) -> T {
        *self.s.last().expect("solution has at least one node")
    }

    pub fn node(&self, i: usize) -> PointState<T> {
        PointState::new(self.s[i], self.f[i], self.f1[i], self.f2[i])
    }

    pub fn nodes(&self) -> impl Iterator<Item = PointState<T>> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    /// Indices of nodes with `lo <= s <= hi`.
    pub fn window(&self, lo: T, hi: T) -> std::ops::Range<usize> {
        let start = self.s.partition_point(|&x| x < lo);
        let end = self.s.partition_point(|&x| x <= hi);
        start..end.max(start)
    }

    pub fn to_dump(&self) -> Option<SolutionDump<T>> {
        Some(SolutionDump {
            params: self.params,
            config: self.config,
            stats: self.stats,
            domain_warp: self.g.spec()?,
            target_warp: self.j.spec()?,
            s: self.s.clone(),
            f: self.f.clone(),
            f1: self.f1.clone(),
            f2: self.f2.clone(),
        })
    }

    pub fn from_dump(dump: SolutionDump<T>) -> Result<Self, crate::geometry::GeometryError> {
        Ok(Self {
            g: WarpingFunction::from_spec(dump.domain_warp)?,
            j: WarpingFunction::from_spec(dump.target_warp)?,
            s: dump.s,
            f: dump.f,
            f1: dump.f1,
            f2: dump.f2,
            params: dump.params,
            config: dump.config,
            stats: dump.stats,
        })
    }
}

/// First-order Taylor data `(α s₀, α)` at the start radius.
pub fn series_start<T: Real>(params: &ModelParameters<T>, s_start: T) -> (T, T) {
    (params.alpha * s_start, params.alpha)
}

/// Integrates the radial equation with `f(0) = 0`, `f′(0) = α`.
pub fn integrate<T: Real>(
    params: &ModelParameters<T>,
    g: &WarpingFunction<T>,
    j: &WarpingFunction<T>,
    config: &SolverConfig<T>,
) -> Result<ProfileSolution<T>, SolveError<T>> {
    config.validate().map_err(SolveError::Config)?;
    if !config.allow_inadmissible {
        let report = validate_parameters(params);
        if !report.all_passed() {
            return Err(SolveError::Inadmissible(report.failure_messages()));
        }
    }

    let mut rhs = |s: T, y: &State<T>| -> Result<State<T>, OperatorError> {
        let f2 = solve_second_derivative(s, y[0], y[1], g, j, params)?;
        Ok([y[1], f2])
    };

    let mut sol = ProfileSolution {
        s: Vec::new(),
        f: Vec::new(),
        f1: Vec::new(),
        f2: Vec::new(),
        params: *params,
        config: *config,
        stats: SolverStats::default(),
        g: g.clone(),
        j: j.clone(),
    };
    let partial = |sol: &ProfileSolution<T>| Box::new(sol.clone());

    let (f0, f10) = series_start(params, config.s_start);
    let mut s = config.s_start;
    let mut y: State<T> = [f0, f10];
    let mut k = match rhs(s, &y) {
        Ok(k) => k,
        Err(source) => return Err(SolveError::Degenerate { s, source, partial: partial(&sol) }),
    };
    sol.stats.evaluations += 1;
    push_node(&mut sol, s, &y, k[1]);

    let mut controller = PiController::new();
    let mut h = config.max_step_ratio * s;
    let mut attempts = 0usize;
    let mut since_store = 0usize;
    let s_end = config.s_max;

    while s < s_end {
        if attempts >= config.max_steps {
            finish(&mut sol, s, &y, k[1], since_store);
            return Err(SolveError::StepBudget { s, budget: config.max_steps, partial: partial(&sol) });
        }
        attempts += 1;
        h = h.min(config.max_step_ratio * s);
        let mut last = false;
        if s + h >= s_end || (s_end - s - h) < T::lit(1e-3) * h {
            h = s_end - s;
            last = true;
        }
        if !(h > s * T::epsilon() * T::lit(16.0)) {
            finish(&mut sol, s, &y, k[1], since_store);
            return Err(SolveError::StepUnderflow { s, partial: partial(&sol) });
        }

        let trial = match trial_step(&mut rhs, s, &y, &k, h, config.rel_tol, config.abs_tol) {
            Ok(t) => t,
            Err(source) => {
                // a trial stage left the admissible region; retry with a smaller step
                sol.stats.rejected += 1;
                if h < s * T::lit(1e-12) {
                    finish(&mut sol, s, &y, k[1], since_store);
                    return Err(SolveError::Degenerate { s, source, partial: partial(&sol) });
                }
                h *= T::lit(0.25);
                continue;
            }
        };
        sol.stats.evaluations += trial.evals;

        if !trial.err.is_finite() {
            sol.stats.rejected += 1;
            h *= T::lit(0.25);
            continue;
        }
        if trial.err > T::one() {
            sol.stats.rejected += 1;
            h *= controller.reject(trial.err);
            continue;
        }

        let factor = controller.accept(trial.err);
        s = if last { s_end } else { s + h };
        y = trial.y_new;
        k = trial.k_new;
        sol.stats.accepted += 1;
        since_store += 1;

        if !(y[0].is_finite() && y[1].is_finite() && k[1].is_finite()) {
            finish(&mut sol, s, &y, k[1], since_store);
            return Err(SolveError::NonFinite { s, partial: partial(&sol) });
        }
        if !(y[1] > T::zero()) {
            return Err(SolveError::Monotonicity { s, slope: y[1], partial: partial(&sol) });
        }
        if since_store >= config.store_stride || s >= s_end {
            push_node(&mut sol, s, &y, k[1]);
            since_store = 0;
        }
        h *= factor;
    }

    let mut max_residual = T::zero();
    for i in 0..sol.len() {
        if let Ok(r) = p_tension_residual(&sol.node(i), g, j, params) {
            max_residual = max_residual.max(r.abs());
        }
    }
    sol.stats.max_residual = max_residual;
    Ok(sol)
}

fn push_node<T: Real>(sol: &mut ProfileSolution<T>, s: T, y: &State<T>, f2: T) {
    sol.s.push(s);
    sol.f.push(y[0]);
    sol.f1.push(y[1]);
    sol.f2.push(f2);
}

fn finish<T: Real>(sol: &mut ProfileSolution<T>, s: T, y: &State<T>, f2: T, since_store: usize) {
    if since_store > 0 && sol.s.last().is_none_or(|&last| s > last) {
        push_node(sol, s, y, f2);
    }
}

/// Dense output: cubic Hermite interpolation of `f` (with `f′`) and of `f′`
/// (with `f″`) on the bracketing interval, then `f″` recomputed from the
/// radial equation so the returned state is on-shell.
pub fn evaluate<T: Real>(solution: &ProfileSolution<T>, s: T) -> Result<PointState<T>, EvaluateError> {
    let lo = solution.s_min();
    let hi = solution.s_max();
    if !(s >= lo && s <= hi) {
        return Err(EvaluateError::OutOfRange { s: s.to_f64_lossy(), lo: lo.to_f64_lossy(), hi: hi.to_f64_lossy() });
    }
    let idx = solution.s.partition_point(|&x| x < s);
    if idx < solution.len() && solution.s[idx] == s {
        return Ok(solution.node(idx));
    }
    let (a, b) = (idx - 1, idx);
    let h = solution.s[b] - solution.s[a];
    let t = (s - solution.s[a]) / h;
    let f = hermite(t, h, solution.f[a], solution.f1[a], solution.f[b], solution.f1[b]);
    let f1 = hermite(t, h, solution.f1[a], solution.f2[a], solution.f1[b], solution.f2[b]);
    let f2 = solve_second_derivative(s, f, f1, &solution.g, &solution.j, &solution.params)?;
    Ok(PointState::new(s, f, f1, f2))
}

#[inline]
fn hermite<T: Real>(t: T, h: T, y0: T, d0: T, y1: T, d1: T) -> T {
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = two * t3 - three * t2 + T::one();
    let h10 = t3 - two * t2 + t;
    let h01 = -two * t3 + three * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// `Q(s) = g(s)ⁿ |dF|^{p−2}(s) f′(s)` at one state. Its derivative is
/// `n |dF|^{p−2} g^{n−2} j(f) j′(f) ≥ 0` along any solution.
pub fn monotone_quantity_at<T: Real>(
    state: &PointState<T>,
    g: &WarpingFunction<T>,
    j: &WarpingFunction<T>,
    params: &ModelParameters<T>,
) -> Result<T, OperatorError> {
    let energy = energy_density_sq(state, g, j, params.n)?;
    let gn = g.value(state.s).powi(params.n as i32);
    Ok(gn * energy.powf((params.p - T::lit(2.0)) / T::lit(2.0)) * state.f1)
}

/// `Q_i` at every node.
pub fn monotone_quantity<T: Real>(solution: &ProfileSolution<T>) -> Vec<T> {
    solution
        .nodes()
        .map(|st| monotone_quantity_at(&st, &solution.g, &solution.j, &solution.params).unwrap_or_else(|_| T::nan()))
        .collect()
}

/// Outcome of re-running the integration from `s_start / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StartValidation<T: Real> {
    pub radius: T,
    pub f_full: T,
    pub f_half: T,
    pub difference: T,
    pub tolerance: T,
    pub passed: bool,
}

/// Checks that the Taylor start is accurate enough: halving `s_start` must move
/// `f(1)` by at most `10·rel_tol`.
pub fn validate_start<T: Real>(
    params: &ModelParameters<T>,
    g: &WarpingFunction<T>,
    j: &WarpingFunction<T>,
    config: &SolverConfig<T>,
) -> Result<StartValidation<T>, SolveError<T>> {
    let radius = T::one();
    let base = SolverConfig { s_max: radius, ..*config };
    let half = SolverConfig { s_start: config.s_start / T::lit(2.0), ..base };
    let f_full = *integrate(params, g, j, &base)?.f.last().expect("nonempty");
    let f_half = *integrate(params, g, j, &half)?.f.last().expect("nonempty");
    let difference = (f_full - f_half).abs();
    let tolerance = T::lit(10.0) * config.rel_tol;
    Ok(StartValidation { radius, f_full, f_half, difference, tolerance, passed: difference <= tolerance })
}
