//! Test-only reference computations, written independently of the library's
//! solver path.
#![allow(dead_code)]

use pharmonic::geometry::{make_domain_warp, make_euclidean_warp, make_target_warp};
use pharmonic::{ModelParameters, ProfileSolution, SolverConfig, WarpingFunction};

pub fn canonical_params() -> ModelParameters {
    ModelParameters::new(2, 2.5, 3.0, 0.5, 1.0)
}

pub fn family_warps(params: &ModelParameters) -> (WarpingFunction, WarpingFunction) {
    (make_domain_warp(params.delta).unwrap(), make_target_warp(params.sigma).unwrap())
}

pub fn flat_warps() -> (WarpingFunction, WarpingFunction) {
    (make_euclidean_warp(), make_euclidean_warp())
}

pub fn family_run(s_max: f64) -> ProfileSolution {
    let params = canonical_params();
    let (g, j) = family_warps(&params);
    pharmonic::profile_ode::integrate(&params, &g, &j, &SolverConfig::default().with_s_max(s_max)).unwrap()
}

/// Fixed-step classical RK4 for the shifted-power family in the variables
/// `(f, Q)` with `Q = gⁿ |dF|^{p−2} f′`, stepping uniformly in `x = ln s`.
///
/// Uses `Q′ = n |dF|^{p−2} g^{n−2} j j′` (the divergence form of the
/// equation) and recovers `f′` from `Q` by Newton iteration, so it shares
/// neither the state variables nor the `f″` formula with the library solver.
pub struct DivergenceFormOracle {
    n: f64,
    p: f64,
    delta: f64,
    sigma: f64,
    alpha: f64,
}

impl DivergenceFormOracle {
    pub fn new(params: &ModelParameters) -> Self {
        Self { n: params.n as f64, p: params.p, delta: params.delta, sigma: params.sigma, alpha: params.alpha }
    }

    fn g(&self, s: f64) -> f64 {
        let d = self.delta;
        (s + d.powf(-1.0 / (d - 1.0))).powf(d) - d.powf(-d / (d - 1.0))
    }

    fn j(&self, t: f64) -> (f64, f64) {
        let sg = self.sigma;
        let shift = sg.powf(1.0 / (1.0 - sg));
        ((t + shift).powf(sg) - sg.powf(sg / (1.0 - sg)), sg * (t + shift).powf(sg - 1.0))
    }

    /// Solves `Q = gⁿ (f′² + A)^{(p−2)/2} f′` for `f′ > 0`, where `A = n j²/g²`.
    pub fn slope_from_q(&self, s: f64, f: f64, q: f64) -> f64 {
        let g = self.g(s);
        let (j, _) = self.j(f);
        let a = self.n * j * j / (g * g);
        let target = (q / g.powf(self.n)).ln();
        let half = (self.p - 2.0) / 2.0;
        // phi(u) = u + half·ln(e^{2u} + A) is increasing with slope in [1, p−1]
        let mut u = (target - half * a.ln()).min(target / (self.p - 1.0));
        for _ in 0..100 {
            let e2 = (2.0 * u).exp();
            let phi = u + half * (e2 + a).ln() - target;
            let dphi = 1.0 + (self.p - 2.0) * e2 / (e2 + a);
            let du = phi / dphi;
            u -= du;
            if du.abs() < 1e-15 {
                break;
            }
        }
        u.exp()
    }

    fn q_of(&self, s: f64, f: f64, f1: f64) -> f64 {
        let g = self.g(s);
        let (j, _) = self.j(f);
        let energy = f1 * f1 + self.n * j * j / (g * g);
        g.powf(self.n) * energy.powf((self.p - 2.0) / 2.0) * f1
    }

    fn rhs(&self, x: f64, y: [f64; 2]) -> [f64; 2] {
        let s = x.exp();
        let f1 = self.slope_from_q(s, y[0], y[1]);
        let g = self.g(s);
        let (j, jp) = self.j(y[0]);
        let energy = f1 * f1 + self.n * j * j / (g * g);
        let dq = self.n * energy.powf((self.p - 2.0) / 2.0) * g.powf(self.n - 2.0) * j * jp;
        [s * f1, s * dq]
    }

    /// `(f, f′)` at each of the increasing radii `targets`, from Taylor data at `s0`,
    /// using `steps_per_unit` RK4 steps per unit of `ln s`.
    pub fn integrate(&self, s0: f64, targets: &[f64], steps_per_unit: f64) -> Vec<(f64, f64)> {
        let mut x = s0.ln();
        let mut y = [self.alpha * s0, self.q_of(s0, self.alpha * s0, self.alpha)];
        let mut out = Vec::with_capacity(targets.len());
        for &t in targets {
            let xt = t.ln();
            let steps = ((xt - x) * steps_per_unit).ceil() as usize;
            let h = (xt - x) / steps as f64;
            for _ in 0..steps {
                let k1 = self.rhs(x, y);
                let k2 = self.rhs(x + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
                let k3 = self.rhs(x + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
                let k4 = self.rhs(x + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
                for i in 0..2 {
                    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                x += h;
            }
            x = xt;
            out.push((y[0], self.slope_from_q(t, y[0], y[1])));
        }
        out
    }

    /// Richardson extrapolation `(16 y_{h/2} − y_h)/15` of two RK4 runs.
    pub fn extrapolated(&self, s0: f64, targets: &[f64], steps_per_unit: f64) -> Vec<(f64, f64)> {
        let coarse = self.integrate(s0, targets, steps_per_unit);
        let fine = self.integrate(s0, targets, 2.0 * steps_per_unit);
        coarse
            .iter()
            .zip(&fine)
            .map(|(c, f)| ((16.0 * f.0 - c.0) / 15.0, (16.0 * f.1 - c.1) / 15.0))
            .collect()
    }
}

/// Relative error with a guard for exact zeros.
pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}
