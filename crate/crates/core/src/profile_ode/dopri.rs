//! Dormand–Prince 5(4) stepper with a PI step-size controller, specialised to
//! the two-component system `(f, f′)`.

use crate::scalar::Real;

pub(crate) type State<T> = [T; 2];

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th-order weights and the embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy<T: Real>(y: &State<T>, h: T, terms: &[(f64, &State<T>)]) -> State<T> {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        for &(c, k) in terms {
            acc += T::lit(c) * k[i];
        }
        *o += h * acc;
    }
    out
}

pub(crate) struct Trial<T> {
    pub y_new: State<T>,
    /// Derivative at the new point (first stage of the next step).
    pub k_new: State<T>,
    /// Scaled RMS error estimate; accept when `<= 1`.
    pub err: T,
    pub evals: usize,
}

/// One trial step from `(s, y)` with first stage `k1`. Returns `Err` if the
/// right-hand side failed at any stage.
pub(crate) fn trial_step<T, F, E>(
    rhs: &mut F,
    s: T,
    y: &State<T>,
    k1: &State<T>,
    h: T,
    rel_tol: T,
    abs_tol: T,
) -> Result<Trial<T>, E>
where
    T: Real,
    F: FnMut(T, &State<T>) -> Result<State<T>, E>,
{
    let k2 = rhs(s + T::lit(C2) * h, &axpy(y, h, &[(A21, k1)]))?;
    let k3 = rhs(s + T::lit(C3) * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = rhs(s + T::lit(C4) * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = rhs(
        s + T::lit(C5) * h,
        &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    )?;
    let k6 = rhs(
        s + h,
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    )?;
    let y_new = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = rhs(s + h, &y_new)?;

    let mut sq = T::zero();
    for i in 0..2 {
        let e = h
            * (T::lit(E1) * k1[i]
                + T::lit(E3) * k3[i]
                + T::lit(E4) * k4[i]
                + T::lit(E5) * k5[i]
                + T::lit(E6) * k6[i]
                + T::lit(E7) * k7[i]);
        let scale = abs_tol + rel_tol * y[i].abs().max(y_new[i].abs());
        let r = e / scale;
        sq += r * r;
    }
    let err = (sq / T::lit(2.0)).sqrt();
    Ok(Trial { y_new, k_new: k7, err, evals: 6 })
}

/// PI controller (Gustafsson), in the form used by Hairer's DOPRI5.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PiController<T> {
    expo: T,
    beta: T,
    safety: T,
    fac_min: T,
    fac_max: T,
    err_old: T,
}

impl<T: Real> PiController<T> {
    pub fn new() -> Self {
        let beta = T::lit(0.04);
        Self {
            expo: T::lit(0.2) - beta * T::lit(0.75),
            beta,
            safety: T::lit(0.9),
            fac_min: T::lit(0.2),
            fac_max: T::lit(10.0),
            err_old: T::lit(1e-4),
        }
    }

    /// Step-size factor after an accepted step.
    pub fn accept(&mut self, err: T) -> T {
        let err = err.max(T::lit(1e-10));
        let fac = self.safety * err.powf(-self.expo) * self.err_old.powf(self.beta);
        self.err_old = err.max(T::lit(1e-4));
        fac.max(self.fac_min).min(self.fac_max)
    }

    /// Step-size factor after a rejected step (never grows).
    pub fn reject(&self, err: T) -> T {
        (self.safety * err.powf(-self.expo)).max(self.fac_min).min(T::one())
    }
}
