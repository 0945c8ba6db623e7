use nalgebra::{DMatrix, DVector, Vector2};
use ode_solvers::dop_shared::OutputType;
use ode_solvers::{Dopri5, System};
use serde::Serialize;

use crate::error::{ensure_positive, Error, Result};
use crate::kernels::BUBBLE_AMPLITUDE;

/// Radial profile `D0` with `(r² D0')' = −λ 3^{1/4} (r²/√(1+r²) − r)` and `D0 → 0` at infinity.
///
/// `D0` is Lipschitz but not differentiable at the origin: `D0'(0⁺) = λ 3^{1/4} / 2`,
/// and regularity there is the condition `r² D0' → 0`.
#[derive(Clone, Debug, Serialize)]
pub struct D0Solution {
    pub lambda: f64,
    pub r: Vec<f64>,
    pub d0: Vec<f64>,
    pub slope: Vec<f64>,
    /// `c1, c2` in the tail `(c1 log r + c2) / r`.
    pub tail: [f64; 2],
    /// Constant removed so that the profile vanishes at infinity.
    pub shift: f64,
}

struct Radial {
    k: f64,
}

impl System<f64, Vector2<f64>> for Radial {
    // y = (D0, F) with F = r² D0'
    fn system(&self, r: f64, y: &Vector2<f64>, dy: &mut Vector2<f64>) {
        dy[0] = y[1] / (r * r);
        dy[1] = -self.k * r * (r / (1.0 + r * r).sqrt() - 1.0);
    }
}

const START: f64 = 1e-8;

/// Integrate outward from the origin with an adaptive Dormand–Prince pair,
/// then fix the additive constant from a tail fit on `[r_max/2, r_max]`.
pub fn d0_solve(lambda: f64, r_max: f64) -> Result<D0Solution> {
    ensure_positive("lambda", lambda)?;
    if r_max.is_nan() || r_max < 100.0 {
        return Err(Error::InvalidParameter(format!("r_max must be at least 100, got {r_max}")));
    }
    let k = lambda * BUBBLE_AMPLITUDE;
    // F ≈ k (r²/2 − r³/3) near the origin
    let y0 = Vector2::new(0.5 * k * START, k * START * START * (0.5 - START / 3.0));
    let mut stepper = Dopri5::from_param(
        Radial { k },
        START,
        r_max,
        0.0,
        y0,
        1e-12,
        1e-14,
        0.9,
        0.04,
        0.2,
        10.0,
        1.0,
        0.0,
        1_000_000,
        1000,
        OutputType::Sparse,
    );
    stepper.integrate().map_err(|e| Error::InvalidParameter(format!("radial integration failed: {e}")))?;
    let r = stepper.x_out().clone();
    let mut d0: Vec<f64> = stepper.y_out().iter().map(|y| y[0]).collect();
    let slope: Vec<f64> = stepper.y_out().iter().zip(&r).map(|(y, r)| y[1] / (r * r)).collect();

    let (rows, vals): (Vec<f64>, Vec<f64>) =
        r.iter().zip(&d0).filter(|(r, _)| **r >= 0.5 * r_max).map(|(r, d)| (*r, *d)).unzip();
    if rows.len() < 3 {
        return Err(Error::InvalidParameter("too few steps in the tail window".into()));
    }
    let a = DMatrix::from_fn(rows.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => rows[i].ln() / rows[i],
        _ => 1.0 / rows[i],
    });
    let fit =
        a.svd(true, true).solve(&DVector::from_vec(vals), 1e-14).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let shift = fit[0];
    d0.iter_mut().for_each(|d| *d -= shift);
    Ok(D0Solution { lambda, r, d0, slope, tail: [fit[1], fit[2]], shift })
}

impl D0Solution {
    /// `D0(r)`: cubic Hermite between steps, the fitted tail beyond the last one.
    pub fn eval(&self, r: f64) -> f64 {
        let last = self.r.len() - 1;
        if r <= self.r[0] {
            return self.d0[0] + self.slope[0] * (r - self.r[0]);
        }
        if r >= self.r[last] {
            return (self.tail[0] * r.ln() + self.tail[1]) / r;
        }
        let i = self.r.partition_point(|&x| x <= r) - 1;
        let (x0, x1) = (self.r[i], self.r[i + 1]);
        let h = x1 - x0;
        let t = (r - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.d0[i]
            + (t3 - 2.0 * t2 + t) * h * self.slope[i]
            + (-2.0 * t3 + 3.0 * t2) * self.d0[i + 1]
            + (t3 - t2) * h * self.slope[i + 1]
    }

    pub fn at_origin(&self) -> f64 {
        self.eval(0.0)
    }
}
