//! Closed-form scalar kernels.
//!
//! * the Laplace fundamental solution `Γ(x, y) = 1 / (4π|x − y|)`,
//! * the Yukawa kernel `Φ_λ(x, y) = exp(−√λ |x − y|) / (4π|x − y|)`, the
//!   free-space fundamental solution of `−Δ + λ`,
//! * the standard critical bubble `w_{ζ,μ}(x) = 3^{1/4} μ^{1/2} / √(μ² + |x − ζ|²)`
//!   together with its derivatives in `x`, `ζ` and `μ`.

use std::f64::consts::PI;

use crate::error::{ensure_positive, Error, Result};

/// A point (or vector) in three-dimensional space.
pub type Point3 = nalgebra::Vector3<f64>;

/// `3^{1/4}`, the amplitude of the standard bubble.
pub const BUBBLE_AMPLITUDE: f64 = 1.316_074_012_952_492_5;

const FOUR_PI: f64 = 4.0 * PI;

/// Below this value of `√λ r` the difference `Γ − Φ_λ` is taken from its Taylor series.
const TAYLOR_SWITCH: f64 = 1e-4;

fn separation(x: &Point3, y: &Point3) -> Result<f64> {
    let r = (x - y).norm();
    if r == 0.0 {
        Err(Error::CoincidentPoints)
    } else {
        Ok(r)
    }
}

/// Laplace fundamental solution `1 / (4π|x − y|)`.
pub fn laplace_gamma(x: &Point3, y: &Point3) -> Result<f64> {
    Ok(1.0 / (FOUR_PI * separation(x, y)?))
}

/// Yukawa kernel `exp(−√λ r) / (4π r)` with `r = |x − y|`.
pub fn yukawa_phi(lambda: f64, x: &Point3, y: &Point3) -> Result<f64> {
    ensure_positive("lambda", lambda)?;
    Ok(yukawa_radial(lambda.sqrt(), separation(x, y)?))
}

/// Normal derivative of `y ↦ Φ_λ(x, y)` at `y` along the unit vector `normal`.
pub fn yukawa_phi_normal(lambda: f64, x: &Point3, y: &Point3, normal: &Point3) -> Result<f64> {
    ensure_positive("lambda", lambda)?;
    separation(x, y)?;
    Ok(yukawa_grad(lambda.sqrt(), &(y - x)).dot(normal))
}

/// `Φ_λ` as a function of the distance, parameterised by `κ = √λ`.
#[inline]
pub(crate) fn yukawa_radial(kappa: f64, r: f64) -> f64 {
    (-kappa * r).exp() / (FOUR_PI * r)
}

/// Gradient of `d ↦ Φ(|d|)` at the separation vector `d`.
#[inline]
pub(crate) fn yukawa_grad(kappa: f64, d: &Point3) -> Point3 {
    let r = d.norm();
    let kr = kappa * r;
    d * (-(-kr).exp() * (1.0 + kr) / (FOUR_PI * r * r * r))
}

/// `(Γ − Φ_λ)` at distance `r ≥ 0`, continuous through `r = 0`.
pub fn gamma_minus_phi(lambda: f64, r: f64) -> f64 {
    let kappa = lambda.sqrt();
    let kr = kappa * r;
    if kr < TAYLOR_SWITCH {
        // (1 − e^{−t}) / t = 1 − t/2 + t²/6 − t³/24 + ...
        kappa / FOUR_PI * (1.0 - kr / 2.0 + kr * kr / 6.0 - kr * kr * kr / 24.0)
    } else {
        -(-kr).exp_m1() / (FOUR_PI * r)
    }
}

/// `lim_{r→0} (Γ − Φ_λ)(r) = √λ / (4π)`.
pub fn diag_limit(lambda: f64) -> f64 {
    lambda.sqrt() / FOUR_PI
}

/// Centre and scale of a standard bubble `w_{ζ,μ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BubbleParams {
    pub center: Point3,
    pub scale: f64,
}

impl BubbleParams {
    pub fn new(center: Point3, scale: f64) -> Result<Self> {
        ensure_positive("bubble scale", scale)?;
        Ok(Self { center, scale })
    }

    /// `w_{ζ,μ}(x)`.
    pub fn value(&self, x: &Point3) -> f64 {
        let r2 = (x - self.center).norm_squared();
        BUBBLE_AMPLITUDE * self.scale.sqrt() / (self.scale * self.scale + r2).sqrt()
    }

    /// Radial profile `w(r)` and `dw/dr`.
    pub fn radial(&self, r: f64) -> (f64, f64) {
        let mu = self.scale;
        let s = mu * mu + r * r;
        let value = BUBBLE_AMPLITUDE * mu.sqrt() / s.sqrt();
        (value, -value * r / s)
    }

    /// `∇_x w_{ζ,μ}(x)`.
    pub fn gradient(&self, x: &Point3) -> Point3 {
        let d = x - self.center;
        let s = self.scale * self.scale + d.norm_squared();
        d * (-BUBBLE_AMPLITUDE * self.scale.sqrt() / (s * s.sqrt()))
    }

    /// `∂w/∂ζ_i`, which equals `−∂w/∂x_i`.
    pub fn d_center(&self, x: &Point3) -> Point3 {
        -self.gradient(x)
    }

    /// `∂w/∂μ`.
    pub fn d_scale(&self, x: &Point3) -> f64 {
        let mu = self.scale;
        let r2 = (x - self.center).norm_squared();
        let s = mu * mu + r2;
        BUBBLE_AMPLITUDE * (r2 - mu * mu) / (2.0 * mu.sqrt() * s * s.sqrt())
    }
}

/// `w_{ζ,μ}(x)` for the given parameters.
pub fn bubble_w(params: &BubbleParams, x: &Point3) -> f64 {
    params.value(x)
}
