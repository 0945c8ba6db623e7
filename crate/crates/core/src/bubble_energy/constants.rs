use std::f64::consts::PI;

use serde::Serialize;

use crate::kernels::BUBBLE_AMPLITUDE;
use crate::quadrature::{integrate_half_line, GaussLegendre};

/// Coefficients of the energy expansion
/// `E ≈ a0 + a1 μ g − a2 μ² λ − a3 μ² g²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Constants {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl Constants {
    /// `γ = a1 / (2 a2)`, the factor in `μ = γ g / λ`.
    pub fn gamma(&self) -> f64 {
        self.a1 / (2.0 * self.a2)
    }

    /// The expansion at scale `mu`, with `g = g_λ(ζ)`.
    pub fn model(&self, lambda: f64, g: f64, mu: f64) -> f64 {
        self.a0 + self.a1 * mu * g - self.a2 * mu * mu * lambda - self.a3 * mu * mu * g * g
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.a0, self.a1, self.a2, self.a3]
    }
}

/// Closed forms.
pub fn constants() -> Constants {
    let s3 = 3f64.sqrt();
    let pi2 = PI * PI;
    Constants { a0: 0.25 * s3 * pi2, a1: 8.0 * s3 * pi2, a2: s3 * pi2, a3: 120.0 * s3 * pi2 * pi2 }
}

/// Whole-space integrals of `w_{0,1}^6`, `w_{0,1}^5` and `w_{0,1}^4`.
pub fn bubble_moments() -> [f64; 3] {
    [6, 5, 4].map(|p| radial_integral(|r| w01(r).powi(p)))
}

/// The constants recomputed from their defining integrals by radial quadrature.
pub fn constants_by_quadrature() -> Constants {
    let [m6, m5, m4] = bubble_moments();
    let c = BUBBLE_AMPLITUDE;
    let a2 = 0.5
        * c
        * radial_integral(|r| {
            let s = (1.0 + r * r).sqrt();
            // 1/r − 1/√(1+r²) without cancellation
            let gap = 1.0 / (r * s * (s + r));
            w01(r) * gap + 0.5 * w01(r).powi(5) * r
        });
    Constants { a0: m6 / 3.0, a1: 2.0 * PI * c * m5, a2, a3: 40.0 * PI * PI * 3f64.sqrt() * m4 }
}

fn w01(r: f64) -> f64 {
    BUBBLE_AMPLITUDE / (1.0 + r * r).sqrt()
}

/// `∫_{ℝ³} f(|z|) dz`.
fn radial_integral(f: impl Fn(f64) -> f64) -> f64 {
    let rule = GaussLegendre::new(40);
    4.0 * PI * integrate_half_line(&rule, 64, 1.0, |r| r * r * f(r))
}
