//! The single-bubble ansatz `U = w_{ζ,μ} + π_{ζ,μ}`, its energy, and the
//! checks of the small-`μ` expansions of the energy and of `π`.
//!
//! `π` solves `−Δπ + λπ = −λ w` in the domain with `∂π/∂ν = −∂w/∂ν`. It is
//! assembled as `−λ P + h`, where `P` is the whole-space Yukawa potential of
//! `w` (radial about `ζ`) and `h` is a boundary-solver field fixing the flux.

mod constants;
mod d0;

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

pub use constants::{bubble_moments, constants, constants_by_quadrature, Constants};
pub use d0::{d0_solve, D0Solution};

use crate::domain::{Domain, VolumeQuadrature};
use crate::error::{Error, Result};
use crate::field_solver::{NeumannSolution, NeumannSolver, RadialNewtonPotential, RadialTable, SolverOptions};
use crate::kernels::{BubbleParams, Point3, BUBBLE_AMPLITUDE};
use crate::quadrature::NeumaierSum;
use crate::robin::RobinEvaluator;

/// A field that can be evaluated with its gradient at interior points.
pub trait ScalarField: Sync {
    fn value_and_grad(&self, x: &Point3) -> (f64, Point3);
}

/// `u ≡ c`.
#[derive(Clone, Copy, Debug)]
pub struct ConstantField(pub f64);

impl ScalarField for ConstantField {
    fn value_and_grad(&self, _: &Point3) -> (f64, Point3) {
        (self.0, Point3::zeros())
    }
}

/// `E_λ(u) = ½∫|∇u|² + (λ/2)∫u² − (1/6)∫u⁶` by the given quadrature.
pub fn energy(lambda: f64, u: &impl ScalarField, q: &VolumeQuadrature) -> f64 {
    let terms: Vec<f64> = q
        .nodes
        .par_iter()
        .zip(&q.weights)
        .map(|(x, w)| {
            let (v, g) = u.value_and_grad(x);
            let v2 = v * v;
            w * (0.5 * g.norm_squared() + 0.5 * lambda * v2 - v2 * v2 * v2 / 6.0)
        })
        .collect();
    terms.into_iter().collect::<NeumaierSum>().sum()
}

/// Solver size and quadrature level used by the energy checks.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergySettings {
    pub solver: SolverOptions,
    pub level: u32,
}

impl Default for EnergySettings {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), level: crate::defaults::QUADRATURE_LEVEL }
    }
}

type Source = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// `U_{ζ,μ} = w_{ζ,μ} + π_{ζ,μ}` for fixed `λ`.
pub struct BubbleAnsatz {
    lambda: f64,
    bubble: BubbleParams,
    potential: RadialNewtonPotential<Source>,
    table: RadialTable,
    correction: NeumannSolution,
    flux_residual: f64,
    peak: f64,
}

impl std::fmt::Debug for BubbleAnsatz {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BubbleAnsatz")
            .field("lambda", &self.lambda)
            .field("bubble", &self.bubble)
            .field("flux_residual", &self.flux_residual)
            .finish_non_exhaustive()
    }
}

/// Build `U_{ζ,μ}` with a fresh boundary solver.
pub fn build_ansatz(
    domain: &Domain,
    lambda: f64,
    zeta: Point3,
    mu: f64,
    options: SolverOptions,
) -> Result<BubbleAnsatz> {
    let solver = NeumannSolver::new(lambda, domain, options)?;
    BubbleAnsatz::new(&solver, zeta, mu, crate::defaults::MARGIN_FRACTION * domain.diameter())
}

impl BubbleAnsatz {
    /// Requires `ζ` at least `margin` from the boundary and `μ ∈ [1e-3, 0.5]·diameter`.
    pub fn new(solver: &NeumannSolver, zeta: Point3, mu: f64, margin: f64) -> Result<Self> {
        let domain = solver.domain();
        let lambda = solver.lambda();
        let diam = domain.diameter();
        if !(mu >= 1e-3 * diam && mu <= 0.5 * diam) {
            return Err(Error::InvalidParameter(format!(
                "bubble scale {mu} outside [{:.3e}, {:.3e}]",
                1e-3 * diam,
                0.5 * diam
            )));
        }
        let distance = domain.dist_to_boundary(&zeta)?;
        if distance < margin {
            return Err(Error::MarginViolation { distance, margin });
        }
        let bubble = BubbleParams::new(zeta, mu)?;
        let source: Source = Box::new(move |s| bubble.radial(s).0);
        let potential = RadialNewtonPotential::new(lambda, mu, source)?;
        let reach = (zeta - domain.center()).norm() + domain.outer_radius();
        let table = potential.tabulate(1.01 * reach);

        let mut ansatz = Self {
            lambda,
            bubble,
            potential,
            table,
            correction: solver.solve(|_, _| 0.0),
            flux_residual: 0.0,
            peak: 0.0,
        };
        ansatz.correction = solver.solve(|y, nu| -ansatz.bubble_part_flux(y, nu));
        let check = domain.boundary_sample(2 * solver.collocation().len() + 1)?;
        ansatz.flux_residual = check
            .points
            .iter()
            .zip(&check.normals)
            .map(|(y, nu)| ansatz.value_and_grad(y).1.dot(nu).abs())
            .fold(0.0, f64::max);
        ansatz.peak = ansatz.value_and_grad(&zeta).0;
        Ok(ansatz)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn bubble(&self) -> &BubbleParams {
        &self.bubble
    }

    pub fn zeta(&self) -> Point3 {
        self.bubble.center
    }

    pub fn mu(&self) -> f64 {
        self.bubble.scale
    }

    /// `max |∂U/∂ν|` over a boundary sample disjoint from the collocation points.
    pub fn flux_residual(&self) -> f64 {
        self.flux_residual
    }

    /// `U(ζ)`.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    /// Residual of the boundary fit of the correction field.
    pub fn correction(&self) -> &NeumannSolution {
        &self.correction
    }

    fn potential(&self, r: f64) -> (f64, f64) {
        self.table.eval(r).unwrap_or_else(|| self.potential.eval(r))
    }

    /// `∂_ν (w − λP)`, the flux the correction field has to cancel.
    fn bubble_part_flux(&self, y: &Point3, nu: &Point3) -> f64 {
        let d = y - self.zeta();
        let r = d.norm();
        let (_, dp) = self.potential(r);
        self.bubble.gradient(y).dot(nu) - self.lambda * dp * d.dot(nu) / r
    }

    /// `π(x)` with its gradient.
    pub fn pi_and_grad(&self, x: &Point3) -> (f64, Point3) {
        let d = x - self.zeta();
        let r = d.norm();
        let (p, dp) = self.potential(r);
        let radial = if r > 0.0 { d * (dp / r) } else { Point3::zeros() };
        let (h, dh) = self.correction.field.eval_with_grad(x);
        (h - self.lambda * p, dh - radial * self.lambda)
    }

    pub fn pi(&self, x: &Point3) -> f64 {
        self.pi_and_grad(x).0
    }

    pub fn value(&self, x: &Point3) -> f64 {
        self.value_and_grad(x).0
    }
}

impl ScalarField for BubbleAnsatz {
    fn value_and_grad(&self, x: &Point3) -> (f64, Point3) {
        let (p, dp) = self.pi_and_grad(x);
        (self.bubble.value(x) + p, self.bubble.gradient(x) + dp)
    }
}

/// One scale of an energy sweep.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExpansionRow {
    pub mu: f64,
    pub e_measured: f64,
    pub e_model: f64,
    pub remainder: f64,
    pub flux_residual: f64,
}

/// Measured energies against `a0 + a1 μ g − a2 μ² λ − a3 μ² g²`.
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub lambda: f64,
    pub zeta: Point3,
    pub g: f64,
    pub constants: Constants,
    pub rows: Vec<ExpansionRow>,
    /// Remainder magnitudes shrink with `μ`.
    pub monotone: bool,
    /// Log–log slope of `|remainder|` against `μ`; absent when not monotone.
    pub slope: Option<f64>,
}

impl ExpansionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mu,E_measured,E_model,remainder\n");
        for r in &self.rows {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", r.mu, r.e_measured, r.e_model, r.remainder);
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::json!({
            "lambda": self.lambda,
            "zeta": [self.zeta.x, self.zeta.y, self.zeta.z],
            "g": self.g,
            "constants": self.constants,
            "monotone": self.monotone,
            "slope": self.slope,
            "mu": self.rows.iter().map(|r| r.mu).collect::<Vec<_>>(),
        })
        .to_string()
    }
}

fn require_decreasing(mus: &[f64]) -> Result<()> {
    if mus.len() < 2 || mus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("need at least two scales, strictly decreasing".into()));
    }
    Ok(())
}

/// Least-squares slope of `log |y|` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn shrinking(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1].abs() < w[0].abs())
}

/// Energy of `U_{ζ,μ}` at quadrature level `level`.
pub fn ansatz_energy(ev: &RobinEvaluator, zeta: &Point3, mu: f64, level: u32) -> Result<(f64, BubbleAnsatz)> {
    let ansatz = BubbleAnsatz::new(ev.solver(), *zeta, mu, ev.margin())?;
    let q = ev.domain().volume_quadrature(zeta, mu, level)?;
    Ok((energy(ev.lambda(), &ansatz, &q), ansatz))
}

/// Energy remainders over a decreasing list of scales.
pub fn expansion_check(ev: &RobinEvaluator, zeta: &Point3, mus: &[f64], level: u32) -> Result<ExpansionReport> {
    require_decreasing(mus)?;
    let lambda = ev.lambda();
    let g = ev.g(zeta)?;
    let constants = constants();
    let rows = mus
        .iter()
        .map(|&mu| {
            let (e, ansatz) = ansatz_energy(ev, zeta, mu, level)?;
            let model = constants.model(lambda, g, mu);
            Ok(ExpansionRow {
                mu,
                e_measured: e,
                e_model: model,
                remainder: e - model,
                flux_residual: ansatz.flux_residual(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rem: Vec<f64> = rows.iter().map(|r| r.remainder).collect();
    let monotone = shrinking(&rem);
    let slope = monotone.then(|| log_log_slope(mus, &rem));
    Ok(ExpansionReport { lambda, zeta: *zeta, g, constants, rows, monotone, slope })
}

/// Residuals of `μ^{-1/2} π(x) = −4π 3^{1/4} H_λ(ζ, x) − μ D0((x − ζ)/μ)` at one probe.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeFit {
    pub point: Point3,
    /// With the `D0` term.
    pub residuals: Vec<f64>,
    /// Leading term only.
    pub leading_residuals: Vec<f64>,
    pub slope: Option<f64>,
    pub leading_slope: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PiExpansionReport {
    pub lambda: f64,
    pub zeta: Point3,
    pub mu: Vec<f64>,
    pub probes: Vec<ProbeFit>,
}

impl PiExpansionReport {
    pub fn min_slope(&self) -> Option<f64> {
        self.probes.iter().map(|p| p.slope).try_fold(f64::INFINITY, |m, s| s.map(|s| m.min(s)))
    }

    pub fn max_leading_slope(&self) -> Option<f64> {
        self.probes.iter().map(|p| p.leading_slope).try_fold(f64::NEG_INFINITY, |m, s| s.map(|s| m.max(s)))
    }
}

/// Check the two-term expansion of `π` at fixed probe points.
pub fn pi_expansion_check(
    ev: &RobinEvaluator,
    zeta: &Point3,
    mus: &[f64],
    probes: &[Point3],
    d0: &D0Solution,
) -> Result<PiExpansionReport> {
    require_decreasing(mus)?;
    if (d0.lambda - ev.lambda()).abs() > 1e-12 * ev.lambda() {
        return Err(Error::InvalidParameter(format!(
            "D0 profile built for lambda = {}, evaluator has {}",
            d0.lambda,
            ev.lambda()
        )));
    }
    let h: Vec<f64> = probes.iter().map(|x| ev.regular_part(zeta, x)).collect::<Result<_>>()?;
    let ansatze: Vec<BubbleAnsatz> =
        mus.iter().map(|&mu| BubbleAnsatz::new(ev.solver(), *zeta, mu, ev.margin())).collect::<Result<_>>()?;
    let probes = probes
        .iter()
        .zip(&h)
        .map(|(x, h)| {
            let mut residuals = Vec::new();
            let mut leading_residuals = Vec::new();
            for (mu, a) in mus.iter().zip(&ansatze) {
                let lead = a.pi(x) / mu.sqrt() + 4.0 * PI * BUBBLE_AMPLITUDE * h;
                leading_residuals.push(lead);
                residuals.push(lead + mu * d0.eval((x - zeta).norm() / mu));
            }
            let slope = shrinking(&residuals).then(|| log_log_slope(mus, &residuals));
            let leading_slope = shrinking(&leading_residuals).then(|| log_log_slope(mus, &leading_residuals));
            ProbeFit { point: *x, residuals, leading_residuals, slope, leading_slope }
        })
        .collect();
    Ok(PiExpansionReport { lambda: ev.lambda(), zeta: *zeta, mu: mus.to_vec(), probes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robin::{g_ball_analytic, BallSeries};
    use approx::assert_relative_eq;

    fn accurate() -> SolverOptions {
        SolverOptions { n: 1600, ..SolverOptions::default() }
    }

    #[test]
    fn energy_of_constants() {
        let ball = Domain::unit_ball();
        let q = ball.volume_quadrature(&Point3::new(0.1, 0.0, 0.0), 0.3, 2).unwrap();
        let vol = 4.0 * PI / 3.0;
        let c: f64 = 0.7;
        let lambda = 1.3;
        assert_relative_eq!(
            energy(lambda, &ConstantField(c), &q),
            (0.5 * lambda * c * c - c.powi(6) / 6.0) * vol,
            max_relative = 1e-10
        );
        let trivial = lambda.powf(0.25);
        assert_relative_eq!(
            energy(lambda, &ConstantField(trivial), &q),
            vol * lambda.powf(1.5) / 3.0,
            max_relative = 1e-10
        );
    }

    #[test]
    fn ansatz_solves_the_correction_problem() {
        let lambda = 1.5;
        let ball = Domain::unit_ball();
        let zeta = Point3::new(0.1, -0.05, 0.0);
        let a = build_ansatz(&ball, lambda, zeta, 0.1, accurate()).unwrap();
        assert!(a.flux_residual() <= 1e-5 * a.peak(), "{} vs {}", a.flux_residual(), a.peak());
        // −Δπ + λπ = −λw away from ζ
        let x = Point3::new(0.4, 0.2, -0.3);
        let h = 1e-3;
        let mut lap = -6.0 * a.pi(&x);
        for e in [Point3::x(), Point3::y(), Point3::z()] {
            lap += a.pi(&(x + e * h)) + a.pi(&(x - e * h));
        }
        lap /= h * h;
        let residual = -lap + lambda * a.pi(&x) + lambda * a.bubble().value(&x);
        assert!(residual.abs() < 1e-5, "{residual}");
        let (v, g) = a.value_and_grad(&x);
        let fd = (a.value(&(x + Point3::y() * 1e-6)) - a.value(&(x - Point3::y() * 1e-6))) / 2e-6;
        assert_relative_eq!(g.y, fd, max_relative = 1e-6);
        assert!(v.is_finite());
    }

    #[test]
    fn ansatz_preconditions() {
        let ball = Domain::unit_ball();
        assert!(build_ansatz(&ball, 1.0, Point3::zeros(), 1e-4, SolverOptions::default()).is_err());
        assert!(build_ansatz(&ball, 1.0, Point3::zeros(), 1.5, SolverOptions::default()).is_err());
        assert!(build_ansatz(&ball, 1.0, Point3::new(0.99, 0.0, 0.0), 0.1, SolverOptions::default()).is_err());
    }

    #[test]
    fn far_field_follows_the_green_function() {
        let lambda = 1.5;
        let ball = Domain::unit_ball();
        let mu = 0.02;
        let a = build_ansatz(&ball, lambda, Point3::zeros(), mu, accurate()).unwrap();
        let series = BallSeries::new(lambda, Point3::zeros(), 1.0, 100).unwrap();
        let ratios: Vec<f64> = [Point3::new(0.6, 0.0, 0.0), Point3::new(0.0, -0.7, 0.2), Point3::new(0.5, 0.5, 0.5)]
            .iter()
            .map(|x| a.value(x) / series.green(x, &Point3::zeros()).unwrap())
            .collect();
        let mass = 4.0 * PI * BUBBLE_AMPLITUDE * mu.sqrt();
        for r in &ratios {
            assert!((r / ratios[0] - 1.0).abs() < 0.02, "{ratios:?}");
            assert!((r / mass - 1.0).abs() < 0.05, "{r} vs {mass}");
        }
    }

    #[test]
    fn pi_at_the_centre_scales_with_g() {
        let lambda = 2.0;
        let ev = RobinEvaluator::new(lambda, &Domain::unit_ball(), accurate()).unwrap();
        let target = -4.0 * PI * BUBBLE_AMPLITUDE * g_ball_analytic(lambda).unwrap();
        let errs: Vec<f64> = [0.08, 0.04, 0.02]
            .iter()
            .map(|&mu| {
                let a = BubbleAnsatz::new(ev.solver(), Point3::zeros(), mu, ev.margin()).unwrap();
                (a.pi(&Point3::zeros()) / mu.sqrt() - target).abs()
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < 0.6 * w[0]), "{errs:?}");
    }

    #[test]
    fn quadrature_refinement_is_stable() {
        let ev = RobinEvaluator::new(1.5, &Domain::unit_ball(), accurate()).unwrap();
        let zeta = Point3::new(0.05, 0.0, 0.0);
        let (e2, _) = ansatz_energy(&ev, &zeta, 0.05, 2).unwrap();
        let (e3, _) = ansatz_energy(&ev, &zeta, 0.05, 3).unwrap();
        assert!(((e2 - e3) / e3).abs() < 1e-6, "{e2} vs {e3}");
    }

    #[test]
    fn report_formats() {
        let report = ExpansionReport {
            lambda: 1.5,
            zeta: Point3::zeros(),
            g: 0.01,
            constants: constants(),
            rows: vec![ExpansionRow { mu: 0.1, e_measured: 4.3, e_model: 4.29, remainder: 0.01, flux_residual: 0.0 }],
            monotone: true,
            slope: Some(3.0),
        };
        let csv = report.to_csv();
        assert!(csv.starts_with("mu,E_measured,E_model,remainder\n"));
        assert_eq!(csv.lines().count(), 2);
        let json: serde_json::Value = serde_json::from_str(&report.summary_json()).unwrap();
        assert_eq!(json["slope"], 3.0);
        assert!(require_decreasing(&[0.1, 0.2]).is_err());
        assert_relative_eq!(log_log_slope(&[1.0, 2.0, 4.0], &[3.0, 12.0, 48.0]), 2.0, max_relative = 1e-12);
    }
}
