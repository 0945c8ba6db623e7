//! Interior Neumann problems for `−Δu + λu = 0` by the method of fundamental
//! solutions, and Newton potentials for volume sources.
//!
//! A [`NeumannSolver`] places Yukawa charges on an inflated copy of the
//! boundary and factorises the collocation matrix of their normal derivatives
//! with a truncated SVD. Every [`HelmholtzField`] it returns is a finite sum of
//! exterior Yukawa kernels, so it solves the homogeneous equation exactly in
//! the domain; only the boundary flux is approximate, and the residual is
//! reported with each solve.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{sphere_rule, BoundarySample, Domain, VolumeQuadrature};
use crate::error::{ensure_positive, Error, Result};
use crate::kernels::{yukawa_grad, yukawa_radial, Point3};
use crate::quadrature::{graded_edges, GaussLegendre, NeumaierSum};

/// Tunables of the boundary solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Number of collocation points on the boundary.
    pub n: usize,
    /// Charges sit at `center + (1 + inflation)(x_b − center)` for boundary points `x_b`.
    pub inflation: f64,
    /// Collocation points per charge.
    pub oversampling: f64,
    /// Singular values below `svd_cut · σ_max` are discarded.
    pub svd_cut: f64,
    /// Relative flux residual above which a solve is flagged.
    pub residual_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            n: crate::defaults::COLLOCATION_POINTS,
            inflation: crate::defaults::CHARGE_INFLATION,
            oversampling: crate::defaults::OVERSAMPLING,
            svd_cut: crate::defaults::SVD_CUT,
            residual_threshold: crate::defaults::RESIDUAL_THRESHOLD,
        }
    }
}

/// Conditioning summary of a factorised solver, exportable as JSON.
#[derive(Clone, Debug, Serialize)]
pub struct SolverDiagnostics {
    pub lambda: f64,
    pub collocation_points: usize,
    pub charges: usize,
    pub rank: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub sigma_min_kept: f64,
    pub svd_cut: f64,
    /// Singular values at log-spaced ranks, for a quick look at the decay.
    pub spectrum_summary: Vec<(usize, f64)>,
}

impl SolverDiagnostics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagnostics serialise")
    }
}

/// Factorised method-of-fundamental-solutions solver for one `(λ, Ω)` pair.
#[derive(Debug)]
pub struct NeumannSolver {
    lambda: f64,
    kappa: f64,
    domain: Domain,
    options: SolverOptions,
    charges: Arc<Vec<Point3>>,
    collocation: BoundarySample,
    matrix: DMatrix<f64>,
    /// Truncated `Uᵀ` (rank × n).
    u_t: DMatrix<f64>,
    /// Truncated `V Σ⁺` (m × rank).
    v_sinv: DMatrix<f64>,
    singular_values: Vec<f64>,
    rank: usize,
}

/// `u(x) = Σ_k c_k Φ_λ(x − p_k)` with all `p_k` outside the domain.
#[derive(Clone, Debug)]
pub struct HelmholtzField {
    kappa: f64,
    charges: Arc<Vec<Point3>>,
    coefficients: Vec<f64>,
}

/// A solved field with its boundary fit diagnostics.
#[derive(Clone, Debug)]
pub struct NeumannSolution {
    pub field: HelmholtzField,
    /// `max_j |∂_ν u(y_j) − flux(y_j)|` over the collocation points.
    pub max_residual: f64,
    /// `max_residual / max_j |flux(y_j)|` (or the absolute value for zero data).
    pub relative_residual: f64,
    /// Set when `relative_residual` exceeds the configured threshold.
    pub flagged: bool,
}

impl HelmholtzField {
    pub fn zero(kappa: f64, charges: Arc<Vec<Point3>>) -> Self {
        let coefficients = vec![0.0; charges.len()];
        Self { kappa, charges, coefficients }
    }

    pub fn lambda(&self) -> f64 {
        self.kappa * self.kappa
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn charges(&self) -> &[Point3] {
        &self.charges
    }

    pub fn eval(&self, x: &Point3) -> f64 {
        self.charges.iter().zip(&self.coefficients).map(|(p, c)| c * yukawa_radial(self.kappa, (x - p).norm())).sum()
    }

    pub fn eval_grad(&self, x: &Point3) -> Point3 {
        self.charges
            .iter()
            .zip(&self.coefficients)
            .fold(Point3::zeros(), |acc, (p, c)| acc + yukawa_grad(self.kappa, &(x - p)) * *c)
    }

    pub fn eval_with_grad(&self, x: &Point3) -> (f64, Point3) {
        let mut v = 0.0;
        let mut g = Point3::zeros();
        for (p, c) in self.charges.iter().zip(&self.coefficients) {
            let d = x - p;
            let r = d.norm();
            let kr = self.kappa * r;
            let e = (-kr).exp() / (4.0 * PI * r);
            v += c * e;
            g -= d * (c * e * (1.0 + kr) / (r * r));
        }
        (v, g)
    }
}

impl NeumannSolver {
    /// Build and factorise the solver for `−Δu + λu = 0` on `domain`.
    pub fn new(lambda: f64, domain: &Domain, options: SolverOptions) -> Result<Self> {
        ensure_positive("lambda", lambda)?;
        if options.n < 50 {
            return Err(Error::InvalidParameter(format!("solver needs n >= 50, got {}", options.n)));
        }
        if !(options.inflation > 0.0 && options.inflation <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "charge inflation must lie in (0, 1], got {}",
                options.inflation
            )));
        }
        ensure_positive("oversampling", options.oversampling)?;
        ensure_positive("svd cut", options.svd_cut)?;
        let kappa = lambda.sqrt();
        let collocation = domain.boundary_sample(options.n)?;
        let m = ((options.n as f64 / options.oversampling).round() as usize).max(12);
        let center = domain.center();
        let charges: Vec<Point3> = domain
            .boundary_sample(m)?
            .points
            .iter()
            .map(|x| center + (x - center) * (1.0 + options.inflation))
            .collect();
        if let Some(bad) = charges.iter().find(|c| domain.contains(c)) {
            return Err(Error::Geometry(format!(
                "charge point ({:.4}, {:.4}, {:.4}) falls inside the domain",
                bad.x, bad.y, bad.z
            )));
        }

        let n = collocation.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let y = collocation.points[j];
                let nu = collocation.normals[j];
                charges.iter().map(|c| yukawa_grad(kappa, &(y - c)).dot(&nu)).collect()
            })
            .collect();
        let matrix = DMatrix::from_fn(n, m, |j, k| rows[j][k]);

        let svd = matrix.clone().svd(true, true);
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let sigma_max = singular_values[0];
        let rank = singular_values.iter().take_while(|&&s| s > options.svd_cut * sigma_max).count();
        let u = svd.u.as_ref().expect("left singular vectors requested");
        let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
        let u_t = DMatrix::from_fn(rank, n, |i, j| u[(j, order[i])]);
        let v_sinv = DMatrix::from_fn(m, rank, |k, i| v_t[(order[i], k)] / singular_values[i]);

        Ok(Self {
            lambda,
            kappa,
            domain: domain.clone(),
            options,
            charges: Arc::new(charges),
            collocation,
            matrix,
            u_t,
            v_sinv,
            singular_values,
            rank,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn charges(&self) -> &[Point3] {
        &self.charges
    }

    pub fn collocation(&self) -> &BoundarySample {
        &self.collocation
    }

    pub fn diagnostics(&self) -> SolverDiagnostics {
        let s = &self.singular_values;
        let mut summary = Vec::new();
        let mut i = 1usize;
        while i <= s.len() {
            summary.push((i, s[i - 1]));
            i *= 2;
        }
        if summary.last().map(|&(k, _)| k) != Some(s.len()) {
            summary.push((s.len(), s[s.len() - 1]));
        }
        SolverDiagnostics {
            lambda: self.lambda,
            collocation_points: self.collocation.len(),
            charges: self.charges.len(),
            rank: self.rank,
            sigma_max: s[0],
            sigma_min: s[s.len() - 1],
            sigma_min_kept: s[self.rank - 1],
            svd_cut: self.options.svd_cut,
            spectrum_summary: summary,
        }
    }

    /// Least-squares fit of `∂u/∂ν = flux(y, ν)` at the collocation points.
    pub fn solve(&self, flux: impl Fn(&Point3, &Point3) -> f64) -> NeumannSolution {
        let data: Vec<f64> =
            self.collocation.points.iter().zip(&self.collocation.normals).map(|(y, nu)| flux(y, nu)).collect();
        self.solve_data(&data)
    }

    /// As [`NeumannSolver::solve`] with the flux already sampled at the collocation points.
    pub fn solve_data(&self, data: &[f64]) -> NeumannSolution {
        assert_eq!(data.len(), self.collocation.len(), "flux data length");
        let b = DVector::from_column_slice(data);
        let coeffs = &self.v_sinv * (&self.u_t * &b);
        let fitted = &self.matrix * &coeffs;
        let max_residual = fitted.iter().zip(data).map(|(f, d)| (f - d).abs()).fold(0.0, f64::max);
        let scale = data.iter().map(|d| d.abs()).fold(0.0, f64::max);
        let relative_residual = if scale > 0.0 { max_residual / scale } else { max_residual };
        NeumannSolution {
            field: HelmholtzField {
                kappa: self.kappa,
                charges: Arc::clone(&self.charges),
                coefficients: coeffs.iter().copied().collect(),
            },
            max_residual,
            relative_residual,
            flagged: relative_residual > self.options.residual_threshold,
        }
    }

    /// Regular field `u_y` with `∂_ν u_y = −∂_ν Φ_λ(· − y)`, so that
    /// `G_λ(·, y) = Φ_λ(· − y) + u_y` has zero flux.
    pub fn regular_part_field(&self, source: &Point3) -> NeumannSolution {
        let kappa = self.kappa;
        self.solve(|x, nu| -yukawa_grad(kappa, &(x - source)).dot(nu))
    }

    /// Neumann Green's function `G_λ(x, y)` for `x ≠ y`.
    pub fn green(&self, x: &Point3, y: &Point3) -> Result<f64> {
        let r = (x - y).norm();
        if r == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        Ok(yukawa_radial(self.kappa, r) + self.regular_part_field(y).field.eval(x))
    }
}

/// `∫_Ω Φ_λ(x − y) source(y) dy`.
///
/// The weakly singular part is removed by subtracting `source(x)`: the
/// remainder `Φ_λ(x − y)[source(y) − source(x)]` goes through `q`, and
/// `source(x) ∫_Ω Φ_λ(x − y) dy` is done by a polar rule around `x`, whose
/// radial integrals are closed-form.
pub fn newton_potential(
    lambda: f64,
    domain: &Domain,
    source: impl Fn(&Point3) -> f64 + Sync,
    x: &Point3,
    q: &VolumeQuadrature,
) -> Result<f64> {
    ensure_positive("lambda", lambda)?;
    if !domain.contains(x) {
        return Err(Error::OutsideDomain(*x));
    }
    let kappa = lambda.sqrt();
    let fx = source(x);
    let smooth: NeumaierSum = q
        .nodes
        .iter()
        .zip(&q.weights)
        .map(|(y, w)| {
            let r = (x - y).norm();
            if r == 0.0 {
                0.0
            } else {
                w * yukawa_radial(kappa, r) * (source(y) - fx)
            }
        })
        .collect();
    let local = if fx == 0.0 { 0.0 } else { fx * kernel_mass(kappa, domain, x) };
    Ok(smooth.sum() + local)
}

/// `∫_Ω Φ_λ(x − y) dy` by a polar rule centred at `x`.
pub fn kernel_mass(kappa: f64, domain: &Domain, x: &Point3) -> f64 {
    sphere_rule(24)
        .iter()
        .map(|(u, w)| {
            let reach = domain.ray_exit(x, u);
            let kr = kappa * reach;
            // ∫_0^R e^{−κr} r / (4π) dr
            w * (-(-kr).exp_m1() - kr * (-kr).exp()) / (4.0 * PI * kappa * kappa)
        })
        .collect::<NeumaierSum>()
        .sum()
}

/// Whole-space Yukawa potential `P = Φ_λ * f` of a source that is radial
/// about some centre: `−ΔP + λP = f` in ℝ³, decaying at infinity.
///
/// With `u = rP` the radial problem is `−u'' + λu = r f`, solved by its
/// half-line Green's function, so `P(r)` is a pair of one-dimensional
/// integrals evaluated on panels graded at the source's length `scale`.
pub struct RadialNewtonPotential<F> {
    kappa: f64,
    scale: f64,
    source: F,
    rule: GaussLegendre,
}

impl<F: Fn(f64) -> f64> RadialNewtonPotential<F> {
    pub fn new(lambda: f64, scale: f64, source: F) -> Result<Self> {
        ensure_positive("lambda", lambda)?;
        ensure_positive("source scale", scale)?;
        Ok(Self { kappa: lambda.sqrt(), scale, source, rule: GaussLegendre::new(20) })
    }

    fn edges(&self, a: f64, b: f64) -> Vec<f64> {
        let mut e = graded_edges(0.0, b, self.scale / 8.0, 2.0);
        e.retain(|&t| t > a);
        e.insert(0, a);
        e
    }

    fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = NeumaierSum::default();
        for w in self.edges(a, b).windows(2) {
            for (s, ws) in self.rule.mapped(w[0], w[1]) {
                acc.add(ws * f(s));
            }
        }
        acc.sum()
    }

    /// `(P(r), P'(r))`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let k = self.kappa;
        let tail = 45.0 / k;
        if r <= 1e-10 * self.scale {
            let p0 = self.integrate(0.0, tail, |s| (-k * s).exp() * s * (self.source)(s));
            return (p0, 0.0);
        }
        // e^{−κr} ∫_0^r sinh(κs) s f(s) ds
        let inner =
            self.integrate(0.0, r, |s| -0.5 * (-k * (r - s)).exp() * (-2.0 * k * s).exp_m1() * s * (self.source)(s));
        // e^{κr} ∫_r^∞ e^{−κs} s f(s) ds
        let outer = self.integrate(r, r + tail, |s| (-k * (s - r)).exp() * s * (self.source)(s));
        let z = k * r;
        let sh = -0.5 * (-2.0 * z).exp_m1();
        let value = (inner + sh * outer) / z;
        // d/dr of the same representation, arranged so nothing cancels as r → 0
        let slope = -inner * (1.0 + z) / (k * r * r) + outer * (-z).exp() * k * k * r * sinhc_defect(z);
        (value, slope)
    }
}

/// `(z cosh z − sinh z) / z³`.
fn sinhc_defect(z: f64) -> f64 {
    if z < 0.1 {
        let z2 = z * z;
        1.0 / 3.0 + z2 * (1.0 / 30.0 + z2 * (1.0 / 840.0 + z2 / 45360.0))
    } else {
        (z * z.cosh() - z.sinh()) / (z * z * z)
    }
}

impl<F: Fn(f64) -> f64 + Sync> RadialNewtonPotential<F> {
    /// Piecewise Chebyshev table of `(P, P')` on `[0, r_max]`, on the same graded panels.
    pub fn tabulate(&self, r_max: f64) -> RadialTable {
        let edges = graded_edges(0.0, r_max, self.scale / 8.0, 2.0);
        let panels: Vec<ChebPanel> = edges
            .windows(2)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|w| ChebPanel::sample(w[0], w[1], |r| self.eval(r)))
            .collect();
        RadialTable { edges, panels }
    }
}

const CHEB_POINTS: usize = 24;

#[derive(Clone, Debug)]
struct ChebPanel {
    nodes: [f64; CHEB_POINTS],
    values: [(f64, f64); CHEB_POINTS],
}

impl ChebPanel {
    fn sample(a: f64, b: f64, f: impl Fn(f64) -> (f64, f64)) -> Self {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let nodes: [f64; CHEB_POINTS] =
            std::array::from_fn(|j| mid - half * (PI * j as f64 / (CHEB_POINTS - 1) as f64).cos());
        let values = nodes.map(f);
        Self { nodes, values }
    }

    /// Barycentric interpolation on Chebyshev points of the second kind.
    fn eval(&self, r: f64) -> (f64, f64) {
        let (mut num0, mut num1, mut den) = (0.0, 0.0, 0.0);
        for (j, (x, v)) in self.nodes.iter().zip(&self.values).enumerate() {
            let d = r - x;
            if d == 0.0 {
                return *v;
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == CHEB_POINTS - 1 {
                w *= 0.5;
            }
            let c = w / d;
            num0 += c * v.0;
            num1 += c * v.1;
            den += c;
        }
        (num0 / den, num1 / den)
    }
}

/// Tabulated radial potential `r ↦ (P(r), P'(r))`.
#[derive(Clone, Debug)]
pub struct RadialTable {
    edges: Vec<f64>,
    panels: Vec<ChebPanel>,
}

impl RadialTable {
    pub fn r_max(&self) -> f64 {
        *self.edges.last().expect("table has edges")
    }

    /// `None` beyond the tabulated range.
    pub fn eval(&self, r: f64) -> Option<(f64, f64)> {
        if !(0.0..=self.r_max()).contains(&r) {
            return None;
        }
        let i = self.edges.partition_point(|&e| e <= r).clamp(1, self.panels.len()) - 1;
        Some(self.panels[i].eval(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DEFAULT_QUADRATURE_LEVEL;
    use approx::assert_relative_eq;

    fn opts(n: usize) -> SolverOptions {
        SolverOptions { n, ..SolverOptions::default() }
    }

    #[test]
    fn construction_checks() {
        let ball = Domain::unit_ball();
        let s = NeumannSolver::new(1.0, &ball, opts(400)).unwrap();
        let d = s.diagnostics();
        assert_eq!(d.collocation_points, 400);
        assert_eq!(d.charges, 200);
        assert!(d.rank > 0 && d.sigma_min_kept >= d.svd_cut * d.sigma_max);
        assert!(d.to_json().contains("\"rank\""));
        for bad in [0.0, -0.5, 1.5] {
            let o = SolverOptions { inflation: bad, ..opts(400) };
            assert!(matches!(NeumannSolver::new(1.0, &ball, o), Err(Error::InvalidParameter(_))));
        }
        assert!(NeumannSolver::new(1.0, &ball, opts(20)).is_err());
        assert!(NeumannSolver::new(0.0, &ball, opts(100)).is_err());
    }

    #[test]
    fn zero_flux_gives_zero_field() {
        let s = NeumannSolver::new(1.0, &Domain::unit_ball(), opts(200)).unwrap();
        let sol = s.solve(|_, _| 0.0);
        assert!(sol.field.coefficients().iter().all(|&c| c == 0.0));
        assert_eq!(sol.field.eval(&Point3::new(0.2, 0.1, 0.0)), 0.0);
        assert!(!sol.flagged);
    }

    #[test]
    fn recovers_radial_solution_in_ball() {
        let lambda: f64 = 1.0;
        let k = lambda.sqrt();
        let exact = |x: &Point3| {
            let r = x.norm();
            (k * r).sinh() / r
        };
        let flux = |y: &Point3, nu: &Point3| {
            let r = y.norm();
            let d = (k * r * (k * r).cosh() - (k * r).sinh()) / (r * r);
            d * y.dot(nu) / r
        };
        let s = NeumannSolver::new(lambda, &Domain::unit_ball(), opts(1600)).unwrap();
        let sol = s.solve(flux);
        assert!(sol.max_residual < 1e-5, "residual {}", sol.max_residual);
        for x in [Point3::new(0.1, 0.2, -0.3), Point3::new(0.6, 0.0, 0.1), Point3::new(-0.2, -0.7, 0.4)] {
            assert!((sol.field.eval(&x) - exact(&x)).abs() < 1e-7);
        }
        let wide = SolverOptions { inflation: 1.0, ..opts(1600) };
        let sol = NeumannSolver::new(lambda, &Domain::unit_ball(), wide).unwrap().solve(flux);
        assert!(sol.max_residual < 1e-8, "residual {}", sol.max_residual);
    }

    #[test]
    fn fields_satisfy_the_homogeneous_equation() {
        let lambda = 2.0;
        let s = NeumannSolver::new(lambda, &Domain::unit_ball(), opts(200)).unwrap();
        let field = s.regular_part_field(&Point3::new(0.3, -0.1, 0.2)).field;
        let h = 1e-3;
        for x in [Point3::new(0.1, 0.0, 0.0), Point3::new(-0.4, 0.3, 0.2)] {
            let u = field.eval(&x);
            let mut lap = -6.0 * u;
            for e in [Point3::x(), Point3::y(), Point3::z()] {
                lap += field.eval(&(x + e * h)) + field.eval(&(x - e * h));
            }
            lap /= h * h;
            let scale = field.coefficients().iter().map(|c| c.abs()).fold(0.0, f64::max).max(u.abs());
            assert!((-lap + lambda * u).abs() <= 1e-6 * scale.max(1.0));
            let (v, g) = field.eval_with_grad(&x);
            assert_relative_eq!(v, u, max_relative = 1e-13);
            let fd = (field.eval(&(x + Point3::x() * 1e-6)) - field.eval(&(x - Point3::x() * 1e-6))) / 2e-6;
            assert!((g.x - fd).abs() < 1e-7 * (1.0 + g.norm()));
            assert_relative_eq!(field.eval_grad(&x), g, max_relative = 1e-12);
        }
    }

    #[test]
    fn green_function_is_symmetric() {
        let s = NeumannSolver::new(1.5, &Domain::unit_ball(), opts(1600)).unwrap();
        let pairs = [
            (Point3::new(0.2, 0.1, 0.0), Point3::new(-0.3, 0.2, 0.1)),
            (Point3::new(0.0, 0.0, 0.4), Point3::new(0.1, -0.35, 0.0)),
        ];
        for (x, y) in pairs {
            let gxy = s.green(&x, &y).unwrap();
            let gyx = s.green(&y, &x).unwrap();
            assert!((gxy - gyx).abs() < 1e-6, "{gxy} vs {gyx}");
        }
    }

    #[test]
    fn boundary_residual_decreases_with_n() {
        let lambda = 1.0;
        let src = Point3::new(0.4, 0.1, -0.2);
        let mut last = f64::INFINITY;
        for n in [100, 200, 400, 800] {
            let s = NeumannSolver::new(lambda, &Domain::unit_ball(), opts(n)).unwrap();
            let r = s.regular_part_field(&src).max_residual;
            assert!(r < last, "n={n}: {r} !< {last}");
            last = r;
        }
    }

    #[test]
    fn newton_potential_of_constant_source() {
        let ball = Domain::unit_ball();
        let q = ball.volume_quadrature(&Point3::zeros(), 0.2, DEFAULT_QUADRATURE_LEVEL).unwrap();
        assert_eq!(newton_potential(1.0, &ball, |_| 0.0, &Point3::zeros(), &q).unwrap(), 0.0);
        for lambda in [0.5f64, 2.0] {
            // radial ODE oracle: P = 1/λ + c sinh(κr)/r inside, matched to the free-space potential,
            // whose centre value is (1 − e^{−κ}(1 + κ)) / λ
            let k = lambda.sqrt();
            let exact = (1.0 - (-k).exp() * (1.0 + k)) / lambda;
            let got = newton_potential(lambda, &ball, |_| 1.0, &Point3::zeros(), &q).unwrap();
            assert_relative_eq!(got, exact, max_relative = 1e-12);
        }
        assert!(newton_potential(1.0, &ball, |_| 1.0, &Point3::new(0.0, 3.0, 0.0), &q).is_err());
    }

    #[test]
    fn newton_potential_off_peak_matches_centred_rule() {
        let ball = Domain::unit_ball();
        let src = |y: &Point3| 1.0 + y.x * y.x - 0.5 * y.y;
        let x = Point3::new(0.3, -0.2, 0.1);
        let centred = ball.volume_quadrature(&x, 0.3, 3).unwrap();
        let elsewhere = ball.volume_quadrature(&Point3::new(-0.1, 0.2, 0.0), 0.3, 4).unwrap();
        let a = newton_potential(1.0, &ball, src, &x, &centred).unwrap();
        let b = newton_potential(1.0, &ball, src, &x, &elsewhere).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-4);
    }

    #[test]
    fn newton_potential_translation_invariance() {
        let big = Domain::ball(Point3::zeros(), 10.0).unwrap();
        let v = Point3::new(0.2, 0.1, -0.1);
        let value = |a: Point3| {
            let src = move |y: &Point3| (-(y - a).norm_squared() * 4.0).exp();
            let q = big.volume_quadrature(&a, 0.5, 3).unwrap();
            newton_potential(1.0, &big, src, &(a + v), &q).unwrap()
        };
        let a = value(Point3::new(0.0, 0.0, 0.0));
        let b = value(Point3::new(1.0, -2.0, 0.5));
        assert_relative_eq!(a, b, max_relative = 1e-6);
    }

    #[test]
    fn radial_table_reproduces_direct_evaluation() {
        let mu: f64 = 0.03;
        let w = |s: f64| 1.3 * mu.sqrt() / (mu * mu + s * s).sqrt();
        let p = RadialNewtonPotential::new(1.5, mu, w).unwrap();
        let table = p.tabulate(2.5);
        for r in [0.0, 1e-5, 0.003, 0.0299, 0.2, 1.0, 2.5] {
            let (a, da) = table.eval(r).unwrap();
            let (b, db) = p.eval(r);
            assert!((a - b).abs() < 1e-12 * b.abs(), "{r}: {a} vs {b}");
            assert!((da - db).abs() < 1e-10 * (1.0 + db.abs()), "{r}: {da} vs {db}");
        }
        assert!(table.eval(2.6).is_none());
    }

    #[test]
    fn radial_potential_of_constant_and_gaussian() {
        let p = RadialNewtonPotential::new(2.0, 1.0, |_| 1.0).unwrap();
        for r in [0.0, 1e-3, 0.5, 3.0] {
            let (v, d) = p.eval(r);
            assert_relative_eq!(v, 0.5, max_relative = 1e-12);
            assert!(d.abs() < 1e-10);
        }
        // −P'' − 2P'/r + λP = f checked by differences
        let lambda = 1.3;
        let f = |s: f64| (-s * s).exp();
        let g = RadialNewtonPotential::new(lambda, 1.0, f).unwrap();
        let h = 1e-4;
        for r in [0.3, 0.9, 2.0] {
            let (v, d) = g.eval(r);
            let d2 = (g.eval(r + h).0 - 2.0 * v + g.eval(r - h).0) / (h * h);
            let fd = (g.eval(r + h).0 - g.eval(r - h).0) / (2.0 * h);
            assert!((d - fd).abs() < 1e-8);
            assert!((-d2 - 2.0 * d / r + lambda * v - f(r)).abs() < 1e-6);
        }
        // the whole-space potential agrees with a direct 3D convolution at one point
        let x = Point3::new(0.0, 0.0, 0.7);
        let wide = Domain::ball(Point3::zeros(), 8.0).unwrap();
        let q = wide.volume_quadrature(&x, 1.0, 4).unwrap();
        let direct = newton_potential(lambda, &wide, |y| f(y.norm()), &x, &q).unwrap();
        assert_relative_eq!(direct, g.eval(0.7).0, max_relative = 1e-7);
    }
}
