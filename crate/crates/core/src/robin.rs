//! The Robin function `g_λ(x) = H_λ(x, x)` of the Neumann Green's function,
//! its derivatives and its supremum, with closed forms for the ball.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::Serialize;

use crate::defaults;
use crate::domain::Domain;
use crate::error::{ensure_positive, Error, Result};
use crate::field_solver::{NeumannSolution, NeumannSolver, SolverOptions};
use crate::kernels::{diag_limit, gamma_minus_phi, yukawa_phi, Point3};

/// A value of `g` with the boundary residual of the solve behind it.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RobinValue {
    pub value: f64,
    pub residual: f64,
    pub flagged: bool,
}

/// One row of a Robin map.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RobinRow {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub g: f64,
    pub residual: f64,
}

/// One local ascent of the supremum search.
#[derive(Clone, Debug, Serialize)]
pub struct AscentTrace {
    pub start: Point3,
    pub start_value: f64,
    pub end: Point3,
    pub value: f64,
    pub iterations: usize,
    /// The ascent ended pressed against the margin.
    pub pinned: bool,
}

/// `M_λ = sup g_λ` with its maximiser and the multistart trace.
#[derive(Clone, Debug, Serialize)]
pub struct SupResult {
    #[serde(rename = "M")]
    pub m: f64,
    pub argmax: Point3,
    pub grid_max: f64,
    pub grid_points: usize,
    pub trace: Vec<AscentTrace>,
}

type FieldSlot = Arc<OnceLock<Arc<NeumannSolution>>>;

/// Robin function of `−Δ + λ` with Neumann conditions on a fixed domain.
///
/// Regular fields are cached per source point; concurrent requests for the
/// same point share a single solve.
pub struct RobinEvaluator {
    solver: NeumannSolver,
    margin: f64,
    cache: Mutex<HashMap<[u64; 3], FieldSlot>>,
    shifted: OnceLock<std::result::Result<Box<[RobinEvaluator; 2]>, String>>,
}

impl std::fmt::Debug for RobinEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RobinEvaluator")
            .field("lambda", &self.lambda())
            .field("margin", &self.margin)
            .finish_non_exhaustive()
    }
}

impl RobinEvaluator {
    pub fn new(lambda: f64, domain: &Domain, options: SolverOptions) -> Result<Self> {
        Ok(Self::from_solver(NeumannSolver::new(lambda, domain, options)?))
    }

    pub fn from_solver(solver: NeumannSolver) -> Self {
        let margin = defaults::MARGIN_FRACTION * solver.domain().diameter();
        Self { solver, margin, cache: Mutex::default(), shifted: OnceLock::new() }
    }

    pub fn with_margin(mut self, margin: f64) -> Result<Self> {
        ensure_positive("margin", margin)?;
        self.margin = margin;
        Ok(self)
    }

    pub fn lambda(&self) -> f64 {
        self.solver.lambda()
    }

    pub fn domain(&self) -> &Domain {
        self.solver.domain()
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn solver(&self) -> &NeumannSolver {
        &self.solver
    }

    pub fn cached_fields(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    pub fn clear_cache(&self) {
        self.cache.lock().expect("cache lock").clear();
    }

    fn check_margin(&self, x: &Point3, margin: f64) -> Result<()> {
        let distance = self.domain().dist_to_boundary(x)?;
        if distance < margin {
            return Err(Error::MarginViolation { distance, margin });
        }
        Ok(())
    }

    /// The regular field `u_x`, solved once per source point.
    pub fn regular_field(&self, x: &Point3) -> Arc<NeumannSolution> {
        let key = [x.x.to_bits(), x.y.to_bits(), x.z.to_bits()];
        let slot = Arc::clone(self.cache.lock().expect("cache lock").entry(key).or_default());
        Arc::clone(slot.get_or_init(|| Arc::new(self.solver.regular_part_field(x))))
    }

    pub fn g(&self, x: &Point3) -> Result<f64> {
        self.g_detailed(x).map(|v| v.value)
    }

    pub fn g_detailed(&self, x: &Point3) -> Result<RobinValue> {
        self.check_margin(x, self.margin)?;
        let sol = self.regular_field(x);
        Ok(RobinValue {
            value: diag_limit(self.lambda()) - sol.field.eval(x),
            residual: sol.max_residual,
            flagged: sol.flagged,
        })
    }

    /// Neumann Green's function `G_λ(x, y) = Φ_λ(x − y) + u_y(x)`.
    pub fn green(&self, x: &Point3, y: &Point3) -> Result<f64> {
        for p in [x, y] {
            if !self.domain().contains(p) {
                return Err(Error::OutsideDomain(*p));
            }
        }
        Ok(yukawa_phi(self.lambda(), x, y)? + self.regular_field(y).field.eval(x))
    }

    /// Regular part `H_λ(ζ, x) = (Γ − Φ_λ)(ζ, x) − u_ζ(x)`, continuous through `x = ζ`.
    pub fn regular_part(&self, zeta: &Point3, x: &Point3) -> Result<f64> {
        self.check_margin(zeta, self.margin)?;
        if !self.domain().contains(x) {
            return Err(Error::OutsideDomain(*x));
        }
        let r = (x - zeta).norm();
        Ok(gamma_minus_phi(self.lambda(), r) - self.regular_field(zeta).field.eval(x))
    }

    fn fd_step(&self) -> f64 {
        1e-4 * self.domain().diameter()
    }

    /// Central differences with step `1e-4·diameter`, Richardson-extrapolated once.
    pub fn grad_g(&self, x: &Point3) -> Result<Point3> {
        let h = self.fd_step();
        let mut out = Point3::zeros();
        for i in 0..3 {
            let e = Point3::ith(i, 1.0);
            let d = |s: f64| -> Result<f64> { Ok((self.g(&(x + e * s))? - self.g(&(x - e * s))?) / (2.0 * s)) };
            out[i] = (4.0 * d(h / 2.0)? - d(h)?) / 3.0;
        }
        Ok(out)
    }

    /// Second differences with step `1e-3·diameter`.
    pub fn hessian_g(&self, x: &Point3) -> Result<Matrix3<f64>> {
        let h = 1e-3 * self.domain().diameter();
        let g0 = self.g(x)?;
        let mut hess = Matrix3::zeros();
        for i in 0..3 {
            let ei = Point3::ith(i, h);
            hess[(i, i)] = (self.g(&(x + ei))? - 2.0 * g0 + self.g(&(x - ei))?) / (h * h);
            for j in 0..i {
                let ej = Point3::ith(j, h);
                let v = (self.g(&(x + ei + ej))? - self.g(&(x + ei - ej))? - self.g(&(x - ei + ej))?
                    + self.g(&(x - ei - ej))?)
                    / (4.0 * h * h);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        Ok(hess)
    }

    fn shifted(&self) -> Result<&[RobinEvaluator; 2]> {
        let slot = self.shifted.get_or_init(|| {
            let dl = 1e-4 * self.lambda();
            let build = |l: f64| {
                RobinEvaluator::new(l, self.domain(), *self.solver.options())
                    .and_then(|e| e.with_margin(self.margin))
                    .map_err(|e| e.to_string())
            };
            Ok(Box::new([build(self.lambda() - dl)?, build(self.lambda() + dl)?]))
        });
        slot.as_deref().map_err(|e| Error::InvalidParameter(e.clone()))
    }

    /// `∂_λ g_λ(x)` by central differences in `λ` with step `1e-4·λ`.
    pub fn dg_dlambda(&self, x: &Point3) -> Result<f64> {
        let [lo, hi] = self.shifted()?;
        let d = (hi.g(x)? - lo.g(x)?) / (hi.lambda() - lo.lambda());
        if d <= 0.0 {
            return Err(Error::InvariantViolation(format!(
                "dg/dlambda = {d:.3e} <= 0 at ({:.4}, {:.4}, {:.4}); the boundary solve is too coarse",
                x.x, x.y, x.z
            )));
        }
        Ok(d)
    }

    /// `g` on an `n³` grid, skipping points closer than the margin to the boundary.
    pub fn map(&self, n: usize) -> Result<Vec<RobinRow>> {
        interior_grid(self.domain(), n, self.margin)
            .par_iter()
            .map(|p| {
                let v = self.g_detailed(p)?;
                Ok(RobinRow { x: p.x, y: p.y, z: p.z, g: v.value, residual: v.residual })
            })
            .collect()
    }

    /// Multistart ascent for `sup g`: the best `starts` points of an `n³`
    /// grid are each climbed by normalised gradient ascent with backtracking.
    pub fn sup_g(&self, n: usize, margin: f64) -> Result<SupResult> {
        self.sup_g_with(n, margin, defaults::MULTISTART)
    }

    pub fn sup_g_with(&self, n: usize, margin: f64, starts: usize) -> Result<SupResult> {
        if margin < self.margin {
            return Err(Error::InvalidParameter(format!(
                "search margin {margin} is below the evaluator margin {}",
                self.margin
            )));
        }
        let grid = interior_grid(self.domain(), n, margin);
        if grid.is_empty() {
            return Err(Error::Geometry(format!("no {n}^3 grid point clears the margin {margin}")));
        }
        let values: Vec<f64> = grid.par_iter().map(|p| self.g(p)).collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..grid.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let grid_max = values[order[0]];
        let trace: Vec<AscentTrace> = order
            .iter()
            .take(starts.max(1))
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&&i| self.ascend(grid[i], values[i], margin))
            .collect();
        let diam = self.domain().diameter();
        let mut best: Option<&AscentTrace> = None;
        for t in trace.iter().filter(|t| !t.pinned) {
            if best.is_none_or(|b| t.value > b.value) {
                best = Some(t);
            }
        }
        let Some(best) = best else {
            return Err(Error::AscentDiverged { starts: trace.len() });
        };
        let _ = diam;
        Ok(SupResult { m: best.value, argmax: best.end, grid_max, grid_points: grid.len(), trace: trace.clone() })
    }

    fn ascend(&self, start: Point3, start_value: f64, margin: f64) -> AscentTrace {
        let diam = self.domain().diameter();
        let tol = 1e-7 * diam;
        let mut step = 0.05 * diam;
        let (mut x, mut gx) = (start, start_value);
        let mut iterations = 0;
        'outer: while iterations < 500 {
            iterations += 1;
            let Ok(grad) = self.grad_g(&x) else { break };
            let norm = grad.norm();
            if norm == 0.0 {
                break;
            }
            let dir = grad / norm;
            loop {
                let trial = x + dir * step;
                let ok = self.check_margin(&trial, margin).is_ok();
                match ok.then(|| self.g(&trial)) {
                    Some(Ok(v)) if v > gx => {
                        x = trial;
                        gx = v;
                        step *= 1.5;
                        break;
                    }
                    _ => {
                        step *= 0.5;
                        if step < tol {
                            break 'outer;
                        }
                    }
                }
            }
        }
        let pinned = self.domain().dist_to_boundary(&x).map_or(true, |d| d < margin + 1e-2 * diam);
        AscentTrace { start, start_value, end: x, value: gx, iterations, pinned }
    }
}

/// Cell-centred `n³` grid over the bounding cube, keeping points at least
/// `margin` inside the domain. For odd `n` the centre is a grid point.
pub fn interior_grid(domain: &Domain, n: usize, margin: f64) -> Vec<Point3> {
    let c = domain.center();
    let r = domain.outer_radius();
    let coord = |i: usize| r * (-1.0 + (2 * i + 1) as f64 / n as f64);
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let p = c + Point3::new(coord(i), coord(j), coord(k));
                if domain.dist_to_boundary(&p).is_ok_and(|d| d >= margin) {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// `g_λ(0)` on the unit ball.
pub fn g_ball_analytic(lambda: f64) -> Result<f64> {
    ensure_positive("lambda", lambda)?;
    let k = lambda.sqrt();
    let q = (k - 1.0) / (k + 1.0);
    Ok(k / (4.0 * PI) * (1.0 - 2.0 / (1.0 + q * (2.0 * k).exp())))
}

/// `G_λ(x, 0)` on the unit ball at `|x| = r`.
#[allow(non_snake_case)]
pub fn G_ball_analytic(lambda: f64, r: f64) -> Result<f64> {
    ensure_positive("lambda", lambda)?;
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!("radius must lie in (0, 1), got {r}")));
    }
    let k = lambda.sqrt();
    // G = [e^{−κr} + 2c sinh(κr)] / (4πr), zero flux at r = 1
    let c = (-k).exp() * (1.0 + k) / (2.0 * (k * k.cosh() - k.sinh()));
    Ok(((-k * r).exp() + 2.0 * c * (k * r).sinh()) / (4.0 * PI * r))
}

/// `S_l(z) = (2l+1)!! i_l(z) / z^l`.
fn bessel_i_scaled(l: usize, z: f64) -> f64 {
    let h = 0.5 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= h / (k as f64 * (2 * l + 2 * k + 1) as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Spherical-harmonic series for the Neumann Green's function of a ball:
/// `G = Φ_λ + Σ_l A_l i_l(κ|x|) i_l(κ|y|) P_l(cos γ)` with `A_l` fixed by zero flux.
#[derive(Clone, Debug)]
pub struct BallSeries {
    kappa: f64,
    center: Point3,
    radius: f64,
    /// `(B_l / C_l) / (2l + 1)` for `l ≥ 1`, in scaled form.
    ratios: Vec<f64>,
    a0: f64,
}

impl BallSeries {
    pub fn new(lambda: f64, center: Point3, radius: f64, lmax: usize) -> Result<Self> {
        ensure_positive("lambda", lambda)?;
        ensure_positive("radius", radius)?;
        let kappa = lambda.sqrt();
        let z = kappa * radius;
        // k_0' / i_0' at z, l = 0
        let a0 = kappa / (4.0 * PI) * (-z).exp() * (1.0 + z) / (z * z.cosh() - z.sinh());
        // T_l = z^{l+1} k_l / (2l−1)!!, T_0 = e^{−z}, T_1 = e^{−z}(1 + z)
        let mut t_prev = (-z).exp();
        let mut t = t_prev * (1.0 + z);
        let mut s_prev = bessel_i_scaled(0, z);
        let mut ratios = Vec::with_capacity(lmax);
        for l in 1..=lmax {
            let lf = l as f64;
            let s = bessel_i_scaled(l, z);
            let b = z * z * t_prev / (2.0 * lf - 1.0) + (lf + 1.0) * t;
            let c = s_prev - (lf + 1.0) * s / (2.0 * lf + 1.0);
            ratios.push(b / c / (2.0 * lf + 1.0));
            let t_next = t + z * z * t_prev / ((2.0 * lf + 1.0) * (2.0 * lf - 1.0));
            t_prev = t;
            t = t_next;
            s_prev = s;
        }
        Ok(Self { kappa, center, radius, ratios, a0 })
    }

    /// Enough terms for points up to `rho_max·radius` from the centre.
    pub fn for_depth(lambda: f64, center: Point3, radius: f64, rho_max: f64) -> Result<Self> {
        let q = rho_max.clamp(1e-3, 0.9999);
        let lmax = ((-40.0 / q.ln()) as usize).clamp(8, 20_000);
        Self::new(lambda, center, radius, lmax)
    }

    pub fn lmax(&self) -> usize {
        self.ratios.len()
    }

    /// `Σ_l A_l i_l(κa) i_l(κb) P_l(cos γ)`: the regular field `u_y(x)`.
    pub fn regular(&self, x: &Point3, y: &Point3) -> f64 {
        let (dx, dy) = (x - self.center, y - self.center);
        let (a, b) = (dx.norm(), dy.norm());
        let cos = if a == 0.0 || b == 0.0 { 1.0 } else { (dx.dot(&dy) / (a * b)).clamp(-1.0, 1.0) };
        let k = self.kappa;
        let i0 = |s: f64| if s == 0.0 { 1.0 } else { (k * s).sinh() / (k * s) };
        let mut sum = self.a0 * i0(a) * i0(b);
        let q = a * b / (self.radius * self.radius);
        let mut ql = 1.0;
        let (mut p_prev, mut p) = (1.0, cos);
        for (idx, ratio) in self.ratios.iter().enumerate() {
            let l = idx + 1;
            ql *= q;
            if ql < 1e-300 {
                break;
            }
            let term =
                ql * ratio * bessel_i_scaled(l, k * a) * bessel_i_scaled(l, k * b) * p / (4.0 * PI * self.radius);
            sum += term;
            let lf = l as f64;
            let p_next = ((2.0 * lf + 1.0) * cos * p - lf * p_prev) / (lf + 1.0);
            p_prev = p;
            p = p_next;
        }
        sum
    }

    pub fn green(&self, x: &Point3, y: &Point3) -> Result<f64> {
        Ok(yukawa_phi(self.kappa * self.kappa, x, y)? + self.regular(x, y))
    }

    pub fn robin(&self, x: &Point3) -> f64 {
        diag_limit(self.kappa * self.kappa) - self.regular(x, x)
    }
}
