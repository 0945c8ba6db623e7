//! The critical parameter `λ*(Ω) = inf{λ : sup g_λ ≥ 0}`, bubbling predictions
//! just above it, the reduced energy in the normalised scale `Λ`, and the
//! non-degeneracy hypotheses at the critical point.

use std::fmt::Write as _;

use nalgebra::Matrix3;
use serde::Serialize;

use crate::bubble_energy::{ansatz_energy, constants};
use crate::defaults;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field_solver::SolverOptions;
use crate::kernels::{diag_limit, Point3};
use crate::robin::{interior_grid, RobinEvaluator, SupResult};

/// Bisection on an increasing function.
#[derive(Clone, Debug, Serialize)]
pub struct Bisection {
    pub root: f64,
    pub lo: f64,
    pub hi: f64,
    /// Every evaluation as `(x, f(x))`.
    pub history: Vec<(f64, f64)>,
}

/// Bisect an increasing `f` on `[lo, hi]` until the bracket is narrower than `tol`.
///
/// Keeps `f(lo) < 0 < f(hi)` at every step; a sign change that breaks this
/// invariant is reported rather than silently followed.
pub fn bisect(mut f: impl FnMut(f64) -> Result<f64>, mut lo: f64, mut hi: f64, tol: f64) -> Result<Bisection> {
    let mut history = Vec::new();
    let flo = f(lo)?;
    let fhi = f(hi)?;
    history.push((lo, flo));
    history.push((hi, fhi));
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(Error::NoBracket { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        history.push((mid, fm));
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Bisection { root: 0.5 * (lo + hi), lo, hi, history })
}

/// `λ*` of the unit ball: the root of `((√λ − 1)/(√λ + 1)) e^{2√λ} = 1`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BallRoot {
    pub lambda_star: f64,
    /// `((√λ − 1)/(√λ + 1)) e^{2√λ} − 1` at the returned value.
    pub residual: f64,
}

pub fn lambda_star_ball_analytic() -> BallRoot {
    let f = |k: f64| Ok((k - 1.0) * (2.0 * k).exp() - (k + 1.0));
    let b = bisect(f, 1.0, 2.0, 0.0).expect("the ball equation changes sign on [1, 2]");
    let k = b.root;
    BallRoot { lambda_star: k * k, residual: (k - 1.0) / (k + 1.0) * (2.0 * k).exp() - 1.0 }
}

/// Knobs of the critical-parameter search.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CriticalSettings {
    pub solver: SolverOptions,
    pub grid: usize,
    /// Width of the final `λ` bracket.
    pub tol: f64,
}

impl Default for CriticalSettings {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), grid: defaults::GRID, tol: 1e-4 }
    }
}

/// `M_λ` with the evaluator that produced it.
pub fn sup_at(domain: &Domain, lambda: f64, settings: &CriticalSettings) -> Result<(SupResult, RobinEvaluator)> {
    let ev = RobinEvaluator::new(lambda, domain, settings.solver)?;
    let sup = ev.sup_g(settings.grid, ev.margin())?;
    Ok((sup, ev))
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalResult {
    pub lambda_star: f64,
    pub maximizer: Point3,
    /// `M` at the returned `λ*`.
    pub m_at_star: f64,
    /// Final bracket width.
    pub tolerance: f64,
    pub bracket: (f64, f64),
    /// `(λ, M_λ)` for every evaluation, bracketing included.
    pub history: Vec<(f64, f64)>,
}

impl CriticalResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serialises")
    }

    pub fn history_csv(&self) -> String {
        let mut out = String::from("lambda,M\n");
        for (l, m) in &self.history {
            let _ = writeln!(out, "{l:.16e},{m:.16e}");
        }
        out
    }
}

/// Bisection on `λ ↦ M_λ`, bracketed by doubling or halving from `λ = 1` within `[1e-3, 1e3]`.
pub fn lambda_star(domain: &Domain, settings: &CriticalSettings) -> Result<CriticalResult> {
    if settings.tol.is_nan() || settings.tol < 1e-6 {
        return Err(Error::InvalidParameter(format!("tolerance must be at least 1e-6, got {}", settings.tol)));
    }
    let m = |l: f64| sup_at(domain, l, settings).map(|(s, _)| s.m);
    let (floor, ceiling) = (1e-3, 1e3);
    let mut history = Vec::new();
    let mut lam = 1.0;
    let mut val = m(lam)?;
    history.push((lam, val));
    let (lo, hi) = if val < 0.0 {
        loop {
            let next = 2.0 * lam;
            if next > ceiling {
                return Err(Error::NoBracket { lo: floor, hi: ceiling });
            }
            let v = m(next)?;
            history.push((next, v));
            if v > 0.0 {
                break (lam, next);
            }
            lam = next;
            val = v;
        }
    } else {
        loop {
            let next = 0.5 * lam;
            if next < floor {
                return Err(Error::NoBracket { lo: floor, hi: ceiling });
            }
            let v = m(next)?;
            history.push((next, v));
            if v < 0.0 {
                break (next, lam);
            }
            lam = next;
            val = v;
        }
    };
    let _ = val;
    let b = bisect(m, lo, hi, settings.tol)?;
    // the two bracket endpoints are already in the history
    history.extend(b.history.into_iter().skip(2));
    let (sup, _) = sup_at(domain, b.root, settings)?;
    history.push((b.root, sup.m));
    Ok(CriticalResult {
        lambda_star: b.root,
        maximizer: sup.argmax,
        m_at_star: sup.m,
        tolerance: b.hi - b.lo,
        bracket: (b.lo, b.hi),
        history,
    })
}

/// Location and scale of the bubble predicted for `λ` slightly above `λ*`.
#[derive(Clone, Debug, Serialize)]
pub struct BubblePrediction {
    pub lambda: f64,
    pub x_lambda: Point3,
    pub g: f64,
    /// `μ_λ = γ g_λ(x_λ) / λ` with `γ = a1 / (2 a2)`.
    pub mu: f64,
    /// Normalised scale at the prediction; `1` by construction.
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    /// `λ − λ*` and `g / (λ − λ*)` when `λ*` is supplied.
    pub excess: Option<f64>,
    pub sandwich_ratio: Option<f64>,
}

impl BubblePrediction {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("prediction serialises")
    }
}

pub fn bubble_prediction(
    domain: &Domain,
    lambda: f64,
    lambda_star: Option<f64>,
    settings: &CriticalSettings,
) -> Result<BubblePrediction> {
    if let Some(ls) = lambda_star {
        if lambda <= ls {
            return Err(Error::NotBubbling { lambda, sup_g: f64::NAN });
        }
    }
    let (sup, _) = sup_at(domain, lambda, settings)?;
    if sup.m <= 0.0 {
        return Err(Error::NotBubbling { lambda, sup_g: sup.m });
    }
    let excess = lambda_star.map(|ls| lambda - ls);
    Ok(BubblePrediction {
        lambda,
        x_lambda: sup.argmax,
        g: sup.m,
        mu: constants().gamma() * sup.m / lambda,
        big_lambda: 1.0,
        excess,
        sandwich_ratio: excess.map(|e| sup.m / e),
    })
}

/// `g_λ(x_λ) / (λ − λ*)` over a range of excesses: bounds `α ≤ ratio ≤ β`.
#[derive(Clone, Debug, Serialize)]
pub struct Sandwich {
    pub rows: Vec<BubblePrediction>,
    pub alpha: f64,
    pub beta: f64,
}

pub fn sandwich(domain: &Domain, lambda_star: f64, excesses: &[f64], settings: &CriticalSettings) -> Result<Sandwich> {
    let rows = excesses
        .iter()
        .map(|e| bubble_prediction(domain, lambda_star + e, Some(lambda_star), settings))
        .collect::<Result<Vec<_>>>()?;
    let ratios = rows.iter().filter_map(|r| r.sandwich_ratio);
    let (alpha, beta) = ratios.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r), b.max(r)));
    Ok(Sandwich { rows, alpha, beta })
}

/// Measured energy and quadratic model at one normalised scale.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProfilePoint {
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub mu: f64,
    pub energy: f64,
    pub model: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReducedProfile {
    pub lambda: f64,
    pub zeta: Point3,
    pub g: f64,
    pub points: Vec<ProfilePoint>,
}

impl ReducedProfile {
    fn best(&self, key: impl Fn(&ProfilePoint) -> f64) -> f64 {
        let mut best = &self.points[0];
        for p in &self.points[1..] {
            if key(p) > key(best) {
                best = p;
            }
        }
        best.big_lambda
    }

    /// `Λ` with the largest measured energy; ties go to the first.
    pub fn argmax(&self) -> f64 {
        self.best(|p| p.energy)
    }

    pub fn model_argmax(&self) -> f64 {
        self.best(|p| p.model)
    }
}

/// `ψ(Λ) = a0 + (a1²/4a2)(g²/λ)(2Λ − Λ²)`.
pub fn reduced_model(lambda: f64, g: f64, big_lambda: f64) -> f64 {
    let c = constants();
    c.a0 + c.a1 * c.a1 / (4.0 * c.a2) * g * g / lambda * (2.0 * big_lambda - big_lambda * big_lambda)
}

/// Energy of `U_{ζ,μ(Λ)}` with `μ(Λ) = γ g_λ(ζ) Λ / λ` across a grid of `Λ`.
pub fn reduced_energy_profile(ev: &RobinEvaluator, zeta: &Point3, grid: &[f64], level: u32) -> Result<ReducedProfile> {
    if grid.is_empty() || grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidParameter("the Λ grid must be non-empty and positive".into()));
    }
    let lambda = ev.lambda();
    let g = ev.g(zeta)?;
    if g <= 0.0 {
        return Err(Error::NotBubbling { lambda, sup_g: g });
    }
    let gamma = constants().gamma();
    let points = grid
        .iter()
        .map(|&big| {
            let mu = gamma * g * big / lambda;
            let (energy, _) = ansatz_energy(ev, zeta, mu, level)?;
            Ok(ProfilePoint { big_lambda: big, mu, energy, model: reduced_model(lambda, g, big) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReducedProfile { lambda, zeta: *zeta, g, points })
}

/// Maximiser of `μ ↦ E_λ(U_{ζ,μ})` on `[lo, hi]` by golden-section search.
pub fn energy_scale_argmax(ev: &RobinEvaluator, zeta: &Point3, lo: f64, hi: f64, tol: f64, level: u32) -> Result<f64> {
    let e = |mu: f64| ansatz_energy(ev, zeta, mu, level).map(|(e, _)| e);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (e(c)?, e(d)?);
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = e(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = e(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Where condition (a) is checked.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Subdomain {
    /// Grid points where `g` is above the midpoint between its grid minimum and its supremum.
    SuperLevel,
    Ball {
        center: Point3,
        radius: f64,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub lambda: f64,
    pub x0: Point3,
    pub g: f64,
    pub grad: Point3,
    pub hessian: Matrix3<f64>,
    pub eigenvalues: [f64; 3],
    /// Smallest `|eigenvalue|`: the non-degeneracy margin.
    pub min_abs_eigenvalue: f64,
    pub threshold: f64,
    pub nondegenerate: bool,
    pub sup_inside: f64,
    pub sup_on_boundary: f64,
    /// `sup_D g > sup_{∂D} g`.
    pub condition_a: bool,
}

/// Report `g`, `∇g` and the Hessian at `x0`, and compare `sup g` inside a
/// subdomain with its boundary.
pub fn verify_hypotheses(
    ev: &RobinEvaluator,
    x0: &Point3,
    subdomain: Subdomain,
    grid: usize,
) -> Result<HypothesisReport> {
    let domain = ev.domain();
    let diam = domain.diameter();
    let g = ev.g(x0)?;
    let grad = ev.grad_g(x0)?;
    let hessian = ev.hessian_g(x0)?;
    let mut eig: Vec<f64> = hessian.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let min_abs = eig.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
    let scale = g.abs().max(diag_limit(ev.lambda()));
    let threshold = 1e-3 * scale / (diam * diam);

    let (sup_inside, sup_on_boundary) = match subdomain {
        Subdomain::Ball { center, radius } => {
            let inside: Vec<Point3> = interior_grid(domain, grid, ev.margin())
                .into_iter()
                .filter(|p| (p - center).norm() < radius)
                .chain(std::iter::once(*x0).filter(|p| (p - center).norm() < radius))
                .collect();
            let rim = Domain::ball(center, radius)?.boundary_sample(200)?.points;
            (max_g(ev, &inside)?, max_g(ev, &rim)?)
        }
        Subdomain::SuperLevel => {
            let pts = interior_grid(domain, grid, ev.margin());
            let vals = pts.iter().map(|p| ev.g(p)).collect::<Result<Vec<_>>>()?;
            let top = vals.iter().copied().fold(g, f64::max);
            let bottom = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let level = top - 0.5 * (top - bottom);
            let h = 2.0 * domain.outer_radius() / grid as f64;
            let inside: Vec<usize> = (0..pts.len()).filter(|&i| vals[i] > level).collect();
            let rim = (0..pts.len())
                .filter(|&i| vals[i] <= level && inside.iter().any(|&j| (pts[i] - pts[j]).amax() < 1.01 * h));
            let sup_in = inside.iter().map(|&i| vals[i]).fold(g, f64::max);
            let sup_rim = rim.map(|i| vals[i]).fold(f64::NEG_INFINITY, f64::max);
            (sup_in, sup_rim)
        }
    };
    Ok(HypothesisReport {
        lambda: ev.lambda(),
        x0: *x0,
        g,
        grad,
        hessian,
        eigenvalues: [eig[0], eig[1], eig[2]],
        min_abs_eigenvalue: min_abs,
        threshold,
        nondegenerate: min_abs > threshold,
        sup_inside,
        sup_on_boundary,
        condition_a: sup_inside > sup_on_boundary,
    })
}

fn max_g(ev: &RobinEvaluator, pts: &[Point3]) -> Result<f64> {
    pts.iter().map(|p| ev.g(p)).try_fold(f64::NEG_INFINITY, |m, v| v.map(|v| m.max(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robin::g_ball_analytic;
    use approx::assert_relative_eq;

    #[test]
    fn analytic_ball_root() {
        let root = lambda_star_ball_analytic();
        assert!((root.lambda_star - 1.43923).abs() < 1e-5);
        assert!(root.residual.abs() < 1e-10);
        assert!(g_ball_analytic(root.lambda_star).unwrap().abs() < 1e-14);
    }

    #[test]
    fn bisection_keeps_its_bracket() {
        let b = bisect(|x| Ok(x * x * x - 2.0), 0.0, 3.0, 1e-12).unwrap();
        assert_relative_eq!(b.root, 2f64.cbrt(), epsilon = 1e-12);
        assert!(b.lo.powi(3) < 2.0 && b.hi.powi(3) > 2.0);
        assert!(matches!(bisect(|x| Ok(x - 5.0), 0.0, 3.0, 1e-6), Err(Error::NoBracket { .. })));
    }

    #[test]
    fn model_is_symmetric_about_one() {
        for big in [0.5, 0.8, 0.93] {
            assert_relative_eq!(
                reduced_model(1.5, 0.01, big),
                reduced_model(1.5, 0.01, 2.0 - big),
                max_relative = 1e-15
            );
        }
        // curvature −(a1²/4a2) g²/λ
        let (l, g) = (1.5, 0.01);
        let second = reduced_model(l, g, 1.1) - 2.0 * reduced_model(l, g, 1.0) + reduced_model(l, g, 0.9);
        let c = constants();
        assert_relative_eq!(second / 0.01, -2.0 * c.a1 * c.a1 / (4.0 * c.a2) * g * g / l, max_relative = 1e-6);
    }

    #[test]
    fn tolerance_precondition() {
        let s = CriticalSettings { tol: 1e-8, ..CriticalSettings::default() };
        assert!(lambda_star(&Domain::unit_ball(), &s).is_err());
    }

    #[test]
    fn prediction_requires_bubbling() {
        let ball = Domain::unit_ball();
        let s = CriticalSettings::default();
        assert!(matches!(bubble_prediction(&ball, 1.0, None, &s), Err(Error::NotBubbling { .. })));
        let p = bubble_prediction(&ball, 1.5, Some(1.43923), &s).unwrap();
        assert!(p.x_lambda.norm() < 1e-3);
        assert_relative_eq!(p.mu, 4.0 * g_ball_analytic(1.5).unwrap() / 1.5, max_relative = 1e-3);
        assert!(p.sandwich_ratio.unwrap() > 0.0);
    }

    #[test]
    fn hypotheses_at_the_ball_centre() {
        let ls = lambda_star_ball_analytic().lambda_star;
        let ev = RobinEvaluator::new(ls, &Domain::unit_ball(), SolverOptions { n: 1600, ..SolverOptions::default() })
            .unwrap();
        let r = verify_hypotheses(&ev, &Point3::zeros(), Subdomain::Ball { center: Point3::zeros(), radius: 0.5 }, 9)
            .unwrap();
        assert!(r.g.abs() < 1e-8 && r.grad.norm() < 1e-8);
        assert!(r.eigenvalues.iter().all(|e| *e < 0.0) && r.nondegenerate);
        assert!(r.condition_a);
        let level = verify_hypotheses(&ev, &Point3::zeros(), Subdomain::SuperLevel, 9).unwrap();
        assert!(level.condition_a && level.sup_on_boundary.is_finite());
        let off = verify_hypotheses(&ev, &Point3::new(0.3, 0.0, 0.0), Subdomain::SuperLevel, 9).unwrap();
        assert!(off.grad.norm() > 1e-3);
    }
}
