//! Geometry of the domain: balls and star-shaped domains whose boundary is
//! `x = c + ρ(θ, φ) (sinθ cosφ, sinθ sinφ, cosθ)`, with `ρ` a finite real
//! spherical-harmonic expansion.
//!
//! Harmonics use unnormalised associated Legendre functions without the
//! Condon–Shortley phase, so `[[0, 0, 1.0]]` is the unit sphere and
//! `[[l, m, c]]` contributes `c · P_l^{|m|}(cosθ) · cos(mφ)` for `m ≥ 0`
//! and `c · P_l^{|m|}(cosθ) · sin(|m|φ)` for `m < 0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::kernels::Point3;
use crate::quadrature::{graded_edges, GaussLegendre};

/// JSON description of a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    Ball {
        radius: f64,
        #[serde(default)]
        center: [f64; 3],
    },
    Star {
        harmonics: Vec<(u32, i32, f64)>,
        #[serde(default)]
        center: [f64; 3],
    },
}

/// One term `c · Y_l^m` of the radial function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Harmonic {
    pub degree: u32,
    pub order: i32,
    pub coefficient: f64,
}

#[derive(Clone, Debug)]
pub struct StarShape {
    center: Point3,
    harmonics: Vec<Harmonic>,
    max_degree: u32,
    min_radius: f64,
    max_radius: f64,
    diameter: f64,
}

#[derive(Clone, Debug)]
pub enum Domain {
    Ball { center: Point3, radius: f64 },
    Star(StarShape),
}

/// Boundary points with outward unit normals and surface weights.
#[derive(Clone, Debug)]
pub struct BoundarySample {
    pub points: Vec<Point3>,
    pub normals: Vec<Point3>,
    pub weights: Vec<f64>,
}

impl BoundarySample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Volume quadrature: nodes strictly inside the domain with positive weights.
#[derive(Clone, Debug)]
pub struct VolumeQuadrature {
    pub nodes: Vec<Point3>,
    pub weights: Vec<f64>,
}

impl VolumeQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&Point3) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).collect::<crate::quadrature::NeumaierSum>().sum()
    }
}

/// Default refinement level of [`Domain::volume_quadrature`].
pub const DEFAULT_QUADRATURE_LEVEL: u32 = 2;

/// Angular product rule: Gauss–Legendre in `cosθ`, uniform in `φ`.
/// Returns unit directions with solid-angle weights summing to `4π`.
pub fn sphere_rule(polar: usize) -> Vec<(Point3, f64)> {
    let gl = GaussLegendre::new(polar);
    let azimuthal = 2 * polar;
    let dphi = 2.0 * PI / azimuthal as f64;
    let mut out = Vec::with_capacity(polar * azimuthal);
    for (z, wz) in gl.nodes.iter().zip(&gl.weights) {
        let s = (1.0 - z * z).sqrt();
        for k in 0..azimuthal {
            let phi = (k as f64 + 0.5) * dphi;
            out.push((Point3::new(s * phi.cos(), s * phi.sin(), *z), wz * dphi));
        }
    }
    out
}

/// Fibonacci-spiral directions `(θ, φ)`, each carrying solid angle `4π / n`.
fn fibonacci_angles(n: usize) -> impl Iterator<Item = (f64, f64)> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n).map(move |i| {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
        (z.acos(), (i as f64 * golden).rem_euclid(2.0 * PI))
    })
}

/// Solid-angle weights for the Fibonacci directions, corrected (minimum-norm
/// change from `4π / n`) so that real spherical harmonics up to degree
/// `min(⌊√n / 2⌋, 12)` are integrated exactly.
fn fibonacci_weights(n: usize) -> Vec<f64> {
    let w0 = 4.0 * PI / n as f64;
    let degree = ((n as f64).sqrt() / 2.0).floor().min(12.0) as usize;
    let k = (degree + 1) * (degree + 1);
    let mut gram = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut moments = nalgebra::DVector::<f64>::zeros(k);
    moments[0] = (4.0 * PI).sqrt();
    let mut basis = vec![0.0; k];
    let angles: Vec<(f64, f64)> = fibonacci_angles(n).collect();
    for &(t, p) in &angles {
        real_harmonics(degree, t, p, &mut basis);
        for a in 0..k {
            moments[a] -= w0 * basis[a];
            for b in 0..=a {
                gram[(a, b)] += basis[a] * basis[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }
    let Some(chol) = gram.cholesky() else {
        return vec![w0; n];
    };
    let c = chol.solve(&moments);
    angles
        .iter()
        .map(|&(t, p)| {
            real_harmonics(degree, t, p, &mut basis);
            w0 + basis.iter().zip(c.iter()).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

/// Orthonormal real spherical harmonics up to `degree`, packed by `l² + l + m`.
fn real_harmonics(degree: usize, theta: f64, phi: f64, out: &mut [f64]) {
    let (x, s) = (theta.cos(), theta.sin());
    let mut qmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=degree {
        if m > 0 {
            qmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        let (c, sn) = ((m as f64 * phi).cos(), (m as f64 * phi).sin());
        let mut put = |l: usize, q: f64| {
            if m == 0 {
                out[l * l + l] = q;
            } else {
                out[l * l + l + m] = std::f64::consts::SQRT_2 * q * c;
                out[l * l + l - m] = std::f64::consts::SQRT_2 * q * sn;
            }
        };
        put(m, qmm);
        if m < degree {
            let mut q2 = qmm;
            let mut q1 = x * ((2 * m + 3) as f64).sqrt() * qmm;
            put(m + 1, q1);
            for l in (m + 2)..=degree {
                let (lf, mf) = (l as f64, m as f64);
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
                let q = a * (x * q1 - b * q2);
                put(l, q);
                q2 = q1;
                q1 = q;
            }
        }
    }
}

fn unit(theta: f64, phi: f64) -> Point3 {
    let s = theta.sin();
    Point3::new(s * phi.cos(), s * phi.sin(), theta.cos())
}

fn angles_of(d: &Point3) -> (f64, f64) {
    let r = d.norm();
    let theta = (d.z / r).clamp(-1.0, 1.0).acos();
    let phi = d.y.atan2(d.x).rem_euclid(2.0 * PI);
    (theta, phi)
}

impl StarShape {
    pub fn new(center: Point3, harmonics: Vec<Harmonic>) -> Result<Self> {
        if harmonics.is_empty() {
            return Err(Error::Geometry("star domain needs at least one harmonic".into()));
        }
        for h in &harmonics {
            if h.order.unsigned_abs() > h.degree {
                return Err(Error::Geometry(format!("harmonic order {} exceeds degree {}", h.order, h.degree)));
            }
            if !h.coefficient.is_finite() {
                return Err(Error::Geometry("non-finite harmonic coefficient".into()));
            }
        }
        let max_degree = harmonics.iter().map(|h| h.degree).max().unwrap_or(0);
        let mut shape = Self { center, harmonics, max_degree, min_radius: 0.0, max_radius: 0.0, diameter: 0.0 };
        let probe: Vec<Point3> = fibonacci_angles(4000)
            .map(|(t, p)| {
                let rho = shape.rho(t, p);
                unit(t, p) * rho
            })
            .collect();
        let radii: Vec<f64> = probe.iter().map(|x| x.norm()).collect();
        shape.min_radius = radii.iter().cloned().fold(f64::INFINITY, f64::min);
        shape.max_radius = radii.iter().cloned().fold(0.0, f64::max);
        if shape.min_radius.is_nan() || shape.min_radius <= 0.0 {
            return Err(Error::Geometry(format!(
                "radial function must stay positive (min ≈ {:.3e})",
                shape.min_radius
            )));
        }
        let mut diam: f64 = 0.0;
        for (i, a) in probe.iter().enumerate().step_by(4) {
            for b in probe.iter().skip(i + 1).step_by(4) {
                diam = diam.max((a - b).norm());
            }
        }
        shape.diameter = diam.max(2.0 * shape.min_radius);
        Ok(shape)
    }

    pub fn center(&self) -> Point3 {
        self.center
    }

    pub fn harmonics(&self) -> &[Harmonic] {
        &self.harmonics
    }

    /// `ρ(θ, φ)`.
    pub fn rho(&self, theta: f64, phi: f64) -> f64 {
        self.rho_with_derivatives(theta, phi).0
    }

    /// `(ρ, ∂ρ/∂θ, (∂ρ/∂φ) / sinθ)`.
    pub fn rho_with_derivatives(&self, theta: f64, phi: f64) -> (f64, f64, f64) {
        let theta = if theta.sin().abs() < 1e-12 { theta + if theta < 1.0 { 1e-9 } else { -1e-9 } } else { theta };
        let (x, s) = (theta.cos(), theta.sin());
        let lmax = self.max_degree as usize;
        let mut rho = 0.0;
        let mut d_theta = 0.0;
        let mut d_phi_over_sin = 0.0;
        for m in 0..=lmax {
            // P_l^m for l = m..=lmax, unnormalised, no Condon–Shortley phase
            let mut p = vec![0.0; lmax + 2];
            let mut pmm = 1.0;
            for k in 0..m {
                pmm *= (2 * k + 1) as f64 * s;
            }
            p[m] = pmm;
            if m < lmax {
                p[m + 1] = x * (2 * m + 1) as f64 * pmm;
            }
            for l in (m + 2)..=lmax {
                p[l] = ((2 * l - 1) as f64 * x * p[l - 1] - (l + m - 1) as f64 * p[l - 2]) / (l - m) as f64;
            }
            for h in self.harmonics.iter().filter(|h| h.order.unsigned_abs() as usize == m) {
                let l = h.degree as usize;
                let (trig, dtrig) = if h.order >= 0 {
                    ((m as f64 * phi).cos(), -(m as f64) * (m as f64 * phi).sin())
                } else {
                    ((m as f64 * phi).sin(), m as f64 * (m as f64 * phi).cos())
                };
                let plm = p[l];
                let plm1 = if l > m { p[l - 1] } else { 0.0 };
                // (1 − x²) dP/dx = −l x P_l^m + (l + m) P_{l−1}^m, dP/dθ = −sinθ dP/dx
                let dp_dtheta = -(-(l as f64) * x * plm + (l + m) as f64 * plm1) / s;
                rho += h.coefficient * plm * trig;
                d_theta += h.coefficient * dp_dtheta * trig;
                d_phi_over_sin += h.coefficient * plm / s * dtrig;
            }
        }
        (rho, d_theta, d_phi_over_sin)
    }

    fn rho_dir(&self, d: &Point3) -> f64 {
        let (t, p) = angles_of(d);
        self.rho(t, p)
    }
}

impl Domain {
    pub fn ball(center: Point3, radius: f64) -> Result<Self> {
        ensure_positive("ball radius", radius)?;
        Ok(Domain::Ball { center, radius })
    }

    pub fn unit_ball() -> Self {
        Domain::Ball { center: Point3::zeros(), radius: 1.0 }
    }

    pub fn star(center: Point3, harmonics: Vec<Harmonic>) -> Result<Self> {
        Ok(Domain::Star(StarShape::new(center, harmonics)?))
    }

    pub fn from_spec(spec: &DomainSpec) -> Result<Self> {
        match spec {
            DomainSpec::Ball { radius, center } => Domain::ball(Point3::from(*center), *radius),
            DomainSpec::Star { harmonics, center } => Domain::star(
                Point3::from(*center),
                harmonics.iter().map(|&(degree, order, coefficient)| Harmonic { degree, order, coefficient }).collect(),
            ),
        }
    }

    pub fn to_spec(&self) -> DomainSpec {
        match self {
            Domain::Ball { center, radius } => DomainSpec::Ball { radius: *radius, center: (*center).into() },
            Domain::Star(s) => DomainSpec::Star {
                harmonics: s.harmonics.iter().map(|h| (h.degree, h.order, h.coefficient)).collect(),
                center: s.center.into(),
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(&serde_json::from_str(text)?)
    }

    pub fn center(&self) -> Point3 {
        match self {
            Domain::Ball { center, .. } => *center,
            Domain::Star(s) => s.center,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } => 2.0 * radius,
            Domain::Star(s) => s.diameter,
        }
    }

    /// Radius of a ball about [`Domain::center`] that contains the domain.
    pub fn outer_radius(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } => *radius,
            Domain::Star(s) => s.max_radius * (1.0 + 1e-3),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } => 4.0 / 3.0 * PI * radius.powi(3),
            Domain::Star(s) => {
                let polar = 2 * s.max_degree as usize + 16;
                sphere_rule(polar).iter().map(|(u, w)| w * s.rho_dir(u).powi(3) / 3.0).sum()
            }
        }
    }

    /// Membership in the open set.
    pub fn contains(&self, x: &Point3) -> bool {
        match self {
            Domain::Ball { center, radius } => (x - center).norm() < *radius,
            Domain::Star(s) => {
                let d = x - s.center;
                let r = d.norm();
                r == 0.0 || r < s.rho_dir(&d)
            }
        }
    }

    /// Boundary point and outward unit normal in direction `(θ, φ)` from the centre,
    /// plus the surface Jacobian per unit solid angle.
    pub fn boundary_point(&self, theta: f64, phi: f64) -> (Point3, Point3, f64) {
        let u = unit(theta, phi);
        match self {
            Domain::Ball { center, radius } => (center + u * *radius, u, radius * radius),
            Domain::Star(s) => {
                let (rho, rt, rp) = s.rho_with_derivatives(theta, phi);
                let e_theta = Point3::new(theta.cos() * phi.cos(), theta.cos() * phi.sin(), -theta.sin());
                let e_phi = Point3::new(-phi.sin(), phi.cos(), 0.0);
                let n = u * rho - e_theta * rt - e_phi * rp;
                let nn = n.norm();
                (s.center + u * rho, n / nn, rho * nn)
            }
        }
    }

    /// Euclidean distance from an interior point to the boundary.
    pub fn dist_to_boundary(&self, x: &Point3) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::OutsideDomain(*x));
        }
        match self {
            Domain::Ball { center, radius } => Ok(radius - (x - center).norm()),
            Domain::Star(_) => Ok(self.star_distance(x)),
        }
    }

    fn star_distance(&self, x: &Point3) -> f64 {
        let dist = |t: f64, p: f64| (self.boundary_point(t, p).0 - x).norm();
        let mut seeds: Vec<(f64, f64, f64)> = fibonacci_angles(2000).map(|(t, p)| (dist(t, p), t, p)).collect();
        seeds.sort_by(|a, b| a.0.total_cmp(&b.0));
        let tol = 1e-6 * self.diameter();
        let mut best = f64::INFINITY;
        for &(d0, t0, p0) in seeds.iter().take(6) {
            // compass search on (θ, φ)
            let (mut t, mut p, mut d) = (t0, p0, d0);
            let mut step = 0.1;
            while step > 1e-10 {
                let mut improved = false;
                for (dt, dp) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                    let (tt, pp) = (t + dt, p + dp);
                    let dd = dist(tt, pp);
                    if dd < d {
                        t = tt;
                        p = pp;
                        d = dd;
                        improved = true;
                    }
                }
                if !improved {
                    step *= 0.5;
                }
                if step * self.diameter() < 0.01 * tol && !improved {
                    break;
                }
            }
            best = best.min(d);
        }
        best
    }

    /// Distance `t > 0` along the unit direction `u` from the interior point `p`
    /// to the boundary.
    pub fn ray_exit(&self, p: &Point3, u: &Point3) -> f64 {
        match self {
            Domain::Ball { center, radius } => {
                let q = p - center;
                let b = q.dot(u);
                let c = q.norm_squared() - radius * radius;
                let disc = (b * b - c).max(0.0).sqrt();
                // the root −b + disc, written without cancellation
                if b > 0.0 {
                    -c / (b + disc)
                } else {
                    disc - b
                }
            }
            Domain::Star(s) => {
                let f = |t: f64| {
                    let d = p + u * t - s.center;
                    let r = d.norm();
                    if r == 0.0 {
                        -s.min_radius
                    } else {
                        r - s.rho_dir(&d)
                    }
                };
                let t_max = 2.0 * s.max_radius + (p - s.center).norm();
                let steps = 64;
                let mut lo = 0.0;
                let mut hi = t_max;
                for k in 1..=steps {
                    let t = t_max * k as f64 / steps as f64;
                    if f(t) >= 0.0 {
                        hi = t;
                        break;
                    }
                    lo = t;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 4.0 * f64::EPSILON * hi {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Quasi-uniform Fibonacci sample of `n ≥ 12` boundary points.
    pub fn boundary_sample(&self, n: usize) -> Result<BoundarySample> {
        if n < 12 {
            return Err(Error::InvalidParameter(format!("boundary sample needs n >= 12, got {n}")));
        }
        let solid = fibonacci_weights(n);
        let mut sample = BoundarySample {
            points: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
        };
        for ((t, p), ws) in fibonacci_angles(n).zip(solid) {
            let (x, nrm, jac) = self.boundary_point(t, p);
            sample.points.push(x);
            sample.normals.push(nrm);
            sample.weights.push(ws * jac);
        }
        Ok(sample)
    }

    /// Spherical product rule centred at `peak`: graded radial Gauss–Legendre
    /// panels from `scale / 8` outward to the boundary along each direction.
    pub fn volume_quadrature(&self, peak: &Point3, scale: f64, level: u32) -> Result<VolumeQuadrature> {
        ensure_positive("quadrature scale", scale)?;
        if !self.contains(peak) {
            return Err(Error::OutsideDomain(*peak));
        }
        let polar = 8 + 4 * level as usize;
        let radial = GaussLegendre::new(10 + 2 * level as usize);
        let first = scale / 8.0;
        let dirs = sphere_rule(polar);
        let mut q = VolumeQuadrature { nodes: Vec::new(), weights: Vec::new() };
        for (u, wa) in &dirs {
            let reach = self.ray_exit(peak, u);
            let edges = graded_edges(0.0, reach, first.min(reach / 2.0), 2.0);
            for win in edges.windows(2) {
                for (r, wr) in radial.mapped(win[0], win[1]) {
                    q.nodes.push(peak + u * r);
                    q.weights.push(wa * wr * r * r);
                }
            }
        }
        Ok(q)
    }
}
