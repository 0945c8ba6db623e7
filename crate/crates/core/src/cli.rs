//! Command-line front end: configuration, commands and file emission.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bubble_energy::{constants, constants_by_quadrature, d0_solve, expansion_check, pi_expansion_check};
use crate::critical::{lambda_star, lambda_star_ball_analytic, sup_at, CriticalSettings};
use crate::defaults;
use crate::domain::{Domain, DomainSpec};
use crate::error::{Error, Result};
use crate::field_solver::SolverOptions;
use crate::kernels::Point3;
use crate::robin::{g_ball_analytic, BallSeries, RobinEvaluator, RobinRow};

#[derive(Debug, Parser)]
#[command(
    name = "robin-bubble",
    version,
    about = "Robin function, critical parameter and bubble energy for -Δ+λ on 3D domains"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; defaults to the unit ball.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Grid points per axis.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub mu_list: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Command {
    /// Critical parameter of the unit ball from its closed form, with a table of g(0).
    BallAnalytic,
    /// Robin function on an interior grid.
    RobinMap,
    /// Critical parameter by bisection on sup g.
    LambdaStar,
    /// Energy of the bubble ansatz against its small-scale expansion.
    EnergySweep,
    /// Property battery; exits with status 2 if any check fails.
    Verify,
}

/// Tolerances of the bisection and of the property battery.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub bisection: f64,
    pub symmetry: f64,
    pub energy_slope: f64,
    pub pi_slope: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { bisection: 1e-4, symmetry: 1e-6, energy_slope: 2.7, pi_slope: 1.7 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub solver: SolverOptions,
    /// Collocation points for `verify`.
    pub verify_points: usize,
    pub lambda: Option<f64>,
    /// Bubble centre for `energy-sweep`; the maximiser of g when absent.
    pub zeta: Option<[f64; 3]>,
    pub grid: usize,
    pub mu_list: Vec<f64>,
    pub quadrature_level: u32,
    pub tolerances: Tolerances,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: DomainSpec::Ball { radius: 1.0, center: [0.0; 3] },
            solver: SolverOptions::default(),
            verify_points: defaults::VERIFY_POINTS,
            lambda: None,
            zeta: None,
            grid: defaults::GRID,
            mu_list: default_mu_list(),
            quadrature_level: defaults::QUADRATURE_LEVEL,
            tolerances: Tolerances::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Seven scales spread geometrically over the default window, largest first.
pub fn default_mu_list() -> Vec<f64> {
    let [lo, hi] = defaults::MU_WINDOW;
    (0..7).map(|i| hi * (lo / hi).powf(i as f64 / 6.0)).collect()
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.bisection", t.bisection),
            ("tolerances.symmetry", t.symmetry),
            ("tolerances.energy_slope", t.energy_slope),
            ("tolerances.pi_slope", t.pi_slope),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("lambda must be positive, got {l}")));
            }
        }
        if self.grid < 2 {
            return Err(Error::Config("grid needs at least 2 points per axis".into()));
        }
        if self.mu_list.iter().any(|m| m.is_nan() || *m <= 0.0) {
            return Err(Error::Config("mu_list entries must be positive".into()));
        }
        self.domain_checked()?;
        Ok(())
    }

    fn domain_checked(&self) -> Result<Domain> {
        Domain::from_spec(&self.domain).map_err(|e| Error::Config(e.to_string()))
    }

    fn settings(&self) -> CriticalSettings {
        CriticalSettings { solver: self.solver, grid: self.grid, tol: self.tolerances.bisection }
    }

    fn lambda_required(&self) -> Result<f64> {
        self.lambda.ok_or_else(|| Error::Config("this command needs --lambda or a lambda entry in the config".into()))
    }
}

/// Outcome of a command: files written and the text for stdout.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub report: String,
    /// False when a numerical check failed.
    pub passed: bool,
}

/// Exit status for a command result.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.passed => 0,
        Ok(_) => 2,
        Err(Error::Config(_) | Error::Json(_) | Error::Io(_)) => 1,
        Err(_) => 2,
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(l) = cli.lambda {
        cfg.lambda = Some(l);
    }
    if let Some(g) = cli.grid {
        cfg.grid = g;
    }
    if let Some(m) = &cli.mu_list {
        cfg.mu_list = m.clone();
    }
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::Config(format!("{}: {e}", cfg.out_dir.display())))?;
    let log = |msg: &str| {
        if cli.verbose {
            eprintln!("{msg}");
        }
    };
    match cli.command {
        Command::BallAnalytic => cmd_ball_analytic(&cfg),
        Command::RobinMap => cmd_robin_map(&cfg, &log),
        Command::LambdaStar => cmd_lambda_star(&cfg, &log),
        Command::EnergySweep => cmd_energy_sweep(&cfg, &log),
        Command::Verify => cmd_verify(&cfg, &log),
    }
}

/// Write through a temporary sibling and rename into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn emit(cfg: &RunConfig, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = cfg.out_dir.join(name);
    write_atomic(&path, contents)?;
    files.push(path);
    Ok(())
}

/// Metadata attached to JSON outputs.
fn metadata(cfg: &RunConfig) -> serde_json::Value {
    serde_json::json!({
        "config": cfg,
        "multistart": format!("top {} grid values, no random seed", defaults::MULTISTART),
    })
}

pub fn robin_csv(rows: &[RobinRow]) -> String {
    let mut out = String::from("x,y,z,g,residual\n");
    for r in rows {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", r.x, r.y, r.z, r.g, r.residual);
    }
    out
}

pub fn cmd_ball_analytic(cfg: &RunConfig) -> Result<Outcome> {
    let root = lambda_star_ball_analytic();
    let mut table = String::from("lambda,g0\n");
    for l in [0.5, 1.0, root.lambda_star, 2.0, 4.0] {
        let _ = writeln!(table, "{l:.16e},{:.16e}", g_ball_analytic(l)?);
    }
    let json = serde_json::json!({ "lambda_star": root.lambda_star, "residual": root.residual });
    let mut files = Vec::new();
    emit(cfg, "ball_analytic.json", &serde_json::to_string_pretty(&json)?, &mut files)?;
    emit(cfg, "ball_g0.csv", &table, &mut files)?;
    let report = format!("lambda* = {:.16e}\nresidual = {:.3e}\n{table}", root.lambda_star, root.residual);
    Ok(Outcome { files, report, passed: true })
}

pub fn cmd_robin_map(cfg: &RunConfig, log: &dyn Fn(&str)) -> Result<Outcome> {
    let domain = cfg.domain_checked()?;
    let lambda = cfg.lambda_required()?;
    log(&format!("building solver: lambda = {lambda}, n = {}", cfg.solver.n));
    let ev = RobinEvaluator::new(lambda, &domain, cfg.solver)?;
    let rows = ev.map(cfg.grid)?;
    let mut files = Vec::new();
    emit(cfg, "robin_map.csv", &robin_csv(&rows), &mut files)?;
    let best = rows.iter().max_by(|a, b| a.g.total_cmp(&b.g));
    let report = match best {
        Some(r) => format!("{} rows; max g = {:.16e} at ({}, {}, {})", rows.len(), r.g, r.x, r.y, r.z),
        None => "no grid points outside the margin".into(),
    };
    Ok(Outcome { files, report, passed: true })
}

pub fn cmd_lambda_star(cfg: &RunConfig, log: &dyn Fn(&str)) -> Result<Outcome> {
    let domain = cfg.domain_checked()?;
    log("bracketing and bisecting sup g");
    let r = lambda_star(&domain, &cfg.settings())?;
    let mut json = serde_json::to_value(&r)?;
    json["metadata"] = metadata(cfg);
    let mut files = Vec::new();
    emit(cfg, "lambda_star.json", &serde_json::to_string_pretty(&json)?, &mut files)?;
    emit(cfg, "lambda_star_history.csv", &r.history_csv(), &mut files)?;
    let report = format!(
        "lambda* = {:.16e} (bracket width {:.1e}, {} evaluations)\nmaximiser = ({}, {}, {})",
        r.lambda_star,
        r.tolerance,
        r.history.len(),
        r.maximizer.x,
        r.maximizer.y,
        r.maximizer.z
    );
    Ok(Outcome { files, report, passed: true })
}

pub fn cmd_energy_sweep(cfg: &RunConfig, log: &dyn Fn(&str)) -> Result<Outcome> {
    let domain = cfg.domain_checked()?;
    let lambda = cfg.lambda_required()?;
    let ev = RobinEvaluator::new(lambda, &domain, cfg.solver)?;
    let zeta = match cfg.zeta {
        Some(z) => Point3::from(z),
        None => {
            log("locating the maximiser of g");
            ev.sup_g(cfg.grid, ev.margin())?.argmax
        }
    };
    let scale = 0.5 * domain.diameter();
    let mus: Vec<f64> = cfg.mu_list.iter().map(|m| m * scale).collect();
    log(&format!("sweeping {} scales at level {}", mus.len(), cfg.quadrature_level));
    let rep = expansion_check(&ev, &zeta, &mus, cfg.quadrature_level)?;
    let mut json: serde_json::Value = serde_json::from_str(&rep.summary_json())?;
    json["metadata"] = metadata(cfg);
    let mut files = Vec::new();
    emit(cfg, "energy_sweep.csv", &rep.to_csv(), &mut files)?;
    emit(cfg, "energy_sweep.json", &serde_json::to_string_pretty(&json)?, &mut files)?;
    let slope = rep.slope.map_or("none (remainder not monotone)".to_string(), |s| format!("{s:.4}"));
    Ok(Outcome { files, report: format!("g(zeta) = {:.16e}\nremainder slope = {slope}", rep.g), passed: true })
}

/// One entry of the property battery.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

/// Symmetry, monotonicity, boundary behaviour, limits, constants and expansion slopes.
pub fn verification_battery(cfg: &RunConfig, log: &dyn Fn(&str)) -> Result<Vec<Check>> {
    let domain = cfg.domain_checked()?;
    let solver = SolverOptions { n: cfg.verify_points, ..cfg.solver };
    let c = domain.center();
    let half = 0.5 * domain.diameter();
    // λ scale of the domain: λ* scales like 1/R²
    let unit = 1.0 / (half * half);
    let tol = cfg.tolerances;
    let mut checks = Vec::new();

    let root = lambda_star_ball_analytic();
    checks.push(Check::new(
        "ball_root",
        (root.lambda_star - 1.43923).abs() < 1e-5 && root.residual.abs() < 1e-10,
        format!("lambda* = {:.10}, residual {:.1e}", root.lambda_star, root.residual),
    ));

    let exact = constants().as_array();
    let quad = constants_by_quadrature().as_array();
    let worst = exact.iter().zip(&quad).map(|(e, q)| ((q - e) / e).abs()).fold(0.0, f64::max);
    checks.push(Check::new("constants", worst <= 1e-8, format!("max relative error {worst:.2e}")));

    log("symmetry and monotonicity in lambda");
    let ev = RobinEvaluator::new(unit, &domain, solver)?;
    let probes: Vec<Point3> = [[0.3, 0.0, 0.0], [-0.2, 0.4, 0.1], [0.0, 0.1, -0.5], [0.1, 0.1, 0.1]]
        .iter()
        .map(|p| c + Point3::from(*p) * half)
        .collect();
    let mut asym: f64 = 0.0;
    for (i, x) in probes.iter().enumerate() {
        for y in &probes[i + 1..] {
            asym = asym.max((ev.green(x, y)? - ev.green(y, x)?).abs());
        }
    }
    checks.push(Check::new("green_symmetry", asym <= tol.symmetry, format!("max |G(x,y) - G(y,x)| = {asym:.2e}")));

    let mut min_dg = f64::INFINITY;
    for x in probes.iter().chain(std::iter::once(&c)) {
        match ev.dg_dlambda(x) {
            Ok(v) => min_dg = min_dg.min(v),
            Err(Error::InvariantViolation(_)) => min_dg = min_dg.min(0.0),
            Err(e) => return Err(e),
        }
    }
    checks.push(Check::new("dg_dlambda_positive", min_dg > 0.0, format!("min dg/dlambda = {min_dg:.4e}")));

    let settings = CriticalSettings { solver, grid: cfg.grid, tol: tol.bisection };
    let ms = [0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|f| sup_at(&domain, f * unit, &settings).map(|(s, _)| s.m))
        .collect::<Result<Vec<_>>>()?;
    checks.push(Check::new(
        "sup_g_increasing",
        ms.windows(2).all(|w| w[1] > w[0]),
        format!("M at lambda = (0.5, 1, 2, 4)/R^2: {ms:.4?}"),
    ));
    let m10 = sup_at(&domain, 10.0 * unit, &settings)?.0.m;
    checks.push(Check::new("sup_g_positive_at_10", m10 > 0.0, format!("M = {m10:.4e} at lambda = 10/R^2")));

    log("boundary behaviour");
    let depths = [0.4, 0.2, 0.1];
    let mut decreasing = true;
    for dir in [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [-0.6, 0.0, -0.8]] {
        let u = Point3::from(dir);
        let reach = domain.ray_exit(&c, &u);
        let g = depths.iter().map(|d| ev.g(&(c + u * (reach - d * half)))).collect::<Result<Vec<_>>>()?;
        decreasing &= g.windows(2).all(|w| w[1] < w[0]);
    }
    checks.push(Check::new("boundary_decrease", decreasing, format!("g decreases along rays at depths {depths:?} R")));

    if let DomainSpec::Ball { radius, center } = cfg.domain {
        let s = BallSeries::for_depth(unit, Point3::from(center), radius, radius * (1.0 - 0.0125))?;
        let ds = [0.1, 0.05, 0.025, 0.0125];
        let rests: Vec<f64> = ds
            .iter()
            .map(|d| {
                let x = Point3::from(center) + Point3::new(0.0, 0.0, radius * (1.0 - d));
                s.robin(&x) + 1.0 / (8.0 * PI * d * radius)
            })
            .collect();
        // the remainder after the image-charge term grows only logarithmically
        let bounded = rests.iter().all(|r| r.abs() <= 3.0 * rests[0].abs().max(1.0 / radius));
        checks.push(Check::new("boundary_image_law", bounded, format!("g + 1/(8 pi d) at d/R = {ds:?}: {rests:.4?}")));
    }

    log("small-lambda limit");
    let target = -1.0 / domain.volume();
    let lg = [0.1, 0.05, 0.025]
        .iter()
        .map(|f| {
            let l = f * unit;
            RobinEvaluator::new(l, &domain, solver)?.g(&c).map(|g| l * g)
        })
        .collect::<Result<Vec<_>>>()?;
    let approaching = lg.windows(2).all(|w| (w[1] - target).abs() < (w[0] - target).abs());
    checks.push(Check::new(
        "small_lambda_limit",
        approaching && lg.iter().all(|v| *v < 0.0),
        format!("lambda g(center) = {lg:.6?}, limit -1/|domain| = {target:.6}"),
    ));

    log("critical parameter and expansions");
    let crit = lambda_star(&domain, &settings)?;
    let lambda = crit.lambda_star + 0.05 * unit;
    let ev = RobinEvaluator::new(lambda, &domain, solver)?;
    let zeta = ev.sup_g(cfg.grid, ev.margin())?.argmax;
    let mus: Vec<f64> = cfg.mu_list.iter().map(|m| m * half).collect();
    let rep = expansion_check(&ev, &zeta, &mus, cfg.quadrature_level)?;
    checks.push(Check::new(
        "energy_expansion_slope",
        rep.slope.is_some_and(|s| s >= tol.energy_slope),
        format!("lambda* = {:.6}, slope {:?}", crit.lambda_star, rep.slope),
    ));
    let d0 = d0_solve(lambda, defaults::D0_RMAX)?;
    let pi_probes: Vec<Point3> =
        [0.0, 0.05, 0.1, 0.2, 0.3].iter().map(|d| zeta + Point3::new(d * half, 0.0, 0.0)).collect();
    let pi = pi_expansion_check(&ev, &zeta, &mus, &pi_probes, &d0)?;
    checks.push(Check::new(
        "pi_expansion_slope",
        pi.min_slope().is_some_and(|s| s >= tol.pi_slope),
        format!("min slope {:?}", pi.min_slope()),
    ));
    Ok(checks)
}

pub fn cmd_verify(cfg: &RunConfig, log: &dyn Fn(&str)) -> Result<Outcome> {
    let checks = verification_battery(cfg, log)?;
    let passed = checks.iter().all(|c| c.passed);
    let mut report = String::new();
    for c in &checks {
        let _ = writeln!(report, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let json = serde_json::json!({ "passed": passed, "checks": checks, "metadata": metadata(cfg) });
    let mut files = Vec::new();
    emit(cfg, "verify.json", &serde_json::to_string_pretty(&json)?, &mut files)?;
    Ok(Outcome { files, report, passed })
}
