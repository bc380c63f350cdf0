use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use tubecert::certificate::symmetric_samples;
use tubecert::field::{boundary_positivity, mu, verify_by_finite_differences};
use tubecert::solver::{
    energy_identity, ground_state, pohozaev_residual, search_nontrivial, solve_semilinear, solve_source, trial_start,
    tube_first_mode, TrialOutcome, TrialStatus, COLLAPSE_THRESHOLD,
};
use tubecert::{
    build_chart, check_condition_f, coefficient, critical_eps, mesh_tube, reparametrize_arclength, ChartLocation,
    Curve, CurveSpec, DiscreteSolution, Exponents, MuGrid, Nonlinearity, Source, TriMesh, TubeChart,
};

use crate::config::ExperimentConfig;
use crate::exit::{Failure, NOT_CERTIFIED, NUMERICAL_FAILURE, OK};

pub const SWEEP_HEADER: &str = "eps,mu,C,trial,seed,status,sup_norm,residual,relative_residual,iterations";
pub const POHOZAEV_HEADER: &str = "level,vertices,h,lhs,rhs_jacobian,rhs_div,residual,relative_residual,energy_gap";

const GROUND_STATE_STEPS: usize = 60;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn load_curve(path: &Path) -> Result<Curve, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read curve {}: {e}", path.display())))?;
    let spec = CurveSpec::from_json(&text).map_err(|e| Failure::from(e).context(&path.display().to_string()))?;
    reparametrize_arclength(&spec).map_err(|e| Failure::from(e).context(&path.display().to_string()))
}

/// Chart valid up to `eps`; a larger request than the validated half-width is an input error.
fn chart_covering(curve: &Curve, eps: f64) -> Result<TubeChart, Failure> {
    let chart = build_chart(curve, eps).map_err(|e| Failure::from(e).context("chart construction failed"))?;
    if chart.eps_bar1() < eps * (1.0 - 1e-12) {
        return Err(Failure::input(format!(
            "chart construction failed: half-width {eps} exceeds the validated chart half-width {:.6e} of `{}` \
             (curvature bound {:.6e}, sampled reach {:.6e})",
            chart.eps_bar1(),
            curve.name(),
            chart.limits().curvature_bound,
            chart.limits().reach_estimate
        )));
    }
    Ok(chart)
}

/// Writes `name` into the output directory, or to stdout when `stdout` is set
/// and no directory was configured.
fn emit(cfg: &ExperimentConfig, name: &str, content: &str, stdout: bool) -> Result<(), Failure> {
    match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| Failure::numerical(format!("cannot create {}: {e}", dir.display())))?;
            let path = dir.join(name);
            std::fs::write(&path, content)
                .map_err(|e| Failure::numerical(format!("cannot write {}: {e}", path.display())))
        }
        None if stdout => {
            let mut out = std::io::stdout().lock();
            match out.write_all(content.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(Failure::numerical(format!("cannot write to stdout: {e}")))
                }
                _ => Ok(()),
            }
        }
        None => Ok(()),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn certify(cfg: &ExperimentConfig) -> Result<i32, Failure> {
    let exponents = Exponents::new(cfg.n, cfg.p()?, cfg.q()?)?;
    let curve = load_curve(cfg.curve_path()?)?;
    let requested = cfg.eps.iter().copied().fold(f64::NAN, f64::max);
    let requested = if requested.is_nan() { curve.length() } else { requested };
    let chart = build_chart(&curve, requested).map_err(|e| Failure::from(e).context("chart construction failed"))?;
    let f = cfg.nonlinearity()?;
    let condition = check_condition_f(&f, exponents.q(), &symmetric_samples(3.0, 601))?;
    let cert = critical_eps(&chart, &exponents)?.with_condition(condition);
    emit(cfg, "certificate.json", &format!("{}\n", cert.to_json()), true)?;
    emit(cfg, "ladder.csv", &cert.ladder_csv(), false)?;
    eprintln!(
        "{}: {} eps_bar = {} (mu = {}, C = {}){}",
        cert.curve,
        if cert.is_certified() { "certified," } else { "not certified," },
        num(cert.eps_bar),
        num(cert.mu_at_eps_bar),
        num(cert.coefficient_at_eps_bar),
        if cert.geometry_limited { ", geometry-limited" } else { "" }
    );
    for w in &cert.warnings {
        eprintln!("warning: {w}");
    }
    Ok(if cert.is_certified() { OK } else { NOT_CERTIFIED })
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    value: f64,
    tolerance: f64,
    detail: String,
}

#[derive(Debug, Serialize)]
struct SelftestReport {
    curve: String,
    eps: f64,
    eps_bar1: f64,
    passed: bool,
    checks: Vec<Check>,
}

pub fn selftest(cfg: &ExperimentConfig) -> Result<i32, Failure> {
    let curve = load_curve(cfg.curve_path()?)?;
    let eps = match cfg.eps.as_slice() {
        [] => None,
        _ => Some(cfg.single_eps()?),
    };
    let chart = match eps {
        Some(e) => chart_covering(&curve, e)?,
        None => {
            build_chart(&curve, curve.length()).map_err(|e| Failure::from(e).context("chart construction failed"))?
        }
    };
    let eps = eps.unwrap_or(0.5 * chart.eps_bar1());
    let fd_eps = eps.min(0.99 * chart.eps_bar1());
    let (sup_kappa, _) = curve.curvature_bounds(2000);
    let fd_tol = if sup_kappa == 0.0 { 1e-9 } else { 1e-5 };
    let mut checks = Vec::new();

    let fd = verify_by_finite_differences(&chart, fd_eps, 1000, cfg.seed)?;
    checks.push(Check {
        name: "finite-differences",
        passed: fd.max_discrepancy() <= fd_tol,
        value: fd.max_discrepancy(),
        tolerance: fd_tol,
        detail: format!("{} samples, worst at t = {:.6}, r = {:.6}", fd.samples, fd.worst_t, fd.worst_r),
    });

    let bp = boundary_positivity(&chart, eps, 10_000)?;
    checks.push(Check {
        name: "boundary-positivity",
        passed: bp.min_value >= -1e-12,
        value: bp.min_value,
        tolerance: -1e-12,
        detail: format!(
            "{} samples, minimum on {} at t = {:.6}, r = {:.6}",
            bp.samples,
            bp.min_tag.as_str(),
            bp.min_t,
            bp.min_r
        ),
    });

    let (a, b) = chart.interval();
    let mut worst: f64 = 0.0;
    let mut outside = 0;
    for i in 0..50 {
        let t = a + (b - a) * (i as f64 + 0.5) / 50.0;
        for j in 0..20 {
            let r = eps * (-1.0 + 2.0 * (j as f64 + 0.5) / 20.0);
            let x = chart.to_physical(t, r)?;
            match chart.to_chart(x)? {
                ChartLocation::Inside { t: t2, r: r2 } => worst = worst.max((t2 - t).abs()).max((r2 - r).abs()),
                ChartLocation::Outside => outside += 1,
            }
        }
    }
    checks.push(Check {
        name: "chart-round-trip",
        passed: outside == 0 && worst <= 1e-9,
        value: worst,
        tolerance: 1e-9,
        detail: format!("1000 points, {outside} reported outside"),
    });

    let m = mu(&chart, eps, MuGrid::default())?;
    let bound = {
        let samples = curve.sample_params(4000);
        let mut sup_d = curve.tkappa_prime(m.argmax_t)?.abs();
        for &t in samples.iter().filter(|&&t| t >= a && t <= b) {
            sup_d = sup_d.max(curve.tkappa_prime(t)?.abs());
        }
        eps * sup_d / (1.0 - eps * sup_kappa)
    };
    checks.push(Check {
        name: "mu-bound",
        passed: m.mu.is_finite() && m.mu <= bound * (1.0 + 1e-6) + 1e-15,
        value: m.mu,
        tolerance: bound,
        detail: format!("argmax t = {:.6}, r = {:.6}", m.argmax_t, m.argmax_r),
    });

    let passed = checks.iter().all(|c| c.passed);
    for c in &checks {
        eprintln!("{} {}: {:.3e} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.detail);
    }
    let report = SelftestReport { curve: curve.name().to_string(), eps, eps_bar1: chart.eps_bar1(), passed, checks };
    emit(cfg, "selftest.json", &to_json(&report), true)?;
    Ok(if passed { OK } else { NUMERICAL_FAILURE })
}

fn status_str(s: TrialStatus) -> &'static str {
    match s {
        TrialStatus::Collapsed => "collapsed",
        TrialStatus::Nontrivial => "nontrivial",
        TrialStatus::Diverged => "diverged",
        TrialStatus::NotConverged => "not-converged",
        TrialStatus::Failed => "failed",
    }
}

fn sweep_rows(chart: &TubeChart, exponents: &Exponents, f: &Nonlinearity, eps: f64, cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    let (m, c) = match mu(chart, eps, MuGrid::default()) {
        Ok(v) => (v.mu, coefficient(exponents, v.mu)),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let head = format!("{},{},{}", num(eps), num(m), num(c));
    if cfg.trials == 0 {
        let status = if m.is_nan() { "failed" } else { "" };
        let _ = writeln!(out, "{head},,,{status},,,,");
        return out;
    }
    let mesh = match mesh_tube(chart, eps, cfg.mesh_h(eps)) {
        Ok(mesh) => mesh,
        Err(_) => {
            let _ = writeln!(out, "{head},,,failed,,,,");
            return out;
        }
    };
    let outcomes = search_nontrivial(&mesh, exponents.p(), f, cfg.trials, cfg.seed, &cfg.solver_options());
    for o in outcomes {
        let _ = writeln!(
            out,
            "{head},{},{},{},{},{},{},{}",
            o.trial,
            o.seed,
            status_str(o.status),
            num(o.sup_norm),
            num(o.residual),
            num(o.relative_residual),
            o.iterations
        );
    }
    out
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<i32, Failure> {
    let exponents = Exponents::unchecked(cfg.n, cfg.p()?, cfg.q()?)?;
    if !exponents.is_admissible() {
        eprintln!("note: q = {} does not exceed n p / (n - p); the C column certifies nothing", exponents.q());
    }
    if cfg.eps.is_empty() {
        return Err(Failure::input("sweep needs --eps or --eps-ladder".into()));
    }
    let curve = load_curve(cfg.curve_path()?)?;
    let top = cfg.eps.iter().copied().fold(0.0, f64::max);
    let chart = chart_covering(&curve, top)?;
    let f = cfg.nonlinearity()?;
    let rows: Vec<String> = cfg.eps.par_iter().map(|&e| sweep_rows(&chart, &exponents, &f, e, cfg)).collect();
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for r in rows {
        csv.push_str(&r);
    }
    emit(cfg, "sweep.csv", &csv, true)?;
    Ok(OK)
}

#[derive(Debug, Serialize)]
struct SolveReport {
    curve: String,
    eps: f64,
    h: f64,
    vertices: usize,
    problem: String,
    status: &'static str,
    start: String,
    sup_norm: f64,
    energy: f64,
    residual_norm: f64,
    relative_residual: f64,
    iterations: usize,
    delta: f64,
    trials: Vec<TrialOutcome>,
}

/// Solution on `mesh`: a source solve, the symmetric ground-state start, or the
/// first nontrivial seeded trial.
fn solve_on(
    mesh: &TriMesh,
    cfg: &ExperimentConfig,
    p: f64,
    f: &Nonlinearity,
) -> Result<(DiscreteSolution, String, Vec<TrialOutcome>), Failure> {
    let opts = cfg.solver_options();
    if let Nonlinearity::ConstantSource { c } = f {
        return Ok((solve_source(mesh, p, Source::Constant(*c), &opts)?, "source".into(), Vec::new()));
    }
    if cfg.trials == 0 {
        let u0 = tube_first_mode(mesh)?;
        let sol = ground_state(mesh, p, f, &u0, GROUND_STATE_STEPS, &opts)?;
        return Ok((sol, "first-mode".into(), Vec::new()));
    }
    let outcomes = search_nontrivial(mesh, p, f, cfg.trials, cfg.seed, &opts);
    let pick = outcomes
        .iter()
        .find(|o| o.status == TrialStatus::Nontrivial)
        .or_else(|| outcomes.iter().find(|o| o.status == TrialStatus::Collapsed));
    let Some(o) = pick else {
        return Err(Failure::numerical(format!("none of {} trials converged", outcomes.len())));
    };
    let u0 = trial_start(mesh, p, f, o.trial, cfg.seed).expect("trial start reproduces");
    let sol = solve_semilinear(mesh, p, f, &u0, &opts)?;
    Ok((sol, format!("trial {} (seed {})", o.trial, o.seed), outcomes))
}

fn problem_name(f: &Nonlinearity) -> String {
    match f {
        Nonlinearity::ConstantSource { c } => format!("source {c}"),
        Nonlinearity::PurePower { q } => format!("pure power q = {q}"),
        Nonlinearity::Table { .. } => "tabulated".into(),
        Nonlinearity::Exponential => "exponential".into(),
    }
}

pub fn solve(cfg: &ExperimentConfig) -> Result<i32, Failure> {
    let p = cfg.p()?;
    let f = cfg.nonlinearity()?;
    let curve = load_curve(cfg.curve_path()?)?;
    let eps = cfg.single_eps()?;
    let chart = chart_covering(&curve, eps)?;
    let mesh = mesh_tube(&chart, eps, cfg.mesh_h(eps))?;
    let (sol, start, trials) = solve_on(&mesh, cfg, p, &f)?;
    let status = if f.f(0.0) != 0.0 || sol.sup_norm() >= COLLAPSE_THRESHOLD { "converged" } else { "collapsed" };
    let report = SolveReport {
        curve: curve.name().to_string(),
        eps,
        h: mesh.h,
        vertices: mesh.num_vertices(),
        problem: problem_name(&f),
        status,
        start,
        sup_norm: sol.sup_norm(),
        energy: sol.energy,
        residual_norm: sol.residual_norm,
        relative_residual: sol.relative_residual,
        iterations: sol.iterations,
        delta: sol.delta,
        trials,
    };
    emit(cfg, "solve.json", &to_json(&report), true)?;
    emit(cfg, "solution.txt", &sol.to_text(), false)?;
    eprintln!("{status}: sup |u| = {}, residual {}", num(sol.sup_norm()), num(sol.residual_norm));
    Ok(OK)
}

pub fn pohozaev(cfg: &ExperimentConfig) -> Result<i32, Failure> {
    let p = cfg.p()?;
    let f = cfg.nonlinearity()?;
    let curve = load_curve(cfg.curve_path()?)?;
    let eps = cfg.single_eps()?;
    let chart = chart_covering(&curve, eps)?;
    let mut mesh = mesh_tube(&chart, eps, cfg.mesh_h(eps))?;
    let opts = cfg.solver_options();
    let mut csv = String::from(POHOZAEV_HEADER);
    csv.push('\n');
    let mut guess: Option<Vec<f64>> = None;
    for level in 0..cfg.levels {
        let sol = match (&guess, &f) {
            (Some(u0), Nonlinearity::PurePower { .. } | Nonlinearity::Table { .. } | Nonlinearity::Exponential) => {
                solve_semilinear(&mesh, p, &f, u0, &opts)?
            }
            _ => solve_on(&mesh, cfg, p, &f)?.0,
        };
        let rep = pohozaev_residual(&sol, &chart, p, &f)?;
        let gap = energy_identity(&sol, &f).relative_gap;
        let _ = writeln!(
            csv,
            "{level},{},{},{},{},{},{},{},{}",
            mesh.num_vertices(),
            num(mesh.h),
            num(rep.lhs),
            num(rep.rhs_jacobian),
            num(rep.rhs_div),
            num(rep.residual),
            num(rep.relative_residual),
            num(gap)
        );
        eprintln!("level {level}: {} vertices, relative residual {:.3e}", mesh.num_vertices(), rep.relative_residual);
        if level + 1 < cfg.levels {
            let (fine, parents) = mesh.refine_with_parents(Some(&chart))?;
            guess = Some(TriMesh::prolongate(&sol.nodal_values, &parents));
            mesh = fine;
        }
    }
    emit(cfg, "pohozaev.csv", &csv, true)?;
    Ok(OK)
}

pub fn mesh(cfg: &ExperimentConfig) -> Result<i32, Failure> {
    let curve = load_curve(cfg.curve_path()?)?;
    let eps = cfg.single_eps()?;
    let chart = chart_covering(&curve, eps)?;
    let mesh = mesh_tube(&chart, eps, cfg.mesh_h(eps))?;
    emit(cfg, "mesh.txt", &mesh.to_text(None), true)?;
    let summary = json!({
        "curve": curve.name(),
        "eps": eps,
        "h": mesh.h,
        "vertices": mesh.num_vertices(),
        "triangles": mesh.triangles.len(),
        "boundary_edges": mesh.boundary.len(),
        "area": mesh.total_area(),
    });
    eprintln!("{summary}");
    Ok(OK)
}
