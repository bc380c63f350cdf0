//! P1 finite elements for `div(|Du|^{p-2} Du) + f(u) = 0`, `u = 0` on the
//! boundary, on triangle meshes.
//!
//! The discrete functional is
//!
//! ```text
//! J(u) = sum_K |K| (|G_K|^2 + delta^2)^{p/2} / p - sum_i m_i F(u_i)
//! ```
//!
//! with `G_K` the constant gradient on triangle `K` and `m_i` the lumped mass.
//! Newton's method on its stationarity equations is damped by an Armijo line
//! search, on `J` itself for convex source problems and on half the squared
//! residual for semilinear ones.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::certificate::Nonlinearity;
use crate::error::{Error, Result};
use crate::field::{field_value, mu, quadratic_form, MuGrid};
use crate::geom::{dot, Point};
use crate::mesh::TriMesh;
use crate::tube::TubeChart;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Continuation {
    /// First regularization, relative to the mesh diameter.
    pub start: f64,
    /// Geometric shrink factor in `(0, 1)`.
    pub factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Convergence when the max interior nodal residual is below `tol` times its scale.
    pub tol: f64,
    pub max_iterations: usize,
    /// `delta = delta_scale * diameter` in `(|Du|^2 + delta^2)^{(p-2)/2}`.
    pub delta_scale: f64,
    pub continuation: Option<Continuation>,
    /// Iterates with `sup |u|` above this are reported as divergent.
    pub divergence_bound: f64,
    pub max_backtracks: usize,
    /// Extra Newton steps taken after convergence while the residual keeps falling.
    pub polish_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_iterations: 200,
            delta_scale: 1e-8,
            continuation: None,
            divergence_bound: 1e8,
            max_backtracks: 40,
            polish_steps: 2,
        }
    }
}

/// Right-hand side of a source problem `-div(|Du|^{p-2} Du) = s`.
#[derive(Clone, Copy)]
pub enum Source<'a> {
    Constant(f64),
    Function(&'a dyn Fn(Point) -> f64),
    Nodal(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteSolution {
    #[serde(skip)]
    pub mesh: TriMesh,
    pub nodal_values: Vec<f64>,
    pub p: f64,
    /// `(1/p) int |Du|^p - int F(u)`, unregularized.
    pub energy: f64,
    /// Max absolute nodal residual over interior vertices.
    pub residual_norm: f64,
    pub relative_residual: f64,
    pub iterations: usize,
    pub delta: f64,
    /// Regularized functional after each accepted step (source problems only).
    pub energy_history: Vec<f64>,
}

impl DiscreteSolution {
    pub fn sup_norm(&self) -> f64 {
        self.nodal_values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Mesh file with an extra nodal-value column.
    pub fn to_text(&self) -> String {
        self.mesh.to_text(Some(&self.nodal_values))
    }
}

enum Load<'a> {
    Fixed(Vec<f64>),
    Nonlinear(&'a Nonlinearity),
}

/// The discrete functional and its derivatives on the interior unknowns.
pub struct Functional<'a> {
    mesh: &'a TriMesh,
    p: f64,
    delta: f64,
    load: Load<'a>,
    mass: Vec<f64>,
    grads: Vec<[Point; 3]>,
    areas: Vec<f64>,
    /// Unknown index of each vertex, `None` on the boundary.
    index: Vec<Option<usize>>,
    free: Vec<usize>,
}

impl<'a> Functional<'a> {
    fn new(mesh: &'a TriMesh, p: f64, delta: f64, load: Load<'a>) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidInput(format!("p = {p} must exceed 1")));
        }
        let on_boundary = mesh.boundary_nodes();
        let mut index = vec![None; mesh.vertices.len()];
        let mut free = Vec::new();
        for (i, &b) in on_boundary.iter().enumerate() {
            if !b {
                index[i] = Some(free.len());
                free.push(i);
            }
        }
        let grads = (0..mesh.triangles.len()).map(|k| mesh.basis_gradients(k)).collect();
        let areas = (0..mesh.triangles.len()).map(|k| mesh.area(k)).collect();
        Ok(Functional { mesh, p, delta, load, mass: mesh.lumped_mass(), grads, areas, index, free })
    }

    pub fn source(mesh: &'a TriMesh, p: f64, source: Source<'_>, delta: f64) -> Result<Self> {
        let mass = mesh.lumped_mass();
        let values: Vec<f64> = match source {
            Source::Constant(c) => vec![c; mesh.vertices.len()],
            Source::Function(g) => mesh.vertices.iter().map(|&x| g(x)).collect(),
            Source::Nodal(v) => {
                if v.len() != mesh.vertices.len() {
                    return Err(Error::InvalidInput("nodal source has the wrong length".into()));
                }
                v.to_vec()
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("source must be finite".into()));
        }
        let load = values.iter().zip(&mass).map(|(s, m)| s * m).collect();
        Functional::new(mesh, p, delta, Load::Fixed(load))
    }

    pub fn semilinear(mesh: &'a TriMesh, p: f64, f: &'a Nonlinearity, delta: f64) -> Result<Self> {
        f.validate()?;
        Functional::new(mesh, p, delta, Load::Nonlinear(f))
    }

    pub fn num_unknowns(&self) -> usize {
        self.free.len()
    }

    pub fn free_vertices(&self) -> &[usize] {
        &self.free
    }

    fn gradient_on(&self, k: usize, u: &[f64]) -> Point {
        let tri = self.mesh.triangles[k];
        let g = &self.grads[k];
        let mut out = [0.0; 2];
        for a in 0..3 {
            out[0] += u[tri[a]] * g[a][0];
            out[1] += u[tri[a]] * g[a][1];
        }
        out
    }

    fn weight(&self, s: f64) -> f64 {
        (s + self.delta * self.delta).powf(0.5 * (self.p - 2.0))
    }

    /// Regularized functional.
    pub fn energy(&self, u: &[f64]) -> Result<f64> {
        let mut e = 0.0;
        for k in 0..self.mesh.triangles.len() {
            let g = self.gradient_on(k, u);
            e += self.areas[k] * (dot(g, g) + self.delta * self.delta).powf(0.5 * self.p) / self.p;
        }
        match &self.load {
            Load::Fixed(b) => e -= self.free.iter().map(|&i| b[i] * u[i]).sum::<f64>(),
            Load::Nonlinear(f) => {
                for &i in &self.free {
                    e -= self.mass[i] * f.primitive(u[i])?;
                }
            }
        }
        Ok(e)
    }

    /// Stiffness part `sum_K |K| w_K G_K . grad phi_i` for every vertex.
    fn operator(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for (k, tri) in self.mesh.triangles.iter().enumerate() {
            let g = self.gradient_on(k, u);
            let c = self.areas[k] * self.weight(dot(g, g));
            for a in 0..3 {
                out[tri[a]] += c * dot(g, self.grads[k][a]);
            }
        }
        out
    }

    fn load_at(&self, i: usize, u: f64) -> f64 {
        match &self.load {
            Load::Fixed(b) => b[i],
            Load::Nonlinear(f) => self.mass[i] * f.f(u),
        }
    }

    /// Derivative of the functional, zero at boundary vertices.
    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut r = self.operator(u);
        for (i, ri) in r.iter_mut().enumerate() {
            *ri = if self.index[i].is_some() { *ri - self.load_at(i, u[i]) } else { 0.0 };
        }
        r
    }

    /// Typical size of the terms making up the residual, for relative tests.
    fn residual_scale(&self, u: &[f64]) -> f64 {
        let op = self.operator(u);
        let mut a: f64 = 0.0;
        let mut b: f64 = 0.0;
        for &i in &self.free {
            a = a.max(op[i].abs());
            b = b.max(self.load_at(i, u[i]).abs());
        }
        a.max(b)
    }

    fn hessian(&self, u: &[f64]) -> Result<SparseColMat<usize, f64>> {
        let mut trips = Vec::with_capacity(9 * self.mesh.triangles.len() + self.free.len());
        let d2 = self.delta * self.delta;
        for (k, tri) in self.mesh.triangles.iter().enumerate() {
            let g = self.gradient_on(k, u);
            let s = dot(g, g);
            let w = self.weight(s);
            let w2 = if self.p == 2.0 { 0.0 } else { (self.p - 2.0) * (s + d2).powf(0.5 * (self.p - 4.0)) };
            let gp: [f64; 3] = std::array::from_fn(|a| dot(g, self.grads[k][a]));
            for a in 0..3 {
                let Some(ia) = self.index[tri[a]] else { continue };
                for b in 0..3 {
                    let Some(ib) = self.index[tri[b]] else { continue };
                    let v = self.areas[k] * (w * dot(self.grads[k][a], self.grads[k][b]) + w2 * gp[a] * gp[b]);
                    trips.push(Triplet::new(ia, ib, v));
                }
            }
        }
        if let Load::Nonlinear(f) = &self.load {
            for (ii, &i) in self.free.iter().enumerate() {
                trips.push(Triplet::new(ii, ii, -self.mass[i] * f.df(u[i])));
            }
        }
        let n = self.free.len();
        SparseColMat::try_new_from_triplets(n, n, &trips).map_err(|e| Error::LinearSolve(format!("{e:?}")))
    }

    fn newton_direction(&self, u: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        let h = self.hessian(u)?;
        let rhs = Col::<f64>::from_fn(self.free.len(), |ii| -r[self.free[ii]]);
        let lu = h.sp_lu().map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let x = lu.solve(&rhs);
        let mut d = vec![0.0; u.len()];
        for (ii, &i) in self.free.iter().enumerate() {
            d[i] = x[ii];
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("singular Jacobian".into()));
        }
        Ok(d)
    }

    /// Solves the `p = 2` problem with the fixed load; used to start source solves.
    fn poisson(&self) -> Result<Vec<f64>> {
        let Load::Fixed(b) = &self.load else {
            return Err(Error::InvalidInput("poisson start needs a fixed load".into()));
        };
        let lin = Functional {
            mesh: self.mesh,
            p: 2.0,
            delta: 0.0,
            load: Load::Fixed(b.clone()),
            mass: self.mass.clone(),
            grads: self.grads.clone(),
            areas: self.areas.clone(),
            index: self.index.clone(),
            free: self.free.clone(),
        };
        let zero = vec![0.0; self.mesh.vertices.len()];
        let r = lin.gradient(&zero);
        lin.newton_direction(&zero, &r)
    }

    /// `(sum |K| |G_K|^p, sum b_i u_i)` for the fixed load.
    fn ray_terms(&self, u: &[f64]) -> (f64, f64) {
        let a = grad_p_integral(self.mesh, u, self.p);
        let b = match &self.load {
            Load::Fixed(b) => self.free.iter().map(|&i| b[i] * u[i]).sum(),
            Load::Nonlinear(_) => 0.0,
        };
        (a, b)
    }
}

/// `sum_K |K| |G_K|^p`.
pub fn grad_p_integral(mesh: &TriMesh, u: &[f64], p: f64) -> f64 {
    (0..mesh.triangles.len())
        .map(|k| {
            let g = mesh.gradient(k, u);
            mesh.area(k) * dot(g, g).powf(0.5 * p)
        })
        .sum()
}

/// `sum_i m_i u_i f(u_i)`.
pub fn ufu_integral(mesh: &TriMesh, u: &[f64], f: &Nonlinearity) -> f64 {
    mesh.lumped_mass().iter().zip(u).map(|(m, &v)| m * v * f.f(v)).sum()
}

fn unregularized_energy(
    mesh: &TriMesh,
    u: &[f64],
    p: f64,
    primitive: impl Fn(usize, f64) -> Result<f64>,
) -> Result<f64> {
    let mass = mesh.lumped_mass();
    let mut e = grad_p_integral(mesh, u, p) / p;
    for (i, &v) in u.iter().enumerate() {
        e -= mass[i] * primitive(i, v)?;
    }
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Merit {
    Energy,
    Residual,
}

enum NewtonEnd {
    Converged,
    Diverged { iteration: usize, sup_norm: f64 },
    Stalled,
    MaxIterations,
}

struct NewtonRun {
    u: Vec<f64>,
    iterations: usize,
    residual: f64,
    scale: f64,
    history: Vec<f64>,
    end: NewtonEnd,
}

fn sup(u: &[f64]) -> f64 {
    u.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn run_newton(
    func: &Functional,
    mut u: Vec<f64>,
    merit: Merit,
    tol: f64,
    options: &SolverOptions,
) -> Result<NewtonRun> {
    for (i, v) in u.iter_mut().enumerate() {
        if func.index[i].is_none() {
            *v = 0.0;
        }
    }
    let bound = options.divergence_bound * sup(&u).max(1.0);
    let max_free = |r: &[f64]| func.free.iter().fold(0.0_f64, |m, &i| m.max(r[i].abs()));
    let half_sq = |r: &[f64]| 0.5 * func.free.iter().map(|&i| r[i] * r[i]).sum::<f64>();
    let mut r = func.gradient(&u);
    let mut energy = if merit == Merit::Energy { func.energy(&u)? } else { 0.0 };
    let mut history = Vec::new();
    if merit == Merit::Energy {
        history.push(energy);
    }
    let mut polished = 0;
    let mut converged_at: Option<f64> = None;
    for it in 0..=options.max_iterations {
        let res = max_free(&r);
        let scale = func.residual_scale(&u);
        if converged_at.is_none() && (res == 0.0 || res <= tol * scale) {
            converged_at = Some(res);
        }
        if let Some(best) = converged_at {
            if polished >= options.polish_steps || res == 0.0 || res > best {
                return Ok(NewtonRun { u, iterations: it, residual: res, scale, history, end: NewtonEnd::Converged });
            }
            converged_at = Some(res);
        }
        if it == options.max_iterations {
            return Ok(NewtonRun { u, iterations: it, residual: res, scale, history, end: NewtonEnd::MaxIterations });
        }
        let mut d = func.newton_direction(&u, &r)?;
        let slope: f64 = func.free.iter().map(|&i| r[i] * d[i]).sum();
        if merit == Merit::Energy && slope >= 0.0 {
            for &i in &func.free {
                d[i] = -r[i];
            }
        }
        let slope: f64 = func.free.iter().map(|&i| r[i] * d[i]).sum();
        let phi0 = half_sq(&r);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_backtracks {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let s = sup(&trial);
            if !s.is_finite() || s > bound {
                alpha *= 0.5;
                continue;
            }
            let rt = func.gradient(&trial);
            let ok = match merit {
                Merit::Energy => {
                    let et = func.energy(&trial)?;
                    let ok = et <= energy + 1e-4 * alpha * slope
                        || max_free(&rt) <= 0.5 * res
                        || (converged_at.is_some() && max_free(&rt) < res);
                    if ok {
                        energy = et;
                    }
                    ok
                }
                Merit::Residual => half_sq(&rt) <= (1.0 - 2e-4 * alpha) * phi0 || converged_at.is_some(),
            };
            if ok {
                accepted = Some((trial, rt));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, rt)) => {
                u = trial;
                r = rt;
                if merit == Merit::Energy {
                    history.push(energy);
                }
                if converged_at.is_some() {
                    polished += 1;
                }
            }
            None => {
                let (res, scale) = (max_free(&r), func.residual_scale(&u));
                if converged_at.is_some() {
                    return Ok(NewtonRun {
                        u,
                        iterations: it,
                        residual: res,
                        scale,
                        history,
                        end: NewtonEnd::Converged,
                    });
                }
                return Ok(NewtonRun { u, iterations: it, residual: res, scale, history, end: NewtonEnd::Stalled });
            }
        }
        if sup(&u) > bound {
            return Ok(NewtonRun {
                iterations: it + 1,
                residual: f64::INFINITY,
                scale,
                history,
                end: NewtonEnd::Diverged { iteration: it + 1, sup_norm: sup(&u) },
                u,
            });
        }
    }
    unreachable!("loop returns on the last iteration")
}

fn finish(run: NewtonRun) -> Result<NewtonRun> {
    match run.end {
        NewtonEnd::Converged => Ok(run),
        NewtonEnd::Diverged { iteration, sup_norm } => Err(Error::Diverged { iteration, sup_norm }),
        NewtonEnd::Stalled | NewtonEnd::MaxIterations => {
            Err(Error::NotConverged { iterations: run.iterations, residual: run.residual })
        }
    }
}

fn delta_schedule(mesh: &TriMesh, options: &SolverOptions) -> Vec<f64> {
    let diam = mesh.diameter();
    let target = options.delta_scale * diam;
    let mut out = Vec::new();
    if let Some(c) = options.continuation {
        if c.factor > 0.0 && c.factor < 1.0 {
            let mut d = c.start * diam;
            while d > target {
                out.push(d);
                d *= c.factor;
            }
        }
    }
    out.push(target);
    out
}

/// Minimizes `(1/p) int |Du|^p - int s u` over P1 functions vanishing on the boundary.
pub fn solve_source(mesh: &TriMesh, p: f64, source: Source<'_>, options: &SolverOptions) -> Result<DiscreteSolution> {
    let schedule = delta_schedule(mesh, options);
    let mut u: Option<Vec<f64>> = None;
    let mut total = 0;
    let mut run = None;
    for (stage, &delta) in schedule.iter().enumerate() {
        let func = Functional::source(mesh, p, source, delta)?;
        let start = match u.take() {
            Some(u) => u,
            None => {
                // one descent step along the p = 2 solution, with exact minimization on the ray
                let w = func.poisson()?;
                let (a, b) = func.ray_terms(&w);
                if a > 0.0 && b != 0.0 {
                    let lambda = b.signum() * (b.abs() / a).powf(1.0 / (p - 1.0));
                    w.iter().map(|v| lambda * v).collect()
                } else {
                    vec![0.0; mesh.vertices.len()]
                }
            }
        };
        let last = stage + 1 == schedule.len();
        let tol = if last { options.tol } else { options.tol.max(1e-6) };
        let r = finish(run_newton(&func, start, Merit::Energy, tol, options)?)?;
        total += r.iterations;
        u = Some(r.u.clone());
        run = Some((r, delta));
    }
    let (r, delta) = run.expect("schedule is non-empty");
    let values = r.u;
    let load_values: Vec<f64> = match source {
        Source::Constant(c) => vec![c; mesh.vertices.len()],
        Source::Function(g) => mesh.vertices.iter().map(|&x| g(x)).collect(),
        Source::Nodal(v) => v.to_vec(),
    };
    let energy = unregularized_energy(mesh, &values, p, |i, v| Ok(load_values[i] * v))?;
    Ok(DiscreteSolution {
        mesh: mesh.clone(),
        nodal_values: values,
        p,
        energy,
        residual_norm: r.residual,
        relative_residual: if r.scale > 0.0 { r.residual / r.scale } else { 0.0 },
        iterations: total,
        delta,
        energy_history: r.history,
    })
}

/// Damped Newton for `div(|Du|^{p-2} Du) + f(u) = 0` from `u0`; converges to
/// whichever stationary point it reaches, possibly `u = 0`.
pub fn solve_semilinear(
    mesh: &TriMesh,
    p: f64,
    f: &Nonlinearity,
    u0: &[f64],
    options: &SolverOptions,
) -> Result<DiscreteSolution> {
    if u0.len() != mesh.vertices.len() {
        return Err(Error::InvalidInput("initial guess has the wrong length".into()));
    }
    let schedule = delta_schedule(mesh, options);
    let mut u = u0.to_vec();
    let mut total = 0;
    let mut result = None;
    for (stage, &delta) in schedule.iter().enumerate() {
        let func = Functional::semilinear(mesh, p, f, delta)?;
        let last = stage + 1 == schedule.len();
        let tol = if last { options.tol } else { options.tol.max(1e-6) };
        let r = finish(run_newton(&func, u, Merit::Residual, tol, options)?)?;
        total += r.iterations;
        u = r.u.clone();
        result = Some((r, delta));
    }
    let (r, delta) = result.expect("schedule is non-empty");
    let energy = unregularized_energy(mesh, &r.u, p, |_, v| f.primitive(v))?;
    Ok(DiscreteSolution {
        mesh: mesh.clone(),
        nodal_values: r.u,
        p,
        energy,
        residual_norm: r.residual,
        relative_residual: if r.scale > 0.0 { r.residual / r.scale } else { 0.0 },
        iterations: total,
        delta,
        energy_history: Vec::new(),
    })
}

/// Amplitude `A > 0` putting `A u` on the Nehari set
/// `int |D(Au)|^p = sum_i m_i (A u_i) f(A u_i)`.
pub fn nehari_scale(mesh: &TriMesh, p: f64, f: &Nonlinearity, u: &[f64]) -> Option<f64> {
    let a = grad_p_integral(mesh, u, p);
    if !(a > 0.0) {
        return None;
    }
    if let Nonlinearity::PurePower { q } = f {
        let b: f64 = mesh.lumped_mass().iter().zip(u).map(|(m, v)| m * v.abs().powf(*q)).sum();
        return if b > 0.0 && *q != p { Some((a / b).powf(1.0 / (q - p))) } else { None };
    }
    let mass = mesh.lumped_mass();
    let gap = |s: f64| {
        let b: f64 = mass.iter().zip(u).map(|(m, v)| m * (s * v) * f.f(s * v)).sum();
        s.powf(p) * a - b
    };
    let (mut lo, mut hi) = (1e-12_f64, 1e12_f64);
    if !(gap(lo) > 0.0 && gap(hi) < 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-13 {
            break;
        }
    }
    Some((lo * hi).sqrt())
}

/// Positive bump with random centre and widths, in chart coordinates when the
/// mesh has them and in physical coordinates otherwise; zero on the boundary.
pub fn random_bump(mesh: &TriMesh, rng: &mut impl Rng) -> Vec<f64> {
    let coords: Vec<Point> = mesh.chart_coords.clone().unwrap_or_else(|| mesh.vertices.clone());
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for c in &coords {
        for d in 0..2 {
            lo[d] = lo[d].min(c[d]);
            hi[d] = hi[d].max(c[d]);
        }
    }
    let span = [hi[0] - lo[0], hi[1] - lo[1]];
    let centre = [lo[0] + span[0] * rng.random_range(0.2..0.8), lo[1] + span[1] * rng.random_range(0.3..0.7)];
    let short = span[0].min(span[1]);
    let width = [short * rng.random_range(0.3..1.0), short * rng.random_range(0.2..0.4)];
    let boundary = mesh.boundary_nodes();
    coords
        .iter()
        .zip(boundary)
        .map(|(c, b)| {
            if b {
                return 0.0;
            }
            let z = ((c[0] - centre[0]) / width[0]).powi(2) + ((c[1] - centre[1]) / width[1]).powi(2);
            (-z).exp()
        })
        .collect()
}

/// Normalized inverse iteration `-div(|Dw|^{p-2} Dw) = f(u_k)`, `u_{k+1}` = `w`
/// rescaled onto the Nehari set, followed by Newton on the semilinear problem.
pub fn ground_state(
    mesh: &TriMesh,
    p: f64,
    f: &Nonlinearity,
    u0: &[f64],
    steps: usize,
    options: &SolverOptions,
) -> Result<DiscreteSolution> {
    let scale = nehari_scale(mesh, p, f, u0)
        .ok_or_else(|| Error::InvalidInput("initial guess has no Nehari scaling".into()))?;
    let mut u: Vec<f64> = u0.iter().map(|v| scale * v).collect();
    for _ in 0..steps {
        let rhs: Vec<f64> = u.iter().map(|&v| f.f(v)).collect();
        let w = solve_source(mesh, p, Source::Nodal(&rhs), options)?.nodal_values;
        let Some(s) = nehari_scale(mesh, p, f, &w) else { break };
        let next: Vec<f64> = w.iter().map(|v| s * v).collect();
        let change = next.iter().zip(&u).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        u = next;
        if change <= 1e-6 * sup(&u) {
            break;
        }
    }
    solve_semilinear(mesh, p, f, &u, options)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialStatus {
    /// Converged with `sup |u| < 1e-3`.
    Collapsed,
    Nontrivial,
    Diverged,
    NotConverged,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    pub sup_norm: f64,
    pub residual: f64,
    pub relative_residual: f64,
    pub energy: f64,
    pub iterations: usize,
}

pub const COLLAPSE_THRESHOLD: f64 = 1e-3;

/// Seed of trial `k` in a search seeded with `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(trial as u64)
}

/// Seeded random bump of trial `trial`, scaled onto the Nehari set.
pub fn trial_start(mesh: &TriMesh, p: f64, f: &Nonlinearity, trial: usize, seed: u64) -> Option<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, trial));
    let bump = random_bump(mesh, &mut rng);
    let a = nehari_scale(mesh, p, f, &bump)?;
    Some(bump.iter().map(|v| a * v).collect())
}

/// `sin(pi (t - a) / (b - a)) cos(pi r / (2 eps))` on a tube mesh, the shape of
/// the first Dirichlet eigenfunction of the straight tube.
pub fn tube_first_mode(mesh: &TriMesh) -> Result<Vec<f64>> {
    let coords = mesh.chart_coords.as_ref().ok_or_else(|| Error::InvalidInput("not a tube mesh".into()))?;
    let eps = mesh.half_width.ok_or_else(|| Error::InvalidInput("tube mesh without half-width".into()))?;
    let (a, b) = coords.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c[0]), hi.max(c[0])));
    let pi = std::f64::consts::PI;
    Ok(coords
        .iter()
        .map(|c| (pi * (c[0] - a) / (b - a)).sin().max(0.0) * (0.5 * pi * c[1] / eps).cos().max(0.0))
        .collect())
}

/// One trial: a random bump scaled onto the Nehari set, then Newton.
pub fn nontrivial_trial(
    mesh: &TriMesh,
    p: f64,
    f: &Nonlinearity,
    trial: usize,
    seed: u64,
    options: &SolverOptions,
) -> TrialOutcome {
    let s = trial_seed(seed, trial);
    let mut out = TrialOutcome {
        trial,
        seed: s,
        status: TrialStatus::Failed,
        sup_norm: f64::NAN,
        residual: f64::NAN,
        relative_residual: f64::NAN,
        energy: f64::NAN,
        iterations: 0,
    };
    let Some(u0) = trial_start(mesh, p, f, trial, seed) else { return out };
    match solve_semilinear(mesh, p, f, &u0, options) {
        Ok(sol) => {
            out.sup_norm = sol.sup_norm();
            out.residual = sol.residual_norm;
            out.relative_residual = sol.relative_residual;
            out.energy = sol.energy;
            out.iterations = sol.iterations;
            out.status =
                if out.sup_norm < COLLAPSE_THRESHOLD { TrialStatus::Collapsed } else { TrialStatus::Nontrivial };
        }
        Err(Error::Diverged { iteration, sup_norm }) => {
            out.status = TrialStatus::Diverged;
            out.sup_norm = sup_norm;
            out.iterations = iteration;
        }
        Err(Error::NotConverged { iterations, residual }) => {
            out.status = TrialStatus::NotConverged;
            out.residual = residual;
            out.iterations = iterations;
        }
        Err(_) => {}
    }
    out
}

/// Heuristic search for nontrivial solutions from `trials` seeded bumps.
pub fn search_nontrivial(
    mesh: &TriMesh,
    p: f64,
    f: &Nonlinearity,
    trials: usize,
    seed: u64,
    options: &SolverOptions,
) -> Vec<TrialOutcome> {
    (0..trials).map(|k| nontrivial_trial(mesh, p, f, k, seed, options)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    /// `(1 - 1/p) int_boundary |Du|^p v . nu`.
    pub lhs: f64,
    /// `int |Du|^{p-2} dv[Du] . Du`.
    pub rhs_jacobian: f64,
    /// `int div v (F(u) - |Du|^p / p)`.
    pub rhs_div: f64,
    pub residual: f64,
    pub relative_residual: f64,
}

pub const IDENTITY_FLOOR: f64 = 1e-14;

fn check_mesh_chart(mesh: &TriMesh, chart: &TubeChart) -> Result<Vec<Point>> {
    let coords = mesh
        .chart_coords
        .as_ref()
        .ok_or_else(|| Error::MeshChartMismatch("mesh carries no chart coordinates".into()))?;
    let eps = mesh.half_width.ok_or_else(|| Error::MeshChartMismatch("mesh has no half-width".into()))?;
    if eps > chart.eps_bar1() * (1.0 + 1e-12) {
        return Err(Error::MeshChartMismatch(format!(
            "mesh half-width {eps} exceeds chart half-width {}",
            chart.eps_bar1()
        )));
    }
    let tol = 1e-9 * (1.0 + mesh.diameter());
    for (i, c) in coords.iter().enumerate() {
        let x = chart.to_physical(c[0], c[1]).map_err(|e| Error::MeshChartMismatch(format!("vertex {i}: {e}")))?;
        let v = mesh.vertices[i];
        if (x[0] - v[0]).abs() > tol || (x[1] - v[1]).abs() > tol {
            return Err(Error::MeshChartMismatch(format!("vertex {i} does not lie at its chart coordinates")));
        }
    }
    Ok(coords.clone())
}

/// Both sides of the integral identity obtained by testing the equation with
/// `v . Du`. Volume terms use the centroid rule per triangle and the boundary
/// term the midpoint rule per edge with `Du` from the adjacent triangle.
pub fn pohozaev_residual(
    sol: &DiscreteSolution,
    chart: &TubeChart,
    p: f64,
    f: &Nonlinearity,
) -> Result<IdentityReport> {
    let mesh = &sol.mesh;
    let coords = check_mesh_chart(mesh, chart)?;
    let u = &sol.nodal_values;
    let mut rhs_jacobian = 0.0;
    let mut rhs_div = 0.0;
    for (k, tri) in mesh.triangles.iter().enumerate() {
        let g = mesh.gradient(k, u);
        let s = dot(g, g);
        if s == 0.0 && u[tri[0]] == 0.0 && u[tri[1]] == 0.0 && u[tri[2]] == 0.0 {
            continue;
        }
        let t = (coords[tri[0]][0] + coords[tri[1]][0] + coords[tri[2]][0]) / 3.0;
        let r = (coords[tri[0]][1] + coords[tri[1]][1] + coords[tri[2]][1]) / 3.0;
        let fv = field_value(chart, t, r)?;
        let gp = s.powf(0.5 * p);
        let area = mesh.area(k);
        if s > 0.0 {
            rhs_jacobian += area * s.powf(0.5 * (p - 2.0)) * quadratic_form(&fv, g);
        }
        let uc = (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
        rhs_div += area * fv.div_v * (f.primitive(uc)? - gp / p);
    }
    let mut lhs = 0.0;
    for e in &mesh.boundary {
        let g = mesh.gradient(e.triangle, u);
        let s = dot(g, g);
        if s == 0.0 {
            continue;
        }
        let [i, j] = e.nodes;
        let t = 0.5 * (coords[i][0] + coords[j][0]);
        let r = 0.5 * (coords[i][1] + coords[j][1]);
        let fv = field_value(chart, t, r)?;
        lhs += mesh.edge_length(e) * s.powf(0.5 * p) * dot(fv.v, mesh.outward_normal(e));
    }
    lhs *= 1.0 - 1.0 / p;
    let residual = lhs - rhs_jacobian - rhs_div;
    let denom = lhs.abs() + rhs_jacobian.abs() + rhs_div.abs() + IDENTITY_FLOOR;
    Ok(IdentityReport { lhs, rhs_jacobian, rhs_div, residual, relative_residual: residual / denom })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyIdentity {
    pub int_ufu: f64,
    pub int_grad_p: f64,
    pub relative_gap: f64,
}

/// `int u f(u)` against `int |Du|^p`, equal for exact discrete solutions
/// (up to the regularization).
pub fn energy_identity(sol: &DiscreteSolution, f: &Nonlinearity) -> EnergyIdentity {
    let int_ufu = ufu_integral(&sol.mesh, &sol.nodal_values, f);
    let int_grad_p = grad_p_integral(&sol.mesh, &sol.nodal_values, sol.p);
    let relative_gap = if int_grad_p > 0.0 { (int_ufu - int_grad_p).abs() / int_grad_p } else { int_ufu.abs() };
    EnergyIdentity { int_ufu, int_grad_p, relative_gap }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityReport {
    pub eps: f64,
    pub mu: f64,
    /// `[1 - 2/p + (1 + 1/p) mu] int |Du|^p`.
    pub gradient_term: f64,
    /// `int (div v) F(u)`.
    pub div_term: f64,
    pub rhs: f64,
    /// The same bound with `int u f(u) = int |Du|^p` used to eliminate `F`
    /// through `q F <= u f`: `[1 - 2/p + 2/q + (1 + 1/p + 1/q) mu] int |Du|^p`.
    pub tight_rhs: Option<f64>,
    pub energy: EnergyIdentity,
    pub nonnegative: bool,
}

/// Evaluates the right-hand side of the two-dimensional integral inequality
/// `0 <= [1 - 2/p + (1 + 1/p) mu(eps)] int |Du|^p + int (div v) F(u)`.
pub fn inequality_check(sol: &DiscreteSolution, chart: &TubeChart, f: &Nonlinearity) -> Result<InequalityReport> {
    let mesh = &sol.mesh;
    let coords = check_mesh_chart(mesh, chart)?;
    let eps = mesh.half_width.expect("checked above");
    let p = sol.p;
    let m = mu(chart, eps.min(chart.eps_bar1()), MuGrid::default())?.mu;
    let u = &sol.nodal_values;
    let grad_p = grad_p_integral(mesh, u, p);
    let mut div_term = 0.0;
    for (k, tri) in mesh.triangles.iter().enumerate() {
        let uc = (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
        if uc == 0.0 {
            continue;
        }
        let t = (coords[tri[0]][0] + coords[tri[1]][0] + coords[tri[2]][0]) / 3.0;
        let r = (coords[tri[0]][1] + coords[tri[1]][1] + coords[tri[2]][1]) / 3.0;
        div_term += mesh.area(k) * field_value(chart, t, r)?.div_v * f.primitive(uc)?;
    }
    let gradient_term = (1.0 - 2.0 / p + (1.0 + 1.0 / p) * m) * grad_p;
    let rhs = gradient_term + div_term;
    let tight_rhs = match f {
        Nonlinearity::PurePower { q } => Some((1.0 - 2.0 / p + 2.0 / q + (1.0 + 1.0 / p + 1.0 / q) * m) * grad_p),
        _ => None,
    };
    Ok(InequalityReport {
        eps,
        mu: m,
        gradient_term,
        div_term,
        rhs,
        tight_rhs,
        energy: energy_identity(sol, f),
        nonnegative: rhs >= 0.0,
    })
}
