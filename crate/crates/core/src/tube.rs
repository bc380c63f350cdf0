//! Tubular neighbourhood chart `(t, r) -> gamma(t) + r N(t)` and its inverse.

use serde::Serialize;

use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::geom::{axpy, dist, dot, sub, Point};

const MAX_PROJECTION_ITERS: usize = 50;

/// Knobs for the half-width estimate.
#[derive(Debug, Clone, Copy)]
pub struct ChartOptions {
    /// Fraction of `1/sup|kappa|` and of the sampled reach that is accepted.
    pub safety: f64,
    /// Number of curve samples used for the reach estimate and the coarse
    /// nearest-point search.
    pub samples: usize,
}

impl Default for ChartOptions {
    fn default() -> Self {
        ChartOptions { safety: 0.9, samples: 2000 }
    }
}

/// Which constraint determined the validated half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChartLimits {
    pub requested: f64,
    pub curvature_bound: f64,
    pub reach_estimate: f64,
}

/// Result of the inverse chart map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChartLocation {
    Inside { t: f64, r: f64 },
    Outside,
}

/// Coordinate system on the tube of half-width `eps_bar1` around the extended curve.
///
/// The half-width comes from a sampled reach estimate. It is a heuristic lower
/// bound at the configured sampling density, not a proof.
#[derive(Debug, Clone)]
pub struct TubeChart {
    curve: Curve,
    eps_bar1: f64,
    limits: ChartLimits,
    sample_params: Vec<f64>,
    sample_points: Vec<Point>,
}

pub fn build_chart(curve: &Curve, requested_eps: f64) -> Result<TubeChart> {
    build_chart_with(curve, requested_eps, ChartOptions::default())
}

pub fn build_chart_with(curve: &Curve, requested_eps: f64, options: ChartOptions) -> Result<TubeChart> {
    if !(requested_eps > 0.0) || !requested_eps.is_finite() {
        return Err(Error::InvalidInput(format!("requested half-width must be positive, got {requested_eps}")));
    }
    let base = curve.restrict();
    let (sup_kappa, _) = base.curvature_bounds(options.samples);
    let curvature_bound = if sup_kappa > 0.0 { options.safety / sup_kappa } else { f64::INFINITY };
    let eps0 = requested_eps.min(curvature_bound);

    let reach_at = |margin: f64| -> Result<f64> { Ok(sampled_reach(&base.extend(margin)?, options.samples)) };
    let mut reach = reach_at(eps0)?;
    let eps_bar1 = if eps0 <= options.safety * reach {
        eps0
    } else {
        // safety * reach(m) - m is decreasing in m; keep the feasible end.
        let (mut lo, mut hi) = (0.0, eps0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let r = reach_at(mid)?;
            if mid <= options.safety * r {
                lo = mid;
                reach = r;
            } else {
                hi = mid;
            }
        }
        lo
    };
    if !(eps_bar1 > 1e-12 * base.length()) {
        return Err(Error::NoValidHalfWidth { estimate: eps_bar1 });
    }
    let extended = base.extend(eps_bar1)?;
    let sample_params = extended.sample_params(options.samples);
    let sample_points = sample_params.iter().map(|&t| extended.point(t)).collect::<Result<Vec<_>>>()?;
    Ok(TubeChart {
        curve: extended,
        eps_bar1,
        limits: ChartLimits { requested: requested_eps, curvature_bound, reach_estimate: reach },
        sample_params,
        sample_points,
    })
}

/// Sampled reach: `inf |x - y|^2 / (2 |(y - x) . N(x)|)` over sample pairs.
///
/// If two normal segments of length `rho` meet, some pair attains a ratio
/// `<= rho`, so any half-width below the infimum keeps the chart one-to-one.
pub fn sampled_reach(curve: &Curve, samples: usize) -> f64 {
    let frames: Vec<_> = curve.sample_params(samples).into_iter().filter_map(|t| curve.frame_at(t).ok()).collect();
    let mut best = f64::INFINITY;
    for (i, fi) in frames.iter().enumerate() {
        for fj in &frames[i + 1..] {
            let d = sub(fj.point, fi.point);
            let d2 = dot(d, d);
            for denom in [dot(d, fi.normal).abs(), dot(d, fj.normal).abs()] {
                if denom > 1e-15 * d2.sqrt() {
                    best = best.min(d2 / (2.0 * denom));
                }
            }
        }
    }
    best
}

impl TubeChart {
    /// The extended curve the chart is built on.
    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn eps_bar1(&self) -> f64 {
        self.eps_bar1
    }

    pub fn limits(&self) -> ChartLimits {
        self.limits
    }

    /// Parameter interval `[a, b]` of the unextended curve.
    pub fn interval(&self) -> (f64, f64) {
        (self.curve.a(), self.curve.b())
    }

    fn check(&self, t: f64, r: f64) -> Result<()> {
        let (lo, hi) = self.curve.domain();
        let slack = 1e-12 * (1.0 + hi - lo);
        if !(r.abs() <= self.eps_bar1 * (1.0 + 1e-12)) || !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::OutsideChart { t, r, eps_bar1: self.eps_bar1 });
        }
        Ok(())
    }

    /// Forward map `(t, r) -> gamma(t) + r N(t)`.
    pub fn to_physical(&self, t: f64, r: f64) -> Result<Point> {
        self.check(t, r)?;
        let f = self.curve.frame_at(t)?;
        Ok(axpy(r, f.normal, f.point))
    }

    /// Inverse map by coarse nearest-sample search and Newton refinement of
    /// `(x - gamma(t)) . T(t) = 0`.
    pub fn to_chart(&self, x: Point) -> Result<ChartLocation> {
        let (mut best, mut best_d) = (0, f64::INFINITY);
        for (i, &p) in self.sample_points.iter().enumerate() {
            let d = dist(p, x);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        let (lo, hi) = self.curve.domain();
        let spacing = (hi - lo) / (self.sample_points.len() - 1) as f64;
        if best_d > self.eps_bar1 + spacing {
            return Ok(ChartLocation::Outside);
        }
        let scale = 1.0 + x[0].abs().max(x[1].abs());
        let mut t = self.sample_params[best];
        for _ in 0..MAX_PROJECTION_ITERS {
            let f = self.curve.frame_at(t)?;
            let d = sub(x, f.point);
            let g = dot(d, f.tangent);
            let r = dot(d, f.normal);
            let denom = 1.0 - r * f.kappa;
            if !(denom > 0.0) {
                return Ok(ChartLocation::Outside);
            }
            let next = (t + g / denom).clamp(lo, hi);
            let converged = g.abs() <= 1e-15 * scale || (next - t).abs() <= 1e-16 * (1.0 + t.abs());
            let pinned = next == t && (t == lo || t == hi);
            t = next;
            if converged || pinned {
                let f = self.curve.frame_at(t)?;
                let d = sub(x, f.point);
                let r = dot(d, f.normal);
                let residual = dot(d, f.tangent);
                if residual.abs() > 1e-9 * scale || r.abs() > self.eps_bar1 * (1.0 + 1e-12) {
                    return Ok(ChartLocation::Outside);
                }
                return Ok(ChartLocation::Inside { t, r });
            }
        }
        Err(Error::ProjectionFailed { iterations: MAX_PROJECTION_ITERS })
    }

    /// Membership in the piecewise-smooth tube `{gamma(t) + r N(t) : a < t < b, |r| < eps}`
    /// (`n = 2`) or in the cylinder over it, `|y| < s` (`n > 2`).
    ///
    /// `x` holds `n` coordinates; the first two are planar.
    pub fn contains(&self, eps: f64, s: f64, n: usize, x: &[f64]) -> bool {
        if n < 2 || x.len() != n {
            return false;
        }
        if n > 2 {
            let y2: f64 = x[2..].iter().map(|v| v * v).sum();
            if !(y2.sqrt() < s) {
                return false;
            }
        }
        match self.to_chart([x[0], x[1]]) {
            Ok(ChartLocation::Inside { t, r }) => {
                let (a, b) = self.interval();
                r.abs() < eps && t > a && t < b
            }
            _ => false,
        }
    }
}
