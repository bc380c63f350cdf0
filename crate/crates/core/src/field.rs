//! The Pohozaev-type vector field on the tube,
//!
//! ```text
//! v(gamma(t) + r N(t)) = t T(t) (1 - r kappa(t)) + r N(t),
//! ```
//!
//! its divergence `2 - rho`, its Jacobian quadratic form
//! `(1 - rho) xi_T^2 + xi_N^2`, the cylinder extension to `R^n`, and the
//! perturbation bound `mu(eps) = max |rho|` with
//! `rho(t, r) = r [t kappa]' / (1 - r kappa)`.
//!
//! Everything is evaluated in chart coordinates; finite differences of the
//! physical field appear only in [`verify_by_finite_differences`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curve::{golden_max, Frame};
use crate::error::{Error, Result};
use crate::geom::{axpy, dist, dot, Point};
use crate::mesh::BoundaryTag;
use crate::tube::{ChartLocation, TubeChart};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSample {
    pub t: f64,
    pub r: f64,
    pub v: Point,
    pub div_v: f64,
    /// `r [t kappa]' / (1 - r kappa)`.
    pub ratio: f64,
    pub junction: bool,
    #[serde(skip)]
    pub frame: Frame,
}

/// `r [t kappa]' / (1 - r kappa)` from a frame.
pub fn ratio(frame: &Frame, r: f64) -> f64 {
    r * frame.tkappa_prime / (1.0 - r * frame.kappa)
}

fn frame_in_chart(chart: &TubeChart, t: f64, r: f64) -> Result<Frame> {
    chart.to_physical(t, r)?;
    chart.curve().frame_at(t)
}

fn sample(frame: Frame, r: f64) -> FieldSample {
    let t = frame.t;
    let rho = ratio(&frame, r);
    let v = axpy(t * (1.0 - r * frame.kappa), frame.tangent, [r * frame.normal[0], r * frame.normal[1]]);
    FieldSample { t, r, v, div_v: 2.0 - rho, ratio: rho, junction: frame.junction, frame }
}

pub fn field_value(chart: &TubeChart, t: f64, r: f64) -> Result<FieldSample> {
    Ok(sample(frame_in_chart(chart, t, r)?, r))
}

/// `dv[N(t)] = -t kappa T + N`.
pub fn dv_normal(chart: &TubeChart, t: f64, r: f64) -> Result<Point> {
    let f = frame_in_chart(chart, t, r)?;
    Ok(axpy(-t * f.kappa, f.tangent, f.normal))
}

/// `dv[T(t)] = (1 - rho) T + t kappa N`.
pub fn dv_tangent(chart: &TubeChart, t: f64, r: f64) -> Result<Point> {
    let f = frame_in_chart(chart, t, r)?;
    Ok(axpy(1.0 - ratio(&f, r), f.tangent, [t * f.kappa * f.normal[0], t * f.kappa * f.normal[1]]))
}

/// `dv[xi]`, assembled from the images of `T` and `N`.
pub fn dv_apply(s: &FieldSample, xi: Point) -> Point {
    let f = &s.frame;
    let (xt, xn) = (dot(xi, f.tangent), dot(xi, f.normal));
    let dvt = axpy(1.0 - s.ratio, f.tangent, [s.t * f.kappa * f.normal[0], s.t * f.kappa * f.normal[1]]);
    let dvn = axpy(-s.t * f.kappa, f.tangent, f.normal);
    axpy(xt, dvt, [xn * dvn[0], xn * dvn[1]])
}

/// `(1 - rho) (xi . T)^2 + (xi . N)^2` for a precomputed sample.
pub fn quadratic_form(s: &FieldSample, xi: Point) -> f64 {
    let (xt, xn) = (dot(xi, s.frame.tangent), dot(xi, s.frame.normal));
    (1.0 - s.ratio) * xt * xt + xn * xn
}

pub fn jacobian_form(chart: &TubeChart, t: f64, r: f64, xi: Point) -> Result<f64> {
    Ok(quadratic_form(&field_value(chart, t, r)?, xi))
}

/// Value and divergence of the extension `(v(x1, x2), y)` to `R^n`, `n >= 3`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NdSample {
    pub value: Vec<f64>,
    pub div: f64,
    pub ratio: f64,
}

pub fn field_value_nd(chart: &TubeChart, t: f64, r: f64, y: &[f64], n: usize) -> Result<NdSample> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("cylinder field needs n >= 3, got {n}")));
    }
    if y.len() != n - 2 {
        return Err(Error::InvalidInput(format!("expected {} transverse coordinates, got {}", n - 2, y.len())));
    }
    let s = field_value(chart, t, r)?;
    let mut value = vec![s.v[0], s.v[1]];
    value.extend_from_slice(y);
    Ok(NdSample { value, div: n as f64 - s.ratio, ratio: s.ratio })
}

/// `(1 - rho) xi_T^2 + xi_N^2 + |psi|^2`.
pub fn jacobian_form_nd(chart: &TubeChart, t: f64, r: f64, xi: Point, psi: &[f64]) -> Result<f64> {
    Ok(jacobian_form(chart, t, r, xi)? + psi.iter().map(|p| p * p).sum::<f64>())
}

/// Field at a physical point, through the inverse chart.
pub fn physical_field(chart: &TubeChart, x: Point) -> Result<FieldSample> {
    match chart.to_chart(x)? {
        ChartLocation::Inside { t, r } => field_value(chart, t, r),
        ChartLocation::Outside => Err(Error::OutsideChart { t: f64::NAN, r: f64::NAN, eps_bar1: chart.eps_bar1() }),
    }
}

/// Smallest `v . nu` found on the boundary of the tube `D_eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub samples: usize,
    pub min_value: f64,
    pub min_t: f64,
    pub min_r: f64,
    pub min_tag: BoundaryTag,
}

/// Samples `v . nu` on the lateral walls (`nu = +-N`) and on the flat end caps
/// (`nu = -T(a)`, `+T(b)`), with samples split in proportion to length.
pub fn boundary_positivity(chart: &TubeChart, eps: f64, samples: usize) -> Result<BoundaryReport> {
    if !(eps > 0.0 && eps <= chart.eps_bar1()) {
        return Err(Error::OutsideChart { t: f64::NAN, r: eps, eps_bar1: chart.eps_bar1() });
    }
    let (a, b) = chart.interval();
    let len = b - a;
    let perimeter = 2.0 * len + 4.0 * eps;
    let wall = ((samples as f64 * len / perimeter).round() as usize).max(2);
    let cap = ((samples.saturating_sub(2 * wall)) / 2).max(2);
    let mut report =
        BoundaryReport { samples: 0, min_value: f64::INFINITY, min_t: a, min_r: 0.0, min_tag: BoundaryTag::EndStart };
    let mut record = |value: f64, t: f64, r: f64, tag: BoundaryTag| {
        report.samples += 1;
        if value < report.min_value {
            report.min_value = value;
            report.min_t = t;
            report.min_r = r;
            report.min_tag = tag;
        }
    };
    for i in 0..wall {
        let t = a + len * i as f64 / (wall - 1) as f64;
        for (r, sign, tag) in [(eps, 1.0, BoundaryTag::LateralPlus), (-eps, -1.0, BoundaryTag::LateralMinus)] {
            let s = field_value(chart, t, r)?;
            record(sign * dot(s.v, s.frame.normal), t, r, tag);
        }
    }
    for j in 0..cap {
        let r = -eps + 2.0 * eps * j as f64 / (cap - 1) as f64;
        for (t, sign, tag) in [(a, -1.0, BoundaryTag::EndStart), (b, 1.0, BoundaryTag::EndEnd)] {
            let s = field_value(chart, t, r)?;
            record(sign * dot(s.v, s.frame.tangent), t, r, tag);
        }
    }
    Ok(report)
}

/// Tensor grid for the `mu` maximization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MuGrid {
    pub nt: usize,
    pub nr: usize,
}

impl Default for MuGrid {
    fn default() -> Self {
        MuGrid { nt: 512, nr: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuValue {
    pub eps: f64,
    pub mu: f64,
    pub argmax_t: f64,
    pub argmax_r: f64,
}

/// `mu(eps) = max { |rho(t, r)| : |r| <= eps, t in [a - eps, b + eps] }`.
///
/// Curvature vanishes on the straight extensions, so `rho = 0` there and the
/// grid is laid over `[a, b]` (junction values are the one-sided inner ones,
/// which dominate the zero outer ones). The best grid point is refined by
/// golden-section search in `t` at fixed `r`.
pub fn mu(chart: &TubeChart, eps: f64, grid: MuGrid) -> Result<MuValue> {
    if !(eps > 0.0 && eps <= chart.eps_bar1() * (1.0 + 1e-12)) {
        return Err(Error::OutsideChart { t: f64::NAN, r: eps, eps_bar1: chart.eps_bar1() });
    }
    let eps = eps.min(chart.eps_bar1());
    let (a, b) = chart.interval();
    let curve = chart.curve();
    let nt = grid.nt.max(2);
    let nr = grid.nr.max(2);
    let ts: Vec<f64> =
        (0..nt).map(|i| if i == nt - 1 { b } else { a + (b - a) * i as f64 / (nt - 1) as f64 }).collect();
    let rs: Vec<f64> =
        (0..nr).map(|j| if j == nr - 1 { eps } else { -eps + 2.0 * eps * j as f64 / (nr - 1) as f64 }).collect();
    let mut best = MuValue { eps, mu: 0.0, argmax_t: 0.0, argmax_r: 0.0 };
    let mut best_i = 0;
    for (i, &t) in ts.iter().enumerate() {
        let frame = curve.frame_at(t)?;
        for &r in &rs {
            let value = ratio(&frame, r).abs();
            if value > best.mu {
                best = MuValue { eps, mu: value, argmax_t: t, argmax_r: r };
                best_i = i;
            }
        }
    }
    if best.mu > 0.0 {
        let r = best.argmax_r;
        let objective = |t: f64| curve.frame_at(t).map(|f| ratio(&f, r).abs()).unwrap_or(0.0);
        let lo = ts[best_i.saturating_sub(1)];
        let hi = ts[(best_i + 1).min(nt - 1)];
        let (t, value) = golden_max(&objective, lo, hi, 60);
        if value > best.mu {
            best.mu = value;
            best.argmax_t = t;
        }
    }
    Ok(best)
}

/// `mu` on an increasing list of half-widths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuProfile {
    pub eps_values: Vec<f64>,
    pub mu_values: Vec<f64>,
    pub argmax_points: Vec<(f64, f64)>,
}

pub fn mu_profile(chart: &TubeChart, eps_values: &[f64], grid: MuGrid) -> Result<MuProfile> {
    if eps_values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("half-widths must be strictly increasing".into()));
    }
    let mut profile = MuProfile { eps_values: Vec::new(), mu_values: Vec::new(), argmax_points: Vec::new() };
    for &eps in eps_values {
        let m = mu(chart, eps, grid)?;
        profile.eps_values.push(eps);
        profile.mu_values.push(m.mu);
        profile.argmax_points.push((m.argmax_t, m.argmax_r));
    }
    Ok(profile)
}

impl MuProfile {
    /// CSV with header `eps,mu,argmax_t,argmax_r`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,mu,argmax_t,argmax_r\n");
        for ((e, m), (t, r)) in self.eps_values.iter().zip(&self.mu_values).zip(&self.argmax_points) {
            out.push_str(&format!("{e:.16e},{m:.16e},{t:.16e},{r:.16e}\n"));
        }
        out
    }
}

/// Worst disagreement between the closed forms and central differences of the
/// physical field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdReport {
    pub samples: usize,
    pub max_div_error: f64,
    pub max_form_error: f64,
    pub max_normal_error: f64,
    pub worst_t: f64,
    pub worst_r: f64,
}

impl FdReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.max_div_error.max(self.max_form_error).max(self.max_normal_error)
    }
}

pub const FD_FIELD_STEP: f64 = 1e-5;

/// Physical-space Jacobian of `v` at `x` by central differences (columns are `d v / d x_i`).
pub fn fd_jacobian(chart: &TubeChart, x: Point, h: f64) -> Result<[Point; 2]> {
    let mut cols = [[0.0; 2]; 2];
    for (i, col) in cols.iter_mut().enumerate() {
        let mut xp = x;
        let mut xm = x;
        xp[i] += h;
        xm[i] -= h;
        let vp = physical_field(chart, xp)?.v;
        let vm = physical_field(chart, xm)?.v;
        *col = [(vp[0] - vm[0]) / (2.0 * h), (vp[1] - vm[1]) / (2.0 * h)];
    }
    Ok(cols)
}

/// Checks div v, the quadratic form and `dv[N]` against central differences at
/// `samples` seeded random points with `|r| < eps` away from the junction lines.
pub fn verify_by_finite_differences(chart: &TubeChart, eps: f64, samples: usize, seed: u64) -> Result<FdReport> {
    if !(eps > 0.0 && eps <= 0.999 * chart.eps_bar1() * (1.0 + 1e-12)) {
        return Err(Error::OutsideChart { t: f64::NAN, r: eps, eps_bar1: chart.eps_bar1() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let curve = chart.curve();
    let (lo, hi) = curve.domain();
    let (a, b) = chart.interval();
    let keep_out = 1e-3 * (hi - lo);
    let mut report = FdReport {
        samples: 0,
        max_div_error: 0.0,
        max_form_error: 0.0,
        max_normal_error: 0.0,
        worst_t: 0.0,
        worst_r: 0.0,
    };
    let mut worst = 0.0;
    while report.samples < samples {
        let t = rng.random_range(lo + keep_out..hi - keep_out);
        if (t - a).abs() < keep_out || (t - b).abs() < keep_out {
            continue;
        }
        let r = rng.random_range(-eps..eps);
        let s = field_value(chart, t, r)?;
        let x = chart.to_physical(t, r)?;
        let jac = fd_jacobian(chart, x, FD_FIELD_STEP)?;
        let apply = |xi: Point| [jac[0][0] * xi[0] + jac[1][0] * xi[1], jac[0][1] * xi[0] + jac[1][1] * xi[1]];
        let div_err = (jac[0][0] + jac[1][1] - s.div_v).abs();
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let xi = [angle.cos(), angle.sin()];
        let form_err = (dot(apply(xi), xi) - quadratic_form(&s, xi)).abs();
        let normal_err = dist(apply(s.frame.normal), dv_apply(&s, s.frame.normal));
        report.max_div_error = report.max_div_error.max(div_err);
        report.max_form_error = report.max_form_error.max(form_err);
        report.max_normal_error = report.max_normal_error.max(normal_err);
        let local = div_err.max(form_err).max(normal_err);
        if local >= worst {
            worst = local;
            report.worst_t = t;
            report.worst_r = r;
        }
        report.samples += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{reparametrize_arclength, CurveSpec};
    use crate::tube::build_chart;

    fn segment_chart() -> TubeChart {
        let c = reparametrize_arclength(&CurveSpec::segment([-1.0, 0.0], [1.0, 0.0])).unwrap();
        build_chart(&c, 0.3).unwrap()
    }

    fn unit_arc_chart() -> TubeChart {
        let c = reparametrize_arclength(&CurveSpec::arc([0.0, 0.0], 1.0, -0.8, 0.8)).unwrap();
        build_chart(&c, 0.5).unwrap()
    }

    #[test]
    fn segment_field_is_position() {
        let s = field_value(&segment_chart(), 0.4, -0.07).unwrap();
        assert!(dist(s.v, [0.4, -0.07]) < 1e-16);
        assert_eq!((s.div_v, s.ratio), (2.0, 0.0));
        assert_eq!(jacobian_form(&segment_chart(), 0.1, 0.2, [1.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn unit_arc_closed_forms() {
        let chart = unit_arc_chart();
        let s = field_value(&chart, 0.5, 0.1).unwrap();
        let rho = 0.1 / 0.9;
        assert!((s.ratio - rho).abs() < 1e-15);
        assert!((s.div_v - (2.0 - rho)).abs() < 1e-15);
        let n = s.frame.normal;
        let t = s.frame.tangent;
        assert!((jacobian_form(&chart, 0.5, 0.1, n).unwrap() - 1.0).abs() < 1e-15);
        assert!((jacobian_form(&chart, 0.5, 0.1, t).unwrap() - (1.0 - rho)).abs() < 1e-15);
        // directional finite differences of v along T
        let x = chart.to_physical(0.5, 0.1).unwrap();
        let jac = fd_jacobian(&chart, x, 1e-5).unwrap();
        let dvt = [jac[0][0] * t[0] + jac[1][0] * t[1], jac[0][1] * t[0] + jac[1][1] * t[1]];
        assert!((dot(dvt, t) - (1.0 - rho)).abs() < 1e-3);
        let div_fd = jac[0][0] + jac[1][1];
        assert!((div_fd - (2.0 - rho)).abs() < 1e-6);
    }

    #[test]
    fn zero_offset_has_no_perturbation() {
        let chart = unit_arc_chart();
        for t in [-0.7, 0.0, 0.3] {
            let s = field_value(&chart, t, 0.0).unwrap();
            assert_eq!((s.ratio, s.div_v), (0.0, 2.0));
        }
    }

    #[test]
    fn tangent_and_normal_images() {
        let chart = unit_arc_chart();
        let s = field_value(&chart, -0.3, 0.2).unwrap();
        let f = s.frame;
        let n_img = dv_normal(&chart, -0.3, 0.2).unwrap();
        assert!(dist(n_img, axpy(0.3 * f.kappa, f.tangent, f.normal)) < 1e-15);
        let t_img = dv_tangent(&chart, -0.3, 0.2).unwrap();
        assert!(dist(t_img, dv_apply(&s, f.tangent)) < 1e-15);
    }

    #[test]
    fn nd_extension() {
        let chart = segment_chart();
        let s = field_value_nd(&chart, 0.3, 0.1, &[0.2], 3).unwrap();
        assert!((s.value[0] - 0.3).abs() < 1e-16 && (s.value[1] - 0.1).abs() < 1e-16 && s.value[2] == 0.2);
        assert_eq!(s.div, 3.0);
        let arc = unit_arc_chart();
        let s4 = field_value_nd(&arc, 0.5, 0.1, &[0.0, 1.0], 4).unwrap();
        assert!((s4.div - (4.0 - 0.1 / 0.9)).abs() < 1e-15);
        assert_eq!(jacobian_form_nd(&arc, 0.5, 0.1, [0.0, 0.0], &[0.3, -0.4]).unwrap(), 0.25);
        assert!(field_value_nd(&chart, 0.0, 0.0, &[], 2).is_err());
        assert!(field_value_nd(&chart, 0.0, 0.0, &[1.0], 4).is_err());
    }

    #[test]
    fn boundary_positivity_segment() {
        let rep = boundary_positivity(&segment_chart(), 0.1, 1000).unwrap();
        assert!((rep.min_value - 0.1).abs() < 1e-15, "{rep:?}");
        // shifting t = 0 to the start makes the start cap degenerate
        let c = reparametrize_arclength(&CurveSpec::segment([-1.0, 0.0], [1.0, 0.0]).with_shift(0.0)).unwrap();
        let chart = build_chart(&c, 0.3).unwrap();
        let rep = boundary_positivity(&chart, 0.1, 1000).unwrap();
        assert_eq!(rep.min_value, 0.0);
        assert_eq!(rep.min_tag, BoundaryTag::EndStart);
    }

    #[test]
    fn mu_of_segment_is_zero() {
        for eps in [0.01, 0.1, 0.3] {
            assert_eq!(mu(&segment_chart(), eps, MuGrid::default()).unwrap().mu, 0.0);
        }
    }

    #[test]
    fn mu_of_arc_matches_brute_force() {
        let chart = unit_arc_chart();
        for eps in [0.02, 0.1, 0.3] {
            let got = mu(&chart, eps, MuGrid::default()).unwrap();
            // brute force over an independent grid of the defining ratio
            let mut brute: f64 = 0.0;
            for i in 0..=200 {
                let r = -eps + 2.0 * eps * i as f64 / 200.0;
                brute = brute.max((r * 1.0 / (1.0 - r)).abs());
            }
            assert!((got.mu - brute).abs() <= 1e-14 * brute);
            assert!((got.mu - eps / (1.0 - eps)).abs() <= 1e-14);
            assert_eq!(got.argmax_r, eps);
        }
    }

    #[test]
    fn fd_self_test_segment() {
        let rep = verify_by_finite_differences(&segment_chart(), 0.25, 200, 7).unwrap();
        assert!(rep.max_discrepancy() <= 1e-9, "{rep:?}");
    }

    #[test]
    fn profile_rejects_unsorted() {
        assert!(mu_profile(&segment_chart(), &[0.2, 0.1], MuGrid::default()).is_err());
    }
}
