//! Generating curves: raw input descriptions, unit-speed reparametrization,
//! straight-line extension past the endpoints and Frenet data.
//!
//! Every [`Curve`] is parametrized by arclength on `[a, b]` with `a <= 0 <= b`.
//! After [`Curve::extend`] it is also defined on `[a - m, b + m]`, where it
//! continues along the endpoint tangents with zero curvature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{cross, dist, norm, rot90, sub, Point};
use crate::quadrature::integrate;

/// Finite-difference step for `[t kappa]'` on spline curves; also the width of
/// the window around `a`, `b` and the extension ends that is flagged as a junction.
pub const FD_STEP: f64 = 1e-5;

const MIN_SPEED: f64 = 1e-12;
const SIMPLICITY_SAMPLES: usize = 2000;
const ARCLENGTH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Segment,
    Arc,
    Spline,
}

/// Raw curve description as read from a curve file.
///
/// Segments are implicitly parametrized as `start + s (end - start)`,
/// `s in [0, 1]`; arcs by angle; splines are natural cubic interpolants through
/// `points` with chord-length knots. `shift` is the arclength, measured from the
/// start of the curve, at which the unit-speed parameter is zero (default: the
/// midpoint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub kind: CurveKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Point>>,
}

impl CurveSpec {
    fn empty(kind: CurveKind) -> Self {
        CurveSpec {
            kind,
            name: None,
            shift: None,
            start: None,
            end: None,
            center: None,
            radius: None,
            start_angle: None,
            end_angle: None,
            points: None,
        }
    }

    pub fn segment(start: Point, end: Point) -> Self {
        CurveSpec { start: Some(start), end: Some(end), ..Self::empty(CurveKind::Segment) }
    }

    /// Circular arc; the traversal is counter-clockwise when `end_angle > start_angle`.
    pub fn arc(center: Point, radius: f64, start_angle: f64, end_angle: f64) -> Self {
        CurveSpec {
            center: Some(center),
            radius: Some(radius),
            start_angle: Some(start_angle),
            end_angle: Some(end_angle),
            ..Self::empty(CurveKind::Arc)
        }
    }

    pub fn spline(points: Vec<Point>) -> Self {
        CurveSpec { points: Some(points), ..Self::empty(CurveKind::Spline) }
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = Some(shift);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Parses a curve file. Unknown keys, and keys that do not belong to the
    /// declared kind, are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: CurveSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("curve file: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let present = [
            ("start", self.start.is_some()),
            ("end", self.end.is_some()),
            ("center", self.center.is_some()),
            ("radius", self.radius.is_some()),
            ("start_angle", self.start_angle.is_some()),
            ("end_angle", self.end_angle.is_some()),
            ("points", self.points.is_some()),
        ];
        let allowed: &[&str] = match self.kind {
            CurveKind::Segment => &["start", "end"],
            CurveKind::Arc => &["center", "radius", "start_angle", "end_angle"],
            CurveKind::Spline => &["points"],
        };
        for (key, is_set) in present {
            let wanted = allowed.contains(&key);
            if is_set && !wanted {
                return Err(Error::InvalidInput(format!("key `{key}` not valid for {:?} curves", self.kind)));
            }
            if !is_set && wanted {
                return Err(Error::InvalidInput(format!("missing key `{key}` for {:?} curve", self.kind)));
            }
        }
        if let Some(points) = &self.points {
            if points.len() < 2 {
                return Err(Error::InvalidInput("spline needs at least two points".into()));
            }
        }
        let finite = self
            .start
            .iter()
            .chain(self.end.iter())
            .chain(self.center.iter())
            .chain(self.points.iter().flatten())
            .flatten()
            .chain(self.radius.iter())
            .chain(self.start_angle.iter())
            .chain(self.end_angle.iter())
            .chain(self.shift.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite curve parameter".into()));
        }
        Ok(())
    }

    fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("{:?}", self.kind).to_lowercase())
    }
}

/// Frenet data of a unit-speed curve at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frame {
    pub t: f64,
    pub point: Point,
    pub tangent: Point,
    pub normal: Point,
    /// Signed curvature `gamma'' . N`.
    pub kappa: f64,
    /// `d/dt [t kappa(t)]`.
    pub tkappa_prime: f64,
    pub junction: bool,
}

/// Natural cubic spline through scalar data.
#[derive(Debug, Clone)]
struct Cubic1d {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl Cubic1d {
    fn natural(knots: &[f64], values: &[f64]) -> Self {
        let n = knots.len();
        let mut second = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second-derivative system.
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for k in 0..m {
                let i = k + 1;
                let h0 = knots[i] - knots[i - 1];
                let h1 = knots[i + 1] - knots[i];
                diag[k] = 2.0 * (h0 + h1);
                upper[k] = h1;
                rhs[k] = 6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
            }
            for k in 1..m {
                let lower = knots[k + 1] - knots[k];
                let w = lower / diag[k - 1];
                diag[k] -= w * upper[k - 1];
                rhs[k] -= w * rhs[k - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for k in (0..m - 1).rev() {
                second[k + 1] = (rhs[k] - upper[k] * second[k + 2]) / diag[k];
            }
        }
        Cubic1d { knots: knots.to_vec(), values: values.to_vec(), second }
    }

    fn segment(&self, u: f64) -> usize {
        let n = self.knots.len();
        match self.knots.partition_point(|&k| k <= u) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    /// Value and first three derivatives.
    fn eval(&self, u: f64) -> [f64; 4] {
        let i = self.segment(u);
        let (u0, u1) = (self.knots[i], self.knots[i + 1]);
        let h = u1 - u0;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let a = (u1 - u) / h;
        let b = (u - u0) / h;
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let first = (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let second = a * m0 + b * m1;
        let third = (m1 - m0) / h;
        [value, first, second, third]
    }
}

/// Planar cubic spline together with its cumulative arclength table.
#[derive(Debug, Clone)]
struct ArclengthSpline {
    x: Cubic1d,
    y: Cubic1d,
    cumulative: Vec<f64>,
}

impl ArclengthSpline {
    fn new(points: &[Point]) -> Result<Self> {
        let mut knots = Vec::with_capacity(points.len());
        knots.push(0.0);
        for w in points.windows(2) {
            let chord = dist(w[0], w[1]);
            if chord < MIN_SPEED {
                return Err(Error::DegenerateParametrization { speed: chord, at: *knots.last().unwrap() });
            }
            knots.push(knots.last().unwrap() + chord);
        }
        let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
        let mut spline = ArclengthSpline {
            x: Cubic1d::natural(&knots, &xs),
            y: Cubic1d::natural(&knots, &ys),
            cumulative: vec![0.0],
        };
        for w in knots.windows(2) {
            for k in 0..=64 {
                let u = w[0] + (w[1] - w[0]) * k as f64 / 64.0;
                let speed = spline.speed(u);
                if speed < MIN_SPEED {
                    return Err(Error::DegenerateParametrization { speed, at: u });
                }
            }
            let len = integrate(|u| spline.speed(u), w[0], w[1], ARCLENGTH_TOL * 1e-4)?;
            let last = *spline.cumulative.last().unwrap();
            spline.cumulative.push(last + len);
        }
        Ok(spline)
    }

    fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn derivs(&self, u: f64) -> [[f64; 2]; 4] {
        let x = self.x.eval(u);
        let y = self.y.eval(u);
        [[x[0], y[0]], [x[1], y[1]], [x[2], y[2]], [x[3], y[3]]]
    }

    fn speed(&self, u: f64) -> f64 {
        let x = self.x.eval(u);
        let y = self.y.eval(u);
        x[1].hypot(y[1])
    }

    /// Knot-space parameter at arclength `s` (Newton on the arclength integral,
    /// seeded by linear inverse interpolation inside the knot interval).
    fn param_at(&self, s: f64) -> f64 {
        let knots = &self.x.knots;
        let last = knots.len() - 2;
        let i = self.cumulative.partition_point(|&c| c <= s).saturating_sub(1).min(last);
        let (u0, u1) = (knots[i], knots[i + 1]);
        let (c0, c1) = (self.cumulative[i], self.cumulative[i + 1]);
        let target = s - c0;
        let mut lo = u0;
        let mut hi = u1;
        let mut u = u0 + (u1 - u0) * (target / (c1 - c0)).clamp(0.0, 1.0);
        for _ in 0..60 {
            let partial = integrate(|v| self.speed(v), u0, u, 1e-15).unwrap_or(f64::NAN);
            let g = partial - target;
            if g.abs() <= 1e-14 * self.length().max(1.0) {
                break;
            }
            if g > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let mut next = u - g / self.speed(u);
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - u).abs() <= 1e-16 * (1.0 + u.abs()) {
                u = next;
                break;
            }
            u = next;
        }
        u
    }
}

#[derive(Debug, Clone)]
enum Geometry {
    Line { origin: Point, dir: Point },
    Circle { center: Point, radius: f64, theta0: f64, sense: f64 },
    Spline { spline: Box<ArclengthSpline>, offset: f64 },
}

/// Unit-speed planar curve, optionally extended by straight segments.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct Curve {
    name: String,
    kind: CurveKind,
    geometry: Geometry,
    a: f64,
    b: f64,
    lo: f64,
    hi: f64,
}

/// Builds the unit-speed version of a raw curve.
///
/// The parameter interval `[a, b]` satisfies `a <= 0 <= b`; zero sits at the
/// midpoint unless the spec carries a `shift`.
pub fn reparametrize_arclength(spec: &CurveSpec) -> Result<Curve> {
    spec.validate()?;
    let (geometry_for, length): (Box<dyn Fn(f64) -> Geometry>, f64) = match spec.kind {
        CurveKind::Segment => {
            let (p0, p1) = (spec.start.unwrap(), spec.end.unwrap());
            let len = dist(p0, p1);
            if len < MIN_SPEED {
                return Err(Error::DegenerateParametrization { speed: len, at: 0.0 });
            }
            let dir = [(p1[0] - p0[0]) / len, (p1[1] - p0[1]) / len];
            (Box::new(move |s0| Geometry::Line { origin: [p0[0] + s0 * dir[0], p0[1] + s0 * dir[1]], dir }), len)
        }
        CurveKind::Arc => {
            let center = spec.center.unwrap();
            let radius = spec.radius.unwrap();
            let (th0, th1) = (spec.start_angle.unwrap(), spec.end_angle.unwrap());
            if !(radius > 0.0) {
                return Err(Error::InvalidInput(format!("arc radius must be positive, got {radius}")));
            }
            let len = radius * (th1 - th0).abs();
            if len < MIN_SPEED {
                return Err(Error::DegenerateParametrization { speed: radius * (th1 - th0).abs(), at: 0.0 });
            }
            if (th1 - th0).abs() >= 2.0 * std::f64::consts::PI {
                return Err(Error::InvalidInput("arc must span less than a full turn".into()));
            }
            let sense = (th1 - th0).signum();
            (Box::new(move |s0| Geometry::Circle { center, radius, theta0: th0 + sense * s0 / radius, sense }), len)
        }
        CurveKind::Spline => {
            let spline = ArclengthSpline::new(spec.points.as_ref().unwrap())?;
            let len = spline.length();
            (Box::new(move |s0| Geometry::Spline { spline: Box::new(spline.clone()), offset: s0 }), len)
        }
    };
    let s0 = spec.shift.unwrap_or(0.5 * length);
    if !(0.0..=length).contains(&s0) {
        return Err(Error::InvalidInput(format!("shift {s0} outside [0, {length}]")));
    }
    let curve = Curve {
        name: spec.display_name(),
        kind: spec.kind,
        geometry: geometry_for(s0),
        a: -s0,
        b: length - s0,
        lo: -s0,
        hi: length - s0,
    };
    curve.check_simple()?;
    Ok(curve)
}

impl Curve {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn is_analytic(&self) -> bool {
        self.kind != CurveKind::Spline
    }

    /// Start of the original (unextended) parameter interval.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// End of the original (unextended) parameter interval.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// Full parameter interval including any extension.
    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn margin(&self) -> f64 {
        (self.a - self.lo).min(self.hi - self.b)
    }

    /// Straight-line continuation by `margin` on both ends.
    pub fn extend(&self, margin: f64) -> Result<Curve> {
        if !(margin > 0.0) || !margin.is_finite() {
            return Err(Error::InvalidInput(format!("extension margin must be positive, got {margin}")));
        }
        Ok(Curve { lo: self.a - margin, hi: self.b + margin, ..self.clone() })
    }

    /// Drops the extension.
    pub fn restrict(&self) -> Curve {
        Curve { lo: self.a, hi: self.b, ..self.clone() }
    }

    fn check_range(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * (1.0 + self.hi - self.lo);
        if t.is_nan() || t < self.lo - slack || t > self.hi + slack {
            return Err(Error::ParameterOutOfRange { t, lo: self.lo, hi: self.hi });
        }
        Ok(())
    }

    /// Point, tangent and curvature of the unextended curve; `t` is clamped to `[a, b]`.
    fn base(&self, t: f64) -> (Point, Point, f64) {
        let t = t.clamp(self.a, self.b);
        match &self.geometry {
            Geometry::Line { origin, dir } => ([origin[0] + t * dir[0], origin[1] + t * dir[1]], *dir, 0.0),
            Geometry::Circle { center, radius, theta0, sense } => {
                let theta = theta0 + sense * t / radius;
                let (s, c) = theta.sin_cos();
                ([center[0] + radius * c, center[1] + radius * s], [-sense * s, sense * c], sense / radius)
            }
            Geometry::Spline { spline, offset } => {
                let u = spline.param_at(t + offset);
                let [p, d1, d2, _] = spline.derivs(u);
                let speed = norm(d1);
                let tangent = [d1[0] / speed, d1[1] / speed];
                (p, tangent, cross(d1, d2) / (speed * speed * speed))
            }
        }
    }

    pub fn point(&self, t: f64) -> Result<Point> {
        self.check_range(t)?;
        Ok(self.point_unchecked(t))
    }

    fn point_unchecked(&self, t: f64) -> Point {
        let (p, tangent, _) = self.base(t);
        let excess = if t < self.a {
            t - self.a
        } else if t > self.b {
            t - self.b
        } else {
            0.0
        };
        [p[0] + excess * tangent[0], p[1] + excess * tangent[1]]
    }

    /// Signed curvature; zero on the extensions, inner value at the junctions.
    pub fn curvature(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        if t < self.a || t > self.b {
            return Ok(0.0);
        }
        Ok(self.base(t).2)
    }

    fn tkappa(&self, t: f64) -> f64 {
        t * self.base(t).2
    }

    /// `[t kappa(t)]'`, using the value from inside `[a, b]` at the junctions.
    pub fn tkappa_prime(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        if t < self.a || t > self.b {
            return Ok(0.0);
        }
        Ok(match &self.geometry {
            Geometry::Line { .. } => 0.0,
            Geometry::Circle { sense, radius, .. } => sense / radius,
            Geometry::Spline { .. } => {
                let h = FD_STEP.min(0.25 * (self.b - self.a));
                if t - h < self.a {
                    (-3.0 * self.tkappa(t) + 4.0 * self.tkappa(t + h) - self.tkappa(t + 2.0 * h)) / (2.0 * h)
                } else if t + h > self.b {
                    (3.0 * self.tkappa(t) - 4.0 * self.tkappa(t - h) + self.tkappa(t - 2.0 * h)) / (2.0 * h)
                } else {
                    (self.tkappa(t + h) - self.tkappa(t - h)) / (2.0 * h)
                }
            }
        })
    }

    pub fn is_junction(&self, t: f64) -> bool {
        [self.a, self.b, self.lo, self.hi].iter().any(|&j| (t - j).abs() <= FD_STEP)
    }

    pub fn frame_at(&self, t: f64) -> Result<Frame> {
        self.check_range(t)?;
        let (_, tangent, _) = self.base(t);
        Ok(Frame {
            t,
            point: self.point_unchecked(t),
            tangent,
            normal: rot90(tangent),
            kappa: self.curvature(t)?,
            tkappa_prime: self.tkappa_prime(t)?,
            junction: self.is_junction(t),
        })
    }

    /// `n` equally spaced parameters covering the full domain (endpoints included).
    pub fn sample_params(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        (0..n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64).collect()
    }

    /// Smallest distance between samples whose parameters differ by at least
    /// `4` sample spacings, with the offending pair.
    pub fn self_approach(&self, samples: usize) -> (f64, f64, f64) {
        let params = self.sample_params(samples);
        let points: Vec<Point> = params.iter().map(|&t| self.point_unchecked(t)).collect();
        let gap = 4;
        let mut best = (f64::INFINITY, self.lo, self.hi);
        for i in 0..points.len() {
            for j in (i + gap)..points.len() {
                let d = dist(points[i], points[j]);
                if d < best.0 {
                    best = (d, params[i], params[j]);
                }
            }
        }
        best
    }

    fn check_simple(&self) -> Result<()> {
        let spacing = (self.hi - self.lo) / (SIMPLICITY_SAMPLES - 1) as f64;
        let (d, t1, t2) = self.self_approach(SIMPLICITY_SAMPLES);
        if d < 0.5 * spacing {
            return Err(Error::NotSimple { t1, t2, distance: d });
        }
        let params = self.sample_params(SIMPLICITY_SAMPLES);
        let points: Vec<Point> = params.iter().map(|&t| self.point_unchecked(t)).collect();
        for i in 0..points.len() - 1 {
            for j in (i + 2)..points.len() - 1 {
                if segments_cross(points[i], points[i + 1], points[j], points[j + 1]) {
                    return Err(Error::NotSimple { t1: params[i], t2: params[j], distance: 0.0 });
                }
            }
        }
        Ok(())
    }

    /// Suprema of `|kappa|` and `|[t kappa]'|` over the full domain, from a dense
    /// grid refined by golden-section search around each grid maximum.
    pub fn curvature_bounds(&self, samples: usize) -> (f64, f64) {
        let params = self.sample_params(samples);
        let kappa = |t: f64| self.curvature(t).map(f64::abs).unwrap_or(0.0);
        let tkp = |t: f64| self.tkappa_prime(t).map(f64::abs).unwrap_or(0.0);
        let mut sup_k: f64 = 0.0;
        let mut sup_tkp: f64 = 0.0;
        if !self.is_analytic() {
            let step = params[1] - params[0];
            sup_k = refine_max(&params, &kappa, step, self.lo, self.hi);
            sup_tkp = refine_max(&params, &tkp, step, self.lo, self.hi);
        } else {
            for &t in &params {
                sup_k = sup_k.max(kappa(t));
                sup_tkp = sup_tkp.max(tkp(t));
            }
        }
        for t in [self.a, self.b] {
            sup_k = sup_k.max(kappa(t));
            sup_tkp = sup_tkp.max(tkp(t));
        }
        (sup_k, sup_tkp)
    }
}

fn refine_max(params: &[f64], f: &dyn Fn(f64) -> f64, step: f64, lo: f64, hi: f64) -> f64 {
    let values: Vec<f64> = params.iter().map(|&t| f(t)).collect();
    let mut best = values.iter().cloned().fold(0.0, f64::max);
    for i in 0..values.len() {
        let left = if i > 0 { values[i - 1] } else { f64::NEG_INFINITY };
        let right = values.get(i + 1).copied().unwrap_or(f64::NEG_INFINITY);
        if values[i] >= left && values[i] >= right && values[i] > 0.0 {
            let (_, v) = golden_max(f, (params[i] - step).max(lo), (params[i] + step).min(hi), 40);
            best = best.max(v);
        }
    }
    best
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
fn segments_cross(p0: Point, p1: Point, q0: Point, q1: Point) -> bool {
    let d = sub(p1, p0);
    let e = sub(q1, q0);
    let side = |o: Point, v: Point, x: Point| cross(v, sub(x, o));
    side(p0, d, q0) * side(p0, d, q1) < 0.0 && side(q0, e, p0) * side(q0, e, p1) < 0.0
}

pub(crate) fn golden_max(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Hausdorff-style check used by tests: distance from `x` to the curve samples.
pub fn distance_to_samples(curve: &Curve, x: Point, samples: usize) -> f64 {
    curve.sample_params(samples).into_iter().map(|t| dist(curve.point_unchecked(t), x)).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::dot;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn segment_is_recentred() {
        let c = reparametrize_arclength(&CurveSpec::segment([0.0, 0.0], [2.0, 0.0])).unwrap();
        assert_eq!((c.a(), c.b()), (-1.0, 1.0));
        for t in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            let p = c.point(t).unwrap();
            assert!(close(p[0], t + 1.0, 1e-15) && p[1] == 0.0);
        }
        let f = c.frame_at(0.25).unwrap();
        assert_eq!(f.tangent, [1.0, 0.0]);
        assert_eq!(f.normal, [-0.0, 1.0]);
        assert_eq!((f.kappa, f.tkappa_prime), (0.0, 0.0));
    }

    #[test]
    fn arc_length_is_radius_times_angle() {
        let c = reparametrize_arclength(&CurveSpec::arc([0.0, 0.0], 2.0, 0.0, PI / 2.0)).unwrap();
        assert!(close(c.length(), PI, 1e-14));
        assert!(close(c.a(), -PI / 2.0, 1e-14));
    }

    #[test]
    fn shift_moves_origin() {
        let spec = CurveSpec::segment([0.0, 0.0], [2.0, 0.0]).with_shift(0.0);
        let c = reparametrize_arclength(&spec).unwrap();
        assert_eq!((c.a(), c.b()), (0.0, 2.0));
        let bad = CurveSpec::segment([0.0, 0.0], [2.0, 0.0]).with_shift(3.0);
        assert!(matches!(reparametrize_arclength(&bad), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn circle_frame_values() {
        let r = 1.5;
        let c = reparametrize_arclength(&CurveSpec::arc([0.0, 0.0], r, -1.0, 1.0)).unwrap();
        let f = c.frame_at(0.3).unwrap();
        assert!(close(f.kappa, 1.0 / r, 1e-15));
        assert!(close(f.tkappa_prime, 1.0 / r, 1e-15));
        // finite-difference cross-check of d/dt (t kappa)
        let h = 1e-5;
        let fd = ((0.3 + h) * c.curvature(0.3 + h).unwrap() - (0.3 - h) * c.curvature(0.3 - h).unwrap()) / (2.0 * h);
        assert!(close(fd, f.tkappa_prime, 1e-9));
        // clockwise arcs have negative curvature
        let cw = reparametrize_arclength(&CurveSpec::arc([0.0, 0.0], r, 1.0, -1.0)).unwrap();
        assert!(close(cw.frame_at(0.0).unwrap().kappa, -1.0 / r, 1e-15));
    }

    #[test]
    fn quarter_arc_extension() {
        let c = reparametrize_arclength(&CurveSpec::arc([0.0, 0.0], 1.0, 0.0, PI / 2.0)).unwrap();
        let e = c.extend(0.2).unwrap();
        let (lo, hi) = e.domain();
        assert!(close(lo, c.a() - 0.2, 1e-15) && close(hi, c.b() + 0.2, 1e-15));
        assert_eq!(e.curvature(lo).unwrap(), 0.0);
        assert_eq!(e.curvature(c.a() - 0.1).unwrap(), 0.0);
        assert!(close(e.curvature(0.0).unwrap(), 1.0, 1e-15));
        for end in [c.a(), c.b()] {
            let inner = e.frame_at(end).unwrap();
            assert!(inner.junction);
            let outer_t = if end == c.a() { end - 1e-9 } else { end + 1e-9 };
            let outer = e.frame_at(outer_t).unwrap();
            assert!(close(dot(inner.tangent, outer.tangent), 1.0, 1e-12));
            assert!(dist(inner.point, outer.point) < 2e-9);
        }
        assert!(e.point(hi + 0.1).is_err());
        assert!(c.point(c.b() + 0.1).is_err());
    }

    #[test]
    fn extend_then_restrict_is_identity() {
        let c = reparametrize_arclength(&CurveSpec::arc([1.0, -2.0], 0.7, 0.3, 2.0)).unwrap();
        let back = c.extend(0.3).unwrap().restrict();
        for t in c.sample_params(101) {
            assert_eq!(back.frame_at(t).unwrap(), c.frame_at(t).unwrap());
        }
    }

    #[test]
    fn spline_is_unit_speed() {
        let c = reparametrize_arclength(&CurveSpec::spline(vec![[0.0, 0.0], [1.0, 0.5], [2.0, 0.0]])).unwrap();
        let h = 1e-6;
        for t in c.sample_params(1000) {
            let (lo, hi) = ((t - h).max(c.a()), (t + h).min(c.b()));
            let speed = dist(c.point(hi).unwrap(), c.point(lo).unwrap()) / (hi - lo);
            assert!((speed - 1.0).abs() <= 1e-6, "speed {speed} at {t}");
        }
    }

    #[test]
    fn spline_endpoint_tangents_survive_extension() {
        let c =
            reparametrize_arclength(&CurveSpec::spline(vec![[0.0, 0.0], [1.0, 0.8], [2.5, 0.2], [3.0, 1.0]])).unwrap();
        let e = c.extend(0.15).unwrap();
        let ta = c.frame_at(c.a()).unwrap().tangent;
        let tb = c.frame_at(c.b()).unwrap().tangent;
        let (lo, hi) = e.domain();
        for (t, expect) in [(lo, ta), (c.a() - 0.05, ta), (hi, tb), (c.b() + 0.01, tb)] {
            let f = e.frame_at(t).unwrap();
            assert!(dist(f.tangent, expect) <= 1e-10);
            assert_eq!(f.kappa, 0.0);
        }
    }

    #[test]
    fn spline_frenet_consistency() {
        let c =
            reparametrize_arclength(&CurveSpec::spline(vec![[0.0, 0.0], [1.0, 0.5], [2.0, 0.0], [3.0, -0.4]])).unwrap();
        let h = 1e-5;
        for t in c.sample_params(40).into_iter().skip(1).take(38) {
            let f = c.frame_at(t).unwrap();
            assert!(close(norm(f.tangent), 1.0, 1e-7));
            assert!(close(dot(f.tangent, f.normal), 0.0, 1e-7));
            let dt = {
                let p = c.frame_at(t + h).unwrap().tangent;
                let m = c.frame_at(t - h).unwrap().tangent;
                [(p[0] - m[0]) / (2.0 * h), (p[1] - m[1]) / (2.0 * h)]
            };
            let expect = [f.kappa * f.normal[0], f.kappa * f.normal[1]];
            let err = dist(dt, expect);
            assert!(err <= 1e-4 * norm(expect).max(1e-2), "t={t} err={err}");
        }
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(matches!(
            reparametrize_arclength(&CurveSpec::segment([1.0, 1.0], [1.0, 1.0])),
            Err(Error::DegenerateParametrization { .. })
        ));
        assert!(matches!(
            reparametrize_arclength(&CurveSpec::spline(vec![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])),
            Err(Error::DegenerateParametrization { .. })
        ));
    }

    #[test]
    fn self_intersecting_spline_rejected() {
        let pts = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, -1.0]];
        assert!(matches!(reparametrize_arclength(&CurveSpec::spline(pts)), Err(Error::NotSimple { .. })));
    }

    #[test]
    fn curve_file_is_strict() {
        let ok = r#"{"kind": "arc", "center": [0, 0], "radius": 1, "start_angle": 0, "end_angle": 1.5}"#;
        assert!(CurveSpec::from_json(ok).is_ok());
        let unknown = r#"{"kind": "segment", "start": [0, 0], "end": [1, 0], "colour": "red"}"#;
        assert!(CurveSpec::from_json(unknown).is_err());
        let wrong_kind = r#"{"kind": "segment", "start": [0, 0], "end": [1, 0], "radius": 2}"#;
        assert!(CurveSpec::from_json(wrong_kind).is_err());
        let missing = r#"{"kind": "spline"}"#;
        assert!(CurveSpec::from_json(missing).is_err());
    }
}
