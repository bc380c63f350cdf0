//! Nonexistence certificates: admissible exponents, condition (f) on the
//! nonlinearity, the coefficient
//!
//! ```text
//! C(mu) = 1 - n/p + n/q + (1 + 1/p + 1/q) mu
//! ```
//!
//! and the critical half-width below which `C(mu(eps)) < 0`.

use serde::{Deserialize, Serialize};

use crate::curve::CurveKind;
use crate::error::{Error, Result};
use crate::field::{mu, MuGrid, MuProfile};
use crate::quadrature::integrate;
use crate::tube::TubeChart;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    n: usize,
    p: f64,
    q: f64,
}

impl Exponents {
    /// Requires `n >= 2`, `1 < p < n` and `q > n p / (n - p)`.
    pub fn new(n: usize, p: f64, q: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Inadmissible(format!("dimension n = {n} must be at least 2")));
        }
        let nf = n as f64;
        if !(p > 1.0 && p < nf) {
            return Err(Error::Inadmissible(format!("p = {p} must lie in (1, {n})")));
        }
        let critical = nf * p / (nf - p);
        if !(q > critical) || !q.is_finite() {
            return Err(Error::Inadmissible(format!("q = {q} must exceed n p / (n - p) = {critical}")));
        }
        Ok(Exponents { n, p, q })
    }

    /// No admissibility check. `C` is still defined but certifies nothing
    /// unless [`Exponents::is_admissible`] holds.
    pub fn unchecked(n: usize, p: f64, q: f64) -> Result<Self> {
        if n < 1 || !(p > 1.0 && p.is_finite() && q > 1.0 && q.is_finite()) {
            return Err(Error::InvalidInput(format!("need n >= 1, p > 1, q > 1; got ({n}, {p}, {q})")));
        }
        Ok(Exponents { n, p, q })
    }

    pub fn is_admissible(&self) -> bool {
        Exponents::new(self.n, self.p, self.q).is_ok()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `n p / (n - p)`.
    pub fn critical_q(&self) -> f64 {
        let n = self.n as f64;
        n * self.p / (n - self.p)
    }

    /// `1 - n/p + n/q`, negative for admissible exponents.
    pub fn base(&self) -> f64 {
        let n = self.n as f64;
        1.0 - n / self.p + n / self.q
    }

    /// `1 + 1/p + 1/q`.
    pub fn slope(&self) -> f64 {
        1.0 + 1.0 / self.p + 1.0 / self.q
    }

    /// Root of `C`: `-base / slope`.
    pub fn critical_mu(&self) -> f64 {
        -self.base() / self.slope()
    }
}

/// `(1 - n/p + n/q) + (1 + 1/p + 1/q) mu`.
pub fn coefficient(exponents: &Exponents, mu: f64) -> f64 {
    debug_assert!(mu >= 0.0, "mu must be non-negative");
    exponents.base() + exponents.slope() * mu
}

/// The nonlinearity `f` of `div(|Du|^{p-2} Du) + f(u) = 0` and its primitive
/// `F(t) = int_0^t f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Nonlinearity {
    /// `|t|^{q-2} t`.
    PurePower { q: f64 },
    /// Piecewise-linear interpolation of samples `(ts[i], fs[i])`, constant
    /// extrapolation outside.
    Table { ts: Vec<f64>, fs: Vec<f64> },
    /// `f(t) = c`, independent of `t` (a source term).
    ConstantSource { c: f64 },
    /// `e^t - 1`.
    Exponential,
}

impl Nonlinearity {
    pub fn pure_power(q: f64) -> Self {
        Nonlinearity::PurePower { q }
    }

    pub fn table(ts: Vec<f64>, fs: Vec<f64>) -> Result<Self> {
        if ts.len() != fs.len() || ts.len() < 2 {
            return Err(Error::InvalidInput("table needs at least two (t, f) pairs of equal length".into()));
        }
        if ts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("table abscissae must be strictly increasing".into()));
        }
        if ts.iter().chain(&fs).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("table entries must be finite".into()));
        }
        Ok(Nonlinearity::Table { ts, fs })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Nonlinearity::PurePower { q } if !(*q > 1.0 && q.is_finite()) => {
                Err(Error::InvalidInput(format!("pure power needs q > 1, got {q}")))
            }
            Nonlinearity::Table { ts, fs } => Nonlinearity::table(ts.clone(), fs.clone()).map(|_| ()),
            Nonlinearity::ConstantSource { c } if !c.is_finite() => {
                Err(Error::InvalidInput("constant source must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn f(&self, t: f64) -> f64 {
        match self {
            Nonlinearity::PurePower { q } => t.abs().powf(q - 2.0) * t,
            Nonlinearity::Table { ts, fs } => {
                let last = ts.len() - 1;
                if t <= ts[0] {
                    return fs[0];
                }
                if t >= ts[last] {
                    return fs[last];
                }
                let i = ts.partition_point(|&x| x <= t) - 1;
                let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
                fs[i] + w * (fs[i + 1] - fs[i])
            }
            Nonlinearity::ConstantSource { c } => *c,
            Nonlinearity::Exponential => t.exp_m1(),
        }
    }

    /// `f'(t)`; one-sided slope at table knots.
    pub fn df(&self, t: f64) -> f64 {
        match self {
            Nonlinearity::PurePower { q } => (q - 1.0) * t.abs().powf(q - 2.0),
            Nonlinearity::Table { ts, fs } => {
                let last = ts.len() - 1;
                if t < ts[0] || t > ts[last] {
                    return 0.0;
                }
                let i = (ts.partition_point(|&x| x <= t).max(1) - 1).min(last - 1);
                (fs[i + 1] - fs[i]) / (ts[i + 1] - ts[i])
            }
            Nonlinearity::ConstantSource { .. } => 0.0,
            Nonlinearity::Exponential => t.exp(),
        }
    }

    /// `F(t) = int_0^t f`: closed form for powers and constants, adaptive
    /// quadrature otherwise (split at table knots).
    pub fn primitive(&self, t: f64) -> Result<f64> {
        match self {
            Nonlinearity::PurePower { q } => Ok(t.abs().powf(*q) / q),
            Nonlinearity::ConstantSource { c } => Ok(c * t),
            Nonlinearity::Exponential => {
                integrate(|s: f64| s.exp_m1(), 0.0, t, 1e-13 * (1.0 + t.abs() * t.exp().max(1.0)))
            }
            Nonlinearity::Table { ts, .. } => {
                let (lo, hi, sign) = if t >= 0.0 { (0.0, t, 1.0) } else { (t, 0.0, -1.0) };
                let mut cuts = vec![lo];
                cuts.extend(ts.iter().copied().filter(|&x| x > lo && x < hi));
                cuts.push(hi);
                let mut total = 0.0;
                for w in cuts.windows(2) {
                    total += integrate(|s| self.f(s), w[0], w[1], 1e-14 * (1.0 + (w[1] - w[0])))?;
                }
                Ok(sign * total)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub passed: bool,
    pub q: f64,
    pub samples: usize,
    /// `min (t f(t) - q F(t))` over the samples, and where it occurs.
    pub superlinearity_margin: f64,
    pub superlinearity_at: f64,
    /// `min F(t)` over the samples, and where it occurs.
    pub primitive_min: f64,
    pub primitive_at: f64,
    /// The smaller of the two margins and its location.
    pub worst_margin: f64,
    pub worst_at: f64,
    /// Largest `|t f(t) - q F(t)|` relative to `1 + |t f(t)|`; zero for the pure power.
    pub max_relative_gap: f64,
}

pub const CONDITION_F_TOLERANCE: f64 = 1e-9;

/// Checks `t f(t) >= q F(t) >= 0` at every sample (to `-1e-9`).
pub fn check_condition_f(f: &Nonlinearity, q: f64, t_samples: &[f64]) -> Result<ConditionReport> {
    f.validate()?;
    if !(t_samples.iter().any(|&t| t < 0.0) && t_samples.iter().any(|&t| t > 0.0)) {
        return Err(Error::InvalidInput("condition (f) samples must include both signs of t".into()));
    }
    let mut report = ConditionReport {
        passed: true,
        q,
        samples: t_samples.len(),
        superlinearity_margin: f64::INFINITY,
        superlinearity_at: 0.0,
        primitive_min: f64::INFINITY,
        primitive_at: 0.0,
        worst_margin: f64::INFINITY,
        worst_at: 0.0,
        max_relative_gap: 0.0,
    };
    for &t in t_samples {
        if !t.is_finite() {
            return Err(Error::InvalidInput("condition (f) samples must be finite".into()));
        }
        let big_f = f.primitive(t)?;
        let tf = t * f.f(t);
        let margin = tf - q * big_f;
        report.max_relative_gap = report.max_relative_gap.max(margin.abs() / (1.0 + tf.abs()));
        if margin < report.superlinearity_margin {
            report.superlinearity_margin = margin;
            report.superlinearity_at = t;
        }
        if big_f < report.primitive_min {
            report.primitive_min = big_f;
            report.primitive_at = t;
        }
    }
    if report.superlinearity_margin <= report.primitive_min {
        report.worst_margin = report.superlinearity_margin;
        report.worst_at = report.superlinearity_at;
    } else {
        report.worst_margin = report.primitive_min;
        report.worst_at = report.primitive_at;
    }
    report.passed = report.worst_margin >= -CONDITION_F_TOLERANCE;
    Ok(report)
}

/// `n` evenly spaced samples of `[-t_max, t_max]`.
pub fn symmetric_samples(t_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| -t_max + 2.0 * t_max * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Certified,
    NotCertified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateOptions {
    pub ladder_points: usize,
    /// Smallest ladder point as a fraction of `eps_bar1`.
    pub ladder_min_ratio: f64,
    pub grid: MuGrid,
    /// Relative width of the final bisection bracket.
    pub rel_tol: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions { ladder_points: 32, ladder_min_ratio: 1e-4, grid: MuGrid::default(), rel_tol: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub exponents: Exponents,
    pub curve: String,
    pub eps_bar1: f64,
    pub base: f64,
    pub slope: f64,
    pub mu_profile: MuProfile,
    pub coefficients: Vec<f64>,
    /// Every `eps` in `(0, eps_bar)` has `C(mu(eps)) < 0`.
    pub eps_bar: f64,
    pub mu_at_eps_bar: f64,
    pub coefficient_at_eps_bar: f64,
    pub geometry_limited: bool,
    pub bisection_steps: usize,
    pub verdict: Verdict,
    pub condition_f: Option<ConditionReport>,
    pub warnings: Vec<String>,
}

/// Log-spaced ladder of `points` half-widths ending at `top`.
pub fn log_ladder(top: f64, min_ratio: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    let lo = (top * min_ratio).ln();
    let hi = top.ln();
    (0..points)
        .map(|i| if i == points - 1 { top } else { (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp() })
        .collect()
}

pub fn critical_eps(chart: &TubeChart, exponents: &Exponents) -> Result<Certificate> {
    critical_eps_with(chart, exponents, CertificateOptions::default())
}

/// Brackets the first sign change of `C(mu(eps))` on a log ladder and bisects
/// it with direct `mu` evaluations.
pub fn critical_eps_with(chart: &TubeChart, exponents: &Exponents, options: CertificateOptions) -> Result<Certificate> {
    if !(options.rel_tol > 0.0 && options.ladder_min_ratio > 0.0 && options.ladder_min_ratio < 1.0) {
        return Err(Error::InvalidInput("certificate options out of range".into()));
    }
    let top = chart.eps_bar1();
    let ladder = log_ladder(top, options.ladder_min_ratio, options.ladder_points);
    let mut profile = MuProfile { eps_values: Vec::new(), mu_values: Vec::new(), argmax_points: Vec::new() };
    let mut coefficients = Vec::new();
    for &eps in &ladder {
        let m = mu(chart, eps, options.grid)?;
        profile.eps_values.push(eps);
        profile.mu_values.push(m.mu);
        profile.argmax_points.push((m.argmax_t, m.argmax_r));
        coefficients.push(coefficient(exponents, m.mu));
    }
    let mut warnings =
        vec![format!("eps_bar1 = {top:.6e} comes from a sampled reach estimate; it is a heuristic bound, not a proof")];
    if chart.curve().kind() == CurveKind::Spline {
        warnings.push(
            "regularity: spline curves are only C2, so [t kappa]' is piecewise continuous and taken by finite differences"
                .to_string(),
        );
    }
    if profile.mu_values.windows(2).any(|w| w[1] < w[0]) {
        warnings.push("mu ladder is not monotone; grid may be too coarse".to_string());
    }
    let first_bad = coefficients.iter().position(|&c| c >= 0.0);
    let mut steps = 0;
    let (eps_bar, mu_bar, geometry_limited) = match first_bad {
        None => {
            warnings.push("geometry-limited: C < 0 up to the chart half-width".to_string());
            (top, *profile.mu_values.last().unwrap(), true)
        }
        Some(k) => {
            let (mut lo, mut mu_lo) = if k == 0 { (0.0, 0.0) } else { (ladder[k - 1], profile.mu_values[k - 1]) };
            let mut hi = ladder[k];
            while hi - lo > options.rel_tol * hi {
                let mid = 0.5 * (lo + hi);
                let m = mu(chart, mid, options.grid)?.mu;
                if coefficient(exponents, m) < 0.0 {
                    lo = mid;
                    mu_lo = m;
                } else {
                    hi = mid;
                }
                steps += 1;
                if steps > 200 {
                    break;
                }
            }
            (lo, mu_lo, false)
        }
    };
    let verdict = if eps_bar > 0.0 { Verdict::Certified } else { Verdict::NotCertified };
    if verdict == Verdict::NotCertified {
        warnings.push("no half-width with C < 0 was found".to_string());
    }
    Ok(Certificate {
        exponents: *exponents,
        curve: chart.curve().name().to_string(),
        eps_bar1: top,
        base: exponents.base(),
        slope: exponents.slope(),
        mu_profile: profile,
        coefficients,
        eps_bar,
        mu_at_eps_bar: mu_bar,
        coefficient_at_eps_bar: coefficient(exponents, mu_bar),
        geometry_limited,
        bisection_steps: steps,
        verdict,
        condition_f: None,
        warnings,
    })
}

impl Certificate {
    /// Attaches a condition (f) report; a failed check withdraws the certificate.
    pub fn with_condition(mut self, report: ConditionReport) -> Self {
        if !report.passed {
            self.verdict = Verdict::NotCertified;
            self.warnings
                .push(format!("condition (f) fails: margin {:.3e} at t = {:.6}", report.worst_margin, report.worst_at));
        }
        self.condition_f = Some(report);
        self
    }

    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    /// CSV with header `eps,mu,C`.
    pub fn ladder_csv(&self) -> String {
        let mut out = String::from("eps,mu,C\n");
        for ((e, m), c) in self.mu_profile.eps_values.iter().zip(&self.mu_profile.mu_values).zip(&self.coefficients) {
            out.push_str(&format!("{e:.16e},{m:.16e},{c:.16e}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{reparametrize_arclength, CurveSpec};
    use crate::tube::build_chart;

    fn unit_arc_chart() -> TubeChart {
        let c = reparametrize_arclength(&CurveSpec::arc([0.0, 0.0], 1.0, 0.0, 2.0)).unwrap();
        build_chart(&c, 0.5).unwrap()
    }

    #[test]
    fn exponent_checks() {
        assert!(Exponents::new(2, 1.5, 6.0).is_err());
        assert!(Exponents::new(2, 1.5, 6.0 + 1e-9).is_ok());
        assert!(Exponents::new(2, 2.0, 10.0).is_err());
        assert!(Exponents::new(1, 0.5, 10.0).is_err());
        assert!(Exponents::new(3, 1.0, 10.0).is_err());
        assert!(Exponents::new(2, 1.5, 4.0).is_err());
    }

    #[test]
    fn coefficient_values() {
        let e = Exponents::new(2, 1.5, 10.0).unwrap();
        assert!((coefficient(&e, 0.0) + 2.0 / 15.0).abs() < 1e-15);
        assert!((e.slope() - 53.0 / 30.0).abs() < 1e-15);
        assert!(coefficient(&e, 4.0 / 53.0).abs() < 1e-15);
        let e3 = Exponents::new(3, 2.0, 7.0).unwrap();
        assert!((e3.base() + 1.0 / 14.0).abs() < 1e-15);
        assert!((e3.critical_mu() - 1.0 / 23.0).abs() < 1e-15);
    }

    #[test]
    fn unit_arc_critical_width() {
        let chart = unit_arc_chart();
        let e = Exponents::new(2, 1.5, 10.0).unwrap();
        let cert = critical_eps(&chart, &e).unwrap();
        assert!(!cert.geometry_limited);
        assert!((cert.eps_bar - 4.0 / 57.0).abs() <= 1e-6 * 4.0 / 57.0, "{}", cert.eps_bar);
        let e3 = Exponents::new(3, 2.0, 7.0).unwrap();
        let cert = critical_eps(&chart, &e3).unwrap();
        assert!((cert.eps_bar - 1.0 / 24.0).abs() <= 1e-6 / 24.0, "{}", cert.eps_bar);
        assert!(cert.is_certified());
    }

    #[test]
    fn straight_tubes_are_geometry_limited() {
        let c = reparametrize_arclength(&CurveSpec::segment([0.0, 0.0], [3.0, 0.0])).unwrap();
        let chart = build_chart(&c, 0.2).unwrap();
        let cert = critical_eps(&chart, &Exponents::new(2, 1.5, 10.0).unwrap()).unwrap();
        assert!(cert.geometry_limited && cert.is_certified());
        assert_eq!(cert.eps_bar, chart.eps_bar1());
        assert!(cert.warnings.iter().any(|w| w.starts_with("geometry-limited")));
        assert!(cert.warnings.iter().any(|w| w.contains("sampled reach")));
        assert!(!cert.warnings.iter().any(|w| w.starts_with("regularity")));
        assert!(cert.ladder_csv().starts_with("eps,mu,C\n"));
        assert_eq!(cert.ladder_csv().lines().count(), 33);
    }

    #[test]
    fn power_nonlinearity_is_equality_case() {
        let f = Nonlinearity::pure_power(10.0);
        let rep = check_condition_f(&f, 10.0, &symmetric_samples(2.0, 401)).unwrap();
        assert!(rep.passed);
        assert!(rep.max_relative_gap < 1e-13);
        assert!(rep.primitive_min >= 0.0);
    }

    #[test]
    fn exponential_fails() {
        let f = Nonlinearity::Exponential;
        let ts = symmetric_samples(3.0, 121);
        let rep = check_condition_f(&f, 10.0, &ts).unwrap();
        assert!(!rep.passed);
        // F(t) = e^t - 1 - t is non-negative; the superlinearity half fails
        let margin = |t: f64| t * t.exp_m1() - 10.0 * (t.exp() - 1.0 - t);
        let (t_worst, m_worst) =
            ts.iter().map(|&t| (t, margin(t))).fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        assert_eq!(rep.worst_at, t_worst);
        assert!((rep.worst_margin - m_worst).abs() < 1e-10 * m_worst.abs());
        assert!(rep.primitive_min >= -1e-15);
        assert!(margin(-3.0) < 0.0);
    }

    #[test]
    fn samples_need_both_signs() {
        assert!(check_condition_f(&Nonlinearity::pure_power(4.0), 4.0, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn table_primitive() {
        let f = Nonlinearity::table(vec![-1.0, 0.0, 2.0], vec![-1.0, 0.0, 4.0]).unwrap();
        assert!((f.primitive(2.0).unwrap() - 4.0).abs() < 1e-13);
        assert!((f.primitive(-1.0).unwrap() - 0.5).abs() < 1e-13);
        assert!((f.f(1.0) - 2.0).abs() < 1e-15);
        assert_eq!(f.primitive(0.0).unwrap(), 0.0);
        assert!(Nonlinearity::table(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn nonlinearity_json() {
        let f: Nonlinearity = serde_json::from_str(r#"{"kind": "pure-power", "q": 10}"#).unwrap();
        assert_eq!(f, Nonlinearity::pure_power(10.0));
        let g: Nonlinearity = serde_json::from_str(r#"{"kind": "constant-source", "c": 1}"#).unwrap();
        assert_eq!(g.f(3.0), 1.0);
    }
}
