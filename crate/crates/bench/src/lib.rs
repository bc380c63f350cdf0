//! Fixtures shared by the benchmarks.

use tubecert::{build_chart, reparametrize_arclength, CurveSpec, TubeChart};

pub fn unit_arc() -> TubeChart {
    let c = reparametrize_arclength(&CurveSpec::arc([0.0, 0.0], 1.0, -1.0, 1.0)).expect("arc is valid");
    build_chart(&c, 0.5).expect("chart")
}

pub fn wave() -> TubeChart {
    let pts = vec![[0.0, 0.0], [0.5, 0.2], [1.0, 0.0], [1.5, -0.2], [2.0, 0.0]];
    let c = reparametrize_arclength(&CurveSpec::spline(pts)).expect("spline is valid");
    build_chart(&c, 0.5).expect("chart")
}
