//! Triangle meshes: structured tube meshes in chart coordinates, the disk and
//! square validation fixtures, and the plain-text node/element format.
//!
//! Text format (all floats written with `{:.16e}`, i.e. 17 significant digits):
//!
//! ```text
//! tubecert-mesh 1            | tubecert-solution 1
//! half_width <eps|none>
//! vertices <count>
//! <index> <x> <y> <t> <r>    | <index> <x> <y> <t> <r> <u>
//! triangles <count>
//! <i> <j> <k>
//! boundary <count>
//! <i> <j> <tag>
//! end
//! ```
//!
//! `t r` are `NaN NaN` for meshes without chart coordinates. Triangles are
//! counter-clockwise; boundary edges run with the domain on their left.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{cross, dist, sub, Point};
use crate::tube::TubeChart;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryTag {
    /// `r = -eps`
    LateralMinus,
    /// `r = +eps`
    LateralPlus,
    /// `t = a`
    EndStart,
    /// `t = b`
    EndEnd,
    /// Boundary of a fixture mesh.
    Outer,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::LateralMinus => "lateral-minus",
            BoundaryTag::LateralPlus => "lateral-plus",
            BoundaryTag::EndStart => "end-start",
            BoundaryTag::EndEnd => "end-end",
            BoundaryTag::Outer => "outer",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "lateral-minus" => BoundaryTag::LateralMinus,
            "lateral-plus" => BoundaryTag::LateralPlus,
            "end-start" => BoundaryTag::EndStart,
            "end-end" => BoundaryTag::EndEnd,
            "outer" => BoundaryTag::Outer,
            _ => return None,
        })
    }

    pub fn is_lateral(self) -> bool {
        matches!(self, BoundaryTag::LateralMinus | BoundaryTag::LateralPlus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
    /// The triangle owning this edge.
    pub triangle: usize,
}

/// Conforming P1 triangulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    /// `(t, r)` chart coordinates for tube meshes.
    pub chart_coords: Option<Vec<Point>>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    /// Tube half-width the mesh was built for.
    pub half_width: Option<f64>,
    /// Longest edge.
    pub h: f64,
}

/// Mesh of the piecewise-smooth tube `D_eps` (flat end caps).
pub type TubeMesh = TriMesh;

/// Structured `(t, r)` grid over `(a, b) x (-eps, eps)`, each cell split in two.
pub fn mesh_tube(chart: &TubeChart, eps: f64, target_h: f64) -> Result<TubeMesh> {
    if !(eps > 0.0) || eps > chart.eps_bar1() * (1.0 + 1e-12) {
        return Err(Error::Mesh(format!("half-width {eps} not in (0, {}]", chart.eps_bar1())));
    }
    if !(target_h > 0.0) {
        return Err(Error::Mesh(format!("target edge length must be positive, got {target_h}")));
    }
    let (a, b) = chart.interval();
    let cells = |len: f64| (len / target_h - 1e-9).ceil().max(1.0) as usize;
    let nt = cells(b - a);
    let nr = cells(2.0 * eps);
    if nr < 4 {
        return Err(Error::Mesh(format!("target_h = {target_h} gives {nr} cells across the tube (need >= 4)")));
    }
    let id = |i: usize, j: usize| i * (nr + 1) + j;
    let mut vertices = Vec::with_capacity((nt + 1) * (nr + 1));
    let mut chart_coords = Vec::with_capacity(vertices.capacity());
    for i in 0..=nt {
        let t = if i == nt { b } else { a + (b - a) * i as f64 / nt as f64 };
        for j in 0..=nr {
            let r = if j == nr { eps } else { -eps + 2.0 * eps * j as f64 / nr as f64 };
            vertices.push(chart.to_physical(t, r)?);
            chart_coords.push([t, r]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nt * nr);
    for i in 0..nt {
        for j in 0..nr {
            let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let quad = |i: usize, j: usize| 2 * (i * nr + j);
    let mut boundary = Vec::with_capacity(2 * (nt + nr));
    for i in 0..nt {
        boundary.push(BoundaryEdge {
            nodes: [id(i, 0), id(i + 1, 0)],
            tag: BoundaryTag::LateralMinus,
            triangle: quad(i, 0),
        });
    }
    for j in 0..nr {
        boundary.push(BoundaryEdge {
            nodes: [id(nt, j), id(nt, j + 1)],
            tag: BoundaryTag::EndEnd,
            triangle: quad(nt - 1, j),
        });
    }
    for i in (0..nt).rev() {
        boundary.push(BoundaryEdge {
            nodes: [id(i + 1, nr), id(i, nr)],
            tag: BoundaryTag::LateralPlus,
            triangle: quad(i, nr - 1) + 1,
        });
    }
    for j in (0..nr).rev() {
        boundary.push(BoundaryEdge {
            nodes: [id(0, j + 1), id(0, j)],
            tag: BoundaryTag::EndStart,
            triangle: quad(0, j) + 1,
        });
    }
    let mut mesh =
        TriMesh { vertices, chart_coords: Some(chart_coords), triangles, boundary, half_width: Some(eps), h: 0.0 };
    mesh.h = mesh.max_edge();
    Ok(mesh)
}

/// Disk fixture: concentric rings with `6k` nodes on ring `k`.
pub fn mesh_disk(center: Point, radius: f64, target_h: f64) -> Result<TriMesh> {
    if !(radius > 0.0 && target_h > 0.0) {
        return Err(Error::Mesh("disk radius and target_h must be positive".into()));
    }
    let rings = (radius / target_h - 1e-9).ceil().max(1.0) as usize;
    let mut vertices = vec![center];
    let mut ring_start = vec![0usize];
    for k in 1..=rings {
        ring_start.push(vertices.len());
        let rho = radius * k as f64 / rings as f64;
        let n = 6 * k;
        for j in 0..n {
            let th = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            vertices.push([center[0] + rho * th.cos(), center[1] + rho * th.sin()]);
        }
    }
    let mut triangles = Vec::new();
    for k in 1..=rings {
        let outer = |j: usize| ring_start[k] + j % (6 * k);
        if k == 1 {
            for j in 0..6 {
                triangles.push([0, outer(j), outer(j + 1)]);
            }
            continue;
        }
        let m = 6 * (k - 1);
        let inner = |i: usize| ring_start[k - 1] + i % m;
        let (n, mut i, mut j) = (6 * k, 0usize, 0usize);
        while i < m || j < n {
            let next_inner = (i + 1) as f64 / m as f64;
            let next_outer = (j + 1) as f64 / n as f64;
            if j < n && (i == m || next_outer <= next_inner) {
                triangles.push([inner(i), outer(j), outer(j + 1)]);
                j += 1;
            } else {
                triangles.push([inner(i), outer(j), inner(i + 1)]);
                i += 1;
            }
        }
    }
    let last = ring_start[rings];
    let n = 6 * rings;
    let edges: Vec<[usize; 2]> = (0..n).map(|j| [last + j, last + (j + 1) % n]).collect();
    fixture(vertices, triangles, edges)
}

/// Square fixture `[x0, x0 + side] x [y0, y0 + side]`, `cells` per side.
pub fn mesh_square(origin: Point, side: f64, cells: usize) -> Result<TriMesh> {
    if cells < 2 || !(side > 0.0) {
        return Err(Error::Mesh("square needs side > 0 and at least 2 cells".into()));
    }
    let id = |i: usize, j: usize| j * (cells + 1) + i;
    let step = side / cells as f64;
    let mut vertices = Vec::new();
    for j in 0..=cells {
        for i in 0..=cells {
            vertices.push([origin[0] + step * i as f64, origin[1] + step * j as f64]);
        }
    }
    let mut triangles = Vec::new();
    for j in 0..cells {
        for i in 0..cells {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut edges = Vec::new();
    edges.extend((0..cells).map(|i| [id(i, 0), id(i + 1, 0)]));
    edges.extend((0..cells).map(|j| [id(cells, j), id(cells, j + 1)]));
    edges.extend((0..cells).rev().map(|i| [id(i + 1, cells), id(i, cells)]));
    edges.extend((0..cells).rev().map(|j| [id(0, j + 1), id(0, j)]));
    fixture(vertices, triangles, edges)
}

fn fixture(vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>, edges: Vec<[usize; 2]>) -> Result<TriMesh> {
    for tri in &mut triangles {
        let [p, q, r] = tri.map(|i| vertices[i]);
        if cross(sub(q, p), sub(r, p)) < 0.0 {
            tri.swap(1, 2);
        }
    }
    let owner = edge_owners(&triangles);
    let boundary = edges
        .into_iter()
        .map(|nodes| {
            let triangle = *owner
                .get(&(nodes[0], nodes[1]))
                .ok_or_else(|| Error::Mesh(format!("boundary edge {nodes:?} has no owning triangle")))?;
            Ok(BoundaryEdge { nodes, tag: BoundaryTag::Outer, triangle })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mesh = TriMesh { vertices, chart_coords: None, triangles, boundary, half_width: None, h: 0.0 };
    mesh.h = mesh.max_edge();
    Ok(mesh)
}

/// Directed edge `(i, j)` -> triangle having it in counter-clockwise order.
fn take<'a>(rows: &mut impl Iterator<Item = (usize, Vec<&'a str>)>, what: &str) -> Result<(usize, Vec<&'a str>)> {
    rows.next().ok_or_else(|| Error::Parse { line: 0, message: format!("unexpected end, wanted {what}") })
}

fn section<'a>(rows: &mut impl Iterator<Item = (usize, Vec<&'a str>)>, name: &str) -> Result<usize> {
    let (n, s) = take(rows, name)?;
    match s.as_slice() {
        [key, count] if *key == name => {
            count.parse::<usize>().map_err(|e| Error::Parse { line: n, message: format!("`{count}`: {e}") })
        }
        _ => Err(Error::Parse { line: n, message: format!("expected `{name} <count>`") }),
    }
}

/// Directed edge `(i, j)` -> triangle having it in counter-clockwise order.
fn edge_owners(triangles: &[[usize; 3]]) -> HashMap<(usize, usize), usize> {
    let mut owner = HashMap::with_capacity(3 * triangles.len());
    for (k, tri) in triangles.iter().enumerate() {
        for e in 0..3 {
            owner.insert((tri[e], tri[(e + 1) % 3]), k);
        }
    }
    owner
}

impl TriMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Signed area (positive for counter-clockwise triangles).
    pub fn area(&self, k: usize) -> f64 {
        let [p, q, r] = self.triangles[k].map(|i| self.vertices[i]);
        0.5 * cross(sub(q, p), sub(r, p))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|k| self.area(k)).sum()
    }

    pub fn centroid(&self, k: usize) -> Point {
        let [p, q, r] = self.triangles[k].map(|i| self.vertices[i]);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    /// Gradients of the three barycentric basis functions on triangle `k`.
    pub fn basis_gradients(&self, k: usize) -> [Point; 3] {
        let [p, q, r] = self.triangles[k].map(|i| self.vertices[i]);
        let twice = cross(sub(q, p), sub(r, p));
        let g = |a: Point, b: Point| [(a[1] - b[1]) / twice, (b[0] - a[0]) / twice];
        [g(q, r), g(r, p), g(p, q)]
    }

    /// Constant gradient of the P1 interpolant of `values` on triangle `k`.
    pub fn gradient(&self, k: usize, values: &[f64]) -> Point {
        let grads = self.basis_gradients(k);
        let tri = self.triangles[k];
        let mut g = [0.0; 2];
        for (a, grad) in grads.iter().enumerate() {
            g[0] += values[tri[a]] * grad[0];
            g[1] += values[tri[a]] * grad[1];
        }
        g
    }

    /// Lumped (row-sum) mass per vertex.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.vertices.len()];
        for (k, tri) in self.triangles.iter().enumerate() {
            let third = self.area(k) / 3.0;
            for &i in tri {
                m[i] += third;
            }
        }
        m
    }

    pub fn boundary_nodes(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for e in &self.boundary {
            flags[e.nodes[0]] = true;
            flags[e.nodes[1]] = true;
        }
        flags
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        dist(self.vertices[e.nodes[0]], self.vertices[e.nodes[1]])
    }

    /// Outward unit normal of a boundary edge.
    pub fn outward_normal(&self, e: &BoundaryEdge) -> Point {
        let d = sub(self.vertices[e.nodes[1]], self.vertices[e.nodes[0]]);
        let len = d[0].hypot(d[1]);
        [d[1] / len, -d[0] / len]
    }

    pub fn max_edge(&self) -> f64 {
        let mut h: f64 = 0.0;
        for tri in &self.triangles {
            for e in 0..3 {
                h = h.max(dist(self.vertices[tri[e]], self.vertices[tri[(e + 1) % 3]]));
            }
        }
        h
    }

    /// Bounding-box diagonal.
    pub fn diameter(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        dist(lo, hi)
    }

    /// Uniform refinement: every triangle split into four. Chart coordinates are
    /// interpolated in the chart and vertices re-mapped through it when given.
    pub fn refine(&self, chart: Option<&TubeChart>) -> Result<TriMesh> {
        self.refine_with_parents(chart).map(|(mesh, _)| mesh)
    }

    /// Like [`TriMesh::refine`], also returning the two parent vertices of every
    /// new vertex (old vertices keep their indices).
    pub fn refine_with_parents(&self, chart: Option<&TubeChart>) -> Result<(TriMesh, Vec<[usize; 2]>)> {
        let mut parents: Vec<[usize; 2]> = Vec::new();
        let mut vertices = self.vertices.clone();
        let mut coords = self.chart_coords.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid =
            |i: usize, j: usize, vertices: &mut Vec<Point>, coords: &mut Option<Vec<Point>>| -> Result<usize> {
                let key = (i.min(j), i.max(j));
                if let Some(&m) = midpoint.get(&key) {
                    return Ok(m);
                }
                let idx = vertices.len();
                let p = match (coords.as_mut(), chart) {
                    (Some(cc), Some(chart)) => {
                        let tr = [0.5 * (cc[i][0] + cc[j][0]), 0.5 * (cc[i][1] + cc[j][1])];
                        cc.push(tr);
                        chart.to_physical(tr[0], tr[1])?
                    }
                    (Some(cc), None) => {
                        cc.push([0.5 * (cc[i][0] + cc[j][0]), 0.5 * (cc[i][1] + cc[j][1])]);
                        [0.5 * (vertices[i][0] + vertices[j][0]), 0.5 * (vertices[i][1] + vertices[j][1])]
                    }
                    (None, _) => [0.5 * (vertices[i][0] + vertices[j][0]), 0.5 * (vertices[i][1] + vertices[j][1])],
                };
                vertices.push(p);
                parents.push([i, j]);
                midpoint.insert(key, idx);
                Ok(idx)
            };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        let mut edge_mids = HashMap::new();
        for &[p, q, r] in &self.triangles {
            let pq = mid(p, q, &mut vertices, &mut coords)?;
            let qr = mid(q, r, &mut vertices, &mut coords)?;
            let rp = mid(r, p, &mut vertices, &mut coords)?;
            edge_mids.insert((p, q), pq);
            edge_mids.insert((q, r), qr);
            edge_mids.insert((r, p), rp);
            triangles.extend([[p, pq, rp], [pq, q, qr], [rp, qr, r], [pq, qr, rp]]);
        }
        let owner = edge_owners(&triangles);
        let mut boundary = Vec::with_capacity(2 * self.boundary.len());
        for e in &self.boundary {
            let m = edge_mids[&(e.nodes[0], e.nodes[1])];
            for nodes in [[e.nodes[0], m], [m, e.nodes[1]]] {
                boundary.push(BoundaryEdge { nodes, tag: e.tag, triangle: owner[&(nodes[0], nodes[1])] });
            }
        }
        let mut mesh =
            TriMesh { vertices, chart_coords: coords, triangles, boundary, half_width: self.half_width, h: 0.0 };
        mesh.h = mesh.max_edge();
        Ok((mesh, parents))
    }

    /// Piecewise-linear prolongation of nodal values onto a refinement.
    pub fn prolongate(values: &[f64], parents: &[[usize; 2]]) -> Vec<f64> {
        let mut out = values.to_vec();
        out.extend(parents.iter().map(|&[i, j]| 0.5 * (values[i] + values[j])));
        out
    }

    /// Serializes the mesh, optionally with one nodal value per vertex.
    pub fn to_text(&self, values: Option<&[f64]>) -> String {
        let mut out = String::new();
        let header = if values.is_some() { "tubecert-solution 1" } else { "tubecert-mesh 1" };
        let _ = writeln!(out, "{header}");
        match self.half_width {
            Some(eps) => {
                let _ = writeln!(out, "half_width {eps:.16e}");
            }
            None => out.push_str("half_width none\n"),
        }
        let _ = writeln!(out, "vertices {}", self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            let tr = self.chart_coords.as_ref().map(|c| c[i]).unwrap_or([f64::NAN, f64::NAN]);
            let _ = write!(out, "{i} {:.16e} {:.16e} {:.16e} {:.16e}", v[0], v[1], tr[0], tr[1]);
            if let Some(u) = values {
                let _ = write!(out, " {:.16e}", u[i]);
            }
            out.push('\n');
        }
        let _ = writeln!(out, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(out, "boundary {}", self.boundary.len());
        for e in &self.boundary {
            let _ = writeln!(out, "{} {} {}", e.nodes[0], e.nodes[1], e.tag.as_str());
        }
        out.push_str("end\n");
        out
    }

    /// Parses [`TriMesh::to_text`] output; returns nodal values for solution files.
    pub fn from_text(text: &str) -> Result<(TriMesh, Option<Vec<f64>>)> {
        let mut rows = text.lines().enumerate().map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()));
        let bad = |line: usize, message: String| Error::Parse { line, message };
        let num = |line: usize, s: &str| s.parse::<f64>().map_err(|e| bad(line, format!("`{s}`: {e}")));
        let idx = |line: usize, s: &str| s.parse::<usize>().map_err(|e| bad(line, format!("`{s}`: {e}")));

        let (n, head) = take(&mut rows, "header")?;
        let with_values = match head.as_slice() {
            ["tubecert-mesh", "1"] => false,
            ["tubecert-solution", "1"] => true,
            _ => return Err(bad(n, "unknown header".into())),
        };
        let (n, hw) = take(&mut rows, "half_width")?;
        let half_width = match hw.as_slice() {
            ["half_width", "none"] => None,
            ["half_width", v] => Some(num(n, v)?),
            _ => return Err(bad(n, "expected `half_width`".into())),
        };
        let nv = section(&mut rows, "vertices")?;
        let width = if with_values { 6 } else { 5 };
        let mut vertices = Vec::with_capacity(nv);
        let mut coords = Vec::with_capacity(nv);
        let mut values = Vec::new();
        for i in 0..nv {
            let (n, f) = take(&mut rows, "vertex")?;
            if f.len() != width || idx(n, f[0])? != i {
                return Err(bad(n, format!("malformed vertex line {i}")));
            }
            vertices.push([num(n, f[1])?, num(n, f[2])?]);
            coords.push([num(n, f[3])?, num(n, f[4])?]);
            if with_values {
                values.push(num(n, f[5])?);
            }
        }
        let nt = section(&mut rows, "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (n, f) = take(&mut rows, "triangle")?;
            if f.len() != 3 {
                return Err(bad(n, "triangle needs three indices".into()));
            }
            let t = [idx(n, f[0])?, idx(n, f[1])?, idx(n, f[2])?];
            if t.iter().any(|&v| v >= nv) {
                return Err(bad(n, "vertex index out of range".into()));
            }
            triangles.push(t);
        }
        let nb = section(&mut rows, "boundary")?;
        let owner = edge_owners(&triangles);
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let (n, f) = take(&mut rows, "boundary edge")?;
            if f.len() != 3 {
                return Err(bad(n, "boundary line needs two indices and a tag".into()));
            }
            let nodes = [idx(n, f[0])?, idx(n, f[1])?];
            let tag = BoundaryTag::parse(f[2]).ok_or_else(|| bad(n, format!("unknown tag `{}`", f[2])))?;
            let triangle =
                *owner.get(&(nodes[0], nodes[1])).ok_or_else(|| bad(n, "edge not in any triangle".into()))?;
            boundary.push(BoundaryEdge { nodes, tag, triangle });
        }
        let (n, tail) = take(&mut rows, "end")?;
        if tail.as_slice() != ["end"] {
            return Err(bad(n, "expected `end`".into()));
        }
        let chart_coords = if coords.iter().all(|c| c[0].is_nan() && c[1].is_nan()) { None } else { Some(coords) };
        let mut mesh = TriMesh { vertices, chart_coords, triangles, boundary, half_width, h: 0.0 };
        mesh.h = mesh.max_edge();
        Ok((mesh, with_values.then_some(values)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{reparametrize_arclength, CurveSpec};
    use crate::geom::dot;
    use crate::tube::build_chart;
    use proptest::prelude::*;

    fn segment_chart() -> TubeChart {
        let c = reparametrize_arclength(&CurveSpec::segment([0.0, 0.0], [2.0, 0.0])).unwrap();
        build_chart(&c, 0.5).unwrap()
    }

    fn arc_chart() -> TubeChart {
        let c = reparametrize_arclength(&CurveSpec::arc([0.0, 0.0], 1.0, 0.0, 1.0)).unwrap();
        build_chart(&c, 0.5).unwrap()
    }

    fn check_conforming(mesh: &TriMesh) {
        for k in 0..mesh.triangles.len() {
            assert!(mesh.area(k) > 0.0, "triangle {k} has area {}", mesh.area(k));
        }
        // every interior edge shared by exactly two triangles, every other edge tagged once
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &mesh.triangles {
            for e in 0..3 {
                let (i, j) = (t[e], t[(e + 1) % 3]);
                *count.entry((i.min(j), i.max(j))).or_default() += 1;
            }
        }
        let mut tagged: HashMap<(usize, usize), usize> = HashMap::new();
        for e in &mesh.boundary {
            let (i, j) = (e.nodes[0], e.nodes[1]);
            *tagged.entry((i.min(j), i.max(j))).or_default() += 1;
            assert!(mesh.triangles[e.triangle].contains(&i) && mesh.triangles[e.triangle].contains(&j));
        }
        for (edge, c) in count {
            match c {
                1 => assert_eq!(tagged.get(&edge), Some(&1), "boundary edge {edge:?} untagged"),
                2 => assert!(!tagged.contains_key(&edge)),
                _ => panic!("edge {edge:?} in {c} triangles"),
            }
        }
    }

    #[test]
    fn segment_tube_rectangle() {
        let mesh = mesh_tube(&segment_chart(), 0.1, 0.05).unwrap();
        check_conforming(&mesh);
        let areas: Vec<f64> = (0..mesh.triangles.len()).map(|k| mesh.area(k)).collect();
        assert!(areas.iter().all(|a| (a - areas[0]).abs() < 1e-15));
        assert!((mesh.total_area() - 0.4).abs() < 1e-13);
        assert_eq!(mesh.boundary.iter().filter(|e| e.tag == BoundaryTag::EndStart).count(), 4);
        assert!(mesh.h <= 2.0 * 0.05);
    }

    #[test]
    fn too_coarse_rejected() {
        assert!(matches!(mesh_tube(&segment_chart(), 0.1, 0.08), Err(Error::Mesh(_))));
        assert!(matches!(mesh_tube(&segment_chart(), 0.6, 0.01), Err(Error::Mesh(_))));
    }

    #[test]
    fn arc_tube_area_and_jacobian() {
        let chart = arc_chart();
        let eps = 0.1;
        let mesh = mesh_tube(&chart, eps, 0.005).unwrap();
        check_conforming(&mesh);
        // row areas scale with the chart Jacobian 1 - r kappa
        let areas: Vec<f64> = (0..mesh.triangles.len()).map(|k| mesh.area(k)).collect();
        let max = areas.iter().cloned().fold(0.0, f64::max);
        let min = areas.iter().cloned().fold(f64::INFINITY, f64::min);
        let expect = 1.1 / 0.9;
        assert!(((max / min) - expect).abs() <= 0.01 * expect, "ratio {}", max / min);
        // exact chart area: int int (1 - r kappa) dr dt = length * 2 eps
        let exact = 1.0 * 2.0 * eps;
        assert!((mesh.total_area() - exact).abs() < 1e-4 * exact);
        assert!(mesh.h <= 2.0 * 0.005);
    }

    #[test]
    fn arc_area_converges_quadratically() {
        let chart = arc_chart();
        let errs: Vec<f64> =
            [0.04, 0.02, 0.01].iter().map(|&h| (mesh_tube(&chart, 0.2, h).unwrap().total_area() - 0.4).abs()).collect();
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn lateral_normals_follow_frame() {
        let chart = arc_chart();
        let mesh = mesh_tube(&chart, 0.1, 0.01).unwrap();
        let coords = mesh.chart_coords.as_ref().unwrap();
        for e in mesh.boundary.iter().filter(|e| e.tag.is_lateral()) {
            let t = 0.5 * (coords[e.nodes[0]][0] + coords[e.nodes[1]][0]);
            let n = chart.curve().frame_at(t).unwrap().normal;
            let sign = if e.tag == BoundaryTag::LateralPlus { 1.0 } else { -1.0 };
            let cos = sign * dot(mesh.outward_normal(e), n);
            let angle = cos.min(1.0).acos();
            assert!(angle <= 2.0 * mesh.h * 1.0 + 1e-12, "angle {angle}");
        }
    }

    #[test]
    fn disk_fixture() {
        let mesh = mesh_disk([0.0, 0.0], 1.0, 0.1).unwrap();
        check_conforming(&mesh);
        let poly = 0.5 * 60.0 * (2.0 * std::f64::consts::PI / 60.0).sin();
        assert!((mesh.total_area() - poly).abs() < 1e-12);
        assert!(mesh.boundary.iter().all(|e| (crate::geom::norm(mesh.vertices[e.nodes[0]]) - 1.0).abs() < 1e-14));
    }

    #[test]
    fn square_fixture_and_refinement() {
        let mesh = mesh_square([0.0, 0.0], 1.0, 4).unwrap();
        check_conforming(&mesh);
        let fine = mesh.refine(None).unwrap();
        check_conforming(&fine);
        assert_eq!(fine.triangles.len(), 4 * mesh.triangles.len());
        assert!((fine.total_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tube_refinement_stays_on_chart() {
        let chart = arc_chart();
        let mesh = mesh_tube(&chart, 0.1, 0.025).unwrap().refine(Some(&chart)).unwrap();
        check_conforming(&mesh);
        for (p, tr) in mesh.vertices.iter().zip(mesh.chart_coords.as_ref().unwrap()) {
            assert!(dist(*p, chart.to_physical(tr[0], tr[1]).unwrap()) < 1e-15);
        }
    }

    #[test]
    fn text_format_layout() {
        let mesh = mesh_square([0.0, 0.0], 1.0, 2).unwrap();
        let text = mesh.to_text(None);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("tubecert-mesh 1"));
        assert_eq!(lines.next(), Some("half_width none"));
        assert_eq!(lines.next(), Some("vertices 9"));
        assert_eq!(lines.next(), Some("0 0.0000000000000000e0 0.0000000000000000e0 NaN NaN"));
        assert!(text.ends_with("outer\nend\n"));
        assert!(TriMesh::from_text(&text.replace("outer", "sideways")).is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(cells in 2usize..6, eps in 0.05f64..0.4, seed in 0u64..1000) {
            let chart = segment_chart();
            let mesh = mesh_tube(&chart, eps, 2.0 * eps / (4 + cells) as f64).unwrap();
            let values: Vec<f64> = (0..mesh.num_vertices()).map(|i| ((i as u64 * 2654435761 + seed) % 997) as f64 / 7.0).collect();
            let (back, vals) = TriMesh::from_text(&mesh.to_text(Some(&values))).unwrap();
            prop_assert_eq!(&back, &mesh);
            prop_assert_eq!(vals.unwrap(), values);
            let fixture = mesh_square([0.5, -1.0], 2.0, cells).unwrap();
            let (back, vals) = TriMesh::from_text(&fixture.to_text(None)).unwrap();
            prop_assert_eq!(back, fixture);
            prop_assert!(vals.is_none());
        }
    }
}
