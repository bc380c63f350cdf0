//! Small fixed-size vector helpers for planar geometry.

pub type Point = [f64; 2];

#[inline]
pub fn dot(u: Point, v: Point) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

#[inline]
pub fn cross(u: Point, v: Point) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

#[inline]
pub fn norm(u: Point) -> f64 {
    u[0].hypot(u[1])
}

#[inline]
pub fn dist(u: Point, v: Point) -> f64 {
    (u[0] - v[0]).hypot(u[1] - v[1])
}

#[inline]
pub fn sub(u: Point, v: Point) -> Point {
    [u[0] - v[0], u[1] - v[1]]
}

#[inline]
pub fn axpy(alpha: f64, x: Point, y: Point) -> Point {
    [alpha * x[0] + y[0], alpha * x[1] + y[1]]
}

/// Rotation by +pi/2: `(x, y) -> (-y, x)`.
#[inline]
pub fn rot90(u: Point) -> Point {
    [-u[1], u[0]]
}
