//! Plane points and vectors.

use std::ops::{Add, Mul, Neg, Sub};

/// A point (or vector) in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    /// `self + t (other - self)`
    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + t * (other.x - self.x),
            self.y + t * (other.y - self.y),
        )
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Twice the signed area of the triangle `(a, b, c)`; positive when counterclockwise.
pub fn signed_area2(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

pub fn triangle_area(p: &[Point; 3]) -> f64 {
    0.5 * signed_area2(p[0], p[1], p[2])
}

pub fn centroid(p: &[Point; 3]) -> Point {
    Point::new(
        (p[0].x + p[1].x + p[2].x) / 3.0,
        (p[0].y + p[1].y + p[2].y) / 3.0,
    )
}

/// Radius of the inscribed circle.
pub fn inradius(p: &[Point; 3]) -> f64 {
    let perimeter = p[0].distance(p[1]) + p[1].distance(p[2]) + p[2].distance(p[0]);
    2.0 * triangle_area(p).abs() / perimeter
}

/// Smallest interior angle in radians.
pub fn min_angle(p: &[Point; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let a = p[k];
            let u = p[(k + 1) % 3] - a;
            let v = p[(k + 2) % 3] - a;
            u.cross(v).abs().atan2(u.dot(v))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Barycentric coordinates of `q` with respect to the triangle `p`.
pub fn barycentric(p: &[Point; 3], q: Point) -> [f64; 3] {
    let d = signed_area2(p[0], p[1], p[2]);
    let l1 = signed_area2(p[0], q, p[2]) / d;
    let l2 = signed_area2(p[0], p[1], q) / d;
    [1.0 - l1 - l2, l1, l2]
}
