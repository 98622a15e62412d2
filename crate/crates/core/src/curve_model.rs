//! Closed quadratic spline representation.
//!
//! A contour is a closed uniform quadratic B-spline over `N >= 3` cyclic
//! control points. Segment `p` is the quadratic Bezier with
//!
//! ```text
//! x0 = (P[p-1] + P[p]) / 2,   x1 = P[p],   x2 = (P[p] + P[p+1]) / 2
//! ```
//!
//! (indices mod N). Adjacent segments share endpoints exactly, so the
//! composite curve is closed and C1. Chaikin corner cutting doubles the
//! control points while reproducing the same curve, which is what the
//! multiresolution tracking passes rely on.

use crate::error::{Error, Result};
use crate::geom::{polygon_signed_area2, Point2};

/// Binomial coefficient n!/(i!(n-i)!), exact for n <= 20.
pub fn binomial(n: u32, i: u32) -> Result<u64> {
    if i > n {
        return Err(Error::domain(format!(
            "binomial: i = {i} out of range 0..={n}"
        )));
    }
    if n > 20 {
        return Err(Error::domain(format!("binomial: n = {n} exceeds 20")));
    }
    // Multiplicative form; every intermediate quotient is exact.
    let i = i.min(n - i) as u64;
    let n = n as u64;
    let mut acc = 1u64;
    for k in 1..=i {
        acc = acc * (n - i + k) / k;
    }
    Ok(acc)
}

/// Bernstein polynomial of degree `d`: C(d,i) * (1-r)^(d-i) * r^i.
pub fn bernstein(i: u32, d: u32, r: f64) -> Result<f64> {
    let c = binomial(d, i)? as f64;
    Ok(c * (1.0 - r).powi((d - i) as i32) * r.powi(i as i32))
}

/// One quadratic Bezier segment of a closed spline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BezierSegment {
    pub x0: Point2,
    pub x1: Point2,
    pub x2: Point2,
}

impl BezierSegment {
    pub fn new(x0: Point2, x1: Point2, x2: Point2) -> Self {
        BezierSegment { x0, x1, x2 }
    }

    /// Position at parameter `r`: (1-r)^2 x0 + 2r(1-r) x1 + r^2 x2.
    #[inline]
    pub fn eval(&self, r: f64) -> Point2 {
        let s = 1.0 - r;
        self.x0 * (s * s) + self.x1 * (2.0 * r * s) + self.x2 * (r * r)
    }

    /// First derivative with respect to `r`: 2(1-r)(x1-x0) + 2r(x2-x1).
    #[inline]
    pub fn deriv1(&self, r: f64) -> Point2 {
        (self.x1 - self.x0) * (2.0 * (1.0 - r)) + (self.x2 - self.x1) * (2.0 * r)
    }

    /// Second derivative, constant in `r`: 2(x0 - 2 x1 + x2).
    #[inline]
    pub fn deriv2(&self) -> Point2 {
        (self.x0 - self.x1 * 2.0 + self.x2) * 2.0
    }

    /// Weights of the segment position on the owning spline's control
    /// points (P[p-1], P[p], P[p+1]) under midpoint extraction.
    ///
    /// `eval(r) = w0 P[p-1] + w1 P[p] + w2 P[p+1]` with w0 + w1 + w2 = 1.
    #[inline]
    pub fn control_weights(r: f64) -> [f64; 3] {
        let s = 1.0 - r;
        let b0 = s * s;
        let b1 = 2.0 * r * s;
        let b2 = r * r;
        [0.5 * b0, 0.5 * b0 + b1 + 0.5 * b2, 0.5 * b2]
    }
}

/// One point sampled from a spline segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    /// Frame the owning spline belongs to (0 for a standalone spline).
    pub frame: usize,
    /// Segment index within the spline.
    pub patch: usize,
    /// Parameter in [0, 1).
    pub param: f64,
    pub position: Point2,
}

/// Closed uniform quadratic B-spline over `N >= 3` cyclic control points.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedQuadSpline {
    control_points: Vec<Point2>,
}

impl ClosedQuadSpline {
    pub fn new(control_points: Vec<Point2>) -> Result<Self> {
        if control_points.len() < 3 {
            return Err(Error::domain(format!(
                "closed spline needs at least 3 control points, got {}",
                control_points.len()
            )));
        }
        if control_points.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("non-finite control point".to_string()));
        }
        Ok(ClosedQuadSpline { control_points })
    }

    pub fn control_points(&self) -> &[Point2] {
        &self.control_points
    }

    pub fn n_control_points(&self) -> usize {
        self.control_points.len()
    }

    /// Segment `p` under midpoint extraction (indices cyclic).
    pub fn segment(&self, p: usize) -> BezierSegment {
        let n = self.control_points.len();
        let prev = self.control_points[(p + n - 1) % n];
        let cur = self.control_points[p % n];
        let next = self.control_points[(p + 1) % n];
        // x2 of segment p and x0 of segment p+1 evaluate the identical
        // expression mid(P[p], P[p+1]), so shared endpoints are bit-exact.
        BezierSegment::new(mid(prev, cur), cur, mid(cur, next))
    }

    /// All `N` segments in traversal order.
    pub fn segments(&self) -> Vec<BezierSegment> {
        (0..self.control_points.len())
            .map(|p| self.segment(p))
            .collect()
    }

    /// Chaikin corner cutting: N -> 2N control points, same limit curve.
    pub fn subdivide(&self) -> ClosedQuadSpline {
        let n = self.control_points.len();
        let mut out = Vec::with_capacity(2 * n);
        for p in 0..n {
            let a = self.control_points[p];
            let b = self.control_points[(p + 1) % n];
            out.push(a * 0.75 + b * 0.25);
            out.push(a * 0.25 + b * 0.75);
        }
        ClosedQuadSpline {
            control_points: out,
        }
    }

    /// `N * S` samples at r = k/S, k = 0..S-1 per segment (half-open so
    /// shared segment endpoints are not duplicated). `frame` is set to 0.
    pub fn sample(&self, samples_per_segment: usize) -> Vec<CurveSample> {
        let n = self.control_points.len();
        let mut out = Vec::with_capacity(n * samples_per_segment);
        for p in 0..n {
            let seg = self.segment(p);
            for k in 0..samples_per_segment {
                let r = k as f64 / samples_per_segment as f64;
                out.push(CurveSample {
                    frame: 0,
                    patch: p,
                    param: r,
                    position: seg.eval(r),
                });
            }
        }
        out
    }

    /// Total contour length of the polyline sampled at
    /// `points_per_segment + 1` uniformly spaced parameters per segment.
    pub fn arc_length(&self, points_per_segment: usize) -> f64 {
        let m = points_per_segment.max(2);
        let mut total = 0.0;
        for p in 0..self.control_points.len() {
            let seg = self.segment(p);
            let mut prev = seg.eval(0.0);
            for k in 1..=m {
                let cur = seg.eval(k as f64 / m as f64);
                total += prev.distance(cur);
                prev = cur;
            }
        }
        total
    }

    /// Twice the signed area of the control polygon; positive means
    /// counterclockwise in (x, y) coordinates.
    pub fn signed_area2(&self) -> f64 {
        polygon_signed_area2(&self.control_points)
    }

    pub fn is_counterclockwise(&self) -> bool {
        self.signed_area2() > 0.0
    }

    /// Reverses the control-point order if the winding is not
    /// counterclockwise. Applied after template construction and after
    /// ingesting external curve files.
    pub fn normalize_winding(&mut self) {
        if !self.is_counterclockwise() {
            self.control_points.reverse();
        }
    }
}

#[inline]
fn mid(a: Point2, b: Point2) -> Point2 {
    (a + b) * 0.5
}

/// Circle template for initialization: control points on the circle of
/// radius `mean |p - centroid|` around the centroid, counterclockwise.
pub fn fit_circle_template(points: &[Point2], n_cp: usize) -> Result<ClosedQuadSpline> {
    if points.len() < 3 {
        return Err(Error::domain(format!(
            "circle template needs at least 3 points, got {}",
            points.len()
        )));
    }
    if n_cp < 3 {
        return Err(Error::domain(format!(
            "circle template needs at least 3 control points, got {n_cp}"
        )));
    }
    let n = points.len() as f64;
    let mut centroid = Point2::ZERO;
    for p in points {
        centroid += *p;
    }
    centroid = centroid / n;
    let mut radius = 0.0;
    for p in points {
        radius += p.distance(centroid);
    }
    radius /= n;

    let control = (0..n_cp)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n_cp as f64;
            centroid + Point2::new(theta.cos(), theta.sin()) * radius
        })
        .collect();
    let mut spline = ClosedQuadSpline::new(control)?;
    spline.normalize_winding();
    Ok(spline)
}
