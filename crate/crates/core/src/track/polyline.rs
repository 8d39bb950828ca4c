//! Planar polyline helpers shared by centerline estimation, offset
//! computation and path updates.
//!
//! Heading convention: `psi = 0` points north and positive `psi` turns
//! counter-clockwise, so the unit tangent is `(-sin psi, cos psi)` in
//! (east, north) and the left normal is `(-cos psi, -sin psi)`.

use nalgebra::Vector2;

use crate::error::{input_err, Result};

pub type Point = Vector2<f64>;

pub fn tangent(psi: f64) -> Point {
    Point::new(-psi.sin(), psi.cos())
}

pub fn left_normal(psi: f64) -> Point {
    Point::new(-psi.cos(), -psi.sin())
}

/// Heading angle of a direction vector.
pub fn heading_of(d: &Point) -> f64 {
    (-d.x).atan2(d.y)
}

pub(crate) fn cross(a: &Point, b: &Point) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Cumulative arc length at each vertex. For a closed polyline one extra
/// entry holds the total length including the closing segment.
pub fn cumulative_length(points: &[Point], closed: bool) -> Vec<f64> {
    let mut s = Vec::with_capacity(points.len() + 1);
    let mut acc = 0.0;
    s.push(0.0);
    for w in points.windows(2) {
        acc += (w[1] - w[0]).norm();
        s.push(acc);
    }
    if closed && points.len() > 1 {
        acc += (points[0] - points[points.len() - 1]).norm();
        s.push(acc);
    }
    s
}

fn vertex(points: &[Point], i: usize) -> Point {
    points[i % points.len()]
}

/// Resamples a polyline at uniform arc-length spacing close to `ds`.
///
/// Open polylines keep both endpoints. Closed polylines return `n` distinct
/// points; the closing segment back to the first point has the same spacing.
pub fn resample_uniform(points: &[Point], closed: bool, ds: f64) -> Result<Vec<Point>> {
    if points.len() < 2 {
        return input_err("need at least two points to resample");
    }
    if !(ds > 0.0) {
        return input_err("resampling spacing must be positive");
    }
    let cum = cumulative_length(points, closed);
    let total = *cum.last().unwrap();
    if !(total > 0.0) {
        return input_err("polyline has zero length");
    }
    let n = ((total / ds).round() as usize).max(2);
    let step = total / n as f64;
    let count = if closed { n } else { n + 1 };
    let mut out = Vec::with_capacity(count);
    let mut seg = 0usize;
    for i in 0..count {
        let target = if !closed && i == n { total } else { step * i as f64 };
        while seg + 2 < cum.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { ((target - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        let a = vertex(points, seg);
        let b = vertex(points, seg + 1);
        out.push(a + (b - a) * t);
    }
    Ok(out)
}

/// Closest point on a polyline.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    pub point: Point,
    pub distance: f64,
    pub segment: usize,
    pub t: f64,
}

fn project_segment(p: &Point, a: &Point, b: &Point) -> (Point, f64) {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + d * t, t)
}

fn segment_count(n: usize, closed: bool) -> usize {
    if closed {
        n
    } else {
        n.saturating_sub(1)
    }
}

/// Nearest point on the whole polyline (brute force).
pub fn project_onto(p: &Point, poly: &[Point], closed: bool) -> Projection {
    project_onto_range(p, poly, closed, 0, segment_count(poly.len(), closed))
}

/// Nearest point restricted to segments `start .. start + count` (indices
/// wrap for closed polylines, clamp for open ones).
pub fn project_onto_range(
    p: &Point,
    poly: &[Point],
    closed: bool,
    start: usize,
    count: usize,
) -> Projection {
    let nseg = segment_count(poly.len(), closed);
    let mut best = Projection { point: poly[0], distance: f64::INFINITY, segment: 0, t: 0.0 };
    for j in 0..count.min(nseg) {
        let i = if closed { (start + j) % nseg } else { start + j };
        if i >= nseg {
            break;
        }
        let a = poly[i];
        let b = vertex(poly, i + 1);
        let (q, t) = project_segment(p, &a, &b);
        let dist = (p - q).norm();
        if dist < best.distance {
            best = Projection { point: q, distance: dist, segment: i, t };
        }
    }
    best
}

/// Intersects the infinite line `origin + t * dir` with a polyline and
/// returns the signed parameter `t` with the smallest magnitude, if any
/// intersection lies within `max_dist`. `dir` must be a unit vector.
pub fn line_hit(origin: &Point, dir: &Point, poly: &[Point], closed: bool, max_dist: f64) -> Option<f64> {
    let nseg = segment_count(poly.len(), closed);
    let mut best: Option<f64> = None;
    for i in 0..nseg {
        let a = poly[i];
        let b = vertex(poly, i + 1);
        let seg = b - a;
        let denom = cross(dir, &seg);
        if denom.abs() < 1e-14 {
            continue;
        }
        let ao = a - origin;
        let t = cross(&ao, &seg) / denom;
        let u = cross(&ao, dir) / denom;
        if !(-1e-12..=1.0 + 1e-12).contains(&u) || t.abs() > max_dist {
            continue;
        }
        if best.is_none_or(|bt| t.abs() < bt.abs()) {
            best = Some(t);
        }
    }
    best
}

fn segments_cross(a: &Point, b: &Point, c: &Point, d: &Point) -> bool {
    let d1 = cross(&(b - a), &(c - a));
    let d2 = cross(&(b - a), &(d - a));
    let d3 = cross(&(d - c), &(a - c));
    let d4 = cross(&(d - c), &(b - c));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Returns the first pair of non-adjacent segments that cross, if any.
pub fn find_self_intersection(points: &[Point], closed: bool) -> Option<(usize, usize)> {
    let n = points.len();
    let nseg = segment_count(n, closed);
    let bbox = |i: usize| {
        let a = points[i];
        let b = vertex(points, i + 1);
        (a.x.min(b.x), a.x.max(b.x), a.y.min(b.y), a.y.max(b.y))
    };
    let boxes: Vec<_> = (0..nseg).map(bbox).collect();
    for i in 0..nseg {
        for j in (i + 2)..nseg {
            if closed && i == 0 && j == nseg - 1 {
                continue;
            }
            let (ax0, ax1, ay0, ay1) = boxes[i];
            let (bx0, bx1, by0, by1) = boxes[j];
            if ax1 < bx0 || bx1 < ax0 || ay1 < by0 || by1 < ay0 {
                continue;
            }
            if segments_cross(&points[i], &vertex(points, i + 1), &points[j], &vertex(points, j + 1)) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Signed curvature at every vertex from the circle through each vertex and
/// its two neighbours. Positive curvature turns left (counter-clockwise).
///
/// Collinear triples give zero. Open polylines copy the neighbouring value at
/// the endpoints; closed polylines wrap.
pub fn curvature_of_polyline(points: &[Point], closed: bool) -> Result<Vec<f64>> {
    let n = points.len();
    if n < 3 {
        return input_err("curvature needs at least three points");
    }
    let seg = segment_count(n, closed);
    for i in 0..seg {
        if (vertex(points, i + 1) - points[i]).norm() == 0.0 {
            return input_err(format!("repeated point at index {i}"));
        }
    }
    let menger = |a: &Point, b: &Point, c: &Point| {
        let ab = b - a;
        let bc = c - b;
        let ca = a - c;
        let area2 = cross(&ab, &bc);
        if area2 == 0.0 {
            return 0.0;
        }
        2.0 * area2 / (ab.norm() * bc.norm() * ca.norm())
    };
    let mut k = vec![0.0; n];
    for i in 0..n {
        if closed {
            let a = points[(i + n - 1) % n];
            let c = points[(i + 1) % n];
            k[i] = menger(&a, &points[i], &c);
        } else if i > 0 && i + 1 < n {
            k[i] = menger(&points[i - 1], &points[i], &points[i + 1]);
        }
    }
    if !closed {
        k[0] = k[1];
        k[n - 1] = k[n - 2];
    }
    Ok(k)
}

/// Centered moving average with the given half-width. Closed sequences wrap;
/// open ones shrink the window at the ends.
pub fn moving_average(values: &[f64], half_width: usize, closed: bool) -> Vec<f64> {
    let n = values.len();
    if half_width == 0 || n == 0 {
        return values.to_vec();
    }
    (0..n)
        .map(|i| {
            if closed {
                let h = half_width.min((n - 1) / 2);
                let mut acc = 0.0;
                for j in 0..=(2 * h) {
                    acc += values[(i + n + j - h) % n];
                }
                acc / (2 * h + 1) as f64
            } else {
                let lo = i.saturating_sub(half_width);
                let hi = (i + half_width).min(n - 1);
                values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circle(r: f64, n: usize, ccw: bool) -> Vec<Point> {
        (0..n)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / n as f64;
                let th = if ccw { th } else { -th };
                Point::new(r * th.cos(), r * th.sin())
            })
            .collect()
    }

    #[test]
    fn circumcircle_curvature_is_exact_on_circle() {
        let k = curvature_of_polyline(&circle(50.0, 97, true), true).unwrap();
        for v in k {
            assert!((v - 0.02).abs() < 1e-6, "{v}");
        }
        let k = curvature_of_polyline(&circle(50.0, 97, false), true).unwrap();
        for v in k {
            assert!((v + 0.02).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn collinear_points_have_zero_curvature() {
        let pts: Vec<_> = (0..10).map(|i| Point::new(i as f64, 2.0 * i as f64)).collect();
        let k = curvature_of_polyline(&pts, false).unwrap();
        assert!(k.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn repeated_point_is_rejected() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 1.0)];
        assert!(curvature_of_polyline(&pts, false).is_err());
    }

    #[test]
    fn heading_convention() {
        assert!((heading_of(&Point::new(0.0, 1.0))).abs() < 1e-15);
        assert!((heading_of(&Point::new(-1.0, 0.0)) - PI / 2.0).abs() < 1e-15);
        let psi = 0.7;
        let t = tangent(psi);
        let nrm = left_normal(psi);
        // left normal is the tangent rotated counter-clockwise
        assert!((cross(&t, &nrm) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn resample_closed_keeps_uniform_spacing() {
        let pts = circle(100.0, 400, true);
        let out = resample_uniform(&pts, true, 2.75).unwrap();
        let cum = cumulative_length(&out, true);
        let steps: Vec<f64> = cum.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = steps.iter().sum::<f64>() / steps.len() as f64;
        assert!(steps.iter().all(|s| (s - mean).abs() < 1e-2));
    }

    #[test]
    fn line_hit_picks_nearest_crossing() {
        let poly = vec![Point::new(-10.0, 3.0), Point::new(10.0, 3.0)];
        let t = line_hit(&Point::zeros(), &Point::new(0.0, 1.0), &poly, false, 50.0).unwrap();
        assert!((t - 3.0).abs() < 1e-12);
        let t = line_hit(&Point::zeros(), &Point::new(0.0, -1.0), &poly, false, 50.0).unwrap();
        assert!((t + 3.0).abs() < 1e-12);
        assert!(line_hit(&Point::zeros(), &Point::new(0.0, 1.0), &poly, false, 2.0).is_none());
    }

    #[test]
    fn detects_figure_eight() {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        assert!(find_self_intersection(&pts, true).is_some());
        assert!(find_self_intersection(&circle(10.0, 50, true), true).is_none());
    }

    #[test]
    fn moving_average_preserves_sum_when_closed() {
        let v: Vec<f64> = (0..50).map(|i| ((i * 7) % 11) as f64).collect();
        let m = moving_average(&v, 5, true);
        let a: f64 = v.iter().sum();
        let b: f64 = m.iter().sum();
        assert!((a - b).abs() < 1e-9);
    }
}
