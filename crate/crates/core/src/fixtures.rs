//! Synthetic tracks built from exact straight and circular-arc segments.
//!
//! Each fixture carries the analytic centerline (with constant half-width
//! offsets) and boundary samples every half metre on both edges.

use std::f64::consts::PI;

use crate::track::polyline::{heading_of, left_normal, tangent};
use crate::track::{BoundaryCloud, Point, TrackPath};

/// Spacing of the generated boundary samples (m).
pub const BOUNDARY_SPACING: f64 = 0.5;

/// Straight (`curvature == 0`) or constant-curvature arc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub length: f64,
    pub curvature: f64,
}

impl Segment {
    pub fn straight(length: f64) -> Self {
        Self { length, curvature: 0.0 }
    }

    /// Arc turning by `angle` radians (positive left) on radius `radius`.
    pub fn arc(radius: f64, angle: f64) -> Self {
        Self { length: radius * angle.abs(), curvature: angle.signum() / radius }
    }
}

/// Piecewise-constant-curvature curve with exact evaluation.
#[derive(Debug, Clone)]
pub struct SegmentPath {
    segments: Vec<Segment>,
    /// Arc length, position and heading at the start of each segment.
    starts: Vec<(f64, Point, f64)>,
    closed: bool,
}

fn advance(p: Point, psi: f64, k: f64, sigma: f64) -> (Point, f64) {
    if k == 0.0 {
        (p + tangent(psi) * sigma, psi)
    } else {
        let psi1 = psi + k * sigma;
        let d = Point::new((psi1.cos() - psi.cos()) / k, (psi1.sin() - psi.sin()) / k);
        (p + d, psi1)
    }
}

impl SegmentPath {
    pub fn new(start: Point, heading0: f64, segments: Vec<Segment>, closed: bool) -> Self {
        let mut starts = Vec::with_capacity(segments.len());
        let (mut s, mut p, mut psi) = (0.0, start, heading0);
        for seg in &segments {
            starts.push((s, p, psi));
            (p, psi) = advance(p, psi, seg.curvature, seg.length);
            s += seg.length;
        }
        Self { segments, starts, closed }
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    fn locate(&self, s: f64) -> usize {
        match self.starts.binary_search_by(|(s0, _, _)| s0.partial_cmp(&s).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
        .min(self.segments.len() - 1)
    }

    /// Position and heading at arc length `s` (extrapolated past the ends).
    pub fn eval(&self, s: f64) -> (Point, f64) {
        let i = self.locate(s);
        let (s0, p0, psi0) = self.starts[i];
        advance(p0, psi0, self.segments[i].curvature, s - s0)
    }

    pub fn heading(&self, s: f64) -> f64 {
        self.eval(s).1
    }

    /// Mean curvature over `[a, b]`.
    fn mean_curvature(&self, a: f64, b: f64) -> f64 {
        (self.heading(b) - self.heading(a)) / (b - a)
    }

    /// Samples the curve at uniform spacing close to `ds`. Curvature at a
    /// station is the mean over the surrounding half-intervals, so segment
    /// joints get the blended value.
    pub fn track_path(&self, ds: f64, half_width: f64) -> TrackPath {
        let total = self.length();
        let n = ((total / ds).round() as usize).max(2);
        let step = total / n as f64;
        let stations: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
        let mut east = Vec::with_capacity(n + 1);
        let mut north = Vec::with_capacity(n + 1);
        let mut heading = Vec::with_capacity(n + 1);
        let mut curvature = Vec::with_capacity(n + 1);
        for (k, &s) in stations.iter().enumerate() {
            let (p, psi) = self.eval(s);
            east.push(p.x);
            north.push(p.y);
            heading.push(psi);
            let (a, b) = if self.closed {
                (s - 0.5 * step, s + 0.5 * step)
            } else {
                ((s - 0.5 * step).max(0.0), (s + 0.5 * step).min(total))
            };
            let k_mean = if self.closed && (k == 0 || k == n) {
                // wrap across the start line
                let turn = self.heading(total) - self.heading(0.0);
                (self.heading(0.5 * step) - (self.heading(total - 0.5 * step) - turn)) / step
            } else {
                self.mean_curvature(a, b)
            };
            curvature.push(k_mean);
        }
        if self.closed {
            east[n] = east[0];
            north[n] = north[0];
        }
        TrackPath {
            stations,
            curvature,
            w_in: vec![half_width; n + 1],
            w_out: vec![-half_width; n + 1],
            east,
            north,
            heading,
            closed: self.closed,
        }
    }

    /// Boundary samples offset by `half_width` on each side.
    pub fn boundaries(&self, half_width: f64) -> BoundaryCloud {
        let total = self.length();
        let n = ((total / BOUNDARY_SPACING).ceil() as usize).max(2);
        let count = if self.closed { n } else { n + 1 };
        let mut inner = Vec::with_capacity(count);
        let mut outer = Vec::with_capacity(count);
        for k in 0..count {
            let (p, psi) = self.eval(total * k as f64 / n as f64);
            let nrm = left_normal(psi);
            inner.push(p + nrm * half_width);
            outer.push(p - nrm * half_width);
        }
        BoundaryCloud { inner, outer }
    }
}

/// Segments of a closed polygon with each vertex rounded by a circular
/// fillet. Vertices run counter-clockwise; the lap starts where the first
/// edge leaves the first fillet.
pub fn filleted_polygon(vertices: &[Point], radii: &[f64]) -> (Point, f64, Vec<Segment>) {
    assert_eq!(vertices.len(), radii.len());
    let n = vertices.len();
    let dir = |i: usize| vertices[(i + 1) % n] - vertices[i];
    let turn = |i: usize| {
        let d = heading_of(&dir(i)) - heading_of(&dir((i + n - 1) % n));
        (d + PI).rem_euclid(2.0 * PI) - PI
    };
    let tan_len = |i: usize| radii[i] * (0.5 * turn(i).abs()).tan();
    let mut segs = Vec::with_capacity(2 * n);
    for i in 0..n {
        let j = (i + 1) % n;
        let straight = dir(i).norm() - tan_len(i) - tan_len(j);
        assert!(straight > 0.0, "fillets overlap on edge {i}");
        segs.push(Segment::straight(straight));
        segs.push(Segment::arc(radii[j], turn(j)));
    }
    let start = vertices[0] + dir(0).normalize() * tan_len(0);
    (start, heading_of(&dir(0)), segs)
}

/// A named synthetic track.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub geometry: SegmentPath,
    pub half_width: f64,
}

impl Fixture {
    pub fn closed(&self) -> bool {
        self.geometry.closed
    }

    pub fn centerline(&self, ds: f64) -> TrackPath {
        self.geometry.track_path(ds, self.half_width)
    }

    pub fn cloud(&self) -> BoundaryCloud {
        self.geometry.boundaries(self.half_width)
    }
}

/// Straight corridor heading north.
pub fn straight_corridor(length: f64, width: f64) -> Fixture {
    Fixture {
        name: "straight",
        geometry: SegmentPath::new(Point::zeros(), 0.0, vec![Segment::straight(length)], false),
        half_width: 0.5 * width,
    }
}

/// Counter-clockwise ring of centerline radius `radius`.
pub fn annulus(radius: f64, width: f64) -> Fixture {
    Fixture {
        name: "annulus",
        geometry: SegmentPath::new(Point::new(radius, 0.0), 0.0, vec![Segment::arc(radius, 2.0 * PI)], true),
        half_width: 0.5 * width,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HairpinSpec {
    pub entry: f64,
    pub radius: f64,
    /// Total heading change through the turn (rad, left).
    pub turn: f64,
    pub exit: f64,
    pub width: f64,
}

impl Default for HairpinSpec {
    fn default() -> Self {
        Self { entry: 250.0, radius: 12.0, turn: 160f64.to_radians(), exit: 150.0, width: 12.0 }
    }
}

/// Straight, single left-hand arc, straight.
pub fn hairpin(spec: HairpinSpec) -> Fixture {
    let segs = vec![Segment::straight(spec.entry), Segment::arc(spec.radius, spec.turn), Segment::straight(spec.exit)];
    Fixture { name: "hairpin", geometry: SegmentPath::new(Point::zeros(), 0.0, segs, false), half_width: 0.5 * spec.width }
}

/// Left-right-left S bend between two straights.
pub fn chicane() -> Fixture {
    let a = 45f64.to_radians();
    let segs = vec![
        Segment::straight(150.0),
        Segment::arc(40.0, a),
        Segment::straight(30.0),
        Segment::arc(40.0, -2.0 * a),
        Segment::straight(30.0),
        Segment::arc(40.0, a),
        Segment::straight(150.0),
    ];
    Fixture { name: "chicane", geometry: SegmentPath::new(Point::zeros(), 0.0, segs, false), half_width: 5.0 }
}

/// Closed circuit of about 2.1 km with eight corners, two of them
/// right-handers.
pub fn eight_corner_circuit() -> Fixture {
    let v = [
        (0.0, 0.0),
        (500.0, 0.0),
        (650.0, 120.0),
        (560.0, 260.0),
        (700.0, 420.0),
        (380.0, 520.0),
        (180.0, 330.0),
        (-80.0, 260.0),
    ];
    let radii = [40.0, 60.0, 30.0, 45.0, 50.0, 35.0, 30.0, 70.0];
    let pts: Vec<Point> = v.iter().map(|&(x, y)| Point::new(x, y)).collect();
    let (start, psi, segs) = filleted_polygon(&pts, &radii);
    Fixture { name: "eight_corner", geometry: SegmentPath::new(start, psi, segs, true), half_width: 6.0 }
}

/// Closed circuit of roughly 5 km used for runtime scaling.
pub fn long_circuit() -> Fixture {
    let v = [
        (0.0, 0.0),
        (900.0, 0.0),
        (1250.0, 200.0),
        (1100.0, 500.0),
        (1400.0, 700.0),
        (1350.0, 1100.0),
        (900.0, 1250.0),
        (700.0, 950.0),
        (400.0, 1150.0),
        (-100.0, 1000.0),
        (50.0, 650.0),
        (-150.0, 350.0),
    ];
    let radii = [60.0, 80.0, 40.0, 55.0, 70.0, 45.0, 35.0, 50.0, 65.0, 40.0, 45.0, 90.0];
    let pts: Vec<Point> = v.iter().map(|&(x, y)| Point::new(x, y)).collect();
    let (start, psi, segs) = filleted_polygon(&pts, &radii);
    Fixture { name: "long_circuit", geometry: SegmentPath::new(start, psi, segs, true), half_width: 6.0 }
}
