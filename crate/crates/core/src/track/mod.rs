//! Curvilinear track representation and conversion to and from Cartesian
//! boundary data.
//!
//! A [`TrackPath`] stores a path as arc-length stations with curvature,
//! lateral distances to the two road edges and the Cartesian trace. Closed
//! circuits repeat the first station at the end (`s_T = L`), so station `T`
//! and station `1` are the same physical point and the heading advances by
//! the total turning of the lap between them.

mod centerline;
mod offsets;
pub mod polyline;

pub use centerline::{estimate_centerline, CenterlineOptions};
pub use offsets::{signed_boundary_offsets, BoundaryOffsets, OffsetOptions};
pub use polyline::{curvature_of_polyline, Point};

use crate::error::{input_err, Error, Result};
use polyline::{left_normal, tangent};

/// Arc-length parameterized path with road-edge offsets.
///
/// Sign convention: lateral offsets are positive to the left of the travel
/// direction. `w_in` is the (non-negative) distance to the inner, left-hand
/// boundary and `w_out` the (non-positive) offset of the outer, right-hand
/// boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackPath {
    pub stations: Vec<f64>,
    pub curvature: Vec<f64>,
    pub w_in: Vec<f64>,
    pub w_out: Vec<f64>,
    pub east: Vec<f64>,
    pub north: Vec<f64>,
    pub heading: Vec<f64>,
    pub closed: bool,
}

/// Heading by cumulative trapezoidal integration of curvature.
pub fn integrate_heading(stations: &[f64], curvature: &[f64], heading0: f64) -> Vec<f64> {
    let mut psi = Vec::with_capacity(stations.len());
    psi.push(heading0);
    for k in 1..stations.len() {
        let ds = stations[k] - stations[k - 1];
        let prev = psi[k - 1];
        psi.push(prev + 0.5 * (curvature[k - 1] + curvature[k]) * ds);
    }
    psi
}

fn check_stations(stations: &[f64]) -> Result<()> {
    if stations.len() < 2 {
        return input_err("a path needs at least two stations");
    }
    for (k, w) in stations.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return input_err(format!("stations not strictly increasing at index {}", k + 1));
        }
    }
    Ok(())
}

impl TrackPath {
    /// Builds a path from stations and curvature, reconstructing the
    /// Cartesian trace from the origin with the given initial heading.
    /// Road-edge offsets start at zero.
    pub fn from_curvature(stations: Vec<f64>, curvature: Vec<f64>, closed: bool, heading0: f64) -> Result<Self> {
        if stations.len() != curvature.len() {
            return input_err("stations and curvature differ in length");
        }
        let n = stations.len();
        let path = TrackPath {
            stations,
            curvature,
            w_in: vec![0.0; n],
            w_out: vec![0.0; n],
            east: vec![0.0; n],
            north: vec![0.0; n],
            heading: vec![heading0; n],
            closed,
        };
        reconstruct_cartesian(&path, heading0)
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.stations.last().copied().unwrap_or(0.0) - self.stations.first().copied().unwrap_or(0.0)
    }

    /// `s_k - s_{k-1}` for `k = 1..T`.
    pub fn segment_lengths(&self) -> Vec<f64> {
        self.stations.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn point(&self, k: usize) -> Point {
        Point::new(self.east[k], self.north[k])
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Distinct points (drops the repeated closing station of a closed path).
    pub fn distinct_points(&self) -> Vec<Point> {
        let mut pts = self.points();
        if self.closed {
            pts.pop();
        }
        pts
    }

    /// Heading change between the first and last station.
    pub fn total_turning(&self) -> f64 {
        self.heading[self.len() - 1] - self.heading[0]
    }

    /// Checks the structural invariants: shared lengths, strictly increasing
    /// stations, finite values and `w_out <= 0 <= w_in`.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let lens = [
            self.curvature.len(),
            self.w_in.len(),
            self.w_out.len(),
            self.east.len(),
            self.north.len(),
            self.heading.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return input_err("track arrays differ in length");
        }
        check_stations(&self.stations)?;
        let all = [&self.curvature, &self.w_in, &self.w_out, &self.east, &self.north, &self.heading];
        if all.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return input_err("track contains non-finite values");
        }
        for k in 0..n {
            if self.w_out[k] > 1e-9 || self.w_in[k] < -1e-9 {
                return input_err(format!(
                    "station {k} lies outside the corridor (w_in = {}, w_out = {})",
                    self.w_in[k], self.w_out[k]
                ));
            }
        }
        Ok(())
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let n = self.len();
        let s = s.clamp(self.stations[0], self.stations[n - 1]);
        let k = match self.stations.binary_search_by(|x| x.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let t = (s - self.stations[k]) / (self.stations[k + 1] - self.stations[k]);
        (k, t)
    }

    /// Linear interpolation of a per-station array at arc length `s`
    /// (clamped to the path extent).
    pub fn interpolate(&self, values: &[f64], s: f64) -> f64 {
        let (k, t) = self.locate(s);
        values[k] + t * (values[k + 1] - values[k])
    }

    /// Boundary polylines implied by the stored offsets.
    pub fn boundary_cloud(&self) -> BoundaryCloud {
        let n = if self.closed { self.len() - 1 } else { self.len() };
        let mut inner = Vec::with_capacity(n);
        let mut outer = Vec::with_capacity(n);
        for k in 0..n {
            let nrm = left_normal(self.heading[k]);
            inner.push(self.point(k) + nrm * self.w_in[k]);
            outer.push(self.point(k) + nrm * self.w_out[k]);
        }
        BoundaryCloud { inner, outer }
    }

    /// Sub-path starting at `start_s` spanning `length` metres. Closed paths
    /// wrap around the start line; open paths are truncated at their end, in
    /// which case the returned flag is `true`. Stations are re-based to zero
    /// and the window is always open.
    pub fn window(&self, start_s: f64, length: f64) -> Result<(TrackPath, bool)> {
        if !(length > 0.0) {
            return input_err("window length must be positive");
        }
        let total = self.total_length();
        let n = self.len();
        let distinct = if self.closed { n - 1 } else { n };
        let start_s = if self.closed { start_s.rem_euclid(total) } else { start_s };
        if !self.closed && (start_s < self.stations[0] || start_s >= self.stations[n - 1]) {
            return input_err("window start lies outside the path");
        }
        let (k0, t) = self.locate(start_s);
        let k0 = if t > 0.5 { k0 + 1 } else { k0 };
        let mut idx = Vec::new();
        let mut s_rel = Vec::new();
        let mut truncated = false;
        let mut k = k0;
        let mut offset = 0.0;
        loop {
            let kk = if self.closed { k % distinct } else { k };
            if !self.closed && kk >= n {
                truncated = true;
                break;
            }
            if self.closed && k > k0 && kk == 0 {
                offset += total;
            }
            let s = self.stations[kk] + offset - self.stations[k0];
            if s > length + 1e-9 {
                break;
            }
            idx.push(kk);
            s_rel.push(s);
            k += 1;
            if self.closed && k - k0 > distinct {
                break;
            }
        }
        if idx.len() < 3 {
            return input_err("window contains fewer than three stations");
        }
        let heading_at = |i: usize| {
            let kk = idx[i];
            let mut psi = self.heading[kk];
            if self.closed && kk < k0 {
                psi += self.total_turning();
            }
            psi
        };
        let path = TrackPath {
            stations: s_rel,
            curvature: idx.iter().map(|&k| self.curvature[k]).collect(),
            w_in: idx.iter().map(|&k| self.w_in[k]).collect(),
            w_out: idx.iter().map(|&k| self.w_out[k]).collect(),
            east: idx.iter().map(|&k| self.east[k]).collect(),
            north: idx.iter().map(|&k| self.north[k]).collect(),
            heading: (0..idx.len()).map(heading_at).collect(),
            closed: false,
        };
        Ok((path, truncated))
    }
}

/// Reconstructs the Cartesian trace and heading of a path from its stations
/// and curvature, starting at the origin with heading `heading0`.
///
/// Heading is the cumulative trapezoidal integral of curvature. Position is
/// advanced per station interval along the circular arc implied by the
/// interval's heading change, which is exact for piecewise-constant
/// curvature and keeps chord lengths consistent with arc length.
pub fn reconstruct_cartesian(path: &TrackPath, heading0: f64) -> Result<TrackPath> {
    check_stations(&path.stations)?;
    if path.curvature.len() != path.len() {
        return input_err("stations and curvature differ in length");
    }
    let psi = integrate_heading(&path.stations, &path.curvature, heading0);
    let n = path.len();
    let mut east = Vec::with_capacity(n);
    let mut north = Vec::with_capacity(n);
    let mut p = Point::zeros();
    east.push(0.0);
    north.push(0.0);
    for k in 1..n {
        let ds = path.stations[k] - path.stations[k - 1];
        let dpsi = psi[k] - psi[k - 1];
        let half = 0.5 * dpsi;
        let chord = if half.abs() < 1e-8 { ds * (1.0 - half * half / 6.0) } else { ds * half.sin() / half };
        p += tangent(0.5 * (psi[k] + psi[k - 1])) * chord;
        east.push(p.x);
        north.push(p.y);
    }
    let mut out = path.clone();
    out.east = east;
    out.north = north;
    out.heading = psi;
    if out.w_in.len() != n {
        out.w_in = vec![0.0; n];
    }
    if out.w_out.len() != n {
        out.w_out = vec![0.0; n];
    }
    Ok(out)
}

/// Raw boundary samples for the two road edges, in travel order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryCloud {
    pub inner: Vec<Point>,
    pub outer: Vec<Point>,
}

impl BoundaryCloud {
    /// Checks point counts and the spacing between consecutive samples.
    pub fn validate(&self, max_gap: f64) -> Result<()> {
        for (name, pts) in [("inner", &self.inner), ("outer", &self.outer)] {
            if pts.len() < 4 {
                return Err(Error::Ingestion(format!("{name} boundary has {} points, need at least 4", pts.len())));
            }
            if pts.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
                return Err(Error::Ingestion(format!("{name} boundary contains non-finite coordinates")));
            }
            for (i, w) in pts.windows(2).enumerate() {
                let gap = (w[1] - w[0]).norm();
                if gap > max_gap {
                    return Err(Error::Ingestion(format!(
                        "{name} boundary gap of {gap:.2} m between points {i} and {} exceeds {max_gap} m",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// A cloud describes a closed circuit when both boundaries end within
    /// `max_gap` of where they start.
    pub fn is_closed(&self, max_gap: f64) -> bool {
        let ring = |pts: &[Point]| {
            pts.len() >= 4 && {
                let gap = (pts[0] - pts[pts.len() - 1]).norm();
                let span = polyline::cumulative_length(pts, false).last().copied().unwrap_or(0.0);
                gap <= max_gap && span > 3.0 * max_gap
            }
        };
        ring(&self.inner) && ring(&self.outer)
    }

    /// Copy with a duplicated closing point removed from each closed ring.
    pub(crate) fn deduplicated(&self, closed: bool) -> BoundaryCloud {
        let strip = |pts: &[Point]| {
            let mut v = pts.to_vec();
            if closed && v.len() > 1 && (v[0] - v[v.len() - 1]).norm() < 1e-9 {
                v.pop();
            }
            v
        };
        BoundaryCloud { inner: strip(&self.inner), outer: strip(&self.outer) }
    }
}
