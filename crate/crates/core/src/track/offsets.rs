use log::warn;

use super::polyline::{self, left_normal, line_hit, project_onto, tangent, Point};
use super::{BoundaryCloud, TrackPath};
use crate::exec::Exec;

/// Tuning for [`signed_boundary_offsets`].
#[derive(Debug, Clone, Copy)]
pub struct OffsetOptions {
    /// Normal-ray hits farther than this are ignored in favour of the
    /// nearest-point fallback.
    pub search_window: f64,
    pub exec: Exec,
}

impl Default for OffsetOptions {
    fn default() -> Self {
        Self { search_window: 60.0, exec: Exec::default() }
    }
}

/// Lateral distances from each station to the two road edges.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryOffsets {
    pub w_in: Vec<f64>,
    pub w_out: Vec<f64>,
    /// Stations found outside the corridor; their offending offset was
    /// clamped to zero.
    pub flagged: Vec<usize>,
}

fn side_offset(p: &Point, psi: f64, poly: &[Point], closed: bool, window: f64) -> f64 {
    let nrm = left_normal(psi);
    if let Some(t) = line_hit(p, &nrm, poly, closed, window) {
        return t;
    }
    let proj = project_onto(p, poly, closed);
    let sign = polyline::cross(&tangent(psi), &(proj.point - p)).signum();
    sign * proj.distance
}

/// Intersects each station's normal line with both boundary polylines.
///
/// `w_in` is the signed distance to the inner boundary along the left
/// normal, `w_out` the signed distance to the outer boundary. When no hit
/// lies within the search window the nearest-point distance is used, signed
/// by the side of the path the boundary point falls on. Stations with
/// `w_in < 0` or `w_out > 0` are flagged and the offending value clamped to 0.
pub fn signed_boundary_offsets(path: &TrackPath, cloud: &BoundaryCloud, opts: &OffsetOptions) -> BoundaryOffsets {
    let cloud = cloud.deduplicated(path.closed);
    let n = path.len();
    let raw: Vec<(f64, f64)> = opts.exec.map_range(n, |k| {
        let p = path.point(k);
        let psi = path.heading[k];
        let win = side_offset(&p, psi, &cloud.inner, path.closed, opts.search_window);
        let wout = side_offset(&p, psi, &cloud.outer, path.closed, opts.search_window);
        (win, wout)
    });
    let mut w_in = Vec::with_capacity(n);
    let mut w_out = Vec::with_capacity(n);
    let mut flagged = Vec::new();
    for (k, (a, b)) in raw.into_iter().enumerate() {
        let mut bad = false;
        let a = if a < -1e-9 {
            bad = true;
            0.0
        } else {
            a.max(0.0)
        };
        let b = if b > 1e-9 {
            bad = true;
            0.0
        } else {
            b.min(0.0)
        };
        if bad {
            flagged.push(k);
        }
        w_in.push(a);
        w_out.push(b);
    }
    if !flagged.is_empty() {
        warn!("{} station(s) lie outside the corridor; offsets clamped", flagged.len());
    }
    BoundaryOffsets { w_in, w_out, flagged }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corridor(left: f64, right: f64) -> (TrackPath, BoundaryCloud) {
        let n = 101;
        let s: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let path = TrackPath::from_curvature(s, vec![0.0; n], false, 0.0).unwrap();
        // heading 0 points north, left is west (negative east)
        let inner = (0..=100).map(|i| Point::new(-left, i as f64)).collect();
        let outer = (0..=100).map(|i| Point::new(right, i as f64)).collect();
        (path, BoundaryCloud { inner, outer })
    }

    #[test]
    fn offsets_in_straight_corridor() {
        let (path, cloud) = corridor(2.0, 8.0);
        let off = signed_boundary_offsets(&path, &cloud, &OffsetOptions::default());
        for k in 0..path.len() {
            assert!((off.w_in[k] - 2.0).abs() < 0.1);
            assert!((off.w_out[k] + 8.0).abs() < 0.1);
        }
        assert!(off.flagged.is_empty());
    }

    #[test]
    fn coincident_inner_boundary_gives_zero() {
        let (path, cloud) = corridor(0.0, 10.0);
        let off = signed_boundary_offsets(&path, &cloud, &OffsetOptions::default());
        assert!(off.w_in.iter().all(|&w| w.abs() < 1e-9));
        assert!(off.flagged.is_empty());
    }

    #[test]
    fn outside_station_is_flagged() {
        // inner boundary lies to the right of the path
        let (path, cloud) = corridor(-1.0, 10.0);
        let off = signed_boundary_offsets(&path, &cloud, &OffsetOptions::default());
        assert_eq!(off.flagged.len(), path.len());
        assert!(off.w_in.iter().all(|&w| w == 0.0));
    }
}
