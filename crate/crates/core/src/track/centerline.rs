use super::offsets::{signed_boundary_offsets, OffsetOptions};
use super::polyline::{self, curvature_of_polyline, heading_of, moving_average, project_onto, resample_uniform, Point};
use super::{integrate_heading, BoundaryCloud, TrackPath};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Settings for [`estimate_centerline`].
#[derive(Debug, Clone, Copy)]
pub struct CenterlineOptions {
    /// Station spacing of the output path (m).
    pub ds: f64,
    /// Half-width, in stations, of the moving average applied to curvature.
    pub smoothing_half_width: usize,
    /// Largest allowed distance between consecutive boundary samples (m).
    pub max_gap: f64,
    pub exec: Exec,
}

impl Default for CenterlineOptions {
    fn default() -> Self {
        Self { ds: 2.75, smoothing_half_width: 5, max_gap: 20.0, exec: Exec::default() }
    }
}

fn densify(points: &[Point], closed: bool, spacing: f64) -> Result<Vec<Point>> {
    let cum = polyline::cumulative_length(points, closed);
    let total = *cum.last().unwrap();
    let mean = total / (cum.len() - 1) as f64;
    if mean <= spacing {
        return Ok(points.to_vec());
    }
    resample_uniform(points, closed, spacing)
}

/// Estimates the `(s, K, w_in, w_out)` parameterization of the centerline
/// between two boundary polylines.
///
/// Each inner sample is paired with its nearest point on the outer boundary
/// and the midpoints form the raw centerline, which is resampled at uniform
/// spacing. Curvature comes from the three-point circle formula followed by
/// a moving average. Heading integrates that curvature from the geometric
/// heading at the first station, and the edge offsets are measured along the
/// station normals.
///
/// The inner boundary must lie on the left of the travel direction. Closed
/// circuits traversed the other way round are reversed; open corridors with
/// the inner boundary on the right are rejected.
pub fn estimate_centerline(cloud: &BoundaryCloud, opts: &CenterlineOptions) -> Result<TrackPath> {
    if !(opts.ds > 0.0) {
        return Err(Error::Input("centerline spacing must be positive".into()));
    }
    cloud.validate(opts.max_gap)?;
    let closed = cloud.is_closed(opts.max_gap);
    let cloud = cloud.deduplicated(closed);

    let inner = densify(&cloud.inner, closed, 0.5 * opts.ds)?;
    let mids: Vec<Point> = opts.exec.map_slice(&inner, |p| {
        let q = project_onto(p, &cloud.outer, closed).point;
        (p + q) * 0.5
    });
    if let Some((i, j)) = polyline::find_self_intersection(&mids, closed) {
        return Err(Error::Geometry(format!("centerline crosses itself between segments {i} and {j}")));
    }
    let mut pts = resample_uniform(&mids, closed, opts.ds)?;

    // Orientation: inner boundary on the left.
    let n = pts.len();
    let probes = 16.min(n - 1);
    let mut left_votes = 0i32;
    for j in 0..probes {
        let k = (j * (n - 1)) / probes.max(1);
        let d = pts[(k + 1).min(n - 1)] - pts[k.saturating_sub(1)];
        let q = project_onto(&pts[k], &cloud.inner, closed).point;
        left_votes += if polyline::cross(&d, &(q - pts[k])) > 0.0 { 1 } else { -1 };
    }
    if left_votes < 0 {
        if closed {
            pts.reverse();
        } else {
            return Err(Error::Geometry(
                "inner boundary lies to the right of the travel direction".into(),
            ));
        }
    }

    let raw_k = curvature_of_polyline(&pts, closed)?;
    let mut curvature = moving_average(&raw_k, opts.smoothing_half_width, closed);
    let total = polyline::cumulative_length(&pts, closed).last().copied().unwrap();
    let segs = if closed { pts.len() } else { pts.len() - 1 };
    let step = total / segs as f64;
    let heading0 = if closed {
        heading_of(&(pts[1] - pts[pts.len() - 1]))
    } else {
        heading_of(&(pts[1] - pts[0]))
    };
    if closed {
        pts.push(pts[0]);
        curvature.push(curvature[0]);
    }
    let stations: Vec<f64> = (0..pts.len()).map(|k| step * k as f64).collect();
    let heading = integrate_heading(&stations, &curvature, heading0);
    let count = pts.len();
    let mut path = TrackPath {
        stations,
        curvature,
        w_in: vec![0.0; count],
        w_out: vec![0.0; count],
        east: pts.iter().map(|p| p.x).collect(),
        north: pts.iter().map(|p| p.y).collect(),
        heading,
        closed,
    };
    let off = signed_boundary_offsets(&path, &cloud, &OffsetOptions { exec: opts.exec, ..OffsetOptions::default() });
    path.w_in = off.w_in;
    path.w_out = off.w_out;
    Ok(path)
}
