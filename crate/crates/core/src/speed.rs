//! Friction-limited speed profile for a fixed path.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::track::TrackPath;
use crate::vehicle::VehicleParams;

/// Intermediate arrays from the three passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassTraces {
    pub steady: Vec<f64>,
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub stations: Vec<f64>,
    pub u_x: Vec<f64>,
    pub lap_time: f64,
    pub traces: Option<PassTraces>,
    /// Stations where lateral demand alone exceeded the friction limit.
    pub saturated_stations: usize,
}

/// Steady-state cornering speed `sqrt(mu g / |K|)` capped at `U_x_max`.
pub fn steady_state_pass(path: &TrackPath, p: &VehicleParams) -> Vec<f64> {
    path.curvature
        .iter()
        .map(|k| {
            let k = k.abs();
            if k * p.u_x_max * p.u_x_max < p.mu * p.g {
                p.u_x_max
            } else {
                (p.mu * p.g / k).sqrt()
            }
        })
        .collect()
}

/// Total longitudinal force left over on both axles once the lateral demand
/// `U^2 K` is met. Returns `None` if the lateral demand alone is infeasible.
pub fn friction_headroom(u: f64, k: f64, p: &VehicleParams) -> Option<f64> {
    let lat = u * u * k / p.g;
    let rem = p.mu * p.mu - lat * lat;
    if rem < -1e-9 {
        None
    } else {
        Some(p.m * p.g * rem.max(0.0).sqrt())
    }
}

fn headroom_or_zero(u: f64, k: f64, p: &VehicleParams, saturated: &mut usize) -> f64 {
    friction_headroom(u, k, p).unwrap_or_else(|| {
        *saturated += 1;
        0.0
    })
}

/// Loop geometry for a pass: number of distinct stations and the length of
/// the segment leaving each one.
fn loop_segments(path: &TrackPath) -> (usize, Vec<f64>) {
    let ds = path.segment_lengths();
    if path.closed {
        (path.len() - 1, ds)
    } else {
        (path.len(), ds)
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

const MAX_LAPS: usize = 8;

fn forward_impl(steady: &[f64], path: &TrackPath, p: &VehicleParams, saturated: &mut usize) -> Vec<f64> {
    let (n, ds) = loop_segments(path);
    let mut u = steady.to_vec();
    let step = |u_prev: f64, j: usize, sat: &mut usize| {
        let f = p.f_engine_max.min(headroom_or_zero(u_prev, path.curvature[j], p, sat));
        (u_prev * u_prev + 2.0 * f / p.m * ds[j]).sqrt()
    };
    if path.closed {
        let start = argmin(&steady[..n]);
        for _ in 0..MAX_LAPS {
            let mut changed = false;
            let mut sat = 0;
            for off in 0..n {
                let j = (start + off) % n;
                let next = (j + 1) % n;
                let v = steady[next].min(step(u[j], j, &mut sat));
                if v != u[next] {
                    changed = true;
                    u[next] = v;
                }
            }
            *saturated = sat;
            if !changed {
                break;
            }
        }
        u[n] = u[0];
    } else {
        for j in 0..n - 1 {
            u[j + 1] = steady[j + 1].min(step(u[j], j, saturated));
        }
    }
    u
}

fn backward_impl(forward: &[f64], path: &TrackPath, p: &VehicleParams, saturated: &mut usize) -> Vec<f64> {
    let (n, ds) = loop_segments(path);
    let mut u = forward.to_vec();
    let step = |u_next: f64, j: usize, next: usize, sat: &mut usize| {
        let f = headroom_or_zero(u_next, path.curvature[next], p, sat);
        (u_next * u_next + 2.0 * f / p.m * ds[j]).sqrt()
    };
    if path.closed {
        let start = argmin(&forward[..n]);
        for _ in 0..MAX_LAPS {
            let mut changed = false;
            let mut sat = 0;
            for off in 0..n {
                let next = (start + n - off) % n;
                let j = (next + n - 1) % n;
                let v = forward[j].min(step(u[next], j, next, &mut sat));
                if v != u[j] {
                    changed = true;
                    u[j] = v;
                }
            }
            *saturated = sat;
            if !changed {
                break;
            }
        }
        u[n] = u[0];
    } else {
        for j in (0..n - 1).rev() {
            u[j] = forward[j].min(step(u[j + 1], j, j + 1, saturated));
        }
    }
    u
}

/// Integrates forward with the smaller of the engine force and the friction
/// headroom, never exceeding `steady`. Closed paths wrap to a fixed point.
pub fn forward_pass(steady: &[f64], path: &TrackPath, p: &VehicleParams) -> Vec<f64> {
    let mut sat = 0;
    let u = forward_impl(steady, path, p, &mut sat);
    if sat > 0 {
        warn!("forward pass: lateral demand exceeds friction at {sat} station(s)");
    }
    u
}

/// Integrates backward with the full braking headroom, never exceeding
/// `forward`. Closed paths wrap to a fixed point.
pub fn backward_pass(forward: &[f64], path: &TrackPath, p: &VehicleParams) -> Vec<f64> {
    let mut sat = 0;
    let u = backward_impl(forward, path, p, &mut sat);
    if sat > 0 {
        warn!("backward pass: lateral demand exceeds friction at {sat} station(s)");
    }
    u
}

/// Trapezoidal integral of `1 / U_x` over the stations.
pub fn lap_time(stations: &[f64], u_x: &[f64]) -> Result<f64> {
    if stations.len() != u_x.len() || stations.len() < 2 {
        return input_err("lap time needs at least two stations with matching speeds");
    }
    if let Some(u) = u_x.iter().find(|u| !(**u > 0.0 && u.is_finite())) {
        return input_err(format!("speed must be positive to integrate lap time, got {u}"));
    }
    Ok(stations
        .windows(2)
        .zip(u_x.windows(2))
        .map(|(s, u)| 0.5 * (s[1] - s[0]) * (1.0 / u[0] + 1.0 / u[1]))
        .sum())
}

/// Runs all three passes and integrates the lap time.
pub fn compute_profile(path: &TrackPath, p: &VehicleParams, keep_traces: bool) -> Result<SpeedProfile> {
    p.validate()?;
    if path.len() < 2 {
        return input_err("speed profile needs at least two stations");
    }
    let steady = steady_state_pass(path, p);
    let mut sat_f = 0;
    let forward = forward_impl(&steady, path, p, &mut sat_f);
    let mut sat_b = 0;
    let backward = backward_impl(&forward, path, p, &mut sat_b);
    let saturated = sat_f.max(sat_b);
    if saturated > 0 {
        warn!("lateral demand exceeds friction at {saturated} station(s); longitudinal force set to zero there");
    }
    let lap_time = lap_time(&path.stations, &backward)?;
    let traces = keep_traces.then(|| PassTraces { steady, forward, backward: backward.clone() });
    Ok(SpeedProfile { stations: path.stations.clone(), u_x: backward, lap_time, traces, saturated_stations: saturated })
}

/// Combined friction usage `(F_x / mu F_z)^2 + (F_y / mu F_z)^2` at each
/// station, with `F_x` implied by the speed change over the adjacent
/// segment: accelerating segments are charged to their start station and
/// braking segments to their end station. The ratio is identical on both
/// axles because the force split follows the static load split.
pub fn friction_usage(path: &TrackPath, u_x: &[f64], p: &VehicleParams) -> Vec<f64> {
    let n = path.len();
    let lateral: Vec<f64> = (0..n).map(|k| (u_x[k] * u_x[k] * path.curvature[k] / (p.mu * p.g)).powi(2)).collect();
    let mut usage = lateral.clone();
    for k in 0..n.saturating_sub(1) {
        let ds = path.stations[k + 1] - path.stations[k];
        let fx = p.m * (u_x[k + 1] * u_x[k + 1] - u_x[k] * u_x[k]) / (2.0 * ds);
        let at = if fx >= 0.0 { k } else { k + 1 };
        let lon = (fx / (p.mu * p.m * p.g)).powi(2);
        usage[at] = usage[at].max(lon + lateral[at]);
    }
    usage
}

/// Longitudinal force implied by the speed change over each segment.
pub fn implied_longitudinal_force(path: &TrackPath, u_x: &[f64], p: &VehicleParams) -> Vec<f64> {
    (0..path.len().saturating_sub(1))
        .map(|k| {
            let ds = path.stations[k + 1] - path.stations[k];
            p.m * (u_x[k + 1] * u_x[k + 1] - u_x[k] * u_x[k]) / (2.0 * ds)
        })
        .collect()
}
