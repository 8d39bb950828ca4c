//! Iterative trajectory generation: speed profile, curvature step, path
//! update, repeated until the lap time stops improving.

use std::f64::consts::PI;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::curvature::{curvature_term, min_curvature_step, CurvatureConfig, QpDiagnostics, QpSolution, StartCondition};
use crate::error::{input_err, Error, Result};
use crate::exec::Exec;
use crate::qp::{QpMethod, QpSettings, QpStatus};
use crate::sim::{simulate_lap, ControllerGains, SimOptions};
use crate::speed::{compute_profile, SpeedProfile};
use crate::track::polyline::{heading_of, left_normal, Point};
use crate::track::{
    estimate_centerline, integrate_heading, signed_boundary_offsets, BoundaryCloud, CenterlineOptions, OffsetOptions,
    TrackPath,
};
use crate::vehicle::{
    build_dynamics, steady_state, Discretization, DynamicsOptions, TireLinearization, VehicleParams, SATURATION_CLAMP,
};

/// How the curvature of the updated path is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureSource {
    /// Differences of the optimized vehicle heading over the new chords.
    /// Ignores sideslip changes, so the curvature can disagree with the
    /// shifted points when sideslip varies along a corner.
    VehicleHeading,
    /// Turning angle between consecutive chords of the shifted points.
    #[default]
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Stop once the lap time improves by no more than this (s).
    pub epsilon: f64,
    pub max_iterations: usize,
    pub lambda: f64,
    /// Station spacing (m).
    pub ds: f64,
    /// Preview horizon (m); `None` plans the whole track.
    pub lookahead: Option<f64>,
    /// Record simulated lap times and use them for the stop criterion.
    pub simulate: bool,
    pub qp_method: QpMethod,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
    pub ridge: f64,
    pub discretization: Discretization,
    /// Fraction of the friction limit at which tire demand is clamped
    /// before linearizing.
    pub saturation_clamp: f64,
    pub curvature_source: CurvatureSource,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            max_iterations: 12,
            lambda: 1.0,
            ds: 2.75,
            lookahead: None,
            simulate: false,
            qp_method: QpMethod::default(),
            qp_tol: 1e-6,
            qp_max_iter: 20_000,
            ridge: 1e-9,
            discretization: Discretization::default(),
            saturation_clamp: SATURATION_CLAMP,
            curvature_source: CurvatureSource::default(),
            exec: Exec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return input_err("epsilon must be positive");
        }
        if !(self.ds > 0.0) {
            return input_err("ds must be positive");
        }
        if !(self.lambda >= 0.0) || !(self.ridge >= 0.0) {
            return input_err("lambda and ridge must be non-negative");
        }
        if !(self.qp_tol > 0.0) || self.qp_max_iter == 0 {
            return input_err("qp_tol and qp_max_iter must be positive");
        }
        if !(self.saturation_clamp > 0.0 && self.saturation_clamp < 1.0) {
            return input_err("saturation_clamp must lie strictly between 0 and 1");
        }
        if let Some(l) = self.lookahead {
            if !(l >= 10.0 * self.ds) {
                return input_err(format!("lookahead {l} m is shorter than ten stations"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn curvature_config(&self) -> CurvatureConfig {
        CurvatureConfig {
            lambda: self.lambda,
            ridge: self.ridge,
            qp: QpSettings { method: self.qp_method, tol: self.qp_tol, max_iter: self.qp_max_iter, ..QpSettings::default() },
            dynamics: DynamicsOptions {
                method: self.discretization,
                saturation_clamp: self.saturation_clamp,
                exec: self.exec,
                ..DynamicsOptions::default()
            },
            start: StartCondition::Auto,
        }
    }
}

/// Summary of one outer iteration; iteration 0 is the starting path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub lap_time_integrated: f64,
    pub lap_time_simulated: Option<f64>,
    /// Heading-change cost of this iteration's path.
    pub curvature_objective: f64,
    /// Optimal value of the curvature problem that produced this path.
    pub qp_objective: Option<f64>,
    /// Improvement over the previous iteration (s).
    pub delta_t: Option<f64>,
    pub stations: usize,
    pub total_length: f64,
    /// Largest corridor excursion of the QP solution before clamping (m).
    pub max_bound_violation: f64,
    /// Stations of the updated path found outside the corridor.
    pub flagged_stations: usize,
    pub qp_iterations: usize,
    pub kkt_residual: Option<f64>,
    /// Excluded from serialized records so repeated runs compare equal.
    #[serde(skip)]
    pub qp_wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStatus {
    Converged,
    MaxIterations,
    SolverFailure,
}

#[derive(Debug, Clone)]
pub struct Iteration {
    pub path: TrackPath,
    pub profile: SpeedProfile,
    pub record: IterationRecord,
    pub diagnostics: Option<QpDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub iterations: Vec<Iteration>,
    /// Index into `iterations` of the fastest path.
    pub best: usize,
    pub status: PipelineStatus,
    pub failure: Option<String>,
}

impl PipelineResult {
    pub fn records(&self) -> Vec<IterationRecord> {
        self.iterations.iter().map(|i| i.record.clone()).collect()
    }

    pub fn best_path(&self) -> &TrackPath {
        &self.iterations[self.best].path
    }

    pub fn best_profile(&self) -> &SpeedProfile {
        &self.iterations[self.best].profile
    }

    pub fn final_iteration(&self) -> &Iteration {
        self.iterations.last().unwrap()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UpdateOptions {
    pub ds: f64,
    pub curvature_source: CurvatureSource,
    pub offsets: OffsetOptions,
}

impl Default for UpdateOptions {
    fn default() -> Self {
        Self { ds: 2.75, curvature_source: CurvatureSource::default(), offsets: OffsetOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct UpdatedPath {
    pub path: TrackPath,
    /// Stations whose recomputed offsets had to be clamped.
    pub flagged: usize,
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Linear interpolation of `(xs, ys)` at `x`; `period` makes the data
/// periodic with the first sample repeated at `xs[0] + period`.
fn interp(xs: &[f64], ys: &[f64], x: f64, period: Option<f64>) -> f64 {
    let n = xs.len();
    if let Some(p) = period {
        let x0 = xs[0];
        let x = (x - x0).rem_euclid(p) + x0;
        let i = xs.partition_point(|v| *v <= x);
        let (xa, ya, xb, yb) = if i == 0 {
            (xs[n - 1] - p, ys[n - 1], xs[0], ys[0])
        } else if i == n {
            (xs[n - 1], ys[n - 1], xs[0] + p, ys[0])
        } else {
            (xs[i - 1], ys[i - 1], xs[i], ys[i])
        };
        return ya + (yb - ya) * (x - xa) / (xb - xa);
    }
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|v| *v <= x);
    let (xa, xb) = (xs[i - 1], xs[i]);
    ys[i - 1] + (ys[i] - ys[i - 1]) * (x - xa) / (xb - xa)
}

/// Moves the path laterally by the optimized deviation, along the normals of
/// the path it was computed on, then rebuilds stations from the new chords,
/// curvature per `opts.curvature_source`, and re-grids at uniform spacing.
/// Corridor offsets are recomputed against `cloud`.
pub fn update_path(path: &TrackPath, sol: &QpSolution, cloud: &BoundaryCloud, opts: &UpdateOptions) -> Result<UpdatedPath> {
    let t = path.len();
    if sol.x.len() != t {
        return input_err(format!("solution has {} stations, path has {t}", sol.x.len()));
    }
    if !(opts.ds > 0.0) {
        return input_err("ds must be positive");
    }
    let n = if path.closed { t - 1 } else { t };
    let pts: Vec<Point> = (0..n).map(|k| path.point(k) + left_normal(path.heading[k]) * sol.x[k].e).collect();
    let nseg = t - 1;
    let chord: Vec<Point> = (0..nseg).map(|k| pts[(k + 1) % n] - pts[k]).collect();
    let len: Vec<f64> = chord.iter().map(|c| c.norm()).collect();
    if let Some(k) = len.iter().position(|l| !(*l > 1e-9)) {
        return Err(Error::Geometry(format!("updated path has a degenerate chord at station {k}")));
    }
    let mut s_old = Vec::with_capacity(t);
    s_old.push(0.0);
    for l in &len {
        s_old.push(s_old.last().unwrap() + l);
    }
    let total = s_old[nseg];
    // curvature samples located at (s, value)
    let (k_at, k_val): (Vec<f64>, Vec<f64>) = match opts.curvature_source {
        CurvatureSource::VehicleHeading => {
            (0..nseg).map(|k| (0.5 * (s_old[k] + s_old[k + 1]), (sol.x[k + 1].psi - sol.x[k].psi) / len[k])).unzip()
        }
        CurvatureSource::Geometric => {
            let head: Vec<f64> = chord.iter().map(heading_of).collect();
            let inner = if path.closed { 0..nseg } else { 1..nseg };
            inner
                .map(|k| {
                    let prev = (k + nseg - 1) % nseg;
                    (s_old[k], wrap_angle(head[k] - head[prev]) / (0.5 * (len[k] + len[prev])))
                })
                .unzip()
        }
    };
    let period = path.closed.then_some(total);

    let m = ((total / opts.ds).round() as usize).max(2);
    let step = total / m as f64;
    let stations: Vec<f64> = (0..=m).map(|i| i as f64 * step).collect();
    let mut curvature: Vec<f64> = stations.iter().map(|s| interp(&k_at, &k_val, *s, period)).collect();
    if path.closed {
        curvature[m] = curvature[0];
        let target = path.total_turning();
        let got: f64 = curvature.windows(2).map(|w| 0.5 * step * (w[0] + w[1])).sum();
        let shift = (target - got) / total;
        for k in &mut curvature {
            *k += shift;
        }
    }
    let mut east = Vec::with_capacity(m + 1);
    let mut north = Vec::with_capacity(m + 1);
    let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
    let s_pts = &s_old[..n];
    for s in &stations {
        east.push(interp(s_pts, &xs, *s, period));
        north.push(interp(s_pts, &ys, *s, period));
    }
    if path.closed {
        east[m] = east[0];
        north[m] = north[0];
    }
    let p0 = Point::new(east[0], north[0]);
    let heading0 = if path.closed {
        heading_of(&(Point::new(east[1], north[1]) - Point::new(east[m - 1], north[m - 1])))
    } else {
        heading_of(&(Point::new(east[1], north[1]) - p0))
    };
    // keep the heading branch of the previous path
    let heading0 = path.heading[0] + wrap_angle(heading0 - path.heading[0]);
    let heading = integrate_heading(&stations, &curvature, heading0);
    let mut new_path = TrackPath {
        stations,
        curvature,
        w_in: vec![0.0; m + 1],
        w_out: vec![0.0; m + 1],
        east,
        north,
        heading,
        closed: path.closed,
    };
    let off = signed_boundary_offsets(&new_path, cloud, &opts.offsets);
    new_path.w_in = off.w_in;
    new_path.w_out = off.w_out;
    Ok(UpdatedPath { path: new_path, flagged: off.flagged.len() })
}

fn simulated_time(path: &TrackPath, profile: &SpeedProfile, params: &VehicleParams) -> Option<f64> {
    match simulate_lap(path, profile, params, &ControllerGains::default(), &SimOptions { log_every: usize::MAX, ..SimOptions::default() }) {
        Ok(r) => Some(r.lap_time),
        Err(e) => {
            warn!("simulation failed: {e}");
            None
        }
    }
}

fn base_record(index: usize, path: &TrackPath, profile: &SpeedProfile) -> IterationRecord {
    IterationRecord {
        index,
        lap_time_integrated: profile.lap_time,
        lap_time_simulated: None,
        curvature_objective: curvature_term(&path.heading, &path.segment_lengths()),
        qp_objective: None,
        delta_t: None,
        stations: path.len(),
        total_length: path.total_length(),
        max_bound_violation: 0.0,
        flagged_stations: 0,
        qp_iterations: 0,
        kkt_residual: None,
        qp_wall_time: 0.0,
    }
}

/// Runs the iteration from a given starting path. `cloud` supplies the road
/// edges for recomputing corridor offsets after each update.
pub fn optimize_path(
    initial: &TrackPath,
    cloud: &BoundaryCloud,
    params: &VehicleParams,
    config: &PipelineConfig,
) -> Result<PipelineResult> {
    config.validate()?;
    params.validate()?;
    initial.validate()?;
    let profile = compute_profile(initial, params, false)?;
    let mut record = base_record(0, initial, &profile);
    if config.simulate {
        record.lap_time_simulated = simulated_time(initial, &profile, params);
    }
    let mut iterations = vec![Iteration { path: initial.clone(), profile, record, diagnostics: None }];
    let qp_config = config.curvature_config();
    let update = UpdateOptions {
        ds: config.ds,
        curvature_source: config.curvature_source,
        offsets: OffsetOptions { exec: config.exec, ..OffsetOptions::default() },
    };
    // simulated times are compared only with simulated times
    let improvement = |a: &IterationRecord, b: &IterationRecord| match (config.simulate, a.lap_time_simulated, b.lap_time_simulated) {
        (true, Some(x), Some(y)) => x - y,
        _ => a.lap_time_integrated - b.lap_time_integrated,
    };
    let mut status = PipelineStatus::MaxIterations;
    let mut failure = None;
    for index in 1..=config.max_iterations {
        let prev = iterations.last().unwrap();
        let step = min_curvature_step(&prev.path, &prev.profile, params, &qp_config).and_then(|sol| {
            if sol.status != QpStatus::Optimal {
                return Err(Error::Solver(format!(
                    "curvature problem ended with status {:?} (KKT residual {:.3e})",
                    sol.status, sol.kkt_residual
                )));
            }
            let upd = update_path(&prev.path, &sol, cloud, &update)?;
            let profile = compute_profile(&upd.path, params, false)?;
            Ok((sol, upd, profile))
        });
        let (sol, upd, profile) = match step {
            Ok(v) => v,
            Err(e) => {
                warn!("iteration {index} failed: {e}");
                status = PipelineStatus::SolverFailure;
                failure = Some(e.to_string());
                break;
            }
        };
        let mut record = base_record(index, &upd.path, &profile);
        record.qp_objective = Some(sol.objective);
        record.max_bound_violation = sol.diagnostics.max_bound_violation;
        record.flagged_stations = upd.flagged;
        record.qp_iterations = sol.iterations;
        record.kkt_residual = Some(sol.kkt_residual);
        record.qp_wall_time = sol.wall_time;
        if config.simulate {
            record.lap_time_simulated = simulated_time(&upd.path, &profile, params);
        }
        let dt = improvement(&prev.record, &record);
        record.delta_t = Some(dt);
        info!(
            "iteration {index}: lap {:.3} s, improvement {dt:.4} s, QP {} iterations in {:.2} s",
            record.lap_time_integrated, record.qp_iterations, record.qp_wall_time
        );
        iterations.push(Iteration { path: upd.path, profile, record, diagnostics: Some(sol.diagnostics) });
        if dt <= config.epsilon {
            status = PipelineStatus::Converged;
            break;
        }
    }
    let simulated = config.simulate && iterations.iter().any(|it| it.record.lap_time_simulated.is_some());
    let rank = |r: &IterationRecord| {
        if simulated {
            r.lap_time_simulated.unwrap_or(f64::INFINITY)
        } else {
            r.lap_time_integrated
        }
    };
    let best = (0..iterations.len()).min_by(|&a, &b| rank(&iterations[a].record).total_cmp(&rank(&iterations[b].record))).unwrap_or(0);
    Ok(PipelineResult { iterations, best, status, failure })
}

/// Estimates the centerline from the boundary samples and runs the
/// iteration from it.
pub fn generate_trajectory(cloud: &BoundaryCloud, params: &VehicleParams, config: &PipelineConfig) -> Result<PipelineResult> {
    config.validate()?;
    let opts = CenterlineOptions { ds: config.ds, exec: config.exec, ..CenterlineOptions::default() };
    let center = estimate_centerline(cloud, &opts)?;
    optimize_path(&center, cloud, params, config)
}

#[derive(Debug, Clone)]
pub struct PreviewResult {
    /// Sub-path the plan was computed on (stations re-based to zero).
    pub window: TrackPath,
    pub profile: SpeedProfile,
    pub solution: QpSolution,
    /// Window path moved onto the optimized line.
    pub planned: TrackPath,
    pub planned_profile: SpeedProfile,
    /// The window was cut short by the end of an open path.
    pub truncated: bool,
}

/// One speed-profile and curvature step on the next `lookahead` metres from
/// `start_s`, starting from steady cornering on the reference. A window that
/// spans a whole closed circuit is solved as the periodic problem.
pub fn preview_plan(
    path: &TrackPath,
    cloud: &BoundaryCloud,
    start_s: f64,
    lookahead: f64,
    params: &VehicleParams,
    config: &PipelineConfig,
) -> Result<PreviewResult> {
    config.validate()?;
    if !(lookahead >= 10.0 * config.ds) {
        return input_err(format!("lookahead {lookahead} m is shorter than ten stations of {} m", config.ds));
    }
    let mut qp_config = config.curvature_config();
    let (window, truncated) = if path.closed && lookahead >= path.total_length() - 1e-9 && start_s.rem_euclid(path.total_length()) < 1e-9 {
        qp_config.start = StartCondition::Periodic;
        (path.clone(), false)
    } else {
        let (w, truncated) = path.window(start_s, lookahead)?;
        if truncated {
            warn!("preview window truncated at the end of the path ({:.1} m)", w.total_length());
        }
        let profile = compute_profile(&w, params, false)?;
        let dy = build_dynamics(&w, &profile.u_x, params, &qp_config.dynamics)?;
        let lin: TireLinearization = dy.tires[0];
        let (mut x0, _) = steady_state(profile.u_x[0], w.curvature[0], &lin, params, 0.0);
        x0.psi = w.heading[0] + x0.dpsi;
        qp_config.start = StartCondition::Fixed(x0);
        (w, truncated)
    };
    let profile = compute_profile(&window, params, false)?;
    let solution = min_curvature_step(&window, &profile, params, &qp_config)?;
    if solution.status != QpStatus::Optimal {
        return Err(Error::Solver(format!("preview problem ended with status {:?}", solution.status)));
    }
    let update = UpdateOptions {
        ds: config.ds,
        curvature_source: config.curvature_source,
        offsets: OffsetOptions { exec: config.exec, ..OffsetOptions::default() },
    };
    let planned = update_path(&window, &solution, cloud, &update)?.path;
    let planned_profile = compute_profile(&planned, params, false)?;
    Ok(PreviewResult { window, profile, solution, planned, planned_profile, truncated })
}
