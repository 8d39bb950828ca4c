//! Closed-loop nonlinear simulation of a vehicle following a trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};
use crate::speed::{friction_headroom, SpeedProfile};
use crate::track::polyline::{left_normal, project_onto_range, tangent, Point};
use crate::track::TrackPath;
use crate::vehicle::{fiala_force, linearize_tire, Axle, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerGains {
    /// Steering per metre of lookahead error (rad/m).
    pub k_lat: f64,
    /// Lookahead distance (m).
    pub x_la: f64,
    /// Proportional speed gain (1/s).
    pub k_speed: f64,
    /// Steering per unit of excess yaw rate (s).
    pub k_yaw: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self { k_lat: 0.05, x_la: 15.0, k_speed: 0.5, k_yaw: 0.2 }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_lat > 0.0 && self.x_la > 0.0 && self.k_speed > 0.0 && self.k_yaw >= 0.0) {
            return input_err("controller gains must be positive (k_yaw may be zero)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    /// Lateral deviation that aborts the run (m).
    pub off_track: f64,
    /// Simulated time limit as a multiple of the profile's lap time.
    pub time_limit_factor: f64,
    /// Record one log row every this many steps.
    pub log_every: usize,
    /// Road friction of the simulated vehicle relative to the planning value.
    pub grip_ratio: f64,
    /// Lateral displacement of the starting position, left positive (m).
    pub start_offset: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { dt: 0.005, off_track: 25.0, time_limit_factor: 5.0, log_every: 1, grip_ratio: 1.0, start_offset: 0.0 }
    }
}

/// Full vehicle state in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub east: f64,
    pub north: f64,
    pub psi: f64,
    pub beta: f64,
    pub r: f64,
    pub u_x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Command {
    pub delta: f64,
    pub f_x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TireForces {
    pub front: f64,
    pub rear: f64,
}

/// Lateral tire forces from linear slip angles and the brush model.
pub fn tire_forces(x: &SimState, delta: f64, p: &VehicleParams) -> TireForces {
    let alpha_f = x.beta + p.a * x.r / x.u_x - delta;
    let alpha_r = x.beta - p.b * x.r / x.u_x;
    TireForces {
        front: fiala_force(alpha_f, p.c_f, p.fz_front(), p.mu),
        rear: fiala_force(alpha_r, p.c_r, p.fz_rear(), p.mu),
    }
}

fn derivative(x: &SimState, cmd: &Command, p: &VehicleParams) -> [f64; 6] {
    let f = tire_forces(x, cmd.delta, p);
    let v = tangent(x.psi + x.beta) * x.u_x;
    [
        v.x,
        v.y,
        x.r,
        (f.front + f.rear) / (p.m * x.u_x) - x.r,
        (p.a * f.front - p.b * f.rear) / p.i_z,
        cmd.f_x / p.m,
    ]
}

fn add(x: &SimState, k: &[f64; 6], h: f64) -> SimState {
    SimState {
        east: x.east + h * k[0],
        north: x.north + h * k[1],
        psi: x.psi + h * k[2],
        beta: x.beta + h * k[3],
        r: x.r + h * k[4],
        u_x: x.u_x + h * k[5],
    }
}

/// One fourth-order Runge-Kutta step with the command held constant.
pub fn integrate(x: &SimState, cmd: &Command, p: &VehicleParams, dt: f64) -> SimState {
    let k1 = derivative(x, cmd, p);
    let k2 = derivative(&add(x, &k1, 0.5 * dt), cmd, p);
    let k3 = derivative(&add(x, &k2, 0.5 * dt), cmd, p);
    let k4 = derivative(&add(x, &k3, dt), cmd, p);
    let mut k = [0.0; 6];
    for i in 0..6 {
        k[i] = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
    }
    add(x, &k, dt)
}

/// Reference quantities at the vehicle's projected station.
#[derive(Debug, Clone, Copy)]
struct Reference {
    s: f64,
    e: f64,
    psi_r: f64,
    k: f64,
    u_des: f64,
    half_du2_ds: f64,
}

/// Trajectory being tracked: path, speeds and projection warm start.
struct Tracker<'a> {
    path: &'a TrackPath,
    profile: &'a SpeedProfile,
    poly: Vec<Point>,
    nseg: usize,
    segment: usize,
}

impl<'a> Tracker<'a> {
    fn new(path: &'a TrackPath, profile: &'a SpeedProfile) -> Self {
        let poly = path.distinct_points();
        let nseg = if path.closed { poly.len() } else { poly.len() - 1 };
        Self { path, profile, poly, nseg, segment: 0 }
    }

    fn reference(&mut self, pos: &Point) -> Reference {
        let back = 4;
        let (start, count) = if self.path.closed {
            ((self.segment + self.nseg - back) % self.nseg, 16)
        } else {
            (self.segment.saturating_sub(back), 16)
        };
        let proj = project_onto_range(pos, &self.poly, self.path.closed, start, count);
        self.segment = proj.segment;
        let st = &self.path.stations;
        let i = proj.segment;
        let s = st[i] + proj.t * (st[i + 1] - st[i]);
        let psi_r = self.path.interpolate(&self.path.heading, s);
        let e = (pos - proj.point).dot(&left_normal(psi_r));
        // constant force per segment means U² is linear in s
        let (u0, u1) = (self.profile.u_x[i] * self.profile.u_x[i], self.profile.u_x[i + 1] * self.profile.u_x[i + 1]);
        Reference {
            s,
            e,
            psi_r,
            k: self.path.interpolate(&self.path.curvature, s),
            u_des: (u0 + proj.t * (u1 - u0)).sqrt(),
            half_du2_ds: 0.5 * (u1 - u0) / (st[i + 1] - st[i]),
        }
    }
}

const FEEDFORWARD_CLAMP: f64 = 0.999;

/// Steady sideslip and feedforward steering for curvature `k` at speed `u`.
fn feedforward(u: f64, k: f64, p: &VehicleParams) -> (f64, f64) {
    // plain inversion of the tire curve, just short of the peak
    let (front, _) = linearize_tire(u, k, Axle::Front, p, FEEDFORWARD_CLAMP);
    let (rear, _) = linearize_tire(u, k, Axle::Rear, p, FEEDFORWARD_CLAMP);
    let beta_ss = rear.alpha_tilde + p.b * k;
    let delta_ff = p.wheelbase() * k + rear.alpha_tilde - front.alpha_tilde;
    (beta_ss, delta_ff)
}

fn control(x: &SimState, r: &Reference, gains: &ControllerGains, p: &VehicleParams) -> Command {
    let (beta_ss, delta_ff) = feedforward(x.u_x, r.k, p);
    let dpsi = x.psi - r.psi_r;
    // yaw-rate damping keeps the car from rotating away when both axles
    // are near the peak of the tire curve
    let delta = delta_ff - gains.k_lat * (r.e + gains.x_la * (dpsi + beta_ss)) - gains.k_yaw * (x.r - x.u_x * r.k);
    let f_des = p.m * r.half_du2_ds + gains.k_speed * p.m * (r.u_des - x.u_x);
    let room = friction_headroom(x.u_x, r.k, p).unwrap_or(0.0);
    let f_x = f_des.clamp(-room, room.min(p.f_engine_max));
    Command { delta, f_x }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimLogRow {
    pub t_s: f64,
    pub s_m: f64,
    pub e_m: f64,
    pub dpsi_rad: f64,
    pub ux_mps: f64,
    pub delta_rad: f64,
    pub fyf_n: f64,
    pub fyr_n: f64,
    pub fx_n: f64,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    /// Time to cover the trajectory once (s).
    pub lap_time: f64,
    pub logs: Vec<SimLogRow>,
    pub max_abs_e: f64,
}

/// Starting state on the path at station 0, in steady cornering at the
/// profile's first speed.
fn initial_state(path: &TrackPath, profile: &SpeedProfile, p: &VehicleParams, offset: f64) -> SimState {
    let u = profile.u_x[0];
    let k = path.curvature[0];
    let (beta_ss, _) = feedforward(u, k, p);
    let pos = path.point(0) + left_normal(path.heading[0]) * offset;
    SimState { east: pos.x, north: pos.y, psi: path.heading[0] - beta_ss, beta: beta_ss, r: u * k, u_x: u }
}

/// Drives the trajectory once from station 0 to the end (closed paths: back
/// to the start line) and returns the elapsed time, interpolated to the
/// crossing.
pub fn simulate_lap(
    path: &TrackPath,
    profile: &SpeedProfile,
    params: &VehicleParams,
    gains: &ControllerGains,
    opts: &SimOptions,
) -> Result<SimResult> {
    let (res, err) = simulate_partial(path, profile, params, gains, opts)?;
    match err {
        Some(e) => Err(e),
        None => Ok(res),
    }
}

/// Like [`simulate_lap`] but keeps the log of an aborted run: the error, if
/// any, is returned next to the partial result.
pub fn simulate_partial(
    path: &TrackPath,
    profile: &SpeedProfile,
    params: &VehicleParams,
    gains: &ControllerGains,
    opts: &SimOptions,
) -> Result<(SimResult, Option<Error>)> {
    params.validate()?;
    gains.validate()?;
    path.validate()?;
    if profile.u_x.len() != path.len() {
        return input_err("profile and path differ in length");
    }
    if !(opts.dt > 0.0) {
        return input_err("time step must be positive");
    }
    if profile.u_x.iter().any(|u| !(*u > 0.0)) {
        return input_err("profile speeds must be positive");
    }
    if !(opts.grip_ratio > 0.0) {
        return input_err("grip ratio must be positive");
    }
    let road = VehicleParams { mu: params.mu * opts.grip_ratio, ..*params };
    let total = path.total_length();
    let mut tracker = Tracker::new(path, profile);
    let mut x = initial_state(path, profile, params, opts.start_offset);
    let t_limit = opts.time_limit_factor * profile.lap_time.max(1.0);
    let mut t = 0.0;
    let mut logs = Vec::new();
    let mut max_abs_e: f64 = 0.0;
    let mut prev_s_abs = 0.0;
    let mut step = 0usize;
    loop {
        let pos = Point::new(x.east, x.north);
        let r = tracker.reference(&pos);
        let s_abs = if path.closed {
            // unwrap the station continuously across the start line
            prev_s_abs + (r.s - prev_s_abs + 0.5 * total).rem_euclid(total) - 0.5 * total
        } else {
            r.s
        };
        if step > 0 && s_abs >= total {
            // crossing interpolated linearly in station
            let frac = (total - prev_s_abs) / (s_abs - prev_s_abs);
            let lap_time = t - opts.dt + frac * opts.dt;
            return Ok((SimResult { lap_time, logs, max_abs_e }, None));
        }
        if !path.closed && tracker.segment + 1 >= tracker.nseg && r.s >= total - 1e-9 {
            return Ok((SimResult { lap_time: t, logs, max_abs_e }, None));
        }
        max_abs_e = max_abs_e.max(r.e.abs());
        let abort = |e: Error, logs: Vec<SimLogRow>| Ok((SimResult { lap_time: f64::NAN, logs, max_abs_e }, Some(e)));
        if r.e.abs() > opts.off_track {
            return abort(Error::OffTrack { station: s_abs, deviation: r.e }, logs);
        }
        if t > t_limit {
            return abort(Error::Solver(format!("simulation did not finish within {t_limit:.1} s")), logs);
        }
        let cmd = control(&x, &r, gains, params);
        if step.is_multiple_of(opts.log_every.max(1)) {
            let f = tire_forces(&x, cmd.delta, &road);
            logs.push(SimLogRow {
                t_s: t,
                s_m: s_abs,
                e_m: r.e,
                dpsi_rad: x.psi - r.psi_r,
                ux_mps: x.u_x,
                delta_rad: cmd.delta,
                fyf_n: f.front,
                fyr_n: f.rear,
                fx_n: cmd.f_x,
            });
        }
        x = integrate(&x, &cmd, &road, opts.dt);
        if !(x.u_x > 0.1) || !x.east.is_finite() {
            return abort(Error::Solver(format!("vehicle stalled or diverged at s = {s_abs:.2} m")), logs);
        }
        prev_s_abs = s_abs;
        t += opts.dt;
        step += 1;
    }
}
