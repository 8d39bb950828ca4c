use log::warn;
use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::tire::{linearize_tire, Axle, TireLinearization, SATURATION_CLAMP};
use super::VehicleParams;
use crate::error::{input_err, Result};
use crate::exec::Exec;
use crate::track::TrackPath;

pub type Matrix5 = SMatrix<f64, 5, 5>;
pub type Vector5 = SVector<f64, 5>;

/// Lateral state `[e, dpsi, r, beta, psi]` relative to a reference path.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LateralState {
    /// Lateral deviation, positive left (m).
    pub e: f64,
    /// Heading error relative to the path (rad).
    pub dpsi: f64,
    /// Yaw rate (rad/s).
    pub r: f64,
    /// Sideslip (rad).
    pub beta: f64,
    /// Vehicle heading (rad).
    pub psi: f64,
}

impl LateralState {
    pub const E: usize = 0;
    pub const DPSI: usize = 1;
    pub const R: usize = 2;
    pub const BETA: usize = 3;
    pub const PSI: usize = 4;

    pub fn to_vector(&self) -> Vector5 {
        Vector5::new(self.e, self.dpsi, self.r, self.beta, self.psi)
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self { e: v[0], dpsi: v[1], r: v[2], beta: v[3], psi: v[4] }
    }
}

/// Continuous-time affine model `x' = A x + B delta + d` at one station.
pub fn continuous_matrices(
    u_x: f64,
    k: f64,
    lin: &TireLinearization,
    p: &VehicleParams,
) -> Result<(Matrix5, Vector5, Vector5)> {
    if !(u_x > 0.0) {
        return input_err(format!("speed must be positive to build dynamics, got {u_x}"));
    }
    let (cf, cr) = (lin.front.c_tilde, lin.rear.c_tilde);
    let (af, ar) = (lin.front.alpha_tilde, lin.rear.alpha_tilde);
    let (ff, fr) = (lin.front.f_tilde, lin.rear.f_tilde);
    let (a, b, m, iz) = (p.a, p.b, p.m, p.i_z);
    let mut am = Matrix5::zeros();
    am[(0, 1)] = u_x;
    am[(0, 3)] = u_x;
    am[(1, 2)] = 1.0;
    am[(2, 2)] = -(a * a * cf + b * b * cr) / (u_x * iz);
    am[(2, 3)] = (b * cr - a * cf) / iz;
    am[(3, 2)] = (b * cr - a * cf) / (m * u_x * u_x) - 1.0;
    am[(3, 3)] = -(cf + cr) / (m * u_x);
    am[(4, 2)] = 1.0;
    let bm = Vector5::new(0.0, 0.0, a * cf / iz, cf / (m * u_x), 0.0);
    let dm = Vector5::new(
        0.0,
        -k * u_x,
        (a * cf * af - b * cr * ar + a * ff - b * fr) / iz,
        (cf * af + cr * ar + ff + fr) / (m * u_x),
        0.0,
    );
    Ok((am, bm, dm))
}

/// Steady-state cornering point `(x, delta)` implied by the linearization,
/// with zero lateral deviation and vehicle heading `psi`.
pub fn steady_state(u_x: f64, k: f64, lin: &TireLinearization, p: &VehicleParams, psi: f64) -> (LateralState, f64) {
    let r = u_x * k;
    let beta = lin.rear.alpha_tilde + p.b * r / u_x;
    let delta = beta + p.a * r / u_x - lin.front.alpha_tilde;
    (LateralState { e: 0.0, dpsi: -beta, r, beta, psi }, delta)
}

/// Time discretization scheme for the affine model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discretization {
    /// `A_k = I + A dt`, `B_k = B dt`, `d_k = d dt`.
    Euler,
    /// Exact zero-order hold on `delta` and `d` via the matrix exponential.
    #[default]
    Zoh,
}

/// One discrete step `x_{k+1} = A_k x_k + B_k delta_k + d_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteStep {
    pub a: Matrix5,
    pub b: Vector5,
    pub d: Vector5,
    pub dt: f64,
    pub spectral_radius: f64,
}

/// Discretizes a continuous affine model over `dt` seconds.
pub fn discretize(a: &Matrix5, b: &Vector5, d: &Vector5, dt: f64, method: Discretization) -> Result<DiscreteStep> {
    if !(dt > 0.0 && dt.is_finite()) {
        return input_err(format!("time step must be positive, got {dt}"));
    }
    let (ak, bk, dk) = match method {
        Discretization::Euler => (Matrix5::identity() + a * dt, b * dt, d * dt),
        Discretization::Zoh => {
            let mut m = SMatrix::<f64, 7, 7>::zeros();
            m.fixed_view_mut::<5, 5>(0, 0).copy_from(&(a * dt));
            m.fixed_view_mut::<5, 1>(0, 5).copy_from(&(b * dt));
            m.fixed_view_mut::<5, 1>(0, 6).copy_from(&(d * dt));
            let e = m.exp();
            (
                e.fixed_view::<5, 5>(0, 0).into_owned(),
                e.fixed_view::<5, 1>(0, 5).into_owned(),
                e.fixed_view::<5, 1>(0, 6).into_owned(),
            )
        }
    };
    let spectral_radius = ak.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(DiscreteStep { a: ak, b: bk, d: dk, dt, spectral_radius })
}

/// Settings for [`build_dynamics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsOptions {
    pub method: Discretization,
    /// Speeds below this are rejected (m/s).
    pub speed_floor: f64,
    /// Steps whose spectral radius exceeds this are counted as unstable.
    pub spectral_bound: f64,
    /// Fraction of the friction limit used to clamp tire demand.
    pub saturation_clamp: f64,
    pub exec: Exec,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self {
            method: Discretization::default(),
            speed_floor: 5.0,
            spectral_bound: 1.0 + 1e-6,
            saturation_clamp: SATURATION_CLAMP,
            exec: Exec::default(),
        }
    }
}

/// Per-station discrete model along a path.
#[derive(Debug, Clone)]
pub struct AffineDynamics {
    /// `T - 1` steps; step `k` maps station `k` to station `k + 1`.
    pub steps: Vec<DiscreteStep>,
    /// Tire linearization at each of the `T` stations.
    pub tires: Vec<TireLinearization>,
    /// Number of axle linearizations that hit the saturation clamp.
    pub clamped: usize,
    /// Number of steps whose spectral radius exceeded the bound.
    pub unstable: usize,
}

/// Linearizes the tires at every station and discretizes the lateral model
/// with `dt_k = (s_{k+1} - s_k) / U_x(s_k)`.
pub fn build_dynamics(
    path: &TrackPath,
    speeds: &[f64],
    p: &VehicleParams,
    opts: &DynamicsOptions,
) -> Result<AffineDynamics> {
    let n = path.len();
    if speeds.len() != n {
        return input_err(format!("speed profile has {} entries, path has {n}", speeds.len()));
    }
    if !(opts.saturation_clamp > 0.0 && opts.saturation_clamp < 1.0) {
        return input_err("saturation clamp must lie strictly between 0 and 1");
    }
    if let Some(k) = speeds.iter().position(|u| !(u.is_finite() && *u >= opts.speed_floor)) {
        return input_err(format!(
            "speed {} at station {k} is below the {} m/s floor of the linearized model",
            speeds[k], opts.speed_floor
        ));
    }
    let per_station = opts.exec.map_range(n, |k| {
        let u = speeds[k];
        let kap = path.curvature[k];
        let (front, cf) = linearize_tire(u, kap, Axle::Front, p, opts.saturation_clamp);
        let (rear, cr) = linearize_tire(u, kap, Axle::Rear, p, opts.saturation_clamp);
        let lin = TireLinearization { front, rear };
        let step = if k + 1 < n {
            let dt = (path.stations[k + 1] - path.stations[k]) / u;
            continuous_matrices(u, kap, &lin, p).and_then(|(a, b, d)| discretize(&a, &b, &d, dt, opts.method)).map(Some)
        } else {
            Ok(None)
        };
        step.map(|s| (lin, s, cf as usize + cr as usize))
    });
    let mut tires = Vec::with_capacity(n);
    let mut steps = Vec::with_capacity(n.saturating_sub(1));
    let mut clamped = 0;
    for item in per_station {
        let (lin, step, c) = item?;
        tires.push(lin);
        clamped += c;
        if let Some(s) = step {
            steps.push(s);
        }
    }
    let unstable = steps.iter().filter(|s| s.spectral_radius > opts.spectral_bound).count();
    if unstable > 0 {
        warn!("{unstable} discretized step(s) exceed spectral radius {}", opts.spectral_bound);
    }
    Ok(AffineDynamics { steps, tires, clamped, unstable })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin_at(u: f64, k: f64, p: &VehicleParams) -> TireLinearization {
        TireLinearization {
            front: linearize_tire(u, k, Axle::Front, p, SATURATION_CLAMP).0,
            rear: linearize_tire(u, k, Axle::Rear, p, SATURATION_CLAMP).0,
        }
    }

    #[test]
    fn straight_road_affine_term_vanishes() {
        let p = VehicleParams::default();
        let (_, _, d) = continuous_matrices(20.0, 0.0, &lin_at(20.0, 0.0, &p), &p).unwrap();
        assert_eq!(d, Vector5::zeros());
    }

    #[test]
    fn matrix_entries_match_closed_form() {
        let p = VehicleParams::default();
        let lin = lin_at(30.0, 0.004, &p);
        let (a, b, _) = continuous_matrices(30.0, 0.004, &lin, &p).unwrap();
        assert_eq!(a[(0, 1)], 30.0);
        assert_eq!(a[(0, 3)], 30.0);
        assert_eq!(a[(1, 2)], 1.0);
        assert_eq!(a[(4, 2)], 1.0);
        let (cf, cr) = (lin.front.c_tilde, lin.rear.c_tilde);
        let expect = (p.b * cr - p.a * cf) / (p.m * 900.0) - 1.0;
        assert!((a[(3, 2)] - expect).abs() < 1e-15);
        assert_eq!(b[0], 0.0);
        assert_eq!(b[1], 0.0);
        assert_eq!(b[4], 0.0);
        assert!((b[2] - p.a * cf / p.i_z).abs() < 1e-12);
        assert!((b[3] - cf / (p.m * 30.0)).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_speed_rejected() {
        let p = VehicleParams::default();
        assert!(continuous_matrices(0.0, 0.0, &TireLinearization::default(), &p).is_err());
    }

    #[test]
    fn steady_state_is_an_equilibrium() {
        let p = VehicleParams::default();
        for &(u, k) in &[(20.0, 0.01), (30.0, -0.005), (12.0, 0.04)] {
            let lin = lin_at(u, k, &p);
            let (a, b, d) = continuous_matrices(u, k, &lin, &p).unwrap();
            let (x, delta) = steady_state(u, k, &lin, &p, 0.3);
            let xdot = a * x.to_vector() + b * delta + d;
            assert!(xdot[0].abs() < 1e-9);
            assert!(xdot[1].abs() < 1e-9);
            assert!(xdot[2].abs() < 1e-6);
            assert!(xdot[3].abs() < 1e-9);
            assert!((xdot[4] - u * k).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_decay_both_schemes() {
        let mut a = Matrix5::zeros();
        a[(0, 0)] = -1.0;
        let z = Vector5::zeros();
        let e = discretize(&a, &z, &z, 0.1, Discretization::Euler).unwrap();
        assert!((e.a[(0, 0)] - 0.9).abs() < 1e-15);
        let h = discretize(&a, &z, &z, 0.1, Discretization::Zoh).unwrap();
        assert!((h.a[(0, 0)] - (-0.1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_discretizes_to_identity() {
        let z = Vector5::zeros();
        for m in [Discretization::Euler, Discretization::Zoh] {
            let s = discretize(&Matrix5::zeros(), &z, &z, 0.3, m).unwrap();
            assert!((s.a - Matrix5::identity()).norm() < 1e-15);
        }
    }
}
