//! Convex minimum-curvature problem over the affine lateral dynamics.
//!
//! Decision vector: states `x_1..x_T` (five per station) followed by the
//! steering angles `delta_1..delta_T`. The cost penalizes squared heading
//! change per unit length plus `lambda` times squared steering change; the
//! constraints are the discrete dynamics, the corridor bounds on `e` and,
//! depending on [`StartCondition`], periodicity or a fixed initial state.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};
use crate::exec::Exec;
use crate::qp::{self, CscMatrix, KktResiduals, QpData, QpSettings, QpStatus};
use crate::speed::SpeedProfile;
use crate::track::TrackPath;
use crate::vehicle::{build_dynamics, AffineDynamics, DynamicsOptions, LateralState, VehicleParams};

const NX: usize = 5;

/// Index of state component `j` at station `k`.
pub fn x_index(k: usize, j: usize) -> usize {
    NX * k + j
}

/// Index of the steering angle at station `k` for a `t`-station problem.
pub fn delta_index(t: usize, k: usize) -> usize {
    NX * t + k
}

/// How the first station is constrained.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StartCondition {
    /// Periodic for closed paths, free otherwise.
    #[default]
    Auto,
    /// `e, r, beta, delta` equal at both ends and `psi` advanced by the
    /// total turning; `dpsi` periodicity follows from the dynamics.
    Periodic,
    /// Only the corridor bounds apply at the first station.
    Free,
    /// The first state is pinned.
    Fixed(LateralState),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureConfig {
    /// Weight on squared steering differences (1/m^2 scaled cost units).
    pub lambda: f64,
    /// Diagonal added to the cost on every decision variable.
    pub ridge: f64,
    pub qp: QpSettings,
    pub dynamics: DynamicsOptions,
    pub start: StartCondition,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            ridge: 1e-9,
            qp: QpSettings::default(),
            dynamics: DynamicsOptions::default(),
            start: StartCondition::Auto,
        }
    }
}

/// Assembled problem together with the data needed to interpret it.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub t: usize,
    pub data: QpData,
    /// Upper triangle of `H` (cost is `z' H z`, without the ridge).
    pub h: CscMatrix,
    pub ds: Vec<f64>,
    pub lambda: f64,
    pub dynamics_rows: usize,
    pub periodicity_rows: usize,
    pub start_rows: usize,
    /// Heading advance imposed between the first and last station when
    /// periodic.
    pub turning: f64,
}

impl QpProblem {
    pub fn equality_rows(&self) -> usize {
        self.dynamics_rows + self.periodicity_rows + self.start_rows
    }

    /// `z' H z`.
    pub fn cost(&self, z: &[f64]) -> f64 {
        let hz = self.h.sym_upper_mul_vec(z);
        z.iter().zip(&hz).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QpDiagnostics {
    pub status: QpStatus,
    pub objective: f64,
    pub curvature_term: f64,
    pub steering_term: f64,
    pub kkt_residual: f64,
    pub residuals: KktResiduals,
    pub dynamics_residual: f64,
    pub max_bound_violation: f64,
    pub iterations: usize,
    pub polished: bool,
    pub rho_updates: usize,
    pub variables: usize,
    pub constraints: usize,
    pub clamped_tires: usize,
    pub unstable_steps: usize,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub delta: Vec<f64>,
    pub x: Vec<LateralState>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: QpStatus,
    pub diagnostics: QpDiagnostics,
    /// Wall-clock seconds spent in assembly and solve.
    pub wall_time: f64,
}

impl QpSolution {
    pub fn e(&self) -> Vec<f64> {
        self.x.iter().map(|s| s.e).collect()
    }

    pub fn psi(&self) -> Vec<f64> {
        self.x.iter().map(|s| s.psi).collect()
    }
}

/// `sum (psi_k - psi_{k-1})^2 / ds_k^2`.
pub fn curvature_term(psi: &[f64], ds: &[f64]) -> f64 {
    psi.windows(2).zip(ds).map(|(w, d)| ((w[1] - w[0]) / d).powi(2)).sum()
}

/// `sum (delta_k - delta_{k-1})^2`.
pub fn steering_term(delta: &[f64]) -> f64 {
    delta.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
}

fn difference_triplets(i: usize, j: usize, w: f64, out: &mut Vec<(usize, usize, f64)>) {
    // w (z_j - z_i)^2 with i < j, upper triangle
    out.push((i, i, w));
    out.push((j, j, w));
    out.push((i, j, -w));
}

/// Assembles the problem for a path, its speed profile and the matching
/// discrete dynamics.
pub fn build_qp(
    path: &TrackPath,
    profile: &SpeedProfile,
    dynamics: &AffineDynamics,
    lambda: f64,
    ridge: f64,
    start: StartCondition,
    exec: Exec,
) -> Result<QpProblem> {
    let t = path.len();
    if t < 3 {
        return input_err("the curvature problem needs at least three stations");
    }
    if profile.u_x.len() != t || profile.stations.len() != t {
        return input_err(format!("profile has {} stations, path has {t}", profile.u_x.len()));
    }
    if dynamics.steps.len() != t - 1 {
        return input_err(format!("dynamics has {} steps, path needs {}", dynamics.steps.len(), t - 1));
    }
    if !(lambda >= 0.0) || !(ridge >= 0.0) {
        return input_err("lambda and ridge must be non-negative");
    }
    let ds = path.segment_lengths();
    if let Some(k) = ds.iter().position(|d| !(*d > 0.0)) {
        return input_err(format!("non-positive station spacing at segment {k}"));
    }
    let n = (NX + 1) * t;
    let start = match start {
        StartCondition::Auto if path.closed => StartCondition::Periodic,
        StartCondition::Auto => StartCondition::Free,
        s => s,
    };

    let mut h_trip = Vec::with_capacity(6 * (t - 1));
    for k in 1..t {
        difference_triplets(x_index(k - 1, LateralState::PSI), x_index(k, LateralState::PSI), 1.0 / (ds[k - 1] * ds[k - 1]), &mut h_trip);
        if lambda > 0.0 {
            difference_triplets(delta_index(t, k - 1), delta_index(t, k), lambda, &mut h_trip);
        }
    }
    let h = CscMatrix::from_triplets(n, n, &h_trip);
    let mut p_trip: Vec<_> = h_trip.iter().map(|&(r, c, v)| (r, c, 2.0 * v)).collect();
    p_trip.extend((0..n).map(|i| (i, i, ridge)));
    let p = CscMatrix::from_triplets(n, n, &p_trip);

    // dynamics rows, assembled per step
    let per_step = exec.map_range(t - 1, |k| {
        let st = &dynamics.steps[k];
        let mut trip = Vec::with_capacity(NX * (NX + 2));
        for j in 0..NX {
            let row = NX * k + j;
            trip.push((row, x_index(k + 1, j), 1.0));
            for i in 0..NX {
                let a = st.a[(j, i)];
                if a != 0.0 {
                    trip.push((row, x_index(k, i), -a));
                }
            }
            if st.b[j] != 0.0 {
                trip.push((row, delta_index(t, k), -st.b[j]));
            }
        }
        trip
    });
    let mut a_trip: Vec<(usize, usize, f64)> = per_step.into_iter().flatten().collect();
    let mut l = Vec::new();
    for st in &dynamics.steps {
        l.extend(st.d.iter().copied());
    }
    let dynamics_rows = l.len();

    let mut turning = 0.0;
    let mut periodicity_rows = 0;
    let mut start_rows = 0;
    let push_eq = |a_trip: &mut Vec<_>, l: &mut Vec<f64>, cols: &[(usize, f64)], rhs: f64| {
        let row = l.len();
        for &(c, v) in cols {
            a_trip.push((row, c, v));
        }
        l.push(rhs);
    };
    match start {
        StartCondition::Periodic => {
            // exact discrete heading advance implied by the dynamics
            turning = dynamics.steps.iter().map(|s| s.d[LateralState::PSI] - s.d[LateralState::DPSI]).sum();
            for j in [LateralState::E, LateralState::R, LateralState::BETA] {
                push_eq(&mut a_trip, &mut l, &[(x_index(t - 1, j), 1.0), (x_index(0, j), -1.0)], 0.0);
            }
            let psi = LateralState::PSI;
            push_eq(&mut a_trip, &mut l, &[(x_index(t - 1, psi), 1.0), (x_index(0, psi), -1.0)], turning);
            push_eq(&mut a_trip, &mut l, &[(delta_index(t, t - 1), 1.0), (delta_index(t, 0), -1.0)], 0.0);
            periodicity_rows = 5;
        }
        StartCondition::Fixed(x0) => {
            let v = x0.to_vector();
            for j in 0..NX {
                push_eq(&mut a_trip, &mut l, &[(x_index(0, j), 1.0)], v[j]);
            }
            start_rows = NX;
        }
        StartCondition::Free | StartCondition::Auto => {}
    }
    let mut u = l.clone();
    for k in 0..t {
        let row = l.len();
        a_trip.push((row, x_index(k, LateralState::E), 1.0));
        l.push(path.w_out[k]);
        u.push(path.w_in[k]);
    }
    let a = CscMatrix::from_triplets(l.len(), n, &a_trip);
    let data = QpData { p, q: vec![0.0; n], a, l, u };
    Ok(QpProblem { t, data, h, ds, lambda, dynamics_rows, periodicity_rows, start_rows, turning })
}

/// Solves an assembled problem and unpacks the trajectory.
pub fn solve_qp(problem: &QpProblem, settings: &QpSettings) -> Result<QpSolution> {
    let started = Instant::now();
    let res = qp::solve(&problem.data, settings)?;
    let t = problem.t;
    let x: Vec<LateralState> = (0..t).map(|k| LateralState::from_slice(&res.x[x_index(k, 0)..x_index(k, NX)])).collect();
    let delta = res.x[delta_index(t, 0)..delta_index(t, t)].to_vec();
    let ax = problem.data.a.mul_vec(&res.x);
    let dynamics_residual =
        (0..problem.dynamics_rows).map(|i| (ax[i] - problem.data.l[i]).abs()).fold(0.0, f64::max);
    let first_bound = problem.equality_rows();
    let max_bound_violation = (first_bound..problem.data.m())
        .map(|i| (problem.data.l[i] - ax[i]).max(ax[i] - problem.data.u[i]).max(0.0))
        .fold(0.0, f64::max);
    let psi: Vec<f64> = x.iter().map(|s| s.psi).collect();
    let curvature = curvature_term(&psi, &problem.ds);
    let steering = steering_term(&delta);
    let objective = curvature + problem.lambda * steering;
    let diagnostics = QpDiagnostics {
        status: res.status,
        objective,
        curvature_term: curvature,
        steering_term: steering,
        kkt_residual: res.kkt_residual,
        residuals: res.residuals,
        dynamics_residual,
        max_bound_violation,
        iterations: res.iterations,
        polished: res.polished,
        rho_updates: res.rho_updates,
        variables: problem.data.n(),
        constraints: problem.data.m(),
        clamped_tires: 0,
        unstable_steps: 0,
    };
    Ok(QpSolution {
        delta,
        x,
        objective,
        kkt_residual: res.kkt_residual,
        iterations: res.iterations,
        status: res.status,
        diagnostics,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Linearizes, discretizes, assembles and solves one curvature step.
pub fn min_curvature_step(
    path: &TrackPath,
    profile: &SpeedProfile,
    params: &VehicleParams,
    config: &CurvatureConfig,
) -> Result<QpSolution> {
    let started = Instant::now();
    let dynamics = build_dynamics(path, &profile.u_x, params, &config.dynamics)?;
    let problem =
        build_qp(path, profile, &dynamics, config.lambda, config.ridge, config.start, config.dynamics.exec)?;
    let mut sol = solve_qp(&problem, &config.qp)?;
    sol.diagnostics.clamped_tires = dynamics.clamped;
    sol.diagnostics.unstable_steps = dynamics.unstable;
    sol.wall_time = started.elapsed().as_secs_f64();
    if sol.status == QpStatus::Infeasible {
        return Err(Error::Solver("curvature problem is infeasible".into()));
    }
    Ok(sol)
}
