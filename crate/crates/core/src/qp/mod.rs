//! Sparse convex quadratic programming.
//!
//! Solves `min 1/2 x'Px + q'x  s.t.  l <= Ax <= u` with an ADMM
//! operator-splitting scheme over the quasi-definite KKT system, factorized
//! once by sparse `L D L^T` and refactorized only when the penalty changes.
//! Converged iterates are refined by solving the equality-constrained
//! problem on the guessed active set.

mod csc;
mod ipm;
mod ldl;
mod order;

pub use csc::CscMatrix;
pub use ldl::{Factor, OrderedLdl, Symbolic};
pub use order::{invert, permute_symmetric_upper, reverse_cuthill_mckee};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use csc::inf_norm;

/// Problem data. `p` holds the upper triangle of the symmetric cost matrix.
#[derive(Debug, Clone)]
pub struct QpData {
    pub p: CscMatrix,
    pub q: Vec<f64>,
    pub a: CscMatrix,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

impl QpData {
    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.l.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        if self.p.nrows != n || self.p.ncols != n {
            return Err(Error::Input(format!("cost matrix is {}x{}, expected {n}x{n}", self.p.nrows, self.p.ncols)));
        }
        if self.p.triplets().iter().any(|&(r, c, _)| r > c) {
            return Err(Error::Input("cost matrix must be given as its upper triangle".into()));
        }
        if self.a.ncols != n || self.a.nrows != m || self.u.len() != m {
            return Err(Error::Input("constraint dimensions do not match".into()));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.p.values) || !finite(&self.q) || !finite(&self.a.values) {
            return Err(Error::Input("problem data must be finite".into()));
        }
        if self.l.iter().chain(&self.u).any(|x| x.is_nan()) {
            return Err(Error::Input("constraint bounds must not be NaN".into()));
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let px = self.p.sym_upper_mul_vec(x);
        x.iter().zip(&px).map(|(a, b)| 0.5 * a * b).sum::<f64>() + x.iter().zip(&self.q).map(|(a, b)| a * b).sum::<f64>()
    }

    /// First-order optimality residuals of `(x, y)`; `y_i > 0` marks an
    /// active upper bound and `y_i < 0` an active lower bound.
    pub fn kkt_residuals(&self, x: &[f64], y: &[f64]) -> KktResiduals {
        let ax = self.a.mul_vec(x);
        let mut grad = self.p.sym_upper_mul_vec(x);
        let aty = self.a.tr_mul_vec(y);
        for i in 0..grad.len() {
            grad[i] += self.q[i] + aty[i];
        }
        let mut primal: f64 = 0.0;
        let mut comp: f64 = 0.0;
        for i in 0..ax.len() {
            primal = primal.max(self.l[i] - ax[i]).max(ax[i] - self.u[i]);
            let up = y[i].max(0.0);
            let lo = (-y[i]).max(0.0);
            let cu = if self.u[i].is_finite() { up * (self.u[i] - ax[i]).abs() } else { up };
            let cl = if self.l[i].is_finite() { lo * (ax[i] - self.l[i]).abs() } else { lo };
            comp = comp.max(cu).max(cl);
        }
        KktResiduals { primal, stationarity: inf_norm(&grad), complementarity: comp }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub stationarity: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.stationarity).max(self.complementarity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

/// Algorithm used by [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpMethod {
    /// Operator splitting with a factorization reused across iterations.
    Admm,
    /// Primal-dual interior point; one refactorization per iteration.
    #[default]
    InteriorPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub method: QpMethod,
    /// Required KKT residual for an optimal status.
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub scaling_iters: usize,
    pub adaptive_rho: bool,
    pub polish: bool,
    pub check_interval: usize,
    /// Initial ADMM stopping tolerance before polishing is attempted.
    pub admm_eps: f64,
    pub polish_delta: f64,
    pub refine_iters: usize,
    pub infeasibility_eps: f64,
    /// Iteration cap for the interior-point method (also bounded by `max_iter`).
    pub ipm_max_iter: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            method: QpMethod::default(),
            tol: 1e-6,
            max_iter: 20_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            scaling_iters: 10,
            adaptive_rho: true,
            polish: true,
            check_interval: 25,
            admm_eps: 1e-4,
            polish_delta: 1e-7,
            refine_iters: 10,
            infeasibility_eps: 1e-6,
            ipm_max_iter: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub status: QpStatus,
    pub objective: f64,
    pub residuals: KktResiduals,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub polished: bool,
    pub rho_updates: usize,
}

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;

fn limit_norm(v: f64) -> f64 {
    if v < 1e-4 {
        1.0
    } else {
        v.min(1e4)
    }
}

struct Scaled {
    p: CscMatrix,
    q: Vec<f64>,
    a: CscMatrix,
    l: Vec<f64>,
    u: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
    c: f64,
}

fn ruiz(data: &QpData, iters: usize) -> Scaled {
    let (n, m) = (data.n(), data.m());
    let mut p = data.p.clone();
    let mut a = data.a.clone();
    let mut q = data.q.clone();
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; m];
    let p_col_norms = |p: &CscMatrix| {
        let mut nrm = vec![0.0f64; n];
        for (r, c, v) in p.triplets() {
            nrm[c] = nrm[c].max(v.abs());
            nrm[r] = nrm[r].max(v.abs());
        }
        nrm
    };
    for _ in 0..iters {
        let mut col = p_col_norms(&p);
        let mut row = vec![0.0f64; m];
        for (r, c, v) in a.triplets() {
            col[c] = col[c].max(v.abs());
            row[r] = row[r].max(v.abs());
        }
        let dt: Vec<f64> = col.iter().map(|v| 1.0 / limit_norm(*v).sqrt()).collect();
        let et: Vec<f64> = row.iter().map(|v| 1.0 / limit_norm(*v).sqrt()).collect();
        p.scale(&dt, &dt);
        a.scale(&et, &dt);
        for j in 0..n {
            q[j] *= dt[j];
            d[j] *= dt[j];
        }
        for i in 0..m {
            e[i] *= et[i];
        }
    }
    let col = p_col_norms(&p);
    let mean = if n > 0 { col.iter().sum::<f64>() / n as f64 } else { 1.0 };
    let c = 1.0 / limit_norm(limit_norm(mean).max(inf_norm(&q)));
    for v in &mut p.values {
        *v *= c;
    }
    for v in &mut q {
        *v *= c;
    }
    let l = data.l.iter().zip(&e).map(|(b, s)| b * s).collect();
    let u = data.u.iter().zip(&e).map(|(b, s)| b * s).collect();
    Scaled { p, q, a, l, u, d, e, c }
}

fn rho_vector(l: &[f64], u: &[f64], rho: f64) -> Vec<f64> {
    l.iter()
        .zip(u)
        .map(|(lo, hi)| {
            if lo.is_infinite() && hi.is_infinite() {
                RHO_MIN
            } else if hi - lo < 1e-12 * (1.0 + lo.abs()) {
                RHO_EQ_FACTOR * rho
            } else {
                rho
            }
        })
        .collect()
}

fn kkt_matrix(p: &CscMatrix, a: &CscMatrix, diag_x: f64, diag_y: &[f64]) -> CscMatrix {
    let n = p.ncols;
    let m = a.nrows;
    let mut t = Vec::with_capacity(p.nnz() + a.nnz() + n + m);
    t.extend(p.triplets());
    t.extend((0..n).map(|i| (i, i, diag_x)));
    t.extend(a.triplets().into_iter().map(|(r, c, v)| (c, n + r, v)));
    t.extend(diag_y.iter().enumerate().map(|(i, v)| (n + i, n + i, *v)));
    CscMatrix::from_triplets(n + m, n + m, &t)
}

struct Candidate {
    x: Vec<f64>,
    y: Vec<f64>,
    residuals: KktResiduals,
    polished: bool,
}

fn unscale(s: &Scaled, xs: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let x = xs.iter().zip(&s.d).map(|(v, d)| v * d).collect();
    let y = ys.iter().zip(&s.e).map(|(v, e)| v * e / s.c).collect();
    (x, y)
}

/// Guess of the active constraints from an ADMM iterate: -1 at the lower
/// bound, 1 at the upper bound, 2 for equalities, 0 inactive.
fn active_set(s: &Scaled, zs: &[f64], ys: &[f64]) -> Vec<i8> {
    (0..zs.len())
        .map(|i| {
            if s.u[i] - s.l[i] < 1e-12 * (1.0 + s.l[i].abs()) {
                2
            } else if (zs[i] - s.l[i] < -ys[i] || zs[i] <= s.l[i]) && s.l[i].is_finite() {
                -1
            } else if (s.u[i] - zs[i] < ys[i] || zs[i] >= s.u[i]) && s.u[i].is_finite() {
                1
            } else {
                0
            }
        })
        .collect()
}

/// Solves the equality-constrained problem on a guessed active set.
fn polish(data: &QpData, s: &Scaled, active: &[i8], settings: &QpSettings) -> Option<Candidate> {
    let n = data.n();
    let mut rows = Vec::new();
    let mut rhs_b = Vec::new();
    for (i, &a) in active.iter().enumerate() {
        match a {
            -1 | 2 => {
                rows.push(i);
                rhs_b.push(s.l[i]);
            }
            1 => {
                rows.push(i);
                rhs_b.push(s.u[i]);
            }
            _ => {}
        }
    }
    let mut row_map = vec![usize::MAX; data.m()];
    for (k, &i) in rows.iter().enumerate() {
        row_map[i] = k;
    }
    let red: Vec<_> =
        s.a.triplets().into_iter().filter(|&(r, _, _)| row_map[r] != usize::MAX).map(|(r, c, v)| (row_map[r], c, v)).collect();
    let a_red = CscMatrix::from_triplets(rows.len(), n, &red);
    let delta = settings.polish_delta;
    let kkt = kkt_matrix(&s.p, &a_red, delta, &vec![-delta; rows.len()]);
    let ldl = OrderedLdl::new(&kkt).ok()?;
    let mut rhs: Vec<f64> = s.q.iter().map(|v| -v).collect();
    rhs.extend_from_slice(&rhs_b);
    let mut sol = ldl.solve(&rhs);
    for _ in 0..settings.refine_iters {
        // residual against the unregularized system
        let (xp, yp) = sol.split_at(n);
        let mut r = s.p.sym_upper_mul_vec(xp);
        let aty = a_red.tr_mul_vec(yp);
        for j in 0..n {
            r[j] = rhs[j] - r[j] - aty[j];
        }
        let ax = a_red.mul_vec(xp);
        r.extend(ax.iter().zip(&rhs_b).map(|(a, b)| b - a));
        if inf_norm(&r) < 1e-14 {
            break;
        }
        let dsol = ldl.solve(&r);
        for (v, dv) in sol.iter_mut().zip(&dsol) {
            *v += dv;
        }
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let xs = &sol[..n];
    let mut ys_full = vec![0.0; data.m()];
    for (k, &i) in rows.iter().enumerate() {
        ys_full[i] = sol[n + k];
    }
    let (x, y) = unscale(s, xs, &ys_full);
    let residuals = data.kkt_residuals(&x, &y);
    Some(Candidate { x, y, residuals, polished: true })
}

fn finish(data: &QpData, c: Candidate, status: QpStatus, iterations: usize, rho_updates: usize) -> QpResult {
    QpResult {
        objective: data.objective(&c.x),
        kkt_residual: c.residuals.max(),
        residuals: c.residuals,
        x: c.x,
        y: c.y,
        status,
        iterations,
        polished: c.polished,
        rho_updates,
    }
}

fn infeasible_result(data: &QpData, iterations: usize, rho_updates: usize) -> QpResult {
    let x = vec![0.0; data.n()];
    let y = vec![0.0; data.m()];
    let residuals = data.kkt_residuals(&x, &y);
    QpResult {
        objective: f64::NAN,
        kkt_residual: residuals.max(),
        residuals,
        x,
        y,
        status: QpStatus::Infeasible,
        iterations,
        polished: false,
        rho_updates,
    }
}

/// Primal infeasibility certificate test on a dual step `dy` (scaled).
fn certifies_infeasible(s: &Scaled, dy: &[f64], eps: f64) -> bool {
    let dyu: Vec<f64> = dy.iter().zip(&s.e).map(|(v, e)| v * e).collect();
    let norm = inf_norm(&dyu);
    if norm < 1e-12 {
        return false;
    }
    let atdy = s.a.tr_mul_vec(dy);
    let atdy_u = atdy.iter().zip(&s.d).map(|(v, d)| v / d).fold(0.0f64, |m, v| m.max(v.abs()));
    if atdy_u > eps * norm {
        return false;
    }
    let mut support = 0.0;
    for i in 0..dy.len() {
        let (lo, hi) = (s.l[i] / s.e[i], s.u[i] / s.e[i]);
        if dyu[i] > 0.0 {
            if hi.is_infinite() {
                return false;
            }
            support += hi * dyu[i];
        } else if dyu[i] < 0.0 {
            if lo.is_infinite() {
                return false;
            }
            support += lo * dyu[i];
        }
    }
    support < -eps * norm
}

/// Solves the QP. Inconsistent bounds (`l > u`) give an infeasible status
/// without iterating.
pub fn solve(data: &QpData, settings: &QpSettings) -> Result<QpResult> {
    data.validate()?;
    let (n, m) = (data.n(), data.m());
    if data.l.iter().zip(&data.u).any(|(l, u)| l > u) {
        return Ok(infeasible_result(data, 0, 0));
    }
    if settings.method == QpMethod::InteriorPoint {
        return ipm::solve_ipm(data, settings);
    }
    let s = ruiz(data, settings.scaling_iters);
    let mut rho = settings.rho;
    let mut rho_vec = rho_vector(&s.l, &s.u, rho);
    let diag_y = |rv: &[f64]| rv.iter().map(|r| -1.0 / r).collect::<Vec<_>>();
    let mut kkt = kkt_matrix(&s.p, &s.a, settings.sigma, &diag_y(&rho_vec));
    let mut ldl = OrderedLdl::new(&kkt)?;
    let mut x = vec![0.0; n];
    let mut z = vec![0.0f64; m];
    let mut y = vec![0.0; m];
    for i in 0..m {
        z[i] = z[i].clamp(s.l[i], s.u[i]);
    }
    let mut eps = settings.admm_eps;
    let mut rho_updates = 0;
    let mut best: Option<Candidate> = None;
    let mut armed = false;
    let mut last_polished: Option<Vec<i8>> = None;
    let mut rhs = vec![0.0; n + m];
    let (alpha, sigma) = (settings.alpha, settings.sigma);
    let mut iter = 0;
    while iter < settings.max_iter {
        iter += 1;
        for j in 0..n {
            rhs[j] = sigma * x[j] - s.q[j];
        }
        for i in 0..m {
            rhs[n + i] = z[i] - y[i] / rho_vec[i];
        }
        let sol = ldl.solve(&rhs);
        let y_prev = y.clone();
        for j in 0..n {
            x[j] = alpha * sol[j] + (1.0 - alpha) * x[j];
        }
        for i in 0..m {
            let zt = z[i] + (sol[n + i] - y[i]) / rho_vec[i];
            let zr = alpha * zt + (1.0 - alpha) * z[i];
            let zn = (zr + y[i] / rho_vec[i]).clamp(s.l[i], s.u[i]);
            y[i] += rho_vec[i] * (zr - zn);
            z[i] = zn;
        }
        if iter % settings.check_interval != 0 && iter != settings.max_iter {
            continue;
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Solver("ADMM iterates diverged".into()));
        }
        let dy: Vec<f64> = y.iter().zip(&y_prev).map(|(a, b)| a - b).collect();
        if certifies_infeasible(&s, &dy, settings.infeasibility_eps) {
            return Ok(infeasible_result(data, iter, rho_updates));
        }
        // residuals in original units
        let ax = s.a.mul_vec(&x);
        let px = s.p.sym_upper_mul_vec(&x);
        let aty = s.a.tr_mul_vec(&y);
        let unrow = |v: &[f64]| v.iter().zip(&s.e).fold(0.0f64, |acc, (a, e)| acc.max((a / e).abs()));
        let uncol = |v: &[f64]| v.iter().zip(&s.d).fold(0.0f64, |acc, (a, d)| acc.max((a / d).abs())) / s.c;
        let r_prim = unrow(&ax.iter().zip(&z).map(|(a, b)| a - b).collect::<Vec<_>>());
        let r_dual = uncol(&(0..n).map(|j| px[j] + s.q[j] + aty[j]).collect::<Vec<_>>());
        let prim_scale = unrow(&ax).max(unrow(&z));
        let dual_scale = uncol(&px).max(uncol(&aty)).max(uncol(&s.q));
        let reached = r_prim <= eps * (1.0 + prim_scale) && r_dual <= eps * (1.0 + dual_scale);
        armed |= reached;
        // once close, polish whenever the active-set guess moves
        let active = if settings.polish && armed { Some(active_set(&s, &z, &y)) } else { None };
        let new_guess = active.is_some() && active != last_polished;
        if reached || new_guess {
            let (xu, yu) = unscale(&s, &x, &y);
            let residuals = data.kkt_residuals(&xu, &yu);
            let mut cand = Candidate { x: xu, y: yu, residuals, polished: false };
            if new_guess {
                let act = active.unwrap();
                if let Some(p) = polish(data, &s, &act, settings) {
                    if p.residuals.max() < cand.residuals.max() {
                        cand = p;
                    }
                }
                last_polished = Some(act);
            }
            if cand.residuals.max() <= settings.tol {
                return Ok(finish(data, cand, QpStatus::Optimal, iter, rho_updates));
            }
            if best.as_ref().is_none_or(|b| cand.residuals.max() < b.residuals.max()) {
                best = Some(cand);
            }
            if reached {
                eps = (eps * 0.1).max(1e-13);
            }
        }
        if settings.adaptive_rho {
            let pn = inf_norm(&ax).max(inf_norm(&z)).max(1e-30);
            let dn = inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(&s.q)).max(1e-30);
            let ps = inf_norm(&ax.iter().zip(&z).map(|(a, b)| a - b).collect::<Vec<_>>()) / pn;
            let ds = inf_norm(&(0..n).map(|j| px[j] + s.q[j] + aty[j]).collect::<Vec<_>>()) / dn;
            if ps > 0.0 && ds > 0.0 {
                let new_rho = (rho * (ps / ds).sqrt()).clamp(RHO_MIN, RHO_MAX);
                if new_rho > 5.0 * rho || new_rho < 0.2 * rho {
                    rho = new_rho;
                    rho_vec = rho_vector(&s.l, &s.u, rho);
                    kkt = kkt_matrix(&s.p, &s.a, sigma, &diag_y(&rho_vec));
                    ldl.refactor(&kkt)?;
                    rho_updates += 1;
                }
            }
        }
    }
    let (xu, yu) = unscale(&s, &x, &y);
    let residuals = data.kkt_residuals(&xu, &yu);
    let mut cand = Candidate { x: xu, y: yu, residuals, polished: false };
    if settings.polish {
        if let Some(p) = polish(data, &s, &active_set(&s, &z, &y), settings) {
            if p.residuals.max() < cand.residuals.max() {
                cand = p;
            }
        }
    }
    if let Some(b) = best {
        if b.residuals.max() < cand.residuals.max() {
            cand = b;
        }
    }
    let status = if cand.residuals.max() <= settings.tol { QpStatus::Optimal } else { QpStatus::MaxIter };
    Ok(finish(data, cand, status, iter, rho_updates))
}
