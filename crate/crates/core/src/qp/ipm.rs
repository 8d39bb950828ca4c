//! Primal-dual interior-point method with Mehrotra predictor-corrector steps.
//!
//! Works on the same Ruiz-scaled problem and quasi-definite KKT pattern as
//! the ADMM solver. Each iteration refactors the KKT matrix with the current
//! barrier weights on the inequality rows; the pattern never changes, so the
//! ordering and symbolic analysis are done once.

use super::csc::inf_norm;
use super::{certifies_infeasible, finish, infeasible_result, kkt_matrix, polish, ruiz, unscale, Candidate, OrderedLdl, QpData, QpResult, QpSettings, QpStatus, Scaled};
use crate::error::{Error, Result};

/// Fraction of the distance to the boundary taken by each step.
const STEP_FRACTION: f64 = 0.995;
/// Static regularization of the KKT matrix, removed by iterative refinement.
const REG: f64 = 1e-9;
const REFINE_STEPS: usize = 4;
/// Polishing is attempted once the residual is below this (or `1e3 tol`).
const POLISH_START: f64 = 1e-4;
/// Below this mean complementarity the barrier system is too ill-conditioned
/// to make further progress; the best iterate so far is returned.
const MU_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, PartialEq)]
enum Row {
    Equality,
    Free,
    Lower,
    Upper,
    Both,
}

impl Row {
    fn has_lower(self) -> bool {
        matches!(self, Row::Lower | Row::Both)
    }

    fn has_upper(self) -> bool {
        matches!(self, Row::Upper | Row::Both)
    }
}

fn classify(s: &Scaled) -> Vec<Row> {
    s.l.iter()
        .zip(&s.u)
        .map(|(&lo, &hi)| {
            if hi - lo < 1e-12 * (1.0 + lo.abs()) {
                Row::Equality
            } else {
                match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => Row::Both,
                    (true, false) => Row::Lower,
                    (false, true) => Row::Upper,
                    (false, false) => Row::Free,
                }
            }
        })
        .collect()
}

struct Kkt<'a> {
    s: &'a Scaled,
    ldl: OrderedLdl,
    /// Diagonal of the constraint block without regularization.
    diag_y: Vec<f64>,
}

impl Kkt<'_> {
    /// Solves the unregularized system by refining the regularized factor.
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.s.q.len();
        let mut sol = self.ldl.solve(rhs);
        for _ in 0..REFINE_STEPS {
            let (x, v) = sol.split_at(n);
            let mut r = self.s.p.sym_upper_mul_vec(x);
            let atv = self.s.a.tr_mul_vec(v);
            for j in 0..n {
                r[j] = rhs[j] - r[j] - atv[j];
            }
            let ax = self.s.a.mul_vec(x);
            r.extend((0..v.len()).map(|i| rhs[n + i] - ax[i] - self.diag_y[i] * v[i]));
            if inf_norm(&r) <= 1e-14 * (1.0 + inf_norm(rhs)) {
                break;
            }
            let d = self.ldl.solve(&r);
            for (a, b) in sol.iter_mut().zip(&d) {
                *a += b;
            }
        }
        sol
    }
}

struct Iterate {
    x: Vec<f64>,
    /// Multipliers of the equality rows (zero elsewhere).
    y: Vec<f64>,
    sl: Vec<f64>,
    zl: Vec<f64>,
    su: Vec<f64>,
    zu: Vec<f64>,
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dsl: Vec<f64>,
    dzl: Vec<f64>,
    dsu: Vec<f64>,
    dzu: Vec<f64>,
}

/// Residuals of the scaled KKT system at an iterate.
struct Residuals {
    rd: Vec<f64>,
    /// `A x - l - s_l` on lower-bounded rows, `A x - b` on equality rows.
    rl: Vec<f64>,
    ru: Vec<f64>,
}

fn residuals(s: &Scaled, rows: &[Row], it: &Iterate) -> Residuals {
    let m = rows.len();
    let ax = s.a.mul_vec(&it.x);
    let mut w = vec![0.0; m];
    for i in 0..m {
        w[i] = match rows[i] {
            Row::Equality => -it.y[i],
            _ => it.zu[i] - it.zl[i],
        };
    }
    let mut rd = s.p.sym_upper_mul_vec(&it.x);
    let atw = s.a.tr_mul_vec(&w);
    for j in 0..rd.len() {
        rd[j] += s.q[j] + atw[j];
    }
    let mut rl = vec![0.0; m];
    let mut ru = vec![0.0; m];
    for i in 0..m {
        match rows[i] {
            Row::Equality => rl[i] = ax[i] - s.l[i],
            r => {
                if r.has_lower() {
                    rl[i] = ax[i] - s.l[i] - it.sl[i];
                }
                if r.has_upper() {
                    ru[i] = ax[i] + it.su[i] - s.u[i];
                }
            }
        }
    }
    Residuals { rd, rl, ru }
}

/// Newton direction for complementarity targets `cl = s_l z_l - target`
/// (and likewise `cu`).
fn direction(kkt: &Kkt, rows: &[Row], it: &Iterate, res: &Residuals, cl: &[f64], cu: &[f64]) -> Direction {
    let n = it.x.len();
    let m = rows.len();
    let mut rhs = vec![0.0; n + m];
    for j in 0..n {
        rhs[j] = -res.rd[j];
    }
    for i in 0..m {
        rhs[n + i] = match rows[i] {
            Row::Equality => -res.rl[i],
            Row::Free => 0.0,
            r => {
                // g: inequality multiplier change not explained by A dx
                let mut g = 0.0;
                let mut dsum = 0.0;
                if r.has_lower() {
                    g += -cl[i] / it.sl[i] - it.zl[i] / it.sl[i] * res.rl[i];
                    dsum += it.zl[i] / it.sl[i];
                }
                if r.has_upper() {
                    g += cu[i] / it.su[i] - it.zu[i] / it.su[i] * res.ru[i];
                    dsum += it.zu[i] / it.su[i];
                }
                g / dsum
            }
        };
    }
    let sol = kkt.solve(&rhs);
    let dx = sol[..n].to_vec();
    let adx = kkt.s.a.mul_vec(&dx);
    let mut d = Direction {
        dx,
        dy: vec![0.0; m],
        dsl: vec![0.0; m],
        dzl: vec![0.0; m],
        dsu: vec![0.0; m],
        dzu: vec![0.0; m],
    };
    for i in 0..m {
        let r = rows[i];
        if r == Row::Equality {
            d.dy[i] = -sol[n + i];
            continue;
        }
        if r.has_lower() {
            d.dsl[i] = adx[i] + res.rl[i];
            d.dzl[i] = (-cl[i] - it.zl[i] * d.dsl[i]) / it.sl[i];
        }
        if r.has_upper() {
            d.dsu[i] = -adx[i] - res.ru[i];
            d.dzu[i] = (-cu[i] - it.zu[i] * d.dsu[i]) / it.su[i];
        }
    }
    d
}

fn max_step(v: &[f64], dv: &[f64], rows: &[Row], side: fn(Row) -> bool) -> f64 {
    let mut a: f64 = 1.0;
    for i in 0..v.len() {
        if side(rows[i]) && dv[i] < 0.0 {
            a = a.min(-v[i] / dv[i]);
        }
    }
    a
}

fn step_lengths(it: &Iterate, d: &Direction, rows: &[Row]) -> (f64, f64) {
    let primal = max_step(&it.sl, &d.dsl, rows, Row::has_lower).min(max_step(&it.su, &d.dsu, rows, Row::has_upper));
    let dual = max_step(&it.zl, &d.dzl, rows, Row::has_lower).min(max_step(&it.zu, &d.dzu, rows, Row::has_upper));
    (primal, dual)
}

fn mean_complementarity(it: &Iterate, rows: &[Row], alpha: Option<(f64, f64, &Direction)>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, r) in rows.iter().enumerate() {
        let (ap, ad, d) = match alpha {
            Some((p, q, d)) => (p, q, Some(d)),
            None => (0.0, 0.0, None),
        };
        if r.has_lower() {
            let (ds, dz) = d.map_or((0.0, 0.0), |d| (d.dsl[i], d.dzl[i]));
            sum += (it.sl[i] + ap * ds) * (it.zl[i] + ad * dz);
            count += 1;
        }
        if r.has_upper() {
            let (ds, dz) = d.map_or((0.0, 0.0), |d| (d.dsu[i], d.dzu[i]));
            sum += (it.su[i] + ap * ds) * (it.zu[i] + ad * dz);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Barrier weights `z/s` summed per row, as the constraint-block diagonal.
fn barrier_diag(it: &Iterate, rows: &[Row]) -> Vec<f64> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| match r {
            Row::Equality => 0.0,
            Row::Free => -1e12,
            _ => {
                let mut dsum = 0.0;
                if r.has_lower() {
                    dsum += it.zl[i] / it.sl[i];
                }
                if r.has_upper() {
                    dsum += it.zu[i] / it.su[i];
                }
                -1.0 / dsum
            }
        })
        .collect()
}

fn regularized(diag_y: &[f64]) -> Vec<f64> {
    diag_y.iter().map(|d| d - REG).collect()
}

/// Constraint multipliers in the `l <= Ax <= u` sign convention.
fn multipliers(rows: &[Row], it: &Iterate) -> Vec<f64> {
    (0..rows.len())
        .map(|i| match rows[i] {
            Row::Equality => -it.y[i],
            _ => it.zu[i] - it.zl[i],
        })
        .collect()
}

fn to_candidate(data: &QpData, s: &Scaled, rows: &[Row], it: &Iterate) -> Candidate {
    let (x, y) = unscale(s, &it.x, &multipliers(rows, it));
    let residuals = data.kkt_residuals(&x, &y);
    Candidate { x, y, residuals, polished: false }
}

/// Active-set guess for polishing: a bound is active when its multiplier
/// exceeds its slack.
fn active_guess(rows: &[Row], it: &Iterate) -> Vec<i8> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| match r {
            Row::Equality => 2,
            _ if r.has_lower() && it.zl[i] > it.sl[i] => -1,
            _ if r.has_upper() && it.zu[i] > it.su[i] => 1,
            _ => 0,
        })
        .collect()
}

pub(super) fn solve_ipm(data: &QpData, settings: &QpSettings) -> Result<QpResult> {
    let (n, m) = (data.n(), data.m());
    let s = ruiz(data, settings.scaling_iters);
    let rows = classify(&s);

    // start from the regularized least-squares point with unit barrier weights
    let init_diag: Vec<f64> = rows.iter().map(|r| if *r == Row::Equality { 0.0 } else { -1.0 }).collect();
    let kkt_m = kkt_matrix(&s.p, &s.a, REG, &regularized(&init_diag));
    let ldl = OrderedLdl::new(&kkt_m)?;
    let mut kkt = Kkt { s: &s, ldl, diag_y: init_diag };
    let mut rhs = vec![0.0; n + m];
    for j in 0..n {
        rhs[j] = -s.q[j];
    }
    for i in 0..m {
        rhs[n + i] = match rows[i] {
            Row::Equality => s.l[i],
            Row::Free => 0.0,
            _ => 0.0f64.clamp(s.l[i], s.u[i]),
        };
    }
    let sol = kkt.solve(&rhs);
    let x = sol[..n].to_vec();
    let ax = s.a.mul_vec(&x);
    let mut it = Iterate {
        x,
        y: (0..m).map(|i| if rows[i] == Row::Equality { -sol[n + i] } else { 0.0 }).collect(),
        sl: vec![1.0; m],
        zl: vec![1.0; m],
        su: vec![1.0; m],
        zu: vec![1.0; m],
    };
    for i in 0..m {
        if rows[i].has_lower() {
            it.sl[i] = (ax[i] - s.l[i]).max(1.0);
        }
        if rows[i].has_upper() {
            it.su[i] = (s.u[i] - ax[i]).max(1.0);
        }
    }

    let mut best: Option<Candidate> = None;
    let mut polished_at: Option<Vec<i8>> = None;
    let max_iter = settings.max_iter.min(settings.ipm_max_iter);
    let mut iter = 0;
    while iter < max_iter {
        iter += 1;
        let cand = to_candidate(data, &s, &rows, &it);
        let done = cand.residuals.max() <= settings.tol;
        let small = cand.residuals.max() <= POLISH_START.max(1e3 * settings.tol);
        if best.as_ref().is_none_or(|b| cand.residuals.max() < b.residuals.max()) {
            best = Some(cand);
        }
        if done {
            break;
        }
        // diverging multipliers point along a Farkas certificate
        if certifies_infeasible(&s, &multipliers(&rows, &it), settings.infeasibility_eps) {
            return Ok(infeasible_result(data, iter, 0));
        }
        if settings.polish && small {
            let guess = active_guess(&rows, &it);
            if polished_at.as_ref() != Some(&guess) {
                if let Some(p) = polish(data, &s, &guess, settings) {
                    let ok = p.residuals.max() <= settings.tol;
                    if best.as_ref().is_none_or(|b| p.residuals.max() < b.residuals.max()) {
                        best = Some(p);
                    }
                    if ok {
                        break;
                    }
                }
                polished_at = Some(guess);
            }
        }

        let mu = mean_complementarity(&it, &rows, None);
        if mu < MU_FLOOR && best.as_ref().is_some_and(|b| b.residuals.max() < POLISH_START) {
            break;
        }
        let res = residuals(&s, &rows, &it);
        kkt.diag_y = barrier_diag(&it, &rows);
        kkt.ldl.refactor(&kkt_matrix(&s.p, &s.a, REG, &regularized(&kkt.diag_y)))?;

        // predictor
        let cl: Vec<f64> = (0..m).map(|i| it.sl[i] * it.zl[i]).collect();
        let cu: Vec<f64> = (0..m).map(|i| it.su[i] * it.zu[i]).collect();
        let aff = direction(&kkt, &rows, &it, &res, &cl, &cu);
        let (ap, ad) = step_lengths(&it, &aff, &rows);
        let mu_aff = mean_complementarity(&it, &rows, Some((ap, ad, &aff)));
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        // corrector
        let target = sigma * mu;
        let cl: Vec<f64> = (0..m).map(|i| it.sl[i] * it.zl[i] + aff.dsl[i] * aff.dzl[i] - target).collect();
        let cu: Vec<f64> = (0..m).map(|i| it.su[i] * it.zu[i] + aff.dsu[i] * aff.dzu[i] - target).collect();
        let d = direction(&kkt, &rows, &it, &res, &cl, &cu);
        let (ap, ad) = step_lengths(&it, &d, &rows);
        // one step length keeps the quadratic stationarity residual consistent
        let alpha = (STEP_FRACTION * ap.min(ad)).min(1.0);
        let dw: Vec<f64> = (0..m)
            .map(|i| match rows[i] {
                Row::Equality => -d.dy[i],
                _ => d.dzu[i] - d.dzl[i],
            })
            .collect();
        if certifies_infeasible(&s, &dw, settings.infeasibility_eps) {
            return Ok(infeasible_result(data, iter, 0));
        }
        for j in 0..n {
            it.x[j] += alpha * d.dx[j];
        }
        for i in 0..m {
            it.y[i] += alpha * d.dy[i];
            if rows[i].has_lower() {
                it.sl[i] += alpha * d.dsl[i];
                it.zl[i] += alpha * d.dzl[i];
            }
            if rows[i].has_upper() {
                it.su[i] += alpha * d.dsu[i];
                it.zu[i] += alpha * d.dzu[i];
            }
        }
        if it.x.iter().chain(&it.y).any(|v| !v.is_finite()) {
            return Err(Error::Solver("interior-point iterates diverged".into()));
        }
    }
    let best = best.expect("at least one iterate is evaluated");
    let status = if best.residuals.max() <= settings.tol { QpStatus::Optimal } else { QpStatus::MaxIter };
    Ok(finish(data, best, status, iter, 0))
}
