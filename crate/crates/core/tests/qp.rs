use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use racing_line::qp::{solve, CscMatrix, QpData, QpMethod, QpSettings, QpStatus};

const METHODS: [QpMethod; 2] = [QpMethod::Admm, QpMethod::InteriorPoint];

/// Dense strictly convex box QP: `P = M'M + alpha I`.
struct BoxQp {
    p: Vec<Vec<f64>>,
    q: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn random_box_qp(n: usize, seed: u64) -> BoxQp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = n + 5;
    let m: Vec<Vec<f64>> = (0..rows).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let alpha = rng.random_range(0.1..1.0);
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            p[i][j] = (0..rows).map(|r| m[r][i] * m[r][j]).sum::<f64>() + if i == j { alpha } else { 0.0 };
        }
    }
    let q = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
    let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.0)).collect();
    let hi = lo.iter().map(|l| l + rng.random_range(0.2..2.0)).collect();
    BoxQp { p, q, lo, hi }
}

impl BoxQp {
    fn data(&self) -> QpData {
        let n = self.q.len();
        let mut pt = Vec::new();
        for i in 0..n {
            for j in i..n {
                pt.push((i, j, self.p[i][j]));
            }
        }
        let at: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        QpData {
            p: CscMatrix::from_triplets(n, n, &pt),
            q: self.q.clone(),
            a: CscMatrix::from_triplets(n, n, &at),
            l: self.lo.clone(),
            u: self.hi.clone(),
        }
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len()).map(|i| self.p[i].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.q[i]).collect()
    }

    /// Projected gradient with step 1/L, L bounded by the Frobenius norm.
    fn projected_gradient(&self) -> Vec<f64> {
        let n = self.q.len();
        let lip = self.p.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        let mut x: Vec<f64> = (0..n).map(|i| 0.5 * (self.lo[i] + self.hi[i])).collect();
        for _ in 0..200_000 {
            let g = self.grad(&x);
            let mut moved: f64 = 0.0;
            for i in 0..n {
                let xi = (x[i] - g[i] / lip).clamp(self.lo[i], self.hi[i]);
                moved = moved.max((xi - x[i]).abs());
                x[i] = xi;
            }
            if moved < 1e-12 {
                break;
            }
        }
        x
    }
}

fn settings(method: QpMethod) -> QpSettings {
    QpSettings { method, tol: 1e-9, ..QpSettings::default() }
}

#[test]
fn fifty_variable_box_qp_matches_oracle() {
    let qp = random_box_qp(50, 7);
    let oracle = qp.projected_gradient();
    for method in METHODS {
        let r = solve(&qp.data(), &settings(method)).unwrap();
        assert_eq!(r.status, QpStatus::Optimal, "{method:?}");
        let err = r.x.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "{method:?}: {err}");
        assert!(qp.data().kkt_residuals(&r.x, &r.y).max() < 1e-6);
    }
}

#[test]
fn methods_agree_on_equality_constrained_problem() {
    // min |x|^2 - x0 subject to x0 + x1 + x2 = 1, x1 - x2 = 0.5, x2 >= 0.4
    let data = QpData {
        p: CscMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (1, 1, 2.0), (2, 2, 2.0)]),
        q: vec![-1.0, 0.0, 0.0],
        a: CscMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (0, 1, 1.0), (0, 2, 1.0), (1, 1, 1.0), (1, 2, -1.0), (2, 2, 1.0)],
        ),
        l: vec![1.0, 0.5, 0.4],
        u: vec![1.0, 0.5, f64::INFINITY],
    };
    // x2 = 0.4 active, x1 = 0.9, x0 = -0.3
    for method in METHODS {
        let r = solve(&data, &settings(method)).unwrap();
        assert_eq!(r.status, QpStatus::Optimal);
        for (got, want) in r.x.iter().zip([-0.3, 0.9, 0.4]) {
            assert!((got - want).abs() < 1e-7, "{method:?}: {:?}", r.x);
        }
        assert!(r.y[2] < 0.0, "lower bound multiplier sign");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_box_qps_match_projected_gradient(n in 1usize..=100, seed in any::<u64>()) {
        let qp = random_box_qp(n, seed);
        let oracle = qp.projected_gradient();
        for method in METHODS {
            let r = solve(&qp.data(), &settings(method)).unwrap();
            prop_assert_eq!(r.status, QpStatus::Optimal);
            let err = r.x.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err < 1e-5, "{:?} n={} err {}", method, n, err);
        }
    }

    #[test]
    fn solutions_are_feasible_and_stationary(n in 1usize..=60, seed in any::<u64>()) {
        let qp = random_box_qp(n, seed);
        let data = qp.data();
        for method in METHODS {
            let r = solve(&data, &settings(method)).unwrap();
            let res = data.kkt_residuals(&r.x, &r.y);
            prop_assert!(res.max() < 1e-6, "{:?} {:?}", method, res);
            prop_assert!((data.objective(&r.x) - r.objective).abs() < 1e-8 * (1.0 + r.objective.abs()));
        }
    }
}
