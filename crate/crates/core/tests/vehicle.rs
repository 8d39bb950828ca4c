use proptest::prelude::*;
use racing_line::vehicle::{
    continuous_matrices, discretize, fiala_force, linearize_tire, saturation_angle, Axle, Discretization, Matrix5,
    TireLinearization, Vector5,
};
use racing_line::VehicleParams;

const C: f64 = 160_000.0;
const FZ: f64 = 8494.0;
const MU: f64 = 0.95;

/// Brush model written out from its textbook form, used as an oracle.
fn brush(alpha: f64, c: f64, fz: f64, mu: f64) -> f64 {
    let t = alpha.tan();
    let z = c * t.abs() / (3.0 * mu * fz);
    if z >= 1.0 {
        return -mu * fz * alpha.signum();
    }
    -mu * fz * alpha.signum() * (1.0 - (1.0 - z).powi(3))
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(lo) > 0.0) == (f(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn saturated_force_value() {
    let asl = saturation_angle(C, FZ, MU);
    assert!((asl - 0.1502).abs() < 1e-3);
    assert!((fiala_force(0.2, C, FZ, MU) + MU * FZ).abs() < 1e-9);
    assert!((fiala_force(0.2, C, FZ, MU) + 8069.0).abs() < 1.0);
}

#[test]
fn small_angle_near_linear() {
    // the relative gap to -C alpha shrinks linearly with alpha
    for alpha in [1e-3, 1e-4, 1e-5] {
        let f = fiala_force(alpha, C, FZ, MU);
        let gap = (f / (-C * alpha) - 1.0).abs();
        assert!(gap < 7.0 * alpha, "alpha {alpha}: {f}");
    }
}

#[test]
fn front_axle_linearization_at_twenty() {
    let p = VehicleParams::default();
    let (lin, clamped) = linearize_tire(20.0, 0.01, Axle::Front, &p, 0.999);
    assert!(!clamped);
    let want = p.fz_front() / p.g * 400.0 * 0.01;
    assert!((lin.f_tilde - want).abs() < 1e-9);
    assert!((want - 3463.0).abs() < 1.0);
    // independent root of the brush curve
    let alpha = bisect(|a| brush(a, p.c_f, p.fz_front(), p.mu) - want, -saturation_angle(p.c_f, p.fz_front(), p.mu), 0.0);
    assert!((lin.alpha_tilde - alpha).abs() < 1e-9, "{} vs {alpha}", lin.alpha_tilde);
    assert!(lin.c_tilde < p.c_f);
}

#[test]
fn excessive_demand_clamps_below_saturation() {
    let p = VehicleParams::default();
    let (lin, clamped) = linearize_tire(40.0, 0.01, Axle::Front, &p, 0.999);
    assert!(clamped);
    let limit = p.mu * p.fz_front();
    assert!((lin.f_tilde - 0.999 * limit).abs() < 1e-6);
    let asl = saturation_angle(p.c_f, p.fz_front(), p.mu);
    assert!(lin.alpha_tilde.abs() < asl && lin.alpha_tilde.abs() > 0.8 * asl);
}

#[test]
fn zoh_matches_fine_integration() {
    let p = VehicleParams::default();
    for &(u, k) in &[(15.0, 0.02), (30.0, -0.005), (45.0, 0.0)] {
        let (front, _) = linearize_tire(u, k, Axle::Front, &p, 0.9);
        let (rear, _) = linearize_tire(u, k, Axle::Rear, &p, 0.9);
        let lin = TireLinearization { front, rear };
        let (a, b, d) = continuous_matrices(u, k, &lin, &p).unwrap();
        let dt = 2.75 / u;
        let step = discretize(&a, &b, &d, dt, Discretization::Zoh).unwrap();
        let x0 = Vector5::new(0.4, -0.02, 0.1, 0.01, 0.3);
        let delta = 0.03;
        // RK4 with a tiny step on x' = A x + B delta + d
        let f = |x: &Vector5| a * x + b * delta + d;
        let n = 4000;
        let h = dt / n as f64;
        let mut x = x0;
        for _ in 0..n {
            let k1 = f(&x);
            let k2 = f(&(x + k1 * (0.5 * h)));
            let k3 = f(&(x + k2 * (0.5 * h)));
            let k4 = f(&(x + k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        let got = step.a * x0 + step.b * delta + step.d;
        assert!((got - x).amax() < 1e-8, "u={u} k={k} err {}", (got - x).amax());
    }
}

#[test]
fn euler_step_is_first_order() {
    let a = Matrix5::from_fn(|i, j| if i == j { -1.0 } else if j == i + 1 { 0.5 } else { 0.0 });
    let b = Vector5::zeros();
    let d = Vector5::zeros();
    let dt = 1e-4;
    let s = discretize(&a, &b, &d, dt, Discretization::Euler).unwrap();
    let z = discretize(&a, &b, &d, dt, Discretization::Zoh).unwrap();
    assert!(((s.a - Matrix5::identity()) / dt - a).amax() < 1e-12);
    assert!(((z.a - Matrix5::identity()) / dt - a).amax() < 1e-3);
}

proptest! {
    #[test]
    fn brush_model_is_odd(alpha in -0.5f64..0.5, c in 5e4f64..3e5, fz in 2e3f64..1.5e4, mu in 0.3f64..1.5) {
        prop_assert_eq!(fiala_force(-alpha, c, fz, mu), -fiala_force(alpha, c, fz, mu));
    }

    #[test]
    fn brush_model_matches_oracle(alpha in -0.5f64..0.5, c in 5e4f64..3e5, fz in 2e3f64..1.5e4, mu in 0.3f64..1.5) {
        let got = fiala_force(alpha, c, fz, mu);
        let want = brush(alpha, c, fz, mu);
        prop_assert!((got - want).abs() <= 1e-9 * mu * fz);
    }

    #[test]
    fn brush_model_is_non_increasing(a0 in -0.5f64..0.5, step in 0.0f64..0.1, c in 5e4f64..3e5, fz in 2e3f64..1.5e4, mu in 0.3f64..1.5) {
        let f0 = fiala_force(a0, c, fz, mu);
        let f1 = fiala_force(a0 + step, c, fz, mu);
        prop_assert!(f1 <= f0 + 1e-9 * mu * fz);
        prop_assert!(f0.abs() <= mu * fz * (1.0 + 1e-12));
    }

    #[test]
    fn brush_model_flattens_at_saturation(c in 5e4f64..3e5, fz in 2e3f64..1.5e4, mu in 0.3f64..1.5) {
        let asl = saturation_angle(c, fz, mu);
        let h = 1e-6;
        let slope = (fiala_force(asl, c, fz, mu) - fiala_force(asl - h, c, fz, mu)) / h;
        prop_assert!(slope.abs() < 1e-3 * c);
        prop_assert!((fiala_force(asl - 1e-12, c, fz, mu) + mu * fz).abs() < 1e-6 * mu * fz);
    }

    #[test]
    fn linearized_stiffness_is_local_slope(u in 8.0f64..50.0, demand in -0.99f64..0.99, front in any::<bool>()) {
        let p = VehicleParams::default();
        let axle = if front { Axle::Front } else { Axle::Rear };
        // curvature as a fraction of the friction limit at this speed
        let k = demand * p.mu * p.g / (u * u);
        let (lin, clamped) = linearize_tire(u, k, axle, &p, 0.999);
        prop_assert!(!clamped);
        let (c, fz) = if front { (p.c_f, p.fz_front()) } else { (p.c_r, p.fz_rear()) };
        let h = 1e-6;
        let fd = -(fiala_force(lin.alpha_tilde + h, c, fz, p.mu) - fiala_force(lin.alpha_tilde - h, c, fz, p.mu)) / (2.0 * h);
        prop_assert!((lin.c_tilde - fd).abs() <= 1e-4 * fd.abs().max(1.0), "{} vs {}", lin.c_tilde, fd);
        prop_assert!((fiala_force(lin.alpha_tilde, c, fz, p.mu) - lin.f_tilde).abs() < 1e-6 * fz);
    }
}
