use proptest::prelude::*;
use racing_line::fixtures::{annulus, chicane, eight_corner_circuit, hairpin, HairpinSpec};
use racing_line::speed::{
    backward_pass, compute_profile, forward_pass, friction_usage, implied_longitudinal_force, lap_time,
    steady_state_pass,
};
use racing_line::{TrackPath, VehicleParams};

fn open_path(curvature: Vec<f64>, ds: f64) -> TrackPath {
    let s = (0..curvature.len()).map(|i| i as f64 * ds).collect();
    TrackPath::from_curvature(s, curvature, false, 0.0).unwrap()
}

/// Piecewise-constant curvature from (length in stations, curvature) runs.
fn runs(spec: &[(usize, f64)]) -> Vec<f64> {
    spec.iter().flat_map(|&(n, k)| std::iter::repeat_n(k, n)).collect()
}

fn curvature_runs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((5usize..60, prop_oneof![Just(0.0), -0.06f64..0.06]), 2..8).prop_map(|r| runs(&r))
}

#[test]
fn annulus_speed_is_steady_cornering() {
    let p = VehicleParams::default();
    let f = annulus(100.0, 10.0);
    let prof = compute_profile(&f.centerline(2.75), &p, false).unwrap();
    let want = (p.mu * p.g * 100.0).sqrt();
    assert!((want - 30.53).abs() < 0.01);
    for u in &prof.u_x {
        assert!((u / want - 1.0).abs() < 5e-3, "{u}");
    }
    let t = 2.0 * std::f64::consts::PI * 100.0 / want;
    assert!((prof.lap_time / t - 1.0).abs() < 5e-3, "{}", prof.lap_time);
    assert!((t - 20.58).abs() < 0.01);
}

#[test]
fn braking_into_a_corner_follows_the_ramp() {
    // 300 m straight into an arc of curvature 0.0475
    let p = VehicleParams::default();
    let ds = 2.75;
    let k = runs(&[(110, 0.0), (60, 0.0475)]);
    let path = open_path(k, ds);
    let prof = compute_profile(&path, &p, true).unwrap();
    let tr = prof.traces.unwrap();
    let corner = (p.mu * p.g / 0.0475).sqrt();
    assert!((corner - 14.01).abs() < 0.01);
    assert!(((14.0f64 * 14.0 + 2.0 * p.mu * p.g * ds).sqrt() - 15.72).abs() < 0.01);
    // no braking is possible at the saturated arc entry, so the ramp
    // starts at the last straight station
    let arc_start = path.stations[109];
    assert!((prof.u_x[109] - corner).abs() < 1e-9);
    let mut checked = 0;
    for j in 0..110 {
        let d = arc_start - path.stations[j];
        let ramp = (corner * corner + 2.0 * p.mu * p.g * d).sqrt();
        if ramp < tr.forward[j] {
            assert!((prof.u_x[j] / ramp - 1.0).abs() < 5e-3, "station {j}: {} vs {ramp}", prof.u_x[j]);
            checked += 1;
        }
    }
    assert!(checked > 20);
}

#[test]
fn acceleration_from_rest_of_a_corner() {
    let p = VehicleParams::default();
    let path = open_path(vec![0.0; 800], 2.75);
    let mut steady = steady_state_pass(&path, &p);
    steady[0] = 10.0;
    let fwd = forward_pass(&steady, &path, &p);
    let a = p.f_engine_max / p.m;
    for (j, u) in fwd.iter().enumerate() {
        let want = (100.0 + 2.0 * a * path.stations[j]).sqrt().min(p.u_x_max);
        assert!((u - want).abs() < 1e-9 * want, "station {j}");
    }
    assert!(fwd.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(*fwd.last().unwrap(), p.u_x_max);
    steady[0] = 20.0;
    let fwd = forward_pass(&steady, &path, &p);
    assert!((fwd[1] - 413.75f64.sqrt()).abs() < 1e-9);
}

#[test]
fn constant_curvature_loop_needs_no_braking() {
    let p = VehicleParams::default();
    let path = annulus(100.0, 10.0).centerline(2.75);
    let steady = steady_state_pass(&path, &p);
    let fwd = forward_pass(&steady, &path, &p);
    let bwd = backward_pass(&fwd, &path, &p);
    for j in 0..path.len() {
        assert!((fwd[j] - steady[j]).abs() < 1e-9, "station {j}: {} vs {}", fwd[j], steady[j]);
        assert!((bwd[j] - fwd[j]).abs() < 1e-9, "station {j}: {} vs {}", bwd[j], fwd[j]);
    }
}

#[test]
fn lap_time_of_piecewise_profile() {
    let s: Vec<f64> = (0..=200).map(|i| i as f64).collect();
    let u: Vec<f64> = s.iter().map(|&v| if v < 100.0 { 10.0 } else { 20.0 }).collect();
    let t = lap_time(&s, &u).unwrap();
    // one transition interval is integrated with the trapezoid
    assert!((t - 15.0).abs() <= 0.5 * (0.1 - 0.05) + 1e-12, "{t}");
    let s: Vec<f64> = (0..=100).map(|i| i as f64 * 10.0).collect();
    assert!((lap_time(&s, &vec![20.0; 101]).unwrap() - 50.0).abs() < 1e-12);
}

#[test]
fn fixtures_are_friction_feasible() {
    let p = VehicleParams::default();
    let fixtures = [annulus(100.0, 10.0), hairpin(HairpinSpec::default()), chicane(), eight_corner_circuit()];
    for f in &fixtures {
        let path = f.centerline(2.75);
        let prof = compute_profile(&path, &p, false).unwrap();
        let worst = friction_usage(&path, &prof.u_x, &p).into_iter().fold(0.0, f64::max);
        assert!(worst <= 1.0 + 1e-6, "{}: {worst}", f.name);
        let fx = implied_longitudinal_force(&path, &prof.u_x, &p);
        assert!(fx.iter().all(|f| *f <= p.f_engine_max + 1e-6), "{}", f.name);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn profile_is_dominated_by_each_pass(k in curvature_runs()) {
        let p = VehicleParams::default();
        let path = open_path(k, 2.75);
        let prof = compute_profile(&path, &p, true).unwrap();
        let tr = prof.traces.as_ref().unwrap();
        for j in 0..path.len() {
            prop_assert!(prof.u_x[j] <= tr.steady[j]);
            prop_assert!(prof.u_x[j] <= tr.forward[j]);
            prop_assert!(tr.forward[j] <= tr.steady[j]);
        }
    }

    #[test]
    fn passes_reach_a_fixed_point(k in curvature_runs()) {
        let p = VehicleParams::default();
        let path = open_path(k, 2.75);
        let prof = compute_profile(&path, &p, false).unwrap();
        let again = backward_pass(&forward_pass(&prof.u_x, &path, &p), &path, &p);
        prop_assert_eq!(again, prof.u_x);
    }

    #[test]
    fn more_grip_is_never_slower(k in curvature_runs(), mu in 0.5f64..1.2, extra in 0.0f64..0.5) {
        let lo = VehicleParams { mu, ..VehicleParams::default() };
        let hi = VehicleParams { mu: mu + extra, ..VehicleParams::default() };
        let path = open_path(k, 2.75);
        let a = compute_profile(&path, &lo, false).unwrap();
        let b = compute_profile(&path, &hi, false).unwrap();
        for j in 0..path.len() {
            prop_assert!(b.u_x[j] >= a.u_x[j] * (1.0 - 1e-12), "station {}", j);
        }
    }

    #[test]
    fn profile_respects_friction_and_engine(k in curvature_runs(), ds in 1.0f64..4.0) {
        let p = VehicleParams::default();
        let path = open_path(k, ds);
        let prof = compute_profile(&path, &p, false).unwrap();
        for (j, w) in friction_usage(&path, &prof.u_x, &p).iter().enumerate() {
            prop_assert!(*w <= 1.0 + 1e-6, "station {} usage {}", j, w);
        }
        for f in implied_longitudinal_force(&path, &prof.u_x, &p) {
            prop_assert!(f <= p.f_engine_max + 1e-6);
        }
    }
}
