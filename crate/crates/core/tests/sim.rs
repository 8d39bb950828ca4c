use racing_line::fixtures::{annulus, hairpin, HairpinSpec};
use racing_line::sim::{simulate_lap, ControllerGains, SimOptions, SimResult};
use racing_line::speed::{compute_profile, SpeedProfile};
use racing_line::{TrackPath, VehicleParams};

fn run(path: &TrackPath, prof: &SpeedProfile, opts: &SimOptions) -> SimResult {
    simulate_lap(path, prof, &VehicleParams::default(), &ControllerGains::default(), opts).unwrap()
}

fn straight(n: usize) -> TrackPath {
    let s: Vec<f64> = (0..n).map(|i| i as f64 * 2.5).collect();
    let mut path = TrackPath::from_curvature(s, vec![0.0; n], false, 0.0).unwrap();
    path.w_in = vec![5.0; n];
    path.w_out = vec![-5.0; n];
    path
}

fn constant_speed(path: &TrackPath, u: f64) -> SpeedProfile {
    let mut prof = compute_profile(path, &VehicleParams::default(), false).unwrap();
    prof.u_x = vec![u; path.len()];
    prof.lap_time = path.total_length() / u;
    prof
}

#[test]
fn circle_lap_matches_the_plan() {
    let path = annulus(100.0, 10.0).centerline(2.75);
    let prof = compute_profile(&path, &VehicleParams::default(), false).unwrap();
    let res = run(&path, &prof, &SimOptions::default());
    assert!((res.lap_time / 20.58 - 1.0).abs() < 0.02, "{}", res.lap_time);
    assert!((res.lap_time / prof.lap_time - 1.0).abs() < 0.02);
}

#[test]
fn half_speed_doubles_the_lap() {
    let path = annulus(100.0, 10.0).centerline(2.75);
    let prof = compute_profile(&path, &VehicleParams::default(), false).unwrap();
    let full = run(&path, &prof, &SimOptions::default());
    let mut slow = prof.clone();
    slow.u_x.iter_mut().for_each(|u| *u *= 0.5);
    slow.lap_time *= 2.0;
    let half = run(&path, &slow, &SimOptions::default());
    assert!((half.lap_time / (2.0 * full.lap_time) - 1.0).abs() < 0.05, "{} vs {}", half.lap_time, full.lap_time);
}

#[test]
fn hairpin_is_tracked_closely() {
    let path = hairpin(HairpinSpec::default()).centerline(2.75);
    let prof = compute_profile(&path, &VehicleParams::default(), false).unwrap();
    let res = run(&path, &prof, &SimOptions::default());
    assert!(res.max_abs_e < 0.5, "{}", res.max_abs_e);
    assert!((res.lap_time / prof.lap_time - 1.0).abs() < 0.03);
}

#[test]
fn halving_the_step_barely_moves_the_lap_time() {
    let path = hairpin(HairpinSpec::default()).centerline(2.75);
    let prof = compute_profile(&path, &VehicleParams::default(), false).unwrap();
    let a = run(&path, &prof, &SimOptions::default());
    let b = run(&path, &prof, &SimOptions { dt: 0.0025, ..SimOptions::default() });
    assert!((a.lap_time / b.lap_time - 1.0).abs() < 1e-3, "{} vs {}", a.lap_time, b.lap_time);
}

#[test]
fn tire_forces_stay_within_friction() {
    let p = VehicleParams::default();
    for path in [hairpin(HairpinSpec::default()).centerline(2.75), annulus(100.0, 10.0).centerline(2.75)] {
        let prof = compute_profile(&path, &p, false).unwrap();
        let res = run(&path, &prof, &SimOptions::default());
        for r in &res.logs {
            assert!(r.fyf_n.abs() <= 1.01 * p.mu * p.fz_front(), "{}", r.fyf_n);
            assert!(r.fyr_n.abs() <= 1.01 * p.mu * p.fz_rear(), "{}", r.fyr_n);
            assert!(r.fx_n <= p.f_engine_max + 1e-9);
        }
    }
}

#[test]
fn lateral_offset_decays_without_large_overshoot() {
    let path = straight(400);
    let prof = constant_speed(&path, 20.0);
    let res = run(&path, &prof, &SimOptions { start_offset: 1.0, ..SimOptions::default() });
    assert!((res.logs[0].e_m - 1.0).abs() < 1e-9);
    let tail = &res.logs[res.logs.len() * 3 / 4..];
    assert!(tail.iter().all(|r| r.e_m.abs() < 0.05), "{}", tail[0].e_m);
    let overshoot = res.logs.iter().map(|r| -r.e_m).fold(0.0, f64::max);
    assert!(overshoot <= 0.2, "{overshoot}");
}

#[test]
fn steady_cornering_balances_lateral_force() {
    let p = VehicleParams::default();
    let path = annulus(100.0, 10.0).centerline(2.75);
    let prof = constant_speed(&path, 25.0);
    let res = run(&path, &prof, &SimOptions::default());
    let k = path.curvature[0];
    // after the start transient
    for r in res.logs.iter().filter(|r| r.t_s > 5.0) {
        assert!(r.e_m.abs() <= 0.3, "{}", r.e_m);
        let lateral = r.fyf_n * r.delta_rad.cos() + r.fyr_n;
        let want = p.m * r.ux_mps * r.ux_mps * k;
        assert!((lateral / want - 1.0).abs() < 0.02, "t {}: {lateral} vs {want}", r.t_s);
    }
}
