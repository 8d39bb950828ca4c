use super::VehicleParams;

/// Default fraction of the friction limit at which steady-state tire demand
/// is clamped before linearizing. Corner apexes sit exactly at the limit,
/// and a clamp close to 1 leaves almost no local stiffness there (0.999
/// keeps 1% of `C`), which frees sideslip in the path update. 0.9 keeps
/// about 22%.
pub const SATURATION_CLAMP: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axle {
    Front,
    Rear,
}

/// Slip angle beyond which the brush model is fully saturated.
pub fn saturation_angle(c: f64, f_z: f64, mu: f64) -> f64 {
    (3.0 * mu * f_z / c).atan()
}

/// Brush (Fiala) lateral tire force for slip angle `alpha`.
///
/// Cubic in `tan(alpha)` below the saturation angle, `-mu F_z sgn(alpha)`
/// beyond it.
pub fn fiala_force(alpha: f64, c: f64, f_z: f64, mu: f64) -> f64 {
    if alpha.abs() >= saturation_angle(c, f_z, mu) {
        return -mu * f_z * alpha.signum();
    }
    let t = alpha.tan();
    let mf = mu * f_z;
    -c * t + c * c / (3.0 * mf) * t.abs() * t - c.powi(3) / (27.0 * mf * mf) * t.powi(3)
}

/// Derivative `dF/dalpha` of [`fiala_force`]; zero in the saturated region.
pub fn fiala_slope(alpha: f64, c: f64, f_z: f64, mu: f64) -> f64 {
    if alpha.abs() >= saturation_angle(c, f_z, mu) {
        return 0.0;
    }
    let t = alpha.tan();
    let x = c * t.abs() / (3.0 * mu * f_z);
    -c * (1.0 - x).powi(2) * (1.0 + t * t)
}

/// Slip angle on the unsaturated branch producing `force`, by bisection.
/// `force` must satisfy `|force| < mu F_z`.
pub fn invert_fiala(force: f64, c: f64, f_z: f64, mu: f64) -> f64 {
    if force == 0.0 {
        return 0.0;
    }
    let target = force.abs();
    let mut lo = 0.0;
    let mut hi = saturation_angle(c, f_z, mu);
    // |F| is strictly increasing in |alpha| on [0, alpha_sl)
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if -fiala_force(mid, c, f_z, mu) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    -force.signum() * 0.5 * (lo + hi)
}

/// Affine tire model `F = F_tilde - C_tilde (alpha - alpha_tilde)` for one axle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxleLinearization {
    pub f_tilde: f64,
    pub alpha_tilde: f64,
    pub c_tilde: f64,
    pub f_z: f64,
}

impl AxleLinearization {
    pub fn force(&self, alpha: f64) -> f64 {
        self.f_tilde - self.c_tilde * (alpha - self.alpha_tilde)
    }
}

/// Front and rear linearizations at one station.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TireLinearization {
    pub front: AxleLinearization,
    pub rear: AxleLinearization,
}

/// Linearizes one axle around steady-state cornering at speed `u_x` on
/// curvature `k`, with steady lateral force `(F_z / g) U_x^2 K` and static
/// axle load.
///
/// Demand at or beyond `clamp * mu F_z` is clamped; the returned flag
/// reports whether that happened. `clamp` must lie in `(0, 1)`.
pub fn linearize_tire(u_x: f64, k: f64, axle: Axle, params: &VehicleParams, clamp: f64) -> (AxleLinearization, bool) {
    let (f_z, c) = match axle {
        Axle::Front => (params.fz_front(), params.c_f),
        Axle::Rear => (params.fz_rear(), params.c_r),
    };
    let limit = clamp * params.mu * f_z;
    let mut f_tilde = f_z / params.g * u_x * u_x * k;
    let clamped = f_tilde.abs() >= limit;
    if clamped {
        f_tilde = limit * f_tilde.signum();
    }
    let alpha_tilde = invert_fiala(f_tilde, c, f_z, params.mu);
    let c_tilde = -fiala_slope(alpha_tilde, c, f_z, params.mu);
    (AxleLinearization { f_tilde, alpha_tilde, c_tilde, f_z }, clamped)
}

#[cfg(test)]
mod tests {
    use super::*;

    const C: f64 = 160_000.0;
    const FZ: f64 = 8494.0;
    const MU: f64 = 0.95;

    #[test]
    fn zero_slip_zero_force() {
        assert_eq!(fiala_force(0.0, C, FZ, MU), 0.0);
    }

    #[test]
    fn saturation_values() {
        let sl = saturation_angle(C, FZ, MU);
        assert!((sl - (3.0 * 0.95 * 8494.0 / 160000.0f64).atan()).abs() < 1e-15);
        assert!((sl - 0.1502).abs() < 1e-3);
        assert!((fiala_force(0.2, C, FZ, MU) + MU * FZ).abs() < 1e-9);
        assert!((fiala_force(0.2, C, FZ, MU) + 8069.0).abs() < 1.0);
        // continuous at the breakpoint
        let below = fiala_force(sl - 1e-9, C, FZ, MU);
        assert!((below + MU * FZ).abs() < 1e-3);
    }

    #[test]
    fn small_angle_matches_factored_form() {
        // |F| = mu Fz (1 - (1 - x)^3) with x = C tan(alpha) / (3 mu Fz)
        let a: f64 = 0.01;
        let x = C * a.tan() / (3.0 * MU * FZ);
        let oracle = -MU * FZ * (1.0 - (1.0 - x).powi(3));
        let f = fiala_force(a, C, FZ, MU);
        assert!((f - oracle).abs() < 1e-9, "{f} vs {oracle}");
        // the quadratic term already costs about 6.5% against -C alpha here
        assert!(((f + 1600.0) / 1600.0 - 0.0646).abs() < 1e-3, "{f}");
    }

    #[test]
    fn slope_matches_finite_difference() {
        for &a in &[-0.12, -0.05, 0.003, 0.07, 0.14] {
            let h = 1e-7;
            let fd = (fiala_force(a + h, C, FZ, MU) - fiala_force(a - h, C, FZ, MU)) / (2.0 * h);
            let an = fiala_slope(a, C, FZ, MU);
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "{a}: {fd} vs {an}");
        }
    }

    #[test]
    fn straight_line_recovers_nominal_stiffness() {
        let p = VehicleParams::default();
        let (lin, clamped) = linearize_tire(25.0, 0.0, Axle::Front, &p, SATURATION_CLAMP);
        assert!(!clamped);
        assert_eq!(lin.f_tilde, 0.0);
        assert_eq!(lin.alpha_tilde, 0.0);
        assert!((lin.c_tilde - p.c_f).abs() < 1e-9);
    }

    #[test]
    fn excessive_demand_is_clamped() {
        let p = VehicleParams::default();
        let (lin, clamped) = linearize_tire(40.0, 0.01, Axle::Front, &p, 0.999);
        assert!(clamped);
        assert!((lin.f_tilde - 0.999 * p.mu * p.fz_front()).abs() < 1e-9);
        let sl = saturation_angle(p.c_f, p.fz_front(), p.mu);
        assert!(lin.alpha_tilde < 0.0 && lin.alpha_tilde.abs() < sl);
        assert!(lin.alpha_tilde.abs() > 0.9 * sl);
        // slope at 0.999 of the peak is (1 - x)^2 C sec^2(alpha) with (1 - x)^3 = 0.001
        let expect = 0.01 * p.c_f / lin.alpha_tilde.cos().powi(2);
        assert!((lin.c_tilde - expect).abs() < 1e-6 * p.c_f, "{} vs {expect}", lin.c_tilde);
    }

    #[test]
    fn default_clamp_keeps_stiffness() {
        let p = VehicleParams::default();
        let (lin, clamped) = linearize_tire(40.0, 0.01, Axle::Rear, &p, SATURATION_CLAMP);
        assert!(clamped);
        let expect = 0.1f64.powf(2.0 / 3.0) * p.c_r / lin.alpha_tilde.cos().powi(2);
        assert!((lin.c_tilde - expect).abs() < 1e-6 * p.c_r, "{} vs {expect}", lin.c_tilde);
    }
}
