//! Vehicle parameters, the brush tire model and the affine time-varying
//! lateral dynamics used by the path update.

mod dynamics;
mod tire;

pub use dynamics::{
    build_dynamics, continuous_matrices, discretize, steady_state, AffineDynamics, DiscreteStep, Discretization,
    DynamicsOptions, LateralState, Matrix5, Vector5,
};
pub use tire::{
    fiala_force, fiala_slope, invert_fiala, linearize_tire, saturation_angle, Axle, AxleLinearization,
    TireLinearization, SATURATION_CLAMP,
};

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};

/// Vehicle parameters. JSON keys match the field names used in vehicle
/// dynamics texts (`m`, `I_z`, `C_f`, ...); missing keys take the defaults,
/// which describe a mid-size sports coupe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Mass (kg).
    pub m: f64,
    /// Yaw inertia (kg m^2).
    #[serde(rename = "I_z")]
    pub i_z: f64,
    /// CG to front axle (m).
    pub a: f64,
    /// CG to rear axle (m).
    pub b: f64,
    /// Front cornering stiffness (N/rad).
    #[serde(rename = "C_f")]
    pub c_f: f64,
    /// Rear cornering stiffness (N/rad).
    #[serde(rename = "C_r")]
    pub c_r: f64,
    pub mu: f64,
    /// Maximum engine force (N).
    #[serde(rename = "F_engine_max")]
    pub f_engine_max: f64,
    pub g: f64,
    /// Top speed cap for the speed profile (m/s).
    #[serde(rename = "U_x_max")]
    pub u_x_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            m: 1500.0,
            i_z: 2250.0,
            a: 1.04,
            b: 1.42,
            c_f: 160_000.0,
            c_r: 180_000.0,
            mu: 0.95,
            f_engine_max: 3750.0,
            g: 9.81,
            u_x_max: 85.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m", self.m),
            ("I_z", self.i_z),
            ("a", self.a),
            ("b", self.b),
            ("C_f", self.c_f),
            ("C_r", self.c_r),
            ("mu", self.mu),
            ("F_engine_max", self.f_engine_max),
            ("g", self.g),
            ("U_x_max", self.u_x_max),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return input_err(format!("vehicle parameter {name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.a + self.b
    }

    /// Static front axle load `m g b / (a + b)`.
    pub fn fz_front(&self) -> f64 {
        self.m * self.g * self.b / self.wheelbase()
    }

    /// Static rear axle load `m g a / (a + b)`.
    pub fn fz_rear(&self) -> f64 {
        self.m * self.g * self.a / self.wheelbase()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: VehicleParams = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_keys_and_defaults() {
        let p = VehicleParams::from_json(r#"{"m": 1200, "I_z": 1800, "C_f": 1e5}"#).unwrap();
        assert_eq!(p.m, 1200.0);
        assert_eq!(p.i_z, 1800.0);
        assert_eq!(p.c_f, 1e5);
        assert_eq!(p.c_r, 180_000.0);
        let text = serde_json::to_string(&VehicleParams::default()).unwrap();
        assert!(text.contains("\"F_engine_max\":3750.0"));
        assert!(VehicleParams::from_json(r#"{"mu": -1}"#).is_err());
        assert!(VehicleParams::from_json(r#"{"mass": 3}"#).is_err());
    }

    #[test]
    fn static_loads_sum_to_weight() {
        let p = VehicleParams::default();
        assert!((p.fz_front() + p.fz_rear() - p.m * p.g).abs() < 1e-9);
        assert!((p.fz_front() - 8494.0).abs() < 1.0);
    }
}
