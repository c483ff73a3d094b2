//! Physical parameters of the tilt-rotor UAV with suspended load.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::ParamsError;

/// Bundled parameter set matching the reference airframe (CAD-derived values).
pub const DEFAULT_PARAMS_JSON: &str = include_str!("../data/model_params.json");

/// Masses, displacements, inertias and actuator constants of the four rigid
/// bodies: the load (`L`), the main body (`C1`), and the right (`C2`) and
/// left (`C3`) thruster groups.
///
/// Displacements are expressed in the frame that precedes them in the
/// kinematic chain `L -> A1 -> B -> {C1, A2 -> C2, A3 -> C3}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    pub m_load: f64,
    pub m_body: f64,
    pub m_right: f64,
    pub m_left: f64,
    /// Rope vector from the load center of mass to the attachment point `A1`, in `L`.
    pub d_la1: Vector3<f64>,
    pub d_a1b: Vector3<f64>,
    pub d_bc1: Vector3<f64>,
    pub d_ba2: Vector3<f64>,
    pub d_ba3: Vector3<f64>,
    pub d_a2c2: Vector3<f64>,
    pub d_a3c3: Vector3<f64>,
    pub i_load: Matrix3<f64>,
    pub i_body: Matrix3<f64>,
    pub i_right: Matrix3<f64>,
    pub i_left: Matrix3<f64>,
    /// Gravitational acceleration in the inertial frame (z up, so `g_z < 0`).
    pub gravity: Vector3<f64>,
    pub k_tau: f64,
    pub b: f64,
    pub lambda_right: f64,
    pub lambda_left: f64,
    /// Fixed inward inclination of the thrusters, radians.
    pub beta: f64,
    pub mu_gamma: f64,
    pub mu_alpha: f64,
}

impl ModelParams {
    pub fn from_json(text: &str) -> Result<Self, ParamsError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters always serialize")
    }

    /// Mass of the aircraft alone (main body and both thruster groups).
    pub fn aircraft_mass(&self) -> f64 {
        self.m_body + self.m_right + self.m_left
    }

    pub fn total_mass(&self) -> f64 {
        self.m_load + self.aircraft_mass()
    }

    pub fn rope_length(&self) -> f64 {
        self.d_la1.z
    }

    /// Drag-torque to thrust ratio `k_tau / b` (metres).
    pub fn drag_ratio(&self) -> f64 {
        self.k_tau / self.b
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        for (name, m) in [
            ("m_L", self.m_load),
            ("m_1", self.m_body),
            ("m_2", self.m_right),
            ("m_3", self.m_left),
        ] {
            if !(m > 0.0 && m.is_finite()) {
                return Err(ParamsError::Invalid(format!("mass {name} must be positive, got {m}")));
            }
        }
        for (name, inertia) in [
            ("I_L", &self.i_load),
            ("I_1", &self.i_body),
            ("I_2", &self.i_right),
            ("I_3", &self.i_left),
        ] {
            let asym = (inertia - inertia.transpose()).abs().max();
            if asym > 1e-12 * inertia.abs().max().max(1.0) {
                return Err(ParamsError::Invalid(format!("inertia {name} is not symmetric")));
            }
            if inertia.cholesky().is_none() {
                return Err(ParamsError::Invalid(format!("inertia {name} is not positive definite")));
            }
        }
        for (name, s) in [("lambda_R", self.lambda_right), ("lambda_L", self.lambda_left)] {
            if s != 1.0 && s != -1.0 {
                return Err(ParamsError::Invalid(format!("{name} must be +1 or -1, got {s}")));
            }
        }
        if !(self.rope_length() > 0.0) {
            return Err(ParamsError::Invalid("rope length (d_LA1.z) must be positive".into()));
        }
        if self.d_la1.x != 0.0 || self.d_la1.y != 0.0 {
            return Err(ParamsError::Invalid("rope vector must be [0, 0, l]".into()));
        }
        if !(self.b > 0.0) {
            return Err(ParamsError::Invalid("b must be positive".into()));
        }
        Ok(())
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::from_json(DEFAULT_PARAMS_JSON).expect("bundled parameters are valid")
    }
}

/// On-disk layout, keyed by the customary symbol names.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawParams {
    m_L: f64,
    m_1: f64,
    m_2: f64,
    m_3: f64,
    d_LA1: [f64; 3],
    d_A1B: [f64; 3],
    d_BC1: [f64; 3],
    d_BA2: [f64; 3],
    d_BA3: [f64; 3],
    d_A2C2: [f64; 3],
    d_A3C3: [f64; 3],
    I_L: [[f64; 3]; 3],
    I_1: [[f64; 3]; 3],
    I_2: [[f64; 3]; 3],
    I_3: [[f64; 3]; 3],
    g_hat: [f64; 3],
    k_tau: f64,
    b: f64,
    lambda_R: f64,
    lambda_L: f64,
    beta_deg: f64,
    mu_gamma: f64,
    mu_alpha: f64,
}

fn mat(rows: [[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| rows[i][j])
}

fn rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

impl TryFrom<RawParams> for ModelParams {
    type Error = ParamsError;

    fn try_from(r: RawParams) -> Result<Self, Self::Error> {
        let p = ModelParams {
            m_load: r.m_L,
            m_body: r.m_1,
            m_right: r.m_2,
            m_left: r.m_3,
            d_la1: r.d_LA1.into(),
            d_a1b: r.d_A1B.into(),
            d_bc1: r.d_BC1.into(),
            d_ba2: r.d_BA2.into(),
            d_ba3: r.d_BA3.into(),
            d_a2c2: r.d_A2C2.into(),
            d_a3c3: r.d_A3C3.into(),
            i_load: mat(r.I_L),
            i_body: mat(r.I_1),
            i_right: mat(r.I_2),
            i_left: mat(r.I_3),
            gravity: r.g_hat.into(),
            k_tau: r.k_tau,
            b: r.b,
            lambda_right: r.lambda_R,
            lambda_left: r.lambda_L,
            beta: r.beta_deg.to_radians(),
            mu_gamma: r.mu_gamma,
            mu_alpha: r.mu_alpha,
        };
        p.validate()?;
        Ok(p)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            m_L: p.m_load,
            m_1: p.m_body,
            m_2: p.m_right,
            m_3: p.m_left,
            d_LA1: p.d_la1.into(),
            d_A1B: p.d_a1b.into(),
            d_BC1: p.d_bc1.into(),
            d_BA2: p.d_ba2.into(),
            d_BA3: p.d_ba3.into(),
            d_A2C2: p.d_a2c2.into(),
            d_A3C3: p.d_a3c3.into(),
            I_L: rows(&p.i_load),
            I_1: rows(&p.i_body),
            I_2: rows(&p.i_right),
            I_3: rows(&p.i_left),
            g_hat: p.gravity.into(),
            k_tau: p.k_tau,
            b: p.b,
            lambda_R: p.lambda_right,
            lambda_L: p.lambda_left,
            beta_deg: p.beta.to_degrees(),
            mu_gamma: p.mu_gamma,
            mu_alpha: p.mu_alpha,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_parameters_match_reference_table() {
        let p = ModelParams::default();
        assert_eq!(p.m_load, 0.5);
        assert_eq!(p.m_body, 1.7068);
        assert_eq!(p.m_right, 0.08978);
        assert_eq!(p.rope_length(), 0.5);
        assert_eq!(p.d_a1b, Vector3::new(0.0, 0.0, 0.119));
        assert_eq!(p.i_body[(0, 2)], 9.65766e-6);
        assert!((p.beta.to_degrees() - 5.0).abs() < 1e-12);
        assert_eq!(p.lambda_left, -1.0);
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let p = ModelParams::default();
        let back = ModelParams::from_json(&p.to_json()).unwrap();
        assert_eq!(back.m_body, p.m_body);
        assert_eq!(back.i_right, p.i_right);
        assert!((back.beta - p.beta).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_spin_sign_and_mass() {
        let text = DEFAULT_PARAMS_JSON.replace("\"lambda_R\": 1", "\"lambda_R\": 0.5");
        assert!(ModelParams::from_json(&text).is_err());
        let text = DEFAULT_PARAMS_JSON.replace("\"m_L\": 0.5", "\"m_L\": -0.5");
        assert!(ModelParams::from_json(&text).is_err());
    }
}
