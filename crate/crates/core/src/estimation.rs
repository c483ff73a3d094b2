//! Linear plant models, the multirate measurement map, the zonotopic state
//! estimator and the comparison Kalman filter.
//!
//! Both estimators run on the augmented error state `nu = [dx; d]` with
//! `dx = x - x_eq`. Measurement rows are indexed from zero, so the GPS rows
//! are `0, 1` and the servo rates are `14, 15`.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{DynamicsError, EstimationError, SetError};
use crate::multibody_dynamics::{
    disturbance_map, fd_step, idx, input_map, inertia_matrix, rotations, solve_inertia, split_state,
    state_derivative, uav_pose, ControlInput, Disturbance, StateVec,
};
use crate::params::ModelParams;
use crate::set_arithmetic::{intersect_zonotope_strip, optimal_lambda, order_reduction, Interval, Strip, Zonotope};

pub const N_STATE: usize = 20;
pub const N_AUG: usize = 23;
pub const N_MEAS: usize = 16;
pub const N_INPUT: usize = 4;
pub const N_DIST: usize = 3;

pub type MeasurementVec = SVector<f64, N_MEAS>;

/// Continuous-time Jacobians of the state equation.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousModel {
    pub a: SMatrix<f64, N_STATE, N_STATE>,
    pub b: SMatrix<f64, N_STATE, N_INPUT>,
    pub f: SMatrix<f64, N_STATE, N_DIST>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub f: DMatrix<f64>,
}

/// `A_c` by central differences of `state_derivative`; `B_c = [0; M^-1 L_in]`
/// and `F_c = [0; M^-1 L_db]` in closed form.
pub fn linearize(x: &StateVec, u: &ControlInput, p: &ModelParams) -> Result<ContinuousModel, DynamicsError> {
    let d = Disturbance::zeros();
    let mut a = SMatrix::<f64, N_STATE, N_STATE>::zeros();
    for j in 0..10 {
        a[(j, 10 + j)] = 1.0;
    }
    for j in 0..N_STATE {
        let h = fd_step(x[j]);
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += h;
        xm[j] -= h;
        let col = (state_derivative(&xp, u, &d, p)? - state_derivative(&xm, u, &d, p)?) / (2.0 * h);
        a.fixed_view_mut::<10, 1>(10, j).copy_from(&col.fixed_rows::<10>(10));
    }
    let (q, _) = split_state(x);
    let m = inertia_matrix(&q, p);
    let l_in = input_map(&q, p);
    let l_db = disturbance_map();
    let mut b = SMatrix::<f64, N_STATE, N_INPUT>::zeros();
    for j in 0..N_INPUT {
        let col = solve_inertia(&m, &l_in.column(j).into_owned())?;
        b.fixed_view_mut::<10, 1>(10, j).copy_from(&col);
    }
    let mut f = SMatrix::<f64, N_STATE, N_DIST>::zeros();
    for j in 0..N_DIST {
        let col = solve_inertia(&m, &l_db.column(j).into_owned())?;
        f.fixed_view_mut::<10, 1>(10, j).copy_from(&col);
    }
    Ok(ContinuousModel { a, b, f })
}

/// Zero-order-hold discretization of `x_dot = A x + B u` through the
/// exponential of `[[A, B], [0, 0]] * ts`.
pub fn discretize_zoh(a: &DMatrix<f64>, b: &DMatrix<f64>, ts: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let m = b.ncols();
    let mut big = DMatrix::zeros(n + m, n + m);
    big.view_mut((0, 0), (n, n)).copy_from(&(a * ts));
    big.view_mut((0, n), (n, m)).copy_from(&(b * ts));
    let e = big.exp();
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned())
}

impl ContinuousModel {
    pub fn discretize(&self, ts: f64) -> DiscreteModel {
        let a = DMatrix::from_column_slice(N_STATE, N_STATE, self.a.as_slice());
        let mut bf = DMatrix::zeros(N_STATE, N_INPUT + N_DIST);
        bf.view_mut((0, 0), (N_STATE, N_INPUT)).copy_from(&self.b);
        bf.view_mut((0, N_INPUT), (N_STATE, N_DIST)).copy_from(&self.f);
        let (a_d, bf_d) = discretize_zoh(&a, &bf, ts);
        DiscreteModel {
            a: a_d,
            b: bf_d.columns(0, N_INPUT).into_owned(),
            f: bf_d.columns(N_INPUT, N_DIST).into_owned(),
        }
    }
}

/// `A_nu = [[A_d, F_d], [0, I]]`, `B_nu = [B_d; 0]`.
pub fn augment(a_d: &DMatrix<f64>, b_d: &DMatrix<f64>, f_d: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a_d.nrows();
    let k = f_d.ncols();
    let mut a = DMatrix::zeros(n + k, n + k);
    a.view_mut((0, 0), (n, n)).copy_from(a_d);
    a.view_mut((0, n), (n, k)).copy_from(f_d);
    a.view_mut((n, n), (k, k)).fill_with_identity();
    let mut b = DMatrix::zeros(n + k, b_d.ncols());
    b.view_mut((0, 0), (n, b_d.ncols())).copy_from(b_d);
    (a, b)
}

/// Noise-free sensor outputs: UAV position, UAV Euler angles, UAV body rates,
/// camera vector from the rope attachment to the load in `A1`, tilt angles
/// and tilt rates.
pub fn measurement_model(x: &StateVec, p: &ModelParams) -> Result<MeasurementVec, DynamicsError> {
    let pose = uav_pose(x, p)?;
    let (q, qd) = split_state(x);
    let camera = -(rotations(&q, p).r_la1.transpose() * p.d_la1);
    let mut y = MeasurementVec::zeros();
    y.fixed_rows_mut::<3>(0).copy_from(&pose.xi_b);
    y.fixed_rows_mut::<3>(3).copy_from(&pose.eta_b);
    y.fixed_rows_mut::<3>(6).copy_from(&pose.omega_b);
    y.fixed_rows_mut::<3>(9).copy_from(&camera);
    y[12] = q[idx::ALPHA_R];
    y[13] = q[idx::ALPHA_L];
    y[14] = qd[idx::ALPHA_R];
    y[15] = qd[idx::ALPHA_L];
    Ok(y)
}

/// Central-difference Jacobian of [`measurement_model`], 16 x 20.
pub fn full_measurement_jacobian(x: &StateVec, p: &ModelParams) -> Result<DMatrix<f64>, DynamicsError> {
    let mut h = DMatrix::zeros(N_MEAS, N_STATE);
    for j in 0..N_STATE {
        let step = fd_step(x[j]);
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += step;
        xm[j] -= step;
        let col = (measurement_model(&xp, p)? - measurement_model(&xm, p)?) / (2.0 * step);
        h.set_column(j, &col);
    }
    Ok(h)
}

/// Rows `indices` of the measurement Jacobian, with zero disturbance columns.
pub fn measurement_jacobian(x_eq: &StateVec, indices: &[usize], p: &ModelParams) -> Result<DMatrix<f64>, EstimationError> {
    let full = full_measurement_jacobian(x_eq, p)?;
    let mut h = DMatrix::zeros(indices.len(), N_AUG);
    for (r, &i) in indices.iter().enumerate() {
        if i >= N_MEAS {
            return Err(EstimationError::InvalidMeasurement(format!("row {i} out of range")));
        }
        h.view_mut((r, 0), (1, N_STATE)).copy_from(&full.row(i));
    }
    Ok(h)
}

/// Measurements available at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    /// Zero-based rows of the measurement vector, strictly increasing.
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl MeasurementSet {
    pub fn new(indices: Vec<usize>, values: Vec<f64>) -> Result<Self, EstimationError> {
        let s = MeasurementSet { indices, values };
        s.validate(N_MEAS)?;
        Ok(s)
    }

    pub fn empty() -> Self {
        MeasurementSet { indices: Vec::new(), values: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Checks ordering, lengths and that every row is below `rows`.
    pub fn validate(&self, rows: usize) -> Result<(), EstimationError> {
        if self.indices.len() != self.values.len() {
            return Err(EstimationError::InvalidMeasurement(format!(
                "{} indices but {} values",
                self.indices.len(),
                self.values.len()
            )));
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EstimationError::InvalidMeasurement("indices must be strictly increasing".into()));
        }
        if let Some(&i) = self.indices.iter().find(|&&i| i >= rows) {
            return Err(EstimationError::InvalidMeasurement(format!("row {i} out of range")));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(EstimationError::InvalidMeasurement("non-finite value".into()));
        }
        Ok(())
    }
}

/// Linear prediction and measurement model shared by both estimators:
/// `nu+ = a nu + b du + w`, `y = y_offset + h nu + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// All measurement rows.
    pub h: DMatrix<f64>,
}

impl EstimatorModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, h: DMatrix<f64>) -> Result<Self, SetError> {
        let n = a.nrows();
        for (expected, got) in [(n, a.ncols()), (n, b.nrows()), (n, h.ncols())] {
            if expected != got {
                return Err(SetError::DimensionMismatch { expected, got });
            }
        }
        Ok(EstimatorModel { a, b, h })
    }

    /// Augmented model of the airframe around `(x_eq, u_eq)` with step `ts`.
    pub fn airframe(x_eq: &StateVec, u_eq: &ControlInput, ts: f64, p: &ModelParams) -> Result<Self, EstimationError> {
        let d = linearize(x_eq, u_eq, p)?.discretize(ts);
        let (a, b) = augment(&d.a, &d.b, &d.f);
        let all: Vec<usize> = (0..N_MEAS).collect();
        let h = measurement_jacobian(x_eq, &all, p)?;
        Ok(EstimatorModel { a, b, h })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Bounded process and measurement noise. The center of `v` holds the
/// measurement offset (the noise-free output at the linearization point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub w: Zonotope,
    pub v: Zonotope,
}

pub fn default_process_radii() -> DVector<f64> {
    let mut g = Vec::with_capacity(N_AUG);
    g.extend([1e-4; 8]);
    g.extend([1.5e-4; 2]);
    g.extend([1e-4; 3]);
    g.extend([0.01; 3]);
    g.extend([0.05; 2]);
    g.extend([1e-4; 2]);
    g.extend([0.01; 3]);
    DVector::from_vec(g)
}

pub fn default_measurement_radii() -> DVector<f64> {
    DVector::from_vec(vec![
        0.18, 0.18, 0.612, 3.1416e-3, 3.1416e-3, 0.03, 19.872e-3, 19.872e-3, 0.24, 0.006, 0.006, 0.06, 6.8067e-3,
        6.8067e-3, 0.6093, 0.6093,
    ])
}

/// Box radii of the initial set: positions, angles, then rates and disturbances.
pub fn default_initial_radii() -> DVector<f64> {
    let mut g = vec![0.5; 3];
    g.extend([std::f64::consts::FRAC_PI_4; 7]);
    g.extend([1.0; 13]);
    DVector::from_vec(g)
}

impl NoiseModel {
    pub fn from_radii(w: &DVector<f64>, v_center: &DVector<f64>, v: &DVector<f64>) -> Result<Self, SetError> {
        Ok(NoiseModel {
            w: Zonotope::from_box(DVector::zeros(w.len()), w)?,
            v: Zonotope::from_box(v_center.clone(), v)?,
        })
    }

    /// Default bounds with the measurement offset `pi(x_eq)`.
    pub fn airframe_default(pi_eq: &MeasurementVec) -> Self {
        Self::from_radii(
            &default_process_radii(),
            &DVector::from_column_slice(pi_eq.as_slice()),
            &default_measurement_radii(),
        )
        .expect("default radii have the model dimensions")
    }

    fn strip(&self, h_row: &DVector<f64>, i: usize, y_i: f64) -> Result<Strip, SetError> {
        let sigma = self.v.g.row(i).iter().map(|g| g.abs()).sum();
        crate::set_arithmetic::strip_from_linear_measurement(h_row, self.v.c[i], sigma, y_i)
    }
}

fn measurement_update(
    mut x: Zonotope,
    y: &MeasurementSet,
    model: &EstimatorModel,
    noise: &NoiseModel,
) -> Result<Zonotope, EstimationError> {
    y.validate(model.h.nrows())?;
    for (&i, &y_i) in y.indices.iter().zip(&y.values) {
        let rho = model.h.row(i).transpose();
        let strip = noise.strip(&rho, i, y_i)?;
        let lambda = optimal_lambda(&x, &strip)?;
        x = intersect_zonotope_strip(&x, &strip, &lambda)?;
    }
    Ok(x)
}

/// Update-only pass over the prior box `x0`, reduced to `r_max` generators.
pub fn zse_init(
    x0: &Zonotope,
    y0: &MeasurementSet,
    model: &EstimatorModel,
    noise: &NoiseModel,
    r_max: usize,
) -> Result<Zonotope, EstimationError> {
    let x = measurement_update(x0.clone(), y0, model, noise)?;
    Ok(order_reduction(&x, r_max)?)
}

/// One prediction and strip-update cycle of the zonotopic estimator.
/// An empty measurement set leaves the prediction as the estimate.
pub fn zse_step(
    prev: &Zonotope,
    du: &DVector<f64>,
    y: &MeasurementSet,
    model: &EstimatorModel,
    noise: &NoiseModel,
    r_max: usize,
) -> Result<Zonotope, EstimationError> {
    let pred = crate::set_arithmetic::kuhn_predict_affine(&model.a, &(&model.b * du), prev, &noise.w)?;
    let x = measurement_update(pred, y, model, noise)?;
    Ok(order_reduction(&x, r_max)?)
}

/// Gaussian counterparts of the noise bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanNoise {
    pub p_w: DMatrix<f64>,
    /// Diagonal of the measurement covariance, all rows.
    pub p_v: DVector<f64>,
    pub offset: DVector<f64>,
}

impl KalmanNoise {
    /// Treats every box radius as three standard deviations.
    pub fn from_bounds(noise: &NoiseModel) -> Self {
        let sd = |z: &Zonotope| z.radii().map(|r| (r / 3.0).powi(2));
        KalmanNoise {
            p_w: DMatrix::from_diagonal(&sd(&noise.w)),
            p_v: sd(&noise.v),
            offset: noise.v.c.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl KalmanState {
    /// Mean at the box center, covariance `(radius / 3)^2` on the diagonal.
    pub fn from_box(x0: &Zonotope) -> Self {
        KalmanState {
            mean: x0.c.clone(),
            cov: DMatrix::from_diagonal(&x0.radii().map(|r| (r / 3.0).powi(2))),
        }
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Prediction then Joseph-form correction with the rows in `y`.
pub fn kf_step(
    state: &KalmanState,
    du: &DVector<f64>,
    y: &MeasurementSet,
    model: &EstimatorModel,
    noise: &KalmanNoise,
) -> Result<KalmanState, EstimationError> {
    let pred = KalmanState {
        mean: &model.a * &state.mean + &model.b * du,
        cov: symmetrize(&(&model.a * &state.cov * model.a.transpose() + &noise.p_w)),
    };
    kf_correct(pred, y, model, noise)
}

/// Correction-only pass over the prior, the counterpart of [`zse_init`].
pub fn kf_init(
    prior: &KalmanState,
    y0: &MeasurementSet,
    model: &EstimatorModel,
    noise: &KalmanNoise,
) -> Result<KalmanState, EstimationError> {
    kf_correct(prior.clone(), y0, model, noise)
}

fn kf_correct(
    pred: KalmanState,
    y: &MeasurementSet,
    model: &EstimatorModel,
    noise: &KalmanNoise,
) -> Result<KalmanState, EstimationError> {
    if y.is_empty() {
        return Ok(pred);
    }
    let KalmanState { mean, cov } = pred;
    let n = model.dim();
    y.validate(model.h.nrows())?;
    let k = y.len();
    let mut h = DMatrix::zeros(k, n);
    let mut r = DVector::zeros(k);
    let mut innov = DVector::zeros(k);
    for (row, &i) in y.indices.iter().enumerate() {
        h.set_row(row, &model.h.row(i));
        r[row] = noise.p_v[i];
        innov[row] = y.values[row] - noise.offset[i];
    }
    innov -= &h * &mean;
    let r = DMatrix::from_diagonal(&r);
    let ph = &cov * h.transpose();
    let s = symmetrize(&(&h * &ph + &r));
    let chol = s.cholesky().ok_or(EstimationError::SingularInnovation)?;
    // N = P H^T S^-1, computed as (S^-1 H P)^T.
    let gain = chol.solve(&ph.transpose()).transpose();
    let i_kh = DMatrix::<f64>::identity(n, n) - &gain * &h;
    let cov = symmetrize(&(&i_kh * &cov * i_kh.transpose() + &gain * r * gain.transpose()));
    Ok(KalmanState {
        mean: mean + gain * innov,
        cov,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOutputs {
    pub point: DVector<f64>,
    pub bounds: Vec<Interval>,
}

/// Center and interval hull of the estimated set.
pub fn zse_outputs(x: &Zonotope) -> EstimateOutputs {
    EstimateOutputs {
        point: x.c.clone(),
        bounds: x.interval_hull(),
    }
}

/// Mean with `+- 3 sigma` bounds.
pub fn kf_outputs(s: &KalmanState) -> EstimateOutputs {
    let bounds = (0..s.mean.len())
        .map(|i| {
            let r = 3.0 * s.cov[(i, i)].max(0.0).sqrt();
            Interval::new(s.mean[i] - r, s.mean[i] + r)
        })
        .collect();
    EstimateOutputs {
        point: s.mean.clone(),
        bounds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrator_discretizes_to_ramp() {
        let (a, b) = discretize_zoh(&DMatrix::zeros(2, 2), &DMatrix::identity(2, 2), 0.1);
        assert!((a - DMatrix::<f64>::identity(2, 2)).amax() < 1e-15);
        assert!((b - DMatrix::<f64>::identity(2, 2) * 0.1).amax() < 1e-15);
    }

    #[test]
    fn scalar_zoh_closed_form() {
        let (a, b) = discretize_zoh(&DMatrix::from_element(1, 1, -2.0), &DMatrix::from_element(1, 1, 1.0), 0.3);
        let e = (-0.6f64).exp();
        assert!((a[(0, 0)] - e).abs() < 1e-14);
        assert!((b[(0, 0)] - (e - 1.0) / -2.0).abs() < 1e-14);
    }

    #[test]
    fn augmented_blocks() {
        let (a, b) = augment(&DMatrix::from_element(2, 2, 0.5), &DMatrix::from_element(2, 1, 1.0), &DMatrix::from_element(2, 3, 2.0));
        assert_eq!(a.view((2, 2), (3, 3)).into_owned(), DMatrix::identity(3, 3));
        assert_eq!(a.view((2, 0), (3, 2)).amax(), 0.0);
        assert_eq!(b.rows(2, 3).amax(), 0.0);
    }

    #[test]
    fn measurement_set_validation() {
        assert!(MeasurementSet::new(vec![0, 1], vec![1.0, 2.0]).is_ok());
        assert!(MeasurementSet::new(vec![1, 0], vec![1.0, 2.0]).is_err());
        assert!(MeasurementSet::new(vec![0], vec![1.0, 2.0]).is_err());
        assert!(MeasurementSet::new(vec![16], vec![1.0]).is_err());
    }

    #[test]
    fn kf_bounds_are_three_sigma() {
        let s = KalmanState {
            mean: DVector::from_element(1, 1.0),
            cov: DMatrix::from_element(1, 1, 4.0),
        };
        assert_eq!(kf_outputs(&s).bounds[0], Interval::new(-5.0, 7.0));
    }

    #[test]
    fn default_radii_lengths() {
        assert_eq!(default_process_radii().len(), N_AUG);
        assert_eq!(default_measurement_radii().len(), N_MEAS);
        assert_eq!(default_initial_radii().len(), N_AUG);
        assert_eq!(default_process_radii()[16], 0.05);
    }
}
