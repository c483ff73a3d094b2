//! Euler-Lagrange model of the UAV and its slung load, written from the
//! load's point of view.
//!
//! Generalized coordinates `q = [xi(3); eta(3); gamma(2); alpha_R; alpha_L]`:
//! load position and ZYX Euler angles, the two rope joint angles and the two
//! thruster tilt angles. The full state is `x = [q; q_dot]`.

use nalgebra::{Matrix3, Matrix3x2, SMatrix, SVector, Vector3, Vector4};

use crate::error::DynamicsError;
use crate::params::ModelParams;

pub type Coords = SVector<f64, 10>;
pub type StateVec = SVector<f64, 20>;
pub type Matrix10 = SMatrix<f64, 10, 10>;
pub type InputMap = SMatrix<f64, 10, 4>;
/// `[f_R, f_L, tau_alphaR, tau_alphaL]`.
pub type ControlInput = Vector4<f64>;
/// Force on the load's center of mass, inertial frame.
pub type Disturbance = Vector3<f64>;

/// Condition number of `M` above which the state is treated as outside the model's domain.
pub const SINGULAR_INERTIA_COND: f64 = 1e12;
/// Margin on `|sin(theta)|` for the Euler angle extraction.
pub const GIMBAL_EPS: f64 = 1e-6;

/// Index ranges into `q`.
pub mod idx {
    pub const XI: usize = 0;
    pub const ETA: usize = 3;
    pub const PSI: usize = 5;
    pub const GAMMA: usize = 6;
    pub const ALPHA_R: usize = 8;
    pub const ALPHA_L: usize = 9;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedState {
    pub q: Coords,
    pub qd: Coords,
}

impl GeneralizedState {
    pub fn new(q: Coords, qd: Coords) -> Self {
        Self { q, qd }
    }

    pub fn from_state(x: &StateVec) -> Self {
        Self {
            q: x.fixed_rows::<10>(0).into_owned(),
            qd: x.fixed_rows::<10>(10).into_owned(),
        }
    }

    pub fn to_state(&self) -> StateVec {
        stack_state(&self.q, &self.qd)
    }

    pub fn xi(&self) -> Vector3<f64> {
        self.q.fixed_rows::<3>(idx::XI).into_owned()
    }

    pub fn eta(&self) -> Vector3<f64> {
        self.q.fixed_rows::<3>(idx::ETA).into_owned()
    }

    /// Inside the domain where both the Euler-rate map and the rope-rate map have full rank.
    pub fn is_guarded(&self) -> bool {
        self.q[4].cos().abs() > GIMBAL_EPS && self.q[7].cos().abs() > GIMBAL_EPS
    }
}

pub fn stack_state(q: &Coords, qd: &Coords) -> StateVec {
    let mut x = StateVec::zeros();
    x.fixed_rows_mut::<10>(0).copy_from(q);
    x.fixed_rows_mut::<10>(10).copy_from(qd);
    x
}

pub fn split_state(x: &StateVec) -> (Coords, Coords) {
    let s = GeneralizedState::from_state(x);
    (s.q, s.qd)
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// ZYX composition `R_z(psi) R_y(theta) R_x(phi)`.
pub fn rot_zyx(eta: &Vector3<f64>) -> Matrix3<f64> {
    rot_z(eta.z) * rot_y(eta.y) * rot_x(eta.x)
}

/// Cross-product matrix: `skew(a) * b == a.cross(&b)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Recovers `(phi, theta, psi)` from a ZYX rotation matrix.
pub fn euler_zyx(r: &Matrix3<f64>) -> Result<Vector3<f64>, DynamicsError> {
    let r31 = r[(2, 0)];
    if r31.abs() >= 1.0 - GIMBAL_EPS {
        return Err(DynamicsError::GimbalLock(r31.abs()));
    }
    Ok(Vector3::new(
        r[(2, 1)].atan2(r[(2, 2)]),
        (-r31).asin(),
        r[(1, 0)].atan2(r[(0, 0)]),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotations {
    pub r_il: Matrix3<f64>,
    /// Rope joint; the aircraft body frame `B` shares this orientation, so this is also `R_LB`.
    pub r_la1: Matrix3<f64>,
    pub r_ba2: Matrix3<f64>,
    pub r_ba3: Matrix3<f64>,
}

pub fn rotations(q: &Coords, p: &ModelParams) -> Rotations {
    Rotations {
        r_il: rot_zyx(&q.fixed_rows::<3>(idx::ETA).into_owned()),
        r_la1: rot_x(-q[6]) * rot_y(-q[7]),
        r_ba2: rot_x(-p.beta) * rot_y(q[8]),
        r_ba3: rot_x(p.beta) * rot_y(q[9]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateMaps {
    /// `omega_IL^L = w_eta * eta_dot`.
    pub w_eta: Matrix3<f64>,
    /// `omega_LA1^A1 = q * gamma_dot`.
    pub q: Matrix3x2<f64>,
}

pub fn rate_maps(q: &Coords) -> RateMaps {
    let (sphi, cphi) = q[3].sin_cos();
    let (sth, cth) = q[4].sin_cos();
    let (sg2, cg2) = q[7].sin_cos();
    RateMaps {
        w_eta: Matrix3::new(1.0, 0.0, -sth, 0.0, cphi, sphi * cth, 0.0, -sphi, cphi * cth),
        q: Matrix3x2::new(-cg2, 0.0, 0.0, -1.0, sg2, 0.0),
    }
}

/// Velocity Jacobians of one rigid body: inertial COM velocity `jv * q_dot`
/// and body-frame angular velocity `jw * q_dot`.
#[derive(Debug, Clone, Copy)]
pub struct BodyJacobian {
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    pub jv: SMatrix<f64, 3, 10>,
    pub jw: SMatrix<f64, 3, 10>,
}

/// Jacobians of the load, main body, right thruster and left thruster, in that order.
pub fn body_jacobians(q: &Coords, p: &ModelParams) -> [BodyJacobian; 4] {
    let rot = rotations(q, p);
    let maps = rate_maps(q);
    let w = maps.w_eta;
    let qm = maps.q;
    let r_lb = rot.r_la1;
    let r_ib = rot.r_il * r_lb;
    let wb = r_lb.transpose() * w;
    let rope_term = -rot.r_il * skew(&p.d_la1) * w;

    let mut load = BodyJacobian {
        mass: p.m_load,
        inertia: p.i_load,
        jv: SMatrix::zeros(),
        jw: SMatrix::zeros(),
    };
    load.jv.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    load.jw.fixed_view_mut::<3, 3>(0, 3).copy_from(&w);

    let d_a1c1 = p.d_a1b + p.d_bc1;
    let mut body = BodyJacobian {
        mass: p.m_body,
        inertia: p.i_body,
        jv: SMatrix::zeros(),
        jw: SMatrix::zeros(),
    };
    body.jv.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    body.jv
        .fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(rope_term - r_ib * skew(&d_a1c1) * wb));
    body.jv.fixed_view_mut::<3, 2>(0, 6).copy_from(&(-r_ib * skew(&d_a1c1) * qm));
    body.jw.fixed_view_mut::<3, 3>(0, 3).copy_from(&wb);
    body.jw.fixed_view_mut::<3, 2>(0, 6).copy_from(&qm);

    let thruster = |mass: f64, inertia: Matrix3<f64>, r_ba: Matrix3<f64>, d_ba: Vector3<f64>, d_ac: Vector3<f64>, col: usize| {
        let d_a1a = p.d_a1b + d_ba;
        let r_ia = r_ib * r_ba;
        let s_ac = r_ia * skew(&d_ac) * r_ba.transpose();
        let s_a1a = r_ib * skew(&d_a1a);
        let mut j = BodyJacobian {
            mass,
            inertia,
            jv: SMatrix::zeros(),
            jw: SMatrix::zeros(),
        };
        j.jv.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
        j.jv.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(rope_term - s_a1a * wb - s_ac * wb));
        j.jv.fixed_view_mut::<3, 2>(0, 6).copy_from(&(-s_a1a * qm - s_ac * qm));
        j.jv.fixed_view_mut::<3, 1>(0, col)
            .copy_from(&(-r_ia * skew(&d_ac) * Vector3::y()));
        j.jw.fixed_view_mut::<3, 3>(0, 3).copy_from(&(r_ba.transpose() * wb));
        j.jw.fixed_view_mut::<3, 2>(0, 6).copy_from(&(r_ba.transpose() * qm));
        j.jw.fixed_view_mut::<3, 1>(0, col).copy_from(&Vector3::y());
        j
    };
    let right = thruster(p.m_right, p.i_right, rot.r_ba2, p.d_ba2, p.d_a2c2, idx::ALPHA_R);
    let left = thruster(p.m_left, p.i_left, rot.r_ba3, p.d_ba3, p.d_a3c3, idx::ALPHA_L);
    [load, body, right, left]
}

/// Inertia matrix `M(q)`; depends only on the attitude, rope and tilt angles.
pub fn inertia_matrix(q: &Coords, p: &ModelParams) -> Matrix10 {
    let mut m = Matrix10::zeros();
    for b in body_jacobians(q, p) {
        m += b.mass * b.jv.transpose() * b.jv + b.jw.transpose() * b.inertia * b.jw;
    }
    // Symmetric by construction up to rounding; make it exact.
    (m + m.transpose()) * 0.5
}

/// Finite-difference step used for derivatives of the model with respect to `q`.
pub fn fd_step(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

/// `dM/dq_i` for every coordinate, by central differences. The translation
/// partials are exactly zero and left so.
pub fn inertia_partials(q: &Coords, p: &ModelParams) -> [Matrix10; 10] {
    let mut out = [Matrix10::zeros(); 10];
    for (i, slot) in out.iter_mut().enumerate().skip(idx::ETA) {
        let h = fd_step(q[i]);
        let mut qp = *q;
        let mut qm = *q;
        qp[i] += h;
        qm[i] -= h;
        *slot = (inertia_matrix(&qp, p) - inertia_matrix(&qm, p)) / (2.0 * h);
    }
    out
}

/// Coriolis and centripetal matrix from Christoffel symbols of the first kind.
pub fn coriolis_matrix(q: &Coords, qd: &Coords, p: &ModelParams) -> Matrix10 {
    coriolis_from_partials(&inertia_partials(q, p), qd)
}

pub fn coriolis_from_partials(dm: &[Matrix10; 10], qd: &Coords) -> Matrix10 {
    let mut m_dot = Matrix10::zeros();
    for (i, d) in dm.iter().enumerate() {
        m_dot += d * qd[i];
    }
    // col[j] = dM/dq_j * q_dot
    let cols: [Coords; 10] = std::array::from_fn(|j| dm[j] * qd);
    Matrix10::from_fn(|k, j| 0.5 * (m_dot[(k, j)] + cols[j][k] - cols[k][j]))
}

/// Gradient of the potential energy, assembled from the COM Jacobians.
pub fn gravity_vector(q: &Coords, p: &ModelParams) -> Coords {
    let mut g = Coords::zeros();
    for b in body_jacobians(q, p) {
        g -= b.mass * b.jv.transpose() * p.gravity;
    }
    g
}

/// Inertial positions of the four centers of mass (load, body, right, left).
pub fn body_com_positions(q: &Coords, p: &ModelParams) -> [Vector3<f64>; 4] {
    let rot = rotations(q, p);
    let xi = q.fixed_rows::<3>(0).into_owned();
    let r_ib = rot.r_il * rot.r_la1;
    let a1 = xi + rot.r_il * p.d_la1;
    let c1 = a1 + r_ib * (p.d_a1b + p.d_bc1);
    let c2 = a1 + r_ib * (p.d_a1b + p.d_ba2) + r_ib * rot.r_ba2 * p.d_a2c2;
    let c3 = a1 + r_ib * (p.d_a1b + p.d_ba3) + r_ib * rot.r_ba3 * p.d_a3c3;
    [xi, c1, c2, c3]
}

pub fn potential_energy(q: &Coords, p: &ModelParams) -> f64 {
    let pos = body_com_positions(q, p);
    let masses = [p.m_load, p.m_body, p.m_right, p.m_left];
    -masses
        .iter()
        .zip(pos.iter())
        .map(|(m, r)| m * p.gravity.dot(r))
        .sum::<f64>()
}

pub fn kinetic_energy(q: &Coords, qd: &Coords, p: &ModelParams) -> f64 {
    0.5 * qd.dot(&(inertia_matrix(q, p) * qd))
}

pub fn total_energy(x: &StateVec, p: &ModelParams) -> f64 {
    let (q, qd) = split_state(x);
    kinetic_energy(&q, &qd, p) + potential_energy(&q, p)
}

/// Map from `[f_R, f_L, tau_alphaR, tau_alphaL]` to generalized forces:
/// thrust at each thruster's COM, its drag torque, and the servo torques
/// with their reaction on the body.
pub fn input_map(q: &Coords, p: &ModelParams) -> InputMap {
    let rot = rotations(q, p);
    let maps = rate_maps(q);
    let r_lb = rot.r_la1;
    let r_ib = rot.r_il * r_lb;
    let az = Vector3::z();
    let ay = Vector3::y();
    let ratio = p.drag_ratio();
    let mut l = InputMap::zeros();

    let mut column = |col: usize, r_bc: Matrix3<f64>, d_ba: Vector3<f64>, d_ac: Vector3<f64>, lambda: f64, row: usize| {
        let d_a1a = p.d_a1b + d_ba;
        let gamma = skew(&d_a1a) * r_bc + r_bc * skew(&d_ac) + lambda * ratio * r_bc;
        let big_lambda = skew(&p.d_la1) * r_lb * r_bc + r_lb * gamma;
        l.fixed_view_mut::<3, 1>(0, col).copy_from(&(r_ib * r_bc * az));
        l.fixed_view_mut::<3, 1>(3, col)
            .copy_from(&(maps.w_eta.transpose() * big_lambda * az));
        l.fixed_view_mut::<2, 1>(6, col)
            .copy_from(&(maps.q.transpose() * gamma * az));
        l[(row, col)] = ay.dot(&(skew(&d_ac) * az));
        l[(row, col + 2)] = 1.0;
    };
    column(0, rot.r_ba2, p.d_ba2, p.d_a2c2, p.lambda_right, idx::ALPHA_R);
    column(1, rot.r_ba3, p.d_ba3, p.d_a3c3, p.lambda_left, idx::ALPHA_L);
    l
}

/// Viscous friction at the rope joint and the tilt servos.
pub fn friction_matrix(p: &ModelParams) -> Matrix10 {
    Matrix10::from_diagonal(&Coords::from_column_slice(&[
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, p.mu_gamma, p.mu_gamma, p.mu_alpha, p.mu_alpha,
    ]))
}

/// The disturbance acts on the load's translation only.
pub fn disturbance_map() -> SMatrix<f64, 10, 3> {
    let mut l = SMatrix::<f64, 10, 3>::zeros();
    l.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    l
}

fn condition_number(m: &Matrix10) -> f64 {
    let ev = m.symmetric_eigenvalues();
    let max = ev.max();
    let min = ev.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `M a = rhs`, refusing matrices outside the conditioning budget.
pub fn solve_inertia(m: &Matrix10, rhs: &Coords) -> Result<Coords, DynamicsError> {
    let cond = condition_number(m);
    if !(cond <= SINGULAR_INERTIA_COND) {
        return Err(DynamicsError::SingularInertia(cond));
    }
    let chol = m.cholesky().ok_or(DynamicsError::SingularInertia(cond))?;
    Ok(chol.solve(rhs))
}

/// Generalized accelerations `q_ddot`.
pub fn accelerations(
    q: &Coords,
    qd: &Coords,
    u: &ControlInput,
    d: &Disturbance,
    p: &ModelParams,
) -> Result<Coords, DynamicsError> {
    let m = inertia_matrix(q, p);
    let c = coriolis_matrix(q, qd, p);
    let rhs = -(c + friction_matrix(p)) * qd - gravity_vector(q, p)
        + input_map(q, p) * u
        + disturbance_map() * d;
    solve_inertia(&m, &rhs)
}

/// Nonlinear state equation `x_dot = f(x, u, d)`.
pub fn state_derivative(
    x: &StateVec,
    u: &ControlInput,
    d: &Disturbance,
    p: &ModelParams,
) -> Result<StateVec, DynamicsError> {
    let (q, qd) = split_state(x);
    let qdd = accelerations(&q, &qd, u, d, p)?;
    Ok(stack_state(&qd, &qdd))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavPose {
    pub xi_b: Vector3<f64>,
    pub eta_b: Vector3<f64>,
    /// Body angular velocity expressed in `B`.
    pub omega_b: Vector3<f64>,
}

pub fn uav_pose(x: &StateVec, p: &ModelParams) -> Result<UavPose, DynamicsError> {
    let (q, qd) = split_state(x);
    let rot = rotations(&q, p);
    let maps = rate_maps(&q);
    let r_ib = rot.r_il * rot.r_la1;
    let xi = q.fixed_rows::<3>(0).into_owned();
    let eta_dot = qd.fixed_rows::<3>(idx::ETA).into_owned();
    let gamma_dot = qd.fixed_rows::<2>(idx::GAMMA).into_owned();
    Ok(UavPose {
        xi_b: xi + rot.r_il * p.d_la1 + r_ib * p.d_a1b,
        eta_b: euler_zyx(&r_ib)?,
        omega_b: rot.r_la1.transpose() * maps.w_eta * eta_dot + maps.q * gamma_dot,
    })
}

/// Hover equilibrium with the load at the origin and level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trim {
    pub q: Coords,
    pub u: ControlInput,
    /// `|x_dot|_inf` at the returned point.
    pub residual: f64,
}

impl Trim {
    pub fn state(&self) -> StateVec {
        stack_state(&self.q, &Coords::zeros())
    }
}

/// Least-squares input for a desired generalized force, `L_in^+ * rhs`.
pub fn input_pseudo_inverse(l: &InputMap, rhs: &Coords) -> Option<ControlInput> {
    let svd = l.svd(true, true);
    let sv = svd.singular_values;
    if sv.min() <= 1e-12 * sv.max() {
        return None;
    }
    svd.solve(rhs, 0.0).ok()
}

fn trim_coords(angles: &Vector4<f64>) -> Coords {
    let mut q = Coords::zeros();
    q.fixed_rows_mut::<4>(idx::GAMMA).copy_from(angles);
    q
}

/// Static force residual `L_in(q) u(q) - g(q)` with `u` eliminated by least squares.
fn trim_residual(angles: &Vector4<f64>, p: &ModelParams) -> Option<(Coords, ControlInput)> {
    let q = trim_coords(angles);
    let l = input_map(&q, p);
    let g = gravity_vector(&q, p);
    let u = input_pseudo_inverse(&l, &g)?;
    Some((l * u - g, u))
}

/// Finds the hover trim with `xi = eta = 0`, solving for the rope and tilt
/// angles by Gauss-Newton on the static force balance; the inputs are
/// eliminated as the least-squares solution at each iterate.
pub fn find_trim(p: &ModelParams) -> Result<Trim, DynamicsError> {
    let mut theta = Vector4::zeros();
    let no_rank = DynamicsError::NoConvergence(f64::NAN);
    let (mut r, _) = trim_residual(&theta, p).ok_or_else(|| no_rank.clone())?;
    for _ in 0..100 {
        let mut jac = SMatrix::<f64, 10, 4>::zeros();
        for k in 0..4 {
            let h = 1e-7;
            let mut tp = theta;
            let mut tm = theta;
            tp[k] += h;
            tm[k] -= h;
            let (rp, _) = trim_residual(&tp, p).ok_or_else(|| no_rank.clone())?;
            let (rm, _) = trim_residual(&tm, p).ok_or_else(|| no_rank.clone())?;
            jac.set_column(k, &((rp - rm) / (2.0 * h)));
        }
        let step = jac
            .svd(true, true)
            .solve(&(-r), 1e-14)
            .map_err(|_| DynamicsError::NoConvergence(r.amax()))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = theta + step * t;
            if let Some((rc, _)) = trim_residual(&cand, p) {
                if rc.norm() < r.norm() {
                    theta = cand;
                    r = rc;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted || step.amax() < 1e-15 {
            break;
        }
    }
    let (_, u) = trim_residual(&theta, p).ok_or(no_rank)?;
    let q = trim_coords(&theta);
    let xdot = state_derivative(&stack_state(&q, &Coords::zeros()), &u, &Disturbance::zeros(), p)?;
    let residual = xdot.amax();
    if residual > 1e-9 {
        return Err(DynamicsError::NoConvergence(residual));
    }
    Ok(Trim { q, u, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_angle_rotations_are_identity() {
        let p = ModelParams { beta: 0.0, ..ModelParams::default() };
        let r = rotations(&Coords::zeros(), &p);
        assert_eq!(r.r_il, Matrix3::identity());
        assert_eq!(r.r_la1, Matrix3::identity());
        assert_eq!(r.r_ba2, Matrix3::identity());
    }

    #[test]
    fn pure_yaw_maps_x_to_y() {
        let mut q = Coords::zeros();
        q[idx::PSI] = std::f64::consts::FRAC_PI_2;
        let r = rotations(&q, &ModelParams::default()).r_il;
        assert!((r.column(0) - Vector3::y()).norm() < 1e-15);
        assert!((r.column(1) + Vector3::x()).norm() < 1e-15);
        assert!((r.column(2) - Vector3::z()).norm() < 1e-15);
    }

    #[test]
    fn rope_rate_map_at_zero() {
        let m = rate_maps(&Coords::zeros());
        assert_eq!(m.w_eta, Matrix3::identity());
        assert_eq!(m.q, Matrix3x2::new(-1.0, 0.0, 0.0, -1.0, 0.0, 0.0));
    }

    #[test]
    fn skew_is_cross_product() {
        let a = Vector3::new(0.3, -1.2, 2.0);
        let b = Vector3::new(-0.7, 0.1, 0.4);
        assert!((skew(&a) * b - a.cross(&b)).norm() < 1e-15);
    }

    #[test]
    fn translational_block_is_total_mass() {
        let p = ModelParams::default();
        let mut q = Coords::zeros();
        q[3] = 0.3;
        q[7] = -0.2;
        let m = inertia_matrix(&q, &p);
        let block = m.fixed_view::<3, 3>(0, 0);
        assert!((block - Matrix3::identity() * p.total_mass()).amax() < 1e-14);
    }

    #[test]
    fn translational_gravity_is_weight() {
        let p = ModelParams::default();
        let g = gravity_vector(&Coords::zeros(), &p);
        assert!((g[2] - p.total_mass() * 9.81).abs() < 1e-12);
        assert!(g[0].abs() < 1e-15 && g[1].abs() < 1e-15);
    }

    #[test]
    fn servo_torques_feed_through() {
        let l = input_map(&Coords::zeros(), &ModelParams::default());
        assert_eq!(l[(8, 2)], 1.0);
        assert_eq!(l[(9, 3)], 1.0);
        assert_eq!(l[(8, 3)], 0.0);
        assert_eq!(l[(9, 2)], 0.0);
    }

    #[test]
    fn zero_state_pose() {
        let p = ModelParams::default();
        let mut x = StateVec::zeros();
        x[2] = 1.0;
        let pose = uav_pose(&x, &p).unwrap();
        assert!((pose.xi_b - Vector3::new(0.0, 0.0, 1.619)).norm() < 1e-15);
        assert_eq!(pose.eta_b, Vector3::zeros());
    }

    #[test]
    fn gimbal_lock_is_reported() {
        let r = rot_y(std::f64::consts::FRAC_PI_2);
        assert!(matches!(euler_zyx(&r), Err(DynamicsError::GimbalLock(_))));
    }
}
