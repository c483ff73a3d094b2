//! Closed-loop experiment: reference trajectory, wind on the load, multirate
//! noisy sensors, RK4 plant integration, logging and RMSE.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::{control_step, AccelBounds, GainCertificate, Reference, N_CHI};
use crate::error::HarnessError;
use crate::estimation::{
    default_initial_radii, default_measurement_radii, default_process_radii, kf_init, kf_outputs, kf_step,
    measurement_model, zse_init, zse_outputs, zse_step, EstimateOutputs, EstimatorModel, KalmanNoise, KalmanState,
    MeasurementSet, NoiseModel, N_AUG, N_MEAS, N_STATE,
};
use crate::multibody_dynamics::{
    idx, rot_zyx, stack_state, state_derivative, uav_pose, ControlInput, Coords, Disturbance, StateVec, Trim,
};
use crate::params::ModelParams;
use crate::set_arithmetic::Zonotope;

/// Bundled synthetic wind profile, at most 3 m/s per axis.
pub const EXAMPLE_WIND_JSON: &str = include_str!("../data/wind_example.json");

/// Certificate synthesized for the bundled parameters with the default
/// weights and bounds, so runs need not wait on the solver.
pub const DEFAULT_GAIN_JSON: &str = include_str!("../data/default_gain.json");

/// Base tick in milliseconds; sensor periods are multiples of it.
pub const TICK_MS: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectorySpec {
    /// Take-off spiral, straight legs with sharp turns and a vertical landing.
    #[default]
    Mission,
    /// Constant load position.
    Hover { xi: [f64; 3] },
}

/// Reference at one instant. `xi_dd_raw` is the analytic acceleration,
/// `xi_dd` its clamp to the controller's bounds used for feed-forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefSample {
    pub xi: Vector3<f64>,
    pub xi_d: Vector3<f64>,
    pub xi_dd_raw: Vector3<f64>,
    pub xi_dd: Vector3<f64>,
    pub psi: f64,
}

/// Segment breakpoints of the default trajectory, seconds.
pub const MISSION_BREAKS: [f64; 6] = [10.0, 19.0, 20.0, 29.0, 30.0, 40.0];

type Pva = (f64, f64, f64);

fn mission_axes(t: f64) -> [Pva; 3] {
    let q = PI / 4.0;
    let h = PI / 2.0;
    if t < 10.0 {
        let (a, w) = (0.01, q);
        let (c, s) = ((w * t).cos(), (w * t).sin());
        let x = (
            a * t * t * c,
            2.0 * a * t * c - a * t * t * w * s,
            2.0 * a * c - 4.0 * a * w * t * s - a * w * w * t * t * c,
        );
        let (al, be) = (PI / 20.0, q);
        let (sa, ca, sb, cb) = ((al * t).sin(), (al * t).cos(), (be * t).sin(), (be * t).cos());
        let y = (
            sa * sb,
            al * ca * sb + be * sa * cb,
            -(al * al + be * be) * sa * sb + 2.0 * al * be * ca * cb,
        );
        let g = PI / 10.0;
        let z = (3.5 - 2.5 * (g * t).cos(), 2.5 * g * (g * t).sin(), 2.5 * g * g * (g * t).cos());
        [x, y, z]
    } else if t < 19.0 {
        [(-q * (t - 10.0), -q, 0.0), (1.0, 0.0, 0.0), (6.0, 0.0, 0.0)]
    } else if t < 20.0 {
        let tau = t - 19.0;
        let (s, c) = ((h * tau).sin(), (h * tau).cos());
        [
            (-9.0 * q - 0.5 * s, -0.5 * h * c, 0.5 * h * h * s),
            (1.5 - 0.5 * c, 0.5 * h * s, 0.5 * h * h * c),
            (6.0, 0.0, 0.0),
        ]
    } else if t < 29.0 {
        [(-9.0 * q - 0.5, 0.0, 0.0), (1.5 + q * (t - 20.0), q, 0.0), (6.0, 0.0, 0.0)]
    } else if t < 30.0 {
        let tau = t - 29.0;
        let (s, c) = ((h * tau).sin(), (h * tau).cos());
        [
            (-9.0 * q - 0.5 * c, 0.5 * h * s, 0.5 * h * h * c),
            (1.5 + 9.0 * q + 0.5 * s, 0.5 * h * c, -0.5 * h * h * s),
            (6.0, 0.0, 0.0),
        ]
    } else if t < 40.0 {
        [(-9.0 * q + q * (t - 30.0), q, 0.0), (2.0 + 9.0 * q, 0.0, 0.0), (6.0, 0.0, 0.0)]
    } else {
        let g = PI / 10.0;
        let tau = t - 40.0;
        [
            (-PI / 80.0 * t * t + 5.0 * q * t - 119.0 * q, -PI / 40.0 * t + 5.0 * q, -PI / 40.0),
            (2.0 + 9.0 * q, 0.0, 0.0),
            (3.5 + 2.5 * (g * tau).cos(), -2.5 * g * (g * tau).sin(), -2.5 * g * g * (g * tau).cos()),
        ]
    }
}

/// Reference position, velocity and acceleration at `t` (right limits at
/// breakpoints). The yaw reference is zero.
pub fn reference(t: f64, spec: &TrajectorySpec, bounds: &AccelBounds) -> RefSample {
    let (xi, xi_d, raw) = match spec {
        TrajectorySpec::Mission => {
            let a = mission_axes(t.max(0.0));
            (
                Vector3::new(a[0].0, a[1].0, a[2].0),
                Vector3::new(a[0].1, a[1].1, a[2].1),
                Vector3::new(a[0].2, a[1].2, a[2].2),
            )
        }
        TrajectorySpec::Hover { xi } => (Vector3::from(*xi), Vector3::zeros(), Vector3::zeros()),
    };
    RefSample {
        xi,
        xi_d,
        xi_dd_raw: raw,
        xi_dd: bounds.clamp(&raw),
        psi: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindKnot {
    pub t: f64,
    pub v: [f64; 3],
}

/// Environmental wind, piecewise linear in time and held constant outside
/// the knot range, and the drag parameters of the load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindSpec {
    #[serde(default)]
    pub label: String,
    pub rho_air: f64,
    pub a_s: f64,
    pub profile: Vec<WindKnot>,
}

impl Default for WindSpec {
    fn default() -> Self {
        serde_json::from_str(EXAMPLE_WIND_JSON).expect("bundled wind profile parses")
    }
}

impl WindSpec {
    pub fn calm() -> Self {
        WindSpec {
            label: "no wind".into(),
            rho_air: 1.21,
            a_s: 0.01,
            profile: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.rho_air > 0.0 && self.a_s > 0.0) {
            return Err(HarnessError::Config("air density and plate area must be positive".into()));
        }
        if self.profile.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(HarnessError::Config("wind knots must have increasing times".into()));
        }
        Ok(())
    }

    /// Wind velocity in the inertial frame.
    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        let k = &self.profile;
        match k.len() {
            0 => Vector3::zeros(),
            _ if t <= k[0].t => Vector3::from(k[0].v),
            n if t >= k[n - 1].t => Vector3::from(k[n - 1].v),
            _ => {
                let j = k.partition_point(|w| w.t <= t);
                let (a, b) = (&k[j - 1], &k[j]);
                let s = (t - a.t) / (b.t - a.t);
                Vector3::from(a.v) * (1.0 - s) + Vector3::from(b.v) * s
            }
        }
    }
}

/// Quadratic drag of the relative wind, per load-frame axis, returned in
/// the inertial frame.
pub fn wind_force(t: f64, x: &StateVec, spec: &WindSpec) -> Disturbance {
    let eta = x.fixed_rows::<3>(idx::ETA).into_owned();
    let xi_d = x.fixed_rows::<3>(10).into_owned();
    let r_il = rot_zyx(&eta);
    let kappa = r_il.transpose() * (spec.velocity(t) - xi_d);
    let k = 0.5 * spec.rho_air * spec.a_s;
    let d_l = kappa.map(|c| k * c.abs() * c);
    r_il * d_l
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    /// Gaussian with standard deviation `bound / 3`, redrawn outside the bound.
    TruncatedGaussian,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    pub name: String,
    /// Zero-based measurement rows.
    pub indices: Vec<usize>,
    pub bound: f64,
    pub period_ms: u64,
    pub distribution: NoiseDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSuite {
    pub sensors: Vec<Sensor>,
}

impl Default for SensorSuite {
    fn default() -> Self {
        use NoiseDistribution::*;
        let s = |name: &str, indices: &[usize], bound: f64, period_ms: u64, distribution| Sensor {
            name: name.into(),
            indices: indices.to_vec(),
            bound,
            period_ms,
            distribution,
        };
        SensorSuite {
            sensors: vec![
                s("gps", &[0, 1], 0.15, 120, TruncatedGaussian),
                s("barometer", &[2], 0.51, 12, TruncatedGaussian),
                s("imu_angles", &[3, 4, 5], 2.618e-3, 12, TruncatedGaussian),
                s("imu_rates", &[6, 7, 8], 16.558e-3, 12, TruncatedGaussian),
                s("camera_xy", &[9, 10], 0.005, 24, Uniform),
                s("camera_z", &[11], 0.02, 24, Uniform),
                s("servo_angles", &[12, 13], 5.67e-3, 12, Uniform),
                s("servo_rates", &[14, 15], 0.50772, 12, Uniform),
            ],
        }
    }
}

impl SensorSuite {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut seen = [false; N_MEAS];
        for s in &self.sensors {
            if !(s.bound >= 0.0) || !s.bound.is_finite() {
                return Err(HarnessError::Config(format!("sensor {}: bad noise bound", s.name)));
            }
            if s.period_ms == 0 || !s.period_ms.is_multiple_of(TICK_MS) {
                return Err(HarnessError::Config(format!(
                    "sensor {}: period must be a positive multiple of {TICK_MS} ms",
                    s.name
                )));
            }
            for &i in &s.indices {
                if i >= N_MEAS || seen[i] {
                    return Err(HarnessError::Config(format!("sensor {}: row {i} invalid or repeated", s.name)));
                }
                seen[i] = true;
            }
        }
        Ok(())
    }

    /// Every sensor with its bound set to zero.
    pub fn noiseless(&self) -> Self {
        let mut s = self.clone();
        for x in &mut s.sensors {
            x.bound = 0.0;
        }
        s
    }
}

fn draw_noise(rng: &mut ChaCha8Rng, bound: f64, dist: NoiseDistribution) -> f64 {
    if bound == 0.0 {
        return 0.0;
    }
    match dist {
        NoiseDistribution::Uniform => rng.random_range(-bound..=bound),
        NoiseDistribution::TruncatedGaussian => {
            let n = Normal::new(0.0, bound / 3.0).expect("positive deviation");
            loop {
                let v: f64 = n.sample(rng);
                if v.abs() <= bound {
                    return v;
                }
            }
        }
    }
}

/// Noisy measurements due at tick `k`, drawn sensor by sensor in suite
/// order, row by row.
pub fn sample_sensors(
    k: u64,
    x: &StateVec,
    suite: &SensorSuite,
    p: &ModelParams,
    rng: &mut ChaCha8Rng,
) -> Result<MeasurementSet, HarnessError> {
    let y = measurement_model(x, p)?;
    let t_ms = k * TICK_MS;
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for s in &suite.sensors {
        if !t_ms.is_multiple_of(s.period_ms) {
            continue;
        }
        for &i in &s.indices {
            rows.push((i, y[i] + draw_noise(rng, s.bound, s.distribution)));
        }
    }
    rows.sort_by_key(|r| r.0);
    let (indices, values) = rows.into_iter().unzip();
    Ok(MeasurementSet::new(indices, values)?)
}

/// Classical RK4 step of `x' = f(x)`.
pub fn rk4<const N: usize, F, E>(f: F, x: &nalgebra::SVector<f64, N>, dt: f64) -> Result<nalgebra::SVector<f64, N>, E>
where
    F: Fn(&nalgebra::SVector<f64, N>) -> Result<nalgebra::SVector<f64, N>, E>,
{
    let k1 = f(x)?;
    let k2 = f(&(x + k1 * (dt / 2.0)))?;
    let k3 = f(&(x + k2 * (dt / 2.0)))?;
    let k4 = f(&(x + k3 * dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// One RK4 step of the plant with `u` and `d` held.
pub fn rk4_step(x: &StateVec, u: &ControlInput, d: &Disturbance, dt: f64, p: &ModelParams) -> Result<StateVec, HarnessError> {
    Ok(rk4(|x| state_derivative(x, u, d, p), x, dt)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Zse,
    Kf,
}

impl std::str::FromStr for EstimatorKind {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zse" => Ok(EstimatorKind::Zse),
            "kf" => Ok(EstimatorKind::Kf),
            _ => Err(HarnessError::Config(format!("unknown estimator {s:?}"))),
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EstimatorKind::Zse => "zse",
            EstimatorKind::Kf => "kf",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorSettings {
    pub kind: EstimatorKind,
    /// Process noise box radii (23).
    pub w_radii: Vec<f64>,
    /// Measurement noise box radii (16), centered at the trim output.
    pub v_radii: Vec<f64>,
    /// Initial box radii (23) around the first reference point.
    pub x0_radii: Vec<f64>,
    pub r_max: usize,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings {
            kind: EstimatorKind::Zse,
            w_radii: default_process_radii().as_slice().to_vec(),
            v_radii: default_measurement_radii().as_slice().to_vec(),
            x0_radii: default_initial_radii().as_slice().to_vec(),
            r_max: 75 * N_AUG,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// UAV position, rope angles in degrees; attitude and tilt angles zero.
    Displaced { uav_position: [f64; 3], gamma_deg: [f64; 2] },
    /// Trim configuration with the load at `xi`, at rest.
    Trim { xi: [f64; 3] },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Displaced {
            uav_position: [0.0, 0.0, 1.619],
            gamma_deg: [15.0, 15.0],
        }
    }
}

/// Everything a run needs. Missing fields fall back to the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub params: ModelParams,
    pub sensors: SensorSuite,
    pub noiseless: bool,
    pub wind: WindSpec,
    pub trajectory: TrajectorySpec,
    pub initial: InitialCondition,
    pub estimator: EstimatorSettings,
    pub bounds: AccelBounds,
    /// Controller weights; `None` uses the defaults built from the trim.
    pub lmi: Option<crate::control::LmiSpec>,
    pub duration: f64,
    pub ts: f64,
    pub substeps: usize,
    pub seed: u64,
    /// Largest admissible state norm before the run is declared diverged.
    pub blowup: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            params: ModelParams::default(),
            sensors: SensorSuite::default(),
            noiseless: false,
            wind: WindSpec::default(),
            trajectory: TrajectorySpec::Mission,
            initial: InitialCondition::default(),
            estimator: EstimatorSettings::default(),
            bounds: AccelBounds::default(),
            lmi: None,
            duration: 50.0,
            ts: TICK_MS as f64 / 1000.0,
            substeps: 10,
            seed: 1,
            blowup: 1e3,
        }
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let c: SimConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.params.validate()?;
        self.sensors.validate()?;
        self.wind.validate()?;
        let e = &self.estimator;
        if e.w_radii.len() != N_AUG || e.x0_radii.len() != N_AUG || e.v_radii.len() != N_MEAS {
            return Err(HarnessError::Config("estimator radii have the wrong length".into()));
        }
        if e.r_max < N_AUG {
            return Err(HarnessError::Config("r_max below the state dimension".into()));
        }
        if (self.ts * 1000.0 - TICK_MS as f64).abs() > 1e-9 {
            return Err(HarnessError::Config(format!("ts must equal the {TICK_MS} ms base tick")));
        }
        if self.substeps == 0 || !(self.duration >= 0.0) || !(self.blowup > 0.0) {
            return Err(HarnessError::Config("substeps, duration and blowup must be positive".into()));
        }
        for a in 0..3 {
            if !(self.bounds.lo[a] <= self.bounds.hi[a]) {
                return Err(HarnessError::Config("acceleration bounds are inverted".into()));
            }
        }
        Ok(())
    }

    pub fn initial_state(&self, trim: &Trim) -> Result<StateVec, HarnessError> {
        match self.initial {
            InitialCondition::Trim { xi } => {
                let mut q = trim.q;
                q.fixed_rows_mut::<3>(0).copy_from(&Vector3::from(xi));
                Ok(stack_state(&q, &Coords::zeros()))
            }
            InitialCondition::Displaced { uav_position, gamma_deg } => {
                let mut q = Coords::zeros();
                q[idx::GAMMA] = gamma_deg[0].to_radians();
                q[idx::GAMMA + 1] = gamma_deg[1].to_radians();
                let offset = uav_pose(&stack_state(&q, &Coords::zeros()), &self.params)?.xi_b;
                q.fixed_rows_mut::<3>(0).copy_from(&(Vector3::from(uav_position) - offset));
                Ok(stack_state(&q, &Coords::zeros()))
            }
        }
    }
}

/// One logged tick.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub k: u64,
    pub t: f64,
    pub reference: RefSample,
    pub x: StateVec,
    pub u: ControlInput,
    pub d: Disturbance,
    pub wind: Vector3<f64>,
    pub meas: MeasurementSet,
    /// Estimate of `[x - x_eq; d]`.
    pub est: DVector<f64>,
    pub est_lo: DVector<f64>,
    pub est_hi: DVector<f64>,
    /// Generator count of the estimated set; zero for the Kalman filter.
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub estimator: EstimatorKind,
    pub x_eq: StateVec,
    pub records: Vec<LogRecord>,
}

enum Estimator {
    Zse(Zonotope),
    Kf(KalmanState),
}

impl Estimator {
    fn outputs(&self) -> (EstimateOutputs, usize) {
        match self {
            Estimator::Zse(z) => (zse_outputs(z), z.order()),
            Estimator::Kf(s) => (kf_outputs(s), 0),
        }
    }
}

/// Runs the loop at the base tick: sense, estimate, control, integrate.
pub fn run_closed_loop(cfg: &SimConfig, trim: &Trim, cert: &GainCertificate) -> Result<SimLog, HarnessError> {
    cfg.validate()?;
    if cert.k.shape() != (4, N_CHI) {
        return Err(HarnessError::Config(format!("gain has shape {:?}, expected (4, {N_CHI})", cert.k.shape())));
    }
    let p = &cfg.params;
    let ts = cfg.ts;
    let x_eq = trim.state();
    let model = EstimatorModel::airframe(&x_eq, &trim.u, ts, p)?;
    let pi_eq = measurement_model(&x_eq, p)?;
    let noise = NoiseModel::from_radii(
        &DVector::from_column_slice(&cfg.estimator.w_radii),
        &DVector::from_column_slice(pi_eq.as_slice()),
        &DVector::from_column_slice(&cfg.estimator.v_radii),
    )
    .map_err(crate::error::EstimationError::from)?;
    let kf_noise = KalmanNoise::from_bounds(&noise);
    let suite = if cfg.noiseless { cfg.sensors.noiseless() } else { cfg.sensors.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let r0 = reference(0.0, &cfg.trajectory, &cfg.bounds);
    let mut c0 = DVector::zeros(N_AUG);
    for a in 0..3 {
        c0[a] = r0.xi[a] - x_eq[a];
    }
    let x0_box = Zonotope::from_box(c0, &DVector::from_column_slice(&cfg.estimator.x0_radii))
        .map_err(crate::error::EstimationError::from)?;

    let mut x = cfg.initial_state(trim)?;
    let mut integ = DVector::zeros(4);
    let mut du_prev = DVector::zeros(4);
    let mut est: Option<Estimator> = None;
    let ticks = (cfg.duration / ts).round() as u64;
    let mut records = Vec::with_capacity(ticks as usize + 1);
    let h = ts / cfg.substeps as f64;

    for k in 0..=ticks {
        let t = k as f64 * ts;
        let y = sample_sensors(k, &x, &suite, p, &mut rng)?;
        let next = match (&est, cfg.estimator.kind) {
            (None, EstimatorKind::Zse) => Estimator::Zse(zse_init(&x0_box, &y, &model, &noise, cfg.estimator.r_max)?),
            (None, EstimatorKind::Kf) => Estimator::Kf(kf_init(&KalmanState::from_box(&x0_box), &y, &model, &kf_noise)?),
            (Some(Estimator::Zse(z)), _) => Estimator::Zse(zse_step(z, &du_prev, &y, &model, &noise, cfg.estimator.r_max)?),
            (Some(Estimator::Kf(s)), _) => Estimator::Kf(kf_step(s, &du_prev, &y, &model, &kf_noise)?),
        };
        let (out, order) = next.outputs();
        est = Some(next);

        let r = reference(t, &cfg.trajectory, &cfg.bounds);
        let refs = Reference::from_load(trim, &r.xi, &r.xi_d, &r.xi_dd, r.psi);
        let x_hat = x_eq + StateVec::from_iterator(out.point.iter().take(N_STATE).cloned());
        let mut chi = DVector::zeros(N_CHI);
        chi.rows_mut(0, N_STATE).copy_from(&(x_hat - refs.state()));
        chi.rows_mut(N_STATE, 4).copy_from(&integ);
        let (u, integ_next) = control_step(&chi, &cert.k, &refs, ts, p)?;
        integ = integ_next;

        let d = wind_force(t, &x, &cfg.wind);
        records.push(LogRecord {
            k,
            t,
            reference: r,
            x,
            u,
            d,
            wind: cfg.wind.velocity(t),
            meas: y,
            est: out.point.clone(),
            est_lo: DVector::from_iterator(N_AUG, out.bounds.iter().map(|b| b.lo)),
            est_hi: DVector::from_iterator(N_AUG, out.bounds.iter().map(|b| b.hi)),
            order,
        });
        if k == ticks {
            break;
        }
        for s in 0..cfg.substeps {
            let ts_sub = t + s as f64 * h;
            let d = wind_force(ts_sub, &x, &cfg.wind);
            x = rk4_step(&x, &u, &d, h, p)?;
        }
        let norm = x.norm();
        if !norm.is_finite() || norm > cfg.blowup {
            return Err(HarnessError::DivergedSimulation { t: t + ts, norm });
        }
        du_prev = DVector::from_column_slice((u - trim.u).as_slice());
    }
    Ok(SimLog {
        estimator: cfg.estimator.kind,
        x_eq,
        records,
    })
}

/// Names and order of the regulated variables in reports.
pub const REGULATED_NAMES: [&str; 4] = ["x", "y", "z", "psi"];
const REGULATED_ROWS: [usize; 4] = [0, 1, 2, idx::PSI];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    /// Root mean square of `true - reference` for x, y, z, psi.
    pub tracking: [f64; 4],
    /// Root mean square of `estimate - true` for x, y, z, psi.
    pub estimation: [f64; 4],
}

/// RMSE over every logged tick.
pub fn compute_rmse(log: &SimLog) -> RmseReport {
    let n = log.records.len().max(1) as f64;
    let mut tr = [0.0; 4];
    let mut es = [0.0; 4];
    for r in &log.records {
        let refv = [r.reference.xi[0], r.reference.xi[1], r.reference.xi[2], r.reference.psi];
        for (j, &row) in REGULATED_ROWS.iter().enumerate() {
            tr[j] += (r.x[row] - refv[j]).powi(2);
            es[j] += (log.x_eq[row] + r.est[row] - r.x[row]).powi(2);
        }
    }
    RmseReport {
        tracking: tr.map(|v| (v / n).sqrt()),
        estimation: es.map(|v| (v / n).sqrt()),
    }
}

/// Fraction of ticks whose true regulated states lie inside the estimator
/// bounds, per variable and jointly.
pub fn consistency(log: &SimLog) -> ([f64; 4], f64) {
    let n = log.records.len().max(1) as f64;
    let mut each = [0usize; 4];
    let mut all = 0usize;
    for r in &log.records {
        let mut ok_all = true;
        for (j, &row) in REGULATED_ROWS.iter().enumerate() {
            let v = r.x[row] - log.x_eq[row];
            let ok = v >= r.est_lo[row] && v <= r.est_hi[row];
            each[j] += usize::from(ok);
            ok_all &= ok;
        }
        all += usize::from(ok_all);
    }
    (each.map(|c| c as f64 / n), all as f64 / n)
}

const STATE_NAMES: [&str; 10] = ["x", "y", "z", "phi", "theta", "psi", "gamma1", "gamma2", "alpha_r", "alpha_l"];

/// Column names of `log.csv`, in order.
pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = vec!["k".into(), "t".into()];
    for a in ["x", "y", "z"] {
        h.push(format!("ref_{a}"));
    }
    for a in ["x", "y", "z"] {
        h.push(format!("ref_d{a}"));
    }
    for a in ["x", "y", "z"] {
        h.push(format!("ref_dd{a}_raw"));
    }
    for a in ["x", "y", "z"] {
        h.push(format!("ref_dd{a}"));
    }
    h.push("ref_psi".into());
    for s in STATE_NAMES {
        h.push(s.to_string());
    }
    for s in STATE_NAMES {
        h.push(format!("d{s}"));
    }
    for s in ["f_r", "f_l", "tau_r", "tau_l"] {
        h.push(s.into());
    }
    for a in ["x", "y", "z"] {
        h.push(format!("dist_{a}"));
    }
    for a in ["x", "y", "z"] {
        h.push(format!("wind_{a}"));
    }
    h.push("meas_mask".into());
    let aug: Vec<String> = STATE_NAMES
        .iter()
        .map(|s| s.to_string())
        .chain(STATE_NAMES.iter().map(|s| format!("d{s}")))
        .chain(["dist_x", "dist_y", "dist_z"].iter().map(|s| s.to_string()))
        .collect();
    for prefix in ["est", "lo", "hi"] {
        for s in &aug {
            h.push(format!("{prefix}_{s}"));
        }
    }
    h.push("order".into());
    h
}

fn push_all<'a>(line: &mut String, vals: impl IntoIterator<Item = &'a f64>) {
    for v in vals {
        let _ = write!(line, ",{v}");
    }
}

/// `log.csv` text: header line then one row per tick. Estimates are in
/// deviation coordinates `x - x_eq`.
pub fn log_csv(log: &SimLog) -> String {
    let mut out = csv_header().join(",");
    out.push('\n');
    for r in &log.records {
        let mut line = format!("{},{}", r.k, r.t);
        push_all(&mut line, r.reference.xi.iter());
        push_all(&mut line, r.reference.xi_d.iter());
        push_all(&mut line, r.reference.xi_dd_raw.iter());
        push_all(&mut line, r.reference.xi_dd.iter());
        push_all(&mut line, [r.reference.psi].iter());
        push_all(&mut line, r.x.iter());
        push_all(&mut line, r.u.iter());
        push_all(&mut line, r.d.iter());
        push_all(&mut line, r.wind.iter());
        let mask: u32 = r.meas.indices.iter().map(|&i| 1u32 << i).sum();
        let _ = write!(line, ",{mask}");
        push_all(&mut line, r.est.iter());
        push_all(&mut line, r.est_lo.iter());
        push_all(&mut line, r.est_hi.iter());
        let _ = write!(line, ",{}", r.order);
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct SetLine<'a> {
    k: u64,
    t: f64,
    center: &'a [f64],
    lo: &'a [f64],
    hi: &'a [f64],
    order: usize,
}

/// One JSON object per tick with the estimate center and interval hull.
pub fn sets_jsonl(log: &SimLog) -> String {
    let mut out = String::new();
    for r in &log.records {
        let line = SetLine {
            k: r.k,
            t: r.t,
            center: r.est.as_slice(),
            lo: r.est_lo.as_slice(),
            hi: r.est_hi.as_slice(),
            order: r.order,
        };
        out.push_str(&serde_json::to_string(&line).expect("set line serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub tracking_rmse: f64,
    pub estimation_rmse: f64,
    pub consistency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub estimator: String,
    pub ticks: usize,
    pub duration: f64,
    pub variables: std::collections::BTreeMap<String, VariableSummary>,
    pub joint_consistency: f64,
}

pub fn summarize(log: &SimLog) -> Summary {
    let rmse = compute_rmse(log);
    let (each, joint) = consistency(log);
    let variables = REGULATED_NAMES
        .iter()
        .enumerate()
        .map(|(j, n)| {
            (
                n.to_string(),
                VariableSummary {
                    tracking_rmse: rmse.tracking[j],
                    estimation_rmse: rmse.estimation[j],
                    consistency: each[j],
                },
            )
        })
        .collect();
    Summary {
        estimator: log.estimator.to_string(),
        ticks: log.records.len(),
        duration: log.records.last().map_or(0.0, |r| r.t),
        variables,
        joint_consistency: joint,
    }
}

/// Writes `log.csv`, `sets.jsonl` and `summary.json` into `dir`.
pub fn write_outputs(log: &SimLog, dir: &Path) -> Result<Summary, HarnessError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("log.csv"), log_csv(log))?;
    let mut f = std::fs::File::create(dir.join("sets.jsonl"))?;
    f.write_all(sets_jsonl(log).as_bytes())?;
    let summary = summarize(log);
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// RMSE of the regulated variables read back from a `log.csv`.
pub fn rmse_from_csv(text: &str) -> Result<RmseReport, HarnessError> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| HarnessError::Config("empty log".into()))?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| HarnessError::Config(format!("column {name} missing")))
    };
    let mut cols = Vec::new();
    for n in REGULATED_NAMES {
        cols.push((col(n)?, col(&format!("ref_{n}"))?, col(&format!("est_{n}"))?));
    }
    let mut tr = [0.0; 4];
    let mut es = [0.0; 4];
    let mut n = 0usize;
    // Deviation estimates need the trim offset; the trim has zero load
    // position and yaw, so the estimate columns compare directly.
    for line in lines.filter(|l| !l.is_empty()) {
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| HarnessError::Config(e.to_string())))
            .collect::<Result<_, _>>()?;
        for (j, &(c, r, e)) in cols.iter().enumerate() {
            tr[j] += (v[c] - v[r]).powi(2);
            es[j] += (v[e] - v[c]).powi(2);
        }
        n += 1;
    }
    if n == 0 {
        return Err(HarnessError::Config("log has no rows".into()));
    }
    let n = n as f64;
    Ok(RmseReport {
        tracking: tr.map(|v| (v / n).sqrt()),
        estimation: es.map(|v| (v / n).sqrt()),
    })
}

/// Dense helper for tests and tools: `exp(a dt) x0` via `nalgebra`.
pub fn linear_flow(a: &DMatrix<f64>, x0: &DVector<f64>, dt: f64) -> DVector<f64> {
    (a * dt).exp() * x0
}
