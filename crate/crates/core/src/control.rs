//! Polytopic error model, mixed H2/H-infinity state-feedback synthesis with
//! pole-region constraints, certificate checks and the control law.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use tiltload_lmi::{Block, Factor, LmiProblem, SdpError, SolverOptions, VarId};

use crate::error::ControlError;
use crate::estimation::linearize;
use crate::multibody_dynamics::{
    coriolis_matrix, friction_matrix, gravity_vector, idx, inertia_matrix, input_map, input_pseudo_inverse,
    stack_state, ControlInput, Coords, Trim,
};
use crate::params::ModelParams;

/// Error state plus integral channels for x, y, z and yaw.
pub const N_CHI: usize = 24;
/// States whose tracking errors are integrated.
pub const REGULATED: [usize; 4] = [0, 1, 2, idx::PSI];

/// Bounds on the reference load acceleration, per inertial axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelBounds {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Default for AccelBounds {
    fn default() -> Self {
        AccelBounds {
            lo: [-0.5, -0.5, -0.3],
            hi: [0.5, 0.5, 0.3],
        }
    }
}

impl AccelBounds {
    /// The 8 corners, x varying fastest.
    pub fn corners(&self) -> Vec<Vector3<f64>> {
        (0..8)
            .map(|c| {
                Vector3::from_fn(|a, _| if c >> a & 1 == 0 { self.lo[a] } else { self.hi[a] })
            })
            .collect()
    }

    pub fn clamp(&self, a: &Vector3<f64>) -> Vector3<f64> {
        Vector3::from_fn(|i, _| a[i].clamp(self.lo[i], self.hi[i]))
    }
}

/// `chi+ = A_i chi + B du + F d`, one `A_i` per corner of the bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopicModel {
    pub vertices: Vec<DMatrix<f64>>,
    pub b: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub bounds: AccelBounds,
    pub ts: f64,
}

/// `u = L_in^+ (M q_dd + (C + L_fr) q_d + g)` as the least-squares solution.
pub fn feedforward(q: &Coords, qd: &Coords, qdd: &Coords, p: &ModelParams) -> Result<ControlInput, ControlError> {
    let rhs = inertia_matrix(q, p) * qdd + (coriolis_matrix(q, qd, p) + friction_matrix(p)) * qd + gravity_vector(q, p);
    input_pseudo_inverse(&input_map(q, p), &rhs).ok_or(ControlError::RankDeficientInput)
}

/// Generalized coordinates of the reference: load position and yaw from the
/// trajectory, the remaining angles at trim.
pub fn reference_coords(trim: &Trim, xi: &Vector3<f64>, psi: f64) -> Coords {
    let mut q = trim.q;
    q.fixed_rows_mut::<3>(0).copy_from(xi);
    q[idx::PSI] = psi;
    q
}

fn translational(v: &Vector3<f64>) -> Coords {
    let mut q = Coords::zeros();
    q.fixed_rows_mut::<3>(0).copy_from(v);
    q
}

/// Continuous augmented matrix at acceleration `sigma`.
fn augmented_continuous(trim: &Trim, sigma: &Vector3<f64>, p: &ModelParams) -> Result<DMatrix<f64>, ControlError> {
    let u = feedforward(&trim.q, &Coords::zeros(), &translational(sigma), p)?;
    let lin = linearize(&trim.state(), &u, p)?;
    let mut a = DMatrix::zeros(N_CHI, N_CHI);
    a.view_mut((0, 0), (20, 20)).copy_from(&lin.a);
    for (r, &s) in REGULATED.iter().enumerate() {
        a[(20 + r, s)] = 1.0;
    }
    Ok(a)
}

/// Euler-discretized vertices `I + ts * A~_c(sigma_i)`.
pub fn build_polytopic_model(p: &ModelParams, trim: &Trim, bounds: AccelBounds, ts: f64) -> Result<PolytopicModel, ControlError> {
    let lin = linearize(&trim.state(), &trim.u, p)?;
    let mut b = DMatrix::zeros(N_CHI, 4);
    b.view_mut((0, 0), (20, 4)).copy_from(&(lin.b * ts));
    let mut f = DMatrix::zeros(N_CHI, 3);
    f.view_mut((0, 0), (20, 3)).copy_from(&(lin.f * ts));
    let eye = DMatrix::<f64>::identity(N_CHI, N_CHI);
    let vertices = bounds
        .corners()
        .iter()
        .map(|s| Ok(&eye + augmented_continuous(trim, s, p)? * ts))
        .collect::<Result<Vec<_>, ControlError>>()?;
    Ok(PolytopicModel { vertices, b, f, bounds, ts })
}

impl PolytopicModel {
    /// `A(sigma)` by multilinear interpolation of the vertices; exact
    /// because the model is affine in `sigma`.
    pub fn at(&self, sigma: &Vector3<f64>) -> DMatrix<f64> {
        let w: Vec<f64> = (0..3)
            .map(|a| {
                let span = self.bounds.hi[a] - self.bounds.lo[a];
                if span > 0.0 { (sigma[a] - self.bounds.lo[a]) / span } else { 0.0 }
            })
            .collect();
        let mut out = DMatrix::zeros(self.b.nrows(), self.b.nrows());
        for (c, v) in self.vertices.iter().enumerate() {
            let weight: f64 = (0..3).map(|a| if c >> a & 1 == 0 { 1.0 - w[a] } else { w[a] }).product();
            out += v * weight;
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }
}

/// Weights and constraint parameters of the synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiSpec {
    pub h_z: DMatrix<f64>,
    pub d_zu: DMatrix<f64>,
    pub d_zd: DMatrix<f64>,
    /// Bound on the squared H-infinity norm.
    pub gamma: f64,
    /// Minimum real part; `None` drops the region.
    pub eps: Option<f64>,
    pub varpi: f64,
    /// Maximum imaginary part; `None` drops the region.
    pub tau: Option<f64>,
}

impl LmiSpec {
    /// Bryson-rule weights around the trim inputs.
    pub fn airframe_default(u_eq: &ControlInput) -> Self {
        use std::f64::consts::PI;
        let s = f64::sqrt;
        let diag = [
            s(10.0) / 2.0,
            s(10.0) / 2.0,
            s(10.0) / 2.0,
            s(0.5) / (PI / 2.0),
            s(0.5) / (PI / 2.0),
            s(5.0) / PI,
            1.0 / (PI / 2.0),
            1.0 / (PI / 2.0),
            0.1 / (PI / 2.0),
            0.1 / (PI / 2.0),
            0.5,
            0.5,
            0.5,
            1.0 / (PI / 3.0),
            1.0 / (PI / 3.0),
            1.0 / (PI / 4.0),
            s(5.0) / (3.0 * PI),
            s(5.0) / (3.0 * PI),
            0.1 / (3.0 * PI),
            0.1 / (3.0 * PI),
            s(5.0),
            s(5.0),
            s(5.0),
            s(0.1),
        ];
        let h_z = DMatrix::from_diagonal(&DVector::from_row_slice(&diag));
        let mut d_zu = DMatrix::zeros(24, 4);
        d_zu[(0, 0)] = s(750.0) / (30.0 - u_eq[0]);
        d_zu[(1, 1)] = s(750.0) / (30.0 - u_eq[1]);
        d_zu[(2, 2)] = s(5000.0) / (2.0 - u_eq[2]);
        d_zu[(5, 3)] = s(5000.0) / (2.0 - u_eq[3]);
        let mut d_zd = DMatrix::zeros(24, 3);
        let n = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        d_zd.view_mut((10, 0), (3, 3)).fill_with_identity();
        d_zd.view_mut((13, 0), (2, 3)).copy_from(&n);
        d_zd.row_mut(15).fill(0.5);
        d_zd.view_mut((16, 0), (2, 3)).copy_from(&n);
        d_zd.view_mut((20, 0), (3, 3)).fill_with_identity();
        d_zd.row_mut(23).fill(0.5);
        LmiSpec {
            h_z,
            d_zu,
            d_zd,
            gamma: 81.0,
            eps: Some(0.55),
            varpi: 0.994,
            tau: Some(0.3),
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: &str| Err(ControlError::Certificate(m.to_string()));
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if !(self.varpi > 0.0 && self.varpi <= 1.0) {
            return bad("varpi must lie in (0, 1]");
        }
        if let Some(e) = self.eps {
            if !(e >= 0.0 && e < self.varpi) {
                return bad("eps must lie in [0, varpi)");
            }
        }
        if let Some(t) = self.tau {
            if !(t > 0.0) {
                return bad("tau must be positive");
            }
        }
        if self.h_z.nrows() != self.d_zu.nrows() || self.h_z.nrows() != self.d_zd.nrows() {
            return bad("weight row counts differ");
        }
        Ok(())
    }
}

/// Gain with the solver variables that certify it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCertificate {
    #[serde(rename = "K", with = "rows")]
    pub k: DMatrix<f64>,
    #[serde(rename = "P", with = "rows")]
    pub p: DMatrix<f64>,
    #[serde(rename = "X", with = "rows")]
    pub x: DMatrix<f64>,
    #[serde(rename = "Y", with = "rows")]
    pub y: DMatrix<f64>,
    #[serde(rename = "Omega", with = "rows")]
    pub omega: DMatrix<f64>,
    /// Smallest eigenvalue of each constraint, positive when satisfied.
    pub margins: BTreeMap<String, f64>,
}

/// Row-major nested arrays for matrices.
mod rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().cloned().collect()).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let v: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let r = v.len();
        let c = v.first().map_or(0, |x| x.len());
        if v.iter().any(|row| row.len() != c) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(DMatrix::from_fn(r, c, |i, j| v[i][j]))
    }
}

impl GainCertificate {
    pub fn trace_omega(&self) -> f64 {
        self.omega.trace()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ControlError> {
        serde_json::from_str(text).map_err(|e| ControlError::Certificate(e.to_string()))
    }
}

struct Vars {
    p: VarId,
    x: VarId,
    y: VarId,
    omega: VarId,
}

fn eye(n: usize) -> Factor {
    Factor::Identity(n)
}

fn scaled(n: usize, k: f64) -> Factor {
    Factor::Dense(DMatrix::identity(n, n) * k)
}

/// Assembles the synthesis problem in the solver's block form.
fn build_problem(model: &PolytopicModel, spec: &LmiSpec) -> (LmiProblem, Vars) {
    let n = model.dim();
    let m = model.b.ncols();
    let nd = model.f.ncols();
    let nz = spec.h_z.nrows();
    let mut lp = LmiProblem::new();
    let v = Vars {
        p: lp.symmetric("P", n),
        x: lp.symmetric("X", n),
        y: lp.full("Y", m, n),
        omega: lp.symmetric("Omega", nz),
    };
    lp.minimize_trace(v.omega);
    let b = Factor::Dense(model.b.clone());
    let neg_b = Factor::Dense(-&model.b);

    let mut add = |blk: &mut Block| lp.add_block(blk.clone()).expect("blocks are well formed");

    // H2 cost bound.
    let mut h1 = Block::new("h2_cost", nz + n);
    h1.term(0, 0, scaled(nz, 0.5), v.omega, eye(nz))
        .term(0, nz, Factor::Dense(spec.h_z.clone()), v.x, eye(n))
        .term(0, nz, Factor::Dense(spec.d_zu.clone()), v.y, eye(n))
        .term(nz, nz, eye(n), v.x, eye(n))
        .term(nz, nz, scaled(n, -0.5), v.p, eye(n));
    add(&mut h1);

    for (i, a) in model.vertices.iter().enumerate() {
        let af = Factor::Dense(a.clone());
        let mut h2 = Block::new(format!("h2_vertex_{}", i + 1), 2 * n + nd);
        h2.term(0, 0, scaled(n, 0.5), v.p, eye(n))
            .term(0, n, af.clone(), v.x, eye(n))
            .term(0, n, b.clone(), v.y, eye(n))
            .constant(0, 2 * n, &model.f)
            .term(n, n, eye(n), v.x, eye(n))
            .term(n, n, scaled(n, -0.5), v.p, eye(n))
            .constant(2 * n, 2 * n, &DMatrix::identity(nd, nd));
        add(&mut h2);

        let mut hi = Block::new(format!("hinf_vertex_{}", i + 1), 2 * n + nd + nz);
        hi.term(0, 0, scaled(n, 0.5), v.p, eye(n))
            .term(0, n, af.clone(), v.x, eye(n))
            .term(0, n, b.clone(), v.y, eye(n))
            .constant(0, 2 * n, &model.f)
            .term(n, n, eye(n), v.x, eye(n))
            .term(n, n, scaled(n, -0.5), v.p, eye(n))
            .constant(2 * n, 2 * n, &DMatrix::identity(nd, nd))
            .term(2 * n + nd, n, Factor::Dense(spec.h_z.clone()), v.x, eye(n))
            .term(2 * n + nd, n, Factor::Dense(spec.d_zu.clone()), v.y, eye(n))
            .constant(2 * n, 2 * n + nd, &spec.d_zd.transpose())
            .constant(2 * n + nd, 2 * n + nd, &(DMatrix::identity(nz, nz) * spec.gamma));
        add(&mut hi);

        if let Some(eps) = spec.eps {
            let mut d1 = Block::new(format!("d1_vertex_{}", i + 1), n);
            d1.term(0, 0, Factor::Dense(a - DMatrix::identity(n, n) * eps), v.x, eye(n))
                .term(0, 0, b.clone(), v.y, eye(n));
            add(&mut d1);
        }

        let mut d2 = Block::new(format!("d2_vertex_{}", i + 1), 2 * n);
        d2.term(0, 0, scaled(n, 0.5 * spec.varpi), v.x, eye(n))
            .term(0, n, af.clone(), v.x, eye(n))
            .term(0, n, b.clone(), v.y, eye(n))
            .term(n, n, scaled(n, 0.5 * spec.varpi), v.x, eye(n));
        add(&mut d2);

        if let Some(tau) = spec.tau {
            let mut d3 = Block::new(format!("d3_vertex_{}", i + 1), 2 * n);
            d3.term(0, 0, scaled(n, tau), v.x, eye(n))
                .term(n, n, scaled(n, tau), v.x, eye(n))
                .term(n, 0, af.clone(), v.x, eye(n))
                .term(n, 0, b.clone(), v.y, eye(n))
                .term(0, n, Factor::Dense(-a), v.x, eye(n))
                .term(0, n, neg_b.clone(), v.y, eye(n));
            add(&mut d3);
        }
    }
    let mut pp = Block::new("p_positive", n);
    pp.term(0, 0, scaled(n, 0.5), v.p, eye(n));
    add(&mut pp);
    let mut xp = Block::new("x_positive", n);
    xp.term(0, 0, scaled(n, 0.5), v.x, eye(n));
    add(&mut xp);
    (lp, v)
}

/// The synthesis problem as handed to the solver.
pub fn synthesis_problem(model: &PolytopicModel, spec: &LmiSpec) -> LmiProblem {
    build_problem(model, spec).0
}

/// Runs the SDP and returns the gain `K = -Y X^-1` with its certificate.
pub fn synthesize_gain(model: &PolytopicModel, spec: &LmiSpec, opts: &SolverOptions) -> Result<GainCertificate, ControlError> {
    spec.validate()?;
    let (lp, vars) = build_problem(model, spec);
    // Seed phase I with a large Lyapunov-like guess.
    let mut start = DVector::zeros(lp.num_params());
    let n = model.dim();
    lp.set_value(&mut start, vars.x, &DMatrix::identity(n, n));
    lp.set_value(&mut start, vars.p, &DMatrix::identity(n, n));
    lp.set_value(&mut start, vars.omega, &(DMatrix::identity(spec.h_z.nrows(), spec.h_z.nrows()) * 10.0));
    let sol = lp.solve(opts, Some(&start)).map_err(|e| match e {
        SdpError::Infeasible(s) => ControlError::Infeasible(format!("phase I stopped at s = {s:e}")),
        SdpError::Stall { iterations, gap } => ControlError::SolverStall(format!("{iterations} Newton steps, gap {gap:e}")),
        SdpError::Malformed(m) => ControlError::Certificate(m),
    })?;
    let x = lp.value(&sol.theta, vars.x);
    let y = lp.value(&sol.theta, vars.y);
    let k = -(&y) * x.clone().try_inverse().ok_or_else(|| ControlError::Certificate("X is singular".into()))?;
    let mut cert = GainCertificate {
        k,
        p: lp.value(&sol.theta, vars.p),
        x,
        y,
        omega: lp.value(&sol.theta, vars.omega),
        margins: BTreeMap::new(),
    };
    cert.margins = verify_lmis(&cert, model, spec);
    Ok(cert)
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues().min()
}

fn blocks(parts: &[&[&DMatrix<f64>]]) -> DMatrix<f64> {
    let rows: Vec<usize> = parts.iter().map(|r| r[0].nrows()).collect();
    let cols: Vec<usize> = parts[0].iter().map(|m| m.ncols()).collect();
    let mut out = DMatrix::zeros(rows.iter().sum(), cols.iter().sum());
    let mut r0 = 0;
    for (i, row) in parts.iter().enumerate() {
        let mut c0 = 0;
        for (j, m) in row.iter().enumerate() {
            out.view_mut((r0, c0), (rows[i], cols[j])).copy_from(*m);
            c0 += cols[j];
        }
        r0 += rows[i];
    }
    out
}

/// Minimum eigenvalue of every constraint, assembled densely from the
/// certificate variables; positive means satisfied.
pub fn verify_lmis(cert: &GainCertificate, model: &PolytopicModel, spec: &LmiSpec) -> BTreeMap<String, f64> {
    let n = model.dim();
    let nd = model.f.ncols();
    let nz = spec.h_z.nrows();
    let (p, x, y, om) = (&cert.p, &cert.x, &cert.y, &cert.omega);
    let b = &model.b;
    let f = &model.f;
    let xx = x + x.transpose() - p;
    let z = |r, c| DMatrix::<f64>::zeros(r, c);
    let mut out = BTreeMap::new();

    let hx = &spec.h_z * x + &spec.d_zu * y;
    out.insert("h2_cost".into(), min_eig(&blocks(&[&[om, &hx], &[&hx.transpose(), &xx]])));
    let i_d = DMatrix::identity(nd, nd);
    let g_i = DMatrix::identity(nz, nz) * spec.gamma;
    for (i, a) in model.vertices.iter().enumerate() {
        let v = i + 1;
        let ax = a * x + b * y;
        let h2 = blocks(&[
            &[p, &ax, f],
            &[&ax.transpose(), &xx, &z(n, nd)],
            &[&f.transpose(), &z(nd, n), &i_d],
        ]);
        out.insert(format!("h2_vertex_{v}"), min_eig(&h2));
        let hxt = hx.transpose();
        let hinf = blocks(&[
            &[p, &ax, f, &z(n, nz)],
            &[&ax.transpose(), &xx, &z(n, nd), &hxt],
            &[&f.transpose(), &z(nd, n), &i_d, &spec.d_zd.transpose()],
            &[&z(nz, n), &hx, &spec.d_zd, &g_i],
        ]);
        out.insert(format!("hinf_vertex_{v}"), min_eig(&hinf));
        if let Some(eps) = spec.eps {
            let d1 = x * a.transpose() + a * x + y.transpose() * b.transpose() + b * y - x * (2.0 * eps);
            out.insert(format!("d1_vertex_{v}"), min_eig(&d1));
        }
        // Negated so that a satisfied "< 0" constraint reports a positive margin.
        let wx = x * spec.varpi;
        let d2 = blocks(&[&[&wx, &(-&ax)], &[&(-ax.transpose()), &wx]]);
        out.insert(format!("d2_vertex_{v}"), min_eig(&d2));
        if let Some(tau) = spec.tau {
            let s = x * a.transpose() - a * x + y.transpose() * b.transpose() - b * y;
            let tx = x * (2.0 * tau);
            let d3 = blocks(&[&[&tx, &(-&s)], &[&(-s.transpose()), &tx]]);
            out.insert(format!("d3_vertex_{v}"), min_eig(&d3));
        }
    }
    out.insert("p_positive".into(), min_eig(p));
    out.insert("x_positive".into(), min_eig(x));
    out
}

/// Closed-loop eigenvalues of every vertex.
pub fn closed_loop_eigenvalues(k: &DMatrix<f64>, model: &PolytopicModel) -> Vec<Vec<Complex<f64>>> {
    model
        .vertices
        .iter()
        .map(|a| (a - &model.b * k).complex_eigenvalues().iter().cloned().collect())
        .collect()
}

pub fn in_regions(z: Complex<f64>, eps: f64, varpi: f64, tau: f64) -> bool {
    z.re > eps && z.norm() < varpi && z.im.abs() < tau
}

/// True when every vertex closed-loop eigenvalue lies in all three regions.
pub fn verify_pole_regions(k: &DMatrix<f64>, model: &PolytopicModel, eps: f64, varpi: f64, tau: f64) -> (bool, Vec<Vec<Complex<f64>>>) {
    let eig = closed_loop_eigenvalues(k, model);
    let ok = eig.iter().flatten().all(|z| in_regions(*z, eps, varpi, tau));
    (ok, eig)
}

/// Reference signals at one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub q: Coords,
    pub qd: Coords,
    pub qdd: Coords,
}

impl Reference {
    /// Hover-style reference: trim angles, load at `xi` moving with `xi_d`, `xi_dd`.
    pub fn from_load(trim: &Trim, xi: &Vector3<f64>, xi_d: &Vector3<f64>, xi_dd: &Vector3<f64>, psi: f64) -> Self {
        Reference {
            q: reference_coords(trim, xi, psi),
            qd: translational(xi_d),
            qdd: translational(xi_dd),
        }
    }

    pub fn state(&self) -> crate::multibody_dynamics::StateVec {
        stack_state(&self.q, &self.qd)
    }
}

/// Applies `u = -K chi + u_tr(refs)` and advances the integral channels by
/// one explicit Euler step of the current regulated error. `chi` holds the
/// state error in its first 20 entries and the integrals in the last 4.
pub fn control_step(
    chi: &DVector<f64>,
    k: &DMatrix<f64>,
    refs: &Reference,
    ts: f64,
    p: &ModelParams,
) -> Result<(ControlInput, DVector<f64>), ControlError> {
    let u_ff = feedforward(&refs.q, &refs.qd, &refs.qdd, p)?;
    let du = -(k * chi);
    let u = u_ff + ControlInput::from_column_slice(du.as_slice());
    let mut integ = chi.rows(20, 4).into_owned();
    for (r, &s) in REGULATED.iter().enumerate() {
        integ[r] += ts * chi[s];
    }
    Ok((u, integ))
}

/// Margins recomputed from the solver's own block assembly, as a second
/// path next to [`verify_lmis`].
pub fn solver_block_margins(cert: &GainCertificate, model: &PolytopicModel, spec: &LmiSpec) -> BTreeMap<String, f64> {
    let (lp, v) = build_problem(model, spec);
    let mut theta = DVector::zeros(lp.num_params());
    lp.set_value(&mut theta, v.p, &cert.p);
    lp.set_value(&mut theta, v.x, &cert.x);
    lp.set_value(&mut theta, v.y, &cert.y);
    lp.set_value(&mut theta, v.omega, &cert.omega);
    lp.blocks()
        .iter()
        .enumerate()
        .map(|(b, blk)| (blk.name.clone(), lp.block_value(&theta, b).symmetric_eigenvalues().min()))
        .collect()
}
