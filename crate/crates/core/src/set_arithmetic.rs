//! Intervals, zonotopes and strips.
//!
//! A zonotope is `c (+) G B^r`, the image of the unit box `B^r = [-1, 1]^r`
//! under `b -> c + G b`. Floating point rounding is not directed; all
//! containment claims hold at modelling precision.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::SetError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Swaps the bounds if given out of order.
    pub fn new(a: f64, b: f64) -> Self {
        if a <= b {
            Interval { lo: a, hi: b }
        } else {
            Interval { lo: b, hi: a }
        }
    }

    pub fn point(a: f64) -> Self {
        Interval { lo: a, hi: a }
    }

    /// `[-1, 1]`.
    pub fn unit() -> Self {
        Interval { lo: -1.0, hi: 1.0 }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn diam(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.diam()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn checked_div(self, rhs: Interval) -> Result<Interval, SetError> {
        if rhs.contains(0.0) {
            return Err(SetError::DivisionByIntervalContainingZero);
        }
        Ok(self * Interval::new(1.0 / rhs.hi, 1.0 / rhs.lo))
    }

    pub fn scale(self, k: f64) -> Interval {
        Interval::new(self.lo * k, self.hi * k)
    }

    pub fn sqr(self) -> Interval {
        if self.contains(0.0) {
            Interval {
                lo: 0.0,
                hi: (self.lo * self.lo).max(self.hi * self.hi),
            }
        } else {
            Interval::new(self.lo * self.lo, self.hi * self.hi)
        }
    }

    /// Range of `sin` over the interval, including interior extrema.
    pub fn sin(self) -> Interval {
        use std::f64::consts::{FRAC_PI_2, PI};
        if self.diam() >= 2.0 * PI {
            return Interval::unit();
        }
        let mut lo = self.lo.sin().min(self.hi.sin());
        let mut hi = self.lo.sin().max(self.hi.sin());
        // Maxima at pi/2 + 2k pi, minima at -pi/2 + 2k pi.
        let k_max = ((self.lo - FRAC_PI_2) / (2.0 * PI)).ceil();
        if FRAC_PI_2 + 2.0 * PI * k_max <= self.hi {
            hi = 1.0;
        }
        let k_min = ((self.lo + FRAC_PI_2) / (2.0 * PI)).ceil();
        if -FRAC_PI_2 + 2.0 * PI * k_min <= self.hi {
            lo = -1.0;
        }
        Interval { lo, hi }
    }

    pub fn cos(self) -> Interval {
        (self + Interval::point(std::f64::consts::FRAC_PI_2)).sin()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval {
            lo: self.lo + rhs.lo,
            hi: self.hi + rhs.hi,
        }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval {
            lo: self.lo - rhs.hi,
            hi: self.hi - rhs.lo,
        }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let p = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        Interval {
            lo: p.iter().cloned().fold(f64::INFINITY, f64::min),
            hi: p.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Matrix with interval entries, stored as bound matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    pub lo: DMatrix<f64>,
    pub hi: DMatrix<f64>,
}

impl IntervalMatrix {
    pub fn new(lo: DMatrix<f64>, hi: DMatrix<f64>) -> Result<Self, SetError> {
        if lo.shape() != hi.shape() {
            return Err(SetError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        let (lo, hi) = (lo.zip_map(&hi, f64::min), lo.zip_map(&hi, f64::max));
        Ok(IntervalMatrix { lo, hi })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Interval) -> Self {
        let mut lo = DMatrix::zeros(rows, cols);
        let mut hi = DMatrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                let v = f(i, j);
                lo[(i, j)] = v.lo;
                hi[(i, j)] = v.hi;
            }
        }
        IntervalMatrix { lo, hi }
    }

    pub fn point(m: DMatrix<f64>) -> Self {
        IntervalMatrix { lo: m.clone(), hi: m }
    }

    pub fn get(&self, i: usize, j: usize) -> Interval {
        Interval {
            lo: self.lo[(i, j)],
            hi: self.hi[(i, j)],
        }
    }

    pub fn mid(&self) -> DMatrix<f64> {
        (&self.lo + &self.hi) * 0.5
    }

    pub fn diam(&self) -> DMatrix<f64> {
        &self.hi - &self.lo
    }

    pub fn shape(&self) -> (usize, usize) {
        self.lo.shape()
    }

    /// `self * m` for a real matrix `m`, exact for interval x point products.
    pub fn mul_real(&self, m: &DMatrix<f64>) -> Result<IntervalMatrix, SetError> {
        if self.lo.ncols() != m.nrows() {
            return Err(SetError::DimensionMismatch {
                expected: self.lo.ncols(),
                got: m.nrows(),
            });
        }
        let mid = self.mid() * m;
        let rad = (self.diam() * 0.5) * m.abs();
        Ok(IntervalMatrix {
            lo: &mid - &rad,
            hi: &mid + &rad,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ZonotopeJson", into = "ZonotopeJson")]
pub struct Zonotope {
    pub c: DVector<f64>,
    pub g: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct ZonotopeJson {
    c: Vec<f64>,
    #[serde(rename = "G")]
    g: Vec<Vec<f64>>,
}

impl From<Zonotope> for ZonotopeJson {
    fn from(z: Zonotope) -> Self {
        ZonotopeJson {
            c: z.c.iter().cloned().collect(),
            g: (0..z.g.nrows())
                .map(|i| z.g.row(i).iter().cloned().collect())
                .collect(),
        }
    }
}

impl TryFrom<ZonotopeJson> for Zonotope {
    type Error = String;
    fn try_from(j: ZonotopeJson) -> Result<Self, String> {
        let n = j.c.len();
        if j.g.len() != n {
            return Err(format!("G has {} rows, center has {n}", j.g.len()));
        }
        let r = j.g.first().map_or(0, |row| row.len());
        if j.g.iter().any(|row| row.len() != r) {
            return Err("ragged generator matrix".into());
        }
        Ok(Zonotope {
            c: DVector::from_vec(j.c),
            g: DMatrix::from_fn(n, r, |i, k| j.g[i][k]),
        })
    }
}

fn check_dim(expected: usize, got: usize) -> Result<(), SetError> {
    if expected == got {
        Ok(())
    } else {
        Err(SetError::DimensionMismatch { expected, got })
    }
}

/// Outcome of a point-membership query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub inside: bool,
    /// False when the iteration cap was reached before the test settled.
    pub converged: bool,
    /// `|c + G b - p|` at the best box-feasible `b` found.
    pub residual: f64,
}

impl Zonotope {
    pub fn new(c: DVector<f64>, g: DMatrix<f64>) -> Result<Self, SetError> {
        check_dim(c.len(), g.nrows())?;
        Ok(Zonotope { c, g })
    }

    pub fn point(c: DVector<f64>) -> Self {
        let n = c.len();
        Zonotope { c, g: DMatrix::zeros(n, 0) }
    }

    /// `c (+) diag(radii) B^n`.
    pub fn from_box(c: DVector<f64>, radii: &DVector<f64>) -> Result<Self, SetError> {
        check_dim(c.len(), radii.len())?;
        Ok(Zonotope {
            c,
            g: DMatrix::from_diagonal(radii),
        })
    }

    pub fn unit_box(n: usize) -> Self {
        Zonotope {
            c: DVector::zeros(n),
            g: DMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// Number of generators.
    pub fn order(&self) -> usize {
        self.g.ncols()
    }

    /// `A Z (+) t`.
    pub fn affine_image(&self, a: &DMatrix<f64>, t: &DVector<f64>) -> Result<Zonotope, SetError> {
        check_dim(self.dim(), a.ncols())?;
        check_dim(a.nrows(), t.len())?;
        Ok(Zonotope {
            c: a * &self.c + t,
            g: a * &self.g,
        })
    }

    pub fn translate(&self, t: &DVector<f64>) -> Result<Zonotope, SetError> {
        check_dim(self.dim(), t.len())?;
        Ok(Zonotope {
            c: &self.c + t,
            g: self.g.clone(),
        })
    }

    pub fn minkowski_sum(&self, other: &Zonotope) -> Result<Zonotope, SetError> {
        check_dim(self.dim(), other.dim())?;
        Ok(Zonotope {
            c: &self.c + &other.c,
            g: hcat(&self.g, &other.g),
        })
    }

    /// Per-axis radius `sum_j |G_ij|`.
    pub fn radii(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| self.g.row(i).iter().map(|v| v.abs()).sum())
    }

    pub fn interval_hull(&self) -> Vec<Interval> {
        let r = self.radii();
        (0..self.dim())
            .map(|i| Interval {
                lo: self.c[i] - r[i],
                hi: self.c[i] + r[i],
            })
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(&self.g)
    }

    /// Membership test with the default budget of 500 iterations.
    pub fn contains_point(&self, p: &DVector<f64>, tol: f64) -> bool {
        self.membership(p, tol, 500).inside
    }

    /// Decides whether `|c + G b - p| <= tol` for some `|b|_inf <= 1` by
    /// accelerated projected gradient on `1/2 |G b - (p - c)|^2` over the
    /// box, starting from the clipped least-norm solution.
    pub fn membership(&self, p: &DVector<f64>, tol: f64, max_iter: usize) -> Membership {
        let d = p - &self.c;
        let scale = d.amax().max(self.g.amax()).max(1.0);
        let thresh = tol * scale;
        let r = self.order();
        if r == 0 {
            let res = d.norm();
            return Membership { inside: res <= thresh, converged: true, residual: res };
        }
        // Outside the interval hull is outside the set.
        let radii = self.radii();
        for i in 0..self.dim() {
            if d[i].abs() > radii[i] + thresh {
                return Membership { inside: false, converged: true, residual: d[i].abs() - radii[i] };
            }
        }
        let clip = |v: &mut DVector<f64>| v.apply(|x| *x = x.clamp(-1.0, 1.0));
        let mut b = if r <= 64 && self.dim() <= 64 {
            self.g
                .clone()
                .svd(true, true)
                .solve(&d, 1e-12)
                .unwrap_or_else(|_| DVector::zeros(r))
        } else {
            DVector::zeros(r)
        };
        clip(&mut b);
        let lip = self.g.norm_squared().max(1e-300);
        let mut y = b.clone();
        let mut t = 1.0f64;
        let mut residual = (&self.g * &b - &d).norm();
        for _ in 0..max_iter {
            if residual <= thresh {
                return Membership { inside: true, converged: true, residual };
            }
            let grad = self.g.tr_mul(&(&self.g * &y - &d));
            let mut next = &y - grad / lip;
            clip(&mut next);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let res_next = (&self.g * &next - &d).norm();
            // Restart momentum when the residual goes up.
            if res_next > residual {
                y = b.clone();
                t = 1.0;
                continue;
            }
            y = &next + (&next - &b) * ((t - 1.0) / t_next);
            b = next;
            t = t_next;
            residual = res_next;
        }
        Membership { inside: residual <= thresh, converged: false, residual }
    }
}

pub fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

pub fn frobenius_norm(g: &DMatrix<f64>) -> f64 {
    g.norm()
}

/// `c (+) [mid(G) H] B^(n+r)` with `H_ii = 1/2 sum_j diam(G)_ij`: one
/// zonotope containing every member of the family `c (+) G B^r, G in Ĝ`.
pub fn zonotope_inclusion(c: &DVector<f64>, g: &IntervalMatrix) -> Result<Zonotope, SetError> {
    check_dim(c.len(), g.shape().0)?;
    let diam = g.diam();
    let h = DVector::from_fn(c.len(), |i, _| 0.5 * diam.row(i).sum());
    Ok(Zonotope {
        c: c.clone(),
        g: hcat(&g.mid(), &DMatrix::from_diagonal(&h)),
    })
}

/// Limits the number of generators to `r_max`: the `r_max - n` longest
/// generators are kept and the rest are replaced by their bounding box.
/// Zonotopes already within budget are returned as is.
pub fn order_reduction(z: &Zonotope, r_max: usize) -> Result<Zonotope, SetError> {
    let n = z.dim();
    if r_max < n {
        return Err(SetError::InvalidBudget { r_max, n });
    }
    let r = z.order();
    if r <= r_max {
        return Ok(z.clone());
    }
    let norms: Vec<f64> = (0..r).map(|j| z.g.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..r).collect();
    // Stable: equal norms keep their original order.
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let keep = r_max - n;
    let mut g = DMatrix::zeros(n, r_max);
    for (k, &j) in order[..keep].iter().enumerate() {
        g.set_column(k, &z.g.column(j));
    }
    for &j in &order[keep..] {
        for i in 0..n {
            g[(i, keep + i)] += z.g[(i, j)].abs();
        }
    }
    Ok(Zonotope { c: z.c.clone(), g })
}

/// Prediction for an affine map `x -> A x + bu` with additive `w in W`:
/// `(A c_x + bu + c_w) (+) [G_w  A G_x]`.
pub fn kuhn_predict_affine(
    a: &DMatrix<f64>,
    bu: &DVector<f64>,
    x: &Zonotope,
    w: &Zonotope,
) -> Result<Zonotope, SetError> {
    check_dim(x.dim(), a.ncols())?;
    check_dim(a.nrows(), bu.len())?;
    check_dim(a.nrows(), w.dim())?;
    Ok(Zonotope {
        c: a * &x.c + bu + &w.c,
        g: hcat(&w.g, &(a * &x.g)),
    })
}

/// General form: given `z_q` containing `f(c_x, W)` and an interval
/// enclosure `jac` of the state Jacobian of `f` over `X x W`, returns
/// `z_q (+) inclusion(jac * G_x)`, which contains `f(X, W)`.
pub fn kuhn_predict(z_q: &Zonotope, jac: &IntervalMatrix, x: &Zonotope) -> Result<Zonotope, SetError> {
    check_dim(z_q.dim(), jac.shape().0)?;
    let m = jac.mul_real(&x.g)?;
    let spread = zonotope_inclusion(&DVector::zeros(z_q.dim()), &m)?;
    z_q.minkowski_sum(&spread)
}

/// `{x : |rho^T x - gamma| <= sigma}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Strip {
    pub rho: DVector<f64>,
    pub gamma: f64,
    pub sigma: f64,
}

impl Strip {
    pub fn new(rho: DVector<f64>, gamma: f64, sigma: f64) -> Result<Self, SetError> {
        if !(sigma >= 0.0) || rho.amax() == 0.0 {
            return Err(SetError::DegenerateSet(sigma));
        }
        Ok(Strip { rho, gamma, sigma })
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        (self.rho.dot(x) - self.gamma).abs() <= self.sigma + tol
    }
}

/// Strip of states consistent with `y_i = h^T x + v_i`, where the noise
/// lies in `noise_center (+) noise_radius B`. Independent of any prior set.
pub fn strip_from_linear_measurement(
    h_row: &DVector<f64>,
    noise_center: f64,
    noise_radius: f64,
    y_i: f64,
) -> Result<Strip, SetError> {
    let s = -noise_center;
    Strip::new(h_row.clone(), y_i + s, noise_radius)
}

/// Zonotope containing `Z ∩ S`, parametrized by `lambda`.
pub fn intersect_zonotope_strip(z: &Zonotope, s: &Strip, lambda: &DVector<f64>) -> Result<Zonotope, SetError> {
    check_dim(z.dim(), s.rho.len())?;
    check_dim(z.dim(), lambda.len())?;
    let n = z.dim();
    let c = &z.c + lambda * (s.gamma - s.rho.dot(&z.c));
    // (I - lambda rho^T) G = G - lambda (rho^T G)
    let rho_g = s.rho.transpose() * &z.g;
    let mut g = DMatrix::zeros(n, z.order() + 1);
    g.columns_mut(0, z.order()).copy_from(&(&z.g - lambda * rho_g));
    g.set_column(z.order(), &(lambda * s.sigma));
    Ok(Zonotope { c, g })
}

/// `lambda` minimizing the Frobenius norm of the intersection's generators.
pub fn optimal_lambda(z: &Zonotope, s: &Strip) -> Result<DVector<f64>, SetError> {
    check_dim(z.dim(), s.rho.len())?;
    let gt_rho = z.g.tr_mul(&s.rho);
    let num = &z.g * &gt_rho;
    let den = gt_rho.norm_squared() + s.sigma * s.sigma;
    let scale = (s.rho.norm_squared() * z.g.norm_squared()).max(s.sigma * s.sigma);
    if !(den > 1e-300 && den > 1e-14 * scale) {
        return Err(SetError::DegenerateSet(den));
    }
    Ok(num / den)
}
