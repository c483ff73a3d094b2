#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tiltload::estimation::{EstimatorModel, KalmanNoise, KalmanState, MeasurementSet, NoiseModel};
use tiltload::set_arithmetic::Zonotope;

/// Facet description of a full-dimensional zonotope in 2 or 3 dimensions:
/// rows `(n, h)` with `|n^T (x - c)| <= h`.
pub struct Facets {
    pub c: DVector<f64>,
    pub rows: Vec<(DVector<f64>, f64)>,
}

impl Facets {
    pub fn of(z: &Zonotope) -> Facets {
        let n = z.c.len();
        let r = z.g.ncols();
        let mut normals: Vec<DVector<f64>> = Vec::new();
        match n {
            1 => normals.push(DVector::from_element(1, 1.0)),
            2 => {
                for j in 0..r {
                    normals.push(DVector::from_vec(vec![-z.g[(1, j)], z.g[(0, j)]]));
                }
            }
            3 => {
                for a in 0..r {
                    for b in a + 1..r {
                        let u = Vector3::new(z.g[(0, a)], z.g[(1, a)], z.g[(2, a)]);
                        let v = Vector3::new(z.g[(0, b)], z.g[(1, b)], z.g[(2, b)]);
                        let w = u.cross(&v);
                        normals.push(DVector::from_column_slice(w.as_slice()));
                    }
                }
            }
            _ => panic!("facet oracle supports n <= 3"),
        }
        let rows = normals
            .into_iter()
            .filter_map(|nv| {
                let len = nv.norm();
                if len < 1e-12 {
                    return None;
                }
                let nv = nv / len;
                let h = (0..r).map(|j| nv.dot(&z.g.column(j)).abs()).sum();
                Some((nv, h))
            })
            .collect();
        Facets { c: z.c.clone(), rows }
    }

    /// Largest facet violation; positive means outside.
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.c;
        self.rows
            .iter()
            .map(|(nv, h)| nv.dot(&d).abs() - h)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.violation(x) <= tol
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

pub fn random_zonotope(rng: &mut ChaCha8Rng, n: usize, r: usize) -> Zonotope {
    Zonotope::new(random_vector(rng, n, 2.0), random_matrix(rng, n, r, 1.0)).unwrap()
}

/// Point of `z`: half the draws are box vertices, the rest uniform.
pub fn sample(rng: &mut ChaCha8Rng, z: &Zonotope) -> DVector<f64> {
    let vertex = rng.random_bool(0.5);
    let b = DVector::from_fn(z.g.ncols(), |_, _| {
        if vertex {
            if rng.random_bool(0.5) { 1.0 } else { -1.0 }
        } else {
            rng.random_range(-1.0..=1.0)
        }
    });
    &z.c + &z.g * b
}

/// Random linear plant with multirate rows and box noise.
pub struct Synthetic {
    pub model: EstimatorModel,
    pub noise: NoiseModel,
    pub schedule: Vec<usize>,
}

impl Synthetic {
    pub fn new(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Self {
        let raw = random_matrix(rng, n, n, 1.0);
        let rho = raw.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        let a = raw * (0.95 / rho);
        let b = random_matrix(rng, n, 1, 1.0);
        let h = random_matrix(rng, m, n, 1.0);
        let w = DVector::from_fn(n, |_, _| rng.random_range(0.01..0.05));
        let v = DVector::from_fn(m, |_, _| rng.random_range(0.02..0.1));
        let offset = random_vector(rng, m, 1.0);
        Synthetic {
            model: EstimatorModel::new(a, b, h).unwrap(),
            noise: NoiseModel::from_radii(&w, &offset, &v).unwrap(),
            schedule: (0..m).map(|i| i + 1).collect(),
        }
    }

    pub fn measure(&self, rng: &mut ChaCha8Rng, k: usize, x: &DVector<f64>) -> MeasurementSet {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &period) in self.schedule.iter().enumerate() {
            if k.is_multiple_of(period) {
                let v = sample(rng, &self.noise.v)[i];
                idx.push(i);
                val.push((self.model.h.row(i) * x)[0] + v);
            }
        }
        MeasurementSet::new(idx, val).unwrap()
    }
}

/// Information-form smoother over the whole window; returns the final
/// state's posterior mean and covariance.
pub fn batch_estimate(
    model: &EstimatorModel,
    noise: &KalmanNoise,
    prior: &KalmanState,
    inputs: &[DVector<f64>],
    ys: &[MeasurementSet],
) -> (DVector<f64>, DMatrix<f64>) {
    let n = model.dim();
    let steps = ys.len();
    let dim = n * (steps + 1);
    let mut info = DMatrix::zeros(dim, dim);
    let mut vec = DVector::zeros(dim);
    let mut add = |rows: DMatrix<f64>, target: DVector<f64>, weight: DMatrix<f64>| {
        info += rows.transpose() * &weight * &rows;
        vec += rows.transpose() * &weight * target;
    };
    let mut sel = DMatrix::zeros(n, dim);
    sel.view_mut((0, 0), (n, n)).fill_with_identity();
    add(sel, prior.mean.clone(), prior.cov.clone().try_inverse().unwrap());
    let qinv = noise.p_w.clone().try_inverse().unwrap();
    for k in 0..steps {
        let mut rows = DMatrix::zeros(n, dim);
        rows.view_mut((0, n * (k + 1)), (n, n)).fill_with_identity();
        rows.view_mut((0, n * k), (n, n)).copy_from(&(-&model.a));
        add(rows, &model.b * &inputs[k], qinv.clone());
        for (&i, &y) in ys[k].indices.iter().zip(&ys[k].values) {
            let mut rows = DMatrix::zeros(1, dim);
            rows.view_mut((0, n * (k + 1)), (1, n)).copy_from(&model.h.row(i));
            add(rows, DVector::from_element(1, y - noise.offset[i]), DMatrix::from_element(1, 1, 1.0 / noise.p_v[i]));
        }
    }
    let cov = info.try_inverse().unwrap();
    let mean = &cov * vec;
    (mean.rows(n * steps, n).into_owned(), cov.view((n * steps, n * steps), (n, n)).into_owned())
}
