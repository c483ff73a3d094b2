use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use tiltload_lmi::*;

/// A block mixing symmetric and full variables with dense factors, sized so
/// that it is comfortably positive definite near theta = 0.
fn mixed_problem(seed: &[f64]) -> LmiProblem {
    let mut next = {
        let mut k = 0;
        move || {
            k += 1;
            seed[k % seed.len()] * ((k * 7 % 5) as f64 - 2.0) * 0.3
        }
    };
    let mut p = LmiProblem::new();
    let x = p.symmetric("X", 3);
    let y = p.full("Y", 2, 3);
    let a = DMatrix::from_fn(3, 3, |_, _| next());
    let b = DMatrix::from_fn(3, 2, |_, _| next());
    let mut blk = Block::new("mixed", 6);
    blk.constant(0, 0, &(DMatrix::identity(3, 3) * 4.0));
    blk.constant(3, 3, &(DMatrix::identity(3, 3) * 5.0));
    blk.term(0, 3, a.clone(), x, Factor::Identity(3));
    blk.term(0, 3, b, y, Factor::Identity(3));
    blk.term(3, 3, Factor::Identity(3), x, Factor::Identity(3));
    blk.term(0, 0, a.transpose() * 0.5, x, a);
    p.add_block(blk).unwrap();
    let mut pd = Block::new("X > 0", 3);
    pd.constant(0, 0, &(DMatrix::identity(3, 3) * 2.0));
    pd.term(0, 0, DMatrix::identity(3, 3) * 0.5, x, Factor::Identity(3));
    p.add_block(pd).unwrap();
    p
}

fn check_derivatives(p: &LmiProblem, theta: &DVector<f64>) {
    let (_, g, h) = p.barrier_derivatives(theta).unwrap();
    let n = theta.len();
    let eps = 1e-6;
    for k in 0..n {
        let mut tp = theta.clone();
        let mut tm = theta.clone();
        tp[k] += eps;
        tm[k] -= eps;
        let (fp, gp, _) = p.barrier_derivatives(&tp).unwrap();
        let (fm, gm, _) = p.barrier_derivatives(&tm).unwrap();
        let fd_g = (fp - fm) / (2.0 * eps);
        assert!((g[k] - fd_g).abs() < 1e-6 * (1.0 + g[k].abs()), "grad {k}: {} vs {fd_g}", g[k]);
        let fd_h = (gp - gm) / (2.0 * eps);
        for j in 0..n {
            assert!(
                (h[(j, k)] - fd_h[j]).abs() < 1e-5 * (1.0 + h[(j, k)].abs()),
                "hess ({j},{k}): {} vs {}",
                h[(j, k)],
                fd_h[j]
            );
        }
    }
}

#[test]
fn barrier_gradient_and_hessian_match_finite_differences() {
    let p = mixed_problem(&[0.3, -1.1, 0.7, 0.2, -0.5]);
    let theta = DVector::from_fn(p.num_params(), |i, _| 0.05 * ((i as f64) * 1.3).sin());
    check_derivatives(&p, &theta);
}

#[test]
fn phase_one_derivatives_match_finite_differences() {
    let p = mixed_problem(&[0.9, 0.4, -0.6]);
    let n = p.num_params();
    let theta = DVector::from_fn(n, |i, _| 0.02 * (i as f64).cos());
    let s = 0.3;
    let (_, g, h) = p.phase_one_derivatives(&theta, s).unwrap();
    let eps = 1e-6;
    let (fp, gp, _) = p.phase_one_derivatives(&theta, s + eps).unwrap();
    let (fm, gm, _) = p.phase_one_derivatives(&theta, s - eps).unwrap();
    assert!((g[n] - (fp - fm) / (2.0 * eps)).abs() < 1e-6);
    let col = (gp - gm) / (2.0 * eps);
    for j in 0..=n {
        assert!((h[(j, n)] - col[j]).abs() < 1e-5, "row {j}");
        assert!((h[(n, j)] - col[j]).abs() < 1e-5);
    }
}

#[test]
fn discrete_lyapunov_feedback_synthesis() {
    // Find K = Y X^-1 with A + B K Schur, via [[X, AX + BY], [., X]] > 0,
    // and minimize trace(X) under X > I.
    let a = DMatrix::from_row_slice(2, 2, &[1.1, 0.3, 0.0, 0.95]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let mut p = LmiProblem::new();
    let x = p.symmetric("X", 2);
    let y = p.full("Y", 1, 2);
    let mut blk = Block::new("stability", 4);
    blk.term(0, 0, DMatrix::identity(2, 2) * 0.5, x, Factor::Identity(2));
    blk.term(2, 2, DMatrix::identity(2, 2) * 0.5, x, Factor::Identity(2));
    blk.term(0, 2, a.clone(), x, Factor::Identity(2));
    blk.term(0, 2, b.clone(), y, Factor::Identity(2));
    p.add_block(blk).unwrap();
    let mut lower = Block::new("X > I", 2);
    lower.constant(0, 0, &(-DMatrix::identity(2, 2)));
    lower.term(0, 0, DMatrix::identity(2, 2) * 0.5, x, Factor::Identity(2));
    p.add_block(lower).unwrap();
    p.minimize_trace(x);
    let sol = p.solve(&SolverOptions::default(), None).unwrap();
    assert!(sol.min_eigenvalue > 0.0);
    let xv = p.value(&sol.theta, x);
    let yv = p.value(&sol.theta, y);
    let k = &yv * xv.try_inverse().unwrap();
    let closed = &a + &b * k;
    let rho = closed
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    assert!(rho < 1.0, "spectral radius {rho}");
    assert!(sol.gap <= 1e-7);
}

#[test]
fn margin_is_respected_at_solution() {
    // min x subject to x >= 0: the optimum sits on the margin.
    let mut p = LmiProblem::new();
    let x = p.symmetric("x", 1);
    let mut b = Block::new("x >= 0", 1);
    b.term(0, 0, DMatrix::from_element(1, 1, 0.5), x, Factor::Identity(1));
    p.add_block(b).unwrap();
    p.minimize_trace(x);
    let opts = SolverOptions { margin: Some(1e-3), ..SolverOptions::default() };
    let sol = p.solve(&opts, None).unwrap();
    assert!(sol.objective > 1e-3);
    assert!(sol.objective < 1e-3 + 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn derivatives_hold_for_random_data(seed in proptest::collection::vec(-1.0..1.0f64, 3..8)) {
        let p = mixed_problem(&seed);
        let theta = DVector::from_fn(p.num_params(), |i, _| 0.03 * seed[i % seed.len()]);
        check_derivatives(&p, &theta);
    }
}
