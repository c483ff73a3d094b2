//! A small dense interior-point solver for semidefinite programs whose
//! constraints are block LMIs built from matrix variables.
//!
//! Each block is `F(theta) = F0 + sum_t (L_t V_t R_t^T + R_t V_t^T L_t^T)`
//! and the solver enforces `F(theta) >= margin * I` for every block while
//! minimizing a linear objective. The default method is an infeasible-start
//! primal-dual path follower with Nesterov-Todd scaling; a pure log-barrier
//! method is kept as [`Method::Barrier`] and for phase I. Gradients and
//! Hessians are assembled directly from the term structure, so no dense
//! `dF/dtheta_k` matrices are ever formed.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("problem is infeasible (phase I stalled at s = {0:e})")]
    Infeasible(f64),
    #[error("solver stalled after {iterations} Newton steps (gap {gap:e})")]
    Stall { iterations: usize, gap: f64 },
    #[error("malformed problem: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarShape {
    Symmetric(usize),
    Full(usize, usize),
}

impl VarShape {
    pub fn rows(&self) -> usize {
        match *self {
            VarShape::Symmetric(n) => n,
            VarShape::Full(r, _) => r,
        }
    }

    pub fn cols(&self) -> usize {
        match *self {
            VarShape::Symmetric(n) => n,
            VarShape::Full(_, c) => c,
        }
    }

    pub fn num_params(&self) -> usize {
        match *self {
            VarShape::Symmetric(n) => n * (n + 1) / 2,
            VarShape::Full(r, c) => r * c,
        }
    }
}

#[derive(Debug, Clone)]
struct Variable {
    name: String,
    shape: VarShape,
    /// Parameter index of each entry, column-major over the full matrix.
    index: Vec<usize>,
}

impl Variable {
    fn entry(&self, i: usize, j: usize) -> usize {
        self.index[i + j * self.shape.rows()]
    }
}

/// Left or right factor of a term; `Identity` skips the multiplication.
#[derive(Debug, Clone)]
pub enum Factor {
    Identity(usize),
    Dense(DMatrix<f64>),
}

impl Factor {
    fn nrows(&self) -> usize {
        match self {
            Factor::Identity(n) => *n,
            Factor::Dense(m) => m.nrows(),
        }
    }

    fn ncols(&self) -> usize {
        match self {
            Factor::Identity(n) => *n,
            Factor::Dense(m) => m.ncols(),
        }
    }

    fn lmul(&self, m: DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Factor::Identity(_) => m,
            Factor::Dense(a) => a * m,
        }
    }

    fn rmul(&self, m: DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Factor::Identity(_) => m,
            Factor::Dense(a) => m * a,
        }
    }

    fn tr_lmul(&self, m: DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Factor::Identity(_) => m,
            Factor::Dense(a) => a.tr_mul(&m),
        }
    }

    fn tr_rmul(&self, m: DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Factor::Identity(_) => m,
            Factor::Dense(a) => m * a.transpose(),
        }
    }
}

impl From<DMatrix<f64>> for Factor {
    fn from(m: DMatrix<f64>) -> Self {
        Factor::Dense(m)
    }
}

/// `M + M^T` added to a block, where `M` places `left * V * right` at
/// rows `row..` and columns `col..`.
#[derive(Debug, Clone)]
struct Term {
    var: VarId,
    row: usize,
    col: usize,
    left: Factor,
    right: Factor,
}

#[derive(Debug, Clone)]
pub struct Block {
    pub name: String,
    size: usize,
    constant: DMatrix<f64>,
    terms: Vec<Term>,
}

impl Block {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Block {
            name: name.into(),
            size,
            constant: DMatrix::zeros(size, size),
            terms: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Adds a constant sub-block at `(row, col)` and its transpose at
    /// `(col, row)`. On the diagonal the sub-block must be symmetric and is
    /// added once.
    pub fn constant(&mut self, row: usize, col: usize, m: &DMatrix<f64>) -> &mut Self {
        let mut view = self.constant.view_mut((row, col), (m.nrows(), m.ncols()));
        view += m;
        if row != col {
            let mut view = self.constant.view_mut((col, row), (m.ncols(), m.nrows()));
            view += m.transpose();
        }
        self
    }

    /// Adds `M + M^T` with `M = left * V * right` placed at `(row, col)`.
    /// For `row == col` this is the symmetric part doubled, so a symmetric
    /// variable alone on the diagonal takes `left = 0.5 * I`.
    pub fn term(
        &mut self,
        row: usize,
        col: usize,
        left: impl Into<Factor>,
        var: VarId,
        right: impl Into<Factor>,
    ) -> &mut Self {
        self.terms.push(Term {
            var,
            row,
            col,
            left: left.into(),
            right: right.into(),
        });
        self
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Stop when the duality measure falls below this: `m / t` for the
    /// barrier method, the relative gap `<S, Z> / (1 + |c^T theta|)` for
    /// the primal-dual method.
    pub gap_tol: f64,
    /// Relative dual residual accepted by the primal-dual method.
    pub dual_tol: f64,
    pub max_newton: usize,
    pub mu: f64,
    /// Blocks are enforced as `F >= margin * I`. `None` uses
    /// `1e-7 * max(1, max |F0|)`.
    pub margin: Option<f64>,
    /// Proximal weight `kappa/2 |theta|^2` added in phase I so the
    /// centering problem stays bounded on unbounded feasible sets.
    pub phase_one_prox: f64,
    pub method: Method,
    pub verbose: bool,
}

/// Algorithm used once phase I has found a strictly feasible point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Primal-dual path following with Nesterov-Todd scaling and a
    /// Mehrotra-type corrector.
    PrimalDual,
    /// Pure log-barrier path following.
    Barrier,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap_tol: 1e-7,
            dual_tol: 1e-5,
            max_newton: 600,
            mu: 8.0,
            margin: None,
            phase_one_prox: 1e-4,
            method: Method::PrimalDual,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub theta: DVector<f64>,
    pub objective: f64,
    pub gap: f64,
    pub newton_steps: usize,
    pub margin: f64,
    /// Smallest eigenvalue over all blocks at the returned point.
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LmiProblem {
    vars: Vec<Variable>,
    blocks: Vec<Block>,
    objective: Vec<f64>,
    n: usize,
}

struct NtScaling {
    g: DMatrix<f64>,
    h: DMatrix<f64>,
    lambda: DVector<f64>,
}

/// Per-block state needed for derivatives.
struct Eval {
    inv: Vec<DMatrix<f64>>,
    barrier: f64,
}

impl LmiProblem {
    pub fn new() -> Self {
        Self::default()
    }

    fn add_var(&mut self, name: &str, shape: VarShape) -> VarId {
        let (r, c) = (shape.rows(), shape.cols());
        let offset = self.n;
        let mut index = vec![0; r * c];
        match shape {
            VarShape::Symmetric(n) => {
                let mut k = offset;
                for j in 0..n {
                    for i in 0..=j {
                        index[i + j * n] = k;
                        index[j + i * n] = k;
                        k += 1;
                    }
                }
            }
            VarShape::Full(..) => {
                for (e, slot) in index.iter_mut().enumerate() {
                    *slot = offset + e;
                }
            }
        }
        self.n += shape.num_params();
        self.objective.resize(self.n, 0.0);
        self.vars.push(Variable {
            name: name.to_string(),
            shape,
            index,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn symmetric(&mut self, name: &str, n: usize) -> VarId {
        self.add_var(name, VarShape::Symmetric(n))
    }

    pub fn full(&mut self, name: &str, rows: usize, cols: usize) -> VarId {
        self.add_var(name, VarShape::Full(rows, cols))
    }

    pub fn shape(&self, v: VarId) -> VarShape {
        self.vars[v.0].shape
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.vars[v.0].name
    }

    pub fn num_params(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Total dimension of all blocks (the barrier parameter).
    pub fn barrier_degree(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }

    pub fn add_block(&mut self, block: Block) -> Result<(), SdpError> {
        let p = block.size;
        if (&block.constant - block.constant.transpose()).amax() > 1e-12 * block.constant.amax().max(1.0) {
            return Err(SdpError::Malformed(format!("block {} constant is not symmetric", block.name)));
        }
        for t in &block.terms {
            let shape = self
                .vars
                .get(t.var.0)
                .ok_or_else(|| SdpError::Malformed("unknown variable".into()))?
                .shape;
            let ok = t.left.ncols() == shape.rows()
                && t.right.nrows() == shape.cols()
                && t.row + t.left.nrows() <= p
                && t.col + t.right.ncols() <= p;
            if !ok {
                return Err(SdpError::Malformed(format!(
                    "term on {} in block {} does not fit",
                    self.vars[t.var.0].name, block.name
                )));
            }
        }
        self.blocks.push(block);
        Ok(())
    }

    /// Objective `sum <C, V>` accumulated per variable. For symmetric
    /// variables `C` should be symmetric.
    pub fn add_objective(&mut self, v: VarId, c: &DMatrix<f64>) {
        let var = &self.vars[v.0];
        let (r, cols) = (var.shape.rows(), var.shape.cols());
        for j in 0..cols {
            for i in 0..r {
                self.objective[var.entry(i, j)] += c[(i, j)];
            }
        }
    }

    pub fn minimize_trace(&mut self, v: VarId) {
        let n = self.vars[v.0].shape.rows();
        self.add_objective(v, &DMatrix::identity(n, n));
    }

    pub fn objective_value(&self, theta: &DVector<f64>) -> f64 {
        self.objective.iter().zip(theta.iter()).map(|(c, x)| c * x).sum()
    }

    pub fn value(&self, theta: &DVector<f64>, v: VarId) -> DMatrix<f64> {
        let var = &self.vars[v.0];
        let (r, c) = (var.shape.rows(), var.shape.cols());
        DMatrix::from_fn(r, c, |i, j| theta[var.entry(i, j)])
    }

    /// Writes a matrix into the parameter vector (symmetric variables take
    /// the symmetric part).
    pub fn set_value(&self, theta: &mut DVector<f64>, v: VarId, m: &DMatrix<f64>) {
        let var = &self.vars[v.0];
        match var.shape {
            VarShape::Symmetric(n) => {
                for j in 0..n {
                    for i in 0..=j {
                        theta[var.entry(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
                    }
                }
            }
            VarShape::Full(r, c) => {
                for j in 0..c {
                    for i in 0..r {
                        theta[var.entry(i, j)] = m[(i, j)];
                    }
                }
            }
        }
    }

    /// `F_b(theta)` without any margin shift.
    pub fn block_value(&self, theta: &DVector<f64>, b: usize) -> DMatrix<f64> {
        let block = &self.blocks[b];
        let mut f = block.constant.clone();
        for t in &block.terms {
            let v = self.value(theta, t.var);
            let m = t.right.rmul(t.left.lmul(v));
            {
                let mut view = f.view_mut((t.row, t.col), (m.nrows(), m.ncols()));
                view += &m;
            }
            let mut view = f.view_mut((t.col, t.row), (m.ncols(), m.nrows()));
            view += m.transpose();
        }
        f
    }

    pub fn min_eigenvalue(&self, theta: &DVector<f64>) -> f64 {
        (0..self.blocks.len())
            .map(|b| self.block_value(theta, b).symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min)
    }

    fn default_margin(&self) -> f64 {
        let scale = self
            .blocks
            .iter()
            .map(|b| b.constant.amax())
            .fold(1.0, f64::max);
        1e-7 * scale
    }

    /// Cholesky-based evaluation of `-sum log det (F_b - shift I)`.
    fn evaluate(&self, theta: &DVector<f64>, shift: f64, s: f64, want_inverse: bool) -> Option<Eval> {
        let mut inv = Vec::with_capacity(self.blocks.len());
        let mut barrier = 0.0;
        for b in 0..self.blocks.len() {
            let mut f = self.block_value(theta, b);
            let p = f.nrows();
            for i in 0..p {
                f[(i, i)] += s - shift;
            }
            let chol = f.cholesky()?;
            let l = chol.l_dirty();
            for i in 0..p {
                let d = l[(i, i)];
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                barrier -= 2.0 * d.ln();
            }
            if want_inverse {
                inv.push(chol.inverse());
            }
        }
        Some(Eval { inv, barrier })
    }

    fn sub(w: &DMatrix<f64>, r: usize, nr: usize, c: usize, nc: usize) -> DMatrix<f64> {
        w.view((r, c), (nr, nc)).into_owned()
    }

    /// Gradient and Hessian of the barrier. With `phase_one` the extra
    /// parameter `s` (entering every block as `s I`) is appended last.
    fn derivatives(&self, ev: &Eval, phase_one: bool) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n + usize::from(phase_one);
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for (b, block) in self.blocks.iter().enumerate() {
            let w = &ev.inv[b];
            let w2 = if phase_one { Some(w * w) } else { None };
            let terms = &block.terms;
            for (si, s) in terms.iter().enumerate() {
                let vs = &self.vars[s.var.0];
                let (a_s, b_s) = (vs.shape.rows(), vs.shape.cols());
                let (nr_s, nc_s) = (s.left.nrows(), s.right.ncols());
                // G = l^T W[r, c] rho^T, the derivative with respect to V.
                let g = s
                    .right
                    .tr_rmul(s.left.tr_lmul(Self::sub(w, s.row, nr_s, s.col, nc_s)));
                for j in 0..b_s {
                    for i in 0..a_s {
                        grad[vs.entry(i, j)] -= 2.0 * g[(i, j)];
                    }
                }
                if let Some(w2) = &w2 {
                    let g2 = s
                        .right
                        .tr_rmul(s.left.tr_lmul(Self::sub(w2, s.row, nr_s, s.col, nc_s)));
                    let last = self.n;
                    for j in 0..b_s {
                        for i in 0..a_s {
                            let k = vs.entry(i, j);
                            hess[(k, last)] += 2.0 * g2[(i, j)];
                            hess[(last, k)] += 2.0 * g2[(i, j)];
                        }
                    }
                }
                for t in terms.iter().skip(si) {
                    let vt = &self.vars[t.var.0];
                    let (a_t, b_t) = (vt.shape.rows(), vt.shape.cols());
                    let (nr_t, nc_t) = (t.left.nrows(), t.right.ncols());
                    // A1 = rho_s W[c_s, r_t] l_t, A2 = rho_t W[c_t, r_s] l_s,
                    // A3 = rho_s W[c_s, c_t] rho_t^T, A4 = l_t^T W[r_t, r_s] l_s.
                    let a1 = s.right.lmul(t.left.rmul(Self::sub(w, s.col, nc_s, t.row, nr_t)));
                    let a2 = t.right.lmul(s.left.rmul(Self::sub(w, t.col, nc_t, s.row, nr_s)));
                    let a3 = t.right.tr_rmul(s.right.lmul(Self::sub(w, s.col, nc_s, t.col, nc_t)));
                    let a4 = s.left.rmul(t.left.tr_lmul(Self::sub(w, t.row, nr_t, s.row, nr_s)));
                    let same = std::ptr::eq(s, t);
                    for j in 0..b_s {
                        for i in 0..a_s {
                            let ks = vs.entry(i, j);
                            for l in 0..b_t {
                                let a2li = a2[(l, i)];
                                let a3jl = a3[(j, l)];
                                for k in 0..a_t {
                                    let h = 2.0 * (a1[(j, k)] * a2li + a3jl * a4[(k, i)]);
                                    let kt = vt.entry(k, l);
                                    hess[(ks, kt)] += h;
                                    if !same {
                                        hess[(kt, ks)] += h;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if phase_one {
                let last = self.n;
                grad[last] -= w.trace();
                hess[(last, last)] += w.norm_squared();
            }
        }
        (grad, hess)
    }

    /// Solves `H dx = -r` with progressively stronger ridge regularization.
    fn newton_direction(hess: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let scale = hess.diagonal().amax().max(1e-300);
        let mut ridge = 0.0;
        for _ in 0..12 {
            let mut h = hess.clone();
            for i in 0..h.nrows() {
                h[(i, i)] += ridge;
            }
            if let Some(chol) = h.cholesky() {
                let dx = chol.solve(&(-rhs));
                if dx.iter().all(|v| v.is_finite()) {
                    return Some(dx);
                }
            }
            ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 10.0 };
        }
        None
    }

    /// Minimizes the objective subject to every block `>= margin * I`.
    /// `start` may seed phase I with a guess.
    pub fn solve(&self, opts: &SolverOptions, start: Option<&DVector<f64>>) -> Result<Solution, SdpError> {
        if self.blocks.is_empty() {
            return Err(SdpError::Malformed("no constraints".into()));
        }
        let margin = opts.margin.unwrap_or_else(|| self.default_margin());
        let mut steps = 0usize;
        let theta0 = start.cloned().unwrap_or_else(|| DVector::zeros(self.n));
        if opts.method == Method::PrimalDual {
            return match self.primal_dual(theta0.clone(), margin, opts, &mut steps) {
                Ok(sol) => Ok(sol),
                Err(e) => {
                    // Tell infeasibility apart from numerical trouble.
                    let mut probe = 0;
                    self.phase_one(theta0, margin, opts, &mut probe)?;
                    Err(e)
                }
            };
        }
        let theta = if self.evaluate(&theta0, margin, 0.0, false).is_some() {
            theta0
        } else {
            self.phase_one(theta0, margin, opts, &mut steps)?
        };
        self.phase_two(theta, margin, opts, &mut steps)
    }

    fn phase_one(
        &self,
        theta0: DVector<f64>,
        margin: f64,
        opts: &SolverOptions,
        steps: &mut usize,
    ) -> Result<DVector<f64>, SdpError> {
        let n = self.n;
        let worst = (0..self.blocks.len())
            .map(|b| self.block_value(&theta0, b).symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min);
        let mut x = DVector::zeros(n + 1);
        x.rows_mut(0, n).copy_from(&theta0);
        x[n] = (margin - worst).max(0.0) + 1.0;
        let m = self.barrier_degree() as f64;
        let mut t = 1.0 / x[n].abs().max(1.0);
        let split = |x: &DVector<f64>| (x.rows(0, n).into_owned(), x[n]);
        let mut best_s = x[n];
        loop {
            // Centering for the current t; exit as soon as s < 0.
            for _ in 0..50 {
                let (th, s) = split(&x);
                if s < 0.0 {
                    return Ok(th);
                }
                let ev = self.evaluate(&th, margin, s, true).expect("iterate is feasible");
                let (mut g, mut h) = self.derivatives(&ev, true);
                let kappa = opts.phase_one_prox;
                for i in 0..n {
                    g[i] += kappa * th[i];
                    h[(i, i)] += kappa;
                }
                g[n] += t;
                let dx = Self::newton_direction(&h, &g).ok_or(SdpError::Stall {
                    iterations: *steps,
                    gap: s,
                })?;
                let dec = -g.dot(&dx);
                let f0 = t * s + ev.barrier + 0.5 * kappa * th.norm_squared();
                let mut alpha = 1.0;
                let mut moved = false;
                while alpha > 1e-10 {
                    let cand = &x + &dx * alpha;
                    let (th_c, s_c) = split(&cand);
                    if let Some(e) = self.evaluate(&th_c, margin, s_c, false) {
                        let f = t * s_c + e.barrier + 0.5 * kappa * th_c.norm_squared();
                        if f <= f0 - 0.25 * alpha * dec || s_c < 0.0 {
                            x = cand;
                            moved = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                *steps += 1;
                if opts.verbose {
                    eprintln!("phase I  t={t:.2e} s={:.4e} dec={dec:.2e} alpha={alpha:.1e}", x[n]);
                }
                if *steps >= opts.max_newton {
                    return Err(SdpError::Stall { iterations: *steps, gap: x[n] });
                }
                if !moved || dec < 1e-9 {
                    break;
                }
            }
            best_s = best_s.min(x[n]);
            if m / t < 1e-9 * (1.0 + best_s.abs()) {
                return Err(SdpError::Infeasible(best_s));
            }
            t *= opts.mu;
        }
    }

    fn phase_two(
        &self,
        mut theta: DVector<f64>,
        margin: f64,
        opts: &SolverOptions,
        steps: &mut usize,
    ) -> Result<Solution, SdpError> {
        let c = DVector::from_column_slice(&self.objective);
        let m = self.barrier_degree() as f64;
        // Start where the objective and barrier gradients are comparable.
        let ev = self.evaluate(&theta, margin, 0.0, true).expect("feasible start");
        let (g, _) = self.derivatives(&ev, false);
        let mut t = if c.norm() > 0.0 { (g.norm() / c.norm()).clamp(1e-3, 1e3) } else { 1.0 };
        loop {
            for _ in 0..80 {
                let ev = self.evaluate(&theta, margin, 0.0, true).expect("iterate is feasible");
                let (g0, h) = self.derivatives(&ev, false);
                let g = &c * t + g0;
                let Some(dx) = Self::newton_direction(&h, &g) else {
                    break;
                };
                let dec = -g.dot(&dx);
                let f0 = t * c.dot(&theta) + ev.barrier;
                let mut alpha = 1.0;
                let mut moved = false;
                while alpha > 1e-12 {
                    let cand = &theta + &dx * alpha;
                    if let Some(e) = self.evaluate(&cand, margin, 0.0, false) {
                        if t * c.dot(&cand) + e.barrier <= f0 - 0.25 * alpha * dec {
                            theta = cand;
                            moved = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                *steps += 1;
                if opts.verbose {
                    eprintln!(
                        "phase II t={t:.2e} obj={:.8} dec={dec:.2e} alpha={alpha:.1e}",
                        c.dot(&theta)
                    );
                }
                if *steps >= opts.max_newton {
                    return Err(SdpError::Stall { iterations: *steps, gap: m / t });
                }
                if !moved || dec < 1e-8 {
                    break;
                }
            }
            let gap = m / t;
            if gap <= opts.gap_tol {
                return Ok(Solution {
                    objective: c.dot(&theta),
                    min_eigenvalue: self.min_eigenvalue(&theta),
                    theta,
                    gap,
                    newton_steps: *steps,
                    margin,
                });
            }
            t *= opts.mu;
        }
    }

    /// Linear part `F_b(theta) - F0_b`.
    fn linear_value(&self, theta: &DVector<f64>, b: usize) -> DMatrix<f64> {
        self.block_value(theta, b) - &self.blocks[b].constant
    }

    /// `A*(Z)_k = sum_b tr(dF_b/dtheta_k Z_b)`.
    fn adjoint(&self, z: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (block, w) in self.blocks.iter().zip(z) {
            for t in &block.terms {
                let v = &self.vars[t.var.0];
                let g = t
                    .right
                    .tr_rmul(t.left.tr_lmul(Self::sub(w, t.row, t.left.nrows(), t.col, t.right.ncols())));
                for j in 0..v.shape.cols() {
                    for i in 0..v.shape.rows() {
                        out[v.entry(i, j)] += 2.0 * g[(i, j)];
                    }
                }
            }
        }
        out
    }

    /// Distance to the boundary along `dx`: the supremum of steps keeping
    /// `x + alpha dx` positive definite.
    fn step_to_boundary(x: &[DMatrix<f64>], dx: &[DMatrix<f64>]) -> f64 {
        let mut alpha = f64::INFINITY;
        for (m, d) in x.iter().zip(dx) {
            let Some(chol) = m.clone().cholesky() else {
                return 0.0;
            };
            let l = chol.l();
            let li = l.clone().try_inverse().unwrap_or_else(|| DMatrix::zeros(l.nrows(), l.ncols()));
            let e = &li * d * li.transpose();
            let e = (&e + e.transpose()) * 0.5;
            let lmin = e.symmetric_eigenvalues().min();
            if lmin < 0.0 {
                alpha = alpha.min(-1.0 / lmin);
            }
        }
        alpha
    }

    /// Nesterov-Todd scaling `W = G G^T` with `W Z W = S`. Returns `G`,
    /// `H = G^-T` and the scaled point `G^-1 S G^-T = G^T Z G = diag(lambda)`.
    fn nt_scaling(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<NtScaling> {
        let l = s.clone().cholesky()?.l();
        let r = z.clone().cholesky()?.l();
        let svd = (r.transpose() * &l).svd(true, true);
        let u = svd.u?;
        let v = svd.v_t?.transpose();
        let d = svd.singular_values;
        if d.iter().any(|x| !(*x > 0.0)) {
            return None;
        }
        let mut g = l * v;
        let mut h = r * u;
        for (j, dj) in d.iter().enumerate() {
            g.column_mut(j).scale_mut(1.0 / dj.sqrt());
            h.column_mut(j).scale_mut(1.0 / dj.sqrt());
        }
        Some(NtScaling { g, h, lambda: d })
    }

    fn primal_dual(
        &self,
        mut theta: DVector<f64>,
        margin: f64,
        opts: &SolverOptions,
        steps: &mut usize,
    ) -> Result<Solution, SdpError> {
        let nb = self.blocks.len();
        let c = DVector::from_column_slice(&self.objective);
        let m = self.barrier_degree() as f64;
        let shifted = |theta: &DVector<f64>| -> Vec<DMatrix<f64>> {
            (0..nb)
                .map(|b| {
                    let mut f = self.block_value(theta, b);
                    for i in 0..f.nrows() {
                        f[(i, i)] -= margin;
                    }
                    (&f + f.transpose()) * 0.5
                })
                .collect()
        };
        let f0 = shifted(&theta);
        let worst = f0.iter().map(|f| f.symmetric_eigenvalues().min()).fold(f64::INFINITY, f64::min);
        let lift = (1.0 - worst).max(0.0);
        let mut s: Vec<DMatrix<f64>> = f0
            .iter()
            .map(|f| f + DMatrix::identity(f.nrows(), f.nrows()) * lift)
            .collect();
        let mut z: Vec<DMatrix<f64>> = f0.iter().map(|f| DMatrix::identity(f.nrows(), f.nrows())).collect();
        let s_inv = |s: &[DMatrix<f64>]| -> Option<Vec<DMatrix<f64>>> {
            s.iter().map(|x| x.clone().cholesky().map(|ch| ch.inverse())).collect()
        };
        let dot = |x: &[DMatrix<f64>], y: &[DMatrix<f64>]| -> f64 { x.iter().zip(y).map(|(a, b)| a.dot(b)).sum() };
        let norm = |x: &[DMatrix<f64>]| -> f64 { x.iter().map(|a| a.norm_squared()).sum::<f64>().sqrt() };
        let cnorm = 1.0 + c.norm();
        let fnorm = 1.0 + norm(&self.blocks.iter().map(|b| b.constant.clone()).collect::<Vec<_>>());
        let mut best: Option<(f64, DVector<f64>, f64)> = None;
        let mut since_best = 0usize;
        loop {
            let f = shifted(&theta);
            let rp: Vec<DMatrix<f64>> = s.iter().zip(&f).map(|(a, b)| a - b).collect();
            let rd = &c - self.adjoint(&z);
            let gap = dot(&s, &z);
            let obj = c.dot(&theta);
            let rel_gap = gap / (1.0 + obj.abs());
            let primal_res = norm(&rp) / fnorm;
            let dual_res = rd.norm() / cnorm;
            if opts.verbose {
                eprintln!(
                    "pd {:>3} obj={obj:.10} gap={gap:.2e} primal={primal_res:.2e} dual={dual_res:.2e}",
                    *steps
                );
            }
            let feasible = primal_res <= opts.gap_tol && s_inv(&f).is_some();
            let merit = rel_gap.max(dual_res / opts.dual_tol * opts.gap_tol);
            if feasible && best.as_ref().is_none_or(|(m, _, _)| merit < *m) {
                best = Some((merit, theta.clone(), rel_gap));
                since_best = 0;
            } else {
                since_best += 1;
            }
            let finish = |theta: DVector<f64>, gap: f64, steps: usize| Solution {
                objective: c.dot(&theta),
                min_eigenvalue: self.min_eigenvalue(&theta),
                theta,
                gap,
                newton_steps: steps,
                margin,
            };
            if feasible && rel_gap <= opts.gap_tol && dual_res <= opts.dual_tol {
                return Ok(finish(theta, rel_gap, *steps));
            }
            // Late in the run rounding can stop progress on the dual
            // residual; a feasible point close to optimal is still returned.
            if since_best >= 8 {
                if let Some((m, th, g)) = best.take() {
                    if m <= 100.0 * opts.gap_tol {
                        return Ok(finish(th, g, *steps));
                    }
                }
            }
            let stall = Err(SdpError::Stall { iterations: *steps, gap: rel_gap.max(primal_res) });
            if *steps >= opts.max_newton {
                return stall;
            }
            *steps += 1;
            let mu = gap / m;
            let Some(nt) = s.iter().zip(&z).map(|(sb, zb)| Self::nt_scaling(sb, zb)).collect::<Option<Vec<_>>>() else {
                return stall;
            };
            let v: Vec<DMatrix<f64>> = nt.iter().map(|x| &x.h * x.h.transpose()).collect();
            let (_, schur) = self.derivatives(&Eval { inv: v.clone(), barrier: 0.0 }, false);
            // dS = A(dtheta) - r_p, dZ = R_c - V dS V, A*(dZ) = r_d.
            let vrv: Vec<DMatrix<f64>> = (0..nb).map(|b| &v[b] * &rp[b] * &v[b]).collect();
            let direction = |rc: &[DMatrix<f64>]| -> Option<(DVector<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
                let lifted: Vec<DMatrix<f64>> = rc.iter().zip(&vrv).map(|(a, b)| a + b).collect();
                let rhs = self.adjoint(&lifted) - &rd;
                let dth = Self::newton_direction(&schur, &(-rhs))?;
                let ds: Vec<DMatrix<f64>> = (0..nb).map(|b| self.linear_value(&dth, b) - &rp[b]).collect();
                let dz = (0..nb)
                    .map(|b| {
                        let t = &rc[b] - &v[b] * &ds[b] * &v[b];
                        (&t + t.transpose()) * 0.5
                    })
                    .collect();
                Some((dth, ds, dz))
            };
            // Scaled complementarity: Lambda E + E Lambda = 2 R with
            // E = dS~ + dZ~, mapped back through R_c = H E H^T.
            let rc_from = |sigma_mu: f64, corr: Option<(&[DMatrix<f64>], &[DMatrix<f64>])>| -> Vec<DMatrix<f64>> {
                (0..nb)
                    .map(|b| {
                        let lam = &nt[b].lambda;
                        let k = lam.len();
                        let mut r = DMatrix::zeros(k, k);
                        for i in 0..k {
                            r[(i, i)] = 2.0 * (sigma_mu - lam[i] * lam[i]);
                        }
                        if let Some((ds, dz)) = corr {
                            let dst = nt[b].h.transpose() * &ds[b] * &nt[b].h;
                            let dzt = nt[b].g.transpose() * &dz[b] * &nt[b].g;
                            let p = &dst * &dzt;
                            r -= &p + p.transpose();
                        }
                        let e = DMatrix::from_fn(k, k, |i, j| r[(i, j)] / (lam[i] + lam[j]));
                        let out = &nt[b].h * e * nt[b].h.transpose();
                        (&out + out.transpose()) * 0.5
                    })
                    .collect()
            };
            let Some((_, ds_a, dz_a)) = direction(&rc_from(0.0, None)) else {
                return stall;
            };
            let ap = Self::step_to_boundary(&s, &ds_a).min(1.0);
            let ad = Self::step_to_boundary(&z, &dz_a).min(1.0);
            let s_a: Vec<DMatrix<f64>> = s.iter().zip(&ds_a).map(|(x, d)| x + d * ap).collect();
            let z_a: Vec<DMatrix<f64>> = z.iter().zip(&dz_a).map(|(x, d)| x + d * ad).collect();
            let sigma = (dot(&s_a, &z_a) / gap).clamp(0.0, 1.0).powi(3);
            let rc = rc_from(sigma * mu, Some((&ds_a, &dz_a)));
            let Some((dth, ds, dz)) = direction(&rc) else {
                return stall;
            };
            let ap = Self::step_to_boundary(&s, &ds);
            let ad = Self::step_to_boundary(&z, &dz);
            let frac = 0.9 + 0.09 * ap.min(ad).min(1.0);
            // A full primal step zeroes the primal residual; take it whenever
            // it stays strictly inside.
            let ap = if ap > 1.0 && primal_res > 0.0 { 1.0 } else { (frac * ap).min(1.0) };
            let ad = (frac * ad).min(1.0);
            if opts.verbose {
                eprintln!("       sigma={sigma:.2e} alpha_p={ap:.2e} alpha_d={ad:.2e}");
            }
            if ap < 1e-12 && ad < 1e-12 {
                return stall;
            }
            theta += &dth * ap;
            for b in 0..nb {
                s[b] += &ds[b] * ap;
                z[b] += &dz[b] * ad;
            }
        }
    }

    /// Barrier value and derivatives at `theta`, for testing.
    pub fn barrier_derivatives(&self, theta: &DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let ev = self.evaluate(theta, 0.0, 0.0, true)?;
        let (g, h) = self.derivatives(&ev, false);
        Some((ev.barrier, g, h))
    }

    /// Phase-I barrier (extra `s` parameter last), for testing.
    pub fn phase_one_derivatives(
        &self,
        theta: &DVector<f64>,
        s: f64,
    ) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let ev = self.evaluate(theta, 0.0, s, true)?;
        let (g, h) = self.derivatives(&ev, true);
        Some((ev.barrier, g, h))
    }
}
