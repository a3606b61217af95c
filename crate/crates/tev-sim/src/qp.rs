//! Dense convex QP solver: primal-dual interior point with Mehrotra
//! predictor-corrector steps.
//!
//! Solves
//! ```text
//!     minimize    1/2 x' P x + q' x
//!     subject to  A x  = b
//!                 G x <= h
//!                 l <= x <= u
//! ```
//! with P symmetric positive semidefinite (P = 0, a pure LP, is allowed).
//! Variables with equal bounds are eliminated in a presolve pass, which keeps
//! the scheduling problems small: away-hour decision variables are pinned at
//! zero rather than removed by the caller.

use nalgebra::{DMatrix, DVector};

use crate::error::QpError;

/// A sparse constraint row: sum of val[k] * x[idx[k]].
#[derive(Debug, Clone, Default)]
pub struct SparseRow {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseRow {
    pub fn new(idx: Vec<usize>, val: Vec<f64>) -> Self {
        debug_assert_eq!(idx.len(), val.len());
        SparseRow { idx, val }
    }

    pub fn dot(&self, x: &DVector<f64>) -> f64 {
        self.idx
            .iter()
            .zip(&self.val)
            .map(|(&i, &v)| v * x[i])
            .sum()
    }
}

/// Quadratic program in standard form.
#[derive(Debug, Clone)]
pub struct Qp {
    /// Full symmetric PSD matrix of the quadratic term (objective is 1/2 x'Px).
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub a_eq: Vec<SparseRow>,
    pub b_eq: Vec<f64>,
    pub g_ineq: Vec<SparseRow>,
    pub h_ineq: Vec<f64>,
}

impl Qp {
    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// Objective value at a point.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x.transpose() * &self.p * x)[(0, 0)] + self.q.dot(x)
    }

    /// Worst violation of equality, inequality, and bound constraints.
    pub fn constraint_residual(&self, x: &DVector<f64>) -> f64 {
        let mut r: f64 = 0.0;
        for (row, &b) in self.a_eq.iter().zip(&self.b_eq) {
            r = r.max((row.dot(x) - b).abs());
        }
        for (row, &h) in self.g_ineq.iter().zip(&self.h_ineq) {
            r = r.max(row.dot(x) - h);
        }
        for i in 0..self.n() {
            r = r.max(self.lower[i] - x[i]);
            r = r.max(x[i] - self.upper[i]);
        }
        r.max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

const FIXED_VAR_TOL: f64 = 1e-12;
const PRESOLVE_FEAS_TOL: f64 = 1e-7;
const REG: f64 = 1e-11;

struct Reduced {
    /// reduced index -> original index
    free: Vec<usize>,
    /// original index -> Some(reduced index)
    fixed_vals: DVector<f64>,
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: Vec<SparseRow>,
    b: Vec<f64>,
    g: Vec<SparseRow>,
    h: Vec<f64>,
}

fn presolve(qp: &Qp) -> Result<Reduced, QpError> {
    let n = qp.n();
    if qp.lower.len() != n || qp.upper.len() != n || qp.p.nrows() != n || qp.p.ncols() != n {
        return Err(QpError::Dimension(format!(
            "n={n}, lower={}, upper={}, p={}x{}",
            qp.lower.len(),
            qp.upper.len(),
            qp.p.nrows(),
            qp.p.ncols()
        )));
    }
    let mut fixed_vals = DVector::zeros(n);
    let mut map = vec![None; n];
    let mut free = Vec::new();
    for i in 0..n {
        if qp.upper[i] - qp.lower[i] <= FIXED_VAR_TOL {
            fixed_vals[i] = 0.5 * (qp.upper[i] + qp.lower[i]);
        } else {
            map[i] = Some(free.len());
            free.push(i);
        }
    }
    let nf = free.len();

    let mut p = DMatrix::zeros(nf, nf);
    let mut q = DVector::zeros(nf);
    for (ri, &i) in free.iter().enumerate() {
        q[ri] = qp.q[i];
        for (rj, &j) in free.iter().enumerate() {
            p[(ri, rj)] = qp.p[(i, j)];
        }
        // shift from fixed columns
        for j in 0..n {
            if map[j].is_none() && fixed_vals[j] != 0.0 {
                q[ri] += qp.p[(i, j)] * fixed_vals[j];
            }
        }
    }

    let reduce_row = |row: &SparseRow| -> (SparseRow, f64) {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        let mut shift = 0.0;
        for (&i, &v) in row.idx.iter().zip(&row.val) {
            match map[i] {
                Some(ri) => {
                    idx.push(ri);
                    val.push(v);
                }
                None => shift += v * fixed_vals[i],
            }
        }
        (SparseRow::new(idx, val), shift)
    };

    let mut a = Vec::new();
    let mut b = Vec::new();
    for (row, &rhs) in qp.a_eq.iter().zip(&qp.b_eq) {
        let (r, shift) = reduce_row(row);
        if r.idx.is_empty() {
            if (rhs - shift).abs() > PRESOLVE_FEAS_TOL {
                return Err(QpError::Infeasible {
                    residual: (rhs - shift).abs(),
                });
            }
        } else {
            a.push(r);
            b.push(rhs - shift);
        }
    }

    let mut g = Vec::new();
    let mut h = Vec::new();
    for (row, &rhs) in qp.g_ineq.iter().zip(&qp.h_ineq) {
        let (r, shift) = reduce_row(row);
        if r.idx.is_empty() {
            if shift > rhs + PRESOLVE_FEAS_TOL {
                return Err(QpError::Infeasible {
                    residual: shift - rhs,
                });
            }
        } else {
            g.push(r);
            h.push(rhs - shift);
        }
    }
    // bounds as inequality rows
    for (ri, &i) in free.iter().enumerate() {
        if qp.upper[i].is_finite() {
            g.push(SparseRow::new(vec![ri], vec![1.0]));
            h.push(qp.upper[i]);
        }
        if qp.lower[i].is_finite() {
            g.push(SparseRow::new(vec![ri], vec![-1.0]));
            h.push(-qp.lower[i]);
        }
    }

    Ok(Reduced {
        free,
        fixed_vals,
        p,
        q,
        a,
        b,
        g,
        h,
    })
}

fn expand(red: &Reduced, x_red: &DVector<f64>, n: usize) -> DVector<f64> {
    let mut x = red.fixed_vals.clone_owned();
    debug_assert_eq!(x.len(), n);
    for (ri, &i) in red.free.iter().enumerate() {
        x[i] = x_red[ri];
    }
    x
}

/// Solve the QP to the given KKT tolerance.
pub fn solve(qp: &Qp, tol: f64, max_iter: usize) -> Result<QpSolution, QpError> {
    let red = presolve(qp)?;
    let n = red.free.len();
    let me = red.a.len();
    let mi = red.g.len();

    if n == 0 {
        let x = expand(&red, &DVector::zeros(0), qp.n());
        let residual = qp.constraint_residual(&x);
        if residual > PRESOLVE_FEAS_TOL {
            return Err(QpError::Infeasible { residual });
        }
        return Ok(QpSolution {
            objective: qp.objective(&x),
            x,
            iterations: 0,
            primal_residual: residual,
            dual_residual: 0.0,
            gap: 0.0,
        });
    }

    // Pure equality-constrained QP: one KKT solve.
    if mi == 0 {
        let dim = n + me;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&red.p);
        for i in 0..n {
            kkt[(i, i)] += REG;
        }
        for (r, row) in red.a.iter().enumerate() {
            for (&j, &v) in row.idx.iter().zip(&row.val) {
                kkt[(n + r, j)] = v;
                kkt[(j, n + r)] = v;
            }
            kkt[(n + r, n + r)] = -REG;
        }
        let mut rhs = DVector::zeros(dim);
        for i in 0..n {
            rhs[i] = -red.q[i];
        }
        for r in 0..me {
            rhs[n + r] = red.b[r];
        }
        let sol = kkt.lu().solve(&rhs).ok_or(QpError::SingularKkt)?;
        let x_red = sol.rows(0, n).clone_owned();
        let x = expand(&red, &x_red, qp.n());
        return Ok(QpSolution {
            objective: qp.objective(&x),
            primal_residual: qp.constraint_residual(&x),
            x,
            iterations: 1,
            dual_residual: 0.0,
            gap: 0.0,
        });
    }

    let mut x = DVector::<f64>::zeros(n);
    // start strictly inside finite bounds where possible
    for (ri, &i) in red.free.iter().enumerate() {
        let lo = qp.lower[i];
        let hi = qp.upper[i];
        x[ri] = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo + 1.0,
            (false, true) => hi - 1.0,
            (false, false) => 0.0,
        };
    }
    let mut y = DVector::<f64>::zeros(me);
    let mut s = DVector::<f64>::zeros(mi);
    let mut z = DVector::<f64>::from_element(mi, 1.0);
    for (r, row) in red.g.iter().enumerate() {
        s[r] = (red.h[r] - row.dot(&x)).max(1.0);
    }

    let q_scale = 1.0 + red.q.amax();
    let h_scale = 1.0 + red.h.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let b_scale = 1.0 + red.b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

    let mut best_x = x.clone();
    let mut best_res = f64::INFINITY;

    for iter in 0..max_iter {
        // residuals
        let mut r_d = &red.p * &x + &red.q;
        for (r, row) in red.a.iter().enumerate() {
            for (&j, &v) in row.idx.iter().zip(&row.val) {
                r_d[j] += v * y[r];
            }
        }
        for (r, row) in red.g.iter().enumerate() {
            for (&j, &v) in row.idx.iter().zip(&row.val) {
                r_d[j] += v * z[r];
            }
        }
        let mut r_p = DVector::<f64>::zeros(me);
        for (r, row) in red.a.iter().enumerate() {
            r_p[r] = row.dot(&x) - red.b[r];
        }
        let mut r_g = DVector::<f64>::zeros(mi);
        for (r, row) in red.g.iter().enumerate() {
            r_g[r] = row.dot(&x) + s[r] - red.h[r];
        }
        let mu = s.dot(&z) / mi as f64;

        let res_d = r_d.amax() / q_scale;
        let res_p = if me > 0 { r_p.amax() / b_scale } else { 0.0 };
        let res_g = r_g.amax() / h_scale;
        let total = res_d.max(res_p).max(res_g).max(mu);
        if total < best_res {
            best_res = total;
            best_x = x.clone();
        }
        if res_d < tol && res_p < tol && res_g < tol && mu < tol {
            let x_full = expand(&red, &x, qp.n());
            return Ok(QpSolution {
                objective: qp.objective(&x_full),
                x: x_full,
                iterations: iter,
                primal_residual: res_p.max(res_g),
                dual_residual: res_d,
                gap: mu,
            });
        }
        if !total.is_finite() || z.amax() > 1e14 {
            return Err(QpError::Infeasible { residual: total });
        }

        // KKT matrix: [P + G' (Z/S) G + reg, A'; A, -reg]
        let dim = n + me;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&red.p);
        for i in 0..n {
            kkt[(i, i)] += REG;
        }
        for (r, row) in red.g.iter().enumerate() {
            let w = z[r] / s[r];
            for (a_pos, (&ia, &va)) in row.idx.iter().zip(&row.val).enumerate() {
                for (&ib, &vb) in row.idx.iter().zip(&row.val).skip(a_pos) {
                    let contrib = w * va * vb;
                    kkt[(ia, ib)] += contrib;
                    if ia != ib {
                        kkt[(ib, ia)] += contrib;
                    }
                }
            }
        }
        for (r, row) in red.a.iter().enumerate() {
            for (&j, &v) in row.idx.iter().zip(&row.val) {
                kkt[(n + r, j)] = v;
                kkt[(j, n + r)] = v;
            }
            kkt[(n + r, n + r)] = -REG;
        }
        let lu = kkt.lu();

        let solve_dir = |r_sz: &DVector<f64>| -> Option<(DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>)> {
            // rhs_x = -r_d - G' S^-1 (Z r_g - r_sz)
            let mut rhs = DVector::<f64>::zeros(dim);
            for j in 0..n {
                rhs[j] = -r_d[j];
            }
            for (r, row) in red.g.iter().enumerate() {
                let coef = (z[r] * r_g[r] - r_sz[r]) / s[r];
                for (&j, &v) in row.idx.iter().zip(&row.val) {
                    rhs[j] -= v * coef;
                }
            }
            for r in 0..me {
                rhs[n + r] = -r_p[r];
            }
            let sol = lu.solve(&rhs)?;
            let dx = sol.rows(0, n).clone_owned();
            let dy = sol.rows(n, me).clone_owned();
            let mut ds = DVector::<f64>::zeros(mi);
            let mut dz = DVector::<f64>::zeros(mi);
            for (r, row) in red.g.iter().enumerate() {
                ds[r] = -r_g[r] - row.dot(&dx);
                dz[r] = (-r_sz[r] - z[r] * ds[r]) / s[r];
            }
            Some((dx, dy, ds, dz))
        };

        let step_len = |ds: &DVector<f64>, dz: &DVector<f64>| -> f64 {
            let mut alpha: f64 = 1.0;
            for r in 0..mi {
                if ds[r] < 0.0 {
                    alpha = alpha.min(-s[r] / ds[r]);
                }
                if dz[r] < 0.0 {
                    alpha = alpha.min(-z[r] / dz[r]);
                }
            }
            alpha
        };

        // affine (predictor) direction
        let r_sz_aff = s.component_mul(&z);
        let (dx_a, _dy_a, ds_a, dz_a) = match solve_dir(&r_sz_aff) {
            Some(d) => d,
            None => return Err(QpError::SingularKkt),
        };
        let alpha_aff = step_len(&ds_a, &dz_a).min(1.0);
        let mu_aff = (&s + &ds_a * alpha_aff).dot(&(&z + &dz_a * alpha_aff)) / mi as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
        let _ = dx_a;

        // corrector
        let mut r_sz = s.component_mul(&z);
        for r in 0..mi {
            r_sz[r] += ds_a[r] * dz_a[r] - sigma * mu;
        }
        let (dx, dy, ds, dz) = match solve_dir(&r_sz) {
            Some(d) => d,
            None => return Err(QpError::SingularKkt),
        };
        let alpha = (0.99 * step_len(&ds, &dz)).min(1.0);

        x += &dx * alpha;
        y += &dy * alpha;
        s += &ds * alpha;
        z += &dz * alpha;
        for r in 0..mi {
            s[r] = s[r].max(1e-300);
            z[r] = z[r].max(1e-300);
        }
    }

    let x_full = expand(&red, &best_x, qp.n());
    Err(QpError::MaxIterations {
        iterations: max_iter,
        primal_res: qp.constraint_residual(&x_full),
        dual_res: best_res,
        gap: best_res,
        best_x: x_full.iter().copied().collect(),
    })
}
