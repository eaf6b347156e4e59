//! Krylov solvers and a fast separable (eigen-transform) solver for
//! constant-coefficient 5-point operators on the rectangle.
//!
//! All routines are sequential and deterministic: identical inputs give
//! bitwise-identical outputs.

use nalgebra::DMatrix;

use crate::error::{EhdError, Result};

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

pub trait Preconditioner {
    fn precondition(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Inverse-diagonal scaling.
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(diag: &[f64]) -> Self {
        Self {
            inv_diag: diag
                .iter()
                .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *z = r * d;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn true_residual(a: &dyn LinearOperator, b: &[f64], x: &[f64], r: &mut [f64]) {
    a.apply(x, r);
    for (r, b) in r.iter_mut().zip(b) {
        *r = b - *r;
    }
}

/// Preconditioned conjugate gradients for symmetric positive (semi)definite
/// operators. Stops when the max-norm of the true residual is at most
/// `tol_abs`. `project` is applied to the iterate and residual every
/// iteration (used to pin the null space of singular operators).
pub fn pcg(
    a: &dyn LinearOperator,
    m: &dyn Preconditioner,
    b: &[f64],
    x: &mut [f64],
    tol_abs: f64,
    max_iter: usize,
    project: &dyn Fn(&mut [f64]),
) -> Result<SolveStats> {
    let n = a.dim();
    debug_assert_eq!(b.len(), n);
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    // Outer restarts re-seed from the true residual whenever the recursive one
    // has drifted below tolerance ahead of it.
    loop {
        project(x);
        true_residual(a, b, x, &mut r);
        project(&mut r);
        let res = norm_inf(&r);
        if res <= tol_abs {
            return Ok(SolveStats {
                iterations,
                residual: res,
            });
        }
        if iterations >= max_iter {
            return Err(EhdError::Convergence {
                solver: "conjugate gradient",
                iterations,
                residual: res,
            });
        }
        m.precondition(&r, &mut z);
        project(&mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        let mut inner_converged = false;
        while iterations < max_iter {
            a.apply(&p, &mut ap);
            iterations += 1;
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            project(&mut r);
            if norm_inf(&r) <= tol_abs {
                inner_converged = true;
                break;
            }
            m.precondition(&r, &mut z);
            project(&mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        if !inner_converged && iterations >= max_iter {
            project(x);
            true_residual(a, b, x, &mut r);
            project(&mut r);
            let res = norm_inf(&r);
            if res <= tol_abs {
                return Ok(SolveStats {
                    iterations,
                    residual: res,
                });
            }
            return Err(EhdError::Convergence {
                solver: "conjugate gradient",
                iterations,
                residual: res,
            });
        }
    }
}

/// Preconditioned BiCGSTAB for nonsymmetric systems. Same stopping rule as
/// [`pcg`].
pub fn bicgstab(
    a: &dyn LinearOperator,
    m: &dyn Preconditioner,
    b: &[f64],
    x: &mut [f64],
    tol_abs: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = a.dim();
    let mut r = vec![0.0; n];
    let mut r_hat = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut zv = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut iterations = 0;

    loop {
        true_residual(a, b, x, &mut r);
        let res = norm_inf(&r);
        if res <= tol_abs {
            return Ok(SolveStats {
                iterations,
                residual: res,
            });
        }
        if iterations >= max_iter {
            return Err(EhdError::Convergence {
                solver: "BiCGSTAB",
                iterations,
                residual: res,
            });
        }
        r_hat.copy_from_slice(&r);
        p.iter_mut().for_each(|e| *e = 0.0);
        v.iter_mut().for_each(|e| *e = 0.0);
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        while iterations < max_iter {
            let rho_new = dot(&r_hat, &r);
            if rho_new == 0.0 || !rho_new.is_finite() {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            m.precondition(&p, &mut y);
            a.apply(&y, &mut v);
            iterations += 1;
            let rv = dot(&r_hat, &v);
            if rv == 0.0 || !rv.is_finite() {
                break;
            }
            alpha = rho / rv;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm_inf(&s) <= tol_abs {
                for i in 0..n {
                    x[i] += alpha * y[i];
                }
                break;
            }
            m.precondition(&s, &mut zv);
            a.apply(&zv, &mut t);
            iterations += 1;
            let tt = dot(&t, &t);
            if tt == 0.0 || !tt.is_finite() {
                for i in 0..n {
                    x[i] += alpha * y[i];
                }
                break;
            }
            omega = dot(&t, &s) / tt;
            for i in 0..n {
                x[i] += alpha * y[i] + omega * zv[i];
                r[i] = s[i] - omega * t[i];
            }
            if norm_inf(&r) <= tol_abs || omega == 0.0 {
                break;
            }
        }
    }
}

/// One-dimensional second-difference operator and its orthonormal
/// eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary1d {
    /// Cell-centered unknowns, zero value on the walls (ghost = -interior).
    DirichletCell,
    /// Cell-centered unknowns, zero flux through the walls.
    NeumannCell,
    /// Unknowns on the `n - 1` interior nodes, zero on the wall nodes.
    DirichletNode,
}

#[derive(Debug, Clone)]
struct Basis1d {
    eigenvalues: Vec<f64>,
    q: DMatrix<f64>,
    qt: DMatrix<f64>,
}

type Eigvec = Box<dyn Fn(usize, usize) -> f64>;
type Wavenumber = Box<dyn Fn(usize) -> f64>;

impl Basis1d {
    fn new(kind: Boundary1d, cells: usize, h: f64) -> Self {
        let pi = std::f64::consts::PI;
        let nf = cells as f64;
        let (m, vec_fn, wave): (usize, Eigvec, Wavenumber) = match kind {
            Boundary1d::DirichletCell => (
                cells,
                Box::new(move |i, k| (pi * (k + 1) as f64 * (i as f64 + 0.5) / nf).sin()),
                Box::new(move |k| (k + 1) as f64),
            ),
            Boundary1d::NeumannCell => (
                cells,
                Box::new(move |i, k| (pi * k as f64 * (i as f64 + 0.5) / nf).cos()),
                Box::new(move |k| k as f64),
            ),
            Boundary1d::DirichletNode => (
                cells - 1,
                Box::new(move |i, k| (pi * (k + 1) as f64 * (i + 1) as f64 / nf).sin()),
                Box::new(move |k| (k + 1) as f64),
            ),
        };
        let mut q = DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            for i in 0..m {
                q[(i, k)] = vec_fn(i, k);
            }
            let norm = q.column(k).norm();
            q.column_mut(k).scale_mut(1.0 / norm);
        }
        let eigenvalues = (0..m)
            .map(|k| -(4.0 / (h * h)) * (pi * wave(k) / (2.0 * nf)).sin().powi(2))
            .collect();
        let qt = q.transpose();
        Self { eigenvalues, q, qt }
    }
}

/// Direct solver for `(shift * I - coeff * (Dxx + Dyy)) u = f` on a tensor
/// grid with per-direction boundary types. Data is laid out with `x` fastest.
/// Singular modes (zero denominator) are set to zero, which yields the
/// mean-zero solution for the pure Neumann Laplacian.
#[derive(Debug, Clone)]
pub struct SeparableSolver {
    bx: Basis1d,
    by: Basis1d,
    denom: DMatrix<f64>,
}

impl SeparableSolver {
    pub fn new(
        x: (Boundary1d, usize, f64),
        y: (Boundary1d, usize, f64),
        shift: f64,
        coeff: f64,
    ) -> Self {
        let bx = Basis1d::new(x.0, x.1, x.2);
        let by = Basis1d::new(y.0, y.1, y.2);
        let (mx, my) = (bx.eigenvalues.len(), by.eigenvalues.len());
        let mut denom = DMatrix::<f64>::zeros(mx, my);
        let scale = coeff.abs() * (bx.eigenvalues[mx - 1].abs() + by.eigenvalues[my - 1].abs());
        for j in 0..my {
            for i in 0..mx {
                let d = shift - coeff * (bx.eigenvalues[i] + by.eigenvalues[j]);
                denom[(i, j)] = if d.abs() <= 1e-13 * scale.max(shift.abs()) {
                    0.0
                } else {
                    1.0 / d
                };
            }
        }
        Self { bx, by, denom }
    }

    pub fn dim(&self) -> usize {
        self.bx.eigenvalues.len() * self.by.eigenvalues.len()
    }

    pub fn solve(&self, f: &[f64], out: &mut [f64]) {
        let (mx, my) = (self.bx.eigenvalues.len(), self.by.eigenvalues.len());
        let g = DMatrix::from_column_slice(mx, my, f);
        let mut hat = &self.bx.qt * g * &self.by.q;
        hat.component_mul_assign(&self.denom);
        let back = &self.bx.q * hat * &self.by.qt;
        out.copy_from_slice(back.as_slice());
    }
}

impl Preconditioner for SeparableSolver {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        self.solve(r, z);
    }
}
