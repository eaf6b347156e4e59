//! Steady state: the Boltzmann densities generated by the minimizer of the
//! convex functional `J`, found by damped Newton.

use crate::error::{EhdError, Result};
use crate::functionals::j_functional;
use crate::grid::{gradient_dirichlet0, laplacian_dirichlet0, GridSpec, ScalarField};
use crate::linalg::{self, Boundary1d, LinearOperator, SeparableSolver};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_NEWTON_ITERATIONS: usize = 100;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub phi: ScalarField,
    pub v: ScalarField,
    pub w: ScalarField,
    pub mu_v: f64,
    pub mu_w: f64,
    /// `max |lap Phi - (V - W)|`.
    pub residual: f64,
    pub iterations: usize,
}

fn boltzmann(phi: &ScalarField, mu: f64, sign: f64) -> ScalarField {
    if mu == 0.0 {
        return ScalarField::zeros(*phi.grid());
    }
    let m = phi
        .values()
        .iter()
        .map(|&p| sign * p)
        .fold(f64::NEG_INFINITY, f64::max);
    let e = phi.map(|p| (sign * p - m).exp());
    let z = e.integral();
    e.scale(mu / z)
}

/// `V = mu_v e^phi / int e^phi` and `W = mu_w e^-phi / int e^-phi`.
pub fn boltzmann_densities(phi: &ScalarField, mu_v: f64, mu_w: f64) -> (ScalarField, ScalarField) {
    (boltzmann(phi, mu_v, 1.0), boltzmann(phi, mu_w, -1.0))
}

/// Euler-Lagrange residual `lap phi - (V - W)` of `J`.
fn residual_field(
    phi: &ScalarField,
    mu_v: f64,
    mu_w: f64,
) -> Result<(ScalarField, ScalarField, ScalarField)> {
    let (v, w) = boltzmann_densities(phi, mu_v, mu_w);
    let lap = laplacian_dirichlet0(phi)?;
    let r = lap.sub(&v.sub(&w));
    Ok((r, v, w))
}

/// Hessian of `J` per unit cell area: `-lap + diag(V) - V V^T a / mu_v` plus
/// the same for `W`.
struct Hessian<'a> {
    grid: GridSpec,
    v: &'a [f64],
    w: &'a [f64],
    mu_v: f64,
    mu_w: f64,
}

impl LinearOperator for Hessian<'_> {
    fn dim(&self) -> usize {
        self.grid.num_cells()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let (ax, ay) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        let a = g.cell_area();
        let cv = if self.mu_v > 0.0 {
            a * self.v.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() / self.mu_v
        } else {
            0.0
        };
        let cw = if self.mu_w > 0.0 {
            a * self.w.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() / self.mu_w
        } else {
            0.0
        };
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let c = x[k];
                let west = if i == 0 { -c } else { x[k - 1] };
                let east = if i == nx - 1 { -c } else { x[k + 1] };
                let south = if j == 0 { -c } else { x[k - nx] };
                let north = if j == ny - 1 { -c } else { x[k + nx] };
                let lap = ax * (east - 2.0 * c + west) + ay * (north - 2.0 * c + south);
                y[k] = -lap + (self.v[k] + self.w[k]) * c - self.v[k] * cv - self.w[k] * cw;
            }
        }
    }
}

/// Solves for the steady state starting from `Phi = 0`.
pub fn solve_steady(grid: GridSpec, mu_v: f64, mu_w: f64, tol: f64) -> Result<SteadyState> {
    solve_steady_from(ScalarField::zeros(grid), mu_v, mu_w, tol)
}

/// Damped Newton on `J` from an arbitrary initial potential. Once the
/// residual is below `tol` the iteration continues while the residual still
/// halves, so the returned potential is accurate to rounding.
pub fn solve_steady_from(phi0: ScalarField, mu_v: f64, mu_w: f64, tol: f64) -> Result<SteadyState> {
    newton(phi0, mu_v, mu_w, tol, &mut Vec::new())
}

/// Newton iteration; `history` receives `J` at every accepted iterate.
fn newton(
    phi0: ScalarField,
    mu_v: f64,
    mu_w: f64,
    tol: f64,
    history: &mut Vec<f64>,
) -> Result<SteadyState> {
    if !(mu_v >= 0.0 && mu_w >= 0.0 && mu_v.is_finite() && mu_w.is_finite()) {
        return Err(EhdError::Contract(format!(
            "masses must be nonnegative and finite, got {mu_v}, {mu_w}"
        )));
    }
    if !(tol > 0.0) {
        return Err(EhdError::Contract(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let g = *phi0.grid();
    let mut phi = phi0;
    let (mut r, mut v, mut w) = residual_field(&phi, mu_v, mu_w)?;
    let mut res = r.max_abs();
    let mut j = j_functional(&phi, mu_v, mu_w)?;
    history.push(j);
    let mut iterations = 0;
    let mut converged = res <= tol;

    while iterations < MAX_NEWTON_ITERATIONS {
        if res == 0.0 {
            break;
        }
        // gradient of J per cell area is -r; Newton: H delta = r
        let h = Hessian {
            grid: g,
            v: v.values(),
            w: w.values(),
            mu_v,
            mu_w,
        };
        let shift = (v.integral() + w.integral()) / g.area();
        let pre = SeparableSolver::new(
            (Boundary1d::DirichletCell, g.nx(), g.hx()),
            (Boundary1d::DirichletCell, g.ny(), g.hy()),
            shift,
            1.0,
        );
        let rhs = r.values().to_vec();
        let mut delta = vec![0.0; rhs.len()];
        // An inexact direction near rounding level is still a descent direction,
        // so a capped inner solve is acceptable.
        match linalg::pcg(&h, &pre, &rhs, &mut delta, 1e-10 * res, 200, &|_| {}) {
            Ok(_) | Err(EhdError::Convergence { .. }) => {}
            Err(e) => return Err(e),
        }
        let delta = ScalarField::from_values(g, delta)?;
        // directional derivative of J along delta
        let slope = -r.dot(&delta);
        if slope >= 0.0 {
            // not a descent direction: only rounding left
            break;
        }
        let negligible = -slope <= 1e2 * f64::EPSILON * (1.0 + j.abs());

        let mut alpha = 1.0;
        let (trial, j_trial) = loop {
            let trial = phi.zip_map(&delta, |p, d| p + alpha * d);
            let jt = j_functional(&trial, mu_v, mu_w)?;
            if negligible || jt <= j + ARMIJO * alpha * slope {
                break (trial, jt);
            }
            alpha *= 0.5;
            if alpha < MIN_STEP {
                return Err(EhdError::LineSearchStalled {
                    iterations,
                    residual: res,
                    best: Box::new(SteadyState {
                        phi,
                        v,
                        w,
                        mu_v,
                        mu_w,
                        residual: res,
                        iterations,
                    }),
                });
            }
        };
        let (r_new, v_new, w_new) = residual_field(&trial, mu_v, mu_w)?;
        let res_new = r_new.max_abs();
        if converged && res_new > 0.5 * res {
            // polishing has stopped paying off; keep the better iterate
            if res_new < res {
                phi = trial;
                (v, w, res) = (v_new, w_new, res_new);
                history.push(j_trial);
                iterations += 1;
            }
            break;
        }
        phi = trial;
        (r, v, w, res, j) = (r_new, v_new, w_new, res_new, j_trial);
        history.push(j);
        iterations += 1;
        log::debug!("newton {iterations}: residual {res:.3e}, step {alpha}");
        converged |= res <= tol;
    }
    if !converged {
        return Err(EhdError::Convergence {
            solver: "steady Newton",
            iterations,
            residual: res,
        });
    }
    Ok(SteadyState {
        phi,
        v,
        w,
        mu_v,
        mu_w,
        residual: res,
        iterations,
    })
}

/// `max |(V - W) grad Phi - grad(V + W)|` over interior faces, faces taking
/// the arithmetic mean of `V - W`.
pub fn pressure_identity_residual(steady: &SteadyState) -> Result<f64> {
    let g = *steady.phi.grid();
    let q = steady.v.sub(&steady.w);
    let s = steady.v.add(&steady.w);
    let gp = gradient_dirichlet0(&steady.phi)?;
    let gs = gradient_dirichlet0(&s)?;
    let mut m = 0.0f64;
    for j in 0..g.ny() {
        for i in 1..g.nx() {
            let qf = 0.5 * (q.at(i - 1, j) + q.at(i, j));
            let f = g.xface(i, j);
            m = m.max((qf * gp.xcomp()[f] - gs.xcomp()[f]).abs());
        }
    }
    for j in 1..g.ny() {
        for i in 0..g.nx() {
            let qf = 0.5 * (q.at(i, j - 1) + q.at(i, j));
            let f = g.yface(i, j);
            m = m.max((qf * gp.ycomp()[f] - gs.ycomp()[f]).abs());
        }
    }
    Ok(m)
}
