//! Semi-implicit charge transport: backward Euler for each species with the
//! potential and velocity frozen at the start of the step.
//!
//! Face fluxes combine a Scharfetter-Gummel drift-diffusion flux with
//! first-order upwind advection, and wall faces carry no flux. The system
//! matrix `I - dt L` then has unit column sums, a positive diagonal and
//! nonpositive off-diagonals, so it is a nonsingular M-matrix for every
//! `dt > 0`: mass is conserved and nonnegative data stays nonnegative.

use crate::error::{EhdError, Result};
use crate::grid::{same_grid, GridSpec, ScalarField, VectorField};
use crate::linalg::{self, Jacobi, LinearOperator};

pub const DEFAULT_TOL: f64 = 1e-12;

/// `x / (exp(x) - 1)`, with `B(0) = 1`.
pub fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - 0.5 * x + x2 / 12.0 - x2 * x2 / 720.0
    } else {
        x / x.exp_m1()
    }
}

/// Discrete `dn/dx - n dpsi/dx` across a face with left/right densities
/// `nl`, `nr`, potential jump `s = psi_r - psi_l` and spacing `h`.
pub fn sg_face_flux(nl: f64, nr: f64, s: f64, h: f64) -> f64 {
    (bernoulli(s) * nr - bernoulli(-s) * nl) / h
}

/// Weight `a` such that `a * nr + (1 - a) * nl` is the face density that
/// makes `dn/dx - n_face * dpsi/dx` equal the Scharfetter-Gummel flux. It
/// tends to 1/2 as `s -> 0` and lies in (0, 1).
pub fn sg_face_weight(s: f64) -> f64 {
    if s.abs() < 1e-4 {
        // (1 - B(s)) / s = 1/2 - s/12 + s^3/720
        0.5 - s / 12.0 + s * s * s / 720.0
    } else {
        (1.0 - bernoulli(s)) / s
    }
}

/// Negative and positive species densities.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargePair {
    pub v: ScalarField,
    pub w: ScalarField,
}

impl ChargePair {
    pub fn new(v: ScalarField, w: ScalarField) -> Result<Self> {
        same_grid(v.grid(), w.grid())?;
        let pair = Self { v, w };
        pair.check_nonnegative()?;
        Ok(pair)
    }

    pub fn grid(&self) -> &GridSpec {
        self.v.grid()
    }

    pub fn masses(&self) -> (f64, f64) {
        (self.v.integral(), self.w.integral())
    }

    pub fn check_nonnegative(&self) -> Result<()> {
        for (name, f) in [("v", &self.v), ("w", &self.w)] {
            let m = f.min();
            if m < 0.0 {
                return Err(EhdError::Domain(format!(
                    "density {name} is negative (min {m:e})"
                )));
            }
        }
        Ok(())
    }

    pub fn swapped(&self) -> ChargePair {
        Self {
            v: self.w.clone(),
            w: self.v.clone(),
        }
    }
}

/// 5-point operator with per-cell coefficients.
#[derive(Debug, Clone)]
pub struct FivePoint {
    grid: GridSpec,
    pub diag: Vec<f64>,
    pub east: Vec<f64>,
    pub west: Vec<f64>,
    pub north: Vec<f64>,
    pub south: Vec<f64>,
}

impl FivePoint {
    fn zeros(grid: GridSpec) -> Self {
        let n = grid.num_cells();
        Self {
            grid,
            diag: vec![0.0; n],
            east: vec![0.0; n],
            west: vec![0.0; n],
            north: vec![0.0; n],
            south: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Rate operator `n -> div(grad n - n grad psi - u n)` with zero wall flux.
    pub fn transport_rate(u: &VectorField, psi: &ScalarField) -> Self {
        let g = *psi.grid();
        let (nx, ny) = (g.nx(), g.ny());
        let (hx, hy) = (g.hx(), g.hy());
        let p = psi.values();
        let mut op = Self::zeros(g);
        // x-faces: face (i, j) sits between cells L = (i-1, j) and R = (i, j).
        // Face value G = a_r n_R - b_l n_L, cell L gains G/hx, cell R loses it.
        for j in 0..ny {
            for i in 1..nx {
                let (l, r) = (g.cell(i - 1, j), g.cell(i, j));
                let s = p[r] - p[l];
                let uf = u.xcomp()[g.xface(i, j)];
                let a_r = bernoulli(s) / hx - uf.min(0.0);
                let b_l = bernoulli(-s) / hx + uf.max(0.0);
                op.diag[l] -= b_l / hx;
                op.east[l] += a_r / hx;
                op.diag[r] -= a_r / hx;
                op.west[r] += b_l / hx;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let (b, t) = (g.cell(i, j - 1), g.cell(i, j));
                let s = p[t] - p[b];
                let uf = u.ycomp()[g.yface(i, j)];
                let a_t = bernoulli(s) / hy - uf.min(0.0);
                let b_b = bernoulli(-s) / hy + uf.max(0.0);
                op.diag[b] -= b_b / hy;
                op.north[b] += a_t / hy;
                op.diag[t] -= a_t / hy;
                op.south[t] += b_b / hy;
            }
        }
        op
    }

    pub fn apply_to(&self, x: &[f64], y: &mut [f64]) {
        let g = self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        for j in 0..ny {
            for i in 0..nx {
                let c = g.cell(i, j);
                let mut acc = self.diag[c] * x[c];
                if i + 1 < nx {
                    acc += self.east[c] * x[c + 1];
                }
                if i > 0 {
                    acc += self.west[c] * x[c - 1];
                }
                if j + 1 < ny {
                    acc += self.north[c] * x[c + nx];
                }
                if j > 0 {
                    acc += self.south[c] * x[c - nx];
                }
                y[c] = acc;
            }
        }
    }

    /// Dense matrix, for small-grid checks.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.grid.num_cells();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for c in 0..n {
            e[c] = 1.0;
            self.apply_to(&e, &mut col);
            for r in 0..n {
                m[(r, c)] = col[r];
            }
            e[c] = 0.0;
        }
        m
    }
}

/// `I - dt L`.
struct BackwardEuler<'a> {
    rate: &'a FivePoint,
    dt: f64,
}

impl LinearOperator for BackwardEuler<'_> {
    fn dim(&self) -> usize {
        self.rate.grid.num_cells()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.rate.apply_to(x, y);
        for (y, x) in y.iter_mut().zip(x) {
            *y = x - self.dt * *y;
        }
    }
}

/// Advances one species density by one backward Euler step against the
/// frozen drift potential `psi` (`phi` for `v`, `-phi` for `w`) and the
/// velocity `u`, then restores its mass to `target_mass`.
pub fn advance_species(
    n: &ScalarField,
    u: &VectorField,
    psi: &ScalarField,
    dt: f64,
    tol: f64,
    target_mass: f64,
) -> Result<ScalarField> {
    let g = *n.grid();
    same_grid(&g, psi.grid())?;
    same_grid(&g, u.grid())?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(EhdError::Contract(format!("dt must be positive, got {dt}")));
    }
    if !(tol > 0.0) {
        return Err(EhdError::Contract(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if n.min() < 0.0 {
        return Err(EhdError::Domain(format!(
            "negative density on input (min {:e})",
            n.min()
        )));
    }

    let rate = FivePoint::transport_rate(u, psi);
    let old = n.values();
    // Increment form: (I - dt L) delta = dt L n_old. The residual tolerance is
    // relative to the increment, so accuracy tracks the distance to
    // equilibrium instead of stalling at a fixed absolute level.
    let mut b = vec![0.0; old.len()];
    rate.apply_to(old, &mut b);
    b.iter_mut().for_each(|e| *e *= dt);
    let b_norm = b.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let mut delta = vec![0.0; old.len()];
    if b_norm > 0.0 {
        let op = BackwardEuler { rate: &rate, dt };
        let diag: Vec<f64> = rate.diag.iter().map(|d| 1.0 - dt * d).collect();
        let floor = 1e-2 * f64::EPSILON * n.max_abs();
        let tol_abs = (tol * b_norm).max(floor);
        linalg::bicgstab(
            &op,
            &Jacobi::new(&diag),
            &b,
            &mut delta,
            tol_abs,
            10 * g.num_cells(),
        )?;
    }
    let mut new: Vec<f64> = old.iter().zip(&delta).map(|(a, d)| a + d).collect();

    let scale = n.max_abs();
    for v in new.iter_mut() {
        if *v < 0.0 {
            // The exact solution is nonnegative; only solver roundoff can end
            // up here.
            if *v >= -1e-14 * scale {
                *v = 0.0;
            } else {
                return Err(EhdError::Invariant(format!(
                    "transport step produced negative density {v:e}"
                )));
            }
        }
    }
    let mass = new.iter().sum::<f64>() * g.cell_area();
    if target_mass == 0.0 {
        new.iter_mut().for_each(|v| *v = 0.0);
    } else if mass > 0.0 {
        let f = target_mass / mass;
        new.iter_mut().for_each(|v| *v *= f);
    }
    ScalarField::from_values(g, new)
}

/// One transport step for both species; each keeps its input mass.
pub fn advance_charges(
    pair: &ChargePair,
    u: &VectorField,
    phi: &ScalarField,
    dt: f64,
    tol: f64,
) -> Result<ChargePair> {
    let masses = pair.masses();
    advance_charges_with_masses(pair, u, phi, dt, tol, masses)
}

/// Like [`advance_charges`] but restores the given masses `(mu_v, mu_w)`.
pub fn advance_charges_with_masses(
    pair: &ChargePair,
    u: &VectorField,
    phi: &ScalarField,
    dt: f64,
    tol: f64,
    masses: (f64, f64),
) -> Result<ChargePair> {
    let v = advance_species(&pair.v, u, phi, dt, tol, masses.0)?;
    let w = advance_species(&pair.w, u, &phi.neg(), dt, tol, masses.1)?;
    Ok(ChargePair { v, w })
}
