//! Incompressible Navier-Stokes with Lorentz forcing on the MAC grid:
//! explicit advection, implicit (backward Euler) viscosity with no-slip
//! walls, and pressure projection.

use crate::elliptic::PoissonSolver;
use crate::error::{EhdError, Result};
use crate::grid::{divergence, gradient_neumann, same_grid, GridSpec, ScalarField, VectorField};
use crate::linalg::{self, Boundary1d, LinearOperator, SeparableSolver};
use crate::transport::sg_face_weight;

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityState {
    pub u: VectorField,
    /// Diagnostic only.
    pub p: ScalarField,
}

impl VelocityState {
    pub fn at_rest(grid: GridSpec) -> Self {
        Self {
            u: VectorField::zeros(grid),
            p: ScalarField::zeros(grid),
        }
    }

    pub fn max_divergence(&self) -> f64 {
        divergence(&self.u)
            .map(|d| d.max_abs())
            .unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Advection {
    #[default]
    Centered,
    Upwind,
}

/// How the charge density `v - w` is carried to the faces in the Lorentz
/// force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChargeAveraging {
    /// Exponentially fitted face densities, consistent with the transport
    /// fluxes. At a Boltzmann equilibrium the force is then exactly the
    /// discrete gradient of `v + w`, which the projection removes.
    #[default]
    ExponentialFit,
    /// Plain arithmetic mean of neighboring cells.
    Arithmetic,
}

/// Face force `(v - w) grad(phi)`; wall-normal faces are zero.
pub fn lorentz_force(v: &ScalarField, w: &ScalarField, phi: &ScalarField) -> Result<VectorField> {
    lorentz_force_with(v, w, phi, ChargeAveraging::ExponentialFit)
}

pub fn lorentz_force_with(
    v: &ScalarField,
    w: &ScalarField,
    phi: &ScalarField,
    averaging: ChargeAveraging,
) -> Result<VectorField> {
    let g = *phi.grid();
    same_grid(&g, v.grid())?;
    same_grid(&g, w.grid())?;
    let (pv, vv, wv) = (phi.values(), v.values(), w.values());
    let face = |l: usize, r: usize, h: f64| -> f64 {
        let s = pv[r] - pv[l];
        let q = match averaging {
            ChargeAveraging::ExponentialFit => {
                let (a, b) = (sg_face_weight(s), sg_face_weight(-s));
                let vf = a * vv[r] + (1.0 - a) * vv[l];
                let wf = b * wv[r] + (1.0 - b) * wv[l];
                vf - wf
            }
            ChargeAveraging::Arithmetic => 0.5 * (vv[l] + vv[r]) - 0.5 * (wv[l] + wv[r]),
        };
        q * (s / h)
    };
    let mut f = VectorField::zeros(g);
    for j in 0..g.ny() {
        for i in 1..g.nx() {
            let val = face(g.cell(i - 1, j), g.cell(i, j), g.hx());
            f.xcomp_mut()[g.xface(i, j)] = val;
        }
    }
    for j in 1..g.ny() {
        for i in 0..g.nx() {
            let val = face(g.cell(i, j - 1), g.cell(i, j), g.hy());
            f.ycomp_mut()[g.yface(i, j)] = val;
        }
    }
    Ok(f)
}

/// Advective acceleration `-(u . grad) u` at interior faces.
pub fn advection(u: &VectorField, scheme: Advection) -> VectorField {
    let g = *u.grid();
    let (nx, ny, hx, hy) = (g.nx(), g.ny(), g.hx(), g.hy());
    let (ux, uy) = (u.xcomp(), u.ycomp());
    let mut out = VectorField::zeros(g);

    let deriv = |minus: f64, centre: f64, plus: f64, h: f64, vel: f64| -> f64 {
        match scheme {
            Advection::Centered => (plus - minus) / (2.0 * h),
            Advection::Upwind => {
                if vel > 0.0 {
                    (centre - minus) / h
                } else {
                    (plus - centre) / h
                }
            }
        }
    };

    for j in 0..ny {
        for i in 1..nx {
            let c = ux[g.xface(i, j)];
            let (w, e) = (ux[g.xface(i - 1, j)], ux[g.xface(i + 1, j)]);
            let s = if j == 0 { -c } else { ux[g.xface(i, j - 1)] };
            let n = if j == ny - 1 {
                -c
            } else {
                ux[g.xface(i, j + 1)]
            };
            let vbar = 0.25
                * (uy[g.yface(i - 1, j)]
                    + uy[g.yface(i, j)]
                    + uy[g.yface(i - 1, j + 1)]
                    + uy[g.yface(i, j + 1)]);
            let val = -(c * deriv(w, c, e, hx, c) + vbar * deriv(s, c, n, hy, vbar));
            out.xcomp_mut()[g.xface(i, j)] = val;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let c = uy[g.yface(i, j)];
            let (s, n) = (uy[g.yface(i, j - 1)], uy[g.yface(i, j + 1)]);
            let w = if i == 0 { -c } else { uy[g.yface(i - 1, j)] };
            let e = if i == nx - 1 {
                -c
            } else {
                uy[g.yface(i + 1, j)]
            };
            let ubar = 0.25
                * (ux[g.xface(i, j - 1)]
                    + ux[g.xface(i + 1, j - 1)]
                    + ux[g.xface(i, j)]
                    + ux[g.xface(i + 1, j)]);
            let val = -(ubar * deriv(w, c, e, hx, ubar) + c * deriv(s, c, n, hy, c));
            out.ycomp_mut()[g.yface(i, j)] = val;
        }
    }
    out
}

/// Which velocity component a diffusion operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Component {
    X,
    Y,
}

/// `I - dt * lap` on the interior unknowns of one velocity component, with
/// zero normal velocity and no-slip (ghost = -interior) tangential walls.
struct ImplicitViscosity {
    grid: GridSpec,
    comp: Component,
    dt: f64,
}

impl ImplicitViscosity {
    fn shape(&self) -> (usize, usize) {
        match self.comp {
            Component::X => (self.grid.nx() - 1, self.grid.ny()),
            Component::Y => (self.grid.nx(), self.grid.ny() - 1),
        }
    }
}

impl LinearOperator for ImplicitViscosity {
    fn dim(&self) -> usize {
        let (mx, my) = self.shape();
        mx * my
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (mx, my) = self.shape();
        let (ax, ay) = (
            1.0 / (self.grid.hx() * self.grid.hx()),
            1.0 / (self.grid.hy() * self.grid.hy()),
        );
        // Node-type directions have zero neighbors past the ends; cell-type
        // directions reflect with a sign flip.
        let (x_ghost, y_ghost) = match self.comp {
            Component::X => (0.0, -1.0),
            Component::Y => (-1.0, 0.0),
        };
        for j in 0..my {
            for i in 0..mx {
                let k = j * mx + i;
                let c = x[k];
                let w = if i == 0 { x_ghost * c } else { x[k - 1] };
                let e = if i == mx - 1 { x_ghost * c } else { x[k + 1] };
                let s = if j == 0 { y_ghost * c } else { x[k - mx] };
                let n = if j == my - 1 { y_ghost * c } else { x[k + mx] };
                let lap = ax * (e - 2.0 * c + w) + ay * (n - 2.0 * c + s);
                y[k] = c - self.dt * lap;
            }
        }
    }
}

fn gather(u: &VectorField, comp: Component) -> Vec<f64> {
    let g = *u.grid();
    match comp {
        Component::X => {
            let mut out = Vec::with_capacity((g.nx() - 1) * g.ny());
            for j in 0..g.ny() {
                for i in 1..g.nx() {
                    out.push(u.xcomp()[g.xface(i, j)]);
                }
            }
            out
        }
        Component::Y => {
            let mut out = Vec::with_capacity(g.nx() * (g.ny() - 1));
            for j in 1..g.ny() {
                for i in 0..g.nx() {
                    out.push(u.ycomp()[g.yface(i, j)]);
                }
            }
            out
        }
    }
}

fn scatter(data: &[f64], u: &mut VectorField, comp: Component) {
    let g = *u.grid();
    let mut k = 0;
    match comp {
        Component::X => {
            for j in 0..g.ny() {
                for i in 1..g.nx() {
                    u.xcomp_mut()[g.xface(i, j)] = data[k];
                    k += 1;
                }
            }
        }
        Component::Y => {
            for j in 1..g.ny() {
                for i in 0..g.nx() {
                    u.ycomp_mut()[g.yface(i, j)] = data[k];
                    k += 1;
                }
            }
        }
    }
}

/// Velocity Laplacian with no-slip walls, evaluated at interior faces.
pub fn vector_laplacian(u: &VectorField) -> VectorField {
    let g = *u.grid();
    let mut out = VectorField::zeros(g);
    for comp in [Component::X, Component::Y] {
        // I - 1 * lap, so lap = x - op(x)
        let op = ImplicitViscosity {
            grid: g,
            comp,
            dt: 1.0,
        };
        let x = gather(u, comp);
        let mut y = vec![0.0; x.len()];
        op.apply(&x, &mut y);
        let lap: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        scatter(&lap, &mut out, comp);
    }
    out
}

/// Projection onto discretely divergence-free fields with zero wall-normal
/// velocity. Returns the projected field and the potential `q` with
/// `f = P f + grad q`.
pub fn project(
    poisson: &PoissonSolver,
    f: &VectorField,
    tol: f64,
) -> Result<(VectorField, ScalarField)> {
    let mut f = f.clone();
    f.zero_boundary_normal();
    // The divergence of a field with zero wall flux integrates to zero up to
    // rounding; remove that rounding so the Neumann problem is compatible.
    let mut div = divergence(&f)?;
    let mean = div.integral() / div.grid().area();
    div.values_mut().iter_mut().for_each(|d| *d -= mean);
    let q = poisson.solve_neumann_meanzero(&div, tol)?;
    let grad = gradient_neumann(&q);
    f.axpy(-1.0, &grad);
    Ok((f, q))
}

/// Cached solvers for a grid and time step.
#[derive(Debug, Clone)]
pub struct FluidSolver {
    grid: GridSpec,
    dt: f64,
    poisson: PoissonSolver,
    visc_x: SeparableSolver,
    visc_y: SeparableSolver,
    pub advection: Advection,
}

impl FluidSolver {
    pub fn new(grid: GridSpec, dt: f64) -> Result<Self> {
        Self::with_poisson(PoissonSolver::new(grid), dt)
    }

    pub fn with_poisson(poisson: PoissonSolver, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(EhdError::Contract(format!("dt must be positive, got {dt}")));
        }
        let grid = *poisson.grid();
        let (nx, ny, hx, hy) = (grid.nx(), grid.ny(), grid.hx(), grid.hy());
        let visc_x = SeparableSolver::new(
            (Boundary1d::DirichletNode, nx, hx),
            (Boundary1d::DirichletCell, ny, hy),
            1.0,
            dt,
        );
        let visc_y = SeparableSolver::new(
            (Boundary1d::DirichletCell, nx, hx),
            (Boundary1d::DirichletNode, ny, hy),
            1.0,
            dt,
        );
        Ok(Self {
            grid,
            dt,
            poisson,
            visc_x,
            visc_y,
            advection: Advection::Centered,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn poisson(&self) -> &PoissonSolver {
        &self.poisson
    }

    fn diffuse(&self, rhs: &VectorField, tol: f64) -> Result<VectorField> {
        let mut out = VectorField::zeros(self.grid);
        for (comp, pre) in [(Component::X, &self.visc_x), (Component::Y, &self.visc_y)] {
            let b = gather(rhs, comp);
            let mut x = vec![0.0; b.len()];
            let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if bmax > 0.0 {
                let op = ImplicitViscosity {
                    grid: self.grid,
                    comp,
                    dt: self.dt,
                };
                linalg::pcg(&op, pre, &b, &mut x, tol * bmax, 10 * b.len(), &|_| {})?;
            }
            scatter(&x, &mut out, comp);
        }
        Ok(out)
    }

    /// One projection step. The explicit acceleration (advection plus force)
    /// is projected before the viscous solve so that a force which is a
    /// discrete gradient leaves a fluid at rest exactly at rest.
    pub fn advance(
        &self,
        state: &VelocityState,
        force: &VectorField,
        tol: f64,
    ) -> Result<VelocityState> {
        same_grid(&self.grid, state.u.grid())?;
        same_grid(&self.grid, force.grid())?;
        if !(tol > 0.0) {
            return Err(EhdError::Contract(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let dt = self.dt;
        let cfl = state.u.max_abs() * dt / self.grid.hx().min(self.grid.hy());
        if cfl > 1.0 {
            log::warn!("advective CFL number {cfl:.3} exceeds 1");
        }

        let mut accel = advection(&state.u, self.advection);
        accel.axpy(1.0, force);
        let (accel, q) = project(&self.poisson, &accel, tol)?;

        let mut rhs = state.u.clone();
        rhs.axpy(dt, &accel);
        let u_star = self.diffuse(&rhs, tol)?;

        let (u, p_corr) = project(&self.poisson, &u_star, tol)?;
        // u_star - u = grad(p_corr) and the pressure increment is p_corr / dt
        let p = q.add(&p_corr.scale(1.0 / dt));
        Ok(VelocityState { u, p })
    }
}

pub fn advance_velocity(
    state: &VelocityState,
    force: &VectorField,
    dt: f64,
    tol: f64,
) -> Result<VelocityState> {
    FluidSolver::new(*state.u.grid(), dt)?.advance(state, force, tol)
}
