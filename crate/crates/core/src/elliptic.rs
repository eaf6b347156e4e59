//! Discrete Poisson problems: homogeneous Dirichlet (electrostatic
//! potential) and mean-zero homogeneous Neumann (projection pressure).
//!
//! Both are solved by preconditioned conjugate gradients on the negated
//! 5-point Laplacian. The default preconditioner is the separable
//! eigen-transform solver, which is an exact inverse of the constant
//! coefficient operator, so CG typically stops after one or two iterations
//! with a residual at rounding level.

use crate::error::{EhdError, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::linalg::{self, Boundary1d, Jacobi, LinearOperator, SeparableSolver};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoissonPreconditioner {
    #[default]
    Spectral,
    Jacobi,
}

/// Negated cell-centered Laplacian, Dirichlet or Neumann walls.
pub(crate) struct NegLaplacian {
    pub grid: GridSpec,
    pub dirichlet: bool,
}

impl NegLaplacian {
    pub(crate) fn diagonal(&self) -> Vec<f64> {
        let g = self.grid;
        let (ax, ay) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        let wall = if self.dirichlet { 2.0 } else { 0.0 };
        let mut d = vec![0.0; g.num_cells()];
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let mut v = 0.0;
                v += if i == 0 { wall * ax } else { ax };
                v += if i == g.nx() - 1 { wall * ax } else { ax };
                v += if j == 0 { wall * ay } else { ay };
                v += if j == g.ny() - 1 { wall * ay } else { ay };
                d[g.cell(i, j)] = v;
            }
        }
        d
    }
}

impl LinearOperator for NegLaplacian {
    fn dim(&self) -> usize {
        self.grid.num_cells()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let (ax, ay) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        let sign = if self.dirichlet { -1.0 } else { 1.0 };
        for j in 0..ny {
            for i in 0..nx {
                let c = x[g.cell(i, j)];
                let w = if i == 0 {
                    sign * c
                } else {
                    x[g.cell(i - 1, j)]
                };
                let e = if i == nx - 1 {
                    sign * c
                } else {
                    x[g.cell(i + 1, j)]
                };
                let s = if j == 0 {
                    sign * c
                } else {
                    x[g.cell(i, j - 1)]
                };
                let n = if j == ny - 1 {
                    sign * c
                } else {
                    x[g.cell(i, j + 1)]
                };
                y[g.cell(i, j)] = -(ax * (e - 2.0 * c + w) + ay * (n - 2.0 * c + s));
            }
        }
    }
}

fn project_mean_zero(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

/// Reusable Poisson solver for one grid.
#[derive(Debug, Clone)]
pub struct PoissonSolver {
    grid: GridSpec,
    dirichlet: SeparableSolver,
    neumann: SeparableSolver,
    preconditioner: PoissonPreconditioner,
}

impl PoissonSolver {
    pub fn new(grid: GridSpec) -> Self {
        Self::with_preconditioner(grid, PoissonPreconditioner::Spectral)
    }

    pub fn with_preconditioner(grid: GridSpec, preconditioner: PoissonPreconditioner) -> Self {
        let (nx, ny, hx, hy) = (grid.nx(), grid.ny(), grid.hx(), grid.hy());
        let dirichlet = SeparableSolver::new(
            (Boundary1d::DirichletCell, nx, hx),
            (Boundary1d::DirichletCell, ny, hy),
            0.0,
            1.0,
        );
        let neumann = SeparableSolver::new(
            (Boundary1d::NeumannCell, nx, hx),
            (Boundary1d::NeumannCell, ny, hy),
            0.0,
            1.0,
        );
        Self {
            grid,
            dirichlet,
            neumann,
            preconditioner,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn max_iter(&self) -> usize {
        10 * self.grid.num_cells()
    }

    /// Solves `lap_d(phi) = rhs` with `phi = 0` on the walls.
    pub fn solve_dirichlet(&self, rhs: &ScalarField, tol: f64) -> Result<ScalarField> {
        self.check(rhs, tol)?;
        let tol_abs = tol * rhs.max_abs().max(1.0);
        let mut x = vec![0.0; self.grid.num_cells()];
        if rhs.max_abs() == 0.0 {
            return ScalarField::from_values(self.grid, x);
        }
        let b: Vec<f64> = rhs.values().iter().map(|v| -v).collect();
        let op = NegLaplacian {
            grid: self.grid,
            dirichlet: true,
        };
        match self.preconditioner {
            PoissonPreconditioner::Spectral => {
                // the separable solver inverts lap, not -lap
                let m = Negated(&self.dirichlet);
                linalg::pcg(&op, &m, &b, &mut x, tol_abs, self.max_iter(), &|_| {})?;
            }
            PoissonPreconditioner::Jacobi => {
                let m = Jacobi::new(&op.diagonal());
                linalg::pcg(&op, &m, &b, &mut x, tol_abs, self.max_iter(), &|_| {})?;
            }
        }
        let phi = ScalarField::from_values(self.grid, x)?;
        #[cfg(debug_assertions)]
        {
            let lap = crate::grid::laplacian_dirichlet0(&phi)?;
            let res = lap.sub(rhs).max_abs();
            debug_assert!(res <= 2.0 * tol_abs, "Dirichlet residual {res} > {tol_abs}");
        }
        Ok(phi)
    }

    /// Solves `lap_n(p) = rhs` with zero-flux walls, returning the mean-zero
    /// solution. `rhs` must integrate to zero.
    pub fn solve_neumann_meanzero(&self, rhs: &ScalarField, tol: f64) -> Result<ScalarField> {
        self.check(rhs, tol)?;
        let net = rhs.integral();
        let l1 = rhs.values().iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_area();
        let limit = 1e-10 * l1;
        if net.abs() > limit {
            return Err(EhdError::Compatibility {
                net: net.abs(),
                limit,
            });
        }
        let tol_abs = tol * rhs.max_abs().max(1.0);
        let mut x = vec![0.0; self.grid.num_cells()];
        if rhs.max_abs() == 0.0 {
            return ScalarField::from_values(self.grid, x);
        }
        let mut b: Vec<f64> = rhs.values().iter().map(|v| -v).collect();
        project_mean_zero(&mut b);
        let op = NegLaplacian {
            grid: self.grid,
            dirichlet: false,
        };
        match self.preconditioner {
            PoissonPreconditioner::Spectral => {
                let m = Negated(&self.neumann);
                linalg::pcg(
                    &op,
                    &m,
                    &b,
                    &mut x,
                    tol_abs,
                    self.max_iter(),
                    &project_mean_zero,
                )?;
            }
            PoissonPreconditioner::Jacobi => {
                let m = Jacobi::new(&op.diagonal());
                linalg::pcg(
                    &op,
                    &m,
                    &b,
                    &mut x,
                    tol_abs,
                    self.max_iter(),
                    &project_mean_zero,
                )?;
            }
        }
        ScalarField::from_values(self.grid, x)
    }

    fn check(&self, rhs: &ScalarField, tol: f64) -> Result<()> {
        crate::grid::same_grid(&self.grid, rhs.grid())?;
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(EhdError::Contract(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        if rhs.values().iter().any(|v| !v.is_finite()) {
            return Err(EhdError::Contract(
                "Poisson right-hand side is not finite".into(),
            ));
        }
        Ok(())
    }
}

struct Negated<'a>(&'a SeparableSolver);

impl linalg::Preconditioner for Negated<'_> {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        self.0.solve(r, z);
        z.iter_mut().for_each(|v| *v = -*v);
    }
}

pub fn solve_poisson_dirichlet(rhs: &ScalarField, tol: f64) -> Result<ScalarField> {
    PoissonSolver::new(*rhs.grid()).solve_dirichlet(rhs, tol)
}

pub fn solve_poisson_neumann_meanzero(rhs: &ScalarField, tol: f64) -> Result<ScalarField> {
    PoissonSolver::new(*rhs.grid()).solve_neumann_meanzero(rhs, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{laplacian_dirichlet0, laplacian_neumann};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn dense(g: GridSpec, op: impl Fn(&ScalarField) -> ScalarField) -> DMatrix<f64> {
        let n = g.num_cells();
        let mut m = DMatrix::zeros(n, n);
        for c in 0..n {
            let mut e = ScalarField::zeros(g);
            e.values_mut()[c] = 1.0;
            let col = op(&e);
            for r in 0..n {
                m[(r, c)] = col.values()[r];
            }
        }
        m
    }

    fn random(g: GridSpec, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField::from_values(
            g,
            (0..g.num_cells())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = GridSpec::unit_square(6).unwrap();
        let z = ScalarField::zeros(g);
        assert_eq!(solve_poisson_dirichlet(&z, 1e-10).unwrap().max_abs(), 0.0);
        assert_eq!(
            solve_poisson_neumann_meanzero(&z, 1e-10).unwrap().max_abs(),
            0.0
        );
    }

    #[test]
    fn dirichlet_eigenpair() {
        let g = GridSpec::new(32, 24, 1.0, 0.75).unwrap();
        let (lx, ly, hx, hy) = (g.lx(), g.ly(), g.hx(), g.hy());
        let mode = ScalarField::from_fn(g, |x, y| (PI * x / lx).sin() * (PI * y / ly).sin());
        let lam = -(4.0 / (hx * hx)) * (PI * hx / (2.0 * lx)).sin().powi(2)
            - (4.0 / (hy * hy)) * (PI * hy / (2.0 * ly)).sin().powi(2);
        let phi = solve_poisson_dirichlet(&mode.scale(lam), 1e-12).unwrap();
        assert!(phi.sub(&mode).max_abs() < 1e-10);
    }

    #[test]
    fn dirichlet_matches_dense_solve() {
        let g = GridSpec::unit_square(8).unwrap();
        let rhs = random(g, 1);
        let m = dense(g, |s| laplacian_dirichlet0(s).unwrap());
        let want = m
            .lu()
            .solve(&DVector::from_column_slice(rhs.values()))
            .unwrap();
        for pc in [
            PoissonPreconditioner::Spectral,
            PoissonPreconditioner::Jacobi,
        ] {
            let phi = PoissonSolver::with_preconditioner(g, pc)
                .solve_dirichlet(&rhs, 1e-13)
                .unwrap();
            for (a, b) in phi.values().iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-10, "{pc:?}");
            }
        }
    }

    #[test]
    fn neumann_cosine_eigenpair() {
        let g = GridSpec::new(20, 10, 2.0, 1.0).unwrap();
        let (lx, hx) = (g.lx(), g.hx());
        let mode = ScalarField::from_fn(g, |x, _| (PI * x / lx).cos());
        let lam = -(4.0 / (hx * hx)) * (PI * hx / (2.0 * lx)).sin().powi(2);
        let lap = laplacian_neumann(&mode).unwrap();
        assert!(lap.sub(&mode.scale(lam)).max_abs() < 1e-10);
        let p = solve_poisson_neumann_meanzero(&mode.scale(lam), 1e-12).unwrap();
        let mean = mode.integral() / g.area();
        assert!(p.sub(&mode.map(|v| v - mean)).max_abs() < 1e-10);
        assert!(p.integral().abs() < 1e-12);
    }

    #[test]
    fn neumann_matches_pseudo_inverse() {
        let g = GridSpec::unit_square(8).unwrap();
        let mut rhs = random(g, 2);
        let mean = rhs.integral() / g.area();
        rhs = rhs.map(|v| v - mean);
        let m = dense(g, |s| laplacian_neumann(s).unwrap());
        let pinv = m.pseudo_inverse(1e-10).unwrap();
        let want = pinv * DVector::from_column_slice(rhs.values());
        let wmean = want.mean();
        for pc in [
            PoissonPreconditioner::Spectral,
            PoissonPreconditioner::Jacobi,
        ] {
            let p = PoissonSolver::with_preconditioner(g, pc)
                .solve_neumann_meanzero(&rhs, 1e-13)
                .unwrap();
            for (a, b) in p.values().iter().zip(want.iter()) {
                assert!((a - (b - wmean)).abs() < 1e-10, "{pc:?}");
            }
        }
    }

    #[test]
    fn neumann_rejects_incompatible_rhs() {
        let g = GridSpec::unit_square(8).unwrap();
        let rhs = ScalarField::constant(g, 1.0);
        assert!(matches!(
            solve_poisson_neumann_meanzero(&rhs, 1e-10),
            Err(EhdError::Compatibility { .. })
        ));
    }

    #[test]
    fn rejects_bad_tolerance() {
        let g = GridSpec::unit_square(4).unwrap();
        assert!(solve_poisson_dirichlet(&ScalarField::zeros(g), 0.0).is_err());
    }

    #[test]
    fn iteration_cap_is_an_error() {
        let g = GridSpec::unit_square(16).unwrap();
        let rhs = random(g, 9);
        let solver = PoissonSolver::with_preconditioner(g, PoissonPreconditioner::Jacobi);
        // an unattainable tolerance exhausts the cap
        let err = solver.solve_dirichlet(&rhs, 1e-300).unwrap_err();
        assert!(matches!(err, EhdError::Convergence { .. }));
    }

    #[test]
    fn maximum_principle() {
        let g = GridSpec::unit_square(12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let rhs = ScalarField::from_values(
                g,
                (0..g.num_cells())
                    .map(|_| -rng.random_range(0.0..1.0))
                    .collect(),
            )
            .unwrap();
            let phi = solve_poisson_dirichlet(&rhs, 1e-12).unwrap();
            assert!(phi.min() >= 0.0);
        }
    }

    #[test]
    fn manufactured_solution_second_order() {
        let mut errs = Vec::new();
        for n in [32, 64, 128] {
            let g = GridSpec::unit_square(n).unwrap();
            let exact = ScalarField::from_fn(g, |x, y| (PI * x).sin() * (PI * y).sin());
            let rhs = exact.scale(-2.0 * PI * PI);
            let phi = solve_poisson_dirichlet(&rhs, 1e-12).unwrap();
            errs.push(phi.sub(&exact).max_abs());
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() <= 0.1, "order {order}");
        }
    }
}
