//! Scalar functionals of a state: entropy, energies, the steady-state
//! functional `J`, the Lyapunov functional, dissipation and relative
//! entropy. Quadrature is the midpoint rule on cells; face quantities use
//! the face inner product of [`VectorField::dot`].

use crate::error::{EhdError, Result};
use crate::grid::{gradient_dirichlet0, same_grid, ScalarField, VectorField};
use crate::sim::SimState;
use crate::steady::SteadyState;

/// Densities below this are treated as exactly zero in `n log n`.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Which weight the potential term of the Lyapunov functional carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LyapunovForm {
    /// `|grad(phi - Phi)|^2` with unit weight.
    #[default]
    Printed,
    /// `1/2 |grad(phi - Phi)|^2`, matching the other quadratic terms.
    Halved,
}

fn xlogx(x: f64) -> f64 {
    if x < DENSITY_FLOOR {
        0.0
    } else {
        x * x.ln()
    }
}

fn check_nonneg(name: &str, f: &ScalarField) -> Result<()> {
    let m = f.min();
    if m < 0.0 {
        return Err(EhdError::Domain(format!(
            "density {name} is negative (min {m:e})"
        )));
    }
    Ok(())
}

fn check_positive(name: &str, f: &ScalarField) -> Result<()> {
    let m = f.min();
    if !(m > 0.0) {
        return Err(EhdError::Domain(format!(
            "steady density {name} must be positive (min {m:e})"
        )));
    }
    Ok(())
}

/// `sum (v log v + w log w)`.
pub fn entropy(v: &ScalarField, w: &ScalarField) -> Result<f64> {
    same_grid(v.grid(), w.grid())?;
    check_nonneg("v", v)?;
    check_nonneg("w", w)?;
    let s: f64 = v.values().iter().chain(w.values()).map(|&x| xlogx(x)).sum();
    Ok(s * v.grid().cell_area())
}

/// `1/2 sum |grad phi|^2` with zero wall values.
pub fn electrostatic(phi: &ScalarField) -> Result<f64> {
    Ok(0.5 * gradient_dirichlet0(phi)?.norm_sq())
}

/// `1/2 sum |u|^2`.
pub fn kinetic(u: &VectorField) -> f64 {
    0.5 * u.norm_sq()
}

/// Entropy plus electrostatic plus kinetic energy.
pub fn k_functional(state: &SimState) -> Result<f64> {
    Ok(entropy(&state.charges.v, &state.charges.w)?
        + electrostatic(&state.phi)?
        + kinetic(&state.u.u))
}

/// `log(sum exp(s * phi) * cell_area)` without overflow.
fn log_partition(phi: &ScalarField, s: f64) -> f64 {
    let m = phi
        .values()
        .iter()
        .map(|&p| s * p)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = phi.values().iter().map(|&p| (s * p - m).exp()).sum();
    m + (sum * phi.grid().cell_area()).ln()
}

/// The strictly convex functional whose minimizer is the steady potential.
pub fn j_functional(phi: &ScalarField, mu_v: f64, mu_w: f64) -> Result<f64> {
    if !(mu_v >= 0.0 && mu_w >= 0.0) {
        return Err(EhdError::Contract(format!(
            "masses must be nonnegative, got {mu_v}, {mu_w}"
        )));
    }
    let mut j = electrostatic(phi)?;
    if mu_v > 0.0 {
        j += mu_v * log_partition(phi, 1.0);
    }
    if mu_w > 0.0 {
        j += mu_w * log_partition(phi, -1.0);
    }
    Ok(j)
}

fn check_compatible(state: &SimState, steady: &SteadyState) -> Result<()> {
    same_grid(state.phi.grid(), steady.phi.grid())
}

/// Weighted squared distance to the steady state.
pub fn lyapunov(state: &SimState, steady: &SteadyState, theta: f64) -> Result<f64> {
    lyapunov_with(state, steady, theta, LyapunovForm::Printed)
}

pub fn lyapunov_with(
    state: &SimState,
    steady: &SteadyState,
    theta: f64,
    form: LyapunovForm,
) -> Result<f64> {
    check_compatible(state, steady)?;
    if !(theta > 0.0) {
        return Err(EhdError::Contract(format!(
            "theta must be positive, got {theta}"
        )));
    }
    check_positive("V", &steady.v)?;
    check_positive("W", &steady.w)?;
    let area = state.phi.grid().cell_area();
    let chi = |n: &ScalarField, m: &ScalarField| -> f64 {
        n.values()
            .iter()
            .zip(m.values())
            .map(|(&a, &b)| (a - b) * (a - b) / b)
            .sum::<f64>()
            * area
    };
    let pot = gradient_dirichlet0(&state.phi.sub(&steady.phi))?.norm_sq();
    let pot_weight = match form {
        LyapunovForm::Printed => 1.0,
        LyapunovForm::Halved => 0.5,
    };
    Ok(0.5 * theta * state.u.u.norm_sq()
        + 0.5 * chi(&state.charges.v, &steady.v)
        + 0.5 * chi(&state.charges.w, &steady.w)
        + pot_weight * pot)
}

/// `|u|^2 + |v - V|^2 + |w - W|^2 + |phi - Phi|^2 + |grad(phi - Phi)|^2`.
pub fn dist_sq(state: &SimState, steady: &SteadyState) -> Result<f64> {
    check_compatible(state, steady)?;
    let dphi = state.phi.sub(&steady.phi);
    Ok(state.u.u.norm_sq()
        + state.charges.v.sub(&steady.v).norm_sq()
        + state.charges.w.sub(&steady.w).norm_sq()
        + dphi.norm_sq()
        + gradient_dirichlet0(&dphi)?.norm_sq())
}

/// `sum |grad u|^2` for a velocity with no-slip walls. Derivatives along a
/// component live at cell centers; derivatives across it live at nodes, with
/// half weight at the walls where the ghost value is `-u`.
pub fn velocity_gradient_sq(u: &VectorField) -> f64 {
    let g = *u.grid();
    let (nx, ny, hx, hy) = (g.nx(), g.ny(), g.hx(), g.hy());
    let area = g.cell_area();
    let (ux, uy) = (u.xcomp(), u.ycomp());
    let mut s = 0.0;
    // d ux / dx and d uy / dy at cell centers
    for j in 0..ny {
        for i in 0..nx {
            let a = (ux[g.xface(i + 1, j)] - ux[g.xface(i, j)]) / hx;
            let b = (uy[g.yface(i, j + 1)] - uy[g.yface(i, j)]) / hy;
            s += (a * a + b * b) * area;
        }
    }
    // d ux / dy at nodes (x-face columns i = 1..nx-1)
    for i in 1..nx {
        for j in 0..=ny {
            let d = if j == 0 {
                2.0 * ux[g.xface(i, 0)] / hy
            } else if j == ny {
                -2.0 * ux[g.xface(i, ny - 1)] / hy
            } else {
                (ux[g.xface(i, j)] - ux[g.xface(i, j - 1)]) / hy
            };
            let wgt = if j == 0 || j == ny { 0.5 } else { 1.0 };
            s += wgt * d * d * area;
        }
    }
    // d uy / dx at nodes (y-face rows j = 1..ny-1)
    for j in 1..ny {
        for i in 0..=nx {
            let d = if i == 0 {
                2.0 * uy[g.yface(0, j)] / hx
            } else if i == nx {
                -2.0 * uy[g.yface(nx - 1, j)] / hx
            } else {
                (uy[g.yface(i, j)] - uy[g.yface(i - 1, j)]) / hx
            };
            let wgt = if i == 0 || i == nx { 0.5 } else { 1.0 };
            s += wgt * d * d * area;
        }
    }
    s
}

/// Entropy production: `|2 grad sqrt v - sqrt v grad phi|^2` and the mirror
/// term for `w` on interior faces (the walls carry no flux), plus
/// `|grad u|^2`.
pub fn dissipation(state: &SimState) -> Result<f64> {
    let (v, w, phi) = (&state.charges.v, &state.charges.w, &state.phi);
    same_grid(v.grid(), phi.grid())?;
    check_nonneg("v", v)?;
    check_nonneg("w", w)?;
    let g = *phi.grid();
    let area = g.cell_area();
    let (sv, sw) = (v.map(f64::sqrt), w.map(f64::sqrt));
    let (sv, sw, p) = (sv.values(), sw.values(), phi.values());
    let face = |l: usize, r: usize, h: f64| -> f64 {
        let dp = (p[r] - p[l]) / h;
        let a = 2.0 * (sv[r] - sv[l]) / h - 0.5 * (sv[l] + sv[r]) * dp;
        let b = 2.0 * (sw[r] - sw[l]) / h + 0.5 * (sw[l] + sw[r]) * dp;
        a * a + b * b
    };
    let mut s = 0.0;
    for j in 0..g.ny() {
        for i in 1..g.nx() {
            s += face(g.cell(i - 1, j), g.cell(i, j), g.hx());
        }
    }
    for j in 1..g.ny() {
        for i in 0..g.nx() {
            s += face(g.cell(i, j - 1), g.cell(i, j), g.hy());
        }
    }
    Ok(s * area + velocity_gradient_sq(&state.u.u))
}

/// Relative entropy with respect to the steady state; the velocity does not
/// enter.
pub fn relative_entropy(state: &SimState, steady: &SteadyState) -> Result<f64> {
    check_compatible(state, steady)?;
    check_positive("V", &steady.v)?;
    check_positive("W", &steady.w)?;
    Ok(entropy(&state.charges.v, &state.charges.w)?
        - entropy(&steady.v, &steady.w)?
        - electrostatic(&state.phi)?
        + electrostatic(&steady.phi)?)
}

/// All functionals of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalReport {
    pub entropy: f64,
    pub kinetic: f64,
    pub electrostatic: f64,
    pub k_total: f64,
    pub lyapunov: f64,
    pub dissipation: f64,
    pub relative_entropy: f64,
    pub theta: f64,
}

impl FunctionalReport {
    pub fn compute(
        state: &SimState,
        steady: &SteadyState,
        theta: f64,
        form: LyapunovForm,
    ) -> Result<Self> {
        let entropy = entropy(&state.charges.v, &state.charges.w)?;
        let kinetic = kinetic(&state.u.u);
        let electrostatic = electrostatic(&state.phi)?;
        Ok(Self {
            entropy,
            kinetic,
            electrostatic,
            k_total: entropy + electrostatic + kinetic,
            lyapunov: lyapunov_with(state, steady, theta, form)?,
            dissipation: dissipation(state)?,
            relative_entropy: relative_entropy(state, steady)?,
            theta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::solve_poisson_dirichlet;
    use crate::fluid::{vector_laplacian, VelocityState};
    use crate::grid::GridSpec;
    use crate::steady::{boltzmann_densities, solve_steady};
    use crate::transport::ChargePair;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn state(v: ScalarField, w: ScalarField, phi: ScalarField, u: VectorField) -> SimState {
        let g = *v.grid();
        let (mu_v, mu_w) = (v.integral(), w.integral());
        SimState {
            t: 0.0,
            step: 0,
            u: VelocityState {
                u,
                p: ScalarField::zeros(g),
            },
            charges: ChargePair::new(v, w).unwrap(),
            phi,
            mu_v,
            mu_w,
        }
    }

    fn random(g: GridSpec, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ScalarField {
        ScalarField::from_values(
            g,
            (0..g.num_cells())
                .map(|_| rng.random_range(lo..hi))
                .collect(),
        )
        .unwrap()
    }

    fn random_u(g: GridSpec, rng: &mut ChaCha8Rng) -> VectorField {
        let mut u = VectorField::from_components(
            g,
            (0..g.num_xfaces())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
            (0..g.num_yfaces())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap();
        u.zero_boundary_normal();
        u
    }

    /// Dense 2D Dirichlet Laplacian assembled cell by cell with ghost = -u.
    fn dense_laplacian(g: GridSpec) -> DMatrix<f64> {
        let n = g.num_cells();
        let mut a = DMatrix::zeros(n, n);
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let k = g.cell(i, j);
                for (di, dj, h) in [
                    (-1i64, 0i64, g.hx()),
                    (1, 0, g.hx()),
                    (0, -1, g.hy()),
                    (0, 1, g.hy()),
                ] {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    a[(k, k)] -= 1.0 / (h * h);
                    if ii < 0 || jj < 0 || ii >= g.nx() as i64 || jj >= g.ny() as i64 {
                        a[(k, k)] -= 1.0 / (h * h);
                    } else {
                        a[(k, g.cell(ii as usize, jj as usize))] += 1.0 / (h * h);
                    }
                }
            }
        }
        a
    }

    /// `sum |grad phi|^2` written out over cells: x-differences between
    /// neighbors, `2 phi / h` to the wall, each face shared by two cells.
    fn grad_sq_oracle(phi: &ScalarField) -> f64 {
        let g = *phi.grid();
        let mut s = 0.0;
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let c = phi.at(i, j);
                let e = if i + 1 < g.nx() {
                    (phi.at(i + 1, j) - c) / g.hx()
                } else {
                    -2.0 * c / g.hx()
                };
                let w = if i > 0 {
                    (c - phi.at(i - 1, j)) / g.hx()
                } else {
                    2.0 * c / g.hx()
                };
                let n = if j + 1 < g.ny() {
                    (phi.at(i, j + 1) - c) / g.hy()
                } else {
                    -2.0 * c / g.hy()
                };
                let so = if j > 0 {
                    (c - phi.at(i, j - 1)) / g.hy()
                } else {
                    2.0 * c / g.hy()
                };
                s += 0.5 * (e * e + w * w) + 0.5 * (n * n + so * so);
            }
        }
        s * g.cell_area()
    }

    #[test]
    fn entropy_closed_forms() {
        let g = GridSpec::unit_square(8).unwrap();
        let z = ScalarField::zeros(g);
        assert_eq!(entropy(&z, &z).unwrap(), 0.0);
        let one = ScalarField::constant(g, 1.0);
        assert_eq!(entropy(&one, &one).unwrap(), 0.0);
        let two = ScalarField::constant(g, 2.0);
        assert!((entropy(&two, &z).unwrap() - 2.0 * LN_2).abs() < 1e-14);
        assert!(entropy(&z.map(|_| -1.0), &z).is_err());
        let tiny = ScalarField::constant(g, 1e-310);
        assert_eq!(entropy(&tiny, &z).unwrap(), 0.0);
    }

    #[test]
    fn k_functional_against_dense_poisson() {
        let g = GridSpec::unit_square(8).unwrap();
        let v = ScalarField::constant(g, 2.0);
        let w = ScalarField::zeros(g);
        let a = dense_laplacian(g);
        let rhs = DVector::from_column_slice(v.values());
        let phi_d = a.lu().solve(&rhs).unwrap();
        let phi_oracle = ScalarField::from_values(g, phi_d.as_slice().to_vec()).unwrap();
        let want = 2.0 * LN_2 + 0.5 * grad_sq_oracle(&phi_oracle);

        let phi = solve_poisson_dirichlet(&v.sub(&w), 1e-13).unwrap();
        let s = state(v, w, phi, VectorField::zeros(g));
        assert!((k_functional(&s).unwrap() - want).abs() < 1e-11);

        let one = ScalarField::constant(g, 1.0);
        let s = state(
            one.clone(),
            one,
            ScalarField::zeros(g),
            VectorField::zeros(g),
        );
        assert_eq!(k_functional(&s).unwrap(), 0.0);
    }

    #[test]
    fn electrostatic_matches_cellwise_oracle() {
        let g = GridSpec::new(8, 6, 1.0, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let phi = random(g, &mut rng, -1.0, 1.0);
        assert!((electrostatic(&phi).unwrap() - 0.5 * grad_sq_oracle(&phi)).abs() < 1e-12);
    }

    #[test]
    fn j_functional_closed_forms_and_oracle() {
        let g = GridSpec::unit_square(8).unwrap();
        let z = ScalarField::zeros(g);
        assert!(j_functional(&z, 1.0, 1.0).unwrap().abs() < 1e-15);
        let g2 = GridSpec::new(8, 8, 2.0, 1.5).unwrap();
        let z2 = ScalarField::zeros(g2);
        assert!((j_functional(&z2, 1.0, 0.0).unwrap() - 3.0f64.ln()).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let phi = random(g, &mut rng, -2.0, 2.0);
        let area = g.cell_area();
        let zv: f64 = phi.values().iter().map(|p| p.exp() * area).sum();
        let zw: f64 = phi.values().iter().map(|p| (-p).exp() * area).sum();
        let want = 0.5 * grad_sq_oracle(&phi) + 2.0 * zv.ln() + 0.5 * zw.ln();
        let got = j_functional(&phi, 2.0, 0.5).unwrap();
        assert!(
            (got - want).abs() < 1e-13 * want.abs().max(1.0),
            "{got} {want}"
        );
    }

    #[test]
    fn j_functional_is_convex() {
        let g = GridSpec::unit_square(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let a = random(g, &mut rng, -3.0, 3.0);
            let b = random(g, &mut rng, -3.0, 3.0);
            let t: f64 = rng.random_range(0.0..1.0);
            let mix = a.zip_map(&b, |x, y| t * x + (1.0 - t) * y);
            let lhs = j_functional(&mix, 2.0, 1.0).unwrap();
            let rhs = t * j_functional(&a, 2.0, 1.0).unwrap()
                + (1.0 - t) * j_functional(&b, 2.0, 1.0).unwrap();
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn lyapunov_cases() {
        let g = GridSpec::unit_square(8).unwrap();
        let st = solve_steady(g, 2.0, 1.0, 1e-12).unwrap();
        let s = state(
            st.v.clone(),
            st.w.clone(),
            st.phi.clone(),
            VectorField::zeros(g),
        );
        assert_eq!(lyapunov(&s, &st, 1.0).unwrap(), 0.0);

        // single interior x-face value q
        let mut u = VectorField::zeros(g);
        let q = 0.3;
        u.xcomp_mut()[g.xface(3, 4)] = q;
        let s = state(st.v.clone(), st.w.clone(), st.phi.clone(), u);
        let theta = 2.5;
        // the face is shared by two cells, each taking half of q^2
        let want = theta / 2.0 * q * q * g.cell_area();
        assert!((lyapunov(&s, &st, theta).unwrap() - want).abs() < 1e-16);

        // perturbed state against direct summation
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut perturb = |f: &ScalarField, lo: f64, hi: f64, mul: bool| {
            let vals = f
                .values()
                .iter()
                .map(|&x| {
                    let r = rng.random_range(lo..hi);
                    if mul {
                        x * r
                    } else {
                        x + r
                    }
                })
                .collect();
            ScalarField::from_values(g, vals).unwrap()
        };
        let v = perturb(&st.v, 0.8, 1.2, true);
        let w = perturb(&st.w, 0.8, 1.2, true);
        let phi = perturb(&st.phi, -0.1, 0.1, false);
        let uu = random_u(g, &mut rng);
        let s = state(v.clone(), w.clone(), phi.clone(), uu.clone());
        let area = g.cell_area();
        let mut chi = 0.0;
        for k in 0..g.num_cells() {
            let (a, b) = (v.values()[k], st.v.values()[k]);
            let (c, d) = (w.values()[k], st.w.values()[k]);
            chi += 0.5 * (a - b).powi(2) / b + 0.5 * (c - d).powi(2) / d;
        }
        let mut usq = 0.0;
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let (a, b) = (uu.xcomp()[g.xface(i, j)], uu.xcomp()[g.xface(i + 1, j)]);
                let (c, d) = (uu.ycomp()[g.yface(i, j)], uu.ycomp()[g.yface(i, j + 1)]);
                usq += 0.5 * (a * a + b * b) + 0.5 * (c * c + d * d);
            }
        }
        let pot = grad_sq_oracle(&phi.sub(&st.phi));
        let want = 0.5 * usq * area + chi * area + pot;
        assert!((lyapunov(&s, &st, 1.0).unwrap() - want).abs() < 1e-14 * want.max(1.0));
        let halved = lyapunov_with(&s, &st, 1.0, LyapunovForm::Halved).unwrap();
        assert!((halved - (want - 0.5 * pot)).abs() < 1e-14 * want.max(1.0));

        let bad = SteadyState {
            w: ScalarField::zeros(g),
            ..st.clone()
        };
        assert!(lyapunov(&s, &bad, 1.0).is_err());
        assert!(lyapunov(&s, &st, 0.0).is_err());
    }

    #[test]
    fn velocity_gradient_matches_energy_form() {
        let g = GridSpec::new(9, 7, 1.0, 1.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let u = random_u(g, &mut rng);
            let a = velocity_gradient_sq(&u);
            let b = -u.dot(&vector_laplacian(&u));
            assert!((a - b).abs() < 1e-12 * a, "{a} {b}");
        }
    }

    #[test]
    fn dissipation_cases() {
        let g = GridSpec::unit_square(8).unwrap();
        let one = ScalarField::constant(g, 1.0);
        let s = state(
            one.clone(),
            one,
            ScalarField::zeros(g),
            VectorField::zeros(g),
        );
        assert_eq!(dissipation(&s).unwrap(), 0.0);

        // random state against a cell-by-cell summation
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = random(g, &mut rng, 0.0, 2.0);
        let w = random(g, &mut rng, 0.0, 2.0);
        let phi = random(g, &mut rng, -1.0, 1.0);
        let u = random_u(g, &mut rng);
        let st = state(v.clone(), w.clone(), phi.clone(), u.clone());
        let h = g.hx();
        let mut sum = 0.0;
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                for (ii, jj) in [(i + 1, j), (i, j + 1)] {
                    if ii >= g.nx() || jj >= g.ny() {
                        continue;
                    }
                    let (vl, vr) = (v.at(i, j).sqrt(), v.at(ii, jj).sqrt());
                    let (wl, wr) = (w.at(i, j).sqrt(), w.at(ii, jj).sqrt());
                    let dp = (phi.at(ii, jj) - phi.at(i, j)) / h;
                    sum += (2.0 * (vr - vl) / h - 0.5 * (vl + vr) * dp).powi(2);
                    sum += (2.0 * (wr - wl) / h + 0.5 * (wl + wr) * dp).powi(2);
                }
            }
        }
        let want = sum * g.cell_area() - u.dot(&vector_laplacian(&u));
        let got = dissipation(&st).unwrap();
        assert!((got - want).abs() < 1e-13 * want, "{got} {want}");
    }

    #[test]
    fn dissipation_at_steady_state_shrinks_with_refinement() {
        let mut vals = Vec::new();
        for n in [16, 32, 64] {
            let g = GridSpec::unit_square(n).unwrap();
            let st = solve_steady(g, 2.0, 1.0, 1e-12).unwrap();
            let s = state(
                st.v.clone(),
                st.w.clone(),
                st.phi.clone(),
                VectorField::zeros(g),
            );
            vals.push(dissipation(&s).unwrap());
        }
        assert!(
            vals[0] / vals[1] > 3.0 && vals[1] / vals[2] > 3.0,
            "{vals:?}"
        );
    }

    #[test]
    fn relative_entropy_ignores_velocity() {
        let g = GridSpec::unit_square(8).unwrap();
        let st = solve_steady(g, 2.0, 1.0, 1e-12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = state(
            st.v.clone(),
            st.w.clone(),
            st.phi.clone(),
            random_u(g, &mut rng),
        );
        assert_eq!(relative_entropy(&s, &st).unwrap(), 0.0);

        let v = random(g, &mut rng, 0.1, 2.0);
        let w = random(g, &mut rng, 0.1, 2.0);
        let phi = random(g, &mut rng, -1.0, 1.0);
        let s = state(v.clone(), w.clone(), phi.clone(), VectorField::zeros(g));
        let area = g.cell_area();
        let mut sum = 0.0;
        for k in 0..g.num_cells() {
            let f = |x: f64| x * x.ln();
            sum += f(v.values()[k]) + f(w.values()[k]) - f(st.v.values()[k]) - f(st.w.values()[k]);
        }
        let want = sum * area - 0.5 * grad_sq_oracle(&phi) + 0.5 * grad_sq_oracle(&st.phi);
        assert!((relative_entropy(&s, &st).unwrap() - want).abs() < 1e-13);
    }

    #[test]
    fn boltzmann_states_have_zero_distance() {
        let g = GridSpec::unit_square(8).unwrap();
        let st = solve_steady(g, 1.5, 0.5, 1e-12).unwrap();
        let (v, w) = boltzmann_densities(&st.phi, 1.5, 0.5);
        let s = state(v, w, st.phi.clone(), VectorField::zeros(g));
        assert!(dist_sq(&s, &st).unwrap() < 1e-28);
    }
}
