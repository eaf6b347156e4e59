//! Diagnostics records, exponential decay fits and the weighted Poincare
//! constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elliptic::PoissonSolver;
use crate::error::{EhdError, Result};
use crate::functionals::{self, FunctionalReport, LyapunovForm};
use crate::grid::{gradient_neumann, ScalarField};
use crate::sim::SimState;
use crate::steady::SteadyState;

/// Rounding floor of squared-distance columns in double precision.
pub const FIT_FLOOR: f64 = 1e-28;
/// The default window keeps values above this multiple of the floor.
pub const FLOOR_MARGIN: f64 = 100.0;
pub const MIN_FIT_RECORDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub t: f64,
    pub mass_v: f64,
    pub mass_w: f64,
    pub min_v: f64,
    pub min_w: f64,
    pub kinetic: f64,
    pub entropy: f64,
    pub electrostatic: f64,
    pub k_total: f64,
    pub lyapunov: f64,
    pub dist_sq: f64,
    pub dissipation: f64,
    pub max_div: f64,
}

impl DiagnosticsRecord {
    pub const FIELDS: [&'static str; 14] = [
        "step",
        "t",
        "mass_v",
        "mass_w",
        "min_v",
        "min_w",
        "kinetic",
        "entropy",
        "electrostatic",
        "k_total",
        "lyapunov",
        "dist_sq",
        "dissipation",
        "max_div",
    ];

    pub fn compute(
        state: &SimState,
        steady: &SteadyState,
        theta: f64,
        form: LyapunovForm,
    ) -> Result<Self> {
        let f = FunctionalReport::compute(state, steady, theta, form)?;
        Ok(Self {
            step: state.step,
            t: state.t,
            mass_v: state.charges.v.integral(),
            mass_w: state.charges.w.integral(),
            min_v: state.charges.v.min(),
            min_w: state.charges.w.min(),
            kinetic: f.kinetic,
            entropy: f.entropy,
            electrostatic: f.electrostatic,
            k_total: f.k_total,
            lyapunov: f.lyapunov,
            dist_sq: functionals::dist_sq(state, steady)?,
            dissipation: f.dissipation,
            max_div: state.u.max_divergence(),
        })
    }

    /// Value of a real column by name; `step` is returned as a real.
    pub fn get(&self, column: &str) -> Option<f64> {
        Some(match column {
            "step" => self.step as f64,
            "t" => self.t,
            "mass_v" => self.mass_v,
            "mass_w" => self.mass_w,
            "min_v" => self.min_v,
            "min_w" => self.min_w,
            "kinetic" => self.kinetic,
            "entropy" => self.entropy,
            "electrostatic" => self.electrostatic,
            "k_total" => self.k_total,
            "lyapunov" => self.lyapunov,
            "dist_sq" => self.dist_sq,
            "dissipation" => self.dissipation,
            "max_div" => self.max_div,
            _ => return None,
        })
    }

    /// The real columns after `step`, in header order.
    pub fn reals(&self) -> [f64; 13] {
        [
            self.t,
            self.mass_v,
            self.mass_w,
            self.min_v,
            self.min_w,
            self.kinetic,
            self.entropy,
            self.electrostatic,
            self.k_total,
            self.lyapunov,
            self.dist_sq,
            self.dissipation,
            self.max_div,
        ]
    }

    pub fn from_reals(step: u64, r: [f64; 13]) -> Self {
        Self {
            step,
            t: r[0],
            mass_v: r[1],
            mass_w: r[2],
            min_v: r[3],
            min_w: r[4],
            kinetic: r[5],
            entropy: r[6],
            electrostatic: r[7],
            k_total: r[8],
            lyapunov: r[9],
            dist_sq: r[10],
            dissipation: r[11],
            max_div: r[12],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub lambda: f64,
    pub c_dagger: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
}

fn column_values(series: &[DiagnosticsRecord], column: &str) -> Result<Vec<(f64, f64)>> {
    if series.is_empty() {
        return Err(EhdError::Contract("empty diagnostics series".into()));
    }
    if series[0].get(column).is_none() {
        return Err(EhdError::Contract(format!(
            "unknown diagnostics column `{column}`"
        )));
    }
    Ok(series
        .iter()
        .map(|r| (r.t, r.get(column).unwrap_or(f64::NAN)))
        .collect())
}

/// Least-squares fit of `log(value) = log(C) - lambda t` over the records
/// with `t` in the closed window.
pub fn fit_decay_rate(
    series: &[DiagnosticsRecord],
    column: &str,
    window: (f64, f64),
) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = column_values(series, column)?
        .into_iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .collect();
    fit_points(&pts, window)
}

/// Fit on raw `(t, value)` pairs.
pub fn fit_points(pts: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    if pts.len() < MIN_FIT_RECORDS {
        return Err(EhdError::Contract(format!(
            "need at least {MIN_FIT_RECORDS} records in window [{}, {}], found {}",
            window.0,
            window.1,
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(EhdError::Domain(format!(
            "nonpositive value {v:e} at t = {t} in fit window; the window may reach past the rounding floor"
        )));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(t, v) in pts {
        let (dt, dy) = (t - tm, v.ln() - ym);
        sxx += dt * dt;
        sxy += dt * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(EhdError::Contract("fit window has no spread in t".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let r_squared = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(DecayFit {
        lambda: -slope,
        c_dagger: intercept.exp(),
        r_squared,
        window,
        points: pts.len(),
    })
}

/// Default fit window: take the records from the start up to the first value
/// at or below `FLOOR_MARGIN * FIT_FLOOR`, then the later half of that span
/// in time.
pub fn default_window(series: &[DiagnosticsRecord], column: &str) -> Result<(f64, f64)> {
    let vals = column_values(series, column)?;
    let end = vals
        .iter()
        .position(|(_, v)| !(*v > FLOOR_MARGIN * FIT_FLOOR) || !v.is_finite())
        .unwrap_or(vals.len());
    if end < 2 {
        return Err(EhdError::Domain(format!(
            "column `{column}` starts at or below the rounding floor"
        )));
    }
    let (t0, t1) = (vals[0].0, vals[end - 1].0);
    Ok((t0 + 0.5 * (t1 - t0), t1))
}

/// Smallest `C` with `sum f^2 <= C sum |grad(f rho)|^2` over mean-zero `f`
/// (Neumann gradient). Solved on `g = f rho` as a constrained generalized
/// eigenproblem by power iteration on the inverse Neumann Laplacian.
pub fn weighted_poincare_constant(rho: &ScalarField, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(EhdError::Contract(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let rmin = rho.min();
    if !(rmin > 0.0) || !rho.max().is_finite() {
        return Err(EhdError::Domain(format!(
            "weight must be positive and bounded (min {rmin:e})"
        )));
    }
    let g = *rho.grid();
    let n = g.num_cells();
    let poisson = PoissonSolver::new(g);
    let r = rho.values();
    // M = diag(1/rho^2), constraint vector c = 1/rho
    let c: Vec<f64> = r.iter().map(|x| 1.0 / x).collect();
    let c_sum: f64 = c.iter().sum();

    let constrain = |x: &mut [f64]| {
        let s = x.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / c_sum;
        x.iter_mut().for_each(|v| *v -= s);
    };
    let apply_t = |x: &[f64]| -> Result<Vec<f64>> {
        let mut b: Vec<f64> = x.iter().zip(r).map(|(a, p)| a / (p * p)).collect();
        let nu = b.iter().sum::<f64>() / c_sum;
        b.iter_mut().zip(&c).for_each(|(v, ci)| *v -= nu * ci);
        // the multiplier makes b compatible; remove rounding before the solve
        let mean = b.iter().sum::<f64>() / n as f64;
        b.iter_mut().for_each(|v| *v -= mean);
        let rhs = ScalarField::from_values(g, b.into_iter().map(|v| -v).collect())?;
        let mut y = poisson.solve_neumann_meanzero(&rhs, 1e-11)?.into_values();
        constrain(&mut y);
        Ok(y)
    };
    let rayleigh = |x: &[f64]| -> Result<f64> {
        let num: f64 = x.iter().zip(r).map(|(a, p)| a * a / (p * p)).sum::<f64>() * g.cell_area();
        let den = gradient_neumann(&ScalarField::from_values(g, x.to_vec())?).norm_sq();
        Ok(num / den)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    constrain(&mut x);
    let mut last = rayleigh(&x)?;
    let max_iter = 10_000;
    for _ in 0..max_iter {
        let mut y = apply_t(&x)?;
        let norm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm == 0.0 {
            return Err(EhdError::Invariant(
                "power iteration collapsed to zero".into(),
            ));
        }
        y.iter_mut().for_each(|v| *v /= norm);
        let q = rayleigh(&y)?;
        x = y;
        if (q - last).abs() <= tol * q {
            return Ok(q);
        }
        last = q;
    }
    Err(EhdError::Convergence {
        solver: "weighted Poincare power iteration",
        iterations: max_iter,
        residual: last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use nalgebra::{DMatrix, DVector};

    fn series(f: impl Fn(f64) -> f64, n: usize, t1: f64) -> Vec<DiagnosticsRecord> {
        (0..n)
            .map(|k| {
                let t = t1 * k as f64 / (n - 1) as f64;
                let mut r = [0.0; 13];
                r[0] = t;
                r[10] = f(t);
                DiagnosticsRecord::from_reals(k as u64, r)
            })
            .collect()
    }

    #[test]
    fn exact_exponential_is_recovered() {
        let s = series(|t| 3.0 * (-2.0 * t).exp(), 100, 1.0);
        let f = fit_decay_rate(&s, "dist_sq", (0.0, 1.0)).unwrap();
        assert!((f.lambda - 2.0).abs() < 1e-10);
        assert!((f.c_dagger - 3.0).abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-10);
        assert_eq!(f.points, 100);
    }

    #[test]
    fn perturbed_exponential_against_normal_equations() {
        let s = series(
            |t| 3.0 * (-2.0 * t).exp() * (1.0 + 1e-3 * t.sin()),
            100,
            1.0,
        );
        let f = fit_decay_rate(&s, "dist_sq", (0.0, 1.0)).unwrap();
        assert!((f.lambda - 2.0).abs() < 1e-2);
        // independent regression: solve the 2x2 normal equations
        let a = DMatrix::from_fn(100, 2, |i, j| if j == 0 { 1.0 } else { s[i].t });
        let y = DVector::from_fn(100, |i, _| s[i].dist_sq.ln());
        let coef = (a.transpose() * &a)
            .lu()
            .solve(&(a.transpose() * y))
            .unwrap();
        assert!((f.lambda + coef[1]).abs() < 1e-12);
        assert!((f.c_dagger.ln() - coef[0]).abs() < 1e-12);
    }

    #[test]
    fn constant_series_fits_zero_rate() {
        let s = series(|_| 0.7, 20, 1.0);
        let f = fit_decay_rate(&s, "dist_sq", (0.0, 1.0)).unwrap();
        assert_eq!(f.lambda, 0.0);
        assert_eq!(f.r_squared, 0.0);
    }

    #[test]
    fn scaling_only_moves_the_constant() {
        let s = series(
            |t| (-1.3 * t).exp() * (1.0 + 0.1 * (5.0 * t).cos()),
            50,
            2.0,
        );
        let scaled: Vec<_> = s
            .iter()
            .map(|r| DiagnosticsRecord {
                dist_sq: r.dist_sq * 8.0,
                ..*r
            })
            .collect();
        let a = fit_decay_rate(&s, "dist_sq", (0.0, 2.0)).unwrap();
        let b = fit_decay_rate(&scaled, "dist_sq", (0.0, 2.0)).unwrap();
        assert!((a.lambda - b.lambda).abs() <= 1e-12 * a.lambda.abs());
        assert!((b.c_dagger / a.c_dagger - 8.0).abs() < 1e-12 * 8.0);
    }

    #[test]
    fn fit_errors() {
        let s = series(|t| 1.0 - t, 20, 1.0);
        assert_eq!(
            fit_decay_rate(&s, "dist_sq", (0.0, 1.0))
                .unwrap_err()
                .kind(),
            "domain"
        );
        assert!(fit_decay_rate(&s, "dist_sq", (0.0, 0.1)).is_err());
        assert!(fit_decay_rate(&s, "nope", (0.0, 1.0)).is_err());
    }

    #[test]
    fn default_window_stops_at_floor() {
        let s = series(|t| (-40.0 * t).exp(), 101, 2.0);
        // exp(-40 t) reaches 1e-26 at t = 1.496
        let (a, b) = default_window(&s, "dist_sq").unwrap();
        assert!((b - 1.48).abs() < 1e-12, "{b}");
        assert!((a - 0.74).abs() < 1e-12);
        let s = series(|t| (-t).exp(), 11, 1.0);
        assert_eq!(default_window(&s, "dist_sq").unwrap(), (0.5, 1.0));
    }

    #[test]
    fn poincare_constant_for_uniform_weight() {
        let (lx, ly) = (1.5, 1.0);
        let g = GridSpec::new(64, 64, lx, ly).unwrap();
        let c = weighted_poincare_constant(&ScalarField::constant(g, 1.0), 1e-10).unwrap();
        let want = (lx / std::f64::consts::PI).powi(2);
        assert!((c / want - 1.0).abs() < 0.02, "{c} {want}");
        // discrete eigenvalue exactly
        let h = lx / 64.0;
        let disc = 1.0 / ((4.0 / (h * h)) * (std::f64::consts::PI * h / (2.0 * lx)).sin().powi(2));
        assert!((c / disc - 1.0).abs() < 1e-8);
    }

    #[test]
    fn poincare_constant_bounds_and_homogeneity() {
        let g = GridSpec::unit_square(16).unwrap();
        let rho = ScalarField::from_fn(g, |x, y| 1.0 + 0.5 * x + 0.3 * (3.0 * y).sin());
        let tol = 1e-10;
        let c = weighted_poincare_constant(&rho, tol).unwrap();
        assert!(c > 0.0 && c.is_finite());
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let mut f: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = f.iter().sum::<f64>() / 256.0;
            f.iter_mut().for_each(|v| *v -= m);
            let f = ScalarField::from_values(g, f).unwrap();
            let rhs = gradient_neumann(&f.zip_map(&rho, |a, b| a * b)).norm_sq();
            assert!(f.norm_sq() <= (1.0 + 10.0 * tol) * c * rhs);
        }
        let c2 = weighted_poincare_constant(&rho.scale(2.0), tol).unwrap();
        assert!((c2 * 4.0 / c - 1.0).abs() < 1e-8);
        assert!(weighted_poincare_constant(&rho.map(|x| x - 1.2), tol).is_err());
    }
}
