//! Coupled time stepping: charges, then the potential, then the velocity.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::DiagnosticsRecord;
use crate::elliptic::{self, PoissonSolver};
use crate::error::{EhdError, Result};
use crate::fluid::{self, lorentz_force, Advection, FluidSolver, VelocityState};
use crate::functionals::LyapunovForm;
use crate::grid::{GridSpec, ScalarField, VectorField};
use crate::steady::{self, solve_steady, SteadyState};
use crate::transport::{self, advance_charges_with_masses, ChargePair};

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    /// Always `step * dt`.
    pub t: f64,
    pub step: u64,
    pub u: VelocityState,
    pub charges: ChargePair,
    pub phi: ScalarField,
    pub mu_v: f64,
    pub mu_w: f64,
}

impl SimState {
    pub fn grid(&self) -> &GridSpec {
        self.phi.grid()
    }

    /// The charge-mirrored state `(v, w, phi) -> (w, v, -phi)`.
    pub fn mirrored(&self) -> SimState {
        SimState {
            t: self.t,
            step: self.step,
            u: self.u.clone(),
            charges: self.charges.swapped(),
            phi: self.phi.neg(),
            mu_v: self.mu_w,
            mu_w: self.mu_v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Coupled,
    /// Fluid switched off, `u = 0`.
    Debye,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Coupled => "coupled",
            Mode::Debye => "debye",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "coupled" => Ok(Mode::Coupled),
            "debye" => Ok(Mode::Debye),
            other => Err(format!(
                "unknown mode `{other}` (expected coupled or debye)"
            )),
        }
    }
}

/// Parameters of the two-blob initial data. Each species is a background
/// fraction spread uniformly plus a Gaussian bump; centers are fractions of
/// the domain extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobParams {
    pub mu_v: f64,
    pub mu_w: f64,
    pub sigma: f64,
    pub background: f64,
    pub v_center: (f64, f64),
    pub w_center: (f64, f64),
}

impl Default for BlobParams {
    fn default() -> Self {
        Self {
            mu_v: 2.0,
            mu_w: 1.0,
            sigma: 0.1,
            background: 0.2,
            v_center: (0.3, 0.35),
            w_center: (0.7, 0.65),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    NeutralRest { mass: f64 },
    TwoBlobs(BlobParams),
    ShearedBlobs { blobs: BlobParams, amplitude: f64 },
    NoisyNeutral { mass: f64, amplitude: f64 },
}

impl Preset {
    pub const NAMES: [&'static str; 4] = [
        "neutral-rest",
        "two-blobs",
        "sheared-blobs",
        "noisy-neutral",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::NeutralRest { .. } => "neutral-rest",
            Preset::TwoBlobs(_) => "two-blobs",
            Preset::ShearedBlobs { .. } => "sheared-blobs",
            Preset::NoisyNeutral { .. } => "noisy-neutral",
        }
    }

    /// Default parameters for the named preset.
    pub fn by_name(name: &str) -> Option<Preset> {
        Some(match name {
            "neutral-rest" => Preset::NeutralRest { mass: 1.0 },
            "two-blobs" => Preset::TwoBlobs(BlobParams::default()),
            "sheared-blobs" => Preset::ShearedBlobs {
                blobs: BlobParams::default(),
                amplitude: 1.0,
            },
            "noisy-neutral" => Preset::NoisyNeutral {
                mass: 1.0,
                amplitude: 0.1,
            },
            _ => return None,
        })
    }

    /// `(key, value)` pairs of the preset parameters.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        let blob = |b: &BlobParams| {
            vec![
                ("mu_v", b.mu_v),
                ("mu_w", b.mu_w),
                ("sigma", b.sigma),
                ("background", b.background),
                ("v_center_x", b.v_center.0),
                ("v_center_y", b.v_center.1),
                ("w_center_x", b.w_center.0),
                ("w_center_y", b.w_center.1),
            ]
        };
        match self {
            Preset::NeutralRest { mass } => vec![("mass", *mass)],
            Preset::TwoBlobs(b) => blob(b),
            Preset::ShearedBlobs { blobs, amplitude } => {
                let mut p = blob(blobs);
                p.push(("amplitude", *amplitude));
                p
            }
            Preset::NoisyNeutral { mass, amplitude } => {
                vec![("mass", *mass), ("amplitude", *amplitude)]
            }
        }
    }

    /// Sets one parameter; `Err` carries the reason.
    pub fn set_param(&mut self, key: &str, value: f64) -> std::result::Result<(), String> {
        fn blob(b: &mut BlobParams, key: &str, value: f64) -> bool {
            let slot = match key {
                "mu_v" => &mut b.mu_v,
                "mu_w" => &mut b.mu_w,
                "sigma" => &mut b.sigma,
                "background" => &mut b.background,
                "v_center_x" => &mut b.v_center.0,
                "v_center_y" => &mut b.v_center.1,
                "w_center_x" => &mut b.w_center.0,
                "w_center_y" => &mut b.w_center.1,
                _ => return false,
            };
            *slot = value;
            true
        }
        let ok = match self {
            Preset::NeutralRest { mass } => {
                key == "mass" && {
                    *mass = value;
                    true
                }
            }
            Preset::TwoBlobs(b) => blob(b, key, value),
            Preset::ShearedBlobs { blobs, amplitude } => {
                if key == "amplitude" {
                    *amplitude = value;
                    true
                } else {
                    blob(blobs, key, value)
                }
            }
            Preset::NoisyNeutral { mass, amplitude } => match key {
                "mass" => {
                    *mass = value;
                    true
                }
                "amplitude" => {
                    *amplitude = value;
                    true
                }
                _ => false,
            },
        };
        if ok {
            Ok(())
        } else {
            Err(format!("preset {} has no parameter `{key}`", self.name()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: GridSpec,
    pub dt: f64,
    pub t_end: f64,
    pub theta: f64,
    pub poisson_tol: f64,
    pub transport_tol: f64,
    pub fluid_tol: f64,
    pub mode: Mode,
    pub preset: Preset,
    pub output_every: u64,
    pub seed: u64,
    pub lyapunov_form: LyapunovForm,
    pub advection: Advection,
}

impl SimConfig {
    pub fn new(grid: GridSpec, preset: Preset) -> Self {
        Self {
            grid,
            dt: 1e-3,
            t_end: 1.0,
            theta: 1.0,
            poisson_tol: elliptic::DEFAULT_TOL,
            transport_tol: transport::DEFAULT_TOL,
            fluid_tol: fluid::DEFAULT_TOL,
            mode: Mode::Coupled,
            preset,
            output_every: 10,
            seed: 0,
            lyapunov_form: LyapunovForm::Printed,
            advection: Advection::Centered,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(EhdError::config(
                    key,
                    None,
                    format!("must be positive and finite, got {x}"),
                ))
            }
        };
        positive("dt", self.dt)?;
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(EhdError::config(
                "t_end",
                None,
                format!("must be nonnegative, got {}", self.t_end),
            ));
        }
        positive("theta", self.theta)?;
        positive("poisson_tol", self.poisson_tol)?;
        positive("transport_tol", self.transport_tol)?;
        positive("fluid_tol", self.fluid_tol)?;
        if self.output_every == 0 {
            return Err(EhdError::config("output_every", None, "must be at least 1"));
        }
        for (k, v) in self.preset.params() {
            if !v.is_finite() {
                return Err(EhdError::config(
                    format!("preset.{k}"),
                    None,
                    "must be finite",
                ));
            }
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`; a `t_end` within rounding of a
    /// multiple of `dt` is not rounded up.
    pub fn total_steps(&self) -> u64 {
        let n = self.t_end / self.dt;
        let r = n.round();
        if (n - r).abs() <= 1e-9 * r.max(1.0) {
            r as u64
        } else {
            n.ceil() as u64
        }
    }
}

/// Two-blob density for one species. The Gaussian part is normalized on
/// the grid, so the discrete mass is `mu` up to rounding.
fn blob_density(g: GridSpec, mu: f64, b: &BlobParams, center: (f64, f64)) -> ScalarField {
    let (cx, cy) = (center.0 * g.lx(), center.1 * g.ly());
    let s = b.sigma;
    let gauss = ScalarField::from_fn(g, |x, y| {
        let r2 = (x - cx).powi(2) + (y - cy).powi(2);
        (-r2 / (2.0 * s * s)).exp()
    });
    let bg = b.background * mu / g.area();
    let amp = (1.0 - b.background) * mu / gauss.integral();
    gauss.map(|e| bg + amp * e)
}

fn blob_pair(g: GridSpec, b: &BlobParams) -> Result<(ScalarField, ScalarField)> {
    if !(b.sigma > 0.0) {
        return Err(EhdError::config("preset.sigma", None, "must be positive"));
    }
    if !(0.0..=1.0).contains(&b.background) {
        return Err(EhdError::config(
            "preset.background",
            None,
            "must lie in [0, 1]",
        ));
    }
    if b.mu_v < 0.0 || b.mu_w < 0.0 {
        return Err(EhdError::Domain(format!(
            "preset masses must be nonnegative, got {}, {}",
            b.mu_v, b.mu_w
        )));
    }
    Ok((
        blob_density(g, b.mu_v, b, b.v_center),
        blob_density(g, b.mu_w, b, b.w_center),
    ))
}

/// Builds the initial state; the velocity is projected and the potential
/// solved from the initial charges.
pub fn init_state(config: &SimConfig) -> Result<SimState> {
    config.validate()?;
    let g = config.grid;
    let poisson = PoissonSolver::new(g);
    let (v, w, u0) = match &config.preset {
        Preset::NeutralRest { mass } => {
            let c = ScalarField::constant(g, mass / g.area());
            (c.clone(), c, VectorField::zeros(g))
        }
        Preset::TwoBlobs(b) => {
            let (v, w) = blob_pair(g, b)?;
            (v, w, VectorField::zeros(g))
        }
        Preset::ShearedBlobs { blobs, amplitude } => {
            let (v, w) = blob_pair(g, blobs)?;
            let (lx, ly) = (g.lx(), g.ly());
            let a = *amplitude;
            let raw = VectorField::from_fn(
                g,
                |x, y| a * (PI * x / lx).sin() * (2.0 * PI * y / ly).sin(),
                |_, _| 0.0,
            );
            let (u, _) = fluid::project(&poisson, &raw, config.fluid_tol)?;
            (v, w, u)
        }
        Preset::NoisyNeutral { mass, amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let base = mass / g.area();
            let a = *amplitude;
            let mut noise = || {
                (0..g.num_cells())
                    .map(|_| base * (1.0 + a * rng.random_range(-1.0..1.0)))
                    .collect::<Vec<_>>()
            };
            let v = ScalarField::from_values(g, noise())?;
            let w = ScalarField::from_values(g, noise())?;
            (v, w, VectorField::zeros(g))
        }
    };
    let u0 = match config.mode {
        Mode::Coupled => u0,
        Mode::Debye => VectorField::zeros(g),
    };
    let charges = ChargePair::new(v, w)?;
    let phi = poisson.solve_dirichlet(&charges.v.sub(&charges.w), config.poisson_tol)?;
    let (mu_v, mu_w) = charges.masses();
    Ok(SimState {
        t: 0.0,
        step: 0,
        u: VelocityState {
            u: u0,
            p: ScalarField::zeros(g),
        },
        charges,
        phi,
        mu_v,
        mu_w,
    })
}

/// Time stepper with solvers cached for one configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    poisson: PoissonSolver,
    fluid: FluidSolver,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let poisson = PoissonSolver::new(config.grid);
        let mut fluid = FluidSolver::with_poisson(poisson.clone(), config.dt)?;
        fluid.advection = config.advection;
        Ok(Self {
            config,
            poisson,
            fluid,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// One step. Errors carry the index of the step being taken.
    pub fn step(&self, state: &SimState) -> Result<SimState> {
        let next = state.step + 1;
        self.step_inner(state).map_err(|e| EhdError::Step {
            step: next,
            source: Box::new(e),
        })
    }

    fn step_inner(&self, state: &SimState) -> Result<SimState> {
        let c = &self.config;
        let g = c.grid;
        let charges = advance_charges_with_masses(
            &state.charges,
            &state.u.u,
            &state.phi,
            c.dt,
            c.transport_tol,
            (state.mu_v, state.mu_w),
        )?;
        let phi = self
            .poisson
            .solve_dirichlet(&charges.v.sub(&charges.w), c.poisson_tol)?;
        let u = match c.mode {
            Mode::Coupled => {
                let force = lorentz_force(&charges.v, &charges.w, &phi)?;
                self.fluid.advance(&state.u, &force, c.fluid_tol)?
            }
            Mode::Debye => VelocityState::at_rest(g),
        };
        let step = state.step + 1;
        Ok(SimState {
            t: step as f64 * c.dt,
            step,
            u,
            charges,
            phi,
            mu_v: state.mu_v,
            mu_w: state.mu_w,
        })
    }

    /// Steady state for the masses of `state`.
    pub fn steady_for(&self, state: &SimState) -> Result<SteadyState> {
        solve_steady(
            self.config.grid,
            state.mu_v,
            state.mu_w,
            steady::DEFAULT_TOL,
        )
    }

    pub fn diagnostics(&self, state: &SimState, steady: &SteadyState) -> Result<DiagnosticsRecord> {
        DiagnosticsRecord::compute(state, steady, self.config.theta, self.config.lyapunov_form)
    }

    /// Steps from `state` until `t_end`, calling `observe` for the records.
    /// When `emit_start` is set the starting state is recorded too.
    pub fn run_from(
        &self,
        state: SimState,
        emit_start: bool,
        observe: &mut dyn FnMut(&SimState, &DiagnosticsRecord) -> Result<()>,
    ) -> Result<SimState> {
        let steady = self.steady_for(&state)?;
        let total = self.config.total_steps();
        let every = self.config.output_every;
        let mut state = state;
        if emit_start {
            let rec = self.diagnostics(&state, &steady)?;
            observe(&state, &rec)?;
        }
        while state.step < total {
            state = self.step(&state)?;
            if state.step.is_multiple_of(every) || state.step == total {
                let rec = self
                    .diagnostics(&state, &steady)
                    .map_err(|e| EhdError::Step {
                        step: state.step,
                        source: Box::new(e),
                    })?;
                observe(&state, &rec)?;
            }
        }
        Ok(state)
    }
}

/// Result of a complete run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub initial: SimState,
    pub final_state: SimState,
    pub records: Vec<DiagnosticsRecord>,
    pub steady: SteadyState,
}

/// One step with freshly built solvers. Prefer [`Simulator`] in loops.
pub fn step(state: &SimState, config: &SimConfig) -> Result<SimState> {
    Simulator::new(config.clone())?.step(state)
}

/// Runs from the preset initial data to `t_end`.
pub fn run(config: &SimConfig) -> Result<RunOutput> {
    let sim = Simulator::new(config.clone())?;
    let initial = init_state(config)?;
    let mut records = Vec::new();
    let final_state = sim.run_from(initial.clone(), true, &mut |_, r| {
        records.push(*r);
        Ok(())
    })?;
    let steady = sim.steady_for(&initial)?;
    Ok(RunOutput {
        initial,
        final_state,
        records,
        steady,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::laplacian_dirichlet0;

    fn config(n: usize, preset: Preset) -> SimConfig {
        SimConfig::new(GridSpec::unit_square(n).unwrap(), preset)
    }

    #[test]
    fn neutral_rest_is_a_fixed_point() {
        let c = config(16, Preset::by_name("neutral-rest").unwrap());
        let s0 = init_state(&c).unwrap();
        assert_eq!(s0.phi.max_abs(), 0.0);
        assert!(s0.charges.v.values().iter().all(|&x| x == 1.0));
        let sim = Simulator::new(c).unwrap();
        let mut s = s0.clone();
        for _ in 0..5 {
            s = sim.step(&s).unwrap();
        }
        assert!(s.charges.v.sub(&s0.charges.v).max_abs() < 1e-14);
        assert_eq!(s.u.u.max_abs(), 0.0);
        assert_eq!(s.step, 5);
        assert_eq!(s.t, 5.0 * 1e-3);
    }

    #[test]
    fn two_blob_masses_are_exact() {
        for n in [16, 32, 64] {
            let c = config(n, Preset::by_name("two-blobs").unwrap());
            let s = init_state(&c).unwrap();
            assert!((s.mu_v - 2.0).abs() <= 1e-14 * 2.0, "{}", s.mu_v);
            assert!((s.mu_w - 1.0).abs() <= 1e-14, "{}", s.mu_w);
            assert!(s.charges.v.min() > 0.0 && s.charges.w.min() > 0.0);
        }
    }

    #[test]
    fn sheared_blobs_start_divergence_free() {
        let c = config(32, Preset::by_name("sheared-blobs").unwrap());
        let s = init_state(&c).unwrap();
        assert!(s.u.u.max_abs() > 0.1);
        assert!(s.u.max_divergence() <= c.fluid_tol);
        assert_eq!(s.u.u.boundary_normal_max_abs(), 0.0);
        let r = laplacian_dirichlet0(&s.phi)
            .unwrap()
            .sub(&s.charges.v.sub(&s.charges.w))
            .max_abs();
        assert!(r <= c.poisson_tol * s.charges.v.max_abs().max(1.0));
    }

    #[test]
    fn debye_equals_coupled_on_neutral_data() {
        let mut c = config(
            16,
            Preset::NoisyNeutral {
                mass: 1.0,
                amplitude: 0.0,
            },
        );
        c.t_end = 0.01;
        let a = run(&c).unwrap();
        c.mode = Mode::Debye;
        let b = run(&c).unwrap();
        assert_eq!(a.final_state, b.final_state);
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn rejects_negative_preset_mass() {
        let mut p = Preset::by_name("two-blobs").unwrap();
        p.set_param("mu_v", -1.0).unwrap();
        let e = init_state(&config(8, p)).unwrap_err();
        assert_eq!(e.kind(), "domain");
    }

    #[test]
    fn t_end_zero_gives_one_record() {
        let mut c = config(8, Preset::by_name("two-blobs").unwrap());
        c.t_end = 0.0;
        let out = run(&c).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.final_state, out.initial);
    }

    #[test]
    fn step_count_does_not_round_up_representation_error() {
        let mut c = config(8, Preset::by_name("two-blobs").unwrap());
        c.dt = 0.1;
        c.t_end = 0.3;
        assert_eq!(c.total_steps(), 3);
        c.t_end = 0.31;
        assert_eq!(c.total_steps(), 4);
    }

    #[test]
    fn mirrored_initial_data_give_mirrored_steps() {
        let mut p = Preset::by_name("two-blobs").unwrap();
        p.set_param("mu_w", 2.0).unwrap();
        p.set_param("mu_v", 1.0).unwrap();
        let c = config(16, p);
        let s = init_state(&c).unwrap();
        let sim = Simulator::new(c).unwrap();
        let (mut a, mut b) = (s.clone(), s.mirrored());
        for _ in 0..5 {
            a = sim.step(&a).unwrap();
            b = sim.step(&b).unwrap();
        }
        assert_eq!(a.mirrored(), b);
    }
}
