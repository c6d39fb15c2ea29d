//! Browser bindings for the regularized Kimura solver.
//!
//! Three operations are exposed: a steppable simulation, the closed-form
//! equilibrium profile, and the Wright-Fisher distribution evolution. Each
//! has a plain Rust core so it can be tested natively; the exported wrappers
//! only convert errors.

use kimura::equilibrium::{boundary_equilibrium_mass, EquilibriumProfile};
use kimura::grid::init_state;
use kimura::integrator::{BackwardEuler, CrankNicolson};
use kimura::operator::assemble_operator;
use kimura::wright_fisher::{evolve_distribution, WFModel};
use kimura::{diagnostics, GridSpec, InitialCondition, StateVector};
use wasm_bindgen::prelude::*;

fn to_js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

pub fn initial_condition(kind: &str, delta: f64) -> Result<InitialCondition, String> {
    match kind {
        "uniform" => Ok(InitialCondition::Uniform),
        "step" => Ok(InitialCondition::half_split(delta)),
        "gaussian" => Ok(InitialCondition::Gaussian { x0: 0.4, sigma: 0.1 }),
        "boundary-mass" => Ok(InitialCondition::large_boundary_mass(delta)),
        other => Err(format!("unknown initial condition `{other}`")),
    }
}

/// A simulation advanced on demand, one animation frame at a time.
#[wasm_bindgen]
pub struct Simulation {
    grid: GridSpec,
    epsilon: f64,
    stepper: CrankNicolson,
    start: Option<BackwardEuler>,
    state: StateVector,
    scratch: Vec<f64>,
    steps: usize,
    tau: f64,
}

impl Simulation {
    /// `damped` replaces the first step by two backward Euler half steps,
    /// which suppresses ringing from discontinuous data at large `tau`.
    pub fn create(delta: f64, epsilon: f64, cells: usize, tau: f64, ic: &str, damped: bool) -> Result<Self, String> {
        let grid = GridSpec::new(delta, cells).map_err(|e| e.to_string())?;
        let ic = initial_condition(ic, delta)?;
        let op = assemble_operator(&grid, epsilon).map_err(|e| e.to_string())?;
        let start = if damped { Some(BackwardEuler::new(op.clone(), tau / 2.0).map_err(|e| e.to_string())?) } else { None };
        let stepper = CrankNicolson::new(op, tau).map_err(|e| e.to_string())?;
        let state = init_state(&grid, &ic).map_err(|e| e.to_string())?;
        Ok(Self { grid, epsilon, stepper, start, state, scratch: Vec::new(), steps: 0, tau })
    }

    pub fn step_n(&mut self, n: usize) -> Result<(), String> {
        for _ in 0..n {
            match (&self.start, self.steps) {
                (Some(be), 0) => {
                    be.step_in_place(&mut self.state, &mut self.scratch).map_err(|e| e.to_string())?;
                    be.step_in_place(&mut self.state, &mut self.scratch).map_err(|e| e.to_string())?;
                }
                _ => self.stepper.step_in_place(&mut self.state, &mut self.scratch).map_err(|e| e.to_string())?,
            }
            self.steps += 1;
            if !self.state.is_finite() {
                return Err(format!("state became non-finite at step {}", self.steps));
            }
        }
        Ok(())
    }
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    pub fn new(delta: f64, epsilon: f64, cells: usize, tau: f64, ic: &str, damped: bool) -> Result<Simulation, JsError> {
        Self::create(delta, epsilon, cells, tau, ic, damped).map_err(to_js)
    }

    pub fn advance(&mut self, steps: usize) -> Result<(), JsError> {
        self.step_n(steps).map_err(to_js)
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.tau
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.grid.nodes().to_vec()
    }

    pub fn rho(&self) -> Vec<f64> {
        self.state.rho().to_vec()
    }

    pub fn a(&self) -> f64 {
        self.state.a()
    }

    pub fn b(&self) -> f64 {
        self.state.b()
    }

    pub fn mass(&self) -> f64 {
        diagnostics::total_mass(&self.state, &self.grid.weights())
    }

    pub fn first_moment(&self) -> f64 {
        diagnostics::first_moment(&self.state, &self.grid)
    }

    /// Discrete free energy, or NaN where it is undefined.
    pub fn energy(&self) -> f64 {
        diagnostics::discrete_energy(&self.state, &self.grid, self.epsilon).unwrap_or(f64::NAN)
    }
}

/// Closed-form equilibrium density at `xs` for masses `a`, `b`.
pub fn equilibrium_curve(epsilon: f64, delta: f64, a: f64, b: f64, xs: &[f64]) -> Result<Vec<f64>, String> {
    let profile = EquilibriumProfile::new(a, b, epsilon, delta).map_err(|e| e.to_string())?;
    Ok(xs.iter().map(|&x| profile.density(x)).collect())
}

#[wasm_bindgen]
pub fn equilibrium_density(epsilon: f64, delta: f64, a: f64, b: f64, xs: Vec<f64>) -> Result<Vec<f64>, JsError> {
    equilibrium_curve(epsilon, delta, a, b, &xs).map_err(to_js)
}

#[wasm_bindgen]
pub fn equilibrium_boundary_mass(epsilon: f64, delta: f64) -> Result<f64, JsError> {
    boundary_equilibrium_mass(epsilon, delta).map_err(to_js)
}

/// Distributions after `0, every, 2 every, ...` generations, flattened row
/// by row (each row has `two_n + 1` entries).
pub fn wright_fisher_frames(two_n: usize, i0: usize, frames: usize, every: usize) -> Result<Vec<f64>, String> {
    let model = WFModel::pure_drift(two_n).map_err(|e| e.to_string())?;
    if i0 > two_n {
        return Err(format!("start state {i0} outside 0..={two_n}"));
    }
    let mut dist = vec![0.0; two_n + 1];
    dist[i0] = 1.0;
    let mut out = Vec::with_capacity((frames + 1) * (two_n + 1));
    out.extend_from_slice(&dist);
    for _ in 0..frames {
        dist = evolve_distribution(&model, &dist, every).map_err(|e| e.to_string())?;
        out.extend_from_slice(&dist);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn wright_fisher_evolution(two_n: usize, i0: usize, frames: usize, every: usize) -> Result<Vec<f64>, JsError> {
    wright_fisher_frames(two_n, i0, frames, every).map_err(to_js)
}
