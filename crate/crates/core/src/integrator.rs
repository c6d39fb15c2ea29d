//! Crank-Nicolson time stepping and simulation drivers.

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{check_len, domain};
use crate::grid::{init_state, GridSpec, InitialCondition, StateVector, WeightVector};
use crate::linalg::{compensated_sum, TridiagonalFactor};
use crate::operator::{assemble_operator, TridiagonalOperator};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub t_final: f64,
    /// Diagnostics are recorded every `output_every` steps (and at the end).
    pub output_every: usize,
    /// When nonzero, the first step is replaced by this many backward Euler
    /// substeps of `tau / damped_start` (Rannacher start). Zero is plain
    /// Crank-Nicolson throughout.
    pub damped_start: usize,
}

impl SolverConfig {
    pub fn new(tau: f64, t_final: f64, output_every: usize) -> Result<Self> {
        let config = Self { tau, t_final, output_every, damped_start: 0 };
        config.validate()?;
        Ok(config)
    }

    pub fn with_damped_start(mut self, substeps: usize) -> Self {
        self.damped_start = substeps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(domain(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.tau) {
            return Err(domain(format!("t_final = {} must be at least tau = {}", self.t_final, self.tau)));
        }
        if self.output_every == 0 {
            return Err(domain("output_every must be at least 1"));
        }
        Ok(())
    }

    /// Number of steps; `t_final` is rounded to the nearest multiple of `tau`.
    pub fn n_steps(&self) -> usize {
        ((self.t_final / self.tau).round() as usize).max(1)
    }
}

/// Crank-Nicolson stepper with the factorization of `I/tau - L_h/2` cached.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    op: TridiagonalOperator,
    tau: f64,
    factor: TridiagonalFactor,
}

impl CrankNicolson {
    pub fn new(op: TridiagonalOperator, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(domain(format!("tau must be positive, got {tau}")));
        }
        let inv_tau = 1.0 / tau;
        let lower: Vec<f64> = op.lower().iter().map(|v| -0.5 * v).collect();
        let upper: Vec<f64> = op.upper().iter().map(|v| -0.5 * v).collect();
        let main: Vec<f64> = op.main().iter().map(|v| inv_tau - 0.5 * v).collect();
        let factor = TridiagonalFactor::new(&lower, &main, &upper)?;
        Ok(Self { op, tau, factor })
    }

    pub fn operator(&self) -> &TridiagonalOperator {
        &self.op
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Advances `p` by one step in place. The update is solved for the
    /// increment, `(I/tau - L/2) d = L p`, which keeps the rounding error in
    /// the conserved mass proportional to the increment rather than the state.
    pub fn step_in_place(&self, p: &mut StateVector, scratch: &mut Vec<f64>) -> Result<()> {
        check_len(self.op.dim(), p.len())?;
        scratch.resize(p.len(), 0.0);
        self.op.apply_into(p.as_slice(), scratch)?;
        self.factor.solve_in_place(scratch)?;
        for (v, d) in p.as_mut_slice().iter_mut().zip(scratch.iter()) {
            *v += d;
        }
        Ok(())
    }

    pub fn step(&self, p: &StateVector) -> Result<StateVector> {
        let mut next = p.clone();
        let mut scratch = Vec::with_capacity(p.len());
        self.step_in_place(&mut next, &mut scratch)?;
        Ok(next)
    }
}

/// Backward Euler stepper, `(I/tau - L) p' = p`, solved in increment form.
/// Its matrix is an M-matrix, so it maps nonnegative states to nonnegative
/// states for any `tau`.
#[derive(Debug, Clone)]
pub struct BackwardEuler {
    op: TridiagonalOperator,
    factor: TridiagonalFactor,
}

impl BackwardEuler {
    pub fn new(op: TridiagonalOperator, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(domain(format!("tau must be positive, got {tau}")));
        }
        let lower: Vec<f64> = op.lower().iter().map(|v| -v).collect();
        let upper: Vec<f64> = op.upper().iter().map(|v| -v).collect();
        let main: Vec<f64> = op.main().iter().map(|v| 1.0 / tau - v).collect();
        let factor = TridiagonalFactor::new(&lower, &main, &upper)?;
        Ok(Self { op, factor })
    }

    pub fn step_in_place(&self, p: &mut StateVector, scratch: &mut Vec<f64>) -> Result<()> {
        check_len(self.op.dim(), p.len())?;
        scratch.resize(p.len(), 0.0);
        self.op.apply_into(p.as_slice(), scratch)?;
        self.factor.solve_in_place(scratch)?;
        for (v, d) in p.as_mut_slice().iter_mut().zip(scratch.iter()) {
            *v += d;
        }
        Ok(())
    }
}

/// One Crank-Nicolson step, `(I/tau - L/2) p' = (I/tau + L/2) p`.
pub fn cn_step(op: &TridiagonalOperator, p: &StateVector, tau: f64) -> Result<StateVector> {
    CrankNicolson::new(op.clone(), tau)?.step(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub requested: f64,
    pub time: f64,
    pub state: StateVector,
}

/// Diagnostics history of a run.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: Option<StateVector>,
}

impl Trajectory {
    pub fn series(&self, f: impl Fn(&DiagnosticsRecord) -> f64) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.time, f(r))).collect()
    }

    pub fn last(&self) -> Option<&DiagnosticsRecord> {
        self.records.last()
    }
}

/// Everything a run needs besides its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub grid: GridSpec,
    pub epsilon: f64,
    pub ic: InitialCondition,
}

impl Problem {
    pub fn new(delta: f64, n_cells: usize, epsilon: f64, ic: InitialCondition) -> Result<Self> {
        Ok(Self { grid: GridSpec::new(delta, n_cells)?, epsilon, ic })
    }
}

/// Runs Crank-Nicolson from the initial condition, recording diagnostics at
/// `t = 0`, every `output_every` steps and at the final step. A snapshot is
/// taken at the first step whose time reaches each requested time.
pub fn simulate(
    grid: &GridSpec,
    epsilon: f64,
    ic: &InitialCondition,
    config: &SolverConfig,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    simulate_with(grid, epsilon, ic, config, snapshot_times, |_, _| {})
}

/// Like [`simulate`], calling `observer(step, state)` after every step.
pub fn simulate_with(
    grid: &GridSpec,
    epsilon: f64,
    ic: &InitialCondition,
    config: &SolverConfig,
    snapshot_times: &[f64],
    mut observer: impl FnMut(usize, &StateVector),
) -> Result<Trajectory> {
    config.validate()?;
    if let Some(t) = snapshot_times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(domain(format!("snapshot time {t} must be finite and nonnegative")));
    }
    let op = assemble_operator(grid, epsilon)?;
    let start = match config.damped_start {
        0 => None,
        k => Some(BackwardEuler::new(op.clone(), config.tau / k as f64)?),
    };
    let stepper = CrankNicolson::new(op, config.tau)?;
    let weights = grid.weights();
    let mut p = init_state(grid, ic)?;
    let mut pending: Vec<f64> = snapshot_times.to_vec();
    pending.sort_by(f64::total_cmp);
    pending.dedup();
    let mut pending = pending.into_iter().peekable();

    let mut traj = Trajectory::default();
    let record = |traj: &mut Trajectory, t: f64, p: &StateVector, w: &WeightVector| {
        traj.times.push(t);
        traj.records.push(DiagnosticsRecord::from_state(t, p, grid, w, epsilon));
    };
    record(&mut traj, 0.0, &p, &weights);
    while let Some(&t) = pending.peek() {
        if t > 0.0 {
            break;
        }
        traj.snapshots.push(Snapshot { requested: t, time: 0.0, state: p.clone() });
        pending.next();
    }

    let n_steps = config.n_steps();
    let mut scratch = Vec::with_capacity(p.len());
    for step in 1..=n_steps {
        let t = step as f64 * config.tau;
        match (&start, step) {
            (Some(be), 1) => {
                for _ in 0..config.damped_start {
                    be.step_in_place(&mut p, &mut scratch)?;
                }
            }
            _ => stepper.step_in_place(&mut p, &mut scratch)?,
        }
        if !p.is_finite() {
            return Err(Error::Divergence { step, time: t });
        }
        observer(step, &p);
        if step % config.output_every == 0 || step == n_steps {
            record(&mut traj, t, &p, &weights);
        }
        while let Some(&req) = pending.peek() {
            // slack for the rounding in step * tau
            if t < req - 1e-9 * config.tau {
                break;
            }
            traj.snapshots.push(Snapshot { requested: req, time: t, state: p.clone() });
            pending.next();
        }
    }
    traj.final_state = Some(p);
    Ok(traj)
}

/// Observed convergence of one refinement axis.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimate {
    /// Step sizes (`tau` or `h`), coarse to fine.
    pub levels: Vec<f64>,
    /// Weighted L2 error of each level against the fine reference.
    pub errors: Vec<f64>,
    /// Order between each consecutive pair of levels.
    pub pairwise_orders: Vec<f64>,
    /// Least-squares slope of `ln error` against `ln level`.
    pub fitted_order: f64,
}

impl OrderEstimate {
    fn from_errors(levels: Vec<f64>, errors: Vec<f64>) -> Self {
        let pairwise_orders = levels
            .windows(2)
            .zip(errors.windows(2))
            .map(|(l, e)| (e[0] / e[1]).ln() / (l[0] / l[1]).ln())
            .collect();
        let xs: Vec<f64> = levels.iter().map(|v| v.ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        Self { levels, errors, pairwise_orders, fitted_order: sxy / sxx }
    }
}

/// Weighted L2 distance between a coarse state and a finer one whose grid
/// contains the coarse nodes every `stride` nodes.
fn restricted_error(coarse: &StateVector, fine: &StateVector, stride: usize, weights: &WeightVector) -> f64 {
    let n = coarse.n_cells();
    let w = weights.as_slice();
    let mut terms = Vec::with_capacity(n + 3);
    terms.push(w[0] * (coarse.a() - fine.a()).powi(2));
    for (i, r) in coarse.rho().iter().enumerate() {
        terms.push(w[i + 1] * (r - fine.rho()[i * stride]).powi(2));
    }
    terms.push(w[n + 2] * (coarse.b() - fine.b()).powi(2));
    compensated_sum(terms).sqrt()
}

fn run_to(problem: &Problem, grid: &GridSpec, tau: f64, t_probe: f64) -> Result<StateVector> {
    let config = SolverConfig::new(tau, t_probe, usize::MAX)?;
    if ((t_probe / tau).round() * tau - t_probe).abs() > 1e-9 * t_probe {
        return Err(domain(format!("t_probe = {t_probe} is not a multiple of tau = {tau}")));
    }
    let traj = simulate(grid, problem.epsilon, &problem.ic, &config, &[])?;
    Ok(traj.final_state.expect("simulate always returns a final state"))
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.len() < 3 {
        return Err(domain(format!("a convergence study needs at least 3 levels, got {}", levels.len())));
    }
    if levels.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(domain("refinement levels must be strictly decreasing"));
    }
    Ok(())
}

/// Temporal order of accuracy at `t_probe` against a fine-`tau` reference on
/// the problem's grid.
pub fn temporal_convergence(problem: &Problem, taus: &[f64], tau_ref: f64, t_probe: f64) -> Result<OrderEstimate> {
    check_levels(taus)?;
    if !(tau_ref < taus[taus.len() - 1]) {
        return Err(domain("reference tau must be finer than every level"));
    }
    let reference = run_to(problem, &problem.grid, tau_ref, t_probe)?;
    let weights = problem.grid.weights();
    let errors = taus
        .iter()
        .map(|&tau| Ok(restricted_error(&run_to(problem, &problem.grid, tau, t_probe)?, &reference, 1, &weights)))
        .collect::<Result<Vec<_>>>()?;
    Ok(OrderEstimate::from_errors(taus.to_vec(), errors))
}

/// Spatial order of accuracy at `t_probe` against a fine-`h` reference. Each
/// cell count must divide `n_ref` so the coarse nodes are reference nodes.
pub fn spatial_convergence(
    problem: &Problem,
    cells: &[usize],
    n_ref: usize,
    tau: f64,
    t_probe: f64,
) -> Result<OrderEstimate> {
    let delta = problem.grid.delta();
    let hs: Vec<f64> = cells.iter().map(|&n| (1.0 - 2.0 * delta) / n as f64).collect();
    check_levels(&hs)?;
    if let Some(n) = cells.iter().find(|&&n| n == 0 || !n_ref.is_multiple_of(n) || n_ref == n) {
        return Err(domain(format!("cell count {n} must properly divide the reference count {n_ref}")));
    }
    let reference = run_to(problem, &GridSpec::new(delta, n_ref)?, tau, t_probe)?;
    let errors = cells
        .iter()
        .map(|&n| {
            let grid = GridSpec::new(delta, n)?;
            let state = run_to(problem, &grid, tau, t_probe)?;
            Ok(restricted_error(&state, &reference, n_ref / n, &grid.weights()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrderEstimate::from_errors(hs, errors))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub temporal: OrderEstimate,
    pub spatial: OrderEstimate,
}

/// Both refinement studies. The spatial study uses the finest `tau` of the
/// temporal family.
pub fn convergence_study(
    problem: &Problem,
    taus: &[f64],
    tau_ref: f64,
    cells: &[usize],
    n_ref: usize,
    t_probe: f64,
) -> Result<ConvergenceStudy> {
    let temporal = temporal_convergence(problem, taus, tau_ref, t_probe)?;
    let spatial = spatial_convergence(problem, cells, n_ref, tau_ref, t_probe)?;
    Ok(ConvergenceStudy { temporal, spatial })
}
