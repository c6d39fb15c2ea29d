//! The experiment suite and its acceptance criteria.
//!
//! Every experiment is an independent simulation, so they run on scoped
//! threads. Criteria that speak about "every step" are evaluated by a
//! per-step monitor; the stored trajectories are decimated.

use std::path::Path;

use kimura::diagnostics::{
    delayed_bc_residual, detect_monotonicity, discrete_energy, first_moment, is_nondecreasing, total_mass,
    ExtremumKind,
};
use kimura::equilibrium::{boundary_equilibrium_mass, predicted_fixation, sample_equilibrium, EquilibriumProfile};
use kimura::integrator::{simulate_with, spatial_convergence, temporal_convergence, OrderEstimate, Problem, SolverConfig, Trajectory};
use kimura::wright_fisher::{absorption_probabilities, evolve_distribution, mean_frequency, WFModel};
use kimura::{GridSpec, InitialCondition, StateVector, WeightVector};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::write_all_or_nothing;
use crate::run::render_run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// N = 2000, tau = 1e-3.
    Desk,
    /// N = 10^4, tau = 1e-4.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileSettings {
    pub cells: usize,
    pub tau: f64,
    pub damped_start: usize,
    pub output_every: usize,
}

impl Profile {
    pub fn settings(self) -> ProfileSettings {
        match self {
            // Plain Crank-Nicolson rings on the step profile at this tau;
            // two backward Euler half steps at the start damp it.
            Profile::Desk => ProfileSettings { cells: 2000, tau: 1e-3, damped_start: 2, output_every: 10 },
            Profile::Full => ProfileSettings { cells: 10_000, tau: 1e-4, damped_start: 0, output_every: 100 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub delta: f64,
    pub epsilon: f64,
    pub cells: usize,
    pub t_final: f64,
    pub ic: InitialCondition,
    pub snapshots: Vec<f64>,
    pub track_energy: bool,
    pub track_boundary: bool,
}

impl Experiment {
    fn new(name: &str, delta: f64, epsilon: f64, cells: usize, t_final: f64, ic: InitialCondition) -> Self {
        Self {
            name: name.to_string(),
            delta,
            epsilon,
            cells,
            t_final,
            ic,
            snapshots: vec![t_final],
            track_energy: false,
            track_boundary: false,
        }
    }

    fn energy(mut self) -> Self {
        self.track_energy = true;
        self
    }

    fn boundary(mut self) -> Self {
        self.track_boundary = true;
        self
    }

    fn snapshots(mut self, times: &[f64]) -> Self {
        self.snapshots = times.to_vec();
        self
    }
}

/// The paper's four experiments, the long runs for the equilibrium checks and
/// the epsilon and delta sweeps.
pub fn experiments(settings: &ProfileSettings) -> Vec<Experiment> {
    let n = settings.cells;
    let mut list = vec![
        Experiment::new("uniform", 1e-3, 1e-3, n, 10.0, InitialCondition::Uniform).energy().boundary(),
        Experiment::new("step", 1e-3, 1e-3, n, 10.0, InitialCondition::half_split(1e-3)).energy(),
        Experiment::new("gaussian", 1e-4, 1e-4, n, 2.0, InitialCondition::Gaussian { x0: 0.4, sigma: 0.1 })
            .energy()
            .snapshots(&[0.0, 0.1, 0.5, 2.0]),
        Experiment::new("uniform-long", 1e-3, 1e-3, n, 50.0, InitialCondition::Uniform),
        Experiment::new("uniform-long-fine", 1e-3, 1e-3, 2 * n, 50.0, InitialCondition::Uniform),
    ];
    for eps in [1.0, 0.1, 0.01] {
        let name = if eps == 1.0 { "boundary-mass".to_string() } else { format!("boundary-mass-eps{eps}") };
        list.push(
            Experiment::new(&name, 1e-4, eps, n, 0.1, InitialCondition::large_boundary_mass(1e-4))
                .boundary()
                .snapshots(&[0.0, 0.01, 0.1]),
        );
    }
    for eps in [1e-2, 1e-4] {
        list.push(Experiment::new(&format!("eps-{eps:e}"), 1e-3, eps, n, 10.0, InitialCondition::Uniform));
    }
    for delta in [1e-2, 1e-4] {
        list.push(Experiment::new(&format!("delta-{delta:e}"), delta, 1e-3, n, 10.0, InitialCondition::Uniform));
    }
    list
}

/// Per-step statistics of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunStats {
    pub steps: usize,
    pub max_mass_drift: f64,
    pub min_entry: f64,
    pub max_ab_gap: f64,
    pub first_moment_initial: f64,
    pub first_moment_min: f64,
    pub first_moment_max: f64,
    /// Largest `F(p^{n+1}) - F(p^n)`; absent when energy was not tracked.
    pub max_energy_increase: Option<f64>,
    /// Steps at which the energy was undefined because of negative entries.
    pub energy_undefined_steps: usize,
    #[serde(skip)]
    pub boundary: Option<BoundarySeries>,
}

#[derive(Debug, Clone, Default)]
pub struct BoundarySeries {
    pub times: Vec<f64>,
    pub a: Vec<f64>,
    pub rho_delta: Vec<f64>,
}

struct Monitor<'a> {
    grid: &'a GridSpec,
    weights: WeightVector,
    epsilon: f64,
    tau: f64,
    track_energy: bool,
    last_energy: Option<f64>,
    stats: RunStats,
}

impl<'a> Monitor<'a> {
    fn new(grid: &'a GridSpec, experiment: &Experiment, tau: f64, p0: &StateVector) -> Self {
        let m1 = first_moment(p0, grid);
        let stats = RunStats {
            steps: 0,
            max_mass_drift: 0.0,
            min_entry: f64::INFINITY,
            max_ab_gap: 0.0,
            first_moment_initial: m1,
            first_moment_min: m1,
            first_moment_max: m1,
            max_energy_increase: experiment.track_energy.then_some(f64::NEG_INFINITY),
            energy_undefined_steps: 0,
            boundary: experiment.track_boundary.then(BoundarySeries::default),
        };
        let mut monitor = Self {
            grid,
            weights: grid.weights(),
            epsilon: experiment.epsilon,
            tau,
            track_energy: experiment.track_energy,
            last_energy: None,
            stats,
        };
        monitor.observe(0, p0);
        monitor
    }

    fn observe(&mut self, step: usize, p: &StateVector) {
        let s = &mut self.stats;
        s.steps = step;
        s.max_mass_drift = s.max_mass_drift.max((total_mass(p, &self.weights) - 1.0).abs());
        s.min_entry = s.min_entry.min(p.min_entry());
        s.max_ab_gap = s.max_ab_gap.max((p.a() - p.b()).abs());
        let m1 = first_moment(p, self.grid);
        s.first_moment_min = s.first_moment_min.min(m1);
        s.first_moment_max = s.first_moment_max.max(m1);
        if self.track_energy {
            let energy = discrete_energy(p, self.grid, self.epsilon).ok();
            match (self.last_energy, energy) {
                (Some(prev), Some(now)) => {
                    s.max_energy_increase = s.max_energy_increase.map(|m| m.max(now - prev));
                }
                (_, None) => s.energy_undefined_steps += 1,
                (None, Some(_)) => {}
            }
            self.last_energy = energy;
        }
        if let Some(b) = s.boundary.as_mut() {
            b.times.push(step as f64 * self.tau);
            b.a.push(p.a());
            b.rho_delta.push(p.rho()[0]);
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub experiment: Experiment,
    pub grid: GridSpec,
    pub trajectory: Trajectory,
    pub stats: RunStats,
}

impl ExperimentOutcome {
    pub fn final_state(&self) -> &StateVector {
        self.trajectory.final_state.as_ref().expect("simulate always returns a final state")
    }
}

pub fn run_experiment(experiment: &Experiment, settings: &ProfileSettings) -> CliResult<ExperimentOutcome> {
    let grid = GridSpec::new(experiment.delta, experiment.cells)?;
    let config = SolverConfig::new(settings.tau, experiment.t_final, settings.output_every)?
        .with_damped_start(settings.damped_start);
    let p0 = kimura::grid::init_state(&grid, &experiment.ic)?;
    let mut monitor = Monitor::new(&grid, experiment, settings.tau, &p0);
    let trajectory = simulate_with(&grid, experiment.epsilon, &experiment.ic, &config, &experiment.snapshots, |k, p| {
        monitor.observe(k, p)
    })?;
    let mut stats = monitor.stats;
    if stats.max_energy_increase == Some(f64::NEG_INFINITY) {
        stats.max_energy_increase = None;
    }
    Ok(ExperimentOutcome { experiment: experiment.clone(), grid, trajectory, stats })
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderSummary {
    pub levels: Vec<f64>,
    pub errors: Vec<f64>,
    pub pairwise_orders: Vec<f64>,
    pub fitted_order: f64,
}

impl From<OrderEstimate> for OrderSummary {
    fn from(e: OrderEstimate) -> Self {
        Self { levels: e.levels, errors: e.errors, pairwise_orders: e.pairwise_orders, fitted_order: e.fitted_order }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSummary {
    pub temporal: OrderSummary,
    pub spatial: OrderSummary,
}

pub const TEMPORAL_TAUS: [f64; 3] = [4e-3, 2e-3, 1e-3];
pub const TEMPORAL_REFERENCE_TAU: f64 = 1.25e-4;
pub const SPATIAL_CELLS: [usize; 3] = [250, 500, 1000];
pub const SPATIAL_REFERENCE_CELLS: usize = 4000;
pub const CONVERGENCE_PROBE_TIME: f64 = 1.0;

fn convergence_problem(cells: usize) -> kimura::Result<Problem> {
    Problem::new(1e-4, cells, 1e-4, InitialCondition::Gaussian { x0: 0.4, sigma: 0.1 })
}

pub fn run_convergence(settings: &ProfileSettings) -> CliResult<ConvergenceSummary> {
    let problem = convergence_problem(settings.cells)?;
    let temporal = temporal_convergence(&problem, &TEMPORAL_TAUS, TEMPORAL_REFERENCE_TAU, CONVERGENCE_PROBE_TIME)?;
    let spatial = spatial_convergence(
        &problem,
        &SPATIAL_CELLS,
        SPATIAL_REFERENCE_CELLS,
        TEMPORAL_REFERENCE_TAU,
        CONVERGENCE_PROBE_TIME,
    )?;
    Ok(ConvergenceSummary { temporal: temporal.into(), spatial: spatial.into() })
}

#[derive(Debug, Clone, Serialize)]
pub struct WrightFisherSummary {
    pub two_n: usize,
    pub max_row_sum_error: f64,
    pub max_mean_drift: f64,
    pub max_absorption_error: f64,
    pub initial_mean: f64,
    pub chain_fixation_mass: f64,
    pub unabsorbed_mass: f64,
    pub pde_predicted_fixation: f64,
}

pub const WF_TWO_N: usize = 20;
pub const WF_GENERATIONS: usize = 10_000;

/// Spreads a PDE state over the chain states `i / 2N` with hat-function
/// weights, which keeps both its mass and its mean.
pub fn project_onto_chain(p: &StateVector, grid: &GridSpec, two_n: usize) -> Vec<f64> {
    let mut dist = vec![0.0; two_n + 1];
    let w = grid.weights();
    let w = w.as_slice();
    let mut deposit = |x: f64, mass: f64| {
        let s = x * two_n as f64;
        let lo = (s.floor() as usize).min(two_n - 1);
        let frac = s - lo as f64;
        dist[lo] += mass * (1.0 - frac);
        dist[lo + 1] += mass * frac;
    };
    deposit(0.0, p.a());
    for (k, (x, r)) in grid.nodes().iter().zip(p.rho()).enumerate() {
        deposit(*x, w[k + 1] * r);
    }
    deposit(1.0, p.b());
    dist
}

pub fn run_wright_fisher(settings: &ProfileSettings) -> CliResult<WrightFisherSummary> {
    let model = WFModel::pure_drift(WF_TWO_N)?;
    let max_row_sum_error = (0..model.n_states())
        .map(|i| model.transition_row(i).map(|row| (row.iter().sum::<f64>() - 1.0).abs()))
        .collect::<kimura::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let ic = InitialCondition::Gaussian { x0: 0.4, sigma: 0.1 };
    let grid = GridSpec::new(1e-4, settings.cells)?;
    let p0 = kimura::grid::init_state(&grid, &ic)?;
    let mut dist = project_onto_chain(&p0, &grid, WF_TWO_N);
    let initial_mean = mean_frequency(&model, &dist);
    let mut max_mean_drift = 0.0_f64;
    for _ in 0..WF_GENERATIONS {
        dist = evolve_distribution(&model, &dist, 1)?;
        max_mean_drift = max_mean_drift.max((mean_frequency(&model, &dist) - initial_mean).abs());
    }

    let absorption = absorption_probabilities(&model)?;
    let max_absorption_error = absorption
        .iter()
        .enumerate()
        .map(|(i, h)| (h - i as f64 / WF_TWO_N as f64).abs())
        .fold(0.0, f64::max);

    let (_, b_pred) = predicted_fixation(&ic, &grid)?;
    Ok(WrightFisherSummary {
        two_n: WF_TWO_N,
        max_row_sum_error,
        max_mean_drift,
        max_absorption_error,
        initial_mean,
        chain_fixation_mass: dist[WF_TWO_N],
        unabsorbed_mass: 1.0 - dist[0] - dist[WF_TWO_N],
        pde_predicted_fixation: b_pred,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    fn new(id: u32, name: &str, passed: bool, detail: String) -> Self {
        Self { id, name: name.to_string(), passed, detail }
    }

    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<28} {}  {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

pub struct SuiteOutcome {
    pub profile: Profile,
    pub settings: ProfileSettings,
    pub experiments: Vec<ExperimentOutcome>,
    pub convergence: ConvergenceSummary,
    pub wright_fisher: WrightFisherSummary,
    pub criteria: Vec<CriterionResult>,
}

impl SuiteOutcome {
    pub fn experiment(&self, name: &str) -> &ExperimentOutcome {
        self.experiments.iter().find(|e| e.experiment.name == name).expect("experiment is part of the suite")
    }

    pub fn failures(&self) -> Vec<String> {
        self.criteria.iter().filter(|c| !c.passed).map(|c| format!("{} ({})", c.id, c.name)).collect()
    }
}

/// Runs every experiment concurrently and evaluates the criteria.
pub fn run_suite(profile: Profile, settings: ProfileSettings) -> CliResult<SuiteOutcome> {
    let list = experiments(&settings);
    let (outcomes, convergence, wright_fisher) = std::thread::scope(|scope| {
        let runs: Vec<_> = list.iter().map(|e| scope.spawn(|| run_experiment(e, &settings))).collect();
        let conv = scope.spawn(|| run_convergence(&settings));
        let wf = scope.spawn(|| run_wright_fisher(&settings));
        let outcomes = runs.into_iter().map(|h| h.join().expect("experiment thread panicked")).collect::<Vec<_>>();
        (outcomes, conv.join().expect("convergence thread panicked"), wf.join().expect("wright-fisher thread panicked"))
    });
    let mut suite = SuiteOutcome {
        profile,
        settings,
        experiments: outcomes.into_iter().collect::<CliResult<Vec<_>>>()?,
        convergence: convergence?,
        wright_fisher: wright_fisher?,
        criteria: Vec::new(),
    };
    suite.criteria = evaluate(&suite)?;
    Ok(suite)
}

fn rel_linf(x: &[f64], y: &[f64]) -> f64 {
    let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn evaluate(suite: &SuiteOutcome) -> CliResult<Vec<CriterionResult>> {
    let mut out = Vec::new();

    let (worst, name) = suite
        .experiments
        .iter()
        .map(|e| (e.stats.max_mass_drift, e.experiment.name.as_str()))
        .fold((0.0, ""), |acc, x| if x.0 > acc.0 { x } else { acc });
    out.push(CriterionResult::new(
        1,
        "mass conservation",
        worst <= 1e-11,
        format!("max |mass - 1| = {worst:.3e} ({name}) over {} runs, tol 1e-11", suite.experiments.len()),
    ));

    let uniform = suite.experiment("uniform");
    let gap = uniform.stats.max_ab_gap;
    out.push(CriterionResult::new(2, "symmetry", gap <= 1e-11, format!("max |a - b| = {gap:.3e}, tol 1e-11")));

    let s = &uniform.stats;
    let uni_dev = (s.first_moment_max - 0.5).abs().max((s.first_moment_min - 0.5).abs());
    let g = &suite.experiment("gaussian").stats;
    let g_drift =
        (g.first_moment_max - g.first_moment_initial).max(g.first_moment_initial - g.first_moment_min) / g.first_moment_initial;
    out.push(CriterionResult::new(
        3,
        "first moment",
        uni_dev <= 1e-10 && g_drift <= 1e-2,
        format!("uniform max |M1 - 0.5| = {uni_dev:.3e} (tol 1e-10); gaussian relative drift = {g_drift:.3e} (tol 1e-2)"),
    ));

    let mut energy_ok = true;
    let mut parts = Vec::new();
    for name in ["uniform", "step", "gaussian"] {
        let s = &suite.experiment(name).stats;
        let rise = s.max_energy_increase.unwrap_or(f64::INFINITY);
        energy_ok &= s.energy_undefined_steps == 0 && rise <= 1e-10;
        parts.push(format!("{name} max dF = {rise:.3e}, undefined at {} steps", s.energy_undefined_steps));
    }
    out.push(CriterionResult::new(4, "energy decay", energy_ok, format!("{} (tol +1e-10)", parts.join("; "))));

    let long = suite.experiment("uniform-long").final_state();
    let total = long.a() + long.b();
    let target = boundary_equilibrium_mass(1e-3, 1e-3)?;
    out.push(CriterionResult::new(
        5,
        "fixation mass",
        (total - target).abs() <= 1e-3 && (total - 1.0).abs() <= 2e-3,
        format!("a + b = {total:.9} at T = 50, closed form {target:.9}, |diff| = {:.3e}", (total - target).abs()),
    ));

    let mut measured = Vec::new();
    let mut predicted = Vec::new();
    for name in ["uniform-long", "uniform-long-fine"] {
        let run = suite.experiment(name);
        let p = run.final_state();
        let fitted = sample_equilibrium(&EquilibriumProfile::new(p.a(), p.b(), 1e-3, 1e-3)?, &run.grid)?;
        let closed = sample_equilibrium(&EquilibriumProfile::symmetric(1e-3, 1e-3)?, &run.grid)?;
        measured.push(rel_linf(p.rho(), fitted.rho()));
        predicted.push(rel_linf(p.rho(), closed.rho()));
    }
    let ratio = predicted[0] / predicted[1];
    out.push(CriterionResult::new(
        6,
        "equilibrium profile",
        measured[0] <= 2e-2 && (3.0..=5.0).contains(&ratio),
        format!(
            "measured-(a,b) deviation {:.3e} / {:.3e} (tol 2e-2); closed-form deviation {:.3e} / {:.3e}, ratio {ratio:.3} (band [3, 5])",
            measured[0], measured[1], predicted[0], predicted[1]
        ),
    ));

    let points: Vec<(f64, f64)> = [("eps-1e-2", 1e-2), ("uniform", 1e-3), ("eps-1e-4", 1e-4)]
        .iter()
        .map(|(name, eps)| (*eps, suite.experiment(name).trajectory.last().expect("records").l2_bulk))
        .collect();
    let slope = log_log_slope(&points);
    out.push(CriterionResult::new(
        7,
        "epsilon scaling",
        (0.9..=1.1).contains(&slope),
        format!("log-log slope of ||rho|| vs eps = {slope:.4}, band [0.9, 1.1]"),
    ));

    let series = suite.experiment("boundary-mass").stats.boundary.as_ref().expect("boundary tracked");
    let a_series: Vec<(f64, f64)> =
        series.times.iter().zip(&series.a).filter(|(t, _)| **t > 0.0 && **t <= 0.1 + 1e-12).map(|(t, a)| (*t, *a)).collect();
    let extrema = detect_monotonicity(&a_series);
    let minima: Vec<f64> = extrema.iter().filter(|e| e.kind == ExtremumKind::Minimum).map(|e| e.time).collect();
    let tail_ok = extrema.last().map(|e| is_nondecreasing(&a_series[e.index..])).unwrap_or(false);
    out.push(CriterionResult::new(
        8,
        "non-monotone boundary mass",
        !minima.is_empty() && tail_ok,
        format!("{} extrema, interior minima at t = {minima:?}, nondecreasing after last extremum: {tail_ok}", extrema.len()),
    ));

    let order = suite.convergence.temporal.fitted_order;
    out.push(CriterionResult::new(
        9,
        "temporal order",
        (1.7..=2.2).contains(&order),
        format!(
            "fitted order {order:.4} (pairwise {}), band [1.7, 2.2]",
            suite.convergence.temporal.pairwise_orders.iter().map(|o| format!("{o:.4}")).collect::<Vec<_>>().join(", ")
        ),
    ));

    let wf = &suite.wright_fisher;
    let cross = (wf.pde_predicted_fixation - wf.chain_fixation_mass).abs();
    out.push(CriterionResult::new(
        10,
        "wright-fisher oracle",
        wf.max_row_sum_error <= 1e-14 && wf.max_mean_drift <= 1e-12 && wf.max_absorption_error <= 1e-12 && cross <= 1e-2,
        format!(
            "row sums {:.1e}, mean drift {:.1e}, absorption {:.1e}, PDE b {:.6} vs chain {:.6} (|diff| {cross:.1e})",
            wf.max_row_sum_error, wf.max_mean_drift, wf.max_absorption_error, wf.pde_predicted_fixation, wf.chain_fixation_mass
        ),
    ));

    let b = uniform.stats.boundary.as_ref().expect("boundary tracked");
    let residual = delayed_bc_residual(&b.times, &b.rho_delta, &b.a, 1e-3)?;
    out.push(CriterionResult::new(
        11,
        "delayed boundary condition",
        residual <= 1e-5,
        format!("max residual {residual:.3e}, tol 1e-5"),
    ));
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub delta: f64,
    pub epsilon: f64,
    pub cells: usize,
    pub t_final: f64,
    pub final_a: f64,
    pub final_b: f64,
    pub final_l2_bulk: f64,
    pub stats: RunStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub profile: Profile,
    pub settings: ProfileSettings,
    pub all_passed: bool,
    pub criteria: Vec<CriterionResult>,
    pub experiments: Vec<ExperimentReport>,
    pub convergence: ConvergenceSummary,
    pub wright_fisher: WrightFisherSummary,
}

impl SuiteOutcome {
    pub fn report(&self) -> Report {
        Report {
            profile: self.profile,
            settings: self.settings,
            all_passed: self.criteria.iter().all(|c| c.passed),
            criteria: self.criteria.clone(),
            experiments: self
                .experiments
                .iter()
                .map(|e| {
                    let p = e.final_state();
                    ExperimentReport {
                        name: e.experiment.name.clone(),
                        delta: e.experiment.delta,
                        epsilon: e.experiment.epsilon,
                        cells: e.experiment.cells,
                        t_final: e.experiment.t_final,
                        final_a: p.a(),
                        final_b: p.b(),
                        final_l2_bulk: e.trajectory.last().map(|r| r.l2_bulk).unwrap_or(f64::NAN),
                        stats: e.stats.clone(),
                    }
                })
                .collect(),
            convergence: self.convergence.clone(),
            wright_fisher: self.wright_fisher.clone(),
        }
    }

    /// One directory per experiment plus `report.json`. Each directory is
    /// written all-or-nothing.
    pub fn write(&self, output_dir: &Path, generated_at: Option<&str>) -> CliResult<()> {
        for e in &self.experiments {
            let files = render_run(&e.experiment.name, &e.grid, &e.trajectory, generated_at)?;
            write_all_or_nothing(&output_dir.join(&e.experiment.name), &files)?;
        }
        let json = serde_json::to_string_pretty(&self.report()).map_err(|e| CliError::Config(e.to_string()))?;
        write_all_or_nothing(output_dir, &[("report.json".to_string(), json + "\n")])
    }
}
