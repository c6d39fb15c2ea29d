//! Truncated grid, extended state vector, quadrature weights and initial data.

use std::f64::consts::PI;

use crate::error::{check_len, domain};
use crate::linalg::compensated_sum;
use crate::{Error, Result};

/// Uniform grid on `(delta, 1 - delta)` with `n_cells` cells and `n_cells + 1`
/// nodes `x_i = delta + i h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    delta: f64,
    n_cells: usize,
    h: f64,
    nodes: Vec<f64>,
}

impl GridSpec {
    /// Builds the grid. Requires `0 < delta < 1/2` and `n_cells >= 2`.
    pub fn new(delta: f64, n_cells: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(domain(format!("delta must lie in (0, 1/2), got {delta}")));
        }
        if n_cells < 2 {
            return Err(domain(format!("n_cells must be at least 2, got {n_cells}")));
        }
        let h = (1.0 - 2.0 * delta) / n_cells as f64;
        // The right half mirrors the left half so that x_{N-i} = 1 - x_i holds
        // bit-for-bit; reflection symmetry of the discrete problem relies on it.
        let mut nodes = vec![0.0; n_cells + 1];
        for (i, node) in nodes.iter_mut().enumerate().take(n_cells / 2 + 1) {
            *node = delta + i as f64 * h;
        }
        for i in n_cells / 2 + 1..=n_cells {
            nodes[i] = 1.0 - nodes[n_cells - i];
        }
        if n_cells.is_multiple_of(2) {
            nodes[n_cells / 2] = 0.5;
        }
        nodes[0] = delta;
        nodes[n_cells] = 1.0 - delta;
        Ok(Self { delta, n_cells, h, nodes })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Cell width `(1 - 2 delta) / N`.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Length `N + 3` of the extended state `(a, rho_0..rho_N, b)`.
    pub fn state_len(&self) -> usize {
        self.n_cells + 3
    }

    /// Diffusion mobility `x_i (1 - x_i)` at every node, symmetric under
    /// `i -> N - i` exactly.
    pub fn mobility(&self) -> Vec<f64> {
        let n = self.n_cells;
        let mut g: Vec<f64> = self.nodes.iter().map(|&x| x * (1.0 - x)).collect();
        for i in n / 2 + 1..=n {
            g[i] = g[n - i];
        }
        g
    }

    /// Quadrature weights `(1, h/2, h, ..., h, h/2, 1)`.
    pub fn weights(&self) -> WeightVector {
        let mut w = vec![self.h; self.state_len()];
        let last = w.len() - 1;
        w[0] = 1.0;
        w[last] = 1.0;
        w[1] = 0.5 * self.h;
        w[last - 1] = 0.5 * self.h;
        WeightVector(w)
    }
}

/// Trapezoid weights of the extended state; the boundary masses carry weight 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sum of the bulk weights, `1 - 2 delta` up to rounding.
    pub fn bulk_sum(&self) -> f64 {
        compensated_sum(self.0[1..self.0.len() - 1].iter().copied())
    }
}

/// `sum_i w_i f_i g_i`.
pub fn weighted_inner(f: &[f64], g: &[f64], w: &WeightVector) -> Result<f64> {
    check_len(w.len(), f.len())?;
    check_len(w.len(), g.len())?;
    Ok(compensated_sum(
        w.as_slice().iter().zip(f).zip(g).map(|((w, f), g)| w * f * g),
    ))
}

/// Extended state `(a, rho_0, ..., rho_N, b)` stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    values: Vec<f64>,
}

impl StateVector {
    pub fn new(a: f64, rho: &[f64], b: f64) -> Self {
        let mut values = Vec::with_capacity(rho.len() + 2);
        values.push(a);
        values.extend_from_slice(rho);
        values.push(b);
        Self { values }
    }

    /// Wraps a flat `(a, rho_0..rho_N, b)` vector; needs at least three bulk
    /// entries.
    pub fn from_flat(values: Vec<f64>) -> Result<Self> {
        if values.len() < 5 {
            return Err(Error::Dimension { expected: 5, actual: values.len() });
        }
        Ok(Self { values })
    }

    pub fn zeros(n_cells: usize) -> Self {
        Self { values: vec![0.0; n_cells + 3] }
    }

    pub fn a(&self) -> f64 {
        self.values[0]
    }

    pub fn b(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn set_a(&mut self, a: f64) {
        self.values[0] = a;
    }

    pub fn set_b(&mut self, b: f64) {
        let last = self.values.len() - 1;
        self.values[last] = b;
    }

    pub fn rho(&self) -> &[f64] {
        &self.values[1..self.values.len() - 1]
    }

    pub fn rho_mut(&mut self) -> &mut [f64] {
        let last = self.values.len() - 1;
        &mut self.values[1..last]
    }

    pub fn n_cells(&self) -> usize {
        self.values.len() - 3
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn min_entry(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Image under `x -> 1 - x`, which swaps `a` and `b`.
    pub fn reflected(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self { values }
    }
}

/// Initial data for the extended state. Bulk values are sampled at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// `rho = 1 / (1 - 2 delta)`, `a = b = 0`.
    Uniform,
    /// Piecewise constant: nodes with `x < split_point` take `left_value`,
    /// the others `right_value`.
    Step { left_value: f64, right_value: f64, split_point: f64 },
    /// Normal density centred at `x0`, truncated to the grid.
    Gaussian { x0: f64, sigma: f64 },
    /// Constant bulk plus prescribed boundary masses.
    WithBoundaryMass { bulk_value: f64, a0: f64, b0: f64 },
    /// Arbitrary node values.
    Custom { rho: Vec<f64>, a0: f64, b0: f64 },
}

impl InitialCondition {
    /// The discontinuous profile `0.5 / (1 - 2 delta)` left of `x = 0.5`,
    /// `1.5 / (1 - 2 delta)` right of it.
    pub fn half_split(delta: f64) -> Self {
        let scale = 1.0 / (1.0 - 2.0 * delta);
        InitialCondition::Step { left_value: 0.5 * scale, right_value: 1.5 * scale, split_point: 0.5 }
    }

    /// Most of the mass starts on the boundary: `a0 = b0 = 0.49`.
    pub fn large_boundary_mass(delta: f64) -> Self {
        InitialCondition::WithBoundaryMass { bulk_value: 0.02 / (1.0 - 2.0 * delta), a0: 0.49, b0: 0.49 }
    }

    fn sample(&self, grid: &GridSpec) -> Result<(f64, Vec<f64>, f64)> {
        let nodes = grid.nodes();
        let nonneg = |v: f64, what: &str| -> Result<()> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(domain(format!("{what} must be finite and nonnegative, got {v}")))
            }
        };
        match self {
            InitialCondition::Uniform => {
                Ok((0.0, vec![1.0 / (1.0 - 2.0 * grid.delta()); nodes.len()], 0.0))
            }
            InitialCondition::Step { left_value, right_value, split_point } => {
                nonneg(*left_value, "step left value")?;
                nonneg(*right_value, "step right value")?;
                let rho = nodes
                    .iter()
                    .map(|&x| if x < *split_point { *left_value } else { *right_value })
                    .collect();
                Ok((0.0, rho, 0.0))
            }
            InitialCondition::Gaussian { x0, sigma } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(domain(format!("gaussian sigma must be positive, got {sigma}")));
                }
                if !x0.is_finite() {
                    return Err(domain("gaussian centre must be finite"));
                }
                let norm = 1.0 / ((2.0 * PI).sqrt() * sigma);
                let rho = nodes
                    .iter()
                    .map(|&x| norm * (-(x - x0).powi(2) / (2.0 * sigma * sigma)).exp())
                    .collect();
                Ok((0.0, rho, 0.0))
            }
            InitialCondition::WithBoundaryMass { bulk_value, a0, b0 } => {
                nonneg(*bulk_value, "bulk value")?;
                nonneg(*a0, "a0")?;
                nonneg(*b0, "b0")?;
                Ok((*a0, vec![*bulk_value; nodes.len()], *b0))
            }
            InitialCondition::Custom { rho, a0, b0 } => {
                check_len(nodes.len(), rho.len())?;
                nonneg(*a0, "a0")?;
                nonneg(*b0, "b0")?;
                for &v in rho {
                    nonneg(v, "custom bulk value")?;
                }
                Ok((*a0, rho.clone(), *b0))
            }
        }
    }
}

/// Samples the initial condition and rescales the bulk so that the weighted
/// total mass is one. Boundary masses are kept as given.
pub fn init_state(grid: &GridSpec, ic: &InitialCondition) -> Result<StateVector> {
    let (a0, mut rho, b0) = ic.sample(grid)?;
    let target = 1.0 - a0 - b0;
    if target < -1e-12 {
        return Err(domain(format!("boundary masses sum to {} > 1", a0 + b0)));
    }
    let h = grid.h();
    let n = rho.len() - 1;
    let bulk = h * (0.5 * rho[0] + 0.5 * rho[n] + compensated_sum(rho[1..n].iter().copied()));
    if !bulk.is_finite() {
        return Err(domain("initial bulk mass overflows; scale the prescribed values down"));
    }
    if bulk > 0.0 {
        let scale = target.max(0.0) / bulk;
        rho.iter_mut().for_each(|v| *v *= scale);
    } else if target > 1e-12 {
        return Err(domain("initial bulk is identically zero but boundary masses do not sum to 1"));
    }
    Ok(StateVector::new(a0, &rho, b0))
}
