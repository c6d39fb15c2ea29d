//! Wright-Fisher chain on allele counts `0..=2N`.
//!
//! From state `i` the next generation is `Binomial(2N, p_i)` with
//! `p_i = (1 - u) i / 2N + v (1 - i / 2N)`. Without mutation the endpoints
//! absorb and the allele frequency is a martingale, so the probability of
//! fixation from `i` is `i / 2N`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::domain;
use crate::linalg::compensated_sum;
use crate::{Error, Result};

/// Largest population for which the dense transition matrix is built.
pub const MAX_EXACT_ALLELES: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WFModel {
    two_n: usize,
    u: f64,
    v: f64,
}

impl WFModel {
    pub fn new(two_n: usize, u: f64, v: f64) -> Result<Self> {
        if two_n == 0 {
            return Err(domain("the population must hold at least one allele"));
        }
        for (name, rate) in [("u", u), ("v", v)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(domain(format!("mutation probability {name} = {rate} outside [0, 1]")));
            }
        }
        Ok(Self { two_n, u, v })
    }

    pub fn pure_drift(two_n: usize) -> Result<Self> {
        Self::new(two_n, 0.0, 0.0)
    }

    pub fn two_n(&self) -> usize {
        self.two_n
    }

    pub fn n_states(&self) -> usize {
        self.two_n + 1
    }

    pub fn is_pure_drift(&self) -> bool {
        self.u == 0.0 && self.v == 0.0
    }

    fn check_state(&self, i: usize) -> Result<()> {
        if i > self.two_n {
            Err(domain(format!("state {i} outside 0..={}", self.two_n)))
        } else {
            Ok(())
        }
    }

    /// Success probability of the binomial draw from state `i`.
    pub fn offspring_probability(&self, i: usize) -> f64 {
        let x = i as f64 / self.two_n as f64;
        (1.0 - self.u) * x + self.v * (1.0 - x)
    }

    /// Row `i` of the transition matrix.
    pub fn transition_row(&self, i: usize) -> Result<Vec<f64>> {
        self.check_state(i)?;
        Ok(binomial_pmf(self.two_n, self.offspring_probability(i)))
    }

    /// Dense row-stochastic matrix, `P[i][j] = P(X' = j | X = i)`.
    pub fn transition_matrix(&self) -> Result<DMatrix<f64>> {
        self.require_exact()?;
        let n = self.n_states();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, p) in binomial_pmf(self.two_n, self.offspring_probability(i)).into_iter().enumerate() {
                m[(i, j)] = p;
            }
        }
        Ok(m)
    }

    fn require_exact(&self) -> Result<()> {
        if self.two_n > MAX_EXACT_ALLELES {
            Err(Error::Unsupported(format!(
                "exact transition matrix limited to 2N <= {MAX_EXACT_ALLELES}; use Monte Carlo for 2N = {}",
                self.two_n
            )))
        } else {
            Ok(())
        }
    }
}

/// `C(n, j) p^j (1 - p)^(n - j)` for `j = 0..=n`, renormalized so the row sums
/// to one to rounding.
fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut row = vec![0.0; n + 1];
    if p <= 0.0 {
        row[0] = 1.0;
        return row;
    }
    if p >= 1.0 {
        row[n] = 1.0;
        return row;
    }
    let mut ln_fact = vec![0.0; n + 1];
    for k in 1..=n {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    for (j, slot) in row.iter_mut().enumerate() {
        let ln_c = ln_fact[n] - ln_fact[j] - ln_fact[n - j];
        *slot = (ln_c + j as f64 * lp + (n - j) as f64 * lq).exp();
    }
    let total = compensated_sum(row.iter().copied());
    row.iter_mut().for_each(|v| *v /= total);
    row
}

fn check_distribution(model: &WFModel, dist: &[f64]) -> Result<()> {
    if dist.len() != model.n_states() {
        return Err(Error::Dimension { expected: model.n_states(), actual: dist.len() });
    }
    if dist.iter().any(|v| !(*v >= 0.0)) {
        return Err(domain("distribution entries must be nonnegative"));
    }
    let total = compensated_sum(dist.iter().copied());
    if (total - 1.0).abs() > 1e-10 {
        return Err(domain(format!("distribution sums to {total}, not 1")));
    }
    Ok(())
}

/// Distribution after `k` generations.
pub fn evolve_distribution(model: &WFModel, dist: &[f64], k: usize) -> Result<Vec<f64>> {
    check_distribution(model, dist)?;
    let p = model.transition_matrix()?;
    let pt = p.transpose();
    let mut d = DVector::from_column_slice(dist);
    for _ in 0..k {
        d = &pt * d;
    }
    Ok(d.iter().copied().collect())
}

/// Mean allele frequency `sum_i dist_i i / 2N`.
pub fn mean_frequency(model: &WFModel, dist: &[f64]) -> f64 {
    let two_n = model.two_n() as f64;
    compensated_sum(dist.iter().enumerate().map(|(i, d)| d * i as f64 / two_n))
}

/// Probability of eventual fixation at `2N` from every start state, from the
/// first-step equations `(I - Q) h = r` on the transient states.
pub fn absorption_probabilities(model: &WFModel) -> Result<Vec<f64>> {
    if !model.is_pure_drift() {
        return Err(Error::Unsupported("absorption needs u = v = 0; with mutation no state absorbs".into()));
    }
    let p = model.transition_matrix()?;
    let n = model.two_n();
    let mut out = vec![0.0; n + 1];
    out[n] = 1.0;
    if n == 1 {
        return Ok(out);
    }
    let m = n - 1;
    let mut lhs = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    for r in 0..m {
        for c in 0..m {
            lhs[(r, c)] = if r == c { 1.0 } else { 0.0 } - p[(r + 1, c + 1)];
        }
        rhs[r] = p[(r + 1, n)];
    }
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::LinearSolve("transient block I - Q is singular".into()))?;
    out[1..n].copy_from_slice(sol.as_slice());
    Ok(out)
}

/// Path of `k` generations from `i0`, reproducible for a given seed.
pub fn sample_path(model: &WFModel, i0: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    model.check_state(i0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = Vec::with_capacity(k + 1);
    let mut state = i0;
    path.push(state);
    for _ in 0..k {
        state = draw(model, state, &mut rng)?;
        path.push(state);
    }
    Ok(path)
}

fn draw(model: &WFModel, state: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
    let p = model.offspring_probability(state).clamp(0.0, 1.0);
    let dist = Binomial::new(model.two_n as u64, p).map_err(|e| domain(e.to_string()))?;
    Ok(dist.sample(rng) as usize)
}

/// Outcome counts of an ensemble of independent paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixationCounts {
    pub lost: usize,
    pub fixed: usize,
    pub segregating: usize,
}

impl FixationCounts {
    pub fn total(&self) -> usize {
        self.lost + self.fixed + self.segregating
    }

    pub fn fixed_fraction(&self) -> f64 {
        self.fixed as f64 / self.total() as f64
    }
}

/// Runs `paths` pure-drift paths from `i0` for at most `max_generations`
/// each, stopping a path once it absorbs. Works for any population size.
pub fn monte_carlo_fixation(
    model: &WFModel,
    i0: usize,
    paths: usize,
    max_generations: usize,
    seed: u64,
) -> Result<FixationCounts> {
    model.check_state(i0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = FixationCounts { lost: 0, fixed: 0, segregating: 0 };
    for _ in 0..paths {
        let mut state = i0;
        let mut generation = 0;
        while generation < max_generations && state != 0 && state != model.two_n {
            state = draw(model, state, &mut rng)?;
            generation += 1;
        }
        match state {
            0 => counts.lost += 1,
            s if s == model.two_n => counts.fixed += 1,
            _ => counts.segregating += 1,
        }
    }
    Ok(counts)
}
