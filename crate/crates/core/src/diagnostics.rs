//! Conserved and dissipated functionals of the discrete state.

use crate::error::{check_len, domain};
use crate::grid::{GridSpec, StateVector, WeightVector};
use crate::linalg::compensated_sum;
use crate::{Error, Result};

/// Differences below this fraction of the series' magnitude count as ties.
pub const MONOTONICITY_NOISE_FLOOR: f64 = 1e-12;

/// Snapshot of the scalar diagnostics at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub mass: f64,
    pub first_moment: f64,
    /// Absent when `epsilon = 0` or when the state has a negative entry.
    pub energy: Option<f64>,
    pub a: f64,
    pub b: f64,
    pub rho_at_delta: f64,
    pub rho_at_one_minus_delta: f64,
    pub min_entry: f64,
    pub l2_bulk: f64,
}

impl DiagnosticsRecord {
    pub fn from_state(time: f64, p: &StateVector, grid: &GridSpec, weights: &WeightVector, epsilon: f64) -> Self {
        let rho = p.rho();
        let min_entry = p.min_entry();
        let energy = if epsilon > 0.0 && min_entry >= 0.0 {
            discrete_energy(p, grid, epsilon).ok()
        } else {
            None
        };
        Self {
            time,
            mass: total_mass(p, weights),
            first_moment: first_moment(p, grid),
            energy,
            a: p.a(),
            b: p.b(),
            rho_at_delta: rho[0],
            rho_at_one_minus_delta: rho[rho.len() - 1],
            min_entry,
            l2_bulk: l2_bulk(p, weights),
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.time,
            self.mass,
            self.first_moment,
            self.a,
            self.b,
            self.rho_at_delta,
            self.rho_at_one_minus_delta,
            self.min_entry,
            self.l2_bulk,
        ]
        .iter()
        .all(|v| v.is_finite())
            && self.energy.is_none_or(f64::is_finite)
    }
}

/// `a + b + h (rho_0 / 2 + rho_1 + ... + rho_{N-1} + rho_N / 2)`.
pub fn total_mass(p: &StateVector, w: &WeightVector) -> f64 {
    compensated_sum(p.as_slice().iter().zip(w.as_slice()).map(|(v, w)| v * w))
}

/// Trapezoid approximation of `int x rho dx + b`.
pub fn first_moment(p: &StateVector, grid: &GridSpec) -> f64 {
    let h = grid.h();
    let rho = p.rho();
    let x = grid.nodes();
    let n = rho.len() - 1;
    let bulk = compensated_sum(
        rho.iter().zip(x).enumerate().map(|(i, (r, x))| if i == 0 || i == n { 0.5 * h * x * r } else { h * x * r }),
    );
    bulk + p.b()
}

/// Weighted L2 norm of the bulk density.
pub fn l2_bulk(p: &StateVector, w: &WeightVector) -> f64 {
    let w = &w.as_slice()[1..w.len() - 1];
    compensated_sum(p.rho().iter().zip(w).map(|(r, w)| w * r * r)).sqrt()
}

/// `q ln(c q)` with `0 ln 0 = 0`.
fn entropy_term(q: f64, c: f64) -> f64 {
    if q == 0.0 {
        0.0
    } else {
        q * (c.ln() + q.ln())
    }
}

/// Discrete free energy
/// `h sum' rho_i ln(x_i (1 - x_i) rho_i) + a ln(eps delta (1-delta) a) + b ln(eps delta (1-delta) b)`,
/// where `sum'` halves the two end nodes.
pub fn discrete_energy(p: &StateVector, grid: &GridSpec, epsilon: f64) -> Result<f64> {
    check_len(grid.state_len(), p.len())?;
    if epsilon == 0.0 {
        return Err(Error::Unsupported("the free energy is undefined for epsilon = 0".into()));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if let Some(v) = p.as_slice().iter().find(|v| !(**v >= 0.0)) {
        return Err(domain(format!("free energy needs a nonnegative state, found {v}")));
    }
    let h = grid.h();
    let g = grid.mobility();
    let rho = p.rho();
    let n = rho.len() - 1;
    let boundary_scale = epsilon * grid.delta() * (1.0 - grid.delta());
    let terms = rho
        .iter()
        .zip(&g)
        .enumerate()
        .map(|(i, (&r, &g))| {
            let weight = if i == 0 || i == n { 0.5 * h } else { h };
            weight * entropy_term(r, g)
        })
        .chain([entropy_term(p.a(), boundary_scale), entropy_term(p.b(), boundary_scale)]);
    Ok(compensated_sum(terms))
}

/// Largest deviation between the boundary mass `a` and its integrated form
/// `e^{-eps t} (a(0) + int_0^t e^{eps s} rho(delta, s) ds)`, with the integral
/// evaluated by the trapezoid rule on the sample times.
pub fn delayed_bc_residual(times: &[f64], rho_at_delta: &[f64], a: &[f64], epsilon: f64) -> Result<f64> {
    check_len(times.len(), rho_at_delta.len())?;
    check_len(times.len(), a.len())?;
    if times.is_empty() {
        return Ok(0.0);
    }
    if times.len() > 1 {
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(domain("sample times must be increasing"));
        }
        if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt) {
            return Err(domain("delayed boundary residual needs uniformly spaced samples"));
        }
    }
    // J_k = e^{-eps t_k} I_k, advanced without forming e^{eps t}.
    let mut integral = a[0];
    let mut worst = 0.0_f64;
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        let decay = (-epsilon * dt).exp();
        integral = decay * integral + 0.5 * dt * (decay * rho_at_delta[k - 1] + rho_at_delta[k]);
        worst = worst.max((a[k] - integral).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Maximum,
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub index: usize,
    pub time: f64,
    pub value: f64,
    pub kind: ExtremumKind,
}

fn trend_signs(series: &[(f64, f64)]) -> Vec<i8> {
    let scale = series.iter().fold(0.0_f64, |m, (_, v)| m.max(v.abs()));
    let floor = MONOTONICITY_NOISE_FLOOR * scale;
    series
        .windows(2)
        .map(|w| {
            let d = w[1].1 - w[0].1;
            if d > floor {
                1
            } else if d < -floor {
                -1
            } else {
                0
            }
        })
        .collect()
}

/// Interior extrema of a sampled series: points where the sign of the
/// successive differences flips. Ties within the noise floor are skipped, and
/// an extremum on a plateau is placed at the plateau's first sample.
pub fn detect_monotonicity(series: &[(f64, f64)]) -> Vec<Extremum> {
    let mut out = Vec::new();
    if series.len() < 3 {
        return out;
    }
    let signs = trend_signs(series);
    let mut last: Option<(i8, usize)> = None;
    for (k, &s) in signs.iter().enumerate() {
        if s == 0 {
            continue;
        }
        if let Some((prev, end)) = last {
            if prev != s {
                let kind = if prev > 0 { ExtremumKind::Maximum } else { ExtremumKind::Minimum };
                let (time, value) = series[end];
                out.push(Extremum { index: end, time, value, kind });
            }
        }
        // the run of sign `s` currently ends at sample k + 1
        last = Some((s, k + 1));
    }
    out
}

/// True when no successive difference falls below minus the noise floor.
pub fn is_nondecreasing(series: &[(f64, f64)]) -> bool {
    trend_signs(series).iter().all(|&s| s >= 0)
}
