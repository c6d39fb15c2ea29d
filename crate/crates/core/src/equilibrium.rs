//! Closed-form steady states of the regularized system.
//!
//! At equilibrium `x (1 - x) rho` is affine, so `rho = (A x + B) / (x (1 - x))`,
//! and the boundary ODEs force `rho(delta) = eps a`, `rho(1 - delta) = eps b`.

use crate::error::domain;
use crate::grid::{init_state, GridSpec, InitialCondition, StateVector};
use crate::linalg::compensated_sum;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumProfile {
    pub slope: f64,
    pub intercept: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub a_inf: f64,
    pub b_inf: f64,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 0.5 {
        Ok(())
    } else {
        Err(domain(format!("delta must lie in (0, 1/2), got {delta}")))
    }
}

/// Coefficients `(A, B)` of the profile matching the boundary masses:
/// `A = c (b - a)`, `B = c ((1 - delta) a - delta b)` with
/// `c = eps delta (1 - delta) / (1 - 2 delta)`.
pub fn equilibrium_coefficients(a_inf: f64, b_inf: f64, epsilon: f64, delta: f64) -> Result<(f64, f64)> {
    check_delta(delta)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let c = epsilon * delta * (1.0 - delta) / (1.0 - 2.0 * delta);
    Ok((c * (b_inf - a_inf), c * ((1.0 - delta) * a_inf - delta * b_inf)))
}

/// `a_inf + b_inf = 1 / (1 + eps delta (1 - delta) ln((1 - delta) / delta))`.
pub fn boundary_equilibrium_mass(epsilon: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(domain(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let log_ratio = (-delta).ln_1p() - delta.ln();
    Ok(1.0 / (1.0 + epsilon * delta * (1.0 - delta) * log_ratio))
}

impl EquilibriumProfile {
    pub fn new(a_inf: f64, b_inf: f64, epsilon: f64, delta: f64) -> Result<Self> {
        if !(a_inf >= 0.0 && b_inf >= 0.0) {
            return Err(domain("equilibrium boundary masses must be nonnegative"));
        }
        let (slope, intercept) = equilibrium_coefficients(a_inf, b_inf, epsilon, delta)?;
        Ok(Self { slope, intercept, delta, epsilon, a_inf, b_inf })
    }

    /// The symmetric, flux-free equilibrium of total mass one.
    pub fn symmetric(epsilon: f64, delta: f64) -> Result<Self> {
        let half = 0.5 * boundary_equilibrium_mass(epsilon, delta)?;
        Self::new(half, half, epsilon, delta)
    }

    pub fn density(&self, x: f64) -> f64 {
        (self.slope * x + self.intercept) / (x * (1.0 - x))
    }

    /// Exact bulk mass `(2B + A) ln((1 - delta) / delta)`.
    pub fn bulk_mass(&self) -> f64 {
        (2.0 * self.intercept + self.slope) * ((-self.delta).ln_1p() - self.delta.ln())
    }
}

/// Samples the profile at the grid nodes, with `a = a_inf` and `b = b_inf`.
pub fn sample_equilibrium(profile: &EquilibriumProfile, grid: &GridSpec) -> Result<StateVector> {
    if (grid.delta() - profile.delta).abs() > 1e-15 * profile.delta.max(1.0) {
        return Err(domain(format!(
            "grid delta {} does not match profile delta {}",
            grid.delta(),
            profile.delta
        )));
    }
    let g = grid.mobility();
    let rho: Vec<f64> = grid.nodes().iter().zip(&g).map(|(x, g)| (profile.slope * x + profile.intercept) / g).collect();
    Ok(StateVector::new(profile.a_inf, &rho, profile.b_inf))
}

/// Fixation targets of the unregularized limit:
/// `a = int (1 - x) rho_0 dx + a(0)` and `b = int x rho_0 dx + b(0)`.
pub fn predicted_fixation(ic: &InitialCondition, grid: &GridSpec) -> Result<(f64, f64)> {
    let p = init_state(grid, ic)?;
    let w = grid.weights();
    let w = &w.as_slice()[1..w.len() - 1];
    let rho = p.rho();
    let x = grid.nodes();
    let b_bulk = compensated_sum(rho.iter().zip(w).zip(x).map(|((r, w), x)| w * x * r));
    let a_bulk = compensated_sum(rho.iter().zip(w).zip(x).map(|((r, w), x)| w * (1.0 - x) * r));
    Ok((a_bulk + p.a(), b_bulk + p.b()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::total_mass;
    use crate::operator::assemble_operator;
    use crate::Error;
    use proptest::prelude::*;

    #[test]
    fn symmetric_masses_give_zero_slope() {
        let (a, b) = equilibrium_coefficients(0.3, 0.3, 1e-2, 0.05).unwrap();
        assert_eq!(a, 0.0);
        // ((1 - delta) - delta) / (1 - 2 delta) = 1
        assert!((b - 1e-2 * 0.05 * 0.95 * 0.3).abs() < 1e-17);
    }

    #[test]
    fn coefficients_vanish_with_epsilon() {
        let mut last = f64::INFINITY;
        for eps in [1e-1, 1e-3, 1e-5, 1e-7] {
            let (a, b) = equilibrium_coefficients(0.2, 0.7, eps, 1e-2).unwrap();
            let size = a.abs() + b.abs();
            assert!(size < last);
            last = size;
        }
        assert!(last < 1e-8);
        assert!(matches!(equilibrium_coefficients(0.2, 0.7, 1e-3, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn boundary_mass_values() {
        assert_eq!(boundary_equilibrium_mass(0.0, 0.1).unwrap(), 1.0);
        // eps delta (1 - delta) ln(999) with eps = delta = 1e-3
        let k = 1e-3 * 1e-3 * 0.999 * 999f64.ln();
        assert!((k - 6.8999e-6).abs() < 1e-9);
        let m = boundary_equilibrium_mass(1e-3, 1e-3).unwrap();
        assert!((m - 1.0 / (1.0 + k)).abs() < 1e-15);
        assert!((m - 0.9999931).abs() < 1e-7);
        let mut prev = 0.0;
        for delta in [1e-2, 1e-4, 1e-6, 1e-8] {
            let m = boundary_equilibrium_mass(1.0, delta).unwrap();
            assert!(m > prev);
            prev = m;
        }
        assert!(1.0 - prev < 1e-6);
    }

    #[test]
    fn sampled_profile_meets_boundary_relation() {
        let (eps, delta) = (0.05, 1e-3);
        let profile = EquilibriumProfile::new(0.3, 0.6, eps, delta).unwrap();
        let grid = GridSpec::new(delta, 400).unwrap();
        let p = sample_equilibrium(&profile, &grid).unwrap();
        assert!((p.rho()[0] - eps * 0.3).abs() < 1e-12);
        assert!((p.rho()[400] - eps * 0.6).abs() < 1e-12);
        assert!(p.as_slice().iter().all(|&v| v >= 0.0));

        let flat = EquilibriumProfile::new(0.5, 0.5, 1.0, 0.1).unwrap();
        let grid = GridSpec::new(0.1, 8).unwrap();
        let p = sample_equilibrium(&flat, &grid).unwrap();
        let min = p.rho().iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(min, p.rho()[4]);

        let other = GridSpec::new(0.2, 8).unwrap();
        assert!(matches!(sample_equilibrium(&flat, &other), Err(Error::Domain(_))));
    }

    #[test]
    fn symmetric_equilibrium_is_a_discrete_steady_state() {
        // x (1 - x) rho is constant, so the interior second differences vanish
        // and the boundary exchange balances exactly: the residual is round-off
        // at every resolution.
        for n in [500, 1000, 2000] {
            let grid = GridSpec::new(1e-3, n).unwrap();
            let profile = EquilibriumProfile::symmetric(1e-3, 1e-3).unwrap();
            let p = sample_equilibrium(&profile, &grid).unwrap();
            let op = assemble_operator(&grid, 1e-3).unwrap();
            let r = op.apply(&p).unwrap();
            let sup = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let pmax = p.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(sup <= 1e-10 * pmax, "n = {n}: residual {sup}");
        }
    }

    #[test]
    fn asymmetric_profile_carries_a_flux() {
        // With a != b the profile has a constant flux -A through the bulk, which
        // the boundary reservoirs cannot absorb while rho(delta) = eps a: the
        // residual sits in the two boundary cells and equals 2A/h there.
        let (eps, delta, n) = (0.1, 1e-2, 100);
        let grid = GridSpec::new(delta, n).unwrap();
        let profile = EquilibriumProfile::new(0.2, 0.6, eps, delta).unwrap();
        let p = sample_equilibrium(&profile, &grid).unwrap();
        let r = assemble_operator(&grid, eps).unwrap().apply(&p).unwrap();
        let expect = 2.0 * profile.slope / grid.h();
        assert!((r[1] - expect).abs() < 1e-9 * expect.abs());
        assert!((r[n + 1] + expect).abs() < 1e-9 * expect.abs());
        for (k, v) in r.iter().enumerate() {
            if k != 1 && k != n + 1 {
                assert!(v.abs() < 1e-10, "row {k}: {v}");
            }
        }
    }

    #[test]
    fn mass_closure() {
        // bulk trapezoid error is ~ h^2 eps / (6 delta); keep it below 1e-10
        let (eps, delta, n) = (1e-4, 1e-2, 4000);
        let profile = EquilibriumProfile::symmetric(eps, delta).unwrap();
        assert!((profile.a_inf + profile.b_inf + profile.bulk_mass() - 1.0).abs() < 1e-14);
        let grid = GridSpec::new(delta, n).unwrap();
        let p = sample_equilibrium(&profile, &grid).unwrap();
        let m = total_mass(&p, &grid.weights());
        assert!((m - 1.0).abs() < 1e-10, "{}", m - 1.0);
    }

    #[test]
    fn fixation_predictions() {
        let grid = GridSpec::new(1e-3, 1000).unwrap();
        let (a, b) = predicted_fixation(&InitialCondition::Uniform, &grid).unwrap();
        assert!((a - 0.5).abs() < 1e-14 && (b - 0.5).abs() < 1e-14);

        let boundary_only = InitialCondition::Custom { rho: vec![0.0; 1001], a0: 1.0, b0: 0.0 };
        assert_eq!(predicted_fixation(&boundary_only, &grid).unwrap(), (1.0, 0.0));

        let grid = GridSpec::new(1e-4, 2000).unwrap();
        let (a, b) = predicted_fixation(&InitialCondition::Gaussian { x0: 0.4, sigma: 0.1 }, &grid).unwrap();
        assert!((a + b - 1.0).abs() < 1e-14);
        assert!((b - 0.4).abs() < 1e-3, "{b}");
    }

    proptest! {
        #[test]
        fn compatibility_identity(a in 0.0..1.0f64, b in 0.0..1.0f64, eps in 1e-4..10.0f64, delta in 1e-4..0.4f64) {
            let p = EquilibriumProfile::new(a, b, eps, delta).unwrap();
            let g = delta * (1.0 - delta);
            prop_assert!((p.density(delta) - eps * a).abs() <= 1e-12 * (1.0 + eps));
            prop_assert!((p.density(1.0 - delta) - eps * b).abs() <= 1e-12 * (1.0 + eps));
            prop_assert!(((p.slope * delta + p.intercept) / g - eps * a).abs() <= 1e-12 * (1.0 + eps));
            for k in 0..=20 {
                let x = delta + (1.0 - 2.0 * delta) * k as f64 / 20.0;
                prop_assert!(p.density(x) >= -1e-15);
            }
        }

        #[test]
        fn boundary_mass_monotone(eps1 in 0.0..5.0f64, eps2 in 0.0..5.0f64, d1 in 1e-6..0.1f64, d2 in 1e-6..0.1f64) {
            let (lo, hi) = if eps1 < eps2 { (eps1, eps2) } else { (eps2, eps1) };
            prop_assert!(boundary_equilibrium_mass(hi, 0.05).unwrap() <= boundary_equilibrium_mass(lo, 0.05).unwrap());
            let (small, large) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(boundary_equilibrium_mass(1.0, small).unwrap() >= boundary_equilibrium_mass(1.0, large).unwrap());
        }
    }
}
