//! Semi-discrete generator of the regularized system.
//!
//! In the ordering `(a, rho_0, ..., rho_N, b)` the finite-volume equations are
//!
//! ```text
//! a'     = rho_0 - eps a
//! rho_0' = (2/h) (-F_{1/2} + eps a - rho_0)
//! rho_i' = (1/h) (F_{i-1/2} - F_{i+1/2})
//! rho_N' = (2/h) (F_{N-1/2} + eps b - rho_N)
//! b'     = rho_N - eps b
//! ```
//!
//! with face fluxes `F_{i+1/2} = -(g_{i+1} rho_{i+1} - g_i rho_i) / h` and
//! `g = x (1 - x)`. Every column of the matrix has zero weighted sum, which
//! is the discrete statement of mass conservation.

use crate::error::{check_len, domain};
use crate::grid::{GridSpec, StateVector};
use crate::linalg::tridiagonal_matvec;
use crate::Result;

/// Flux `(rho u)` through the face between two nodes.
pub fn face_flux(rho_left: f64, rho_right: f64, x_left: f64, x_right: f64, h: f64) -> f64 {
    -(x_right * (1.0 - x_right) * rho_right - x_left * (1.0 - x_left) * rho_left) / h
}

/// The assembled `(N + 3) x (N + 3)` generator `L_h`.
#[derive(Debug, Clone)]
pub struct TridiagonalOperator {
    lower: Vec<f64>,
    main: Vec<f64>,
    upper: Vec<f64>,
    epsilon: f64,
    grid: GridSpec,
    mobility: Vec<f64>,
}

/// Assembles `L_h` for the bulk-surface exchange rate `epsilon`.
/// `epsilon = 0` gives the purely absorbing limit system.
pub fn assemble_operator(grid: &GridSpec, epsilon: f64) -> Result<TridiagonalOperator> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(domain(format!("epsilon must be finite and nonnegative, got {epsilon}")));
    }
    let n = grid.n_cells();
    let h = grid.h();
    let g = grid.mobility();
    let len = n + 3;
    let inv_h2 = 1.0 / (h * h);
    let mut lower = vec![0.0; len - 1];
    let mut main = vec![0.0; len];
    let mut upper = vec![0.0; len - 1];

    // a row
    main[0] = -epsilon;
    upper[0] = 1.0;
    // rho_0 row
    lower[0] = 2.0 * epsilon / h;
    main[1] = -2.0 / h * (g[0] / h + 1.0);
    upper[1] = 2.0 * g[1] * inv_h2;
    // interior rows, state index k = i + 1
    for i in 1..n {
        let k = i + 1;
        lower[k - 1] = g[i - 1] * inv_h2;
        main[k] = -2.0 * g[i] * inv_h2;
        upper[k] = g[i + 1] * inv_h2;
    }
    // rho_N row
    let k = n + 1;
    lower[k - 1] = 2.0 * g[n - 1] * inv_h2;
    main[k] = -2.0 / h * (g[n] / h + 1.0);
    upper[k] = 2.0 * epsilon / h;
    // b row
    lower[k] = 1.0;
    main[k + 1] = -epsilon;

    Ok(TridiagonalOperator { lower, main, upper, epsilon, grid: grid.clone(), mobility: g })
}

impl TridiagonalOperator {
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn main(&self) -> &[f64] {
        &self.main
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.main.len()
    }

    /// `L_h p`, evaluated face by face so that the weighted sum of the result
    /// telescopes to zero up to a few ulps of the fluxes.
    pub fn apply(&self, p: &StateVector) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(p.as_slice(), &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.dim(), p.len())?;
        check_len(self.dim(), out.len())?;
        let n = self.grid.n_cells();
        let h = self.grid.h();
        let g = &self.mobility;
        let eps = self.epsilon;
        let rho = &p[1..n + 2];
        let (a, b) = (p[0], p[n + 2]);

        let exchange_left = rho[0] - eps * a;
        let exchange_right = rho[n] - eps * b;
        out[0] = exchange_left;
        out[n + 2] = exchange_right;

        let mut flux_prev = -(g[1] * rho[1] - g[0] * rho[0]) / h;
        out[1] = 2.0 / h * (-flux_prev - exchange_left);
        for i in 1..n {
            let flux_next = -(g[i + 1] * rho[i + 1] - g[i] * rho[i]) / h;
            out[i + 1] = (flux_prev - flux_next) / h;
            flux_prev = flux_next;
        }
        out[n + 1] = 2.0 / h * (flux_prev - exchange_right);
        Ok(())
    }

    /// `L_h p` through the stored diagonals.
    pub fn matvec(&self, p: &[f64]) -> Result<Vec<f64>> {
        tridiagonal_matvec(&self.lower, &self.main, &self.upper, p)
    }

    /// Dense row-major copy, for inspection and testing.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = self.main[i];
            if i + 1 < n {
                m[i][i + 1] = self.upper[i];
                m[i + 1][i] = self.lower[i];
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{init_state, weighted_inner, InitialCondition};
    use crate::Error;
    use proptest::prelude::*;

    #[test]
    fn flux_examples() {
        let h = 0.1;
        assert!(face_flux(2.0, 2.0, 0.5 - h / 2.0, 0.5 + h / 2.0, h).abs() < 1e-14);
        assert_eq!(face_flux(0.0, 0.0, 0.3, 0.4, h), 0.0);
        // -(0.24 - 0.21) / 0.1
        assert!((face_flux(1.0, 1.0, 0.3, 0.4, h) + 0.3).abs() < 1e-14);
    }

    #[test]
    fn boundary_rows() {
        let grid = GridSpec::new(0.01, 10).unwrap();
        let op = assemble_operator(&grid, 0.3).unwrap();
        let d = op.to_dense();
        assert_eq!(d[0][0], -0.3);
        assert_eq!(d[0][1], 1.0);
        assert!(d[0][2..].iter().all(|&v| v == 0.0));
        let last = op.dim() - 1;
        assert_eq!(d[last][last], -0.3);
        assert_eq!(d[last][last - 1], 1.0);

        let op0 = assemble_operator(&grid, 0.0).unwrap();
        let d0 = op0.to_dense();
        assert_eq!(d0[0][0], 0.0);
        assert_eq!(d0[0][1], 1.0);
        // only the a-row diagonal and the coupling into rho_0 depend on eps
        for i in 0..op.dim() {
            for j in 0..op.dim() {
                if (i, j) != (0, 0) && (i, j) != (last, last) && (i, j) != (1, 0) && (i, j) != (last - 1, last) {
                    assert_eq!(d[i][j], d0[i][j], "entry ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn rejects_negative_epsilon() {
        let grid = GridSpec::new(0.01, 10).unwrap();
        assert!(matches!(assemble_operator(&grid, -1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn rows_match_face_fluxes() {
        let grid = GridSpec::new(0.05, 6).unwrap();
        let eps = 0.7;
        let op = assemble_operator(&grid, eps).unwrap();
        let p = StateVector::new(0.2, &[1.0, 0.5, 2.0, 1.5, 0.3, 0.9, 1.1], 0.4);
        let x = grid.nodes();
        let h = grid.h();
        let r = p.rho();
        let f = |i: usize| face_flux(r[i], r[i + 1], x[i], x[i + 1], h);
        let mut expect = [0.0; 10];
        expect[0] = r[0] - eps * p.a();
        expect[1] = 2.0 / h * (-f(0) + eps * p.a() - r[0]);
        for i in 1..6 {
            expect[i + 1] = (f(i - 1) - f(i)) / h;
        }
        expect[7] = 2.0 / h * (f(5) + eps * p.b() - r[6]);
        expect[8] = r[6] - eps * p.b();
        let got = op.apply(&p).unwrap();
        let via_matrix = op.matvec(p.as_slice()).unwrap();
        for k in 0..9 {
            let tol = 1e-12 * (1.0 + expect[k].abs());
            assert!((got[k] - expect[k]).abs() < tol, "row {k}: {} vs {}", got[k], expect[k]);
            assert!((via_matrix[k] - expect[k]).abs() < tol, "row {k}");
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn weighted_column_sums_vanish() {
        for &(delta, n, eps) in &[(1e-3, 50, 1e-3), (0.1, 7, 2.0), (1e-4, 200, 0.0)] {
            let grid = GridSpec::new(delta, n).unwrap();
            let op = assemble_operator(&grid, eps).unwrap();
            let w = grid.weights();
            let d = op.to_dense();
            for j in 0..op.dim() {
                let s: f64 = (0..op.dim()).map(|i| w.as_slice()[i] * d[i][j]).sum();
                let scale: f64 = (0..op.dim()).map(|i| (w.as_slice()[i] * d[i][j]).abs()).sum();
                assert!(s.abs() <= 1e-13 * scale.max(1.0), "column {j}: {s}");
            }
        }
    }

    #[test]
    fn zero_state_maps_to_zero() {
        let grid = GridSpec::new(0.01, 20).unwrap();
        let op = assemble_operator(&grid, 0.1).unwrap();
        assert!(op.apply(&StateVector::zeros(20)).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let grid = GridSpec::new(0.01, 20).unwrap();
        let op = assemble_operator(&grid, 0.1).unwrap();
        assert!(matches!(op.apply(&StateVector::zeros(19)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn mass_conservation_on_random_states() {
        use rand::{Rng, SeedableRng};
        let grid = GridSpec::new(1e-3, 500).unwrap();
        let op = assemble_operator(&grid, 1e-3).unwrap();
        let w = grid.weights();
        let ones = vec![1.0; grid.state_len()];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let v: Vec<f64> = (0..grid.state_len()).map(|_| rng.random::<f64>()).collect();
            let norm1: f64 = v.iter().sum();
            let p = StateVector::from_flat(v).unwrap();
            let lp = op.apply(&p).unwrap();
            let m = weighted_inner(&lp, &ones, &w).unwrap();
            assert!(m.abs() <= 1e-12 * norm1, "{m}");
        }
    }

    #[test]
    fn uniform_state_mass_rate_is_zero() {
        let grid = GridSpec::new(1e-3, 1000).unwrap();
        let op = assemble_operator(&grid, 1e-3).unwrap();
        let p = init_state(&grid, &InitialCondition::Uniform).unwrap();
        let lp = op.apply(&p).unwrap();
        let ones = vec![1.0; grid.state_len()];
        assert!(weighted_inner(&lp, &ones, &grid.weights()).unwrap().abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn reflection_commutes_with_apply(
            half in prop::collection::vec(0.0..1.0f64, 21),
            boundary in 0.0..1.0f64,
            eps in 0.0..2.0f64,
        ) {
            // symmetric state on N = 40 cells: rho_i = rho_{N-i}, a = b
            let grid = GridSpec::new(0.02, 40).unwrap();
            let op = assemble_operator(&grid, eps).unwrap();
            let mut rho = half.clone();
            rho.extend(half[..20].iter().rev());
            let p = StateVector::new(boundary, &rho, boundary);
            let lp = op.apply(&p).unwrap();
            let lr = op.apply(&p.reflected()).unwrap();
            let scale = lp.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (x, y) in lr.iter().zip(lp.iter().rev()) {
                prop_assert!((x - y).abs() <= 1e-13 * scale);
            }
        }

        #[test]
        fn reflection_equivariance_general(
            v in prop::collection::vec(0.0..1.0f64, 33),
            eps in 0.0..2.0f64,
        ) {
            let grid = GridSpec::new(0.05, 30).unwrap();
            let op = assemble_operator(&grid, eps).unwrap();
            let p = StateVector::from_flat(v).unwrap();
            let mut lp = op.apply(&p).unwrap();
            lp.reverse();
            let lr = op.apply(&p.reflected()).unwrap();
            let scale = lp.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (x, y) in lr.iter().zip(&lp) {
                prop_assert!((x - y).abs() <= 1e-13 * scale);
            }
        }
    }
}
