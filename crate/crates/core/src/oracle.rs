//! Reference results used only to cross-check the pipeline: closed forms
//! for the homogeneous gas and a direct grid-level BdG solve.
//!
//! The direct solve builds its own Laplacian matrices and uses `nalgebra`,
//! so it shares no assembly or eigensolver code with the main path.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::CondensateState;
use crate::grid::{Boundary, Grid, LaplacianScheme};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousParams {
    /// `g N0 / V`.
    pub gn: f64,
    pub volume: f64,
    pub wavevectors: Vec<Vec<f64>>,
}

impl HomogeneousParams {
    /// Checks that every wavevector lies on the box lattice `(2π/L) ℤ`.
    pub fn validate(&self, lengths: &[f64]) -> Result<()> {
        for k in &self.wavevectors {
            if k.len() != lengths.len() {
                return Err(Error::Dimension { expected: lengths.len(), got: k.len() });
            }
            for (kk, l) in k.iter().zip(lengths) {
                let j = kk * l / (2.0 * PI);
                if (j - j.round()).abs() > 1e-9 {
                    return Err(Error::Domain(format!("k = {kk} is not commensurate with L = {l}")));
                }
            }
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.wavevectors.iter().map(|k| dispersion(k, self.gn)).collect()
    }
}

/// `ω_k = sqrt((k²/2 + gn)² - gn²)`, evaluated as `sqrt(ε(ε + 2gn))`.
pub fn dispersion(k: &[f64], gn: f64) -> f64 {
    let eps = 0.5 * k.iter().map(|x| x * x).sum::<f64>();
    (eps * (eps + 2.0 * gn)).sqrt()
}

/// `(X, Y)` amplitudes of `b_k = X a_k - Y a_{-k}†` in the homogeneous gas.
pub fn analytic_amplitudes(k: &[f64], gn: f64) -> Result<(f64, f64)> {
    let eps = 0.5 * k.iter().map(|x| x * x).sum::<f64>();
    if eps == 0.0 {
        return Err(Error::Domain("k = 0 is the zero mode and has no amplitudes".into()));
    }
    let w = dispersion(k, gn);
    let e = eps + gn;
    // ½(e/ω - 1) = ½(e - ω)/ω = ½ gn²/((e + ω) ω)
    let y2 = 0.5 * gn * gn / ((e + w) * w);
    Ok(((1.0 + y2).sqrt(), y2.sqrt()))
}

/// Zero mode of the homogeneous `k = 0` block: `P = (1, -1)`,
/// `Q = (-i/2)(1, 1)`, `μ = 1/gn`.
pub fn analytic_zero_mode(gn: f64) -> Result<([c64; 2], [c64; 2], f64)> {
    if !(gn > 0.0) {
        return Err(Error::Domain("the k = 0 block is degenerate without interaction".into()));
    }
    let half = c64::new(0.0, -0.5);
    Ok(([c64::new(1.0, 0.0), c64::new(-1.0, 0.0)], [half, half], 1.0 / gn))
}

/// `-g N0² / 2V`, the c-number term of the homogeneous Hamiltonian.
pub fn homogeneous_mean_field_constant(g: f64, n0: f64, volume: f64) -> f64 {
    -g * n0 * n0 / (2.0 * volume)
}

/// Second-derivative matrix along one axis.
fn axis_second_derivative(n: usize, length: f64, scheme: LaplacianScheme, boundary: Boundary) -> Result<DMatrix<f64>> {
    match (scheme, boundary) {
        (LaplacianScheme::Spectral, Boundary::Periodic) => {
            // differentiation matrix of the trigonometric interpolant
            let h = 2.0 * PI / n as f64;
            let scale = (2.0 * PI / length).powi(2);
            Ok(DMatrix::from_fn(n, n, |i, j| {
                let d = i.abs_diff(j);
                if d == 0 {
                    if n % 2 == 0 {
                        -scale * (PI * PI / (3.0 * h * h) + 1.0 / 6.0)
                    } else {
                        -scale * (PI * PI / (3.0 * h * h) - 1.0 / 12.0)
                    }
                } else {
                    let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                    let s = (d as f64 * h / 2.0).sin();
                    if n % 2 == 0 {
                        -scale * sign / (2.0 * s * s)
                    } else {
                        -scale * sign * (d as f64 * h / 2.0).cos() / (2.0 * s * s)
                    }
                }
            }))
        }
        (LaplacianScheme::FiniteDifference, b) => {
            let h = match b {
                Boundary::Periodic => length / n as f64,
                Boundary::HardWall => length / (n as f64 + 1.0),
            };
            let c = 1.0 / (h * h);
            Ok(DMatrix::from_fn(n, n, |i, j| {
                let d = i.abs_diff(j);
                let wrap = b == Boundary::Periodic && n > 2 && d == n - 1;
                if d == 0 {
                    -2.0 * c
                } else if d == 1 || wrap {
                    c
                } else {
                    0.0
                }
            }))
        }
        (LaplacianScheme::Spectral, Boundary::HardWall) => Err(Error::UnsupportedParameter(
            "the direct solver has no spectral hard-wall Laplacian".into(),
        )),
    }
}

/// Kronecker sum of the axis matrices, row-major node order.
fn laplacian_matrix(grid: &Grid, scheme: LaplacianScheme) -> Result<DMatrix<f64>> {
    let dims = grid.points();
    let total = grid.len();
    let mut lap = DMatrix::<f64>::zeros(total, total);
    let mut stride = total;
    for (axis, &n) in dims.iter().enumerate() {
        stride /= n;
        let d2 = axis_second_derivative(n, grid.lengths()[axis], scheme, grid.boundary())?;
        for node in 0..total {
            let i = (node / stride) % n;
            let base = node - i * stride;
            for j in 0..n {
                lap[(node, base + j * stride)] += d2[(i, j)];
            }
        }
    }
    Ok(lap)
}

/// Positive BdG frequencies of the linearized GP equation on the grid,
/// ascending, with the zero mode removed.
///
/// For real `Φ0`, `ω²` are the eigenvalues of `S^{1/2}(S + 2D)S^{1/2}` with
/// `S = -∇²/2 + V + gN0 Φ0² - μ0` and `D = gN0 Φ0²`.
pub fn direct_bdg_solve(state: &CondensateState) -> Result<Vec<f64>> {
    if state.phi0.iter().any(|p| p.im != 0.0) {
        return Err(Error::UnsupportedParameter("direct solve requires a real condensate".into()));
    }
    let grid = &state.grid;
    let n = grid.len();
    let trap = state.params.trap.values(grid)?;
    let gn = state.params.interaction();
    let mut s = laplacian_matrix(grid, state.scheme)? * -0.5;
    let pair: Vec<f64> = state.phi0.iter().map(|p| gn * p.re * p.re).collect();
    for i in 0..n {
        s[(i, i)] += trap[i] + pair[i] - state.mu0;
    }
    let s = 0.5 * (&s + s.transpose());
    let eig = SymmetricEigen::try_new(s.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge on S".into()))?;
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    let mut middle = s;
    for i in 0..n {
        middle[(i, i)] += 2.0 * pair[i];
    }
    let inner = &root * middle * &root;
    let inner = 0.5 * (&inner + inner.transpose());
    let eig = SymmetricEigen::try_new(inner, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge on ω²".into()))?;
    let mut w2: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    w2.sort_by(|a, b| a.total_cmp(b));
    Ok(w2.into_iter().skip(1).map(|x| x.max(0.0).sqrt()).collect())
}
