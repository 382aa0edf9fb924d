//! Stationary Gross-Pitaevskii ground state by normalized gradient flow.
//!
//! Each step treats the Laplacian and a constant stabilization shift
//! implicitly (solved in the Laplacian eigenbasis) and the trap plus
//! mean-field potential explicitly, then renormalizes.

use std::f64::consts::PI;

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_laplacian, Grid, Laplacian, LaplacianScheme, LinearOperator, TrapPotential};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Contact coupling in ħ = M = 1 units.
    pub g: f64,
    /// Condensate atom number.
    pub n0: f64,
    pub trap: TrapPotential,
}

impl PhysicalParams {
    pub fn new(g: f64, n0: f64, trap: TrapPotential) -> Result<Self> {
        let p = PhysicalParams { g, n0, trap };
        p.validate()?;
        Ok(p)
    }

    /// `g = 4π a_s` (ħ = M = 1).
    pub fn from_scattering_length(a_s: f64, n0: f64, trap: TrapPotential) -> Result<Self> {
        Self::new(4.0 * PI * a_s, n0, trap)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.g.is_finite() || self.g < 0.0 {
            return Err(Error::UnsupportedParameter(format!(
                "coupling g = {} (only g >= 0 is supported)",
                self.g
            )));
        }
        if !(self.n0.is_finite() && self.n0 > 0.0) {
            return Err(Error::Config(format!("atom number N0 = {} must be positive", self.n0)));
        }
        Ok(())
    }

    /// `g N0`, the strength of the mean-field potential.
    pub fn interaction(&self) -> f64 {
        self.g * self.n0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub time_step: f64,
    pub max_iterations: usize,
    /// Target for the GP residual norm.
    pub tolerance: f64,
    /// Residual is evaluated every this many steps.
    pub check_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { time_step: 1.0, max_iterations: 1_000_000, tolerance: 1e-10, check_every: 10 }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_step > 0.0 && self.tolerance > 0.0) || self.check_every == 0 {
            return Err(Error::Config(
                "solver time_step, tolerance and check_every must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Converged condensate `Φ0` (unit norm, real, positive bulk) and `μ0`.
#[derive(Clone, Debug, PartialEq)]
pub struct CondensateState {
    pub grid: Grid,
    pub scheme: LaplacianScheme,
    pub params: PhysicalParams,
    pub phi0: Vec<c64>,
    pub mu0: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Pieces of `H0 + g N0 |φ|²` evaluated once per call.
struct GpOperator {
    laplacian: Laplacian,
    trap: Vec<f64>,
    interaction: f64,
}

impl GpOperator {
    fn new(params: &PhysicalParams, grid: &Grid, scheme: LaplacianScheme) -> Result<Self> {
        Ok(GpOperator {
            laplacian: build_laplacian(grid, scheme)?,
            trap: params.trap.values(grid)?,
            interaction: params.interaction(),
        })
    }

    fn grid(&self) -> &Grid {
        self.laplacian.grid()
    }

    /// Returns `(H0 φ, g N0 |φ|² φ)`.
    fn split_apply(&self, phi: &[c64]) -> (Vec<c64>, Vec<c64>) {
        let lap = self.laplacian.apply(phi);
        let h0 = lap.iter().zip(phi).zip(&self.trap).map(|((l, p), v)| -0.5 * l + v * p).collect();
        let nl = phi.iter().map(|p| self.interaction * p.norm_sqr() * p).collect();
        (h0, nl)
    }

    /// `(μ, residual, energy)` for a normalized `φ`.
    fn evaluate(&self, phi: &[c64]) -> (f64, f64, f64) {
        let grid = self.grid();
        let (h0, nl) = self.split_apply(phi);
        let e0 = grid.inner_product(phi, &h0).expect("same grid").re;
        let en = grid.inner_product(phi, &nl).expect("same grid").re;
        let mu = e0 + en;
        let r: Vec<c64> = h0.iter().zip(&nl).zip(phi).map(|((a, b), p)| a + b - mu * p).collect();
        (mu, grid.norm(&r), e0 + 0.5 * en)
    }
}

/// Initial guess: Thomas-Fermi profile, or the non-interacting ground state
/// (Gaussian for harmonic traps, uniform otherwise) when `g N0` is small.
fn initial_guess(params: &PhysicalParams, grid: &Grid, trap: &[f64]) -> Vec<c64> {
    let gn = params.interaction();
    let w = grid.weight();
    let zero_point = params.trap.zero_point_energy(grid.dimension());
    let mut phi: Option<Vec<c64>> = None;
    if gn > 0.0 {
        let mass = |mu: f64| trap.iter().map(|v| (mu - v).max(0.0)).sum::<f64>() * w / gn;
        let vmin = trap.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut lo = vmin;
        let mut hi = vmin + 1.0;
        while mass(hi) < 1.0 {
            hi = vmin + 2.0 * (hi - vmin);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mu_tf = hi;
        if mu_tf - vmin > 2.0 * zero_point {
            phi = Some(trap.iter().map(|v| c64::new(((mu_tf - v).max(0.0) / gn).sqrt(), 0.0)).collect());
        }
    }
    let mut phi = phi.unwrap_or_else(|| match &params.trap {
        TrapPotential::Harmonic { .. } => {
            trap.iter().map(|v| c64::new((-v.max(0.0)).exp(), 0.0)).collect()
        }
        _ => vec![c64::new(1.0, 0.0); grid.len()],
    });
    grid.normalize(&mut phi);
    phi
}

/// Normalized gradient flow, exposed step by step for diagnostics.
pub struct GradientFlow {
    op: GpOperator,
    params: PhysicalParams,
    scheme: LaplacianScheme,
    opts: SolverOptions,
    phi: Vec<c64>,
    shift: f64,
    iterations: usize,
}

impl GradientFlow {
    pub fn new(
        params: &PhysicalParams,
        grid: &Grid,
        scheme: LaplacianScheme,
        opts: &SolverOptions,
    ) -> Result<Self> {
        params.validate()?;
        opts.validate()?;
        let op = GpOperator::new(params, grid, scheme)?;
        let phi = initial_guess(params, grid, &op.trap);
        let pot: Vec<f64> =
            op.trap.iter().zip(&phi).map(|(v, p)| v + op.interaction * p.norm_sqr()).collect();
        let pmax = pot.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let pmin = pot.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(GradientFlow {
            op,
            params: params.clone(),
            scheme,
            opts: opts.clone(),
            phi,
            shift: 0.5 * (pmax + pmin),
            iterations: 0,
        })
    }

    pub fn wavefunction(&self) -> &[c64] {
        &self.phi
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `E[φ] = ⟨φ|H0|φ⟩ + ½ g N0 ∫|φ|⁴`.
    pub fn energy(&self) -> f64 {
        self.op.evaluate(&self.phi).2
    }

    pub fn residual(&self) -> f64 {
        self.op.evaluate(&self.phi).1
    }

    /// One step of the flow driven by `H - μn`, with `μn = ⟨φ|H|φ⟩`. Without
    /// the `μn` shift the normalized fixed point solves `(sK + U)φ ∝ φ` with
    /// `s ≠ 1` at finite `dt`, which is not the GP equation.
    pub fn step(&mut self) {
        let dt = self.opts.time_step;
        let mu = self.op.evaluate(&self.phi).0;
        // the explicit factor 1/dt + α + μn - V - gN|φ|² must stay positive,
        // otherwise components near the trap edge alternate sign and stall
        let pmax = self
            .phi
            .iter()
            .zip(&self.op.trap)
            .map(|(p, v)| v + self.op.interaction * p.norm_sqr())
            .fold(f64::NEG_INFINITY, f64::max);
        let a = if 1.0 / dt + self.shift + mu - pmax > 0.0 { self.shift } else { pmax - mu };
        let rhs: Vec<c64> = self
            .phi
            .iter()
            .zip(&self.op.trap)
            .map(|(p, v)| p / dt + (a + mu - v - self.op.interaction * p.norm_sqr()) * p)
            .collect();
        // (1/dt + α - ∇²/2)⁻¹
        self.phi = self.op.laplacian.apply_function(&rhs, |l| 1.0 / (1.0 / dt + a - 0.5 * l));
        self.op.grid().normalize(&mut self.phi);
        self.iterations += 1;
    }

    /// Iterates until the residual drops below tolerance.
    pub fn run(mut self) -> Result<CondensateState> {
        let mut residual = self.residual();
        while residual > self.opts.tolerance {
            if self.iterations >= self.opts.max_iterations {
                return Err(Error::Convergence { iterations: self.iterations, residual });
            }
            let n = self.opts.check_every.min(self.opts.max_iterations - self.iterations);
            for _ in 0..n {
                self.step();
            }
            residual = self.residual();
            if !residual.is_finite() {
                return Err(Error::Convergence { iterations: self.iterations, residual });
            }
        }
        let state = self.finish()?;
        if state.residual > self.opts.tolerance {
            return Err(Error::Convergence { iterations: state.iterations, residual: state.residual });
        }
        Ok(state)
    }

    /// Fixes the global phase so that `Φ0` is real with positive bulk. The
    /// spectral Laplacian is not an M-matrix, so the discrete ground state
    /// may carry tiny negative tails; they are kept, not clipped.
    fn finish(&self) -> Result<CondensateState> {
        let total: c64 = self.phi.iter().sum();
        let rot = if total.norm() > 0.0 { total.conj() / total.norm() } else { c64::new(1.0, 0.0) };
        let phi: Vec<c64> = self.phi.iter().map(|p| c64::new((p * rot).re, 0.0)).collect();
        CondensateState::from_wavefunction(
            self.params.clone(),
            self.op.grid().clone(),
            self.scheme,
            phi,
            self.iterations,
        )
    }
}

/// Solves the stationary GP equation for the ground state.
pub fn solve_ground_state(
    params: &PhysicalParams,
    grid: &Grid,
    scheme: LaplacianScheme,
    opts: &SolverOptions,
) -> Result<CondensateState> {
    GradientFlow::new(params, grid, scheme, opts)?.run()
}

impl CondensateState {
    /// Builds a state from a given wavefunction (normalized here), computing
    /// `μ0` as the GP expectation value and the residual.
    pub fn from_wavefunction(
        params: PhysicalParams,
        grid: Grid,
        scheme: LaplacianScheme,
        mut phi0: Vec<c64>,
        iterations: usize,
    ) -> Result<Self> {
        params.validate()?;
        if phi0.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), got: phi0.len() });
        }
        if grid.normalize(&mut phi0) == 0.0 {
            return Err(Error::Domain("zero wavefunction".into()));
        }
        let op = GpOperator::new(&params, &grid, scheme)?;
        let (mu0, residual, _) = op.evaluate(&phi0);
        Ok(CondensateState { grid, scheme, params, phi0, mu0, residual, iterations })
    }

    pub fn laplacian(&self) -> Laplacian {
        build_laplacian(&self.grid, self.scheme).expect("state built with a valid scheme")
    }

    /// `E[Φ0]`.
    pub fn energy(&self) -> f64 {
        let op = GpOperator::new(&self.params, &self.grid, self.scheme).expect("validated state");
        op.evaluate(&self.phi0).2
    }

    /// Real, with no sign change above `1e-8` of the peak amplitude.
    pub fn is_nodeless(&self) -> bool {
        let peak = self.phi0.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let cut = 1e-8 * peak;
        peak > 0.0
            && self.phi0.iter().all(|p| p.im == 0.0)
            && (self.phi0.iter().all(|p| p.re >= -cut) || self.phi0.iter().all(|p| p.re <= cut))
    }
}

/// `‖(-∇²/2 + V + g N0 |Φ0|² - μ0) Φ0‖` with the state's stored `μ0`.
pub fn gp_residual(state: &CondensateState) -> f64 {
    let op = GpOperator::new(&state.params, &state.grid, state.scheme).expect("validated state");
    let (h0, nl) = op.split_apply(&state.phi0);
    let r: Vec<c64> =
        h0.iter().zip(&nl).zip(&state.phi0).map(|((a, b), p)| a + b - state.mu0 * p).collect();
    state.grid.norm(&r)
}
