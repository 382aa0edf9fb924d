//! Truncated quadratic Hamiltonian in the condensate eigenbasis.
//!
//! With `δψ = Σ a_n Φn`, the fluctuation Hamiltonian reads
//! `-B00 N0/2 + Σ A_mn a_m† a_n + ½ Σ (B*_mn a_m a_n + B_mn a_m† a_n†)`, with
//!
//! ```text
//! A_mn = (μm - μ0) δmn + d_mn
//! d_mn = g N0 ∫ Φm* |Φ0|² Φn
//! B_mn = g N0 ∫ Φ0 Φ0 Φm* Φn*
//! ```
//!
//! All integrals use the grid's uniform quadrature.

use faer::{Mat, Side};
use num_complex::Complex64 as c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::BasisSet;
use crate::bogoliubov::SymplecticSpectrum;
use crate::error::{Error, Result};
use crate::gp::CondensateState;

/// Largest tolerated pre-symmetrization asymmetry, relative to the largest entry.
pub const ASYMMETRY_LIMIT: f64 = 1e-8;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AssemblyDiagnostics {
    /// `max |d - d†|` before symmetrization.
    pub a_asymmetry: f64,
    /// `max |B - Bᵀ|` before symmetrization.
    pub b_asymmetry: f64,
    /// `max_m |A_m0 - B_m0|`; vanishes when basis function 0 is the
    /// condensate and `μ_{n=0} = μ0`, which makes `(e0, -e0)` a zero mode.
    pub zero_mode_consistency: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub basis: String,
    pub state: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    pub a: Mat<c64>,
    pub b: Mat<c64>,
    pub d: Mat<c64>,
    pub b00: f64,
    /// `-B00 N0 / 2`.
    pub constant_term: f64,
    pub trace_a: f64,
    pub g: f64,
    pub n0: f64,
    pub diagnostics: AssemblyDiagnostics,
    pub provenance: Provenance,
}

/// SHA-256 over little-endian f64 bytes.
pub fn fingerprint(values: impl IntoIterator<Item = f64>) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn state_fingerprint(state: &CondensateState) -> String {
    fingerprint(
        state
            .phi0
            .iter()
            .flat_map(|z| [z.re, z.im])
            .chain([state.mu0, state.params.g, state.params.n0]),
    )
}

fn basis_fingerprint(basis: &BasisSet) -> String {
    fingerprint(
        basis.mu.iter().copied().chain(basis.functions.iter().flatten().flat_map(|z| [z.re, z.im])),
    )
}

fn max_entry(m: &Mat<c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

/// `max |m - op(m)|` where `op` is the conjugate transpose or the transpose.
fn asymmetry(m: &Mat<c64>, conjugate: bool) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let t = if conjugate { m[(j, i)].conj() } else { m[(j, i)] };
            worst = worst.max((m[(i, j)] - t).norm());
        }
    }
    worst
}

fn symmetrize(m: &Mat<c64>, conjugate: bool) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let t = if conjugate { m[(j, i)].conj() } else { m[(j, i)] };
        0.5 * (m[(i, j)] + t)
    })
}

/// Assembles `A`, `B` and `d` from a basis built on `state`.
pub fn assemble(basis: &BasisSet, state: &CondensateState) -> Result<QuadraticForm> {
    if basis.grid != state.grid {
        return Err(Error::Config("basis and condensate live on different grids".into()));
    }
    let f = basis.len();
    if f == 0 {
        return Err(Error::Config("empty basis".into()));
    }
    let gn = state.params.interaction();
    let w = state.grid.weight();
    let density: Vec<f64> = state.phi0.iter().map(|p| p.norm_sqr()).collect();
    let pair: Vec<c64> = state.phi0.iter().map(|p| p * p).collect();
    let funcs = &basis.functions;

    // one row per task; every entry is a sequential node sum, so the result
    // does not depend on the thread count
    let rows: Vec<(Vec<c64>, Vec<c64>)> = (0..f)
        .into_par_iter()
        .map(|m| {
            let fm = &funcs[m];
            let mut drow = Vec::with_capacity(f);
            let mut brow = Vec::with_capacity(f);
            for fnn in funcs.iter() {
                let mut ds = c64::new(0.0, 0.0);
                let mut bs = c64::new(0.0, 0.0);
                for i in 0..fm.len() {
                    let cm = fm[i].conj();
                    ds += cm * density[i] * fnn[i];
                    bs += pair[i] * cm * fnn[i].conj();
                }
                drow.push(ds * (gn * w));
                brow.push(bs * (gn * w));
            }
            (drow, brow)
        })
        .collect();
    let d_raw = Mat::from_fn(f, f, |m, n| rows[m].0[n]);
    let b_raw = Mat::from_fn(f, f, |m, n| rows[m].1[n]);

    let scale = max_entry(&d_raw).max(max_entry(&b_raw)).max(1.0);
    let a_asym = asymmetry(&d_raw, true);
    let b_asym = asymmetry(&b_raw, false);
    if a_asym > ASYMMETRY_LIMIT * scale || b_asym > ASYMMETRY_LIMIT * scale {
        return Err(Error::Numerical(format!(
            "assembled matrices not symmetric (A: {a_asym:.3e}, B: {b_asym:.3e}); \
             unconverged condensate or inconsistent quadrature"
        )));
    }
    let d = symmetrize(&d_raw, true);
    let b = symmetrize(&b_raw, false);
    let a = Mat::from_fn(f, f, |m, n| {
        let diag = if m == n { basis.mu[m] - state.mu0 } else { 0.0 };
        d[(m, n)] + diag
    });
    let zero_mode_consistency = (0..f).map(|m| (a[(m, 0)] - b[(m, 0)]).norm()).fold(0.0, f64::max);
    let b00 = b[(0, 0)].re;
    Ok(QuadraticForm {
        trace_a: (0..f).map(|i| a[(i, i)].re).sum(),
        constant_term: -0.5 * b00 * state.params.n0,
        b00,
        a,
        b,
        d,
        g: state.params.g,
        n0: state.params.n0,
        diagnostics: AssemblyDiagnostics { a_asymmetry: a_asym, b_asymmetry: b_asym, zero_mode_consistency },
        provenance: Provenance { basis: basis_fingerprint(basis), state: state_fingerprint(state) },
    })
}

impl QuadraticForm {
    /// Builds a form from explicit matrices (`A` Hermitian, `B` symmetric);
    /// `d` is taken equal to `A`.
    pub fn from_matrices(a: Mat<c64>, b: Mat<c64>, g: f64, n0: f64) -> Result<Self> {
        let f = a.nrows();
        if a.ncols() != f || b.nrows() != f || b.ncols() != f || f == 0 {
            return Err(Error::Dimension { expected: f, got: b.nrows() });
        }
        let scale = max_entry(&a).max(max_entry(&b)).max(1.0);
        let a_asym = asymmetry(&a, true);
        let b_asym = asymmetry(&b, false);
        if a_asym > ASYMMETRY_LIMIT * scale || b_asym > ASYMMETRY_LIMIT * scale {
            return Err(Error::Numerical(format!(
                "A must be Hermitian and B symmetric (deviations {a_asym:.3e}, {b_asym:.3e})"
            )));
        }
        let a = symmetrize(&a, true);
        let b = symmetrize(&b, false);
        let b00 = b[(0, 0)].re;
        let entries = |m: &Mat<c64>| -> Vec<f64> {
            (0..f).flat_map(|i| (0..f).map(move |j| (i, j))).flat_map(|(i, j)| [m[(i, j)].re, m[(i, j)].im]).collect()
        };
        let provenance =
            Provenance { basis: fingerprint(entries(&a)), state: fingerprint(entries(&b)) };
        Ok(QuadraticForm {
            trace_a: (0..f).map(|i| a[(i, i)].re).sum(),
            constant_term: -0.5 * b00 * n0,
            b00,
            d: a.clone(),
            a,
            b,
            g,
            n0,
            diagnostics: AssemblyDiagnostics { a_asymmetry: a_asym, b_asymmetry: b_asym, zero_mode_consistency: 0.0 },
            provenance,
        })
    }

    pub fn f(&self) -> usize {
        self.a.nrows()
    }

    /// True when `A` and `B` have no imaginary part.
    pub fn is_real(&self) -> bool {
        let f = self.f();
        (0..f).all(|i| (0..f).all(|j| self.a[(i, j)].im == 0.0 && self.b[(i, j)].im == 0.0))
    }
}

/// `M = [[A, B], [B*, A*]]` with metric `η = diag(1_f, -1_f)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BdgMatrix {
    pub m: Mat<c64>,
    /// Diagonal of `η`.
    pub eta: Vec<f64>,
}

pub fn build_m(q: &QuadraticForm) -> BdgMatrix {
    let f = q.f();
    let m = Mat::from_fn(2 * f, 2 * f, |i, j| match (i < f, j < f) {
        (true, true) => q.a[(i, j)],
        (true, false) => q.b[(i, j - f)],
        (false, true) => q.b[(i - f, j)].conj(),
        (false, false) => q.a[(i - f, j - f)].conj(),
    });
    let eta = (0..2 * f).map(|i| if i < f { 1.0 } else { -1.0 }).collect();
    BdgMatrix { m, eta }
}

impl BdgMatrix {
    pub fn f(&self) -> usize {
        self.eta.len() / 2
    }

    pub fn eta_dense(&self) -> Mat<c64> {
        let n = self.eta.len();
        Mat::from_fn(n, n, |i, j| if i == j { c64::new(self.eta[i], 0.0) } else { c64::new(0.0, 0.0) })
    }

    /// `η M`.
    pub fn eta_m(&self) -> Mat<c64> {
        let n = self.eta.len();
        Mat::from_fn(n, n, |i, j| self.m[(i, j)] * self.eta[i])
    }

    /// `η v`.
    pub fn eta_apply(&self, v: &[c64]) -> Vec<c64> {
        v.iter().zip(&self.eta).map(|(x, e)| x * e).collect()
    }

    /// `M v`.
    pub fn m_apply(&self, v: &[c64]) -> Vec<c64> {
        let n = self.eta.len();
        (0..n).map(|i| (0..n).map(|j| self.m[(i, j)] * v[j]).sum()).collect()
    }

    /// `η M v`.
    pub fn eta_m_apply(&self, v: &[c64]) -> Vec<c64> {
        self.eta_apply(&self.m_apply(v))
    }

    /// `u† η v`.
    pub fn eta_inner(&self, u: &[c64], v: &[c64]) -> c64 {
        u.iter().zip(v).zip(&self.eta).map(|((a, b), e)| a.conj() * b * *e).sum()
    }

    /// `max |M - M†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        asymmetry(&self.m, true)
    }

    /// Spectral norm of the Hermitian `M`.
    pub fn norm(&self) -> Result<f64> {
        let evd = self
            .m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed: {e:?}")))?;
        Ok(evd.S().column_vector().iter().fold(0.0f64, |acc, x| acc.max(x.re.abs())))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyConstants {
    /// `-B00 N0 / 2`.
    pub mean_field: f64,
    /// `½ Σ_{n≥1} ωn - ½ tr A` at the given truncation.
    pub zero_point: f64,
}

pub fn ground_energy_constants(q: &QuadraticForm, spectrum: &SymplecticSpectrum) -> EnergyConstants {
    EnergyConstants {
        mean_field: q.constant_term,
        zero_point: 0.5 * spectrum.omega.iter().sum::<f64>() - 0.5 * q.trace_a,
    }
}

/// Row-major numeric export of a [`QuadraticForm`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFormRecord {
    pub version: u32,
    pub f: usize,
    pub g: f64,
    pub n0: f64,
    pub b00: f64,
    pub constant_term: f64,
    pub trace_a: f64,
    pub a_re: Vec<f64>,
    pub a_im: Vec<f64>,
    pub b_re: Vec<f64>,
    pub b_im: Vec<f64>,
    pub d_re: Vec<f64>,
    pub d_im: Vec<f64>,
    pub diagnostics: AssemblyDiagnostics,
    pub provenance: Provenance,
}

fn split(m: &Mat<c64>) -> (Vec<f64>, Vec<f64>) {
    let mut re = Vec::with_capacity(m.nrows() * m.ncols());
    let mut im = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            re.push(m[(i, j)].re);
            im.push(m[(i, j)].im);
        }
    }
    (re, im)
}

fn join(f: usize, re: &[f64], im: &[f64]) -> Result<Mat<c64>> {
    if re.len() != f * f || im.len() != f * f {
        return Err(Error::Format(format!("matrix arrays must hold {} entries", f * f)));
    }
    Ok(Mat::from_fn(f, f, |i, j| c64::new(re[i * f + j], im[i * f + j])))
}

pub const RECORD_VERSION: u32 = 1;

impl From<&QuadraticForm> for QuadraticFormRecord {
    fn from(q: &QuadraticForm) -> Self {
        let (a_re, a_im) = split(&q.a);
        let (b_re, b_im) = split(&q.b);
        let (d_re, d_im) = split(&q.d);
        QuadraticFormRecord {
            version: RECORD_VERSION,
            f: q.f(),
            g: q.g,
            n0: q.n0,
            b00: q.b00,
            constant_term: q.constant_term,
            trace_a: q.trace_a,
            a_re,
            a_im,
            b_re,
            b_im,
            d_re,
            d_im,
            diagnostics: q.diagnostics.clone(),
            provenance: q.provenance.clone(),
        }
    }
}

impl TryFrom<QuadraticFormRecord> for QuadraticForm {
    type Error = Error;

    fn try_from(r: QuadraticFormRecord) -> Result<Self> {
        if r.version != RECORD_VERSION {
            return Err(Error::Format(format!("unsupported quadratic-form version {}", r.version)));
        }
        Ok(QuadraticForm {
            a: join(r.f, &r.a_re, &r.a_im)?,
            b: join(r.f, &r.b_re, &r.b_im)?,
            d: join(r.f, &r.d_re, &r.d_im)?,
            b00: r.b00,
            constant_term: r.constant_term,
            trace_a: r.trace_a,
            g: r.g,
            n0: r.n0,
            diagnostics: r.diagnostics,
            provenance: r.provenance,
        })
    }
}

impl QuadraticForm {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&QuadraticFormRecord::from(self)).expect("plain numeric record")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: QuadraticFormRecord =
            serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        QuadraticForm::try_from(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_effective_hamiltonian, solve_basis, BasisOptions};
    use crate::gp::{solve_ground_state, PhysicalParams, SolverOptions};
    use crate::grid::{Grid, LaplacianScheme, TrapPotential};
    use proptest::prelude::*;

    fn setup(g_n0: f64, trap: TrapPotential, n: usize, length: f64, f: usize) -> (BasisSet, CondensateState) {
        let grid = Grid::periodic_1d(n, length).unwrap();
        let p = PhysicalParams::new(g_n0, 1.0, trap).unwrap();
        let s = solve_ground_state(&p, &grid, LaplacianScheme::Spectral, &SolverOptions::default()).unwrap();
        let h = build_effective_hamiltonian(&s).unwrap();
        (solve_basis(&h, f, &BasisOptions::default()).unwrap(), s)
    }

    #[test]
    fn homogeneous_structure() {
        let length = 5.0;
        let gn = 1.3;
        let (basis, s) = setup(gn * length, TrapPotential::Zero, 32, length, 7);
        let q = assemble(&basis, &s).unwrap();
        let ks = basis.wavevectors.as_ref().unwrap();
        for m in 0..7 {
            for n in 0..7 {
                let opposite = (ks[m][0] + ks[n][0]).abs() < 1e-9;
                let b = if opposite { gn } else { 0.0 };
                let d = if m == n { gn } else { 0.0 };
                assert!((q.b[(m, n)] - b).norm() < 1e-12, "B[{m},{n}] = {}", q.b[(m, n)]);
                assert!((q.d[(m, n)] - d).norm() < 1e-12);
            }
            let k = ks[m][0];
            assert!((q.a[(m, m)].re - (0.5 * k * k + gn)).abs() < 1e-11);
        }
        assert!(q.diagnostics.zero_mode_consistency < 1e-12);
        assert!((q.constant_term + 0.5 * gn).abs() < 1e-12);
        let bdg = build_m(&q);
        assert_eq!(bdg.hermiticity_defect(), 0.0);
        let em = bdg.eta_m();
        // k = 0 block of ηM is gn [[1, 1], [-1, -1]]
        for (i, j, v) in [(0, 0, gn), (0, 7, gn), (7, 0, -gn), (7, 7, -gn)] {
            assert!((em[(i, j)] - v).norm() < 1e-12);
        }
    }

    #[test]
    fn non_interacting_form_is_diagonal() {
        let (basis, s) = setup(0.0, TrapPotential::Harmonic { frequencies: vec![1.0] }, 64, 16.0, 5);
        let q = assemble(&basis, &s).unwrap();
        for m in 0..5 {
            for n in 0..5 {
                assert_eq!(q.b[(m, n)], c64::new(0.0, 0.0));
                assert_eq!(q.d[(m, n)], c64::new(0.0, 0.0));
            }
            assert!((q.a[(m, m)].re - m as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn pairing_matrix_matches_quadrature() {
        let (basis, s) = setup(8.0, TrapPotential::Harmonic { frequencies: vec![1.0] }, 64, 16.0, 6);
        let q = assemble(&basis, &s).unwrap();
        let gn = s.params.interaction();
        let pair: Vec<c64> = s.phi0.iter().map(|p| p * p).collect();
        for m in 0..6 {
            for n in 0..6 {
                let prod: Vec<c64> =
                    basis.functions[m].iter().zip(&basis.functions[n]).map(|(a, b)| a * b).collect();
                // ⟨Φm Φn, Φ0²⟩ = Σ w conj(Φm Φn) Φ0²
                let expect = gn * s.grid.inner_product(&prod, &pair).unwrap();
                assert!((q.b[(m, n)] - expect).norm() < 1e-12);
            }
        }
        assert!(q.is_real());
        assert!(q.diagnostics.zero_mode_consistency < 1e-8);
        assert!(q.diagnostics.a_asymmetry < 1e-12 && q.diagnostics.b_asymmetry < 1e-12);
    }

    #[test]
    fn different_grids_rejected() {
        let (basis, _) = setup(1.0, TrapPotential::Zero, 16, 4.0, 3);
        let (_, other) = setup(1.0, TrapPotential::Zero, 16, 5.0, 3);
        assert!(matches!(assemble(&basis, &other), Err(Error::Config(_))));
    }

    #[test]
    fn from_matrices_rejects_non_hermitian() {
        let a = Mat::from_fn(2, 2, |i, j| c64::new((i + 2 * j) as f64, 0.0));
        let b = Mat::<c64>::zeros(2, 2);
        assert!(matches!(QuadraticForm::from_matrices(a, b, 1.0, 1.0), Err(Error::Numerical(_))));
    }

    #[test]
    fn record_version_checked() {
        let q = QuadraticForm::from_matrices(Mat::identity(1, 1), Mat::zeros(1, 1), 1.0, 1.0).unwrap();
        let mut rec = QuadraticFormRecord::from(&q);
        rec.version = 99;
        assert!(matches!(QuadraticForm::try_from(rec), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn json_round_trip_is_exact(f in 1usize..5, seed in prop::collection::vec(-1e3f64..1e3, 50)) {
            let a = Mat::from_fn(f, f, |i, j| {
                let (lo, hi) = (i.min(j), i.max(j));
                let z = c64::new(seed[lo * 5 + hi], if i == j { 0.0 } else { seed[25 + lo * 5 + hi] });
                if i <= j { z } else { z.conj() }
            });
            let b = Mat::from_fn(f, f, |i, j| c64::new(seed[i.min(j) * 5 + i.max(j)] / 3.0, seed[49] * 1e-7));
            let q = QuadraticForm::from_matrices(a, b, 0.1, 1e4).unwrap();
            let back = QuadraticForm::from_json(&q.to_json()).unwrap();
            prop_assert_eq!(back, q);
        }
    }
}
