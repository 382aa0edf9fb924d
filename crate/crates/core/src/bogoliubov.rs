//! Diagonalization of `ηM`, the canonical transformation, and the zero mode.
//!
//! Eigenvectors `V = (X; Y)` of `ηM V = ω V` split into a `+ω` family with
//! `V†ηV = +1`, its `-ω` conjugate partners `(Y*; X*)` with norm `-1`, a zero
//! cluster holding the Goldstone pair, and complex (unstable) eigenvalues.
//! The quasiparticle operators are `b_n = Σ_i X^n_i* a_i - Y^n_i* a_i†`.
//!
//! The zero mode `P` satisfies `ηMP = 0` with `P†ηP = 0`, so it cannot be
//! normalized like the proper modes. Its conjugate `Q` and the collective
//! mass `μ` are fixed by `ηMQ = -iP/μ` and `Q†ηP = i`.

use faer::{Mat, Side};
use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadform::BdgMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumOptions {
    /// Zero-cluster threshold, relative to `‖M‖`.
    pub zero_tol_rel: f64,
    /// Frequencies closer than this (relative to `‖M‖`) are degenerate.
    pub degeneracy_tol_rel: f64,
    /// Largest tolerated off-pattern weight of `P` before a warning.
    pub pattern_tol: f64,
    /// Largest tolerated `max |TηT†η - 1|` on the proper-mode block.
    pub canonical_tol: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            zero_tol_rel: 1e-7,
            degeneracy_tol_rel: 1e-9,
            pattern_tol: 1e-6,
            canonical_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticSpectrum {
    /// Proper-mode frequencies, ascending.
    pub omega: Vec<f64>,
    /// `f × modes`; column `n` is `X^n`.
    pub x: Mat<c64>,
    /// `f × modes`; column `n` is `Y^n`.
    pub y: Mat<c64>,
    /// `V^n†ηV^n` of every retained mode.
    pub eta_norms: Vec<f64>,
    /// No eigenvalue with `|Im λ|` above the zero tolerance.
    pub stable: bool,
    pub unstable_modes: Vec<c64>,
    /// Eigenvalues with `|λ| <= zero_tol`, or the split Jordan pair when
    /// `M` is singular.
    pub zero_cluster: Vec<c64>,
    /// Eigenvalues of the `-ω` family, ascending.
    pub negative_family: Vec<f64>,
    pub norm_m: f64,
    pub zero_tol: f64,
    /// Smallest `|λ|` over all eigenvalues.
    pub smallest_magnitude: f64,
    /// `max_n ‖ηMV^n - ωn V^n‖`.
    pub max_residual: f64,
    /// `max_n min_j |λ_j + ωn|` over the `-ω` family.
    pub pairing_defect: f64,
}

impl SymplecticSpectrum {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn f(&self) -> usize {
        self.x.nrows()
    }

    /// `V^n = (X^n; Y^n)`.
    pub fn mode(&self, n: usize) -> Vec<c64> {
        let f = self.f();
        (0..2 * f).map(|i| if i < f { self.x[(i, n)] } else { self.y[(i - f, n)] }).collect()
    }

    /// Conjugate partner `(Y^n*; X^n*)` with eigenvalue `-ωn`.
    pub fn partner(&self, n: usize) -> Vec<c64> {
        let f = self.f();
        (0..2 * f)
            .map(|i| if i < f { self.y[(i, n)].conj() } else { self.x[(i - f, n)].conj() })
            .collect()
    }

    /// `max |V^m†ηV^n - δmn|` over the `+ω` family.
    pub fn eta_orthonormality_defect(&self) -> f64 {
        let modes: Vec<Vec<c64>> = (0..self.len()).map(|n| self.mode(n)).collect();
        let f = self.f();
        let mut worst = 0.0f64;
        for (m, vm) in modes.iter().enumerate() {
            for (n, vn) in modes.iter().enumerate() {
                let s: c64 = vm
                    .iter()
                    .zip(vn)
                    .enumerate()
                    .map(|(i, (a, b))| if i < f { a.conj() * b } else { -a.conj() * b })
                    .sum();
                let target = if m == n { 1.0 } else { 0.0 };
                worst = worst.max((s - target).norm());
            }
        }
        worst
    }
}

fn euclid(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Multiplies `v` by a phase making its largest component real positive.
/// Near-ties go to the lowest index.
fn fix_phase(v: &mut [c64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|z| z.norm() >= max * (1.0 - 1e-10)).unwrap_or(0);
    let rot = v[pivot].conj() / v[pivot].norm();
    v.iter_mut().for_each(|z| *z *= rot);
}

fn smallest_hermitian(bdg: &BdgMatrix) -> Result<f64> {
    let evd = bdg
        .m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver failed on M: {e:?}")))?;
    let s = evd.S().column_vector();
    Ok((0..s.nrows()).map(|i| s[i].re.abs()).fold(f64::INFINITY, f64::min))
}

/// Full eigen-decomposition of `ηM` with classification of the spectrum.
pub fn diagonalize(bdg: &BdgMatrix, opts: &SpectrumOptions) -> Result<SymplecticSpectrum> {
    let f = bdg.f();
    let dim = 2 * f;
    let norm_m = bdg.norm()?;
    let zero_tol = opts.zero_tol_rel * norm_m;
    let evd = bdg
        .eta_m()
        .eigen()
        .map_err(|e| Error::Numerical(format!("eigensolver failed on ηM: {e:?}")))?;
    let values = evd.S().column_vector();
    let vectors = evd.U();

    let mut zero_cluster = Vec::new();
    let mut unstable = Vec::new();
    let mut plus: Vec<(f64, Vec<c64>)> = Vec::new();
    let mut minus = Vec::new();
    let mut in_zero: Vec<bool> = (0..dim).map(|i| values[i].norm() <= zero_tol).collect();
    if !in_zero.contains(&true) && dim >= 2 {
        // A Jordan pair at zero splits as the square root of the perturbation.
        // Accept the two smallest eigenvalues as that pair when M itself is
        // singular to within zero_tol (Hermitian, so linearly sensitive).
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| values[a].norm().total_cmp(&values[b].norm()));
        let (i, j) = (order[0], order[1]);
        let split_tol = (zero_tol * norm_m).sqrt();
        if values[j].norm() <= split_tol
            && (values[i] + values[j]).norm() <= zero_tol
            && smallest_hermitian(bdg)? <= zero_tol
        {
            in_zero[i] = true;
            in_zero[j] = true;
        }
    }
    let mut smallest_magnitude = f64::INFINITY;
    for i in 0..dim {
        let lam = values[i];
        smallest_magnitude = smallest_magnitude.min(lam.norm());
        if in_zero[i] {
            zero_cluster.push(lam);
            continue;
        }
        if lam.im.abs() > zero_tol {
            unstable.push(lam);
            continue;
        }
        let mut v: Vec<c64> = (0..dim).map(|r| vectors[(r, i)]).collect();
        let nv = euclid(&v);
        v.iter_mut().for_each(|z| *z /= nv);
        let en = bdg.eta_inner(&v, &v).re;
        if en > 1e-8 {
            plus.push((lam.re, v));
        } else if en < -1e-8 {
            minus.push(lam.re);
        } else {
            // real eigenvalue with null symplectic norm: Krein collision
            unstable.push(lam);
        }
    }
    if zero_cluster.len() > 2 {
        return Err(Error::UnsupportedStructure(format!(
            "{} eigenvalues of ηM within {zero_tol:.3e} of zero; only a single zero mode is supported",
            zero_cluster.len()
        )));
    }
    plus.sort_by(|a, b| a.0.total_cmp(&b.0));
    minus.sort_by(|a, b| a.total_cmp(b));

    // degenerate clusters: canonical rotation, then η-orthonormalization
    let deg_tol = opts.degeneracy_tol_rel * norm_m.max(f64::MIN_POSITIVE);
    let mut ordered: Vec<Vec<c64>> = Vec::with_capacity(plus.len());
    let mut start = 0;
    while start < plus.len() {
        let mut end = start + 1;
        while end < plus.len() && (plus[end].0 - plus[end - 1].0).abs() <= deg_tol {
            end += 1;
        }
        let mut block: Vec<Vec<c64>> = plus[start..end].iter().map(|(_, v)| v.clone()).collect();
        eta_gram_schmidt(bdg, &mut block, &[])?;
        if block.len() > 1 {
            block = canonical_rotation(block)?;
        }
        ordered.extend(block);
        start = end;
    }
    // global clean-up pass keeps distinct clusters mutually η-orthogonal
    eta_gram_schmidt(bdg, &mut ordered, &[])?;

    let mut omega = Vec::with_capacity(ordered.len());
    let mut eta_norms = Vec::with_capacity(ordered.len());
    let mut max_residual = 0.0f64;
    for v in ordered.iter_mut() {
        fix_phase(v);
        let mv = bdg.m_apply(v);
        // Rayleigh quotient V†MV = ω V†ηV
        let w: c64 = v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum();
        let en = bdg.eta_inner(v, v).re;
        let om = w.re / en;
        let r: Vec<c64> = mv.iter().zip(&bdg.eta).zip(v.iter()).map(|((m, e), x)| m * e - om * x).collect();
        max_residual = max_residual.max(euclid(&r));
        omega.push(om);
        eta_norms.push(en);
    }
    // Rayleigh quotients may reorder near-degenerate modes
    let mut idx: Vec<usize> = (0..omega.len()).collect();
    idx.sort_by(|&a, &b| omega[a].total_cmp(&omega[b]));
    let omega: Vec<f64> = idx.iter().map(|&i| omega[i]).collect();
    let eta_norms: Vec<f64> = idx.iter().map(|&i| eta_norms[i]).collect();
    let ordered: Vec<&Vec<c64>> = idx.iter().map(|&i| &ordered[i]).collect();

    let pairing_defect = omega
        .iter()
        .map(|w| minus.iter().map(|m| (m + w).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let count = omega.len();
    Ok(SymplecticSpectrum {
        x: Mat::from_fn(f, count, |i, n| ordered[n][i]),
        y: Mat::from_fn(f, count, |i, n| ordered[n][f + i]),
        omega,
        eta_norms,
        stable: unstable.is_empty(),
        unstable_modes: unstable,
        zero_cluster,
        negative_family: minus,
        norm_m,
        zero_tol,
        smallest_magnitude,
        max_residual,
        pairing_defect: if count == 0 { 0.0 } else { pairing_defect },
    })
}

/// Modified Gram-Schmidt in the η inner product, applied twice, against
/// `fixed` (already η-orthonormal, norm +1) and within `block`.
fn eta_gram_schmidt(bdg: &BdgMatrix, block: &mut [Vec<c64>], fixed: &[Vec<c64>]) -> Result<()> {
    for j in 0..block.len() {
        for _ in 0..2 {
            for u in fixed.iter().chain(block[..j].iter()).cloned().collect::<Vec<_>>() {
                let c = bdg.eta_inner(&u, &block[j]);
                for (x, y) in block[j].iter_mut().zip(&u) {
                    *x -= c * y;
                }
            }
        }
        let n = bdg.eta_inner(&block[j], &block[j]).re;
        if !(n > 0.0) {
            return Err(Error::Numerical(format!(
                "positive-norm mode lost its symplectic norm during orthogonalization ({n:.3e})"
            )));
        }
        let s = 1.0 / n.sqrt();
        block[j].iter_mut().for_each(|z| *z *= s);
    }
    Ok(())
}

/// Fixes the basis of an η-orthonormal degenerate cluster by diagonalizing
/// the index-weighted form `Σ_j (j+1) |V_j|²` inside the cluster. A unitary
/// rotation preserves η-orthonormality.
fn canonical_rotation(block: Vec<Vec<c64>>) -> Result<Vec<Vec<c64>>> {
    let c = block.len();
    let k = Mat::<c64>::from_fn(c, c, |a, b| {
        block[a]
            .iter()
            .zip(&block[b])
            .enumerate()
            .map(|(j, (x, y))| x.conj() * y * (j as f64 + 1.0))
            .sum()
    });
    let evd = k
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("cluster rotation failed: {e:?}")))?;
    let r = evd.U();
    let s: Vec<f64> = (0..c).map(|i| evd.S().column_vector()[i].re).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    Ok(order
        .into_iter()
        .map(|col| {
            let mut v = vec![c64::new(0.0, 0.0); block[0].len()];
            for (a, b) in block.iter().enumerate() {
                let coef = r[(a, col)];
                for (o, x) in v.iter_mut().zip(b) {
                    *o += coef * x;
                }
            }
            v
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroMode {
    /// `ηMP = 0`, scaled so that `P_0 = 1`.
    pub p: Vec<c64>,
    /// `ηMQ = -iP/μ`, `Q†ηP = i`.
    pub q: Vec<c64>,
    /// Collective mass `μ` of the `℘²/2μ` term.
    pub mass_mu: f64,
    /// `|mean of the zero-cluster eigenvalues|`. The Jordan pair splits under
    /// rounding by `O(sqrt(ε)‖M‖)`, but its mean stays at `O(ε‖M‖)`.
    pub omega0_residual: f64,
    /// `‖ηMP‖ / ‖P‖`.
    pub null_residual: f64,
    /// `ηP`, the coefficients of `℘ = α†ηP` on `α† = (a†, a)`.
    pub momentum_coefficients: Vec<c64>,
    /// `‖P - (e0 - e_f)‖² / ‖P‖²`.
    pub pattern_deviation: f64,
    /// `‖ηMQ + iP/μ‖`.
    pub q_residual: f64,
    pub warnings: Vec<String>,
}

impl ZeroMode {
    pub fn p_eta_p(&self) -> c64 {
        let f = self.p.len() / 2;
        self.p
            .iter()
            .enumerate()
            .map(|(i, z)| if i < f { z.norm_sqr() } else { -z.norm_sqr() })
            .map(|x| c64::new(x, 0.0))
            .sum()
    }

    pub fn q_eta_p(&self) -> c64 {
        let f = self.p.len() / 2;
        self.q
            .iter()
            .zip(&self.p)
            .enumerate()
            .map(|(i, (a, b))| if i < f { a.conj() * b } else { -a.conj() * b })
            .sum()
    }
}

/// Extracts `P`, `Q` and `μ` from the zero cluster of `ηM`.
pub fn extract_zero_mode(
    spectrum: &SymplecticSpectrum,
    bdg: &BdgMatrix,
    opts: &SpectrumOptions,
) -> Result<ZeroMode> {
    let f = bdg.f();
    let dim = 2 * f;
    let tol = spectrum.zero_tol;
    if spectrum.zero_cluster.is_empty() {
        return Err(Error::ZeroModeMissing { smallest: spectrum.smallest_magnitude, tol });
    }
    let evd = bdg
        .m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed on M: {e:?}")))?;
    let lam: Vec<f64> = (0..dim).map(|i| evd.S().column_vector()[i].re).collect();
    let u = evd.U();
    let null: Vec<usize> = (0..dim).filter(|&i| lam[i].abs() <= tol).collect();
    match null.len() {
        0 => {
            let smallest = (0..dim).map(|i| lam[i].abs()).fold(f64::INFINITY, f64::min);
            return Err(Error::ZeroModeMissing { smallest, tol });
        }
        1 => {}
        k => {
            return Err(Error::UnsupportedStructure(format!(
                "M has a {k}-dimensional null space; the collective mass is undefined \
                 (non-interacting or symmetry-degenerate input)"
            )))
        }
    }
    let mut warnings = Vec::new();
    let mut p: Vec<c64> = (0..dim).map(|r| u[(r, null[0])]).collect();
    let pmax = p.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pivot = if p[0].norm() >= 1e-3 * pmax {
        0
    } else {
        warnings.push("zero mode has negligible weight on the condensate level".to_string());
        p.iter().position(|z| z.norm() == pmax).unwrap_or(0)
    };
    let s = p[pivot].inv();
    p.iter_mut().for_each(|z| *z *= s);

    let pattern: f64 = p
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let target = if i == 0 {
                1.0
            } else if i == f {
                -1.0
            } else {
                0.0
            };
            (z - target).norm_sqr()
        })
        .sum::<f64>()
        / p.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if pattern > opts.pattern_tol {
        let msg = format!("zero mode deviates from the (δ_m0, -δ_m0) pattern by {pattern:.3e}");
        log::warn!("{msg}");
        warnings.push(msg);
    }

    // Q' = M⁺(-iηP), then projected η-orthogonal to the proper modes
    let eta_p = bdg.eta_apply(&p);
    let rhs: Vec<c64> = eta_p.iter().map(|z| c64::new(0.0, -1.0) * z).collect();
    let mut q = vec![c64::new(0.0, 0.0); dim];
    for i in 0..dim {
        if lam[i].abs() <= tol {
            continue;
        }
        let c: c64 = (0..dim).map(|r| u[(r, i)].conj() * rhs[r]).sum::<c64>() / lam[i];
        for r in 0..dim {
            q[r] += c * u[(r, i)];
        }
    }
    for n in 0..spectrum.len() {
        for (v, sign) in [(spectrum.mode(n), 1.0), (spectrum.partner(n), -1.0)] {
            let c = bdg.eta_inner(&v, &q) * sign;
            for (x, y) in q.iter_mut().zip(&v) {
                *x -= c * y;
            }
        }
    }
    let qp = bdg.eta_inner(&q, &p);
    // Q'†ηP = i μ
    let mass_mu = qp.im;
    if !(mass_mu.is_finite() && mass_mu > 0.0) {
        return Err(Error::UnsupportedStructure(format!(
            "collective mass is not positive (Q'†ηP = {qp:.3e})"
        )));
    }
    q.iter_mut().for_each(|z| *z /= mass_mu);

    let etam_p = bdg.eta_m_apply(&p);
    let etam_q = bdg.eta_m_apply(&q);
    let q_res: Vec<c64> =
        etam_q.iter().zip(&p).map(|(a, b)| a + c64::new(0.0, 1.0) * b / mass_mu).collect();
    let mean: c64 = spectrum.zero_cluster.iter().sum::<c64>() / spectrum.zero_cluster.len() as f64;
    Ok(ZeroMode {
        null_residual: euclid(&etam_p) / euclid(&p),
        omega0_residual: mean.norm(),
        q_residual: euclid(&q_res),
        momentum_coefficients: eta_p,
        pattern_deviation: pattern,
        mass_mu,
        p,
        q,
        warnings,
    })
}

/// `β = Tα` on the proper modes, with the zero-mode canonical pair
/// `(𝒳, ℘) = (α†ηQ, α†ηP)` attached as operator rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalTransform {
    /// `2p × 2f`: rows `b_1..b_p`, then `b_1†..b_p†`.
    pub proper: Mat<c64>,
    /// `(𝒳, ℘)` as rows acting on `α = (a; a†)`.
    pub zero_rows: Option<(Vec<c64>, Vec<c64>)>,
    /// `max |TηT†η - 1|` on the proper block.
    pub canonical_deviation: f64,
    /// `[𝒳, ℘]`, ideally `i`.
    pub zero_commutator: Option<c64>,
    /// Largest commutator between a proper row and a zero-sector row.
    pub cross_commutator: Option<f64>,
}

impl CanonicalTransform {
    /// Rows `b_1..b_p, 𝒳, b_1†..b_p†, ℘` (zero rows only when present).
    pub fn full(&self) -> Mat<c64> {
        let p = self.proper.nrows() / 2;
        let cols = self.proper.ncols();
        match &self.zero_rows {
            None => self.proper.clone(),
            Some((xr, pr)) => Mat::from_fn(2 * p + 2, cols, |i, j| {
                if i < p {
                    self.proper[(i, j)]
                } else if i == p {
                    xr[j]
                } else if i < 2 * p + 1 {
                    self.proper[(i - 1, j)]
                } else {
                    pr[j]
                }
            }),
        }
    }
}

/// `[rα, sα] = r J sᵀ` with `J = [[0, 1], [-1, 0]]`.
fn commutator(r: &[c64], s: &[c64]) -> c64 {
    let f = r.len() / 2;
    (0..f).map(|i| r[i] * s[f + i] - r[f + i] * s[i]).sum()
}

/// Row vector `r` with `rα = α†w`: `r[σ(j)] = w[j]`, `σ` swapping halves.
fn dagger_row(w: &[c64]) -> Vec<c64> {
    let f = w.len() / 2;
    (0..2 * f).map(|i| if i < f { w[f + i] } else { w[i - f] }).collect()
}

pub fn canonical_transform(
    spectrum: &SymplecticSpectrum,
    zero: Option<&ZeroMode>,
    opts: &SpectrumOptions,
) -> Result<CanonicalTransform> {
    let f = spectrum.f();
    let p = spectrum.len();
    let proper = Mat::<c64>::from_fn(2 * p, 2 * f, |i, j| {
        let (n, lower) = if i < p { (i, false) } else { (i - p, true) };
        let (x, y) = if j < f {
            (spectrum.x[(j, n)], spectrum.y[(j, n)])
        } else {
            (spectrum.x[(j - f, n)], spectrum.y[(j - f, n)])
        };
        match (lower, j < f) {
            (false, true) => x.conj(),
            (false, false) => -y.conj(),
            (true, true) => -y,
            (true, false) => x,
        }
    });
    // (TηT†)η_p - 1
    let mut deviation = 0.0f64;
    for i in 0..2 * p {
        for k in 0..2 * p {
            let s: c64 = (0..2 * f)
                .map(|j| proper[(i, j)] * proper[(k, j)].conj() * if j < f { 1.0 } else { -1.0 })
                .sum();
            let eta_k = if k < p { 1.0 } else { -1.0 };
            let target = if i == k { 1.0 } else { 0.0 };
            deviation = deviation.max((s * eta_k - target).norm());
        }
    }
    if deviation > opts.canonical_tol {
        return Err(Error::Numerical(format!(
            "canonical condition violated: max |TηT†η - 1| = {deviation:.3e}"
        )));
    }
    let (zero_rows, zero_commutator, cross_commutator) = match zero {
        None => (None, None, None),
        Some(z) => {
            let eta_q: Vec<c64> =
                z.q.iter().enumerate().map(|(i, v)| if i < f { *v } else { -v }).collect();
            let xr = dagger_row(&eta_q);
            let pr = dagger_row(&z.momentum_coefficients);
            let mut cross = 0.0f64;
            for i in 0..2 * p {
                let row: Vec<c64> = (0..2 * f).map(|j| proper[(i, j)]).collect();
                cross = cross.max(commutator(&row, &xr).norm()).max(commutator(&row, &pr).norm());
            }
            let zc = commutator(&xr, &pr);
            (Some((xr, pr)), Some(zc), Some(cross))
        }
    };
    Ok(CanonicalTransform { proper, zero_rows, canonical_deviation: deviation, zero_commutator, cross_commutator })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadform::{build_m, QuadraticForm};

    fn c(re: f64) -> c64 {
        c64::new(re, 0.0)
    }

    fn form(a: &[&[f64]], b: &[&[f64]]) -> QuadraticForm {
        let f = a.len();
        QuadraticForm::from_matrices(
            Mat::from_fn(f, f, |i, j| c(a[i][j])),
            Mat::from_fn(f, f, |i, j| c(b[i][j])),
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn decoupled_oscillators() {
        let q = form(&[&[1.0, 0.0], &[0.0, 2.5]], &[&[0.0, 0.0], &[0.0, 0.0]]);
        let s = diagonalize(&build_m(&q), &SpectrumOptions::default()).unwrap();
        assert_eq!(s.omega.len(), 2);
        assert!((s.omega[0] - 1.0).abs() < 1e-14 && (s.omega[1] - 2.5).abs() < 1e-14);
        for n in 0..2 {
            for i in 0..2 {
                let target = if i == n { 1.0 } else { 0.0 };
                assert!((s.x[(i, n)] - target).norm() < 1e-14);
                assert!(s.y[(i, n)].norm() < 1e-14);
            }
        }
        let t = canonical_transform(&s, None, &SpectrumOptions::default()).unwrap();
        assert!(t.canonical_deviation < 1e-14);
    }

    #[test]
    fn single_mode_squeezing() {
        // A = ε + g, B = g: ω = sqrt((ε+g)² - g²)
        let (eps, g) = (0.5, 1.0);
        let q = form(&[&[eps + g]], &[&[g]]);
        let s = diagonalize(&build_m(&q), &SpectrumOptions::default()).unwrap();
        let w = ((eps + g) * (eps + g) - g * g).sqrt();
        assert!((s.omega[0] - w).abs() < 1e-13);
        let xa = (0.5 * ((eps + g) / w + 1.0)).sqrt();
        let ya = (0.5 * ((eps + g) / w - 1.0)).sqrt();
        assert!((s.x[(0, 0)].norm() - xa).abs() < 1e-12);
        assert!((s.y[(0, 0)].norm() - ya).abs() < 1e-12);
        assert!(s.pairing_defect < 1e-12);
    }

    #[test]
    fn homogeneous_zero_block() {
        let gn = 0.7;
        let q = form(&[&[gn]], &[&[gn]]);
        let bdg = build_m(&q);
        let opts = SpectrumOptions::default();
        let s = diagonalize(&bdg, &opts).unwrap();
        assert!(s.omega.is_empty());
        assert_eq!(s.zero_cluster.len(), 2);
        let z = extract_zero_mode(&s, &bdg, &opts).unwrap();
        assert!((z.p[0] - 1.0).norm() < 1e-14 && (z.p[1] + 1.0).norm() < 1e-12);
        assert!((z.q[0] - c64::new(0.0, -0.5)).norm() < 1e-12);
        assert!((z.q[1] - c64::new(0.0, -0.5)).norm() < 1e-12);
        assert!((1.0 / z.mass_mu - gn).abs() < 1e-12);
        assert!((z.q_eta_p() - c64::new(0.0, 1.0)).norm() < 1e-12);
        assert!(z.p_eta_p().norm() < 1e-12);
        // ηMQ = -i gn (1, -1)
        let emq = bdg.eta_m_apply(&z.q);
        assert!((emq[0] - c64::new(0.0, -gn)).norm() < 1e-12);
        assert!((emq[1] - c64::new(0.0, gn)).norm() < 1e-12);
        let t = canonical_transform(&s, Some(&z), &opts).unwrap();
        assert!((t.zero_commutator.unwrap() - c64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn split_jordan_pair_is_zero_cluster() {
        // A perturbation δ of M splits the zero pair to ±sqrt(2 gn δ), far
        // above zero_tol, while M's smallest eigenvalue stays at δ.
        let gn = 0.7;
        for delta in [1e-12, -1e-12] {
            let q = form(&[&[gn + delta, 0.0], &[0.0, 3.0]], &[&[gn, 0.0], &[0.0, 0.0]]);
            let bdg = build_m(&q);
            let s = diagonalize(&bdg, &SpectrumOptions::default()).unwrap();
            assert!(s.stable, "δ = {delta}");
            assert_eq!(s.zero_cluster.len(), 2);
            assert!(s.zero_cluster.iter().all(|z| z.norm() > s.zero_tol));
            assert_eq!(s.omega.len(), 1);
            let z = extract_zero_mode(&s, &bdg, &SpectrumOptions::default()).unwrap();
            assert!((1.0 / z.mass_mu - gn).abs() < 1e-6);
        }
    }

    #[test]
    fn no_zero_mode_reported() {
        let q = form(&[&[2.0]], &[&[0.5]]);
        let bdg = build_m(&q);
        let opts = SpectrumOptions::default();
        let s = diagonalize(&bdg, &opts).unwrap();
        assert!(matches!(extract_zero_mode(&s, &bdg, &opts), Err(Error::ZeroModeMissing { .. })));
    }

    #[test]
    fn unstable_spectrum_flagged() {
        // B larger than A: ω² = A² - B² < 0
        let q = form(&[&[1.0, 0.0], &[0.0, 3.0]], &[&[2.0, 0.0], &[0.0, 0.0]]);
        let s = diagonalize(&build_m(&q), &SpectrumOptions::default()).unwrap();
        assert!(!s.stable);
        assert_eq!(s.unstable_modes.len(), 2);
        assert!(s.unstable_modes.iter().all(|l| (l.im.abs() - 3f64.sqrt()).abs() < 1e-10));
        assert_eq!(s.omega.len(), 1);
        assert!((s.omega[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_zero_modes() {
        let q = form(&[&[0.0, 0.0], &[0.0, 0.0]], &[&[0.0, 0.0], &[0.0, 0.0]]);
        let err = diagonalize(&build_m(&q), &SpectrumOptions::default()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedStructure(_)));
    }

    #[test]
    fn non_interacting_zero_mode_unsupported() {
        // g = 0: A = diag(0, 1), B = 0; zero cluster of size 2 but M has a 2D null space
        let q = form(&[&[0.0, 0.0], &[0.0, 1.0]], &[&[0.0, 0.0], &[0.0, 0.0]]);
        let bdg = build_m(&q);
        let opts = SpectrumOptions::default();
        let s = diagonalize(&bdg, &opts).unwrap();
        assert_eq!(s.zero_cluster.len(), 2);
        assert_eq!(s.omega, vec![1.0]);
        let err = extract_zero_mode(&s, &bdg, &opts).unwrap_err();
        assert!(matches!(err, Error::UnsupportedStructure(_)));
    }
}
