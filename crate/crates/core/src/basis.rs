//! Eigenbasis of the effective Hamiltonian `-∇²/2 + V_tr + g N0 |Φ0|²`.
//!
//! The lowest `f` eigenfunctions expand the fluctuation field. Grids up to
//! `dense_limit` nodes use a dense symmetric eigensolver; larger grids use a
//! restarted Lanczos iteration with full reorthogonalization.

use faer::{Mat, Side};
use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::CondensateState;
use crate::grid::{Boundary, Grid, Laplacian, LinearOperator};

/// `-∇²/2 + V_tr + g N0 |Φ0|²` on the grid.
#[derive(Clone, Debug)]
pub struct EffectiveHamiltonian {
    laplacian: Laplacian,
    potential: Vec<f64>,
}

impl EffectiveHamiltonian {
    pub fn grid(&self) -> &Grid {
        self.laplacian.grid()
    }

    /// Total potential `V_tr + g N0 |Φ0|²` at every node.
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    fn is_translation_invariant(&self) -> bool {
        if self.grid().boundary() != Boundary::Periodic {
            return false;
        }
        let max = self.potential.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.potential.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min <= 1e-12 * max.abs().max(1.0)
    }
}

impl LinearOperator for EffectiveHamiltonian {
    fn dim(&self) -> usize {
        self.potential.len()
    }

    fn apply(&self, x: &[c64]) -> Vec<c64> {
        let lap = self.laplacian.apply(x);
        lap.iter().zip(x).zip(&self.potential).map(|((l, xi), v)| -0.5 * l + v * xi).collect()
    }

    fn to_dense(&self) -> Mat<f64> {
        let mut m = self.laplacian.to_dense();
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] *= -0.5;
            }
            m[(i, i)] += self.potential[i];
        }
        m
    }
}

pub fn build_effective_hamiltonian(state: &CondensateState) -> Result<EffectiveHamiltonian> {
    let trap = state.params.trap.values(&state.grid)?;
    let gn = state.params.interaction();
    let potential = trap.iter().zip(&state.phi0).map(|(v, p)| v + gn * p.norm_sqr()).collect();
    Ok(EffectiveHamiltonian { laplacian: state.laplacian(), potential })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BasisOptions {
    /// Grids with more nodes than this use the iterative eigensolver.
    pub dense_limit: usize,
    /// Relative residual target of the iterative eigensolver.
    pub tolerance: f64,
    pub max_restarts: usize,
    /// Eigenvalues closer than this (relative) form a degenerate cluster.
    pub degeneracy_tol: f64,
}

impl Default for BasisOptions {
    fn default() -> Self {
        BasisOptions { dense_limit: 10_000, tolerance: 1e-11, max_restarts: 500, degeneracy_tol: 1e-9 }
    }
}

/// Orthonormal eigenfunctions `Φn` with ascending eigenvalues `μn`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisSet {
    pub grid: Grid,
    pub mu: Vec<f64>,
    pub functions: Vec<Vec<c64>>,
    /// Wavevector of each function when the basis consists of plane waves.
    pub wavevectors: Option<Vec<Vec<f64>>>,
}

impl BasisSet {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn gram_matrix(&self) -> Mat<c64> {
        let f = self.len();
        Mat::from_fn(f, f, |m, n| {
            self.grid.inner_product(&self.functions[m], &self.functions[n]).expect("same grid")
        })
    }

    /// `max |⟨Φm|Φn⟩ - δmn|`.
    pub fn gram_deviation(&self) -> f64 {
        let g = self.gram_matrix();
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// The first `f` functions.
    pub fn truncated(&self, f: usize) -> BasisSet {
        let f = f.min(self.len());
        BasisSet {
            grid: self.grid.clone(),
            mu: self.mu[..f].to_vec(),
            functions: self.functions[..f].to_vec(),
            wavevectors: self.wavevectors.as_ref().map(|k| k[..f].to_vec()),
        }
    }
}

/// Computes the `f` lowest eigenpairs of `h`.
pub fn solve_basis(h: &EffectiveHamiltonian, f: usize, opts: &BasisOptions) -> Result<BasisSet> {
    let n = h.dim();
    if f == 0 || f > n {
        return Err(Error::Config(format!("truncation f = {f} must lie in 1..={n}")));
    }
    // a few extra pairs so that a degenerate cluster cut by f is resolved whole
    let want = (f + 8).min(n);
    let (mu, vectors) = if n <= opts.dense_limit {
        dense_lowest(h, want)?
    } else {
        lanczos_lowest(h, want, opts)?
    };
    let clusters = clusters(&mu, opts.degeneracy_tol);
    let plane_waves = h.is_translation_invariant();
    let mut out_mu = Vec::with_capacity(want);
    let mut out_vec = Vec::with_capacity(want);
    let mut out_k = Vec::new();
    for range in clusters {
        let block: Vec<Vec<c64>> = vectors[range.clone()].to_vec();
        if plane_waves {
            for (v, k) in resolve_plane_waves(h.grid(), block)? {
                out_vec.push(v);
                out_k.push(k);
            }
        } else {
            out_vec.extend(fix_real_cluster(block));
        }
        out_mu.extend_from_slice(&mu[range]);
        if out_mu.len() >= f {
            break;
        }
    }
    // Rayleigh quotients: second-order accurate in the vector error, which
    // keeps μ0 consistent with the condensate to near machine precision
    for (m, v) in out_mu.iter_mut().zip(&out_vec) {
        *m = dot(v, &h.apply(v)).re / dot(v, v).re;
    }
    let scale = 1.0 / h.grid().weight().sqrt();
    let functions: Vec<Vec<c64>> =
        out_vec.into_iter().take(f).map(|v| v.into_iter().map(|z| z * scale).collect()).collect();
    out_mu.truncate(f);
    out_k.truncate(f);
    Ok(BasisSet {
        grid: h.grid().clone(),
        mu: out_mu,
        functions,
        wavevectors: plane_waves.then_some(out_k),
    })
}

fn clusters(mu: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=mu.len() {
        if i == mu.len() || (mu[i] - mu[i - 1]).abs() > tol * mu[i].abs().max(1.0) {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Unit (Euclidean) eigenvectors, ascending.
fn dense_lowest(h: &EffectiveHamiltonian, want: usize) -> Result<(Vec<f64>, Vec<Vec<c64>>)> {
    let dense = h.to_dense();
    let evd = dense
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("dense symmetric eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let n = dense.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let mu = order[..want].iter().map(|&i| s[i]).collect();
    let vecs = order[..want]
        .iter()
        .map(|&i| (0..n).map(|r| c64::new(u[(r, i)], 0.0)).collect())
        .collect();
    Ok((mu, vecs))
}

fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn euclid(a: &[c64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Classical Gram-Schmidt applied twice; returns the remaining norm.
fn orthogonalize(v: &mut [c64], basis: &[Vec<c64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
    euclid(v)
}

fn seed_vector(n: usize, salt: usize) -> Vec<c64> {
    (0..n)
        .map(|i| {
            let t = (i + 1) as f64 * (0.618_033_988_75 + 0.1 * salt as f64);
            c64::new(1.0 + 0.5 * (7.0 * t).sin() + 0.25 * (13.0 * t).cos(), 0.0)
        })
        .collect()
}

/// Restarted Lanczos with full reorthogonalization for the `want` lowest
/// eigenpairs. After each restart the kept Ritz vectors are augmented by the
/// residuals of the unconverged wanted pairs and the Krylov sequence resumes.
fn lanczos_lowest(
    h: &EffectiveHamiltonian,
    want: usize,
    opts: &BasisOptions,
) -> Result<(Vec<f64>, Vec<Vec<c64>>)> {
    let n = h.dim();
    let m = (2 * want + 20).min(n);
    let mut basis: Vec<Vec<c64>> = Vec::with_capacity(m);
    let mut images: Vec<Vec<c64>> = Vec::with_capacity(m);
    let mut pending: Vec<Vec<c64>> = vec![seed_vector(n, 0)];
    let mut salt = 1;
    let mut worst = f64::INFINITY;
    for _restart in 0..opts.max_restarts {
        while basis.len() < m {
            let mut next = match pending.pop() {
                Some(v) => v,
                None => images.last().cloned().unwrap_or_else(|| seed_vector(n, salt)),
            };
            let before = euclid(&next);
            let mut after = orthogonalize(&mut next, &basis);
            if after <= 1e-10 * before.max(1e-300) {
                // invariant subspace reached
                next = seed_vector(n, salt);
                salt += 1;
                after = orthogonalize(&mut next, &basis);
                if after <= 1e-10 {
                    break;
                }
            }
            next.iter_mut().for_each(|z| *z /= after);
            images.push(h.apply(&next));
            basis.push(next);
        }
        let k = basis.len();
        let proj = Mat::<c64>::from_fn(k, k, |i, j| {
            let a = dot(&basis[i], &images[j]);
            let b = dot(&basis[j], &images[i]).conj();
            0.5 * (a + b)
        });
        let evd = proj
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("projected eigensolver failed: {e:?}")))?;
        let theta: Vec<f64> = (0..k).map(|i| evd.S().column_vector()[i].re).collect();
        let s = evd.U();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| theta[a].total_cmp(&theta[b]));
        let combine = |src: &[Vec<c64>], col: usize| -> Vec<c64> {
            let mut out = vec![c64::new(0.0, 0.0); n];
            for (j, v) in src.iter().enumerate() {
                let c = s[(j, col)];
                for (o, x) in out.iter_mut().zip(v) {
                    *o += c * x;
                }
            }
            out
        };
        let keep = (want + 4).min(k.saturating_sub(1)).max(want.min(k));
        let mut ritz = Vec::with_capacity(keep);
        let mut ritz_img = Vec::with_capacity(keep);
        let mut residuals = Vec::new();
        worst = 0.0;
        for &col in order.iter().take(keep) {
            let u = combine(&basis, col);
            let hu = combine(&images, col);
            let th = theta[col];
            let r: Vec<c64> = hu.iter().zip(&u).map(|(a, b)| a - th * b).collect();
            let rn = euclid(&r);
            if ritz.len() < want {
                let rel = rn / th.abs().max(1.0);
                worst = worst.max(rel);
                if rel > opts.tolerance {
                    residuals.push(r);
                }
            }
            ritz.push(u);
            ritz_img.push(hu);
        }
        if worst <= opts.tolerance || k == n {
            let mu = order.iter().take(want).map(|&c| theta[c]).collect();
            ritz.truncate(want);
            return Ok((mu, ritz));
        }
        basis = ritz;
        images = ritz_img;
        pending = residuals.into_iter().rev().collect();
    }
    Err(Error::Numerical(format!(
        "Lanczos did not converge in {} restarts (worst relative residual {worst:.3e})",
        opts.max_restarts
    )))
}

/// Rotates a degenerate cluster of a translation-invariant operator into
/// plane waves `exp(i k.r)/sqrt(N)` (unit Euclidean norm), ordered so that
/// each `k` is followed by `-k`.
fn resolve_plane_waves(grid: &Grid, block: Vec<Vec<c64>>) -> Result<Vec<(Vec<c64>, Vec<f64>)>> {
    let c = block.len();
    let dim = grid.dimension();
    let strides = grid.strides();
    let shift = |v: &[c64], axis: usize| -> Vec<c64> {
        let n = grid.points()[axis];
        let s = strides[axis];
        (0..v.len())
            .map(|idx| {
                let i = (idx / s) % n;
                if i + 1 < n {
                    v[idx + s]
                } else {
                    v[idx + s - n * s]
                }
            })
            .collect()
    };
    let weights = [1.0, std::f64::consts::SQRT_2, 3f64.sqrt()];
    let mut comb = Mat::<c64>::zeros(c, c);
    for axis in 0..dim {
        let shifted: Vec<Vec<c64>> = block.iter().map(|v| shift(v, axis)).collect();
        for i in 0..c {
            for j in 0..c {
                comb[(i, j)] += weights[axis] * dot(&block[i], &shifted[j]);
            }
        }
    }
    let evd = comb
        .eigen()
        .map_err(|e| Error::Numerical(format!("plane-wave resolution failed: {e:?}")))?;
    let r = evd.U();
    let mut out = Vec::with_capacity(c);
    for col in 0..c {
        let mut v = vec![c64::new(0.0, 0.0); block[0].len()];
        for (j, b) in block.iter().enumerate() {
            let coef = r[(j, col)];
            for (o, x) in v.iter_mut().zip(b) {
                *o += coef * x;
            }
        }
        let nv = euclid(&v);
        v.iter_mut().for_each(|z| *z /= nv);
        // wavevector from per-axis translation eigenvalues, snapped to the lattice
        let mut index = Vec::with_capacity(dim);
        let mut k = Vec::with_capacity(dim);
        for axis in 0..dim {
            let n = grid.points()[axis];
            let lam = dot(&v, &shift(&v, axis));
            let frac = lam.arg() / (2.0 * std::f64::consts::PI) * n as f64;
            let mut j = frac.round() as i64;
            if n % 2 == 0 && j == -(n as i64) / 2 {
                j = n as i64 / 2;
            }
            index.push(j);
            k.push(j as f64 * 2.0 * std::f64::consts::PI / grid.lengths()[axis]);
        }
        // phase such that v(r) exp(-i k.r) is real positive at the first node
        let r0 = grid.unravel(0);
        let phase0: f64 = (0..dim).map(|a| k[a] * grid.axis_coordinates(a)[r0[a]]).sum();
        let rot = (v[0] * c64::from_polar(1.0, -phase0)).conj();
        let rot = rot / rot.norm();
        v.iter_mut().for_each(|z| *z *= rot);
        out.push((index, v, k));
    }
    // pair k with -k: sort by canonical representative, positive member first
    let canonical = |j: &[i64]| -> (Vec<i64>, bool) {
        let first = j.iter().find(|&&x| x != 0).copied().unwrap_or(0);
        if first < 0 {
            (j.iter().map(|x| -x).collect(), true)
        } else {
            (j.to_vec(), false)
        }
    };
    out.sort_by(|a, b| canonical(&a.0).cmp(&canonical(&b.0)));
    Ok(out.into_iter().map(|(_, v, k)| (v, k)).collect())
}

/// Real eigenvectors: sign fixed by the largest component, ordered within the
/// cluster by the node index of that component.
fn fix_real_cluster(block: Vec<Vec<c64>>) -> Vec<Vec<c64>> {
    let mut keyed: Vec<(usize, Vec<c64>)> = block
        .into_iter()
        .map(|mut v| {
            let (idx, _) = v
                .iter()
                .enumerate()
                .fold((0, -1.0), |best, (i, z)| if z.norm() > best.1 + 1e-12 { (i, z.norm()) } else { best });
            if v[idx].re < 0.0 {
                v.iter_mut().for_each(|z| *z = -*z);
            }
            (idx, v)
        })
        .collect();
    keyed.sort_by_key(|(i, _)| *i);
    keyed.into_iter().map(|(_, v)| v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{solve_ground_state, PhysicalParams, SolverOptions};
    use crate::grid::{LaplacianScheme, TrapPotential};

    fn harmonic_state(gn: f64, n: usize, length: f64) -> CondensateState {
        let grid = Grid::periodic_1d(n, length).unwrap();
        let p = PhysicalParams::new(gn, 1.0, TrapPotential::Harmonic { frequencies: vec![1.0] }).unwrap();
        solve_ground_state(&p, &grid, LaplacianScheme::Spectral, &SolverOptions::default()).unwrap()
    }

    fn homogeneous_state(n: usize, length: f64, gn: f64) -> CondensateState {
        let grid = Grid::periodic_1d(n, length).unwrap();
        let p = PhysicalParams::new(gn, 1.0, TrapPotential::Zero).unwrap();
        solve_ground_state(&p, &grid, LaplacianScheme::Spectral, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn f_out_of_range() {
        let s = homogeneous_state(16, 4.0, 1.0);
        let h = build_effective_hamiltonian(&s).unwrap();
        assert!(matches!(solve_basis(&h, 0, &BasisOptions::default()), Err(Error::Config(_))));
        assert!(matches!(solve_basis(&h, 17, &BasisOptions::default()), Err(Error::Config(_))));
        assert_eq!(solve_basis(&h, 16, &BasisOptions::default()).unwrap().len(), 16);
    }

    #[test]
    fn effective_hamiltonian_fixes_condensate() {
        let s = harmonic_state(50.0, 64, 16.0);
        let h = build_effective_hamiltonian(&s).unwrap();
        let hp = h.apply(&s.phi0);
        let r: Vec<c64> = hp.iter().zip(&s.phi0).map(|(a, p)| a - s.mu0 * p).collect();
        assert!(s.grid.norm(&r) <= 1e-9);
    }

    #[test]
    fn plane_wave_basis() {
        let length = 6.0;
        let gn = 2.0;
        let s = homogeneous_state(32, length, gn);
        let h = build_effective_hamiltonian(&s).unwrap();
        let b = solve_basis(&h, 9, &BasisOptions::default()).unwrap();
        let ks = b.wavevectors.as_ref().unwrap();
        let mu0 = gn / length;
        for n in 0..9 {
            let k = ks[n][0];
            assert!((b.mu[n] - (mu0 + 0.5 * k * k)).abs() < 1e-12);
            let exact = s.grid.plane_wave(&ks[n]);
            let dev = exact.iter().zip(&b.functions[n]).map(|(a, c)| (a - c).norm()).fold(0.0, f64::max);
            assert!(dev < 1e-10, "mode {n} k={k} dev {dev}");
        }
        // ±k pairs adjacent, positive first
        let dk = 2.0 * std::f64::consts::PI / length;
        let expect = [0.0, 1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0];
        for (k, e) in ks.iter().zip(expect) {
            assert!((k[0] - e * dk).abs() < 1e-12);
        }
        assert!(b.gram_deviation() < 1e-10);
    }

    #[test]
    fn ideal_gas_oscillator_levels() {
        let s = harmonic_state(0.0, 64, 16.0);
        let h = build_effective_hamiltonian(&s).unwrap();
        let b = solve_basis(&h, 4, &BasisOptions::default()).unwrap();
        for (n, mu) in b.mu.iter().enumerate() {
            assert!((mu - (n as f64 + 0.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn first_function_is_condensate() {
        let s = harmonic_state(100.0, 96, 20.0);
        let h = build_effective_hamiltonian(&s).unwrap();
        let b = solve_basis(&h, 6, &BasisOptions::default()).unwrap();
        assert!((b.mu[0] - s.mu0).abs() < 1e-10);
        let dev = b.functions[0].iter().zip(&s.phi0).map(|(a, p)| (a - p).norm()).fold(0.0, f64::max);
        assert!(dev < 1e-8, "{dev}");
        assert!(b.mu.iter().all(|m| m - s.mu0 >= -1e-10));
        // Rayleigh quotients
        for n in 0..b.len() {
            let hf = h.apply(&b.functions[n]);
            let q = s.grid.inner_product(&b.functions[n], &hf).unwrap().re;
            assert!((q - b.mu[n]).abs() <= 1e-9 * b.mu[n].abs() + 1e-12);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let s = harmonic_state(20.0, 64, 16.0);
        let h = build_effective_hamiltonian(&s).unwrap();
        let dense = solve_basis(&h, 6, &BasisOptions::default()).unwrap();
        let opts = BasisOptions { dense_limit: 0, ..Default::default() };
        let iter = solve_basis(&h, 6, &opts).unwrap();
        for n in 0..6 {
            assert!((dense.mu[n] - iter.mu[n]).abs() < 1e-9 * dense.mu[n].abs().max(1.0));
            let ov = s.grid.inner_product(&dense.functions[n], &iter.functions[n]).unwrap();
            assert!((ov.norm() - 1.0).abs() < 1e-8);
        }
        assert!(iter.gram_deviation() < 1e-10);
    }

    #[test]
    fn degenerate_2d_cluster_orthonormal() {
        let grid = crate::grid::Grid::new(&[20, 20], &[12.0, 12.0], Boundary::Periodic).unwrap();
        let p = PhysicalParams::new(0.0, 1.0, TrapPotential::Harmonic { frequencies: vec![1.0] }).unwrap();
        let s = solve_ground_state(&p, &grid, LaplacianScheme::Spectral, &SolverOptions::default()).unwrap();
        let h = build_effective_hamiltonian(&s).unwrap();
        let b = solve_basis(&h, 6, &BasisOptions::default()).unwrap();
        let expect = [1.0, 2.0, 2.0, 3.0, 3.0, 3.0];
        for (m, e) in b.mu.iter().zip(expect) {
            assert!((m - e).abs() < 1e-8);
        }
        assert!(b.gram_deviation() < 1e-10);
        assert!(b.functions.iter().all(|f| f.iter().all(|z| z.im == 0.0)));
    }
}
