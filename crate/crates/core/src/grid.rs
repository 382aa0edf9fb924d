//! Uniform tensor-product grids, trap potentials and discrete Laplacians.
//!
//! Grid functions are flat `Vec<c64>` in row-major order (last axis fastest).
//! All reductions are sequential in node order, so results are bitwise
//! reproducible.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as c64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// Dirichlet walls; boundary nodes are excluded from the grid.
    HardWall,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianScheme {
    Spectral,
    #[serde(alias = "finite_difference_2nd")]
    FiniteDifference,
}

/// Serializable description of a [`Grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: Vec<usize>,
    pub lengths: Vec<f64>,
    pub boundary: Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    points: Vec<usize>,
    lengths: Vec<f64>,
    boundary: Boundary,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        Grid::new(&spec.points, &spec.lengths, spec.boundary)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec { points: g.points, lengths: g.lengths, boundary: g.boundary }
    }
}

impl Grid {
    pub fn new(points: &[usize], lengths: &[f64], boundary: Boundary) -> Result<Self> {
        if points.is_empty() || points.len() > 3 {
            return Err(Error::Config(format!(
                "grid dimension must be 1, 2 or 3 (got {})",
                points.len()
            )));
        }
        if lengths.len() != points.len() {
            return Err(Error::Config(format!(
                "{} box lengths given for a {}-dimensional grid",
                lengths.len(),
                points.len()
            )));
        }
        if points.iter().any(|&n| n == 0) {
            return Err(Error::Config("points per axis must be positive".into()));
        }
        if lengths.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::Config("box lengths must be finite and positive".into()));
        }
        Ok(Grid { points: points.to_vec(), lengths: lengths.to_vec(), boundary })
    }

    pub fn periodic_1d(n: usize, length: f64) -> Result<Self> {
        Grid::new(&[n], &[length], Boundary::Periodic)
    }

    pub fn dimension(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let n = self.points[axis] as f64;
        match self.boundary {
            Boundary::Periodic => self.lengths[axis] / n,
            Boundary::HardWall => self.lengths[axis] / (n + 1.0),
        }
    }

    /// Uniform quadrature weight (cell volume).
    pub fn weight(&self) -> f64 {
        (0..self.dimension()).map(|a| self.spacing(a)).product()
    }

    /// Box volume. For periodic grids this equals `weight() * len()`; on
    /// hard-wall grids the excluded wall nodes carry the remaining weight.
    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Node coordinates along one axis; the box is centred on the origin.
    pub fn axis_coordinates(&self, axis: usize) -> Vec<f64> {
        let h = self.spacing(axis);
        let l = self.lengths[axis];
        let shift = match self.boundary {
            Boundary::Periodic => 0.0,
            Boundary::HardWall => 1.0,
        };
        (0..self.points[axis]).map(|i| -0.5 * l + (i as f64 + shift) * h).collect()
    }

    pub fn strides(&self) -> Vec<usize> {
        let d = self.dimension();
        let mut s = vec![1; d];
        for a in (0..d.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.points[a + 1];
        }
        s
    }

    /// Multi-index of a flat node index.
    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dimension()];
        for a in (0..self.dimension()).rev() {
            out[a] = idx % self.points[a];
            idx /= self.points[a];
        }
        out
    }

    /// Coordinates of every node, flattened.
    pub fn node_coordinates(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dimension()).map(|a| self.axis_coordinates(a)).collect();
        (0..self.len())
            .map(|i| self.unravel(i).iter().enumerate().map(|(a, &j)| axes[a][j]).collect())
            .collect()
    }

    /// Discrete wavenumbers (FFT ordering) of a periodic axis.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.points[axis];
        let dk = 2.0 * PI / self.lengths[axis];
        (0..n)
            .map(|j| if j <= n / 2 { j as f64 * dk } else { (j as f64 - n as f64) * dk })
            .collect()
    }

    /// Normalized plane wave `exp(i k.r) / sqrt(V)`.
    pub fn plane_wave(&self, k: &[f64]) -> Vec<c64> {
        let norm = 1.0 / self.volume().sqrt();
        self.node_coordinates()
            .iter()
            .map(|r| {
                let phase: f64 = r.iter().zip(k).map(|(x, kx)| x * kx).sum();
                c64::from_polar(norm, phase)
            })
            .collect()
    }

    fn check(&self, f: &[c64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::Dimension { expected: self.len(), got: f.len() });
        }
        Ok(())
    }

    /// Discrete `∫ conj(f) g` with uniform weights.
    pub fn inner_product(&self, f: &[c64], g: &[c64]) -> Result<c64> {
        self.check(f)?;
        self.check(g)?;
        let s: c64 = f.iter().zip(g).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.weight())
    }

    pub fn norm(&self, f: &[c64]) -> f64 {
        (f.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.weight()).sqrt()
    }

    /// Rescales `f` to unit norm in place and returns the old norm.
    pub fn normalize(&self, f: &mut [c64]) -> f64 {
        let n = self.norm(f);
        if n > 0.0 {
            let s = 1.0 / n;
            f.iter_mut().for_each(|z| *z *= s);
        }
        n
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} nodes, box {:?}, {:?}", self.points, self.lengths, self.boundary)
    }
}

/// External potential `V_tr(r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrapPotential {
    Zero,
    /// `½ Σ ω_a² x_a²`; a single frequency is applied to every axis.
    Harmonic { frequencies: Vec<f64> },
    /// Values on the nodes in flat grid order.
    Tabulated { values: Vec<f64> },
}

impl TrapPotential {
    pub fn values(&self, grid: &Grid) -> Result<Vec<f64>> {
        let v = match self {
            TrapPotential::Zero => vec![0.0; grid.len()],
            TrapPotential::Harmonic { frequencies } => {
                let d = grid.dimension();
                let w: Vec<f64> = match frequencies.len() {
                    1 => vec![frequencies[0]; d],
                    n if n == d => frequencies.clone(),
                    n => {
                        return Err(Error::Config(format!(
                            "{n} trap frequencies for a {d}-dimensional grid"
                        )))
                    }
                };
                grid.node_coordinates()
                    .iter()
                    .map(|r| 0.5 * r.iter().zip(&w).map(|(x, wa)| wa * wa * x * x).sum::<f64>())
                    .collect()
            }
            TrapPotential::Tabulated { values } => {
                if values.len() != grid.len() {
                    return Err(Error::Dimension { expected: grid.len(), got: values.len() });
                }
                values.clone()
            }
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("trap potential has non-finite values".into()));
        }
        Ok(v)
    }

    /// Ground-state energy of the bare oscillator, used to choose the
    /// initial guess of the GP solver. Zero for non-harmonic traps.
    pub fn zero_point_energy(&self, dimension: usize) -> f64 {
        match self {
            TrapPotential::Harmonic { frequencies } if frequencies.len() == 1 => {
                0.5 * frequencies[0] * dimension as f64
            }
            TrapPotential::Harmonic { frequencies } => 0.5 * frequencies.iter().sum::<f64>(),
            _ => 0.0,
        }
    }
}

/// A real self-adjoint operator on grid functions.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[c64]) -> Vec<c64>;
    /// Dense real symmetric matrix in the node basis.
    fn to_dense(&self) -> Mat<f64>;
}

/// 1D transform diagonalizing the per-axis Laplacian.
#[derive(Clone)]
enum AxisTransform {
    /// DFT, for periodic axes.
    Fourier { forward: Arc<dyn Fft<f64>>, inverse: Arc<dyn Fft<f64>> },
    /// DST-I through an odd extension of length 2(n+1), for hard walls.
    Sine { fft: Arc<dyn Fft<f64>> },
}

impl AxisTransform {
    fn forward(&self, line: &mut [c64], scratch: &mut Vec<c64>) {
        match self {
            AxisTransform::Fourier { forward, .. } => forward.process(line),
            AxisTransform::Sine { fft } => {
                let n = line.len();
                let m = 2 * (n + 1);
                scratch.clear();
                scratch.resize(m, c64::new(0.0, 0.0));
                for (i, &v) in line.iter().enumerate() {
                    scratch[i + 1] = v;
                    scratch[m - i - 1] = -v;
                }
                fft.process(scratch);
                // S_j = Σ x_m sin(π (j+1)(m+1)/(n+1)) = (i/2) Y_{j+1}
                for (j, out) in line.iter_mut().enumerate() {
                    *out = c64::new(0.0, 0.5) * scratch[j + 1];
                }
            }
        }
    }

    fn inverse(&self, line: &mut [c64], scratch: &mut Vec<c64>) {
        match self {
            AxisTransform::Fourier { inverse, .. } => {
                inverse.process(line);
                let s = 1.0 / line.len() as f64;
                line.iter_mut().for_each(|z| *z *= s);
            }
            AxisTransform::Sine { .. } => {
                self.forward(line, scratch);
                let s = 2.0 / (line.len() as f64 + 1.0);
                line.iter_mut().for_each(|z| *z *= s);
            }
        }
    }
}

/// Discrete Laplacian `∇²` on a grid.
#[derive(Clone)]
pub struct Laplacian {
    grid: Grid,
    scheme: LaplacianScheme,
    transforms: Vec<AxisTransform>,
    /// Per-axis eigenvalues, indexed like the transformed coefficients.
    symbols: Vec<Vec<f64>>,
    /// Sum of per-axis eigenvalues at every flat transform index.
    lambda: Vec<f64>,
}

impl fmt::Debug for Laplacian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Laplacian").field("grid", &self.grid).field("scheme", &self.scheme).finish()
    }
}

/// Builds the discrete Laplacian. The spectral scheme requires a periodic grid.
pub fn build_laplacian(grid: &Grid, scheme: LaplacianScheme) -> Result<Laplacian> {
    if scheme == LaplacianScheme::Spectral && grid.boundary() != Boundary::Periodic {
        return Err(Error::Config("spectral Laplacian requires a periodic grid".into()));
    }
    let mut planner = FftPlanner::new();
    let mut transforms = Vec::new();
    let mut symbols: Vec<Vec<f64>> = Vec::new();
    for axis in 0..grid.dimension() {
        let n = grid.points()[axis];
        let h = grid.spacing(axis);
        match grid.boundary() {
            Boundary::Periodic => {
                transforms.push(AxisTransform::Fourier {
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                });
                let k = grid.wavenumbers(axis);
                symbols.push(match scheme {
                    LaplacianScheme::Spectral => k.iter().map(|k| -k * k).collect(),
                    LaplacianScheme::FiniteDifference => k
                        .iter()
                        .map(|k| {
                            let s = (0.5 * k * h).sin();
                            -4.0 * s * s / (h * h)
                        })
                        .collect(),
                });
            }
            Boundary::HardWall => {
                transforms.push(AxisTransform::Sine { fft: planner.plan_fft_forward(2 * (n + 1)) });
                symbols.push(
                    (0..n)
                        .map(|j| {
                            let s = (0.5 * PI * (j as f64 + 1.0) / (n as f64 + 1.0)).sin();
                            -4.0 * s * s / (h * h)
                        })
                        .collect(),
                );
            }
        }
    }
    let lambda = (0..grid.len())
        .map(|idx| grid.unravel(idx).iter().enumerate().map(|(a, &j)| symbols[a][j]).sum())
        .collect();
    Ok(Laplacian { grid: grid.clone(), scheme, transforms, symbols, lambda })
}

impl Laplacian {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn scheme(&self) -> LaplacianScheme {
        self.scheme
    }

    /// Runs `f` over every line along `axis` of a flat array.
    fn for_each_line(&self, data: &mut [c64], axis: usize, mut f: impl FnMut(&mut [c64])) {
        let n = self.grid.points()[axis];
        let stride = self.grid.strides()[axis];
        let total = data.len();
        let mut line = vec![c64::new(0.0, 0.0); n];
        for start in 0..total {
            // start must have index 0 along `axis`
            if (start / stride) % n != 0 {
                continue;
            }
            for i in 0..n {
                line[i] = data[start + i * stride];
            }
            f(&mut line);
            for i in 0..n {
                data[start + i * stride] = line[i];
            }
        }
    }

    /// Applies `g(λ)` in the Laplacian eigenbasis, where `λ` runs over the
    /// eigenvalues of `∇²`.
    pub fn apply_function(&self, x: &[c64], g: impl Fn(f64) -> f64) -> Vec<c64> {
        let mut data = x.to_vec();
        let mut scratch = Vec::new();
        for axis in 0..self.grid.dimension() {
            let t = &self.transforms[axis];
            self.for_each_line(&mut data, axis, |line| t.forward(line, &mut scratch));
        }
        for (z, &lambda) in data.iter_mut().zip(&self.lambda) {
            *z *= g(lambda);
        }
        for axis in 0..self.grid.dimension() {
            let t = &self.transforms[axis];
            self.for_each_line(&mut data, axis, |line| t.inverse(line, &mut scratch));
        }
        data
    }

    /// All eigenvalues of the discrete Laplacian (unsorted, transform order).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    fn axis_matrix(&self, axis: usize) -> Vec<Vec<f64>> {
        let n = self.grid.points()[axis];
        let h = self.grid.spacing(axis);
        let mut m = vec![vec![0.0; n]; n];
        match (self.scheme, self.grid.boundary()) {
            (LaplacianScheme::Spectral, _) => {
                // circulant: c[m] = (1/n) Σ_j λ_j cos(2π j m / n), mirrored for exact symmetry
                let lam = &self.symbols[axis];
                let mut c = vec![0.0; n];
                for d in 0..=n / 2 {
                    let s: f64 = lam
                        .iter()
                        .enumerate()
                        .map(|(j, l)| l * (2.0 * PI * (j * d % n) as f64 / n as f64).cos())
                        .sum();
                    c[d] = s / n as f64;
                    c[(n - d) % n] = c[d];
                }
                for (i, row) in m.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = c[(i + n - j) % n];
                    }
                }
            }
            (LaplacianScheme::FiniteDifference, boundary) => {
                let inv = 1.0 / (h * h);
                for i in 0..n {
                    m[i][i] -= 2.0 * inv;
                    if i + 1 < n {
                        m[i][i + 1] += inv;
                        m[i + 1][i] += inv;
                    } else if boundary == Boundary::Periodic {
                        m[i][0] += inv;
                        m[0][i] += inv;
                    }
                }
                if boundary == Boundary::Periodic && n == 1 {
                    m[0][0] = 0.0;
                }
            }
        }
        m
    }
}

impl LinearOperator for Laplacian {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.dim(), "grid function length mismatch");
        match self.scheme {
            LaplacianScheme::Spectral => self.apply_function(x, |l| l),
            LaplacianScheme::FiniteDifference => {
                let strides = self.grid.strides();
                let periodic = self.grid.boundary() == Boundary::Periodic;
                let mut out = vec![c64::new(0.0, 0.0); x.len()];
                for (idx, o) in out.iter_mut().enumerate() {
                    let multi = self.grid.unravel(idx);
                    let mut acc = c64::new(0.0, 0.0);
                    for a in 0..self.grid.dimension() {
                        let n = self.grid.points()[a];
                        let h = self.grid.spacing(a);
                        let i = multi[a];
                        let s = strides[a];
                        let up = if i + 1 < n {
                            x[idx + s]
                        } else if periodic {
                            x[idx + s - n * s]
                        } else {
                            c64::new(0.0, 0.0)
                        };
                        let down = if i > 0 {
                            x[idx - s]
                        } else if periodic {
                            x[idx + (n - 1) * s]
                        } else {
                            c64::new(0.0, 0.0)
                        };
                        acc += (up - 2.0 * x[idx] + down) / (h * h);
                    }
                    *o = acc;
                }
                out
            }
        }
    }

    fn to_dense(&self) -> Mat<f64> {
        let n = self.grid.len();
        let strides = self.grid.strides();
        let axes: Vec<Vec<Vec<f64>>> = (0..self.grid.dimension()).map(|a| self.axis_matrix(a)).collect();
        let mut m = Mat::<f64>::zeros(n, n);
        for row in 0..n {
            let multi = self.grid.unravel(row);
            for (a, mat) in axes.iter().enumerate() {
                let i = multi[a];
                let base = row - i * strides[a];
                for (j, &v) in mat[i].iter().enumerate() {
                    if v != 0.0 {
                        m[(row, base + j * strides[a])] += v;
                    }
                }
            }
        }
        m
    }
}
