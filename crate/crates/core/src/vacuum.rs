//! Approximate vacuum in a truncated number-state space.
//!
//! A `(k, -k)` pair has the two-mode squeezed vacuum `Σ c_n |n⟩_k |n⟩_{-k}`
//! with `c_n = sqrt(1-r) r^{n/2}`. The zero mode has the quadrature
//! eigenstate `(a0 + a0†)|vac⟩ = 2 sqrt(N0) |vac⟩`, whose number-state
//! coefficients are Hermite functions evaluated at `sqrt(2 N0)`.

use std::f64::consts::PI;

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extra levels beyond `2 N0` required before the zero-mode vacuum is
/// considered resolved.
pub const ZERO_MODE_MARGIN: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedModeVacuum {
    pub epsilon: f64,
    pub gn: f64,
    pub omega: f64,
    /// `(ε+gn-ω)/(ε+gn+ω)`.
    pub ratio_r: f64,
    /// `sqrt(1-r)`.
    pub norm_a: f64,
    pub n_max: usize,
    /// `c_n` for `n = 0..=n_max`, the weight of `|n⟩_k |n⟩_{-k}`.
    pub coefficients: Vec<f64>,
    /// `r^{n_max+1}`, the norm missing from the truncated sum.
    pub truncation_error: f64,
}

impl PairedModeVacuum {
    /// `Σ n c_n²`, the occupation of each of the two modes.
    pub fn depletion(&self) -> f64 {
        self.coefficients.iter().enumerate().map(|(n, c)| n as f64 * c * c).sum()
    }

    /// `r/(1-r)`, the untruncated occupation.
    pub fn depletion_exact(&self) -> f64 {
        self.ratio_r / (1.0 - self.ratio_r)
    }

    /// `Σ_{n > n_max} n c_n²` in closed form.
    pub fn depletion_tail(&self) -> f64 {
        let r = self.ratio_r;
        let m = self.n_max as f64 + 1.0;
        // Σ_{n≥m} n (1-r) r^n = r^m (m(1-r) + r) / (1-r)
        r.powf(m) * (m * (1.0 - r) + r) / (1.0 - r)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }

    /// Amplitudes `(X, Y)` of `b_k = X a_k - Y a_{-k}†` for this pair.
    pub fn amplitudes(&self) -> (f64, f64) {
        let e = self.epsilon + self.gn;
        ((0.5 * (e / self.omega + 1.0)).sqrt(), (0.5 * (e / self.omega - 1.0)).max(0.0).sqrt())
    }
}

/// Squeezed vacuum of the pair with single-particle energy `ε` and
/// interaction `gn`, annihilated by `b_k` and `b_{-k}`.
pub fn pair_vacuum(epsilon: f64, gn: f64, n_max: usize) -> Result<PairedModeVacuum> {
    if !(epsilon >= 0.0 && gn >= 0.0 && epsilon.is_finite() && gn.is_finite()) {
        return Err(Error::Domain(format!("need ε ≥ 0 and gn ≥ 0, got ε = {epsilon}, gn = {gn}")));
    }
    let e = epsilon + gn;
    let omega = ((e - gn) * (e + gn)).sqrt();
    if !(omega > 0.0) {
        return Err(Error::Domain(
            "ε = 0 is the zero-mode pair; use zero_mode_vacuum".to_string(),
        ));
    }
    // (e-ω)/(e+ω) = gn² / (e+ω)², free of cancellation
    let ratio_r = (gn / (e + omega)).powi(2);
    let norm_a = (1.0 - ratio_r).sqrt();
    let sr = ratio_r.sqrt();
    let mut coefficients = Vec::with_capacity(n_max + 1);
    let mut c = norm_a;
    for _ in 0..=n_max {
        coefficients.push(c);
        c *= sr;
    }
    Ok(PairedModeVacuum {
        epsilon,
        gn,
        omega,
        ratio_r,
        norm_a,
        n_max,
        coefficients,
        truncation_error: ratio_r.powi(n_max as i32 + 1),
    })
}

/// `‖(X a_k - Y a_{-k}†) Σ c_n |n,n⟩‖` over the components `|n-1, n⟩`,
/// `n = 1..=n_max`. The component pushed above `n_max` is left out.
pub fn annihilation_residual(coefficients: &[f64], x_amp: f64, y_amp: f64) -> f64 {
    (1..coefficients.len())
        .map(|n| {
            let v = (n as f64).sqrt() * (x_amp * coefficients[n] - y_amp * coefficients[n - 1]);
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// Phase convention linking the quadrature `a0 + a0†` to `⟨x|n⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConvention {
    /// `c_n = ψ_n(sqrt(2 N0))`: eigenstate of `a0 + a0†`.
    Quadrature,
    /// `c_n = iⁿ ψ_n(sqrt(2 N0))`: the Fourier integral taken literally.
    Fourier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroModeVacuum {
    pub n0: f64,
    pub n_max: usize,
    pub coefficients: Vec<c64>,
    /// Always true: the state is an improper eigenstate and is not normalized.
    pub delta_normalized: bool,
    /// `Σ_{m≤n} |c_m|²`; grows without bound as `n_max` increases.
    pub partial_norms: Vec<f64>,
    pub convention: PhaseConvention,
    /// `‖((a0+a0†) - 2 sqrt(N0)) c‖` over levels `0..n_max`.
    pub residual: f64,
    /// Same residual under the rejected convention.
    pub rejected_residual: f64,
    pub warning: Option<String>,
}

/// Normalized Hermite functions `ψ_0..=ψ_n_max` at `x`, by the three-term
/// recurrence. Values are carried with a separate exponent so that
/// `exp(-x²/2)` does not underflow before the recurrence grows out of it.
pub fn hermite_functions(x: f64, n_max: usize) -> Vec<f64> {
    const BIG: f64 = 1e150;
    let mut out = Vec::with_capacity(n_max + 1);
    let mut log_scale = -0.5 * x * x - 0.25 * PI.ln();
    let mut prev = 0.0;
    let mut cur = 1.0;
    let emit = |v: f64, s: f64| if v == 0.0 { 0.0 } else { v * s.exp() };
    out.push(emit(cur, log_scale));
    for n in 0..n_max {
        let next = if n == 0 {
            2f64.sqrt() * x * cur
        } else {
            (2.0 / (n as f64 + 1.0)).sqrt() * x * cur - (n as f64 / (n as f64 + 1.0)).sqrt() * prev
        };
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            prev /= BIG;
            cur /= BIG;
            log_scale += BIG.ln();
        }
        out.push(emit(cur, log_scale));
    }
    out
}

/// Applies `(a + a†) - shift` to `c` and returns the norm over rows
/// `0..c.len()-1` (the top row needs `c_{n_max+1}`).
pub fn quadrature_residual(c: &[c64], shift: f64) -> f64 {
    let top = c.len().saturating_sub(1);
    (0..top)
        .map(|n| {
            let mut v = c[n + 1] * ((n + 1) as f64).sqrt() - c[n] * shift;
            if n > 0 {
                v += c[n - 1] * (n as f64).sqrt();
            }
            v.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Zero-mode vacuum with `(a0 + a0†)|vac⟩ = 2 sqrt(N0)|vac⟩`. Both phase
/// conventions are evaluated and the one with the smaller residual kept.
pub fn zero_mode_vacuum(n0: f64, n_max: usize) -> Result<ZeroModeVacuum> {
    if !(n0 >= 0.0 && n0.is_finite()) {
        return Err(Error::Domain(format!("N0 must be finite and non-negative, got {n0}")));
    }
    if n_max == 0 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    let x = (2.0 * n0).sqrt();
    let psi = hermite_functions(x, n_max);
    let shift = 2.0 * n0.sqrt();
    let plain: Vec<c64> = psi.iter().map(|&p| c64::new(p, 0.0)).collect();
    let rotated: Vec<c64> = psi.iter().enumerate().map(|(n, &p)| c64::i().powu(n as u32) * p).collect();
    let r_plain = quadrature_residual(&plain, shift);
    let r_rot = quadrature_residual(&rotated, shift);
    let (coefficients, convention, residual, rejected_residual) = if r_plain <= r_rot {
        (plain, PhaseConvention::Quadrature, r_plain, r_rot)
    } else {
        (rotated, PhaseConvention::Fourier, r_rot, r_plain)
    };
    let mut acc = 0.0;
    let partial_norms = coefficients
        .iter()
        .map(|c| {
            acc += c.norm_sqr();
            acc
        })
        .collect();
    let needed = (2.0 * n0).ceil() as usize + ZERO_MODE_MARGIN;
    let warning = (n_max < needed).then(|| {
        let msg = format!(
            "n_max = {n_max} does not resolve the zero-mode vacuum (need ≥ {needed}); residual {residual:.3e}"
        );
        log::warn!("{msg}");
        msg
    });
    Ok(ZeroModeVacuum {
        n0,
        n_max,
        coefficients,
        delta_normalized: true,
        partial_norms,
        convention,
        residual,
        rejected_residual,
        warning,
    })
}

/// `(1/sqrt(2π)) ∫ e^{i sqrt(2N0) x} ψ_n(x) dx` by the trapezoid rule on
/// `[-x_max, x_max]`, evaluated independently of the recurrence above.
pub fn zero_mode_coefficient_quadrature(n0: f64, n: usize, points: usize) -> c64 {
    let k = (2.0 * n0).sqrt();
    let x_max = (2.0 * n as f64 + 1.0).sqrt() + 12.0;
    let h = 2.0 * x_max / points as f64;
    let mut sum = c64::new(0.0, 0.0);
    for j in 0..=points {
        let x = -x_max + j as f64 * h;
        let w = if j == 0 || j == points { 0.5 } else { 1.0 };
        sum += c64::from_polar(1.0, k * x) * hermite_direct(x, n) * w;
    }
    sum * h / (2.0 * PI).sqrt()
}

/// `ψ_n(x)` from the physicists' polynomial `H_n` with explicit scaling,
/// for moderate `n` only.
fn hermite_direct(x: f64, n: usize) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    if n == 0 {
        h1 = h0;
    } else {
        for m in 1..n {
            let h2 = 2.0 * x * h1 - 2.0 * m as f64 * h0;
            h0 = h1;
            h1 = h2;
        }
    }
    let log_norm = -0.5 * ((n as f64) * 2f64.ln() + ln_factorial(n) + 0.5 * PI.ln());
    h1 * (log_norm - 0.5 * x * x).exp()
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}
