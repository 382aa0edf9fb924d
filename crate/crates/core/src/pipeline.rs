//! End-to-end chain from a condensate to its excitation spectrum.

use serde::{Deserialize, Serialize};

use crate::basis::{build_effective_hamiltonian, solve_basis, BasisOptions, BasisSet};
use crate::bogoliubov::{
    canonical_transform, diagonalize, extract_zero_mode, CanonicalTransform, SpectrumOptions,
    SymplecticSpectrum, ZeroMode,
};
use crate::error::{Error, Result};
use crate::gp::CondensateState;
use crate::quadform::{assemble, build_m, BdgMatrix, QuadraticForm};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub basis: BasisOptions,
    pub spectrum: SpectrumOptions,
}

/// Spectrum of one quadratic form. Zero-mode and canonical-transform
/// failures are kept as values so callers can report them separately.
#[derive(Debug)]
pub struct Excitations {
    pub form: QuadraticForm,
    pub bdg: BdgMatrix,
    pub spectrum: SymplecticSpectrum,
    pub zero_mode: Result<ZeroMode>,
    /// Computed only for stable spectra.
    pub transform: Option<Result<CanonicalTransform>>,
}

impl Excitations {
    pub fn from_form(form: QuadraticForm, opts: &SpectrumOptions) -> Result<Self> {
        let bdg = build_m(&form);
        let spectrum = diagonalize(&bdg, opts)?;
        let zero_mode = extract_zero_mode(&spectrum, &bdg, opts);
        let transform = spectrum
            .stable
            .then(|| canonical_transform(&spectrum, zero_mode.as_ref().ok(), opts));
        Ok(Excitations { form, bdg, spectrum, zero_mode, transform })
    }

    /// The first error a strict caller should act on: instability, a
    /// missing zero mode, then a failed canonical check.
    pub fn structural_error(&self) -> Option<Error> {
        if !self.spectrum.stable {
            return Some(Error::UnsupportedStructure(format!(
                "unstable spectrum: {} complex eigenvalues",
                self.spectrum.unstable_modes.len()
            )));
        }
        if let Err(Error::ZeroModeMissing { smallest, tol }) = &self.zero_mode {
            return Some(Error::ZeroModeMissing { smallest: *smallest, tol: *tol });
        }
        match &self.transform {
            Some(Err(Error::Numerical(m))) => Some(Error::Numerical(m.clone())),
            _ => None,
        }
    }
}

/// Basis of size `f` for `state` and the resulting excitations.
pub fn excitations(
    state: &CondensateState,
    f: usize,
    opts: &PipelineOptions,
) -> Result<(BasisSet, Excitations)> {
    let h = build_effective_hamiltonian(state)?;
    let basis = solve_basis(&h, f, &opts.basis)?;
    let form = assemble(&basis, state)?;
    let ex = Excitations::from_form(form, &opts.spectrum)?;
    Ok((basis, ex))
}
