//! Flow diagnostics: kinetic energy, enstrophy, shell-binned energy spectra,
//! the two time-averaged error metrics, and spectral restriction of fine-grid
//! fields onto a coarse grid (the filtered-DNS construction).

use crate::fields::{GridSpec, SpectralVelocity, VelocityField};
use crate::{Error, Result};

/// Shell-binned kinetic energy spectrum at one time instant.
///
/// Shells are width-1 annuli centered on integer mode magnitudes; `shells[k]`
/// holds the energy of modes with `k - 1/2 <= |m| < k + 1/2`. Index 0 is the
/// mean-flow mode and indices above `n/2` catch the corner modes, so the sum
/// over all entries is exactly the kinetic energy.
#[derive(Debug, Clone)]
pub struct SpectrumStats {
    time: f64,
    shells: Vec<f64>,
}

impl SpectrumStats {
    pub fn from_shells(time: f64, shells: Vec<f64>) -> Self {
        Self { time, shells }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Energy in shell `k`; zero beyond the stored range.
    pub fn shell(&self, k: usize) -> f64 {
        self.shells.get(k).copied().unwrap_or(0.0)
    }

    /// All stored shells, mean-flow entry included.
    pub fn shells(&self) -> &[f64] {
        &self.shells
    }

    /// Total energy across every shell (equals kinetic energy by Parseval).
    pub fn total(&self) -> f64 {
        self.shells.iter().sum()
    }
}

/// Kinetic energy `1/2 integral |u|^2 dx`.
pub fn kinetic_energy(u: &VelocityField) -> f64 {
    let cell = u.grid().dx() * u.grid().dx();
    let sum: f64 = u
        .ux()
        .values()
        .iter()
        .zip(u.uy().values().iter())
        .map(|(a, b)| a * a + b * b)
        .sum();
    0.5 * sum * cell
}

/// Enstrophy `1/2 integral omega^2 dx`.
pub fn enstrophy(u: &VelocityField) -> Result<f64> {
    Ok(enstrophy_spectral(&u.to_spectral()?))
}

pub(crate) fn enstrophy_spectral(hat: &SpectralVelocity) -> f64 {
    let grid = hat.grid();
    let n = grid.n();
    let mut sum = 0.0;
    for j in 0..n {
        let ky = grid.wavenumber_deriv(j);
        for i in 0..n {
            let kx = grid.wavenumber_deriv(i);
            let w = kx * hat.uy.coeffs()[[j, i]] - ky * hat.ux.coeffs()[[j, i]];
            sum += w.norm_sqr();
        }
    }
    0.5 * grid.side() * grid.side() * sum
}

/// Shell-binned energy spectrum; shells are in units of `2*pi/side`.
pub fn energy_spectrum(u: &VelocityField, time: f64) -> Result<SpectrumStats> {
    Ok(spectrum_spectral(&u.to_spectral()?, time))
}

pub(crate) fn spectrum_spectral(hat: &SpectralVelocity, time: f64) -> SpectrumStats {
    let grid = hat.grid();
    let n = grid.n();
    let half = n as f64 / 2.0;
    let kmax = (half * std::f64::consts::SQRT_2).ceil() as usize;
    let mut shells = vec![0.0; kmax + 1];
    let weight = 0.5 * grid.side() * grid.side();
    for j in 0..n {
        let my = grid.mode(j) as f64;
        for i in 0..n {
            let mx = grid.mode(i) as f64;
            let shell = (mx * mx + my * my).sqrt().round() as usize;
            shells[shell] += weight
                * (hat.ux.coeffs()[[j, i]].norm_sqr() + hat.uy.coeffs()[[j, i]].norm_sqr());
        }
    }
    SpectrumStats { time, shells }
}

/// Time-averaged relative kinetic-energy error against a reference series.
pub fn err_energy(series: &[f64], reference: &[f64]) -> Result<f64> {
    if series.len() != reference.len() {
        return Err(Error::InvalidParameter(format!(
            "energy series lengths differ: {} vs {}",
            series.len(),
            reference.len()
        )));
    }
    if series.is_empty() {
        return Err(Error::InvalidParameter("empty energy series".into()));
    }
    let mut acc = 0.0;
    for (&e, &r) in series.iter().zip(reference) {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "reference energy must be positive, got {r}"
            )));
        }
        acc += ((e - r) / r).abs();
    }
    Ok(acc / series.len() as f64)
}

/// Result of the log-scaled spectrum error: the signed value is the headline
/// number; the absolute variant cannot hide compensating over- and
/// under-predictions; shells with a non-positive energy on either side are
/// skipped and counted.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumError {
    pub signed: f64,
    pub absolute: f64,
    pub excluded_shells: usize,
}

/// Time- and shell-averaged `log10` spectrum error over shells `1..=k_max`.
pub fn err_spectrum(
    spectra: &[SpectrumStats],
    reference: &[SpectrumStats],
    k_max: usize,
) -> Result<SpectrumError> {
    if spectra.len() != reference.len() {
        return Err(Error::InvalidParameter(format!(
            "spectrum series lengths differ: {} vs {}",
            spectra.len(),
            reference.len()
        )));
    }
    if spectra.is_empty() || k_max == 0 {
        return Err(Error::InvalidParameter(
            "err_spectrum needs at least one snapshot and one shell".into(),
        ));
    }
    let mut signed = 0.0;
    let mut absolute = 0.0;
    let mut excluded = 0;
    let mut counted_times = 0usize;
    for (s, r) in spectra.iter().zip(reference) {
        let mut time_signed = 0.0;
        let mut time_abs = 0.0;
        let mut valid = 0usize;
        for k in 1..=k_max {
            let (e, e_ref) = (s.shell(k), r.shell(k));
            if e > 0.0 && e_ref > 0.0 {
                let ratio = (e / e_ref).log10();
                time_signed += ratio;
                time_abs += ratio.abs();
                valid += 1;
            } else {
                excluded += 1;
            }
        }
        if valid > 0 {
            signed += time_signed / valid as f64;
            absolute += time_abs / valid as f64;
            counted_times += 1;
        }
    }
    if counted_times == 0 {
        return Err(Error::InvalidParameter(
            "err_spectrum: every shell was excluded".into(),
        ));
    }
    Ok(SpectrumError {
        signed: signed / counted_times as f64,
        absolute: absolute / counted_times as f64,
        excluded_shells: excluded,
    })
}

/// Restrict a fine-grid field to a coarse grid by sharp spectral truncation.
/// Divergence-free fields stay divergence-free exactly.
pub fn filtered_dns_project(u_fine: &VelocityField, coarse: GridSpec) -> Result<VelocityField> {
    let fine = u_fine.grid();
    if fine.n() % coarse.n() != 0 || fine.n() < coarse.n() {
        return Err(Error::Config(format!(
            "fine grid {} is not a multiple of coarse grid {}",
            fine.n(),
            coarse.n()
        )));
    }
    if (fine.side() - coarse.side()).abs() > 1e-12 * coarse.side() {
        return Err(Error::Config(format!(
            "grids cover different domains: side {} vs {}",
            fine.side(),
            coarse.side()
        )));
    }
    let hat_fine = u_fine.to_spectral()?;
    let mut hat_coarse = SpectralVelocity::zeros(coarse);
    let keep = coarse.n() as i64 / 2 - 1;
    for my in -keep..=keep {
        for mx in -keep..=keep {
            hat_coarse.ux.set_mode(mx, my, hat_fine.ux.mode(mx, my));
            hat_coarse.uy.set_mode(mx, my, hat_fine.uy.mode(mx, my));
        }
    }
    hat_coarse.to_physical()
}
