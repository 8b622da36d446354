//! Periodic-grid field types, Fourier transforms, spectral differential
//! operators, and the Leray (divergence-free) projection.
//!
//! Transform convention: the forward transform is normalized by `1/n^2`, so
//! coefficients are mode amplitudes and `inverse(forward(f)) = f`. With this
//! convention Parseval reads `integral |f|^2 dx = side^2 * sum_k |F_k|^2`,
//! i.e. the mean square of the samples equals the sum of squared coefficient
//! magnitudes.

mod fft;
mod snapshot;

pub use snapshot::{read_snapshot, write_snapshot};

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftDirection;

use crate::{Error, Result};

/// Square periodic grid: `n` points per side over a domain of length `side`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n: usize,
    side: f64,
}

impl GridSpec {
    /// A grid must have at least 8 points per side and a power-of-two size.
    pub fn new(n: usize, side: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "grid size must be a power of two >= 8, got {n}"
            )));
        }
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "domain side must be positive and finite, got {side}"
            )));
        }
        Ok(Self { n, side })
    }

    /// Unit square with `n` points per side.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn dx(&self) -> f64 {
        self.side / self.n as f64
    }

    /// Signed integer mode for a storage index, in `[-n/2, n/2)`.
    pub fn mode(&self, idx: usize) -> i64 {
        debug_assert!(idx < self.n);
        if idx < self.n / 2 {
            idx as i64
        } else {
            idx as i64 - self.n as i64
        }
    }

    /// Physical wavenumber `2*pi*m/side` of a storage index.
    pub fn wavenumber(&self, idx: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.mode(idx) as f64 / self.side
    }

    /// Wavenumber for signed (odd) operators: derivatives, divergence and the
    /// projection. The Nyquist mode has no conjugate partner in storage, so a
    /// signed wavenumber there would break Hermitian symmetry; it is treated
    /// as zero, the usual convention when differentiating real data.
    pub fn wavenumber_deriv(&self, idx: usize) -> f64 {
        if idx == self.n / 2 {
            0.0
        } else {
            self.wavenumber(idx)
        }
    }

    /// Largest fully resolved integer shell, `n/2`.
    pub fn max_shell(&self) -> usize {
        self.n / 2
    }
}

/// Scalar field sampled on a periodic grid; `values[[j, i]]` is the sample at
/// `(x, y) = (i*dx, j*dx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: GridSpec,
    values: Array2<f64>,
}

impl RealField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: Array2::zeros((grid.n, grid.n)),
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let dx = grid.dx();
        let values = Array2::from_shape_fn((grid.n, grid.n), |(j, i)| {
            f(i as f64 * dx, j as f64 * dx)
        });
        Self { grid, values }
    }

    pub fn from_values(grid: GridSpec, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.n, grid.n) {
            return Err(Error::GridMismatch {
                expected: grid.n,
                found: values.nrows(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise maximum magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Complex Fourier coefficients of a scalar field (full `n x n` storage with
/// Hermitian redundancy).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Array2<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            coeffs: Array2::from_elem((grid.n, grid.n), Complex64::new(0.0, 0.0)),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Coefficient of the signed mode `(mx, my)`.
    pub fn mode(&self, mx: i64, my: i64) -> Complex64 {
        let n = self.grid.n as i64;
        let i = mx.rem_euclid(n) as usize;
        let j = my.rem_euclid(n) as usize;
        self.coeffs[[j, i]]
    }

    pub fn set_mode(&mut self, mx: i64, my: i64, value: Complex64) {
        let n = self.grid.n as i64;
        let i = mx.rem_euclid(n) as usize;
        let j = my.rem_euclid(n) as usize;
        self.coeffs[[j, i]] = value;
    }

    /// Average each coefficient with the conjugate of its mirror so the field
    /// transforms back to exactly real data.
    pub fn enforce_hermitian(&mut self) {
        let n = self.grid.n;
        for j in 0..n {
            let jm = (n - j) % n;
            for i in 0..n {
                let im = (n - i) % n;
                if (j, i) < (jm, im) {
                    let a = self.coeffs[[j, i]];
                    let b = self.coeffs[[jm, im]];
                    let avg = 0.5 * (a + b.conj());
                    self.coeffs[[j, i]] = avg;
                    self.coeffs[[jm, im]] = avg.conj();
                } else if (j, i) == (jm, im) {
                    self.coeffs[[j, i]] = Complex64::new(self.coeffs[[j, i]].re, 0.0);
                }
            }
        }
    }

    #[cfg(debug_assertions)]
    pub(crate) fn debug_assert_hermitian(&self) {
        let n = self.grid.n;
        let scale = self
            .coeffs
            .iter()
            .fold(0.0_f64, |acc, c| acc.max(c.norm()))
            .max(1e-300);
        for j in 0..n {
            let jm = (n - j) % n;
            for i in 0..n {
                let im = (n - i) % n;
                let diff = (self.coeffs[[j, i]] - self.coeffs[[jm, im]].conj()).norm();
                debug_assert!(
                    diff <= 1e-10 * scale,
                    "hermitian symmetry violated at mode ({i},{j}): {diff:e}"
                );
            }
        }
    }
}

/// Two-component velocity field on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    ux: RealField,
    uy: RealField,
}

impl VelocityField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            ux: RealField::zeros(grid),
            uy: RealField::zeros(grid),
        }
    }

    pub fn new(ux: RealField, uy: RealField) -> Result<Self> {
        if ux.grid != uy.grid {
            return Err(Error::GridMismatch {
                expected: ux.grid.n,
                found: uy.grid.n,
            });
        }
        Ok(Self { ux, uy })
    }

    pub fn from_fn(
        grid: GridSpec,
        fx: impl Fn(f64, f64) -> f64,
        fy: impl Fn(f64, f64) -> f64,
    ) -> Self {
        Self {
            ux: RealField::from_fn(grid, fx),
            uy: RealField::from_fn(grid, fy),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.ux.grid
    }

    pub fn ux(&self) -> &RealField {
        &self.ux
    }

    pub fn uy(&self) -> &RealField {
        &self.uy
    }

    pub fn ux_mut(&mut self) -> &mut RealField {
        &mut self.ux
    }

    pub fn uy_mut(&mut self) -> &mut RealField {
        &mut self.uy
    }

    pub fn is_finite(&self) -> bool {
        self.ux.is_finite() && self.uy.is_finite()
    }

    /// `sqrt(integral |u|^2 dx)` over the domain.
    pub fn l2_norm(&self) -> f64 {
        let cell = self.grid().dx() * self.grid().dx();
        let sum: f64 = self
            .ux
            .values
            .iter()
            .zip(self.uy.values.iter())
            .map(|(a, b)| a * a + b * b)
            .sum();
        (sum * cell).sqrt()
    }

    /// Root-mean-square speed, `l2_norm / side`.
    pub fn rms(&self) -> f64 {
        self.l2_norm() / self.grid().side()
    }

    pub fn to_spectral(&self) -> Result<SpectralVelocity> {
        Ok(SpectralVelocity {
            ux: dft_forward(&self.ux)?,
            uy: dft_forward(&self.uy)?,
        })
    }
}

/// Fourier-space view of a velocity field.
#[derive(Debug, Clone)]
pub struct SpectralVelocity {
    pub ux: SpectralField,
    pub uy: SpectralField,
}

impl SpectralVelocity {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            ux: SpectralField::zeros(grid),
            uy: SpectralField::zeros(grid),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.ux.grid
    }

    pub fn to_physical(&self) -> Result<VelocityField> {
        VelocityField::new(dft_inverse(&self.ux)?, dft_inverse(&self.uy)?)
    }

    /// Project every mode onto its divergence-free part in place.
    pub fn project(&mut self) {
        let grid = self.grid();
        let n = grid.n;
        for j in 0..n {
            let ky = grid.wavenumber_deriv(j);
            for i in 0..n {
                let kx = grid.wavenumber_deriv(i);
                let k2 = kx * kx + ky * ky;
                if k2 == 0.0 {
                    continue;
                }
                let ax = self.ux.coeffs[[j, i]];
                let ay = self.uy.coeffs[[j, i]];
                let dot = (kx * ax + ky * ay) / k2;
                self.ux.coeffs[[j, i]] = ax - kx * dot;
                self.uy.coeffs[[j, i]] = ay - ky * dot;
            }
        }
    }

    /// Largest per-mode divergence magnitude `|k . u_hat|`.
    pub fn max_divergence(&self) -> f64 {
        let grid = self.grid();
        let n = grid.n;
        let mut max = 0.0_f64;
        for j in 0..n {
            let ky = grid.wavenumber_deriv(j);
            for i in 0..n {
                let kx = grid.wavenumber_deriv(i);
                let div = kx * self.ux.coeffs[[j, i]] + ky * self.uy.coeffs[[j, i]];
                max = max.max(div.norm());
            }
        }
        max
    }

    pub fn is_finite(&self) -> bool {
        self.ux.is_finite() && self.uy.is_finite()
    }
}

/// Forward transform with `1/n^2` normalization (coefficients are amplitudes).
pub fn dft_forward(f: &RealField) -> Result<SpectralField> {
    if !f.is_finite() {
        return Err(Error::NonFinite("dft_forward input"));
    }
    let n = f.grid.n;
    let buf = Array2::from_shape_fn((n, n), |(j, i)| Complex64::new(f.values[[j, i]], 0.0));
    let mut coeffs = fft::transform2(buf, FftDirection::Forward);
    let norm = 1.0 / (n * n) as f64;
    coeffs.mapv_inplace(|c| c * norm);
    Ok(SpectralField {
        grid: f.grid,
        coeffs,
    })
}

/// Inverse transform; imaginary residue from Hermitian-symmetric inputs is dropped.
pub fn dft_inverse(f: &SpectralField) -> Result<RealField> {
    if !f.is_finite() {
        return Err(Error::NonFinite("dft_inverse input"));
    }
    let values = fft::transform2(f.coeffs.clone(), FftDirection::Inverse);
    Ok(RealField {
        grid: f.grid,
        values: values.mapv(|c| c.re),
    })
}

/// Leray projection: removes the gradient part so the output is divergence-free.
pub fn leray_project(u: &VelocityField) -> Result<VelocityField> {
    let mut hat = u.to_spectral()?;
    hat.project();
    hat.to_physical()
}

/// Spectral divergence `du_x/dx + du_y/dy` as a physical field.
pub fn divergence(u: &VelocityField) -> Result<RealField> {
    let hat = u.to_spectral()?;
    let grid = u.grid();
    let n = grid.n;
    let mut div = SpectralField::zeros(grid);
    for j in 0..n {
        let ky = grid.wavenumber_deriv(j);
        for i in 0..n {
            let kx = grid.wavenumber_deriv(i);
            div.coeffs[[j, i]] = Complex64::new(0.0, 1.0)
                * (kx * hat.ux.coeffs[[j, i]] + ky * hat.uy.coeffs[[j, i]]);
        }
    }
    dft_inverse(&div)
}

/// Scalar vorticity `du_y/dx - du_x/dy` as a physical field.
pub fn vorticity(u: &VelocityField) -> Result<RealField> {
    let hat = u.to_spectral()?;
    let grid = u.grid();
    let n = grid.n;
    let mut w = SpectralField::zeros(grid);
    for j in 0..n {
        let ky = grid.wavenumber_deriv(j);
        for i in 0..n {
            let kx = grid.wavenumber_deriv(i);
            w.coeffs[[j, i]] = Complex64::new(0.0, 1.0)
                * (kx * hat.uy.coeffs[[j, i]] - ky * hat.ux.coeffs[[j, i]]);
        }
    }
    dft_inverse(&w)
}

/// L2 norm of the full velocity gradient tensor over the domain:
/// `sqrt(sum_ij integral (d_i u_j)^2 dx)`.
pub fn grad_norm(u: &VelocityField) -> Result<f64> {
    let hat = u.to_spectral()?;
    Ok(grad_norm_spectral(&hat))
}

pub(crate) fn grad_norm_spectral(hat: &SpectralVelocity) -> f64 {
    let grid = hat.grid();
    let n = grid.n;
    let mut sum = 0.0;
    for j in 0..n {
        let ky = grid.wavenumber_deriv(j);
        for i in 0..n {
            let kx = grid.wavenumber_deriv(i);
            let k2 = kx * kx + ky * ky;
            sum += k2 * (hat.ux.coeffs[[j, i]].norm_sqr() + hat.uy.coeffs[[j, i]].norm_sqr());
        }
    }
    (sum * grid.side * grid.side).sqrt()
}

/// Spectral x-derivative.
pub fn derivative_x(f: &SpectralField) -> SpectralField {
    derivative(f, true)
}

/// Spectral y-derivative.
pub fn derivative_y(f: &SpectralField) -> SpectralField {
    derivative(f, false)
}

fn derivative(f: &SpectralField, along_x: bool) -> SpectralField {
    let grid = f.grid;
    let n = grid.n;
    let mut out = f.clone();
    for j in 0..n {
        let ky = grid.wavenumber_deriv(j);
        for i in 0..n {
            let kx = grid.wavenumber_deriv(i);
            let k = if along_x { kx } else { ky };
            out.coeffs[[j, i]] *= Complex64::new(0.0, k);
        }
    }
    out
}

/// 2/3-rule truncation: zero every coefficient with `|m| > n/3` in either index.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    dealias_inplace(&mut out);
    out
}

pub(crate) fn dealias_inplace(f: &mut SpectralField) {
    let grid = f.grid;
    let n = grid.n;
    let cutoff = n as f64 / 3.0;
    for j in 0..n {
        let my = grid.mode(j).unsigned_abs() as f64;
        for i in 0..n {
            let mx = grid.mode(i).unsigned_abs() as f64;
            if mx > cutoff || my > cutoff {
                f.coeffs[[j, i]] = Complex64::new(0.0, 0.0);
            }
        }
    }
}
