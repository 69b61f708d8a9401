//! Square 2D FFTs and periodic-grid helpers shared by the lattice and
//! envelope code. Arrays are row-major `side * side` with the first index
//! running along x.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

/// Forward and inverse 2D transforms of one square size.
#[derive(Clone)]
pub struct Fft2 {
    side: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("side", &self.side).finish()
    }
}

impl Fft2 {
    pub fn new(side: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            side,
            forward: planner.plan_fft_forward(side),
            inverse: planner.plan_fft_inverse(side),
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    fn rows(&self, fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let n = self.side;
        let rows_per_task = (n / (4 * rayon::current_num_threads()).max(1)).max(1);
        data.par_chunks_mut(n * rows_per_task)
            .for_each(|chunk| fft.process(chunk));
    }

    fn apply(&self, fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.side * self.side);
        self.rows(fft, data);
        transpose_in_place(data, self.side);
        self.rows(fft, data);
        transpose_in_place(data, self.side);
    }

    /// Unnormalized `sum_x f(x) e^{-i k x}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(&self.forward, data);
    }

    /// Inverse including the `1 / side^2` factor, so `inverse(forward(f)) = f`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(&self.inverse, data);
        let s = 1.0 / (self.side * self.side) as f64;
        data.par_iter_mut().for_each(|z| *z *= s);
    }
}

fn transpose_in_place(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Signed mode number of FFT bin `j` on a grid of `n` points, in `[-n/2, n/2)`.
pub fn signed_mode(j: usize, n: usize) -> i64 {
    if j >= n.div_ceil(2) {
        j as i64 - n as i64
    } else {
        j as i64
    }
}

/// Angular wavenumber of bin `j` for period `length`.
pub fn wavenumber(j: usize, n: usize, length: f64) -> f64 {
    2.0 * PI * signed_mode(j, n) as f64 / length
}

/// True for the unpaired Nyquist bin of an even grid.
pub fn is_nyquist(j: usize, n: usize) -> bool {
    n.is_multiple_of(2) && j == n / 2
}

pub fn to_complex(real: &[f64]) -> Vec<Complex64> {
    real.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// Normalized DFT coefficients `c_j = side^-2 sum u e^{-i k_j . m}` of a real lattice field.
pub fn lattice_dft(fft: &Fft2, real: &[f64]) -> Vec<Complex64> {
    let mut z = to_complex(real);
    fft.forward(&mut z);
    let s = 1.0 / (fft.side() * fft.side()) as f64;
    z.iter_mut().for_each(|c| *c *= s);
    z
}

/// Inverse of [`lattice_dft`], keeping only the real part.
pub fn lattice_idft_real(fft: &Fft2, coeffs: &[Complex64]) -> Vec<f64> {
    let mut z = coeffs.to_vec();
    fft.inverse(&mut z);
    let s = (fft.side() * fft.side()) as f64;
    z.iter().map(|c| c.re * s).collect()
}

/// Discrete analogue of the `L^1` norm of the Fourier transform on the torus:
/// the sum of the moduli of the normalized DFT coefficients.
pub fn fourier_l1_norm(fft: &Fft2, real: &[f64]) -> f64 {
    lattice_dft(fft, real).iter().map(|c| c.norm()).sum()
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}
