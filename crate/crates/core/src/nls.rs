//! Split-step Fourier solver for the envelope equation
//!
//! ```text
//! dA/dT = -1/2 i (dX, dY) H (dX, dY)^T A + g |A|^2 A
//! ```
//!
//! on a periodic square box. `H` is the dispersion Hessian at the carrier and
//! `g` the purely imaginary nonlinear coefficient of the chosen variant. In
//! Fourier space the linear part is the multiplier `exp(i/2 K^T H K dT)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::Variant;
use crate::spectral::{is_nyquist, wavenumber, Fft2};

pub const DEFAULT_BOX_LENGTH: f64 = 40.0;
pub const DEFAULT_GRID: usize = 256;
pub const DEFAULT_NLS_DT: f64 = 1e-3;
pub const DEFAULT_BLOWUP_GUARD: f64 = 1e4;
/// Coarsest admissible grid spacing `L / M`.
pub const MAX_SPACING: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NlsError {
    #[error("grid side {0} must be a power of two of at least 8")]
    GridSide(usize),
    #[error("grid spacing {spacing} exceeds the resolution floor {MAX_SPACING}")]
    Resolution { spacing: f64 },
    #[error("nonlinear coefficient {0} must be purely imaginary")]
    NotImaginary(Complex64),
    #[error("time step {0} must be positive and finite")]
    InvalidStep(f64),
    #[error("envelope blowup at T = {time}: H4 proxy {proxy:.3e} exceeds guard {guard:.3e}")]
    EnvelopeBlowup { time: f64, proxy: f64, guard: f64 },
    #[error("requested sample time {requested} precedes the current time {current}")]
    SampleOrder { requested: f64, current: f64 },
    #[error("array of length {len} does not match grid side {side}")]
    ShapeMismatch { side: usize, len: usize },
}

/// Samples of a complex envelope on an `M x M` periodic grid of period `L`.
/// Grid point `(i, j)` sits at `(i L / M, j L / M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeField {
    side: usize,
    length: f64,
    pub time: f64,
    pub variant: Variant,
    pub data: Vec<Complex64>,
}

impl EnvelopeField {
    pub fn new(
        side: usize,
        length: f64,
        variant: Variant,
        data: Vec<Complex64>,
    ) -> Result<Self, NlsError> {
        if side < 8 || !side.is_power_of_two() {
            return Err(NlsError::GridSide(side));
        }
        let spacing = length / side as f64;
        if !(spacing > 0.0 && spacing <= MAX_SPACING) {
            return Err(NlsError::Resolution { spacing });
        }
        if data.len() != side * side {
            return Err(NlsError::ShapeMismatch { side, len: data.len() });
        }
        Ok(Self {
            side,
            length,
            time: 0.0,
            variant,
            data,
        })
    }

    pub fn zeros(side: usize, length: f64, variant: Variant) -> Result<Self, NlsError> {
        Self::new(side, length, variant, vec![Complex64::new(0.0, 0.0); side * side])
    }

    /// `a exp(-|x - c|^2 / sigma^2)` centred in the box.
    pub fn gaussian(
        side: usize,
        length: f64,
        variant: Variant,
        amplitude: f64,
        sigma: f64,
    ) -> Result<Self, NlsError> {
        let h = length / side as f64;
        let c = 0.5 * length;
        let data = (0..side * side)
            .map(|idx| {
                let x = (idx / side) as f64 * h - c;
                let y = (idx % side) as f64 * h - c;
                Complex64::new(amplitude * (-(x * x + y * y) / (sigma * sigma)).exp(), 0.0)
            })
            .collect();
        Self::new(side, length, variant, data)
    }

    /// `a exp(i (2 pi / L)(jx X + jy Y))`.
    pub fn plane_wave(
        side: usize,
        length: f64,
        variant: Variant,
        amplitude: f64,
        mode: [i64; 2],
    ) -> Result<Self, NlsError> {
        let h = length / side as f64;
        let kx = 2.0 * std::f64::consts::PI * mode[0] as f64 / length;
        let ky = 2.0 * std::f64::consts::PI * mode[1] as f64 / length;
        let data = (0..side * side)
            .map(|idx| {
                let x = (idx / side) as f64 * h;
                let y = (idx % side) as f64 * h;
                Complex64::from_polar(amplitude, kx * x + ky * y)
            })
            .collect();
        Self::new(side, length, variant, data)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.side as f64
    }

    /// Discrete `L^2` mass `sum |A|^2 h^2`.
    pub fn mass(&self) -> f64 {
        let h = self.spacing();
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * h * h
    }

    pub fn max_amplitude(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= factor);
        out
    }

    /// Periodic shift by whole grid cells: `out[i, j] = self[i - di, j - dj]`.
    pub fn shifted(&self, di: usize, dj: usize) -> Self {
        let n = self.side;
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                out.data[((i + di) % n) * n + (j + dj) % n] = self.data[i * n + j];
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlsProblem {
    pub hessian: [[f64; 2]; 2],
    pub nonlin_coeff: Complex64,
    pub dt: f64,
}

impl NlsProblem {
    pub fn new(hessian: [[f64; 2]; 2], nonlin_coeff: Complex64, dt: f64) -> Result<Self, NlsError> {
        if nonlin_coeff.re != 0.0 {
            return Err(NlsError::NotImaginary(nonlin_coeff));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(NlsError::InvalidStep(dt));
        }
        Ok(Self {
            hessian,
            nonlin_coeff,
            dt,
        })
    }
}

/// One row of the slow-time diagnostics stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeDiagnostics {
    #[serde(rename = "T")]
    pub t: f64,
    pub mass: f64,
    pub h4proxy: f64,
    pub max_amp: f64,
}

impl EnvelopeDiagnostics {
    pub const CSV_HEADER: &'static str = "T,mass,h4proxy,max_amp";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.t, self.mass, self.h4proxy, self.max_amp)
    }
}

/// Solver bound to one grid and one problem. Owns its FFT plans and caches.
#[derive(Debug, Clone)]
pub struct NlsSolver {
    problem: NlsProblem,
    side: usize,
    length: f64,
    fft: Fft2,
    /// `1/2 K^T H K` per mode.
    symbol: Vec<f64>,
    /// `(1 + |K|^2)^4` per mode.
    h4_weight: Vec<f64>,
    /// Multiplier `exp(i symbol tau)` for the last `tau` used.
    phase_cache: Option<(f64, Vec<Complex64>)>,
    pub blowup_guard: f64,
}

impl NlsSolver {
    pub fn new(problem: NlsProblem, side: usize, length: f64) -> Self {
        let h = problem.hessian;
        let mut symbol = vec![0.0; side * side];
        let mut h4_weight = vec![0.0; side * side];
        for i in 0..side {
            let kx = wavenumber(i, side, length);
            for j in 0..side {
                let ky = wavenumber(j, side, length);
                let idx = i * side + j;
                // The unpaired Nyquist modes are left untouched so real-symmetric
                // structure and exact translation invariance survive.
                if !(is_nyquist(i, side) || is_nyquist(j, side)) {
                    symbol[idx] =
                        0.5 * (h[0][0] * kx * kx + 2.0 * h[0][1] * kx * ky + h[1][1] * ky * ky);
                }
                h4_weight[idx] = (1.0 + kx * kx + ky * ky).powi(4);
            }
        }
        Self {
            problem,
            side,
            length,
            fft: Fft2::new(side),
            symbol,
            h4_weight,
            phase_cache: None,
            blowup_guard: DEFAULT_BLOWUP_GUARD,
        }
    }

    pub fn for_field(problem: NlsProblem, field: &EnvelopeField) -> Self {
        Self::new(problem, field.side, field.length)
    }

    pub fn problem(&self) -> &NlsProblem {
        &self.problem
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    fn check(&self, field: &EnvelopeField) {
        assert!(
            field.side == self.side && field.length == self.length,
            "field grid does not match solver grid"
        );
    }

    fn phases(&mut self, tau: f64) -> &[Complex64] {
        let stale = !matches!(&self.phase_cache, Some((t, _)) if *t == tau);
        if stale {
            let p = self
                .symbol
                .par_iter()
                .map(|&s| Complex64::from_polar(1.0, s * tau))
                .collect();
            self.phase_cache = Some((tau, p));
        }
        &self.phase_cache.as_ref().unwrap().1
    }

    /// Exact linear flow over `tau`, applied in place.
    pub fn linear_flow(&mut self, field: &mut EnvelopeField, tau: f64) {
        self.check(field);
        self.fft.forward(&mut field.data);
        let phases = self.phases(tau).to_vec();
        field
            .data
            .par_iter_mut()
            .zip(phases.par_iter())
            .for_each(|(z, p)| *z *= p);
        self.fft.inverse(&mut field.data);
    }

    pub fn linear_halfstep(&mut self, field: &mut EnvelopeField) {
        let tau = 0.5 * self.problem.dt;
        self.linear_flow(field, tau);
    }

    /// Pointwise exact solution of `dA/dT = g |A|^2 A`.
    pub fn nonlinear_step(&self, field: &mut EnvelopeField, dt: f64) {
        let g = self.problem.nonlin_coeff;
        field
            .data
            .par_iter_mut()
            .for_each(|z| *z *= (g * (z.norm_sqr() * dt)).exp());
    }

    pub fn strang_step(&mut self, field: &mut EnvelopeField) {
        let dt = self.problem.dt;
        self.strang_step_by(field, dt);
    }

    fn strang_step_by(&mut self, field: &mut EnvelopeField, dt: f64) {
        self.linear_flow(field, 0.5 * dt);
        self.nonlinear_step(field, dt);
        self.linear_flow(field, 0.5 * dt);
        field.time += dt;
    }

    /// `(1 + |K|^2)^2`-weighted `L^2` norm of the spectrum, scaled so the
    /// unweighted version equals the square root of [`EnvelopeField::mass`].
    pub fn h4_proxy(&self, field: &EnvelopeField) -> f64 {
        self.check(field);
        let mut spec = field.data.clone();
        self.fft.forward(&mut spec);
        let m2 = (self.side * self.side) as f64;
        let sum: f64 = spec
            .iter()
            .zip(&self.h4_weight)
            .map(|(c, w)| w * c.norm_sqr())
            .sum();
        self.length * (sum / (m2 * m2)).sqrt()
    }

    pub fn diagnostics(&self, field: &EnvelopeField) -> EnvelopeDiagnostics {
        EnvelopeDiagnostics {
            t: field.time,
            mass: field.mass(),
            h4proxy: self.h4_proxy(field),
            max_amp: field.max_amplitude(),
        }
    }

    fn guard(&self, field: &EnvelopeField) -> Result<f64, NlsError> {
        let proxy = self.h4_proxy(field);
        if !(proxy <= self.blowup_guard) {
            return Err(NlsError::EnvelopeBlowup {
                time: field.time,
                proxy,
                guard: self.blowup_guard,
            });
        }
        Ok(proxy)
    }

    /// Evolve through the ascending `sample_times`, returning a copy of the
    /// field at each. Each interval is split into equal steps no longer than
    /// the problem's `dt`, so samples are hit exactly.
    pub fn evolve(
        &mut self,
        field: &EnvelopeField,
        sample_times: &[f64],
    ) -> Result<Vec<EnvelopeField>, NlsError> {
        self.evolve_with(field, sample_times, |_| {})
    }

    /// Like [`Self::evolve`], also reporting diagnostics at every sample.
    pub fn evolve_with(
        &mut self,
        field: &EnvelopeField,
        sample_times: &[f64],
        mut on_sample: impl FnMut(&EnvelopeDiagnostics),
    ) -> Result<Vec<EnvelopeField>, NlsError> {
        self.check(field);
        let mut current = field.clone();
        self.guard(&current)?;
        let mut out = Vec::with_capacity(sample_times.len());
        for &target in sample_times {
            let span = target - current.time;
            if span < -1e-12 {
                return Err(NlsError::SampleOrder {
                    requested: target,
                    current: current.time,
                });
            }
            if span > 1e-12 {
                let steps = (span / self.problem.dt - 1e-9).ceil().max(1.0) as usize;
                let h = span / steps as f64;
                for step in 0..steps {
                    self.strang_step_by(&mut current, h);
                    if step % 16 == 15 {
                        self.guard(&current)?;
                    }
                }
            }
            current.time = target;
            let proxy = self.guard(&current)?;
            on_sample(&EnvelopeDiagnostics {
                t: current.time,
                mass: current.mass(),
                h4proxy: proxy,
                max_amp: current.max_amplitude(),
            });
            out.push(current.clone());
        }
        Ok(out)
    }

    /// Spectrum (unnormalized forward FFT) of `field`.
    pub fn spectrum(&self, field: &[Complex64]) -> Vec<Complex64> {
        let mut s = field.to_vec();
        self.fft.forward(&mut s);
        s
    }

    /// Linear part `-1/2 i d^T H d A` evaluated spectrally.
    pub fn linear_rhs(&self, data: &[Complex64]) -> Vec<Complex64> {
        let mut s = self.spectrum(data);
        s.iter_mut()
            .zip(&self.symbol)
            .for_each(|(z, &q)| *z *= Complex64::new(0.0, q));
        self.fft.inverse(&mut s);
        s
    }

    /// Full right-hand side `dA/dT` of the semidiscrete system.
    pub fn rhs(&self, data: &[Complex64]) -> Vec<Complex64> {
        let g = self.problem.nonlin_coeff;
        let mut lin = self.linear_rhs(data);
        lin.iter_mut()
            .zip(data)
            .for_each(|(l, a)| *l += g * a.norm_sqr() * a);
        lin
    }

    /// `d^2A/dT^2` given `A` and `A_T`.
    pub fn second_time_derivative(&self, a: &[Complex64], a_t: &[Complex64]) -> Vec<Complex64> {
        let g = self.problem.nonlin_coeff;
        let mut out = self.linear_rhs(a_t);
        out.iter_mut()
            .zip(a.iter().zip(a_t))
            .for_each(|(o, (a, at))| *o += g * (2.0 * a.norm_sqr() * at + a * a * at.conj()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const H_CORNER: [[f64; 2]; 2] = [[-0.125, -0.125], [-0.125, -0.125]];

    fn problem(dt: f64) -> NlsProblem {
        NlsProblem::new(H_CORNER, Complex64::new(0.0, -3.0), dt).unwrap()
    }

    #[test]
    fn constructors_validate_inputs() {
        assert!(EnvelopeField::zeros(100, 40.0, Variant::StrainU).is_err());
        assert!(matches!(
            EnvelopeField::zeros(32, 40.0, Variant::StrainU),
            Err(NlsError::Resolution { .. })
        ));
        assert!(NlsProblem::new(H_CORNER, Complex64::new(0.1, -3.0), 1e-3).is_err());
        assert!(NlsProblem::new(H_CORNER, Complex64::new(0.0, -3.0), 0.0).is_err());
    }

    #[test]
    fn constant_field_unchanged_by_linear_flow() {
        let mut f = EnvelopeField::new(
            16,
            4.0,
            Variant::StrainU,
            vec![Complex64::new(0.3, -0.2); 256],
        )
        .unwrap();
        let before = f.clone();
        let mut s = NlsSolver::for_field(problem(0.1), &f);
        s.linear_halfstep(&mut f);
        for (a, b) in f.data.iter().zip(&before.data) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn single_mode_gets_unit_phase() {
        let mut f = EnvelopeField::plane_wave(32, 10.0, Variant::StrainU, 1.0, [2, -1]).unwrap();
        let before = f.clone();
        let mut s = NlsSolver::for_field(problem(0.1), &f);
        s.linear_halfstep(&mut f);
        let ratio = f.data[0] / before.data[0];
        assert!((ratio.norm() - 1.0).abs() < 1e-13);
        for (a, b) in f.data.iter().zip(&before.data) {
            assert!((a - b * ratio).norm() < 1e-13);
        }
    }

    #[test]
    fn nonlinear_step_examples() {
        let s = NlsSolver::new(problem(0.1), 16, 4.0);
        let mut f = EnvelopeField::zeros(16, 4.0, Variant::StrainU).unwrap();
        s.nonlinear_step(&mut f, 0.1);
        assert!(f.data.iter().all(|z| z.norm() == 0.0));
        let mut one =
            EnvelopeField::new(16, 4.0, Variant::StrainU, vec![Complex64::new(1.0, 0.0); 256])
                .unwrap();
        s.nonlinear_step(&mut one, 0.1);
        let expect = Complex64::from_polar(1.0, -0.3);
        assert!(one.data.iter().all(|z| (z - expect).norm() < 1e-15));
    }

    #[test]
    fn plane_wave_modulus_is_constant_in_time() {
        let f = EnvelopeField::plane_wave(32, 16.0, Variant::StrainU, 0.7, [1, 2]).unwrap();
        let mut s = NlsSolver::for_field(problem(1e-2), &f);
        let out = s.evolve(&f, &[0.5, 1.0]).unwrap();
        for g in &out {
            for z in &g.data {
                assert!((z.norm() - 0.7).abs() < 1e-10 * 0.7);
            }
        }
    }

    #[test]
    fn evolve_hits_sample_times_and_rejects_reversed_order() {
        let f = EnvelopeField::gaussian(32, 16.0, Variant::StrainU, 1.0, 3.0).unwrap();
        let mut s = NlsSolver::for_field(problem(0.03), &f);
        let out = s.evolve(&f, &[0.0, 0.1, 0.25]).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[2].time, 0.25);
        assert!(matches!(
            s.evolve(&f, &[0.2, 0.1]),
            Err(NlsError::SampleOrder { .. })
        ));
    }

    #[test]
    fn blowup_guard_trips() {
        let f = EnvelopeField::gaussian(64, 20.0, Variant::StrainU, 20.0, 3.0).unwrap();
        let mut s = NlsSolver::for_field(problem(1e-3), &f);
        assert!(matches!(
            s.evolve(&f, &[1.0]),
            Err(NlsError::EnvelopeBlowup { .. })
        ));
    }

    #[test]
    fn rhs_matches_step_difference() {
        let f = EnvelopeField::gaussian(32, 16.0, Variant::StrainU, 1.0, 3.0).unwrap();
        let h = 1e-5;
        let mut s = NlsSolver::for_field(problem(h), &f);
        let rhs = s.rhs(&f.data);
        let mut fwd = f.clone();
        s.strang_step(&mut fwd);
        let mut back = f.clone();
        let mut sb = NlsSolver::for_field(
            NlsProblem {
                dt: -h,
                ..*s.problem()
            },
            &f,
        );
        sb.strang_step(&mut back);
        for ((a, b), r) in fwd.data.iter().zip(&back.data).zip(&rhs) {
            let fd = (a - b) / (2.0 * h);
            assert!((fd - r).norm() < 1e-8);
        }
    }

    #[test]
    fn mass_of_gaussian() {
        // Continuous mass a^2 pi sigma^2 / 2.
        let f = EnvelopeField::gaussian(256, 40.0, Variant::StrainU, 1.0, 4.0).unwrap();
        let exact = std::f64::consts::PI * 16.0 / 2.0;
        assert!((f.mass() - exact).abs() < 1e-10);
        let s = NlsSolver::for_field(problem(1e-3), &f);
        assert!((s.h4_proxy(&EnvelopeField::zeros(256, 40.0, Variant::StrainU).unwrap())).abs() < 1e-300);
        assert!(s.h4_proxy(&f) >= f.mass().sqrt());
    }
}
