//! Lattice-sampled modulated wave packets.
//!
//! For a lattice field `f` the approximation is
//!
//! ```text
//! psi_f = 2 Re[ eps rho_f Z E + eps^3 (C1_f |Z|^2 Z E + C3_f Z^3 E^3) ]
//! E     = exp(i (k0 m + l0 n + omega0 t))
//! Z     = Z(X, Y, T),  X = eps (m + cx t) + x0,  Y = eps (n + cy t) + y0,  T = eps^2 t
//! ```
//!
//! where `Z` is the evolved envelope, `rho_f` the amplitude ratio of the field
//! and the `eps^3` terms are the optional first- and third-harmonic
//! corrections. Time derivatives are assembled exactly with the chain rule,
//! using the envelope equation for `Z_T` and `Z_TT`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::{
    correction_coefficients, forward_symbol, strain_ratios, CorrectionAmplitudeCoefficients,
    DispersionData, DispersionError, Variant, DEFAULT_RESONANCE_MARGIN,
};
use crate::lattice::{accelerations, ForceLaw, Form, LatticeError, LatticeState};
use crate::nls::{EnvelopeField, NlsProblem, NlsSolver};
use crate::spectral::{fourier_l1_norm, is_nyquist, lattice_dft, lattice_idft_real, wavenumber, Fft2};

/// Modes whose `|a^2 + b^2|` falls below this are passed through the projection.
pub const DEFAULT_PROJECTION_THRESHOLD: f64 = 1e-9;
/// Relative magnitude below which envelope Fourier modes are not resampled.
const BAND_THRESHOLD: f64 = 1e-14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnsatzError {
    #[error("lattice footprint eps * N = {footprint} exceeds the envelope box {length}")]
    FootprintExceeded { footprint: f64, length: f64 },
    #[error("carrier has k0 = 0: the strain ansatz must be driven by the B envelope")]
    MissingB,
    #[error("envelope variant {found:?} does not match the required {expected:?}")]
    VariantMismatch { expected: Variant, found: Variant },
    #[error("envelope time {envelope} does not match eps^2 t = {expected}")]
    TimeMismatch { envelope: f64, expected: f64 },
    #[error("envelope grid does not match the builder's grid")]
    GridMismatch,
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionKind {
    /// `(U, V) -> w (w^T x) / (w^T w)` with `w = (a, b)`.
    #[default]
    Oblique,
    /// `(U, V) -> w (w^H x) / (w^H w)`; degenerate only at the origin.
    Orthogonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProjectionDiagnostics {
    pub degenerate_modes: usize,
    pub max_projection_displacement: f64,
}

/// Project one mode `(U, V)` onto the compatible line `a V = b U`.
/// Returns `None` for a degenerate mode, which is left unchanged.
pub fn project_mode(
    a: Complex64,
    b: Complex64,
    u: Complex64,
    v: Complex64,
    kind: ProjectionKind,
    threshold: f64,
) -> Option<(Complex64, Complex64)> {
    let (den, dot) = match kind {
        ProjectionKind::Oblique => (a * a + b * b, a * u + b * v),
        ProjectionKind::Orthogonal => (
            Complex64::new(a.norm_sqr() + b.norm_sqr(), 0.0),
            a.conj() * u + b.conj() * v,
        ),
    };
    if den.norm() < threshold {
        return None;
    }
    let s = dot / den;
    Some((a * s, b * s))
}

fn project_spectra(n: usize, u: &mut [Complex64], v: &mut [Complex64], kind: ProjectionKind) -> usize {
    let mut degenerate = 0;
    for i in 0..n {
        let a = forward_symbol(2.0 * PI * i as f64 / n as f64);
        for j in 0..n {
            let b = forward_symbol(2.0 * PI * j as f64 / n as f64);
            let idx = i * n + j;
            match project_mode(a, b, u[idx], v[idx], kind, DEFAULT_PROJECTION_THRESHOLD) {
                Some((pu, pv)) => {
                    u[idx] = pu;
                    v[idx] = pv;
                }
                None => degenerate += 1,
            }
        }
    }
    degenerate
}

/// Apply the compatibility projection modewise to the lattice spectra of a
/// strain pair and its velocity pair. Returns the number of degenerate
/// (passed-through) wave vectors.
pub fn compat_project(
    n: usize,
    u_hat: &mut [Complex64],
    ut_hat: &mut [Complex64],
    v_hat: &mut [Complex64],
    vt_hat: &mut [Complex64],
    kind: ProjectionKind,
) -> usize {
    let degenerate = project_spectra(n, u_hat, v_hat, kind);
    project_spectra(n, ut_hat, vt_hat, kind);
    degenerate
}

/// Project real strain pairs (positions, velocities, ...) in place with the
/// same modewise map. The displacement bound covers every pair.
pub fn project_strain_fields(
    fft: &Fft2,
    pairs: &mut [(&mut Vec<f64>, &mut Vec<f64>)],
    kind: ProjectionKind,
) -> ProjectionDiagnostics {
    let n = fft.side();
    let mut diag = ProjectionDiagnostics::default();
    for (u, v) in pairs.iter_mut() {
        let mut su = lattice_dft(fft, u);
        let mut sv = lattice_dft(fft, v);
        diag.degenerate_modes = project_spectra(n, &mut su, &mut sv, kind);
        let pu = lattice_idft_real(fft, &su);
        let pv = lattice_idft_real(fft, &sv);
        let shift = u
            .iter()
            .zip(&pu)
            .chain(v.iter().zip(&pv))
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        diag.max_projection_displacement = diag.max_projection_displacement.max(shift);
        **u = pu;
        **v = pv;
    }
    diag
}

/// Placement of the lattice inside the envelope box:
/// `X_m = eps (m + cx t) + offset[0]`, likewise for `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub eps: f64,
    pub n_side: usize,
    pub offset: [f64; 2],
}

impl Geometry {
    /// Lattice window centred in the box at `t = 0`.
    pub fn new(eps: f64, n_side: usize, length: f64) -> Result<Self, AnsatzError> {
        Self::centered(eps, n_side, length, [0.0, 0.0], 0.0)
    }

    /// Window centred on the packet at lattice time `t_center`, so a packet
    /// drifting with group velocity `c` stays away from the seam over
    /// `[0, 2 t_center]`.
    pub fn centered(
        eps: f64,
        n_side: usize,
        length: f64,
        c: [f64; 2],
        t_center: f64,
    ) -> Result<Self, AnsatzError> {
        let footprint = eps * n_side as f64;
        if footprint > length * (1.0 + 1e-12) {
            return Err(AnsatzError::FootprintExceeded { footprint, length });
        }
        let base = 0.5 * (length - footprint);
        Ok(Self {
            eps,
            n_side,
            offset: [base - eps * c[0] * t_center, base - eps * c[1] * t_center],
        })
    }
}

/// Amplitude factors of one lattice field (`u`, `v` or `q`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldFactors {
    pub variant: Variant,
    pub rho: Complex64,
    /// Physical coefficient of `|Z|^2 Z` at the first harmonic.
    pub c1: Complex64,
    /// Physical coefficient of `Z^3` at the third harmonic.
    pub c3: Complex64,
}

/// Correction data per lattice field. When `include` is false the
/// approximation is the leading-order packet only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSet {
    pub include: bool,
    pub coefficients: Vec<CorrectionAmplitudeCoefficients>,
}

impl CorrectionSet {
    /// Correction fields `Z_{1,-1}, Z_{1,3}, Z_{1,-3}` of lattice field
    /// `field` on the envelope grid; the first-order amplitude is `2 Z`.
    pub fn envelope_fields(&self, z: &EnvelopeField, field: usize) -> [Vec<Complex64>; 3] {
        let c = self.coefficients[field];
        let z1: Vec<Complex64> = z.data.iter().map(|a| 2.0 * a).collect();
        [
            z1.iter().map(|a| c.c_1m1 * a.norm_sqr() * a.conj()).collect(),
            z1.iter().map(|a| c.c_13 * a * a * a).collect(),
            z1.iter().map(|a| c.c_1m3 * (a * a * a).conj()).collect(),
        ]
    }
}

/// Lattice fields of the approximation at one time; index 0 is `q` or `u`,
/// index 1 is `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzSample {
    pub eps: f64,
    pub t: f64,
    pub form: Form,
    pub psi: Vec<Vec<f64>>,
    pub psi_t: Vec<Vec<f64>>,
    /// Second time derivatives, only when requested.
    pub psi_tt: Option<Vec<Vec<f64>>>,
}

impl AnsatzSample {
    pub fn to_state(&self) -> Result<LatticeState, LatticeError> {
        let n = (self.psi[0].len() as f64).sqrt().round() as usize;
        let mut s = match self.form {
            Form::Displacement => {
                LatticeState::displacement(n, self.psi[0].clone(), self.psi_t[0].clone())?
            }
            Form::Strain => LatticeState::strain(
                n,
                self.psi[0].clone(),
                self.psi[1].clone(),
                self.psi_t[0].clone(),
                self.psi_t[1].clone(),
            )?,
        };
        s.time = self.t;
        Ok(s)
    }

    /// `max_sites sum_f (|x_f - psi_f| + |x_f,t - psi_f,t|)`.
    pub fn sup_error(&self, state: &LatticeState) -> f64 {
        let pos = state.positions();
        let vel = state.velocities();
        let len = self.psi[0].len();
        (0..len)
            .into_par_iter()
            .with_min_len(4096)
            .map(|i| {
                let mut s = 0.0;
                for f in 0..self.psi.len() {
                    s += (pos[f][i] - self.psi[f][i]).abs() + (vel[f][i] - self.psi_t[f][i]).abs();
                }
                s
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Second-order jet in `(X, Y, T)` of an envelope quantity at one site.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Jet {
    v: Complex64,
    d: [Complex64; 3],
    h: [[Complex64; 3]; 3],
}

impl Jet {
    fn conj(self) -> Self {
        let mut out = self;
        out.v = out.v.conj();
        out.d.iter_mut().for_each(|z| *z = z.conj());
        out.h.iter_mut().flatten().for_each(|z| *z = z.conj());
        out
    }

    #[allow(clippy::needless_range_loop)]
    fn mul(self, o: Self) -> Self {
        let mut d = [ZERO; 3];
        let mut h = [[ZERO; 3]; 3];
        for i in 0..3 {
            d[i] = self.d[i] * o.v + self.v * o.d[i];
            for j in 0..3 {
                h[i][j] = self.h[i][j] * o.v
                    + self.d[i] * o.d[j]
                    + self.d[j] * o.d[i]
                    + self.v * o.h[i][j];
            }
        }
        Self { v: self.v * o.v, d, h }
    }
}

/// Builds approximations for one carrier, variant and lattice geometry.
#[derive(Debug, Clone)]
pub struct AnsatzBuilder {
    disp: DispersionData,
    form: Form,
    driver: Variant,
    geometry: Geometry,
    fields: Vec<FieldFactors>,
    corrections: Option<CorrectionSet>,
    solver: NlsSolver,
    envelope_side: usize,
    envelope_length: f64,
    lattice_fft: Fft2,
    pub projection: ProjectionKind,
}

impl AnsatzBuilder {
    pub fn new(
        disp: DispersionData,
        form: Form,
        geometry: Geometry,
        envelope_side: usize,
        envelope_length: f64,
    ) -> Result<Self, AnsatzError> {
        Self::with_margin(disp, form, geometry, envelope_side, envelope_length, DEFAULT_RESONANCE_MARGIN)
    }

    pub fn with_margin(
        disp: DispersionData,
        form: Form,
        geometry: Geometry,
        envelope_side: usize,
        envelope_length: f64,
        margin: f64,
    ) -> Result<Self, AnsatzError> {
        let footprint = geometry.eps * geometry.n_side as f64;
        if footprint > envelope_length * (1.0 + 1e-12) {
            return Err(AnsatzError::FootprintExceeded {
                footprint,
                length: envelope_length,
            });
        }
        let kv = disp.carrier;
        let (driver, variants) = match form {
            Form::Displacement => (Variant::Displacement, vec![(Variant::Displacement, Complex64::new(1.0, 0.0))]),
            Form::Strain => {
                let (ra, rb) = strain_ratios(kv);
                (
                    disp.strain_driver(),
                    vec![(Variant::StrainU, ra), (Variant::StrainV, rb)],
                )
            }
        };
        let coeffs: Option<Vec<CorrectionAmplitudeCoefficients>> = variants
            .iter()
            .map(|(v, _)| correction_coefficients(kv, *v, margin))
            .collect::<Result<_, _>>()
            .ok();
        let fields = variants
            .iter()
            .enumerate()
            .map(|(i, &(variant, rho))| {
                let (c1, c3) = match &coeffs {
                    Some(c) => (4.0 * c[i].c_1m1.conj(), 4.0 * (c[i].c_13 + c[i].c_1m3.conj())),
                    None => (ZERO, ZERO),
                };
                FieldFactors { variant, rho, c1, c3 }
            })
            .collect();
        let g = disp.nonlinear_coefficient(driver)?;
        let problem = NlsProblem {
            hessian: disp.hessian,
            nonlin_coeff: g,
            dt: 1.0,
        };
        Ok(Self {
            disp,
            form,
            driver,
            geometry,
            fields,
            corrections: coeffs.map(|coefficients| CorrectionSet {
                include: true,
                coefficients,
            }),
            solver: NlsSolver::new(problem, envelope_side, envelope_length),
            envelope_side,
            envelope_length,
            lattice_fft: Fft2::new(geometry.n_side),
            projection: ProjectionKind::default(),
        })
    }

    /// Approximation of the linear lattice: the envelope evolves without
    /// nonlinearity and there are no harmonic corrections.
    pub fn linearized(mut self) -> Self {
        let mut problem = *self.solver.problem();
        problem.nonlin_coeff = ZERO;
        self.solver = NlsSolver::new(problem, self.envelope_side, self.envelope_length);
        self.corrections = None;
        for f in &mut self.fields {
            f.c1 = ZERO;
            f.c3 = ZERO;
        }
        self
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn form(&self) -> Form {
        self.form
    }

    /// Envelope variant that must be evolved to drive this builder.
    pub fn driver(&self) -> Variant {
        self.driver
    }

    pub fn field_factors(&self) -> &[FieldFactors] {
        &self.fields
    }

    /// Correction coefficients, absent for resonant carriers.
    pub fn corrections(&self) -> Option<&CorrectionSet> {
        self.corrections.as_ref()
    }

    pub fn lattice_fft(&self) -> &Fft2 {
        &self.lattice_fft
    }

    fn check_envelope(&self, env: &EnvelopeField) -> Result<(), AnsatzError> {
        if env.side() != self.envelope_side || env.length() != self.envelope_length {
            return Err(AnsatzError::GridMismatch);
        }
        if env.variant != self.driver {
            if self.driver == Variant::StrainV && env.variant == Variant::StrainU {
                return Err(AnsatzError::MissingB);
            }
            return Err(AnsatzError::VariantMismatch {
                expected: self.driver,
                found: env.variant,
            });
        }
        Ok(())
    }

    /// Sample the approximation at lattice time `t` from the envelope at
    /// slow time `eps^2 t`.
    pub fn sample(
        &self,
        env: &EnvelopeField,
        t: f64,
        with_corrections: bool,
        second_order: bool,
    ) -> Result<AnsatzSample, AnsatzError> {
        self.check_envelope(env)?;
        let eps = self.geometry.eps;
        let expected = eps * eps * t;
        if (env.time - expected).abs() > 1e-9 * expected.abs().max(1.0) {
            return Err(AnsatzError::TimeMismatch {
                envelope: env.time,
                expected,
            });
        }
        let with_corrections = with_corrections && self.corrections.is_some();
        let jets = self.site_jets(env, t, second_order);
        let n = self.geometry.n_side;
        let nf = self.fields.len();
        let (k0, l0) = (self.disp.carrier.k(), self.disp.carrier.l());
        let w0 = self.disp.omega0;
        let c = self.disp.group_velocity;

        // Per site: for each field, (psi, psi_t, psi_tt).
        let values: Vec<Vec<[f64; 3]>> = jets
            .par_iter()
            .enumerate()
            .with_min_len(1024)
            .map(|(idx, z)| {
                let m = (idx / n) as f64;
                let nn = (idx % n) as f64;
                let theta = (k0 * m + l0 * nn + w0 * t).rem_euclid(2.0 * PI);
                let e1 = Complex64::from_polar(1.0, theta);
                let mut terms: Vec<(usize, Complex64, Jet, i32)> = Vec::with_capacity(3 * nf);
                for (f, ff) in self.fields.iter().enumerate() {
                    terms.push((f, eps * ff.rho, *z, 1));
                }
                if with_corrections {
                    let zz = z.mul(*z);
                    let w1 = zz.mul(z.conj());
                    let w3 = zz.mul(*z);
                    let e3 = eps * eps * eps;
                    for (f, ff) in self.fields.iter().enumerate() {
                        terms.push((f, e3 * ff.c1, w1, 1));
                        terms.push((f, e3 * ff.c3, w3, 3));
                    }
                }
                let mut out = vec![[0.0; 3]; nf];
                for (f, alpha, g, p) in terms {
                    if alpha == ZERO {
                        continue;
                    }
                    let ph = if p == 1 { e1 } else { e1 * e1 * e1 };
                    let ipw = Complex64::new(0.0, p as f64 * w0);
                    let grad_c = c[0] * g.d[0] + c[1] * g.d[1];
                    let drift = eps * grad_c + eps * eps * g.d[2];
                    let val = g.v;
                    let dt1 = ipw * val + drift;
                    let mut dt2 = ZERO;
                    if second_order {
                        let cc = c[0] * c[0] * g.h[0][0]
                            + 2.0 * c[0] * c[1] * g.h[0][1]
                            + c[1] * c[1] * g.h[1][1];
                        let ct = c[0] * g.h[0][2] + c[1] * g.h[1][2];
                        dt2 = ipw * ipw * val
                            + 2.0 * ipw * drift
                            + eps * eps * cc
                            + 2.0 * eps * eps * eps * ct
                            + eps.powi(4) * g.h[2][2];
                    }
                    let a = alpha * ph;
                    out[f][0] += 2.0 * (a * val).re;
                    out[f][1] += 2.0 * (a * dt1).re;
                    out[f][2] += 2.0 * (a * dt2).re;
                }
                out
            })
            .collect();

        let mut psi = vec![vec![0.0; n * n]; nf];
        let mut psi_t = vec![vec![0.0; n * n]; nf];
        let mut psi_tt = vec![vec![0.0; n * n]; nf];
        for (idx, site) in values.iter().enumerate() {
            for f in 0..nf {
                psi[f][idx] = site[f][0];
                psi_t[f][idx] = site[f][1];
                psi_tt[f][idx] = site[f][2];
            }
        }
        Ok(AnsatzSample {
            eps,
            t,
            form: self.form,
            psi,
            psi_t,
            psi_tt: second_order.then_some(psi_tt),
        })
    }

    /// Jets of `Z` at every lattice site, from exact trigonometric
    /// interpolation of the envelope spectrum.
    fn site_jets(&self, env: &EnvelopeField, t: f64, second_order: bool) -> Vec<Jet> {
        let m_side = self.envelope_side;
        let len = self.envelope_length;
        let norm = 1.0 / (m_side * m_side) as f64;
        let z_hat = self.solver.spectrum(&env.data);
        let z_t = self.solver.rhs(&env.data);
        let zt_hat = self.solver.spectrum(&z_t);
        let ztt_hat = second_order.then(|| {
            let ztt = self.solver.second_time_derivative(&env.data, &z_t);
            self.solver.spectrum(&ztt)
        });

        // Spectra of Z, Z_X, Z_Y, Z_T and, for second order,
        // Z_XX, Z_XY, Z_YY, Z_XT, Z_YT, Z_TT.
        let kx = |i: usize| wavenumber(i, m_side, len);
        let derived = |base: &[Complex64], order: &[usize]| -> Vec<Complex64> {
            let mut out = vec![ZERO; m_side * m_side];
            for i in 0..m_side {
                for j in 0..m_side {
                    if is_nyquist(i, m_side) || is_nyquist(j, m_side) {
                        continue;
                    }
                    let mut f = Complex64::new(norm, 0.0);
                    for &axis in order {
                        let k = if axis == 0 { kx(i) } else { kx(j) };
                        f *= Complex64::new(0.0, k);
                    }
                    out[i * m_side + j] = base[i * m_side + j] * f;
                }
            }
            out
        };
        let mut spectra = vec![
            derived(&z_hat, &[]),
            derived(&z_hat, &[0]),
            derived(&z_hat, &[1]),
            derived(&zt_hat, &[]),
        ];
        if let Some(ztt_hat) = &ztt_hat {
            spectra.push(derived(&z_hat, &[0, 0]));
            spectra.push(derived(&z_hat, &[0, 1]));
            spectra.push(derived(&z_hat, &[1, 1]));
            spectra.push(derived(&zt_hat, &[0]));
            spectra.push(derived(&zt_hat, &[1]));
            spectra.push(derived(ztt_hat, &[]));
        }

        // Band of significant modes, union over all spectra.
        let mut rows = vec![false; m_side];
        let mut cols = vec![false; m_side];
        for s in &spectra {
            let peak = s.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
            if peak == 0.0 {
                continue;
            }
            let th = BAND_THRESHOLD * peak;
            for (idx, z) in s.iter().enumerate() {
                if z.norm() > th {
                    rows[idx / m_side] = true;
                    cols[idx % m_side] = true;
                }
            }
        }
        let band_x: Vec<usize> = (0..m_side).filter(|&i| rows[i]).collect();
        let band_y: Vec<usize> = (0..m_side).filter(|&j| cols[j]).collect();

        let g = &self.geometry;
        let n = g.n_side;
        let c = self.disp.group_velocity;
        let xs: Vec<f64> = (0..n).map(|m| g.eps * (m as f64 + c[0] * t) + g.offset[0]).collect();
        let ys: Vec<f64> = (0..n).map(|j| g.eps * (j as f64 + c[1] * t) + g.offset[1]).collect();
        let ex: Vec<Complex64> = xs
            .iter()
            .flat_map(|&x| band_x.iter().map(move |&i| Complex64::from_polar(1.0, kx(i) * x)))
            .collect();
        let ey: Vec<Complex64> = ys
            .iter()
            .flat_map(|&y| band_y.iter().map(move |&j| Complex64::from_polar(1.0, kx(j) * y)))
            .collect();
        let (nbx, nby) = (band_x.len(), band_y.len());

        let fields: Vec<Vec<Complex64>> = spectra
            .iter()
            .map(|s| {
                if nbx == 0 {
                    return vec![ZERO; n * n];
                }
                // tmp[bx][n] = sum_by s[bx, by] ey[n][by]
                let tmp: Vec<Complex64> = band_x
                    .par_iter()
                    .flat_map_iter(|&i| {
                        let row: Vec<Complex64> = band_y.iter().map(|&j| s[i * m_side + j]).collect();
                        let ey = &ey;
                        (0..n).map(move |yn| {
                            let e = &ey[yn * nby..(yn + 1) * nby];
                            row.iter().zip(e).fold(ZERO, |acc, (a, b)| acc + a * b)
                        })
                    })
                    .collect();
                let mut out = vec![ZERO; n * n];
                out.par_chunks_mut(n).enumerate().for_each(|(m, row)| {
                    let e = &ex[m * nbx..(m + 1) * nbx];
                    for (bx, w) in e.iter().enumerate() {
                        let t_row = &tmp[bx * n..(bx + 1) * n];
                        for (o, v) in row.iter_mut().zip(t_row) {
                            *o += w * v;
                        }
                    }
                });
                out
            })
            .collect();

        (0..n * n)
            .map(|idx| {
                let f = |k: usize| fields[k][idx];
                let mut h = [[ZERO; 3]; 3];
                if second_order {
                    h = [
                        [f(4), f(5), f(7)],
                        [f(5), f(6), f(8)],
                        [f(7), f(8), f(9)],
                    ];
                }
                Jet {
                    v: f(0),
                    d: [f(1), f(2), f(3)],
                    h,
                }
            })
            .collect()
    }

    /// Project a strain sample onto the compatible subspace (positions,
    /// velocities and, if present, accelerations).
    pub fn project(&self, sample: &mut AnsatzSample) -> ProjectionDiagnostics {
        if sample.form != Form::Strain {
            return ProjectionDiagnostics::default();
        }
        let kind = self.projection;
        let (p0, p1) = sample.psi.split_at_mut(1);
        let (v0, v1) = sample.psi_t.split_at_mut(1);
        let mut pairs = vec![(&mut p0[0], &mut p1[0]), (&mut v0[0], &mut v1[0])];
        if let Some(acc) = sample.psi_tt.as_mut() {
            let (a0, a1) = acc.split_at_mut(1);
            pairs.push((&mut a0[0], &mut a1[0]));
        }
        project_strain_fields(&self.lattice_fft, &mut pairs, kind)
    }

    /// Initial lattice state from the envelope at `T = 0`: sampled directly
    /// in displacement form, sampled and projected in strain form.
    pub fn build_initial_data(
        &self,
        env: &EnvelopeField,
        with_corrections: bool,
    ) -> Result<(LatticeState, ProjectionDiagnostics), AnsatzError> {
        let mut sample = self.sample(env, 0.0, with_corrections, false)?;
        let diag = self.project(&mut sample);
        Ok((sample.to_state()?, diag))
    }

    /// Discrete `L^1` Fourier norm of `psi_tt - F(psi)` at lattice time `t`,
    /// summed over the lattice fields. Strain approximations are projected
    /// first so the lattice operator acts on compatible data.
    pub fn residual_norm(
        &self,
        env: &EnvelopeField,
        t: f64,
        force: &ForceLaw,
        with_corrections: bool,
    ) -> Result<f64, AnsatzError> {
        let mut sample = self.sample(env, t, with_corrections, true)?;
        self.project(&mut sample);
        let state = sample.to_state()?;
        let acc = accelerations(&state, force);
        let psi_tt = sample.psi_tt.as_ref().unwrap();
        let mut total = 0.0;
        for (a, p) in acc.iter().zip(psi_tt) {
            let r: Vec<f64> = p.iter().zip(a).map(|(x, y)| x - y).collect();
            total += fourier_l1_norm(&self.lattice_fft, &r);
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{nls_coefficients, WaveVector};
    use crate::lattice::compatibility_defect;

    fn corner() -> DispersionData {
        nls_coefficients(WaveVector::from_pi_units(0.5, 0.5)).unwrap()
    }

    #[test]
    fn projection_mode_example() {
        let a = Complex64::new(-1.0, 1.0);
        let b = Complex64::new(-2.0, 0.0);
        let (u, v) = project_mode(
            a,
            b,
            Complex64::new(1.0, 0.0),
            ZERO,
            ProjectionKind::Oblique,
            DEFAULT_PROJECTION_THRESHOLD,
        )
        .unwrap();
        // Independent evaluation: a^2 / (a^2 + b^2) and a b / (a^2 + b^2).
        let den = a * a + b * b;
        assert!((den - Complex64::new(4.0, -2.0)).norm() < 1e-15);
        assert!((u - Complex64::new(0.2, -0.4)).norm() < 1e-15);
        assert!((v - Complex64::new(0.6, -0.2)).norm() < 1e-15);
        assert!((a * v - b * u).norm() < 1e-15);
    }

    #[test]
    fn degenerate_modes_pass_through() {
        // (pi/2, -pi/2): a^2 + b^2 = (i - 1)^2 + (-i - 1)^2 = 0.
        let a = forward_symbol(PI / 2.0);
        let b = forward_symbol(-PI / 2.0);
        assert!((a * a + b * b).norm() < 1e-15);
        let one = Complex64::new(1.0, 0.0);
        assert!(project_mode(a, b, one, one, ProjectionKind::Oblique, 1e-9).is_none());
        assert!(project_mode(a, b, one, one, ProjectionKind::Orthogonal, 1e-9).is_some());
    }

    #[test]
    fn zero_envelope_gives_zero_sample() {
        let wide = Geometry::new(0.2, 128, 40.0).unwrap();
        let b = AnsatzBuilder::new(corner(), Form::Strain, wide, 64, 20.0).unwrap_err();
        let g = Geometry::new(0.2, 16, 40.0).unwrap();
        assert!(matches!(b, AnsatzError::FootprintExceeded { .. }));
        let b = AnsatzBuilder::new(corner(), Form::Strain, g, 128, 40.0).unwrap();
        let env = EnvelopeField::zeros(128, 40.0, Variant::StrainU).unwrap();
        let s = b.sample(&env, 0.0, true, true).unwrap();
        assert!(s.psi.iter().chain(&s.psi_t).flatten().all(|&x| x == 0.0));
        let (state, _) = b.build_initial_data(&env, true).unwrap();
        assert_eq!(state.max_amplitude(), 0.0);
    }

    #[test]
    fn constant_envelope_is_plane_wave() {
        let eps = 0.01;
        let n = 16;
        let g = Geometry::new(eps, n, 40.0).unwrap();
        let b = AnsatzBuilder::new(corner(), Form::Strain, g, 128, 40.0).unwrap();
        let env = EnvelopeField::new(128, 40.0, Variant::StrainU, vec![Complex64::new(1.0, 0.0); 128 * 128])
            .unwrap();
        let s = b.sample(&env, 0.0, false, false).unwrap();
        for m in 0..n {
            for j in 0..n {
                let expect = 0.02 * (PI * (m + j) as f64 / 2.0).cos();
                assert!((s.psi[0][m * n + j] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn strain_without_b_driver_is_rejected() {
        let d = nls_coefficients(WaveVector::from_pi_units(0.0, 0.5)).unwrap();
        let g = Geometry::new(0.2, 16, 40.0).unwrap();
        let b = AnsatzBuilder::new(d, Form::Strain, g, 128, 40.0).unwrap();
        assert_eq!(b.driver(), Variant::StrainV);
        let env = EnvelopeField::zeros(128, 40.0, Variant::StrainU).unwrap();
        assert!(matches!(b.sample(&env, 0.0, false, false), Err(AnsatzError::MissingB)));
    }

    #[test]
    fn initial_strain_data_is_compatible() {
        let eps = 0.25;
        let n = 160;
        let g = Geometry::new(eps, n, 40.0).unwrap();
        let b = AnsatzBuilder::new(corner(), Form::Strain, g, 128, 40.0).unwrap();
        let env = EnvelopeField::gaussian(128, 40.0, Variant::StrainU, 1.0, 4.0).unwrap();
        let raw = b.sample(&env, 0.0, false, false).unwrap().to_state().unwrap();
        assert!(compatibility_defect(&raw).unwrap() > 1e-4);
        let (state, diag) = b.build_initial_data(&env, false).unwrap();
        assert!(compatibility_defect(&state).unwrap() < 1e-12);
        assert!(diag.max_projection_displacement > 0.0);
        assert!(diag.max_projection_displacement < 4.0 * eps * eps);
        // Degenerate wave vectors on this grid: (0, 0), (pi/2, -pi/2), (-pi/2, pi/2).
        assert_eq!(diag.degenerate_modes, 3);
    }

    #[test]
    fn carrier_and_envelope_conjugation_leave_initial_positions_unchanged() {
        let kv = WaveVector::new(1.1, 0.4);
        let d = nls_coefficients(kv).unwrap();
        let dm = nls_coefficients(-kv).unwrap();
        let g = Geometry::new(0.2, 200, 40.0).unwrap();
        let b = AnsatzBuilder::new(d, Form::Displacement, g, 128, 40.0).unwrap();
        let bm = AnsatzBuilder::new(dm, Form::Displacement, g, 128, 40.0).unwrap();
        let mut env = EnvelopeField::gaussian(128, 40.0, Variant::Displacement, 1.0, 4.0).unwrap();
        env.data.iter_mut().enumerate().for_each(|(i, z)| *z *= Complex64::from_polar(1.0, 0.01 * i as f64));
        let conj = env.scaled(Complex64::new(1.0, 0.0));
        let mut conj = conj;
        conj.data.iter_mut().for_each(|z| *z = z.conj());
        let a = b.sample(&env, 0.0, false, false).unwrap();
        let c = bm.sample(&conj, 0.0, false, false).unwrap();
        for (x, y) in a.psi[0].iter().zip(&c.psi[0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
