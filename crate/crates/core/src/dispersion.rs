//! Closed-form spectral algebra of the nearest-neighbour square lattice at a
//! carrier wave vector: dispersion relation and its derivatives, NLS
//! coefficients, correction-amplitude factors, the non-resonance test and the
//! cubic kernels of the displacement system.
//!
//! Everything here is a pure function of value inputs.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default margin used by [`nonresonance_check`] and [`correction_coefficients`].
pub const DEFAULT_RESONANCE_MARGIN: f64 = 1e-8;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum DispersionError {
    #[error("zero frequency at carrier ({k}, {l}): gradient of omega is singular")]
    ZeroFrequency { k: f64, l: f64 },
    #[error("axis-degenerate carrier: e^(i{axis}0) = 1")]
    AxisDegenerate { axis: Axis },
    #[error("resonant carrier: |denominator| = {magnitude:.3e} for harmonic {harmonic}")]
    Resonant { harmonic: i32, magnitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    K,
    L,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::K => f.write_str("k"),
            Axis::L => f.write_str("l"),
        }
    }
}

/// Which modulated amplitude a computation refers to: the x-strain `u`
/// (envelope `A`), the y-strain `v` (envelope `B`) or the displacement `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    StrainU,
    StrainV,
    Displacement,
}

/// Reduce an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = x.rem_euclid(two_pi);
    if y > PI {
        y -= two_pi;
    }
    y
}

/// A point on the Brillouin torus `(-pi, pi]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveVector {
    k: f64,
    l: f64,
}

impl WaveVector {
    pub fn new(k: f64, l: f64) -> Self {
        Self {
            k: wrap_angle(k),
            l: wrap_angle(l),
        }
    }

    /// Components given as multiples of pi, so `(0.5, 0.5)` is exactly `(pi/2, pi/2)`.
    pub fn from_pi_units(k: f64, l: f64) -> Self {
        Self::new(k * PI, l * PI)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// `m * self`, reduced back onto the torus.
    pub fn scaled(&self, m: i32) -> Self {
        Self::new(m as f64 * self.k, m as f64 * self.l)
    }

    pub fn is_zero(&self) -> bool {
        self.k == 0.0 && self.l == 0.0
    }
}

impl std::ops::Neg for WaveVector {
    type Output = WaveVector;

    fn neg(self) -> WaveVector {
        WaveVector::new(-self.k, -self.l)
    }
}

/// `omega_x^2(k) = 2 - e^{-ik} - e^{ik}`.
pub fn omega_sq_1d(k: f64) -> f64 {
    2.0 - 2.0 * k.cos()
}

/// `e^{ik} - 1`.
pub fn forward_symbol(k: f64) -> Complex64 {
    Complex64::new(k.cos() - 1.0, k.sin())
}

pub fn omega(kv: WaveVector) -> f64 {
    (omega_sq_1d(kv.k) + omega_sq_1d(kv.l)).sqrt()
}

fn require_frequency(kv: WaveVector) -> Result<f64, DispersionError> {
    let w = omega(kv);
    if w > 0.0 {
        Ok(w)
    } else {
        Err(DispersionError::ZeroFrequency { k: kv.k, l: kv.l })
    }
}

pub fn group_velocity(kv: WaveVector) -> Result<[f64; 2], DispersionError> {
    let w = require_frequency(kv)?;
    Ok([kv.k.sin() / w, kv.l.sin() / w])
}

/// Exact second derivatives of `omega`.
pub fn hessian(kv: WaveVector) -> Result<[[f64; 2]; 2], DispersionError> {
    let w = require_frequency(kv)?;
    let (sk, ck) = kv.k.sin_cos();
    let (sl, cl) = kv.l.sin_cos();
    let w3 = w * w * w;
    let hkk = ck / w - sk * sk / w3;
    let hll = cl / w - sl * sl / w3;
    let hkl = -sk * sl / w3;
    Ok([[hkk, hkl], [hkl, hll]])
}

/// Spectral data at a carrier, including the NLS nonlinear coefficients.
///
/// `gamma_a` is `None` when `omega_x^2(k0) = 0` (carrier on the `k = 0` axis)
/// and `gamma_b` is `None` when `omega_y^2(l0) = 0`; the surviving coefficient
/// describes the one-dimensional modulated plane wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionData {
    pub carrier: WaveVector,
    pub omega0: f64,
    pub group_velocity: [f64; 2],
    pub hessian: [[f64; 2]; 2],
    pub gamma_a: Option<Complex64>,
    pub gamma_b: Option<Complex64>,
    pub gamma_q: Complex64,
    pub nonresonant: bool,
    pub axis_degenerate_k: bool,
    pub axis_degenerate_l: bool,
}

pub fn nls_coefficients(kv: WaveVector) -> Result<DispersionData, DispersionError> {
    nls_coefficients_with_margin(kv, DEFAULT_RESONANCE_MARGIN)
}

pub fn nls_coefficients_with_margin(
    kv: WaveVector,
    margin: f64,
) -> Result<DispersionData, DispersionError> {
    let omega0 = require_frequency(kv)?;
    let wx2 = omega_sq_1d(kv.k);
    let wy2 = omega_sq_1d(kv.l);
    let quartic = wx2 * wx2 + wy2 * wy2;
    // 1/(8i) = -i/8: build from reals, multiply by -i last.
    let minus_i = Complex64::new(0.0, -1.0);
    let axis_degenerate_k = kv.k == 0.0;
    let axis_degenerate_l = kv.l == 0.0;
    let gamma_a = (!axis_degenerate_k).then(|| minus_i * (3.0 * quartic / (8.0 * omega0 * wx2)));
    let gamma_b = (!axis_degenerate_l).then(|| minus_i * (3.0 * quartic / (8.0 * omega0 * wy2)));
    let gamma_q = minus_i * (3.0 * quartic / (2.0 * omega0));
    Ok(DispersionData {
        carrier: kv,
        omega0,
        group_velocity: group_velocity(kv)?,
        hessian: hessian(kv)?,
        gamma_a,
        gamma_b,
        gamma_q,
        nonresonant: nonresonance_check(kv, margin),
        axis_degenerate_k,
        axis_degenerate_l,
    })
}

impl DispersionData {
    /// The envelope that carries the strain dynamics: `A` unless the carrier
    /// sits on the `k = 0` axis, where `u` vanishes and `B` is evolved instead.
    pub fn strain_driver(&self) -> Variant {
        if self.axis_degenerate_k {
            Variant::StrainV
        } else {
            Variant::StrainU
        }
    }

    /// Coefficient of `|A|^2 A` in the physical-space NLS for `variant`.
    pub fn nonlinear_coefficient(&self, variant: Variant) -> Result<Complex64, DispersionError> {
        match variant {
            Variant::StrainU => self
                .gamma_a
                .map(|g| 4.0 * g)
                .ok_or(DispersionError::AxisDegenerate { axis: Axis::K }),
            Variant::StrainV => self
                .gamma_b
                .map(|g| 4.0 * g)
                .ok_or(DispersionError::AxisDegenerate { axis: Axis::L }),
            Variant::Displacement => Ok(self.gamma_q),
        }
    }
}

/// `3 omega(k0) != omega(3 k0)` and `omega(3 k0) > 0`, with a finite margin.
pub fn nonresonance_check(kv: WaveVector, margin: f64) -> bool {
    let w3 = omega(kv.scaled(3));
    w3 > 0.0 && (3.0 * omega(kv) - w3).abs() > margin
}

/// `B / A = (e^{il0} - 1) / (e^{ik0} - 1)`.
pub fn amplitude_ratio(kv: WaveVector) -> Result<Complex64, DispersionError> {
    if kv.k == 0.0 {
        return Err(DispersionError::AxisDegenerate { axis: Axis::K });
    }
    Ok(forward_symbol(kv.l) / forward_symbol(kv.k))
}

pub fn amplitude_b_from_a(
    kv: WaveVector,
    a_hat: &[Complex64],
) -> Result<Vec<Complex64>, DispersionError> {
    let r = amplitude_ratio(kv)?;
    Ok(a_hat.iter().map(|&a| r * a).collect())
}

/// Ratios `(A, B) = (rho_a, rho_b) * Z` expressing both strain envelopes
/// through the evolved envelope `Z` (see [`DispersionData::strain_driver`]).
pub fn strain_ratios(kv: WaveVector) -> (Complex64, Complex64) {
    if kv.k == 0.0 {
        (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    } else {
        (Complex64::new(1.0, 0.0), forward_symbol(kv.l) / forward_symbol(kv.k))
    }
}

/// Factors mapping triple products of the first-order driver amplitude
/// `Z_1` onto the correction amplitudes of one lattice field:
/// `Z_{1,-1} = c_1m1 |Z_1|^2 conj(Z_1)`, `Z_{1,3} = c_13 Z_1^3`,
/// `Z_{1,-3} = c_1m3 conj(Z_1)^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionAmplitudeCoefficients {
    pub c_1m1: Complex64,
    pub c_13: Complex64,
    pub c_1m3: Complex64,
}

/// Denominator `i m omega(k0) - i s omega(m k0)` of the correction equation
/// for harmonic `m` on the branch with linear frequency `s * omega` (`s = +1`
/// for `U_1`, `-1` for `U_{-1}`).
pub fn correction_denominator(kv: WaveVector, m: i32, branch: i32) -> Complex64 {
    let w0 = omega(kv);
    let wm = omega(kv.scaled(m));
    Complex64::new(0.0, m as f64 * w0 - branch as f64 * wm)
}

/// Right-hand-side prefactor of the `Z_{1,m}` equation for `variant`, before
/// division by the denominator.
fn correction_forcing(kv: WaveVector, m: i32, variant: Variant) -> Complex64 {
    let km = kv.scaled(m);
    let wm = omega(km);
    let mult = if m.abs() == 1 { 3.0 } else { 1.0 };
    let eight_i_w = Complex64::new(0.0, 8.0 * wm);
    let (ra, rb) = strain_ratios(kv);
    // Triple-product pattern of the amplitudes at (+k0,-k0) for harmonic m.
    let triple = |r: Complex64| match m {
        -1 => r * r.conj() * r.conj(),
        3 => r * r * r,
        -3 => r.conj() * r.conj() * r.conj(),
        _ => unreachable!("harmonic {m} carries no correction"),
    };
    match variant {
        Variant::StrainU => {
            let rho_u = forward_symbol(km.k) * (-forward_symbol(-km.l));
            mult * (omega_sq_1d(km.k) * triple(ra) - rho_u * triple(rb)) / eight_i_w
        }
        Variant::StrainV => {
            let rho_v = forward_symbol(km.l) * (-forward_symbol(-km.k));
            mult * (omega_sq_1d(km.l) * triple(rb) - rho_v * triple(ra)) / eight_i_w
        }
        Variant::Displacement => {
            let k0 = kv;
            let d = match m {
                -1 => kernel_d(k0, -k0, -k0),
                3 => kernel_d(k0, k0, k0),
                -3 => kernel_d(-k0, -k0, -k0),
                _ => unreachable!(),
            };
            -mult * d / eight_i_w
        }
    }
}

pub fn correction_coefficients(
    kv: WaveVector,
    variant: Variant,
    margin: f64,
) -> Result<CorrectionAmplitudeCoefficients, DispersionError> {
    require_frequency(kv)?;
    if omega(kv.scaled(3)) <= margin {
        return Err(DispersionError::Resonant {
            harmonic: 3,
            magnitude: omega(kv.scaled(3)),
        });
    }
    let solve = |m: i32| -> Result<Complex64, DispersionError> {
        let den = correction_denominator(kv, m, 1);
        if den.norm() < margin {
            return Err(DispersionError::Resonant {
                harmonic: m,
                magnitude: den.norm(),
            });
        }
        Ok(correction_forcing(kv, m, variant) / den)
    };
    Ok(CorrectionAmplitudeCoefficients {
        c_1m1: solve(-1)?,
        c_13: solve(3)?,
        c_1m3: solve(-3)?,
    })
}

/// Cubic kernel of the displacement nonlinearity,
/// `n = (e^{ik1}-1)(e^{ik2}-1)(e^{ik3}-1) + c.c.`
pub fn kernel_n(k1: f64, k2: f64, k3: f64) -> f64 {
    2.0 * (forward_symbol(k1) * forward_symbol(k2) * forward_symbol(k3)).re
}

pub fn kernel_d(kv1: WaveVector, kv2: WaveVector, kv3: WaveVector) -> f64 {
    kernel_n(kv1.k, kv2.k, kv3.k) + kernel_n(kv1.l, kv2.l, kv3.l)
}
