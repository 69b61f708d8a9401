//! Fixtures shared by the kernel benchmarks in `benches/`.

use fput2d_core::ansatz::{AnsatzBuilder, Geometry};
use fput2d_core::dispersion::{nls_coefficients, Variant, WaveVector};
use fput2d_core::{EnvelopeField, Form, LatticeState, NlsProblem, NlsSolver};
use num_complex::Complex64;

/// Strain initial data of the default experiment at `eps`.
pub fn strain_state(eps: f64) -> LatticeState {
    let (builder, env) = ansatz(eps, Form::Strain);
    builder.build_initial_data(&env, false).unwrap().0
}

/// Builder and initial envelope on the default 40 x 40 box.
pub fn ansatz(eps: f64, form: Form) -> (AnsatzBuilder, EnvelopeField) {
    let d = nls_coefficients(WaveVector::from_pi_units(0.5, 0.5)).unwrap();
    let n = ((40.0 / eps + 1e-9) as usize) / 4 * 4;
    let builder = AnsatzBuilder::new(d, form, Geometry::new(eps, n, 40.0).unwrap(), 256, 40.0).unwrap();
    let env = EnvelopeField::gaussian(256, 40.0, builder.driver(), 1.0, 4.0).unwrap();
    (builder, env)
}

/// Envelope solver and field for the strain-u equation on an `m x m` grid.
pub fn envelope(m: usize) -> (NlsSolver, EnvelopeField) {
    let d = nls_coefficients(WaveVector::from_pi_units(0.5, 0.5)).unwrap();
    let g = d.nonlinear_coefficient(Variant::StrainU).unwrap();
    let field = EnvelopeField::gaussian(m, 40.0, Variant::StrainU, 1.0, 4.0).unwrap();
    let solver = NlsSolver::for_field(NlsProblem::new(d.hessian, g, 1e-3).unwrap(), &field);
    (solver, field)
}

/// Deterministic complex test signal of length `n * n`.
pub fn signal(n: usize) -> Vec<Complex64> {
    (0..n * n)
        .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
        .collect()
}
