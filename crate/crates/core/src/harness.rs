//! Coupled experiments: evolve the envelope, build compatible lattice data,
//! integrate the lattice and measure the sup-norm distance to the
//! approximation over `t in [0, T0 / eps^2]`; then fit the error order over
//! an `eps` sweep.

use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::ansatz::{AnsatzBuilder, AnsatzError, Geometry, ProjectionDiagnostics, ProjectionKind};
use crate::dispersion::{
    nls_coefficients_with_margin, nonresonance_check, DispersionData, DispersionError, Variant,
    WaveVector, DEFAULT_RESONANCE_MARGIN,
};
use crate::lattice::{
    compatibility_defect, energy, BondPerturbation, ForceLaw, Form, LatticeError, LatticeState,
    Verlet,
};
use crate::nls::{
    EnvelopeDiagnostics, EnvelopeField, NlsError, NlsProblem, NlsSolver, DEFAULT_BLOWUP_GUARD,
    DEFAULT_BOX_LENGTH, DEFAULT_GRID, DEFAULT_NLS_DT,
};

/// Errors at or below this are treated as the floating-point floor.
pub const ERROR_FLOOR: f64 = 1e-12;
pub const DEFAULT_PASS_THRESHOLD: f64 = 1.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("order fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("carrier fails the non-resonance condition")]
    NonResonantCarrierRequired,
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error(transparent)]
    Nls(#[from] NlsError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

impl HarnessError {
    /// Short class name of the underlying failure, for reports and exit messages.
    pub fn class(&self) -> &'static str {
        match self {
            HarnessError::Plan(_) => "InvalidPlan",
            HarnessError::NonResonantCarrierRequired => "NonResonantCarrierRequired",
            HarnessError::Dispersion(e) => match e {
                DispersionError::ZeroFrequency { .. } => "ZeroFrequency",
                DispersionError::AxisDegenerate { .. } => "AxisDegenerate",
                DispersionError::Resonant { .. } => "Resonant",
            },
            HarnessError::Nls(e) => match e {
                NlsError::EnvelopeBlowup { .. } => "EnvelopeBlowup",
                _ => "EnvelopeSetup",
            },
            HarnessError::Lattice(e) => match e {
                LatticeError::UnstableStep { .. } => "UnstableStep",
                _ => "LatticeSetup",
            },
            HarnessError::Ansatz(e) => match e {
                AnsatzError::FootprintExceeded { .. } => "FootprintExceeded",
                AnsatzError::MissingB => "MissingB",
                _ => "AnsatzSetup",
            },
            HarnessError::Fit(FitError::DegenerateFit(_)) => "DegenerateFit",
            HarnessError::Fit(_) => "FitSetup",
        }
    }

    /// True for failures that are properties of the carrier itself.
    pub fn is_carrier_error(&self) -> bool {
        matches!(
            self,
            HarnessError::NonResonantCarrierRequired
                | HarnessError::Dispersion(DispersionError::ZeroFrequency { .. })
                | HarnessError::Dispersion(DispersionError::Resonant { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvelopeKind {
    /// `a exp(-|X - c|^2 / sigma^2)` centred in the box.
    Gaussian { amplitude: f64, sigma: f64 },
    /// `a exp(2 pi i (jx X + jy Y) / L)`.
    PlaneWave { amplitude: f64, mode: [i64; 2] },
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpec {
    pub kind: EnvelopeKind,
    pub length: f64,
    pub grid: usize,
    pub dt: f64,
    pub blowup_guard: f64,
}

impl Default for EnvelopeSpec {
    fn default() -> Self {
        Self {
            kind: EnvelopeKind::Gaussian {
                amplitude: 1.0,
                sigma: 4.0,
            },
            length: DEFAULT_BOX_LENGTH,
            grid: DEFAULT_GRID,
            dt: DEFAULT_NLS_DT,
            blowup_guard: DEFAULT_BLOWUP_GUARD,
        }
    }
}

impl EnvelopeSpec {
    pub fn initial(&self, variant: Variant) -> Result<EnvelopeField, NlsError> {
        match self.kind {
            EnvelopeKind::Gaussian { amplitude, sigma } => {
                EnvelopeField::gaussian(self.grid, self.length, variant, amplitude, sigma)
            }
            EnvelopeKind::PlaneWave { amplitude, mode } => {
                EnvelopeField::plane_wave(self.grid, self.length, variant, amplitude, mode)
            }
            EnvelopeKind::Zero => EnvelopeField::zeros(self.grid, self.length, variant),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceKind {
    Cubic,
    /// Linear springs; the envelope then evolves without nonlinearity.
    Linear,
    Perturbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSpec {
    pub kind: ForceKind,
    pub coeff_bound: f64,
}

impl Default for ForceSpec {
    fn default() -> Self {
        Self {
            kind: ForceKind::Cubic,
            coeff_bound: 1.0,
        }
    }
}

impl ForceSpec {
    pub fn build(&self, n_side: usize, eps: f64, seed: u64) -> ForceLaw {
        match self.kind {
            ForceKind::Cubic => ForceLaw::Cubic,
            ForceKind::Linear => ForceLaw::Linear,
            ForceKind::Perturbed => ForceLaw::Perturbed(Box::new(BondPerturbation::sample(
                n_side,
                eps,
                self.coeff_bound,
                seed,
            ))),
        }
    }
}

/// Lattice step `dt = fixed` or `min(max, coeff eps^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtRule {
    pub coeff: f64,
    pub max: f64,
    pub fixed: Option<f64>,
}

impl Default for DtRule {
    fn default() -> Self {
        Self {
            coeff: 0.5,
            max: 0.1,
            fixed: None,
        }
    }
}

impl DtRule {
    pub fn dt(&self, eps: f64) -> f64 {
        self.fixed.unwrap_or_else(|| self.max.min(self.coeff * eps * eps))
    }
}

/// Lattice side `N = fixed` or the largest multiple of `multiple` with
/// `eps N <= L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideRule {
    pub multiple: usize,
    pub fixed: Option<usize>,
}

impl Default for SideRule {
    fn default() -> Self {
        Self {
            multiple: 4,
            fixed: None,
        }
    }
}

impl SideRule {
    pub fn n_side(&self, eps: f64, length: f64) -> usize {
        self.fixed.unwrap_or_else(|| {
            let m = self.multiple.max(1);
            ((length / eps + 1e-9).floor() as usize) / m * m
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub carrier: WaveVector,
    pub variant: Form,
    pub force: ForceSpec,
    pub eps_list: Vec<f64>,
    pub t0: f64,
    pub envelope: EnvelopeSpec,
    pub dt_rule: DtRule,
    pub n_side_rule: SideRule,
    pub corrections: bool,
    pub seed: u64,
    /// Number of slow-time samples in `[0, T0]`, both ends included.
    pub sample_count: usize,
    pub pass_threshold: f64,
    pub resonance_margin: f64,
    pub projection: ProjectionKind,
    /// Evaluate residual norms of the initial approximation for each `eps`.
    pub residuals: bool,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            carrier: WaveVector::from_pi_units(0.5, 0.5),
            variant: Form::Strain,
            force: ForceSpec::default(),
            eps_list: vec![0.2, 0.14, 0.1],
            t0: 1.0,
            envelope: EnvelopeSpec::default(),
            dt_rule: DtRule::default(),
            n_side_rule: SideRule::default(),
            corrections: false,
            seed: 0,
            sample_count: 21,
            pass_threshold: DEFAULT_PASS_THRESHOLD,
            resonance_margin: DEFAULT_RESONANCE_MARGIN,
            projection: ProjectionKind::Oblique,
            residuals: true,
        }
    }
}

impl ExperimentPlan {
    /// Slow sample times: `0`, `T0` and interior points jittered by a
    /// golden-ratio sequence so lattice times avoid a common carrier phase.
    pub fn sample_times(&self) -> Vec<f64> {
        let count = self.sample_count.max(2);
        let last = (count - 1) as f64;
        let golden = 0.5 * (5f64.sqrt() - 1.0);
        (0..count)
            .map(|j| {
                if j == 0 {
                    0.0
                } else if j == count - 1 {
                    self.t0
                } else {
                    let jitter = (j as f64 * golden).fract();
                    self.t0 * (j as f64 - 0.5 + jitter) / last
                }
            })
            .collect()
    }

    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("plan serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn driver(&self, disp: &DispersionData) -> Variant {
        match self.variant {
            Form::Displacement => Variant::Displacement,
            Form::Strain => disp.strain_driver(),
        }
    }

    /// Carrier data, refusing zero-frequency and resonant carriers.
    pub fn dispersion(&self) -> Result<DispersionData, HarnessError> {
        let disp = nls_coefficients_with_margin(self.carrier, self.resonance_margin)?;
        if !nonresonance_check(self.carrier, self.resonance_margin) {
            return Err(HarnessError::NonResonantCarrierRequired);
        }
        Ok(disp)
    }

    pub fn validate_eps(&self, eps: f64) -> Result<(), HarnessError> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(HarnessError::Plan(format!("eps {eps} outside (0, 0.5)")));
        }
        let n = self.n_side_rule.n_side(eps, self.envelope.length);
        if eps * n as f64 > self.envelope.length * (1.0 + 1e-12) {
            return Err(AnsatzError::FootprintExceeded {
                footprint: eps * n as f64,
                length: self.envelope.length,
            }
            .into());
        }
        let dt = self.dt_rule.dt(eps);
        if !(dt > 0.0 && dt <= crate::lattice::DT_MAX) {
            return Err(LatticeError::InvalidStep(dt).into());
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> Result<(), HarnessError> {
        if self.eps_list.len() < 3 {
            return Err(HarnessError::Plan(format!(
                "eps_list needs at least 3 values, got {}",
                self.eps_list.len()
            )));
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(HarnessError::Plan("eps_list must be strictly descending".into()));
        }
        if !(self.t0 > 0.0) {
            return Err(HarnessError::Plan(format!("T0 must be positive, got {}", self.t0)));
        }
        self.eps_list.iter().try_for_each(|&e| self.validate_eps(e))
    }
}

/// The envelope trajectory shared by every `eps` of a plan.
#[derive(Debug, Clone)]
pub struct EnvelopeRun {
    pub disp: DispersionData,
    pub samples: Vec<EnvelopeField>,
    pub diagnostics: Vec<EnvelopeDiagnostics>,
}

fn envelope_problem(plan: &ExperimentPlan, disp: &DispersionData) -> Result<NlsProblem, HarnessError> {
    let g = match plan.force.kind {
        ForceKind::Linear => Complex64::new(0.0, 0.0),
        _ => disp.nonlinear_coefficient(plan.driver(disp))?,
    };
    Ok(NlsProblem::new(disp.hessian, g, plan.envelope.dt)?)
}

/// Evolve the plan's envelope through its sample times.
pub fn prepare_envelope(plan: &ExperimentPlan) -> Result<EnvelopeRun, HarnessError> {
    let disp = plan.dispersion()?;
    let problem = envelope_problem(plan, &disp)?;
    let initial = plan.envelope.initial(plan.driver(&disp))?;
    let mut solver = NlsSolver::for_field(problem, &initial);
    solver.blowup_guard = plan.envelope.blowup_guard;
    let mut diagnostics = Vec::new();
    let samples = solver.evolve_with(&initial, &plan.sample_times(), |d| diagnostics.push(*d))?;
    Ok(EnvelopeRun {
        disp,
        samples,
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub t: f64,
    pub slow_time: f64,
    pub sup_error: f64,
    pub energy: Option<f64>,
    pub compat_defect: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub leading: f64,
    pub corrected: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsRecord {
    pub eps: f64,
    pub n_side: usize,
    pub dt: f64,
    pub steps: usize,
    pub max_sup_error: f64,
    /// `max_sup_error / eps^2`.
    pub scaled_error: f64,
    pub energy_drift: Option<f64>,
    pub compat_defect_max: Option<f64>,
    pub residual_norms: Option<ResidualNorms>,
    pub projection: ProjectionDiagnostics,
    pub samples: Vec<SamplePoint>,
}

impl EpsRecord {
    pub const CSV_HEADER: &'static str = "t,sup_error,energy,compat_defect";

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{}",
                s.t,
                s.sup_error,
                s.energy.map(|v| v.to_string()).unwrap_or_default(),
                s.compat_defect.map(|v| v.to_string()).unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

/// Ansatz builder for one `eps` of a plan, centred on the drifting packet.
pub fn builder_for(
    plan: &ExperimentPlan,
    disp: &DispersionData,
    eps: f64,
) -> Result<AnsatzBuilder, HarnessError> {
    let n = plan.n_side_rule.n_side(eps, plan.envelope.length);
    let t_center = 0.5 * plan.t0 / (eps * eps);
    let geometry = Geometry::centered(eps, n, plan.envelope.length, disp.group_velocity, t_center)?;
    let mut builder = AnsatzBuilder::with_margin(
        *disp,
        plan.variant,
        geometry,
        plan.envelope.grid,
        plan.envelope.length,
        plan.resonance_margin,
    )?;
    if plan.force.kind == ForceKind::Linear {
        builder = builder.linearized();
    }
    builder.projection = plan.projection;
    Ok(builder)
}

pub fn run_single(
    plan: &ExperimentPlan,
    eps: f64,
    env: &EnvelopeRun,
) -> Result<EpsRecord, HarnessError> {
    run_single_observed(plan, eps, env, |_, _| {})
}

/// [`run_single`] with a callback receiving the lattice state at every sample.
pub fn run_single_observed(
    plan: &ExperimentPlan,
    eps: f64,
    env: &EnvelopeRun,
    mut observer: impl FnMut(&LatticeState, &SamplePoint),
) -> Result<EpsRecord, HarnessError> {
    plan.validate_eps(eps)?;
    let builder = builder_for(plan, &env.disp, eps)?;
    let n = builder.geometry().n_side;
    let dt = plan.dt_rule.dt(eps);
    let force = plan.force.build(n, eps, plan.seed);
    let (mut state, projection) = builder.build_initial_data(&env.samples[0], plan.corrections)?;

    let residual_norms = if plan.residuals {
        let init = &env.samples[0];
        let lead = builder.residual_norm(init, 0.0, &force, false)?;
        let corrected = match builder.corrections() {
            Some(_) => Some(builder.residual_norm(init, 0.0, &force, true)?),
            None => None,
        };
        Some(ResidualNorms {
            leading: lead,
            corrected,
        })
    } else {
        None
    };

    let e0 = energy(&state, &force).ok();
    let mut verlet = Verlet::new();
    let mut steps = 0;
    let mut samples = Vec::with_capacity(env.samples.len());
    for field in &env.samples {
        let t = field.time / (eps * eps);
        let span = t - state.time;
        steps += verlet.advance(&mut state, &force, span, dt)?;
        let ansatz = builder.sample(field, t, plan.corrections, false)?;
        let point = SamplePoint {
            t,
            slow_time: field.time,
            sup_error: ansatz.sup_error(&state),
            energy: energy(&state, &force).ok(),
            compat_defect: compatibility_defect(&state).ok(),
        };
        observer(&state, &point);
        samples.push(point);
    }

    let max_sup_error = samples.iter().map(|s| s.sup_error).fold(0.0, f64::max);
    let energy_drift = e0.map(|e0| {
        let scale = e0.abs().max(f64::MIN_POSITIVE);
        samples
            .iter()
            .filter_map(|s| s.energy)
            .map(|e| (e - e0).abs() / scale)
            .fold(0.0, f64::max)
    });
    let compat_defect_max = match plan.variant {
        Form::Strain => Some(samples.iter().filter_map(|s| s.compat_defect).fold(0.0, f64::max)),
        Form::Displacement => None,
    };
    Ok(EpsRecord {
        eps,
        n_side: n,
        dt,
        steps,
        max_sup_error,
        scaled_error: max_sup_error / (eps * eps),
        energy_drift,
        compat_defect_max,
        residual_norms,
        projection,
        samples,
    })
}

/// Least-squares fit of `log err = order log eps + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub order: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    /// 95% confidence interval of the order (infinite for two points).
    pub ci95: [f64; 2],
    pub points: usize,
}

pub fn fit_order(eps: &[f64], errors: &[f64]) -> Result<OrderFit, FitError> {
    let n = eps.len().min(errors.len());
    if n < 3 {
        return Err(FitError::TooFewPoints(n));
    }
    if let Some(e) = errors[..n].iter().find(|&&e| !(e > ERROR_FLOOR) || !e.is_finite()) {
        return Err(FitError::DegenerateFit(format!(
            "error {e:e} at or below the floor {ERROR_FLOOR:e}"
        )));
    }
    let x: Vec<f64> = eps[..n].iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = errors[..n].iter().map(|e| e.ln()).collect();
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::DegenerateFit("all eps values coincide".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let order = sxy / sxx;
    let intercept = my - order * mx;
    if order.abs() < 1e-9 {
        return Err(FitError::DegenerateFit("errors do not vary with eps".into()));
    }
    let ssr: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - order * a).powi(2))
        .sum();
    let dof = nf - 2.0;
    let se = (ssr / dof / sxx).sqrt();
    let tq = StudentsT::new(0.0, 1.0, dof)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(f64::INFINITY);
    Ok(OrderFit {
        order,
        intercept,
        residual: (ssr / nf).sqrt(),
        ci95: [order - tq * se, order + tq * se],
        points: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsFailure {
    pub eps: f64,
    pub class: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub version: String,
    pub config_hash: String,
    pub plan: ExperimentPlan,
    pub records: Vec<EpsRecord>,
    pub failures: Vec<EpsFailure>,
    pub fit: Option<OrderFit>,
    pub fit_error: Option<String>,
    /// All errors sit at the floating-point floor, so no order is fitted.
    pub degenerate_fit: bool,
    pub pass_threshold: f64,
    pub pass: bool,
    pub envelope: Vec<EnvelopeDiagnostics>,
    pub wall_time_s: f64,
}

impl ErrorReport {
    /// Assemble a report from per-`eps` outcomes and apply the pass rule.
    pub fn assemble(
        plan: &ExperimentPlan,
        outcomes: Vec<(f64, Result<EpsRecord, HarnessError>)>,
        envelope: Vec<EnvelopeDiagnostics>,
        wall_time_s: f64,
    ) -> Self {
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for (eps, outcome) in outcomes {
            match outcome {
                Ok(r) => records.push(r),
                Err(e) => failures.push(EpsFailure {
                    eps,
                    class: e.class().to_string(),
                    message: e.to_string(),
                }),
            }
        }
        let eps: Vec<f64> = records.iter().map(|r| r.eps).collect();
        let errs: Vec<f64> = records.iter().map(|r| r.max_sup_error).collect();
        let all_floor = !errs.is_empty() && errs.iter().all(|&e| e <= ERROR_FLOOR);
        let (fit, fit_error) = match fit_order(&eps, &errs) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let pass = failures.is_empty()
            && records.len() >= 3
            && (all_floor || fit.as_ref().is_some_and(|f| f.order >= plan.pass_threshold));
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: plan.config_hash(),
            plan: plan.clone(),
            records,
            failures,
            fit,
            fit_error,
            degenerate_fit: all_floor,
            pass_threshold: plan.pass_threshold,
            pass,
            envelope,
            wall_time_s,
        }
    }

    /// Plot-ready `log_eps, log_maxerr` table.
    pub fn write_fit_tsv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "log_eps\tlog_maxerr")?;
        for r in &self.records {
            writeln!(w, "{}\t{}", r.eps.ln(), r.max_sup_error.ln())?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Run every `eps` of the plan in parallel and fit the error order.
pub fn run_sweep(plan: &ExperimentPlan) -> Result<ErrorReport, HarnessError> {
    let start = Instant::now();
    plan.validate_sweep()?;
    let env = prepare_envelope(plan)?;
    let outcomes: Vec<(f64, Result<EpsRecord, HarnessError>)> = plan
        .eps_list
        .par_iter()
        .map(|&eps| (eps, run_single(plan, eps, &env)))
        .collect();
    Ok(ErrorReport::assemble(
        plan,
        outcomes,
        env.diagnostics.clone(),
        start.elapsed().as_secs_f64(),
    ))
}

/// Report built from externally supplied per-`eps` errors; used to check
/// the fitting and pass logic end to end without running simulations.
pub fn synthetic_report(plan: &ExperimentPlan, errors: &[f64]) -> ErrorReport {
    let outcomes = plan
        .eps_list
        .iter()
        .zip(errors)
        .map(|(&eps, &err)| {
            let record = EpsRecord {
                eps,
                n_side: plan.n_side_rule.n_side(eps, plan.envelope.length),
                dt: plan.dt_rule.dt(eps),
                steps: 0,
                max_sup_error: err,
                scaled_error: err / (eps * eps),
                energy_drift: None,
                compat_defect_max: None,
                residual_norms: None,
                projection: ProjectionDiagnostics::default(),
                samples: Vec::new(),
            };
            (eps, Ok(record))
        })
        .collect();
    ErrorReport::assemble(plan, outcomes, Vec::new(), 0.0)
}
