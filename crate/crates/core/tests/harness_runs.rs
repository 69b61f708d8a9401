use fput2d_core::harness::{
    prepare_envelope, run_single, run_sweep, EnvelopeKind, ErrorReport, ExperimentPlan, ForceKind, HarnessError,
};
use fput2d_core::lattice::{BondPerturbation, Form};

/// A plan small enough to run in well under a second.
fn tiny_plan() -> ExperimentPlan {
    let mut plan = ExperimentPlan {
        eps_list: vec![0.4, 0.3, 0.2],
        t0: 0.2,
        ..ExperimentPlan::default()
    };
    plan.envelope.length = 12.8;
    plan.envelope.grid = 32;
    plan.envelope.kind = EnvelopeKind::Gaussian {
        amplitude: 1.0,
        sigma: 2.0,
    };
    plan
}

fn without_wall_time(r: &ErrorReport) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    v.as_object_mut().unwrap().remove("wall_time_s");
    v
}

#[test]
fn zero_envelope_run_is_exact() {
    let mut plan = tiny_plan();
    plan.envelope.kind = EnvelopeKind::Zero;
    for form in [Form::Strain, Form::Displacement] {
        plan.variant = form;
        let env = prepare_envelope(&plan).unwrap();
        let rec = run_single(&plan, 0.2, &env).unwrap();
        assert_eq!(rec.max_sup_error, 0.0);
        assert!(rec.samples.iter().all(|s| s.sup_error == 0.0));
    }
    let report = run_sweep(&plan).unwrap();
    assert!(report.degenerate_fit);
    assert!(report.pass);
}

#[test]
fn linear_force_plane_wave_is_reproduced() {
    let mut plan = ExperimentPlan {
        variant: Form::Displacement,
        t0: 0.01,
        ..ExperimentPlan::default()
    };
    plan.force.kind = ForceKind::Linear;
    plan.dt_rule.fixed = Some(1e-3);
    plan.envelope.kind = EnvelopeKind::PlaneWave {
        amplitude: 1.0,
        mode: [0, 0],
    };
    let report = run_sweep(&plan).unwrap();
    assert!(report.failures.is_empty());
    for r in &report.records {
        assert!(r.max_sup_error <= 1e-6, "eps {}: {:e}", r.eps, r.max_sup_error);
    }
}

#[test]
fn reports_are_deterministic() {
    let mut plan = tiny_plan();
    plan.force.kind = ForceKind::Perturbed;
    plan.variant = Form::Displacement;
    let a = run_sweep(&plan).unwrap();
    let b = run_sweep(&plan).unwrap();
    assert_eq!(without_wall_time(&a), without_wall_time(&b));
    assert_eq!(a.config_hash, b.config_hash);
    plan.seed = 1;
    assert_ne!(plan.config_hash(), a.config_hash);
}

#[test]
fn perturbation_coefficients_follow_the_seed() {
    let a = BondPerturbation::sample(16, 0.2, 1.0, 3);
    assert_eq!(a, BondPerturbation::sample(16, 0.2, 1.0, 3));
    assert_ne!(a, BondPerturbation::sample(16, 0.2, 1.0, 4));
    assert!(a.max_coefficient() <= 1.0);
}

#[test]
fn report_artifacts_have_expected_shape() {
    let report = run_sweep(&tiny_plan()).unwrap();
    let mut tsv = Vec::new();
    report.write_fit_tsv(&mut tsv).unwrap();
    let tsv = String::from_utf8(tsv).unwrap();
    assert_eq!(tsv.lines().count(), 4);
    assert!(tsv.starts_with("log_eps\tlog_maxerr"));
    let mut csv = Vec::new();
    report.records[0].write_csv(&mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert_eq!(csv.lines().count(), 1 + report.plan.sample_count);
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["records"].as_array().unwrap().len(), 3);
    assert!(json["fit"]["order"].is_number());
}

#[test]
fn blowup_is_reported_by_class() {
    let mut plan = tiny_plan();
    // A large amplitude steepens the nonlinear phase until the H4 proxy passes a low guard.
    plan.envelope.kind = EnvelopeKind::Gaussian {
        amplitude: 40.0,
        sigma: 2.0,
    };
    plan.envelope.blowup_guard = 1e3;
    match prepare_envelope(&plan) {
        Err(e @ HarnessError::Nls(_)) => assert_eq!(e.class(), "EnvelopeBlowup"),
        other => panic!("expected a blowup, got {other:?}"),
    }
}

#[test]
fn halving_the_step_barely_changes_the_error() {
    let plan = ExperimentPlan {
        residuals: false,
        ..ExperimentPlan::default()
    };
    let env = prepare_envelope(&plan).unwrap();
    let coarse = run_single(&plan, 0.2, &env).unwrap().max_sup_error;
    let mut fine_plan = plan.clone();
    fine_plan.dt_rule.fixed = Some(0.5 * plan.dt_rule.dt(0.2));
    let fine = run_single(&fine_plan, 0.2, &env).unwrap().max_sup_error;
    assert!(((coarse - fine) / fine).abs() < 0.1, "coarse {coarse:e} fine {fine:e}");
}
