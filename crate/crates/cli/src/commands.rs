//! The four subcommands and their on-disk artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use fput2d_core::harness::{
    builder_for, fit_order, prepare_envelope, run_single_observed, run_sweep, synthetic_report, EpsRecord,
    ErrorReport, OrderFit,
};
use fput2d_core::lattice::LatticeDiagnostics;
use fput2d_core::nls::EnvelopeDiagnostics;
use fput2d_core::snapshot::{write_envelope, write_lattice};
use fput2d_core::DispersionData;
use serde::Serialize;

use crate::config::Config;
use crate::error::CliError;

pub const DEFAULT_OUT_DIR: &str = "fput2d-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Coeffs,
    Simulate,
    Sweep,
    Residual,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Coeffs => "coeffs",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Residual => "residual",
        }
    }
}

/// Carrier data in the shape of the run header.
#[derive(Debug, Clone, Serialize)]
pub struct CoeffsHeader {
    pub carrier_pi: [f64; 2],
    pub omega0: f64,
    pub cx: f64,
    pub cy: f64,
    pub hess: [[f64; 2]; 2],
    pub gamma_a_im: Option<f64>,
    pub gamma_b_im: Option<f64>,
    pub gamma_q_im: f64,
    pub nonresonant: bool,
    pub axis_degenerate_k: bool,
    pub axis_degenerate_l: bool,
}

impl CoeffsHeader {
    fn new(cfg: &Config, d: &DispersionData) -> Self {
        Self {
            carrier_pi: cfg.carrier,
            omega0: d.omega0,
            cx: d.group_velocity[0],
            cy: d.group_velocity[1],
            hess: d.hessian,
            gamma_a_im: d.gamma_a.map(|g| g.im),
            gamma_b_im: d.gamma_b.map(|g| g.im),
            gamma_q_im: d.gamma_q.im,
            nonresonant: d.nonresonant,
            axis_degenerate_k: d.axis_degenerate_k,
            axis_degenerate_l: d.axis_degenerate_l,
        }
    }
}

/// Output directory that remembers what was written, for the manifest.
struct OutDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|source| CliError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn io_err(&self, rel: &str) -> impl FnOnce(std::io::Error) -> CliError {
        let path = self.root.join(rel);
        move |source| CliError::Io { path, source }
    }

    /// Stream into `rel` through `fill`.
    fn write_with(
        &mut self,
        rel: &str,
        fill: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(self.io_err(rel))?;
        }
        let mut w = BufWriter::new(File::create(&path).map_err(self.io_err(rel))?);
        fill(&mut w).and_then(|_| w.flush()).map_err(self.io_err(rel))?;
        self.files.push(rel.to_string());
        Ok(())
    }

    fn write_text(&mut self, rel: &str, text: &str) -> Result<(), CliError> {
        self.write_with(rel, |w| w.write_all(text.as_bytes()))
    }

    fn finish(mut self, cfg: &Config, command: Command, started: Instant) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            tool: &'static str,
            version: &'static str,
            command: &'static str,
            config_hash: String,
            /// Envelope snapshots do not store the box length.
            box_length: f64,
            threads: usize,
            files: &'a [String],
            config: &'a Config,
            wall_time_s: f64,
        }
        self.files.sort();
        let manifest = Manifest {
            tool: "fput2d",
            version: env!("CARGO_PKG_VERSION"),
            command: command.name(),
            config_hash: cfg.plan().config_hash(),
            box_length: cfg.box_length,
            threads: rayon::current_num_threads(),
            files: &self.files,
            config: cfg,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let path = self.root.join("manifest.json");
        fs::write(&path, text).map_err(|source| CliError::Io { path, source })
    }
}

fn out_root(cfg: &Config) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

pub fn execute(command: Command, cfg: &Config) -> Result<(), CliError> {
    let started = Instant::now();
    if command == Command::Coeffs && cfg.out.is_none() {
        return coeffs(cfg, None);
    }
    let mut out = OutDir::create(&out_root(cfg))?;
    let result = match command {
        Command::Coeffs => coeffs(cfg, Some(&mut out)),
        Command::Simulate => simulate(cfg, &mut out),
        Command::Sweep => sweep(cfg, &mut out),
        Command::Residual => residual(cfg, &mut out),
    };
    // Failed runs keep their manifest so partial artifacts stay traceable.
    out.finish(cfg, command, started)?;
    result
}

fn coeffs(cfg: &Config, out: Option<&mut OutDir>) -> Result<(), CliError> {
    let disp = cfg.plan().dispersion().map_err(CliError::from_validation)?;
    let text = cfg.json(&CoeffsHeader::new(cfg, &disp));
    println!("{text}");
    if let Some(out) = out {
        out.write_text("coeffs.json", &text)?;
    }
    Ok(())
}

/// Evenly spread indices into `len` samples, first and last included.
fn snapshot_indices(len: usize, count: usize) -> Vec<usize> {
    if len == 0 || count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![len - 1];
    }
    let mut idx: Vec<usize> = (0..count)
        .map(|j| ((j * (len - 1)) as f64 / (count - 1) as f64).round() as usize)
        .collect();
    idx.dedup();
    idx
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    config_hash: String,
    coefficients: CoeffsHeader,
    snapshot_times: Vec<f64>,
    #[serde(flatten)]
    record: &'a EpsRecord,
}

fn simulate(cfg: &Config, out: &mut OutDir) -> Result<(), CliError> {
    let plan = cfg.plan();
    let disp = plan.dispersion().map_err(CliError::from_validation)?;
    plan.validate_eps(cfg.eps).map_err(CliError::from_validation)?;
    if !(plan.t0 > 0.0) {
        return Err(CliError::Config(format!("t0 must be positive, got {}", plan.t0)));
    }
    let env = prepare_envelope(&plan).map_err(CliError::from_run)?;
    let wanted = snapshot_indices(env.samples.len(), cfg.snapshots);

    let mut lattice_rows = Vec::with_capacity(env.samples.len());
    let mut snapshots: Vec<(String, Vec<u8>)> = Vec::new();
    let mut index = 0;
    let record = run_single_observed(&plan, cfg.eps, &env, |state, point| {
        lattice_rows.push(LatticeDiagnostics {
            t: point.t,
            energy: point.energy,
            compat_defect: point.compat_defect,
            max_amp: state.max_amplitude(),
        });
        if wanted.contains(&index) {
            let mut buf = Vec::new();
            write_lattice(&mut buf, state).expect("in-memory write");
            snapshots.push((format!("snapshots/lattice_{index:03}.bin"), buf));
        }
        index += 1;
    })
    .map_err(CliError::from_run)?;

    for (name, bytes) in &snapshots {
        out.write_with(name, |w| w.write_all(bytes))?;
    }
    for &i in &wanted {
        out.write_with(&format!("snapshots/envelope_{i:03}.bin"), |w| {
            write_envelope(w, &env.samples[i])
        })?;
    }
    out.write_with("errors.csv", |w| record.write_csv(w))?;
    out.write_with("lattice_diagnostics.csv", |w| {
        writeln!(w, "{}", LatticeDiagnostics::CSV_HEADER)?;
        lattice_rows.iter().try_for_each(|r| writeln!(w, "{}", r.csv_row()))
    })?;
    out.write_with("envelope_diagnostics.csv", |w| {
        writeln!(w, "{}", EnvelopeDiagnostics::CSV_HEADER)?;
        env.diagnostics.iter().try_for_each(|r| writeln!(w, "{}", r.csv_row()))
    })?;
    let summary = SimulationSummary {
        config_hash: plan.config_hash(),
        coefficients: CoeffsHeader::new(cfg, &disp),
        snapshot_times: wanted.iter().map(|&i| record.samples[i].t).collect(),
        record: &record,
    };
    out.write_text("summary.json", &cfg.json(&summary))?;
    println!(
        "eps {} N {} steps {}: max sup error {:.6e} (error/eps^2 {:.3})",
        record.eps, record.n_side, record.steps, record.max_sup_error, record.scaled_error
    );
    Ok(())
}

fn sweep(cfg: &Config, out: &mut OutDir) -> Result<(), CliError> {
    let plan = cfg.plan();
    plan.dispersion().map_err(CliError::from_validation)?;
    plan.validate_sweep().map_err(CliError::from_validation)?;
    let report: ErrorReport = match cfg.synthetic_order {
        Some(p) => {
            let errors: Vec<f64> = plan.eps_list.iter().map(|e| e.powf(p)).collect();
            synthetic_report(&plan, &errors)
        }
        None => run_sweep(&plan).map_err(CliError::from_run)?,
    };

    out.write_text("report.json", &cfg.json(&report))?;
    out.write_with("fit.tsv", |w| report.write_fit_tsv(w))?;
    for r in &report.records {
        out.write_with(&format!("errors_eps{}.csv", r.eps), |w| r.write_csv(w))?;
    }
    for r in &report.records {
        println!(
            "eps {}: N {} dt {} max sup error {:.6e} (error/eps^2 {:.3})",
            r.eps, r.n_side, r.dt, r.max_sup_error, r.scaled_error
        );
    }
    if let Some(f) = report.failures.first() {
        return Err(CliError::Solver {
            class: f.class.clone(),
            message: format!("eps {}: {}", f.eps, f.message),
        });
    }
    match (&report.fit, report.degenerate_fit) {
        (_, true) => println!("all errors at the floating-point floor; no order fitted"),
        (Some(f), _) => println!(
            "order {:.4} (95% CI [{:.3}, {:.3}]), threshold {}",
            f.order, f.ci95[0], f.ci95[1], report.pass_threshold
        ),
        (None, _) => {}
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Acceptance(match (&report.fit, &report.fit_error) {
            (Some(f), _) => format!("fitted order {:.4} below {}", f.order, report.pass_threshold),
            (None, Some(e)) => e.clone(),
            (None, None) => "no fit".into(),
        }))
    }
}

#[derive(Serialize)]
struct ResidualRow {
    eps: f64,
    n_side: usize,
    leading: f64,
    corrected: Option<f64>,
}

#[derive(Serialize)]
struct ResidualSummary {
    config_hash: String,
    rows: Vec<ResidualRow>,
    order_leading: Option<OrderFit>,
    order_corrected: Option<OrderFit>,
}

fn residual(cfg: &Config, out: &mut OutDir) -> Result<(), CliError> {
    let plan = cfg.plan();
    let disp = plan.dispersion().map_err(CliError::from_validation)?;
    plan.validate_sweep().map_err(CliError::from_validation)?;
    let mut rows = Vec::new();
    for &eps in &plan.eps_list {
        let builder = builder_for(&plan, &disp, eps).map_err(CliError::from_run)?;
        let env = plan
            .envelope
            .initial(builder.driver())
            .map_err(|e| CliError::from_run(e.into()))?;
        let n = builder.geometry().n_side;
        let force = plan.force.build(n, eps, plan.seed);
        let run = |corr: bool| {
            builder
                .residual_norm(&env, 0.0, &force, corr)
                .map_err(|e| CliError::from_run(e.into()))
        };
        let leading = run(false)?;
        let corrected = match builder.corrections() {
            Some(_) => Some(run(true)?),
            None => None,
        };
        rows.push(ResidualRow {
            eps,
            n_side: n,
            leading,
            corrected,
        });
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let lead: Vec<f64> = rows.iter().map(|r| r.leading).collect();
    let corr: Option<Vec<f64>> = rows.iter().map(|r| r.corrected).collect();
    let summary = ResidualSummary {
        config_hash: plan.config_hash(),
        order_leading: fit_order(&eps, &lead).ok(),
        order_corrected: corr.and_then(|c| fit_order(&eps, &c).ok()),
        rows,
    };
    out.write_with("residual.tsv", |w| {
        writeln!(w, "eps\tleading\tcorrected")?;
        summary.rows.iter().try_for_each(|r| {
            let c = r.corrected.map(|c| c.to_string()).unwrap_or_default();
            writeln!(w, "{}\t{}\t{}", r.eps, r.leading, c)
        })
    })?;
    let text = cfg.json(&summary);
    out.write_text("residual.json", &text)?;
    println!("{text}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_indices_cover_ends() {
        assert_eq!(snapshot_indices(21, 3), vec![0, 10, 20]);
        assert_eq!(snapshot_indices(21, 1), vec![20]);
        assert_eq!(snapshot_indices(2, 5), vec![0, 1]);
        assert!(snapshot_indices(21, 0).is_empty());
    }
}
