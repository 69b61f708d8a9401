//! Flat TOML run configuration with `key=value` overrides.

use std::path::{Path, PathBuf};

use fput2d_core::ansatz::ProjectionKind;
use fput2d_core::dispersion::{WaveVector, DEFAULT_RESONANCE_MARGIN};
use fput2d_core::harness::{
    DtRule, EnvelopeKind, EnvelopeSpec, ExperimentPlan, ForceKind, ForceSpec, SideRule, DEFAULT_PASS_THRESHOLD,
};
use fput2d_core::nls::{DEFAULT_BLOWUP_GUARD, DEFAULT_BOX_LENGTH, DEFAULT_GRID, DEFAULT_NLS_DT};
use fput2d_core::Form;
use serde::de::{self, Visitor};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeChoice {
    Gaussian,
    PlaneWave,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Pretty,
    Compact,
}

/// Every accepted key. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub carrier: [f64; 2],
    pub variant: Form,
    pub eps: f64,
    pub eps_list: Vec<f64>,
    pub t0: f64,
    pub box_length: f64,
    pub grid: usize,
    pub nls_dt: f64,
    pub envelope: EnvelopeChoice,
    pub amplitude: f64,
    pub sigma: f64,
    pub plane_wave_mode: [i64; 2],
    pub n_side: Option<usize>,
    pub n_side_multiple: usize,
    pub dt: Option<f64>,
    pub dt_coeff: f64,
    pub dt_max: f64,
    pub corrections: bool,
    pub force: ForceKind,
    pub coeff_bound: f64,
    pub seed: u64,
    pub samples: usize,
    pub pass_threshold: f64,
    pub blowup_guard: f64,
    pub resonance_margin: f64,
    pub projection: ProjectionKind,
    pub residuals: bool,
    pub snapshots: usize,
    pub synthetic_order: Option<f64>,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            carrier: [0.5, 0.5],
            variant: Form::Strain,
            eps: 0.2,
            eps_list: vec![0.2, 0.14, 0.1],
            t0: 1.0,
            box_length: DEFAULT_BOX_LENGTH,
            grid: DEFAULT_GRID,
            nls_dt: DEFAULT_NLS_DT,
            envelope: EnvelopeChoice::Gaussian,
            amplitude: 1.0,
            sigma: 4.0,
            plane_wave_mode: [0, 0],
            n_side: None,
            n_side_multiple: 4,
            dt: None,
            dt_coeff: 0.5,
            dt_max: 0.1,
            corrections: false,
            force: ForceKind::Cubic,
            coeff_bound: 1.0,
            seed: 0,
            samples: 21,
            pass_threshold: DEFAULT_PASS_THRESHOLD,
            blowup_guard: DEFAULT_BLOWUP_GUARD,
            resonance_margin: DEFAULT_RESONANCE_MARGIN,
            projection: ProjectionKind::Oblique,
            residuals: true,
            snapshots: 3,
            synthetic_order: None,
            format: OutputFormat::Pretty,
            out: None,
        }
    }
}

/// Key names and one-line descriptions shown by `--help`.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("carrier", "carrier [k0, l0] in multiples of pi (default [0.5, 0.5])"),
    ("variant", "\"strain\" or \"displacement\""),
    ("eps", "amplitude parameter for simulate (default 0.2)"),
    ("eps_list", "descending amplitudes for sweep and residual, at least 3"),
    ("t0", "final slow time T0 (default 1)"),
    ("box_length", "envelope box length L (default 40)"),
    ("grid", "envelope grid side M, a power of two (default 256)"),
    ("nls_dt", "envelope time step (default 1e-3)"),
    ("envelope", "\"gaussian\", \"plane_wave\" or \"zero\""),
    ("amplitude", "envelope amplitude (default 1)"),
    ("sigma", "Gaussian width (default 4)"),
    ("plane_wave_mode", "plane-wave mode [jx, jy] on the envelope box"),
    ("n_side", "fixed lattice side N (default: rule)"),
    ("n_side_multiple", "N is the largest multiple of this with eps N <= L (default 4)"),
    ("dt", "fixed lattice step (default: rule)"),
    ("dt_coeff", "lattice step rule dt = min(dt_max, dt_coeff eps^2) (default 0.5)"),
    ("dt_max", "cap of the lattice step rule (default 0.1)"),
    ("corrections", "include the cubic correction terms (default false)"),
    ("force", "\"cubic\", \"linear\" or \"perturbed\""),
    ("coeff_bound", "bound on perturbation coefficients (default 1)"),
    ("seed", "seed for perturbation coefficients (default 0)"),
    ("samples", "number of slow-time samples in [0, T0] (default 21)"),
    ("pass_threshold", "minimum fitted order for a passing sweep (default 1.8)"),
    ("blowup_guard", "envelope H4-proxy guard (default 1e4)"),
    ("resonance_margin", "non-resonance margin (default 1e-8)"),
    ("projection", "\"oblique\" or \"orthogonal\" compatibility projection"),
    ("residuals", "record residual norms in sweeps (default true)"),
    ("snapshots", "number of snapshot times written by simulate (default 3)"),
    ("synthetic_order", "sweep self-test: use errors eps^order instead of simulating"),
    ("format", "\"pretty\" or \"compact\" JSON output"),
    ("out", "output directory (overridden by --out)"),
];

/// Text appended to `--help`.
pub fn keys_help() -> String {
    let width = CONFIG_KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys (TOML file or --set key=value):\n");
    for (k, d) in CONFIG_KEYS {
        s.push_str(&format!("  {k:width$}  {d}\n"));
    }
    s.push_str("\nEnvironment: FPUT2D_THREADS caps the worker pool.\n");
    s.push_str("Exit codes: 0 ok, 1 config, 2 carrier, 3 solver, 4 failed order fit.");
    s
}

/// Field names the deserializer accepts, read from the derive itself.
///
/// ```
/// use std::collections::BTreeSet;
/// use fput2d_cli::config::{accepted_keys, CONFIG_KEYS};
/// let documented: BTreeSet<&str> = CONFIG_KEYS.iter().map(|(k, _)| *k).collect();
/// let parsed: BTreeSet<&str> = accepted_keys().iter().copied().collect();
/// assert_eq!(documented, parsed);
/// ```
pub fn accepted_keys() -> &'static [&'static str] {
    struct FieldProbe(Option<&'static [&'static str]>);

    #[derive(Debug)]
    struct Stop;
    impl std::fmt::Display for Stop {
        fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            f.write_str("probe")
        }
    }
    impl std::error::Error for Stop {}
    impl de::Error for Stop {
        fn custom<T: std::fmt::Display>(_: T) -> Self {
            Stop
        }
    }

    impl<'de> de::Deserializer<'de> for &mut FieldProbe {
        type Error = Stop;
        fn deserialize_any<V: Visitor<'de>>(self, _: V) -> Result<V::Value, Stop> {
            Err(Stop)
        }
        fn deserialize_struct<V: Visitor<'de>>(
            self,
            _: &'static str,
            fields: &'static [&'static str],
            _: V,
        ) -> Result<V::Value, Stop> {
            self.0 = Some(fields);
            Err(Stop)
        }
        serde::forward_to_deserialize_any! {
            bool i8 i16 i32 i64 i128 u8 u16 u32 u64 u128 f32 f64 char str string
            bytes byte_buf option unit unit_struct newtype_struct seq tuple
            tuple_struct map enum identifier ignored_any
        }
    }

    let mut probe = FieldProbe(None);
    let _ = Config::deserialize(&mut probe);
    probe.0.expect("Config deserializes as a struct")
}

/// Parse the right-hand side of `--set key=value` as a TOML value, falling
/// back to a bare string so `--set variant=displacement` works unquoted.
fn parse_override(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl Config {
    /// Load a config file (or defaults) and apply overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{item}` is not key=value")))?;
            table.insert(key.trim().to_string(), parse_override(value.trim()));
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    pub fn carrier(&self) -> WaveVector {
        WaveVector::from_pi_units(self.carrier[0], self.carrier[1])
    }

    pub fn plan(&self) -> ExperimentPlan {
        let kind = match self.envelope {
            EnvelopeChoice::Gaussian => EnvelopeKind::Gaussian {
                amplitude: self.amplitude,
                sigma: self.sigma,
            },
            EnvelopeChoice::PlaneWave => EnvelopeKind::PlaneWave {
                amplitude: self.amplitude,
                mode: self.plane_wave_mode,
            },
            EnvelopeChoice::Zero => EnvelopeKind::Zero,
        };
        ExperimentPlan {
            carrier: self.carrier(),
            variant: self.variant,
            force: ForceSpec {
                kind: self.force,
                coeff_bound: self.coeff_bound,
            },
            eps_list: self.eps_list.clone(),
            t0: self.t0,
            envelope: EnvelopeSpec {
                kind,
                length: self.box_length,
                grid: self.grid,
                dt: self.nls_dt,
                blowup_guard: self.blowup_guard,
            },
            dt_rule: DtRule {
                coeff: self.dt_coeff,
                max: self.dt_max,
                fixed: self.dt,
            },
            n_side_rule: SideRule {
                multiple: self.n_side_multiple,
                fixed: self.n_side,
            },
            corrections: self.corrections,
            seed: self.seed,
            sample_count: self.samples,
            pass_threshold: self.pass_threshold,
            resonance_margin: self.resonance_margin,
            projection: self.projection,
            residuals: self.residuals,
        }
    }

    /// Serialize `value` as JSON in the configured format.
    pub fn json<T: Serialize>(&self, value: &T) -> String {
        match self.format {
            OutputFormat::Pretty => serde_json::to_string_pretty(value),
            OutputFormat::Compact => serde_json::to_string(value),
        }
        .expect("value serializes")
    }
}
