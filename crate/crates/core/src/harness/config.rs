//! Flat `key = value` scenario files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::bath::{BathError, BathParams};
use crate::chain::{ChainError, ChainParams};
use crate::model::{InitialPairing, ModeBasis, ModelOptions};
use crate::propagator::{EvolutionConfig, PropagatorError, Variant};

/// Tunneling energy of a run when the file does not set `chain.j`, ps⁻¹.
pub const DEFAULT_J: f64 = 10.0;
pub const DEFAULT_SIGMA_GRID: [f64; 7] = [0.20, 0.21, 0.25, 0.30, 0.40, 0.50, 0.60];
pub const DEFAULT_U_GRID: [f64; 4] = [-0.2, -0.1, 0.0, 0.1];
/// `t_max` default in units of 1/J.
pub const DEFAULT_T_MAX_J: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Single,
    CompareVariants,
    SigmaSweep,
    USweep,
    Calibrate,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Single => "single",
            Scenario::CompareVariants => "compare_variants",
            Scenario::SigmaSweep => "sigma_sweep",
            Scenario::USweep => "u_sweep",
            Scenario::Calibrate => "calibrate",
        }
    }

    fn is_sweep(self) -> bool {
        matches!(self, Scenario::SigmaSweep | Scenario::USweep)
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [
            Scenario::Single,
            Scenario::CompareVariants,
            Scenario::SigmaSweep,
            Scenario::USweep,
            Scenario::Calibrate,
        ]
        .into_iter()
        .find(|v| v.name() == s)
        .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

/// A numeric setting that may be derived at run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auto {
    Auto,
    Value(f64),
}

impl fmt::Display for Auto {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Auto::Auto => f.write_str("auto"),
            Auto::Value(v) => write!(f, "{v}"),
        }
    }
}

/// Fully validated scenario.
///
/// `chain` holds absolute energies in ps⁻¹. In the file, `chain.delta`,
/// `chain.mu`, `chain.u` and the `u_sweep` values are given in units of J.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub chain: ChainParams,
    pub bath: BathParams,
    pub model: ModelOptions,
    /// `dt` and `lindblad_rate` here are resolved per run from the `Auto` fields.
    pub evolution: EvolutionConfig,
    pub dt: Auto,
    pub lindblad_rate: Auto,
    pub sweep_values: Vec<f64>,
    pub output_dir: PathBuf,
    pub output_stride: usize,
    /// `None` means the norm scale comes from the calibration file.
    pub norm_scale: Option<f64>,
    pub calibration_sigma: f64,
    pub calibration_target: f64,
    /// Every key with its effective value and whether it was defaulted.
    pub entries: Vec<ConfigEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    pub key: &'static str,
    pub value: String,
    pub defaulted: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("config error at line {line}, key `{key}`: {message}")]
pub struct ConfigError {
    /// 0 when the key was not present in the file.
    pub line: usize,
    pub key: String,
    pub message: String,
}

const KEYS: &[&str] = &[
    "scenario",
    "output_dir",
    "output_stride",
    "sweep_values",
    "chain.n_sites",
    "chain.j",
    "chain.delta",
    "chain.mu",
    "chain.u",
    "bath.f_ph",
    "bath.sigma",
    "bath.c_s",
    "bath.temperature",
    "bath.k_min",
    "bath.k_max",
    "bath.n_quad",
    "bath.norm_scale",
    "bath.kb_over_hbar",
    "calibration.sigma",
    "calibration.target",
    "model.initial_pairing",
    "model.mode_basis",
    "model.ground_gap",
    "evolution.variant",
    "evolution.dt",
    "evolution.t_max",
    "evolution.lindblad_rate",
    "evolution.steady_window_fraction",
    "evolution.drift_tolerance",
    "evolution.stop_when_steady",
    "evolution.abort_trace_error",
    "evolution.abort_min_eigenvalue",
];

struct Raw {
    values: BTreeMap<&'static str, (usize, String)>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(ConfigError {
                    line: line_no,
                    key: content.to_string(),
                    message: "expected `key = value`".into(),
                });
            };
            let k = k.trim();
            let Some(&key) = KEYS.iter().find(|&&known| known == k) else {
                return Err(ConfigError {
                    line: line_no,
                    key: k.to_string(),
                    message: "unknown key".into(),
                });
            };
            if let Some((first, _)) = values.get(key) {
                return Err(ConfigError {
                    line: line_no,
                    key: k.to_string(),
                    message: format!("duplicate key, first set on line {first}"),
                });
            }
            values.insert(key, (line_no, v.trim().to_string()));
        }
        Ok(Self { values })
    }

    fn line(&self, key: &str) -> usize {
        self.values.get(key).map_or(0, |(l, _)| *l)
    }

    fn get<T: FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|e| ConfigError {
                line: *line,
                key: key.to_string(),
                message: format!("cannot parse `{v}`: {e}"),
            }),
        }
    }

    fn auto(&self, key: &'static str) -> Result<Option<Auto>, ConfigError> {
        match self.values.get(key) {
            Some((_, v)) if v == "auto" => Ok(Some(Auto::Auto)),
            _ => Ok(self.get::<f64>(key)?.map(Auto::Value)),
        }
    }

    fn list(&self, key: &'static str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some((line, v)) = self.values.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|e| ConfigError {
                    line: *line,
                    key: key.to_string(),
                    message: format!("cannot parse `{s}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

fn parse_pairing(s: &str) -> Result<InitialPairing, String> {
    match s {
        "bare" => Ok(InitialPairing::Bare),
        "dressed_zero_temperature" => Ok(InitialPairing::DressedZeroTemperature),
        _ => Err(format!(
            "expected `bare` or `dressed_zero_temperature`, got `{s}`"
        )),
    }
}

fn pairing_name(p: InitialPairing) -> &'static str {
    match p {
        InitialPairing::Bare => "bare",
        InitialPairing::DressedZeroTemperature => "dressed_zero_temperature",
    }
}

fn parse_basis(s: &str) -> Result<ModeBasis, String> {
    match s {
        "initial" => Ok(ModeBasis::Initial),
        "renormalized" => Ok(ModeBasis::Renormalized),
        _ => Err(format!("expected `initial` or `renormalized`, got `{s}`")),
    }
}

fn basis_name(b: ModeBasis) -> &'static str {
    match b {
        ModeBasis::Initial => "initial",
        ModeBasis::Renormalized => "renormalized",
    }
}

fn format_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Parses and validates a scenario file; an empty text yields all defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw = Raw::parse(text)?;
    let mut entries = Vec::new();
    let mut note = |key: &'static str, value: String| {
        entries.push(ConfigEntry {
            key,
            value,
            defaulted: !raw.values.contains_key(key),
        });
    };

    let scenario = match raw.values.get("scenario") {
        None => Scenario::Single,
        Some((line, v)) => v.parse().map_err(|message| ConfigError {
            line: *line,
            key: "scenario".into(),
            message,
        })?,
    };
    note("scenario", scenario.name().into());
    let output_dir = raw
        .get::<String>("output_dir")?
        .map_or_else(|| PathBuf::from("output"), PathBuf::from);
    note("output_dir", output_dir.display().to_string());
    let output_stride = raw.get::<usize>("output_stride")?.unwrap_or(10);
    note("output_stride", output_stride.to_string());

    let j = raw.get::<f64>("chain.j")?.unwrap_or(DEFAULT_J);
    let delta_j = raw.get::<f64>("chain.delta")?.unwrap_or(1.0);
    let mu_j = raw.get::<f64>("chain.mu")?.unwrap_or(0.0);
    let u_j = raw.get::<f64>("chain.u")?.unwrap_or(0.0);
    let chain = ChainParams {
        j,
        delta: delta_j * j,
        mu: mu_j * j,
        u: u_j * j,
        n_sites: raw.get::<usize>("chain.n_sites")?.unwrap_or(4),
    };
    note("chain.n_sites", chain.n_sites.to_string());
    note("chain.j", j.to_string());
    note("chain.delta", delta_j.to_string());
    note("chain.mu", mu_j.to_string());
    note("chain.u", u_j.to_string());

    let d = BathParams::default();
    let norm_scale = raw.get::<f64>("bath.norm_scale")?;
    let bath = BathParams {
        f_ph: raw.get("bath.f_ph")?.unwrap_or(d.f_ph),
        sigma: raw.get("bath.sigma")?.unwrap_or(d.sigma),
        c_s: raw.get("bath.c_s")?.unwrap_or(d.c_s),
        temperature: raw.get("bath.temperature")?.unwrap_or(d.temperature),
        k_min: raw.get("bath.k_min")?.unwrap_or(d.k_min),
        k_max: raw.get("bath.k_max")?.unwrap_or(d.k_max),
        n_quad: raw.get("bath.n_quad")?.unwrap_or(d.n_quad),
        kb_over_hbar: raw.get("bath.kb_over_hbar")?.unwrap_or(d.kb_over_hbar),
        norm_scale: norm_scale.unwrap_or(d.norm_scale),
    };
    note("bath.f_ph", bath.f_ph.to_string());
    note("bath.sigma", bath.sigma.to_string());
    note("bath.c_s", bath.c_s.to_string());
    note("bath.temperature", bath.temperature.to_string());
    note("bath.k_min", bath.k_min.to_string());
    note("bath.k_max", bath.k_max.to_string());
    note("bath.n_quad", bath.n_quad.to_string());
    note("bath.kb_over_hbar", bath.kb_over_hbar.to_string());
    note(
        "bath.norm_scale",
        norm_scale.map_or_else(|| "from calibration file".into(), |v| v.to_string()),
    );
    let calibration_sigma = raw.get::<f64>("calibration.sigma")?.unwrap_or(0.6);
    let calibration_target = raw.get::<f64>("calibration.target")?.unwrap_or(0.07);
    note("calibration.sigma", calibration_sigma.to_string());
    note("calibration.target", calibration_target.to_string());

    let model = ModelOptions {
        initial_pairing: match raw.values.get("model.initial_pairing") {
            None => InitialPairing::Bare,
            Some((line, v)) => parse_pairing(v).map_err(|message| ConfigError {
                line: *line,
                key: "model.initial_pairing".into(),
                message,
            })?,
        },
        mode_basis: match raw.values.get("model.mode_basis") {
            None => ModeBasis::Initial,
            Some((line, v)) => parse_basis(v).map_err(|message| ConfigError {
                line: *line,
                key: "model.mode_basis".into(),
                message,
            })?,
        },
        ground_gap: raw
            .get("model.ground_gap")?
            .unwrap_or(ModelOptions::default().ground_gap),
    };
    note(
        "model.initial_pairing",
        pairing_name(model.initial_pairing).into(),
    );
    note("model.mode_basis", basis_name(model.mode_basis).into());
    note("model.ground_gap", model.ground_gap.to_string());

    let e = EvolutionConfig::default();
    let variant = match raw.values.get("evolution.variant") {
        None => e.variant,
        Some((line, v)) => v.parse::<Variant>().map_err(|message| ConfigError {
            line: *line,
            key: "evolution.variant".into(),
            message,
        })?,
    };
    let dt = raw.auto("evolution.dt")?.unwrap_or(Auto::Auto);
    let lindblad_rate = raw.auto("evolution.lindblad_rate")?.unwrap_or(Auto::Auto);
    let mut evolution = EvolutionConfig {
        variant,
        dt: match dt {
            Auto::Value(v) => v,
            Auto::Auto => e.dt,
        },
        t_max: raw.get("evolution.t_max")?.unwrap_or(DEFAULT_T_MAX_J / j),
        lindblad_rate: match lindblad_rate {
            Auto::Value(v) => v,
            Auto::Auto => 0.0,
        },
        steady_window_fraction: raw
            .get("evolution.steady_window_fraction")?
            .unwrap_or(e.steady_window_fraction),
        drift_tolerance: raw
            .get("evolution.drift_tolerance")?
            .unwrap_or(e.drift_tolerance),
        output_stride,
        stop_when_steady: raw
            .get("evolution.stop_when_steady")?
            .unwrap_or(e.stop_when_steady),
        check_resolution: true,
        health: e.health,
    };
    evolution.health.max_trace_error = raw
        .get("evolution.abort_trace_error")?
        .unwrap_or(e.health.max_trace_error);
    evolution.health.min_eigenvalue = raw
        .get("evolution.abort_min_eigenvalue")?
        .unwrap_or(e.health.min_eigenvalue);
    note("evolution.variant", variant.name().into());
    note("evolution.dt", dt.to_string());
    note("evolution.t_max", evolution.t_max.to_string());
    note("evolution.lindblad_rate", lindblad_rate.to_string());
    note(
        "evolution.steady_window_fraction",
        evolution.steady_window_fraction.to_string(),
    );
    note(
        "evolution.drift_tolerance",
        evolution.drift_tolerance.to_string(),
    );
    note(
        "evolution.stop_when_steady",
        evolution.stop_when_steady.to_string(),
    );
    note(
        "evolution.abort_trace_error",
        evolution.health.max_trace_error.to_string(),
    );
    note(
        "evolution.abort_min_eigenvalue",
        evolution.health.min_eigenvalue.to_string(),
    );

    let sweep_values = match raw.list("sweep_values")? {
        Some(v) => v,
        None => match scenario {
            Scenario::USweep => DEFAULT_U_GRID.to_vec(),
            _ => DEFAULT_SIGMA_GRID.to_vec(),
        },
    };
    note("sweep_values", format_list(&sweep_values));

    let fail = |key: &str, message: String| ConfigError {
        line: raw.line(key),
        key: key.to_string(),
        message,
    };
    chain.validate().map_err(|err| match &err {
        ChainError::Parameter { name, .. } => fail(&format!("chain.{name}"), err.to_string()),
        ChainError::Fock(_) => fail("chain.n_sites", err.to_string()),
        _ => fail("chain", err.to_string()),
    })?;
    bath.validate().map_err(|err| match &err {
        BathError::Parameter { name, .. } => fail(&format!("bath.{name}"), err.to_string()),
        _ => fail("bath", err.to_string()),
    })?;
    evolution.validate().map_err(|err| match &err {
        PropagatorError::Config { name, .. } => {
            let key = if *name == "output_stride" {
                "output_stride".to_string()
            } else {
                format!("evolution.{name}")
            };
            fail(&key, err.to_string())
        }
        _ => fail("evolution", err.to_string()),
    })?;
    if let Auto::Value(v) = lindblad_rate {
        if !(v >= 0.0) {
            return Err(fail(
                "evolution.lindblad_rate",
                "must be non-negative".into(),
            ));
        }
    }
    if !(model.ground_gap > 0.0) {
        return Err(fail("model.ground_gap", "must be positive".into()));
    }
    if !(calibration_sigma > 0.0) {
        return Err(fail("calibration.sigma", "must be positive".into()));
    }
    if !(calibration_target > 0.0 && calibration_target < 1.0) {
        return Err(fail("calibration.target", "must lie in (0, 1)".into()));
    }
    if scenario.is_sweep() && sweep_values.is_empty() {
        return Err(fail(
            "sweep_values",
            "sweep scenarios need at least one value".into(),
        ));
    }
    if scenario == Scenario::SigmaSweep && sweep_values.iter().any(|&s| !(s > 0.0)) {
        return Err(fail("sweep_values", "bandwidths must be positive".into()));
    }

    Ok(ScenarioConfig {
        scenario,
        chain,
        bath,
        model,
        evolution,
        dt,
        lindblad_rate,
        sweep_values,
        output_dir,
        output_stride,
        norm_scale,
        calibration_sigma,
        calibration_target,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.scenario, Scenario::Single);
        assert_eq!(cfg.chain.j, DEFAULT_J);
        assert_eq!(cfg.chain.delta, DEFAULT_J);
        assert_eq!(cfg.bath, BathParams::default());
        assert_eq!(cfg.evolution.t_max, DEFAULT_T_MAX_J / DEFAULT_J);
        assert_eq!(cfg.dt, Auto::Auto);
        assert_eq!(cfg.norm_scale, None);
        assert_eq!(cfg.entries.len(), KEYS.len());
        assert!(cfg.entries.iter().all(|e| e.defaulted));
    }

    #[test]
    fn figure_two_settings() {
        let text = "\
# bath for the memory figure
bath.sigma = 0.6
bath.f_ph = 0.1   # amplitude
bath.k_max = 4.0
bath.temperature = 4.0
chain.n_sites = 4
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.bath.sigma, 0.6);
        assert_eq!(cfg.bath.f_ph, 0.1);
        assert_eq!(cfg.bath.k_max, 4.0);
        assert_eq!(cfg.bath.temperature, 4.0);
        assert_eq!(cfg.chain.n_sites, 4);
        let sigma = cfg.entries.iter().find(|e| e.key == "bath.sigma").unwrap();
        assert!(!sigma.defaulted);
    }

    #[test]
    fn negative_bandwidth_names_key_and_line() {
        let err = parse_config("chain.j = 1\nbath.sigma = -1\n").unwrap_err();
        assert_eq!(err.key, "bath.sigma");
        assert_eq!(err.line, 2);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        let err = parse_config("bath.sigmaa = 1").unwrap_err();
        assert_eq!((err.key.as_str(), err.line), ("bath.sigmaa", 1));
        let err = parse_config("bath.sigma = 1\n\nbath.sigma = 2").unwrap_err();
        assert_eq!(err.line, 3);
        let err = parse_config("chain.n_sites = four").unwrap_err();
        assert_eq!(err.key, "chain.n_sites");
        assert!(parse_config("just words").is_err());
        assert!(parse_config("scenario = everything").is_err());
        assert!(parse_config("output_stride = 0").unwrap_err().key == "output_stride");
        assert!(parse_config("scenario = u_sweep\nsweep_values =").is_err());
    }

    #[test]
    fn relative_chain_energies_and_auto_values() {
        let cfg = parse_config(
            "chain.j = 2\nchain.u = -0.1\nchain.mu = 0.25\nevolution.dt = 1e-3\nevolution.lindblad_rate = 0.5",
        )
        .unwrap();
        assert_eq!(cfg.chain.u, -0.2);
        assert_eq!(cfg.chain.mu, 0.5);
        assert_eq!(cfg.dt, Auto::Value(1e-3));
        assert_eq!(cfg.evolution.dt, 1e-3);
        assert_eq!(cfg.lindblad_rate, Auto::Value(0.5));
        assert_eq!(cfg.evolution.t_max, 25.0);
    }

    #[test]
    fn sweep_defaults_follow_scenario() {
        let s = parse_config("scenario = sigma_sweep").unwrap();
        assert_eq!(s.sweep_values, DEFAULT_SIGMA_GRID.to_vec());
        let u = parse_config("scenario = u_sweep").unwrap();
        assert_eq!(u.sweep_values, DEFAULT_U_GRID.to_vec());
        let custom = parse_config("scenario = sigma_sweep\nsweep_values = 0.3, 0.5").unwrap();
        assert_eq!(custom.sweep_values, vec![0.3, 0.5]);
    }
}
