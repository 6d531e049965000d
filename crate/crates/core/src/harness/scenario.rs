//! Scenario orchestration.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use thiserror::Error;

use super::config::{Auto, ConfigError, Scenario, ScenarioConfig};
use super::output::{
    emit_csv, git_blob_hash, read_calibration, summary_csv, write_calibration, write_snapshot,
    CalibrationFileError, SummaryRow,
};
use crate::bath::{calibrate_scale, franck_condon_b, step_count, BathError, BathParams};
use crate::chain::ChainParams;
use crate::model::{ModelError, PolaronChain};
use crate::observables::dephased_average;
use crate::propagator::{
    match_dephasing_rate, run_trajectory, steady_state, EvolutionConfig, PropagatorError,
    Trajectory, Variant,
};

pub const CALIBRATION_FILE: &str = "calibration.txt";
pub const METADATA_FILE: &str = "metadata.txt";
/// σ at which the calibration cross-check ⟨B⟩ is reported.
pub const CROSS_CHECK_SIGMA: f64 = 0.205;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}; run the calibrate scenario first or set bath.norm_scale")]
    CalibrationMissing(CalibrationFileError),
    #[error(transparent)]
    Calibration(CalibrationFileError),
    #[error("{} run(s) aborted on a health check; snapshots: {}", .snapshots.len(), list_paths(.snapshots))]
    Health { snapshots: Vec<PathBuf> },
    #[error("{label}: {source}")]
    Model {
        label: String,
        #[source]
        source: ModelError,
    },
    #[error("{label}: {source}")]
    Propagator {
        label: String,
        #[source]
        source: PropagatorError,
    },
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn list_paths(p: &[PathBuf]) -> String {
    p.iter()
        .map(|x| x.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl HarnessError {
    /// Process exit status: 2 config, 3 health abort, 4 missing calibration, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Health { .. } => 3,
            HarnessError::CalibrationMissing(_) => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the configured `output_dir`.
    pub output_dir: Option<PathBuf>,
    /// Defaults to `<output_dir>/calibration.txt`.
    pub calibration: Option<PathBuf>,
    /// Exact config text, hashed into the metadata.
    pub config_text: String,
    pub config_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioReport {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    /// `(label, θ_∞, converged)` per trajectory.
    pub results: Vec<(String, f64, bool)>,
}

struct Context {
    dir: PathBuf,
    files: Vec<PathBuf>,
    meta: Vec<(String, String)>,
}

impl Context {
    fn note(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }
}

/// Outcome of one trajectory inside a scenario.
enum Outcome {
    Done(Trajectory),
    Aborted(PathBuf),
}

fn label_value(v: f64) -> String {
    format!("{v}")
}

fn resolve_dt(
    cfg: &ScenarioConfig,
    evolution: &EvolutionConfig,
    model: &PolaronChain,
) -> Result<f64, PropagatorError> {
    match cfg.dt {
        Auto::Value(v) => Ok(v),
        Auto::Auto => {
            let limit = evolution.resolution_limit(model)?;
            let t = evolution.t_max;
            Ok(t / (t / limit).ceil())
        }
    }
}

fn build(
    label: &str,
    chain: ChainParams,
    bath: BathParams,
    cfg: &ScenarioConfig,
) -> Result<PolaronChain, HarnessError> {
    PolaronChain::build(chain, bath, cfg.model).map_err(|source| HarnessError::Model {
        label: label.into(),
        source,
    })
}

fn run_labeled(
    dir: &Path,
    label: &str,
    evolution: &EvolutionConfig,
    model: &PolaronChain,
) -> Result<Outcome, HarnessError> {
    match run_trajectory(evolution, model) {
        Ok(traj) => {
            emit_csv(&traj, &dir.join(format!("{label}.csv")))?;
            Ok(Outcome::Done(traj))
        }
        Err(PropagatorError::Health { reason, abort }) => {
            let path = dir.join(format!("abort_{label}.txt"));
            write_snapshot(&path, &reason, &abort)?;
            Ok(Outcome::Aborted(path))
        }
        Err(source) => Err(HarnessError::Propagator {
            label: label.into(),
            source,
        }),
    }
}

fn propagate(label: &str) -> impl Fn(PropagatorError) -> HarnessError + '_ {
    move |source| HarnessError::Propagator {
        label: label.into(),
        source,
    }
}

fn resolve_bath(
    cfg: &ScenarioConfig,
    calibration: &Path,
) -> Result<(BathParams, String), HarnessError> {
    match cfg.norm_scale {
        Some(s) => Ok((
            BathParams {
                norm_scale: s,
                ..cfg.bath
            },
            "config".into(),
        )),
        None => match read_calibration(calibration) {
            Ok(s) => Ok((
                BathParams {
                    norm_scale: s,
                    ..cfg.bath
                },
                calibration.display().to_string(),
            )),
            Err(e @ CalibrationFileError::Missing { .. }) => {
                Err(HarnessError::CalibrationMissing(e))
            }
            Err(e) => Err(HarnessError::Calibration(e)),
        },
    }
}

/// Runs the configured scenario and writes its files.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    opts: &RunOptions,
) -> Result<ScenarioReport, HarnessError> {
    let started = Instant::now();
    let dir = opts
        .output_dir
        .clone()
        .unwrap_or_else(|| cfg.output_dir.clone());
    let calibration = opts
        .calibration
        .clone()
        .unwrap_or_else(|| dir.join(CALIBRATION_FILE));
    fs::create_dir_all(&dir)?;
    let mut ctx = Context {
        dir: dir.clone(),
        files: Vec::new(),
        meta: Vec::new(),
    };
    let mut report = ScenarioReport {
        output_dir: dir.clone(),
        ..ScenarioReport::default()
    };

    let outcome = match cfg.scenario {
        Scenario::Calibrate => calibrate(cfg, &calibration, &mut ctx),
        _ => resolve_bath(cfg, &calibration).and_then(|(bath, source)| {
            ctx.note("norm_scale", format!("{:.17e}", bath.norm_scale));
            ctx.note("norm_scale_source", source);
            match cfg.scenario {
                Scenario::Single => single(cfg, bath, &mut ctx, &mut report),
                Scenario::CompareVariants => compare(cfg, bath, &mut ctx, &mut report),
                Scenario::SigmaSweep | Scenario::USweep => sweep(cfg, bath, &mut ctx, &mut report),
                Scenario::Calibrate => unreachable!(),
            }
        }),
    };

    let mut meta = String::new();
    let _ = writeln!(meta, "# run metadata");
    let _ = writeln!(meta, "package_version = {}", env!("CARGO_PKG_VERSION"));
    if let Some(p) = &opts.config_path {
        let _ = writeln!(meta, "config_path = {}", p.display());
    }
    let _ = writeln!(
        meta,
        "config_sha1 = {}",
        git_blob_hash(opts.config_text.as_bytes())
    );
    let _ = writeln!(meta, "calibration_file = {}", calibration.display());
    let _ = writeln!(
        meta,
        "units = time ps, energy 1/ps, momentum 1/nm, temperature K"
    );
    let _ = writeln!(meta, "\n# parameters");
    for e in &cfg.entries {
        let tag = if e.defaulted { "  # default" } else { "" };
        let _ = writeln!(meta, "{} = {}{}", e.key, e.value, tag);
    }
    let _ = writeln!(meta, "\n# results");
    for (k, v) in &ctx.meta {
        let _ = writeln!(meta, "{k} = {v}");
    }
    if let Err(e) = &outcome {
        let _ = writeln!(meta, "error = {e}");
    }
    let unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let _ = writeln!(meta, "finished_unix = {unix}");
    let _ = writeln!(
        meta,
        "wall_clock_seconds = {:.3}",
        started.elapsed().as_secs_f64()
    );
    let meta_path = ctx.path(METADATA_FILE);
    fs::write(&meta_path, meta)?;
    report.files = ctx.files;
    outcome.map(|()| report)
}

fn calibrate(cfg: &ScenarioConfig, path: &Path, ctx: &mut Context) -> Result<(), HarnessError> {
    let reference = BathParams {
        sigma: cfg.calibration_sigma,
        ..cfg.bath
    };
    let scale = calibrate_scale(&reference, cfg.calibration_target)?;
    write_calibration(path, scale)?;
    ctx.files.push(path.to_path_buf());
    let check = franck_condon_b(&BathParams {
        sigma: CROSS_CHECK_SIGMA,
        norm_scale: scale,
        ..cfg.bath
    })?;
    let reached = franck_condon_b(&BathParams {
        norm_scale: scale,
        ..reference
    })?;
    ctx.note("norm_scale", format!("{scale:.17e}"));
    ctx.note("B_at_calibration_sigma", reached);
    ctx.note(format!("B_at_sigma_{CROSS_CHECK_SIGMA}"), check);
    Ok(())
}

fn evolution_for(cfg: &ScenarioConfig, variant: Variant) -> EvolutionConfig {
    EvolutionConfig {
        variant,
        ..cfg.evolution.clone()
    }
}

fn record(
    report: &mut ScenarioReport,
    ctx: &mut Context,
    label: &str,
    traj: &Trajectory,
    cfg: &EvolutionConfig,
) {
    let s = steady_state(traj, cfg.steady_window_fraction, cfg.drift_tolerance);
    ctx.note(format!("{label}.theta_inf"), s.mean);
    ctx.note(format!("{label}.drift"), s.drift);
    ctx.note(format!("{label}.converged"), s.converged);
    ctx.note(format!("{label}.min_eig"), traj.min_eigenvalue());
    ctx.note(format!("{label}.steps"), traj.diagnostics.steps);
    report.results.push((label.into(), s.mean, s.converged));
}

fn lindblad_rate(
    cfg: &ScenarioConfig,
    model: &PolaronChain,
    evolution: &EvolutionConfig,
    reference: Option<&Trajectory>,
) -> Result<f64, HarnessError> {
    match cfg.lindblad_rate {
        Auto::Value(v) => Ok(v),
        Auto::Auto => {
            let owned;
            let reference = match reference {
                Some(r) => r,
                None => {
                    let full = EvolutionConfig {
                        variant: Variant::FullMemory,
                        ..evolution.clone()
                    };
                    owned =
                        run_trajectory(&full, model).map_err(propagate("lindblad_reference"))?;
                    &owned
                }
            };
            match_dephasing_rate(model, evolution, reference).map_err(propagate("lindblad_rate"))
        }
    }
}

fn single(
    cfg: &ScenarioConfig,
    bath: BathParams,
    ctx: &mut Context,
    report: &mut ScenarioReport,
) -> Result<(), HarnessError> {
    let model = build("trajectory", cfg.chain, bath, cfg)?;
    let mut evolution = evolution_for(cfg, cfg.evolution.variant);
    evolution.dt = resolve_dt(cfg, &evolution, &model).map_err(propagate("trajectory"))?;
    if evolution.variant == Variant::Lindblad {
        evolution.lindblad_rate = lindblad_rate(cfg, &model, &evolution, None)?;
        ctx.note("lindblad_rate", evolution.lindblad_rate);
    }
    ctx.note("B", model.b);
    ctx.note("initial_parity", model.initial_parity());
    ctx.note("dt", evolution.dt);
    match run_labeled(&ctx.dir, "trajectory", &evolution, &model)? {
        Outcome::Done(traj) => {
            ctx.path("trajectory.csv");
            record(report, ctx, "trajectory", &traj, &evolution);
            Ok(())
        }
        Outcome::Aborted(p) => {
            ctx.files.push(p.clone());
            Err(HarnessError::Health { snapshots: vec![p] })
        }
    }
}

fn compare(
    cfg: &ScenarioConfig,
    bath: BathParams,
    ctx: &mut Context,
    report: &mut ScenarioReport,
) -> Result<(), HarnessError> {
    let model = build("compare_variants", cfg.chain, bath, cfg)?;
    let full_cfg = evolution_for(cfg, Variant::FullMemory);
    let dt = resolve_dt(cfg, &full_cfg, &model).map_err(propagate("full_memory"))?;
    ctx.note("B", model.b);
    ctx.note("initial_parity", model.initial_parity());
    ctx.note("dt", dt);
    let oracle = dephased_average(
        model.rho0.matrix(),
        &model.eigensystem,
        &model.pair.correlation_operator(),
        1e-9 * model.chain.j,
    )
    .map_err(|e| propagate("quench_oracle")(e.into()))?;
    ctx.note("quench_oracle_theta", oracle.re);

    let with = |variant: Variant| EvolutionConfig {
        variant,
        dt,
        ..cfg.evolution.clone()
    };
    let label = |v: Variant| format!("variant_{}", v.name());
    let first = [
        Variant::FullMemory,
        Variant::MarkovianLimit,
        Variant::UnitaryQuench,
    ];
    let mut outcomes: Vec<(Variant, Outcome)> = first
        .par_iter()
        .map(|&v| run_labeled(&ctx.dir, &label(v), &with(v), &model).map(|o| (v, o)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut lindblad_cfg = with(Variant::Lindblad);
    let reference = match &outcomes[0].1 {
        Outcome::Done(t) => Some(t),
        Outcome::Aborted(_) => None,
    };
    lindblad_cfg.lindblad_rate = match (cfg.lindblad_rate, reference) {
        (Auto::Value(v), _) => v,
        (Auto::Auto, Some(r)) => lindblad_rate(cfg, &model, &lindblad_cfg, Some(r))?,
        (Auto::Auto, None) => 0.0,
    };
    ctx.note("lindblad_rate", lindblad_cfg.lindblad_rate);
    let lind = run_labeled(&ctx.dir, &label(Variant::Lindblad), &lindblad_cfg, &model)?;
    outcomes.insert(2, (Variant::Lindblad, lind));

    let mut summary = String::from("variant,theta_inf,converged,min_theta\n");
    let mut snapshots = Vec::new();
    for (v, o) in &outcomes {
        match o {
            Outcome::Done(t) => {
                ctx.path(&format!("{}.csv", label(*v)));
                record(report, ctx, v.name(), t, &with(*v));
                let s = steady_state(
                    t,
                    cfg.evolution.steady_window_fraction,
                    cfg.evolution.drift_tolerance,
                );
                let _ = writeln!(
                    summary,
                    "{},{:.14e},{},{:.14e}",
                    v.name(),
                    s.mean,
                    u8::from(s.converged),
                    t.min_theta()
                );
            }
            Outcome::Aborted(p) => {
                ctx.files.push(p.clone());
                snapshots.push(p.clone());
                let _ = writeln!(summary, "{},NaN,0,NaN", v.name());
            }
        }
    }
    let _ = writeln!(summary, "quench_oracle,{:.14e},1,NaN", oracle.re);
    let p = ctx.path("variants_summary.csv");
    fs::write(p, summary)?;
    if snapshots.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Health { snapshots })
    }
}

fn sweep(
    cfg: &ScenarioConfig,
    bath: BathParams,
    ctx: &mut Context,
    report: &mut ScenarioReport,
) -> Result<(), HarnessError> {
    let (param, prefix) = match cfg.scenario {
        Scenario::SigmaSweep => ("sigma", "sigma"),
        _ => ("u", "u"),
    };
    let points: Vec<(String, ChainParams, BathParams)> = cfg
        .sweep_values
        .iter()
        .map(|&v| {
            let label = format!("{prefix}_{}", label_value(v));
            match cfg.scenario {
                Scenario::SigmaSweep => (label, cfg.chain, BathParams { sigma: v, ..bath }),
                _ => (
                    label,
                    ChainParams {
                        u: v * cfg.chain.j,
                        ..cfg.chain
                    },
                    bath,
                ),
            }
        })
        .collect();

    let dir = ctx.dir.clone();
    let results: Vec<Result<(f64, f64, f64, EvolutionConfig, Outcome), HarnessError>> = points
        .par_iter()
        .map(|(label, chain, bath)| {
            let model = build(label, *chain, *bath, cfg)?;
            let mut evolution = evolution_for(cfg, cfg.evolution.variant);
            evolution.dt = resolve_dt(cfg, &evolution, &model).map_err(propagate(label))?;
            if evolution.variant == Variant::Lindblad {
                evolution.lindblad_rate = lindblad_rate(cfg, &model, &evolution, None)?;
            }
            let outcome = run_labeled(&dir, label, &evolution, &model)?;
            Ok((
                model.b,
                model.initial_parity(),
                evolution.lindblad_rate,
                evolution,
                outcome,
            ))
        })
        .collect();

    let mut rows = Vec::new();
    let mut snapshots = Vec::new();
    let mut first_error = None;
    for ((label, _, _), (&value, res)) in points.iter().zip(cfg.sweep_values.iter().zip(results)) {
        match res {
            Ok((b, parity, rate, evolution, outcome)) => {
                ctx.note(format!("{label}.B"), b);
                ctx.note(format!("{label}.initial_parity"), parity);
                ctx.note(format!("{label}.dt"), evolution.dt);
                ctx.note(
                    format!("{label}.steps"),
                    step_count(evolution.dt, evolution.t_max),
                );
                if evolution.variant == Variant::Lindblad {
                    ctx.note(format!("{label}.lindblad_rate"), rate);
                }
                match outcome {
                    Outcome::Done(t) => {
                        ctx.path(&format!("{label}.csv"));
                        let s = steady_state(
                            &t,
                            evolution.steady_window_fraction,
                            evolution.drift_tolerance,
                        );
                        record(report, ctx, label, &t, &evolution);
                        rows.push(SummaryRow {
                            value,
                            b,
                            theta_inf: s.mean,
                            converged: s.converged,
                        });
                    }
                    Outcome::Aborted(p) => {
                        ctx.files.push(p.clone());
                        snapshots.push(p);
                        rows.push(SummaryRow {
                            value,
                            b,
                            theta_inf: f64::NAN,
                            converged: false,
                        });
                    }
                }
            }
            Err(e) => {
                ctx.note(format!("{label}.error"), &e);
                first_error.get_or_insert(e);
            }
        }
    }
    let p = ctx.path(&format!("{param}_sweep_summary.csv"));
    fs::write(p, summary_csv(param, &rows))?;
    if let Some(e) = first_error {
        return Err(e);
    }
    if snapshots.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Health { snapshots })
    }
}
