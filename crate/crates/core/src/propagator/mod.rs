//! Time integration of the polaron master equation and its comparators.

pub mod kernel;
pub mod liouvillian;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::bath::{decay_time, step_count, BathError, CorrelationTable};
use crate::fockspace::{hermitian_part, hermiticity_defect, Operator};
use crate::model::PolaronChain;
use crate::observables::{health_with_parity, theta_complex, HealthReport, ObservableError};

pub use kernel::{KernelAccumulators, KernelSource, ScalarKernels};
pub use liouvillian::{
    liouvillian_full, liouvillian_lindblad, liouvillian_markovian, liouvillian_unitary,
};

/// Step size must satisfy `dt ≤ RESOLUTION_FACTOR / fastest rate`.
pub const RESOLUTION_FACTOR: f64 = 0.02;
/// `|φ(τ)|/φ(0)` at which the memory depth is read off.
pub const MEMORY_DEPTH_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    FullMemory,
    MarkovianLimit,
    Lindblad,
    UnitaryQuench,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::FullMemory,
        Variant::MarkovianLimit,
        Variant::Lindblad,
        Variant::UnitaryQuench,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::FullMemory => "full_memory",
            Variant::MarkovianLimit => "markovian_limit",
            Variant::Lindblad => "lindblad",
            Variant::UnitaryQuench => "unitary_quench",
        }
    }

    fn uses_memory(self) -> bool {
        matches!(self, Variant::FullMemory | Variant::MarkovianLimit)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant `{s}`"))
    }
}

/// Thresholds that abort a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HealthLimits {
    pub max_trace_error: f64,
    pub min_eigenvalue: f64,
}

impl Default for HealthLimits {
    fn default() -> Self {
        Self {
            max_trace_error: 1e-6,
            min_eigenvalue: -1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub variant: Variant,
    pub dt: f64,
    pub t_max: f64,
    pub lindblad_rate: f64,
    pub steady_window_fraction: f64,
    /// Allowed change of θ across the final window, from a linear fit.
    pub drift_tolerance: f64,
    pub output_stride: usize,
    pub stop_when_steady: bool,
    pub check_resolution: bool,
    pub health: HealthLimits,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            variant: Variant::FullMemory,
            dt: 0.002,
            t_max: 50.0,
            lindblad_rate: 0.0,
            steady_window_fraction: 0.2,
            drift_tolerance: 1e-3,
            output_stride: 10,
            stop_when_steady: false,
            check_resolution: true,
            health: HealthLimits::default(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagatorError {
    #[error("invalid evolution setting {name} = {value}: {reason}")]
    Config {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("dt = {dt} exceeds the resolution limit {limit}")]
    Resolution { dt: f64, limit: f64 },
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error("health violation at t = {}: {reason}", .abort.time)]
    Health {
        reason: String,
        abort: Box<AbortSnapshot>,
    },
    #[error(
        "steady state not reached: drift {drift:.3e} exceeds {tolerance:.3e} (window mean {mean})"
    )]
    NotConverged {
        mean: f64,
        drift: f64,
        tolerance: f64,
    },
}

/// State at the moment a run was aborted.
#[derive(Debug, Clone, PartialEq)]
pub struct AbortSnapshot {
    pub time: f64,
    pub report: HealthReport,
    pub rho: Operator,
    pub partial: Trajectory,
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), PropagatorError> {
        let err = |name, value, reason| {
            Err(PropagatorError::Config {
                name,
                value,
                reason,
            })
        };
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return err("dt", self.dt, "must be positive");
        }
        if !(self.t_max >= self.dt && self.t_max.is_finite()) {
            return err("t_max", self.t_max, "must be finite and at least dt");
        }
        if !(self.lindblad_rate >= 0.0 && self.lindblad_rate.is_finite()) {
            return err("lindblad_rate", self.lindblad_rate, "must be non-negative");
        }
        if !(self.steady_window_fraction > 0.0 && self.steady_window_fraction < 1.0) {
            return err(
                "steady_window_fraction",
                self.steady_window_fraction,
                "must lie in (0, 1)",
            );
        }
        if !(self.drift_tolerance > 0.0) {
            return err("drift_tolerance", self.drift_tolerance, "must be positive");
        }
        if self.output_stride == 0 {
            return err("output_stride", 0.0, "must be at least 1");
        }
        Ok(())
    }

    /// Largest step resolving both the spectrum and the memory kernel.
    pub fn resolution_limit(&self, model: &PolaronChain) -> Result<f64, PropagatorError> {
        let mut rate = model.spectral_radius();
        if self.variant.uses_memory() && model.bath.f_ph != 0.0 {
            let depth = decay_time(&model.bath, MEMORY_DEPTH_FRACTION)?;
            if depth > 0.0 {
                rate = rate.max(1.0 / depth);
            }
        }
        Ok(if rate > 0.0 {
            RESOLUTION_FACTOR / rate
        } else {
            f64::INFINITY
        })
    }
}

/// Recorded observables, one entry per output point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
    pub purity: Vec<f64>,
    pub parity: Vec<f64>,
    pub trace_error: Vec<f64>,
    pub min_eig: Vec<f64>,
    pub diagnostics: RunDiagnostics,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunDiagnostics {
    pub steps: usize,
    /// Largest anti-Hermitian part before re-symmetrization.
    pub max_hermiticity_defect: f64,
    pub max_theta_imag: f64,
    pub max_parity_drift: f64,
    pub max_trace_error: f64,
    pub stopped_early: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn min_theta(&self) -> f64 {
        self.theta.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_theta(&self) -> f64 {
        self.theta.iter().fold(0.0f64, |m, t| m.max(t.abs()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eig.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn record(&mut self, t: f64, theta: f64, report: &HealthReport) {
        self.times.push(t);
        self.theta.push(theta);
        self.purity.push(report.purity);
        self.parity.push(report.parity);
        self.trace_error.push(report.trace_error);
        self.min_eig.push(report.min_eigenvalue);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Start,
    Mid,
    End,
}

#[derive(Debug, Clone)]
pub struct Rk4Step {
    pub rho: Operator,
    /// Anti-Hermitian defect of the raw update.
    pub hermiticity_defect: f64,
}

/// Classical RK4; the caller's `rhs` supplies time dependence per stage.
/// No trace renormalization.
pub fn rk4_step<F>(rho: &Operator, dt: f64, mut rhs: F) -> Rk4Step
where
    F: FnMut(&Operator, Stage) -> Operator,
{
    let c = |x: f64| Complex64::new(x, 0.0);
    let k1 = rhs(rho, Stage::Start);
    let k2 = rhs(&(rho + &k1 * c(0.5 * dt)), Stage::Mid);
    let k3 = rhs(&(rho + &k2 * c(0.5 * dt)), Stage::Mid);
    let k4 = rhs(&(rho + &k3 * c(dt)), Stage::End);
    let raw = rho + (k1 + (k2 + k3) * c(2.0) + k4) * c(dt / 6.0);
    let defect = hermiticity_defect(&raw);
    Rk4Step {
        rho: hermitian_part(&raw),
        hermiticity_defect: defect,
    }
}

enum Kernels<'a> {
    Operator {
        source: KernelSource<'a>,
        acc: KernelAccumulators,
    },
    Scalar {
        table: &'a CorrelationTable,
        acc: ScalarKernels,
    },
    None,
}

fn correlation_table(
    config: &EvolutionConfig,
    model: &PolaronChain,
    n_steps: usize,
) -> Result<Option<CorrelationTable>, BathError> {
    if !config.variant.uses_memory() {
        return Ok(None);
    }
    let t_end = n_steps as f64 * config.dt;
    Ok(Some(if model.bath.f_ph == 0.0 {
        CorrelationTable::zero(config.dt, t_end)
    } else {
        CorrelationTable::build(&model.bath, config.dt, t_end)?
    }))
}

/// Integrates `model.rho0` to `config.t_max`.
pub fn run_trajectory(
    config: &EvolutionConfig,
    model: &PolaronChain,
) -> Result<Trajectory, PropagatorError> {
    run_trajectory_state(config, model).map(|(traj, _)| traj)
}

/// As [`run_trajectory`], also returning the final density matrix.
pub fn run_trajectory_state(
    config: &EvolutionConfig,
    model: &PolaronChain,
) -> Result<(Trajectory, Operator), PropagatorError> {
    config.validate()?;
    if config.check_resolution {
        let limit = config.resolution_limit(model)?;
        if config.dt > limit * (1.0 + 1e-12) {
            return Err(PropagatorError::Resolution {
                dt: config.dt,
                limit,
            });
        }
    }
    let n_steps = step_count(config.dt, config.t_max);
    let table = correlation_table(config, model, n_steps)?;
    let dim = model.dim();
    let mut kernels = match (config.variant, table.as_ref()) {
        (Variant::FullMemory, Some(t)) => Kernels::Operator {
            source: KernelSource::new(t, &model.eigensystem, &model.x_a, &model.x_b),
            acc: KernelAccumulators::zero(dim, config.dt),
        },
        (Variant::MarkovianLimit, Some(t)) => Kernels::Scalar {
            table: t,
            acc: ScalarKernels::zero(config.dt),
        },
        _ => Kernels::None,
    };

    let b = model.b;
    let mut rho = model.rho0.matrix().clone();
    let mut traj = Trajectory::default();
    let initial = health_with_parity(&rho, &model.parity);
    let parity0 = initial.parity;
    let theta0 = theta_complex(&rho, &model.pair)?;
    traj.record(0.0, theta0.re, &initial);
    traj.diagnostics.max_theta_imag = theta0.im.abs();

    for step in 0..n_steps {
        let t_next = (step + 1) as f64 * config.dt;
        let out = match &mut kernels {
            Kernels::Operator { source, acc } => {
                let start = acc.clone();
                let mid = acc.advance(source)?;
                let end = &*acc;
                rk4_step(&rho, config.dt, |r, stage| {
                    let k = match stage {
                        Stage::Start => &start,
                        Stage::Mid => &mid,
                        Stage::End => end,
                    };
                    liouvillian_full(r, &model.h_sys, &model.x_a, &model.x_b, &k.k_a, &k.k_b, b)
                })
            }
            Kernels::Scalar { table, acc } => {
                let start = *acc;
                let mid = acc.advance(table)?;
                let end = *acc;
                rk4_step(&rho, config.dt, |r, stage| {
                    let k = match stage {
                        Stage::Start => start,
                        Stage::Mid => mid,
                        Stage::End => end,
                    };
                    liouvillian_markovian(r, &model.h_sys, &model.x_a, &model.x_b, k.c_a, k.c_b, b)
                })
            }
            Kernels::None => match config.variant {
                Variant::Lindblad => rk4_step(&rho, config.dt, |r, _| {
                    liouvillian_lindblad(r, &model.h_sys, config.lindblad_rate, &model.number_ops)
                }),
                _ => rk4_step(&rho, config.dt, |r, _| liouvillian_unitary(r, &model.h_sys)),
            },
        };
        rho = out.rho;
        let diag = &mut traj.diagnostics;
        diag.steps = step + 1;
        diag.max_hermiticity_defect = diag.max_hermiticity_defect.max(out.hermiticity_defect);
        let trace_error = (rho.trace() - Complex64::new(1.0, 0.0)).norm();
        diag.max_trace_error = diag.max_trace_error.max(trace_error);

        let last = step + 1 == n_steps;
        let sample = (step + 1) % config.output_stride == 0 || last;
        if !sample && trace_error <= config.health.max_trace_error {
            continue;
        }
        let report = health_with_parity(&rho, &model.parity);
        let th = theta_complex(&rho, &model.pair)?;
        let diag = &mut traj.diagnostics;
        diag.max_theta_imag = diag.max_theta_imag.max(th.im.abs());
        diag.max_parity_drift = diag.max_parity_drift.max((report.parity - parity0).abs());
        let reason = if report.trace_error > config.health.max_trace_error {
            Some(format!("trace error {:.3e}", report.trace_error))
        } else if report.min_eigenvalue < config.health.min_eigenvalue {
            Some(format!("minimum eigenvalue {:.3e}", report.min_eigenvalue))
        } else {
            None
        };
        if let Some(reason) = reason {
            return Err(PropagatorError::Health {
                reason,
                abort: Box::new(AbortSnapshot {
                    time: t_next,
                    report,
                    rho,
                    partial: traj,
                }),
            });
        }
        traj.record(t_next, th.re, &report);
        if config.stop_when_steady
            && !last
            && t_next >= 2.0 * config.steady_window_fraction * config.t_max
            && steady_state(&traj, config.steady_window_fraction, config.drift_tolerance).converged
        {
            traj.diagnostics.stopped_early = true;
            break;
        }
    }
    Ok((traj, rho))
}

/// Window mean of θ and its linear drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub mean: f64,
    /// Fitted slope times window duration.
    pub drift: f64,
    pub converged: bool,
}

/// Mean and drift of θ over the final `fraction` of the run.
pub fn steady_state(traj: &Trajectory, fraction: f64, tolerance: f64) -> SteadyState {
    let (Some(&t0), Some(&t1)) = (traj.times.first(), traj.times.last()) else {
        return SteadyState {
            mean: f64::NAN,
            drift: f64::INFINITY,
            converged: false,
        };
    };
    let cut = t1 - fraction * (t1 - t0);
    let window: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.theta)
        .filter(|(t, _)| **t >= cut - 1e-12)
        .map(|(&t, &y)| (t, y))
        .collect();
    let n = window.len() as f64;
    let mean = window.iter().map(|p| p.1).sum::<f64>() / n;
    if window.len() < 2 {
        return SteadyState {
            mean,
            drift: f64::INFINITY,
            converged: false,
        };
    }
    let tm = window.iter().map(|p| p.0).sum::<f64>() / n;
    let sxx: f64 = window.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = window.iter().map(|p| (p.0 - tm) * (p.1 - mean)).sum();
    let span = window[window.len() - 1].0 - window[0].0;
    let drift = (sxy / sxx * span).abs();
    SteadyState {
        mean,
        drift,
        converged: drift < tolerance,
    }
}

/// θ(t_∞) as the final-window mean; fails when the window still drifts.
pub fn steady_state_value(
    traj: &Trajectory,
    config: &EvolutionConfig,
) -> Result<f64, PropagatorError> {
    let s = steady_state(traj, config.steady_window_fraction, config.drift_tolerance);
    if s.converged {
        Ok(s.mean)
    } else {
        Err(PropagatorError::NotConverged {
            mean: s.mean,
            drift: s.drift,
            tolerance: config.drift_tolerance,
        })
    }
}

/// Time and value at which `traj` first covers half of its initial collapse.
pub fn half_collapse_point(traj: &Trajectory) -> Option<(f64, f64)> {
    let theta0 = *traj.theta.first()?;
    let depth = theta0 - traj.min_theta();
    if !(depth > 1e-6) {
        return None;
    }
    let level = theta0 - 0.5 * depth;
    let i = traj.theta.iter().position(|&y| y <= level)?;
    Some((traj.times[i], traj.theta[i]))
}

/// Dephasing rate whose Lindblad run meets `reference` at its half-collapse
/// point. Zero when the reference never collapses.
pub fn match_dephasing_rate(
    model: &PolaronChain,
    config: &EvolutionConfig,
    reference: &Trajectory,
) -> Result<f64, PropagatorError> {
    let Some((t_ref, target)) = half_collapse_point(reference) else {
        return Ok(0.0);
    };
    let n = (t_ref / config.dt).round().max(1.0);
    let probe = |rate: f64| -> Result<f64, PropagatorError> {
        let cfg = EvolutionConfig {
            variant: Variant::Lindblad,
            lindblad_rate: rate,
            t_max: n * config.dt,
            output_stride: usize::MAX,
            stop_when_steady: false,
            check_resolution: false,
            health: HealthLimits {
                max_trace_error: f64::INFINITY,
                min_eigenvalue: f64::NEG_INFINITY,
            },
            ..config.clone()
        };
        Ok(*run_trajectory(&cfg, model)?
            .theta
            .last()
            .unwrap_or(&f64::NAN))
    };
    if probe(0.0)? <= target {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0 / t_ref;
    let mut doublings = 0;
    while probe(hi)? > target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Ok(hi);
        }
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::BathParams;
    use crate::chain::ChainParams;
    use crate::fockspace::{max_norm, Eigensystem};
    use crate::model::ModelOptions;

    fn synthetic(f: impl Fn(f64) -> f64, t_max: f64, n: usize) -> Trajectory {
        let mut traj = Trajectory::default();
        for i in 0..=n {
            let t = t_max * i as f64 / n as f64;
            traj.times.push(t);
            traj.theta.push(f(t));
        }
        traj
    }

    #[test]
    fn steady_value_of_constant() {
        let traj = synthetic(|_| 0.5, 10.0, 100);
        let cfg = EvolutionConfig::default();
        assert_eq!(steady_state_value(&traj, &cfg).unwrap(), 0.5);
    }

    #[test]
    fn steady_value_of_sinusoid() {
        // Window of 0.2 * 50 = 10 covers five periods of length 2.
        let amp = 0.1;
        let traj = synthetic(|t| 0.3 + amp * (std::f64::consts::PI * t).sin(), 50.0, 5000);
        // A fitted line through whole periods still tilts by ~amp / periods.
        let cfg = EvolutionConfig {
            drift_tolerance: amp,
            ..EvolutionConfig::default()
        };
        let v = steady_state_value(&traj, &cfg).unwrap();
        assert!((v - 0.3).abs() < amp / 5.0, "{v}");
    }

    #[test]
    fn drifting_window_is_not_converged() {
        let traj = synthetic(|t| 0.01 * t, 50.0, 500);
        let cfg = EvolutionConfig::default();
        match steady_state_value(&traj, &cfg) {
            Err(PropagatorError::NotConverged { drift, .. }) => {
                assert!((drift - 0.1).abs() < 1e-9, "{drift}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("fast".parse::<Variant>().is_err());
    }

    #[test]
    fn config_validation() {
        let ok = EvolutionConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            EvolutionConfig {
                dt: 0.0,
                ..ok.clone()
            },
            EvolutionConfig {
                t_max: 0.001,
                ..ok.clone()
            },
            EvolutionConfig {
                lindblad_rate: -1.0,
                ..ok.clone()
            },
            EvolutionConfig {
                steady_window_fraction: 1.0,
                ..ok.clone()
            },
            EvolutionConfig {
                output_stride: 0,
                ..ok.clone()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn unitary_step_matches_exact_propagator() {
        let model = PolaronChain::build(
            ChainParams::default(),
            BathParams::default(),
            ModelOptions::default(),
        )
        .unwrap();
        let es: &Eigensystem = &model.eigensystem;
        let dt = 1e-3;
        let rho = model.rho0.matrix();
        let step = rk4_step(rho, dt, |r, _| liouvillian_unitary(r, &model.h_sys));
        let u = es.from_eigenbasis(&Operator::from_diagonal(&nalgebra::DVector::from_iterator(
            es.dim(),
            es.eigenvalues
                .iter()
                .map(|&e| Complex64::from_polar(1.0, -e * dt)),
        )));
        let exact = &u * rho * u.adjoint();
        assert!(max_norm(&(step.rho - exact)) < 1e-10);
    }

    #[test]
    fn coarse_step_is_rejected() {
        let model = PolaronChain::build(
            ChainParams::default(),
            BathParams::default(),
            ModelOptions::default(),
        )
        .unwrap();
        let cfg = EvolutionConfig {
            dt: 0.1,
            t_max: 1.0,
            ..EvolutionConfig::default()
        };
        assert!(matches!(
            run_trajectory(&cfg, &model),
            Err(PropagatorError::Resolution { .. })
        ));
    }
}
