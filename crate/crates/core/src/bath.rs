//! Superohmic phonon bath: coupling profile, correlation function φ(τ),
//! Franck–Condon factor and coupling-scale calibration.
//!
//! Units: ħ = 1, time in ps, energy in ps⁻¹, momentum in nm⁻¹, sound
//! velocity in nm/ps, temperature in K. The radial reduction
//! `∫d³k -> norm_scale ∫k² dk` folds the quantization volume and angular
//! factors into `norm_scale`.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::quadrature::CompositeRule;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054571817e-34;
/// `k_B / ħ` in ps⁻¹ K⁻¹; converts a temperature into an angular frequency.
pub const KB_OVER_HBAR: f64 = BOLTZMANN / HBAR * 1e-12;

/// Points per Gauss–Legendre panel.
pub const PANEL_ORDER: usize = 16;
/// Largest phase advance of `cos(c_s k τ)` across one panel.
const MAX_PANEL_PHASE: f64 = 4.0;
/// Relative change allowed when the node count is doubled.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;
/// Bounds searched by [`calibrate_scale`].
pub const SCALE_BOUNDS: (f64, f64) = (1e-6, 1e6);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BathError {
    #[error("invalid bath parameter {name} = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("quadrature not converged at tau = {tau}: relative change {change:.3e} on doubling")]
    Accuracy { tau: f64, change: f64 },
    #[error("|phi(tau)| exceeds phi(0) at tau = {tau}")]
    Envelope { tau: f64 },
    #[error("calibration target <B> = {target} unreachable: required scale {scale:.3e} outside [{lo:e}, {hi:e}]")]
    Calibration {
        target: f64,
        scale: f64,
        lo: f64,
        hi: f64,
    },
    #[error("correlation table exhausted: requested half-step {index}, table holds {len}")]
    TableRange { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathParams {
    /// Dimensionless coupling amplitude.
    pub f_ph: f64,
    /// Coupling bandwidth, nm⁻¹.
    pub sigma: f64,
    /// Sound velocity, nm/ps.
    pub c_s: f64,
    /// Kelvin.
    pub temperature: f64,
    pub k_min: f64,
    pub k_max: f64,
    /// Absorbs `1/V` and the angular measure.
    pub norm_scale: f64,
    /// Minimum quadrature nodes.
    pub n_quad: usize,
    /// `k_B/ħ` in the run's units.
    pub kb_over_hbar: f64,
}

impl Default for BathParams {
    fn default() -> Self {
        Self {
            f_ph: 0.1,
            sigma: 0.6,
            c_s: DEFAULT_SOUND_VELOCITY,
            temperature: 4.0,
            k_min: 0.0,
            k_max: 4.0,
            norm_scale: 1.0,
            n_quad: 256,
            kb_over_hbar: KB_OVER_HBAR,
        }
    }
}

/// Default sound velocity, nm/ps.
pub const DEFAULT_SOUND_VELOCITY: f64 = 8.0;

impl BathParams {
    pub fn validate(&self) -> Result<(), BathError> {
        let bad = |name, value, reason| {
            Err(BathError::Parameter {
                name,
                value,
                reason,
            })
        };
        if !(self.sigma > 0.0) {
            return bad("sigma", self.sigma, "must be positive");
        }
        if !(self.c_s > 0.0) {
            return bad("c_s", self.c_s, "must be positive");
        }
        if !(self.temperature >= 0.0) {
            return bad("temperature", self.temperature, "must be non-negative");
        }
        if !(self.k_min >= 0.0) {
            return bad("k_min", self.k_min, "must be non-negative");
        }
        if !(self.k_max > self.k_min) {
            return bad("k_max", self.k_max, "must exceed k_min");
        }
        if !(self.norm_scale > 0.0) {
            return bad("norm_scale", self.norm_scale, "must be positive");
        }
        if self.n_quad < 64 {
            return bad("n_quad", self.n_quad as f64, "must be at least 64");
        }
        if !self.f_ph.is_finite() {
            return bad("f_ph", self.f_ph, "must be finite");
        }
        if !(self.kb_over_hbar > 0.0) {
            return bad("kb_over_hbar", self.kb_over_hbar, "must be positive");
        }
        Ok(())
    }

    pub fn omega(&self, k: f64) -> f64 {
        self.c_s * k
    }

    /// `k coth(ħ c_s k / 2 k_B T)`, with the `k -> 0` and `T -> 0` limits.
    fn k_coth(&self, k: f64) -> f64 {
        if self.temperature == 0.0 {
            return k;
        }
        let b = self.c_s / (2.0 * self.kb_over_hbar * self.temperature);
        let x = b * k;
        let x_coth_x = if x < 1e-6 {
            1.0 + x * x / 3.0
        } else {
            x / x.tanh()
        };
        x_coth_x / b
    }
}

/// Momentum dependence of the fermion–phonon coupling.
pub trait CouplingProfile: Send + Sync {
    /// `g_k` without the `1/sqrt(V)` factor.
    fn coupling(&self, bath: &BathParams, k: f64) -> f64;
    /// `g_k² / k`, finite at `k = 0` for superohmic profiles.
    fn coupling_sq_over_k(&self, bath: &BathParams, k: f64) -> f64;
    /// Momentum above which `g_k²` is below 1e-20 of its scale.
    fn negligible_above(&self, bath: &BathParams) -> f64;
}

/// `g_k = f_ph sqrt(k/σ²) exp(-k²/σ²)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianProfile;

impl CouplingProfile for GaussianProfile {
    fn coupling(&self, bath: &BathParams, k: f64) -> f64 {
        let s2 = bath.sigma * bath.sigma;
        bath.f_ph * (k / s2).sqrt() * (-k * k / s2).exp()
    }

    fn coupling_sq_over_k(&self, bath: &BathParams, k: f64) -> f64 {
        let s2 = bath.sigma * bath.sigma;
        bath.f_ph * bath.f_ph / s2 * (-2.0 * k * k / s2).exp()
    }

    fn negligible_above(&self, bath: &BathParams) -> f64 {
        // exp(-2k²/σ²) = 1e-20
        bath.sigma * (0.5 * 20.0 * std::f64::consts::LN_10).sqrt()
    }
}

pub fn coupling_gk(bath: &BathParams, k: f64) -> f64 {
    GaussianProfile.coupling(bath, k)
}

/// Node data for one quadrature resolution.
#[derive(Debug, Clone)]
struct Level {
    omega: Vec<f64>,
    /// `w · pref · (g²/k) · k coth`
    cos_weight: Vec<f64>,
    /// `w · pref · (g²/k) · k`
    sin_weight: Vec<f64>,
    mass: f64,
}

impl Level {
    fn eval(&self, tau: f64) -> Complex64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for ((w, cw), sw) in self
            .omega
            .iter()
            .zip(&self.cos_weight)
            .zip(&self.sin_weight)
        {
            let (s, c) = (w * tau).sin_cos();
            re += cw * c;
            im -= sw * s;
        }
        Complex64::new(re, im)
    }
}

/// Evaluates φ(τ) with node counts adapted to the oscillation of the
/// integrand, checking each value against a doubled rule.
pub struct PhiEvaluator<'a> {
    bath: BathParams,
    profile: &'a dyn CouplingProfile,
    k_lo: f64,
    k_hi: f64,
    base_panels: usize,
    levels: Vec<Level>,
}

impl<'a> PhiEvaluator<'a> {
    pub fn new(bath: &BathParams, profile: &'a dyn CouplingProfile) -> Result<Self, BathError> {
        bath.validate()?;
        let k_lo = bath.k_min;
        let k_hi = bath.k_max.min(profile.negligible_above(bath)).max(k_lo);
        Ok(Self {
            bath: *bath,
            profile,
            k_lo,
            k_hi,
            base_panels: bath.n_quad.div_ceil(PANEL_ORDER).max(4),
            levels: Vec::new(),
        })
    }

    fn level_for(&self, tau: f64) -> usize {
        let phase = self.bath.c_s * (self.k_hi - self.k_lo) * tau.abs();
        let needed = (phase / MAX_PANEL_PHASE).ceil() as usize;
        let mut level = 0;
        while self.base_panels << level < needed {
            level += 1;
        }
        level
    }

    fn ensure_levels(&mut self, top: usize) {
        while self.levels.len() <= top {
            let panels = self.base_panels << self.levels.len();
            let rule = CompositeRule::new(self.k_lo, self.k_hi, panels, PANEL_ORDER);
            let b = &self.bath;
            let pref = b.norm_scale * 4.0 / (b.c_s * b.c_s);
            let mut level = Level {
                omega: Vec::with_capacity(rule.len()),
                cos_weight: Vec::with_capacity(rule.len()),
                sin_weight: Vec::with_capacity(rule.len()),
                mass: 0.0,
            };
            for (&k, &w) in rule.nodes.iter().zip(&rule.weights) {
                let g = pref * self.profile.coupling_sq_over_k(b, k);
                let cw = w * g * b.k_coth(k);
                level.omega.push(b.omega(k));
                level.cos_weight.push(cw);
                level.sin_weight.push(w * g * k);
                level.mass += cw.abs();
            }
            self.levels.push(level);
        }
    }

    /// Prepares every resolution needed up to `tau_max`.
    pub fn prepare(&mut self, tau_max: f64) {
        let top = self.level_for(tau_max) + 1;
        self.ensure_levels(top);
    }

    pub fn eval(&mut self, tau: f64) -> Result<Complex64, BathError> {
        self.prepare(tau);
        self.eval_prepared(tau)
    }

    fn eval_prepared(&self, tau: f64) -> Result<Complex64, BathError> {
        let level = self.level_for(tau);
        let coarse = self.levels[level].eval(tau);
        let fine = self.levels[level + 1].eval(tau);
        let mass = self.levels[level + 1].mass;
        let change = if mass > 0.0 {
            (fine - coarse).norm() / mass
        } else {
            0.0
        };
        if change > QUADRATURE_TOLERANCE {
            return Err(BathError::Accuracy { tau, change });
        }
        Ok(fine)
    }
}

/// Phonon correlation function
/// `φ(τ) = ∫d³k |2g_k/ω_k|² [coth(ω_k/2k_BT) cos(ω_k τ) - i sin(ω_k τ)]`.
pub fn phi(bath: &BathParams, tau: f64) -> Result<Complex64, BathError> {
    phi_with_profile(bath, &GaussianProfile, tau)
}

pub fn phi_with_profile(
    bath: &BathParams,
    profile: &dyn CouplingProfile,
    tau: f64,
) -> Result<Complex64, BathError> {
    PhiEvaluator::new(bath, profile)?.eval(tau)
}

/// `⟨B⟩ = exp(-φ(0)/2)`.
pub fn franck_condon_b(bath: &BathParams) -> Result<f64, BathError> {
    Ok((-0.5 * phi(bath, 0.0)?.re).exp())
}

/// Coupling scale for which the reference bath has `⟨B⟩ = target_b`.
///
/// φ(0) is linear in `norm_scale`, so the monotone root of
/// `⟨B⟩(s) = target` is `s = -2 ln(target) / φ(0)|_{s=1}`.
pub fn calibrate_scale(bath_ref: &BathParams, target_b: f64) -> Result<f64, BathError> {
    let (lo, hi) = SCALE_BOUNDS;
    let unit = BathParams {
        norm_scale: 1.0,
        ..*bath_ref
    };
    let phi0 = phi(&unit, 0.0)?.re;
    let scale = if target_b > 0.0 && target_b < 1.0 && phi0 > 0.0 {
        -2.0 * target_b.ln() / phi0
    } else if target_b >= 1.0 {
        0.0
    } else {
        f64::INFINITY
    };
    if !(lo..=hi).contains(&scale) {
        return Err(BathError::Calibration {
            target: target_b,
            scale,
            lo,
            hi,
        });
    }
    Ok(scale)
}

/// Precomputed φ on the half-step grid `τ_m = m dt/2`, `m = 0..=2M`.
#[derive(Debug, Clone)]
pub struct CorrelationTable {
    dt: f64,
    values: Vec<Complex64>,
}

impl CorrelationTable {
    pub fn build(bath: &BathParams, dt: f64, t_max: f64) -> Result<Self, BathError> {
        Self::build_with_profile(bath, &GaussianProfile, dt, t_max)
    }

    pub fn build_with_profile(
        bath: &BathParams,
        profile: &dyn CouplingProfile,
        dt: f64,
        t_max: f64,
    ) -> Result<Self, BathError> {
        if !(dt > 0.0) {
            return Err(BathError::Parameter {
                name: "dt",
                value: dt,
                reason: "must be positive",
            });
        }
        if !(t_max >= dt) {
            return Err(BathError::Parameter {
                name: "t_max",
                value: t_max,
                reason: "must be at least dt",
            });
        }
        let steps = step_count(dt, t_max);
        let half = 0.5 * dt;
        let mut evaluator = PhiEvaluator::new(bath, profile)?;
        evaluator.prepare(2.0 * steps as f64 * half);
        let values = (0..=2 * steps)
            .into_par_iter()
            .map(|m| evaluator.eval_prepared(m as f64 * half))
            .collect::<Result<Vec<_>, _>>()?;
        let phi0 = values[0].re;
        let bound = phi0 * (1.0 + 1e-12) + 1e-300;
        if let Some(m) = values.iter().position(|v| v.norm() > bound) {
            return Err(BathError::Envelope {
                tau: m as f64 * half,
            });
        }
        Ok(Self { dt, values })
    }

    /// Table of zeros, for uncoupled runs.
    pub fn zero(dt: f64, t_max: f64) -> Self {
        let steps = step_count(dt, t_max);
        Self {
            dt,
            values: vec![Complex64::new(0.0, 0.0); 2 * steps + 1],
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of full steps covered.
    pub fn steps(&self) -> usize {
        (self.values.len() - 1) / 2
    }

    pub fn tau(&self, half_index: usize) -> f64 {
        half_index as f64 * 0.5 * self.dt
    }

    pub fn get(&self, half_index: usize) -> Result<Complex64, BathError> {
        self.values
            .get(half_index)
            .copied()
            .ok_or(BathError::TableRange {
                index: half_index,
                len: self.values.len(),
            })
    }
}

/// Number of steps of size `dt` needed to reach `t_max`.
pub fn step_count(dt: f64, t_max: f64) -> usize {
    ((t_max / dt) - 1e-9).ceil().max(1.0) as usize
}

/// First τ at which `|φ(τ)|/φ(0)` drops below `fraction` (memory depth).
pub fn decay_time(bath: &BathParams, fraction: f64) -> Result<f64, BathError> {
    let mut eval = PhiEvaluator::new(bath, &GaussianProfile)?;
    let phi0 = eval.eval(0.0)?.re;
    if phi0 <= 0.0 {
        return Ok(0.0);
    }
    let step = 0.01 / (bath.c_s * bath.sigma);
    let ratio =
        |e: &mut PhiEvaluator, t: f64| -> Result<f64, BathError> { Ok(e.eval(t)?.norm() / phi0) };
    let mut lo = 0.0;
    let mut hi = step;
    let limit = 1e4 * step;
    while ratio(&mut eval, hi)? >= fraction {
        lo = hi;
        hi += step;
        if hi > limit {
            return Ok(f64::INFINITY);
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ratio(&mut eval, mid)? >= fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
