//! Incremental memory-kernel quadrature.
//!
//! The dissipator only involves ρ at the outer time, so the τ-integrals
//! `K_a(t) = ∫_0^t (cosh φ - 1) X_a(-τ) dτ` and `K_b(t) = ∫_0^t sinh φ X_b(-τ) dτ`
//! are advanced step by step with Simpson's rule on the half-step grid.

use num_complex::Complex64;

use crate::bath::{BathError, CorrelationTable};
use crate::fockspace::{Eigensystem, Operator, ReversedEvolution};

/// `cosh φ - 1`.
pub fn cosh_weight(phi: Complex64) -> Complex64 {
    phi.cosh() - 1.0
}

pub fn sinh_weight(phi: Complex64) -> Complex64 {
    phi.sinh()
}

/// Read-only data the accumulators integrate over.
pub struct KernelSource<'a> {
    table: &'a CorrelationTable,
    x_a: ReversedEvolution<'a>,
    x_b: ReversedEvolution<'a>,
}

impl<'a> KernelSource<'a> {
    pub fn new(
        table: &'a CorrelationTable,
        es: &'a Eigensystem,
        x_a: &Operator,
        x_b: &Operator,
    ) -> Self {
        Self {
            table,
            x_a: ReversedEvolution::new(x_a, es),
            x_b: ReversedEvolution::new(x_b, es),
        }
    }

    pub fn table(&self) -> &CorrelationTable {
        self.table
    }

    /// Integrands `((cosh φ - 1) X_a(-τ), sinh φ X_b(-τ))` at half-step `m`.
    pub fn integrand(&self, m: usize) -> Result<(Operator, Operator), BathError> {
        let phi = self.table.get(m)?;
        let tau = self.table.tau(m);
        Ok((
            self.x_a.at(tau) * cosh_weight(phi),
            self.x_b.at(tau) * sinh_weight(phi),
        ))
    }
}

fn partial_weights(h: f64) -> [f64; 3] {
    // ∫ over the first half of a Simpson panel, quadratic through all three nodes.
    [5.0 * h / 12.0, 8.0 * h / 12.0, -h / 12.0]
}

fn simpson_weights(h: f64) -> [f64; 3] {
    [h / 3.0, 4.0 * h / 3.0, h / 3.0]
}

fn combine(base: &Operator, f: [&Operator; 3], w: [f64; 3]) -> Operator {
    let mut out = base.clone();
    for (fi, wi) in f.into_iter().zip(w) {
        out += fi * Complex64::new(wi, 0.0);
    }
    out
}

/// Operator-valued kernels `K_a`, `K_b` at `t_current`.
#[derive(Debug, Clone)]
pub struct KernelAccumulators {
    pub k_a: Operator,
    pub k_b: Operator,
    step: usize,
    dt: f64,
    /// Integrand cached at `t_current`.
    edge: Option<(Operator, Operator)>,
}

impl KernelAccumulators {
    pub fn zero(dim: usize, dt: f64) -> Self {
        Self {
            k_a: Operator::zeros(dim, dim),
            k_b: Operator::zeros(dim, dim),
            step: 0,
            dt,
            edge: None,
        }
    }

    pub fn t_current(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Advances to `t + dt` and returns the kernels at `t + dt/2`.
    pub fn advance(&mut self, src: &KernelSource) -> Result<KernelAccumulators, BathError> {
        let m = 2 * self.step;
        // Range check before any work.
        src.table().get(m + 2)?;
        let f0 = match self.edge.take() {
            Some(f) => f,
            None => src.integrand(m)?,
        };
        let f1 = src.integrand(m + 1)?;
        let f2 = src.integrand(m + 2)?;
        let h = 0.5 * self.dt;
        let mid = KernelAccumulators {
            k_a: combine(&self.k_a, [&f0.0, &f1.0, &f2.0], partial_weights(h)),
            k_b: combine(&self.k_b, [&f0.1, &f1.1, &f2.1], partial_weights(h)),
            step: self.step,
            dt: self.dt,
            edge: None,
        };
        self.k_a = combine(&self.k_a, [&f0.0, &f1.0, &f2.0], simpson_weights(h));
        self.k_b = combine(&self.k_b, [&f0.1, &f1.1, &f2.1], simpson_weights(h));
        self.step += 1;
        self.edge = Some(f2);
        Ok(mid)
    }
}

/// Scalar kernels of the Markovian limit, `c_a = ∫(cosh φ - 1)`, `c_b = ∫ sinh φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarKernels {
    pub c_a: Complex64,
    pub c_b: Complex64,
    step: usize,
    dt: f64,
}

impl ScalarKernels {
    pub fn zero(dt: f64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            c_a: z,
            c_b: z,
            step: 0,
            dt,
        }
    }

    pub fn t_current(&self) -> f64 {
        self.step as f64 * self.dt
    }

    /// Advances to `t + dt` and returns the coefficients at `t + dt/2`.
    pub fn advance(&mut self, table: &CorrelationTable) -> Result<ScalarKernels, BathError> {
        let m = 2 * self.step;
        let phis = [table.get(m)?, table.get(m + 1)?, table.get(m + 2)?];
        let h = 0.5 * self.dt;
        let integrate = |w: [f64; 3], f: fn(Complex64) -> Complex64| -> Complex64 {
            phis.iter().zip(w).map(|(&p, wi)| f(p) * wi).sum()
        };
        let mid = ScalarKernels {
            c_a: self.c_a + integrate(partial_weights(h), cosh_weight),
            c_b: self.c_b + integrate(partial_weights(h), sinh_weight),
            ..*self
        };
        self.c_a += integrate(simpson_weights(h), cosh_weight);
        self.c_b += integrate(simpson_weights(h), sinh_weight);
        self.step += 1;
        Ok(mid)
    }

    /// Coefficients at `t = n dt` from scratch.
    pub fn at_step(table: &CorrelationTable, n: usize) -> Result<ScalarKernels, BathError> {
        let mut k = Self::zero(table.dt());
        for _ in 0..n {
            k.advance(table)?;
        }
        Ok(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{calibrate_scale, BathParams};
    use crate::chain::{build_collective_x, build_kitaev};
    use crate::fockspace::{heisenberg_reversed, max_norm, FockSpace};

    struct Fixture {
        table: CorrelationTable,
        es: Eigensystem,
        x_a: Operator,
        x_b: Operator,
    }

    fn fixture(f_ph: f64, dt: f64, t_max: f64) -> Fixture {
        let s = FockSpace::new(4).unwrap();
        let reference = BathParams::default();
        let bath = BathParams {
            f_ph,
            norm_scale: calibrate_scale(&reference, 0.07).unwrap(),
            ..reference
        };
        let table = CorrelationTable::build(&bath, dt, t_max).unwrap();
        let h = build_kitaev(&s, 1.0, 0.07, 0.0);
        let es = Eigensystem::new(&h).unwrap();
        let (x_a, x_b) = build_collective_x(&s, 1.0);
        Fixture {
            table,
            es,
            x_a,
            x_b,
        }
    }

    /// Integrand evaluated independently of `ReversedEvolution`.
    fn direct_integrand(fx: &Fixture, m: usize) -> (Operator, Operator) {
        let tau = fx.table.tau(m);
        let phi = fx.table.values()[m];
        (
            heisenberg_reversed(&fx.x_a, &fx.es, tau) * (phi.cosh() - 1.0),
            heisenberg_reversed(&fx.x_b, &fx.es, tau) * phi.sinh(),
        )
    }

    #[test]
    fn uncoupled_bath_keeps_kernels_zero() {
        let fx = fixture(0.0, 0.01, 1.0);
        let src = KernelSource::new(&fx.table, &fx.es, &fx.x_a, &fx.x_b);
        let mut acc = KernelAccumulators::zero(16, 0.01);
        for _ in 0..100 {
            let mid = acc.advance(&src).unwrap();
            assert_eq!(max_norm(&mid.k_a), 0.0);
        }
        assert_eq!(max_norm(&acc.k_a), 0.0);
        assert_eq!(max_norm(&acc.k_b), 0.0);
        assert!((acc.t_current() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_step_matches_fresh_simpson() {
        let dt = 0.01;
        let fx = fixture(0.1, dt, 0.5);
        let src = KernelSource::new(&fx.table, &fx.es, &fx.x_a, &fx.x_b);
        let mut acc = KernelAccumulators::zero(16, dt);
        acc.advance(&src).unwrap();
        let f: Vec<_> = (0..3).map(|m| direct_integrand(&fx, m)).collect();
        let h = dt / 2.0;
        let want_a =
            (&f[0].0 + &f[1].0 * Complex64::new(4.0, 0.0) + &f[2].0) * Complex64::new(h / 3.0, 0.0);
        let want_b =
            (&f[0].1 + &f[1].1 * Complex64::new(4.0, 0.0) + &f[2].1) * Complex64::new(h / 3.0, 0.0);
        assert!(max_norm(&(acc.k_a - want_a)) < 1e-12);
        assert!(max_norm(&(acc.k_b - want_b)) < 1e-12);
    }

    #[test]
    fn accumulation_matches_composite_simpson_after_500_steps() {
        let dt = 0.01;
        let n = 500;
        let fx = fixture(0.1, dt, n as f64 * dt);
        let src = KernelSource::new(&fx.table, &fx.es, &fx.x_a, &fx.x_b);
        let mut acc = KernelAccumulators::zero(16, dt);
        for _ in 0..n {
            acc.advance(&src).unwrap();
        }
        let h = dt / 2.0;
        let mut want_a = Operator::zeros(16, 16);
        let mut want_b = Operator::zeros(16, 16);
        for m in 0..=2 * n {
            let w = if m == 0 || m == 2 * n {
                1.0
            } else if m % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let (fa, fb) = direct_integrand(&fx, m);
            want_a += fa * Complex64::new(w * h / 3.0, 0.0);
            want_b += fb * Complex64::new(w * h / 3.0, 0.0);
        }
        assert!(max_norm(&(acc.k_a - want_a)) < 1e-8);
        assert!(max_norm(&(acc.k_b - want_b)) < 1e-8);
    }

    #[test]
    fn table_exhaustion_is_an_error() {
        let fx = fixture(0.1, 0.1, 0.2);
        let src = KernelSource::new(&fx.table, &fx.es, &fx.x_a, &fx.x_b);
        let mut acc = KernelAccumulators::zero(16, 0.1);
        acc.advance(&src).unwrap();
        acc.advance(&src).unwrap();
        assert!(matches!(
            acc.advance(&src),
            Err(BathError::TableRange { .. })
        ));
        let mut scalar = ScalarKernels::zero(0.1);
        scalar.advance(&fx.table).unwrap();
        scalar.advance(&fx.table).unwrap();
        assert!(scalar.advance(&fx.table).is_err());
    }

    #[test]
    fn midpoint_kernel_is_fourth_order() {
        // ∫_0^{dt/2} of a smooth integrand: error shrinks ~ dt^4 or faster.
        let reference = BathParams::default();
        let calibrated = BathParams {
            norm_scale: calibrate_scale(&reference, 0.07).unwrap(),
            ..reference
        };
        let err = |dt: f64| {
            let table = CorrelationTable::build(&calibrated, dt, dt).unwrap();
            let fine = CorrelationTable::build(&calibrated, dt / 64.0, dt / 2.0).unwrap();
            let mid = ScalarKernels::zero(dt).advance(&table).unwrap();
            let reference = ScalarKernels::at_step(&fine, 32).unwrap();
            (mid.c_a - reference.c_a).norm()
        };
        let e1 = err(0.02);
        let e2 = err(0.01);
        assert!(e1 / e2 > 14.0, "{e1} {e2}");
    }
}
