//! Explicit Runge–Kutta integration for the flows in this crate.
//!
//! Two methods: classical fixed-step RK4, and the Dormand–Prince 5(4)
//! embedded pair with step-size control. The adaptive controller halves the
//! step (at least) on every rejection. Outputs land exactly on requested
//! grid points.

use nalgebra::{allocator::Allocator, ComplexField, DefaultAllocator, Dim, OMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    Rk4Fixed {
        step: f64,
    },
    /// Accept a step when `|err_i| ≤ atol + rtol·|y_i|` for every component.
    Rk45Adaptive {
        rtol: f64,
        atol: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_step: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub max_steps: usize,
}

impl IntegratorConfig {
    /// Adaptive with `rtol = atol = tolerance`.
    pub fn adaptive(tolerance: f64) -> Self {
        Self::adaptive_with(tolerance, tolerance)
    }

    pub const fn adaptive_with(rtol: f64, atol: f64) -> Self {
        Self {
            method: Method::Rk45Adaptive {
                rtol,
                atol,
                max_step: None,
            },
            max_steps: 1_000_000,
        }
    }

    pub fn rk4(step: f64) -> Self {
        Self {
            method: Method::Rk4Fixed { step },
            max_steps: 10_000_000,
        }
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        if let Method::Rk45Adaptive { max_step, .. } = &mut self.method {
            *max_step = Some(h);
        }
        self
    }

    pub fn validate(&self) -> Result<(), IntegrationError> {
        let bad = |msg: &str| Err(IntegrationError::InvalidConfig(msg.to_string()));
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1");
        }
        match self.method {
            Method::Rk4Fixed { step } if !(step > 0.0 && step.is_finite()) => bad("step must be positive"),
            Method::Rk45Adaptive { rtol, atol, max_step } => {
                if !(rtol > 0.0 || atol > 0.0) || rtol < 0.0 || atol < 0.0 {
                    return bad("tolerances must be nonnegative and not both zero");
                }
                if matches!(max_step, Some(h) if !(h > 0.0)) {
                    return bad("max_step must be positive");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self::adaptive(1e-9)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("step budget of {max_steps} exhausted at B = {reached}")]
    StepLimit { reached: f64, max_steps: usize },
    #[error("step size underflow at B = {reached}")]
    StepUnderflow { reached: f64 },
    #[error("non-finite state at B = {reached}")]
    NonFinite { reached: f64 },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("output grid must be ascending and start at the initial point")]
    BadGrid,
}

impl IntegrationError {
    /// Parameter value reached before the failure, when meaningful.
    pub fn reached(&self) -> Option<f64> {
        match self {
            Self::StepLimit { reached, .. } | Self::StepUnderflow { reached } | Self::NonFinite { reached } => Some(*reached),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
    /// Scaled local error estimate of each accepted adaptive step (`≤ 1`).
    pub error_estimates: Vec<f64>,
}

/// State vectors the integrators can advance.
pub trait OdeState: Clone {
    /// `self += a · x`
    fn add_scaled(&mut self, a: f64, x: &Self);

    /// `max_i |err_i| / (atol + rtol · max(|y0_i|, |y1_i|))`
    fn scaled_error(err: &Self, y0: &Self, y1: &Self, atol: f64, rtol: f64) -> f64;

    fn all_finite(&self) -> bool;
}

impl<T, R, C> OdeState for OMatrix<T, R, C>
where
    T: ComplexField<RealField = f64>,
    R: Dim,
    C: Dim,
    DefaultAllocator: Allocator<R, C>,
{
    fn add_scaled(&mut self, a: f64, x: &Self) {
        let a = T::from_real(a);
        for (s, xi) in self.iter_mut().zip(x.iter()) {
            *s += a.clone() * xi.clone();
        }
    }

    fn scaled_error(err: &Self, y0: &Self, y1: &Self, atol: f64, rtol: f64) -> f64 {
        err.iter()
            .zip(y0.iter())
            .zip(y1.iter())
            .map(|((e, a), b)| scaled(e.clone().modulus(), a.clone().modulus(), b.clone().modulus(), atol, rtol))
            .fold(0.0, f64::max)
    }

    fn all_finite(&self) -> bool {
        self.iter().all(|x| x.clone().is_finite())
    }
}

impl OdeState for Vec<f64> {
    fn add_scaled(&mut self, a: f64, x: &Self) {
        for (s, xi) in self.iter_mut().zip(x) {
            *s += a * xi;
        }
    }

    fn scaled_error(err: &Self, y0: &Self, y1: &Self, atol: f64, rtol: f64) -> f64 {
        err.iter()
            .zip(y0)
            .zip(y1)
            .map(|((e, a), b)| scaled(e.abs(), a.abs(), b.abs(), atol, rtol))
            .fold(0.0, f64::max)
    }

    fn all_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

#[inline]
fn scaled(err: f64, a: f64, b: f64, atol: f64, rtol: f64) -> f64 {
    if err == 0.0 {
        return 0.0;
    }
    let denom = atol + rtol * a.max(b);
    if denom == 0.0 {
        f64::INFINITY
    } else {
        err / denom
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Incremental integrator for `dy/dB = f(B, y)`.
pub struct Stepper<S, F> {
    rhs: F,
    b: f64,
    y: S,
    cfg: IntegratorConfig,
    /// Step proposal carried between adaptive steps (unclipped).
    h: Option<f64>,
    /// First-same-as-last derivative at `(b, y)`.
    fsal: Option<S>,
    stats: IntegratorStats,
    steps: usize,
}

impl<S, F> Stepper<S, F>
where
    S: OdeState,
    F: FnMut(f64, &S) -> S,
{
    pub fn new(rhs: F, b0: f64, y0: S, cfg: IntegratorConfig) -> Result<Self, IntegrationError> {
        cfg.validate()?;
        Ok(Self {
            rhs,
            b: b0,
            y: y0,
            cfg,
            h: None,
            fsal: None,
            stats: IntegratorStats::default(),
            steps: 0,
        })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn state(&self) -> &S {
        &self.y
    }

    pub fn stats(&self) -> &IntegratorStats {
        &self.stats
    }

    pub fn into_parts(self) -> (S, IntegratorStats) {
        (self.y, self.stats)
    }

    fn eval(&mut self, b: f64, y: &S) -> S {
        self.stats.rhs_evaluations += 1;
        (self.rhs)(b, y)
    }

    fn count_step(&mut self) -> Result<(), IntegrationError> {
        self.steps += 1;
        if self.steps > self.cfg.max_steps {
            return Err(IntegrationError::StepLimit {
                reached: self.b,
                max_steps: self.cfg.max_steps,
            });
        }
        Ok(())
    }

    /// Advances the state to exactly `target ≥ b()`.
    pub fn advance_to(&mut self, target: f64) -> Result<(), IntegrationError> {
        if !(target >= self.b) {
            return Err(IntegrationError::BadGrid);
        }
        if target == self.b {
            return Ok(());
        }
        match self.cfg.method {
            Method::Rk4Fixed { step } => self.rk4_to(target, step),
            Method::Rk45Adaptive { rtol, atol, max_step } => self.dopri_to(target, rtol, atol, max_step.unwrap_or(f64::INFINITY)),
        }
    }

    fn rk4_to(&mut self, target: f64, step: f64) -> Result<(), IntegrationError> {
        let span = target - self.b;
        let count = (span / step).ceil().max(1.0) as usize;
        let b0 = self.b;
        let h = span / count as f64;
        for i in 0..count {
            self.count_step()?;
            let b = b0 + i as f64 * h;
            let k1 = self.eval(b, &self.y.clone());
            let mut y2 = self.y.clone();
            y2.add_scaled(0.5 * h, &k1);
            let k2 = self.eval(b + 0.5 * h, &y2);
            let mut y3 = self.y.clone();
            y3.add_scaled(0.5 * h, &k2);
            let k3 = self.eval(b + 0.5 * h, &y3);
            let mut y4 = self.y.clone();
            y4.add_scaled(h, &k3);
            let k4 = self.eval(b + h, &y4);
            self.y.add_scaled(h / 6.0, &k1);
            self.y.add_scaled(h / 3.0, &k2);
            self.y.add_scaled(h / 3.0, &k3);
            self.y.add_scaled(h / 6.0, &k4);
            self.b = if i + 1 == count { target } else { b0 + (i + 1) as f64 * h };
            self.stats.accepted += 1;
            if !self.y.all_finite() {
                return Err(IntegrationError::NonFinite { reached: self.b });
            }
        }
        Ok(())
    }

    fn initial_step(&mut self, f0: &S, rtol: f64, atol: f64, span: f64) -> f64 {
        let d0 = S::scaled_error(&self.y, &self.y, &self.y, atol, rtol);
        let d1 = S::scaled_error(f0, &self.y, &self.y, atol, rtol);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 || !d0.is_finite() || !d1.is_finite() {
            1e-6 * span.max(1e-300)
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span);
        let mut y1 = self.y.clone();
        y1.add_scaled(h0, f0);
        let f1 = self.eval(self.b + h0, &y1);
        let mut df = f1;
        df.add_scaled(-1.0, f0);
        let d2 = S::scaled_error(&df, &self.y, &self.y, atol, rtol) / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= 1e-15 || !dmax.is_finite() {
            (h0 * 1e-3).max(1e-6 * span)
        } else {
            (0.01 / dmax).powf(1.0 / 5.0)
        };
        (100.0 * h0).min(h1)
    }

    fn dopri_to(&mut self, target: f64, rtol: f64, atol: f64, max_step: f64) -> Result<(), IntegrationError> {
        let k1 = match self.fsal.take() {
            Some(k) => k,
            None => self.eval(self.b, &self.y.clone()),
        };
        let mut k1 = k1;
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(&k1, rtol, atol, target - self.b),
        }
        .min(max_step);

        while self.b < target {
            self.count_step()?;
            let remaining = target - self.b;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            if step <= f64::EPSILON * self.b.abs().max(1.0) * 4.0 && !last {
                return Err(IntegrationError::StepUnderflow { reached: self.b });
            }
            let b = self.b;
            let y = &self.y;

            let mut s = y.clone();
            s.add_scaled(step * A21, &k1);
            let k2 = (self.rhs)(b + C2 * step, &s);

            let mut s = y.clone();
            s.add_scaled(step * A31, &k1);
            s.add_scaled(step * A32, &k2);
            let k3 = (self.rhs)(b + C3 * step, &s);

            let mut s = y.clone();
            s.add_scaled(step * A41, &k1);
            s.add_scaled(step * A42, &k2);
            s.add_scaled(step * A43, &k3);
            let k4 = (self.rhs)(b + C4 * step, &s);

            let mut s = y.clone();
            s.add_scaled(step * A51, &k1);
            s.add_scaled(step * A52, &k2);
            s.add_scaled(step * A53, &k3);
            s.add_scaled(step * A54, &k4);
            let k5 = (self.rhs)(b + C5 * step, &s);

            let mut s = y.clone();
            s.add_scaled(step * A61, &k1);
            s.add_scaled(step * A62, &k2);
            s.add_scaled(step * A63, &k3);
            s.add_scaled(step * A64, &k4);
            s.add_scaled(step * A65, &k5);
            let k6 = (self.rhs)(b + step, &s);

            let mut y_new = y.clone();
            y_new.add_scaled(step * B1, &k1);
            y_new.add_scaled(step * B3, &k3);
            y_new.add_scaled(step * B4, &k4);
            y_new.add_scaled(step * B5, &k5);
            y_new.add_scaled(step * B6, &k6);
            let k7 = (self.rhs)(b + step, &y_new);
            self.stats.rhs_evaluations += 6;

            let mut err = k1.clone();
            err.add_scaled(-1.0 + E1, &k1);
            err.add_scaled(E3, &k3);
            err.add_scaled(E4, &k4);
            err.add_scaled(E5, &k5);
            err.add_scaled(E6, &k6);
            err.add_scaled(E7, &k7);
            let err_norm = S::scaled_error(&err, y, &y_new, atol / step, rtol / step);

            if !y_new.all_finite() {
                if step <= f64::MIN_POSITIVE {
                    return Err(IntegrationError::NonFinite { reached: b });
                }
                self.stats.rejected += 1;
                h = 0.5 * step;
                continue;
            }

            let factor = if err_norm == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err_norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if err_norm <= 1.0 {
                self.b = if last { target } else { b + step };
                self.y = y_new;
                k1 = k7;
                self.stats.accepted += 1;
                self.stats.error_estimates.push(err_norm);
                // A clipped final step says nothing about the natural size.
                h = if last { h.max(step * factor) } else { step * factor };
                h = h.min(max_step);
            } else {
                self.stats.rejected += 1;
                h = step * factor.min(0.5);
            }
        }
        self.fsal = Some(k1);
        self.h = Some(h);
        Ok(())
    }
}

/// Solution sampled on an output grid.
#[derive(Debug, Clone)]
pub struct Sampled<S> {
    pub grid: Vec<f64>,
    pub states: Vec<S>,
    pub stats: IntegratorStats,
}

/// Integrates from `grid[0]` and records the state at every grid point.
pub fn integrate<S, F>(rhs: F, y0: S, grid: &[f64], cfg: IntegratorConfig) -> Result<Sampled<S>, IntegrationError>
where
    S: OdeState,
    F: FnMut(f64, &S) -> S,
{
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(IntegrationError::BadGrid);
    }
    let mut stepper = Stepper::new(rhs, grid[0], y0, cfg)?;
    let mut states = Vec::with_capacity(grid.len());
    states.push(stepper.state().clone());
    for &b in &grid[1..] {
        stepper.advance_to(b)?;
        states.push(stepper.state().clone());
    }
    let (_, stats) = stepper.into_parts();
    Ok(Sampled {
        grid: grid.to_vec(),
        states,
        stats,
    })
}
