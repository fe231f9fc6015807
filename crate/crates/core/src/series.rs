//! Divergence models for the perturbative expansion of the flow.
//!
//! * `J_k(B) = (J²|B|)^k ((k−1)!)² / k!` solves `J_{k+1}(B) = ∫₀ᴮ J² k² J_k`
//!   for `k ≥ 1`; its ratios grow linearly in `k`, so the series has zero
//!   radius of convergence.
//! * `δ̃_k(B) = (εqJ²B)^k / k` solves `∂_B δ̃_{k+1} = εkqJ² δ̃_k`, the charge-`q`
//!   cascade with its damping `e^{−4q²B}` removed; its radius is
//!   `B_q = 1/(εqJ²)`.
//!
//! Both recursions carry a factor that vanishes on the `k = 0 → 1` step, so
//! `k = 1` is seeded from the closed form. [`Convention::MaxKOneSquared`]
//! replaces `k²` by `max(k, 1)²` and runs from `J_0 = 1` unseeded; the two
//! agree because `J_1 = J²|B|` either way.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ode::{IntegratorConfig, IntegratorStats, Stepper};
use crate::output::fmt_f64;

/// Integrator for [`delta_recursive`]. The state starts at zero and its
/// components span many decades, so the absolute floor must sit far below
/// any coefficient of interest.
pub const CASCADE_INTEGRATOR: IntegratorConfig = IntegratorConfig::adaptive_with(1e-12, 1e-40);

/// Minimum number of nonzero coefficients for [`radius_estimate`].
pub const MIN_RATIO_TERMS: usize = 10;

/// Kahan-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

pub fn jk_closed_form(j: f64, b: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(invalid("the closed form is defined for k ≥ 1 (J_0 = 1 by convention)"));
    }
    let x = j * j * b.abs();
    // x^k (k−1)! / k, accumulated factor by factor.
    let v = (1..k).fold(x, |acc, i| acc * x * i as f64);
    Ok(v / k as f64)
}

fn ln(x: f64) -> f64 {
    x.ln()
}

/// `ln J_k(B)` via compensated log sums; finite far beyond `f64` range.
pub fn jk_closed_form_ln(j: f64, b: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(invalid("the closed form is defined for k ≥ 1"));
    }
    let lx = ln(j * j * b.abs());
    let mut s = Compensated::default();
    for i in 1..k {
        s.add(ln(i as f64));
    }
    s.add(k as f64 * lx);
    s.add(-ln(k as f64));
    Ok(s.sum)
}

pub fn delta_tilde_closed_form(epsilon: f64, q: f64, j: f64, b: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(invalid("the closed form is defined for k ≥ 1"));
    }
    Ok((epsilon * q * j * j * b).powi(k as i32) / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// Factor `k²`; the vanishing `k = 0 → 1` step is seeded from the closed form.
    KSquared,
    /// Factor `max(k, 1)²`, unseeded from `J_0 = 1`.
    MaxKOneSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesKind {
    JkClosed,
    JkRecursive,
    DeltaTildeClosed,
    DeltaTildeRecursive,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesParams {
    #[serde(rename = "J", skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convention: Option<Convention>,
}

/// Coefficients `c_k` for `k = k_start, k_start + 1, …`.
///
/// When any value leaves the `f64` range the whole table switches to log
/// mode and stores `ln |c_k|` instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTable {
    pub kind: SeriesKind,
    pub params: SeriesParams,
    pub k_start: usize,
    pub log_space: bool,
    pub values: Vec<f64>,
}

impl SeriesTable {
    /// Picks linear mode if every linear value is finite, log mode otherwise.
    fn build(kind: SeriesKind, params: SeriesParams, k_start: usize, linear: Vec<f64>, logs: Vec<f64>) -> Self {
        let log_space = linear.iter().any(|v| !v.is_finite());
        Self {
            kind,
            params,
            k_start,
            log_space,
            values: if log_space { logs } else { linear },
        }
    }

    /// Table of explicit coefficients, e.g. for testing the ratio test.
    pub fn custom(k_start: usize, values: Vec<f64>) -> Self {
        Self {
            kind: SeriesKind::Custom,
            params: SeriesParams::default(),
            k_start,
            log_space: false,
            values,
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_start + self.values.len().saturating_sub(1)
    }

    /// Coefficient `c_k`, or `None` outside the table or in log mode.
    pub fn value(&self, k: usize) -> Option<f64> {
        if self.log_space || k < self.k_start {
            return None;
        }
        self.values.get(k - self.k_start).copied()
    }

    /// `ln |c_k|` in either mode.
    pub fn ln_abs(&self, k: usize) -> Option<f64> {
        let v = *self.values.get(k.checked_sub(self.k_start)?)?;
        Some(if self.log_space { v } else { v.abs().ln() })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mode = if self.log_space { "log" } else { "linear" };
        writeln!(w, "# series={} mode={mode}", serde_json::to_string(&self.kind)?.trim_matches('"'))?;
        writeln!(w, "k,{}", if self.log_space { "log_coefficient" } else { "coefficient" })?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.k_start + i, fmt_f64(*v))?;
        }
        Ok(())
    }

    pub fn params_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "params": self.params,
            "k_start": self.k_start,
            "k_max": self.k_max(),
            "log_space": self.log_space,
        })
    }
}

/// Closed-form `J_k(B)` for `k = 1..=k_max`.
pub fn jk_closed_table(j: f64, b: f64, k_max: usize) -> Result<SeriesTable> {
    if k_max == 0 {
        return Err(invalid("k_max must be at least 1"));
    }
    let linear = (1..=k_max).map(|k| jk_closed_form(j, b, k)).collect::<Result<Vec<_>>>()?;
    let logs = (1..=k_max).map(|k| jk_closed_form_ln(j, b, k)).collect::<Result<Vec<_>>>()?;
    let params = SeriesParams {
        j: Some(j),
        b: Some(b),
        ..Default::default()
    };
    Ok(SeriesTable::build(SeriesKind::JkClosed, params, 1, linear, logs))
}

/// `J_k(B)` for `k = 0..=k_max` from `J_{k+1}(B) = ∫₀ᴮ J² f(k) J_k |dB′|`.
///
/// Each `J_k` is a monomial `a_k |B|^k`, so the integral is exact:
/// `J_{k+1} = J² f(k) |B| J_k / (k + 1)`.
pub fn jk_recursive(j: f64, b: f64, k_max: usize, convention: Convention) -> Result<SeriesTable> {
    if k_max == 0 {
        return Err(invalid("k_max must be at least 1"));
    }
    let x = j * j * b.abs();
    let factor = |k: usize| -> f64 {
        let f = match convention {
            Convention::KSquared => k as f64,
            Convention::MaxKOneSquared => k.max(1) as f64,
        };
        f * f
    };
    let mut linear = vec![1.0];
    let mut logs = vec![0.0];
    let mut log_acc = Compensated::default();
    for k in 0..k_max {
        let (lin, lg) = if k == 0 && convention == Convention::KSquared {
            // The k² factor vanishes here; seed J_1 from the closed form.
            (jk_closed_form(j, b, 1)?, jk_closed_form_ln(j, b, 1)?)
        } else {
            let step = x * factor(k) / (k + 1) as f64;
            (linear[k] * step, {
                log_acc.sum = logs[k];
                log_acc.add(step.ln());
                log_acc.sum
            })
        };
        linear.push(lin);
        logs.push(lg);
    }
    let params = SeriesParams {
        j: Some(j),
        b: Some(b),
        convention: Some(convention),
        ..Default::default()
    };
    Ok(SeriesTable::build(SeriesKind::JkRecursive, params, 0, linear, logs))
}

/// Closed-form `δ̃_k(B)` for `k = 1..=k_max`.
pub fn delta_tilde_closed_table(epsilon: f64, q: f64, j: f64, b: f64, k_max: usize) -> Result<SeriesTable> {
    if k_max == 0 {
        return Err(invalid("k_max must be at least 1"));
    }
    let linear = (1..=k_max)
        .map(|k| delta_tilde_closed_form(epsilon, q, j, b, k))
        .collect::<Result<Vec<_>>>()?;
    let lx = (epsilon * q * j * j * b).abs().ln();
    let logs = (1..=k_max).map(|k| k as f64 * lx - (k as f64).ln()).collect();
    let params = SeriesParams {
        j: Some(j),
        epsilon: Some(epsilon),
        q: Some(q),
        b: Some(b),
        convention: None,
    };
    Ok(SeriesTable::build(SeriesKind::DeltaTildeClosed, params, 1, linear, logs))
}

/// `δ = e^{−4q²B} δ̃`.
pub fn damp(delta_tilde: f64, q: f64, b: f64) -> f64 {
    delta_tilde * (-4.0 * q * q * b).exp()
}

/// Inverse of [`damp`], dividing by the same factor.
pub fn undamp(delta: f64, q: f64, b: f64) -> f64 {
    delta / (-4.0 * q * q * b).exp()
}

/// Numerically integrated charge-`q` cascade on a grid of `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCascade {
    pub epsilon: f64,
    pub q: f64,
    pub j: f64,
    pub k_max: usize,
    #[serde(rename = "B_grid")]
    pub b_grid: Vec<f64>,
    /// `δ̃_k(B_i)` for `k = 1..=k_max`, one row per grid point.
    pub delta_tilde: Vec<Vec<f64>>,
    /// `δ_k(B_i) = e^{−4q²B_i} δ̃_k(B_i)`.
    pub delta: Vec<Vec<f64>>,
    pub integrator: IntegratorStats,
}

impl DeltaCascade {
    /// `δ̃_k` at grid point `i` as a series table.
    pub fn table(&self, i: usize) -> Option<SeriesTable> {
        let row = self.delta_tilde.get(i)?;
        let params = SeriesParams {
            j: Some(self.j),
            epsilon: Some(self.epsilon),
            q: Some(self.q),
            b: Some(self.b_grid[i]),
            convention: Some(Convention::KSquared),
        };
        let logs = row.iter().map(|v| v.abs().ln()).collect();
        Some(SeriesTable::build(SeriesKind::DeltaTildeRecursive, params, 1, row.clone(), logs))
    }
}

/// Integrates `∂_B δ̃_{k+1} = εkqJ² δ̃_k` from `δ̃_k(0) = 0`, with the
/// vanishing first step seeded as `∂_B δ̃_1 = εqJ²`, then applies the damping.
pub fn delta_recursive(epsilon: f64, q: f64, j: f64, b_grid: &[f64], k_max: usize, cfg: &IntegratorConfig) -> Result<DeltaCascade> {
    if k_max == 0 {
        return Err(invalid("k_max must be at least 1"));
    }
    if b_grid.is_empty() || b_grid.iter().any(|b| !(*b >= 0.0)) || b_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("B grid must be ascending and nonnegative"));
    }
    let g = epsilon * q * j * j;
    let rhs = move |_: f64, y: &Vec<f64>| {
        let mut d = Vec::with_capacity(y.len());
        d.push(g);
        d.extend((1..y.len()).map(|k| k as f64 * g * y[k - 1]));
        d
    };
    let mut stepper = Stepper::new(rhs, 0.0, vec![0.0; k_max], *cfg)?;
    let mut delta_tilde = Vec::with_capacity(b_grid.len());
    for &b in b_grid {
        stepper.advance_to(b).map_err(|e| match e {
            crate::ode::IntegrationError::NonFinite { .. } => Error::Overflow { k_reached: k_max },
            other => other.into(),
        })?;
        let y = stepper.state();
        if let Some(k) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Overflow { k_reached: k + 1 });
        }
        delta_tilde.push(y.clone());
    }
    let delta = delta_tilde
        .iter()
        .zip(b_grid)
        .map(|(row, &b)| row.iter().map(|&v| damp(v, q, b)).collect())
        .collect();
    let (_, integrator) = stepper.into_parts();
    Ok(DeltaCascade {
        epsilon,
        q,
        j,
        k_max,
        b_grid: b_grid.to_vec(),
        delta_tilde,
        delta,
        integrator,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    /// Radius in `B`; `f64::INFINITY` for entire series.
    pub radius: f64,
    /// `|c_k / c_{k+1}|` in the variable the table was tabulated in.
    pub ratios: Vec<f64>,
    /// Richardson values `(k+1)ρ_{k+1} − kρ_k` over the last quartile.
    pub extrapolated: Vec<f64>,
    /// Ratios decrease toward zero (divergent series).
    pub ratios_vanish: bool,
}

/// Ratio-test radius of `Σ_k c_k B^k`.
///
/// A table tabulated at `B` holds `c_k B^k`; its ratio limit is rescaled
/// by `|B|`. Richardson extrapolation `(k+1)ρ_{k+1} − kρ_k` removes the
/// `1/k` correction, so `c_k = x₀^{−k}/k` gives `x₀` exactly.
pub fn radius_estimate(table: &SeriesTable) -> Result<RadiusEstimate> {
    let entries: Vec<(usize, f64)> = (0..table.values.len())
        .map(|i| (table.k_start + i, table.ln_abs(table.k_start + i).unwrap()))
        .filter(|(_, l)| l.is_finite())
        .collect();
    if entries.len() < MIN_RATIO_TERMS {
        return Err(Error::TooFewCoefficients {
            found: entries.len(),
            needed: MIN_RATIO_TERMS,
        });
    }
    let consecutive = entries.windows(2).all(|w| w[1].0 == w[0].0 + 1);
    if !consecutive {
        return Err(invalid("ratio test needs consecutive nonzero coefficients"));
    }
    let ratios: Vec<f64> = entries.windows(2).map(|w| (w[0].1 - w[1].1).exp()).collect();
    let ks: Vec<f64> = entries.iter().map(|e| e.0 as f64).collect();
    let start = (3 * ratios.len() / 4).min(ratios.len() - 2);
    let extrapolated: Vec<f64> = (start..ratios.len() - 1)
        .map(|i| (ks[i] + 1.0) * ratios[i + 1] - ks[i] * ratios[i])
        .collect();
    let mean = extrapolated.iter().sum::<f64>() / extrapolated.len() as f64;
    let scale = table.params.b.map(f64::abs).unwrap_or(1.0);
    let tail = &ratios[start..];
    let ratios_vanish = tail.windows(2).all(|w| w[1] < w[0]) && tail[tail.len() - 1] < 0.5 * tail[0] || mean <= 0.0;
    let growth = extrapolated[extrapolated.len() - 1] - extrapolated[0];
    let radius = if ratios_vanish {
        0.0
    } else if mean > 0.0 && growth > 0.1 * mean {
        f64::INFINITY
    } else {
        mean.max(0.0) * scale
    };
    Ok(RadiusEstimate {
        radius,
        ratios,
        extrapolated,
        ratios_vanish,
    })
}
