//! Free-fermion double bracket flow `∂_B h = 4[[v,h],h]` on single-particle
//! matrices, with invariant monitoring and the exponential light-cone check.
//!
//! The flow is a similarity evolution `h(B) = O(B) h O(B)ᵀ`, so the spectrum
//! and every unitarily invariant norm are conserved. Locality is not: with
//! `R_0 = R`, `R_{k+1} = 2R_k + R` and `J = max(‖h‖, ‖v‖)`,
//!
//! ```text
//! ‖h(B)‖_{R_k} ≤ J (8J²B)^k / k!  ≤  J (8eJ²B / k)^k
//! ```
//!
//! and `R_k = (2^{k+1} − 1) R`, so the light cone widens exponentially in `B`.
//! [`verify_lemma1`] checks the middle expression against the certified
//! upper estimate of `‖h(B)‖_{R_k}`.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, invalid, Error, Result};
use crate::lattice::Lattice;
use crate::locality::{coupling_range, locality_upper};
use crate::matrix::{double_bracket_raw, operator_norm, spectrum, CouplingMatrix, Symmetry};
use crate::ode::{IntegratorConfig, IntegratorStats, Stepper};
use crate::output::fmt_f64;

/// Prefactor of the single-particle flow.
pub const FLOW_SCALE: f64 = 4.0;

/// Default relative tolerance for norm and spectrum conservation. A drift
/// beyond ten times this aborts the integration.
pub const INVARIANT_TOL: f64 = 1e-6;

/// Slack added to the light-cone bound before declaring a violation.
pub const LIGHTCONE_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowDiagnostics {
    pub integrator: IntegratorStats,
    /// `|‖h(B)‖ − ‖h(0)‖| / ‖h(0)‖` per grid point.
    pub norm_drift: Vec<f64>,
    /// Largest sorted-eigenvalue deviation, relative to `‖h(0)‖`.
    pub spectrum_drift: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    #[serde(rename = "B_grid")]
    pub b_grid: Vec<f64>,
    pub snapshots: Vec<CouplingMatrix>,
    pub diagnostics: FlowDiagnostics,
}

impl FlowTrajectory {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn last(&self) -> &CouplingMatrix {
        self.snapshots.last().expect("trajectories are never empty")
    }
}

/// Integrates `∂_B h = 4[[v,h],h]` and records `h` on `b_grid`.
pub fn integrate_flow(h0: &CouplingMatrix, v: &CouplingMatrix, b_grid: &[f64], cfg: &IntegratorConfig) -> Result<FlowTrajectory> {
    integrate_flow_with(h0, v, b_grid, cfg, INVARIANT_TOL)
}

/// As [`integrate_flow`] with an explicit invariant tolerance.
pub fn integrate_flow_with(
    h0: &CouplingMatrix,
    v: &CouplingMatrix,
    b_grid: &[f64],
    cfg: &IntegratorConfig,
    invariant_tol: f64,
) -> Result<FlowTrajectory> {
    check_dims(h0.n(), v.n())?;
    if h0.symmetry() != v.symmetry() {
        return Err(invalid("h and v must share a symmetry class"));
    }
    if b_grid.first() != Some(&0.0) || b_grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(invalid("B grid must be ascending and start at 0"));
    }
    let symmetry = h0.symmetry();
    let v_entries = v.entries().clone();
    let rhs = move |_: f64, h: &DMatrix<f64>| double_bracket_raw(&v_entries, h, symmetry, symmetry, FLOW_SCALE);
    let mut stepper = Stepper::new(rhs, 0.0, h0.entries().clone(), *cfg)?;

    let norm0 = operator_norm(h0);
    let spec0 = spectrum(h0);
    let scale = norm0.max(f64::MIN_POSITIVE);
    let limit = 10.0 * invariant_tol;

    let mut snapshots = Vec::with_capacity(b_grid.len());
    let mut norm_drift = Vec::with_capacity(b_grid.len());
    let mut spectrum_drift = Vec::with_capacity(b_grid.len());
    for &b in b_grid {
        stepper.advance_to(b)?;
        let h = CouplingMatrix::from_projected(stepper.state(), symmetry)?;
        let nd = (operator_norm(&h) - norm0).abs() / scale;
        let sd = spectrum(&h)
            .iter()
            .zip(&spec0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale;
        for (what, drift) in [("operator norm", nd), ("spectrum", sd)] {
            if drift > limit {
                return Err(Error::InvariantBreach { b, what, drift, limit });
            }
        }
        norm_drift.push(nd);
        spectrum_drift.push(sd);
        snapshots.push(h);
    }
    let (_, integrator) = stepper.into_parts();
    Ok(FlowTrajectory {
        b_grid: b_grid.to_vec(),
        snapshots,
        diagnostics: FlowDiagnostics {
            integrator,
            norm_drift,
            spectrum_drift,
        },
    })
}

/// Squared Frobenius distance `‖h − v‖_F²`.
pub fn flow_potential(h: &CouplingMatrix, v: &CouplingMatrix) -> Result<f64> {
    check_dims(h.n(), v.n())?;
    Ok((h.entries() - v.entries()).norm_squared())
}

/// Exact derivative of [`flow_potential`] along the flow:
/// `−8 s ‖[v,h]‖_F²` with `s = +1` for symmetric and `−1` for antisymmetric
/// matrices. The potential therefore decreases for symmetric pairs and
/// increases for antisymmetric ones.
pub fn flow_potential_rate(h: &CouplingMatrix, v: &CouplingMatrix) -> Result<f64> {
    check_dims(h.n(), v.n())?;
    if h.symmetry() != v.symmetry() {
        return Err(invalid("h and v must share a symmetry class"));
    }
    let (he, ve) = (h.entries(), v.entries());
    let c = ve * he - he * ve;
    Ok(-8.0 * h.symmetry().sign() * c.norm_squared())
}

/// Taylor terms `(2τh)^m / m!` of `exp(2τh)` for `m = 0..=m_max`.
pub fn imaginary_time_terms(h: &CouplingMatrix, tau: f64, m_max: usize) -> Result<Vec<DMatrix<f64>>> {
    if h.symmetry() != Symmetry::Antisymmetric {
        return Err(invalid("imaginary-time series expects an antisymmetric h"));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(invalid("tau must be finite and nonnegative"));
    }
    if m_max == 0 {
        return Err(invalid("m_max must be at least 1"));
    }
    let n = h.n();
    let step = h.entries() * (2.0 * tau);
    let mut terms = Vec::with_capacity(m_max + 1);
    let mut term = DMatrix::<f64>::identity(n, n);
    terms.push(term.clone());
    for m in 1..=m_max {
        term = (&term * &step) / m as f64;
        terms.push(term.clone());
    }
    Ok(terms)
}

/// Operator norms of [`imaginary_time_terms`]. Each is at most
/// `(2τ‖h‖)^m / m!`, with equality for normal `h`.
pub fn imaginary_time_term_norms(h: &CouplingMatrix, tau: f64, m_max: usize) -> Result<Vec<f64>> {
    Ok(imaginary_time_terms(h, tau, m_max)?
        .iter()
        .map(crate::matrix::spectral_norm)
        .collect())
}

/// `x^m / m!`, accumulated as a product so it stays finite for large `m`.
pub fn power_over_factorial(x: f64, m: usize) -> f64 {
    (1..=m).fold(1.0, |acc, i| acc * x / i as f64)
}

/// Light-cone scales `R_0 = R`, `R_{k+1} = 2R_k + R` for `k = 0..=k_max`.
pub fn lightcone_scales(range: usize, k_max: usize) -> Vec<usize> {
    std::iter::successors(Some(range), |&r| r.checked_mul(2)?.checked_add(range))
        .take(k_max + 1)
        .collect()
}

/// `J (8J²B)^k / k!`
pub fn lightcone_bound(j: f64, b: f64, k: usize) -> f64 {
    j * power_over_factorial(8.0 * j * j * b, k)
}

/// `J (8eJ²B / k)^k`, the Stirling relaxation of [`lightcone_bound`].
pub fn lightcone_bound_stirling(j: f64, b: f64, k: usize) -> f64 {
    if k == 0 {
        return j;
    }
    j * (8.0 * std::f64::consts::E * j * j * b / k as f64).powi(k as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightconeRow {
    pub k: usize,
    pub r_k: usize,
    pub b: f64,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightconeReport {
    pub range: usize,
    pub j: f64,
    pub scales: Vec<usize>,
    /// `R_k = (2^{k+1} − 1) R` holds for every scale.
    pub scales_closed_form: bool,
    pub rows: Vec<LightconeRow>,
    pub integrator: IntegratorStats,
}

impl LightconeReport {
    pub fn passed(&self) -> bool {
        self.scales_closed_form && self.rows.iter().all(|r| r.pass)
    }

    /// Largest `measured − bound` over all rows.
    pub fn worst_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.measured - r.bound).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,R_k,B,measured,bound,pass")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{},{}", r.k, r.r_k, fmt_f64(r.b), fmt_f64(r.measured), fmt_f64(r.bound), r.pass)?;
        }
        Ok(())
    }
}

/// Integrates the flow through `b_list` and compares the upper estimate of
/// `‖h(B)‖_{R_k}` with `J (8J²B)^k / k!` for `k = 0..=k_max`.
///
/// Violations mark the report as failed; only integration failures and
/// invalid inputs are errors.
pub fn verify_lemma1(
    h0: &CouplingMatrix,
    v: &CouplingMatrix,
    lat: &Lattice,
    b_list: &[f64],
    k_max: usize,
    cfg: &IntegratorConfig,
) -> Result<LightconeReport> {
    let range = coupling_range(h0, lat)?.max(coupling_range(v, lat)?);
    if range == 0 {
        return Err(invalid("inputs have zero range; the light cone is trivial"));
    }
    let j = operator_norm(h0).max(operator_norm(v));
    let scales = lightcone_scales(range, k_max);
    if scales.len() <= k_max || scales[k_max] >= lat.diameter() {
        return Err(invalid(format!(
            "R_{k_max} = {:?} must stay below the lattice diameter {}",
            scales.get(k_max),
            lat.diameter()
        )));
    }
    let scales_closed_form = scales
        .iter()
        .enumerate()
        .all(|(k, &r)| r == ((1usize << (k + 1)) - 1) * range);

    let mut grid: Vec<f64> = b_list.to_vec();
    if grid.iter().any(|b| !(*b >= 0.0)) {
        return Err(invalid("B values must be nonnegative"));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.first() != Some(&0.0) {
        grid.insert(0, 0.0);
    }
    let traj = integrate_flow(h0, v, &grid, cfg)?;

    let mut rows = Vec::new();
    for &b in b_list {
        let idx = grid.iter().position(|&g| g == b).expect("grid contains every requested B");
        let h = &traj.snapshots[idx];
        for (k, &r_k) in scales.iter().enumerate() {
            let measured = locality_upper(h, lat, r_k as f64)?;
            let bound = lightcone_bound(j, b, k);
            rows.push(LightconeRow {
                k,
                r_k,
                b,
                measured,
                bound,
                pass: measured <= bound + LIGHTCONE_SLACK,
            });
        }
    }
    Ok(LightconeReport {
        range,
        j,
        scales,
        scales_closed_form,
        rows,
        integrator: traj.diagnostics.integrator,
    })
}

/// Largest `k` with `R_k < limit`.
pub fn max_scale_index(range: usize, limit: usize) -> Option<usize> {
    lightcone_scales(range, 64)
        .iter()
        .take_while(|&&r| r < limit)
        .count()
        .checked_sub(1)
}
