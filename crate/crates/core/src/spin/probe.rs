//! Finite-size probe of the flowed Hamiltonian `H(B)` for `H = V + εΔ`.
//!
//! For each chain length the flow runs densely from `V + εΔ` with
//! `V = Σ_j Z_j` and `Δ` a tiled local pattern on an open chain. The probe
//! records the coefficients of every string supported on the central
//! [`CENTRAL_WIDTH`] sites, their change between consecutive sizes, and the
//! total weight `Σ|c|²` at each string diameter. It reports; it does not
//! decide convergence.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dense::{dense_flow, DenseFlowOptions, MAX_DENSE_SITES};
use super::poly::PauliPolynomial;
use super::symbol::OpString;
use crate::error::{invalid, Result};
use crate::output::fmt_f64;

/// Width of the central window whose strings are tabulated.
pub const CENTRAL_WIDTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub size: usize,
    /// Window-relative string of [`CENTRAL_WIDTH`] symbols.
    pub string: String,
    pub coefficient: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub size: usize,
    pub diameter: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTable {
    pub epsilon: f64,
    pub b: f64,
    pub sizes: Vec<usize>,
    pub coefficients: Vec<CoefficientRow>,
    /// Same layout as `coefficients`, holding `c(size) − c(previous size)`.
    pub differences: Vec<CoefficientRow>,
    pub weights: Vec<WeightRow>,
}

impl ProbeTable {
    pub fn max_abs_difference(&self) -> f64 {
        self.differences.iter().map(|r| r.coefficient.norm()).fold(0.0, f64::max)
    }

    pub fn write_coefficients_csv<W: Write>(&self, w: W) -> Result<()> {
        write_coefficient_rows(w, "coefficient", &self.coefficients)
    }

    pub fn write_differences_csv<W: Write>(&self, w: W) -> Result<()> {
        write_coefficient_rows(w, "difference", &self.differences)
    }

    pub fn write_weights_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "size,diameter,weight")?;
        for r in &self.weights {
            writeln!(w, "{},{},{}", r.size, r.diameter, fmt_f64(r.weight))?;
        }
        Ok(())
    }
}

fn write_coefficient_rows<W: Write>(mut w: W, label: &str, rows: &[CoefficientRow]) -> Result<()> {
    writeln!(w, "size,string,{label}_re,{label}_im")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.size, r.string, fmt_f64(r.coefficient.re), fmt_f64(r.coefficient.im))?;
    }
    Ok(())
}

/// First site of the central window on a chain of `n` sites.
pub fn window_offset(n: usize) -> usize {
    n / 2 - CENTRAL_WIDTH / 2
}

/// Every non-identity string on the window, in packed order.
fn window_strings() -> Vec<OpString> {
    (1..1u64 << (2 * CENTRAL_WIDTH)).map(OpString).collect()
}

struct SizeResult {
    size: usize,
    central: Vec<(OpString, Complex64)>,
    weights: Vec<f64>,
}

fn probe_size(pattern: &PauliPolynomial, epsilon: f64, n: usize, b: f64, opts: &DenseFlowOptions) -> Result<SizeResult> {
    let v = PauliPolynomial::sum_z(n)?;
    let h = &v + &pattern.tiled(n)?.scaled_real(epsilon);
    let traj = dense_flow(&h, &v, &[0.0, b], opts)?;
    let hb = &traj.snapshots[1];
    let offset = window_offset(n);
    let central = window_strings()
        .into_iter()
        .map(|s| (s, hb.get(s.shifted(offset))))
        .collect();
    let mut weights = vec![0.0; n];
    for (s, c) in hb.iter() {
        if let Some(d) = s.diameter(n) {
            weights[d] += c.norm_sqr();
        }
    }
    Ok(SizeResult { size: n, central, weights })
}

/// Runs the probe on each size in `sizes` (ascending, each in
/// `CENTRAL_WIDTH..=12` and at least the pattern width).
pub fn convergence_probe(pattern: &PauliPolynomial, epsilon: f64, sizes: &[usize], b: f64, opts: &DenseFlowOptions) -> Result<ProbeTable> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("sizes must be a nonempty ascending list"));
    }
    if sizes[0] < CENTRAL_WIDTH.max(pattern.n_sites()) || *sizes.last().unwrap() > MAX_DENSE_SITES {
        return Err(invalid(format!(
            "sizes must lie in {}..={MAX_DENSE_SITES}",
            CENTRAL_WIDTH.max(pattern.n_sites())
        )));
    }
    if !(b >= 0.0) || !epsilon.is_finite() {
        return Err(invalid("B must be nonnegative and epsilon finite"));
    }
    let results = sizes
        .par_iter()
        .map(|&n| probe_size(pattern, epsilon, n, b, opts))
        .collect::<Result<Vec<_>>>()?;

    let text = |s: OpString| s.to_text(CENTRAL_WIDTH);
    let mut coefficients = Vec::new();
    let mut differences = Vec::new();
    let mut weights = Vec::new();
    let mut previous: Option<BTreeMap<OpString, Complex64>> = None;
    for r in &results {
        for &(s, c) in &r.central {
            coefficients.push(CoefficientRow { size: r.size, string: text(s), coefficient: c });
        }
        if let Some(prev) = &previous {
            for &(s, c) in &r.central {
                differences.push(CoefficientRow {
                    size: r.size,
                    string: text(s),
                    coefficient: c - prev[&s],
                });
            }
        }
        previous = Some(r.central.iter().copied().collect());
        for (d, &w) in r.weights.iter().enumerate() {
            weights.push(WeightRow { size: r.size, diameter: d, weight: w });
        }
    }
    Ok(ProbeTable {
        epsilon,
        b,
        sizes: sizes.to_vec(),
        coefficients,
        differences,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_pattern() -> PauliPolynomial {
        PauliPolynomial::from_xyz("X", Complex64::new(1.0, 0.0)).unwrap()
    }

    #[test]
    fn zero_epsilon_and_zero_b_give_no_differences() {
        let opts = DenseFlowOptions::default();
        let t = convergence_probe(&x_pattern(), 0.0, &[4, 5, 6], 1.0, &opts).unwrap();
        assert_eq!(t.max_abs_difference(), 0.0);
        let t = convergence_probe(&x_pattern(), 0.1, &[4, 5, 6], 0.0, &opts).unwrap();
        assert_eq!(t.max_abs_difference(), 0.0);
        assert_eq!(t.coefficients.len(), 3 * 255);
        assert_eq!(t.differences.len(), 2 * 255);
    }

    #[test]
    fn tables_are_complete_and_well_formed() {
        let t = convergence_probe(&x_pattern(), 0.1, &[4, 6], 0.5, &DenseFlowOptions::default()).unwrap();
        assert_eq!(t.weights.len(), 4 + 6);
        // Z on every window site stays the dominant term.
        let z = t.coefficients.iter().find(|r| r.size == 6 && r.string == "ZIII").unwrap();
        assert!((z.coefficient.re - 1.0).abs() < 0.1);
        let mut buf = Vec::new();
        t.write_coefficients_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("size,string,coefficient_re,coefficient_im\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 255);
        let mut buf = Vec::new();
        t.write_weights_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("size,diameter,weight\n"));
    }

    #[test]
    fn rejects_bad_sizes() {
        let opts = DenseFlowOptions::default();
        assert!(convergence_probe(&x_pattern(), 0.1, &[3, 4], 1.0, &opts).is_err());
        assert!(convergence_probe(&x_pattern(), 0.1, &[6, 5], 1.0, &opts).is_err());
        assert!(convergence_probe(&x_pattern(), 0.1, &[4, 13], 1.0, &opts).is_err());
    }
}
