//! The locality pseudonorm `‖m‖_r` and its certified bracket.
//!
//! `‖m‖_r` maximizes `|⟨ψ, m φ⟩|` over unit vectors whose supports are more
//! than `r` apart. The exact maximization ranges over arbitrary support sets;
//! here it is bracketed:
//!
//! * [`locality_lower`] maximizes over maximal pairs of chain intervals (arcs
//!   on a ring). Every interval pair is admissible, so this is a lower bound.
//! * [`locality_upper`] takes the operator norm of `m` with all entries at
//!   distance `≤ r` zeroed. Admissible `ψ, φ` never see those entries, so this
//!   is an upper bound.
//!
//! Real vectors can absorb a sign, so the absolute value in `|⟨ψ, m φ⟩|`
//! does not change the maximum.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, invalid, Result};
use crate::lattice::{Geometry, Lattice};
use crate::matrix::{spectral_norm, CouplingMatrix};

/// Relative slack for the monotonicity and ordering checks in
/// [`locality_profile`]; both hold exactly in exact arithmetic.
const PROFILE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityProfile {
    pub b: f64,
    pub radii: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Smallest `R` with `m[(i,j)] = 0` whenever `dist(i,j) > R`.
pub fn coupling_range(m: &CouplingMatrix, lat: &Lattice) -> Result<usize> {
    check_dims(lat.n(), m.n())?;
    Ok(raw_range(m.entries(), lat))
}

pub(crate) fn raw_range(m: &DMatrix<f64>, lat: &Lattice) -> usize {
    let n = m.nrows();
    let mut range = 0;
    for j in 0..n {
        for i in 0..n {
            if m[(i, j)] != 0.0 {
                range = range.max(lat.distance(i, j));
            }
        }
    }
    range
}

/// Copy of `m` keeping only entries at distance strictly greater than `r`.
pub fn distance_mask(m: &DMatrix<f64>, lat: &Lattice, r: f64) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if lat.distance(i, j) as f64 > r {
            m[(i, j)]
        } else {
            0.0
        }
    })
}

/// Upper estimate of `‖m‖_r` for an arbitrary square matrix.
pub fn masked_norm(m: &DMatrix<f64>, lat: &Lattice, r: f64) -> Result<f64> {
    check_dims(lat.n(), m.nrows())?;
    check_dims(lat.n(), m.ncols())?;
    check_radius(r)?;
    if r >= lat.diameter() as f64 {
        return Ok(0.0);
    }
    Ok(spectral_norm(&distance_mask(m, lat, r)))
}

pub fn locality_upper(m: &CouplingMatrix, lat: &Lattice, r: f64) -> Result<f64> {
    masked_norm(m.entries(), lat, r)
}

/// Lower estimate of `‖m‖_r` over maximal interval pairs.
///
/// On an open chain the maximal admissible pairs are the half-line splits
/// `A = [0, i]`, `B = [i + g, n)` with gap `g = ⌊r⌋ + 1`, in both orders.
/// On a ring they are an arc `A` and the complementary arc shrunk by `g` at
/// both ends. Enlarging either set can only increase the submatrix norm, so
/// non-maximal pairs are dominated.
pub fn locality_lower(m: &CouplingMatrix, lat: &Lattice, r: f64) -> Result<f64> {
    check_dims(lat.n(), m.n())?;
    check_radius(r)?;
    let n = lat.n();
    let gap = r.floor() as usize + 1;
    let e = m.entries();
    let mut best = 0.0_f64;
    match lat.geometry() {
        Geometry::ChainOpen => {
            if gap >= n {
                return Ok(0.0);
            }
            for last_a in 0..n - gap {
                let rows: Vec<usize> = (0..=last_a).collect();
                let cols: Vec<usize> = (last_a + gap..n).collect();
                best = best.max(block_norm(e, &rows, &cols)).max(block_norm(e, &cols, &rows));
            }
        }
        Geometry::ChainPeriodic => {
            // Arc A = [s, s+len), arc B = [s+len-1+gap, s-gap] (mod n).
            if n < 2 * gap + 1 {
                return Ok(0.0);
            }
            let max_len = n - 2 * gap;
            for s in 0..n {
                for len in 1..=max_len {
                    let b_len = n + 1 - len - 2 * gap;
                    let rows: Vec<usize> = (0..len).map(|k| (s + k) % n).collect();
                    let cols: Vec<usize> = (0..b_len).map(|k| (s + len - 1 + gap + k) % n).collect();
                    best = best.max(block_norm(e, &rows, &cols));
                }
            }
        }
    }
    Ok(best)
}

fn block_norm(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])]);
    if sub.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    spectral_norm(&sub)
}

fn check_radius(r: f64) -> Result<()> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(invalid(format!("radius must be a finite nonnegative number, got {r}")));
    }
    Ok(())
}

/// Bracket `[lower, upper]` of `‖m‖_r` on an ascending list of radii.
///
/// Both estimators are non-increasing in `r` and ordered; violations within
/// rounding are clamped, anything larger is reported as an error.
pub fn locality_profile(m: &CouplingMatrix, lat: &Lattice, radii: &[f64], b: f64) -> Result<LocalityProfile> {
    if radii.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("radii must be sorted ascending"));
    }
    let norm = crate::matrix::operator_norm(m);
    let slack = PROFILE_SLACK * norm.max(f64::MIN_POSITIVE);
    let mut lower = Vec::with_capacity(radii.len());
    let mut upper = Vec::with_capacity(radii.len());
    for &r in radii {
        let lo = locality_lower(m, lat, r)?;
        let up = locality_upper(m, lat, r)?;
        if lo > up + slack || up > norm + slack {
            return Err(invalid(format!(
                "estimator ordering violated at r = {r}: lower {lo:e}, upper {up:e}, norm {norm:e}"
            )));
        }
        lower.push(lo.min(up));
        upper.push(up.min(norm));
    }
    clamp_monotone(&mut lower, slack)?;
    clamp_monotone(&mut upper, slack)?;
    Ok(LocalityProfile {
        b,
        radii: radii.to_vec(),
        lower,
        upper,
    })
}

fn clamp_monotone(values: &mut [f64], slack: f64) -> Result<()> {
    for k in 1..values.len() {
        if values[k] > values[k - 1] + slack {
            return Err(invalid(format!(
                "locality estimate increased from {:e} to {:e}",
                values[k - 1],
                values[k]
            )));
        }
        values[k] = values[k].min(values[k - 1]);
    }
    Ok(())
}
