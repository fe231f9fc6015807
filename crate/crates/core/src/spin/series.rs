//! Taylor expansion of the flow in `B`.
//!
//! Writing `H(B) = Σ_k H_k(B)` with `H_0 = H` and matching orders in
//! `∂_B H = [[V,H],H]` gives the triangular recursion
//!
//! ```text
//! ∂_B H_{k+1} = Σ_{l=0}^{k} [[V, H_{k−l}], H_l].
//! ```
//!
//! Every `H_k` is homogeneous of degree `k` in `B`, `H_k(B) = C_k B^k`, so
//! the recursion integrates exactly to
//! `C_{k+1} = (1/(k+1)) Σ_l [[V, C_{k−l}], C_l]`.

use num_complex::Complex64;

use super::poly::PauliPolynomial;
use crate::error::{check_dims, Error, Result};

/// Default cap on the total number of stored strings across all orders.
pub const STRING_BUDGET: usize = 1_000_000;

/// Coefficients `C_0, …, C_{k_max}` with `H_k(B) = C_k B^k`.
pub fn power_series_coefficients(h: &PauliPolynomial, v: &PauliPolynomial, k_max: usize, budget: usize) -> Result<Vec<PauliPolynomial>> {
    check_dims(h.n_sites(), v.n_sites())?;
    let mut c = vec![h.clone()];
    // [V, C_i], reused across orders.
    let mut vc = vec![v.commutator(h)];
    let mut stored = h.len();
    for k in 0..k_max {
        let mut next = PauliPolynomial::zero(h.n_sites())?;
        for l in 0..=k {
            next = &next + &vc[k - l].commutator(&c[l]);
        }
        let next = next.scaled(Complex64::new(1.0 / (k + 1) as f64, 0.0));
        stored += next.len();
        if stored > budget {
            return Err(Error::StringBudget { budget, k_reached: k });
        }
        vc.push(v.commutator(&next));
        c.push(next);
    }
    Ok(c)
}

/// `H_k(B)` for `k = 0..=k_max`.
pub fn power_series_terms(h: &PauliPolynomial, v: &PauliPolynomial, k_max: usize, b: f64) -> Result<Vec<PauliPolynomial>> {
    Ok(power_series_coefficients(h, v, k_max, STRING_BUDGET)?
        .iter()
        .enumerate()
        .map(|(k, c)| c.scaled_real(b.powi(k as i32)))
        .collect())
}

/// Running sums `Σ_{k≤K} H_k` for `K = 0..terms.len()`.
pub fn partial_sums(terms: &[PauliPolynomial]) -> Vec<PauliPolynomial> {
    let mut out: Vec<PauliPolynomial> = Vec::with_capacity(terms.len());
    for t in terms {
        let next = match out.last() {
            Some(prev) => prev + t,
            None => t.clone(),
        };
        out.push(next);
    }
    out
}
