//! Charge grading of operator polynomials.
//!
//! A string has charge `q = #a − #a†`. With `V = Σ_j Z_j`, `[Z, a] = 2a`
//! and `[Z, a†] = −2a†` give `[V, s] = 2q s` for every string, hence
//! `[[V, O], V] = −4q² O` for any `O` of pure charge `q`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::PauliPolynomial;
use super::symbol::Symbol;
use crate::error::{check_dims, invalid, Error, Result};

/// Residual allowed by [`eigenoperator_check`], relative to the size of `O`.
pub const EIGEN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeDecomposition {
    pub components: BTreeMap<i32, PauliPolynomial>,
}

impl ChargeDecomposition {
    pub fn recombine(&self, n_sites: usize) -> Result<PauliPolynomial> {
        self.components
            .values()
            .try_fold(PauliPolynomial::zero(n_sites)?, |acc, p| Ok(&acc + p))
    }

    pub fn charges(&self) -> Vec<i32> {
        self.components.keys().copied().collect()
    }
}

pub fn charge_decompose(p: &PauliPolynomial) -> Result<ChargeDecomposition> {
    let n = p.n_sites();
    let mut components: BTreeMap<i32, PauliPolynomial> = BTreeMap::new();
    for (s, c) in p.iter() {
        let q = s.charge(n);
        match components.get_mut(&q) {
            Some(comp) => comp.add_term(s, c),
            None => {
                let mut comp = PauliPolynomial::zero(n)?;
                comp.add_term(s, c);
                components.insert(q, comp);
            }
        }
    }
    Ok(ChargeDecomposition { components })
}

/// Charge of a polynomial whose strings all share one charge.
pub fn homogeneous_charge(p: &PauliPolynomial) -> Option<i32> {
    let n = p.n_sites();
    let mut charges = p.iter().map(|(s, _)| s.charge(n));
    let q = charges.next()?;
    charges.all(|c| c == q).then_some(q)
}

/// `λ` with `[[V, O], V] = λ O`, computed in the string algebra.
///
/// `V` must be diagonal (only `I` and `Z` symbols) and `O` of pure charge.
/// For `V = Σ_j Z_j` the result is `−4q²`.
pub fn eigenoperator_check(v: &PauliPolynomial, o: &PauliPolynomial) -> Result<f64> {
    check_dims(v.n_sites(), o.n_sites())?;
    let n = v.n_sites();
    if v.iter().any(|(s, _)| s.symbols(n).iter().any(|&x| x == Symbol::A || x == Symbol::Ad)) {
        return Err(invalid("V must contain only I and Z symbols"));
    }
    if o.is_empty() {
        return Err(invalid("O must be nonzero"));
    }
    if homogeneous_charge(o).is_none() {
        return Err(invalid("O must have a single charge"));
    }
    let w = v.commutator(o).commutator(v);
    // Least-squares λ = ⟨O, W⟩ / ⟨O, O⟩ over coefficients.
    let num: Complex64 = o.iter().map(|(s, c)| c.conj() * w.get(s)).sum();
    let lambda = num / o.coefficient_norm_sq();
    let residual = (&w - &o.scaled(lambda)).max_abs() / o.max_abs();
    if residual > EIGEN_TOL || lambda.im.abs() > EIGEN_TOL * lambda.re.abs().max(1.0) {
        return Err(Error::NotEigenoperator { residual });
    }
    Ok(lambda.re)
}

/// Exact solution of the linearized flow `∂_B Δ = [[V, Δ], V]` for
/// `V = J Σ_j Z_j`: each charge sector decays as `e^{−4q²J²B}`.
pub fn linearized_solution(delta: &PauliPolynomial, j: f64, b: f64) -> Result<PauliPolynomial> {
    let dec = charge_decompose(delta)?;
    let mut out = PauliPolynomial::zero(delta.n_sites())?;
    for (q, comp) in &dec.components {
        let rate = 4.0 * f64::from(q * q) * j * j;
        out = &out + &comp.scaled_real((-rate * b).exp());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::instance_rng;
    use crate::spin::symbol::OpString;
    use rand::Rng;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn eigenvalue_examples() {
        let v = PauliPolynomial::sum_z(4).unwrap();
        let check = |text: &str| eigenoperator_check(&v, &PauliPolynomial::term(text, one()).unwrap()).unwrap();
        assert_eq!(check("++II"), -16.0);
        assert_eq!(check("ZIZI"), 0.0);
        assert_eq!(check("+III"), -4.0);
        assert_eq!(check("+-+Z"), -4.0);
        assert_eq!(check("----"), -64.0);
    }

    #[test]
    fn mixed_charge_is_rejected() {
        let v = PauliPolynomial::sum_z(2).unwrap();
        let o = PauliPolynomial::from_texts([("+I", one()), ("I-", one())]).unwrap();
        assert!(eigenoperator_check(&v, &o).is_err());
        let x = PauliPolynomial::from_xyz("XI", one()).unwrap();
        assert!(eigenoperator_check(&x, &PauliPolynomial::term("+I", one()).unwrap()).is_err());
    }

    #[test]
    fn non_uniform_v_is_not_an_eigen_map() {
        // With V = Z₀ + 2Z₁ the two terms of O = a₀ + a₁ decay at rates 4 and 16.
        let v = PauliPolynomial::from_texts([("ZI", one()), ("IZ", Complex64::new(2.0, 0.0))]).unwrap();
        let o = PauliPolynomial::from_texts([("+I", one()), ("I+", one())]).unwrap();
        assert!(matches!(eigenoperator_check(&v, &o), Err(Error::NotEigenoperator { .. })));
    }

    #[test]
    fn decomposition_examples() {
        let single = PauliPolynomial::term("+I", one()).unwrap();
        assert_eq!(charge_decompose(&single).unwrap().charges(), vec![1]);
        let v = PauliPolynomial::sum_z(5).unwrap();
        assert_eq!(charge_decompose(&v).unwrap().charges(), vec![0]);
    }

    #[test]
    fn decomposition_recombines_exactly() {
        let mut rng = instance_rng(31);
        for _ in 0..20 {
            let mut p = PauliPolynomial::zero(3).unwrap();
            for _ in 0..15 {
                p.add_term(OpString(rng.gen_range(0..64)), Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
            let dec = charge_decompose(&p).unwrap();
            assert_eq!(dec.recombine(3).unwrap(), p);
            for (q, comp) in &dec.components {
                assert_eq!(homogeneous_charge(comp), Some(*q));
            }
        }
    }

    #[test]
    fn linearized_solution_decays_by_sector() {
        let d = PauliPolynomial::from_texts([("+I", one()), ("++", one()), ("ZZ", one())]).unwrap();
        let out = linearized_solution(&d, 1.0, 0.25).unwrap();
        assert!((out.coefficient("+I").unwrap().re - (-1.0f64).exp()).abs() < 1e-15);
        assert!((out.coefficient("++").unwrap().re - (-4.0f64).exp()).abs() < 1e-15);
        assert_eq!(out.coefficient("ZZ").unwrap(), one());
    }
}
