//! Polynomials in operator strings with complex coefficients.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::symbol::{parse_string, string_product, OpString, Symbol, MAX_SITES};
use crate::error::{invalid, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `Σ_s c_s s` over strings on `n_sites` sites. Zero coefficients are never
/// stored, and iteration order is the packed string order, so output built
/// from a polynomial is deterministic.
///
/// Arithmetic operators panic if the site counts differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyRecord", into = "PolyRecord")]
pub struct PauliPolynomial {
    n_sites: usize,
    terms: BTreeMap<OpString, Complex64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRecord {
    string: String,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyRecord {
    n_sites: usize,
    terms: Vec<TermRecord>,
}

impl TryFrom<PolyRecord> for PauliPolynomial {
    type Error = crate::error::Error;

    fn try_from(rec: PolyRecord) -> Result<Self> {
        let mut p = PauliPolynomial::zero(rec.n_sites)?;
        for t in rec.terms {
            let (n, s) = parse_string(&t.string)?;
            if n != rec.n_sites {
                return Err(invalid(format!("string {:?} has {n} sites, expected {}", t.string, rec.n_sites)));
            }
            p.add_term(s, Complex64::new(t.re, t.im));
        }
        Ok(p)
    }
}

impl From<PauliPolynomial> for PolyRecord {
    fn from(p: PauliPolynomial) -> Self {
        PolyRecord {
            n_sites: p.n_sites,
            terms: p
                .terms
                .iter()
                .map(|(s, c)| TermRecord {
                    string: s.to_text(p.n_sites),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
    }
}

impl PauliPolynomial {
    pub fn zero(n_sites: usize) -> Result<Self> {
        if n_sites == 0 || n_sites > MAX_SITES {
            return Err(invalid(format!("site count must be in 1..={MAX_SITES}, got {n_sites}")));
        }
        Ok(Self {
            n_sites,
            terms: BTreeMap::new(),
        })
    }

    pub fn identity(n_sites: usize) -> Result<Self> {
        let mut p = Self::zero(n_sites)?;
        p.add_term(OpString::IDENTITY, Complex64::new(1.0, 0.0));
        Ok(p)
    }

    /// Single term from its text form.
    pub fn term(text: &str, coefficient: Complex64) -> Result<Self> {
        let (n, s) = parse_string(text)?;
        let mut p = Self::zero(n)?;
        p.add_term(s, coefficient);
        Ok(p)
    }

    /// Sum of text-form terms, all on the same number of sites.
    pub fn from_texts<'a>(terms: impl IntoIterator<Item = (&'a str, Complex64)>) -> Result<Self> {
        let mut out: Option<Self> = None;
        for (text, c) in terms {
            let t = Self::term(text, c)?;
            match &mut out {
                None => out = Some(t),
                Some(p) => {
                    if p.n_sites != t.n_sites {
                        return Err(invalid("terms have different site counts"));
                    }
                    p.add_assign_poly(&t);
                }
            }
        }
        out.ok_or_else(|| invalid("no terms given"))
    }

    /// `Σ_j Z_j`, the reference operator of the charge-sector analysis.
    pub fn sum_z(n_sites: usize) -> Result<Self> {
        let mut p = Self::zero(n_sites)?;
        for k in 0..n_sites {
            p.add_term(OpString::single(k, Symbol::Z), Complex64::new(1.0, 0.0));
        }
        Ok(p)
    }

    /// Term from a string over `{I, X, Y, Z}`, expanded with `X = a + a†` and
    /// `Y = −i(a − a†)`.
    pub fn from_xyz(text: &str, coefficient: Complex64) -> Result<Self> {
        let n = text.chars().count();
        let mut out: Vec<(Complex64, OpString)> = vec![(coefficient, OpString::IDENTITY)];
        let i = Complex64::new(0.0, 1.0);
        for (k, ch) in text.chars().enumerate() {
            let site: Vec<(Complex64, Symbol)> = match ch {
                'I' => vec![(1.0.into(), Symbol::I)],
                'Z' => vec![(1.0.into(), Symbol::Z)],
                'X' => vec![(1.0.into(), Symbol::A), (1.0.into(), Symbol::Ad)],
                'Y' => vec![(-i, Symbol::A), (i, Symbol::Ad)],
                other => return Err(crate::error::Error::InvalidSymbol(other)),
            };
            out = out
                .iter()
                .flat_map(|&(c, s)| site.iter().map(move |&(d, sym)| (c * d, s.with(k, sym))))
                .collect();
        }
        let mut p = Self::zero(n)?;
        for (c, s) in out {
            p.add_term(s, c);
        }
        Ok(p)
    }

    /// Expansion over `{I, X, Y, Z}` strings via `a = (X + iY)/2`,
    /// `a† = (X − iY)/2`.
    pub fn to_xyz(&self) -> BTreeMap<String, Complex64> {
        let half_i = Complex64::new(0.0, 0.5);
        let mut out: BTreeMap<String, Complex64> = BTreeMap::new();
        for (&s, &c) in &self.terms {
            let mut partial: Vec<(Complex64, String)> = vec![(c, String::new())];
            for sym in s.symbols(self.n_sites) {
                let site: &[(Complex64, char)] = match sym {
                    Symbol::I => &[(Complex64::new(1.0, 0.0), 'I')],
                    Symbol::Z => &[(Complex64::new(1.0, 0.0), 'Z')],
                    Symbol::A => &[(Complex64::new(0.5, 0.0), 'X'), (half_i, 'Y')],
                    Symbol::Ad => &[(Complex64::new(0.5, 0.0), 'X'), (Complex64::new(0.0, -0.5), 'Y')],
                };
                partial = partial
                    .iter()
                    .flat_map(|(c, txt)| {
                        site.iter().map(move |&(d, ch)| {
                            let mut t = txt.clone();
                            t.push(ch);
                            (*c * d, t)
                        })
                    })
                    .collect();
            }
            for (c, txt) in partial {
                *out.entry(txt).or_insert(ZERO) += c;
            }
        }
        out.retain(|_, c| *c != ZERO);
        out
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (OpString, Complex64)> + '_ {
        self.terms.iter().map(|(&s, &c)| (s, c))
    }

    pub fn get(&self, s: OpString) -> Complex64 {
        self.terms.get(&s).copied().unwrap_or(ZERO)
    }

    /// Coefficient of a text-form string.
    pub fn coefficient(&self, text: &str) -> Result<Complex64> {
        let (n, s) = parse_string(text)?;
        if n != self.n_sites {
            return Err(invalid(format!("string has {n} sites, polynomial has {}", self.n_sites)));
        }
        Ok(self.get(s))
    }

    /// Adds `c · s`, dropping the entry if it cancels to exactly zero.
    pub fn add_term(&mut self, s: OpString, c: Complex64) {
        if c == ZERO {
            return;
        }
        let entry = self.terms.entry(s).or_insert(ZERO);
        *entry += c;
        if *entry == ZERO {
            self.terms.remove(&s);
        }
    }

    fn add_assign_poly(&mut self, other: &Self) {
        for (&s, &c) in &other.terms {
            self.add_term(s, c);
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = Self {
            n_sites: self.n_sites,
            terms: BTreeMap::new(),
        };
        if factor != ZERO {
            for (&s, &c) in &self.terms {
                out.add_term(s, c * factor);
            }
        }
        out
    }

    pub fn scaled_real(&self, factor: f64) -> Self {
        self.scaled(Complex64::new(factor, 0.0))
    }

    /// Removes entries with `|c| ≤ tol`.
    pub fn pruned(mut self, tol: f64) -> Self {
        self.terms.retain(|_, c| c.norm() > tol);
        self
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self {
            n_sites: self.n_sites,
            terms: BTreeMap::new(),
        };
        for (&s, &c) in &self.terms {
            out.add_term(s.adjoint(self.n_sites), c.conj());
        }
        out
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self - &self.adjoint()).max_abs() <= tol
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `Σ |c_s|²`.
    pub fn coefficient_norm_sq(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).sum()
    }

    /// Places this polynomial on sites `offset..offset + n_sites` of a
    /// `n_total`-site system.
    pub fn embedded(&self, n_total: usize, offset: usize) -> Result<Self> {
        if offset + self.n_sites > n_total {
            return Err(invalid(format!(
                "cannot place {} sites at offset {offset} in a {n_total}-site system",
                self.n_sites
            )));
        }
        let mut out = Self::zero(n_total)?;
        for (&s, &c) in &self.terms {
            out.add_term(s.shifted(offset), c);
        }
        Ok(out)
    }

    /// `Σ_j` of this pattern placed at every offset that fits in an open
    /// chain of `n_total` sites.
    pub fn tiled(&self, n_total: usize) -> Result<Self> {
        if self.n_sites > n_total {
            return Err(invalid("pattern is wider than the chain"));
        }
        let mut out = Self::zero(n_total)?;
        for offset in 0..=n_total - self.n_sites {
            out.add_assign_poly(&self.embedded(n_total, offset)?);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Add for &PauliPolynomial {
    type Output = PauliPolynomial;

    fn add(self, rhs: &PauliPolynomial) -> PauliPolynomial {
        assert_eq!(self.n_sites, rhs.n_sites, "site count mismatch");
        let mut out = self.clone();
        out.add_assign_poly(rhs);
        out
    }
}

impl Sub for &PauliPolynomial {
    type Output = PauliPolynomial;

    fn sub(self, rhs: &PauliPolynomial) -> PauliPolynomial {
        assert_eq!(self.n_sites, rhs.n_sites, "site count mismatch");
        let mut out = self.clone();
        for (&s, &c) in &rhs.terms {
            out.add_term(s, -c);
        }
        out
    }
}

impl Neg for &PauliPolynomial {
    type Output = PauliPolynomial;

    fn neg(self) -> PauliPolynomial {
        self.scaled_real(-1.0)
    }
}

impl Mul for &PauliPolynomial {
    type Output = PauliPolynomial;

    fn mul(self, rhs: &PauliPolynomial) -> PauliPolynomial {
        assert_eq!(self.n_sites, rhs.n_sites, "site count mismatch");
        let n = self.n_sites;
        let mut acc: BTreeMap<OpString, Complex64> = BTreeMap::new();
        for (&l, &cl) in &self.terms {
            for (&r, &cr) in &rhs.terms {
                let c = cl * cr;
                for (f, s) in string_product(l, r, n) {
                    *acc.entry(s).or_insert(ZERO) += c * f;
                }
            }
        }
        acc.retain(|_, c| *c != ZERO);
        PauliPolynomial { n_sites: n, terms: acc }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn canonical_form_drops_zeros() {
        let mut p = PauliPolynomial::term("+Z", c(1.0, 0.0)).unwrap();
        p.add_term(parse_string("+Z").unwrap().1, c(-1.0, 0.0));
        assert!(p.is_empty());
        let q = PauliPolynomial::term("+I", c(1.0, 0.0)).unwrap();
        // a·a = 0
        assert!((&q * &q).is_empty());
    }

    #[test]
    fn json_shape_and_round_trip() {
        let p = PauliPolynomial::from_texts([("+-", c(0.5, -1.0)), ("ZI", c(2.0, 0.0))]).unwrap();
        let json = p.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["n_sites"], 2);
        assert!(v["terms"].as_array().unwrap().iter().any(|t| t["string"] == "+-" && t["im"] == -1.0));
        assert_eq!(PauliPolynomial::from_json(&json).unwrap(), p);
        assert!(PauliPolynomial::from_json(r#"{"n_sites":2,"terms":[{"string":"Z","re":1,"im":0}]}"#).is_err());
        assert!(PauliPolynomial::from_json(r#"{"n_sites":1,"terms":[],"extra":1}"#).is_err());
    }

    #[test]
    fn xyz_round_trip() {
        let p = PauliPolynomial::from_xyz("XYZ", c(0.7, 0.2)).unwrap();
        let back = p.to_xyz();
        assert_eq!(back.len(), 1);
        let got = back["XYZ"];
        assert!((got - c(0.7, 0.2)).norm() < 1e-15);
        let x = PauliPolynomial::from_xyz("X", c(1.0, 0.0)).unwrap();
        assert_eq!(x, PauliPolynomial::from_texts([("+", c(1.0, 0.0)), ("-", c(1.0, 0.0))]).unwrap());
        // XY = iZ
        let y = PauliPolynomial::from_xyz("Y", c(1.0, 0.0)).unwrap();
        assert_eq!(&x * &y, PauliPolynomial::term("Z", c(0.0, 1.0)).unwrap());
        assert!(PauliPolynomial::from_xyz("XQ", c(1.0, 0.0)).is_err());
    }

    #[test]
    fn hermiticity() {
        let x = PauliPolynomial::from_xyz("XZ", c(1.0, 0.0)).unwrap();
        assert!(x.is_hermitian(0.0));
        assert!(!PauliPolynomial::term("+I", c(1.0, 0.0)).unwrap().is_hermitian(1e-12));
        let y = PauliPolynomial::from_xyz("Y", c(1.0, 0.0)).unwrap();
        assert!(y.is_hermitian(0.0));
    }

    #[test]
    fn tiling() {
        let x = PauliPolynomial::from_xyz("X", c(1.0, 0.0)).unwrap();
        let sum = x.tiled(3).unwrap();
        assert_eq!(sum.len(), 6);
        let zz = PauliPolynomial::term("ZZ", c(1.0, 0.0)).unwrap().tiled(4).unwrap();
        assert_eq!(zz.len(), 3);
        assert_eq!(zz.coefficient("IZZI").unwrap(), c(1.0, 0.0));
        assert!(x.embedded(3, 3).is_err());
    }

    #[test]
    fn commutator_of_z_with_a_is_2a() {
        let z = PauliPolynomial::term("Z", c(1.0, 0.0)).unwrap();
        let a = PauliPolynomial::term("+", c(1.0, 0.0)).unwrap();
        assert_eq!(z.commutator(&a), a.scaled_real(2.0));
        let ad = PauliPolynomial::term("-", c(1.0, 0.0)).unwrap();
        assert_eq!(z.commutator(&ad), ad.scaled_real(-2.0));
    }
}
