//! Per-site symbols `{I, Z, a, a†}` and packed operator strings.
//!
//! `a = |0⟩⟨1|` and `Z|0⟩ = |0⟩`. Products of two symbols on one site:
//!
//! ```text
//!   ·  |  I    Z     a         a†
//! -----+-------------------------------
//!   I  |  I    Z     a         a†
//!   Z  |  Z    I     a        −a†
//!   a  |  a   −a     0       (I+Z)/2
//!   a† |  a†   a†  (I−Z)/2     0
//! ```
//!
//! Text form uses one character per site: `I`, `Z`, `+` for `a` and `-` for
//! `a†`. The comma-separated token form `a, a†, Z` is accepted as well.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest site count representable by [`OpString`].
pub const MAX_SITES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    I = 0,
    Z = 1,
    /// `a = |0⟩⟨1|`
    A = 2,
    /// `a† = |1⟩⟨0|`
    Ad = 3,
}

impl Symbol {
    pub const ALL: [Symbol; 4] = [Symbol::I, Symbol::Z, Symbol::A, Symbol::Ad];

    fn from_code(code: u64) -> Self {
        Self::ALL[(code & 3) as usize]
    }

    pub fn charge(self) -> i32 {
        match self {
            Symbol::A => 1,
            Symbol::Ad => -1,
            _ => 0,
        }
    }

    pub fn adjoint(self) -> Self {
        match self {
            Symbol::A => Symbol::Ad,
            Symbol::Ad => Symbol::A,
            s => s,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Symbol::I => 'I',
            Symbol::Z => 'Z',
            Symbol::A => '+',
            Symbol::Ad => '-',
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'I' => Ok(Symbol::I),
            'Z' => Ok(Symbol::Z),
            '+' => Ok(Symbol::A),
            '-' => Ok(Symbol::Ad),
            other => Err(Error::InvalidSymbol(other)),
        }
    }

    fn from_token(tok: &str) -> Result<Self> {
        match tok {
            "I" => Ok(Symbol::I),
            "Z" => Ok(Symbol::Z),
            "a" | "+" => Ok(Symbol::A),
            "a†" | "a^" | "ad" | "-" => Ok(Symbol::Ad),
            other => Err(Error::InvalidSymbol(other.chars().next().unwrap_or(' '))),
        }
    }

    /// 2×2 matrix `[[m00, m01], [m10, m11]]`.
    pub fn matrix(self) -> [[f64; 2]; 2] {
        match self {
            Symbol::I => [[1.0, 0.0], [0.0, 1.0]],
            Symbol::Z => [[1.0, 0.0], [0.0, -1.0]],
            Symbol::A => [[0.0, 1.0], [0.0, 0.0]],
            Symbol::Ad => [[0.0, 0.0], [1.0, 0.0]],
        }
    }

    /// `self · rhs` as at most two `(coefficient, symbol)` terms.
    pub fn product(self, rhs: Symbol) -> &'static [(f64, Symbol)] {
        use Symbol::*;
        match (self, rhs) {
            (I, I) | (Z, Z) => &[(1.0, I)],
            (I, Z) | (Z, I) => &[(1.0, Z)],
            (I, A) | (A, I) | (Z, A) => &[(1.0, A)],
            (A, Z) => &[(-1.0, A)],
            (I, Ad) | (Ad, I) | (Ad, Z) => &[(1.0, Ad)],
            (Z, Ad) => &[(-1.0, Ad)],
            (A, A) | (Ad, Ad) => &[],
            (A, Ad) => &[(0.5, I), (0.5, Z)],
            (Ad, A) => &[(0.5, I), (-0.5, Z)],
        }
    }
}

/// Operator string with site `k` stored in bits `2k, 2k+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct OpString(pub u64);

impl OpString {
    pub const IDENTITY: OpString = OpString(0);

    pub fn from_symbols(symbols: &[Symbol]) -> Result<Self> {
        if symbols.len() > MAX_SITES {
            return Err(invalid(format!("strings are limited to {MAX_SITES} sites")));
        }
        Ok(Self(
            symbols
                .iter()
                .enumerate()
                .fold(0u64, |acc, (k, &s)| acc | (s as u64) << (2 * k)),
        ))
    }

    /// Single-site symbol `s` at `site`, identity elsewhere.
    pub fn single(site: usize, s: Symbol) -> Self {
        Self((s as u64) << (2 * site))
    }

    pub fn get(self, site: usize) -> Symbol {
        Symbol::from_code(self.0 >> (2 * site))
    }

    pub fn with(self, site: usize, s: Symbol) -> Self {
        let mask = 3u64 << (2 * site);
        Self((self.0 & !mask) | (s as u64) << (2 * site))
    }

    pub fn symbols(self, n_sites: usize) -> Vec<Symbol> {
        (0..n_sites).map(|k| self.get(k)).collect()
    }

    pub fn charge(self, n_sites: usize) -> i32 {
        (0..n_sites).map(|k| self.get(k).charge()).sum()
    }

    pub fn adjoint(self, n_sites: usize) -> Self {
        (0..n_sites).fold(self, |acc, k| acc.with(k, self.get(k).adjoint()))
    }

    /// Sites carrying a non-identity symbol.
    pub fn support(self, n_sites: usize) -> Vec<usize> {
        (0..n_sites).filter(|&k| self.get(k) != Symbol::I).collect()
    }

    /// Distance between the outermost non-identity sites; `None` for the identity.
    pub fn diameter(self, n_sites: usize) -> Option<usize> {
        let support = self.support(n_sites);
        Some(support.last()? - support.first()?)
    }

    /// Moves every site `k` to `k + offset`.
    pub fn shifted(self, offset: usize) -> Self {
        Self(self.0 << (2 * offset))
    }

    pub fn to_text(self, n_sites: usize) -> String {
        self.symbols(n_sites).into_iter().map(Symbol::to_char).collect()
    }
}

/// Parses either the compact form (`"+-Z"`) or comma-separated tokens
/// (`"a, a†, Z"`).
pub fn parse_string(text: &str) -> Result<(usize, OpString)> {
    let symbols: Vec<Symbol> = if text.contains(',') {
        text.split(',').map(|t| Symbol::from_token(t.trim())).collect::<Result<_>>()?
    } else {
        text.chars().map(Symbol::from_char).collect::<Result<_>>()?
    };
    if symbols.is_empty() {
        return Err(invalid("empty operator string"));
    }
    Ok((symbols.len(), OpString::from_symbols(&symbols)?))
}

/// Product of two strings on `n_sites` sites, expanded into its terms.
pub fn string_product(lhs: OpString, rhs: OpString, n_sites: usize) -> Vec<(f64, OpString)> {
    let mut terms = vec![(1.0, OpString::IDENTITY)];
    for k in 0..n_sites {
        let (l, r) = (lhs.get(k), rhs.get(k));
        if r == Symbol::I {
            if l != Symbol::I {
                terms.iter_mut().for_each(|(_, s)| *s = s.with(k, l));
            }
            continue;
        }
        let site = l.product(r);
        match site {
            [] => return Vec::new(),
            [(c, s)] => terms.iter_mut().for_each(|(coef, st)| {
                *coef *= c;
                *st = st.with(k, *s);
            }),
            _ => {
                terms = terms
                    .iter()
                    .flat_map(|&(coef, st)| site.iter().map(move |&(c, s)| (coef * c, st.with(k, s))))
                    .collect();
            }
        }
    }
    terms
}

/// Charge `#a − #a†` of a string in text form.
pub fn charge_of_string(text: &str) -> Result<i32> {
    let (n, s) = parse_string(text)?;
    Ok(s.charge(n))
}
