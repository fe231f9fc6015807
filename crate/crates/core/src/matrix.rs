//! Single-particle coupling matrices and the dense linear algebra built on them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    Antisymmetric,
    Symmetric,
}

impl Symmetry {
    /// `+1` for symmetric, `-1` for antisymmetric.
    pub fn sign(self) -> f64 {
        match self {
            Symmetry::Symmetric => 1.0,
            Symmetry::Antisymmetric => -1.0,
        }
    }
}

/// A real square matrix with a declared symmetry class.
///
/// Construction validates the class exactly (`m[(i,j)] == ±m[(j,i)]`) and
/// rejects non-finite entries, so every `CouplingMatrix` in circulation
/// satisfies its invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRecord", into = "MatrixRecord")]
pub struct CouplingMatrix {
    entries: DMatrix<f64>,
    symmetry: Symmetry,
}

/// Wire format: `{n, symmetry, entries}` with row-major entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRecord {
    n: usize,
    symmetry: Symmetry,
    entries: Vec<f64>,
}

impl TryFrom<MatrixRecord> for CouplingMatrix {
    type Error = crate::Error;

    fn try_from(rec: MatrixRecord) -> Result<Self> {
        if rec.entries.len() != rec.n * rec.n {
            return Err(invalid(format!(
                "expected {} entries for n = {}, found {}",
                rec.n * rec.n,
                rec.n,
                rec.entries.len()
            )));
        }
        CouplingMatrix::new(DMatrix::from_row_slice(rec.n, rec.n, &rec.entries), rec.symmetry)
    }
}

impl From<CouplingMatrix> for MatrixRecord {
    fn from(m: CouplingMatrix) -> Self {
        let n = m.n();
        let entries = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| m.entries[(i, j)])
            .collect();
        MatrixRecord {
            n,
            symmetry: m.symmetry,
            entries,
        }
    }
}

impl CouplingMatrix {
    pub fn new(entries: DMatrix<f64>, symmetry: Symmetry) -> Result<Self> {
        if !entries.is_square() {
            return Err(invalid(format!(
                "coupling matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(invalid("coupling matrix has non-finite entries"));
        }
        let n = entries.nrows();
        let s = symmetry.sign();
        for i in 0..n {
            for j in 0..=i {
                if entries[(i, j)] != s * entries[(j, i)] {
                    return Err(invalid(format!(
                        "entries ({i},{j}) and ({j},{i}) violate {symmetry:?} symmetry"
                    )));
                }
            }
        }
        Ok(Self { entries, symmetry })
    }

    /// Builds a matrix from an approximately (anti)symmetric array by
    /// projecting onto the symmetry class. Integrators use this to absorb
    /// rounding asymmetry, which is far below any tolerance in the crate.
    pub fn from_projected(raw: &DMatrix<f64>, symmetry: Symmetry) -> Result<Self> {
        let s = symmetry.sign();
        let projected = (raw + raw.transpose() * s) * 0.5;
        Self::new(projected, symmetry)
    }

    pub fn zeros(n: usize, symmetry: Symmetry) -> Self {
        Self {
            entries: DMatrix::zeros(n, n),
            symmetry,
        }
    }

    /// Sets `(i,j)` to `value` and `(j,i)` to the mirrored value.
    pub fn set_pair(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        if i == j && self.symmetry == Symmetry::Antisymmetric && value != 0.0 {
            return Err(invalid("antisymmetric matrices have a zero diagonal"));
        }
        if !value.is_finite() {
            return Err(invalid("non-finite entry"));
        }
        self.entries[(i, j)] = value;
        self.entries[(j, i)] = self.symmetry.sign() * value;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: &self.entries * factor,
            symmetry: self.symmetry,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Largest singular value of an arbitrary real matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.is_square() && is_exactly(m, 1.0) {
        return max_abs(m.clone().symmetric_eigenvalues().iter().copied());
    }
    if m.is_square() && is_exactly(m, -1.0) {
        // mᵀm = -m² is symmetric positive semidefinite.
        let gram = m.tr_mul(m);
        return max_abs(gram.symmetric_eigenvalues().iter().copied()).sqrt();
    }
    max_abs(m.clone().singular_values().iter().copied())
}

fn is_exactly(m: &DMatrix<f64>, sign: f64) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..=i).all(|j| m[(i, j)] == sign * m[(j, i)]))
}

fn max_abs(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Operator norm (largest singular value).
pub fn operator_norm(m: &CouplingMatrix) -> f64 {
    spectral_norm(&m.entries)
}

/// Sorted real spectrum: eigenvalues of `h` for symmetric matrices and of
/// `i·h` for antisymmetric ones.
pub fn spectrum(m: &CouplingMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = match m.symmetry {
        Symmetry::Symmetric => m.entries.clone().symmetric_eigenvalues().iter().copied().collect(),
        Symmetry::Antisymmetric => {
            let ih = m.entries.map(|x| Complex64::new(0.0, x));
            ih.symmetric_eigenvalues().iter().copied().collect()
        }
    };
    ev.sort_by(f64::total_cmp);
    ev
}

/// `scale · [[v,h],h]`, using the symmetry classes to halve the number of
/// matrix products. Falls back to the plain four-product form when `v` and
/// `h` have different classes.
pub fn double_bracket_rhs(v: &CouplingMatrix, h: &CouplingMatrix, scale: f64) -> Result<DMatrix<f64>> {
    check_dims(h.n(), v.n())?;
    Ok(double_bracket_raw(&v.entries, &h.entries, v.symmetry, h.symmetry, scale))
}

pub(crate) fn double_bracket_raw(
    v: &DMatrix<f64>,
    h: &DMatrix<f64>,
    v_sym: Symmetry,
    h_sym: Symmetry,
    scale: f64,
) -> DMatrix<f64> {
    if v_sym != h_sym {
        let c = v * h - h * v;
        return (&c * h - h * &c) * scale;
    }
    // For a common class s: h·v = s²(v·h)ᵀ = (v·h)ᵀ, and c = [v,h] is
    // antisymmetric, so h·c = -s(c·h)ᵀ.
    let vh = v * h;
    let c = &vh - vh.transpose();
    let ch = &c * h;
    let s = h_sym.sign();
    (&ch + ch.transpose() * s) * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, symmetry: Symmetry, rng: &mut ChaCha8Rng) -> CouplingMatrix {
        let mut m = CouplingMatrix::zeros(n, symmetry);
        for i in 0..n {
            let lo = if symmetry == Symmetry::Antisymmetric { i + 1 } else { i };
            for j in lo..n {
                m.set_pair(i, j, rng.gen_range(-1.0..1.0)).unwrap();
            }
        }
        m
    }

    fn naive_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| a[(i, k)] * b[(k, j)]).sum())
    }

    #[test]
    fn rejects_broken_symmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(CouplingMatrix::new(m.clone(), Symmetry::Antisymmetric).is_err());
        assert!(CouplingMatrix::new(m, Symmetry::Symmetric).is_ok());
        let nan = DMatrix::from_row_slice(2, 2, &[f64::NAN, 0.0, 0.0, 0.0]);
        assert!(CouplingMatrix::new(nan, Symmetry::Symmetric).is_err());
    }

    #[test]
    fn norm_examples() {
        assert_eq!(operator_norm(&CouplingMatrix::zeros(5, Symmetry::Antisymmetric)), 0.0);
        let mut pair = CouplingMatrix::zeros(4, Symmetry::Antisymmetric);
        pair.set_pair(1, 3, -0.7).unwrap();
        assert_relative_eq!(operator_norm(&pair), 0.7, max_relative = 1e-12);
    }

    #[test]
    fn uniform_ring_norm_is_two() {
        // Fourier oracle: the uniform periodic hopping chain has spectrum
        // 2cos(2πj/n); for n divisible by 4 the extremes ±2 are attained.
        for n in [8usize, 16, 64] {
            let mut h = CouplingMatrix::zeros(n, Symmetry::Symmetric);
            for i in 0..n {
                h.set_pair(i, (i + 1) % n, 1.0).unwrap();
            }
            assert_relative_eq!(operator_norm(&h), 2.0, max_relative = 1e-10);
            let mut fourier: Vec<f64> = (0..n)
                .map(|j| 2.0 * (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos())
                .collect();
            fourier.sort_by(f64::total_cmp);
            for (a, b) in spectrum(&h).iter().zip(&fourier) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn antisymmetric_norm_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [3, 7, 20] {
            let m = random(n, Symmetry::Antisymmetric, &mut rng);
            let svd = m.entries().clone().singular_values().max();
            assert_relative_eq!(operator_norm(&m), svd, max_relative = 1e-12);
            // Spectrum of i·h is ±σ.
            let spec = spectrum(&m);
            assert_relative_eq!(spec[n - 1], svd, max_relative = 1e-12);
            assert_relative_eq!(spec[0], -svd, max_relative = 1e-12);
        }
    }

    #[test]
    fn double_bracket_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random(6, Symmetry::Antisymmetric, &mut rng);
        let z = double_bracket_rhs(&h, &h, 4.0).unwrap();
        assert!(z.iter().all(|x| x.abs() < 1e-14));

        let d1 = CouplingMatrix::new(DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0, 3.0]), Symmetry::Symmetric).unwrap();
        let d2 = CouplingMatrix::new(DMatrix::from_diagonal(&nalgebra::dvector![-1.0, 0.5, 7.0]), Symmetry::Symmetric).unwrap();
        assert!(double_bracket_rhs(&d1, &d2, 4.0).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn double_bracket_matches_naive_triple_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for symmetry in [Symmetry::Antisymmetric, Symmetry::Symmetric] {
            for _ in 0..10 {
                let v = random(4, symmetry, &mut rng);
                let h = random(4, symmetry, &mut rng);
                let (ve, he) = (v.entries(), h.entries());
                let vhh = naive_product(&naive_product(ve, he), he);
                let hvh = naive_product(&naive_product(he, ve), he);
                let hhv = naive_product(&naive_product(he, he), ve);
                let oracle = (vhh - hvh * 2.0 + hhv) * 4.0;
                let fast = double_bracket_rhs(&v, &h, 4.0).unwrap();
                for (a, b) in fast.iter().zip(oracle.iter()) {
                    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                }
                // The class of h is preserved.
                assert!(CouplingMatrix::from_projected(&fast, symmetry).is_ok());
                let s = symmetry.sign();
                assert!((&fast - fast.transpose() * s).amax() < 1e-13);
            }
        }
    }

    #[test]
    fn mixed_classes_use_general_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let v = random(5, Symmetry::Symmetric, &mut rng);
        let h = random(5, Symmetry::Antisymmetric, &mut rng);
        let (ve, he) = (v.entries(), h.entries());
        let c = ve * he - he * ve;
        let oracle = (&c * he - he * &c) * 2.0;
        let got = double_bracket_rhs(&v, &h, 2.0).unwrap();
        assert!((got - oracle).amax() < 1e-13);
    }

    #[test]
    fn json_shape() {
        let mut m = CouplingMatrix::zeros(2, Symmetry::Antisymmetric);
        m.set_pair(0, 1, 0.25).unwrap();
        let json = m.to_json().unwrap();
        assert_eq!(json, r#"{"n":2,"symmetry":"antisymmetric","entries":[0.0,0.25,-0.25,0.0]}"#);
        assert_eq!(CouplingMatrix::from_json(&json).unwrap(), m);
        assert!(CouplingMatrix::from_json(r#"{"n":2,"symmetry":"symmetric","entries":[0.0,1.0,2.0,0.0]}"#).is_err());
        assert!(CouplingMatrix::from_json(r#"{"n":2,"symmetry":"symmetric","entries":[0.0]}"#).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let a = CouplingMatrix::zeros(3, Symmetry::Symmetric);
        let b = CouplingMatrix::zeros(4, Symmetry::Symmetric);
        assert!(double_bracket_rhs(&a, &b, 1.0).is_err());
    }
}
