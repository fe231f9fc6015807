//! Fixed inputs shared by the benchmarks.

use bracketflow::random::{instance_rng, normalized, random_banded};
use bracketflow::spin::PauliPolynomial;
use bracketflow::{CouplingMatrix, Lattice, Symmetry};
use num_complex::Complex64;

/// Normalized random banded pair `(h, v)` on a periodic chain.
pub fn banded_pair(n: usize, range: usize, symmetry: Symmetry, seed: u64) -> (Lattice, CouplingMatrix, CouplingMatrix) {
    let lat = Lattice::periodic(n).expect("n ≥ 3");
    let mut rng = instance_rng(seed);
    let h = normalized(&random_banded(&lat, range, symmetry, &mut rng).unwrap(), 1.0).unwrap();
    let v = normalized(&random_banded(&lat, range, symmetry, &mut rng).unwrap(), 1.0).unwrap();
    (lat, h, v)
}

/// `Σ Z_j + ε Σ X_j` and `Σ Z_j` on an open chain.
pub fn transverse_chain(n: usize, epsilon: f64) -> (PauliPolynomial, PauliPolynomial) {
    let v = PauliPolynomial::sum_z(n).unwrap();
    let x = PauliPolynomial::from_xyz("X", Complex64::new(epsilon, 0.0)).unwrap().tiled(n).unwrap();
    (&v + &x, v)
}
