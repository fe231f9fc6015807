//! Dense `2ⁿ × 2ⁿ` representation and the many-body flow `∂_B H = [[V,H],H]`.
//!
//! Site `k` is bit `k` of the basis index (site 0 least significant), with
//! `|0⟩` the `Z = +1` state.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::PauliPolynomial;
use super::symbol::{OpString, Symbol};
use crate::error::{check_dims, invalid, Error, Result};
use crate::ode::{IntegratorConfig, IntegratorStats, Stepper};

/// Largest site count accepted by the dense routines.
pub const MAX_DENSE_SITES: usize = 12;

fn guard(n: usize) -> Result<()> {
    if n > MAX_DENSE_SITES {
        return Err(Error::TooManySites { n, max: MAX_DENSE_SITES });
    }
    Ok(())
}

/// Dense matrix of a polynomial.
pub fn to_dense(p: &PauliPolynomial) -> Result<DMatrix<Complex64>> {
    let n = p.n_sites();
    guard(n)?;
    let dim = 1usize << n;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for (s, c) in p.iter() {
        // a = |0⟩⟨1| needs row bit 0, a† needs row bit 1; both flip the bit.
        let (mut flip, mut need_one, mut zmask) = (0usize, 0usize, 0usize);
        for k in 0..n {
            match s.get(k) {
                Symbol::I => {}
                Symbol::Z => zmask |= 1 << k,
                Symbol::A => flip |= 1 << k,
                Symbol::Ad => {
                    flip |= 1 << k;
                    need_one |= 1 << k;
                }
            }
        }
        for row in 0..dim {
            if row & flip != need_one {
                continue;
            }
            let col = row ^ flip;
            let sign = if (row & zmask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(row, col)] += c * sign;
        }
    }
    Ok(m)
}

/// Spreads bit `k` of `x` to bit `2k`.
fn spread(x: usize, n: usize) -> usize {
    (0..n).fold(0, |acc, k| acc | ((x >> k) & 1) << (2 * k))
}

/// Polynomial of a dense matrix, keeping coefficients with `|c| > drop_tol`.
///
/// Coefficients follow from the dual basis `I/2, Z/2, a†, a`: per site,
/// `c_I = (m₀₀ + m₁₁)/2`, `c_Z = (m₀₀ − m₁₁)/2`, `c_a = m₀₁`, `c_a† = m₁₀`,
/// applied one site at a time.
pub fn from_dense(m: &DMatrix<Complex64>, n_sites: usize, drop_tol: f64) -> Result<PauliPolynomial> {
    guard(n_sites)?;
    let dim = 1usize << n_sites;
    check_dims(dim, m.nrows())?;
    check_dims(dim, m.ncols())?;
    // Digit k (base 4) of the index is 2·row_k + col_k.
    let mut buf = vec![Complex64::new(0.0, 0.0); dim * dim];
    for c in 0..dim {
        let sc = spread(c, n_sites);
        for r in 0..dim {
            buf[(spread(r, n_sites) << 1) | sc] = m[(r, c)];
        }
    }
    for k in 0..n_sites {
        let stride = 1usize << (2 * k);
        for base in 0..buf.len() {
            if (base / stride) % 4 != 0 {
                continue;
            }
            let [m00, m01, m10, m11] = [0, 1, 2, 3].map(|d| buf[base + d * stride]);
            buf[base + (Symbol::I as usize) * stride] = (m00 + m11) * 0.5;
            buf[base + (Symbol::Z as usize) * stride] = (m00 - m11) * 0.5;
            buf[base + (Symbol::A as usize) * stride] = m01;
            buf[base + (Symbol::Ad as usize) * stride] = m10;
        }
    }
    let mut p = PauliPolynomial::zero(n_sites)?;
    for (idx, c) in buf.into_iter().enumerate() {
        if c.norm() > drop_tol {
            p.add_term(OpString(idx as u64), c);
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseFlowOptions {
    pub integrator: IntegratorConfig,
    /// Coefficients with magnitude at or below this are dropped from snapshots.
    pub drop_tol: f64,
    /// Relative spectrum drift tolerated; ten times this aborts.
    pub invariant_tol: f64,
}

impl Default for DenseFlowOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::adaptive_with(1e-11, 1e-13),
            drop_tol: 0.0,
            invariant_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTrajectory {
    #[serde(rename = "B_grid")]
    pub b_grid: Vec<f64>,
    pub snapshots: Vec<PauliPolynomial>,
    /// Monitored only when `H` and `V` are Hermitian.
    pub spectrum_drift: Option<Vec<f64>>,
    /// `Tr((H(B) − V)²)`, recorded when `H` and `V` are Hermitian.
    pub potential: Option<Vec<f64>>,
    pub integrator: IntegratorStats,
}

fn is_hermitian<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> bool {
    let scale = m.iter().map(|x| x.clone().modulus()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    (m - m.adjoint()).iter().all(|x| x.clone().modulus() <= 1e-14 * scale)
}

fn is_diagonal<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> bool {
    m.iter()
        .enumerate()
        .all(|(idx, x)| idx % m.nrows() == idx / m.nrows() || x.clone().is_zero())
}

/// `[[V, H], H]` specialised on the structure of the inputs.
struct Rhs<T: ComplexField> {
    v: DMatrix<T>,
    diag: Option<Vec<T>>,
    hermitian: bool,
}

impl<T: ComplexField<RealField = f64>> Rhs<T> {
    fn new(v: DMatrix<T>, hermitian: bool) -> Self {
        let diag = is_diagonal(&v).then(|| v.diagonal().iter().cloned().collect());
        Self { v, diag, hermitian }
    }

    fn eval(&self, h: &DMatrix<T>) -> DMatrix<T> {
        let c = match &self.diag {
            Some(d) => DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| (d[i].clone() - d[j].clone()) * h[(i, j)].clone()),
            None => &self.v * h - h * &self.v,
        };
        let ch = &c * h;
        if self.hermitian {
            // C is anti-Hermitian, so HC = −(CH)†.
            let adj = ch.adjoint();
            ch + adj
        } else {
            ch - h * &c
        }
    }
}

fn sorted_eigenvalues<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Vec<f64> {
    let mut e: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

struct Run<T: ComplexField> {
    states: Vec<DMatrix<T>>,
    spectrum_drift: Option<Vec<f64>>,
    potential: Option<Vec<f64>>,
    stats: IntegratorStats,
}

fn run<T: ComplexField<RealField = f64>>(h0: DMatrix<T>, v: DMatrix<T>, grid: &[f64], opts: &DenseFlowOptions) -> Result<Run<T>> {
    let hermitian = is_hermitian(&h0) && is_hermitian(&v);
    let spec0 = hermitian.then(|| sorted_eigenvalues(&h0));
    let scale = spec0
        .as_ref()
        .map(|s| s.iter().map(|x| x.abs()).fold(0.0, f64::max))
        .unwrap_or(1.0)
        .max(f64::MIN_POSITIVE);
    let rhs = Rhs::new(v.clone(), hermitian);
    let mut stepper = Stepper::new(move |_: f64, h: &DMatrix<T>| rhs.eval(h), 0.0, h0, opts.integrator)?;
    let limit = 10.0 * opts.invariant_tol;
    let mut states = Vec::with_capacity(grid.len());
    let mut drift = Vec::new();
    let mut potential = Vec::new();
    for &b in grid {
        stepper.advance_to(b)?;
        let h = stepper.state();
        if let Some(spec0) = &spec0 {
            let d = sorted_eigenvalues(h)
                .iter()
                .zip(spec0)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
                / scale;
            if d > limit {
                return Err(Error::InvariantBreach {
                    b,
                    what: "spectrum",
                    drift: d,
                    limit,
                });
            }
            drift.push(d);
            potential.push((h - &v).norm_squared());
        }
        states.push(h.clone());
    }
    let (_, stats) = stepper.into_parts();
    Ok(Run {
        states,
        spectrum_drift: hermitian.then_some(drift),
        potential: hermitian.then_some(potential),
        stats,
    })
}

/// Integrates `∂_B H = [[V,H],H]` densely and returns canonical snapshots.
///
/// Real inputs run in real arithmetic. Spectrum and potential are monitored
/// when both operators are Hermitian.
pub fn dense_flow(h0: &PauliPolynomial, v: &PauliPolynomial, b_grid: &[f64], opts: &DenseFlowOptions) -> Result<DenseTrajectory> {
    let n = h0.n_sites();
    check_dims(n, v.n_sites())?;
    guard(n)?;
    if b_grid.first() != Some(&0.0) || b_grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(invalid("B grid must be ascending and start at 0"));
    }
    let (hd, vd) = (to_dense(h0)?, to_dense(v)?);
    let real = hd.iter().chain(vd.iter()).all(|z| z.im == 0.0);
    let (states, spectrum_drift, potential, integrator) = if real {
        let r = run(hd.map(|z| z.re), vd.map(|z| z.re), b_grid, opts)?;
        let states = r.states.into_iter().map(|m| m.map(|x| Complex64::new(x, 0.0))).collect();
        (states, r.spectrum_drift, r.potential, r.stats)
    } else {
        let r = run(hd, vd, b_grid, opts)?;
        (r.states, r.spectrum_drift, r.potential, r.stats)
    };
    let snapshots = states
        .iter()
        .map(|m| from_dense(m, n, opts.drop_tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(DenseTrajectory {
        b_grid: b_grid.to_vec(),
        snapshots,
        spectrum_drift,
        potential,
        integrator,
    })
}

/// Sorted eigenvalues of a Hermitian polynomial.
pub fn hermitian_spectrum(p: &PauliPolynomial) -> Result<Vec<f64>> {
    if !p.is_hermitian(1e-12 * p.max_abs().max(1.0)) {
        return Err(invalid("polynomial is not Hermitian"));
    }
    Ok(sorted_eigenvalues(&to_dense(p)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::instance_rng;
    use rand::Rng;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn random_poly(n: usize, terms: usize, seed: u64) -> PauliPolynomial {
        let mut rng = instance_rng(seed);
        let mut p = PauliPolynomial::zero(n).unwrap();
        for _ in 0..terms {
            p.add_term(
                OpString(rng.gen_range(0..(1u64 << (2 * n)))),
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            );
        }
        p
    }

    /// Oracle: Kronecker product of per-site matrices, site 0 rightmost.
    fn kron_dense(p: &PauliPolynomial) -> DMatrix<Complex64> {
        let n = p.n_sites();
        let mut out = DMatrix::<Complex64>::zeros(1 << n, 1 << n);
        for (s, c) in p.iter() {
            let mut m = DMatrix::from_element(1, 1, c);
            for k in (0..n).rev() {
                let e = s.get(k).matrix();
                let site = DMatrix::from_fn(2, 2, |i, j| Complex64::new(e[i][j], 0.0));
                m = m.kronecker(&site);
            }
            out += m;
        }
        out
    }

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn dense_matches_kronecker_oracle() {
        for n in 1..=4 {
            let p = random_poly(n, 12, n as u64);
            assert!(max_diff(&to_dense(&p).unwrap(), &kron_dense(&p)) < 1e-15);
        }
    }

    #[test]
    fn dense_round_trip() {
        for n in 1..=5 {
            let p = random_poly(n, 30, 10 + n as u64);
            let back = from_dense(&to_dense(&p).unwrap(), n, 1e-14).unwrap();
            assert!((&back - &p).max_abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn algebra_matches_dense_arithmetic() {
        for n in 1..=5 {
            let (p, q) = (random_poly(n, 10, 20 + n as u64), random_poly(n, 10, 40 + n as u64));
            let (dp, dq) = (to_dense(&p).unwrap(), to_dense(&q).unwrap());
            assert!(max_diff(&to_dense(&(&p + &q)).unwrap(), &(&dp + &dq)) < 1e-12);
            assert!(max_diff(&to_dense(&(&p * &q)).unwrap(), &(&dp * &dq)) < 1e-12);
            let comm = &dp * &dq - &dq * &dp;
            assert!(max_diff(&to_dense(&p.commutator(&q)).unwrap(), &comm) < 1e-12);
            let double = &comm * &dq - &dq * &comm;
            assert!(max_diff(&to_dense(&p.commutator(&q).commutator(&q)).unwrap(), &double) < 1e-12);
            assert!(max_diff(&to_dense(&p.adjoint()).unwrap(), &dp.adjoint()) < 1e-15);
        }
    }

    #[test]
    fn size_guard() {
        let p = PauliPolynomial::sum_z(13).unwrap();
        assert!(matches!(to_dense(&p), Err(Error::TooManySites { n: 13, .. })));
        assert!(dense_flow(&p, &p, &[0.0], &DenseFlowOptions::default()).is_err());
    }

    #[test]
    fn commuting_start_is_stationary() {
        let v = PauliPolynomial::sum_z(3).unwrap();
        let h = &v + &PauliPolynomial::term("ZZI", Complex64::new(0.3, 0.0)).unwrap();
        let traj = dense_flow(&h, &v, &[0.0, 0.5, 1.0], &DenseFlowOptions::default()).unwrap();
        for s in &traj.snapshots {
            // Equal up to rounding in the dense round trip.
            assert!((s - &h).max_abs() < 1e-15);
        }
    }

    #[test]
    fn flow_is_isospectral_and_monotone() {
        let v = PauliPolynomial::sum_z(3).unwrap();
        let delta = &PauliPolynomial::from_xyz("X", one()).unwrap().tiled(3).unwrap()
            + &PauliPolynomial::from_xyz("YY", Complex64::new(0.4, 0.0)).unwrap().tiled(3).unwrap();
        let h = &v + &delta.scaled_real(0.5);
        let grid: Vec<f64> = (0..=20).map(|i| 0.1 * i as f64).collect();
        let traj = dense_flow(&h, &v, &grid, &DenseFlowOptions::default()).unwrap();
        assert!(traj.spectrum_drift.unwrap().iter().all(|&d| d < 1e-8));
        let pot = traj.potential.unwrap();
        assert!(pot.windows(2).all(|w| w[1] <= w[0] + 1e-8), "{pot:?}");
        // Sorting at large B: the diagonal of H(B), grouped by the
        // eigenvalue of V, is ordered like V.
        let end = to_dense(traj.snapshots.last().unwrap()).unwrap();
        let vd = to_dense(&v).unwrap();
        let groups: Vec<(f64, f64, f64)> = [-3.0, -1.0, 1.0, 3.0]
            .iter()
            .map(|&level| {
                let d: Vec<f64> = (0..8).filter(|&i| vd[(i, i)].re == level).map(|i| end[(i, i)].re).collect();
                (level, d.iter().copied().fold(f64::INFINITY, f64::min), d.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            })
            .collect();
        assert!(groups.windows(2).all(|w| w[0].2 < w[1].1), "{groups:?}");
    }

    #[test]
    fn non_hermitian_runs_unmonitored() {
        let v = PauliPolynomial::sum_z(2).unwrap();
        let h = &v + &PauliPolynomial::term("+I", Complex64::new(0.1, 0.0)).unwrap();
        let traj = dense_flow(&h, &v, &[0.0, 0.5], &DenseFlowOptions::default()).unwrap();
        assert!(traj.spectrum_drift.is_none());
        let c = traj.snapshots[1].coefficient("+I").unwrap().re;
        assert!((c - 0.1 * (-2.0f64).exp()).abs() < 1e-10, "{c}");
    }

    #[test]
    fn complex_path_agrees_with_real_path() {
        // Conjugating by a diagonal phase keeps the flow equivalent.
        let v = PauliPolynomial::sum_z(2).unwrap();
        let x = &v + &PauliPolynomial::from_xyz("XI", Complex64::new(0.2, 0.0)).unwrap();
        let y = &v + &PauliPolynomial::from_xyz("YI", Complex64::new(0.2, 0.0)).unwrap();
        let opts = DenseFlowOptions::default();
        let tx = dense_flow(&x, &v, &[0.0, 0.7], &opts).unwrap();
        let ty = dense_flow(&y, &v, &[0.0, 0.7], &opts).unwrap();
        let cx = tx.snapshots[1].coefficient("+I").unwrap();
        let cy = ty.snapshots[1].coefficient("+I").unwrap();
        assert!((cx.norm() - cy.norm()).abs() < 1e-9);
        assert!((cy - Complex64::new(0.0, -1.0) * cx).norm() < 1e-9);
    }
}
