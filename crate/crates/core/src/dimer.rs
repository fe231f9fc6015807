//! The dimerized chain and its momentum-space reduction.
//!
//! `h_t` has bonds `1 + t` on `(2k, 2k+1)` and `1 − t` on `(2k+1, 2k+2)`.
//! The flow runs with `v = h_{−t}`, so `h_t` starts at the unstable fixed
//! point in the blocks where `h_t ≈ −v` and relaxes to `v` elsewhere.
//!
//! # Block reduction
//!
//! On a ring of even length `n`, the pair `|θ⟩, i|θ+π⟩` with
//! `|θ⟩_x = e^{iθx}/√n` spans an invariant subspace of every 2-periodic
//! symmetric hopping matrix. In that basis `h_t` restricted to the pair is
//! `a σ_x + b σ_z` with `(a, b) = (2t sin θ, 2 cos θ)`; see
//! [`exact_block`]. The commonly quoted shorthand `t σ_x + 2 cos θ σ_z`
//! (from [`block_hamiltonian`]) has the same fixed-point structure and the
//! same behaviour near `cos θ = 0` up to rescaling `t`.
//!
//! With `h = a σ_x + b σ_z` and `v = α σ_x + β σ_z`, using
//! `[σ_x, σ_z] = −2iσ_y`, `[σ_y, σ_x] = −2iσ_z`, `[σ_y, σ_z] = 2iσ_x`:
//!
//! ```text
//! [v, h]      = (αb − βa)[σ_x, σ_z] = −2i c σ_y,          c = αb − βa
//! [[v, h], h] = −2i c (a[σ_y, σ_x] + b[σ_y, σ_z]) = 4c (b σ_x − a σ_z)
//! ```
//!
//! so `∂_B h = 4[[v,h],h]` becomes
//!
//! ```text
//! ȧ = 16 c b,    ḃ = −16 c a.
//! ```
//!
//! This is a rotation, so `a² + b²` is conserved. Writing
//! `h = ρ(cos φ, sin φ)`, `v = σ(cos ψ, sin ψ)` and `χ = φ − ψ` gives
//! `c = ρσ sin χ` and `χ̇ = −16ρσ sin χ`, which integrates to
//!
//! ```text
//! tan(χ(B)/2) = tan(χ(0)/2) · e^{−16ρσB}.
//! ```
//!
//! `χ = 0` (h = v) is stable and `χ = π` (h = −v) is unstable.
//! [`block_flow`] integrates the ODE numerically and
//! [`block_flow_closed_form`] evaluates the solution; both are checked
//! against a dense 2×2 double-bracket integration in the tests.
//!
//! # Real space
//!
//! With `θ_j = 2πj/n` for `j < n/2` and `d = (x − y) mod n`, the
//! reconstructed matrix vanishes for `x ≡ y (mod 2)` and otherwise equals
//!
//! ```text
//! H(x, y) = (2/n) Σ_j Re[e^{iθ_j d} (b_j ± i a_j)],   + for even x.
//! ```
//!
//! It is invariant under translation by two sites, so `‖H‖_r` is evaluated
//! through 2×2 Bloch blocks with FFTs instead of a dense eigensolver.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::Geometry;
use crate::matrix::{CouplingMatrix, Symmetry};
use crate::ode::{IntegratorConfig, Stepper};
use crate::output::fmt_f64;

/// Prefactor of the block ODE (`4` from the flow times `4` from the Pauli algebra).
pub const BLOCK_RATE: f64 = 16.0;

/// Profiles below this are treated as exact zeros by [`fit_xi`].
pub const NOISE_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockState {
    pub theta: f64,
    pub a: f64,
    pub b: f64,
}

impl BlockState {
    pub fn norm_sq(&self) -> f64 {
        self.a * self.a + self.b * self.b
    }

    fn with(self, (a, b): (f64, f64)) -> Self {
        Self { a, b, ..self }
    }
}

/// `h_t` on a chain of even length `n`: bonds `1 + t` on `(2k, 2k+1)` and
/// `1 − t` on `(2k+1, 2k+2)`, closing the ring with `(n−1, 0)` if periodic.
pub fn build_dimer_h(t: f64, n: usize, geometry: Geometry) -> Result<CouplingMatrix> {
    if n % 2 != 0 || n == 0 {
        return Err(invalid(format!("the dimerized chain needs an even number of sites, got {n}")));
    }
    if !t.is_finite() {
        return Err(invalid("t must be finite"));
    }
    let bonds = match geometry {
        Geometry::ChainOpen => n - 1,
        Geometry::ChainPeriodic if n >= 4 => n,
        Geometry::ChainPeriodic => return Err(invalid("a periodic dimerized chain needs n ≥ 4")),
    };
    let mut h = CouplingMatrix::zeros(n, Symmetry::Symmetric);
    for k in 0..bonds {
        let value = if k % 2 == 0 { 1.0 + t } else { 1.0 - t };
        h.set_pair(k, (k + 1) % n, value)?;
    }
    Ok(h)
}

/// Shorthand block `t σ_x + 2 cos θ σ_z` as `(a, b) = (t, 2 cos θ)`.
pub fn block_hamiltonian(t: f64, theta: f64) -> (f64, f64) {
    (t, 2.0 * theta.cos())
}

/// Block of `h_t` in the basis `|θ⟩, i|θ+π⟩`: `(2t sin θ, 2 cos θ)`.
///
/// `cos θ` is set to exactly zero at `θ = π/2` so that block sits on the
/// unstable fixed point without rounding.
pub fn exact_block(t: f64, theta: f64) -> (f64, f64) {
    let c = if theta == std::f64::consts::FRAC_PI_2 { 0.0 } else { theta.cos() };
    (2.0 * t * theta.sin(), 2.0 * c)
}

/// Right-hand side of the block ODE: `(16cb, −16ca)` with `c = αb − βa`.
pub fn block_rhs((a, b): (f64, f64), (alpha, beta): (f64, f64)) -> (f64, f64) {
    let c = alpha * b - beta * a;
    (BLOCK_RATE * c * b, -BLOCK_RATE * c * a)
}

/// Integrates the block ODE to `B`.
pub fn block_flow(initial: BlockState, v_block: (f64, f64), b: f64, cfg: &IntegratorConfig) -> Result<BlockState> {
    if !(b >= 0.0) {
        return Err(invalid("B must be nonnegative"));
    }
    let rhs = move |_: f64, y: &Vec<f64>| {
        let (da, db) = block_rhs((y[0], y[1]), v_block);
        vec![da, db]
    };
    let mut stepper = Stepper::new(rhs, 0.0, vec![initial.a, initial.b], *cfg)?;
    stepper.advance_to(b)?;
    let y = stepper.state();
    Ok(initial.with((y[0], y[1])))
}

/// `tan(χ/2)` for the signed angle `χ` from `v` to `h`, computed without
/// cancellation near `χ = ±π`.
fn tan_half_angle((a, b): (f64, f64), (alpha, beta): (f64, f64)) -> f64 {
    let cross = alpha * b - beta * a;
    let dot = alpha * a + beta * b;
    let p = (a.hypot(b)) * alpha.hypot(beta);
    if dot >= 0.0 {
        cross / (p + dot)
    } else {
        (p - dot) / cross
    }
}

/// Closed-form solution `tan(χ(B)/2) = tan(χ(0)/2) e^{−16ρσB}`.
pub fn block_flow_closed_form(initial: BlockState, v_block: (f64, f64), b: f64) -> BlockState {
    let h = (initial.a, initial.b);
    let rho = h.0.hypot(h.1);
    let sigma = v_block.0.hypot(v_block.1);
    if rho == 0.0 || sigma == 0.0 {
        return initial;
    }
    let decay = (-BLOCK_RATE * rho * sigma * b).exp();
    let chi = 2.0 * (tan_half_angle(h, v_block) * decay).atan();
    let psi = v_block.1.atan2(v_block.0);
    initial.with((rho * (psi + chi).cos(), rho * (psi + chi).sin()))
}

/// Momenta `θ_j = 2πj/n`, `j = 0..n/2`; one per `(θ, θ+π)` pair.
pub fn momentum_grid(n: usize) -> Vec<f64> {
    (0..n / 2)
        .map(|j| {
            if 4 * j == n {
                std::f64::consts::FRAC_PI_2
            } else {
                2.0 * std::f64::consts::PI * j as f64 / n as f64
            }
        })
        .collect()
}

/// Evolved blocks of `h_t` on the full momentum grid at flow time `B`.
pub fn evolve_blocks(t: f64, n: usize, b: f64) -> Vec<BlockState> {
    momentum_grid(n)
        .into_par_iter()
        .map(|theta| {
            let (a, bb) = exact_block(t, theta);
            block_flow_closed_form(BlockState { theta, a, b: bb }, exact_block(-t, theta), b)
        })
        .collect()
}

/// Real-space form of a 2-periodic symmetric ring matrix.
///
/// `kernel[p][d]` is `H(x, y)` for `x ≡ p (mod 2)` and `d = (x − y) mod n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RingKernel {
    n: usize,
    kernel: [Vec<f64>; 2],
}

impl RingKernel {
    /// Inverse transform of a full set of blocks (see the module docs).
    pub fn from_blocks(n: usize, blocks: &[BlockState]) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(invalid(format!("ring length must be even and at least 4, got {n}")));
        }
        if blocks.len() != n / 2 {
            return Err(invalid(format!("expected {} blocks for n = {n}, got {}", n / 2, blocks.len())));
        }
        let (cos_t, sin_t): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|k| {
                let phase = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                (phase.cos(), phase.sin())
            })
            .unzip();
        let scale = 2.0 / n as f64;
        let rows: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|d| {
                if d % 2 == 0 {
                    return (0.0, 0.0);
                }
                let (mut bc, mut as_) = (0.0, 0.0);
                for (j, blk) in blocks.iter().enumerate() {
                    let k = (j * d) % n;
                    bc += blk.b * cos_t[k];
                    as_ += blk.a * sin_t[k];
                }
                (scale * (bc - as_), scale * (bc + as_))
            })
            .collect();
        let (even, odd) = rows.into_iter().unzip();
        Ok(Self { n, kernel: [even, odd] })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.kernel[x % 2][(x + self.n - y) % self.n]
    }

    /// Dense matrix, symmetrized to absorb rounding in the transform.
    pub fn to_matrix(&self) -> Result<CouplingMatrix> {
        let raw = DMatrix::from_fn(self.n, self.n, |x, y| self.entry(x, y));
        CouplingMatrix::from_projected(&raw, Symmetry::Symmetric)
    }

    /// Upper locality estimate `‖H masked to dist > r‖` via Bloch blocks.
    pub fn masked_norm(&self, r: f64) -> f64 {
        BlochNorm::new(self.n).masked_norm(self, r)
    }

    /// [`RingKernel::masked_norm`] on a list of radii.
    pub fn profile(&self, radii: &[f64]) -> Vec<f64> {
        let bloch = BlochNorm::new(self.n);
        radii.iter().map(|&r| bloch.masked_norm(self, r)).collect()
    }
}

/// Reusable FFT plan for [`RingKernel::masked_norm`].
struct BlochNorm {
    cells: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl BlochNorm {
    fn new(n: usize) -> Self {
        let cells = n / 2;
        Self {
            cells,
            fft: FftPlanner::new().plan_fft_forward(cells),
        }
    }

    fn masked_norm(&self, k: &RingKernel, r: f64) -> f64 {
        let n = k.n;
        let lat_dist = |d: usize| d.min(n - d) as f64;
        // h_{αβ}(m) = H(2m + α, β), masked by the distance of that pair.
        let mut blocks = [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()]];
        for (alpha, row) in blocks.iter_mut().enumerate() {
            for (beta, buf) in row.iter_mut().enumerate() {
                let mut data: Vec<Complex64> = (0..self.cells)
                    .map(|m| {
                        let d = (2 * m + alpha + n - beta) % n;
                        let value = if lat_dist(d) > r { k.kernel[alpha][d] } else { 0.0 };
                        Complex64::new(value, 0.0)
                    })
                    .collect();
                self.fft.process(&mut data);
                *buf = data;
            }
        }
        (0..self.cells)
            .map(|l| {
                let p = blocks[0][0][l].re;
                let s = blocks[1][1][l].re;
                let q = blocks[0][1][l].norm();
                let mean = 0.5 * (p + s);
                let half_gap = (0.5 * (p - s)).hypot(q);
                mean.abs() + half_gap
            })
            .fold(0.0, f64::max)
    }
}

/// Real-space matrix of `h_t(B)` on a ring of `n` sites.
///
/// `theta_grid_size` must be `n/2`, one block per `(θ, θ+π)` pair.
pub fn real_space_reconstruct(t: f64, n: usize, b: f64, theta_grid_size: usize) -> Result<CouplingMatrix> {
    reconstruct_kernel(t, n, b, theta_grid_size)?.to_matrix()
}

pub fn reconstruct_kernel(t: f64, n: usize, b: f64, theta_grid_size: usize) -> Result<RingKernel> {
    if n % 2 != 0 || n < 4 {
        return Err(invalid(format!("reconstruction needs an even ring with n ≥ 4, got {n}")));
    }
    if theta_grid_size != n / 2 {
        return Err(invalid(format!(
            "theta grid size {theta_grid_size} does not match n = {n} (expected {})",
            n / 2
        )));
    }
    if !(b >= 0.0) || !t.is_finite() {
        return Err(invalid("B must be nonnegative and t finite"));
    }
    RingKernel::from_blocks(n, &evolve_blocks(t, n, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub lo: f64,
    pub hi: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self { lo: 1e-10, hi: 1e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiStatus {
    Fitted,
    /// Profile below the noise floor at every radius; `ξ ≤ 1`.
    Compact,
    /// Profile above the window at every radius; `ξ` exceeds the ring.
    Saturated,
    /// Fewer than three points in the window, or a non-decaying fit.
    NoFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiFit {
    pub xi: Option<f64>,
    pub status: XiStatus,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// `ξ = −1/slope` of `ln profile(r)` against `r` over the points inside
/// `window`.
pub fn fit_xi(radii: &[f64], profile: &[f64], window: FitWindow) -> XiFit {
    let (xs, ys): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(profile)
        .filter(|(_, &p)| p >= window.lo && p <= window.hi)
        .map(|(&r, &p)| (r, p.ln()))
        .unzip();
    let points = xs.len();
    if profile.iter().all(|&p| p <= NOISE_FLOOR) {
        return XiFit { xi: Some(1.0), status: XiStatus::Compact, points };
    }
    if points < 3 {
        let status = if profile.iter().all(|&p| p > window.hi) {
            XiStatus::Saturated
        } else {
            XiStatus::NoFit
        };
        return XiFit { xi: None, status, points };
    }
    match linear_fit(&xs, &ys) {
        Some(fit) if fit.slope < 0.0 => XiFit {
            xi: Some(-1.0 / fit.slope),
            status: XiStatus::Fitted,
            points,
        },
        _ => XiFit { xi: None, status: XiStatus::NoFit, points },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    /// `π/2 − θ*`, resolved on a log scale.
    pub phi: f64,
    pub theta: f64,
    /// `|cos θ*| = sin φ*`, accurate even when `θ*` rounds to `π/2`.
    pub abs_cos: f64,
}

/// Evolved exact block at `θ = π/2 − φ`, parametrized by `φ` so blocks near
/// the unstable point are resolved below the spacing of `f64` around `π/2`.
fn evolved_block_at_phi(t: f64, phi: f64, b: f64) -> ((f64, f64), (f64, f64)) {
    let (s, c) = (phi.cos(), phi.sin()); // sin θ, cos θ
    let v = (-2.0 * t * s, 2.0 * c);
    let rho_sq = 4.0 * t * t * s * s + 4.0 * c * c;
    // tan(χ₀/2) = −t cot φ for h = (2t sin θ, 2 cos θ) against v.
    let chi = 2.0 * (-t * (s / c) * (-BLOCK_RATE * rho_sq * b).exp()).atan();
    let psi = v.1.atan2(v.0);
    let rho = rho_sq.sqrt();
    ((rho * (psi + chi).cos(), rho * (psi + chi).sin()), v)
}

/// Angle `θ* ∈ (0, π/2)` at which the evolved block is equidistant from
/// `+v` and `−v`, found by bisection in `ln(π/2 − θ)`.
pub fn crossover(t: f64, b: f64) -> Result<Crossover> {
    if t == 0.0 || !t.is_finite() || !(b >= 0.0) {
        return Err(invalid("crossover needs t ≠ 0 and B ≥ 0"));
    }
    // Positive while the block is still closer to −v.
    let closer_to_minus_v = |phi: f64| {
        let (h, v) = evolved_block_at_phi(t, phi, b);
        h.0 * v.0 + h.1 * v.1 < 0.0
    };
    let (mut lo, mut hi) = (1e-300_f64.ln(), std::f64::consts::FRAC_PI_2.ln());
    if !closer_to_minus_v(lo.exp()) {
        return Err(invalid(format!("no crossover resolvable at B = {b}")));
    }
    if closer_to_minus_v(hi.exp()) {
        return Err(invalid(format!("block at θ = 0 has not relaxed at B = {b}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if closer_to_minus_v(mid.exp()) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let phi = (0.5 * (lo + hi)).exp();
    Ok(Crossover {
        phi,
        theta: std::f64::consts::FRAC_PI_2 - phi,
        abs_cos: phi.sin(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub b: f64,
    pub xi: Option<f64>,
    pub status: XiStatus,
    pub fit_points: usize,
    pub theta_star: f64,
    pub abs_cos_theta_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub t: f64,
    pub n: usize,
    pub window: FitWindow,
    pub rows: Vec<GrowthRow>,
    /// Fit of `ln ξ` against `B` over the rows with a fitted `ξ`.
    pub log_xi_fit: Option<LinearFit>,
}

impl GrowthReport {
    pub fn b_list(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.b).collect()
    }

    /// Every row has a fitted `ξ` and the values strictly increase.
    pub fn xi_strictly_increasing(&self) -> bool {
        let xi: Option<Vec<f64>> = self.rows.iter().map(|r| r.xi).collect();
        match xi {
            Some(xi) => self.rows.iter().all(|r| r.status == XiStatus::Fitted) && xi.windows(2).all(|w| w[1] > w[0]),
            None => false,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "B,xi,theta_star,abs_cos_theta_star")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(r.b),
                fmt_f64(r.xi.unwrap_or(f64::NAN)),
                fmt_f64(r.theta_star),
                fmt_f64(r.abs_cos_theta_star)
            )?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "t": self.t,
            "n": self.n,
            "window": self.window,
            "slope": self.log_xi_fit.map(|f| f.slope),
            "intercept": self.log_xi_fit.map(|f| f.intercept),
            "r_squared": self.log_xi_fit.map(|f| f.r_squared),
            "statuses": self.rows.iter().map(|r| r.status).collect::<Vec<_>>(),
        })
    }
}

/// Integer radii `1..n/4` used for the decay fit; larger radii see the
/// wrap-around of the ring.
pub fn growth_radii(n: usize) -> Vec<f64> {
    (1..n / 4).map(|r| r as f64).collect()
}

/// Reconstructs `h_t(B)` for each `B`, fits the real-space decay length and
/// locates the momentum crossover.
pub fn measure_growth(t: f64, n: usize, b_list: &[f64], window: FitWindow) -> Result<GrowthReport> {
    if !(window.lo > 0.0 && window.lo < window.hi) {
        return Err(invalid("fit window needs 0 < lo < hi"));
    }
    if n < 16 {
        return Err(invalid("measure_growth needs n ≥ 16"));
    }
    let radii = growth_radii(n);
    let rows = b_list
        .par_iter()
        .map(|&b| {
            let kernel = reconstruct_kernel(t, n, b, n / 2)?;
            let fit = fit_xi(&radii, &kernel.profile(&radii), window);
            let cross = crossover(t, b)?;
            Ok(GrowthRow {
                b,
                xi: fit.xi,
                status: fit.status,
                fit_points: fit.points,
                theta_star: cross.theta,
                abs_cos_theta_star: cross.abs_cos,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (bs, logs): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.status == XiStatus::Fitted)
        .map(|r| (r.b, r.xi.unwrap().ln()))
        .unzip();
    Ok(GrowthReport {
        t,
        n,
        window,
        rows,
        log_xi_fit: linear_fit(&bs, &logs),
    })
}
