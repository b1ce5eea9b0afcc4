//! Eigenstructure of the moment matrices, fluctuation splitting at uniform and
//! mixed-order interfaces, wave limiters and the exact solution of the
//! generalised Riemann problem.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, Matrix};
use crate::moment_model::{build_a_1d, build_b_tilde, check_order, resize_into, state_len, MomentVector};

/// Eigenvalues below this magnitude are set to exactly zero.
const ZERO_SPEED: f64 = 1e-13;

/// A constant moment matrix together with its eigendecomposition `A = R diag(lambda) R^-1`.
#[derive(Clone, Debug)]
pub struct HyperbolicOperator {
    order: usize,
    matrix: Matrix,
    eigenvalues: Vec<f64>,
    r: Matrix,
    r_inv: Matrix,
    max_speed: f64,
}

impl HyperbolicOperator {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Right eigenvectors as unit-norm columns.
    pub fn right_eigenvectors(&self) -> &Matrix {
        &self.r
    }

    pub fn inverse_eigenvectors(&self) -> &Matrix {
        &self.r_inv
    }

    /// Largest eigenvalue magnitude.
    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    /// Wave strengths `alpha = R^-1 dq`.
    #[inline]
    pub fn decompose_into(&self, dq: &[f64], alpha: &mut [f64]) {
        self.r_inv.mul_vec_into(dq, alpha);
    }

    /// `out = sum_p beta_p r_p`.
    #[inline]
    pub fn synthesize_into(&self, beta: &[f64], out: &mut [f64]) {
        self.r.mul_vec_into(beta, out);
    }

    /// `max |R diag(lambda) R^-1 - A|`.
    pub fn reconstruction_error(&self) -> f64 {
        let n = self.dim();
        let mut rl = self.r.clone();
        for i in 0..n {
            for j in 0..n {
                rl[(i, j)] *= self.eigenvalues[j];
            }
        }
        rl.mul(&self.r_inv).max_abs_diff(&self.matrix)
    }
}

/// Eigendecomposition of a moment matrix whose only asymmetry is the `(1,2)/(2,1)`
/// or `(1,3)/(3,1)` pair scaled by 8, as for the 1D matrix and the constant part of the
/// z-direction matrix.
pub fn eigendecompose(a: &Matrix, order: usize) -> Result<HyperbolicOperator> {
    check_order(order)?;
    let n = a.dim();
    if n != state_len(order) {
        return Err(Error::Dimension { expected: state_len(order), found: n });
    }
    let mut d = vec![1.0; n];
    d[0] = 1.0 / (2.0 * std::f64::consts::SQRT_2);
    let mut sym = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            sym[(i, j)] = d[i] * a[(i, j)] / d[j];
        }
    }
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    if sym.max_abs_diff(&sym.transpose()) > 1e-14 * scale {
        return Err(Error::Decomposition("matrix is not symmetrizable by the density scaling".into()));
    }
    let eig = jacobi_eigen(&sym)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.values[i].total_cmp(&eig.values[j]));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut r = Matrix::zeros(n);
    let mut r_inv = Matrix::zeros(n);
    for (col, &k) in idx.iter().enumerate() {
        let lam = eig.values[k];
        eigenvalues.push(if lam.abs() < ZERO_SPEED { 0.0 } else { lam });
        // column of D^-1 V, normalized; matching row of V^T D, rescaled
        let norm = (0..n).map(|i| (eig.vectors[(i, k)] / d[i]).powi(2)).sum::<f64>().sqrt();
        for i in 0..n {
            r[(i, col)] = eig.vectors[(i, k)] / d[i] / norm;
            r_inv[(col, i)] = eig.vectors[(i, k)] * d[i] * norm;
        }
    }
    let max_speed = eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let op = HyperbolicOperator { order, matrix: a.clone(), eigenvalues, r, r_inv, max_speed };
    let err = op.reconstruction_error();
    if !(err < 1e-12 * scale) {
        return Err(Error::Decomposition(format!("reconstruction residual {err:e}")));
    }
    Ok(op)
}

type Cache = RwLock<HashMap<usize, Arc<HyperbolicOperator>>>;

fn cached(cache: &'static OnceLock<Cache>, order: usize, build: fn(usize) -> Result<Matrix>) -> Result<Arc<HyperbolicOperator>> {
    check_order(order)?;
    let cache = cache.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(op) = cache.read().expect("operator cache poisoned").get(&order) {
        return Ok(op.clone());
    }
    let op = Arc::new(eigendecompose(&build(order)?, order)?);
    Ok(cache
        .write()
        .expect("operator cache poisoned")
        .entry(order)
        .or_insert(op)
        .clone())
}

/// Cached decomposition of the 1D matrix; also the velocity-free part of the 2D x-matrix.
pub fn operator_a(order: usize) -> Result<Arc<HyperbolicOperator>> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    cached(&CACHE, order, build_a_1d)
}

/// Cached decomposition of the velocity-free part of the 2D z-matrix.
pub fn operator_b(order: usize) -> Result<Arc<HyperbolicOperator>> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    cached(&CACHE, order, build_b_tilde)
}

/// Flux limiter applied to each wave.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Limiter {
    #[default]
    Mc,
    Minmod,
    Superbee,
    VanLeer,
    /// No limiting (Lax-Wendroff corrections everywhere).
    Unlimited,
    /// Corrections switched off.
    FirstOrder,
}

impl Limiter {
    #[inline]
    pub fn phi(self, theta: f64) -> f64 {
        match self {
            Limiter::Mc => (0.5 * (1.0 + theta)).min(2.0).min(2.0 * theta).max(0.0),
            Limiter::Minmod => theta.min(1.0).max(0.0),
            Limiter::Superbee => (2.0 * theta).min(1.0).max(theta.min(2.0)).max(0.0),
            Limiter::VanLeer => (theta + theta.abs()) / (1.0 + theta.abs()),
            Limiter::Unlimited => 1.0,
            Limiter::FirstOrder => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Limiter::Mc => "mc",
            Limiter::Minmod => "minmod",
            Limiter::Superbee => "superbee",
            Limiter::VanLeer => "vanleer",
            Limiter::Unlimited => "none",
            Limiter::FirstOrder => "first-order",
        }
    }
}

impl FromStr for Limiter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "mc" => Limiter::Mc,
            "minmod" => Limiter::Minmod,
            "superbee" => Limiter::Superbee,
            "vanleer" | "van-leer" => Limiter::VanLeer,
            "none" | "unlimited" => Limiter::Unlimited,
            "first-order" | "firstorder" | "godunov" => Limiter::FirstOrder,
            other => return Err(Error::Config(format!("unknown limiter '{other}'"))),
        })
    }
}

/// Ratio of the upwind wave strength to the local one, 0 for a vanishing local wave.
#[inline]
pub(crate) fn strength_ratio(upwind: f64, local: f64) -> f64 {
    if local == 0.0 {
        0.0
    } else {
        upwind / local
    }
}

/// A single wave of a Riemann solution.
#[derive(Clone, Debug, PartialEq)]
pub struct Wave {
    pub speed: f64,
    pub vector: Vec<f64>,
}

/// Left- and right-going flux differences at an interface.
#[derive(Clone, Debug, PartialEq)]
pub struct Fluctuations {
    pub aminus: Vec<f64>,
    pub aplus: Vec<f64>,
    pub waves: Vec<Wave>,
}

fn waves_of(op: &HyperbolicOperator, alpha: &[f64]) -> Vec<Wave> {
    let n = op.dim();
    (0..n)
        .map(|p| Wave {
            speed: op.eigenvalues[p],
            vector: (0..n).map(|i| alpha[p] * op.r[(i, p)]).collect(),
        })
        .collect()
}

fn check_dim(q: &MomentVector, op: &HyperbolicOperator) -> Result<()> {
    if q.len() != op.dim() {
        Err(Error::Dimension { expected: op.dim(), found: q.len() })
    } else {
        Ok(())
    }
}

/// Fluctuation splitting of a same-order jump.
pub fn fluctuations_uniform(ql: &MomentVector, qr: &MomentVector, op: &HyperbolicOperator) -> Result<Fluctuations> {
    check_dim(ql, op)?;
    check_dim(qr, op)?;
    let n = op.dim();
    let dq: Vec<f64> = qr.as_slice().iter().zip(ql.as_slice()).map(|(r, l)| r - l).collect();
    let mut alpha = vec![0.0; n];
    op.decompose_into(&dq, &mut alpha);
    let minus: Vec<f64> = (0..n).map(|p| op.eigenvalues[p].min(0.0) * alpha[p]).collect();
    let plus: Vec<f64> = (0..n).map(|p| op.eigenvalues[p].max(0.0) * alpha[p]).collect();
    let mut aminus = vec![0.0; n];
    let mut aplus = vec![0.0; n];
    op.synthesize_into(&minus, &mut aminus);
    op.synthesize_into(&plus, &mut aplus);
    Ok(Fluctuations { aminus, aplus, waves: waves_of(op, &alpha) })
}

/// Which neighbour of a mixed interface carries the lower moment order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LowSide {
    Left,
    Right,
}

/// Conservative fluctuations at an interface between a low-order and a high-order cell.
///
/// The low-order state is zero-padded to the high order. The fluctuation pointing into the
/// high-order cell is the sum of its waves; the other is the remainder of `A (Q_r - Q_l)`.
/// Both vectors have the high-order length; the caller applies only the leading `2N+1`
/// components on the low-order side.
pub fn fluctuations_interface(
    q_low: &MomentVector,
    q_high: &MomentVector,
    side: LowSide,
    op_high: &HyperbolicOperator,
) -> Result<Fluctuations> {
    check_dim(q_high, op_high)?;
    if q_low.order() >= q_high.order() {
        return Err(Error::ContractViolation(format!(
            "interface orders {} and {} are not strictly increasing; use the uniform splitting",
            q_low.order(),
            q_high.order()
        )));
    }
    let n = op_high.dim();
    let padded = q_low.resized(q_high.order());
    let (ql, qr) = match side {
        LowSide::Left => (padded.as_slice(), q_high.as_slice()),
        LowSide::Right => (q_high.as_slice(), padded.as_slice()),
    };
    let dq: Vec<f64> = qr.iter().zip(ql).map(|(r, l)| r - l).collect();
    let mut alpha = vec![0.0; n];
    op_high.decompose_into(&dq, &mut alpha);
    let total = op_high.matrix.mul_vec(&dq);
    let mut toward_high = vec![0.0; n];
    let beta: Vec<f64> = (0..n)
        .map(|p| {
            let lam = op_high.eigenvalues[p];
            match side {
                LowSide::Left => lam.max(0.0) * alpha[p],
                LowSide::Right => lam.min(0.0) * alpha[p],
            }
        })
        .collect();
    op_high.synthesize_into(&beta, &mut toward_high);
    let remainder: Vec<f64> = total.iter().zip(&toward_high).map(|(t, h)| t - h).collect();
    let (aminus, aplus) = match side {
        LowSide::Left => (remainder, toward_high),
        LowSide::Right => (toward_high, remainder),
    };
    Ok(Fluctuations { aminus, aplus, waves: waves_of(op_high, &alpha) })
}

/// Limits waves of one interface against the same-family waves of its neighbours.
///
/// `left` and `right` hold the waves at the interfaces to the left and right; the upwind
/// one is chosen by the sign of each speed. Zero-speed waves carry no correction and are
/// returned unchanged.
pub fn limit_waves(
    waves: &[Vec<f64>],
    left: &[Vec<f64>],
    right: &[Vec<f64>],
    speeds: &[f64],
    limiter: Limiter,
) -> Vec<Vec<f64>> {
    waves
        .iter()
        .enumerate()
        .map(|(p, w)| {
            let speed = speeds[p];
            if speed == 0.0 {
                return w.clone();
            }
            let up = if speed > 0.0 { &left[p] } else { &right[p] };
            let ww: f64 = w.iter().map(|v| v * v).sum();
            let theta = if ww == 0.0 {
                0.0
            } else {
                up.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / ww
            };
            let phi = limiter.phi(theta);
            w.iter().map(|v| phi * v).collect()
        })
        .collect()
}

/// Scratch buffers for the per-interface kernels, sized for one order.
#[derive(Clone, Debug)]
pub(crate) struct InterfaceScratch {
    beta_l: Vec<f64>,
    beta_r: Vec<f64>,
}

impl InterfaceScratch {
    pub(crate) fn new(len: usize) -> Self {
        Self { beta_l: vec![0.0; len], beta_r: vec![0.0; len] }
    }
}

/// Wave-propagation contributions of a same-order interface.
///
/// `alpha` are the local wave strengths, `alpha_left`/`alpha_right` those of the neighbouring
/// interfaces in the same basis. Eigenvalues are shifted by `shift`. Writes
/// `to_left = A^- dq + F` and `to_right = A^+ dq - F`.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn uniform_contributions(
    op: &HyperbolicOperator,
    shift: f64,
    nu: f64,
    limiter: Limiter,
    alpha: &[f64],
    alpha_left: &[f64],
    alpha_right: &[f64],
    scratch: &mut InterfaceScratch,
    to_left: &mut [f64],
    to_right: &mut [f64],
) {
    let n = op.dim();
    for p in 0..n {
        let lam = op.eigenvalues[p] + shift;
        let a = alpha[p];
        let correction = if lam == 0.0 || limiter == Limiter::FirstOrder {
            0.0
        } else {
            let up = if lam > 0.0 { alpha_left[p] } else { alpha_right[p] };
            let phi = limiter.phi(strength_ratio(up, a));
            0.5 * lam.abs() * (1.0 - nu * lam.abs()) * phi * a
        };
        scratch.beta_l[p] = lam.min(0.0) * a + correction;
        scratch.beta_r[p] = lam.max(0.0) * a - correction;
    }
    op.synthesize_into(&scratch.beta_l[..n], to_left);
    op.synthesize_into(&scratch.beta_r[..n], to_right);
}

/// Signed correction flux of one family set: `sum_p c_p phi_p alpha_p r_p` restricted to the
/// waves selected by `select`, accumulated into `out` (length of `op`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn add_correction(
    op: &HyperbolicOperator,
    nu: f64,
    limiter: Limiter,
    alpha: &[f64],
    alpha_upwind: &[f64],
    select: impl Fn(f64) -> bool,
    out: &mut [f64],
) {
    if limiter == Limiter::FirstOrder {
        return;
    }
    let n = op.dim();
    let beta: Vec<f64> = (0..n)
        .map(|p| {
            let lam = op.eigenvalues[p];
            if lam == 0.0 || !select(lam) {
                return 0.0;
            }
            let phi = limiter.phi(strength_ratio(alpha_upwind[p], alpha[p]));
            0.5 * lam.abs() * (1.0 - nu * lam.abs()) * phi * alpha[p]
        })
        .collect();
    let mut tmp = vec![0.0; n];
    op.synthesize_into(&beta, &mut tmp);
    for (o, t) in out.iter_mut().zip(&tmp) {
        *o += t;
    }
}

/// Jump `resize(qr) - resize(ql)` decomposed at the order of `op`.
pub(crate) fn decompose_jump(op: &HyperbolicOperator, ql: &[f64], qr: &[f64]) -> Vec<f64> {
    let n = op.dim();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    resize_into(ql, &mut a);
    resize_into(qr, &mut b);
    for (bi, ai) in b.iter_mut().zip(&a) {
        *bi -= ai;
    }
    let mut alpha = vec![0.0; n];
    op.decompose_into(&b, &mut alpha);
    alpha
}

/// State of the generalised Riemann problem at `x / t`.
///
/// For `x/t < 0` the state has the left order and collects the left-going waves of the
/// jump decomposed at the left order; for `x/t >= 0` it has the right order and removes the
/// right-going waves of the jump decomposed at the right order. On a wave speed the
/// right-limit state is returned.
pub fn sample_generalised_rp(ql: &MomentVector, qr: &MomentVector, x_over_t: f64) -> Result<MomentVector> {
    if x_over_t < 0.0 {
        let op = operator_a(ql.order())?;
        let alpha = decompose_jump(&op, ql.as_slice(), qr.as_slice());
        let mut q = ql.as_slice().to_vec();
        for p in 0..op.dim() {
            let lam = op.eigenvalues[p];
            if lam < 0.0 && lam <= x_over_t {
                for (i, v) in q.iter_mut().enumerate() {
                    *v += alpha[p] * op.r[(i, p)];
                }
            }
        }
        MomentVector::new(q)
    } else {
        let op = operator_a(qr.order())?;
        let alpha = decompose_jump(&op, ql.as_slice(), qr.as_slice());
        let mut q = qr.as_slice().to_vec();
        for p in 0..op.dim() {
            let lam = op.eigenvalues[p];
            if lam > 0.0 && lam > x_over_t {
                for (i, v) in q.iter_mut().enumerate() {
                    *v -= alpha[p] * op.r[(i, p)];
                }
            }
        }
        MomentVector::new(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment_model::{build_b_2d, steady_state_moments};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng, order: usize) -> MomentVector {
        MomentVector::new((0..state_len(order)).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn order_one_spectrum_matches_characteristic_polynomial() {
        let op = operator_a(1).unwrap();
        let r = 1.0 / (2.0 * 2f64.sqrt());
        let ev = op.eigenvalues();
        assert!((ev[0] + r).abs() < 1e-14);
        assert_eq!(ev[1], 0.0);
        assert!((ev[2] - r).abs() < 1e-14);
    }

    #[test]
    fn reconstruction_and_centred_zero_speed() {
        for n in 1..=20 {
            let op = operator_a(n).unwrap();
            assert!(op.reconstruction_error() < 1e-12 * op.matrix().max_abs(), "N={n}");
            assert_eq!(op.eigenvalues()[n], 0.0, "N={n}");
            assert_eq!(op.eigenvalues().iter().filter(|l| l.abs() < 1e-12).count(), 1);
            for w in op.eigenvalues().windows(2) {
                assert!(w[0] <= w[1]);
            }
            for p in 0..op.dim() {
                let norm: f64 = (0..op.dim()).map(|i| op.right_eigenvectors()[(i, p)].powi(2)).sum();
                assert!((norm - 1.0).abs() < 1e-13);
            }
            let b = operator_b(n).unwrap();
            assert!(b.reconstruction_error() < 1e-12 * b.matrix().max_abs());
        }
    }

    #[test]
    fn shifted_b_keeps_eigenvectors() {
        let b = operator_b(3).unwrap();
        let full = build_b_2d(3, 0.7).unwrap();
        let n = b.dim();
        for p in 0..n {
            let r: Vec<f64> = (0..n).map(|i| b.right_eigenvectors()[(i, p)]).collect();
            let ar = full.mul_vec(&r);
            let lam = b.eigenvalues()[p] + 0.7 - 1.5;
            for i in 0..n {
                assert!((ar[i] - lam * r[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn small_spectra_are_symmetric() {
        for n in 1..=8 {
            let ev = operator_a(n).unwrap().eigenvalues().to_vec();
            for k in 0..ev.len() {
                assert!((ev[k] + ev[ev.len() - 1 - k]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn order_one_unit_density_jump() {
        let op = operator_a(1).unwrap();
        let ql = MomentVector::zeros(1).unwrap();
        let qr = MomentVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        let f = fluctuations_uniform(&ql, &qr, &op).unwrap();
        let lp = 1.0 / (2.0 * 2f64.sqrt());
        let expect = [lp / 2.0, 0.0, -lp * lp / 2.0];
        for (a, b) in f.aplus.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
        let same = fluctuations_uniform(&qr, &qr, &op).unwrap();
        assert!(same.aminus.iter().chain(&same.aplus).all(|v| *v == 0.0));
        assert!(same.waves.iter().all(|w| w.vector.iter().all(|v| *v == 0.0)));
    }

    fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(1e-300_f64, |m, v| m.max(v.abs()));
        a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())) / scale
    }

    #[test]
    fn uniform_conservation_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 3, 5, 10] {
            let op = operator_a(n).unwrap();
            for _ in 0..1000 {
                let ql = random_state(&mut rng, n);
                let qr = random_state(&mut rng, n);
                let f = fluctuations_uniform(&ql, &qr, &op).unwrap();
                let dq: Vec<f64> = qr.as_slice().iter().zip(ql.as_slice()).map(|(a, b)| a - b).collect();
                let brute = op.matrix().mul_vec(&dq);
                let sum: Vec<f64> = f.aminus.iter().zip(&f.aplus).map(|(a, b)| a + b).collect();
                assert!(rel_diff(&sum, &brute) < 1e-12);
            }
        }
    }

    #[test]
    fn interface_conservation_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (n, m) in [(1, 2), (1, 10), (5, 10), (10, 20)] {
            let op = operator_a(m).unwrap();
            for _ in 0..200 {
                let low = random_state(&mut rng, n);
                let high = random_state(&mut rng, m);
                for side in [LowSide::Left, LowSide::Right] {
                    let f = fluctuations_interface(&low, &high, side, &op).unwrap();
                    let padded = low.resized(m);
                    let dq: Vec<f64> = match side {
                        LowSide::Left => high.as_slice().iter().zip(padded.as_slice()).map(|(a, b)| a - b).collect(),
                        LowSide::Right => padded.as_slice().iter().zip(high.as_slice()).map(|(a, b)| a - b).collect(),
                    };
                    let brute = build_a_1d(m).unwrap().mul_vec(&dq);
                    let sum: Vec<f64> = f.aminus.iter().zip(&f.aplus).map(|(a, b)| a + b).collect();
                    assert!(rel_diff(&sum, &brute) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn interface_with_steady_states() {
        let low = steady_state_moments(1.0, 1, 1.0, 1e-12).unwrap();
        let high = steady_state_moments(4.0, 2, 1.0, 1e-12).unwrap();
        let op = operator_a(2).unwrap();
        let f = fluctuations_interface(&low, &high, LowSide::Left, &op).unwrap();
        let dq: Vec<f64> = high.as_slice().iter().zip(low.resized(2).as_slice()).map(|(a, b)| a - b).collect();
        let a = build_a_1d(2).unwrap();
        let mut brute = vec![0.0; 5];
        for i in 0..5 {
            for j in 0..5 {
                brute[i] += a[(i, j)] * dq[j];
            }
        }
        let sum: Vec<f64> = f.aminus.iter().zip(&f.aplus).map(|(x, y)| x + y).collect();
        assert!(rel_diff(&sum, &brute) < 1e-13);
    }

    #[test]
    fn interface_rejects_non_increasing_orders() {
        let q = MomentVector::zeros(2).unwrap();
        let op = operator_a(2).unwrap();
        assert!(matches!(
            fluctuations_interface(&q, &q, LowSide::Left, &op),
            Err(Error::ContractViolation(_))
        ));
        let q1 = MomentVector::zeros(1).unwrap();
        assert!(matches!(fluctuations_uniform(&q1, &q, &op), Err(Error::Dimension { .. })));
    }

    #[test]
    fn limiter_values() {
        assert_eq!(Limiter::Minmod.phi(0.5), 0.5);
        assert_eq!(Limiter::Mc.phi(0.5), 0.75);
        assert_eq!(Limiter::Mc.phi(1.0), 1.0);
        assert_eq!(Limiter::Minmod.phi(1.0), 1.0);
        assert_eq!(Limiter::Superbee.phi(1.0), 1.0);
        assert_eq!(Limiter::Mc.phi(0.0), 0.0);
        assert_eq!(Limiter::Mc.phi(-1.0), 0.0);
        assert_eq!(Limiter::Superbee.phi(0.5), 1.0);
        assert_eq!(Limiter::Mc.phi(10.0), 2.0);
        assert_eq!("MC".parse::<Limiter>().unwrap(), Limiter::Mc);
        assert!("bogus".parse::<Limiter>().is_err());
    }

    #[test]
    fn limit_waves_cases() {
        let w = vec![vec![1.0, 2.0], vec![0.5, -1.0]];
        let speeds = [-1.0, 1.0];
        let same = limit_waves(&w, &w, &w, &speeds, Limiter::Mc);
        assert_eq!(same, w);
        let zero = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let iso = limit_waves(&w, &zero, &zero, &speeds, Limiter::Minmod);
        assert_eq!(iso, zero);
        let half: Vec<Vec<f64>> = w.iter().map(|v| v.iter().map(|x| 0.5 * x).collect()).collect();
        let out = limit_waves(&w, &half, &half, &speeds, Limiter::Mc);
        assert_eq!(out[0], vec![0.75, 1.5]);
        // vanishing local wave
        let out = limit_waves(&zero, &w, &w, &speeds, Limiter::Mc);
        assert_eq!(out, zero);
    }

    /// Classical linear Riemann solution by brute force: Q(xi) = Ql + sum_{lambda_p <= xi} W_p.
    fn classical(ql: &MomentVector, qr: &MomentVector, xi: f64) -> Vec<f64> {
        let op = operator_a(ql.order()).unwrap();
        let f = fluctuations_uniform(ql, qr, &op).unwrap();
        let mut q = ql.as_slice().to_vec();
        for w in &f.waves {
            if w.speed <= xi {
                for (a, b) in q.iter_mut().zip(&w.vector) {
                    *a += b;
                }
            }
        }
        q
    }

    #[test]
    fn sampled_uniform_rp_is_classical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1, 3, 6] {
            let ql = random_state(&mut rng, n);
            let qr = random_state(&mut rng, n);
            for xi in [-2.0, -0.3, -0.01, 0.0, 0.01, 0.2, 3.0] {
                let got = sample_generalised_rp(&ql, &qr, xi).unwrap();
                assert!(rel_diff(got.as_slice(), &classical(&ql, &qr, xi)) < 1e-12, "N={n} xi={xi}");
            }
            assert_eq!(sample_generalised_rp(&ql, &qr, -10.0).unwrap(), ql);
            assert!(rel_diff(sample_generalised_rp(&ql, &qr, 10.0).unwrap().as_slice(), qr.as_slice()) < 1e-14);
        }
    }

    #[test]
    fn generalised_rp_wave_structure() {
        let ql = steady_state_moments(1.0, 1, 1.0, 1e-12).unwrap();
        let qr = steady_state_moments(4.0, 2, 1.0, 1e-12).unwrap();
        let op1 = operator_a(1).unwrap();
        let op2 = operator_a(2).unwrap();
        // distinct states between consecutive speeds: 1 left wave, the stationary jump, 2 right waves
        let mut probes = vec![-1.0];
        let l = op1.eigenvalues()[0];
        probes.push(0.5 * l);
        let pos: Vec<f64> = op2.eigenvalues().iter().copied().filter(|v| *v > 0.0).collect();
        assert_eq!(pos.len(), 2);
        probes.push(0.5 * pos[0]);
        probes.push(0.5 * (pos[0] + pos[1]));
        probes.push(2.0 * pos[1]);
        let states: Vec<MomentVector> = probes.iter().map(|&x| sample_generalised_rp(&ql, &qr, x).unwrap()).collect();
        assert_eq!(states[0], ql);
        assert_eq!(states[1].order(), 1);
        assert_eq!(states[2].order(), 2);
        for w in states.windows(2) {
            assert_ne!(w[0].resized(2), w[1].resized(2));
        }
        // constant inside a wedge, right-continuous at the wave speed
        let a = sample_generalised_rp(&ql, &qr, 0.4 * pos[0]).unwrap();
        let b = sample_generalised_rp(&ql, &qr, 0.6 * pos[0]).unwrap();
        assert_eq!(a, b);
        let at = sample_generalised_rp(&ql, &qr, pos[0]).unwrap();
        let after = sample_generalised_rp(&ql, &qr, 0.5 * (pos[0] + pos[1])).unwrap();
        assert!(rel_diff(at.as_slice(), after.as_slice()) < 1e-15);
        let at_l = sample_generalised_rp(&ql, &qr, l).unwrap();
        assert_eq!(at_l, states[1]);
    }

    #[test]
    fn uniform_kernel_matches_waves_and_limiter() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 3;
        let op = operator_a(n).unwrap();
        let q: Vec<MomentVector> = (0..4).map(|_| random_state(&mut rng, n)).collect();
        let f: Vec<Fluctuations> = (0..3).map(|i| fluctuations_uniform(&q[i], &q[i + 1], &op).unwrap()).collect();
        let waves = |k: usize| -> Vec<Vec<f64>> { f[k].waves.iter().map(|w| w.vector.clone()).collect() };
        let speeds: Vec<f64> = op.eigenvalues().to_vec();
        let limited = limit_waves(&waves(1), &waves(0), &waves(2), &speeds, Limiter::Mc);
        let nu = 0.7;
        let mut flux = vec![0.0; op.dim()];
        for (p, w) in limited.iter().enumerate() {
            let c = 0.5 * speeds[p].abs() * (1.0 - nu * speeds[p].abs());
            for (a, b) in flux.iter_mut().zip(w) {
                *a += c * b;
            }
        }
        let alpha = |k: usize| decompose_jump(&op, q[k].as_slice(), q[k + 1].as_slice());
        let mut to_left = vec![0.0; op.dim()];
        let mut to_right = vec![0.0; op.dim()];
        let mut scratch = InterfaceScratch::new(op.dim());
        uniform_contributions(&op, 0.0, nu, Limiter::Mc, &alpha(1), &alpha(0), &alpha(2), &mut scratch, &mut to_left, &mut to_right);
        let expect_l: Vec<f64> = f[1].aminus.iter().zip(&flux).map(|(a, b)| a + b).collect();
        let expect_r: Vec<f64> = f[1].aplus.iter().zip(&flux).map(|(a, b)| a - b).collect();
        assert!(rel_diff(&to_left, &expect_l) < 1e-12);
        assert!(rel_diff(&to_right, &expect_r) < 1e-12);
    }
}
