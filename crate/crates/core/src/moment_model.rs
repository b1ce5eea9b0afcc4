//! Moment-system state, coefficient matrices, relaxation source terms,
//! orientation-density reconstruction and the entropy pair.
//!
//! A state of order `N` stores `(rho, C_1, S_1, ..., C_N, S_N)`. The closure
//! moments `C_0 = rho / 2`, `S_0 = 0` and `C_{N+1} = S_{N+1} = 0` are never
//! stored; the accessors synthesize them.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Non-dimensional model parameters. The elastic-stress coupling is fixed to zero.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    /// Rotational diffusion coefficient.
    pub d_r: f64,
    /// Buoyancy coupling.
    pub delta: f64,
    /// Reynolds number.
    pub re: f64,
}

impl ModelParams {
    pub fn new(d_r: f64, delta: f64, re: f64) -> Result<Self> {
        let p = Self { d_r, delta, re };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_r >= 0.0 && self.d_r.is_finite()) {
            return Err(Error::InvalidParams(format!("D_r = {} must be >= 0", self.d_r)));
        }
        if !(self.re > 0.0 && self.re.is_finite()) {
            return Err(Error::InvalidParams(format!("Re = {} must be > 0", self.re)));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidParams("delta must be finite".into()));
        }
        Ok(())
    }
}

/// Number of stored components for moment order `n`.
#[inline]
pub const fn state_len(order: usize) -> usize {
    2 * order + 1
}

/// Storage index of `C_l` (`l >= 1`).
#[inline]
pub const fn c_index(l: usize) -> usize {
    2 * l - 1
}

/// Storage index of `S_l` (`l >= 1`).
#[inline]
pub const fn s_index(l: usize) -> usize {
    2 * l
}

#[inline]
pub(crate) fn order_of_len(len: usize) -> usize {
    (len - 1) / 2
}

/// `C_l` of a raw state slice, including the closure values.
#[inline]
pub(crate) fn c_of(q: &[f64], l: usize) -> f64 {
    let n = order_of_len(q.len());
    match l {
        0 => 0.5 * q[0],
        l if l > n => 0.0,
        l => q[c_index(l)],
    }
}

/// `S_l` of a raw state slice, including the closure values.
#[inline]
pub(crate) fn s_of(q: &[f64], l: usize) -> f64 {
    let n = order_of_len(q.len());
    match l {
        0 => 0.0,
        l if l > n => 0.0,
        l => q[s_index(l)],
    }
}

/// Copies `src` into `dst`, zero-padding or truncating to `dst.len()`.
#[inline]
pub(crate) fn resize_into(src: &[f64], dst: &mut [f64]) {
    let k = src.len().min(dst.len());
    dst[..k].copy_from_slice(&src[..k]);
    dst[k..].iter_mut().for_each(|v| *v = 0.0);
}

/// The state `(rho, C_1, S_1, ..., C_N, S_N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    values: Vec<f64>,
}

impl MomentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 || values.len() % 2 == 0 {
            return Err(Error::InvalidState(format!(
                "length {} is not 2N+1 with N >= 1",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidState(format!("component {bad} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn zeros(order: usize) -> Result<Self> {
        check_order(order)?;
        Ok(Self { values: vec![0.0; state_len(order)] })
    }

    /// Isotropic orientation distribution with density `rho`.
    pub fn isotropic(order: usize, rho: f64) -> Result<Self> {
        let mut q = Self::zeros(order)?;
        q.values[0] = rho;
        Ok(q)
    }

    pub fn order(&self) -> usize {
        order_of_len(self.values.len())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rho(&self) -> f64 {
        self.values[0]
    }

    pub fn c(&self, l: usize) -> f64 {
        c_of(&self.values, l)
    }

    pub fn s(&self, l: usize) -> f64 {
        s_of(&self.values, l)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Zero-padded (or truncated) copy of order `order`.
    pub fn resized(&self, order: usize) -> MomentVector {
        let mut values = vec![0.0; state_len(order)];
        resize_into(&self.values, &mut values);
        MomentVector { values }
    }
}

pub(crate) fn check_order(order: usize) -> Result<()> {
    if order < 1 {
        Err(Error::InvalidOrder(order))
    } else {
        Ok(())
    }
}

/// Velocity gradient of a 2D flow, evaluated in one cell.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VelocityGradient2D {
    pub ux: f64,
    pub uz: f64,
    pub wx: f64,
    pub wz: f64,
}

/// Coefficient matrix of the 1D (shear flow) moment system.
///
/// Built literally from the printed rule: `A[1,3] = -1`, `A[3,1] = -1/8`
/// (1-based) plus one 4x4 anti-diagonal block per `j = 0..N-2` whose top-left
/// corner sits at `2(N-j)-2`. Overlapping block entries are all zero.
pub fn build_a_1d(order: usize) -> Result<Matrix> {
    check_order(order)?;
    let n = state_len(order);
    let mut a = Matrix::zeros(n);
    a[(0, 2)] = -1.0;
    a[(2, 0)] = -0.125;
    const BLOCK: [[f64; 4]; 4] = [
        [0.0, 0.0, 0.0, -0.25],
        [0.0, 0.0, 0.25, 0.0],
        [0.0, 0.25, 0.0, 0.0],
        [-0.25, 0.0, 0.0, 0.0],
    ];
    for j in 0..order.saturating_sub(1) {
        // 1-based corner 2(N-j)-2 -> 0-based 2(N-j)-3
        let corner = 2 * (order - j) - 3;
        for (r, row) in BLOCK.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                a[(corner + r, corner + c)] = v;
            }
        }
    }
    Ok(a)
}

/// x-direction matrix of the 2D system: `u I + A_1d`.
pub fn build_a_2d(order: usize, u: f64) -> Result<Matrix> {
    Ok(build_a_1d(order)?.shifted(u))
}

/// Constant part of the z-direction matrix (the diagonal `w - 3/2` removed).
pub fn build_b_tilde(order: usize) -> Result<Matrix> {
    check_order(order)?;
    let n = state_len(order);
    let mut b = Matrix::zeros(n);
    b[(0, 1)] = 1.0;
    b[(1, 0)] = 0.125;
    // 1-based j = 2..2N-1
    for j in 2..=(2 * order - 1) {
        b[(j - 1, j + 1)] = 0.25;
        b[(j + 1, j - 1)] = 0.25;
    }
    Ok(b)
}

/// z-direction matrix of the 2D system: `(w - 3/2) I + B~`.
pub fn build_b_2d(order: usize, w: f64) -> Result<Matrix> {
    Ok(build_b_tilde(order)?.shifted(w - 1.5))
}

/// Relaxation source of the shear-flow hierarchy, written into `out`.
pub(crate) fn phi_shear_into(q: &[f64], wx: f64, d_r: f64, out: &mut [f64]) {
    let n = order_of_len(q.len());
    out[0] = 0.0;
    for l in 1..=n {
        let lf = l as f64;
        let decay = 4.0 * lf * lf * d_r;
        let half = 0.5 * lf * wx;
        out[c_index(l)] = -half * (s_of(q, l - 1) + 2.0 * s_of(q, l) + s_of(q, l + 1))
            - decay * q[c_index(l)];
        out[s_index(l)] = half * (c_of(q, l - 1) + 2.0 * c_of(q, l) + c_of(q, l + 1))
            - decay * q[s_index(l)];
    }
}

/// Time derivative of the moments due to shear-induced rotation and rotational diffusion.
pub fn source_phi_shear(q: &MomentVector, wx: f64, params: &ModelParams) -> MomentVector {
    let mut out = vec![0.0; q.len()];
    phi_shear_into(q.as_slice(), wx, params.d_r, &mut out);
    MomentVector { values: out }
}

pub(crate) fn phi_2d_into(q: &[f64], g: &VelocityGradient2D, d_r: f64, out: &mut [f64]) {
    let n = order_of_len(q.len());
    let strain = g.wz - g.ux;
    let shear = g.uz + g.wx;
    let vort = g.uz - g.wx;
    out[0] = 0.0;
    for l in 1..=n {
        let lf = l as f64;
        let half = 0.5 * lf;
        let decay = 4.0 * lf * lf * d_r;
        let (cm, c0, cp) = (c_of(q, l - 1), c_of(q, l), c_of(q, l + 1));
        let (sm, s0, sp) = (s_of(q, l - 1), s_of(q, l), s_of(q, l + 1));
        out[c_index(l)] = -half * strain * cm + half * strain * cp - half * shear * sm
            + lf * vort * s0
            - half * shear * sp
            - decay * c0;
        out[s_index(l)] = -half * strain * sm + half * strain * sp + half * shear * cm
            - lf * vort * c0
            + half * shear * cp
            - decay * s0;
    }
}

/// Time derivative of the moments due to the 2D velocity gradient and rotational diffusion.
pub fn source_phi_2d(q: &MomentVector, g: &VelocityGradient2D, params: &ModelParams) -> MomentVector {
    let mut out = vec![0.0; q.len()];
    phi_2d_into(q.as_slice(), g, params.d_r, &mut out);
    MomentVector { values: out }
}

/// Truncated Fourier reconstruction of the orientation density.
pub fn reconstruct_f(q: &MomentVector, theta: f64) -> f64 {
    let mut f = q.rho() / (2.0 * PI);
    for i in 1..=q.order() {
        let arg = 2.0 * i as f64 * theta;
        f += 2.0 / PI * (q.c(i) * arg.cos() + q.s(i) * arg.sin());
    }
    f
}

/// Quadratic entropy `eta = C_0^2 / 2 + sum (C_i^2 + S_i^2)`.
pub fn entropy(q: &MomentVector) -> f64 {
    entropy_of(q.as_slice())
}

pub(crate) fn entropy_of(q: &[f64]) -> f64 {
    let c0 = 0.5 * q[0];
    0.5 * c0 * c0 + q[1..].iter().map(|v| v * v).sum::<f64>()
}

/// Entropy flux paired with [`entropy`].
pub fn entropy_flux(q: &MomentVector) -> f64 {
    let mut flux = 0.25 * q.s(1) * q.c(0);
    for i in 2..=q.order() {
        flux += 0.25 * (q.c(i) * q.s(i - 1) + q.c(i - 1) * q.s(i));
    }
    flux
}

/// One classical RK4 step of `dQ/dt = phi(Q)`.
#[cfg(test)]
pub(crate) fn rk4_step_with<F>(q: &mut [f64], h: f64, rhs: F)
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut scratch = vec![0.0; 5 * q.len()];
    rk4_step_scratch(q, h, &mut scratch, rhs);
}

/// RK4 step using caller-provided workspace of at least `5 * q.len()` values.
pub(crate) fn rk4_step_scratch<F>(q: &mut [f64], h: f64, scratch: &mut [f64], rhs: F)
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = q.len();
    let (k1, rest) = scratch.split_at_mut(n);
    let (k2, rest) = rest.split_at_mut(n);
    let (k3, rest) = rest.split_at_mut(n);
    let (k4, rest) = rest.split_at_mut(n);
    let tmp = &mut rest[..n];
    rhs(q, k1);
    for i in 0..n {
        tmp[i] = q[i] + 0.5 * h * k1[i];
    }
    rhs(tmp, k2);
    for i in 0..n {
        tmp[i] = q[i] + 0.5 * h * k2[i];
    }
    rhs(tmp, k3);
    for i in 0..n {
        tmp[i] = q[i] + h * k3[i];
    }
    rhs(tmp, k4);
    for i in 0..n {
        q[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

pub const STEADY_STATE_TOL: f64 = 1e-12;
const STEADY_STATE_MAX_STEPS: usize = 10_000_000;

/// Equilibrium moments of the relaxation ODE under a constant velocity gradient.
///
/// Time units are fixed by `D_r = 1`, so only the ratio `w_x / D_r` matters.
/// Integrates with RK4 from the isotropic state until `max |dQ/dt| < tol`.
pub fn steady_state_moments(wx_over_dr: f64, order: usize, rho: f64, tol: f64) -> Result<MomentVector> {
    check_order(order)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("tolerance {tol} must be > 0")));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidParams(format!("rho {rho} must be > 0")));
    }
    let nf = order as f64;
    let h = 0.1 / (4.0 * nf * nf + nf * wx_over_dr.abs());
    let mut q = vec![0.0; state_len(order)];
    q[0] = rho;
    let mut deriv = vec![0.0; q.len()];
    let mut scratch = vec![0.0; 5 * q.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..STEADY_STATE_MAX_STEPS {
        phi_shear_into(&q, wx_over_dr, 1.0, &mut deriv);
        residual = deriv.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if residual < tol {
            q[0] = rho;
            return MomentVector::new(q);
        }
        rk4_step_scratch(&mut q, h, &mut scratch, |x, out| phi_shear_into(x, wx_over_dr, 1.0, out));
    }
    Err(Error::NoSteadyState { steps: STEADY_STATE_MAX_STEPS, residual })
}
