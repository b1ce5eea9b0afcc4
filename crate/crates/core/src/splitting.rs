//! Strang compositions coupling the moment systems to the flow, and the RK4
//! relaxation substep.

use crate::error::{Error, Result};
use crate::flow::{
    buoyancy_source_step_1d, buoyancy_source_step_2d, cn_diffusion_step, gradient_w_1d, gradients_2d,
    NavierStokes2D, StaggeredVelocity1D, StaggeredVelocity2D,
};
use crate::moment_model::{phi_2d_into, phi_shear_into, rk4_step_scratch, ModelParams, VelocityGradient2D};
use crate::par::{for_each_chunk_mut, for_each_mut};
use crate::solver1d::{cfl_dt, step_homogeneous_in_place, MomentField1D, SolverOptions};
use crate::solver2d::{cfl_dt_2d, step_homogeneous_2d_in_place, MomentField2D};

/// Kind of a substep of the coupled time step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Substep {
    /// Relaxation ODE `Q_t = phi(Q)`.
    Relaxation,
    /// Buoyancy forcing of the vertical velocity.
    Buoyancy,
    /// Viscous flow (diffusion in 1D, Navier-Stokes in 2D), followed by recomputing the
    /// velocity gradient.
    Flow,
    /// Homogeneous hyperbolic moment system.
    Transport,
}

/// The nine substeps of one coupled step with their fractions of `dt`. The same composition
/// serves the shear-flow and the 2D coupling.
pub const STRANG_SEQUENCE: [(Substep, f64); 9] = [
    (Substep::Relaxation, 0.5),
    (Substep::Buoyancy, 0.25),
    (Substep::Flow, 0.5),
    (Substep::Buoyancy, 0.25),
    (Substep::Transport, 1.0),
    (Substep::Buoyancy, 0.25),
    (Substep::Flow, 0.5),
    (Substep::Buoyancy, 0.25),
    (Substep::Relaxation, 0.5),
];

/// Largest `h * rate` taken by one RK4 relaxation stage; larger steps are subcycled.
const RK4_STABLE_PRODUCT: f64 = 2.0;

/// Number of equal RK4 substeps for a relaxation step of length `dt` at the given
/// stiffness bound.
fn rk4_substeps(dt: f64, stiffness: f64) -> usize {
    ((dt * stiffness / RK4_STABLE_PRODUCT).ceil() as usize).max(1)
}

fn relax_cell_shear(q: &mut [f64], wx: f64, d_r: f64, dt: f64) {
    let n = (q.len() - 1) as f64 / 2.0;
    let stiffness = 4.0 * n * n * d_r + 2.0 * n * wx.abs();
    let sub = rk4_substeps(dt, stiffness);
    let h = dt / sub as f64;
    let mut scratch = vec![0.0; 5 * q.len()];
    for _ in 0..sub {
        rk4_step_scratch(q, h, &mut scratch, |x, out| phi_shear_into(x, wx, d_r, out));
    }
}

fn relax_cell_2d(q: &mut [f64], g: &VelocityGradient2D, d_r: f64, dt: f64) {
    let n = (q.len() - 1) as f64 / 2.0;
    let rot = (g.wz - g.ux).abs() + (g.uz + g.wx).abs() + (g.uz - g.wx).abs();
    let stiffness = 4.0 * n * n * d_r + n * rot;
    let sub = rk4_substeps(dt, stiffness);
    let h = dt / sub as f64;
    let mut scratch = vec![0.0; 5 * q.len()];
    for _ in 0..sub {
        rk4_step_scratch(q, h, &mut scratch, |x, out| phi_2d_into(x, g, d_r, out));
    }
}

/// Per-cell RK4 integration of the shear relaxation ODE with frozen `w_x`.
///
/// Steps beyond the RK4 stability bound of a cell are split into equal substeps.
pub fn rk4_source_step(field: &mut MomentField1D, wx: &[f64], dt: f64, params: &ModelParams, opts: &SolverOptions) -> Result<()> {
    if wx.len() != field.len() {
        return Err(Error::Dimension { expected: field.len(), found: wx.len() });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("dt = {dt}")));
    }
    let d_r = params.d_r;
    for_each_mut(field.cells_mut(), opts.execution, |i, q| relax_cell_shear(q, wx[i], d_r, dt));
    Ok(())
}

/// Per-cell RK4 integration of the 2D relaxation ODE with frozen velocity gradients.
pub fn rk4_source_step_2d(
    field: &mut MomentField2D,
    grads: &[VelocityGradient2D],
    dt: f64,
    params: &ModelParams,
    opts: &SolverOptions,
) -> Result<()> {
    if grads.len() != field.grid().cells() {
        return Err(Error::Dimension { expected: field.grid().cells(), found: grads.len() });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("dt = {dt}")));
    }
    let d_r = params.d_r;
    let len = field.state_len();
    let mx = field.grid().mx;
    for_each_chunk_mut(field.data_mut(), mx * len, opts.execution, |j, row| {
        for (i, q) in row.chunks_exact_mut(len).enumerate() {
            relax_cell_2d(q, &grads[j * mx + i], d_r, dt);
        }
    });
    Ok(())
}

/// Coupled state of the shear-flow problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ShearState {
    pub field: MomentField1D,
    pub w: StaggeredVelocity1D,
    /// Mean density, constant in time.
    pub rho_bar: f64,
    /// Cell-centred `w_x` used by the relaxation substeps.
    pub wx: Vec<f64>,
}

impl ShearState {
    pub fn new(field: MomentField1D, w: StaggeredVelocity1D) -> Result<Self> {
        if w.len() != field.len() {
            return Err(Error::Dimension { expected: field.len(), found: w.len() });
        }
        let rho_bar = field.total(0) / field.grid().length();
        let wx = gradient_w_1d(&w);
        Ok(Self { field, w, rho_bar, wx })
    }

    /// Largest stable coupled step for Courant number `cfl`.
    pub fn max_dt(&self, cfl: f64) -> Result<f64> {
        cfl_dt(&self.field, cfl)
    }
}

/// One coupled step of the shear-flow problem.
///
/// `w_x` is recomputed after every velocity update, buoyancy included. Keeping the
/// gradient from the last diffusion substep would hand the relaxation a velocity that
/// lags by a quarter step, which costs an order of accuracy.
pub fn shear_step(state: &mut ShearState, dt: f64, params: &ModelParams, opts: &SolverOptions) -> Result<()> {
    for (kind, frac) in STRANG_SEQUENCE {
        let h = frac * dt;
        match kind {
            Substep::Relaxation => rk4_source_step(&mut state.field, &state.wx, h, params, opts)?,
            Substep::Buoyancy => {
                state.w = buoyancy_source_step_1d(&state.w, &state.field.rho(), state.rho_bar, h, params.delta, params.re)?;
                state.wx = gradient_w_1d(&state.w);
            }
            Substep::Flow => {
                state.w = cn_diffusion_step(&state.w, h, params.re)?;
                state.wx = gradient_w_1d(&state.w);
            }
            Substep::Transport => step_homogeneous_in_place(&mut state.field, h, opts)?,
        }
    }
    Ok(())
}

/// Coupled state of the 2D flow problem.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoDimState {
    pub field: MomentField2D,
    pub vel: StaggeredVelocity2D,
    pub grads: Vec<VelocityGradient2D>,
}

impl TwoDimState {
    pub fn new(field: MomentField2D, vel: StaggeredVelocity2D) -> Result<Self> {
        if vel.grid != *field.grid() {
            return Err(Error::InvalidGrid("velocity and moment grids differ".into()));
        }
        let grads = gradients_2d(&vel);
        Ok(Self { field, vel, grads })
    }

    pub fn max_dt(&self, cfl: f64) -> Result<f64> {
        cfl_dt_2d(&self.field, &self.vel, cfl)
    }
}

/// One coupled step of the 2D problem.
///
/// The transport substep uses the divergence-free projection of the current velocity, so
/// the moment totals are conserved; the flow state itself is not modified by it. If that
/// velocity needs a smaller step than `dt`, transport is subcycled.
pub fn twodim_step(
    state: &mut TwoDimState,
    dt: f64,
    params: &ModelParams,
    flow: &NavierStokes2D,
    opts: &SolverOptions,
) -> Result<()> {
    for (kind, frac) in STRANG_SEQUENCE {
        let h = frac * dt;
        match kind {
            Substep::Relaxation => rk4_source_step_2d(&mut state.field, &state.grads, h, params, opts)?,
            Substep::Buoyancy => {
                state.vel = buoyancy_source_step_2d(&state.vel, &state.field.rho(), h, params.delta, params.re)?;
                state.grads = gradients_2d(&state.vel);
            }
            Substep::Flow => {
                state.vel = flow.step(&state.vel, h, params.re)?;
                state.grads = gradients_2d(&state.vel);
            }
            Substep::Transport => {
                let mut transport = state.vel.clone();
                flow.project(&mut transport)?;
                let bound = cfl_dt_2d(&state.field, &transport, 1.0)?;
                let sub = ((h / bound) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
                for _ in 0..sub {
                    step_homogeneous_2d_in_place(&mut state.field, &transport, h / sub as f64, opts)?;
                }
            }
        }
    }
    Ok(())
}
