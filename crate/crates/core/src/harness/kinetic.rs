//! Kinetic reference for the generalised Riemann experiment.
//!
//! Without velocity gradients the detailed model reduces to
//! `f_t + (-cos(theta) sin(theta) f)_x = 0`, so every orientation slice is an independent
//! scalar advection with constant speed.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::moment_model::{reconstruct_f, steady_state_moments, STEADY_STATE_TOL};
use crate::par::{map_range, Execution};
use crate::riemann::Limiter;
use crate::solver1d::Grid1D;

/// Moment order used to reconstruct the initial orientation densities.
const RECONSTRUCTION_ORDER: usize = 32;

/// Setup of the kinetic reference run on a periodic interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KineticReference {
    pub wxdr_left: f64,
    pub wxdr_right: f64,
    pub t_end: f64,
    pub x_left: f64,
    pub x_right: f64,
    pub m_x: usize,
    pub m_theta: usize,
    pub cfl: f64,
    pub limiter: Limiter,
    pub execution: Execution,
}

impl KineticReference {
    /// Same domain and left/right split at `x = 0` as the moment experiment.
    pub fn new(wxdr_left: f64, wxdr_right: f64, t_end: f64, m_x: usize, m_theta: usize) -> Self {
        Self {
            wxdr_left,
            wxdr_right,
            t_end,
            x_left: -10.0,
            x_right: 10.0,
            m_x,
            m_theta,
            cfl: 0.9,
            limiter: Limiter::Mc,
            execution: Execution::default(),
        }
    }

    /// Midpoints of the orientation cells on `[0, pi)`.
    pub fn thetas(&self) -> Vec<f64> {
        let h = PI / self.m_theta as f64;
        (0..self.m_theta).map(|k| (k as f64 + 0.5) * h).collect()
    }

    /// Cell centres and density at `t_end`.
    pub fn run(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.m_x < 64 || self.m_theta < 64 {
            return Err(Error::InvalidParams(format!(
                "kinetic reference needs at least 64 cells per direction, got {} x {}",
                self.m_x, self.m_theta
            )));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidParams(format!("t_end = {}", self.t_end)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidCfl(self.cfl));
        }
        let grid = Grid1D::new(self.x_left, self.x_right, self.m_x)?;
        let left = steady_state_moments(self.wxdr_left, RECONSTRUCTION_ORDER, 1.0, STEADY_STATE_TOL)?;
        let right = steady_state_moments(self.wxdr_right, RECONSTRUCTION_ORDER, 1.0, STEADY_STATE_TOL)?;
        let centers = grid.centers();
        let thetas = self.thetas();
        // All slices share one time step, set by the fastest one (speed 1/2 at most).
        let max_speed = thetas.iter().map(|t| (t.cos() * t.sin()).abs()).fold(0.0, f64::max);
        let steps = if self.t_end == 0.0 {
            0
        } else {
            (self.t_end * max_speed / (self.cfl * grid.dx())).ceil().max(1.0) as usize
        };
        let dt = if steps == 0 { 0.0 } else { self.t_end / steps as f64 };

        let slices = map_range(thetas.len(), self.execution, |k| {
            let theta = thetas[k];
            let (fl, fr) = (reconstruct_f(&left, theta), reconstruct_f(&right, theta));
            let mut f: Vec<f64> = centers.iter().map(|&x| if x < 0.0 { fl } else { fr }).collect();
            advect_periodic(&mut f, -theta.cos() * theta.sin() * dt / grid.dx(), steps, self.limiter);
            f
        });
        let weight = 2.0 * PI / self.m_theta as f64;
        let rho = (0..self.m_x).map(|i| weight * slices.iter().map(|s| s[i]).sum::<f64>()).collect();
        Ok((centers, rho))
    }
}

/// `steps` high-resolution upwind steps of `f_t + a f_x = 0` at signed Courant number `nu`.
fn advect_periodic(f: &mut [f64], nu: f64, steps: usize, limiter: Limiter) {
    let m = f.len();
    let c = 0.5 * nu.abs() * (1.0 - nu.abs());
    let mut jumps = vec![0.0; m];
    let mut flux = vec![0.0; m];
    for _ in 0..steps {
        // jumps[i] sits at the left edge of cell i
        for i in 0..m {
            jumps[i] = f[i] - f[(i + m - 1) % m];
        }
        for i in 0..m {
            let upwind = if nu > 0.0 { jumps[(i + m - 1) % m] } else { jumps[(i + 1) % m] };
            let theta = if jumps[i] == 0.0 { 0.0 } else { upwind / jumps[i] };
            flux[i] = c * limiter.phi(theta) * jumps[i];
        }
        for i in 0..m {
            let ip = (i + 1) % m;
            let fluct = if nu > 0.0 { nu * jumps[i] } else { nu * jumps[ip] };
            f[i] -= fluct + flux[ip] - flux[i];
        }
    }
}

/// Density of the kinetic reference on `[-10, 10]`.
pub fn kinetic_reference_1d(
    wxdr_left: f64,
    wxdr_right: f64,
    t_end: f64,
    m_x: usize,
    m_theta: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    KineticReference::new(wxdr_left, wxdr_right, t_end, m_x, m_theta).run()
}
