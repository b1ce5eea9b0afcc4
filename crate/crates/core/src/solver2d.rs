//! Unsplit 2D wave propagation for the moment system of uniform order, transported by a
//! velocity field frozen over the step.

use crate::error::{Error, Result};
use crate::flow::{Grid2D, StaggeredVelocity2D};
use crate::moment_model::{check_order, state_len, MomentVector};
use crate::par::for_each_chunk_mut;
use crate::riemann::{operator_a, operator_b, uniform_contributions, InterfaceScratch};
use crate::solver1d::SolverOptions;

/// Constant vertical drift of the rods relative to the fluid in the z-matrix.
pub const SETTLING_SHIFT: f64 = -1.5;

/// Cell averages of a uniform-order moment field on a doubly periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentField2D {
    grid: Grid2D,
    order: usize,
    data: Vec<f64>,
}

impl MomentField2D {
    pub fn from_fn<F>(grid: Grid2D, order: usize, mut init: F) -> Result<Self>
    where
        F: FnMut(f64, f64) -> MomentVector,
    {
        check_order(order)?;
        let len = state_len(order);
        let mut data = vec![0.0; grid.cells() * len];
        for j in 0..grid.mz {
            for i in 0..grid.mx {
                let (x, z) = grid.center(i, j);
                let q = init(x, z).resized(order);
                let k = grid.idx(i, j) * len;
                data[k..k + len].copy_from_slice(q.as_slice());
            }
        }
        Ok(Self { grid, order, data })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn state_len(&self) -> usize {
        state_len(self.order)
    }

    /// State of cell `(i, j)`.
    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        let len = self.state_len();
        let k = self.grid.idx(i, j) * len;
        &self.data[k..k + len]
    }

    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let len = self.state_len();
        let k = self.grid.idx(i, j) * len;
        &mut self.data[k..k + len]
    }

    /// Flat storage: cells in grid order, each `2N+1` values.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rho(&self) -> Vec<f64> {
        self.data.chunks_exact(self.state_len()).map(|c| c[0]).collect()
    }

    /// `dx dz sum Q[k]`.
    pub fn total(&self, k: usize) -> f64 {
        self.grid.dx() * self.grid.dz() * self.data.chunks_exact(self.state_len()).map(|c| c[k]).sum::<f64>()
    }
}

/// Largest stable step for the sum of the directional Courant numbers `cfl`.
pub fn cfl_dt_2d(field: &MomentField2D, velocity: &StaggeredVelocity2D, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::InvalidCfl(cfl));
    }
    let sa = operator_a(field.order)?.max_speed();
    let sb = operator_b(field.order)?.max_speed();
    let g = field.grid;
    let rate = velocity
        .u
        .iter()
        .zip(&velocity.w)
        .map(|(u, w)| (u.abs() + sa) / g.dx() + ((w + SETTLING_SHIFT).abs() + sb) / g.dz())
        .fold(0.0_f64, f64::max);
    Ok(cfl / rate)
}

/// Advances the homogeneous 2D system by `dt` in place.
pub fn step_homogeneous_2d_in_place(
    field: &mut MomentField2D,
    velocity: &StaggeredVelocity2D,
    dt: f64,
    opts: &SolverOptions,
) -> Result<()> {
    if velocity.grid != field.grid {
        return Err(Error::InvalidGrid("velocity and moment grids differ".into()));
    }
    let max_dt = cfl_dt_2d(field, velocity, 1.0)?;
    if !(dt >= 0.0) || dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, max_dt });
    }
    if dt == 0.0 {
        return Ok(());
    }
    let g = field.grid;
    let (mx, len) = (g.mx, field.state_len());
    let exec = opts.execution;
    let op_a = operator_a(field.order)?;
    let op_b = operator_b(field.order)?;
    let (nux, nuz) = (dt / g.dx(), dt / g.dz());
    let q = &field.data;
    let cell = |i: usize, j: usize| &q[g.idx(i, j) * len..(g.idx(i, j) + 1) * len];

    // wave strengths at the left (x) and bottom (z) edge of every cell
    let mut alpha_x = vec![0.0; q.len()];
    let mut alpha_z = vec![0.0; q.len()];
    for_each_chunk_mut(&mut alpha_x, mx * len, exec, |j, row| {
        let mut dq = vec![0.0; len];
        for i in 0..mx {
            for (k, d) in dq.iter_mut().enumerate() {
                *d = cell(i, j)[k] - cell(g.left(i), j)[k];
            }
            op_a.decompose_into(&dq, &mut row[i * len..(i + 1) * len]);
        }
    });
    for_each_chunk_mut(&mut alpha_z, mx * len, exec, |j, row| {
        let mut dq = vec![0.0; len];
        for i in 0..mx {
            for (k, d) in dq.iter_mut().enumerate() {
                *d = cell(i, j)[k] - cell(i, g.below(j))[k];
            }
            op_b.decompose_into(&dq, &mut row[i * len..(i + 1) * len]);
        }
    });
    let at = |i: usize, j: usize| -> (usize, usize) {
        let k = g.idx(i, j) * len;
        (k, k + len)
    };

    // per edge: [to_left | to_right] (x) and [to_below | to_above] (z)
    let mut out_x = vec![0.0; 2 * q.len()];
    let mut out_z = vec![0.0; 2 * q.len()];
    for_each_chunk_mut(&mut out_x, 2 * mx * len, exec, |j, row| {
        let mut scratch = InterfaceScratch::new(len);
        for i in 0..mx {
            let (s, e) = at(i, j);
            let (sl, el) = at(g.left(i), j);
            let (sr, er) = at(g.right(i), j);
            let (to_left, to_right) = row[2 * i * len..2 * (i + 1) * len].split_at_mut(len);
            uniform_contributions(
                &op_a,
                velocity.u_edge(i, j),
                nux,
                opts.limiter,
                &alpha_x[s..e],
                &alpha_x[sl..el],
                &alpha_x[sr..er],
                &mut scratch,
                to_left,
                to_right,
            );
        }
    });
    for_each_chunk_mut(&mut out_z, 2 * mx * len, exec, |j, row| {
        let mut scratch = InterfaceScratch::new(len);
        for i in 0..mx {
            let (s, e) = at(i, j);
            let (sb, eb) = at(i, g.below(j));
            let (sa, ea) = at(i, g.above(j));
            let (to_below, to_above) = row[2 * i * len..2 * (i + 1) * len].split_at_mut(len);
            uniform_contributions(
                &op_b,
                velocity.w_edge(i, j) + SETTLING_SHIFT,
                nuz,
                opts.limiter,
                &alpha_z[s..e],
                &alpha_z[sb..eb],
                &alpha_z[sa..ea],
                &mut scratch,
                to_below,
                to_above,
            );
        }
    });

    for_each_chunk_mut(&mut field.data, mx * len, exec, |j, row| {
        for i in 0..mx {
            let own = g.idx(i, j);
            let east = g.idx(g.right(i), j);
            let north = g.idx(i, g.above(j));
            for k in 0..len {
                let x_in = out_x[2 * own * len + len + k] + out_x[2 * east * len + k];
                let z_in = out_z[2 * own * len + len + k] + out_z[2 * north * len + k];
                row[i * len + k] -= nux * x_in + nuz * z_in;
            }
        }
    });
    Ok(())
}

/// Advances the homogeneous 2D system by `dt`.
pub fn step_homogeneous_2d(
    field: &MomentField2D,
    velocity: &StaggeredVelocity2D,
    dt: f64,
    opts: &SolverOptions,
) -> Result<MomentField2D> {
    let mut next = field.clone();
    step_homogeneous_2d_in_place(&mut next, velocity, dt, opts)?;
    Ok(next)
}
