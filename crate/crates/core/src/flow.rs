//! Macroscopic flow: 1D Crank-Nicolson diffusion with buoyancy on grid nodes, and a
//! spectral projection solver for periodic 2D incompressible Navier-Stokes.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::moment_model::VelocityGradient2D;
use crate::par::{map_range, Execution};
use crate::riemann::Limiter;

/// Velocity at the grid nodes of a periodic 1D grid: `w[i]` sits at the right edge of cell `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct StaggeredVelocity1D {
    pub w: Vec<f64>,
    pub dx: f64,
}

impl StaggeredVelocity1D {
    pub fn zeros(m: usize, dx: f64) -> Self {
        Self { w: vec![0.0; m], dx }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Solves a periodic tridiagonal system. `sub[i]` multiplies `x[i-1]`, `sup[i]` multiplies
/// `x[i+1]` (indices modulo n).
pub fn solve_cyclic_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n < 3 || sub.len() != n || sup.len() != n || rhs.len() != n {
        return Err(Error::Dimension { expected: n.max(3), found: rhs.len() });
    }
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = if diag[0] != 0.0 { -diag[0] } else { -1.0 };
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;
    let x = thomas(sub, &b, sup, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(sub, &b, sup, &u)?;
    let denom = 1.0 + z[0] + beta * z[n - 1] / gamma;
    if denom == 0.0 {
        return Err(Error::Singular("cyclic correction denominator vanished".into()));
    }
    let fact = (x[0] + beta * x[n - 1] / gamma) / denom;
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 {
        return Err(Error::Singular("zero pivot".into()));
    }
    x[0] = rhs[0] / piv;
    for i in 1..n {
        c[i] = sup[i - 1] / piv;
        piv = diag[i] - sub[i] * c[i];
        if piv == 0.0 {
            return Err(Error::Singular("zero pivot".into()));
        }
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i + 1] * next;
    }
    Ok(x)
}

/// Crank-Nicolson step of `Re w_t = w_xx` on the periodic node grid.
pub fn cn_diffusion_step(w: &StaggeredVelocity1D, dt: f64, re: f64) -> Result<StaggeredVelocity1D> {
    if !(dt > 0.0) || !(re > 0.0) {
        return Err(Error::InvalidParams(format!("dt = {dt}, Re = {re}")));
    }
    let m = w.len();
    let r = dt / (2.0 * re * w.dx * w.dx);
    let rhs: Vec<f64> = (0..m)
        .map(|i| {
            let (l, c, rr) = (w.w[(i + m - 1) % m], w.w[i], w.w[(i + 1) % m]);
            c + r * (l - 2.0 * c + rr)
        })
        .collect();
    let off = vec![-r; m];
    let diag = vec![1.0 + 2.0 * r; m];
    Ok(StaggeredVelocity1D { w: solve_cyclic_tridiagonal(&off, &diag, &off, &rhs)?, dx: w.dx })
}

/// Explicit step of `Re w_t = delta (rho_bar - rho)` with density averaged onto the nodes.
pub fn buoyancy_source_step_1d(
    w: &StaggeredVelocity1D,
    rho_cells: &[f64],
    rho_bar: f64,
    dt: f64,
    delta: f64,
    re: f64,
) -> Result<StaggeredVelocity1D> {
    let m = w.len();
    if rho_cells.len() != m {
        return Err(Error::Dimension { expected: m, found: rho_cells.len() });
    }
    let k = dt * delta / re;
    let out = (0..m)
        .map(|i| w.w[i] + k * (rho_bar - 0.5 * (rho_cells[i] + rho_cells[(i + 1) % m])))
        .collect();
    Ok(StaggeredVelocity1D { w: out, dx: w.dx })
}

/// Cell-centred `w_x` from the two nodes bounding each cell.
pub fn gradient_w_1d(w: &StaggeredVelocity1D) -> Vec<f64> {
    let m = w.len();
    (0..m).map(|i| (w.w[i] - w.w[(i + m - 1) % m]) / w.dx).collect()
}

/// Doubly periodic 2D grid; cell `(i, j)` has `i` along x and `j` along z and is stored at
/// `j * mx + i`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid2D {
    pub x_left: f64,
    pub x_right: f64,
    pub z_left: f64,
    pub z_right: f64,
    pub mx: usize,
    pub mz: usize,
}

impl Grid2D {
    pub fn new(x_left: f64, x_right: f64, z_left: f64, z_right: f64, mx: usize, mz: usize) -> Result<Self> {
        if !(x_right > x_left && z_right > z_left) {
            return Err(Error::InvalidGrid("empty 2D domain".into()));
        }
        if mx < 4 || mz < 4 {
            return Err(Error::InvalidGrid(format!("{mx}x{mz} cells, need at least 4 per direction")));
        }
        Ok(Self { x_left, x_right, z_left, z_right, mx, mz })
    }

    pub fn square(lo: f64, hi: f64, m: usize) -> Result<Self> {
        Self::new(lo, hi, lo, hi, m, m)
    }

    pub fn dx(&self) -> f64 {
        (self.x_right - self.x_left) / self.mx as f64
    }

    pub fn dz(&self) -> f64 {
        (self.z_right - self.z_left) / self.mz as f64
    }

    pub fn cells(&self) -> usize {
        self.mx * self.mz
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.mx + i
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x_left + (i as f64 + 0.5) * self.dx(),
            self.z_left + (j as f64 + 0.5) * self.dz(),
        )
    }

    #[inline]
    pub(crate) fn left(&self, i: usize) -> usize {
        (i + self.mx - 1) % self.mx
    }

    #[inline]
    pub(crate) fn right(&self, i: usize) -> usize {
        (i + 1) % self.mx
    }

    #[inline]
    pub(crate) fn below(&self, j: usize) -> usize {
        (j + self.mz - 1) % self.mz
    }

    #[inline]
    pub(crate) fn above(&self, j: usize) -> usize {
        (j + 1) % self.mz
    }
}

/// Cell-centred velocity `(U, W)`; edge values are averages of the adjacent centres.
#[derive(Clone, Debug, PartialEq)]
pub struct StaggeredVelocity2D {
    pub grid: Grid2D,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

impl StaggeredVelocity2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, u: vec![0.0; grid.cells()], w: vec![0.0; grid.cells()] }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut v = Self::zeros(grid);
        for j in 0..grid.mz {
            for i in 0..grid.mx {
                let (x, z) = grid.center(i, j);
                let (u, w) = f(x, z);
                v.u[grid.idx(i, j)] = u;
                v.w[grid.idx(i, j)] = w;
            }
        }
        v
    }

    /// `u` on the left edge of cell `(i, j)`.
    #[inline]
    pub fn u_edge(&self, i: usize, j: usize) -> f64 {
        let g = &self.grid;
        0.5 * (self.u[g.idx(g.left(i), j)] + self.u[g.idx(i, j)])
    }

    /// `w` on the bottom edge of cell `(i, j)`.
    #[inline]
    pub fn w_edge(&self, i: usize, j: usize) -> f64 {
        let g = &self.grid;
        0.5 * (self.w[g.idx(i, g.below(j))] + self.w[g.idx(i, j)])
    }

    /// Per-cell edge divergence.
    pub fn divergence(&self) -> Vec<f64> {
        let g = self.grid;
        let (dx, dz) = (g.dx(), g.dz());
        let mut div = vec![0.0; g.cells()];
        for j in 0..g.mz {
            for i in 0..g.mx {
                div[g.idx(i, j)] = (self.u_edge(g.right(i), j) - self.u_edge(i, j)) / dx
                    + (self.w_edge(i, g.above(j)) - self.w_edge(i, j)) / dz;
            }
        }
        div
    }

    pub fn max_divergence(&self) -> f64 {
        self.divergence().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `0.5 * sum (U^2 + W^2) dx dz`.
    pub fn kinetic_energy(&self) -> f64 {
        let g = self.grid;
        0.5 * g.dx() * g.dz() * self.u.iter().zip(&self.w).map(|(u, w)| u * u + w * w).sum::<f64>()
    }

    pub fn max_speed_x(&self) -> f64 {
        self.u.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Per-cell velocity gradients from differences of edge values.
pub fn gradients_2d(vel: &StaggeredVelocity2D) -> Vec<VelocityGradient2D> {
    let g = vel.grid;
    let (dx, dz) = (g.dx(), g.dz());
    let avg_z = |f: &[f64], i: usize, j: usize| 0.5 * (f[g.idx(i, j)] + f[g.idx(i, g.above(j))]);
    let avg_x = |f: &[f64], i: usize, j: usize| 0.5 * (f[g.idx(i, j)] + f[g.idx(g.right(i), j)]);
    let mut out = Vec::with_capacity(g.cells());
    for j in 0..g.mz {
        for i in 0..g.mx {
            let (jm, im) = (g.below(j), g.left(i));
            out.push(VelocityGradient2D {
                ux: (avg_x(&vel.u, i, j) - avg_x(&vel.u, im, j)) / dx,
                uz: (avg_z(&vel.u, i, j) - avg_z(&vel.u, i, jm)) / dz,
                wx: (avg_x(&vel.w, i, j) - avg_x(&vel.w, im, j)) / dx,
                wz: (avg_z(&vel.w, i, j) - avg_z(&vel.w, i, jm)) / dz,
            });
        }
    }
    out
}

/// Explicit step of `W_t = -(delta / Re) rho`.
pub fn buoyancy_source_step_2d(
    vel: &StaggeredVelocity2D,
    rho_cells: &[f64],
    dt: f64,
    delta: f64,
    re: f64,
) -> Result<StaggeredVelocity2D> {
    if rho_cells.len() != vel.grid.cells() {
        return Err(Error::Dimension { expected: vel.grid.cells(), found: rho_cells.len() });
    }
    let k = dt * delta / re;
    let mut out = vel.clone();
    for (w, r) in out.w.iter_mut().zip(rho_cells) {
        *w -= k * r;
    }
    Ok(out)
}

/// Largest edge divergence accepted after a projection.
pub const PROJECTION_TOL: f64 = 1e-10;

/// Courant number above which the advection substep is subcycled.
const ADVECTION_COURANT: f64 = 0.5;

/// 2D FFT plans for one grid.
struct Spectral {
    mx: usize,
    mz: usize,
    fx: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    fz: Arc<dyn Fft<f64>>,
    iz: Arc<dyn Fft<f64>>,
}

impl Spectral {
    fn new(mx: usize, mz: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            mx,
            mz,
            fx: p.plan_fft_forward(mx),
            ix: p.plan_fft_inverse(mx),
            fz: p.plan_fft_forward(mz),
            iz: p.plan_fft_inverse(mz),
        }
    }

    fn transform(&self, data: &mut [Complex<f64>], inverse: bool, exec: Execution) {
        let (mx, mz) = (self.mx, self.mz);
        let (px, pz) = if inverse { (&self.ix, &self.iz) } else { (&self.fx, &self.fz) };
        par_rows(data, mx, exec, |row| px.process(row));
        let mut t = transpose(data, mx, mz);
        par_rows(&mut t, mz, exec, |col| pz.process(col));
        let back = transpose(&t, mz, mx);
        data.copy_from_slice(&back);
        if inverse {
            let s = 1.0 / (mx * mz) as f64;
            data.iter_mut().for_each(|c| *c *= s);
        }
    }

    fn forward(&self, real: &[f64], exec: Execution) -> Vec<Complex<f64>> {
        let mut c: Vec<Complex<f64>> = real.iter().map(|&r| Complex::new(r, 0.0)).collect();
        self.transform(&mut c, false, exec);
        c
    }

    fn inverse_real(&self, mut c: Vec<Complex<f64>>, exec: Execution) -> Vec<f64> {
        self.transform(&mut c, true, exec);
        c.into_iter().map(|z| z.re).collect()
    }

    /// Signed integer wavenumber index of FFT bin `k` of length `n`.
    fn wavenumber(k: usize, n: usize) -> f64 {
        if k <= n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        }
    }
}

fn transpose(data: &[Complex<f64>], rows_len: usize, rows: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..rows_len {
            out[c * rows + r] = data[r * rows_len + c];
        }
    }
    out
}

fn par_rows<F>(data: &mut [Complex<f64>], len: usize, exec: Execution, f: F)
where
    F: Fn(&mut [Complex<f64>]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(len).for_each(f);
        return;
    }
    let _ = exec;
    data.chunks_mut(len).for_each(f);
}

/// Pseudo-spectral projection solver for doubly periodic incompressible flow.
///
/// One step is Strang-split: half a Crank-Nicolson diffusion step, projected limited
/// upwind advection advanced with two-stage SSP Runge-Kutta, another half diffusion step,
/// and a final projection. The projection removes the gradient part with respect to the
/// edge-averaged divergence, which it drives to round-off.
pub struct NavierStokes2D {
    grid: Grid2D,
    spectral: Spectral,
    limiter: Limiter,
    execution: Execution,
}

impl NavierStokes2D {
    pub fn new(grid: Grid2D, limiter: Limiter, execution: Execution) -> Self {
        Self { grid, spectral: Spectral::new(grid.mx, grid.mz), limiter, execution }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    fn check(&self, vel: &StaggeredVelocity2D) -> Result<()> {
        if vel.grid != self.grid {
            return Err(Error::InvalidGrid("velocity grid differs from solver grid".into()));
        }
        Ok(())
    }

    /// Discrete wavenumbers `(kx, kz)` of bin `(p, q)`.
    fn wavevector(&self, p: usize, q: usize) -> (f64, f64) {
        let g = &self.grid;
        let lx = g.x_right - g.x_left;
        let lz = g.z_right - g.z_left;
        (
            2.0 * PI * Spectral::wavenumber(p, g.mx) / lx,
            2.0 * PI * Spectral::wavenumber(q, g.mz) / lz,
        )
    }

    /// Removes the discrete gradient component so the edge divergence vanishes.
    pub fn project(&self, vel: &mut StaggeredVelocity2D) -> Result<()> {
        self.check(vel)?;
        let g = self.grid;
        let (dx, dz) = (g.dx(), g.dz());
        let mut uh = self.spectral.forward(&vel.u, self.execution);
        let mut wh = self.spectral.forward(&vel.w, self.execution);
        for q in 0..g.mz {
            for p in 0..g.mx {
                let (kx, kz) = self.wavevector(p, q);
                let gx = (kx * dx).sin() / dx;
                let gz = (kz * dz).sin() / dz;
                let norm = gx * gx + gz * gz;
                if norm <= 1e-12 * (1.0 / (dx * dx) + 1.0 / (dz * dz)) {
                    continue;
                }
                let k = q * g.mx + p;
                let dot = uh[k] * gx + wh[k] * gz;
                uh[k] -= dot * (gx / norm);
                wh[k] -= dot * (gz / norm);
            }
        }
        vel.u = self.spectral.inverse_real(uh, self.execution);
        vel.w = self.spectral.inverse_real(wh, self.execution);
        let divergence = vel.max_divergence();
        if divergence > PROJECTION_TOL {
            return Err(Error::Projection { divergence });
        }
        Ok(())
    }

    /// Crank-Nicolson step of `Re v_t = Lap v` with the five-point Laplacian, applied in Fourier space.
    pub fn diffuse(&self, vel: &mut StaggeredVelocity2D, dt: f64, re: f64) -> Result<()> {
        self.check(vel)?;
        let g = self.grid;
        let (dx, dz) = (g.dx(), g.dz());
        let factors: Vec<f64> = (0..g.cells())
            .map(|k| {
                let (kx, kz) = self.wavevector(k % g.mx, k / g.mx);
                let sx = (0.5 * kx * dx).sin();
                let sz = (0.5 * kz * dz).sin();
                let lap = -4.0 * sx * sx / (dx * dx) - 4.0 * sz * sz / (dz * dz);
                let h = 0.5 * dt / re * lap;
                (1.0 + h) / (1.0 - h)
            })
            .collect();
        for comp in [&mut vel.u, &mut vel.w] {
            let mut c = self.spectral.forward(comp, self.execution);
            for (z, f) in c.iter_mut().zip(&factors) {
                *z *= *f;
            }
            *comp = self.spectral.inverse_real(c, self.execution);
        }
        Ok(())
    }

    /// Flux-form advection tendency `-div(v q)` of both components, with limited upwind
    /// face reconstruction.
    fn advection_rate(&self, vel: &StaggeredVelocity2D) -> (Vec<f64>, Vec<f64>) {
        let g = self.grid;
        let (dx, dz) = (g.dx(), g.dz());
        let limiter = self.limiter;
        let slope = |f: &[f64], a: usize, b: usize, c: usize| -> f64 {
            let (dl, dr) = (f[b] - f[a], f[c] - f[b]);
            if dr == 0.0 {
                0.0
            } else {
                limiter.phi(dl / dr) * dr
            }
        };
        let face = |f: &[f64], vel_e: f64, l2: usize, l: usize, r: usize, r2: usize| -> f64 {
            if vel_e >= 0.0 {
                f[l] + 0.5 * slope(f, l2, l, r)
            } else {
                f[r] - 0.5 * slope(f, l, r, r2)
            }
        };
        let rates = map_range(g.mz, self.execution, |j| {
            let mut ru = vec![0.0; g.mx];
            let mut rw = vec![0.0; g.mx];
            for i in 0..g.mx {
                let (ir, ja) = (g.right(i), g.above(j));
                let mut fx = [[0.0; 2]; 2];
                let mut fz = [[0.0; 2]; 2];
                for (s, ie) in [i, ir].into_iter().enumerate() {
                    let ue = vel.u_edge(ie, j);
                    let (l2, l, r, r2) = (
                        g.idx(g.left(g.left(ie)), j),
                        g.idx(g.left(ie), j),
                        g.idx(ie, j),
                        g.idx(g.right(ie), j),
                    );
                    fx[s][0] = ue * face(&vel.u, ue, l2, l, r, r2);
                    fx[s][1] = ue * face(&vel.w, ue, l2, l, r, r2);
                }
                for (s, je) in [j, ja].into_iter().enumerate() {
                    let we = vel.w_edge(i, je);
                    let (b2, b, a, a2) = (
                        g.idx(i, g.below(g.below(je))),
                        g.idx(i, g.below(je)),
                        g.idx(i, je),
                        g.idx(i, g.above(je)),
                    );
                    fz[s][0] = we * face(&vel.u, we, b2, b, a, a2);
                    fz[s][1] = we * face(&vel.w, we, b2, b, a, a2);
                }
                ru[i] = -(fx[1][0] - fx[0][0]) / dx - (fz[1][0] - fz[0][0]) / dz;
                rw[i] = -(fx[1][1] - fx[0][1]) / dx - (fz[1][1] - fz[0][1]) / dz;
            }
            (ru, rw)
        });
        let mut ru = Vec::with_capacity(g.cells());
        let mut rw = Vec::with_capacity(g.cells());
        for (a, b) in rates {
            ru.extend(a);
            rw.extend(b);
        }
        (ru, rw)
    }

    fn advect(&self, vel: &mut StaggeredVelocity2D, dt: f64) -> Result<()> {
        let g = self.grid;
        let speed = |v: &StaggeredVelocity2D| {
            v.u.iter().fold(0.0_f64, |m, x| m.max(x.abs())) / g.dx()
                + v.w.iter().fold(0.0_f64, |m, x| m.max(x.abs())) / g.dz()
        };
        let courant = dt * speed(vel);
        let sub = ((courant / ADVECTION_COURANT).ceil() as usize).max(1);
        let h = dt / sub as f64;
        for _ in 0..sub {
            let (ru, rw) = self.advection_rate(vel);
            let mut stage = vel.clone();
            axpy(&mut stage.u, h, &ru);
            axpy(&mut stage.w, h, &rw);
            self.project(&mut stage)?;
            let (ru, rw) = self.advection_rate(&stage);
            axpy(&mut stage.u, h, &ru);
            axpy(&mut stage.w, h, &rw);
            for (a, b) in vel.u.iter_mut().zip(&stage.u) {
                *a = 0.5 * (*a + b);
            }
            for (a, b) in vel.w.iter_mut().zip(&stage.w) {
                *a = 0.5 * (*a + b);
            }
            self.project(vel)?;
        }
        Ok(())
    }

    /// One step of the unforced incompressible equations.
    pub fn step(&self, vel: &StaggeredVelocity2D, dt: f64, re: f64) -> Result<StaggeredVelocity2D> {
        self.check(vel)?;
        if !(dt >= 0.0) || !(re > 0.0) {
            return Err(Error::InvalidParams(format!("dt = {dt}, Re = {re}")));
        }
        let mut v = vel.clone();
        if dt == 0.0 {
            return Ok(v);
        }
        self.diffuse(&mut v, 0.5 * dt, re)?;
        self.advect(&mut v, dt)?;
        self.diffuse(&mut v, 0.5 * dt, re)?;
        self.project(&mut v)?;
        Ok(v)
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// One step of the unforced incompressible equations with the default limiter.
pub fn navier_stokes_step_2d(vel: &StaggeredVelocity2D, dt: f64, re: f64) -> Result<StaggeredVelocity2D> {
    NavierStokes2D::new(vel.grid, Limiter::default(), Execution::default()).step(vel, dt, re)
}
