//! Residual-based modelling-error indicators and entropy diagnostics.
//!
//! Inserting the zero-padded order-`N` state into the order-`N + 1` system leaves a defect
//! in the two equations for `C_{N+1}` and `S_{N+1}`. Its magnitude is the indicator.

use crate::error::{Error, Result};
use crate::flow::{gradient_w_1d, gradients_2d, StaggeredVelocity1D, StaggeredVelocity2D};
use crate::moment_model::{c_index, entropy_of, s_index};
use crate::solver1d::{Grid1D, MomentField1D, Region, ResolutionMap};
use crate::solver2d::MomentField2D;

/// Cell-centred indicator fields `|R_{2N+2}|` and `|R_{2N+3}|`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Residuals {
    pub r_c: Vec<f64>,
    pub r_s: Vec<f64>,
}

impl Residuals {
    /// Per-cell `max(|R_{2N+2}|, |R_{2N+3}|)`.
    pub fn combined(&self) -> Vec<f64> {
        self.r_c.iter().zip(&self.r_s).map(|(a, b)| a.max(*b)).collect()
    }

    pub fn max_c(&self) -> f64 {
        self.r_c.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn max_s(&self) -> f64 {
        self.r_s.iter().fold(0.0, |m, v| m.max(*v))
    }
}

/// `C_l` and `S_l` of a cell, zero where the cell's order is below `l`.
fn cs(q: &[f64], l: usize) -> (f64, f64) {
    if s_index(l) < q.len() {
        (q[c_index(l)], q[s_index(l)])
    } else {
        (0.0, 0.0)
    }
}

/// Shear-flow indicators with centred differences of the moments and the cell `w_x`.
///
/// Each cell uses its local order `N`; a lower-order neighbour contributes zero for the
/// moments it does not carry.
pub fn residuals_1d(field: &MomentField1D, w: &StaggeredVelocity1D) -> Result<Residuals> {
    let m = field.len();
    if w.len() != m {
        return Err(Error::Dimension { expected: m, found: w.len() });
    }
    let wx = gradient_w_1d(w);
    let inv = 1.0 / (2.0 * field.grid().dx());
    let mut out = Residuals { r_c: Vec::with_capacity(m), r_s: Vec::with_capacity(m) };
    for i in 0..m {
        let n = field.order(i);
        let (c, s) = cs(field.cell(i), n);
        let (cl, sl) = cs(field.cell((i + m - 1) % m), n);
        let (cr, sr) = cs(field.cell((i + 1) % m), n);
        let k = 0.5 * (n + 1) as f64 * wx[i];
        out.r_c.push((0.25 * (sr - sl) * inv + k * s).abs());
        out.r_s.push((0.25 * (cr - cl) * inv + k * c).abs());
    }
    Ok(out)
}

/// 2D indicators with centred moment differences and [`gradients_2d`] velocity gradients.
pub fn residuals_2d(field: &MomentField2D, vel: &StaggeredVelocity2D) -> Result<Residuals> {
    let g = *field.grid();
    if vel.grid != g {
        return Err(Error::InvalidGrid("velocity and moment grids differ".into()));
    }
    let n = field.order();
    let grads = gradients_2d(vel);
    let (ix, iz) = (1.0 / (2.0 * g.dx()), 1.0 / (2.0 * g.dz()));
    let k = 0.5 * (n + 1) as f64;
    let mut out = Residuals { r_c: Vec::with_capacity(g.cells()), r_s: Vec::with_capacity(g.cells()) };
    for j in 0..g.mz {
        for i in 0..g.mx {
            let (c, s) = cs(field.cell(i, j), n);
            let (cw, sw) = cs(field.cell(g.left(i), j), n);
            let (ce, se) = cs(field.cell(g.right(i), j), n);
            let (cb, sb) = cs(field.cell(i, g.below(j)), n);
            let (ca, sa) = cs(field.cell(i, g.above(j)), n);
            let gr = &grads[g.idx(i, j)];
            let strain = gr.wz - gr.ux;
            let shear = gr.uz + gr.wx;
            let (dxc, dxs) = ((ce - cw) * ix, (se - sw) * ix);
            let (dzc, dzs) = ((ca - cb) * iz, (sa - sb) * iz);
            out.r_c.push((-0.25 * dxs - 0.25 * dzc - k * strain * c - k * shear * s).abs());
            out.r_s.push((0.25 * dxc - 0.25 * dzs - k * strain * s + k * shear * c).abs());
        }
    }
    Ok(out)
}

/// Builds a resolution map from a per-cell indicator.
///
/// `thresholds` lists `(level, order)` pairs by descending level; a cell gets the order of
/// the first level its indicator exceeds, otherwise `base_order`. Runs narrower than
/// `min_width` are absorbed into the neighbouring run of higher order.
pub fn suggest_resolution_map(
    grid: &Grid1D,
    indicator: &[f64],
    base_order: usize,
    thresholds: &[(f64, usize)],
    min_width: f64,
) -> Result<ResolutionMap> {
    if thresholds.is_empty() {
        return Err(Error::InvalidParams("no indicator thresholds given".into()));
    }
    if thresholds.windows(2).any(|p| p[0].0 < p[1].0) {
        return Err(Error::InvalidParams("thresholds must be sorted by descending level".into()));
    }
    if indicator.len() != grid.m {
        return Err(Error::Dimension { expected: grid.m, found: indicator.len() });
    }
    if base_order == 0 || thresholds.iter().any(|t| t.1 == 0) {
        return Err(Error::InvalidOrder(0));
    }
    let orders: Vec<usize> = indicator
        .iter()
        .map(|&e| thresholds.iter().find(|t| e > t.0).map_or(base_order, |t| t.1))
        .collect();

    // Runs of equal order as (first cell, cell count, order).
    let mut runs: Vec<(usize, usize, usize)> = Vec::new();
    for (i, &n) in orders.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.2 == n => r.1 += 1,
            _ => runs.push((i, 1, n)),
        }
    }
    let min_cells = (min_width / grid.dx()).ceil() as usize;
    while runs.len() > 1 {
        let Some((k, _)) = runs
            .iter()
            .enumerate()
            .filter(|(_, r)| r.1 < min_cells)
            .min_by_key(|(_, r)| r.1)
        else {
            break;
        };
        let left = k.checked_sub(1).map(|j| runs[j].2);
        let right = runs.get(k + 1).map(|r| r.2);
        let target = match (left, right) {
            (Some(l), Some(r)) if r > l => k + 1,
            (Some(_), _) => k - 1,
            _ => k + 1,
        };
        runs[k].2 = runs[target].2;
        // Merge neighbours that now share an order.
        let mut merged: Vec<(usize, usize, usize)> = Vec::with_capacity(runs.len());
        for r in runs {
            match merged.last_mut() {
                Some(p) if p.2 == r.2 => p.1 += r.1,
                _ => merged.push(r),
            }
        }
        runs = merged;
    }
    let edge = |i: usize| if i == grid.m { grid.x_right } else { grid.x_left + i as f64 * grid.dx() };
    ResolutionMap::new(
        runs.iter()
            .map(|&(start, len, order)| Region { a: edge(start), b: edge(start + len), order })
            .collect(),
    )
}

/// Per-cell entropy of a 1D field.
pub fn entropy_field(field: &MomentField1D) -> Vec<f64> {
    field.cells().iter().map(|q| entropy_of(q)).collect()
}

/// Grid integral of the entropy of a 1D field.
pub fn total_entropy(field: &MomentField1D) -> f64 {
    entropy_field(field).iter().sum::<f64>() * field.grid().dx()
}

/// Per-cell entropy of a 2D field.
pub fn entropy_field_2d(field: &MomentField2D) -> Vec<f64> {
    field.data().chunks_exact(field.state_len()).map(entropy_of).collect()
}

/// Grid integral of the entropy of a 2D field.
pub fn total_entropy_2d(field: &MomentField2D) -> f64 {
    let g = field.grid();
    entropy_field_2d(field).iter().sum::<f64>() * g.dx() * g.dz()
}
