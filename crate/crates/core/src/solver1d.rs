//! High-resolution wave propagation for the 1D moment system on a periodic grid,
//! with a static per-region moment order.

use std::borrow::Cow;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::moment_model::{check_order, resize_into, state_len, steady_state_moments, MomentVector, STEADY_STATE_TOL};
use crate::par::{for_each_mut, map_range, Execution};
use crate::riemann::{add_correction, decompose_jump, operator_a, uniform_contributions, HyperbolicOperator, InterfaceScratch, Limiter};

/// Equidistant grid on `[x_left, x_right]`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid1D {
    pub x_left: f64,
    pub x_right: f64,
    pub m: usize,
}

impl Grid1D {
    pub fn new(x_left: f64, x_right: f64, m: usize) -> Result<Self> {
        if !(x_right > x_left) || !x_left.is_finite() || !x_right.is_finite() {
            return Err(Error::InvalidGrid(format!("empty domain [{x_left}, {x_right}]")));
        }
        if m < 4 {
            return Err(Error::InvalidGrid(format!("{m} cells, need at least 4")));
        }
        Ok(Self { x_left, x_right, m })
    }

    pub fn dx(&self) -> f64 {
        (self.x_right - self.x_left) / self.m as f64
    }

    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_left + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.center(i)).collect()
    }
}

/// One interval of a resolution map.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Region {
    pub a: f64,
    pub b: f64,
    pub order: usize,
}

/// Partition of the domain into intervals of fixed moment order, sorted left to right.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ResolutionMap {
    regions: Vec<Region>,
}

impl ResolutionMap {
    pub fn uniform(x_left: f64, x_right: f64, order: usize) -> Result<Self> {
        Self::new(vec![Region { a: x_left, b: x_right, order }])
    }

    /// Validates that the regions are contiguous and sorted. Adjacent regions of equal order
    /// are merged.
    pub fn new(mut regions: Vec<Region>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::InvalidResolution("no regions".into()));
        }
        regions.sort_by(|p, q| p.a.total_cmp(&q.a));
        let span = regions.last().unwrap().b - regions[0].a;
        let tol = 1e-9 * span.abs().max(1.0);
        for r in &regions {
            check_order(r.order)?;
            if !(r.b > r.a) {
                return Err(Error::InvalidResolution(format!("empty interval [{}, {}]", r.a, r.b)));
            }
        }
        for w in regions.windows(2) {
            if (w[0].b - w[1].a).abs() > tol {
                return Err(Error::InvalidResolution(format!(
                    "gap or overlap between {} and {}",
                    w[0].b, w[1].a
                )));
            }
        }
        let mut merged: Vec<Region> = Vec::with_capacity(regions.len());
        for r in regions {
            match merged.last_mut() {
                Some(last) if last.order == r.order => last.b = r.b,
                _ => merged.push(r),
            }
        }
        Ok(Self { regions: merged })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn x_left(&self) -> f64 {
        self.regions[0].a
    }

    pub fn x_right(&self) -> f64 {
        self.regions.last().unwrap().b
    }

    /// Order of the region containing `x` (the rightmost one on a shared endpoint).
    pub fn order_at(&self, x: f64) -> usize {
        self.regions
            .iter()
            .find(|r| x < r.b)
            .unwrap_or_else(|| self.regions.last().unwrap())
            .order
    }

    pub fn min_order(&self) -> usize {
        self.regions.iter().map(|r| r.order).min().unwrap()
    }

    pub fn max_order(&self) -> usize {
        self.regions.iter().map(|r| r.order).max().unwrap()
    }

    /// Per-cell orders on `grid`, assigned by cell centre.
    pub fn cell_orders(&self, grid: &Grid1D) -> Result<Vec<usize>> {
        let tol = 1e-9 * grid.length();
        if (self.x_left() - grid.x_left).abs() > tol || (self.x_right() - grid.x_right).abs() > tol {
            return Err(Error::InvalidResolution(format!(
                "map covers [{}, {}], grid is [{}, {}]",
                self.x_left(),
                self.x_right(),
                grid.x_left,
                grid.x_right
            )));
        }
        Ok((0..grid.m).map(|i| self.order_at(grid.center(i))).collect())
    }
}

/// Cell averages of the moment system on a 1D grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentField1D {
    grid: Grid1D,
    resolution: ResolutionMap,
    cells: Vec<Vec<f64>>,
}

impl MomentField1D {
    /// Builds a field from per-cell states; each state is resized to its cell's order.
    pub fn from_fn<F>(grid: Grid1D, resolution: ResolutionMap, mut init: F) -> Result<Self>
    where
        F: FnMut(f64, usize) -> MomentVector,
    {
        let orders = resolution.cell_orders(&grid)?;
        let cells = orders
            .iter()
            .enumerate()
            .map(|(i, &n)| init(grid.center(i), n).resized(n).into_vec())
            .collect();
        Ok(Self { grid, resolution, cells })
    }

    /// Field from raw per-cell vectors, checked against the map.
    pub fn from_cells(grid: Grid1D, resolution: ResolutionMap, cells: Vec<Vec<f64>>) -> Result<Self> {
        let orders = resolution.cell_orders(&grid)?;
        if cells.len() != grid.m {
            return Err(Error::Dimension { expected: grid.m, found: cells.len() });
        }
        for (c, &n) in cells.iter().zip(&orders) {
            if c.len() != state_len(n) {
                return Err(Error::Dimension { expected: state_len(n), found: c.len() });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidState("non-finite cell value".into()));
            }
        }
        Ok(Self { grid, resolution, cells })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn resolution(&self) -> &ResolutionMap {
        &self.resolution
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        &self.cells[i]
    }

    pub fn cell_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.cells[i]
    }

    pub fn cells(&self) -> &[Vec<f64>] {
        &self.cells
    }

    pub(crate) fn cells_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.cells
    }

    pub fn order(&self, i: usize) -> usize {
        (self.cells[i].len() - 1) / 2
    }

    pub fn rho(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c[0]).collect()
    }

    /// `dx * sum_i Q_i[k]` over cells that carry component `k`.
    pub fn total(&self, k: usize) -> f64 {
        self.grid.dx() * self.cells.iter().filter_map(|c| c.get(k)).sum::<f64>()
    }

    /// Largest eigenvalue magnitude over the orders present.
    pub fn max_speed(&self) -> Result<f64> {
        let mut s = 0.0_f64;
        for r in self.resolution.regions() {
            s = s.max(operator_a(r.order)?.max_speed());
        }
        Ok(s)
    }
}

/// Largest stable step for Courant number `cfl`.
pub fn cfl_dt(field: &MomentField1D, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::InvalidCfl(cfl));
    }
    Ok(cfl * field.grid.dx() / field.max_speed()?)
}

/// Numerical options of the hyperbolic step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolverOptions {
    pub limiter: Limiter,
    pub execution: Execution,
}

/// Wave strengths stored at an interface: at the larger of the two cell orders and, for a
/// mixed interface, also at the smaller.
struct Decomposition {
    main_order: usize,
    main: Vec<f64>,
    low: Option<(usize, Vec<f64>)>,
}

struct Stepper<'a> {
    cells: &'a [Vec<f64>],
    ops: Vec<Option<Arc<HyperbolicOperator>>>,
    nu: f64,
    limiter: Limiter,
}

impl<'a> Stepper<'a> {
    fn new(field: &'a MomentField1D, nu: f64, limiter: Limiter) -> Result<Self> {
        let max = field.resolution.max_order();
        let mut ops = vec![None; max + 1];
        for (n, slot) in ops.iter_mut().enumerate().skip(1) {
            *slot = Some(operator_a(n)?);
        }
        Ok(Self { cells: &field.cells, ops, nu, limiter })
    }

    fn op(&self, order: usize) -> &HyperbolicOperator {
        self.ops[order].as_deref().expect("operator present for every order in the map")
    }

    fn m(&self) -> usize {
        self.cells.len()
    }

    /// Cells left and right of interface `i` (the left edge of cell `i`).
    fn sides(&self, i: usize) -> (&[f64], &[f64]) {
        let m = self.m();
        (&self.cells[(i + m - 1) % m], &self.cells[i])
    }

    fn decompose(&self, i: usize) -> Decomposition {
        let (ql, qr) = self.sides(i);
        let (kl, kr) = ((ql.len() - 1) / 2, (qr.len() - 1) / 2);
        let main_order = kl.max(kr);
        let main = decompose_jump(self.op(main_order), ql, qr);
        let low = (kl != kr).then(|| {
            let k = kl.min(kr);
            (k, decompose_jump(self.op(k), ql, qr))
        });
        Decomposition { main_order, main, low }
    }

    fn alpha_at<'d>(&self, decomp: &'d [Decomposition], i: usize, order: usize) -> Cow<'d, [f64]> {
        let d = &decomp[i];
        if d.main_order == order {
            return Cow::Borrowed(&d.main);
        }
        if let Some((k, low)) = &d.low {
            if *k == order {
                return Cow::Borrowed(low);
            }
        }
        let (ql, qr) = self.sides(i);
        Cow::Owned(decompose_jump(self.op(order), ql, qr))
    }

    /// `(to_left, to_right)` contributions of interface `i`, sized for the two cells.
    fn contributions(&self, decomp: &[Decomposition], i: usize) -> (Vec<f64>, Vec<f64>) {
        let m = self.m();
        let (prev, next) = ((i + m - 1) % m, (i + 1) % m);
        let (ql, qr) = self.sides(i);
        let (kl, kr) = ((ql.len() - 1) / 2, (qr.len() - 1) / 2);
        if kl == kr {
            let op = self.op(kl);
            let n = op.dim();
            let mut to_left = vec![0.0; n];
            let mut to_right = vec![0.0; n];
            let mut scratch = InterfaceScratch::new(n);
            uniform_contributions(
                op,
                0.0,
                self.nu,
                self.limiter,
                &decomp[i].main,
                &self.alpha_at(decomp, prev, kl),
                &self.alpha_at(decomp, next, kl),
                &mut scratch,
                &mut to_left,
                &mut to_right,
            );
            return (to_left, to_right);
        }

        let big = kl.max(kr);
        let op = self.op(big);
        let n = op.dim();
        let alpha = &decomp[i].main;
        let mut dq = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        resize_into(qr, &mut dq);
        resize_into(ql, &mut tmp);
        for (d, l) in dq.iter_mut().zip(&tmp) {
            *d -= l;
        }
        let total = op.matrix().mul_vec(&dq);
        // fluctuation into the high-order cell from its own waves; the other is the remainder
        let beta: Vec<f64> = op
            .eigenvalues()
            .iter()
            .zip(alpha)
            .map(|(&lam, &a)| if kl < kr { lam.max(0.0) * a } else { lam.min(0.0) * a })
            .collect();
        let mut toward_high = vec![0.0; n];
        op.synthesize_into(&beta, &mut toward_high);
        let (mut aminus, mut aplus) = (vec![0.0; n], vec![0.0; n]);
        for k in 0..n {
            if kl < kr {
                aplus[k] = toward_high[k];
                aminus[k] = total[k] - toward_high[k];
            } else {
                aminus[k] = toward_high[k];
                aplus[k] = total[k] - toward_high[k];
            }
        }

        // left-going corrections from the left-order system, right-going from the right-order one
        let mut flux = vec![0.0; n];
        let mut part = vec![0.0; state_len(kl)];
        add_correction(
            self.op(kl),
            self.nu,
            self.limiter,
            &self.alpha_at(decomp, i, kl),
            &self.alpha_at(decomp, next, kl),
            |lam| lam < 0.0,
            &mut part,
        );
        for (f, p) in flux.iter_mut().zip(&part) {
            *f += p;
        }
        let mut part = vec![0.0; state_len(kr)];
        add_correction(
            self.op(kr),
            self.nu,
            self.limiter,
            &self.alpha_at(decomp, i, kr),
            &self.alpha_at(decomp, prev, kr),
            |lam| lam > 0.0,
            &mut part,
        );
        for (f, p) in flux.iter_mut().zip(&part) {
            *f += p;
        }

        let to_left = (0..state_len(kl)).map(|k| aminus[k] + flux[k]).collect();
        let to_right = (0..state_len(kr)).map(|k| aplus[k] - flux[k]).collect();
        (to_left, to_right)
    }
}

/// Advances the homogeneous system by `dt` in place.
pub fn step_homogeneous_in_place(field: &mut MomentField1D, dt: f64, opts: &SolverOptions) -> Result<()> {
    let max_dt = cfl_dt(field, 1.0)?;
    if !(dt >= 0.0) || dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, max_dt });
    }
    if dt == 0.0 {
        return Ok(());
    }
    let nu = dt / field.grid.dx();
    let updates = {
        let stepper = Stepper::new(field, nu, opts.limiter)?;
        let m = stepper.m();
        let decomp = map_range(m, opts.execution, |i| stepper.decompose(i));
        map_range(m, opts.execution, |i| stepper.contributions(&decomp, i))
    };
    let m = field.cells.len();
    for_each_mut(&mut field.cells, opts.execution, |i, cell| {
        let from_left = &updates[i].1;
        let from_right = &updates[(i + 1) % m].0;
        for (k, q) in cell.iter_mut().enumerate() {
            *q -= nu * (from_left[k] + from_right[k]);
        }
    });
    Ok(())
}

/// Advances the homogeneous system by `dt`, refusing steps beyond the stability bound.
pub fn step_homogeneous(field: &MomentField1D, dt: f64, opts: &SolverOptions) -> Result<MomentField1D> {
    let mut next = field.clone();
    step_homogeneous_in_place(&mut next, dt, opts)?;
    Ok(next)
}

/// Evolves the homogeneous system to `t_end` with steps of Courant number `cfl`.
pub fn evolve_homogeneous(field: &mut MomentField1D, t_end: f64, cfl: f64, opts: &SolverOptions) -> Result<usize> {
    let dt_max = cfl_dt(field, cfl)?;
    if t_end <= 0.0 {
        return Ok(0);
    }
    let steps = (t_end / dt_max).ceil() as usize;
    let dt = t_end / steps as f64;
    for s in 0..steps {
        step_homogeneous_in_place(field, dt, opts).map_err(|e| Error::Solver {
            step: s,
            time: s as f64 * dt,
            source: Box::new(e),
        })?;
    }
    Ok(steps)
}

/// Setup of the two-state Riemann experiment with drift-diffusion equilibria on each side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiemannExperiment {
    pub n_left: usize,
    pub n_right: usize,
    pub wxdr_left: f64,
    pub wxdr_right: f64,
    pub t_end: f64,
    pub x_left: f64,
    pub x_right: f64,
    pub m: usize,
    pub cfl: f64,
    pub options: SolverOptions,
}

impl RiemannExperiment {
    pub fn new(n_left: usize, n_right: usize, t_end: f64) -> Self {
        Self {
            n_left,
            n_right,
            wxdr_left: 1.0,
            wxdr_right: 4.0,
            t_end,
            x_left: -10.0,
            x_right: 10.0,
            m: 800,
            cfl: 0.9,
            options: SolverOptions::default(),
        }
    }

    pub fn initial_field(&self) -> Result<MomentField1D> {
        let grid = Grid1D::new(self.x_left, self.x_right, self.m)?;
        let map = if self.n_left == self.n_right {
            ResolutionMap::uniform(self.x_left, self.x_right, self.n_left)?
        } else {
            ResolutionMap::new(vec![
                Region { a: self.x_left, b: 0.0, order: self.n_left },
                Region { a: 0.0, b: self.x_right, order: self.n_right },
            ])?
        };
        let left = steady_state_moments(self.wxdr_left, self.n_left, 1.0, STEADY_STATE_TOL)?;
        let right = steady_state_moments(self.wxdr_right, self.n_right, 1.0, STEADY_STATE_TOL)?;
        MomentField1D::from_fn(grid, map, |x, _| if x < 0.0 { left.clone() } else { right.clone() })
    }

    /// Cell centres and density at `t_end`.
    pub fn run(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut field = self.initial_field()?;
        evolve_homogeneous(&mut field, self.t_end, self.cfl, &self.options)?;
        Ok((field.grid.centers(), field.rho()))
    }
}

/// Density profile of the generalised Riemann experiment on the default grid `[-10, 10]`.
pub fn run_generalised_rp_experiment(
    n_left: usize,
    n_right: usize,
    wxdr_left: f64,
    wxdr_right: f64,
    t_end: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    RiemannExperiment { wxdr_left, wxdr_right, ..RiemannExperiment::new(n_left, n_right, t_end) }.run()
}
