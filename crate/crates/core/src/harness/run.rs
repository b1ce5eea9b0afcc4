//! Time loop for the presets: stepping, snapshots and the end-of-run report.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::flow::{Grid2D, NavierStokes2D, StaggeredVelocity1D, StaggeredVelocity2D};
use crate::harness::config::ExperimentConfig;
use crate::harness::snapshot::FieldSnapshot;
use crate::indicator::{residuals_1d, residuals_2d, Residuals};
use crate::moment_model::MomentVector;
use crate::solver1d::{Grid1D, MomentField1D, SolverOptions};
use crate::solver2d::MomentField2D;
use crate::splitting::{shear_step, twodim_step, ShearState, TwoDimState};

#[derive(Clone, Debug, PartialEq)]
pub enum SimState {
    Shear(ShearState),
    TwoDim(TwoDimState),
}

impl SimState {
    pub fn rho(&self) -> Vec<f64> {
        match self {
            SimState::Shear(s) => s.field.rho(),
            SimState::TwoDim(s) => s.field.rho(),
        }
    }

    /// Sum of the cell densities.
    pub fn mass(&self) -> f64 {
        match self {
            SimState::Shear(s) => s.field.total(0),
            SimState::TwoDim(s) => s.field.total(0),
        }
    }

    pub fn residuals(&self) -> Result<Residuals> {
        match self {
            SimState::Shear(s) => residuals_1d(&s.field, &s.w),
            SimState::TwoDim(s) => residuals_2d(&s.field, &s.vel),
        }
    }

    pub fn as_shear(&self) -> Option<&ShearState> {
        match self {
            SimState::Shear(s) => Some(s),
            SimState::TwoDim(_) => None,
        }
    }

    pub fn as_twodim(&self) -> Option<&TwoDimState> {
        match self {
            SimState::TwoDim(s) => Some(s),
            SimState::Shear(_) => None,
        }
    }
}

/// Initial state of a preset: isotropic orientation, fluid at rest.
pub fn initial_state(cfg: &ExperimentConfig) -> Result<SimState> {
    cfg.validate()?;
    let rho0 = |x: f64, z: f64| cfg.preset.initial_density(x, z);
    if cfg.preset.is_2d() {
        let grid = Grid2D::new(cfg.x_left, cfg.x_right, cfg.z_left, cfg.z_right, cfg.m, cfg.m_z)?;
        let zero = MomentVector::zeros(cfg.order)?;
        let mut field = MomentField2D::from_fn(grid, cfg.order, |_, _| zero.clone())?;
        for j in 0..grid.mz {
            for i in 0..grid.mx {
                let (x, z) = grid.center(i, j);
                field.cell_mut(i, j)[0] = rho0(x, z);
            }
        }
        Ok(SimState::TwoDim(TwoDimState::new(field, StaggeredVelocity2D::zeros(grid))?))
    } else {
        let grid = Grid1D::new(cfg.x_left, cfg.x_right, cfg.m)?;
        let mut field = MomentField1D::from_fn(grid, cfg.resolution_map()?, |_, n| {
            MomentVector::zeros(n).expect("resolution map orders are at least 1")
        })?;
        for i in 0..grid.m {
            field.cell_mut(i)[0] = rho0(grid.center(i), 0.0);
        }
        Ok(SimState::Shear(ShearState::new(field, StaggeredVelocity1D::zeros(grid.m, grid.dx()))?))
    }
}

/// Outcome of a run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub steps: usize,
    pub time: f64,
    pub mass_initial: f64,
    pub mass_final: f64,
    pub min_rho: f64,
    /// Maxima of `|R_{2N+2}|` and `|R_{2N+3}|` at the final time.
    pub indicator_max: (f64, f64),
    pub snapshots: Vec<PathBuf>,
    pub state: SimState,
}

impl RunReport {
    /// Relative change of the total density.
    pub fn mass_drift(&self) -> f64 {
        if self.mass_initial == 0.0 {
            self.mass_final.abs()
        } else {
            ((self.mass_final - self.mass_initial) / self.mass_initial).abs()
        }
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        writeln!(s, "steps: {}  final time: {}", self.steps, self.time).unwrap();
        writeln!(
            s,
            "mass: initial {:.15e}  final {:.15e}  relative drift {:.3e}",
            self.mass_initial,
            self.mass_final,
            self.mass_drift()
        )
        .unwrap();
        writeln!(s, "min rho: {:.6e}", self.min_rho).unwrap();
        write!(s, "indicator max: |R_2N+2| {:.6e}  |R_2N+3| {:.6e}", self.indicator_max.0, self.indicator_max.1).unwrap();
        for p in &self.snapshots {
            write!(s, "\nwrote {}", p.display()).unwrap();
        }
        s
    }
}

/// Advances a preset to `t_end`, handing a snapshot with indicators to `on_snapshot` at
/// every scheduled time.
pub fn simulate<F>(cfg: &ExperimentConfig, mut on_snapshot: F) -> Result<RunReport>
where
    F: FnMut(&FieldSnapshot) -> Result<()>,
{
    let mut state = initial_state(cfg)?;
    let opts = SolverOptions { limiter: cfg.limiter, execution: cfg.execution };
    let flow = match &state {
        SimState::TwoDim(s) => Some(NavierStokes2D::new(*s.field.grid(), cfg.limiter, cfg.execution)),
        SimState::Shear(_) => None,
    };
    let mass_initial = state.mass();
    let dt_cap = cfg.dt_max.unwrap_or(f64::INFINITY);
    let (mut t, mut steps) = (0.0_f64, 0_usize);
    let mut last_residuals = Residuals::default();

    for target in cfg.snapshot_times() {
        while t < target {
            let bound = match &state {
                SimState::Shear(s) => s.max_dt(cfg.cfl)?,
                SimState::TwoDim(s) => s.max_dt(cfg.cfl)?,
            }
            .min(dt_cap);
            let remaining = target - t;
            // Split the tail into two even steps rather than leave a sliver.
            let dt = if remaining <= bound {
                remaining
            } else if remaining < 2.0 * bound {
                0.5 * remaining
            } else {
                bound
            };
            let result = match (&mut state, &flow) {
                (SimState::Shear(s), _) => shear_step(s, dt, &cfg.params, &opts),
                (SimState::TwoDim(s), Some(flow)) => twodim_step(s, dt, &cfg.params, flow, &opts),
                (SimState::TwoDim(_), None) => unreachable!("2D state always has a flow solver"),
            };
            result.map_err(|e| Error::Solver { step: steps, time: t, source: Box::new(e) })?;
            steps += 1;
            t = if dt == remaining { target } else { t + dt };
        }
        last_residuals = state.residuals()?;
        let name = cfg.preset.name();
        let snap = match &state {
            SimState::Shear(s) => {
                FieldSnapshot::from_shear(name, t, steps, cfg.params, &s.field, &s.w, Some(last_residuals.clone()))
            }
            SimState::TwoDim(s) => {
                FieldSnapshot::from_twodim(name, t, steps, cfg.params, &s.field, &s.vel, Some(last_residuals.clone()))
            }
        };
        on_snapshot(&snap)?;
    }
    let rho = state.rho();
    Ok(RunReport {
        steps,
        time: t,
        mass_initial,
        mass_final: state.mass(),
        min_rho: rho.iter().copied().fold(f64::INFINITY, f64::min),
        indicator_max: (last_residuals.max_c(), last_residuals.max_s()),
        snapshots: Vec::new(),
        state,
    })
}

/// Runs a preset and writes its snapshots to `cfg.out`, if set.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut written = Vec::new();
    let mut k = 0;
    let mut report = simulate(cfg, |snap| {
        if let Some(dir) = &cfg.out {
            written.push(snap.write(dir, &format!("{}_{k:03}", cfg.preset.name()))?);
        }
        k += 1;
        Ok(())
    })?;
    report.snapshots = written;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::presets::Preset;
    use crate::par::Execution;

    fn small(preset: Preset) -> ExperimentConfig {
        let mut c = ExperimentConfig::preset(preset);
        c.m = 64;
        c.m_z = if preset.is_2d() { 16 } else { 1 };
        c.order = if preset.is_2d() { 2 } else { c.order };
        c.t_end = 2.0;
        c.output_times = vec![0.0, 1.0];
        c
    }

    #[test]
    fn snapshots_hit_scheduled_times() {
        let mut times = Vec::new();
        let report = simulate(&small(Preset::ShearAccuracy), |s| {
            times.push(s.header.time);
            Ok(())
        })
        .unwrap();
        assert_eq!(times, vec![0.0, 1.0, 2.0]);
        assert_eq!(report.time, 2.0);
        assert!(report.mass_drift() < 1e-13);
    }

    #[test]
    fn zero_end_time_writes_initial_state() {
        let mut c = small(Preset::ShearAdaptiveMixed);
        c.t_end = 0.0;
        c.output_times.clear();
        let report = run(&c).unwrap();
        assert_eq!(report.steps, 0);
        assert_eq!(report.state, initial_state(&c).unwrap());
    }

    #[test]
    fn runs_are_bitwise_reproducible_across_execution_modes() {
        for preset in [Preset::ShearAdaptiveMixed, Preset::Droplet2d] {
            let dir = tempfile::tempdir().unwrap();
            let mut outputs = Vec::new();
            for exec in [Execution::Sequential, Execution::Parallel] {
                let mut c = small(preset);
                c.execution = exec;
                c.out = Some(dir.path().join(format!("{exec:?}")));
                let report = run(&c).unwrap();
                outputs.push(report.snapshots.iter().map(|p| std::fs::read(p).unwrap()).collect::<Vec<_>>());
            }
            assert_eq!(outputs[0], outputs[1], "{preset}");
            assert_eq!(outputs[0].len(), 3);
        }
    }

    #[test]
    fn dt_cap_is_respected() {
        let mut c = small(Preset::ShearAccuracy);
        c.output_times.clear();
        c.dt_max = Some(0.1);
        let report = simulate(&c, |_| Ok(())).unwrap();
        assert!((20..=21).contains(&report.steps), "{}", report.steps);
    }
}
