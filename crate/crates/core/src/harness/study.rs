//! Grid-refinement studies: restriction to coarse grids and experimental orders of
//! convergence.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::run::simulate;

/// Averages consecutive groups of `factor` fine cells; `factor` must be a power of two
/// dividing the fine cell count.
pub fn restrict(fine: &[f64], factor: usize) -> Result<Vec<f64>> {
    if !factor.is_power_of_two() || fine.is_empty() || fine.len() % factor != 0 {
        return Err(Error::NotNested(format!("{} cells cannot be coarsened by {factor}", fine.len())));
    }
    Ok(fine.chunks_exact(factor).map(|c| c.iter().sum::<f64>() / factor as f64).collect())
}

/// `log2(e_n / e_2n)` for errors on grids `n` and `2n`.
pub fn eoc(error_coarse: f64, error_fine: f64) -> Result<f64> {
    if !(error_coarse > 0.0 && error_fine > 0.0) {
        return Err(Error::UndefinedEoc);
    }
    Ok((error_coarse / error_fine).log2())
}

/// Maximum-norm distance.
pub fn max_error(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), found: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudyRow {
    pub grid: usize,
    pub order: usize,
    pub error: f64,
    /// Order of convergence against the previous row; `None` for the first row or when
    /// an error vanishes.
    pub eoc: Option<f64>,
}

/// Final density of a 1D configuration.
pub fn final_density(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    if cfg.preset.is_2d() {
        return Err(Error::Config("accuracy studies need a 1D preset".into()));
    }
    let mut c = cfg.clone();
    c.output_times.clear();
    Ok(simulate(&c, |_| Ok(()))?.state.rho())
}

/// Errors of coarse runs against a given reference density.
///
/// The reference is restricted by averaging onto each coarse grid; the grids must nest.
pub fn study_against(template: &ExperimentConfig, grids: &[usize], reference: &[f64]) -> Result<Vec<StudyRow>> {
    let mut rows: Vec<StudyRow> = Vec::with_capacity(grids.len());
    for &m in grids {
        if m == 0 || reference.len() % m != 0 {
            return Err(Error::NotNested(format!("grid {m} does not divide reference grid {}", reference.len())));
        }
        let coarse_ref = restrict(reference, reference.len() / m)?;
        let mut cfg = template.clone();
        cfg.m = m;
        let error = max_error(&final_density(&cfg)?, &coarse_ref)?;
        let eoc = rows.last().and_then(|prev| {
            let ratio = (m as f64 / prev.grid as f64).log2();
            eoc(prev.error, error).ok().map(|e| e / ratio)
        });
        rows.push(StudyRow { grid: m, order: cfg.order, error, eoc });
    }
    Ok(rows)
}

/// Runs the reference on `reference_grid` cells (with `reference_order` moments if given,
/// otherwise the template's) and the coarse runs on `grids`.
pub fn accuracy_study(
    template: &ExperimentConfig,
    grids: &[usize],
    reference_grid: usize,
    reference_order: Option<usize>,
) -> Result<Vec<StudyRow>> {
    let mut ref_cfg = template.clone();
    ref_cfg.m = reference_grid;
    if let Some(n) = reference_order {
        ref_cfg.order = n;
        ref_cfg.regions = None;
    }
    for &m in grids {
        if m == 0 || reference_grid % m != 0 || !(reference_grid / m).is_power_of_two() {
            return Err(Error::NotNested(format!("grid {m} is not nested in {reference_grid}")));
        }
    }
    let reference = final_density(&ref_cfg)?;
    study_against(template, grids, &reference)
}

/// CSV table `grid,order,linf_error,eoc`.
pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut s = String::from("grid,order,linf_error,eoc\n");
    for r in rows {
        let e = r.eoc.map_or(String::new(), |v| format!("{v:.4}"));
        writeln!(s, "{},{},{:.6e},{}", r.grid, r.order, r.error, e).unwrap();
    }
    s
}
