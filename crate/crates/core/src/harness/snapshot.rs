//! CSV snapshots with a one-line JSON header.
//!
//! A snapshot file starts with `# {header}`, then a column row `x[,z],rho,C1,S1,...`,
//! then one row per cell; moments a cell does not carry are left empty. Optional
//! indicator columns `r_c,r_s` follow the moments. Velocities go to a companion file
//! `<stem>_vel.csv` with columns `x,w` (nodes, 1D) or `x,z,u,w` (cell centres, 2D).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::flow::{Grid2D, StaggeredVelocity1D, StaggeredVelocity2D};
use crate::indicator::Residuals;
use crate::moment_model::{state_len, ModelParams};
use crate::solver1d::{Grid1D, MomentField1D, Region, ResolutionMap};
use crate::solver2d::MomentField2D;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SnapshotHeader {
    pub preset: String,
    pub time: f64,
    pub step: usize,
    pub params: ModelParams,
    pub x_left: f64,
    pub x_right: f64,
    pub m: usize,
    /// 2D grid extent; absent for 1D snapshots.
    pub z: Option<(f64, f64, usize)>,
    /// Orders per x-region.
    pub regions: Vec<Region>,
}

impl SnapshotHeader {
    pub fn is_2d(&self) -> bool {
        self.z.is_some()
    }

    pub fn max_order(&self) -> usize {
        self.regions.iter().map(|r| r.order).max().unwrap_or(0)
    }
}

/// Velocity data stored alongside a snapshot.
#[derive(Clone, Debug, PartialEq)]
pub enum SnapshotVelocity {
    Nodes1D(Vec<f64>),
    Cells2D { u: Vec<f64>, w: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldSnapshot {
    pub header: SnapshotHeader,
    /// Per-cell moments, x fastest in 2D.
    pub cells: Vec<Vec<f64>>,
    pub velocity: Option<SnapshotVelocity>,
    pub indicators: Option<Residuals>,
}

impl FieldSnapshot {
    pub fn from_shear(
        preset: &str,
        time: f64,
        step: usize,
        params: ModelParams,
        field: &MomentField1D,
        w: &StaggeredVelocity1D,
        indicators: Option<Residuals>,
    ) -> Self {
        let g = field.grid();
        Self {
            header: SnapshotHeader {
                preset: preset.to_string(),
                time,
                step,
                params,
                x_left: g.x_left,
                x_right: g.x_right,
                m: g.m,
                z: None,
                regions: field.resolution().regions().to_vec(),
            },
            cells: field.cells().to_vec(),
            velocity: Some(SnapshotVelocity::Nodes1D(w.w.clone())),
            indicators,
        }
    }

    pub fn from_twodim(
        preset: &str,
        time: f64,
        step: usize,
        params: ModelParams,
        field: &MomentField2D,
        vel: &StaggeredVelocity2D,
        indicators: Option<Residuals>,
    ) -> Self {
        let g = field.grid();
        Self {
            header: SnapshotHeader {
                preset: preset.to_string(),
                time,
                step,
                params,
                x_left: g.x_left,
                x_right: g.x_right,
                m: g.mx,
                z: Some((g.z_left, g.z_right, g.mz)),
                regions: vec![Region { a: g.x_left, b: g.x_right, order: field.order() }],
            },
            cells: field.data().chunks_exact(field.state_len()).map(<[f64]>::to_vec).collect(),
            velocity: Some(SnapshotVelocity::Cells2D { u: vel.u.clone(), w: vel.w.clone() }),
            indicators,
        }
    }

    pub fn rho(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c[0]).collect()
    }

    pub fn grid_1d(&self) -> Result<Grid1D> {
        Grid1D::new(self.header.x_left, self.header.x_right, self.header.m)
    }

    pub fn grid_2d(&self) -> Result<Grid2D> {
        let (zl, zr, mz) = self.header.z.ok_or_else(|| Error::Format("not a 2D snapshot".into()))?;
        Grid2D::new(self.header.x_left, self.header.x_right, zl, zr, self.header.m, mz)
    }

    /// Rebuilds the 1D moment field.
    pub fn field_1d(&self) -> Result<MomentField1D> {
        if self.header.is_2d() {
            return Err(Error::Format("not a 1D snapshot".into()));
        }
        MomentField1D::from_cells(self.grid_1d()?, ResolutionMap::new(self.header.regions.clone())?, self.cells.clone())
    }

    /// Rebuilds the 2D moment field.
    pub fn field_2d(&self) -> Result<MomentField2D> {
        let grid = self.grid_2d()?;
        let order = self.header.max_order();
        if self.cells.len() != grid.cells() {
            return Err(Error::Format(format!("expected {} cells, found {}", grid.cells(), self.cells.len())));
        }
        let zero = crate::moment_model::MomentVector::zeros(order)?;
        let mut f = MomentField2D::from_fn(grid, order, |_, _| zero.clone())?;
        for (k, c) in self.cells.iter().enumerate() {
            if c.len() != state_len(order) {
                return Err(Error::Format(format!("cell {k} has {} values", c.len())));
            }
            f.cell_mut(k % grid.mx, k / grid.mx).copy_from_slice(c);
        }
        Ok(f)
    }

    pub fn velocity_1d(&self) -> Result<StaggeredVelocity1D> {
        match &self.velocity {
            Some(SnapshotVelocity::Nodes1D(w)) => Ok(StaggeredVelocity1D { w: w.clone(), dx: self.grid_1d()?.dx() }),
            _ => Err(Error::Format("snapshot has no 1D velocity".into())),
        }
    }

    pub fn velocity_2d(&self) -> Result<StaggeredVelocity2D> {
        match &self.velocity {
            Some(SnapshotVelocity::Cells2D { u, w }) => {
                Ok(StaggeredVelocity2D { grid: self.grid_2d()?, u: u.clone(), w: w.clone() })
            }
            _ => Err(Error::Format("snapshot has no 2D velocity".into())),
        }
    }

    fn coords(&self, k: usize) -> Result<Vec<f64>> {
        Ok(if self.header.is_2d() {
            let g = self.grid_2d()?;
            let (x, z) = g.center(k % g.mx, k / g.mx);
            vec![x, z]
        } else {
            vec![self.grid_1d()?.center(k)]
        })
    }

    /// The snapshot file contents.
    pub fn to_csv(&self) -> Result<String> {
        let width = state_len(self.header.max_order());
        let mut s = String::new();
        let header = serde_json::to_string(&self.header).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(s, "# {header}").unwrap();
        let mut cols: Vec<String> = if self.header.is_2d() { vec!["x".into(), "z".into()] } else { vec!["x".into()] };
        cols.push("rho".into());
        for l in 1..=self.header.max_order() {
            cols.push(format!("C{l}"));
            cols.push(format!("S{l}"));
        }
        if self.indicators.is_some() {
            cols.push("r_c".into());
            cols.push("r_s".into());
        }
        writeln!(s, "{}", cols.join(",")).unwrap();
        for (k, c) in self.cells.iter().enumerate() {
            let mut row: Vec<String> = self.coords(k)?.iter().map(f64::to_string).collect();
            row.extend((0..width).map(|v| c.get(v).map_or(String::new(), f64::to_string)));
            if let Some(r) = &self.indicators {
                row.push(r.r_c[k].to_string());
                row.push(r.r_s[k].to_string());
            }
            writeln!(s, "{}", row.join(",")).unwrap();
        }
        Ok(s)
    }

    /// The companion velocity file contents.
    pub fn velocity_csv(&self) -> Result<Option<String>> {
        let mut s = String::new();
        match &self.velocity {
            None => return Ok(None),
            Some(SnapshotVelocity::Nodes1D(w)) => {
                let g = self.grid_1d()?;
                writeln!(s, "x,w").unwrap();
                for (i, v) in w.iter().enumerate() {
                    writeln!(s, "{},{}", g.x_left + (i + 1) as f64 * g.dx(), v).unwrap();
                }
            }
            Some(SnapshotVelocity::Cells2D { u, w }) => {
                let g = self.grid_2d()?;
                writeln!(s, "x,z,u,w").unwrap();
                for k in 0..g.cells() {
                    let (x, z) = g.center(k % g.mx, k / g.mx);
                    writeln!(s, "{x},{z},{},{}", u[k], w[k]).unwrap();
                }
            }
        }
        Ok(Some(s))
    }

    /// Writes `<dir>/<stem>.csv` and the velocity file; returns the snapshot path.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{stem}.csv"));
        fs::write(&path, self.to_csv()?)?;
        if let Some(v) = self.velocity_csv()? {
            fs::write(velocity_path(&path), v)?;
        }
        Ok(path)
    }

    /// Reads a snapshot and, if present, its velocity file.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let vel_path = velocity_path(path);
        let vel_text = if vel_path.exists() { Some(fs::read_to_string(vel_path)?) } else { None };
        Self::parse(&text, vel_text.as_deref())
    }

    pub fn parse(text: &str, velocity: Option<&str>) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().ok_or_else(|| Error::Format("empty snapshot".into()))?;
        let json = first.strip_prefix('#').ok_or_else(|| Error::Format("missing header line".into()))?;
        let header: SnapshotHeader = serde_json::from_str(json.trim()).map_err(|e| Error::Format(e.to_string()))?;
        let cols: Vec<&str> = lines.next().ok_or_else(|| Error::Format("missing column row".into()))?.split(',').collect();
        let ncoord = if header.is_2d() { 2 } else { 1 };
        let width = state_len(header.max_order());
        let has_ind = cols.last() == Some(&"r_s");
        if cols.len() != ncoord + width + if has_ind { 2 } else { 0 } {
            return Err(Error::Format(format!("unexpected columns {cols:?}")));
        }
        let num = |v: &str, line: usize| v.trim().parse::<f64>().map_err(|_| Error::Format(format!("line {line}: bad number '{v}'")));
        let mut cells = Vec::new();
        let mut ind = Residuals::default();
        for (n, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::Format(format!("line {}: {} fields", n + 3, fields.len())));
            }
            let mut cell = Vec::with_capacity(width);
            for f in &fields[ncoord..ncoord + width] {
                if f.is_empty() {
                    break;
                }
                cell.push(num(f, n + 3)?);
            }
            cells.push(cell);
            if has_ind {
                ind.r_c.push(num(fields[ncoord + width], n + 3)?);
                ind.r_s.push(num(fields[ncoord + width + 1], n + 3)?);
            }
        }
        let expected = header.m * header.z.map_or(1, |z| z.2);
        if cells.len() != expected {
            return Err(Error::Format(format!("expected {expected} rows, found {}", cells.len())));
        }
        let velocity = match velocity {
            None => None,
            Some(v) => Some(parse_velocity(v, header.is_2d(), expected)?),
        };
        Ok(Self { header, cells, velocity, indicators: has_ind.then_some(ind) })
    }
}

fn parse_velocity(text: &str, is_2d: bool, n: usize) -> Result<SnapshotVelocity> {
    let mut rows = text.lines().skip(1).map(|l| {
        l.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad velocity value '{v}'"))))
            .collect::<Result<Vec<f64>>>()
    });
    let (mut u, mut w) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for r in rows.by_ref() {
        let r = r?;
        match (is_2d, r.len()) {
            (false, 2) => w.push(r[1]),
            (true, 4) => {
                u.push(r[2]);
                w.push(r[3]);
            }
            _ => return Err(Error::Format("velocity row has the wrong width".into())),
        }
    }
    if w.len() != n {
        return Err(Error::Format(format!("expected {n} velocity rows, found {}", w.len())));
    }
    Ok(if is_2d { SnapshotVelocity::Cells2D { u, w } } else { SnapshotVelocity::Nodes1D(w) })
}

/// Path of the velocity file belonging to a snapshot.
pub fn velocity_path(snapshot: &Path) -> PathBuf {
    let stem = snapshot.file_stem().and_then(|s| s.to_str()).unwrap_or("snapshot");
    snapshot.with_file_name(format!("{stem}_vel.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment_model::MomentVector;

    fn mixed() -> (MomentField1D, StaggeredVelocity1D) {
        let grid = Grid1D::new(0.0, 8.0, 8).unwrap();
        let map = ResolutionMap::new(vec![Region { a: 0.0, b: 4.0, order: 1 }, Region { a: 4.0, b: 8.0, order: 2 }]).unwrap();
        let f = MomentField1D::from_fn(grid, map, |x, n| {
            MomentVector::new((0..2 * n + 1).map(|k| x * 0.1 + k as f64 / 3.0).collect()).unwrap()
        })
        .unwrap();
        let mut w = StaggeredVelocity1D::zeros(8, 1.0);
        w.w.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64).sin());
        (f, w)
    }

    #[test]
    fn round_trip_1d_is_exact() {
        let (f, w) = mixed();
        let ind = crate::indicator::residuals_1d(&f, &w).unwrap();
        let snap = FieldSnapshot::from_shear("shear-accuracy", 1.5, 3, ModelParams::new(0.01, 1.0, 1.0).unwrap(), &f, &w, Some(ind));
        let dir = tempfile::tempdir().unwrap();
        let path = snap.write(dir.path(), "t1").unwrap();
        let back = FieldSnapshot::read(&path).unwrap();
        assert_eq!(back, snap);
        assert_eq!(back.field_1d().unwrap(), f);
        assert_eq!(back.velocity_1d().unwrap(), w);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1).unwrap() == "x,rho,C1,S1,C2,S2,r_c,r_s");
        assert!(text.lines().nth(2).unwrap().contains(",,"), "low-order rows are padded");
    }

    #[test]
    fn round_trip_2d() {
        let grid = Grid2D::new(0.0, 4.0, 0.0, 2.0, 4, 4).unwrap();
        let f = MomentField2D::from_fn(grid, 1, |x, z| MomentVector::new(vec![x, z, x * z]).unwrap()).unwrap();
        let vel = StaggeredVelocity2D::from_fn(grid, |x, z| (x, -z));
        let snap = FieldSnapshot::from_twodim("droplet-2d", 2.0, 7, ModelParams::new(1.0, 1.0, 1.0).unwrap(), &f, &vel, None);
        let back = FieldSnapshot::parse(&snap.to_csv().unwrap(), snap.velocity_csv().unwrap().as_deref()).unwrap();
        assert_eq!(back, snap);
        assert_eq!(back.field_2d().unwrap(), f);
        assert_eq!(back.velocity_2d().unwrap(), vel);
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(FieldSnapshot::parse("", None).is_err());
        assert!(FieldSnapshot::parse("x,rho\n1,2\n", None).is_err());
        let (f, w) = mixed();
        let snap = FieldSnapshot::from_shear("p", 0.0, 0, ModelParams::new(0.01, 1.0, 1.0).unwrap(), &f, &w, None);
        let csv = snap.to_csv().unwrap();
        let truncated: String = csv.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(FieldSnapshot::parse(&truncated, None).is_err());
        assert!(FieldSnapshot::parse(&csv.replace("0.1", "zz"), None).is_err());
    }
}
