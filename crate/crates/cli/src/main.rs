use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rodsed_core::harness::config::ExperimentConfig;
use rodsed_core::harness::kinetic::KineticReference;
use rodsed_core::harness::snapshot::FieldSnapshot;
use rodsed_core::harness::study::{accuracy_study, restrict, study_csv};
use rodsed_core::harness::run;
use rodsed_core::indicator::{residuals_1d, residuals_2d, suggest_resolution_map};
use rodsed_core::solver1d::RiemannExperiment;

/// Moment-hierarchy simulations of sedimenting rod-like particles.
#[derive(Parser, Debug)]
#[command(name = "rodsed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a preset and write CSV snapshots.
    Run(Overrides),
    /// Grid-refinement study against a fine reference run.
    Eoc(EocArgs),
    /// Compute residual indicators of a snapshot and optionally suggest a resolution map.
    Indicate(IndicateArgs),
    /// Riemann problem between steady states of different moment orders.
    Rp(RpArgs),
}

/// Settings shared by `run` and `eoc`; flags win over the config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    preset: Option<String>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    grid_z: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
    /// Mixed orders as `a:b:order,...`.
    #[arg(long)]
    regions: Option<String>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    d_r: Option<f64>,
    #[arg(long)]
    limiter: Option<String>,
    /// Extra snapshot times, comma separated.
    #[arg(long)]
    output_times: Option<String>,
    /// Output directory (run) or CSV file (eoc).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run the kernels on one thread.
    #[arg(long)]
    sequential: bool,
    /// Any other setting as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn pairs(&self) -> Result<Vec<(String, String)>> {
        let mut p: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                p.push((k.to_string(), v));
            }
        };
        push("preset", self.preset.clone());
        push("grid", self.grid.map(|v| v.to_string()));
        push("grid_z", self.grid_z.map(|v| v.to_string()));
        push("order", self.order.map(|v| v.to_string()));
        push("regions", self.regions.clone());
        push("t_end", self.t_end.map(|v| v.to_string()));
        push("cfl", self.cfl.map(|v| v.to_string()));
        push("d_r", self.d_r.map(|v| v.to_string()));
        push("limiter", self.limiter.clone());
        push("output_times", self.output_times.clone());
        if self.sequential {
            p.push(("execution".into(), "sequential".into()));
        }
        for s in &self.set {
            let (k, v) = s.split_once('=').with_context(|| format!("--set expects key=value, got '{s}'"))?;
            p.push((k.to_string(), v.to_string()));
        }
        Ok(p)
    }

    fn config(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig::load(self.config.as_deref(), &self.pairs()?)?)
    }
}

#[derive(Args, Debug)]
struct EocArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Coarse grids, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    grids: Vec<usize>,
    /// Reference grid.
    #[arg(long = "ref")]
    reference: usize,
    /// Moment order of the reference run (defaults to the coarse order).
    #[arg(long)]
    ref_order: Option<usize>,
}

#[derive(Args, Debug)]
struct IndicateArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// Write `x[,z],r_c,r_s` to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suggest a resolution map from `level:order,...` thresholds (1D only).
    #[arg(long)]
    thresholds: Option<String>,
    #[arg(long, default_value_t = 1)]
    base_order: usize,
    #[arg(long, default_value_t = 0.0)]
    min_width: f64,
}

#[derive(Args, Debug)]
struct RpArgs {
    #[arg(long)]
    nleft: usize,
    #[arg(long)]
    nright: usize,
    #[arg(long, default_value_t = 5.0)]
    t: f64,
    #[arg(long, default_value_t = 1.0)]
    wxdr_left: f64,
    #[arg(long, default_value_t = 4.0)]
    wxdr_right: f64,
    #[arg(long, default_value_t = 800)]
    grid: usize,
    #[arg(long)]
    limiter: Option<String>,
    /// Add a kinetic reference column computed on `grid * FACTOR` cells.
    #[arg(long, value_name = "FACTOR")]
    kinetic: Option<usize>,
    /// Angular cells of the kinetic reference.
    #[arg(long, default_value_t = 256)]
    kinetic_angles: usize,
    /// CSV output file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_run(o: &Overrides) -> Result<()> {
    let mut cfg = o.config()?;
    if let Some(out) = &o.out {
        cfg.out = Some(out.clone());
    }
    let report = run(&cfg)?;
    println!("preset: {}", cfg.preset);
    println!("{}", report.summary());
    Ok(())
}

fn cmd_eoc(a: &EocArgs) -> Result<()> {
    let cfg = a.overrides.config()?;
    let rows = accuracy_study(&cfg, &a.grids, a.reference, a.ref_order)?;
    let table = study_csv(&rows);
    match &a.overrides.out {
        Some(path) => {
            fs::write(path, &table).with_context(|| format!("writing {}", path.display()))?;
            print!("{table}");
            println!("wrote {}", path.display());
        }
        None => print!("{table}"),
    }
    Ok(())
}

fn parse_thresholds(s: &str) -> Result<Vec<(f64, usize)>> {
    s.split(',')
        .map(|item| {
            let (l, n) = item.split_once(':').with_context(|| format!("threshold '{item}' is not level:order"))?;
            Ok((l.trim().parse()?, n.trim().parse()?))
        })
        .collect()
}

fn cmd_indicate(a: &IndicateArgs) -> Result<()> {
    let snap = FieldSnapshot::read(&a.snapshot).with_context(|| format!("reading {}", a.snapshot.display()))?;
    let (res, coords): (_, Vec<Vec<f64>>) = if snap.header.is_2d() {
        let g = snap.grid_2d()?;
        let r = residuals_2d(&snap.field_2d()?, &snap.velocity_2d()?)?;
        let c = (0..g.cells()).map(|k| {
            let (x, z) = g.center(k % g.mx, k / g.mx);
            vec![x, z]
        });
        (r, c.collect())
    } else {
        let g = snap.grid_1d()?;
        (residuals_1d(&snap.field_1d()?, &snap.velocity_1d()?)?, g.centers().into_iter().map(|x| vec![x]).collect())
    };
    println!("time: {}", snap.header.time);
    println!("max |R_2N+2|: {:.6e}", res.max_c());
    println!("max |R_2N+3|: {:.6e}", res.max_s());
    if let Some(path) = &a.out {
        let mut s = String::from(if snap.header.is_2d() { "x,z,r_c,r_s\n" } else { "x,r_c,r_s\n" });
        for (k, c) in coords.iter().enumerate() {
            let c: Vec<String> = c.iter().map(f64::to_string).collect();
            writeln!(s, "{},{},{}", c.join(","), res.r_c[k], res.r_s[k]).unwrap();
        }
        fs::write(path, s).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    if let Some(t) = &a.thresholds {
        if snap.header.is_2d() {
            bail!("resolution maps can only be suggested for 1D snapshots");
        }
        let map = suggest_resolution_map(&snap.grid_1d()?, &res.combined(), a.base_order, &parse_thresholds(t)?, a.min_width)?;
        let items: Vec<String> = map.regions().iter().map(|r| format!("{}:{}:{}", r.a, r.b, r.order)).collect();
        println!("suggested regions: {}", items.join(","));
    }
    Ok(())
}

fn cmd_rp(a: &RpArgs) -> Result<()> {
    let mut exp = RiemannExperiment::new(a.nleft, a.nright, a.t);
    exp.wxdr_left = a.wxdr_left;
    exp.wxdr_right = a.wxdr_right;
    exp.m = a.grid;
    if let Some(l) = &a.limiter {
        exp.options.limiter = l.parse()?;
    }
    let (x, rho) = exp.run()?;
    let kinetic = match a.kinetic {
        Some(factor) => {
            let mut k = KineticReference::new(a.wxdr_left, a.wxdr_right, a.t, a.grid * factor, a.kinetic_angles);
            k.x_left = exp.x_left;
            k.x_right = exp.x_right;
            Some(restrict(&k.run()?.1, factor)?)
        }
        None => None,
    };
    let mut s = String::from(if kinetic.is_some() { "x,rho,rho_kinetic\n" } else { "x,rho\n" });
    for (i, (x, r)) in x.iter().zip(&rho).enumerate() {
        match &kinetic {
            Some(k) => writeln!(s, "{x},{r},{}", k[i]).unwrap(),
            None => writeln!(s, "{x},{r}").unwrap(),
        }
    }
    match &a.out {
        Some(path) => {
            fs::write(path, s).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{s}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(o) => cmd_run(o),
        Command::Eoc(a) => cmd_eoc(a),
        Command::Indicate(a) => cmd_indicate(a),
        Command::Rp(a) => cmd_rp(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
