use std::path::Path;

use anyhow::Result;
use clap::{Args, Subcommand};
use yamabe_glue::fowler::{cylinder_value, integrate_fowler, period};

use crate::run::{csv_bytes, Run};

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true)]
pub struct FowlerArgs {
    #[command(subcommand)]
    table: Option<FowlerTable>,
    /// Dimension; the configured one when absent.
    #[arg(long)]
    n: Option<u32>,
    /// Neck size, the minimum of `v` at `t = 0`.
    #[arg(long, default_value_t = 0.3)]
    eps: f64,
    /// Integration interval `[0, span]`.
    #[arg(long, default_value_t = 20.0)]
    span: f64,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
}

#[derive(Debug, Subcommand)]
enum FowlerTable {
    /// Periods `T(ε)` on an even grid of neck sizes.
    PeriodTable {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, default_value_t = 0.02)]
        eps_min: f64,
        /// Defaults to 99% of the cylinder value.
        #[arg(long)]
        eps_max: Option<f64>,
        #[arg(long, default_value_t = 25)]
        count: usize,
    },
}

pub fn run(args: &FowlerArgs, config: Option<&Path>, out: &Path) -> Result<()> {
    match &args.table {
        Some(FowlerTable::PeriodTable { n, eps_min, eps_max, count }) => period_table(*n, *eps_min, *eps_max, *count, config, out),
        None => trajectory(args, config, out),
    }
}

fn trajectory(args: &FowlerArgs, config: Option<&Path>, out: &Path) -> Result<()> {
    let mut run = Run::start("fowler", config, out)?;
    let n = args.n.unwrap_or(run.config().n);
    let tr = run.timed("fowler", || Ok(integrate_fowler(n, args.eps, 0.0, args.span, args.step)?))?;
    let header = ["t", "v", "vdot", "H"].map(String::from);
    let rows = (0..tr.v.nodes()).map(|i| {
        vec![tr.v.t(i).to_string(), tr.v.values[i].to_string(), tr.vdot.values[i].to_string(), tr.energy_at(i).to_string()]
    });
    run.write("fowler.csv", &csv_bytes(&header, rows)?)?;
    println!("n = {n}, eps = {}: H = {:.12e}, relative drift {:.2e}", args.eps, tr.energy, tr.drift);
    run.finish()
}

fn period_table(n: Option<u32>, eps_min: f64, eps_max: Option<f64>, count: usize, config: Option<&Path>, out: &Path) -> Result<()> {
    let mut run = Run::start("fowler period-table", config, out)?;
    let n = n.unwrap_or(run.config().n);
    let hi = eps_max.unwrap_or(0.99 * cylinder_value(n));
    let count = count.max(2);
    let grid: Vec<f64> = (0..count).map(|k| eps_min + (hi - eps_min) * k as f64 / (count - 1) as f64).collect();
    let periods = run.timed("period", || grid.iter().map(|&e| Ok(period(n, e)?)).collect::<Result<Vec<f64>>>())?;
    let header = ["eps", "period"].map(String::from);
    let rows = grid.iter().zip(&periods).map(|(e, t)| vec![e.to_string(), t.to_string()]);
    run.write("period_table.csv", &csv_bytes(&header, rows)?)?;
    run.finish()
}
