use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Subcommand;
use yamabe_glue::spectral::{decompose_boundary, SphereGrid};

use crate::run::{csv_bytes, Run};

#[derive(Debug, Subcommand)]
pub enum ModesCommand {
    /// Writes the quadrature nodes that `decompose` expects, in order.
    Grid {
        #[arg(long, default_value_t = 4)]
        k_max: usize,
    },
    /// Projects boundary samples on `S^2` onto harmonics up to `k_max`.
    Decompose {
        /// CSV with columns `x,y,z,c0,c1,...` on the nodes of `modes grid`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        k_max: usize,
        /// Radius of the sphere the samples live on.
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
}

pub fn run(cmd: &ModesCommand, config: Option<&Path>, out: &Path) -> Result<()> {
    match cmd {
        ModesCommand::Grid { k_max } => {
            let mut run = Run::start("modes grid", config, out)?;
            let grid = SphereGrid::for_level(*k_max);
            let header = ["point", "x", "y", "z", "weight"].map(String::from);
            let rows = grid.points.iter().zip(&grid.weights).enumerate().map(|(a, (p, w))| {
                vec![a.to_string(), p[0].to_string(), p[1].to_string(), p[2].to_string(), w.to_string()]
            });
            run.write("grid.csv", &csv_bytes(&header, rows)?)?;
            run.finish()
        }
        ModesCommand::Decompose { input, k_max, radius } => {
            let mut run = Run::start("modes decompose", config, out)?;
            let grid = SphereGrid::for_level(*k_max);
            let (dim, samples) = read_samples(input, &grid)?;
            let mut coeffs = run.timed("decompose", || Ok(decompose_boundary(&grid, &samples, dim, *k_max, 3)?))?;
            coeffs.radius = *radius;
            run.write_json("coefficients.json", &coeffs)?;
            run.finish()
        }
    }
}

fn read_samples(path: &Path, grid: &SphereGrid) -> Result<(usize, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = reader.headers()?.clone();
    if header.len() < 4 || &header[0] != "x" || &header[1] != "y" || &header[2] != "z" {
        bail!("{}: expected columns x,y,z followed by at least one component", path.display());
    }
    let dim = header.len() - 3;
    let mut samples = Vec::with_capacity(grid.len() * dim);
    let mut rows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .with_context(|| format!("{}: row {} is not numeric", path.display(), row + 1))?;
        let Some(node) = grid.points.get(row) else {
            bail!("{}: more rows than the {} grid nodes", path.display(), grid.len());
        };
        let off = (0..3).map(|i| (values[i] - node[i]).abs()).fold(0.0, f64::max);
        if off > 1e-9 {
            bail!("{}: row {} is not grid node {} (offset {off:.1e})", path.display(), row + 1, row);
        }
        samples.extend_from_slice(&values[3..]);
        rows += 1;
    }
    if rows != grid.len() {
        bail!("{}: {rows} rows for {} grid nodes", path.display(), grid.len());
    }
    Ok((dim, samples))
}
