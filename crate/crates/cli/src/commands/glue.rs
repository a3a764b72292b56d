use std::path::Path;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use yamabe_glue::gluing::{glue_end_to_end, GlueOptions, GluedSolution, Sector};

use crate::run::{field_csv, json_bytes, parallel_map, tag, write_atomic, Run};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SectorArg {
    /// Constant modes only.
    Radial,
    /// Constants, coordinates and levels up to `--k-max`.
    Full,
}

impl From<SectorArg> for Sector {
    fn from(s: SectorArg) -> Self {
        match s {
            SectorArg::Radial => Sector::Radial,
            SectorArg::Full => Sector::Full,
        }
    }
}

#[derive(Debug, Args)]
pub struct GlueArgs {
    /// Neck sizes; several values run as a sweep, one subdirectory each.
    #[arg(long, required = true, num_args = 1..)]
    eps: Vec<f64>,
    #[arg(long, value_enum, default_value = "radial")]
    sector: SectorArg,
    #[arg(long, default_value_t = 2)]
    k_max: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

/// Files written for one glued solution.
pub const GLUE_FILES: [&str; 4] = ["interior.csv", "exterior.csv", "matching.json", "asymptotics.json"];

pub fn run(args: &GlueArgs, config: Option<&Path>, out: &Path) -> Result<()> {
    let mut run = Run::start("glue", config, out)?;
    let cfg = run.config().clone();
    let opts = GlueOptions { sector: args.sector.into(), k_max: args.k_max, ..GlueOptions::default() };
    let out_dir = run.out_dir().to_path_buf();
    let single = args.eps.len() == 1;
    let start = std::time::Instant::now();
    let results = parallel_map(&args.eps, args.jobs, |&eps| -> Result<(String, GluedSolution)> {
        let prefix = if single { String::new() } else { format!("eps{}/", tag(eps)) };
        let dir = out_dir.join(&prefix);
        std::fs::create_dir_all(&dir)?;
        let g = glue_end_to_end(&cfg, eps, &opts).with_context(|| format!("glue stage at eps = {eps}"))?;
        write_atomic(&dir.join(GLUE_FILES[0]), &field_csv(&g.interior.total_points()?, g.interior.grid(), cfg.n, args.stride)?)?;
        write_atomic(&dir.join(GLUE_FILES[1]), &field_csv(&g.exterior.total_points()?, g.exterior.grid(), cfg.n, args.stride)?)?;
        write_atomic(&dir.join(GLUE_FILES[2]), &json_bytes(&g.summary())?)?;
        write_atomic(&dir.join(GLUE_FILES[3]), &json_bytes(&g.asymptotics)?)?;
        Ok((prefix, g))
    });
    run.record_timing("glue", start.elapsed().as_secs_f64());
    for r in results {
        let (prefix, g) = r?;
        for f in GLUE_FILES {
            run.register(&format!("{prefix}{f}"));
        }
        println!(
            "eps = {}: {} matching iterations, max gap {:.2e}, global residual {:.2e}, far field {:.3e}",
            g.context.eps,
            g.matching.iterations,
            g.max_gap(),
            g.residual.global,
            g.asymptotics.far_field
        );
    }
    run.finish()
}
