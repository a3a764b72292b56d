use std::path::Path;

use anyhow::Result;
use clap::{Subcommand, ValueEnum};
use serde::Serialize;
use yamabe_glue::field::CylinderFunction;
use yamabe_glue::fowler::DelaunayProfile;
use yamabe_glue::linop::{estimate_sweep, solve_mode_system, BandLimited, EstimateKind, ModeSystem, Potential, SolverKind, SweepSpec};
use yamabe_glue::norms::cylinder_norm;

use crate::run::{csv_bytes, json_bytes, parallel_map, tag, write_atomic, Run};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    /// Levels `>= 2`.
    #[value(alias = "prop32")]
    High,
    /// Level 0.
    #[value(alias = "prop34")]
    Constant,
    /// Level 1.
    #[value(alias = "prop35")]
    Coordinate,
}

impl From<KindArg> for EstimateKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::High => EstimateKind::High,
            KindArg::Constant => EstimateKind::Constant,
            KindArg::Coordinate => EstimateKind::Coordinate,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum LinopCommand {
    /// Solves one level of the linearized mode system for seeded data
    /// `f = e^{-δt} g(t)`.
    Solve {
        #[arg(long, default_value_t = 2)]
        level: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Neck scale `R`; the grid starts at `t = log R`.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        #[arg(long, default_value_t = 5e-3)]
        step: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Uniform-estimate sweep over `ε × T`; one report per weight.
    Sweep {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, required = true, num_args = 1..)]
        delta: Vec<f64>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Worker threads; each weight is one grid point.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Debug, Serialize)]
struct SolveReport {
    level: usize,
    solver: String,
    eps: f64,
    scale: f64,
    t_max: f64,
    step: f64,
    delta: f64,
    seed: u64,
    data_norm: f64,
    solution_norm: f64,
    ratio: f64,
}

pub fn run(cmd: &LinopCommand, config: Option<&Path>, out: &Path) -> Result<()> {
    match cmd {
        &LinopCommand::Solve { level, eps, scale, t_max, step, delta, seed } => {
            let mut run = Run::start("linop solve", config, out)?;
            run.set_seed(seed);
            let cfg = run.config().clone();
            let d = cfg.d;
            let t0 = scale.ln();
            let nodes = ((t_max - t0) / step).round() as usize + 1;
            let data: Vec<BandLimited> = (0..d as u64).map(|s| BandLimited::new(seed, s)).collect();
            let f = CylinderFunction::from_fn(t0, step, nodes, d, |t| data.iter().map(|g| (-delta * t).exp() * g.eval(t)).collect());
            let kind = SolverKind::for_level(level);
            let w = run.timed("linop", || {
                let profile = DelaunayProfile::new(cfg.n, eps)?;
                let potential = Potential::fowler(&profile, 0.0, t0, step, nodes)?;
                let system = ModeSystem { n: cfg.n, level, lambda: cfg.lambda.clone(), potential };
                Ok(solve_mode_system(&system, &f, kind)?)
            })?;
            let (fw, ww) = (cylinder_norm(&f, delta)?, cylinder_norm(&w, delta)?);
            let mut header = vec!["t".to_string()];
            header.extend((0..d).map(|c| format!("f{c}")));
            header.extend((0..d).map(|c| format!("w{c}")));
            let rows = (0..nodes).map(|i| {
                let mut row = vec![f.t(i).to_string()];
                row.extend(f.at(i).iter().chain(w.at(i)).map(|x| x.to_string()));
                row
            });
            run.write("linop_solve.csv", &csv_bytes(&header, rows)?)?;
            let report = SolveReport {
                level,
                solver: format!("{kind:?}"),
                eps,
                scale,
                t_max,
                step,
                delta,
                seed,
                data_norm: fw,
                solution_norm: ww,
                ratio: ww / fw,
            };
            run.write_json("linop_solve.json", &report)?;
            run.finish()
        }
        LinopCommand::Sweep { kind, delta, seed, jobs } => {
            let mut run = Run::start("linop sweep", config, out)?;
            run.set_seed(*seed);
            let cfg = run.config().clone();
            let kind = EstimateKind::from(*kind);
            let name = format!("{kind:?}").to_lowercase();
            let out_dir = run.out_dir().to_path_buf();
            let start = std::time::Instant::now();
            let results = parallel_map(delta, *jobs, |&delta| -> Result<(f64, String, _)> {
                let mut spec = SweepSpec::new(kind, delta);
                spec.n = cfg.n;
                spec.lambda = cfg.lambda.clone();
                spec.seed = *seed;
                let report = estimate_sweep(&spec)?;
                let file = format!("sweep-{name}-delta{}.json", tag(delta));
                write_atomic(&out_dir.join(&file), &json_bytes(&report)?)?;
                Ok((delta, file, report))
            });
            run.record_timing("sweep", start.elapsed().as_secs_f64());
            let mut reports = Vec::new();
            for r in results {
                let (delta, file, report) = r.map_err(|e| e.context("sweep stage"))?;
                println!("{name} delta = {delta}: in window {}, verdict {}", report.in_window, report.verdict);
                run.register(&file);
                reports.push(report);
            }
            run.write_json("sweep.json", &reports)?;
            run.finish()
        }
    }
}
