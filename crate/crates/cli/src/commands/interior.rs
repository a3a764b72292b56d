use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Subcommand, ValueEnum};
use serde::Serialize;
use yamabe_glue::interior::{interior_fixed_point, InteriorSetup};
use yamabe_glue::model::Background;
use yamabe_glue::report::FixedPointReport;
use yamabe_glue::spectral::ModeCoefficients;

use crate::run::{field_csv, Run};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Flat,
    Sphere,
}

impl From<ModelArg> for Background {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Flat => Background::Flat,
            ModelArg::Sphere => Background::Sphere,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum InteriorCommand {
    /// Fixed point on the punctured ball `B_r`, `r = ε^s`.
    Solve {
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// Exponent `s`; the configured one when absent.
        #[arg(long)]
        s: Option<f64>,
        /// Neck translation `a`, comma separated.
        #[arg(long, value_delimiter = ',')]
        a: Vec<f64>,
        /// High-frequency boundary data, as written by `modes decompose`.
        #[arg(long)]
        phi_file: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "sphere")]
        model: ModelArg,
        /// Highest level kept; raised to the level of the boundary data.
        #[arg(long, default_value_t = 0)]
        k_max: usize,
        /// Keep every `stride`-th radial node in the field CSV.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
}

#[derive(Debug, Serialize)]
struct InteriorReport {
    eps: f64,
    radius: f64,
    scale: f64,
    model: Background,
    k_max: usize,
    translation: Vec<f64>,
    t_range: (f64, f64),
    residual: f64,
    fixed_point: FixedPointReport,
}

pub fn run(cmd: &InteriorCommand, config: Option<&Path>, out: &Path) -> Result<()> {
    let InteriorCommand::Solve { eps, s, a, phi_file, model, k_max, stride } = cmd;
    let mut run = Run::start("interior solve", config, out)?;
    if let Some(s) = s {
        run.override_config(|c| c.s_exponent = *s)?;
    }
    let cfg = run.config().clone();
    let phi = phi_file.as_deref().map(read_phi).transpose()?;
    let translation = if a.is_empty() { vec![0.0; cfg.n as usize] } else { a.clone() };
    if translation.len() != cfg.n as usize {
        bail!("translation has {} components, expected n = {}", translation.len(), cfg.n);
    }
    let moved = translation.iter().any(|x| *x != 0.0);
    let k_max = (*k_max).max(phi.as_ref().map_or(0, |p| p.k_max)).max(usize::from(moved));
    let mut setup = InteriorSetup::radial(&cfg, *eps, (*model).into()).with_k_max(k_max);
    setup.translation = translation;
    if let Some(phi) = phi {
        if phi.dim != cfg.d || phi.n != cfg.n {
            bail!("boundary data has n = {}, d = {}; configuration has n = {}, d = {}", phi.n, phi.dim, cfg.n, cfg.d);
        }
        for (slot, v) in setup.phi.coeffs.iter_mut().zip(&phi.coeffs) {
            *slot = *v;
        }
    }
    let state = run.timed("interior", || Ok(interior_fixed_point(&setup, None)?))?;
    let field = state.total_points()?;
    run.write("interior.csv", &field_csv(&field, state.grid(), cfg.n, *stride)?)?;
    let report = InteriorReport {
        eps: *eps,
        radius: setup.radius,
        scale: setup.scale(),
        model: setup.model.background,
        k_max,
        translation: setup.translation.clone(),
        t_range: (setup.t0(), setup.t_max()),
        residual: state.report.residual,
        fixed_point: state.report.clone(),
    };
    run.write_json("interior_report.json", &report)?;
    println!(
        "interior: {} iterations, contraction {:.3}, residual {:.2e}",
        report.fixed_point.iterations, report.fixed_point.contraction, report.residual
    );
    run.finish()
}

pub fn read_phi(path: &Path) -> Result<ModeCoefficients> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a coefficient file", path.display()))
}
