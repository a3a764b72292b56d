use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Subcommand;
use serde::Serialize;
use yamabe_glue::config::{ConfigError, PotentialSpec};
use yamabe_glue::exterior::{exterior_fixed_point, nondegeneracy_check, ExteriorSetup};
use yamabe_glue::model::{Background, SphereModel};
use yamabe_glue::report::FixedPointReport;

use super::interior::read_phi;
use crate::run::{field_csv, Run};

#[derive(Debug, Subcommand)]
pub enum ExteriorCommand {
    /// Fixed point on the sphere outside the chart ball `B_r`, `r = ε^s`.
    Solve {
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long)]
        s: Option<f64>,
        /// Green-function coefficients `ρ`, comma separated; zero when absent.
        #[arg(long, value_delimiter = ',')]
        rho: Vec<f64>,
        /// Boundary data for levels `>= 1`, as written by `modes decompose`.
        #[arg(long)]
        phi_file: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        k_max: usize,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Mode-wise spectrum of the linearization about `κΛ` on the round sphere.
    Nondeg {
        /// Amplitude; the potential is reset so that `κΛ` stays a solution.
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long, default_value_t = 6)]
        k_max: usize,
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
    },
}

#[derive(Debug, Serialize)]
struct ExteriorReport {
    eps: f64,
    radius: f64,
    rho: Vec<f64>,
    k_max: usize,
    t_range: (f64, f64),
    residual: f64,
    fixed_point: FixedPointReport,
}

pub fn run(cmd: &ExteriorCommand, config: Option<&Path>, out: &Path) -> Result<()> {
    match cmd {
        ExteriorCommand::Solve { eps, s, rho, phi_file, k_max, stride } => {
            let mut run = Run::start("exterior solve", config, out)?;
            if let Some(s) = s {
                run.override_config(|c| c.s_exponent = *s)?;
            }
            let cfg = run.config().clone();
            let phi = phi_file.as_deref().map(read_phi).transpose()?;
            let k_max = (*k_max).max(phi.as_ref().map_or(0, |p| p.k_max));
            let mut setup = ExteriorSetup::radial(&cfg, eps.powf(cfg.s_exponent)).with_k_max(k_max);
            if !rho.is_empty() {
                if rho.len() != cfg.d {
                    bail!("rho has {} components, expected d = {}", rho.len(), cfg.d);
                }
                setup.rho = rho.clone();
            }
            if let Some(phi) = phi {
                if phi.dim != cfg.d || phi.n != cfg.n {
                    bail!("boundary data has n = {}, d = {}; configuration has n = {}, d = {}", phi.n, phi.dim, cfg.n, cfg.d);
                }
                for (slot, v) in setup.phi.coeffs.iter_mut().zip(&phi.coeffs) {
                    *slot = *v;
                }
            }
            let state = run.timed("exterior", || Ok(exterior_fixed_point(&setup, None)?))?;
            let field = state.total_points()?;
            run.write("exterior.csv", &field_csv(&field, state.grid(), cfg.n, *stride)?)?;
            let report = ExteriorReport {
                eps: *eps,
                radius: setup.radius,
                rho: setup.rho.clone(),
                k_max,
                t_range: (setup.t0(), setup.t_r()),
                residual: state.report.residual,
                fixed_point: state.report.clone(),
            };
            run.write_json("exterior_report.json", &report)?;
            println!(
                "exterior: {} iterations, contraction {:.3}, residual {:.2e}",
                report.fixed_point.iterations, report.fixed_point.contraction, report.residual
            );
            run.finish()
        }
        ExteriorCommand::Nondeg { kappa, k_max, threshold } => {
            let mut run = Run::start("exterior nondeg", config, out)?;
            if let Some(k) = kappa {
                let applied = run.override_config(|c| {
                    c.kappa = *k;
                    c.potential.mu_a = PotentialSpec::trivial_coefficient(c.n, *k);
                });
                // resonance is what this command reports, not an input error
                match applied {
                    Ok(()) | Err(ConfigError::Resonant { .. }) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            let model = SphereModel::from_config(run.config(), Background::Sphere);
            let report = run.timed("nondegeneracy", || Ok(nondegeneracy_check(&model, *k_max, *threshold)?))?;
            for b in &report.degenerate {
                println!("degenerate: level {} {:?}, singular value {:.2e}", b.level, b.branch, b.singular);
            }
            println!("min singular value {:.4e}, nondegenerate {}", report.min_singular, report.nondegenerate);
            run.write_json("nondeg.json", &report)?;
            run.finish()
        }
    }
}
