//! The exterior region `S^n \ B_r(p)` of the round sphere: Green-function
//! cutoff, exterior Poisson extension, the right inverse of the
//! linearization about `κΛ`, the nondegeneracy check and the fixed-point
//! problem for the exterior correction.
//!
//! The cylinder variable `t = -log|y|` runs from `-span` (near the antipode)
//! up to `t_r = -log r`; see [`crate::model`] for the cylinder form.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::{sphere_eigenvalue, ModelConfig};
use crate::field::{ModeField, RadialField};
use crate::interior::{remainder_q, InteriorError};
use crate::linop::{frame, Branch, LinopError};
use crate::model::{damped_picard, linearization, Background, BoundaryTrace, ModelError, PicardFailure};
pub use crate::model::SphereModel;
use crate::num::{smooth_step, BandedMatrix, Jet, SingularBand};
use crate::report::FixedPointReport;
use crate::spectral::{eigenvalue, AngularGrid, ModeCoefficients, SpectralError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExteriorError {
    #[error("boundary data has a constant mode (size {0:e})")]
    ConstantMode(f64),
    #[error("radius must lie in (0, 1), got {0}")]
    Radius(f64),
    #[error("degenerate configuration: level {level}, {branch:?} branch, singular value {singular:e}")]
    Resonant { level: usize, branch: Branch, singular: f64 },
    #[error("singular mode block at level {level}: {source}")]
    Singular {
        level: usize,
        #[source]
        source: SingularBand,
    },
    #[error("data has {got} nodes, the grid has {expected}")]
    Data { expected: usize, got: usize },
    #[error("fixed point not contractive (update ratio {0:.3})")]
    NonContractive(f64),
    #[error("no convergence after {iterations} iterations (last update {update:e})")]
    NoConvergence { iterations: usize, update: f64 },
    #[error(transparent)]
    Interior(#[from] InteriorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linop(#[from] LinopError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// `η(|y|)|y|^{2-n}` with `η = 1` for `|y| <= 3 r_g` and `η = 0` for
/// `|y| >= 4 r_g`, a smooth step in `|y|` in between.
pub fn green_cutoff(n: u32, r_g: f64, y: f64) -> f64 {
    cutoff(r_g, y).v * y.powf(2.0 - n as f64)
}

/// The cutoff `η` as a jet in `|y|`.
fn cutoff(r_g: f64, y: f64) -> Jet {
    let s = smooth_step((4.0 * r_g - y) / r_g);
    Jet { v: s.v, d1: -s.d1 / r_g, d2: s.d2 / (r_g * r_g) }
}

/// Cylinder form `e^{-(n-2)t/2} η |y|^{2-n} = η e^{(n-2)t/2}` of the Green
/// function, as a jet in `t`.
fn green_jet(n: u32, r_g: f64, t: f64) -> Jet {
    let y = (-t).exp();
    let c = cutoff(r_g, y);
    // d/dt = -y d/dy
    let eta = Jet { v: c.v, d1: -y * c.d1, d2: y * y * c.d2 + y * c.d1 };
    eta * Jet::exp_linear((n as f64 - 2.0) / 2.0, t)
}

/// Exterior harmonic extension `Σ_k (r/|y|)^{n+k-2} φ_k` of data on `|y| = r`
/// (`r = phi.radius`), sampled in the flat chart at `t0 + i step`.
pub fn poisson_exterior(phi: &ModeCoefficients, t0: f64, step: f64, nodes: usize) -> Result<ModeField, ExteriorError> {
    let size = phi.level_block(0).iter().map(|x| x * x).sum::<f64>().sqrt();
    if size > 1e-12 * (1.0 + phi.l2_norm()) {
        return Err(ExteriorError::ConstantMode(size));
    }
    let nf = phi.n as f64;
    let tr = -phi.radius.ln();
    let mut out = ModeField::zeros(phi.n, phi.k_max, phi.dim, t0, step, nodes);
    for m in 0..phi.modes() {
        let k = phi.index_of(m).level as f64;
        for i in 0..nodes {
            let f = ((nf + k - 2.0) * (out.t(i) - tr)).exp();
            for c in 0..phi.dim {
                out.set(i, m, c, f * phi.coeffs[m * phi.dim + c]);
            }
        }
    }
    Ok(out)
}

/// One decoupled branch of the linearization about `κΛ`: a direction of
/// `ℝ^d` and the coefficient `X` of `Δ_{g0} + X` on the sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchBlock {
    pub branch: Branch,
    pub direction: Vec<f64>,
    pub coefficient: f64,
}

/// Splits the linearization about `κΛ` into `Λ` and the eigenvectors of `B`
/// on `Λ^⊥`: `X = n(n+2)/4 κ^p - μ_A` on `Λ`, `n(n-2)/4 κ^p - μ_A - b_j` on
/// the others.
pub fn branch_blocks(model: &SphereModel) -> Result<Vec<BranchBlock>, ExteriorError> {
    let d = model.dim();
    let nf = model.n as f64;
    let kp = model.kappa.powf(model.power());
    let e = frame(&model.lambda)?;
    let mut out = vec![BranchBlock {
        branch: Branch::Parallel,
        direction: model.lambda.clone(),
        coefficient: nf * (nf + 2.0) / 4.0 * kp - model.potential.mu_a,
    }];
    if d == 1 {
        return Ok(out);
    }
    let b = DMatrix::<f64>::from_fn(d - 1, d - 1, |i, j| {
        (0..d).map(|p| (0..d).map(|q| e[i + 1][p] * model.potential.perturbation_entry(p, q) * e[j + 1][q]).sum::<f64>()).sum()
    });
    let eig = SymmetricEigen::new(b);
    for j in 0..d - 1 {
        let u = eig.eigenvectors.column(j);
        let direction = (0..d).map(|c| (0..d - 1).map(|i| u[i] * e[i + 1][c]).sum()).collect();
        out.push(BranchBlock {
            branch: Branch::Orthogonal(j + 1),
            direction,
            coefficient: model.coupling() * kp - model.potential.mu_a - eig.eigenvalues[j],
        });
    }
    Ok(out)
}

/// Singular value of one level block of `Δ_{g0} + X` on the round `S^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelBlock {
    pub level: usize,
    pub branch: Branch,
    pub coefficient: f64,
    pub singular: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub kappa: f64,
    pub mu_a: f64,
    pub threshold: f64,
    pub blocks: Vec<LevelBlock>,
    /// Blocks at or below the threshold.
    pub degenerate: Vec<LevelBlock>,
    pub min_singular: f64,
    pub nondegenerate: bool,
}

/// On level `k` of `S^n` the block `Δ_{g0} + X` acts as the scalar
/// `X - k(k+n-1)`; its absolute value is the singular value.
pub fn nondegeneracy_check(model: &SphereModel, k_max: usize, threshold: f64) -> Result<NondegeneracyReport, ExteriorError> {
    let mut blocks = Vec::new();
    for b in branch_blocks(model)? {
        for level in 0..=k_max {
            let singular = (b.coefficient - sphere_eigenvalue(model.n, level)).abs();
            blocks.push(LevelBlock { level, branch: b.branch, coefficient: b.coefficient, singular });
        }
    }
    let degenerate: Vec<LevelBlock> = blocks.iter().filter(|b| b.singular <= threshold).cloned().collect();
    let min_singular = blocks.iter().map(|b| b.singular).fold(f64::INFINITY, f64::min);
    Ok(NondegeneracyReport {
        kappa: model.kappa,
        mu_a: model.potential.mu_a,
        threshold,
        nondegenerate: degenerate.is_empty(),
        degenerate,
        blocks,
        min_singular,
    })
}

/// Inputs of the exterior problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorSetup {
    pub model: SphereModel,
    pub radius: f64,
    pub rho: Vec<f64>,
    /// Boundary data on `|y| = r` for levels `>= 1` (flat chart).
    pub phi: ModeCoefficients,
    pub green_radius: f64,
    pub step: f64,
    /// The grid starts at `t = -span`.
    pub span: f64,
    /// Level 0 is solved on the whole sphere, continued this far past `t_r`.
    pub extension: f64,
    pub k_max: usize,
    pub nu: f64,
    pub tol: f64,
    pub max_iterations: usize,
}

impl ExteriorSetup {
    /// Radial setup with `ρ = 0` and no boundary data.
    pub fn radial(cfg: &ModelConfig, radius: f64) -> Self {
        Self {
            model: SphereModel::from_config(cfg, Background::Sphere),
            radius,
            rho: vec![0.0; cfg.d],
            phi: ModeCoefficients::zeros(cfg.n, 0, cfg.d, radius),
            green_radius: cfg.green_cutoff,
            step: cfg.grid.step,
            span: cfg.grid.exterior_span,
            extension: 5.0,
            k_max: 0,
            nu: cfg.nu_weight,
            tol: 1e-10,
            max_iterations: 200,
        }
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self.phi = ModeCoefficients::zeros(self.model.n, k_max, self.model.dim(), self.radius);
        self
    }

    pub fn t_r(&self) -> f64 {
        -self.radius.ln()
    }

    pub fn nodes(&self) -> usize {
        ((self.t_r() + self.span) / self.step).round() as usize + 1
    }

    /// First node, placed so that `t_r` is the last node.
    pub fn t0(&self) -> f64 {
        self.t_r() - (self.nodes() - 1) as f64 * self.step
    }

    /// Weight `ω(t)` of the exterior norm for a cylinder field: `|ψ|` in the
    /// bulk `|y| >= 1`, `|y|^{-ν} |W|` inside the unit chart ball.
    pub fn norm_weight(&self, t: f64) -> f64 {
        let m = self.model.half_weight();
        (m * t).exp() * (self.nu * t.max(0.0)).exp() / self.model.beta(t).v
    }

    pub fn weighted_sup(&self, f: &ModeField) -> f64 {
        let mags = f.magnitudes();
        (0..f.nodes).map(|i| self.norm_weight(f.t(i)) * mags.values[i]).fold(0.0, f64::max)
    }

    fn check(&self) -> Result<(), ExteriorError> {
        if !(self.radius > 0.0 && self.radius < 1.0) {
            return Err(ExteriorError::Radius(self.radius));
        }
        Ok(())
    }
}

/// Right inverse of the linearization about `κΛ` in cylinder form, mode by
/// mode: level 0 is solved on the whole sphere with `f` continued by zero
/// into `B_r`, levels `>= 1` vanish on `|y| = r`; all levels are regular at
/// the antipode. The level-0 boundary value is therefore constant on the
/// inner sphere.
pub fn exterior_right_inverse(setup: &ExteriorSetup, f: &ModeField) -> Result<ModeField, ExteriorError> {
    let nodes = setup.nodes();
    if f.nodes != nodes {
        return Err(ExteriorError::Data { expected: nodes, got: f.nodes });
    }
    let blocks = branch_blocks(&setup.model)?;
    let report = nondegeneracy_check(&setup.model, setup.k_max.max(2), 1e-6)?;
    if let Some(b) = report.degenerate.first() {
        return Err(ExteriorError::Resonant { level: b.level, branch: b.branch, singular: b.singular });
    }
    let extra = (setup.extension / setup.step).round() as usize;
    let mut out = ModeField::zeros(f.n, f.k_max, f.dim, f.t0, f.step, nodes);
    let probe = ModeCoefficients::zeros(f.n, f.k_max, 1, 1.0);
    let m2 = setup.model.half_weight().powi(2);
    for mode in 0..f.modes() {
        let level = probe.index_of(mode).level;
        let whole = level == 0;
        let len = if whole { nodes + extra } else { nodes };
        for b in &blocks {
            let rhs: Vec<f64> = (0..len)
                .map(|i| if i < nodes { (0..f.dim).map(|c| f.get(i, mode, c) * b.direction[c]).sum() } else { 0.0 })
                .collect();
            let q: Vec<f64> = (0..len)
                .map(|i| {
                    let t = f.t0 + i as f64 * f.step;
                    m2 + eigenvalue(level, f.n) - (setup.model.coupling() + b.coefficient) * setup.model.conformal_weight(t)
                })
                .collect();
            let gamma = (m2 + eigenvalue(level, f.n)).sqrt();
            let w = numerov_robin(&q, &rhs, f.step, gamma, whole).map_err(|source| ExteriorError::Singular { level, source })?;
            for i in 0..nodes {
                for c in 0..f.dim {
                    let v = out.get(i, mode, c) + w[i] * b.direction[c];
                    out.set(i, mode, c, v);
                }
            }
        }
    }
    Ok(out)
}

// Numerov for w'' = q w + f with w' = γ w at the left end and either
// w' = -γ w (decay) or w = 0 at the right end.
fn numerov_robin(q: &[f64], f: &[f64], h: f64, gamma: f64, decay_right: bool) -> Result<Vec<f64>, SingularBand> {
    let n = q.len();
    let h2 = h * h / 12.0;
    let mut a = BandedMatrix::zeros(n, 4, 4);
    let mut rhs = vec![0.0; n];
    let one_sided = [-25.0, 48.0, -36.0, 16.0, -3.0];
    for (k, c) in one_sided.iter().enumerate() {
        a.set(0, k, c / (12.0 * h));
    }
    a.add(0, 0, -gamma);
    if decay_right {
        for (k, c) in one_sided.iter().enumerate() {
            a.set(n - 1, n - 1 - k, -c / (12.0 * h));
        }
        a.add(n - 1, n - 1, gamma);
    } else {
        a.set(n - 1, n - 1, 1.0);
    }
    for i in 1..n - 1 {
        a.set(i, i - 1, 1.0 - h2 * q[i - 1]);
        a.set(i, i, -2.0 - 10.0 * h2 * q[i]);
        a.set(i, i + 1, 1.0 - h2 * q[i + 1]);
        rhs[i] = h2 * (f[i - 1] + 10.0 * f[i] + f[i + 1]);
    }
    a.solve(&rhs)
}

/// Pointwise background of the exterior map.
#[derive(Debug, Clone, PartialEq)]
struct Sources {
    /// `κ e^{-(n-2)t/2} β` per node.
    base: Vec<f64>,
    /// `ρ G̃ + ũ_φ`.
    fixed: RadialField,
    /// Linearization applied to `ρ G̃ + ũ_φ`.
    forcing: RadialField,
}

fn build_sources(setup: &ExteriorSetup, grid: &AngularGrid) -> Result<Sources, ExteriorError> {
    let model = &setup.model;
    let (n, d) = (model.n, model.dim());
    let m = model.half_weight();
    let (t0, step, nodes) = (setup.t0(), setup.step, setup.nodes());
    let mut phi = poisson_exterior(&setup.phi, t0, step, nodes)?;
    for i in 0..nodes {
        let s = (-m * phi.t(i)).exp();
        let w = phi.modes() * d;
        phi.values[i * w..(i + 1) * w].iter_mut().for_each(|x| *x *= s);
    }
    let mut fixed = phi.synthesize(grid)?;
    let mut forcing = RadialField::zeros(t0, step, nodes, grid.len(), d);
    let mut base = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let t = t0 + i as f64 * step;
        let b = model.trivial(t).v;
        base.push(b);
        let bvec: Vec<f64> = model.lambda.iter().map(|l| l * b).collect();
        let g = green_jet(n, setup.green_radius, t) * model.beta(t);
        let flat_g = g.d2 - m * m * g.v;
        let mz = model.zeroth_order(t);
        for a in 0..grid.len() {
            let at = (i * grid.len() + a) * d;
            for c in 0..d {
                fixed.values[at + c] += setup.rho[c] * g.v;
            }
            let w = &fixed.values[at..at + d];
            let lin = linearization(n, &bvec, w);
            for c in 0..d {
                let pot: f64 = (0..d).map(|j| mz[c * d + j] * w[j]).sum();
                forcing.values[at + c] = setup.rho[c] * flat_g + lin[c] + pot;
            }
        }
    }
    Ok(Sources { base, fixed, forcing })
}

/// Converged exterior solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorState {
    pub setup: ExteriorSetup,
    /// Correction `Ṽ` in cylinder form.
    pub correction: ModeField,
    pub report: FixedPointReport,
    grid: AngularGrid,
    sources: Sources,
}

impl ExteriorState {
    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    /// Pointwise `κΛ ẽ + ρ G̃ + ũ_φ + Ṽ` in cylinder form.
    pub fn total_points(&self) -> Result<RadialField, ExteriorError> {
        let d = self.setup.model.dim();
        let mut out = self.correction.synthesize(&self.grid)?.add(&self.sources.fixed);
        for i in 0..out.nodes {
            for a in 0..out.angles {
                for c in 0..d {
                    out.values[(i * out.angles + a) * d + c] += self.sources.base[i] * self.setup.model.lambda[c];
                }
            }
        }
        Ok(out)
    }

    pub fn total(&self) -> Result<ModeField, ExteriorError> {
        Ok(ModeField::decompose(&self.total_points()?, &self.grid, self.setup.model.n, self.setup.k_max)?)
    }

    /// Value and `|y| ∂_r` of the flat-chart map `W = β ψ` on `|y| = r`.
    pub fn trace(&self) -> Result<BoundaryTrace, ExteriorError> {
        let total = self.total()?;
        Ok(BoundaryTrace::from_cylinder(&total, total.nodes - 1))
    }
}

/// Solves `Ṽ = G(-(L(ρ G̃ + ũ_φ) + Q(ρ G̃ + ũ_φ + Ṽ)))` by damped Picard
/// iteration, `G` from [`exterior_right_inverse`].
pub fn exterior_fixed_point(setup: &ExteriorSetup, init: Option<&ModeField>) -> Result<ExteriorState, ExteriorError> {
    setup.check()?;
    let model = &setup.model;
    let (n, d) = (model.n, model.dim());
    let grid = AngularGrid::for_modes(n, setup.k_max)?;
    let sources = build_sources(setup, &grid)?;
    let (t0, step, nodes) = (setup.t0(), setup.step, setup.nodes());
    let map = |v: &ModeField| -> Result<ModeField, ExteriorError> {
        let pts = v.synthesize(&grid)?;
        let mut rhs = RadialField::zeros(t0, step, nodes, grid.len(), d);
        for i in 0..nodes {
            let base: Vec<f64> = model.lambda.iter().map(|l| l * sources.base[i]).collect();
            for a in 0..grid.len() {
                let at = (i * grid.len() + a) * d;
                let w: Vec<f64> = (0..d).map(|c| sources.fixed.values[at + c] + pts.values[at + c]).collect();
                let q = remainder_q(n, &base, &w)?;
                for c in 0..d {
                    rhs.values[at + c] = -(sources.forcing.values[at + c] + q[c]);
                }
            }
        }
        let f = ModeField::decompose(&rhs, &grid, n, setup.k_max)?;
        exterior_right_inverse(setup, &f)
    };
    let start = match init {
        Some(v) if v.nodes == nodes && v.k_max == setup.k_max => v.clone(),
        _ => ModeField::zeros(n, setup.k_max, d, t0, step, nodes),
    };
    let norm = |f: &ModeField| setup.weighted_sup(f);
    let (correction, mut report) = damped_picard(start, map, norm, setup.tol, setup.max_iterations).map_err(|e| match e {
        PicardFailure::Map(e) => e,
        PicardFailure::NonContractive(r) => ExteriorError::NonContractive(r),
        PicardFailure::NoConvergence { iterations, update } => ExteriorError::NoConvergence { iterations, update },
    })?;
    let mut state = ExteriorState { setup: setup.clone(), correction, report: FixedPointReport::default(), grid, sources };
    let residual = setup.model.residual(&state.total()?, &state.grid)?;
    report.residual = residual.values.iter().fold(0.0, |a, x| a.max(x.abs()));
    state.report = report;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PotentialSpec;
    use crate::interior::harmonic_residual;
    use crate::spectral::ModeIndex;

    fn config(kappa: f64) -> ModelConfig {
        let mut c = ModelConfig::default();
        c.kappa = kappa;
        c.potential = PotentialSpec::for_trivial_solution(3, kappa, &c.lambda, 1.0);
        c
    }

    #[test]
    fn green_cutoff_values() {
        assert!((green_cutoff(3, 0.1, 1e-2) - 100.0).abs() < 1e-12);
        assert_eq!(green_cutoff(3, 0.1, 0.45), 0.0);
        let j = green_jet(3, 0.1, 1.0);
        let h = 1e-5;
        let d1 = (green_jet(3, 0.1, 1.0 + h).v - green_jet(3, 0.1, 1.0 - h).v) / (2.0 * h);
        assert!((j.d1 - d1).abs() < 1e-6 * (1.0 + d1.abs()));
    }

    #[test]
    fn exterior_poisson_decays_and_reproduces_data() {
        let r = 0.05;
        let mut phi = ModeCoefficients::zeros(3, 2, 2, r);
        phi.set(ModeIndex { level: 1, index: 2 }, 0, 1.0);
        phi.set(ModeIndex { level: 2, index: 0 }, 1, 0.5);
        let tr = -r.ln();
        let step = 1e-3;
        let nodes = 3001;
        let w = poisson_exterior(&phi, tr - (nodes - 1) as f64 * step, step, nodes).unwrap();
        assert_eq!(w.slice(nodes - 1).coeffs, phi.coeffs);
        assert!(harmonic_residual(&w) < 1e-8);
        // |y| = 2r on level 1: (1/2)^{n-1}
        let i = nodes - 1 - (core::f64::consts::LN_2 / step).round() as usize;
        assert!((w.get(i, 3, 0) - 0.25).abs() < 1e-3);
        phi.set(ModeIndex { level: 0, index: 0 }, 0, 1.0);
        assert!(matches!(poisson_exterior(&phi, 0.0, step, 10), Err(ExteriorError::ConstantMode(_))));
    }

    #[test]
    fn nondegeneracy_flags_the_level_one_parallel_block_at_unit_amplitude() {
        let model = SphereModel::from_config(&config(1.0), Background::Sphere);
        let rep = nondegeneracy_check(&model, 6, 1e-6).unwrap();
        assert_eq!(rep.degenerate.len(), 1);
        assert_eq!((rep.degenerate[0].level, rep.degenerate[0].branch), (1, Branch::Parallel));
        let model = SphereModel::from_config(&config(0.8), Background::Sphere);
        let rep = nondegeneracy_check(&model, 6, 1e-6).unwrap();
        assert!(rep.nondegenerate && rep.min_singular >= 0.05);
    }

    #[test]
    fn zero_data_gives_zero_correction() {
        let setup = ExteriorSetup::radial(&config(0.8), 0.05);
        let s = exterior_fixed_point(&setup, None).unwrap();
        assert!(s.correction.values.iter().all(|x| x.abs() < 1e-14));
        assert!(s.report.residual < 1e-8, "{}", s.report.residual);
    }

    #[test]
    fn right_inverse_recovers_manufactured_high_modes() {
        let setup = ExteriorSetup::radial(&config(0.8), 0.05).with_k_max(2);
        let model = &setup.model;
        let (nodes, tr, h) = (setup.nodes(), setup.t_r(), setup.step);
        let mut w = ModeField::zeros(3, 2, 2, setup.t0(), h, nodes);
        for (mode, level) in [(2usize, 1usize), (6, 2)] {
            let gamma = (0.25 + eigenvalue(level, 3)).sqrt();
            for i in 0..nodes {
                let t = w.t(i);
                let s = (1.0 - (t - tr).exp()) * (gamma * (t - tr + 2.0)).exp();
                w.set(i, mode, 0, s);
                w.set(i, mode, 1, -0.4 * s);
            }
        }
        let probe = ModeCoefficients::zeros(3, 2, 1, 1.0);
        let mut f = w.clone();
        for mode in 0..w.modes() {
            let q = 0.25 + eigenvalue(probe.index_of(mode).level, 3);
            for c in 0..2 {
                let y: Vec<f64> = (0..nodes).map(|i| w.get(i, mode, c)).collect();
                let d2 = crate::num::second_derivative4(&y, h);
                for i in 0..nodes {
                    f.set(i, mode, c, d2[i] - q * y[i]);
                }
            }
            for i in 0..nodes {
                let t = w.t(i);
                let base: Vec<f64> = model.lambda.iter().map(|l| l * model.trivial(t).v).collect();
                let wi = [w.get(i, mode, 0), w.get(i, mode, 1)];
                let lin = linearization(3, &base, &wi);
                let mz = model.zeroth_order(t);
                for c in 0..2 {
                    let v = f.get(i, mode, c) + lin[c] + mz[c * 2] * wi[0] + mz[c * 2 + 1] * wi[1];
                    f.set(i, mode, c, v);
                }
            }
        }
        let got = exterior_right_inverse(&setup, &f).unwrap();
        let scale = w.values.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let err = got.values.iter().zip(&w.values).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err < 1e-6 * scale, "{err} {scale}");
    }

    #[test]
    fn right_inverse_is_uniform_in_the_radius() {
        let cfg = config(0.8);
        let mut ratios = Vec::new();
        for r in [0.1, 0.05, 0.025] {
            let setup = ExteriorSetup::radial(&cfg, r).with_k_max(2);
            let mut f = ModeField::zeros(3, 2, 2, setup.t0(), setup.step, setup.nodes());
            for i in 0..f.nodes {
                let t = f.t(i);
                let bump = (-(t + 1.0) * (t + 1.0)).exp();
                f.set(i, 0, 0, bump);
                f.set(i, 5, 1, bump);
            }
            let w = exterior_right_inverse(&setup, &f).unwrap();
            ratios.push(setup.weighted_sup(&w) / setup.weighted_sup(&f));
        }
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
        assert!(hi / lo < 1.25, "{ratios:?}");
    }
}
