//! The punctured ball `B_r`: harmonic extension of high-frequency boundary
//! data, the auxiliary field `h`, the remainder `Q`, and the fixed-point
//! problem for the correction about the neck `u_{ε,R,a} Λ`.
//!
//! Fields are stored in cylinder form `v = |x|^{(n-2)/2} W` on
//! `t ∈ [-log r, -10 log r + tail]`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::field::{ModeField, RadialField};
use crate::fowler::{delaunay_eval, DelaunayProfile, FowlerError, FowlerParams};
use crate::linop::{interior_right_inverse, InverseSetup, LinopError};
use crate::model::{damped_picard, linearization, nonlinearity, Background, BoundaryTrace, ModelError, PicardFailure, SphereModel};
use crate::norms::cylinder_norm;
use crate::num::{first_derivative4, second_derivative4, smooth_step, Jet};
use crate::report::FixedPointReport;
use crate::spectral::{eigenvalue, AngularGrid, ModeCoefficients, SpectralError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InteriorError {
    #[error("boundary data has content on level {level} (size {size:e}); only levels >= 2 are extended")]
    LowContent { level: usize, size: f64 },
    #[error("radius must lie in (0, 1), got {0}")]
    Radius(f64),
    #[error("auxiliary data must have d - 1 = {expected} rows of length n")]
    AuxShape { expected: usize },
    #[error("angle-dependent terms need an angular grid (k_max >= 1, n = 3)")]
    NeedsAngles,
    #[error("neck amplitude 1 + b = {0} must be positive")]
    Amplitude(f64),
    #[error("|a| r = {0} exceeds r0")]
    Translation(f64),
    #[error("fixed point not contractive (update ratio {0:.3})")]
    NonContractive(f64),
    #[error("no convergence after {iterations} iterations (last update {update:e})")]
    NoConvergence { iterations: usize, update: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linop(#[from] LinopError),
    #[error(transparent)]
    Fowler(#[from] FowlerError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_high(phi: &ModeCoefficients) -> Result<(), InteriorError> {
    let tol = 1e-12 * (1.0 + phi.l2_norm());
    for k in 0..2.min(phi.k_max + 1) {
        let size = phi.level_block(k).iter().map(|x| x * x).sum::<f64>().sqrt();
        if size > tol {
            return Err(InteriorError::LowContent { level: k, size });
        }
    }
    Ok(())
}

/// Harmonic extension `Σ_k (|x|/r)^k φ_k` of high-frequency data given on
/// `|x| = r = phi.radius`, sampled in the flat chart at `t0 + i step`.
pub fn poisson_interior(phi: &ModeCoefficients, t0: f64, step: f64, nodes: usize) -> Result<ModeField, InteriorError> {
    check_high(phi)?;
    let tr = -phi.radius.ln();
    let mut out = ModeField::zeros(phi.n, phi.k_max, phi.dim, t0, step, nodes);
    for m in 0..phi.modes() {
        let k = phi.index_of(m).level as f64;
        for i in 0..nodes {
            let f = (-k * (out.t(i) - tr)).exp();
            for c in 0..phi.dim {
                out.set(i, m, c, f * phi.coeffs[m * phi.dim + c]);
            }
        }
    }
    Ok(out)
}

/// Sup of `| |x|² Δ W |` relative to `sup |W|` for a flat-chart mode field,
/// using `|x|² Δ = ∂_t² - (n-2) ∂_t - λ_k` on level `k`.
pub fn harmonic_residual(w: &ModeField) -> f64 {
    let nf = w.n as f64;
    let probe = ModeCoefficients::zeros(w.n, w.k_max, 1, 1.0);
    let (mut worst, mut size) = (0.0f64, 0.0f64);
    for m in 0..w.modes() {
        let lk = eigenvalue(probe.index_of(m).level, w.n);
        for c in 0..w.dim {
            let y: Vec<f64> = (0..w.nodes).map(|i| w.get(i, m, c)).collect();
            let (d1, d2) = (first_derivative4(&y, w.step), second_derivative4(&y, w.step));
            for i in 0..w.nodes {
                worst = worst.max((d2[i] - (nf - 2.0) * d1[i] - lk * y[i]).abs());
                size = size.max(y[i].abs());
            }
        }
    }
    if size == 0.0 {
        0.0
    } else {
        worst / size
    }
}

/// Coefficients of the auxiliary field: constants `η ∈ ℝ^{d-1}` and linear
/// terms `A_i ∈ ℝ^n`, `i < d`. The last component of `h` vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxData {
    pub eta: Vec<f64>,
    pub linear: Vec<Vec<f64>>,
}

impl AuxData {
    pub fn zeros(d: usize, n: u32) -> Self {
        Self { eta: vec![0.0; d - 1], linear: vec![vec![0.0; n as usize]; d - 1] }
    }

    fn check(&self, d: usize, n: u32) -> Result<(), InteriorError> {
        if self.eta.len() + 1 != d || self.linear.len() + 1 != d || self.linear.iter().any(|a| a.len() != n as usize) {
            return Err(InteriorError::AuxShape { expected: d - 1 });
        }
        Ok(())
    }

    fn has_linear(&self) -> bool {
        self.linear.iter().flatten().any(|x| *x != 0.0)
    }
}

/// Cutoff equal to 1 on `B_r \ B_{r^5}` and 0 on `B_{r^{10}}`, smooth in
/// `log|x|`, as a jet in `t = -log|x|`.
pub fn aux_cutoff(r: f64, t: f64) -> Jet {
    let l = r.ln();
    let s = smooth_step((-t - 10.0 * l) / (-5.0 * l));
    let ds = 1.0 / (5.0 * l);
    Jet { v: s.v, d1: s.d1 * ds, d2: s.d2 * ds * ds }
}

/// `P(ρ) = 1 + r^{20-n} ρ⁴ - (4/5) r^{19-n} ρ⁵ - r^{24-n}/5` at `ρ = e^{-t}`,
/// as a jet in `t`. `P(r) = 1` and `P'(r) = 0`.
pub fn aux_polynomial(n: u32, r: f64, t: f64) -> Jet {
    let nf = n as f64;
    let rho = (-t).exp();
    let (a, b) = (r.powf(20.0 - nf), 0.8 * r.powf(19.0 - nf));
    let p = 1.0 + a * rho.powi(4) - b * rho.powi(5) - 0.2 * r.powf(24.0 - nf);
    let dp = 4.0 * a * rho.powi(3) - 5.0 * b * rho.powi(4);
    let ddp = 12.0 * a * rho.powi(2) - 20.0 * b * rho.powi(3);
    Jet { v: p, d1: -rho * dp, d2: rho * rho * ddp + rho * dp }
}

/// `h(x) = χ P ((η, 0) + (⟨A_i, x⟩, 0))` in the flat chart.
pub fn aux_h(aux: &AuxData, n: u32, r: f64, x: &[f64]) -> Vec<f64> {
    let rho = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    let d = aux.eta.len() + 1;
    let mut out = vec![0.0; d];
    if rho == 0.0 {
        return out;
    }
    let t = -rho.ln();
    let s = aux_cutoff(r, t).v * aux_polynomial(n, r, t).v;
    for i in 0..d - 1 {
        out[i] = s * (aux.eta[i] + dot(&aux.linear[i], x));
    }
    out
}

/// Radial profiles of `h` in cylinder form: `e^{-(n-2)t/2} χ P` multiplies
/// `(η, 0)`, and the same times `e^{-t}` multiplies `(⟨A_i, θ⟩, 0)`.
fn aux_profiles(n: u32, r: f64, t: f64) -> (Jet, Jet) {
    let m = (n as f64 - 2.0) / 2.0;
    let f0 = Jet::exp_linear(-m, t) * aux_cutoff(r, t) * aux_polynomial(n, r, t);
    (f0, f0 * Jet::exp_linear(-1.0, t))
}

/// `Q(w) = N(U0 + w) - N(U0) - N'(U0) w` with `N(U) = n(n-2)/4 |U|^p U`.
/// Components positive in `U0` must stay positive in `U0 + w`.
pub fn remainder_q(n: u32, base: &[f64], w: &[f64]) -> Result<Vec<f64>, InteriorError> {
    let total: Vec<f64> = base.iter().zip(w).map(|(a, b)| a + b).collect();
    if let Some(c) = (0..base.len()).find(|&c| base[c] > 0.0 && total[c] <= 0.0) {
        return Err(ModelError::Positivity { component: c, value: total[c] }.into());
    }
    let (full, zero, lin) = (nonlinearity(n, &total), nonlinearity(n, base), linearization(n, base, w));
    Ok((0..w.len()).map(|c| full[c] - zero[c] - lin[c]).collect())
}

/// `H_g(U) = Δ_g U - A U + n(n-2)/4 |U|^p U` at the grid points.
///
/// On the flat background `u` is the map itself in the chart. On the sphere
/// `u` is `ψ` expressed in the chart and
/// `Δ_{g0} ψ = β^{-(n+2)/(n-2)} Δ(β ψ) + n(n-2)/4 ψ`.
pub fn interior_residual(u: &ModeField, grid: &AngularGrid, model: &SphereModel) -> Result<RadialField, InteriorError> {
    let nf = u.n as f64;
    let mut bu = u.clone();
    for i in 0..u.nodes {
        let b = model.beta(u.t(i)).v;
        let w = u.modes() * u.dim;
        bu.values[i * w..(i + 1) * w].iter_mut().for_each(|x| *x *= b);
    }
    let mut lap = ModeField::zeros(u.n, u.k_max, u.dim, u.t0, u.step, u.nodes);
    let probe = ModeCoefficients::zeros(u.n, u.k_max, 1, 1.0);
    for m in 0..u.modes() {
        let lk = eigenvalue(probe.index_of(m).level, u.n);
        for c in 0..u.dim {
            let y: Vec<f64> = (0..u.nodes).map(|i| bu.get(i, m, c)).collect();
            let (d1, d2) = (first_derivative4(&y, u.step), second_derivative4(&y, u.step));
            for i in 0..u.nodes {
                let x2 = (-2.0 * u.t(i)).exp();
                lap.set(i, m, c, (d2[i] - (nf - 2.0) * d1[i] - lk * y[i]) / x2);
            }
        }
    }
    let mut out = lap.synthesize(grid)?;
    let points = u.synthesize(grid)?;
    let a = model.potential.evaluate();
    let d = u.dim;
    let sphere = model.background == Background::Sphere;
    for i in 0..u.nodes {
        let b = model.beta(u.t(i)).v;
        let conformal = b.powf(-(nf + 2.0) / (nf - 2.0));
        for p in 0..grid.len() {
            let at = (i * grid.len() + p) * d;
            let val = &points.values[at..at + d];
            let nl = nonlinearity(u.n, val);
            for c in 0..d {
                let av: f64 = (0..d).map(|j| a[c * d + j] * val[j]).sum();
                let o = &mut out.values[at + c];
                *o = if sphere { conformal * *o + model.coupling() * val[c] } else { *o };
                *o += nl[c] - av;
            }
        }
    }
    Ok(out)
}

/// Both sides of `L_{v^p δ}(u) = v^{-(n+2)/(n-2)} L_δ(v u)`, with
/// `L_g = Δ_g - (n-2)/(4(n-1)) R_g`, for radial `u` and positive radial `v`
/// given as jets in `ρ = |x|`. The left side is computed from the metric
/// `e^{2f} δ`, `f = (2/(n-2)) log v`.
pub fn conformal_identity(n: u32, rho: f64, u: Jet, v: Jet) -> (f64, f64) {
    let nf = n as f64;
    let lap = |j: Jet| j.d2 + (nf - 1.0) / rho * j.d1;
    let c = 2.0 / (nf - 2.0);
    let f1 = c * v.d1 / v.v;
    let f2 = c * (v.d2 / v.v - (v.d1 / v.v).powi(2));
    let lap_f = f2 + (nf - 1.0) / rho * f1;
    let e = v.v.powf(-4.0 / (nf - 2.0));
    let scalar = -e * (2.0 * (nf - 1.0) * lap_f + (nf - 2.0) * (nf - 1.0) * f1 * f1);
    let lap_g = e * (lap(u) + (nf - 2.0) * f1 * u.d1);
    let lhs = lap_g - (nf - 2.0) / (4.0 * (nf - 1.0)) * scalar * u.v;
    let rhs = v.v.powf(-(nf + 2.0) / (nf - 2.0)) * lap(v * u);
    (lhs, rhs)
}

/// `R` from `R^{(2-n)/2} = 2κ(1+b)/ε`.
pub fn neck_scale(n: u32, eps: f64, kappa: f64, b: f64) -> f64 {
    (2.0 * kappa * (1.0 + b) / eps).powf(-2.0 / (n as f64 - 2.0))
}

/// Inputs of the interior problem.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorSetup {
    pub model: SphereModel,
    pub eps: f64,
    /// Neck amplitude offset, see [`neck_scale`].
    pub b: f64,
    pub translation: Vec<f64>,
    pub radius: f64,
    /// High-frequency boundary data on `|x| = r` (flat chart).
    pub phi: ModeCoefficients,
    pub aux: AuxData,
    pub step: f64,
    /// Length of the grid beyond the deepest cutoff `-10 log r`.
    pub tail: f64,
    pub k_max: usize,
    pub mu: f64,
    pub r0: f64,
    pub tol: f64,
    pub max_iterations: usize,
}

impl InteriorSetup {
    /// Radial setup with `r = ε^s` and zero boundary data.
    pub fn radial(cfg: &ModelConfig, eps: f64, background: Background) -> Self {
        let radius = eps.powf(cfg.s_exponent);
        Self {
            model: SphereModel::from_config(cfg, background),
            eps,
            b: 0.0,
            translation: vec![0.0; cfg.n as usize],
            radius,
            phi: ModeCoefficients::zeros(cfg.n, 0, cfg.d, radius),
            aux: AuxData::zeros(cfg.d, cfg.n),
            step: cfg.grid.step,
            tail: cfg.grid.interior_tail,
            k_max: 0,
            mu: cfg.mu_weight,
            r0: cfg.r0,
            tol: 1e-10,
            max_iterations: 200,
        }
    }

    /// Keeps levels up to `k_max`, resetting the boundary data.
    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self.phi = ModeCoefficients::zeros(self.model.n, k_max, self.model.dim(), self.radius);
        self
    }

    pub fn scale(&self) -> f64 {
        neck_scale(self.model.n, self.eps, self.model.kappa, self.b)
    }

    pub fn t0(&self) -> f64 {
        -self.radius.ln()
    }

    pub fn nodes(&self) -> usize {
        ((-10.0 * self.radius.ln() + self.tail - self.t0()) / self.step).round() as usize + 1
    }

    pub fn t_max(&self) -> f64 {
        self.t0() + (self.nodes() - 1) as f64 * self.step
    }

    /// Cylinder weight `μ + (n-2)/2`.
    pub fn weight(&self) -> f64 {
        self.mu + self.model.half_weight()
    }

    fn inverse(&self) -> InverseSetup {
        InverseSetup {
            n: self.model.n,
            lambda: self.model.lambda.clone(),
            scale: self.scale(),
            translation: vec![0.0; self.model.n as usize],
            radius: self.radius,
            t_max: self.t_max(),
            step: self.step,
            k_max: self.k_max,
            mu: self.mu,
            r0: self.r0,
        }
    }

    fn check(&self) -> Result<(), InteriorError> {
        if !(self.radius > 0.0 && self.radius < 1.0) {
            return Err(InteriorError::Radius(self.radius));
        }
        if !(1.0 + self.b > 0.0) {
            return Err(InteriorError::Amplitude(1.0 + self.b));
        }
        self.aux.check(self.model.dim(), self.model.n)?;
        check_high(&self.phi)?;
        let a = self.translation.iter().map(|x| x * x).sum::<f64>().sqrt();
        if a * self.radius >= self.r0 {
            return Err(InteriorError::Translation(a * self.radius));
        }
        Ok(())
    }
}

/// Pointwise background of the interior map, fixed during the iteration.
#[derive(Debug, Clone, PartialEq)]
struct Sources {
    /// `ũ_a` per node and angle.
    neck: RadialField,
    /// Radial `ũ_0` per node.
    neck0: Vec<f64>,
    /// `h̃ + ṽ_φ`.
    fixed: RadialField,
    /// Flat cylinder operator applied to `h̃`.
    forcing: RadialField,
}

fn build_sources(setup: &InteriorSetup, profile: &DelaunayProfile, grid: &AngularGrid) -> Result<Sources, InteriorError> {
    let n = setup.model.n;
    let d = setup.model.dim();
    let m = setup.model.half_weight();
    let (t0, step, nodes) = (setup.t0(), setup.step, setup.nodes());
    let shifted = setup.translation.iter().any(|x| *x != 0.0);
    if grid.point(0).is_none() && (shifted || setup.aux.has_linear()) {
        return Err(InteriorError::NeedsAngles);
    }
    let params = FowlerParams { n, eps: setup.eps, scale: setup.scale(), translation: setup.translation.clone() };
    let ln_r = setup.scale().ln();
    let mut phi = poisson_interior(&setup.phi, t0, step, nodes)?;
    for i in 0..nodes {
        let s = (-m * phi.t(i)).exp();
        let w = phi.modes() * d;
        phi.values[i * w..(i + 1) * w].iter_mut().for_each(|x| *x *= s);
    }
    let mut fixed = phi.synthesize(grid)?;
    let mut forcing = RadialField::zeros(t0, step, nodes, grid.len(), d);
    let mut neck = RadialField::zeros(t0, step, nodes, grid.len(), 1);
    let mut neck0 = Vec::with_capacity(nodes);
    let l1 = m * m + eigenvalue(1, n);
    for i in 0..nodes {
        let t = t0 + i as f64 * step;
        let u0 = profile.eval(t + ln_r).0;
        neck0.push(u0);
        let (f0, f1) = aux_profiles(n, setup.radius, t);
        let (g0, g1) = (f0.d2 - m * m * f0.v, f1.d2 - l1 * f1.v);
        let rho = (-t).exp();
        for a in 0..grid.len() {
            let ua = match grid.point(a) {
                Some(theta) if shifted => {
                    let x: Vec<f64> = theta.iter().map(|c| c * rho).collect();
                    (m * -t).exp() * delaunay_eval(&params, profile, &x, setup.r0)?
                }
                _ => u0,
            };
            neck.set(i, a, 0, ua);
            let theta = grid.point(a).unwrap_or([0.0; 3]);
            for c in 0..d - 1 {
                let lin = dot(&setup.aux.linear[c], &theta[..(n as usize).min(3)]);
                let at = (i * grid.len() + a) * d + c;
                fixed.values[at] += f0.v * setup.aux.eta[c] + f1.v * lin;
                forcing.values[at] = g0 * setup.aux.eta[c] + g1 * lin;
            }
        }
    }
    Ok(Sources { neck, neck0, fixed, forcing })
}

/// Converged interior solution.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorState {
    pub setup: InteriorSetup,
    /// Correction `Ṽ` in cylinder form.
    pub correction: ModeField,
    pub report: FixedPointReport,
    profile: DelaunayProfile,
    grid: AngularGrid,
    sources: Sources,
}

impl InteriorState {
    pub fn profile(&self) -> &DelaunayProfile {
        &self.profile
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    /// Pointwise `ũ_a Λ + h̃ + ṽ_φ + Ṽ`.
    pub fn total_points(&self) -> Result<RadialField, InteriorError> {
        let d = self.setup.model.dim();
        let mut out = self.correction.synthesize(&self.grid)?.add(&self.sources.fixed);
        for (k, u) in self.sources.neck.values.iter().enumerate() {
            for c in 0..d {
                out.values[k * d + c] += u * self.setup.model.lambda[c];
            }
        }
        Ok(out)
    }

    /// The full solution in cylinder form, mode by mode.
    pub fn total(&self) -> Result<ModeField, InteriorError> {
        Ok(ModeField::decompose(&self.total_points()?, &self.grid, self.setup.model.n, self.setup.k_max)?)
    }

    /// Value and `|x| ∂_r` of the flat-chart map on `|x| = r`.
    pub fn trace(&self) -> Result<BoundaryTrace, InteriorError> {
        Ok(BoundaryTrace::from_cylinder(&self.total()?, 0))
    }

    /// Radial neck `ũ_0` at node `i`.
    pub fn neck(&self, i: usize) -> f64 {
        self.sources.neck0[i]
    }

    /// Translated neck `ũ_a` at node `i`, angle `a`.
    pub fn neck_at(&self, i: usize, a: usize) -> f64 {
        self.sources.neck.get(i, a, 0)
    }
}

/// Solves `Ṽ = G(-N(Ṽ))` by damped Picard iteration, `G` the mode-wise right
/// inverse about the radial neck and `N` collecting `h̃`, `ṽ_φ`, the
/// translation, the remainder and the curvature potential. `init` warm-starts
/// the iteration.
pub fn interior_fixed_point(setup: &InteriorSetup, init: Option<&ModeField>) -> Result<InteriorState, InteriorError> {
    setup.check()?;
    let n = setup.model.n;
    let d = setup.model.dim();
    let profile = DelaunayProfile::with_resolution(n, setup.eps, setup.step.min(1e-3))?;
    let grid = AngularGrid::for_modes(n, setup.k_max)?;
    let sources = build_sources(setup, &profile, &grid)?;
    let inverse = setup.inverse();
    let (t0, step, nodes) = (setup.t0(), setup.step, setup.nodes());
    let lambda = &setup.model.lambda;
    let zeroth: Vec<Vec<f64>> = (0..nodes).map(|i| setup.model.zeroth_order(t0 + i as f64 * step)).collect();
    let map = |v: &ModeField| -> Result<ModeField, InteriorError> {
        let pts = v.synthesize(&grid)?;
        let mut rhs = RadialField::zeros(t0, step, nodes, grid.len(), d);
        for i in 0..nodes {
            let base0: Vec<f64> = lambda.iter().map(|l| l * sources.neck0[i]).collect();
            for a in 0..grid.len() {
                let at = (i * grid.len() + a) * d;
                let ua = sources.neck.get(i, a, 0);
                let base: Vec<f64> = lambda.iter().map(|l| l * ua).collect();
                let vv = &pts.values[at..at + d];
                let w: Vec<f64> = (0..d).map(|c| sources.fixed.values[at + c] + vv[c]).collect();
                let q = remainder_q(n, &base, &w)?;
                let (da, d0) = (linearization(n, &base, &w), linearization(n, &base0, vv));
                let mz = &zeroth[i];
                for c in 0..d {
                    let pot: f64 = (0..d).map(|j| mz[c * d + j] * (base[j] + w[j])).sum();
                    rhs.values[at + c] = -(sources.forcing.values[at + c] + da[c] - d0[c] + q[c] + pot);
                }
            }
        }
        let f = ModeField::decompose(&rhs, &grid, n, setup.k_max)?;
        Ok(interior_right_inverse(&inverse, &profile, &f)?.w)
    };
    let delta = setup.weight();
    let norm = |f: &ModeField| cylinder_norm(&f.magnitudes(), delta).unwrap_or(f64::INFINITY);
    let start = match init {
        Some(v) if v.nodes == nodes && v.k_max == setup.k_max => v.clone(),
        _ => ModeField::zeros(n, setup.k_max, d, t0, step, nodes),
    };
    let (correction, mut report) = damped_picard(start, map, norm, setup.tol, setup.max_iterations).map_err(|e| match e {
        PicardFailure::Map(e) => e,
        PicardFailure::NonContractive(r) => InteriorError::NonContractive(r),
        PicardFailure::NoConvergence { iterations, update } => InteriorError::NoConvergence { iterations, update },
    })?;
    let mut state = InteriorState { setup: setup.clone(), correction, report: FixedPointReport::default(), profile, grid, sources };
    let residual = setup.model.residual(&state.total()?, &state.grid)?;
    report.residual = residual.values.iter().fold(0.0, |a, x| a.max(x.abs()));
    state.report = report;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ModeIndex;

    fn high_data(r: f64) -> ModeCoefficients {
        let mut phi = ModeCoefficients::zeros(3, 3, 2, r);
        phi.set(ModeIndex { level: 2, index: 1 }, 0, 0.7);
        phi.set(ModeIndex { level: 3, index: 4 }, 1, -0.2);
        phi
    }

    #[test]
    fn poisson_extension_is_harmonic_and_hits_the_data() {
        let r = 0.1;
        let phi = high_data(r);
        let w = poisson_interior(&phi, -r.ln(), 1e-3, 3001).unwrap();
        assert!(harmonic_residual(&w) < 1e-8);
        assert_eq!(w.slice(0).coeffs, phi.coeffs);
    }

    #[test]
    fn poisson_rejects_low_levels() {
        let mut phi = high_data(0.1);
        phi.set(ModeIndex { level: 1, index: 0 }, 0, 1e-3);
        assert!(matches!(poisson_interior(&phi, 2.3, 1e-3, 10), Err(InteriorError::LowContent { level: 1, .. })));
    }

    #[test]
    fn aux_boundary_identities() {
        let (n, r) = (3, 0.05);
        let aux = AuxData { eta: vec![0.3], linear: vec![vec![0.2, -0.4, 0.1]] };
        let theta = [0.6, 0.0, 0.8];
        let x: Vec<f64> = theta.iter().map(|c| c * r).collect();
        let h = aux_h(&aux, n, r, &x);
        assert!((h[0] - (0.3 + r * (0.2 * 0.6 + 0.1 * 0.8))).abs() < 1e-15);
        assert_eq!(h[1], 0.0);
        let (f0, f1) = aux_profiles(n, r, -r.ln());
        // |x| ∂_r of χ P vanishes at |x| = r
        assert!((f0.d1 + 0.5 * f0.v).abs() < 1e-12);
        assert!((f1.d1 + 1.5 * f1.v).abs() < 1e-12);
        let deep: Vec<f64> = theta.iter().map(|c| c * r.powi(10) * 0.9).collect();
        assert_eq!(aux_h(&aux, n, r, &deep), vec![0.0, 0.0]);
        let mid: Vec<f64> = theta.iter().map(|c| c * r.powi(3)).collect();
        assert!((aux_h(&aux, n, r, &mid)[0] - (0.3 + dot(&aux.linear[0], &mid)) * aux_polynomial(n, r, -r.powi(3).ln()).v).abs() < 1e-15);
    }

    #[test]
    fn remainder_is_quadratic() {
        let base = [0.4, 0.3];
        let w = [0.05, -0.02];
        let at = |s: f64| {
            let q = remainder_q(3, &base, &[s * w[0], s * w[1]]).unwrap();
            q[0].hypot(q[1]) / (s * s)
        };
        let (a, b) = (at(1e-2), at(1e-3));
        assert!(a > 0.0 && ((a - b) / b).abs() < 2e-2);
        assert!(matches!(remainder_q(3, &base, &[-0.5, 0.0]), Err(InteriorError::Model(ModelError::Positivity { component: 0, .. }))));
    }

    #[test]
    fn flat_neck_has_small_residual() {
        let cfg = ModelConfig::default();
        let model = SphereModel { potential: crate::config::PotentialSpec { mu_a: 0.0, perturbation: vec![0.0; 4] }, ..SphereModel::from_config(&cfg, Background::Flat) };
        let profile = DelaunayProfile::new(3, 0.2).unwrap();
        let (t0, step, nodes) = (-1.0, 1e-3, 6001);
        let mut u = ModeField::zeros(3, 0, 2, t0, step, nodes);
        let y0 = crate::spectral::sphere_area(3).sqrt();
        for i in 0..nodes {
            let t = u.t(i);
            let val = (0.5 * t).exp() * profile.eval(t).0 * y0;
            u.set(i, 0, 0, val * 0.6);
            u.set(i, 0, 1, val * 0.8);
        }
        let grid = AngularGrid::for_modes(3, 0).unwrap();
        let res = interior_residual(&u, &grid, &model).unwrap();
        let worst = (0..nodes).map(|i| (-2.5 * u.t(i)).exp() * res.get(i, 0, 0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn constant_map_solves_the_sphere_system() {
        let cfg = ModelConfig::default();
        let model = SphereModel::from_config(&cfg, Background::Sphere);
        let (t0, step, nodes) = (-3.0, 1e-3, 6001);
        let mut u = ModeField::zeros(3, 0, 2, t0, step, nodes);
        let y0 = crate::spectral::sphere_area(3).sqrt();
        for i in 0..nodes {
            for c in 0..2 {
                u.set(i, 0, c, cfg.kappa * cfg.lambda[c] * y0);
            }
        }
        let grid = AngularGrid::for_modes(3, 0).unwrap();
        let res = interior_residual(&u, &grid, &model).unwrap();
        let worst = res.values.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn conformal_identity_holds_on_samples() {
        for k in 1..20 {
            let rho = 0.05 * k as f64;
            let v = Jet { v: 1.0 + rho * rho, d1: 2.0 * rho, d2: 2.0 };
            let u = Jet { v: (0.3 * rho).sin(), d1: 0.3 * (0.3 * rho).cos(), d2: -0.09 * (0.3 * rho).sin() };
            for n in 3..=5 {
                let (l, r) = conformal_identity(n, rho, u, v);
                assert!((l - r).abs() < 1e-10 * (1.0 + r.abs()), "{n} {rho} {l} {r}");
            }
        }
    }

    #[test]
    fn flat_problem_without_data_is_solved_by_the_neck() {
        let cfg = ModelConfig::default();
        let setup = InteriorSetup::radial(&cfg, 0.1, Background::Flat);
        let s = interior_fixed_point(&setup, None).unwrap();
        assert!(s.correction.values.iter().all(|x| *x == 0.0));
        assert!(s.report.residual < 1e-8, "{}", s.report.residual);
    }

    #[test]
    fn sphere_problem_converges_with_small_correction() {
        let cfg = ModelConfig::default();
        let setup = InteriorSetup::radial(&cfg, 0.1, Background::Sphere);
        let s = interior_fixed_point(&setup, None).unwrap();
        assert!(s.report.contraction < 0.5, "{:?}", s.report);
        assert!(s.report.residual < 1e-7, "{}", s.report.residual);
        let tr = s.trace().unwrap();
        assert!(tr.value.l2_norm() > 0.0);
    }
}
