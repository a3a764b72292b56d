//! Cauchy-data matching across the sphere `|x| = r` and the end-to-end
//! driver.
//!
//! Traces are compared for the flat-chart map `W` in value units per
//! frequency class: level 0 as the constant value, level 1 as coefficients
//! of the coordinate functions `θ_j`, levels `>= 2` as harmonic
//! coefficients. Each matching system is a closed-form solve of its linear
//! model against remainder traces `H`; iterating the solve with `H` read off
//! the actual solver outputs gives the fixed-point maps.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::exterior::{exterior_fixed_point, poisson_exterior, ExteriorError, ExteriorSetup, ExteriorState};
use crate::field::ModeField;
use crate::fowler::DelaunayProfile;
use crate::interior::{interior_fixed_point, poisson_interior, InteriorError, InteriorSetup, InteriorState};
use crate::model::{geodesic_radius, Background, BoundaryTrace};
use crate::num::first_derivative4;
use crate::spectral::{sphere_area, FrequencyClass, ModeCoefficients, SpectralError, SphereGrid};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GluingError {
    #[error("data has content on level {level} (size {size:e}); only levels >= 2 are allowed")]
    LowContent { level: usize, size: f64 },
    #[error("amplitude component {0} vanishes")]
    ZeroAmplitude(usize),
    #[error("parameter {name} = {value:e} left its window")]
    Window { name: &'static str, value: f64 },
    #[error("singular matching system")]
    Singular,
    #[error("matching not contractive (update ratio {0:.3})")]
    NonContractive(f64),
    #[error("matching did not converge after {iterations} iterations (last update {update:e})")]
    NoConvergence { iterations: usize, update: f64 },
    #[error("coordinate functions need an angular grid (n = 3)")]
    NeedsAngles,
    #[error("interior stage: {0}")]
    Interior(#[from] InteriorError),
    #[error("exterior stage: {0}")]
    Exterior(#[from] ExteriorError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

const DN_STEP: f64 = 1e-4;
const DN_NODES: usize = 9;

fn check_high(phi: &ModeCoefficients) -> Result<(), GluingError> {
    let tol = 1e-12 * (1.0 + phi.l2_norm());
    for k in 0..2.min(phi.k_max + 1) {
        let size = phi.level_block(k).iter().map(|x| x * x).sum::<f64>().sqrt();
        if size > tol {
            return Err(GluingError::LowContent { level: k, size });
        }
    }
    Ok(())
}

/// Closed-form diagonal `2k + n - 2` of the Dirichlet-to-Neumann map.
pub fn dn_multiplier(k: usize, n: u32) -> f64 {
    (2 * k) as f64 + n as f64 - 2.0
}

/// `r ∂_r (v_φ - u_φ)` on `|x| = r` for the interior and exterior harmonic
/// extensions of high-frequency data, by one-sided differences of both.
pub fn dn_map(phi: &ModeCoefficients) -> Result<ModeCoefficients, GluingError> {
    check_high(phi)?;
    let t_r = -phi.radius.ln();
    let inner = poisson_interior(phi, t_r, DN_STEP, DN_NODES)?;
    let outer = poisson_exterior(phi, t_r - (DN_NODES - 1) as f64 * DN_STEP, DN_STEP, DN_NODES)?;
    let mut out = phi.clone();
    for m in 0..phi.modes() {
        for c in 0..phi.dim {
            let yi: Vec<f64> = (0..DN_NODES).map(|i| inner.get(i, m, c)).collect();
            let yo: Vec<f64> = (0..DN_NODES).map(|i| outer.get(i, m, c)).collect();
            let di = first_derivative4(&yi, DN_STEP)[0];
            let dout = first_derivative4(&yo, DN_STEP)[DN_NODES - 1];
            out.coeffs[m * phi.dim + c] = dout - di;
        }
    }
    Ok(out)
}

/// Inverse of [`dn_map`] through the closed-form diagonal.
pub fn dn_inverse(psi: &ModeCoefficients) -> Result<ModeCoefficients, GluingError> {
    check_high(psi)?;
    let mut out = psi.clone();
    for k in 2..=psi.k_max {
        let s = 1.0 / dn_multiplier(k, psi.n);
        out.level_block_mut(k).iter_mut().for_each(|x| *x *= s);
    }
    Ok(out)
}

/// Fixed data of the matching systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingContext {
    pub n: u32,
    pub eps: f64,
    pub radius: f64,
    pub kappa: f64,
    pub lambda: Vec<f64>,
}

impl MatchingContext {
    pub fn new(cfg: &ModelConfig, eps: f64) -> Self {
        Self { n: cfg.n, eps, radius: eps.powf(cfg.s_exponent), kappa: cfg.kappa, lambda: cfg.lambda.clone() }
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `ε² Λ_i / (4κ(1+b))`: the `|x|^{2-n}` coefficient of the neck.
    fn neck_tail(&self, b: f64, i: usize) -> f64 {
        self.eps * self.eps * self.lambda[i] / (4.0 * self.kappa * (1.0 + b))
    }

    fn check_amplitude(&self) -> Result<(), GluingError> {
        match self.lambda.iter().position(|l| l.abs() < 1e-14) {
            Some(i) => Err(GluingError::ZeroAmplitude(i)),
            None => Ok(()),
        }
    }
}

/// Remainder traces of one frequency class: the part of the boundary
/// discrepancy not carried by the matched parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantTraces {
    pub value: Vec<f64>,
    pub radial: Vec<f64>,
}

impl ConstantTraces {
    pub fn zeros(d: usize) -> Self {
        Self { value: vec![0.0; d], radial: vec![0.0; d] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantParams {
    /// `b_i`; the neck uses `b = b_d`.
    pub b: Vec<f64>,
    pub rho: Vec<f64>,
}

impl ConstantParams {
    pub fn zeros(d: usize) -> Self {
        Self { b: vec![0.0; d], rho: vec![0.0; d] }
    }

    pub fn neck_offset(&self) -> f64 {
        *self.b.last().unwrap_or(&0.0)
    }

    /// `η_i = κ(b_i - b)Λ_i`, `i < d`.
    pub fn eta(&self, ctx: &MatchingContext) -> Vec<f64> {
        let b = self.neck_offset();
        (0..ctx.dim() - 1).map(|i| ctx.kappa * (self.b[i] - b) * ctx.lambda[i]).collect()
    }
}

/// Constant-mode discrepancy carried by the parameters:
/// `κ b_i Λ_i + (ε²Λ_i/(4κ(1+b)) - ρ_i) r^{2-n}` and its `r ∂_r`.
pub fn constant_model(ctx: &MatchingContext, p: &ConstantParams) -> ConstantTraces {
    let b = p.neck_offset();
    let rn = ctx.radius.powf(2.0 - ctx.nf());
    let mut out = ConstantTraces::zeros(ctx.dim());
    for i in 0..ctx.dim() {
        let tail = (ctx.neck_tail(b, i) - p.rho[i]) * rn;
        out.value[i] = ctx.kappa * p.b[i] * ctx.lambda[i] + tail;
        out.radial[i] = (2.0 - ctx.nf()) * tail;
    }
    out
}

/// Solves `constant_model(p) = h` for `p`.
pub fn solve_constants(ctx: &MatchingContext, h: &ConstantTraces) -> Result<ConstantParams, GluingError> {
    ctx.check_amplitude()?;
    let d = ctx.dim();
    let nf = ctx.nf();
    let b: Vec<f64> = (0..d).map(|i| (h.value[i] + h.radial[i] / (nf - 2.0)) / (ctx.kappa * ctx.lambda[i])).collect();
    let bd = b[d - 1];
    if !(1.0 + bd > 0.0) {
        return Err(GluingError::Window { name: "b", value: bd });
    }
    let rn = ctx.radius.powf(nf - 2.0);
    let rho = (0..d).map(|i| ctx.neck_tail(bd, i) + rn * h.radial[i] / (nf - 2.0)).collect();
    Ok(ConstantParams { b, rho })
}

/// Residual of both constant-mode equations at `p`, relative to the trace size.
pub fn constant_residual(ctx: &MatchingContext, p: &ConstantParams, h: &ConstantTraces) -> f64 {
    let m = constant_model(ctx, p);
    let scale = 1.0 + ctx.radius.powf(2.0 - ctx.nf()) * p.rho.iter().fold(0.0, |a, x| a.max(x.abs()));
    let diff = m.value.iter().zip(&h.value).chain(m.radial.iter().zip(&h.radial));
    diff.fold(0.0, |a, (x, y)| a.max((x - y).abs())) / scale
}

/// `F = (n-2)u + r∂_r u` and `G = (n-2)u + n r∂_r u + r²∂_r² u` for the
/// radial neck at `|x| = r`: the value and `r∂_r` of the level-1 response of
/// `u_{ε,R,a}` to the translation, per unit `x_j a_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckSlopes {
    pub f: f64,
    pub g: f64,
}

impl NeckSlopes {
    pub fn new(profile: &DelaunayProfile, scale: f64, r: f64) -> Self {
        let nf = profile.n as f64;
        let m = (nf - 2.0) / 2.0;
        let c = nf * (nf - 2.0) / 4.0;
        let p = 4.0 / (nf - 2.0);
        let (v, vd) = profile.eval((scale / r).ln());
        let vdd = m * m * v - c * v.powf(p + 1.0);
        let pre = r.powf(-m);
        let u = pre * v;
        let ru = -m * u - pre * vd;
        let rru = -m * ru + m * pre * vd + pre * vdd;
        let r2u = rru - ru;
        Self { f: (nf - 2.0) * u + ru, g: (nf - 2.0) * u + nf * ru + r2u }
    }
}

/// Level-1 traces as `d × n` coordinate coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateTraces {
    pub value: Vec<Vec<f64>>,
    pub radial: Vec<Vec<f64>>,
}

impl CoordinateTraces {
    pub fn zeros(d: usize, n: usize) -> Self {
        Self { value: vec![vec![0.0; n]; d], radial: vec![vec![0.0; n]; d] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateParams {
    /// Translation `a` of the neck.
    pub a: Vec<f64>,
    /// `A`-vectors of the auxiliary interior data, `d - 1` rows.
    pub linear: Vec<Vec<f64>>,
    /// Exterior level-1 data as coordinate coefficients, `d` rows.
    pub omega: Vec<Vec<f64>>,
}

impl CoordinateParams {
    pub fn zeros(d: usize, n: usize) -> Self {
        Self { a: vec![0.0; n], linear: vec![vec![0.0; n]; d - 1], omega: vec![vec![0.0; n]; d] }
    }

    /// `α_ij = a_j + A_ij / ((n-2)κ(1+b)Λ_i)`, with `α_dj = a_j`.
    pub fn alpha(&self, ctx: &MatchingContext, b: f64) -> Vec<Vec<f64>> {
        let d = ctx.dim();
        (0..d)
            .map(|i| {
                (0..self.a.len())
                    .map(|j| match self.linear.get(i) {
                        Some(row) => self.a[j] + row[j] / ((ctx.nf() - 2.0) * ctx.kappa * (1.0 + b) * ctx.lambda[i]),
                        None => self.a[j],
                    })
                    .collect()
            })
            .collect()
    }
}

/// Level-1 discrepancy carried by the parameters:
/// value `F Λ_i r a_j + r A_ij - ω_ij`, radial `G Λ_i r a_j + r A_ij + (n-1) ω_ij`.
pub fn coordinate_model(ctx: &MatchingContext, slopes: NeckSlopes, p: &CoordinateParams) -> CoordinateTraces {
    let (d, n) = (ctx.dim(), ctx.n as usize);
    let r = ctx.radius;
    let mut out = CoordinateTraces::zeros(d, n);
    for i in 0..d {
        for j in 0..n {
            let lin = p.linear.get(i).map_or(0.0, |row| row[j]);
            out.value[i][j] = slopes.f * ctx.lambda[i] * r * p.a[j] + r * lin - p.omega[i][j];
            out.radial[i][j] = slopes.g * ctx.lambda[i] * r * p.a[j] + r * lin + (ctx.nf() - 1.0) * p.omega[i][j];
        }
    }
    out
}

/// Solves `coordinate_model(p) = h` per coordinate `j`: the last component
/// fixes `(a_j, ω_dj)`, the others `(A_ij, ω_ij)`.
pub fn solve_coordinates(ctx: &MatchingContext, slopes: NeckSlopes, h: &CoordinateTraces) -> Result<CoordinateParams, GluingError> {
    ctx.check_amplitude()?;
    let (d, n) = (ctx.dim(), ctx.n as usize);
    let (r, nf) = (ctx.radius, ctx.nf());
    let mut p = CoordinateParams::zeros(d, n);
    let last = d - 1;
    let det = ctx.lambda[last] * r * (slopes.f * (nf - 1.0) + slopes.g);
    if det.abs() < 1e-300 {
        return Err(GluingError::Singular);
    }
    for j in 0..n {
        let (hv, hr) = (h.value[last][j], h.radial[last][j]);
        p.a[j] = ((nf - 1.0) * hv + hr) / det;
        p.omega[last][j] = (ctx.lambda[last] * r * (slopes.f * hr - slopes.g * hv)) / det;
        for i in 0..last {
            let hv = h.value[i][j] - slopes.f * ctx.lambda[i] * r * p.a[j];
            let hr = h.radial[i][j] - slopes.g * ctx.lambda[i] * r * p.a[j];
            p.linear[i][j] = ((nf - 1.0) * hv + hr) / (nf * r);
            p.omega[i][j] = (hr - hv) / nf;
        }
    }
    Ok(p)
}

pub fn coordinate_residual(ctx: &MatchingContext, slopes: NeckSlopes, p: &CoordinateParams, h: &CoordinateTraces) -> f64 {
    let m = coordinate_model(ctx, slopes, p);
    let rows = m.value.iter().zip(&h.value).chain(m.radial.iter().zip(&h.radial));
    rows.flat_map(|(x, y)| x.iter().zip(y).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighParams {
    /// Exterior data `ϑ`.
    pub theta: ModeCoefficients,
    /// Interior data `φ`.
    pub phi: ModeCoefficients,
}

impl HighParams {
    pub fn zeros(n: u32, k_max: usize, d: usize, r: f64) -> Self {
        let z = ModeCoefficients::zeros(n, k_max, d, r);
        Self { theta: z.clone(), phi: z }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighTraces {
    pub value: ModeCoefficients,
    pub radial: ModeCoefficients,
}

/// High-frequency discrepancy carried by the data: value `φ - ϑ`, radial
/// `k φ + (n+k-2) ϑ`.
pub fn high_model(p: &HighParams) -> HighTraces {
    let n = p.phi.n;
    let mut value = p.phi.clone();
    let mut radial = p.phi.clone();
    for k in 2..=p.phi.k_max {
        let (ph, th) = (p.phi.level_block(k), p.theta.level_block(k));
        let v: Vec<f64> = ph.iter().zip(th).map(|(a, b)| a - b).collect();
        let w: Vec<f64> = ph.iter().zip(th).map(|(a, b)| k as f64 * a + (n as f64 + k as f64 - 2.0) * b).collect();
        value.level_block_mut(k).copy_from_slice(&v);
        radial.level_block_mut(k).copy_from_slice(&w);
    }
    HighTraces { value, radial }
}

/// Solves `high_model(p) = h`: `ϑ = P^{-1}(h' - k h)`, `φ = h + ϑ`.
pub fn solve_high(h: &HighTraces) -> Result<HighParams, GluingError> {
    check_high(&h.value)?;
    check_high(&h.radial)?;
    let mut rhs = h.radial.clone();
    for k in 2..=rhs.k_max {
        let v = h.value.level_block(k).to_vec();
        rhs.level_block_mut(k).iter_mut().zip(&v).for_each(|(x, y)| *x -= k as f64 * y);
    }
    let theta = dn_inverse(&rhs)?;
    let phi = h.value.add(&theta)?;
    Ok(HighParams { theta, phi })
}

/// Iteration controls shared by the matching systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Update ratio above which Newton on the same system takes over.
    pub newton_threshold: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iterations: 50, newton_threshold: 0.9 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub iterations: usize,
    /// Sup norm of each parameter update.
    pub updates: Vec<f64>,
    pub contraction: f64,
    /// Whether the Newton fallback ran.
    pub newton: bool,
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Fixed point of `map` on packed parameters; Newton on `map(x) - x` with a
/// difference Jacobian once the update ratio exceeds the threshold.
fn iterate_packed(
    init: Vec<f64>,
    mut map: impl FnMut(&[f64]) -> Result<Vec<f64>, GluingError>,
    opts: &MatchOptions,
) -> Result<(Vec<f64>, MatchReport), GluingError> {
    let mut x = init;
    let mut report = MatchReport::default();
    let mut newton = false;
    for it in 1..=opts.max_iterations {
        let gx = map(&x)?;
        let next = if newton {
            let dim = x.len();
            let fx: Vec<f64> = gx.iter().zip(&x).map(|(g, v)| g - v).collect();
            let mut jac = DMatrix::<f64>::zeros(dim, dim);
            for c in 0..dim {
                let h = 1e-7 * (1.0 + x[c].abs());
                let mut xp = x.clone();
                xp[c] += h;
                let gp = map(&xp)?;
                for r in 0..dim {
                    jac[(r, c)] = ((gp[r] - xp[r]) - fx[r]) / h;
                }
            }
            let dx = jac.lu().solve(&(-DVector::from_vec(fx))).ok_or(GluingError::Singular)?;
            x.iter().zip(dx.iter()).map(|(a, b)| a + b).collect()
        } else {
            gx
        };
        let update = sup_diff(&next, &x);
        x = next;
        report.iterations = it;
        if let Some(&prev) = report.updates.last() {
            if prev > 0.0 {
                let ratio = update / prev;
                report.contraction = report.contraction.max(ratio);
                if ratio > opts.newton_threshold && !newton && update > opts.tol {
                    newton = true;
                    report.newton = true;
                }
            }
        }
        report.updates.push(update);
        if update <= opts.tol {
            return Ok((x, report));
        }
        if !update.is_finite() {
            return Err(GluingError::NonContractive(report.contraction));
        }
    }
    let update = report.updates.last().copied().unwrap_or(f64::INFINITY);
    Err(GluingError::NoConvergence { iterations: opts.max_iterations, update })
}

fn pack_constants(p: &ConstantParams) -> Vec<f64> {
    p.b.iter().chain(&p.rho).copied().collect()
}

fn unpack_constants(x: &[f64], d: usize) -> ConstantParams {
    ConstantParams { b: x[..d].to_vec(), rho: x[d..2 * d].to_vec() }
}

fn pack_coordinates(p: &CoordinateParams) -> Vec<f64> {
    let mut v = p.a.clone();
    p.linear.iter().chain(&p.omega).for_each(|row| v.extend_from_slice(row));
    v
}

fn unpack_coordinates(x: &[f64], d: usize, n: usize) -> CoordinateParams {
    let mut p = CoordinateParams::zeros(d, n);
    p.a.copy_from_slice(&x[..n]);
    let rows = p.linear.iter_mut().chain(p.omega.iter_mut());
    for (r, row) in rows.enumerate() {
        row.copy_from_slice(&x[n * (r + 1)..n * (r + 2)]);
    }
    p
}

fn check_b(b: &[f64]) -> Result<(), GluingError> {
    match b.iter().find(|x| x.abs() > 0.5) {
        Some(&value) => Err(GluingError::Window { name: "b", value }),
        None => Ok(()),
    }
}

/// Fixed point `(b, ρ) = solve_constants(H(b, ρ))` with `H` supplied by the
/// oracle. Errors once some `|b_i|` exceeds 1/2.
pub fn match_constants<O>(ctx: &MatchingContext, mut oracle: O, opts: &MatchOptions) -> Result<(ConstantParams, MatchReport), GluingError>
where
    O: FnMut(&ConstantParams) -> Result<ConstantTraces, GluingError>,
{
    let d = ctx.dim();
    let init = solve_constants(ctx, &ConstantTraces::zeros(d))?;
    let (x, report) = iterate_packed(
        pack_constants(&init),
        |x| {
            let p = unpack_constants(x, d);
            check_b(&p.b)?;
            let next = solve_constants(ctx, &oracle(&p)?)?;
            check_b(&next.b)?;
            Ok(pack_constants(&next))
        },
        opts,
    )?;
    Ok((unpack_constants(&x, d), report))
}

/// Fixed point of [`solve_coordinates`] against oracle traces.
pub fn match_coordinates<O>(
    ctx: &MatchingContext,
    slopes: NeckSlopes,
    mut oracle: O,
    opts: &MatchOptions,
) -> Result<(CoordinateParams, MatchReport), GluingError>
where
    O: FnMut(&CoordinateParams) -> Result<CoordinateTraces, GluingError>,
{
    let (d, n) = (ctx.dim(), ctx.n as usize);
    let (x, report) = iterate_packed(
        pack_coordinates(&CoordinateParams::zeros(d, n)),
        |x| {
            let p = unpack_coordinates(x, d, n);
            Ok(pack_coordinates(&solve_coordinates(ctx, slopes, &oracle(&p)?)?))
        },
        opts,
    )?;
    Ok((unpack_coordinates(&x, d, n), report))
}

/// Fixed point `ϑ = P^{-1}(H' - kH)` against oracle traces.
pub fn match_high_freq<O>(template: &ModeCoefficients, mut oracle: O, opts: &MatchOptions) -> Result<(HighParams, MatchReport), GluingError>
where
    O: FnMut(&HighParams) -> Result<HighTraces, GluingError>,
{
    let zero = HighParams::zeros(template.n, template.k_max, template.dim, template.radius);
    let len = zero.theta.coeffs.len();
    let unpack = |x: &[f64]| {
        let mut p = zero.clone();
        p.theta.coeffs.copy_from_slice(&x[..len]);
        p.phi.coeffs.copy_from_slice(&x[len..]);
        p
    };
    let (x, report) = iterate_packed(
        vec![0.0; 2 * len],
        |x| {
            let next = solve_high(&oracle(&unpack(x))?)?;
            Ok(next.theta.coeffs.iter().chain(&next.phi.coeffs).copied().collect())
        },
        opts,
    )?;
    Ok((unpack(&x), report))
}

/// `⟨θ_j, Y_{1,m}⟩` for the level-1 harmonics on `S^2`.
fn coordinate_basis(n: u32) -> Result<Vec<Vec<f64>>, GluingError> {
    if n != 3 {
        return Err(GluingError::NeedsAngles);
    }
    let grid = SphereGrid::for_level(1);
    let mut out = Vec::with_capacity(3);
    for j in 0..3 {
        let samples: Vec<f64> = grid.points.iter().map(|p| p[j]).collect();
        let c = grid.decompose(&samples, 1, 1, 1.0)?;
        out.push(c.level_block(1).to_vec());
    }
    Ok(out)
}

/// Level-1 block of `c` as coordinate coefficients, `d × n`.
fn to_coordinates(c: &ModeCoefficients, basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = c.n as usize;
    let norm2 = sphere_area(c.n) / n as f64;
    let block = c.level_block(1);
    (0..c.dim)
        .map(|i| (0..n).map(|j| (0..n).map(|m| basis[j][m] * block[m * c.dim + i]).sum::<f64>() / norm2).collect())
        .collect()
}

fn set_coordinates(c: &mut ModeCoefficients, w: &[Vec<f64>], basis: &[Vec<f64>]) {
    let (n, d) = (c.n as usize, c.dim);
    let block = c.level_block_mut(1);
    for m in 0..n {
        for i in 0..d {
            block[m * d + i] = (0..n).map(|j| w[i][j] * basis[j][m]).sum();
        }
    }
}

/// Which mode classes the end-to-end driver matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    /// Constants only; `a`, `ω`, `ϑ` frozen at zero.
    Radial,
    /// Constants, coordinates and levels `2..=k_max`.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlueOptions {
    pub sector: Sector,
    /// Highest level in the full sector.
    pub k_max: usize,
    pub matching: MatchOptions,
    /// Picard tolerance of both solvers.
    pub solver_tol: f64,
}

impl Default for GlueOptions {
    fn default() -> Self {
        Self {
            sector: Sector::Radial,
            k_max: 2,
            matching: MatchOptions { tol: 1e-11, max_iterations: 40, newton_threshold: 0.9 },
            solver_tol: 1e-12,
        }
    }
}

/// All matched parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingState {
    pub constants: ConstantParams,
    pub coordinates: CoordinateParams,
    pub high: HighParams,
}

impl MatchingState {
    pub fn b(&self) -> &[f64] {
        &self.constants.b
    }

    pub fn rho(&self) -> &[f64] {
        &self.constants.rho
    }

    pub fn eta(&self, ctx: &MatchingContext) -> Vec<f64> {
        self.constants.eta(ctx)
    }

    pub fn alpha(&self, ctx: &MatchingContext) -> Vec<Vec<f64>> {
        self.coordinates.alpha(ctx, self.constants.neck_offset())
    }

    /// Window checks with unit constants `α_n = β_n = 1`.
    pub fn windows(&self, ctx: &MatchingContext, d_n: f64) -> Vec<WindowCheck> {
        let (r, nf) = (ctx.radius, ctx.nf());
        let sup = |v: &mut dyn Iterator<Item = f64>| v.fold(0.0, |a: f64, x| a.max(x.abs()));
        let small = r.powf(49.0 / 25.0 + d_n - nf / 2.0);
        vec![
            WindowCheck::new("b", sup(&mut self.constants.b.iter().copied()), 0.5),
            WindowCheck::new("rho^2", sup(&mut self.constants.rho.iter().map(|x| x * x)), r.powf(d_n - 51.0 / 25.0 + 1.5 * nf)),
            WindowCheck::new("alpha^2", sup(&mut self.alpha(ctx).iter().flatten().map(|x| x * x)), r.powf(d_n - nf / 2.0)),
            WindowCheck::new("omega", sup(&mut self.coordinates.omega.iter().flatten().copied()), small),
            WindowCheck::new("theta", self.high.theta.l2_norm(), small),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCheck {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub inside: bool,
}

impl WindowCheck {
    fn new(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.to_string(), value, bound, inside: value <= bound }
    }
}

/// Boundary discrepancy of one class in coefficient norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub class: FrequencyClass,
    pub value: f64,
    pub radial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub interior: f64,
    pub exterior: f64,
    pub global: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub eps: f64,
    /// Geodesic radius `r1` bounding the far region.
    pub far_radius: f64,
    /// `sup |ψ - κΛ|` over geodesic radii `>= r1`.
    pub far_field: f64,
    /// Inner decade `[r_min, 10 r_min]` of the interior grid.
    pub inner_radii: (f64, f64),
    /// Range of `|W| / (|Λ| u_{ε,R,a})` over the inner decade.
    pub inner_ratio: (f64, f64),
    /// `sup |ratio - 1|` over the inner decade.
    pub inner_deviation: f64,
}

/// Serializable summary of a glued solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingSummary {
    pub eps: f64,
    pub radius: f64,
    pub sector: Sector,
    pub params: MatchingState,
    pub eta: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub gaps: Vec<GapReport>,
    pub residual: ResidualReport,
    pub matching: MatchReport,
    pub interior_contraction: f64,
    pub exterior_contraction: f64,
    pub windows: Vec<WindowCheck>,
    /// Smallest component of the glued field over both grids.
    pub min_component: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GluedSolution {
    pub context: MatchingContext,
    pub interior: InteriorState,
    pub exterior: ExteriorState,
    pub params: MatchingState,
    pub gaps: Vec<GapReport>,
    pub residual: ResidualReport,
    pub asymptotics: AsymptoticsReport,
    pub matching: MatchReport,
    pub windows: Vec<WindowCheck>,
    pub min_component: f64,
    pub sector: Sector,
}

impl GluedSolution {
    pub fn max_gap(&self) -> f64 {
        self.gaps.iter().fold(0.0, |a, g| a.max(g.value).max(g.radial))
    }

    pub fn summary(&self) -> MatchingSummary {
        MatchingSummary {
            eps: self.context.eps,
            radius: self.context.radius,
            sector: self.sector,
            params: self.params.clone(),
            eta: self.params.eta(&self.context),
            alpha: self.params.alpha(&self.context),
            gaps: self.gaps.clone(),
            residual: self.residual.clone(),
            matching: self.matching.clone(),
            interior_contraction: self.interior.report.contraction,
            exterior_contraction: self.exterior.report.contraction,
            windows: self.windows.clone(),
            min_component: self.min_component,
        }
    }
}

/// Boundary discrepancy `interior - exterior` split by class.
#[derive(Debug, Clone, PartialEq)]
struct Discrepancy {
    constants: ConstantTraces,
    coordinates: Option<CoordinateTraces>,
    high: Option<HighTraces>,
}

struct Driver<'a> {
    cfg: &'a ModelConfig,
    ctx: MatchingContext,
    sector: Sector,
    k_max: usize,
    solver_tol: f64,
    basis: Option<Vec<Vec<f64>>>,
    warm_interior: Option<ModeField>,
    warm_exterior: Option<ModeField>,
    last: Option<(InteriorState, ExteriorState)>,
}

impl<'a> Driver<'a> {
    fn new(cfg: &'a ModelConfig, eps: f64, opts: &GlueOptions) -> Result<Self, GluingError> {
        let k_max = match opts.sector {
            Sector::Radial => 0,
            Sector::Full => opts.k_max.max(1),
        };
        let basis = if k_max >= 1 { Some(coordinate_basis(cfg.n)?) } else { None };
        Ok(Self {
            cfg,
            ctx: MatchingContext::new(cfg, eps),
            sector: opts.sector,
            k_max,
            solver_tol: opts.solver_tol,
            basis,
            warm_interior: None,
            warm_exterior: None,
            last: None,
        })
    }

    fn zero_state(&self) -> MatchingState {
        let (d, n) = (self.ctx.dim(), self.cfg.n as usize);
        MatchingState {
            constants: ConstantParams::zeros(d),
            coordinates: CoordinateParams::zeros(d, n),
            high: HighParams::zeros(self.cfg.n, self.k_max, d, self.ctx.radius),
        }
    }

    fn solve(&mut self, p: &MatchingState) -> Result<Discrepancy, GluingError> {
        let ctx = &self.ctx;
        let mut inner = InteriorSetup::radial(self.cfg, ctx.eps, Background::Sphere).with_k_max(self.k_max);
        inner.b = p.constants.neck_offset();
        inner.aux.eta = p.constants.eta(ctx);
        inner.tol = self.solver_tol;
        let mut outer = ExteriorSetup::radial(self.cfg, ctx.radius).with_k_max(self.k_max);
        outer.rho = p.constants.rho.clone();
        outer.tol = self.solver_tol;
        if let Some(basis) = &self.basis {
            inner.translation = p.coordinates.a.clone();
            inner.aux.linear = p.coordinates.linear.clone();
            inner.phi = p.high.phi.clone();
            outer.phi = p.high.theta.clone();
            set_coordinates(&mut outer.phi, &p.coordinates.omega, basis);
        }
        let interior = interior_fixed_point(&inner, self.warm_interior.as_ref())?;
        let exterior = exterior_fixed_point(&outer, self.warm_exterior.as_ref())?;
        let (ti, te) = (interior.trace()?, exterior.trace()?);
        self.warm_interior = Some(interior.correction.clone());
        self.warm_exterior = Some(exterior.correction.clone());
        self.last = Some((interior, exterior));
        self.discrepancy(&ti, &te)
    }

    fn discrepancy(&self, ti: &BoundaryTrace, te: &BoundaryTrace) -> Result<Discrepancy, GluingError> {
        let value = ti.value.add(&te.value.scaled(-1.0))?;
        let radial = ti.radial_derivative.add(&te.radial_derivative.scaled(-1.0))?;
        let y0 = 1.0 / sphere_area(self.cfg.n).sqrt();
        let constants = ConstantTraces {
            value: value.level_block(0).iter().map(|c| c * y0).collect(),
            radial: radial.level_block(0).iter().map(|c| c * y0).collect(),
        };
        let coordinates = self
            .basis
            .as_ref()
            .map(|basis| CoordinateTraces { value: to_coordinates(&value, basis), radial: to_coordinates(&radial, basis) });
        let high = (self.k_max >= 2).then(|| {
            let keep = |c: &ModeCoefficients| {
                let mut c = c.clone();
                c.level_block_mut(0).iter_mut().for_each(|x| *x = 0.0);
                c.level_block_mut(1).iter_mut().for_each(|x| *x = 0.0);
                c
            };
            HighTraces { value: keep(&value), radial: keep(&radial) }
        });
        Ok(Discrepancy { constants, coordinates, high })
    }

    fn slopes(&self) -> NeckSlopes {
        let (interior, _) = self.last.as_ref().expect("solved");
        NeckSlopes::new(interior.profile(), interior.setup.scale(), self.ctx.radius)
    }

    /// One sweep of the matching maps: remainders `H = model(p) - gap`,
    /// then the closed-form solves.
    fn update(&mut self, p: &MatchingState) -> Result<MatchingState, GluingError> {
        let gap = self.solve(p)?;
        let ctx = &self.ctx;
        let sub = |m: &[f64], g: &[f64]| -> Vec<f64> { m.iter().zip(g).map(|(a, b)| a - b).collect() };
        let cm = constant_model(ctx, &p.constants);
        let h0 = ConstantTraces { value: sub(&cm.value, &gap.constants.value), radial: sub(&cm.radial, &gap.constants.radial) };
        let mut next = p.clone();
        next.constants = solve_constants(ctx, &h0)?;
        check_b(&next.constants.b)?;
        if let Some(g1) = &gap.coordinates {
            let slopes = self.slopes();
            let m1 = coordinate_model(ctx, slopes, &p.coordinates);
            let rows = |m: &[Vec<f64>], g: &[Vec<f64>]| -> Vec<Vec<f64>> { m.iter().zip(g).map(|(a, b)| sub(a, b)).collect() };
            let h1 = CoordinateTraces { value: rows(&m1.value, &g1.value), radial: rows(&m1.radial, &g1.radial) };
            next.coordinates = solve_coordinates(ctx, slopes, &h1)?;
        }
        if let Some(g2) = &gap.high {
            let m2 = high_model(&p.high);
            let h2 = HighTraces {
                value: m2.value.add(&g2.value.scaled(-1.0))?,
                radial: m2.radial.add(&g2.radial.scaled(-1.0))?,
            };
            next.high = solve_high(&h2)?;
        }
        Ok(next)
    }

    fn pack(&self, p: &MatchingState) -> Vec<f64> {
        let mut v = pack_constants(&p.constants);
        if self.sector == Sector::Full {
            v.extend(pack_coordinates(&p.coordinates));
            v.extend(p.high.theta.coeffs.iter().chain(&p.high.phi.coeffs));
        }
        v
    }

    fn unpack(&self, x: &[f64]) -> MatchingState {
        let (d, n) = (self.ctx.dim(), self.cfg.n as usize);
        let mut p = self.zero_state();
        p.constants = unpack_constants(x, d);
        if self.sector == Sector::Full {
            let nc = n * (2 * d);
            p.coordinates = unpack_coordinates(&x[2 * d..2 * d + nc], d, n);
            let rest = &x[2 * d + nc..];
            let len = p.high.theta.coeffs.len();
            p.high.theta.coeffs.copy_from_slice(&rest[..len]);
            p.high.phi.coeffs.copy_from_slice(&rest[len..]);
        }
        p
    }
}

fn class_gaps(gap: &Discrepancy) -> Vec<GapReport> {
    let l2 = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let mut out = vec![GapReport {
        class: FrequencyClass::Constants,
        value: l2(&mut gap.constants.value.iter().copied()),
        radial: l2(&mut gap.constants.radial.iter().copied()),
    }];
    if let Some(c) = &gap.coordinates {
        out.push(GapReport {
            class: FrequencyClass::Coordinates,
            value: l2(&mut c.value.iter().flatten().copied()),
            radial: l2(&mut c.radial.iter().flatten().copied()),
        });
    }
    if let Some(h) = &gap.high {
        out.push(GapReport { class: FrequencyClass::High, value: h.value.l2_norm(), radial: h.radial.l2_norm() });
    }
    out
}

fn asymptotics(cfg: &ModelConfig, eps: f64, interior: &InteriorState, exterior: &ExteriorState) -> Result<AsymptoticsReport, GluingError> {
    let model = &exterior.setup.model;
    let m = model.half_weight();
    let d = model.dim();
    let pts = exterior.total_points()?;
    let mut far = 0.0f64;
    for i in 0..pts.nodes {
        let t = pts.t(i);
        if geodesic_radius((-t).exp()) < cfg.r1 {
            continue;
        }
        let s = (m * t).exp() / model.beta(t).v;
        for a in 0..pts.angles {
            let dist = (0..d).map(|c| (s * pts.get(i, a, c) - model.kappa * model.lambda[c]).powi(2)).sum::<f64>().sqrt();
            far = far.max(dist);
        }
    }
    let inner = interior.total_points()?;
    let norm_l = model.lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
    let t_end = inner.t(inner.nodes - 1);
    let from = ((t_end - core::f64::consts::LN_10 - inner.t0) / inner.step).floor().max(0.0) as usize;
    let (mut lo, mut hi, mut dev) = (f64::INFINITY, 0.0f64, 0.0f64);
    for i in from..inner.nodes {
        for a in 0..inner.angles {
            let w = (0..d).map(|c| inner.get(i, a, c).powi(2)).sum::<f64>().sqrt();
            let ratio = w / (norm_l * interior.neck_at(i, a));
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            dev = dev.max((ratio - 1.0).abs());
        }
    }
    Ok(AsymptoticsReport {
        eps,
        far_radius: cfg.r1,
        far_field: far,
        inner_radii: ((-t_end).exp(), (-inner.t(from)).exp()),
        inner_ratio: (lo, hi),
        inner_deviation: dev,
    })
}

fn min_component(interior: &InteriorState, exterior: &ExteriorState) -> Result<f64, GluingError> {
    let a = interior.total_points()?.values.iter().fold(f64::INFINITY, |m, x| m.min(*x));
    let b = exterior.total_points()?.values.iter().fold(f64::INFINITY, |m, x| m.min(*x));
    Ok(a.min(b))
}

/// Alternates interior and exterior solves with warm starts and updates all
/// handled parameters from the measured boundary discrepancy until the
/// parameters settle; the reported gaps come from a final solve at the
/// returned parameters.
pub fn glue_end_to_end(cfg: &ModelConfig, eps: f64, opts: &GlueOptions) -> Result<GluedSolution, GluingError> {
    let mut driver = Driver::new(cfg, eps, opts)?;
    let init = driver.zero_state();
    let start = driver.pack(&init);
    let (x, matching) = iterate_packed(
        start,
        |x| {
            let p = driver.unpack(x);
            let next = driver.update(&p)?;
            Ok(driver.pack(&next))
        },
        &opts.matching,
    )?;
    let params = driver.unpack(&x);
    let gap = driver.solve(&params)?;
    let (interior, exterior) = driver.last.take().expect("solved");
    let residual = ResidualReport {
        interior: interior.report.residual,
        exterior: exterior.report.residual,
        global: interior.report.residual.max(exterior.report.residual),
    };
    let asymptotics = asymptotics(cfg, eps, &interior, &exterior)?;
    let min_component = min_component(&interior, &exterior)?;
    let windows = params.windows(&driver.ctx, cfg.d_n());
    Ok(GluedSolution {
        context: driver.ctx.clone(),
        gaps: class_gaps(&gap),
        interior,
        exterior,
        params,
        residual,
        asymptotics,
        matching,
        windows,
        min_component,
        sector: opts.sector,
    })
}

/// Constant-mode derivative gap with the matching skipped (`b = 0`, `ρ = 0`)
/// next to the prediction `(n-2) ε²|Λ_i|/(4κ) r^{2-n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenControl {
    pub measured: Vec<f64>,
    pub predicted: Vec<f64>,
}

pub fn frozen_interface_gap(cfg: &ModelConfig, eps: f64) -> Result<FrozenControl, GluingError> {
    let opts = GlueOptions::default();
    let mut driver = Driver::new(cfg, eps, &opts)?;
    let zero = driver.zero_state();
    let gap = driver.solve(&zero)?;
    let ctx = &driver.ctx;
    let nf = ctx.nf();
    let rn = ctx.radius.powf(2.0 - nf);
    Ok(FrozenControl {
        measured: gap.constants.radial.iter().map(|x| x.abs()).collect(),
        predicted: (0..ctx.dim()).map(|i| (nf - 2.0) * ctx.neck_tail(0.0, i).abs() * rn).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PotentialSpec;
    use crate::spectral::ModeIndex;

    fn unit_config() -> ModelConfig {
        let mut c = ModelConfig::default();
        c.kappa = 1.0;
        c.potential = PotentialSpec::for_trivial_solution(3, 1.0, &c.lambda, 1.0);
        c
    }

    fn high(r: f64) -> ModeCoefficients {
        let mut phi = ModeCoefficients::zeros(3, 6, 2, r);
        for k in 2..=6 {
            phi.set(ModeIndex { level: k, index: k }, 0, 1.0 / k as f64);
            phi.set(ModeIndex { level: k, index: 0 }, 1, -0.3);
        }
        phi
    }

    #[test]
    fn dn_map_is_diagonal_with_closed_form_entries() {
        let phi = high(0.02);
        let p = dn_map(&phi).unwrap();
        for k in 2..=6 {
            let mult = dn_multiplier(k, 3);
            for (a, b) in p.level_block(k).iter().zip(phi.level_block(k)) {
                assert!((a - mult * b).abs() <= 1e-8 * (1.0 + b.abs()), "level {k}: {a} vs {}", mult * b);
            }
        }
        let back = dn_inverse(&p).unwrap();
        assert!(sup_diff(&back.coeffs, &phi.coeffs) < 1e-10);
        assert_eq!(dn_map(&ModeCoefficients::zeros(3, 4, 2, 0.1)).unwrap().l2_norm(), 0.0);
        let mut low = phi.clone();
        low.set(ModeIndex { level: 1, index: 0 }, 0, 0.1);
        assert!(matches!(dn_map(&low), Err(GluingError::LowContent { level: 1, .. })));
    }

    #[test]
    fn zero_remainders_give_the_trivial_parameters() {
        let cfg = unit_config();
        let ctx = MatchingContext::new(&cfg, 0.1);
        let (p, rep) = match_constants(&ctx, |_| Ok(ConstantTraces::zeros(2)), &MatchOptions::default()).unwrap();
        assert!(rep.iterations <= 2);
        assert!(p.b.iter().all(|b| b.abs() < 1e-15));
        assert!((p.rho[0] - 0.0015).abs() < 1e-12 && (p.rho[1] - 0.0020).abs() < 1e-12);
        let slopes = NeckSlopes { f: 1.0, g: 1.0 };
        let (c, _) = match_coordinates(&ctx, slopes, |_| Ok(CoordinateTraces::zeros(2, 3)), &MatchOptions::default()).unwrap();
        assert!(c.alpha(&ctx, 0.0).iter().flatten().chain(c.omega.iter().flatten()).all(|x| x.abs() < 1e-12));
        let zero = ModeCoefficients::zeros(3, 4, 2, ctx.radius);
        let traces = HighTraces { value: zero.clone(), radial: zero.clone() };
        let (h, _) = match_high_freq(&zero, |_| Ok(traces.clone()), &MatchOptions::default()).unwrap();
        assert_eq!(h.theta.l2_norm(), 0.0);
    }

    #[test]
    fn closed_form_solves_hit_their_systems() {
        let cfg = ModelConfig::default();
        let ctx = MatchingContext::new(&cfg, 0.05);
        let h = ConstantTraces { value: vec![1e-4, -2e-4], radial: vec![3e-4, 5e-5] };
        let p = solve_constants(&ctx, &h).unwrap();
        assert!(constant_residual(&ctx, &p, &h) < 1e-12);
        let slopes = NeckSlopes { f: 0.8, g: 0.85 };
        let mut hc = CoordinateTraces::zeros(2, 3);
        hc.value[0] = vec![1e-3, 0.0, -2e-3];
        hc.radial[1] = vec![0.0, 4e-3, 1e-3];
        let c = solve_coordinates(&ctx, slopes, &hc).unwrap();
        assert!(coordinate_residual(&ctx, slopes, &c, &hc) < 1e-12);
        let mut hv = ModeCoefficients::zeros(3, 3, 2, ctx.radius);
        hv.set(ModeIndex { level: 3, index: 2 }, 0, 0.01);
        let hh = HighTraces { value: hv.clone(), radial: hv.scaled(-2.0) };
        let s = solve_high(&hh).unwrap();
        let m = high_model(&s);
        assert!(sup_diff(&m.value.coeffs, &hh.value.coeffs) < 1e-15);
        assert!(sup_diff(&m.radial.coeffs, &hh.radial.coeffs) < 1e-15);
    }

    #[test]
    fn small_remainders_move_b_by_the_same_order() {
        let cfg = unit_config();
        let ctx = MatchingContext::new(&cfg, 0.05);
        let size = ctx.radius.powf(2.0 - 1.5);
        let (p, _) = match_constants(
            &ctx,
            |q| Ok(ConstantTraces { value: vec![size, -size], radial: vec![0.5 * size * (1.0 + q.b[1]), 0.0] }),
            &MatchOptions::default(),
        )
        .unwrap();
        let bmax = p.b.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(bmax > 0.1 * size && bmax < 10.0 * size, "{bmax} vs {size}");
    }

    #[test]
    fn level_one_coordinates_round_trip() {
        let basis = coordinate_basis(3).unwrap();
        let w = vec![vec![0.1, -0.2, 0.3], vec![0.0, 0.5, -0.4]];
        let mut c = ModeCoefficients::zeros(3, 1, 2, 0.1);
        set_coordinates(&mut c, &w, &basis);
        let back = to_coordinates(&c, &basis);
        assert!(back.iter().flatten().zip(w.iter().flatten()).all(|(a, b)| (a - b).abs() < 1e-13));
    }

    #[test]
    fn neck_slopes_approach_the_leading_order() {
        let cfg = ModelConfig::default();
        let eps = 0.05;
        let ctx = MatchingContext::new(&cfg, eps);
        let profile = DelaunayProfile::new(3, eps).unwrap();
        let scale = crate::interior::neck_scale(3, eps, cfg.kappa, 0.0);
        let s = NeckSlopes::new(&profile, scale, ctx.radius);
        let lead = cfg.kappa;
        let bound = eps.powf(2.0 - cfg.s_exponent);
        assert!(((s.f - lead) / lead).abs() < bound, "F = {}", s.f);
        assert!(((s.g - lead) / lead).abs() < bound, "G = {}", s.g);
    }
}
