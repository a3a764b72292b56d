//! The system in cylinder form on the conformal chart of the round sphere.
//!
//! With `g0 = β^{4/(n-2)} δ`, `β = (1 + |y|²/4)^{-(n-2)/2}`, a map `ψ` on
//! `S^n` is carried by `v(t, θ) = |y|^{(n-2)/2} β ψ`, `t = -log|y|`, and the
//! system becomes
//!
//! `v'' - (n-2)²/4 v + Δ_θ v + n(n-2)/4 |v|^p v + e^{-2t} β^p M v = 0`
//!
//! with `p = 4/(n-2)` and `M = (n(n-2)/4 - μ_A) I - B`. The flat background
//! drops the last term. Both the punctured ball and the exterior region use
//! this form, on different ranges of `t`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, PotentialSpec};
use crate::field::{ModeField, RadialField};
use crate::num::{second_derivative4, Jet};
use crate::report::FixedPointReport;
use crate::spectral::{eigenvalue, AngularGrid, ModeCoefficients, SpectralError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("component {component} lost positivity (value {value:e})")]
    Positivity { component: usize, value: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Background {
    Flat,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereModel {
    pub n: u32,
    pub kappa: f64,
    pub lambda: Vec<f64>,
    pub potential: PotentialSpec,
    pub background: Background,
}

impl SphereModel {
    pub fn from_config(cfg: &ModelConfig, background: Background) -> Self {
        Self { n: cfg.n, kappa: cfg.kappa, lambda: cfg.lambda.clone(), potential: cfg.potential.clone(), background }
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn power(&self) -> f64 {
        4.0 / (self.n as f64 - 2.0)
    }

    /// `n(n-2)/4`.
    pub fn coupling(&self) -> f64 {
        let nf = self.n as f64;
        nf * (nf - 2.0) / 4.0
    }

    /// `(n-2)/2`.
    pub fn half_weight(&self) -> f64 {
        (self.n as f64 - 2.0) / 2.0
    }

    /// `β` as a function of `t`; identically 1 on the flat background.
    pub fn beta(&self, t: f64) -> Jet {
        if self.background == Background::Flat {
            return Jet::constant(1.0);
        }
        let m = self.half_weight();
        let s = 0.25 * (-2.0 * t).exp();
        let base = 1.0 + s;
        Jet {
            v: base.powf(-m),
            d1: 2.0 * m * s * base.powf(-m - 1.0),
            d2: -4.0 * m * s * base.powf(-m - 2.0) * (1.0 - m * s),
        }
    }

    /// `e^{-2t} β^p`, zero on the flat background.
    pub fn conformal_weight(&self, t: f64) -> f64 {
        if self.background == Background::Flat {
            return 0.0;
        }
        let s = 0.25 * (-2.0 * t).exp();
        4.0 * s / ((1.0 + s) * (1.0 + s))
    }

    /// Row-major `e^{-2t} β^p M`.
    pub fn zeroth_order(&self, t: f64) -> Vec<f64> {
        let d = self.dim();
        let w = self.conformal_weight(t);
        let mut m = vec![0.0; d * d];
        if w == 0.0 {
            return m;
        }
        let c = self.coupling() - self.potential.mu_a;
        for i in 0..d {
            for j in 0..d {
                let id = if i == j { c } else { 0.0 };
                m[i * d + j] = w * (id - self.potential.perturbation_entry(i, j));
            }
        }
        m
    }

    /// Cylinder form `e^{-(n-2)t/2} β κ` of the constant solution `κΛ`.
    pub fn trivial(&self, t: f64) -> Jet {
        (Jet::exp_linear(-self.half_weight(), t) * self.beta(t)).scale(self.kappa)
    }

    pub fn nonlinearity(&self, v: &[f64]) -> Vec<f64> {
        nonlinearity(self.n, v)
    }

    pub fn linearization(&self, base: &[f64], w: &[f64]) -> Vec<f64> {
        linearization(self.n, base, w)
    }

    /// Zeroth-order part of the system at `t`: nonlinearity plus potential.
    pub fn pointwise(&self, t: f64, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let m = self.zeroth_order(t);
        let mut out = self.nonlinearity(v);
        for i in 0..d {
            out[i] += (0..d).map(|j| m[i * d + j] * v[j]).sum::<f64>();
        }
        out
    }

    /// Pointwise residual of the system for a cylinder field, with the
    /// `t`-derivatives taken by fourth-order differences mode by mode.
    pub fn residual(&self, v: &ModeField, grid: &AngularGrid) -> Result<RadialField, ModelError> {
        let shift = self.half_weight().powi(2);
        let mut linear = ModeField::zeros(v.n, v.k_max, v.dim, v.t0, v.step, v.nodes);
        let modes = v.modes();
        let probe = ModeCoefficients::zeros(v.n, v.k_max, 1, 1.0);
        for m in 0..modes {
            let q = shift + eigenvalue(probe.index_of(m).level, v.n);
            for c in 0..v.dim {
                let y: Vec<f64> = (0..v.nodes).map(|i| v.get(i, m, c)).collect();
                let d2 = second_derivative4(&y, v.step);
                for i in 0..v.nodes {
                    linear.set(i, m, c, d2[i] - q * y[i]);
                }
            }
        }
        let mut out = linear.synthesize(grid)?;
        let points = v.synthesize(grid)?;
        let d = v.dim;
        for i in 0..v.nodes {
            let t = v.t(i);
            for a in 0..grid.len() {
                let at = (i * grid.len() + a) * d;
                let z = self.pointwise(t, &points.values[at..at + d]);
                out.values[at..at + d].iter_mut().zip(z).for_each(|(o, x)| *o += x);
            }
        }
        Ok(out)
    }
}

/// `n(n-2)/4 |v|^p v`, `p = 4/(n-2)`.
pub fn nonlinearity(n: u32, v: &[f64]) -> Vec<f64> {
    let nf = n as f64;
    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let s = nf * (nf - 2.0) / 4.0 * r.powf(4.0 / (nf - 2.0));
    v.iter().map(|x| s * x).collect()
}

/// Derivative of [`nonlinearity`] at `base` applied to `w`.
pub fn linearization(n: u32, base: &[f64], w: &[f64]) -> Vec<f64> {
    let r2 = base.iter().map(|x| x * x).sum::<f64>();
    if r2 == 0.0 {
        return vec![0.0; w.len()];
    }
    let nf = n as f64;
    let p = 4.0 / (nf - 2.0);
    let s = nf * (nf - 2.0) / 4.0 * r2.powf(p / 2.0);
    let along = base.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / r2;
    w.iter().zip(base).map(|(x, b)| s * (x + p * along * b)).collect()
}

/// Value and `|x| ∂_r` of a map on the sphere `|x| = radius`, mode by mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub value: ModeCoefficients,
    pub radial_derivative: ModeCoefficients,
}

impl BoundaryTrace {
    /// Trace of the flat-chart map `W = |x|^{-(n-2)/2} v` carried by the
    /// cylinder field `v` at node `i`; `t`-derivatives by fourth-order
    /// differences.
    pub fn from_cylinder(v: &ModeField, i: usize) -> Self {
        let m = (v.n as f64 - 2.0) / 2.0;
        let t = v.t(i);
        let pre = (m * t).exp();
        let mut value = v.slice(i);
        let mut radial_derivative = value.clone();
        let lo = i.saturating_sub(4);
        let hi = (i + 5).min(v.nodes);
        for mode in 0..v.modes() {
            for c in 0..v.dim {
                let y: Vec<f64> = (lo..hi).map(|j| v.get(j, mode, c)).collect();
                let dy = crate::num::first_derivative4(&y, v.step)[i - lo];
                let slot = mode * v.dim + c;
                value.coeffs[slot] = pre * y[i - lo];
                radial_derivative.coeffs[slot] = pre * (-dy - m * y[i - lo]);
            }
        }
        Self { value, radial_derivative }
    }
}

/// Failure of [`damped_picard`].
#[derive(Debug, Clone, PartialEq)]
pub enum PicardFailure<E> {
    Map(E),
    NonContractive(f64),
    NoConvergence { iterations: usize, update: f64 },
}

/// Iterates `x <- (1 - θ) x + θ T(x)` until the update norm drops to `tol`.
/// The damping `θ` halves from the second update in a row that fails to
/// shrink; six such updates in a row abort.
pub fn damped_picard<E>(
    init: ModeField,
    mut map: impl FnMut(&ModeField) -> Result<ModeField, E>,
    norm: impl Fn(&ModeField) -> f64,
    tol: f64,
    max_iterations: usize,
) -> Result<(ModeField, FixedPointReport), PicardFailure<E>> {
    let mut x = init;
    let mut report = FixedPointReport { damping: 1.0, ..Default::default() };
    let mut rising = 0;
    for it in 1..=max_iterations {
        let next = map(&x).map_err(PicardFailure::Map)?;
        let step = next.add(&x.scale(-1.0)).scale(report.damping);
        let update = norm(&step);
        x = x.add(&step);
        report.iterations = it;
        if let Some(&prev) = report.updates.last() {
            if prev > 0.0 {
                let ratio = update / prev;
                report.contraction = report.contraction.max(ratio);
                if ratio >= 1.0 {
                    rising += 1;
                    if rising >= 2 {
                        report.damping *= 0.5;
                    }
                    if rising >= 6 {
                        return Err(PicardFailure::NonContractive(ratio));
                    }
                } else {
                    rising = 0;
                }
            }
        }
        report.updates.push(update);
        if update <= tol {
            return Ok((x, report));
        }
    }
    let update = report.updates.last().copied().unwrap_or(f64::INFINITY);
    Err(PicardFailure::NoConvergence { iterations: max_iterations, update })
}

/// `2 tan(θ/2)`: chart radius of the geodesic sphere of radius `θ` about the pole.
pub fn chart_radius(theta: f64) -> f64 {
    2.0 * (0.5 * theta).tan()
}

/// Inverse of [`chart_radius`].
pub fn geodesic_radius(y: f64) -> f64 {
    2.0 * (0.5 * y).atan()
}
