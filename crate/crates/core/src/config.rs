//! Model configuration: dimension, direction, amplitude and potential.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("dimension n = {0} outside the supported range 3..=5")]
    Dimension(u32),
    #[error("number of equations d must be at least 1")]
    NoEquations,
    #[error("direction has {got} components, expected d = {expected}")]
    DirectionLength { expected: usize, got: usize },
    #[error("direction must be a unit vector (|lambda| = {0})")]
    DirectionNotUnit(f64),
    #[error("direction component {0} is negative")]
    DirectionNegative(usize),
    #[error("amplitude kappa must be positive (got {0})")]
    Amplitude(f64),
    #[error("amplitude kappa = {kappa} is resonant with the sphere eigenvalue at level {level}")]
    Resonant { kappa: f64, level: usize },
    #[error("potential perturbation must be a symmetric {0}x{0} matrix")]
    Perturbation(usize),
    #[error("potential perturbation does not annihilate the direction (|B lambda| = {0})")]
    PerturbationOnDirection(f64),
    #[error("grid field `{0}` is invalid")]
    Grid(&'static str),
    #[error("parameter `{0}` is outside its admissible window")]
    Window(&'static str),
}

/// Matrix potential `A = mu_a I + B` with `B` symmetric and `B lambda = 0`.
///
/// `B` is constant in the chart, which keeps the potential hypothesis for
/// `n = 3` only; for `n = 4, 5` a decaying `B` would be required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub mu_a: f64,
    /// Row-major `d x d` perturbation.
    pub perturbation: Vec<f64>,
}

impl PotentialSpec {
    /// The coefficient making `kappa * lambda` a solution on the round sphere.
    pub fn trivial_coefficient(n: u32, kappa: f64) -> f64 {
        let nf = n as f64;
        nf * (nf - 2.0) / 4.0 * kappa.powf(4.0 / (nf - 2.0))
    }

    /// `mu_a` from [`Self::trivial_coefficient`] and `B = shift (I - lambda lambda^T)`.
    pub fn for_trivial_solution(n: u32, kappa: f64, lambda: &[f64], shift: f64) -> Self {
        let d = lambda.len();
        let mut b = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let id = if i == j { 1.0 } else { 0.0 };
                b[i * d + j] = shift * (id - lambda[i] * lambda[j]);
            }
        }
        Self { mu_a: Self::trivial_coefficient(n, kappa), perturbation: b }
    }

    pub fn dim(&self) -> usize {
        (self.perturbation.len() as f64).sqrt().round() as usize
    }

    pub fn perturbation_entry(&self, i: usize, j: usize) -> f64 {
        self.perturbation[i * self.dim() + j]
    }

    /// `A(x)` as a row-major matrix (constant in the chart).
    pub fn evaluate(&self) -> Vec<f64> {
        let d = self.dim();
        let mut a = self.perturbation.clone();
        for i in 0..d {
            a[i * d + i] += self.mu_a;
        }
        a
    }

    fn validate(&self, lambda: &[f64]) -> Result<(), ConfigError> {
        let d = lambda.len();
        if self.perturbation.len() != d * d {
            return Err(ConfigError::Perturbation(d));
        }
        for i in 0..d {
            for j in 0..i {
                if (self.perturbation_entry(i, j) - self.perturbation_entry(j, i)).abs() > 1e-12 {
                    return Err(ConfigError::Perturbation(d));
                }
            }
        }
        let bl: f64 = (0..d)
            .map(|i| {
                let s: f64 = (0..d).map(|j| self.perturbation_entry(i, j) * lambda[j]).sum();
                s * s
            })
            .sum::<f64>()
            .sqrt();
        if bl > 1e-10 {
            return Err(ConfigError::PerturbationOnDirection(bl));
        }
        Ok(())
    }
}

/// Discretization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Step in the cylindrical variable `t = -log|x|`.
    pub step: f64,
    /// Highest spherical-harmonic level kept.
    pub k_max: usize,
    /// Length of the interior cylinder beyond the deepest cutoff.
    pub interior_tail: f64,
    /// Length of the exterior cylinder towards the antipode.
    pub exterior_span: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { step: 1e-3, k_max: 6, interior_tail: 8.0, exterior_span: 16.0 }
    }
}

/// Full model setup shared by every solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: u32,
    pub d: usize,
    pub lambda: Vec<f64>,
    pub kappa: f64,
    pub potential: PotentialSpec,
    pub grid: GridSpec,
    /// Exponent in `r_eps = eps^s`.
    pub s_exponent: f64,
    /// Interior weight.
    pub mu_weight: f64,
    /// Exterior weight.
    pub nu_weight: f64,
    /// Chart radius bounding the translation parameter.
    pub r0: f64,
    /// Outer radius of the exterior annulus.
    pub r1: f64,
    /// Inner radius of the Green-function cutoff (one on `3 r_g`, zero past `4 r_g`).
    pub green_cutoff: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let lambda = vec![0.6, 0.8];
        let kappa = 0.8;
        Self {
            n: 3,
            d: 2,
            potential: PotentialSpec::for_trivial_solution(3, kappa, &lambda, 1.0),
            lambda,
            kappa,
            grid: GridSpec::default(),
            s_exponent: 1.3,
            mu_weight: 1.1,
            nu_weight: -1.5,
            r0: 0.5,
            r1: 0.4,
            green_cutoff: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// Exponent `4 / (n - 2)` of the nonlinearity.
    pub fn power(&self) -> f64 {
        4.0 / (self.nf() - 2.0)
    }

    /// Coefficient `n kappa^{4/(n-2)}` of the direction-parallel linearization.
    pub fn parallel_coefficient(&self) -> f64 {
        self.nf() * self.kappa.powf(self.power())
    }

    /// The `d_n` offset: 0 for `n = 3`, 1 otherwise.
    pub fn d_n(&self) -> f64 {
        if self.n == 3 { 0.0 } else { 1.0 }
    }

    /// Open window for `s` in `r_eps = eps^s`.
    pub fn s_window(&self) -> (f64, f64) {
        let dn = self.d_n();
        let nf = self.nf();
        (1.0 / (dn + 24.0 / 25.0), 4.0 / (dn - 2.0 + 1.5 * nf))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(3..=5).contains(&self.n) {
            return Err(ConfigError::Dimension(self.n));
        }
        if self.d == 0 {
            return Err(ConfigError::NoEquations);
        }
        if self.lambda.len() != self.d {
            return Err(ConfigError::DirectionLength { expected: self.d, got: self.lambda.len() });
        }
        let norm = self.lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(ConfigError::DirectionNotUnit(norm));
        }
        if let Some(i) = self.lambda.iter().position(|&x| x < 0.0) {
            return Err(ConfigError::DirectionNegative(i));
        }
        if !(self.kappa > 0.0) {
            return Err(ConfigError::Amplitude(self.kappa));
        }
        if let Some(level) = resonant_level(self.n, self.parallel_coefficient(), 1e-9) {
            return Err(ConfigError::Resonant { kappa: self.kappa, level });
        }
        self.potential.validate(&self.lambda)?;
        let g = &self.grid;
        if !(g.step > 0.0 && g.step < 0.1) {
            return Err(ConfigError::Grid("step"));
        }
        if g.k_max < 2 {
            return Err(ConfigError::Grid("k_max"));
        }
        if !(g.interior_tail > 0.0) {
            return Err(ConfigError::Grid("interior_tail"));
        }
        if !(g.exterior_span > 0.0) {
            return Err(ConfigError::Grid("exterior_span"));
        }
        let (lo, hi) = self.s_window();
        if !(self.s_exponent > lo && self.s_exponent < hi) {
            return Err(ConfigError::Window("s_exponent"));
        }
        if !(self.r0 > 0.0 && self.r0 < 1.0) {
            return Err(ConfigError::Window("r0"));
        }
        if !(self.r1 > 0.0 && self.r1 <= 1.0) {
            return Err(ConfigError::Window("r1"));
        }
        if !(self.green_cutoff > 0.0 && 4.0 * self.green_cutoff <= 1.0) {
            return Err(ConfigError::Window("green_cutoff"));
        }
        Ok(())
    }
}

/// Sphere eigenvalue `k (k + n - 1)` of `-Delta` on the round `S^n`.
pub fn sphere_eigenvalue(n: u32, k: usize) -> f64 {
    let k = k as f64;
    k * (k + n as f64 - 1.0)
}

/// The first level `k` whose sphere eigenvalue lies within `tol` of `coefficient`.
pub fn resonant_level(n: u32, coefficient: f64, tol: f64) -> Option<usize> {
    (0..).take_while(|&k| sphere_eigenvalue(n, k) <= coefficient + 1.0).find(|&k| {
        (sphere_eigenvalue(n, k) - coefficient).abs() <= tol * (1.0 + coefficient.abs())
    })
}

/// Which weighted space a weight exponent is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    Ball,
    Exterior,
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub exponent: f64,
    /// Derivative order 0..=2.
    pub order: u8,
    /// Hölder exponent in (0, 1); zero drops the seminorm.
    pub holder: f64,
}

impl WeightSpec {
    pub fn new(kind: WeightKind, exponent: f64, order: u8) -> Self {
        Self { kind, exponent, order: order.min(2), holder: 0.0 }
    }

    pub fn with_holder(mut self, holder: f64) -> Self {
        self.holder = holder;
        self
    }

    /// Whether the exponent lies in the usual window for its kind; cylinder
    /// windows depend on the estimate and are always accepted here.
    pub fn admissible(&self, n: u32) -> bool {
        let nf = n as f64;
        match self.kind {
            WeightKind::Ball => self.exponent > 1.0 && self.exponent < 2.0,
            WeightKind::Exterior => self.exponent > 1.0 - nf && self.exponent < 2.0 - nf,
            WeightKind::Cylinder => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ModelConfig::default().validate().unwrap();
    }

    #[test]
    fn unit_amplitude_is_resonant_on_the_sphere() {
        let mut c = ModelConfig::default();
        c.kappa = 1.0;
        c.potential = PotentialSpec::for_trivial_solution(3, 1.0, &c.lambda, 1.0);
        assert_eq!(c.potential.mu_a, 0.75);
        assert_eq!(c.validate(), Err(ConfigError::Resonant { kappa: 1.0, level: 1 }));
    }

    #[test]
    fn rejects_bad_direction_and_potential() {
        let c = ModelConfig { lambda: vec![0.6, 0.6], ..ModelConfig::default() };
        assert!(matches!(c.validate(), Err(ConfigError::DirectionNotUnit(_))));
        let mut c = ModelConfig::default();
        c.potential.perturbation = vec![1.0, 0.0, 0.0, 0.0];
        assert!(matches!(c.validate(), Err(ConfigError::PerturbationOnDirection(_))));
        let mut c = ModelConfig::default();
        c.potential.perturbation[1] += 0.1;
        assert!(matches!(c.validate(), Err(ConfigError::Perturbation(2))));
    }

    #[test]
    fn trivial_coefficient_and_parallel_coefficient() {
        let c = ModelConfig::default();
        assert!((c.potential.mu_a - 0.75 * 0.8f64.powi(4)).abs() < 1e-15);
        assert!((c.parallel_coefficient() - 1.2288).abs() < 1e-12);
    }

    #[test]
    fn s_window_for_three_dimensions() {
        let (lo, hi) = ModelConfig::default().s_window();
        assert!((lo - 25.0 / 24.0).abs() < 1e-14);
        assert!((hi - 1.6).abs() < 1e-14);
    }
}
