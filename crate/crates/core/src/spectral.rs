//! Spherical-harmonic bookkeeping on `S^{n-1}`.
//!
//! Modes are stored level-major: level `k` occupies `mult(k, n)` consecutive
//! slots. Surface quadrature (Gauss–Legendre in `cos θ` times a uniform `φ`
//! grid, real orthonormal harmonics) exists for `n = 3` only; `n = 4, 5` are
//! handled purely through mode indices.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::num::gauss_legendre;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("surface quadrature is only available on S^2 (n = 3), got n = {0}")]
    NoQuadrature(u32),
    #[error("quadrature grid ({theta} x {phi}) too coarse for level {k_max}")]
    Resolution { theta: usize, phi: usize, k_max: usize },
    #[error("sample count {got} does not match grid size {expected}")]
    Samples { expected: usize, got: usize },
    #[error("coefficient layouts differ")]
    Layout,
}

/// `k (n - 2 + k)`, the `k`-th eigenvalue of `-Δ` on `S^{n-1}`.
pub fn eigenvalue(k: usize, n: u32) -> f64 {
    let k = k as f64;
    k * (n as f64 - 2.0 + k)
}

fn binomial(a: usize, b: usize) -> usize {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    (0..b).fold(1usize, |acc, i| acc * (a - i) / (i + 1))
}

/// Dimension of the level-`k` eigenspace on `S^{n-1}`.
pub fn multiplicity(k: usize, n: u32) -> usize {
    let n = n as usize;
    if k == 0 {
        return 1;
    }
    binomial(k + n - 1, n - 1) - binomial(k + n - 3, n - 1)
}

/// Number of modes with level at most `k_max`.
pub fn mode_count(k_max: usize, n: u32) -> usize {
    (0..=k_max).map(|k| multiplicity(k, n)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeIndex {
    pub level: usize,
    pub index: usize,
}

/// Which of the three frequency classes a level belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrequencyClass {
    Constants,
    Coordinates,
    High,
}

impl FrequencyClass {
    pub fn of(level: usize) -> Self {
        match level {
            0 => Self::Constants,
            1 => Self::Coordinates,
            _ => Self::High,
        }
    }

    /// Range of the flat eigenfunction index `j` (ordered by eigenvalue)
    /// covered by this class on `S^{n-1}`: `0`, `1..=n`, `n+1..`.
    pub fn flat_range(self, n: u32) -> (usize, Option<usize>) {
        let n = n as usize;
        match self {
            Self::Constants => (0, Some(0)),
            Self::Coordinates => (1, Some(n)),
            Self::High => (n + 1, None),
        }
    }
}

/// Per-mode, per-component coefficients of a `dim`-vector function on the
/// sphere of radius `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCoefficients {
    pub n: u32,
    pub k_max: usize,
    pub dim: usize,
    pub radius: f64,
    /// `coeffs[mode * dim + c]`.
    pub coeffs: Vec<f64>,
}

impl ModeCoefficients {
    pub fn zeros(n: u32, k_max: usize, dim: usize, radius: f64) -> Self {
        Self { n, k_max, dim, radius, coeffs: vec![0.0; mode_count(k_max, n) * dim] }
    }

    pub fn modes(&self) -> usize {
        mode_count(self.k_max, self.n)
    }

    /// Flat slot of `(level, index)`.
    pub fn slot(&self, m: ModeIndex) -> usize {
        mode_count(m.level, self.n) - multiplicity(m.level, self.n) + m.index
    }

    pub fn index_of(&self, slot: usize) -> ModeIndex {
        let mut start = 0;
        for k in 0..=self.k_max {
            let m = multiplicity(k, self.n);
            if slot < start + m {
                return ModeIndex { level: k, index: slot - start };
            }
            start += m;
        }
        panic!("slot {slot} beyond k_max");
    }

    pub fn get(&self, m: ModeIndex, c: usize) -> f64 {
        self.coeffs[self.slot(m) * self.dim + c]
    }

    pub fn set(&mut self, m: ModeIndex, c: usize, v: f64) {
        let s = self.slot(m) * self.dim + c;
        self.coeffs[s] = v;
    }

    /// Coefficient block (all modes and components) of one level.
    pub fn level_block(&self, k: usize) -> &[f64] {
        let end = mode_count(k, self.n) * self.dim;
        let start = end - multiplicity(k, self.n) * self.dim;
        &self.coeffs[start..end]
    }

    pub fn level_block_mut(&mut self, k: usize) -> &mut [f64] {
        let end = mode_count(k, self.n) * self.dim;
        let start = end - multiplicity(k, self.n) * self.dim;
        &mut self.coeffs[start..end]
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Whether any level below `k` carries a coefficient above `tol`.
    pub fn has_levels_below(&self, k: usize, tol: f64) -> bool {
        (0..k.min(self.k_max + 1)).any(|l| self.level_block(l).iter().any(|x| x.abs() > tol))
    }

    fn keep_levels(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut out = self.clone();
        for k in 0..=self.k_max {
            if !keep(k) {
                out.level_block_mut(k).iter_mut().for_each(|x| *x = 0.0);
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|x| *x *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self, SpectralError> {
        if self.coeffs.len() != other.coeffs.len() || self.dim != other.dim {
            return Err(SpectralError::Layout);
        }
        let mut out = self.clone();
        out.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, b)| *a += b);
        Ok(out)
    }
}

/// Zeroes levels 0 and 1.
pub fn project_high(c: &ModeCoefficients) -> ModeCoefficients {
    c.keep_levels(|k| k >= 2)
}

/// Zeroes levels 2 and above.
pub fn project_low(c: &ModeCoefficients) -> ModeCoefficients {
    c.keep_levels(|k| k < 2)
}

/// Product quadrature on `S^2` with the real orthonormal harmonics tabulated.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    pub k_max: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Unit vectors of the sample points, theta-major.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// `basis[point * modes + mode]`.
    basis: Vec<f64>,
}

/// Fully normalized real harmonic `Y_{l,m}` at `(cos θ, φ)`, `m ∈ [-l, l]`.
pub fn real_harmonic(l: usize, m: i64, x: f64, phi: f64) -> f64 {
    let am = m.unsigned_abs() as usize;
    let s = (1.0 - x * x).max(0.0).sqrt();
    // P_am^am then upward recurrence in l
    let mut pmm = 1.0;
    for i in 0..am {
        pmm *= -((2 * i + 1) as f64) * s;
    }
    let plm = if l == am {
        pmm
    } else {
        let mut p0 = pmm;
        let mut p1 = x * (2 * am + 1) as f64 * pmm;
        for ll in am + 2..=l {
            let p2 = ((2 * ll - 1) as f64 * x * p1 - (ll + am - 1) as f64 * p0) / (ll - am) as f64;
            p0 = p1;
            p1 = p2;
        }
        p1
    };
    // (l - m)! / (l + m)!
    let mut ratio = 1.0;
    for k in (l - am + 1)..=(l + am) {
        ratio /= k as f64;
    }
    let norm = ((2 * l + 1) as f64 / (4.0 * core::f64::consts::PI) * ratio).sqrt();
    match m.signum() {
        0 => norm * plm,
        1 => core::f64::consts::SQRT_2 * norm * plm * (am as f64 * phi).cos(),
        _ => core::f64::consts::SQRT_2 * norm * plm * (am as f64 * phi).sin(),
    }
}

impl SphereGrid {
    /// Smallest grid integrating products of level-`k_max` harmonics exactly.
    pub fn for_level(k_max: usize) -> Self {
        Self::new(k_max, k_max + 1, 2 * k_max + 2).expect("minimal grid is exact")
    }

    pub fn new(k_max: usize, n_theta: usize, n_phi: usize) -> Result<Self, SpectralError> {
        if n_theta < k_max + 1 || n_phi < 2 * k_max + 1 {
            return Err(SpectralError::Resolution { theta: n_theta, phi: n_phi, k_max });
        }
        let (x, w) = gauss_legendre(n_theta);
        let modes = mode_count(k_max, 3);
        let mut points = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let mut basis = Vec::with_capacity(n_theta * n_phi * modes);
        let dphi = 2.0 * core::f64::consts::PI / n_phi as f64;
        for i in 0..n_theta {
            let s = (1.0 - x[i] * x[i]).sqrt();
            for j in 0..n_phi {
                let phi = j as f64 * dphi;
                points.push([s * phi.cos(), s * phi.sin(), x[i]]);
                weights.push(w[i] * dphi);
                for l in 0..=k_max {
                    for m in -(l as i64)..=(l as i64) {
                        basis.push(real_harmonic(l, m, x[i], phi));
                    }
                }
            }
        }
        Ok(Self { k_max, n_theta, n_phi, points, weights, basis })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn modes(&self) -> usize {
        mode_count(self.k_max, 3)
    }

    /// Harmonic value of flat mode `mode` at sample `point`.
    pub fn basis(&self, point: usize, mode: usize) -> f64 {
        self.basis[point * self.modes() + mode]
    }

    /// Quadrature projection of point-major samples (`samples[p * dim + c]`).
    pub fn decompose(&self, samples: &[f64], dim: usize, k_max: usize, radius: f64) -> Result<ModeCoefficients, SpectralError> {
        if k_max > self.k_max {
            return Err(SpectralError::Resolution { theta: self.n_theta, phi: self.n_phi, k_max });
        }
        if samples.len() != self.len() * dim {
            return Err(SpectralError::Samples { expected: self.len() * dim, got: samples.len() });
        }
        let mut out = ModeCoefficients::zeros(3, k_max, dim, radius);
        let modes = out.modes();
        for p in 0..self.len() {
            let w = self.weights[p];
            for mode in 0..modes {
                let y = w * self.basis(p, mode);
                for c in 0..dim {
                    out.coeffs[mode * dim + c] += y * samples[p * dim + c];
                }
            }
        }
        Ok(out)
    }

    pub fn synthesize(&self, c: &ModeCoefficients) -> Result<Vec<f64>, SpectralError> {
        if c.n != 3 || c.k_max > self.k_max {
            return Err(SpectralError::Resolution { theta: self.n_theta, phi: self.n_phi, k_max: c.k_max });
        }
        let modes = c.modes();
        let mut out = vec![0.0; self.len() * c.dim];
        for p in 0..self.len() {
            for mode in 0..modes {
                let y = self.basis(p, mode);
                for k in 0..c.dim {
                    out[p * c.dim + k] += y * c.coeffs[mode * c.dim + k];
                }
            }
        }
        Ok(out)
    }

    /// Discrete `L²` norm of point-major samples.
    pub fn l2_norm(&self, samples: &[f64], dim: usize) -> f64 {
        (0..self.len())
            .map(|p| self.weights[p] * (0..dim).map(|c| samples[p * dim + c].powi(2)).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

/// `|S^{n-1}|`.
pub fn sphere_area(n: u32) -> f64 {
    let pi = core::f64::consts::PI;
    match n {
        2 => 2.0 * pi,
        3 => 4.0 * pi,
        _ => 2.0 * pi / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}

/// Angular sample points used for pointwise (nonlinear) operations on mode
/// fields: a single point for purely radial fields in any dimension, or the
/// `S^2` quadrature.
#[derive(Debug, Clone, PartialEq)]
pub enum AngularGrid {
    Radial { n: u32 },
    Sphere(SphereGrid),
}

impl AngularGrid {
    /// Radial grid for `k_max = 0`, otherwise a product grid exact for
    /// quadratic products (`n = 3` only).
    pub fn for_modes(n: u32, k_max: usize) -> Result<Self, SpectralError> {
        if k_max == 0 {
            return Ok(Self::Radial { n });
        }
        if n != 3 {
            return Err(SpectralError::NoQuadrature(n));
        }
        Ok(Self::Sphere(SphereGrid::new(k_max, 2 * k_max + 2, 4 * k_max + 4)?))
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Radial { .. } => 1,
            Self::Sphere(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unit vector of sample `a`, when the grid has angular resolution.
    pub fn point(&self, a: usize) -> Option<[f64; 3]> {
        match self {
            Self::Radial { .. } => None,
            Self::Sphere(g) => Some(g.points[a]),
        }
    }

    pub fn synthesize(&self, c: &ModeCoefficients) -> Result<Vec<f64>, SpectralError> {
        match self {
            Self::Radial { n } => {
                if c.k_max != 0 {
                    return Err(SpectralError::Resolution { theta: 1, phi: 1, k_max: c.k_max });
                }
                let y0 = 1.0 / sphere_area(*n).sqrt();
                Ok(c.coeffs.iter().map(|x| x * y0).collect())
            }
            Self::Sphere(g) => g.synthesize(c),
        }
    }

    pub fn decompose(&self, samples: &[f64], dim: usize, k_max: usize, radius: f64) -> Result<ModeCoefficients, SpectralError> {
        match self {
            Self::Radial { n } => {
                if k_max != 0 {
                    return Err(SpectralError::Resolution { theta: 1, phi: 1, k_max });
                }
                if samples.len() != dim {
                    return Err(SpectralError::Samples { expected: dim, got: samples.len() });
                }
                let s = sphere_area(*n).sqrt();
                Ok(ModeCoefficients { n: *n, k_max: 0, dim, radius, coeffs: samples.iter().map(|x| x * s).collect() })
            }
            Self::Sphere(g) => g.decompose(samples, dim, k_max, radius),
        }
    }
}

/// Decomposes boundary samples on the `S^2` quadrature grid.
pub fn decompose_boundary(grid: &SphereGrid, samples: &[f64], dim: usize, k_max: usize, n: u32) -> Result<ModeCoefficients, SpectralError> {
    if n != 3 {
        return Err(SpectralError::NoQuadrature(n));
    }
    grid.decompose(samples, dim, k_max, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_and_multiplicities() {
        assert_eq!(eigenvalue(0, 5), 0.0);
        assert_eq!(eigenvalue(1, 3), 2.0);
        assert_eq!(eigenvalue(2, 3), 6.0);
        assert_eq!(multiplicity(1, 4), 4);
        assert_eq!(multiplicity(2, 3), 5);
        assert_eq!(multiplicity(2, 4), 9);
        assert_eq!(multiplicity(2, 5), 14);
        assert_eq!(mode_count(3, 3), 16);
    }

    #[test]
    fn frequency_classes_match_flat_indices() {
        assert_eq!(FrequencyClass::Coordinates.flat_range(3), (1, Some(3)));
        assert_eq!(FrequencyClass::High.flat_range(4).0, 5);
        assert_eq!(FrequencyClass::of(7), FrequencyClass::High);
    }

    #[test]
    fn gram_matrix_is_identity() {
        let g = SphereGrid::for_level(5);
        let m = g.modes();
        for a in 0..m {
            for b in 0..m {
                let s: f64 = (0..g.len()).map(|p| g.weights[p] * g.basis(p, a) * g.basis(p, b)).sum();
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((s - e).abs() < 1e-12, "({a},{b}) -> {s}");
            }
        }
    }

    #[test]
    fn constant_goes_to_level_zero() {
        let g = SphereGrid::for_level(4);
        let c = 1.7;
        let samples = vec![c; g.len()];
        let coeffs = decompose_boundary(&g, &samples, 1, 4, 3).unwrap();
        assert!((coeffs.coeffs[0] - c * (4.0 * core::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!(coeffs.coeffs[1..].iter().all(|x| x.abs() < 1e-12));
        assert!(project_high(&coeffs).l2_norm() < 1e-12);
    }

    #[test]
    fn coordinate_functions_are_low() {
        let g = SphereGrid::for_level(3);
        let samples: Vec<f64> = g.points.iter().map(|p| 2.0 * p[0] - p[2]).collect();
        let c = decompose_boundary(&g, &samples, 1, 3, 3).unwrap();
        assert!(project_high(&c).l2_norm() < 1e-12);
        assert!(project_low(&c).add(&c.scaled(-1.0)).unwrap().l2_norm() < 1e-12);
        assert!(c.level_block(1).iter().any(|x| x.abs() > 0.1));
    }

    #[test]
    fn level_three_is_fixed_by_high_projection() {
        let mut c = ModeCoefficients::zeros(3, 4, 2, 1.0);
        c.set(ModeIndex { level: 3, index: 2 }, 1, 0.4);
        assert_eq!(project_high(&c), c);
        assert!(project_low(&c).l2_norm() == 0.0);
    }

    #[test]
    fn other_dimensions_are_mode_indexed_only() {
        let g = SphereGrid::for_level(2);
        assert_eq!(decompose_boundary(&g, &vec![0.0; g.len()], 1, 2, 4), Err(SpectralError::NoQuadrature(4)));
        let c = ModeCoefficients::zeros(5, 3, 1, 1.0);
        assert_eq!(c.modes(), 1 + 5 + 14 + 30);
        assert_eq!(c.index_of(6), ModeIndex { level: 2, index: 0 });
    }

    #[test]
    fn sphere_areas() {
        let pi = core::f64::consts::PI;
        assert!((sphere_area(4) - 2.0 * pi * pi).abs() < 1e-12);
        assert!((sphere_area(5) - 8.0 * pi * pi / 3.0).abs() < 1e-12);
    }

    #[test]
    fn radial_grid_round_trips_constants() {
        let g = AngularGrid::for_modes(5, 0).unwrap();
        let c = g.decompose(&[2.0, -1.0], 2, 0, 1.0).unwrap();
        assert_eq!(g.synthesize(&c).unwrap().len(), 2);
        assert!((g.synthesize(&c).unwrap()[0] - 2.0).abs() < 1e-14);
        assert!(AngularGrid::for_modes(4, 2).is_err());
    }

    #[test]
    fn too_coarse_grid_rejected() {
        assert!(SphereGrid::new(4, 3, 20).is_err());
        let g = SphereGrid::for_level(2);
        assert!(g.decompose(&vec![0.0; g.len()], 1, 3, 1.0).is_err());
    }
}
