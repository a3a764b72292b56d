//! Sampled fields on uniform grids in the cylindrical variable `t = -log|x|`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::spectral::{mode_count, AngularGrid, ModeCoefficients, SpectralError};

/// `dim`-vector samples on a uniform grid `t0, t0 + step, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderFunction {
    pub t0: f64,
    pub step: f64,
    pub dim: usize,
    /// Node-major: `values[i * dim + c]`.
    pub values: Vec<f64>,
}

impl CylinderFunction {
    pub fn zeros(t0: f64, step: f64, nodes: usize, dim: usize) -> Self {
        Self { t0, step, dim, values: vec![0.0; nodes * dim] }
    }

    pub fn from_fn(t0: f64, step: f64, nodes: usize, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(nodes * dim);
        for i in 0..nodes {
            let v = f(t0 + i as f64 * step);
            assert_eq!(v.len(), dim);
            values.extend_from_slice(&v);
        }
        Self { t0, step, dim, values }
    }

    pub fn scalar(t0: f64, step: f64, values: Vec<f64>) -> Self {
        Self { t0, step, dim: 1, values }
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / self.dim.max(1)
    }

    pub fn t(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.step
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.nodes().saturating_sub(1))
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        (0..self.nodes()).map(|i| self.values[i * self.dim + c]).collect()
    }

    pub fn magnitude(&self, i: usize) -> f64 {
        self.at(i).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn sup(&self) -> f64 {
        (0..self.nodes()).map(|i| self.magnitude(i)).fold(0.0, f64::max)
    }

    /// Index of the node nearest to `t`, clamped to the grid.
    pub fn nearest(&self, t: f64) -> usize {
        let i = ((t - self.t0) / self.step).round();
        (i.max(0.0) as usize).min(self.nodes() - 1)
    }
}

/// Samples on a radial log grid times a set of angular sample points:
/// a function on a punctured ball or an annular region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialField {
    pub t0: f64,
    pub step: f64,
    pub nodes: usize,
    pub angles: usize,
    pub dim: usize,
    /// `values[(i * angles + a) * dim + c]`.
    pub values: Vec<f64>,
}

impl RadialField {
    pub fn zeros(t0: f64, step: f64, nodes: usize, angles: usize, dim: usize) -> Self {
        Self { t0, step, nodes, angles, dim, values: vec![0.0; nodes * angles * dim] }
    }

    /// A radial scalar field `f(|x|)` with a single angular sample.
    pub fn radial(t0: f64, step: f64, nodes: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..nodes).map(|i| f((-(t0 + i as f64 * step)).exp())).collect();
        Self { t0, step, nodes, angles: 1, dim: 1, values }
    }

    pub fn t(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.step
    }

    pub fn get(&self, i: usize, a: usize, c: usize) -> f64 {
        self.values[(i * self.angles + a) * self.dim + c]
    }

    pub fn set(&mut self, i: usize, a: usize, c: usize, v: f64) {
        self.values[(i * self.angles + a) * self.dim + c] = v;
    }

    /// The samples along one ray and component.
    pub fn ray(&self, a: usize, c: usize) -> Vec<f64> {
        (0..self.nodes).map(|i| self.get(i, a, c)).collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
        out
    }
}

/// Per-mode radial profiles: the coefficient of every spherical harmonic up
/// to level `k_max` as a function of `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeField {
    pub n: u32,
    pub k_max: usize,
    pub dim: usize,
    pub t0: f64,
    pub step: f64,
    pub nodes: usize,
    /// `values[(i * modes + m) * dim + c]`.
    pub values: Vec<f64>,
}

impl ModeField {
    pub fn zeros(n: u32, k_max: usize, dim: usize, t0: f64, step: f64, nodes: usize) -> Self {
        let modes = mode_count(k_max, n);
        Self { n, k_max, dim, t0, step, nodes, values: vec![0.0; nodes * modes * dim] }
    }

    pub fn modes(&self) -> usize {
        mode_count(self.k_max, self.n)
    }

    pub fn t(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.step
    }

    pub fn get(&self, i: usize, m: usize, c: usize) -> f64 {
        self.values[(i * self.modes() + m) * self.dim + c]
    }

    pub fn set(&mut self, i: usize, m: usize, c: usize, v: f64) {
        let s = (i * self.modes() + m) * self.dim + c;
        self.values[s] = v;
    }

    /// The `dim`-vector profile of one mode.
    pub fn profile(&self, m: usize) -> CylinderFunction {
        let mut out = CylinderFunction::zeros(self.t0, self.step, self.nodes, self.dim);
        for i in 0..self.nodes {
            for c in 0..self.dim {
                out.values[i * self.dim + c] = self.get(i, m, c);
            }
        }
        out
    }

    pub fn set_profile(&mut self, m: usize, p: &CylinderFunction) {
        assert_eq!(p.nodes(), self.nodes);
        for i in 0..self.nodes {
            for c in 0..self.dim {
                self.set(i, m, c, p.values[i * p.dim + c]);
            }
        }
    }

    /// Coefficients at node `i`.
    pub fn slice(&self, i: usize) -> ModeCoefficients {
        let w = self.modes() * self.dim;
        ModeCoefficients {
            n: self.n,
            k_max: self.k_max,
            dim: self.dim,
            radius: (-self.t(i)).exp(),
            coeffs: self.values[i * w..(i + 1) * w].to_vec(),
        }
    }

    pub fn set_slice(&mut self, i: usize, c: &ModeCoefficients) {
        let w = self.modes() * self.dim;
        self.values[i * w..(i + 1) * w].copy_from_slice(&c.coeffs);
    }

    /// Root-sum-square over modes and components at each node.
    pub fn magnitudes(&self) -> CylinderFunction {
        let w = self.modes() * self.dim;
        let vals = (0..self.nodes)
            .map(|i| self.values[i * w..(i + 1) * w].iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        CylinderFunction::scalar(self.t0, self.step, vals)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
        out
    }

    /// Point values on an angular grid.
    pub fn synthesize(&self, grid: &AngularGrid) -> Result<RadialField, SpectralError> {
        let mut out = RadialField::zeros(self.t0, self.step, self.nodes, grid.len(), self.dim);
        let stride = grid.len() * self.dim;
        for i in 0..self.nodes {
            let s = grid.synthesize(&self.slice(i))?;
            out.values[i * stride..(i + 1) * stride].copy_from_slice(&s);
        }
        Ok(out)
    }

    /// Projection of point values on an angular grid.
    pub fn decompose(f: &RadialField, grid: &AngularGrid, n: u32, k_max: usize) -> Result<Self, SpectralError> {
        let mut out = Self::zeros(n, k_max, f.dim, f.t0, f.step, f.nodes);
        let stride = f.angles * f.dim;
        for i in 0..f.nodes {
            let c = grid.decompose(&f.values[i * stride..(i + 1) * stride], f.dim, k_max, (-f.t(i)).exp())?;
            out.set_slice(i, &c);
        }
        Ok(out)
    }
}
