//! Small numerical kernels shared by the solvers.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// One classical RK4 step for `y' = f(t, y)`.
pub fn rk4_step<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    h: f64,
) -> [f64; N] {
    let axpy = |a: f64, k: &[f64; N]| {
        let mut out = *y;
        for i in 0..N {
            out[i] += a * k[i];
        }
        out
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(0.5 * h, &k1));
    let k3 = f(t + 0.5 * h, &axpy(0.5 * h, &k2));
    let k4 = f(t + h, &axpy(h, &k3));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("banded system is singular at row {row}")]
pub struct SingularBand {
    pub row: usize,
}

/// General banded matrix with `kl` sub- and `ku` super-diagonals, solved by
/// LU with partial pivoting (the LAPACK `gbsv` layout).
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row-major band storage with kl extra columns for fill-in
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        // column offset relative to i - kl
        i * self.width + (j + self.kl - i)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i},{j}) outside band");
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i},{j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for (j, xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
                *yi += self.data[self.slot(i, j)] * xj;
            }
        }
        y
    }

    /// Solves `A x = b` in place of a copy; the matrix is consumed.
    pub fn solve(mut self, b: &[f64]) -> Result<Vec<f64>, SingularBand> {
        let n = self.n;
        let mut x = b.to_vec();
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        let ucap = self.kl + self.ku;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for i in k + 1..=last {
                let v = self.data[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-14 * scale {
                return Err(SingularBand { row: k });
            }
            let jmax = (k + ucap).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b2) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b2);
                }
                x.swap(k, p);
            }
            let piv = self.data[self.slot(k, k)];
            for i in k + 1..=last {
                let s = self.slot(i, k);
                let m = self.data[s] / piv;
                if m == 0.0 {
                    continue;
                }
                self.data[s] = 0.0;
                for j in k + 1..=jmax {
                    let kj = self.data[self.slot(k, j)];
                    let ij = self.slot(i, j);
                    self.data[ij] -= m * kj;
                }
                x[i] -= m * x[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + ucap).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=jmax {
                s -= self.data[self.slot(k, j)] * x[j];
            }
            x[k] = s / self.data[self.slot(k, k)];
        }
        Ok(x)
    }
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix with
/// diagonal `a` and off-diagonal `b` (Sturm sequence count).
fn sturm_count(a: &[f64], b: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = a[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..a.len() {
        let denom = if q == 0.0 { 1e-300 } else { q };
        q = a[i] - x - b[i - 1] * b[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `m` smallest eigenvalues (ascending) of a symmetric tridiagonal matrix.
pub fn tridiag_smallest_eigenvalues(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..a.len() {
        let r = if i > 0 { b[i - 1].abs() } else { 0.0 } + if i < b.len() { b[i].abs() } else { 0.0 };
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    (0..m.min(a.len()))
        .map(|k| {
            let (mut l, mut h) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (l + h);
                if sturm_count(a, b, mid) > k {
                    h = mid;
                } else {
                    l = mid;
                }
                if h - l <= 1e-15 * (1.0 + mid.abs()) {
                    break;
                }
            }
            0.5 * (l + h)
        })
        .collect()
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (core::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if m == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

/// Four-point Lagrange interpolation of uniformly spaced samples at the
/// midpoint between nodes `i` and `i + 1`.
pub fn midpoint_cubic(y: &[f64], i: usize) -> f64 {
    let n = y.len();
    assert!(i + 1 < n);
    if n < 4 {
        return 0.5 * (y[i] + y[i + 1]);
    }
    if i == 0 {
        (5.0 * y[0] + 15.0 * y[1] - 5.0 * y[2] + y[3]) / 16.0
    } else if i + 2 >= n {
        (y[n - 4] - 5.0 * y[n - 3] + 15.0 * y[n - 2] + 5.0 * y[n - 1]) / 16.0
    } else {
        (-y[i - 1] + 9.0 * y[i] + 9.0 * y[i + 1] - y[i + 2]) / 16.0
    }
}

/// Fourth-order second derivative of uniformly spaced samples, one-sided
/// near the ends.
pub fn second_derivative4(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    assert!(n >= 6, "need at least six samples");
    let h2 = h * h;
    (0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                (-y[i - 2] + 16.0 * y[i - 1] - 30.0 * y[i] + 16.0 * y[i + 1] - y[i + 2]) / (12.0 * h2)
            } else if i < 2 {
                let c = if i == 0 {
                    [45.0, -154.0, 214.0, -156.0, 61.0, -10.0]
                } else {
                    [10.0, -15.0, -4.0, 14.0, -6.0, 1.0]
                };
                (0..6).map(|k| c[k] * y[k]).sum::<f64>() / (12.0 * h2)
            } else {
                let from_end = n - 1 - i;
                let c = if from_end == 0 {
                    [45.0, -154.0, 214.0, -156.0, 61.0, -10.0]
                } else {
                    [10.0, -15.0, -4.0, 14.0, -6.0, 1.0]
                };
                let base = if from_end == 0 { 0 } else { 1 };
                (0..6).map(|k| c[k] * y[i + base - k]).sum::<f64>() / (12.0 * h2)
            }
        })
        .collect()
}

/// Fourth-order first derivative of uniformly spaced samples.
pub fn first_derivative4(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    assert!(n >= 5, "need at least five samples");
    (0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / (12.0 * h)
            } else if i < 2 {
                let c = if i == 0 { [-25.0, 48.0, -36.0, 16.0, -3.0] } else { [-3.0, -10.0, 18.0, -6.0, 1.0] };
                let base = i.min(1);
                (0..5).map(|k| c[k] * y[i - base + k]).sum::<f64>() / (12.0 * h)
            } else {
                let from_end = n - 1 - i;
                let c = if from_end == 0 { [-25.0, 48.0, -36.0, 16.0, -3.0] } else { [-3.0, -10.0, 18.0, -6.0, 1.0] };
                let base = from_end.min(1);
                -(0..5).map(|k| c[k] * y[i + base - k]).sum::<f64>() / (12.0 * h)
            }
        })
        .collect()
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Value and first two derivatives of a scalar function of one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Self { v, d1: 0.0, d2: 0.0 }
    }

    pub fn scale(self, c: f64) -> Jet {
        Jet { v: c * self.v, d1: c * self.d1, d2: c * self.d2 }
    }

    /// `exp(c t)` at `t`.
    pub fn exp_linear(c: f64, t: f64) -> Jet {
        let e = (c * t).exp();
        Jet { v: e, d1: c * e, d2: c * c * e }
    }
}

impl core::ops::Mul for Jet {
    type Output = Jet;

    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }
}

impl core::ops::Add for Jet {
    type Output = Jet;

    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }
}

/// Smooth step from 0 at `s <= 0` to 1 at `s >= 1`, flat to all orders at
/// both ends: `f(s) / (f(s) + f(1-s))` with `f(x) = exp(-1/x)`.
pub fn smooth_step(s: f64) -> Jet {
    if s <= 0.0 {
        return Jet::constant(0.0);
    }
    if s >= 1.0 {
        return Jet::constant(1.0);
    }
    let f = |x: f64| {
        let e = (-1.0 / x).exp();
        let x2 = x * x;
        Jet { v: e, d1: e / x2, d2: e * (1.0 / (x2 * x2) - 2.0 / (x2 * x)) }
    };
    let g = f(s);
    let h = f(1.0 - s);
    let sum = Jet { v: g.v + h.v, d1: g.d1 - h.d1, d2: g.d2 + h.d2 };
    let v = g.v / sum.v;
    let d1 = (g.d1 - v * sum.d1) / sum.v;
    let d2 = (g.d2 - 2.0 * d1 * sum.d1 - v * sum.d2) / sum.v;
    Jet { v, d1, d2 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_step_jet_matches_differences() {
        let h = 1e-5;
        for s in [0.05, 0.3, 0.5, 0.77, 0.97] {
            let j = smooth_step(s);
            let (p, m) = (smooth_step(s + h).v, smooth_step(s - h).v);
            assert!((j.d1 - (p - m) / (2.0 * h)).abs() < 1e-6);
            assert!((j.d2 - (p - 2.0 * j.v + m) / (h * h)).abs() < 1e-3);
        }
        assert!((smooth_step(0.5).v - 0.5).abs() < 1e-15);
        assert_eq!(smooth_step(-1.0).v, 0.0);
        assert_eq!(smooth_step(1.0).v, 1.0);
    }

    #[test]
    fn banded_matches_dense_with_pivoting() {
        // indefinite tridiagonal system needing row swaps
        let n = 6;
        let mut a = BandedMatrix::zeros(n, 1, 1);
        let diag = [0.0, 2.0, -1.0, 3.0, 0.5, 1.0];
        for i in 0..n {
            a.set(i, i, diag[i]);
            if i + 1 < n {
                a.set(i, i + 1, 1.0 + i as f64);
                a.set(i + 1, i, 2.0 - i as f64 * 0.3);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.5).collect();
        let b = a.mul_vec(&x_true);
        let x = a.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_band_reported() {
        let a = BandedMatrix::zeros(3, 1, 1);
        assert!(a.solve(&[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((integral - 2.0 / 13.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tridiagonal_eigenvalues_of_discrete_laplacian() {
        let n = 50;
        let a = vec![2.0; n];
        let b = vec![-1.0; n - 1];
        let ev = tridiag_smallest_eigenvalues(&a, &b, 3);
        for (k, e) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * core::f64::consts::PI / (n + 1) as f64).cos();
            assert!((e - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_differences_are_fourth_order() {
        let h = 0.01;
        let y: Vec<f64> = (0..200).map(|i| (i as f64 * h).sin()).collect();
        let d2 = second_derivative4(&y, h);
        let d1 = first_derivative4(&y, h);
        for i in 0..200 {
            let t = i as f64 * h;
            assert!((d2[i] + t.sin()).abs() < 1e-7, "d2 at {i}");
            assert!((d1[i] - t.cos()).abs() < 1e-8, "d1 at {i}");
        }
        for i in 0..199 {
            let t = (i as f64 + 0.5) * h;
            assert!((midpoint_cubic(&y, i) - t.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn rk4_harmonic_oscillator() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut y = [1.0, 0.0];
        let h = 1e-3;
        for i in 0..6283 {
            y = rk4_step(&f, i as f64 * h, &y, h);
        }
        let t = 6283.0 * h;
        assert!((y[0] - t.cos()).abs() < 1e-10);
    }
}
