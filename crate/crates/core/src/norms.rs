//! Discretized weighted norms.
//!
//! Derivatives are radial only, taken by fourth-order differences in `t`;
//! the Hölder seminorm is the largest difference quotient between adjacent
//! radial nodes of a ray. Inside an annulus `[σ, 2σ]` the scaling `σ^j` is
//! replaced by `|x|^j`, which changes the norm by at most a factor `2^j`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::config::WeightSpec;
use crate::field::{CylinderFunction, RadialField};
use crate::num::{first_derivative4, second_derivative4};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum NormError {
    #[error("empty grid")]
    Empty,
    #[error("grid covers {levels:.2} dyadic levels below the outer radius, need at least 4")]
    Coverage { levels: f64 },
    #[error("exterior grid does not reach the bulk region")]
    NoBulk,
}

/// `sup_t e^{δ t} |f(t)|` over the grid nodes.
pub fn cylinder_norm(f: &CylinderFunction, delta: f64) -> Result<f64, NormError> {
    if f.nodes() == 0 {
        return Err(NormError::Empty);
    }
    Ok((0..f.nodes()).map(|i| (delta * f.t(i)).exp() * f.magnitude(i)).fold(0.0, f64::max))
}

#[derive(Clone, Copy)]
enum Scaling {
    /// `|x|^j ∂_r^j`, Hölder quotients in `|x|`.
    Annulus,
    /// Geodesic derivatives on the round sphere, unscaled.
    Bulk,
}

fn magnitude(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Per-node local `C^{k,α}` quantity, maximized over angular samples.
fn local_quantity(f: &RadialField, order: u8, holder: f64, scaling: Scaling) -> Vec<f64> {
    let n = f.nodes;
    let h = f.step;
    let mut q = vec![0.0; n];
    let dim = f.dim;
    for a in 0..f.angles {
        // derivative samples per component: [order][component][node]
        let mut derivs: Vec<Vec<Vec<f64>>> = vec![Vec::new(); 3];
        for c in 0..dim {
            let ray = f.ray(a, c);
            let (d1, d2) = if order >= 1 && n >= 6 {
                let ft = first_derivative4(&ray, h);
                let ftt = second_derivative4(&ray, h);
                let mut d1 = vec![0.0; n];
                let mut d2 = vec![0.0; n];
                for i in 0..n {
                    let r = (-f.t(i)).exp();
                    let dr = -ft[i] / r;
                    let drr = (ftt[i] + ft[i]) / (r * r);
                    match scaling {
                        Scaling::Annulus => {
                            d1[i] = dr;
                            d2[i] = drr;
                        }
                        Scaling::Bulk => {
                            let m = 1.0 + r * r / 4.0;
                            d1[i] = m * dr;
                            d2[i] = m * m * drr + m * 0.5 * r * dr;
                        }
                    }
                }
                (d1, d2)
            } else {
                (vec![0.0; n], vec![0.0; n])
            };
            derivs[0].push(ray);
            derivs[1].push(d1);
            derivs[2].push(d2);
        }
        let top = order.min(2) as usize;
        let position = |i: usize| -> f64 {
            let r = (-f.t(i)).exp();
            match scaling {
                Scaling::Annulus => r,
                Scaling::Bulk => 2.0 * (r / 2.0).atan(),
            }
        };
        for i in 0..n {
            let r = (-f.t(i)).exp();
            let mut s = 0.0;
            for (j, dj) in derivs.iter().enumerate().take(top + 1) {
                let v: Vec<f64> = (0..dim).map(|c| dj[c][i]).collect();
                let w = match scaling {
                    Scaling::Annulus => r.powi(j as i32),
                    Scaling::Bulk => 1.0,
                };
                s += w * magnitude(&v);
            }
            if holder > 0.0 && i + 1 < n {
                let diff: Vec<f64> = (0..dim).map(|c| derivs[top][c][i + 1] - derivs[top][c][i]).collect();
                let dist = (position(i) - position(i + 1)).abs();
                if dist > 0.0 {
                    let w = match scaling {
                        Scaling::Annulus => r.powf(top as f64 + holder),
                        Scaling::Bulk => 1.0,
                    };
                    s += w * magnitude(&diff) / dist.powf(holder);
                }
            }
            q[i] = q[i].max(s);
        }
    }
    q
}

/// `sup` over `σ` of `σ^{-w} max_{[σ, 2σ]} q`, for `σ` at the nodes with
/// `t ∈ [t_lo, t_hi]` and annuli fully inside the grid.
fn dyadic_sup(f: &RadialField, q: &[f64], weight: f64, t_lo: f64, t_hi: f64) -> f64 {
    let ln2 = core::f64::consts::LN_2;
    let eps = 1e-9 * f.step;
    let mut best = 0.0_f64;
    // sliding window maximum over the annulus [t_j - ln2, t_j]
    let mut window: alloc::collections::VecDeque<usize> = alloc::collections::VecDeque::new();
    for j in 0..f.nodes {
        while let Some(&back) = window.back() {
            if q[back] <= q[j] {
                window.pop_back();
            } else {
                break;
            }
        }
        window.push_back(j);
        while let Some(&front) = window.front() {
            if f.t(front) < f.t(j) - ln2 - eps {
                window.pop_front();
            } else {
                break;
            }
        }
        let tj = f.t(j);
        if tj < t_lo - eps || tj > t_hi + eps || tj - ln2 < f.t0 - eps {
            continue;
        }
        let m = q[*window.front().unwrap()];
        best = best.max((weight * tj).exp() * m);
    }
    best
}

/// Weighted norm on the punctured ball `B_r`: the supremum over dyadic
/// annuli `[σ, 2σ]`, `σ <= r/2`, of `σ^{-μ}` times the local `C^{k,α}` size.
pub fn weighted_ball_norm(f: &RadialField, w: &WeightSpec, r: f64) -> Result<f64, NormError> {
    if f.nodes == 0 || f.values.is_empty() {
        return Err(NormError::Empty);
    }
    let t_outer = -r.ln();
    let t_last = f.t(f.nodes - 1);
    let levels = (t_last - t_outer.max(f.t0)) / core::f64::consts::LN_2;
    if f.t0 > t_outer + 1e-9 * f.step || levels < 4.0 - 1e-9 {
        return Err(NormError::Coverage { levels });
    }
    let q = local_quantity(f, w.order, w.holder, Scaling::Annulus);
    Ok(dyadic_sup(f, &q, w.exponent, t_outer + core::f64::consts::LN_2, f64::INFINITY))
}

/// Exterior norm: unweighted size on the bulk `|x| >= r1/2` plus the
/// weighted size on the chart annulus `r <= |x| <= r1`.
///
/// The grid runs from the antipode side (small `t`) to the inner boundary
/// `t = -log r`.
pub fn exterior_norm(f: &RadialField, w: &WeightSpec, r: f64, r1: f64) -> Result<f64, NormError> {
    if f.nodes == 0 || f.values.is_empty() {
        return Err(NormError::Empty);
    }
    let t_bulk = -(0.5 * r1).ln();
    if f.t0 > t_bulk {
        return Err(NormError::NoBulk);
    }
    let qb = local_quantity(f, w.order, w.holder, Scaling::Bulk);
    let bulk = (0..f.nodes).filter(|&i| f.t(i) <= t_bulk + 1e-12).map(|i| qb[i]).fold(0.0, f64::max);
    let qa = local_quantity(f, w.order, w.holder, Scaling::Annulus);
    // σ ∈ [r, r1/2]  <=>  t_σ ∈ [-log(r1/2), -log r]; annulus [σ, 2σ] lies in t ∈ [t_σ - ln2, t_σ]
    let annulus = dyadic_sup(f, &qa, w.exponent, t_bulk, -r.ln());
    Ok(bulk + annulus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::WeightKind;

    fn ball(nodes: usize, step: f64, f: impl Fn(f64) -> f64) -> RadialField {
        RadialField::radial(0.0, step, nodes, f)
    }

    #[test]
    fn power_law_ball_norm_is_two_to_the_weight() {
        let mu = 1.1;
        let step = core::f64::consts::LN_2 / 64.0;
        let f = ball(64 * 8 + 1, step, |x| x.powf(mu));
        let w = WeightSpec::new(WeightKind::Ball, mu, 0);
        let norm = weighted_ball_norm(&f, &w, 1.0).unwrap();
        // annulus bottom falls exactly on a node here
        assert!((norm - 2f64.powf(mu)).abs() < 1e-12, "{norm}");
    }

    #[test]
    fn zero_field_has_zero_norms() {
        let f = ball(400, 0.01, |_| 0.0);
        let w = WeightSpec::new(WeightKind::Ball, 1.5, 2);
        assert_eq!(weighted_ball_norm(&f, &w, 1.0).unwrap(), 0.0);
        let c = CylinderFunction::zeros(0.0, 0.1, 10, 2);
        assert_eq!(cylinder_norm(&c, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn steeper_power_attains_norm_on_outer_annulus() {
        let mu = 1.2;
        let step = 0.005;
        let f = ball(1200, step, |x| x.powf(mu + 1.0));
        let w = WeightSpec::new(WeightKind::Ball, mu, 0);
        let norm = weighted_ball_norm(&f, &w, 1.0).unwrap();
        // brute force over every admissible σ node
        let ln2 = core::f64::consts::LN_2;
        let mut brute = 0.0_f64;
        for j in 0..f.nodes {
            let tj = f.t(j);
            if tj < ln2 - 1e-12 {
                continue;
            }
            let m = (0..f.nodes)
                .filter(|&i| f.t(i) >= tj - ln2 - 1e-12 && f.t(i) <= tj)
                .map(|i| f.values[i].abs())
                .fold(0.0, f64::max);
            brute = brute.max((mu * tj).exp() * m);
        }
        assert!((norm - brute).abs() < 1e-14);
        // outermost annulus up to the node spacing
        let sigma = 0.5f64;
        let outer = sigma.powf(-mu) * (2.0 * sigma).powf(mu + 1.0);
        assert!((norm - outer).abs() < 0.01 * outer);
    }

    #[test]
    fn insufficient_coverage_is_an_error() {
        let f = ball(100, 0.01, |x| x);
        let w = WeightSpec::new(WeightKind::Ball, 1.5, 0);
        assert!(matches!(weighted_ball_norm(&f, &w, 1.0), Err(NormError::Coverage { .. })));
    }

    #[test]
    fn unweighted_ball_norm_is_sup_over_covered_region() {
        let f = ball(1000, 0.004, |x| (7.0 * x).sin() + 0.3);
        let w = WeightSpec::new(WeightKind::Ball, 0.0, 0);
        let r = 0.9;
        let sup = (0..f.nodes).filter(|&i| f.t(i) >= -r.ln() - 1e-12).map(|i| f.values[i].abs()).fold(0.0, f64::max);
        assert!((weighted_ball_norm(&f, &w, r).unwrap() - sup).abs() < 1e-14);
    }

    #[test]
    fn cylinder_norm_examples() {
        let delta = 0.7;
        let f = CylinderFunction::from_fn(0.0, 0.01, 500, 2, |t| alloc::vec![(-delta * t).exp(), 0.0]);
        assert!((cylinder_norm(&f, delta).unwrap() - 1.0).abs() < 1e-14);
        let g = CylinderFunction::from_fn(0.0, 0.01, 500, 1, |t| alloc::vec![(-2.0 * delta * t).exp()]);
        assert!((cylinder_norm(&g, delta).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exterior_norm_of_constant() {
        let (r, r1, nu) = (0.05, 0.4, -1.5);
        // both -log(r1/2) and -log r fall on nodes
        let step = 4f64.ln() / 700.0;
        let t0 = -(0.5 * r1).ln() - 2000.0 * step;
        let nodes = 2701;
        let c = 2.5;
        let f = RadialField::radial(t0, step, nodes, |_| c);
        let w = WeightSpec::new(WeightKind::Exterior, nu, 0);
        let norm = exterior_norm(&f, &w, r, r1).unwrap();
        let expected = c * (1.0 + (0.5 * r1).powf(-nu));
        assert!((norm - expected).abs() < 1e-9 * expected, "{norm} vs {expected}");
    }

    #[test]
    fn exterior_norm_of_bulk_supported_field() {
        let (r, r1) = (0.05, 0.4);
        let t_bulk = -(0.5 * r1).ln();
        let f = RadialField::radial(-3.0, 0.002, 3000, |x| if -x.ln() < t_bulk - 0.7 { (3.0 * x).sin() } else { 0.0 });
        let w = WeightSpec::new(WeightKind::Exterior, -1.5, 0);
        let sup = f.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!((exterior_norm(&f, &w, r, r1).unwrap() - sup).abs() < 1e-14);
    }
}
