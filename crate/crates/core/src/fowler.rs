//! Fowler (Delaunay) profiles of the cylindrical ODE
//! `v'' - ((n-2)²/4) v + (n(n-2)/4) v^{(n+2)/(n-2)} = 0`
//! and the translated family `u_{ε,R,a}` on punctured balls.
//!
//! Profiles are normalized with their minimum at `t = 0`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::field::{CylinderFunction, RadialField};
use crate::num::{fit_slope, rk4_step};
use crate::report::EstimateReport;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FowlerError {
    #[error("negative profile value {0}")]
    NegativeValue(f64),
    #[error("neck parameter {eps} outside (0, {max})")]
    NeckOutOfRange { eps: f64, max: f64 },
    #[error("step {step} too large: relative energy drift {drift:e}")]
    StepTooLarge { step: f64, drift: f64 },
    #[error("invalid interval [{0}, {1}]")]
    Interval(f64, f64),
    #[error("evaluation at the singular point")]
    AtOrigin,
    #[error("translation too large: |a||x| = {0} >= r0")]
    Translation(f64),
    #[error("scale R must be positive")]
    Scale,
    #[error("empty radius list")]
    NoRadii,
    #[error("grid too coarse for the stencil")]
    Coarse,
}

/// `((n-2)/n)^{(n-2)/4}`: the constant solution and the upper end of the neck range.
pub fn cylinder_value(n: u32) -> f64 {
    let nf = n as f64;
    ((nf - 2.0) / nf).powf((nf - 2.0) / 4.0)
}

fn critical_power(n: u32) -> f64 {
    let nf = n as f64;
    (nf + 2.0) / (nf - 2.0)
}

/// Conserved energy of the cylindrical ODE.
pub fn hamiltonian(v: f64, vdot: f64, n: u32) -> Result<f64, FowlerError> {
    if v < 0.0 {
        return Err(FowlerError::NegativeValue(v));
    }
    let nf = n as f64;
    let c = (nf - 2.0) * (nf - 2.0) / 4.0;
    Ok(vdot * vdot - c * v * v + c * v.powf(2.0 * nf / (nf - 2.0)))
}

/// Right-hand side `(v, v') -> (v', v'')`.
pub fn fowler_field(n: u32) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    let nf = n as f64;
    let lin = (nf - 2.0) * (nf - 2.0) / 4.0;
    let nl = nf * (nf - 2.0) / 4.0;
    let p = critical_power(n);
    move |_t, y| [y[1], lin * y[0] - nl * y[0].max(0.0).powf(p)]
}

/// Samples of a Fowler trajectory with its energy diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FowlerTrajectory {
    pub n: u32,
    pub v: CylinderFunction,
    pub vdot: CylinderFunction,
    pub energy: f64,
    /// `max |H - H(0)| / (1 + |H(0)|)`.
    pub drift: f64,
}

impl FowlerTrajectory {
    pub fn energy_at(&self, i: usize) -> f64 {
        hamiltonian(self.v.values[i].max(0.0), self.vdot.values[i], self.n).unwrap_or(f64::NAN)
    }
}

/// Drift above which a step is refused.
pub const DRIFT_TOLERANCE: f64 = 1e-8;

/// Integrates from Cauchy data `(v0, vdot0)` at `t = 0` over the nodes
/// `k * step` inside `[t0, t1]`, in both directions.
pub fn integrate_from(n: u32, v0: f64, vdot0: f64, t0: f64, t1: f64, step: f64) -> Result<FowlerTrajectory, FowlerError> {
    if !(t0 <= 0.0 && 0.0 <= t1 && t0 < t1) || !(step > 0.0) {
        return Err(FowlerError::Interval(t0, t1));
    }
    if v0 < 0.0 {
        return Err(FowlerError::NegativeValue(v0));
    }
    let f = fowler_field(n);
    let back = (-t0 / step + 1e-9).floor() as usize;
    let fwd = (t1 / step + 1e-9).floor() as usize;
    let total = back + fwd + 1;
    let mut v = vec![0.0; total];
    let mut vd = vec![0.0; total];
    v[back] = v0;
    vd[back] = vdot0;
    let mut y = [v0, vdot0];
    for k in 0..fwd {
        y = rk4_step(&f, k as f64 * step, &y, step);
        v[back + k + 1] = y[0];
        vd[back + k + 1] = y[1];
    }
    let mut y = [v0, vdot0];
    for k in 0..back {
        y = rk4_step(&f, -(k as f64) * step, &y, -step);
        v[back - k - 1] = y[0];
        vd[back - k - 1] = y[1];
    }
    let h0 = hamiltonian(v0, vdot0, n)?;
    let mut drift = 0.0_f64;
    for i in 0..total {
        if v[i] < 0.0 {
            return Err(FowlerError::NegativeValue(v[i]));
        }
        drift = drift.max((hamiltonian(v[i], vd[i], n)? - h0).abs() / (1.0 + h0.abs()));
    }
    if drift > DRIFT_TOLERANCE {
        return Err(FowlerError::StepTooLarge { step, drift });
    }
    let start = -(back as f64) * step;
    Ok(FowlerTrajectory {
        n,
        v: CylinderFunction::scalar(start, step, v),
        vdot: CylinderFunction::scalar(start, step, vd),
        energy: h0,
        drift,
    })
}

fn check_neck(n: u32, eps: f64) -> Result<(), FowlerError> {
    let max = cylinder_value(n);
    if !(eps > 0.0 && eps < max) {
        return Err(FowlerError::NeckOutOfRange { eps, max });
    }
    Ok(())
}

/// The Fowler profile with minimum `eps` at `t = 0`.
pub fn integrate_fowler(n: u32, eps: f64, t0: f64, t1: f64, step: f64) -> Result<FowlerTrajectory, FowlerError> {
    check_neck(n, eps)?;
    integrate_from(n, eps, 0.0, t0, t1, step)
}

/// Relative distance kept from both ends of the neck range by [`period`].
pub const NECK_MARGIN: f64 = 1e-6;

/// First return time to the minimum, with the crossing of `v' = 0` refined
/// by bisection on the sub-step length.
pub fn period_with_step(n: u32, eps: f64, step: f64) -> Result<f64, FowlerError> {
    let max = cylinder_value(n);
    if !(eps > NECK_MARGIN * max && eps < max * (1.0 - NECK_MARGIN)) {
        return Err(FowlerError::NeckOutOfRange { eps, max });
    }
    let f = fowler_field(n);
    let mut y = [eps, 0.0];
    let mut t = 0.0;
    let mut seen_negative = false;
    // bound: very thin necks have period ~ 2 log(1/eps)·(2/(n-2)) plus O(1)
    let limit = 64.0 + 8.0 * (1.0 / eps).ln() / (n as f64 - 2.0);
    while t < limit {
        let next = rk4_step(&f, t, &y, step);
        if next[1] < 0.0 {
            seen_negative = true;
        } else if seen_negative {
            let (mut lo, mut hi) = (0.0, step);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if rk4_step(&f, t, &y, mid)[1] < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(t + 0.5 * (lo + hi));
        }
        y = next;
        t += step;
    }
    Err(FowlerError::NeckOutOfRange { eps, max })
}

pub fn period(n: u32, eps: f64) -> Result<f64, FowlerError> {
    period_with_step(n, eps, 1e-3)
}

/// One period of `v_ε` cached on a uniform grid, evaluated elsewhere by
/// periodic extension and cubic Hermite interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaunayProfile {
    pub n: u32,
    pub eps: f64,
    pub period: f64,
    step: f64,
    v: Vec<f64>,
    vdot: Vec<f64>,
}

impl DelaunayProfile {
    pub fn new(n: u32, eps: f64) -> Result<Self, FowlerError> {
        Self::with_resolution(n, eps, 1e-3)
    }

    pub fn with_resolution(n: u32, eps: f64, step: f64) -> Result<Self, FowlerError> {
        check_neck(n, eps)?;
        let period = period_with_step(n, eps, step.min(1e-3))?;
        let m = (period / step).ceil() as usize;
        let h = period / m as f64;
        let f = fowler_field(n);
        let mut v = Vec::with_capacity(m + 1);
        let mut vdot = Vec::with_capacity(m + 1);
        let mut y = [eps, 0.0];
        v.push(y[0]);
        vdot.push(y[1]);
        for k in 0..m {
            y = rk4_step(&f, k as f64 * h, &y, h);
            v.push(y[0]);
            vdot.push(y[1]);
        }
        Ok(Self { n, eps, period, step: h, v, vdot })
    }

    /// `(v_ε(s), v_ε'(s))`.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let mut x = s % self.period;
        if x < 0.0 {
            x += self.period;
        }
        let pos = x / self.step;
        let i = (pos.floor() as usize).min(self.v.len() - 2);
        let u = pos - i as f64;
        let h = self.step;
        let (p0, p1, m0, m1) = (self.v[i], self.v[i + 1], self.vdot[i], self.vdot[i + 1]);
        let (u2, u3) = (u * u, u * u * u);
        let val = (2.0 * u3 - 3.0 * u2 + 1.0) * p0
            + (u3 - 2.0 * u2 + u) * h * m0
            + (-2.0 * u3 + 3.0 * u2) * p1
            + (u3 - u2) * h * m1;
        // derivative from the ODE-consistent Hermite of v' with slope v''
        let f = fowler_field(self.n);
        let (a0, a1) = (f(0.0, &[p0, m0])[1], f(0.0, &[p1, m1])[1]);
        let der = (2.0 * u3 - 3.0 * u2 + 1.0) * m0
            + (u3 - 2.0 * u2 + u) * h * a0
            + (-2.0 * u3 + 3.0 * u2) * m1
            + (u3 - u2) * h * a1;
        (val, der)
    }

    /// Cauchy data at `s` by a single RK4 step from the nearest cached node
    /// below, exact to the integrator's local error.
    pub fn cauchy(&self, s: f64) -> [f64; 2] {
        let mut x = s % self.period;
        if x < 0.0 {
            x += self.period;
        }
        let i = ((x / self.step).floor() as usize).min(self.v.len() - 2);
        let dt = x - i as f64 * self.step;
        let y = [self.v[i], self.vdot[i]];
        if dt == 0.0 {
            return y;
        }
        rk4_step(&fowler_field(self.n), 0.0, &y, dt)
    }
}

/// Neck parameters of `u_{ε,R,a}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FowlerParams {
    pub n: u32,
    pub eps: f64,
    pub scale: f64,
    pub translation: Vec<f64>,
}

impl FowlerParams {
    pub fn new(n: u32, eps: f64, scale: f64) -> Self {
        Self { n, eps, scale, translation: vec![0.0; n as usize] }
    }

    pub fn validate(&self) -> Result<(), FowlerError> {
        check_neck(self.n, self.eps)?;
        if !(self.scale > 0.0) {
            return Err(FowlerError::Scale);
        }
        Ok(())
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `u_{ε,R,a}(x) = |x - a|x|²|^{(2-n)/2} v_ε(-2 log|x| + log|x - a|x|²| + log R)`.
pub fn delaunay_eval(p: &FowlerParams, profile: &DelaunayProfile, x: &[f64], r0: f64) -> Result<f64, FowlerError> {
    let r = norm(x);
    if r == 0.0 {
        return Err(FowlerError::AtOrigin);
    }
    let ar = norm(&p.translation) * r;
    if ar >= r0 {
        return Err(FowlerError::Translation(ar));
    }
    let shifted: Vec<f64> = x.iter().zip(&p.translation).map(|(xi, ai)| xi - ai * r * r).collect();
    let rs = norm(&shifted);
    let nf = p.n as f64;
    let s = -2.0 * r.ln() + rs.ln() + p.scale.ln();
    Ok(rs.powf((2.0 - nf) / 2.0) * profile.eval(s).0)
}

/// Radial `u_{ε,R}` and `|x| ∂_r u_{ε,R}` at radius `r`.
pub fn radial_delaunay(profile: &DelaunayProfile, scale: f64, r: f64) -> (f64, f64) {
    let nf = profile.n as f64;
    let s = (scale / r).ln();
    let (v, vd) = profile.eval(s);
    let pre = r.powf((2.0 - nf) / 2.0);
    let u = pre * v;
    (u, (2.0 - nf) / 2.0 * u - pre * vd)
}

/// Residual of the leading-order expansion of `u_{ε,R}` against the
/// envelope `R^{(n+2)/2} ε^{(n+2)/(n-2)} |x|^{-n}`.
///
/// The envelope describes the inner neck `|x| <= R`; radii are expected there.
pub fn expansion_check(profile: &DelaunayProfile, scale: f64, radii: &[f64]) -> Result<EstimateReport, FowlerError> {
    if radii.is_empty() {
        return Err(FowlerError::NoRadii);
    }
    let nf = profile.n as f64;
    let eps = profile.eps;
    let envelope_coeff = scale.powf((nf + 2.0) / 2.0) * eps.powf(critical_power(profile.n));
    let mut residuals = Vec::with_capacity(radii.len());
    let mut ratios = Vec::with_capacity(radii.len());
    for &r in radii {
        let (u, _) = radial_delaunay(profile, scale, r);
        let lead = 0.5 * eps * (scale.powf((2.0 - nf) / 2.0) + scale.powf((nf - 2.0) / 2.0) * r.powf(2.0 - nf));
        let res = (u - lead).abs();
        residuals.push(res);
        ratios.push(res / (envelope_coeff * r.powf(-nf)));
    }
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = residuals.iter().map(|r| r.max(1e-300).ln()).collect();
    let slope = if radii.len() > 1 { fit_slope(&lx, &ly) } else { f64::NAN };
    let mut report = EstimateReport::new("expansion", "radius", radii.to_vec(), ratios);
    report.slope = Some(slope);
    report.expected_slope = Some(-nf);
    report.verdict = report.spread() < 20.0 && (slope + nf).abs() <= 0.1;
    Ok(report)
}

/// Residual of the translation expansion divided by `|a|² |x|^{(6-n)/2}`,
/// at the sample points `xs`.
pub fn translation_expansion_ratios(profile: &DelaunayProfile, scale: f64, a: &[f64], xs: &[Vec<f64>], r0: f64) -> Result<Vec<f64>, FowlerError> {
    let nf = profile.n as f64;
    let pa = FowlerParams { n: profile.n, eps: profile.eps, scale, translation: a.to_vec() };
    let an = norm(a);
    xs.iter()
        .map(|x| {
            let r = norm(x);
            let ua = delaunay_eval(&pa, profile, x, r0)?;
            let (u, rdu) = radial_delaunay(profile, scale, r);
            let ax: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
            let lin = ((nf - 2.0) * u + rdu) * ax;
            Ok((ua - u - lin).abs() / (an * an * r.powf((6.0 - nf) / 2.0)))
        })
        .collect()
}

/// Residual of the limit system `Δu_i + (n(n-2)/4)|U|^{4/(n-2)} u_i` for a
/// radial `d`-vector field, by second-order differences in `t`.
///
/// Reported as `max |x|^{(n+2)/2} |residual|` over interior nodes, which is
/// the residual of the equation written on the cylinder.
pub fn limit_system_residual(u: &RadialField, n: u32) -> Result<f64, FowlerError> {
    if u.nodes < 3 || u.angles != 1 {
        return Err(FowlerError::Coarse);
    }
    let nf = n as f64;
    let h = u.step;
    let q = 4.0 / (nf - 2.0);
    let c = nf * (nf - 2.0) / 4.0;
    let mut worst = 0.0_f64;
    for i in 1..u.nodes - 1 {
        let t = u.t(i);
        let mag: f64 = (0..u.dim).map(|k| u.get(i, 0, k).powi(2)).sum::<f64>().sqrt();
        let mut res2 = 0.0;
        for k in 0..u.dim {
            let (a, b, cc) = (u.get(i - 1, 0, k), u.get(i, 0, k), u.get(i + 1, 0, k));
            let ut = (cc - a) / (2.0 * h);
            let utt = (cc - 2.0 * b + a) / (h * h);
            let lap = (2.0 * t).exp() * (utt - (nf - 2.0) * ut);
            let r = lap + c * mag.powf(q) * b;
            res2 += r * r;
        }
        worst = worst.max((-(nf + 2.0) / 2.0 * t).exp() * res2.sqrt());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamiltonian_examples() {
        assert_eq!(hamiltonian(0.0, 0.0, 4).unwrap(), 0.0);
        assert!(hamiltonian(1.0, 0.0, 3).unwrap().abs() < 1e-15);
        let v = 3f64.powf(-0.25);
        let oracle = 0.25 * v * v * (v.powi(4) - 1.0);
        assert!((hamiltonian(v, 0.0, 3).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle + 0.096225).abs() < 1e-5);
        assert!(hamiltonian(-0.1, 0.0, 3).is_err());
    }

    #[test]
    fn stationary_profile_is_constant() {
        let v = cylinder_value(3);
        let tr = integrate_from(3, v, 0.0, -3.0, 3.0, 1e-2).unwrap();
        for &x in &tr.v.values {
            assert!((x - v).abs() < 1e-12);
        }
    }

    #[test]
    fn neck_minimum_and_range() {
        let eps = 0.3;
        let tr = integrate_fowler(3, eps, 0.0, 8.0, 1e-3).unwrap();
        let min = tr.v.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = tr.v.values.iter().cloned().fold(0.0, f64::max);
        assert!((min - eps).abs() < 1e-8);
        assert!(max <= 1.0);
    }

    #[test]
    fn profile_is_even_about_the_minimum() {
        let tr = integrate_fowler(4, 0.2, -3.0, 3.0, 1e-3).unwrap();
        let mid = tr.v.nearest(0.0);
        for k in 1..3000 {
            assert!((tr.v.values[mid + k] - tr.v.values[mid - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range_and_large_steps() {
        assert!(integrate_fowler(3, 0.9, 0.0, 1.0, 1e-3).is_err());
        assert!(matches!(integrate_fowler(3, 0.05, 0.0, 30.0, 0.3), Err(FowlerError::StepTooLarge { .. })));
        assert!(period(3, cylinder_value(3)).is_err());
    }

    #[test]
    fn period_is_step_consistent_and_monotone() {
        let a = period_with_step(3, 0.3, 1e-3).unwrap();
        let b = period_with_step(3, 0.3, 5e-4).unwrap();
        assert!((a - b).abs() < 1e-6);
        let grid = [0.1, 0.2, 0.3, 0.4, 0.5];
        let ps: Vec<f64> = grid.iter().map(|&e| period(3, e).unwrap()).collect();
        for w in ps.windows(2) {
            assert!(w[0] > w[1]);
        }
    }

    #[test]
    fn cached_profile_matches_direct_integration() {
        let prof = DelaunayProfile::new(3, 0.2).unwrap();
        let tr = integrate_fowler(3, 0.2, -10.0, 10.0, 1e-3).unwrap();
        for i in (0..tr.v.nodes()).step_by(97) {
            let (v, vd) = prof.eval(tr.v.t(i));
            assert!((v - tr.v.values[i]).abs() < 1e-10);
            assert!((vd - tr.vdot.values[i]).abs() < 1e-9);
            let y = prof.cauchy(tr.v.t(i));
            assert!((y[0] - tr.v.values[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn delaunay_reductions() {
        let prof = DelaunayProfile::new(3, 0.25).unwrap();
        let p = FowlerParams::new(3, 0.25, 0.3);
        let u = delaunay_eval(&p, &prof, &[1.0, 0.0, 0.0], 0.5).unwrap();
        assert!((u - prof.eval(0.3f64.ln()).0).abs() < 1e-14);
        let p1 = FowlerParams::new(3, 0.25, 1.0);
        let x = [0.1, 0.2, -0.05];
        let r = norm(&x);
        let u = delaunay_eval(&p1, &prof, &x, 0.5).unwrap();
        assert!((u - r.powf(-0.5) * prof.eval(-r.ln()).0).abs() < 1e-12);
        assert!(delaunay_eval(&p1, &prof, &[0.0, 0.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn constant_profile_scaling_law() {
        // v ≡ v_cyl turns u_{ε,R} into v_cyl |x|^{(2-n)/2}, independent of R
        let v = cylinder_value(3);
        let tr = integrate_from(3, v, 0.0, -1.0, 1.0, 1e-3).unwrap();
        let r: f64 = 0.37;
        let s = (2.0f64 / r).ln();
        let vi = tr.v.values[tr.v.nearest(s.clamp(-1.0, 1.0))];
        assert!((r.powf(-0.5) * vi - v * r.powf(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn expansion_fails_for_constant_profile() {
        // near the cylinder value the leading expansion is meaningless
        let prof = DelaunayProfile::new(3, cylinder_value(3) * 0.999).unwrap();
        let radii: Vec<f64> = (0..6).map(|k| (-(6.0 + 0.5 * k as f64)).exp()).collect();
        let rep = expansion_check(&prof, 1.0, &radii).unwrap();
        assert!(!rep.verdict);
    }

    #[test]
    fn translation_expansion_ratio_bounded() {
        let prof = DelaunayProfile::new(3, 0.05).unwrap();
        let xs: Vec<Vec<f64>> = (1..6).map(|k| vec![0.1 * k as f64, 0.05, -0.03 * k as f64]).collect();
        let big = translation_expansion_ratios(&prof, 1e-3, &[1e-2, 0.0, 0.0], &xs, 0.5).unwrap();
        let small = translation_expansion_ratios(&prof, 1e-3, &[1e-3, 0.0, 0.0], &xs, 0.5).unwrap();
        for (b, s) in big.iter().zip(&small) {
            assert!(b.is_finite() && s.is_finite());
            assert!(*s < 2.0 * b + 1.0, "{s} vs {b}");
        }
    }

    #[test]
    fn limit_system_residual_is_second_order() {
        let eps = 0.3;
        let prof = DelaunayProfile::with_resolution(3, eps, 2e-4).unwrap();
        let lam = [0.6, 0.8];
        let field = |step: f64| {
            let nodes = (4.0 / step) as usize + 1;
            let mut f = RadialField::zeros(0.5, step, nodes, 1, 2);
            for i in 0..nodes {
                let t = f.t(i);
                let u = (0.5 * t).exp() * prof.eval(t).0;
                f.set(i, 0, 0, lam[0] * u);
                f.set(i, 0, 1, lam[1] * u);
            }
            f
        };
        let r1 = limit_system_residual(&field(0.02), 3).unwrap();
        let r2 = limit_system_residual(&field(0.01), 3).unwrap();
        let order = (r1 / r2).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
        let mut pert = field(0.01);
        for i in 0..pert.nodes {
            let t = pert.t(i);
            let v = pert.get(i, 0, 0);
            pert.set(i, 0, 0, v + 0.1 * (0.5 * t).exp() * (3.0 * t).sin());
        }
        assert!(limit_system_residual(&pert, 3).unwrap() > 1e-2);
        assert_eq!(limit_system_residual(&RadialField::zeros(0.0, 0.1, 10, 1, 2), 3).unwrap(), 0.0);
    }
}
