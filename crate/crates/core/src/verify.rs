//! The acceptance suite: twelve numbered checks at desk scale (`n = 3`,
//! `d = 2`), each returning a pass flag and the measured numbers.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, PotentialSpec};
use crate::exterior::nondegeneracy_check;
use crate::fowler::{cylinder_value, expansion_check, integrate_from, integrate_fowler, period, DelaunayProfile};
use crate::gluing::{
    dn_map, dn_multiplier, glue_end_to_end, match_constants, match_coordinates, ConstantTraces, CoordinateTraces, GlueOptions,
    MatchOptions, MatchingContext, NeckSlopes,
};
use crate::interior::{conformal_identity, neck_scale, remainder_q};
use crate::linop::{diagonalize_mode_system, estimate_sweep, solve_scalar, EstimateKind, ModeSystem, Potential, SolverKind, SweepSpec};
use crate::model::{Background, SphereModel};
use crate::num::Jet;
use crate::spectral::{ModeCoefficients, ModeIndex};

/// Outcome of one acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Criterion {
    fn new(id: u8, name: &str, passed: bool, detail: String) -> Self {
        Self { id, name: name.to_string(), passed, detail }
    }

    fn failed(id: u8, name: &str, err: impl core::fmt::Display) -> Self {
        Self::new(id, name, false, format!("error: {err}"))
    }
}

/// Runs the whole suite in order; `seed` drives every random sample.
pub fn run_all(seed: u64) -> Vec<Criterion> {
    vec![
        fowler_energy(),
        homoclinic_profile(),
        period_limit(),
        neck_expansion(),
        mode_recovery(),
        uniform_estimates(seed),
        dn_diagonal(),
        remainder_scaling(seed),
        trivial_matching(),
        nondegeneracy(),
        radial_glue(),
        conformal_samples(seed),
    ]
}

/// Relative Hamiltonian drift over five periods at `ε = 0.3`.
pub fn fowler_energy() -> Criterion {
    const NAME: &str = "fowler energy conservation";
    let run = || -> Result<Criterion, crate::fowler::FowlerError> {
        let t = period(3, 0.3)?;
        let tr = integrate_fowler(3, 0.3, 0.0, 5.0 * t, 1e-3)?;
        Ok(Criterion::new(1, NAME, tr.drift <= 1e-8, format!("drift {:.2e} over 5 periods (T = {t:.4})", tr.drift)))
    };
    run().unwrap_or_else(|e| Criterion::failed(1, NAME, e))
}

/// Trajectory from `(1, 0)` against `cosh(t)^{-1/2}` on `[-5, 5]`.
pub fn homoclinic_profile() -> Criterion {
    const NAME: &str = "homoclinic profile";
    match integrate_from(3, 1.0, 0.0, -5.0, 5.0, 1e-3) {
        Ok(tr) => {
            let err = (0..tr.v.nodes())
                .map(|i| (tr.v.values[i] - tr.v.t(i).cosh().powf(-0.5)).abs())
                .fold(0.0, f64::max);
            Criterion::new(2, NAME, err <= 1e-6, format!("max error {err:.2e}"))
        }
        Err(e) => Criterion::failed(2, NAME, e),
    }
}

/// Period near the cylinder value against `2π/√(n-2)`.
pub fn period_limit() -> Criterion {
    const NAME: &str = "period limit";
    let eps = cylinder_value(3) * (1.0 - 1e-3);
    match period(3, eps) {
        Ok(t) => {
            let target = 2.0 * core::f64::consts::PI;
            let rel = (t - target).abs() / target;
            Criterion::new(3, NAME, rel <= 1e-2, format!("T = {t:.6}, relative deviation {rel:.2e}"))
        }
        Err(e) => Criterion::failed(3, NAME, e),
    }
}

/// Log-log slope of the expansion residual and its envelope ratio under
/// halving `R`, at `ε = 0.01` on radii `e^{-k}`, `k ∈ [6.5, 9]`.
pub fn neck_expansion() -> Criterion {
    const NAME: &str = "neck expansion";
    let run = || -> Result<Criterion, crate::fowler::FowlerError> {
        let profile = DelaunayProfile::with_resolution(3, 0.01, 2e-4)?;
        let radii: Vec<f64> = (0..11).map(|k| (-(6.5 + 0.25 * k as f64)).exp()).collect();
        let full = expansion_check(&profile, 1.0, &radii)?;
        let half = expansion_check(&profile, 0.5, &radii)?;
        let (s1, s2) = (full.slope.unwrap_or(f64::NAN), half.slope.unwrap_or(f64::NAN));
        let variation = full.ratios.iter().zip(&half.ratios).map(|(a, b)| (b / a - 1.0).abs()).fold(0.0, f64::max);
        let passed = (s1 + 3.0).abs() <= 0.1 && (s2 + 3.0).abs() <= 0.1 && variation < 0.2;
        Ok(Criterion::new(4, NAME, passed, format!("slopes {s1:.4} (R = 1), {s2:.4} (R = 1/2); largest ratio change {:.1}%", 100.0 * variation)))
    };
    run().unwrap_or_else(|e| Criterion::failed(4, NAME, e))
}

/// Manufactured solutions on every level 0..=3 and both branches at 2000
/// nodes: `e^{-t} sin t` for the Dirichlet kind, `e^{-t} sin² t` for the
/// backward kind.
pub fn mode_recovery() -> Criterion {
    const NAME: &str = "mode BVP recovery";
    let run = || -> Result<Criterion, crate::linop::LinopError> {
        let nodes = 2000;
        let t1 = 2.0 * core::f64::consts::PI;
        let step = t1 / (nodes - 1) as f64;
        let profile = DelaunayProfile::new(3, 0.1)?;
        let potential = Potential::fowler(&profile, 0.0, 0.0, step, nodes)?;
        let mut worst = 0.0f64;
        for level in 0..=3 {
            let system = ModeSystem { n: 3, level, lambda: vec![0.6, 0.8], potential: potential.clone() };
            for ode in diagonalize_mode_system(&system)? {
                let kind = SolverKind::for_level(level);
                let exact = |t: f64| -> (f64, f64) {
                    let (s, c, e) = (t.sin(), t.cos(), (-t).exp());
                    match kind {
                        SolverKind::HighDirichlet => (e * s, -2.0 * e * c),
                        SolverKind::LowBackward => (e * s * s, e * (2.0 * c * c - s * s - 4.0 * s * c)),
                    }
                };
                let w: Vec<f64> = (0..nodes).map(|i| exact(i as f64 * step).0).collect();
                let f: Vec<f64> = (0..nodes).map(|i| exact(i as f64 * step).1 - ode.q(i) * w[i]).collect();
                let sol = solve_scalar(&ode, &f, kind)?;
                let scale = w.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                let err = sol.w.iter().zip(&w).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / scale;
                worst = worst.max(err);
            }
        }
        Ok(Criterion::new(5, NAME, worst <= 1e-6, format!("worst relative error {worst:.2e} over levels 0..3, both branches")))
    };
    run().unwrap_or_else(|e| Criterion::failed(5, NAME, e))
}

/// In-window sweeps stay bounded and flat in `T`; out-of-window controls grow.
pub fn uniform_estimates(seed: u64) -> Criterion {
    const NAME: &str = "uniform estimates";
    let cases = [
        (EstimateKind::High, 1.0, true),
        (EstimateKind::High, 3.0, false),
        (EstimateKind::Constant, 1.0, true),
        (EstimateKind::Constant, 0.0, false),
        (EstimateKind::Coordinate, 2.0, true),
        (EstimateKind::Coordinate, 1.0, false),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (kind, delta, in_window) in cases {
        let mut spec = SweepSpec::new(kind, delta);
        spec.seed = seed;
        match estimate_sweep(&spec) {
            Ok(rep) => {
                passed &= rep.verdict && rep.in_window == in_window;
                parts.push(format!("{kind:?} δ={delta}: spread {:.2} {}", rep.spread(), if rep.verdict { "ok" } else { "FAIL" }));
            }
            Err(e) => return Criterion::failed(6, NAME, e),
        }
    }
    Criterion::new(6, NAME, passed, parts.join("; "))
}

/// Numerical DN diagonal against `2k + n - 2`, `k = 2..6`.
pub fn dn_diagonal() -> Criterion {
    const NAME: &str = "DN map diagonal";
    let mut phi = ModeCoefficients::zeros(3, 6, 1, 0.02);
    for k in 2..=6 {
        for index in 0..2 * k + 1 {
            phi.set(ModeIndex { level: k, index }, 0, 1.0);
        }
    }
    match dn_map(&phi) {
        Ok(p) => {
            let err = (2..=6)
                .flat_map(|k| p.level_block(k).iter().map(move |x| (x - dn_multiplier(k, 3)).abs()))
                .fold(0.0, f64::max);
            Criterion::new(7, NAME, err <= 1e-8, format!("max deviation {err:.2e} for k = 2..6"))
        }
        Err(e) => Criterion::failed(7, NAME, e),
    }
}

/// `sup |Q(sV)| / s²` across `s = 1e-2, 1e-3, 1e-4` about `u_ε Λ`.
pub fn remainder_scaling(seed: u64) -> Criterion {
    const NAME: &str = "remainder quadratic scaling";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda = [0.6, 0.8];
    let samples: Vec<(f64, [f64; 2])> = (0..200)
        .map(|_| (rng.random_range(0.05..1.0), [rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)]))
        .collect();
    let mut values = Vec::new();
    for s in [1e-2, 1e-3, 1e-4] {
        let mut sup = 0.0f64;
        for (u, v) in &samples {
            let base = [lambda[0] * u, lambda[1] * u];
            match remainder_q(3, &base, &[s * v[0], s * v[1]]) {
                Ok(q) => sup = sup.max(q.iter().map(|x| x * x).sum::<f64>().sqrt() / (s * s)),
                Err(e) => return Criterion::failed(8, NAME, e),
            }
        }
        values.push(sup);
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(0.0, f64::max);
    let spread = hi / lo - 1.0;
    Criterion::new(8, NAME, spread <= 0.01, format!("sup|Q(sV)|/s² = [{}], spread {:.3}%", sci(&values), 100.0 * spread))
}

/// Zero remainder traces at `κ = 1`, `ε = 0.1`.
pub fn trivial_matching() -> Criterion {
    const NAME: &str = "trivial matching oracle";
    let base = ModelConfig::default();
    let cfg = ModelConfig {
        kappa: 1.0,
        potential: PotentialSpec::for_trivial_solution(3, 1.0, &base.lambda, 1.0),
        ..base
    };
    let ctx = MatchingContext::new(&cfg, 0.1);
    let opts = MatchOptions::default();
    let constants = match match_constants(&ctx, |_| Ok(ConstantTraces::zeros(2)), &opts) {
        Ok((p, _)) => p,
        Err(e) => return Criterion::failed(9, NAME, e),
    };
    let rho_err = (0..2).map(|i| (constants.rho[i] - 0.01 * cfg.lambda[i] / 4.0).abs()).fold(0.0, f64::max);
    let b_err = constants.b.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let profile = match DelaunayProfile::new(3, 0.1) {
        Ok(p) => p,
        Err(e) => return Criterion::failed(9, NAME, e),
    };
    let slopes = NeckSlopes::new(&profile, neck_scale(3, 0.1, 1.0, 0.0), ctx.radius);
    let coords = match match_coordinates(&ctx, slopes, |_| Ok(CoordinateTraces::zeros(2, 3)), &opts) {
        Ok((p, _)) => p,
        Err(e) => return Criterion::failed(9, NAME, e),
    };
    let c_err = coords.alpha(&ctx, 0.0).iter().chain(&coords.omega).flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    let passed = b_err <= 1e-12 && rho_err <= 1e-12 && c_err <= 1e-12;
    Criterion::new(
        9,
        NAME,
        passed,
        format!("ρ = ({:.6}, {:.6}); |b| {b_err:.1e}, |ρ - ε²Λ/4| {rho_err:.1e}, |α|,|ω| {c_err:.1e}", constants.rho[0], constants.rho[1]),
    )
}

/// `κ = 1` flags exactly the level-1 parallel block; `κ = 0.8` clears all
/// levels up to 6 with margin.
pub fn nondegeneracy() -> Criterion {
    const NAME: &str = "nondegeneracy detector";
    let model = |kappa: f64| {
        let base = ModelConfig::default();
        let cfg = ModelConfig {
            kappa,
            potential: PotentialSpec::for_trivial_solution(3, kappa, &base.lambda, 1.0),
            ..base
        };
        SphereModel::from_config(&cfg, Background::Sphere)
    };
    let (one, desk) = match (nondegeneracy_check(&model(1.0), 6, 1e-6), nondegeneracy_check(&model(0.8), 6, 1e-6)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Criterion::failed(10, NAME, e),
    };
    let flagged: Vec<_> = one.degenerate.iter().map(|b| (b.level, b.branch)).collect();
    let exact = flagged == [(1, crate::linop::Branch::Parallel)] && one.degenerate[0].singular <= 1e-6;
    let passed = exact && desk.nondegenerate && desk.min_singular >= 0.05;
    Criterion::new(10, NAME, passed, format!("κ = 1 flags {flagged:?}; κ = 0.8 margin {:.4}", desk.min_singular))
}

/// Radial glue over `ε ∈ {0.1, 0.05, 0.025}`: gaps and residual at 0.05,
/// far-field trend and inner ratio at every `ε`.
pub fn radial_glue() -> Criterion {
    const NAME: &str = "end-to-end radial glue";
    let cfg = ModelConfig::default();
    let opts = GlueOptions::default();
    let mut far = Vec::new();
    let mut inner = 0.0f64;
    let mut at_desk = None;
    for eps in [0.1, 0.05, 0.025] {
        match glue_end_to_end(&cfg, eps, &opts) {
            Ok(g) => {
                far.push(g.asymptotics.far_field);
                inner = inner.max(g.asymptotics.inner_deviation);
                if eps == 0.05 {
                    at_desk = Some((g.max_gap(), g.residual.global, g.min_component));
                }
            }
            Err(e) => return Criterion::failed(11, NAME, e),
        }
    }
    let (gap, residual, min) = at_desk.unwrap_or((f64::INFINITY, f64::INFINITY, 0.0));
    let decreasing = far.windows(2).all(|w| w[1] < w[0]);
    let passed = gap <= 1e-8 && residual <= 1e-6 && decreasing && inner <= 0.05 && min > 0.0;
    Criterion::new(
        11,
        NAME,
        passed,
        format!("ε = 0.05: gap {gap:.2e}, residual {residual:.2e}; far field [{}]; inner ratio deviation {inner:.1e}", sci(&far)),
    )
}

/// The conformal-Laplacian identity on 100 random radial samples.
pub fn conformal_samples(seed: u64) -> Criterion {
    const NAME: &str = "conformal identity";
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let rho = rng.random_range(0.05..2.0);
        let (a, b, c) = (rng.random_range(0.1..2.0), rng.random_range(0.2..3.0), rng.random_range(-1.0..1.0));
        // v = a + rho² positive, u = sin(b rho) + c
        let v = Jet { v: a + rho * rho, d1: 2.0 * rho, d2: 2.0 };
        let u = Jet { v: (b * rho).sin() + c, d1: b * (b * rho).cos(), d2: -b * b * (b * rho).sin() };
        let n = rng.random_range(3..=5u32);
        let (l, r) = conformal_identity(n, rho, u, v);
        worst = worst.max((l - r).abs() / (1.0 + r.abs()));
    }
    Criterion::new(12, NAME, worst <= 1e-8, format!("worst relative mismatch {worst:.2e} over 100 samples"))
}

fn sci(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ")
}
