//! The acceptance battery: deterministic geometry checks followed by the
//! Monte Carlo scenarios, grouped by criterion number.

use crate::config::{CheckSpec, NestedSpec, ScenarioConfig};
use crate::run::run_scenario;
use srpath_core::development::variation_study;
use srpath_core::error::Result;
use srpath_core::functions::{AnalyticFunction, FdSteps, FiniteDifferenceFunction, FunctionKind, PointFunction};
use srpath_core::geometry::{
    canonical_connection, is_metric_preserving, ricci_bounds, structural_residuals, weitzenbock_residual, LieAlgebraModel,
};
use srpath_core::linalg::{Mat, Vect};
use srpath_core::registry;
use srpath_core::rng::{derive_seed, NormalStream};
use srpath_core::stats::{Executor, McEstimate};
use srpath_core::verify::{CheckReport, Metadata, Status};
use std::sync::Arc;

/// Seed of every suite scenario unless overridden.
pub const SUITE_SEED: u64 = 2024;

/// Models with `q ≡ 0` that the spectral-gap criterion covers.
pub const METRIC_PRESERVING_MODELS: &[&str] = &["heisenberg3", "su2_riemannian", "su2_hopf", "so4_rolling"];

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Caps every outer path count and scales the nested inner budget down
    /// with it. `None` runs the stated budgets.
    pub paths: Option<usize>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { seed: SUITE_SEED, paths: None }
    }
}

/// Criteria whose checks need no sampling.
pub const DETERMINISTIC_CRITERIA: &[u32] = &[1, 2, 3, 4, 5];
/// Criteria run as scenarios.
pub const SCENARIO_CRITERIA: &[u32] = &[6, 7, 8, 9, 10, 11, 12];

fn report(name: &str, model: &str, value: f64, target: f64, tolerance: f64, pass: bool) -> CheckReport {
    CheckReport {
        name: name.into(),
        lhs: McEstimate::exact(value),
        rhs: McEstimate::exact(target),
        margin: (value - target).abs(),
        tolerance,
        pass,
        status: if pass { Status::Pass } else { Status::Fail },
        metadata: Metadata::deterministic(model),
    }
}

fn within(name: &str, model: &str, value: f64, target: f64, tolerance: f64) -> CheckReport {
    report(name, model, value, target, tolerance, (value - target).abs() <= tolerance)
}

/// Point `exp(x)` with entries `x_i = tanh(z_i/2)` of standard normals from a stream keyed by `index`.
pub fn random_point(model: &LieAlgebraModel, seed: u64, index: u64) -> Result<Mat> {
    let mut s = NormalStream::new(derive_seed(seed, &[0x9e0, index]), 0);
    let z = s.normals(0, model.dim());
    let x = Vect::from_fn(model.dim(), |i| (0.5 * z[i]).tanh());
    Ok(model.require_realization()?.exp(&x))
}

/// Deterministic reports of criteria 1–5.
pub fn deterministic_reports(criterion: u32) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    match criterion {
        1 => {
            let m = registry::so4_rolling();
            let b = ricci_bounds(&canonical_connection(&m));
            out.push(within("ricci_bound_lo", m.name(), b.k_lo, 0.5, 1e-10));
            out.push(within("ricci_bound_hi", m.name(), b.k_hi, 2.0, 1e-10));
        }
        2 => {
            for (name, expected) in [("heisenberg3", true), ("su2_hopf", true), ("so4_rolling", true), ("solvable_nonmp", false)] {
                let m = registry::model(name)?;
                let mp = is_metric_preserving(&m);
                let conn = canonical_connection(&m);
                let (n, d) = (m.dim(), m.rank());
                let mut q_max = 0.0f64;
                for z in 0..n {
                    for i in 0..d {
                        for j in 0..d {
                            q_max = q_max.max(conn.q(z, i, j).abs());
                        }
                    }
                }
                let pass = if expected {
                    mp.preserving && mp.residual < 1e-12 && q_max == 0.0
                } else {
                    !mp.preserving && q_max != 0.0
                };
                let r = report("metric_preserving", name, mp.residual, 0.0, 1e-12, pass)
                    .detail("expected", f64::from(u8::from(expected)))
                    .detail("q_max", q_max);
                out.push(r);
            }
        }
        3 => {
            for m in registry::all_models().into_iter().filter(|m| is_metric_preserving(m).preserving) {
                let r = structural_residuals(&canonical_connection(&m));
                out.push(within("structural_identities", m.name(), r.max(), 0.0, 1e-12));
            }
        }
        4 => {
            for m in registry::all_models() {
                let conn = canonical_connection(&m);
                let f: Arc<dyn PointFunction> = Arc::new(AnalyticFunction::new(&m, FunctionKind::Bump)?);
                let fd = FiniteDifferenceFunction::wrap(&m, f.clone(), FdSteps::default())?;
                let (mut exact, mut approx) = (0.0f64, 0.0f64);
                for i in 0..20 {
                    let g = random_point(&m, SUITE_SEED, i)?;
                    for c in 0..m.dim() {
                        let z = Vect::basis(m.dim(), c);
                        exact = exact.max(weitzenbock_residual(&conn, f.as_ref(), &g, &z)?);
                        approx = approx.max(weitzenbock_residual(&conn, &fd, &g, &z)?);
                    }
                }
                out.push(within("weitzenbock_analytic", m.name(), exact, 0.0, 1e-10));
                out.push(within("weitzenbock_finite_difference", m.name(), approx, 0.0, 1e-5));
            }
        }
        5 => {
            for name in ["su2_hopf", "so4_rolling"] {
                let m = registry::model(name)?;
                let study = variation_controls(&m)?;
                let mut r = report("variation_slope", name, study.slope, 1.0, 0.2, (0.8..=1.2).contains(&study.slope));
                for l in &study.levels {
                    r = r.detail(&format!("error_steps{}", l.steps), l.error);
                }
                out.push(r);
            }
            let m = registry::heisenberg3();
            let study = variation_controls(&m)?;
            let worst = study.levels.iter().map(|l| l.h_minus_k).fold(0.0, f64::max);
            out.push(within("variation_flat_h_equals_k", m.name(), worst, 0.0, 1e-10));
        }
        _ => {}
    }
    Ok(out)
}

/// Variation study with the battery's controls: three halvings from 50 steps
/// and `s = 0.04` on `[0, 1]`.
pub fn variation_controls(m: &LieAlgebraModel) -> Result<srpath_core::development::VariationStudy> {
    let conn = canonical_connection(m);
    let d = m.rank();
    let u = |t: f64| Vect::from_fn(d, |i| (1.0 + i as f64) * t + (2.0 * t + i as f64).sin() - (i as f64).sin());
    let k = |t: f64| Vect::from_fn(d, |i| (0.5 - i as f64) * t * t + (3.0 * t).sin());
    variation_study(m, &conn, u, k, 1.0, 50, 4e-2, 3)
}

fn checks(names: &[&str]) -> Vec<CheckSpec> {
    names.iter().map(|n| CheckSpec::named(n)).collect()
}

fn scenario(model: &str, horizon: f64, steps: usize, paths: usize, checks: Vec<CheckSpec>, opts: &SuiteOptions) -> ScenarioConfig {
    let mut checks = checks;
    if let Some(p) = opts.paths {
        let inner = (p / 20).clamp(50, 1000);
        for c in &mut checks {
            c.paths = c.paths.map(|q| q.min(p));
            if let Some(n) = &mut c.nested {
                n.inner_paths = Some(inner);
            }
        }
    }
    ScenarioConfig {
        model: model.into(),
        horizon,
        steps,
        paths: opts.paths.map_or(paths, |p| p.min(paths)),
        seed: opts.seed,
        checks,
        ..ScenarioConfig::default()
    }
}

/// Two-time product functional at `T/2` and `T`.
fn two_time(horizon: f64) -> String {
    format!("product:{},{}:bump", 0.5 * horizon, horizon)
}

/// Scenarios of criteria 6–12.
pub fn scenarios(criterion: u32, opts: &SuiteOptions) -> Vec<ScenarioConfig> {
    match criterion {
        6 => vec![scenario("so4_rolling", 0.5, 800, 100, checks(&["pathwise"]), opts)],
        7 => vec![
            scenario("heisenberg3", 0.5, 400, 100_000, checks(&["derivative"]), opts),
            scenario("so4_rolling", 0.25, 400, 100_000, checks(&["derivative"]), opts),
        ],
        8 => ["heisenberg3", "so4_rolling"]
            .iter()
            .map(|m| scenario(m, 0.5, 400, 100_000, checks(&["ibp_damped", "ibp_gradient", "quasi_invariance"]), opts))
            .collect(),
        9 => ["heisenberg3", "so4_rolling"]
            .iter()
            .map(|m| {
                let horizon = 0.5;
                let mut list = Vec::new();
                for f in ["bump".to_string(), two_time(horizon)] {
                    for name in ["inequality_i", "inequality_ii", "poincare"] {
                        let mut c = CheckSpec::named(name);
                        c.functional = Some(f.clone());
                        list.push(c);
                    }
                    let mut c = CheckSpec::named("logsobolev");
                    c.functional = Some(format!("sqrt1p:{f}"));
                    list.push(c);
                }
                list.push(CheckSpec::named("inequality_v"));
                scenario(m, horizon, 200, 20_000, list, opts)
            })
            .collect(),
        10 => METRIC_PRESERVING_MODELS
            .iter()
            .map(|m| scenario(m, 0.25, 200, 20_000, checks(&["spectral_gap"]), opts))
            .collect(),
        11 => ["heisenberg3", "su2_hopf", "so4_rolling"]
            .iter()
            .map(|m| scenario(m, 0.5, 400, 100_000, checks(&["small_time_ricci"]), opts))
            .collect(),
        12 => {
            let mut c = CheckSpec::named("clark_ocone");
            c.nested = Some(NestedSpec { inner_paths: Some(1000), inner_steps: None, batches: None });
            vec![scenario("heisenberg3", 0.5, 400, 20_000, vec![c], opts)]
        }
        _ => Vec::new(),
    }
}

/// Every report of one criterion, in declared order.
pub fn run_criterion(criterion: u32, opts: &SuiteOptions, exec: &Executor) -> Result<Vec<CheckReport>> {
    let mut out = deterministic_reports(criterion)?;
    for s in scenarios(criterion, opts) {
        out.extend(run_scenario(&s, exec)?);
    }
    Ok(out)
}

/// Criteria 1–12 in order. Criterion 13 is a property of this output.
pub fn run_suite(opts: &SuiteOptions, exec: &Executor) -> Result<Vec<(u32, Vec<CheckReport>)>> {
    (1..=12).map(|c| Ok((c, run_criterion(c, opts, exec)?))).collect()
}
