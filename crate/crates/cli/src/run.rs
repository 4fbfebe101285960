//! Executes the checks of a scenario in declared order.

use crate::config::{load_model, CheckSpec, PathSpec, ScenarioConfig};
use srpath_core::diffusion::SimConfig;
use srpath_core::error::{Error, Result};
use srpath_core::functions::{parse_point_function, PointFunction};
use srpath_core::geometry::{ricci_bounds, ConnectionData, LieAlgebraModel};
use srpath_core::linalg::Vect;
use srpath_core::pathcalc::{parse_cylindrical, CameronMartinPath, CylindricalFunction};
use srpath_core::stats::Executor;
use srpath_core::verify::{CheckReport, NestedBudget, Status, Verifier, SMALL_TIMES};
use std::sync::Arc;

/// Steps of the small-time check over `[0, 0.02]` unless the check sets its own.
pub const SMALL_TIME_STEPS: usize = 40;

/// Runs every check of `scenario` on `exec`.
pub fn run_scenario(scenario: &ScenarioConfig, exec: &Executor) -> Result<Vec<CheckReport>> {
    scenario.validate()?;
    let model = load_model(&scenario.model)?;
    let conn = scenario.connection(&model);
    let mut reports = Vec::new();
    for check in &scenario.checks {
        reports.extend(run_check(scenario, &model, &conn, check, exec)?);
    }
    Ok(reports)
}

/// Overall exit status: failures count, `inconclusive` does not.
pub fn all_passed(reports: &[CheckReport]) -> bool {
    reports.iter().all(|r| r.status != Status::Fail)
}

fn point_function(model: &LieAlgebraModel, check: &CheckSpec) -> Result<Arc<dyn PointFunction>> {
    parse_point_function(model, check.f.as_deref().unwrap_or("bump"))
}

fn functional(model: &LieAlgebraModel, check: &CheckSpec, default: &str, horizon: f64) -> Result<CylindricalFunction> {
    parse_cylindrical(model, check.functional.as_deref().unwrap_or(default), horizon)
}

fn path(spec: &Option<PathSpec>, d: usize, config: &SimConfig) -> Result<CameronMartinPath> {
    spec.clone()
        .unwrap_or_else(|| PathSpec::default_for(d, config.horizon))
        .sample(d, config.horizon, config.steps)
}

fn vector(v: &Option<Vec<f64>>, d: usize, default: impl FnOnce() -> Vect) -> Result<Vect> {
    match v {
        Some(v) if v.len() == d => Ok(Vect::from_slice(v)),
        Some(v) => Err(Error::Config(format!("expected {d} vector entries, got {}", v.len()))),
        None => Ok(default()),
    }
}

fn nested(check: &CheckSpec) -> NestedBudget {
    let mut budget = NestedBudget::default();
    if let Some(n) = &check.nested {
        budget.inner_paths = n.inner_paths.unwrap_or(budget.inner_paths);
        budget.inner_steps = n.inner_steps.unwrap_or(budget.inner_steps);
        budget.batches = n.batches.unwrap_or(budget.batches);
    }
    budget
}

pub fn run_check(
    scenario: &ScenarioConfig,
    model: &LieAlgebraModel,
    conn: &ConnectionData,
    check: &CheckSpec,
    exec: &Executor,
) -> Result<Vec<CheckReport>> {
    let base = scenario.sim_config();
    let mut config = SimConfig {
        horizon: check.horizon.unwrap_or(base.horizon),
        steps: check.steps.unwrap_or(base.steps),
        paths: check.paths.unwrap_or(base.paths),
        seed: check.seed.unwrap_or(base.seed),
        scheme: base.scheme,
    };
    if check.name == "small_time_ricci" {
        config.horizon = SMALL_TIMES[0];
        config.steps = check.steps.unwrap_or(SMALL_TIME_STEPS);
    }
    let verifier = Verifier::new(model, conn, config.clone(), exec)?;
    let d = model.rank();
    let k_bound = check.curvature_bound.or(scenario.curvature_bound).unwrap_or_else(|| ricci_bounds(conn).k_sym);
    let horizon = config.horizon;
    let one = |r: CheckReport| Ok(vec![r]);
    match check.name.as_str() {
        "derivative" => {
            let v = vector(&check.v, d, || Vect::basis(d, 0))?;
            one(verifier.check_derivative_formula(&point_function(model, check)?, &v, check.t.unwrap_or(horizon))?)
        }
        "ibp_damped" => one(verifier.check_ibp_damped(&functional(model, check, "bump", horizon)?, &path(&check.k, d, &config)?)?),
        "ibp_gradient" => {
            one(verifier.check_ibp_gradient(&functional(model, check, "bump", horizon)?, &path(&check.h, d, &config)?)?)
        }
        "quasi_invariance" => {
            one(verifier.check_quasi_invariance(&functional(model, check, "bump", horizon)?, &path(&check.k, d, &config)?)?)
        }
        "inequality_i" => one(verifier.check_inequality_i(&functional(model, check, "bump", horizon)?, k_bound)?),
        "inequality_ii" => one(verifier.check_inequality_ii(&functional(model, check, "bump", horizon)?, k_bound)?),
        "inequality_v" => {
            one(verifier.check_inequality_v(&point_function(model, check)?, check.t.unwrap_or(horizon), k_bound)?)
        }
        "logsobolev" => one(verifier.check_logsobolev(&functional(model, check, "sqrt1p:bump", horizon)?, k_bound)?),
        "poincare" => one(verifier.check_poincare(&functional(model, check, "bump", horizon)?, k_bound)?),
        "spectral_gap" => one(verifier.check_spectral_gap(&functional(model, check, "bump", horizon)?, k_bound)?),
        "small_time_ricci" => {
            let alpha = vector(&check.v, d, || verifier.minimal_ricci_direction())?;
            one(verifier.check_small_time_ricci(&alpha)?)
        }
        "clark_ocone" => one(verifier.check_clark_ocone(&point_function(model, check)?, &nested(check))?),
        "semigroup" => {
            let t = check.t.unwrap_or(0.5 * horizon);
            let s = check.s.unwrap_or(horizon - t);
            one(verifier.check_semigroup(&point_function(model, check)?, t, s, &nested(check))?)
        }
        "pathwise" => {
            let spec = check.k.clone().unwrap_or_else(|| PathSpec::default_for(d, horizon));
            spec.validate(d)?;
            let f = functional(model, check, "bump", horizon)?;
            verifier.check_pathwise_identities(&f, |steps| CameronMartinPath::from_fn(horizon, steps, |t| spec.value(t, d)))
        }
        other => Err(Error::UnknownId(other.to_string())),
    }
}
