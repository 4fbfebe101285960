use srpath_core::diffusion::SimConfig;
use srpath_core::functions::parse_point_function;
use srpath_core::geometry::{canonical_connection, ricci_bounds, LieAlgebraModel};
use srpath_core::linalg::Vect;
use srpath_core::pathcalc::{parse_cylindrical, CameronMartinPath};
use srpath_core::registry;
use srpath_core::stats::Executor;
use srpath_core::verify::{NestedBudget, Status, Verifier};

fn with_verifier<R>(model: &LieAlgebraModel, config: SimConfig, workers: usize, f: impl FnOnce(&Verifier) -> R) -> R {
    let conn = canonical_connection(model);
    let exec = Executor::new(workers);
    let v = Verifier::new(model, &conn, config, &exec).unwrap();
    f(&v)
}

fn wiggly(d: usize, horizon: f64, steps: usize) -> CameronMartinPath {
    CameronMartinPath::from_fn(horizon, steps, |t| Vect::from_fn(d, |a| (a as f64 + 1.0) * (3.0 * t).sin()))
}

#[test]
fn constant_function_gives_zero_on_both_sides() {
    let m = registry::heisenberg3();
    with_verifier(&m, SimConfig::new(0.5, 50, 500, 1), 1, |v| {
        let f = parse_point_function(&m, "const:2").unwrap();
        let r = v.check_derivative_formula(&f, &Vect::basis(2, 0), 0.5).unwrap();
        assert_eq!((r.lhs.mean, r.rhs.mean), (0.0, 0.0));
        let big_f = parse_cylindrical(&m, "const:2", 0.5).unwrap();
        let r = v.check_poincare(&big_f, 0.0).unwrap();
        assert_eq!((r.lhs.mean, r.rhs.mean, r.margin), (0.0, 0.0, 0.0));
        assert!(r.pass);
    });
}

#[test]
fn abelian_coordinate_derivative_is_exact() {
    let m = registry::abelian(3).unwrap();
    with_verifier(&m, SimConfig::new(0.5, 50, 200, 3), 1, |v| {
        let f = parse_point_function(&m, "coord:2").unwrap();
        let r = v.check_derivative_formula(&f, &Vect::basis(3, 1), 0.5).unwrap();
        assert!((r.lhs.mean - 1.0).abs() < 1e-9 && (r.rhs.mean - 1.0).abs() < 1e-12, "{r:?}");
        assert!(r.rhs.stderr < 1e-12);
    });
}

#[test]
fn common_random_numbers_beat_independent_sampling() {
    let m = registry::su2_hopf();
    with_verifier(&m, SimConfig::new(0.5, 100, 2000, 5), 1, |v| {
        let f = parse_point_function(&m, "bump").unwrap();
        let r = v.check_derivative_formula(&f, &Vect::basis(2, 0), 0.5).unwrap();
        let d = &r.metadata.details;
        assert!(d["diff_stderr"] * 10.0 < d["independent_stderr"], "{d:?}");
        let big_f = parse_cylindrical(&m, "bump", 0.5).unwrap();
        let r = v.check_quasi_invariance(&big_f, &wiggly(2, 0.5, 100)).unwrap();
        let d = &r.metadata.details;
        assert!(d["diff_stderr"] * 10.0 < d["independent_stderr"], "{d:?}");
    });
}

#[test]
fn larger_curvature_bound_loosens_the_inequalities() {
    let m = registry::so4_rolling();
    with_verifier(&m, SimConfig::new(0.25, 50, 2000, 7), 1, |v| {
        let f = parse_cylindrical(&m, "product:0.125,0.25:bump", 0.25).unwrap();
        let k = ricci_bounds(v.conn).k_sym;
        for check in [Verifier::check_inequality_i, Verifier::check_inequality_ii, Verifier::check_poincare] {
            let small = check(v, &f, k).unwrap();
            let large = check(v, &f, 10.0 * k).unwrap();
            assert_eq!(small.lhs, large.lhs);
            assert!(large.rhs.mean > small.rhs.mean && large.margin > small.margin, "{} {}", small.name, large.name);
            assert!(small.pass && large.pass);
        }
    });
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let m = registry::su2_hopf();
    let run = |workers| {
        with_verifier(&m, SimConfig::new(0.5, 40, 300, 11), workers, |v| {
            let f = parse_cylindrical(&m, "product:0.25,0.5:bump", 0.5).unwrap();
            vec![
                v.check_ibp_damped(&f, &wiggly(2, 0.5, 40)).unwrap(),
                v.check_logsobolev(&parse_cylindrical(&m, "sqrt1p:bump", 0.5).unwrap(), 1.0).unwrap(),
                v.check_spectral_gap(&f, 1.0).unwrap(),
            ]
        })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn pathwise_identities_converge_on_hopf() {
    let m = registry::su2_hopf();
    with_verifier(&m, SimConfig::new(0.5, 400, 20, 13), 1, |v| {
        let f = parse_cylindrical(&m, "product:0.25,0.5:bump", 0.5).unwrap();
        let reports = v.check_pathwise_identities(&f, |n| wiggly(2, 0.5, n)).unwrap();
        assert_eq!(reports.len(), 4);
        for r in reports {
            assert!(r.pass, "{r:?}");
        }
    });
}

/// The squared quotient tends to `⟨α, Ric α⟩` and the first-order quotient to
/// half of it; see the `check_small_time_ricci` documentation.
#[test]
fn small_time_quotients_match_the_corrected_limits() {
    for (name, eigen) in [("su2_hopf", 1.0), ("so4_rolling", 0.5)] {
        let m = registry::model(name).unwrap();
        with_verifier(&m, SimConfig::new(0.02, 40, 20_000, 17), 1, |v| {
            let alpha = v.minimal_ricci_direction();
            let r = v.check_small_time_ricci(&alpha).unwrap();
            let d = &r.metadata.details;
            assert!((d["ricci_quadratic"] - eigen).abs() < 1e-12);
            let tol = |se: f64| (3.0 * se).max(0.1 * eigen);
            assert!((r.lhs.mean - eigen).abs() < tol(r.lhs.stderr), "{name}: {}", r.lhs.mean);
            assert!((d["first_order_limit"] - 0.5 * eigen).abs() < tol(d["first_order_stderr"]), "{name}: {d:?}");
        });
    }
}

#[test]
fn flat_model_small_time_quotient_vanishes() {
    let m = registry::heisenberg3();
    with_verifier(&m, SimConfig::new(0.02, 40, 2000, 19), 1, |v| {
        let r = v.check_small_time_ricci(&Vect::basis(2, 0)).unwrap();
        assert!(r.pass && r.lhs.mean.abs() < 1e-9, "{r:?}");
    });
}

#[test]
fn semigroup_property_holds_with_small_nested_budget() {
    let m = registry::heisenberg3();
    with_verifier(&m, SimConfig::new(0.5, 40, 400, 23), 1, |v| {
        let f = parse_point_function(&m, "bump").unwrap();
        let budget = NestedBudget { inner_paths: 200, inner_steps: 20, batches: 20 };
        let r = v.check_semigroup(&f, 0.25, 0.25, &budget).unwrap();
        assert_ne!(r.status, Status::Fail, "{r:?}");
    });
}

#[test]
fn nested_budget_must_split_into_batches() {
    let m = registry::heisenberg3();
    with_verifier(&m, SimConfig::new(0.5, 40, 30, 1), 1, |v| {
        let f = parse_point_function(&m, "bump").unwrap();
        assert!(v.check_clark_ocone(&f, &NestedBudget::default()).is_err());
    });
}

#[test]
fn logsobolev_rejects_functions_that_vanish() {
    let m = registry::heisenberg3();
    with_verifier(&m, SimConfig::new(0.5, 20, 50, 1), 1, |v| {
        let f = parse_cylindrical(&m, "const:0", 0.5).unwrap();
        assert!(v.check_logsobolev(&f, 0.0).is_err());
    });
}
