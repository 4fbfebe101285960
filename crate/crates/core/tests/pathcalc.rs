use proptest::prelude::*;
use srpath_core::diffusion::*;
use srpath_core::functions::{parse_point_function, AnalyticFunction, FunctionKind, PointFunction};
use srpath_core::geometry::canonical_connection;
use srpath_core::linalg::{Mat, Vect};
use srpath_core::pathcalc::*;
use srpath_core::registry;
use srpath_core::stats::mean_stderr;
use std::sync::Arc;

fn f(model: &srpath_core::geometry::LieAlgebraModel, id: &str) -> Arc<dyn PointFunction> {
    parse_point_function(model, id).unwrap()
}

fn wiggly_k(d: usize, horizon: f64, steps: usize) -> CameronMartinPath {
    CameronMartinPath::from_fn(horizon, steps, |t| Vect::from_fn(d, |i| (1.0 + i as f64) * t + 0.3 * (3.0 * t + i as f64).sin()))
}

#[test]
fn abelian_gradients_are_classical() {
    let m = registry::abelian(2).unwrap();
    let conn = canonical_connection(&m);
    let cfg = SimConfig::new(1.0, 20, 1, 1);
    let path = simulate_path(&m, &conn, &cfg, 0).unwrap();
    let quad = AnalyticFunction::new(
        &m,
        FunctionKind::Quadratic { linear: Vect::from_slice(&[1.0, -2.0]), quadratic: Mat::identity(2) },
    )
    .unwrap();
    let cyl = CylindricalFunction::single(1.0, Arc::new(quad.clone()));
    let (nodes, warnings) = cyl.snap(path.dt, path.steps()).unwrap();
    assert!(warnings.is_empty());
    let v = cyl.evaluate(&path, &nodes);
    let dg = gradient(&path, &v);
    let dt = damped_gradient(&path, &v);
    let df = quad.d1(path.end());
    for g in dg.values.iter().chain([&dg.at_zero]) {
        assert!((*g - df).max_abs() < 1e-14);
    }
    assert!(dg.max_gap(&dt) < 1e-14);
}

#[test]
fn constant_functional_has_zero_gradient() {
    let m = registry::so4_rolling();
    let conn = canonical_connection(&m);
    let path = simulate_path(&m, &conn, &SimConfig::new(0.5, 50, 1, 2), 0).unwrap();
    let cyl = CylindricalFunction::single(0.5, f(&m, "const:3"));
    let (nodes, _) = cyl.snap(path.dt, path.steps()).unwrap();
    let v = cyl.evaluate(&path, &nodes);
    assert_eq!(v.value, 3.0);
    assert!(gradient(&path, &v).values.iter().all(|g| g.max_abs() == 0.0));
}

#[test]
fn snapping_warns_and_rejects_late_times() {
    let m = registry::heisenberg3();
    let cyl = CylindricalFunction::product(vec![0.23, 0.5], vec![f(&m, "bump"), f(&m, "bump")]).unwrap();
    let (nodes, warnings) = cyl.snap(0.01, 50).unwrap();
    assert_eq!(nodes, vec![23, 50]);
    assert!(warnings.is_empty());
    let (nodes, warnings) = cyl.snap(0.02, 25).unwrap();
    assert_eq!(nodes, vec![12, 25]);
    assert_eq!(warnings.len(), 1);
    assert!(matches!(cyl.snap(0.01, 40), Err(srpath_core::Error::TimeBeyondHorizon(..))));
}

#[test]
fn parse_cylindrical_ids() {
    let m = registry::heisenberg3();
    let c = parse_cylindrical(&m, "product:0.25,0.5:bump", 1.0).unwrap();
    assert_eq!(c.times(), &[0.25, 0.5]);
    let c = parse_cylindrical(&m, "sum:0.1,0.2:coord:1;matentry:1,3", 1.0).unwrap();
    assert_eq!(c.times().len(), 2);
    let c = parse_cylindrical(&m, "sqrt1p:bump", 0.7).unwrap();
    assert_eq!(c.times(), &[0.7]);
    assert!(parse_cylindrical(&m, "product:0.5,0.25:bump", 1.0).is_err());
    assert!(parse_cylindrical(&m, "nonsense", 1.0).is_err());
}

#[test]
fn product_differentials_follow_the_product_rule() {
    let m = registry::su2_hopf();
    let conn = canonical_connection(&m);
    let path = simulate_path(&m, &conn, &SimConfig::new(0.5, 50, 1, 8), 3).unwrap();
    let (b, c) = (f(&m, "bump"), f(&m, "matentry:1,1"));
    let cyl = CylindricalFunction::product(vec![0.2, 0.5], vec![b.clone(), c.clone()]).unwrap();
    let (nodes, _) = cyl.snap(path.dt, path.steps()).unwrap();
    let v = cyl.evaluate(&path, &nodes);
    let (g1, g2) = (path.g[20], path.g[50]);
    assert!((v.value - b.value(&g1) * c.value(&g2)).abs() < 1e-15);
    assert!((v.slots[0].1 - b.d1(&g1).scale(c.value(&g2))).max_abs() < 1e-15);
    assert!((v.slots[1].1 - c.d1(&g2).scale(b.value(&g1))).max_abs() < 1e-15);
    let root = cyl.clone().with_outer(Outer::SqrtOnePlus).evaluate(&path, &nodes);
    assert!((root.value - (1.0 + v.value).sqrt()).abs() < 1e-15);
}

#[test]
fn heisenberg_gradient_matches_finite_difference_of_driving_path() {
    // flat transports and Ric = 0: d/ds F(X(B + s k)) = ⟨DF, k⟩ up to the
    // left-point reading of A, an O(Δ) effect
    let m = registry::heisenberg3();
    let conn = canonical_connection(&m);
    let sim = Simulator::new(&m, &conn).unwrap();
    let cyl = CylindricalFunction::single(1.0, f(&m, "coord:3"));
    let fine_cfg = SimConfig::new(1.0, 1600, 1, 21);
    let mut errs = [0.0; 2];
    for index in 0..5 {
        let fine = sim.increments(&fine_cfg, index);
        for (level, factor) in [16, 1].into_iter().enumerate() {
            let db = coarsen(&fine, factor);
            let steps = db.len();
            let dt = 1.0 / steps as f64;
            let k = wiggly_k(2, 1.0, steps);
            let path = sim.run(&db, dt, Scheme::StratonovichMidpoint, Needs::ALL);
            let (nodes, _) = cyl.snap(dt, steps).unwrap();
            let lhs = gradient(&path, &cyl.evaluate(&path, &nodes)).pairing(&k);
            let eps = 1e-4;
            let value = |s: f64| {
                let p = sim.run(&perturbed_increments(&db, &k, s), dt, Scheme::StratonovichMidpoint, Needs::BASIC);
                cyl.value(&p, &nodes)
            };
            let fd = (value(eps) - value(-eps)) / (2.0 * eps);
            assert!((lhs - fd).abs() < 5.0 * dt, "{lhs} vs {fd} at {steps} steps");
            errs[level] += (lhs - fd).abs();
        }
    }
    assert!(errs[0] / errs[1] > 6.0, "{errs:?}");
}

#[test]
fn heisenberg_damped_gradient_equals_gradient() {
    let m = registry::heisenberg3();
    let conn = canonical_connection(&m);
    let path = simulate_path(&m, &conn, &SimConfig::new(1.0, 200, 1, 4), 0).unwrap();
    let cyl = CylindricalFunction::product(vec![0.4, 1.0], vec![f(&m, "bump"), f(&m, "coord:3")]).unwrap();
    let (nodes, _) = cyl.snap(path.dt, path.steps()).unwrap();
    let v = cyl.evaluate(&path, &nodes);
    let gap = gradient(&path, &v).max_gap(&damped_gradient(&path, &v));
    assert!(gap < 1e-12, "{gap}");
}

#[test]
fn gradient_is_adapted() {
    // changing increments after step j leaves G_k, k ≤ j, unchanged apart from
    // the cylinder slot values, which are fixed here by a linear functional
    let m = registry::abelian(2).unwrap();
    let conn = canonical_connection(&m);
    let sim = Simulator::new(&m, &conn).unwrap();
    let cfg = SimConfig::new(1.0, 40, 1, 6);
    let mut db = sim.increments(&cfg, 0);
    let cyl = CylindricalFunction::product(vec![0.5, 1.0], vec![f(&m, "coord:1"), f(&m, "const:2")]).unwrap();
    let run = |db: &[Vect]| {
        let p = sim.run(db, cfg.dt(), cfg.scheme, Needs::ALL);
        let (nodes, _) = cyl.snap(p.dt, p.steps()).unwrap();
        gradient(&p, &cyl.evaluate(&p, &nodes))
    };
    let before = run(&db);
    db[30] = db[30].scale(-3.0);
    let after = run(&db);
    assert_eq!(before.values[..30], after.values[..30]);
    assert!(before.values[20..].iter().all(|g| g.max_abs() == 0.0));
}

#[test]
fn reparametrization_roundtrip_is_second_order() {
    let m = registry::so4_rolling();
    let conn = canonical_connection(&m);
    let sim = Simulator::new(&m, &conn).unwrap();
    let fine = sim.increments(&SimConfig::new(1.0, 800, 1, 13), 0);
    let mut errs = Vec::new();
    for factor in [4, 2, 1] {
        let db = coarsen(&fine, factor);
        let steps = db.len();
        let path = sim.run(&db, 1.0 / steps as f64, Scheme::StratonovichMidpoint, Needs::Q);
        let k = CameronMartinPath::linear(1.0, steps, &Vect::from_slice(&[1.0, -0.5, 0.25, 2.0]));
        let back = reparam_h_to_k(&conn, &path, &reparam_k_to_h(&path, &k));
        errs.push(back.values().iter().zip(k.values()).map(|(a, b)| (*a - *b).max_abs()).fold(0.0, f64::max));
    }
    assert!(errs[0] / errs[2] > 10.0 && errs[2] < 1e-5, "{errs:?}");
}

#[test]
fn ricci_free_reparametrization_is_identity() {
    let m = registry::heisenberg3();
    let conn = canonical_connection(&m);
    let path = simulate_path(&m, &conn, &SimConfig::new(1.0, 100, 1, 5), 0).unwrap();
    let k = wiggly_k(2, 1.0, 100);
    assert_eq!(reparam_k_to_h(&path, &k), k);
    assert!(conversion_identity_check(&path, &k) < 1e-13);
}

#[test]
fn cm_pairing_examples() {
    let k = CameronMartinPath::linear(2.0, 10, &Vect::from_slice(&[1.0, 0.0]));
    let db = vec![Vect::from_slice(&[0.2, 5.0]); 10];
    assert!((cm_pairing(&k, &db) - 2.0).abs() < 1e-14);
    assert_eq!(cm_pairing(&CameronMartinPath::zeros(2, 2.0, 10), &db), 0.0);
    assert!((k.energy() - 2.0).abs() < 1e-14);
}

#[test]
fn ito_isometry_and_girsanov_mean() {
    let m = registry::su2_hopf();
    let conn = canonical_connection(&m);
    let sim = Simulator::new(&m, &conn).unwrap();
    let cfg = SimConfig::new(1.0, 50, 20_000, 31);
    let k = wiggly_k(2, 1.0, 50);
    let mut sq = Vec::new();
    let mut weights = Vec::new();
    for i in 0..cfg.paths as u64 {
        let db = sim.increments(&cfg, i);
        sq.push(cm_pairing(&k, &db).powi(2));
        weights.push(girsanov_weight(&k, &db, 0.4));
    }
    let (m2, se2) = mean_stderr(&sq);
    assert!((m2 - k.energy()).abs() < 3.0 * se2, "{m2} ± {se2} vs {}", k.energy());
    let (mw, sew) = mean_stderr(&weights);
    assert!(weights.iter().all(|w| *w > 0.0));
    assert!((mw - 1.0).abs() < 3.0 * sew, "{mw} ± {sew}");
}

#[test]
fn zero_perturbation_reproduces_the_path() {
    let m = registry::so4_rolling();
    let conn = canonical_connection(&m);
    let cfg = SimConfig::new(0.5, 30, 1, 2);
    let k = wiggly_k(4, 0.5, 30);
    let a = perturbed_path(&m, &conn, &cfg, &k, 0.0, 0).unwrap();
    let b = simulate_path(&m, &conn, &cfg, 0).unwrap();
    assert_eq!(a.g, b.g);
}

#[test]
fn abelian_perturbation_shifts_by_k() {
    let m = registry::abelian(3).unwrap();
    let conn = canonical_connection(&m);
    let cfg = SimConfig::new(1.0, 30, 1, 2);
    let k = wiggly_k(3, 1.0, 30);
    let a = perturbed_path(&m, &conn, &cfg, &k, 0.5, 0).unwrap();
    let b = simulate_path(&m, &conn, &cfg, 0).unwrap();
    let real = m.realization().unwrap();
    let shift = real.chart_coords(a.end()) - real.chart_coords(b.end());
    assert!((shift - k.values()[30].scale(0.5)).max_abs() < 1e-13);
}

/// Largest pathwise residuals of the two gradient conversions on `so4_rolling`.
fn conversion_residuals(factor: usize, index: u64) -> (f64, f64, f64) {
    let m = registry::so4_rolling();
    let conn = canonical_connection(&m);
    let sim = Simulator::new(&m, &conn).unwrap();
    let fine = sim.increments(&SimConfig::new(0.5, 800, 1, 17), index);
    let db = coarsen(&fine, factor);
    let steps = db.len();
    let path = sim.run(&db, 0.5 / steps as f64, Scheme::StratonovichMidpoint, Needs::ALL);
    let cyl = CylindricalFunction::product(vec![0.25, 0.5], vec![f(&m, "bump"), f(&m, "matentry:1,1")]).unwrap();
    let (nodes, _) = cyl.snap(path.dt, steps).unwrap();
    let v = cyl.evaluate(&path, &nodes);
    let d = gradient(&path, &v);
    let damped = damped_gradient(&path, &v);
    let converted = convert_gradients(&conn, &path, &d);
    let k = wiggly_k(4, 0.5, steps);
    let h = reparam_k_to_h(&path, &k);
    (damped.max_gap(&converted), (damped.pairing(&k) - d.pairing(&h)).abs(), conversion_identity_check(&path, &k))
}

#[test]
fn so4_pathwise_conversions_shrink_with_the_step() {
    let mut coarse = (0.0, 0.0, 0.0);
    let mut fine = (0.0, 0.0, 0.0);
    for index in 0..4 {
        let c = conversion_residuals(4, index);
        let f = conversion_residuals(1, index);
        coarse = (coarse.0 + c.0, coarse.1 + c.1, coarse.2 + c.2);
        fine = (fine.0 + f.0, fine.1 + f.1, fine.2 + f.2);
    }
    // a quarter of the step: first order means a ratio near 4
    assert!(coarse.0 / fine.0 > 2.8, "{coarse:?} {fine:?}");
    assert!(coarse.1 / fine.1 > 2.8, "{coarse:?} {fine:?}");
    assert!(coarse.2 / fine.2 > 2.8, "{coarse:?} {fine:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn energy_and_pairing_are_consistent(seed in 0u64..500, which in 0usize..3) {
        let m = [registry::su2_hopf(), registry::so4_rolling(), registry::heisenberg3()][which].clone();
        let conn = canonical_connection(&m);
        let path = simulate_path(&m, &conn, &SimConfig::new(0.5, 40, 1, seed), 0).unwrap();
        let cyl = CylindricalFunction::single(0.5, f(&m, "bump"));
        let (nodes, _) = cyl.snap(path.dt, 40).unwrap();
        let g = gradient(&path, &cyl.evaluate(&path, &nodes));
        // ⟨G, G⟩ with G read as a Cameron-Martin velocity
        let mut acc = Vect::zeros(m.rank());
        let mut vals = vec![acc];
        for v in &g.values {
            acc += v.scale(path.dt);
            vals.push(acc);
        }
        let as_path = CameronMartinPath::new(path.dt, vals).unwrap();
        prop_assert!((g.pairing(&as_path) - g.energy()).abs() < 1e-12 * (1.0 + g.energy()));
    }

    #[test]
    fn converted_gradient_is_gradient_without_ricci(seed in 0u64..500) {
        let m = registry::heisenberg3();
        let conn = canonical_connection(&m);
        let path = simulate_path(&m, &conn, &SimConfig::new(0.5, 40, 1, seed), 0).unwrap();
        let cyl = CylindricalFunction::single(0.5, f(&m, "bump"));
        let (nodes, _) = cyl.snap(path.dt, 40).unwrap();
        let g = gradient(&path, &cyl.evaluate(&path, &nodes));
        prop_assert_eq!(convert_gradients(&conn, &path, &g), g);
    }
}
