use proptest::prelude::*;
use srpath_core::diffusion::*;
use srpath_core::geometry::canonical_connection;
use srpath_core::linalg::{Mat, Vect};
use srpath_core::registry;
use srpath_core::stats::mean_stderr;

fn slope(scales: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = scales.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|x| x.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

#[test]
fn abelian_path_is_brownian_motion() {
    let m = registry::abelian(3).unwrap();
    let conn = canonical_connection(&m);
    let path = simulate_path(&m, &conn, &SimConfig::new(1.0, 50, 1, 3), 0).unwrap();
    let total = path.db.iter().fold(Vect::zeros(3), |acc, b| acc + *b);
    let real = m.realization().unwrap();
    assert!((real.chart_coords(path.end()) - total).max_abs() < 1e-13);
    for k in 0..=50 {
        assert_eq!(path.p[k], Mat::identity(3));
        assert!(path.a[k].is_zero());
        assert_eq!(path.q[k], Mat::identity(3));
        assert_eq!(path.q_hat[k], Mat::identity(3));
    }
}

#[test]
fn heisenberg_torsion_integral_is_minus_first_coordinate() {
    // T(X1, X2) = −Z, so A_t X2 = −B¹_t Z and A_t X1 = B²_t Z
    let m = registry::heisenberg3();
    let conn = canonical_connection(&m);
    let path = simulate_path(&m, &conn, &SimConfig::new(1.0, 100, 1, 9), 4).unwrap();
    let mut b = Vect::zeros(2);
    for k in 0..=100 {
        if k > 0 {
            b += path.db[k - 1];
        }
        assert!((path.a[k][(2, 1)] + b[0]).abs() < 1e-13);
        assert!((path.a[k][(2, 0)] - b[1]).abs() < 1e-13);
        assert_eq!(path.q[k], Mat::identity(3));
    }
}

#[test]
fn paths_depend_only_on_seed_and_index() {
    let m = registry::su2_hopf();
    let conn = canonical_connection(&m);
    let cfg = SimConfig::new(0.5, 40, 10, 77);
    let a = simulate_path(&m, &conn, &cfg, 6).unwrap();
    let b = simulate_path(&m, &conn, &cfg.clone(), 6).unwrap();
    assert_eq!(a.g, b.g);
    assert_eq!(a.q_hat, b.q_hat);
    let c = simulate_path(&m, &conn, &cfg, 7).unwrap();
    assert_ne!(a.g, c.g);
}

#[test]
fn hat_q_equation_converges_at_first_order() {
    let m = registry::so4_rolling();
    let conn = canonical_connection(&m);
    let sim = Simulator::new(&m, &conn).unwrap();
    let fine_cfg = SimConfig::new(0.5, 800, 1, 5);
    let mut errs = vec![0.0; 3];
    for index in 0..10 {
        let fine = sim.increments(&fine_cfg, index);
        for (level, factor) in [4usize, 2, 1].into_iter().enumerate() {
            let db = coarsen(&fine, factor);
            let path = sim.run(&db, 0.5 / db.len() as f64, Scheme::StratonovichMidpoint, Needs::ALL);
            errs[level] += hat_q_residual(&path) / 10.0;
        }
    }
    let s = slope(&[4.0, 2.0, 1.0], &errs);
    assert!(s > 0.8, "{errs:?} slope {s}");
}

#[test]
fn ito_and_stratonovich_torsion_integrals_agree_in_the_limit() {
    // pathwise the two schemes differ by a martingale of order √Δ on so(4)
    let m = registry::so4_rolling();
    let conn = canonical_connection(&m);
    let steps = [100, 400, 1600];
    let errs: Vec<f64> = steps
        .iter()
        .map(|&n| ito_stratonovich_discrepancy(&m, &conn, &SimConfig::new(0.5, n, 20, 11)).unwrap())
        .collect();
    let s = slope(&[4.0, 1.0, 0.25], &errs);
    assert!((0.35..0.75).contains(&s), "{errs:?} slope {s}");
    for m in [registry::heisenberg3(), registry::su2_hopf()] {
        let conn = canonical_connection(&m);
        assert!(ito_stratonovich_discrepancy(&m, &conn, &SimConfig::new(0.5, 100, 20, 11)).unwrap() < 1e-14);
    }
}

#[test]
fn heisenberg_weak_moments() {
    let m = registry::heisenberg3();
    let conn = canonical_connection(&m);
    let sim = Simulator::new(&m, &conn).unwrap();
    let cfg = SimConfig::new(0.8, 40, 20_000, 123);
    let (mut z, mut x2) = (Vec::new(), Vec::new());
    for i in 0..cfg.paths as u64 {
        let path = sim.simulate(&cfg, i, Needs::BASIC);
        // exponential coordinates of a unipotent 3x3 matrix
        let g = path.end();
        let (x, y) = (g[(0, 1)], g[(1, 2)]);
        z.push(g[(0, 2)] - 0.5 * x * y);
        x2.push(x * x);
    }
    let (mz, sz) = mean_stderr(&z);
    let (mx, sx) = mean_stderr(&x2);
    assert!(mz.abs() < 3.0 * sz, "{mz} ± {sz}");
    assert!((mx - 0.8).abs() < 3.0 * sx, "{mx} ± {sx}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn horizontal_block_of_p_stays_orthogonal(which in 0usize..3, seed in 0u64..1000) {
        let m = [registry::su2_hopf(), registry::so4_rolling(), registry::heisenberg3()][which].clone();
        let conn = canonical_connection(&m);
        let d = m.rank();
        let path = simulate_path(&m, &conn, &SimConfig::new(1.0, 200, 1, seed), 0).unwrap();
        for p in &path.p {
            let h = p.block(0, 0, d, d);
            prop_assert!((h.tr_matmul(&h) - Mat::identity(d)).max_abs() < 1e-12);
        }
        for (a, b) in path.p.iter().zip(&path.p_inv) {
            prop_assert!((a.matmul(b) - Mat::identity(m.dim())).max_abs() < 1e-12);
        }
    }

    #[test]
    fn a_maps_horizontal_to_vertical(which in 0usize..3, seed in 0u64..1000) {
        let m = [registry::su2_hopf(), registry::so4_rolling(), registry::heisenberg3()][which].clone();
        let conn = canonical_connection(&m);
        let (n, d) = (m.dim(), m.rank());
        let path = simulate_path(&m, &conn, &SimConfig::new(1.0, 100, 1, seed), 0).unwrap();
        for a in &path.a {
            prop_assert!(a.block(0, 0, d, n).max_abs() < 1e-13);
            prop_assert!(a.block(0, d, n, n - d).max_abs() < 1e-13);
        }
    }
}
