use proptest::prelude::*;
use srpath_core::development::*;
use srpath_core::geometry::{canonical_connection, LieAlgebraModel};
use srpath_core::linalg::{Mat, Vect};
use srpath_core::registry;

fn smooth_control(d: usize, horizon: f64, steps: usize, coef: &[f64]) -> ControlPath {
    ControlPath::from_fn(horizon, steps, |t| {
        Vect::from_fn(d, |i| {
            let a = coef[i % coef.len()];
            let b = coef[(i + 1) % coef.len()];
            a * t + b * (2.0 * t + i as f64).sin() - b * (i as f64).sin()
        })
    })
    .unwrap()
}

/// Slope of log(err) against log(scale) by least squares.
fn slope(scales: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = scales.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|x| x.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

#[test]
fn heisenberg_straight_line_torsion_integral() {
    let m = registry::heisenberg3();
    let conn = canonical_connection(&m);
    let horizon = 0.7;
    let u = ControlPath::from_fn(horizon, 50, |t| Vect::from_slice(&[t, 0.0])).unwrap();
    let dev = develop(&m, &conn, &u).unwrap();
    let a = dev.a.last().unwrap();
    let mut expected = Mat::zeros(3, 3);
    expected[(2, 1)] = -horizon;
    assert!((*a - expected).max_abs() < 1e-14, "{a:?}");
}

#[test]
fn antidevelop_constant_path_is_zero() {
    let m = registry::so4_rolling();
    let conn = canonical_connection(&m);
    let g = vec![Mat::identity(4); 6];
    let u = antidevelop(&m, &conn, &g, 0.1).unwrap();
    assert!(u.increments().iter().all(|v| v.max_abs() == 0.0));
}

#[test]
fn roundtrip_heisenberg() {
    let m = registry::heisenberg3();
    let conn = canonical_connection(&m);
    let u = smooth_control(2, 1.0, 200, &[0.7, -1.3]);
    let dev = develop(&m, &conn, &u).unwrap();
    let back = antidevelop(&m, &conn, &dev.g, u.dt()).unwrap();
    let err = back.increments().iter().zip(u.increments()).map(|(a, b)| (*a - *b).max_abs()).fold(0.0, f64::max);
    let dt = u.dt();
    assert!(err <= dt * dt, "{err}");
}

#[test]
fn roundtrip_so4_relative_error() {
    let m = registry::so4_rolling();
    let conn = canonical_connection(&m);
    let u = smooth_control(4, 1.0, 1000, &[0.9, -0.4, 1.2, 0.3]);
    let dev = develop(&m, &conn, &u).unwrap();
    let back = antidevelop(&m, &conn, &dev.g, u.dt()).unwrap();
    let num: f64 = back.increments().iter().zip(u.increments()).map(|(a, b)| (*a - *b).norm_sq()).sum();
    let den: f64 = u.increments().iter().map(|b| b.norm_sq()).sum();
    assert!((num / den).sqrt() < 1e-4);
}

#[test]
fn antidevelop_rejects_vertical_and_large_steps() {
    let m = registry::heisenberg3();
    let conn = canonical_connection(&m);
    let real = m.realization().unwrap();
    let vertical = vec![Mat::identity(3), real.exp(&Vect::from_slice(&[0.0, 0.0, 0.1]))];
    assert!(matches!(antidevelop(&m, &conn, &vertical, 0.1), Err(srpath_core::Error::NotHorizontal { .. })));
    let big = vec![Mat::identity(3), real.exp(&Vect::from_slice(&[2.0, 0.0, 0.0]))];
    assert!(matches!(antidevelop(&m, &conn, &big, 0.1), Err(srpath_core::Error::StepTooLarge { .. })));
}

#[test]
fn flat_model_gives_h_equal_k() {
    let m = registry::heisenberg3();
    let conn = canonical_connection(&m);
    let u = smooth_control(2, 1.0, 200, &[0.5, 1.1]);
    let k = smooth_control(2, 1.0, 200, &[-0.3, 0.8]);
    let dev = develop(&m, &conn, &u).unwrap();
    let var = solve_variation_h(&m, &conn, &dev, &u, &k).unwrap();
    let worst = var.h.iter().zip(&var.k).map(|(h, k)| (*h - *k).max_abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-10, "{worst}");
}

#[test]
fn zero_variation() {
    let m = registry::su2_hopf();
    let conn = canonical_connection(&m);
    let u = smooth_control(2, 1.0, 50, &[0.5, 1.1]);
    let k = ControlPath::zeros(2, 1.0, 50);
    let dev = develop(&m, &conn, &u).unwrap();
    let var = solve_variation_h(&m, &conn, &dev, &u, &k).unwrap();
    assert!(var.h.iter().chain(&var.y).all(|v| v.max_abs() == 0.0));
    let fd = finite_difference_variation(&m, &conn, &u, &k, 1e-3).unwrap();
    assert!(fd.iter().all(|v| v.max_abs() < 1e-12));
}

#[test]
fn hopf_straight_lines_curvature_bends_h() {
    let m = registry::su2_hopf();
    let conn = canonical_connection(&m);
    let u = ControlPath::from_fn(1.0, 400, |t| Vect::from_slice(&[t, 0.0])).unwrap();
    let k = ControlPath::from_fn(1.0, 400, |t| Vect::from_slice(&[0.0, t])).unwrap();
    let dev = develop(&m, &conn, &u).unwrap();
    let var = solve_variation_h(&m, &conn, &dev, &u, &k).unwrap();
    let gap = var.h.iter().zip(&var.k).map(|(h, k)| (*h - *k).max_abs()).fold(0.0, f64::max);
    assert!(gap > 0.05, "{gap}");
    let err = variation_identity_error(&m, &conn, &u, &k, 1e-5).unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn abelian_variation_is_k() {
    let m = registry::abelian(3).unwrap();
    let conn = canonical_connection(&m);
    let u = smooth_control(3, 1.0, 30, &[0.5, 1.1, -0.2]);
    let k = smooth_control(3, 1.0, 30, &[0.1, -0.6, 0.9]);
    let fd = finite_difference_variation(&m, &conn, &u, &k, 0.01).unwrap();
    for (y, kk) in fd.iter().zip(k.nodes()) {
        assert!((*y - kk).max_abs() < 1e-12);
    }
}

#[test]
fn heisenberg_variation_error_linear_in_s() {
    let m = registry::heisenberg3();
    let conn = canonical_connection(&m);
    let u = smooth_control(2, 1.0, 100, &[0.5, 1.1]);
    let k = smooth_control(2, 1.0, 100, &[-0.7, 0.4]);
    let e1 = variation_identity_error(&m, &conn, &u, &k, 1e-2).unwrap();
    let e2 = variation_identity_error(&m, &conn, &u, &k, 1e-3).unwrap();
    let ratio = e1 / e2;
    assert!((8.0..12.5).contains(&ratio), "{e1} {e2}");
}

#[test]
fn adjoint_transport_matches_p_times_u_to_second_order() {
    let m = registry::so4_rolling();
    let conn = canonical_connection(&m);
    let errs: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&steps| {
            let u = smooth_control(4, 1.0, steps, &[0.9, -0.4, 1.2, 0.3]);
            let dev = develop(&m, &conn, &u).unwrap();
            dev.p_hat
                .iter()
                .zip(dev.p.iter().zip(&dev.a))
                .map(|(ph, (p, a))| (*ph - p.matmul(&(Mat::identity(6) + *a))).max_abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let s = slope(&[1.0, 0.5, 0.25], &errs);
    assert!(s > 1.8, "{errs:?} slope {s}");
}

#[test]
fn y_hat_recurrence_reproduces_h() {
    let m = registry::so4_rolling();
    let conn = canonical_connection(&m);
    let u = smooth_control(4, 1.0, 200, &[0.9, -0.4, 1.2, 0.3]);
    let k = smooth_control(4, 1.0, 200, &[0.2, 0.5, -0.8, 1.0]);
    let dev = develop(&m, &conn, &u).unwrap();
    let var = solve_variation_h(&m, &conn, &dev, &u, &k).unwrap();
    let mut acc = Vect::zeros(6);
    for j in 0..u.steps() {
        let ubar = Mat::identity(6) + (dev.a[j] + dev.a[j + 1]).scale(0.5);
        acc += ubar.mul_vec(&(var.y_hat[j + 1] - var.y_hat[j]));
        assert!((acc - var.h[j + 1].padded(6)).max_abs() < 1e-12);
    }
}

fn check_variation_convergence(m: &LieAlgebraModel, coef_u: &[f64], coef_k: &[f64]) -> (f64, f64) {
    let conn = canonical_connection(m);
    let d = m.rank();
    let mut errs = Vec::new();
    let mut scales = Vec::new();
    for level in 0..4 {
        let steps = 50usize << level;
        let s = 4e-2 / (1u64 << level) as f64;
        let u = smooth_control(d, 1.0, steps, coef_u);
        let k = smooth_control(d, 1.0, steps, coef_k);
        errs.push(variation_identity_error(m, &conn, &u, &k, s).unwrap());
        scales.push(s);
    }
    (slope(&scales, &errs), errs[3])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn variation_identity_converges(which in 0usize..3,
        cu in proptest::collection::vec(-1.5f64..1.5, 4),
        ck in proptest::collection::vec(-1.5f64..1.5, 4)) {
        let m = [registry::su2_hopf(), registry::so4_rolling(), registry::heisenberg3()][which].clone();
        let (s, last) = check_variation_convergence(&m, &cu, &ck);
        // first order in s dominates; tiny errors have no meaningful slope
        prop_assert!(last < 1e-9 || (0.8..1.3).contains(&s), "slope {} last {}", s, last);
    }

    #[test]
    fn a_squares_to_zero_and_p_is_horizontal_isometry(which in 0usize..3, cu in proptest::collection::vec(-2.0f64..2.0, 4)) {
        let m = [registry::su2_hopf(), registry::so4_rolling(), registry::heisenberg3()][which].clone();
        let conn = canonical_connection(&m);
        let (n, d) = (m.dim(), m.rank());
        let u = smooth_control(d, 1.0, 100, &cu);
        let dev = develop(&m, &conn, &u).unwrap();
        for (a, p) in dev.a.iter().zip(&dev.p) {
            prop_assert!(a.matmul(a).max_abs() < 1e-13);
            let prod = (Mat::identity(n) + *a).matmul(&(Mat::identity(n) - *a));
            prop_assert!((prod - Mat::identity(n)).max_abs() < 1e-13);
            let ph = p.block(0, 0, d, d);
            prop_assert!((ph.tr_matmul(&ph) - Mat::identity(d)).max_abs() < 1e-12);
            prop_assert!(p.block(0, d, d, n - d).max_abs() < 1e-15 && p.block(d, 0, n - d, d).max_abs() < 1e-15);
        }
    }
}
