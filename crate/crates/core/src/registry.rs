//! Named models shipped with the crate.

use crate::error::{Error, Result};
use crate::geometry::LieAlgebraModel;
use crate::linalg::Mat;

/// Discretization-bias constants for the statistical checks, fitted per model
/// by halving runs (see `verify::bias_study`). A check allows `C·(ε² + Δ)`,
/// `C·s²` or `C·Δ` on top of its standard-error band.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BiasConstants {
    /// Derivative formula, multiplies `ε² + Δ`.
    pub derivative: f64,
    /// Quasi-invariance central difference, multiplies `s²`.
    pub quasi_invariance: f64,
    /// Pathwise identities, multiplies `Δ`.
    pub pathwise: f64,
}

impl Default for BiasConstants {
    fn default() -> Self {
        BiasConstants { derivative: 1.0, quasi_invariance: 1.0, pathwise: 1.0 }
    }
}

pub const MODEL_NAMES: &[&str] = &["heisenberg3", "su2_riemannian", "su2_hopf", "so4_rolling", "abelian{n}", "solvable_nonmp"];

fn unit(m: usize, r: usize, c: usize) -> Mat {
    let mut e = Mat::zeros(m, m);
    e[(r, c)] = 1.0;
    e
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// `[X1, X2] = Z` realized by strictly upper triangular 3x3 matrices.
pub fn heisenberg3() -> LieAlgebraModel {
    let gens = vec![unit(3, 0, 1), unit(3, 1, 2), unit(3, 0, 2)];
    LieAlgebraModel::from_generators("heisenberg3", 2, names(&["X1", "X2", "Z"]), gens).expect("heisenberg3")
}

/// so(3) generators `(L_i)_{jk} = −ε_{ijk}`, so `[L_1, L_2] = L_3` cyclically.
fn su2_generators() -> Vec<Mat> {
    let eps = |i: usize, j: usize, k: usize| -> f64 {
        match (i, j, k) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
            _ => 0.0,
        }
    };
    (0..3).map(|i| Mat::from_fn(3, 3, |j, k| -eps(i, j, k))).collect()
}

/// su(2) with `V = 0`, the bi-invariant Riemannian case.
pub fn su2_riemannian() -> LieAlgebraModel {
    LieAlgebraModel::from_generators("su2_riemannian", 3, names(&["e1", "e2", "e3"]), su2_generators()).expect("su2_riemannian")
}

/// su(2) with `H = span{e1, e2}` and `V = span{e3}` (Hopf fibration).
pub fn su2_hopf() -> LieAlgebraModel {
    LieAlgebraModel::from_generators("su2_hopf", 2, names(&["e1", "e2", "e3"]), su2_generators()).expect("su2_hopf")
}

/// so(4) with `H = span{e13, e14, e24, e34}` and `V = span{e12, e23}`.
///
/// `e_ij` has `+1` at `(j, i)` and `−1` at `(i, j)`; these are orthonormal for
/// `⟨X, Y⟩ = −½ tr(XY)`.
pub fn so4_rolling() -> LieAlgebraModel {
    let e = |i: usize, j: usize| {
        let mut m = Mat::zeros(4, 4);
        m[(j - 1, i - 1)] = 1.0;
        m[(i - 1, j - 1)] = -1.0;
        m
    };
    let gens = vec![e(1, 3), e(1, 4), e(2, 4), e(3, 4), e(1, 2), e(2, 3)];
    LieAlgebraModel::from_generators("so4_rolling", 4, names(&["e13", "e14", "e24", "e34", "e12", "e23"]), gens)
        .expect("so4_rolling")
}

/// ℝⁿ with everything horizontal, realized by translations in dimension `n + 1`.
pub fn abelian(n: usize) -> Result<LieAlgebraModel> {
    abelian_split(n, n)
}

/// ℝⁿ with only the first `d` directions horizontal (not bracket generating for `d < n`).
pub fn abelian_split(n: usize, d: usize) -> Result<LieAlgebraModel> {
    if n == 0 || n + 1 > crate::linalg::MAX_DIM {
        return Err(Error::TooLarge(n));
    }
    let gens = (0..n).map(|i| unit(n + 1, i, n)).collect();
    let frame = (1..=n).map(|i| format!("x{i}")).collect();
    let name = if d == n { format!("abelian{n}") } else { format!("abelian{n}_{d}") };
    LieAlgebraModel::from_generators(name, d, frame, gens)
}

/// A complement that is not metric preserving: `[X1, X2] = Z`, `[Z, X1] = X1`,
/// `[Z, X2] = −X2`, realized in sl(2) as `X1 = e`, `X2 = f/2`, `Z = h/2`.
pub fn solvable_nonmp() -> LieAlgebraModel {
    let e = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let f = Mat::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
    let h = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    LieAlgebraModel::from_generators("solvable_nonmp", 2, names(&["X1", "X2", "Z"]), vec![e, f.scale(0.5), h.scale(0.5)])
        .expect("solvable_nonmp")
}

/// Looks up a registry model by name.
pub fn model(name: &str) -> Result<LieAlgebraModel> {
    match name {
        "heisenberg3" => Ok(heisenberg3()),
        "su2_riemannian" => Ok(su2_riemannian()),
        "su2_hopf" => Ok(su2_hopf()),
        "so4_rolling" => Ok(so4_rolling()),
        "solvable_nonmp" => Ok(solvable_nonmp()),
        _ => match name.strip_prefix("abelian").and_then(|s| s.parse::<usize>().ok()) {
            Some(n) => abelian(n),
            None => Err(Error::UnknownId(name.to_string())),
        },
    }
}

/// Bias constants for a registry model, as produced by
/// `examples/bias_study.rs`. Models without a fit (abelian, model files) get
/// the conservative default of 1.
pub fn bias_constants(name: &str) -> BiasConstants {
    let fitted = |derivative, quasi_invariance, pathwise| BiasConstants { derivative, quasi_invariance, pathwise };
    match name {
        "heisenberg3" => fitted(0.01, 0.01, 0.01),
        "su2_riemannian" => fitted(0.01, 0.01, 0.6),
        "su2_hopf" => fitted(0.01, 0.01, 0.7),
        "so4_rolling" => fitted(0.01, 0.02, 2.0),
        _ => BiasConstants::default(),
    }
}

/// Every fixed registry model plus `abelian2` and `abelian3` as abelian representatives.
pub fn all_models() -> Vec<LieAlgebraModel> {
    vec![
        heisenberg3(),
        su2_riemannian(),
        su2_hopf(),
        so4_rolling(),
        abelian(2).unwrap(),
        abelian(3).unwrap(),
        solvable_nonmp(),
    ]
}
