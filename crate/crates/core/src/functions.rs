//! Smooth functions on the group and their left-invariant frame derivatives.
//!
//! Analytic derivatives come from hyper-dual numbers: evaluating `f` at
//! `g (I + ε₁E_a)(I + ε₂E_b)(I + ε₃E_c)` with nilpotent `εᵢ` gives
//! `E_aE_bE_c f(g)` as the `ε₁ε₂ε₃` coefficient, with no truncation error.

use crate::error::{Error, Result};
use crate::geometry::LieAlgebraModel;
use crate::linalg::{Mat, Vect};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

/// Arithmetic needed to evaluate registry functions.
pub trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn cst(x: f64) -> Self;
    fn exp(self) -> Self;
    fn scale(self, s: f64) -> Self;
}

impl Scalar for f64 {
    fn cst(x: f64) -> Self {
        x
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

/// `a + b ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual(pub [f64; 2]);

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual([self.0[0] * o.0[0], self.0[0] * o.0[1] + self.0[1] * o.0[0]])
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual([-self.0[0], -self.0[1]])
    }
}

impl Scalar for Dual {
    fn cst(x: f64) -> Self {
        Dual([x, 0.0])
    }
    fn exp(self) -> Self {
        let e = self.0[0].exp();
        Dual([e, e * self.0[1]])
    }
    fn scale(self, s: f64) -> Self {
        Dual([self.0[0] * s, self.0[1] * s])
    }
}

/// Hyper-dual number with three nilpotent generators; coefficient `m` multiplies
/// the product of the `εᵢ` whose bits are set in `m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet3(pub [f64; 8]);

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, o: Jet3) -> Jet3 {
        let mut c = self.0;
        for (x, y) in c.iter_mut().zip(o.0) {
            *x += y;
        }
        Jet3(c)
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, o: Jet3) -> Jet3 {
        let mut c = self.0;
        for (x, y) in c.iter_mut().zip(o.0) {
            *x -= y;
        }
        Jet3(c)
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, o: Jet3) -> Jet3 {
        let mut c = [0.0; 8];
        for m in 0..8usize {
            // all splits of m into disjoint a | b
            let mut a = m;
            loop {
                c[m] += self.0[a] * o.0[m ^ a];
                if a == 0 {
                    break;
                }
                a = (a - 1) & m;
            }
        }
        Jet3(c)
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        Jet3(self.0.map(|x| -x))
    }
}

impl Scalar for Jet3 {
    fn cst(x: f64) -> Self {
        let mut c = [0.0; 8];
        c[0] = x;
        Jet3(c)
    }
    fn exp(self) -> Self {
        let e = self.0[0].exp();
        let mut nil = self;
        nil.0[0] = 0.0;
        let n2 = nil * nil;
        let n3 = n2 * nil;
        let mut out = Jet3::cst(1.0) + nil + n2.scale(0.5) + n3.scale(1.0 / 6.0);
        out = out.scale(e);
        out
    }
    fn scale(self, s: f64) -> Self {
        Jet3(self.0.map(|x| x * s))
    }
}

/// A smooth function on the group with frame derivatives.
pub trait PointFunction: Send + Sync {
    fn name(&self) -> String;
    fn value(&self, g: &Mat) -> f64;
    /// `(E_a f)(g)` for every frame index `a`.
    fn d1(&self, g: &Mat) -> Vect;
    /// `(E_a E_b f)(g)`, row `a`, column `b`.
    fn d2(&self, g: &Mat) -> Mat;
    /// `(E_a E_b E_c f)(g)` stored at `(a n + b) n + c`, when available.
    fn d3(&self, g: &Mat) -> Option<Vec<f64>>;
}

/// Closed-form registry functions.
#[derive(Clone, Debug)]
pub enum FunctionKind {
    Constant(f64),
    /// Linear-chart coordinate, 0-based.
    Coord(usize),
    /// `exp(−|φ|²)` in the linear chart.
    Bump,
    /// Matrix entry of the realization, 0-based.
    MatEntry(usize, usize),
    /// `linear·φ + ½ φᵀ quadratic φ` in the linear chart.
    Quadratic { linear: Vect, quadratic: Mat },
    /// `linear·x + ½ xᵀ quadratic x` with `x = log g`; unipotent realizations only.
    LogQuadratic { linear: Vect, quadratic: Mat },
}

/// Registry function evaluated through jets.
#[derive(Clone)]
pub struct AnalyticFunction {
    kind: FunctionKind,
    n: usize,
    m: usize,
    generators: Vec<Mat>,
    chart: Vec<f64>,
}

impl fmt::Debug for AnalyticFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AnalyticFunction({:?})", self.kind)
    }
}

impl AnalyticFunction {
    pub fn new(model: &LieAlgebraModel, kind: FunctionKind) -> Result<Self> {
        let real = model.require_realization()?;
        let (n, m) = (model.dim(), real.m());
        match &kind {
            FunctionKind::Coord(i) if *i >= n => return Err(Error::Dimension(format!("coordinate {} out of range", i + 1))),
            FunctionKind::MatEntry(r, c) if *r >= m || *c >= m => {
                return Err(Error::Dimension(format!("matrix entry ({}, {}) out of range", r + 1, c + 1)))
            }
            FunctionKind::Quadratic { linear, quadratic } | FunctionKind::LogQuadratic { linear, quadratic }
                if linear.len() != n || quadratic.rows() != n || quadratic.cols() != n =>
            {
                return Err(Error::Dimension("quadratic form has the wrong size".into()))
            }
            FunctionKind::LogQuadratic { .. } => {
                let strictly_upper = real.generators().iter().all(|e| (0..m).all(|r| (0..=r).all(|c| e[(r, c)] == 0.0)));
                if !strictly_upper {
                    return Err(Error::Config("log coordinates need a strictly upper triangular realization".into()));
                }
            }
            _ => {}
        }
        Ok(AnalyticFunction { kind, n, m, generators: real.generators().to_vec(), chart: real.chart_weights().to_vec() })
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    fn chart<S: Scalar>(&self, g: &[S]) -> Vec<S> {
        let m2 = self.m * self.m;
        (0..self.n)
            .map(|a| {
                let w = &self.chart[a * m2..(a + 1) * m2];
                let mut s = S::cst(0.0);
                for rc in 0..m2 {
                    if w[rc] == 0.0 {
                        continue;
                    }
                    let diag = if rc / self.m == rc % self.m { 1.0 } else { 0.0 };
                    s = s + (g[rc] - S::cst(diag)).scale(w[rc]);
                }
                s
            })
            .collect()
    }

    fn log_coords<S: Scalar>(&self, g: &[S]) -> Vec<S> {
        // g − I is nilpotent of order ≤ m, so the Mercator series terminates.
        let m = self.m;
        let nil: Vec<S> = (0..m * m).map(|rc| g[rc] - S::cst(if rc / m == rc % m { 1.0 } else { 0.0 })).collect();
        let mut log = nil.clone();
        let mut power = nil.clone();
        for k in 2..m {
            power = matmul_generic(&power, &nil, m);
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            for rc in 0..m * m {
                log[rc] = log[rc] + power[rc].scale(sign / k as f64);
            }
        }
        let m2 = m * m;
        (0..self.n)
            .map(|a| {
                let w = &self.chart[a * m2..(a + 1) * m2];
                let mut s = S::cst(0.0);
                for rc in 0..m2 {
                    if w[rc] != 0.0 {
                        s = s + log[rc].scale(w[rc]);
                    }
                }
                s
            })
            .collect()
    }

    fn eval<S: Scalar>(&self, g: &[S]) -> S {
        match &self.kind {
            FunctionKind::Constant(c) => S::cst(*c),
            FunctionKind::Coord(i) => self.chart(g)[*i],
            FunctionKind::Bump => {
                let x = self.chart(g);
                let mut s = S::cst(0.0);
                for xi in x {
                    s = s + xi * xi;
                }
                (-s).exp()
            }
            FunctionKind::MatEntry(r, c) => g[r * self.m + c],
            FunctionKind::Quadratic { linear, quadratic } => quadratic_form(&self.chart(g), linear, quadratic),
            FunctionKind::LogQuadratic { linear, quadratic } => quadratic_form(&self.log_coords(g), linear, quadratic),
        }
    }

    /// Jet-valued matrix `Σ_mask coefficient_mask ε^mask` from f64 matrices.
    fn jet_matrix(&self, parts: &[(usize, Mat)]) -> Vec<Jet3> {
        let m = self.m;
        let mut out = vec![Jet3::cst(0.0); m * m];
        for (mask, mat) in parts {
            for r in 0..m {
                for c in 0..m {
                    out[r * m + c].0[*mask] = mat[(r, c)];
                }
            }
        }
        out
    }
}

fn quadratic_form<S: Scalar>(x: &[S], linear: &Vect, quadratic: &Mat) -> S {
    let n = x.len();
    let mut s = S::cst(0.0);
    for a in 0..n {
        if linear[a] != 0.0 {
            s = s + x[a].scale(linear[a]);
        }
        for b in 0..n {
            let q = quadratic[(a, b)];
            if q != 0.0 {
                s = s + (x[a] * x[b]).scale(0.5 * q);
            }
        }
    }
    s
}

fn matmul_generic<S: Scalar>(a: &[S], b: &[S], m: usize) -> Vec<S> {
    let mut out = vec![S::cst(0.0); m * m];
    for i in 0..m {
        for k in 0..m {
            for j in 0..m {
                out[i * m + j] = out[i * m + j] + a[i * m + k] * b[k * m + j];
            }
        }
    }
    out
}

fn to_slice(g: &Mat) -> Vec<f64> {
    g.to_row_vec()
}

impl PointFunction for AnalyticFunction {
    fn name(&self) -> String {
        match &self.kind {
            FunctionKind::Constant(c) => format!("const:{c}"),
            FunctionKind::Coord(i) => format!("coord:{}", i + 1),
            FunctionKind::Bump => "bump".into(),
            FunctionKind::MatEntry(r, c) => format!("matentry:{},{}", r + 1, c + 1),
            FunctionKind::Quadratic { .. } => "quadratic".into(),
            FunctionKind::LogQuadratic { .. } => "log-quadratic".into(),
        }
    }

    fn value(&self, g: &Mat) -> f64 {
        self.eval(&to_slice(g))
    }

    fn d1(&self, g: &Mat) -> Vect {
        let m = self.m;
        let base = to_slice(g);
        Vect::from_fn(self.n, |a| {
            let ge = g.matmul(&self.generators[a]);
            let jet: Vec<Dual> = (0..m * m).map(|rc| Dual([base[rc], ge[(rc / m, rc % m)]])).collect();
            self.eval(&jet).0[1]
        })
    }

    fn d2(&self, g: &Mat) -> Mat {
        let ge: Vec<Mat> = self.generators.iter().map(|e| g.matmul(e)).collect();
        Mat::from_fn(self.n, self.n, |a, b| {
            let parts = [(0, *g), (1, ge[a]), (2, ge[b]), (3, ge[a].matmul(&self.generators[b]))];
            self.eval(&self.jet_matrix(&parts)).0[3]
        })
    }

    fn d3(&self, g: &Mat) -> Option<Vec<f64>> {
        let n = self.n;
        let e = &self.generators;
        let mut out = vec![0.0; n * n * n];
        for a in 0..n {
            let ga = g.matmul(&e[a]);
            for b in 0..n {
                let gb = g.matmul(&e[b]);
                let gab = ga.matmul(&e[b]);
                for c in 0..n {
                    let parts = [
                        (0, *g),
                        (1, ga),
                        (2, gb),
                        (3, gab),
                        (4, g.matmul(&e[c])),
                        (5, ga.matmul(&e[c])),
                        (6, gb.matmul(&e[c])),
                        (7, gab.matmul(&e[c])),
                    ];
                    out[(a * n + b) * n + c] = self.eval(&self.jet_matrix(&parts)).0[7];
                }
            }
        }
        Some(out)
    }
}

/// Central-difference stencil sizes for [`FiniteDifferenceFunction`].
#[derive(Clone, Copy, Debug)]
pub struct FdSteps {
    /// Step for first and second derivatives.
    pub low: f64,
    /// Step for third derivatives; at `1e−4` roundoff alone would be near `1e−4`.
    pub third: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps { low: 1e-4, third: 5e-4 }
    }
}

type Evaluator = Arc<dyn Fn(&Mat) -> f64 + Send + Sync>;

/// Derivatives by central differences along `t ↦ g exp(t E_a)`.
#[derive(Clone)]
pub struct FiniteDifferenceFunction {
    name: String,
    eval: Evaluator,
    steps: FdSteps,
    /// `exp(±h E_a)` for the low step, then for the third-order step.
    shifts_low: Vec<[Mat; 2]>,
    shifts_third: Vec<[Mat; 2]>,
}

impl FiniteDifferenceFunction {
    pub fn new(model: &LieAlgebraModel, name: impl Into<String>, eval: Evaluator, steps: FdSteps) -> Result<Self> {
        let real = model.require_realization()?;
        let shifts = |h: f64| -> Vec<[Mat; 2]> {
            real.generators().iter().map(|e| [e.scale(h).exp(), e.scale(-h).exp()]).collect()
        };
        Ok(FiniteDifferenceFunction {
            name: name.into(),
            eval,
            steps,
            shifts_low: shifts(steps.low),
            shifts_third: shifts(steps.third),
        })
    }

    /// Same values as `f`, derivatives by finite differences.
    pub fn wrap(model: &LieAlgebraModel, f: Arc<dyn PointFunction>, steps: FdSteps) -> Result<Self> {
        let name = format!("fd:{}", f.name());
        FiniteDifferenceFunction::new(model, name, Arc::new(move |g: &Mat| f.value(g)), steps)
    }
}

impl PointFunction for FiniteDifferenceFunction {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn value(&self, g: &Mat) -> f64 {
        (self.eval)(g)
    }

    fn d1(&self, g: &Mat) -> Vect {
        let h = self.steps.low;
        Vect::from_fn(self.shifts_low.len(), |a| {
            let [p, m] = &self.shifts_low[a];
            ((self.eval)(&g.matmul(p)) - (self.eval)(&g.matmul(m))) / (2.0 * h)
        })
    }

    fn d2(&self, g: &Mat) -> Mat {
        let h = self.steps.low;
        let n = self.shifts_low.len();
        Mat::from_fn(n, n, |a, b| {
            let mut s = 0.0;
            for (i, sa) in [1.0, -1.0].into_iter().enumerate() {
                let ga = g.matmul(&self.shifts_low[a][i]);
                for (j, sb) in [1.0, -1.0].into_iter().enumerate() {
                    s += sa * sb * (self.eval)(&ga.matmul(&self.shifts_low[b][j]));
                }
            }
            s / (4.0 * h * h)
        })
    }

    fn d3(&self, g: &Mat) -> Option<Vec<f64>> {
        let h = self.steps.third;
        let n = self.shifts_third.len();
        let mut out = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut s = 0.0;
                    for (i, sa) in [1.0, -1.0].into_iter().enumerate() {
                        let ga = g.matmul(&self.shifts_third[a][i]);
                        for (j, sb) in [1.0, -1.0].into_iter().enumerate() {
                            let gab = ga.matmul(&self.shifts_third[b][j]);
                            for (k, sc) in [1.0, -1.0].into_iter().enumerate() {
                                s += sa * sb * sc * (self.eval)(&gab.matmul(&self.shifts_third[c][k]));
                            }
                        }
                    }
                    out[(a * n + b) * n + c] = s / (8.0 * h * h * h);
                }
            }
        }
        Some(out)
    }
}

/// Parses a single-point registry id:
/// `const:<c>`, `coord:<i>`, `bump`, `matentry:<r>,<c>` (1-based indices),
/// or `fd:<id>` for the finite-difference version of any of these.
pub fn parse_point_function(model: &LieAlgebraModel, id: &str) -> Result<Arc<dyn PointFunction>> {
    let id = id.trim();
    if let Some(inner) = id.strip_prefix("fd:") {
        let f = parse_point_function(model, inner)?;
        return Ok(Arc::new(FiniteDifferenceFunction::wrap(model, f, FdSteps::default())?));
    }
    let unknown = || Error::UnknownId(id.to_string());
    let index = |s: &str| -> Result<usize> {
        let i: usize = s.trim().parse().map_err(|_| unknown())?;
        i.checked_sub(1).ok_or_else(unknown)
    };
    let kind = if id == "bump" {
        FunctionKind::Bump
    } else if let Some(c) = id.strip_prefix("const:") {
        FunctionKind::Constant(c.trim().parse().map_err(|_| unknown())?)
    } else if let Some(i) = id.strip_prefix("coord:") {
        FunctionKind::Coord(index(i)?)
    } else if let Some(rc) = id.strip_prefix("matentry:") {
        let (r, c) = rc.split_once(',').ok_or_else(unknown)?;
        FunctionKind::MatEntry(index(r)?, index(c)?)
    } else {
        return Err(unknown());
    };
    Ok(Arc::new(AnalyticFunction::new(model, kind)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_product_rule_matches_expansion() {
        // (1 + ε₁)(2 + ε₂ + ε₃) = 2 + 2ε₁ + ε₂ + ε₃ + ε₁ε₂ + ε₁ε₃
        let x = Jet3([1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let y = Jet3([2.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!((x * y).0, [2.0, 2.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn jet_exp_third_derivative() {
        // exp(t) at t = 0.3 seeded in all three directions: every coefficient is e^0.3
        let t = Jet3([0.3, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let e = t.exp();
        for c in e.0 {
            assert!((c - 0.3f64.exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn dual_matches_jet_first_order() {
        let x = Dual([0.7, 1.0]);
        let j = Jet3([0.7, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!((x * x).exp().0[1], (j * j).exp().0[1]);
    }
}
