//! Left-invariant sub-Riemannian structures with a chosen complement.
//!
//! A model is a Lie algebra in a frame `E_1..E_n` whose first `d` vectors
//! span the horizontal space `H` and are orthonormal, and whose remaining
//! vectors span the complement `V`. All tensors are constant in this frame, so
//! the canonical connection and everything derived from it reduces to arrays
//! of numbers computed once from the structure constants.

use crate::error::{Error, Result};
use crate::functions::{AnalyticFunction, FunctionKind, PointFunction};
use crate::linalg::{Mat, Vect, MAX_DIM};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

/// Faithful matrix representation of the algebra, used to move on the group.
#[derive(Clone, Debug)]
pub struct Realization {
    m: usize,
    generators: Vec<Mat>,
    /// Left inverse of the generator flattening, `n x m²` row-major.
    chart: Vec<f64>,
}

impl Realization {
    pub fn new(generators: Vec<Mat>) -> Result<Self> {
        let n = generators.len();
        if n == 0 {
            return Err(Error::Dimension("no generators".into()));
        }
        let m = generators[0].rows();
        if generators.iter().any(|g| g.rows() != m || g.cols() != m) {
            return Err(Error::Dimension("generators must be square of equal size".into()));
        }
        let flat = DMatrix::from_fn(m * m, n, |rc, a| generators[a][(rc / m, rc % m)]);
        let svd = flat.clone().svd(true, true);
        let smax = svd.singular_values.max();
        if svd.singular_values.iter().any(|&s| s <= 1e-10 * smax) {
            return Err(Error::NotFaithful);
        }
        let pinv = svd.pseudo_inverse(1e-12).map_err(|e| Error::Dimension(e.to_string()))?;
        let chart = (0..n).flat_map(|a| (0..m * m).map(move |rc| (a, rc))).map(|(a, rc)| pinv[(a, rc)]).collect();
        Ok(Realization { m, generators, chart })
    }

    /// Size of the representing matrices.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn generators(&self) -> &[Mat] {
        &self.generators
    }

    /// `Σ x^a E_a` as a matrix.
    pub fn algebra_element(&self, x: &Vect) -> Mat {
        let mut out = Mat::zeros(self.m, self.m);
        for (a, e) in self.generators.iter().enumerate() {
            if x[a] != 0.0 {
                out.axpy(x[a], e);
            }
        }
        out
    }

    /// Frame coordinates of a matrix lying in the span of the generators.
    pub fn algebra_coords(&self, x: &Mat) -> Vect {
        let n = self.generators.len();
        let m2 = self.m * self.m;
        Vect::from_fn(n, |a| {
            let row = &self.chart[a * m2..(a + 1) * m2];
            let mut s = 0.0;
            for r in 0..self.m {
                for c in 0..self.m {
                    s += row[r * self.m + c] * x[(r, c)];
                }
            }
            s
        })
    }

    /// Linear chart `φ(g) = W(g − I)` around the identity.
    pub fn chart_coords(&self, g: &Mat) -> Vect {
        self.algebra_coords(&(*g - Mat::identity(self.m)))
    }

    /// Chart weights, `n x m²` row-major.
    pub fn chart_weights(&self) -> &[f64] {
        &self.chart
    }

    /// `exp(Σ x^a E_a)`.
    pub fn exp(&self, x: &Vect) -> Mat {
        self.algebra_element(x).exp()
    }

    /// Frame coordinates of `log(g)` for `g` near the identity.
    pub fn log(&self, g: &Mat) -> Option<Vect> {
        g.log_near_identity().map(|x| self.algebra_coords(&x))
    }
}

/// Lie algebra with a horizontal/vertical frame split.
#[derive(Clone, Debug)]
pub struct LieAlgebraModel {
    name: String,
    n: usize,
    d: usize,
    frame_names: Vec<String>,
    c: Vec<f64>,
    realization: Option<Realization>,
}

impl LieAlgebraModel {
    /// Builds a model from structure constants `c[i][j][k]` stored row-major.
    pub fn new(name: impl Into<String>, n: usize, d: usize, frame_names: Vec<String>, c: Vec<f64>) -> Result<Self> {
        if n > MAX_DIM {
            return Err(Error::TooLarge(n));
        }
        if n == 0 || d == 0 || d > n {
            return Err(Error::Dimension(format!("need 0 < d <= n, got n = {n}, d = {d}")));
        }
        if c.len() != n * n * n {
            return Err(Error::Dimension(format!("expected {} structure constants, got {}", n * n * n, c.len())));
        }
        if frame_names.len() != n {
            return Err(Error::Dimension(format!("expected {n} frame names, got {}", frame_names.len())));
        }
        Ok(LieAlgebraModel { name: name.into(), n, d, frame_names, c, realization: None })
    }

    /// Builds a model whose structure constants are read off a matrix realization.
    pub fn from_generators(name: impl Into<String>, d: usize, frame_names: Vec<String>, generators: Vec<Mat>) -> Result<Self> {
        let n = generators.len();
        if n > MAX_DIM {
            return Err(Error::TooLarge(n));
        }
        let real = Realization::new(generators)?;
        let (c, residual) = structure_constants_of(&real);
        if residual > 1e-10 {
            return Err(Error::NotClosed(residual));
        }
        let mut model = LieAlgebraModel::new(name, n, d, frame_names, c)?;
        model.realization = Some(real);
        Ok(model)
    }

    /// Attaches a realization after checking it reproduces the structure constants.
    pub fn with_realization(mut self, generators: Vec<Mat>) -> Result<Self> {
        if generators.len() != self.n {
            return Err(Error::Dimension(format!("expected {} generators, got {}", self.n, generators.len())));
        }
        let real = Realization::new(generators)?;
        let (c, closure) = structure_constants_of(&real);
        let mismatch = c.iter().zip(&self.c).fold(closure, |m, (a, b)| m.max((a - b).abs()));
        if mismatch > 1e-10 {
            return Err(Error::NotClosed(mismatch));
        }
        self.realization = Some(real);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.d
    }

    pub fn frame_names(&self) -> &[String] {
        &self.frame_names
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.n + j) * self.n + k]
    }

    pub fn structure_constants(&self) -> &[f64] {
        &self.c
    }

    pub fn realization(&self) -> Option<&Realization> {
        self.realization.as_ref()
    }

    pub fn require_realization(&self) -> Result<&Realization> {
        self.realization.as_ref().ok_or_else(|| Error::MissingRealization(self.name.clone()))
    }

    pub fn is_horizontal(&self, a: usize) -> bool {
        a < self.d
    }

    /// Frame coordinates of `[x, y]`.
    pub fn bracket(&self, x: &Vect, y: &Vect) -> Vect {
        let n = self.n;
        let mut out = Vect::zeros(n);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = x[i] * y[j];
                if w == 0.0 {
                    continue;
                }
                for k in 0..n {
                    out[k] += w * self.c(i, j, k);
                }
            }
        }
        out
    }
}

fn structure_constants_of(real: &Realization) -> (Vec<f64>, f64) {
    let gens = real.generators();
    let n = gens.len();
    let mut c = vec![0.0; n * n * n];
    let mut residual = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let br = gens[i].matmul(&gens[j]) - gens[j].matmul(&gens[i]);
            let coords = real.algebra_coords(&br);
            residual = residual.max((real.algebra_element(&coords) - br).max_abs());
            for k in 0..n {
                c[(i * n + j) * n + k] = snap(coords[k]);
            }
        }
    }
    (c, residual)
}

/// Removes least-squares noise: values within `1e−12` of a multiple of
/// `2⁻²⁰` are replaced by that multiple, so integer structure constants come
/// out exact and exact cancellations (such as `q_Z = 0`) stay exact.
fn snap(x: f64) -> f64 {
    let scale = (1u64 << 20) as f64;
    let r = (x * scale).round() / scale;
    if (x - r).abs() < 1e-12 {
        r
    } else {
        x
    }
}

/// Outcome of [`validate_algebra`].
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub antisymmetry_residual: f64,
    pub jacobi_residual: f64,
    /// Dimensions of the flag `H ⊆ H + [H,H] ⊆ …` until it stabilizes.
    pub flag_dims: Vec<usize>,
    pub bracket_generating: bool,
    /// Smallest `r` with the `r`-th flag space equal to the whole algebra.
    pub step: Option<usize>,
}

fn rank_of(vectors: &[Vect], n: usize) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(n, vectors.len(), |r, c| vectors[c][r]);
    let sv = m.svd(false, false).singular_values;
    let smax = sv.max();
    sv.iter().filter(|&&s| s > 1e-10 * smax.max(1.0)).count()
}

/// Antisymmetry and Jacobi residuals plus the bracket-generating flag.
pub fn validate_algebra(model: &LieAlgebraModel) -> Diagnostics {
    let n = model.dim();
    let d = model.rank();
    let mut anti = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                anti = anti.max((model.c(i, j, k) + model.c(j, i, k)).abs());
            }
        }
    }
    let mut jacobi = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for m in 0..n {
                        s += model.c(i, j, m) * model.c(m, k, l)
                            + model.c(j, k, m) * model.c(m, i, l)
                            + model.c(k, i, m) * model.c(m, j, l);
                    }
                    jacobi = jacobi.max(s.abs());
                }
            }
        }
    }

    let horizontal: Vec<Vect> = (0..d).map(|i| Vect::basis(n, i)).collect();
    let mut span = horizontal.clone();
    let mut flag_dims = vec![rank_of(&span, n)];
    loop {
        let mut next = span.clone();
        for x in &horizontal {
            for y in &span {
                next.push(model.bracket(x, y));
            }
        }
        let r = rank_of(&next, n);
        if r == *flag_dims.last().unwrap() {
            break;
        }
        flag_dims.push(r);
        span = next;
        if r == n {
            break;
        }
    }
    let bracket_generating = *flag_dims.last().unwrap() == n;
    let step = flag_dims.iter().position(|&r| r == n).map(|p| p + 1);
    Diagnostics { antisymmetry_residual: anti, jacobi_residual: jacobi, flag_dims, bracket_generating, step }
}

/// Result of [`is_metric_preserving`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MetricPreservation {
    pub preserving: bool,
    /// Largest entry of the symmetric parts of `⟨pr_H[E_z, X_i], X_j⟩`.
    pub residual: f64,
}

/// Absolute tolerance used to classify complements.
pub const METRIC_PRESERVING_TOL: f64 = 1e-12;

/// Whether vertical flows preserve the horizontal metric.
pub fn is_metric_preserving(model: &LieAlgebraModel) -> MetricPreservation {
    let (n, d) = (model.dim(), model.rank());
    let mut residual = 0.0f64;
    for z in d..n {
        for i in 0..d {
            for j in 0..d {
                let s = 0.5 * (model.c(z, i, j) + model.c(z, j, i));
                residual = residual.max(s.abs());
            }
        }
    }
    MetricPreservation { preserving: residual <= METRIC_PRESERVING_TOL, residual }
}

/// Frame coefficients of a connection and its derived tensors.
#[derive(Clone, Debug)]
pub struct ConnectionData {
    n: usize,
    d: usize,
    gamma: Vec<f64>,
    torsion: Vec<f64>,
    curvature: Vec<f64>,
    ricci: Mat,
    delta_t: Mat,
    q: Vec<f64>,
    /// `G_a` with `(G_a)[c][b] = Γ[a][b][c]`, the matrix of `∇_{E_a}`.
    g_mats: Vec<Mat>,
    /// Same for the adjoint connection.
    ghat_mats: Vec<Mat>,
    /// `T_a` with `(T_a)[k][b] = T[a][b][k]`, the matrix of `T(E_a, ·)`.
    t_mats: Vec<Mat>,
    /// `R_ab` with `(R_ab)[k][c] = R[a][b][c][k]`, the matrix of `R(E_a, E_b)`.
    r_mats: Vec<Mat>,
}

/// The canonical connection of the model's complement.
pub fn canonical_connection(model: &LieAlgebraModel) -> ConnectionData {
    let (n, d) = (model.dim(), model.rank());
    let mut gamma = vec![0.0; n * n * n];
    let idx = |a: usize, b: usize, k: usize| (a * n + b) * n + k;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                gamma[idx(i, j, k)] = 0.5 * (model.c(i, j, k) - model.c(j, k, i) + model.c(k, i, j));
            }
        }
    }
    for z in d..n {
        for j in 0..d {
            for k in 0..d {
                gamma[idx(z, j, k)] = model.c(z, j, k);
            }
        }
    }
    for i in 0..d {
        for w in d..n {
            for k in d..n {
                gamma[idx(i, w, k)] = model.c(i, w, k);
            }
        }
    }
    ConnectionData::from_gamma(model, gamma)
}

impl ConnectionData {
    /// Derives torsion, curvature, Ricci, `δ_H T` and `q` from arbitrary
    /// left-invariant connection coefficients `Γ[a][b][k]`.
    pub fn from_gamma(model: &LieAlgebraModel, gamma: Vec<f64>) -> Self {
        let (n, d) = (model.dim(), model.rank());
        assert_eq!(gamma.len(), n * n * n);
        let i3 = |a: usize, b: usize, k: usize| (a * n + b) * n + k;
        let i4 = |a: usize, b: usize, c: usize, k: usize| ((a * n + b) * n + c) * n + k;
        let g = |a: usize, b: usize, k: usize| gamma[i3(a, b, k)];

        let mut torsion = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for k in 0..n {
                    torsion[i3(a, b, k)] = g(a, b, k) - g(b, a, k) - model.c(a, b, k);
                }
            }
        }

        // R(E_a,E_b)E_c = ∇_a∇_b E_c − ∇_b∇_a E_c − ∇_{[E_a,E_b]} E_c
        let mut curvature = vec![0.0; n * n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for k in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            s += g(b, c, m) * g(a, m, k) - g(a, c, m) * g(b, m, k) - model.c(a, b, m) * g(m, c, k);
                        }
                        curvature[i4(a, b, c, k)] = s;
                    }
                }
            }
        }

        let mut ricci = Mat::zeros(n, n);
        for b in 0..n {
            for k in 0..n {
                ricci[(k, b)] = -(0..d).map(|i| curvature[i4(i, b, i, k)]).sum::<f64>();
            }
        }

        // (∇_a T)(E_b, E_c)^l
        let t = |a: usize, b: usize, k: usize| torsion[i3(a, b, k)];
        let nabla_t = |a: usize, b: usize, c: usize, l: usize| {
            let mut s = 0.0;
            for m in 0..n {
                s += t(b, c, m) * g(a, m, l) - g(a, b, m) * t(m, c, l) - g(a, c, m) * t(b, m, l);
            }
            s
        };
        let mut delta_t = Mat::zeros(n, n);
        for c in 0..n {
            for l in 0..n {
                delta_t[(l, c)] = -(0..d).map(|i| nabla_t(i, i, c, l)).sum::<f64>();
            }
        }

        let mut q = vec![0.0; n * n * n];
        for a in 0..n {
            for i in 0..d {
                for j in 0..d {
                    q[i3(a, i, j)] = -0.5 * (g(a, i, j) + g(a, j, i));
                }
            }
        }

        let g_mats: Vec<Mat> = (0..n).map(|a| Mat::from_fn(n, n, |c, b| g(a, b, c))).collect();
        let ghat_mats = (0..n).map(|a| Mat::from_fn(n, n, |c, b| g(a, b, c) - t(a, b, c))).collect();
        let t_mats = (0..n).map(|a| Mat::from_fn(n, n, |k, b| t(a, b, k))).collect();
        let r_mats = (0..n * n)
            .map(|ab| {
                let (a, b) = (ab / n, ab % n);
                Mat::from_fn(n, n, |k, c| curvature[i4(a, b, c, k)])
            })
            .collect();

        ConnectionData { n, d, gamma, torsion, curvature, ricci, delta_t, q, g_mats, ghat_mats, t_mats, r_mats }
    }

    /// Coefficients `Γ̂ = Γ − T` of the adjoint connection, with their tensors.
    pub fn adjoint(&self, model: &LieAlgebraModel) -> ConnectionData {
        let gamma = self.gamma.iter().zip(&self.torsion).map(|(g, t)| g - t).collect();
        ConnectionData::from_gamma(model, gamma)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn gamma(&self, a: usize, b: usize, k: usize) -> f64 {
        self.gamma[(a * self.n + b) * self.n + k]
    }

    #[inline]
    pub fn torsion(&self, a: usize, b: usize, k: usize) -> f64 {
        self.torsion[(a * self.n + b) * self.n + k]
    }

    #[inline]
    pub fn curvature(&self, a: usize, b: usize, c: usize, k: usize) -> f64 {
        self.curvature[((a * self.n + b) * self.n + c) * self.n + k]
    }

    /// `⟨q_{E_a} E_i, E_j⟩` for horizontal `i, j`.
    #[inline]
    pub fn q(&self, a: usize, i: usize, j: usize) -> f64 {
        self.q[(a * self.n + i) * self.n + j]
    }

    /// Ricci operator, column `b` holding `Ric(E_b)`.
    pub fn ricci(&self) -> &Mat {
        &self.ricci
    }

    /// Horizontal `d x d` block of the Ricci operator.
    pub fn ricci_h(&self) -> Mat {
        self.ricci.block(0, 0, self.d, self.d)
    }

    /// `δ_H T`, column `c` holding `δ_H T(E_c)`.
    pub fn delta_t(&self) -> &Mat {
        &self.delta_t
    }

    /// Matrix of `∇_v` acting on frame coordinates.
    pub fn connection_matrix(&self, v: &Vect) -> Mat {
        combine(&self.g_mats, v, self.n)
    }

    /// Matrix of `∇̂_v`.
    pub fn adjoint_matrix(&self, v: &Vect) -> Mat {
        combine(&self.ghat_mats, v, self.n)
    }

    /// Matrix of `T(v, ·)`.
    pub fn torsion_matrix(&self, v: &Vect) -> Mat {
        combine(&self.t_mats, v, self.n)
    }

    /// `T(x, y)`.
    pub fn torsion_apply(&self, x: &Vect, y: &Vect) -> Vect {
        self.torsion_matrix(x).mul_vec(y)
    }

    /// Matrix of `R(x, y)`.
    pub fn curvature_matrix(&self, x: &Vect, y: &Vect) -> Mat {
        let n = self.n;
        let mut out = Mat::zeros(n, n);
        for a in 0..n {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..n {
                let w = x[a] * y[b];
                if w != 0.0 {
                    out.axpy(w, &self.r_mats[a * n + b]);
                }
            }
        }
        out
    }
}

fn combine(mats: &[Mat], v: &Vect, n: usize) -> Mat {
    let mut out = Mat::zeros(n, n);
    for (a, m) in mats.iter().enumerate() {
        if v[a] != 0.0 {
            out.axpy(v[a], m);
        }
    }
    out
}

/// Residuals of the structural properties of the canonical connection.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StructuralResiduals {
    /// `Γ[a][b][k]` with `b, k` on different sides of the split.
    pub parallel_split: f64,
    /// `Γ[i][j][k] + Γ[i][k][j]` over horizontal `i`.
    pub horizontal_compatibility: f64,
    /// Same over vertical directions; zero iff the complement is metric preserving.
    pub vertical_compatibility: f64,
    /// Horizontal part of `T(H, H)`.
    pub torsion_hh: f64,
    /// `T(H, V)`.
    pub torsion_hv: f64,
    /// `Ric − pr_H Ric pr_H`.
    pub ricci_outside_h: f64,
}

impl StructuralResiduals {
    /// Largest residual among those expected to vanish for a metric-preserving complement.
    pub fn max(&self) -> f64 {
        [
            self.parallel_split,
            self.horizontal_compatibility,
            self.vertical_compatibility,
            self.torsion_hh,
            self.torsion_hv,
            self.ricci_outside_h,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn structural_residuals(conn: &ConnectionData) -> StructuralResiduals {
    let (n, d) = (conn.dim(), conn.rank());
    let mut r = StructuralResiduals {
        parallel_split: 0.0,
        horizontal_compatibility: 0.0,
        vertical_compatibility: 0.0,
        torsion_hh: 0.0,
        torsion_hv: 0.0,
        ricci_outside_h: 0.0,
    };
    for a in 0..n {
        for b in 0..n {
            for k in 0..n {
                if (b < d) != (k < d) {
                    r.parallel_split = r.parallel_split.max(conn.gamma(a, b, k).abs());
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                let s = (conn.gamma(a, i, j) + conn.gamma(a, j, i)).abs();
                if a < d {
                    r.horizontal_compatibility = r.horizontal_compatibility.max(s);
                } else {
                    r.vertical_compatibility = r.vertical_compatibility.max(s);
                }
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                r.torsion_hh = r.torsion_hh.max(conn.torsion(i, j, k).abs());
            }
        }
        for z in d..n {
            for k in 0..n {
                r.torsion_hv = r.torsion_hv.max(conn.torsion(i, z, k).abs());
            }
        }
    }
    for k in 0..n {
        for b in 0..n {
            if k >= d || b >= d {
                r.ricci_outside_h = r.ricci_outside_h.max(conn.ricci()[(k, b)].abs());
            }
        }
    }
    r
}

/// Extreme eigenvalues of the symmetrized horizontal Ricci block.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectralBound {
    pub k_lo: f64,
    pub k_hi: f64,
    pub k_sym: f64,
    /// Largest entry of the antisymmetric part of the raw block.
    pub asymmetry: f64,
}

pub fn ricci_bounds(conn: &ConnectionData) -> SpectralBound {
    let (lo, hi, asym) = symmetric_extremes(&conn.ricci_h());
    SpectralBound { k_lo: lo, k_hi: hi, k_sym: lo.abs().max(hi.abs()), asymmetry: asym }
}

/// Eigen-decomposition of the symmetrized horizontal Ricci block,
/// eigenvalues ascending with matching unit eigenvectors.
pub fn ricci_eigen(conn: &ConnectionData) -> Vec<(f64, Vect)> {
    let ric = conn.ricci_h();
    let d = ric.rows();
    let sym = DMatrix::from_fn(d, d, |r, c| 0.5 * (ric[(r, c)] + ric[(c, r)]));
    let eig = SymmetricEigen::new(sym);
    let mut pairs: Vec<(f64, Vect)> = (0..d)
        .map(|i| (eig.eigenvalues[i], Vect::from_fn(d, |r| eig.eigenvectors[(r, i)])))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

fn symmetric_extremes(m: &Mat) -> (f64, f64, f64) {
    let d = m.rows();
    let sym = DMatrix::from_fn(d, d, |r, c| 0.5 * (m[(r, c)] + m[(c, r)]));
    let asym = (0..d)
        .flat_map(|r| (0..d).map(move |c| (r, c)))
        .fold(0.0f64, |acc, (r, c)| acc.max((0.5 * (m[(r, c)] - m[(c, r)])).abs()));
    let ev = SymmetricEigen::new(sym).eigenvalues;
    (ev.min(), ev.max(), asym)
}

/// Both sides of the two Weitzenböck identities at a point.
#[derive(Clone, Debug)]
pub struct WeitzenbockTerms {
    /// `L df(E_c) − dLf(E_c)` per frame index `c`.
    pub lhs: Vect,
    pub rhs: Vect,
    /// `L̂ df(E_c) − dLf(E_c)`.
    pub lhs_hat: Vect,
    pub rhs_hat: Vect,
}

/// Evaluates both Weitzenböck identities at `point` for every frame direction.
pub fn weitzenbock_terms(conn: &ConnectionData, f: &dyn PointFunction, point: &Mat) -> Result<WeitzenbockTerms> {
    let (n, d) = (conn.dim(), conn.rank());
    let f1 = f.d1(point);
    let f2 = f.d2(point);
    let f3 = f.d3(point).ok_or_else(|| Error::MissingThirdDerivative(f.name()))?;
    let f3 = |a: usize, b: usize, c: usize| f3[(a * n + b) * n + c];

    // ∇df(E_a, E_b) for the connection with coefficients `gam`
    let hessian = |gam: &dyn Fn(usize, usize, usize) -> f64| {
        Mat::from_fn(n, n, |a, b| f2[(a, b)] - (0..n).map(|k| gam(a, b, k) * f1[k]).sum::<f64>())
    };
    // tr_H ∇²df(E_c) for the connection with coefficients `gam`
    let laplacian_df = |gam: &dyn Fn(usize, usize, usize) -> f64, h: &Mat| {
        Vect::from_fn(n, |c| {
            let mut s = 0.0;
            for i in 0..d {
                s += f3(i, i, c);
                for m in 0..n {
                    s -= gam(i, c, m) * f2[(i, m)];
                    s -= gam(i, i, m) * h[(m, c)];
                    s -= gam(i, c, m) * h[(i, m)];
                }
            }
            s
        })
    };

    let gam = |a: usize, b: usize, k: usize| conn.gamma(a, b, k);
    let gam_hat = |a: usize, b: usize, k: usize| conn.gamma(a, b, k) - conn.torsion(a, b, k);
    let h = hessian(&gam);
    let h_hat = hessian(&gam_hat);
    let ldf = laplacian_df(&gam, &h);
    let ldf_hat = laplacian_df(&gam_hat, &h_hat);
    let dlf = Vect::from_fn(n, |c| {
        (0..d).map(|i| f3(c, i, i) - (0..n).map(|m| conn.gamma(i, i, m) * f2[(c, m)]).sum::<f64>()).sum()
    });

    let ric = conn.ricci();
    let dt = conn.delta_t();
    let mut rhs = Vect::zeros(n);
    let mut rhs_hat = Vect::zeros(n);
    for c in 0..n {
        let mut s = 0.0;
        let mut s_hat = 0.0;
        // −2 Σ_i ∇df(E_i, T(E_i,E_c) − q_c E_i)  and  2 Σ_i ∇df(E_i, q_c E_i)
        for i in 0..d {
            for k in 0..n {
                s -= 2.0 * h[(i, k)] * conn.torsion(i, c, k);
            }
            for j in 0..d {
                s += 2.0 * h[(i, j)] * conn.q(c, i, j);
                s_hat += 2.0 * h[(i, j)] * conn.q(c, i, j);
            }
        }
        // df(Ric E_c + δ_H T E_c − Σ_i T(E_i, T(E_i, E_c)))
        let mut w = Vect::from_fn(n, |k| ric[(k, c)] + dt[(k, c)]);
        for i in 0..d {
            for m in 0..n {
                let tic = conn.torsion(i, c, m);
                if tic == 0.0 {
                    continue;
                }
                for k in 0..n {
                    w[k] -= tic * conn.torsion(i, m, k);
                }
            }
        }
        s += w.dot(&f1);
        s_hat += (0..n).map(|k| ric[(k, c)] * f1[k]).sum::<f64>();
        rhs[c] = s;
        rhs_hat[c] = s_hat;
    }
    Ok(WeitzenbockTerms { lhs: ldf - dlf, rhs, lhs_hat: ldf_hat - dlf, rhs_hat })
}

/// Largest absolute residual of the two Weitzenböck identities at `point` in direction `z`.
pub fn weitzenbock_residual(conn: &ConnectionData, f: &dyn PointFunction, point: &Mat, z: &Vect) -> Result<f64> {
    let t = weitzenbock_terms(conn, f, point)?;
    let r1 = (t.lhs - t.rhs).dot(z).abs();
    let r2 = (t.lhs_hat - t.rhs_hat).dot(z).abs();
    Ok(r1.max(r2))
}

/// A function with `df(e) = α` and `∇df(e)(X, Y) = 0` whenever `X` or `Y` is horizontal.
///
/// `f = α·φ + ½ φᵀSφ` in the linear chart `φ(g) = W(g − I)`. The pairs with
/// both slots vertical cannot vanish in general since `T(V, V)` may have a
/// horizontal part.
pub fn normal_function(model: &LieAlgebraModel, conn: &ConnectionData, alpha: &Vect) -> Result<AnalyticFunction> {
    let real = model.require_realization()?;
    let n = model.dim();
    if alpha.len() != n && alpha.len() != model.rank() {
        return Err(Error::Dimension(format!("covector has {} entries", alpha.len())));
    }
    let alpha = alpha.padded(n);
    if (model.rank()..n).any(|z| alpha[z] != 0.0) {
        return Err(Error::Dimension("covector must vanish on the vertical frame".into()));
    }
    let gens = real.generators();
    let mut s = Mat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let gamma_alpha: f64 = (0..n).map(|k| conn.gamma(a, b, k) * alpha[k]).sum();
            let second = real.algebra_coords(&gens[a].matmul(&gens[b])).dot(&alpha);
            s[(a, b)] = gamma_alpha - second;
        }
    }
    let sym = (s + s.transpose()).scale(0.5);
    Ok(AnalyticFunction::new(model, FunctionKind::Quadratic { linear: alpha, quadratic: sym })?)
}

/// Largest `|∇df(e)(E_a, E_b)|` over pairs with at least one horizontal slot.
pub fn hessian_residual_at_identity(model: &LieAlgebraModel, conn: &ConnectionData, f: &dyn PointFunction) -> Result<f64> {
    let real = model.require_realization()?;
    let e = Mat::identity(real.m());
    let (n, d) = (model.dim(), model.rank());
    let f1 = f.d1(&e);
    let f2 = f.d2(&e);
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            if a >= d && b >= d {
                continue;
            }
            let h = f2[(a, b)] - (0..n).map(|k| conn.gamma(a, b, k) * f1[k]).sum::<f64>();
            worst = worst.max(h.abs());
        }
    }
    Ok(worst)
}
