//! Development of horizontal controls and the variation calculus of smooth paths.
//!
//! A control `u` is piecewise linear with increments `Δu_k` in horizontal
//! coordinates at the starting point. Each step moves along the exponential of
//! the frame velocity `ξ_k = P_k Δu_k`, so with `G(v)` the matrix of `∇_v`
//!
//! ```text
//! g_{k+1} = g_k exp(ξ_k · E)      P_{k+1} = exp(−G(ξ_k)) P_k
//! ```
//!
//! where `P_k` maps coordinates at the starting point to frame coordinates at
//! `g_k`. This is exact whenever `∇_ξ ξ = 0` for horizontal `ξ`, which holds on
//! every metric-preserving registry model.

use crate::error::{Error, Result};
use crate::geometry::{ConnectionData, LieAlgebraModel, Realization};
use crate::linalg::{Mat, Vect};
use crate::stats::log_slope;
use serde::Serialize;
use std::io::{BufRead, Write};

/// Piecewise-linear horizontal control on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPath {
    dt: f64,
    increments: Vec<Vect>,
}

impl ControlPath {
    pub fn new(dt: f64, increments: Vec<Vect>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if increments.iter().any(|v| v.as_slice().iter().any(|x| !x.is_finite())) {
            return Err(Error::Config("control increments must be finite".into()));
        }
        if let Some(first) = increments.first() {
            if increments.iter().any(|v| v.len() != first.len()) {
                return Err(Error::Dimension("control increments of unequal length".into()));
            }
        }
        Ok(ControlPath { dt, increments })
    }

    /// Samples `u` at the grid nodes `k T / steps` and takes differences.
    pub fn from_fn(horizon: f64, steps: usize, u: impl Fn(f64) -> Vect) -> Result<Self> {
        let dt = horizon / steps as f64;
        let nodes: Vec<Vect> = (0..=steps).map(|k| u(k as f64 * dt)).collect();
        ControlPath::new(dt, nodes.windows(2).map(|w| w[1] - w[0]).collect())
    }

    pub fn zeros(d: usize, horizon: f64, steps: usize) -> Self {
        ControlPath { dt: horizon / steps as f64, increments: vec![Vect::zeros(d); steps] }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    pub fn increments(&self) -> &[Vect] {
        &self.increments
    }

    pub fn rank(&self) -> usize {
        self.increments.first().map_or(0, |v| v.len())
    }

    /// Node values `u_k`, starting at zero.
    pub fn nodes(&self) -> Vec<Vect> {
        let mut out = Vec::with_capacity(self.steps() + 1);
        let mut acc = Vect::zeros(self.rank());
        out.push(acc);
        for du in &self.increments {
            acc += *du;
            out.push(acc);
        }
        out
    }

    /// `self + s·other` on the same grid.
    pub fn perturbed(&self, other: &ControlPath, s: f64) -> Result<ControlPath> {
        if other.steps() != self.steps() {
            return Err(Error::Dimension("controls on different grids".into()));
        }
        let incs = self.increments.iter().zip(&other.increments).map(|(a, b)| *a + b.scale(s)).collect();
        ControlPath::new(self.dt, incs)
    }

    /// Writes `t, du_1, …, du_d` rows, one per step, `t` the step's start.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.rank()).map(|i| format!("du_{i}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for (k, du) in self.increments.iter().enumerate() {
            let vals: Vec<String> = du.as_slice().iter().map(|x| format!("{x:e}")).collect();
            writeln!(w, "{:e},{}", k as f64 * self.dt, vals.join(","))?;
        }
        Ok(())
    }

    /// Reads the format written by [`ControlPath::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<ControlPath> {
        let mut times = Vec::new();
        let mut incs = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Config(format!("control csv line {}: {e}", i + 1)))?;
            if vals.len() < 2 {
                return Err(Error::Config(format!("control csv line {}: too few columns", i + 1)));
            }
            times.push(vals[0]);
            incs.push(Vect::from_slice(&vals[1..]));
        }
        let dt = match times.len() {
            0 => return Err(Error::Config("empty control csv".into())),
            1 => return Err(Error::Config("control csv needs at least two rows to fix the step".into())),
            _ => times[1] - times[0],
        };
        ControlPath::new(dt, incs)
    }
}

/// Group elements, transports and `A` along a developed control.
#[derive(Clone, Debug)]
pub struct DevelopedPath {
    pub g: Vec<Mat>,
    /// Parallel transport `//_k`.
    pub p: Vec<Mat>,
    pub p_inv: Vec<Mat>,
    /// Adjoint transport `//̂_k`, from its own recurrence.
    pub p_hat: Vec<Mat>,
    pub a: Vec<Mat>,
    /// Frame velocities `ξ_k = P_k Δu_k`.
    pub xi: Vec<Vect>,
}

/// Transports and the midpoint data of one step.
pub(crate) struct StepTransport {
    pub xi: Vect,
    pub g_next: Mat,
    pub p_mid: Mat,
    pub p_mid_inv: Mat,
    pub p_next: Mat,
    pub p_next_inv: Mat,
    pub p_hat_next: Mat,
}

/// Per-step transport kernel shared by smooth development and diffusion.
pub(crate) struct Stepper<'a> {
    pub conn: &'a ConnectionData,
    pub real: &'a Realization,
    pub n: usize,
    pub d: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a LieAlgebraModel, conn: &'a ConnectionData) -> Result<Self> {
        Ok(Stepper { conn, real: model.require_realization()?, n: model.dim(), d: model.rank() })
    }

    /// Frame velocity `P_H du` padded to the full dimension.
    #[inline]
    pub fn frame_velocity(&self, p: &Mat, du: &Vect) -> Vect {
        let mut xi = Vect::zeros(self.n);
        for r in 0..self.d {
            let mut s = 0.0;
            for c in 0..self.d {
                s += p[(r, c)] * du[c];
            }
            xi[r] = s;
        }
        xi
    }

    pub fn step(&self, g: &Mat, p: &Mat, p_inv: &Mat, p_hat: &Mat, du: &Vect) -> StepTransport {
        let xi = self.frame_velocity(p, du);
        let g_next = g.matmul(&self.real.exp(&xi));
        let gx = self.conn.connection_matrix(&xi);
        let half = gx.scale(-0.5).exp();
        let half_inv = gx.scale(0.5).exp();
        let p_mid = half.matmul(p);
        let p_next = half.matmul(&p_mid);
        let p_mid_inv = p_inv.matmul(&half_inv);
        let p_next_inv = p_mid_inv.matmul(&half_inv);
        let ghalf = self.conn.adjoint_matrix(&xi).scale(-0.5).exp();
        let p_hat_mid = ghalf.matmul(p_hat);
        let p_hat_next = ghalf.matmul(&p_hat_mid);
        StepTransport { xi, g_next, p_mid, p_mid_inv, p_next, p_next_inv, p_hat_next }
    }

    /// `P⁻¹ T(P a, P ·)` as a matrix.
    #[inline]
    pub fn transported_torsion(&self, p: &Mat, p_inv: &Mat, a: &Vect) -> Mat {
        let pa = self.frame_velocity(p, a);
        p_inv.matmul(&self.conn.torsion_matrix(&pa)).matmul(p)
    }

    /// `P⁻¹ R(P a, P b) P` as a matrix.
    pub fn transported_curvature(&self, p: &Mat, p_inv: &Mat, a: &Vect, b: &Vect) -> Mat {
        let pa = p.mul_vec(&a.padded(self.n));
        let pb = p.mul_vec(&b.padded(self.n));
        p_inv.matmul(&self.conn.curvature_matrix(&pa, &pb)).matmul(p)
    }
}

/// Develops `u` from the identity.
pub fn develop(model: &LieAlgebraModel, conn: &ConnectionData, u: &ControlPath) -> Result<DevelopedPath> {
    let st = Stepper::new(model, conn)?;
    if u.steps() > 0 && u.rank() != model.rank() {
        return Err(Error::Dimension(format!("control has {} components, model rank is {}", u.rank(), model.rank())));
    }
    let (n, m) = (model.dim(), st.real.m());
    let cap = u.steps() + 1;
    let mut out = DevelopedPath {
        g: Vec::with_capacity(cap),
        p: Vec::with_capacity(cap),
        p_inv: Vec::with_capacity(cap),
        p_hat: Vec::with_capacity(cap),
        a: Vec::with_capacity(cap),
        xi: Vec::with_capacity(u.steps()),
    };
    out.g.push(Mat::identity(m));
    out.p.push(Mat::identity(n));
    out.p_inv.push(Mat::identity(n));
    out.p_hat.push(Mat::identity(n));
    out.a.push(Mat::zeros(n, n));
    for (k, du) in u.increments().iter().enumerate() {
        let t = st.step(&out.g[k], &out.p[k], &out.p_inv[k], &out.p_hat[k], du);
        let da = st.transported_torsion(&t.p_mid, &t.p_mid_inv, du);
        let a_next = out.a[k] + da;
        out.g.push(t.g_next);
        out.p.push(t.p_next);
        out.p_inv.push(t.p_next_inv);
        out.p_hat.push(t.p_hat_next);
        out.a.push(a_next);
        out.xi.push(t.xi);
    }
    Ok(out)
}

/// Recovers the control of a horizontal path of group elements starting at `g[0]`.
pub fn antidevelop(model: &LieAlgebraModel, conn: &ConnectionData, g: &[Mat], dt: f64) -> Result<ControlPath> {
    let st = Stepper::new(model, conn)?;
    let (n, d) = (model.dim(), model.rank());
    let mut p = Mat::identity(n);
    let mut p_inv = Mat::identity(n);
    let mut incs = Vec::with_capacity(g.len().saturating_sub(1));
    for (k, w) in g.windows(2).enumerate() {
        let g_inv = w[0].inverse().ok_or(Error::StepTooLarge { step: k })?;
        let xi = st.real.log(&g_inv.matmul(&w[1])).ok_or(Error::StepTooLarge { step: k })?;
        let vertical = (d..n).fold(0.0f64, |m, z| m.max(xi[z].abs()));
        if vertical > 1e-8 * (1.0 + xi.max_abs()) {
            return Err(Error::NotHorizontal { step: k, vertical });
        }
        let du = p_inv.mul_vec(&xi).head(d);
        incs.push(du);
        let gx = conn.connection_matrix(&xi.head(d).padded(n));
        p = gx.scale(-1.0).exp().matmul(&p);
        p_inv = p_inv.matmul(&gx.exp());
    }
    ControlPath::new(dt, incs)
}

/// `h`, `y`, `ŷ` and `k` on the grid nodes.
#[derive(Clone, Debug)]
pub struct VariationData {
    pub h: Vec<Vect>,
    pub y: Vec<Vect>,
    pub y_hat: Vec<Vect>,
    pub k: Vec<Vect>,
}

/// Solves `k_t = h_t − pr_H ∫_0^t ∫_0^s R_{//_r}(du_r, y_r) du_s` with
/// `y = h + ∫dA h` for `h`, by forward stepping with trapezoidal quadrature,
/// then builds `y` and `ŷ = h − ∫A dh`.
///
/// The curvature acts on `y`, not just `h`. On so(4) the horizontal part of
/// `R(H, V)H` is nonzero although `q ≡ 0`, and dropping `∫dA h` there leaves an
/// O(1) error against the finite-difference variation.
pub fn solve_variation_h(
    model: &LieAlgebraModel,
    conn: &ConnectionData,
    dev: &DevelopedPath,
    u: &ControlPath,
    k: &ControlPath,
) -> Result<VariationData> {
    let st = Stepper::new(model, conn)?;
    let (n, d) = (model.dim(), model.rank());
    if k.steps() != u.steps() || dev.g.len() != u.steps() + 1 {
        return Err(Error::Dimension("control, variation and developed path on different grids".into()));
    }
    let k_nodes = k.nodes();
    let mut h = Vec::with_capacity(u.steps() + 1);
    h.push(k_nodes[0]);
    // y_j = h_j + ∫_0^{t_j} dA h enters the curvature term
    let mut y = k_nodes[0].padded(n);
    let mut int_da_h = Vect::zeros(n);
    // M_j = ∫_0^{t_j} R(du, y), S_j = ∫_0^{t_j} M du
    let mut m_acc = Mat::zeros(n, n);
    let mut s_acc = Vect::zeros(n);
    for j in 0..u.steps() {
        let du = u.increments()[j];
        let dup = du.padded(n);
        let da = dev.a[j + 1] - dev.a[j];
        let r_left = st.transported_curvature(&dev.p[j], &dev.p_inv[j], &du, &y);
        // y_{j+1} = (I + ½ΔA) h_{j+1} + (∫dA h)_j + ½ΔA h_j, so (I − ¼L) h_{j+1} = rhs
        let y_known = int_da_h + da.mul_vec(&h[j].padded(n)).scale(0.5);
        let r_known = st.transported_curvature(&dev.p[j + 1], &dev.p_inv[j + 1], &du, &y_known);
        let mut l = Mat::zeros(d, d);
        for i in 0..d {
            let e = Vect::basis(n, i) + da.column(i).scale(0.5);
            let col = st.transported_curvature(&dev.p[j + 1], &dev.p_inv[j + 1], &du, &e).mul_vec(&dup);
            for r in 0..d {
                l[(r, i)] = col[r];
            }
        }
        let known = s_acc + m_acc.mul_vec(&dup) + (r_left + r_known).mul_vec(&dup).scale(0.25);
        let rhs = k_nodes[j + 1] + known.head(d);
        let sys = Mat::identity(d) - l.scale(0.25);
        let h_next = sys.solve(&rhs).ok_or_else(|| Error::Dimension("singular Volterra step".into()))?;
        int_da_h = y_known + da.mul_vec(&h_next.padded(n)).scale(0.5);
        y = h_next.padded(n) + int_da_h;
        let r_right = st.transported_curvature(&dev.p[j + 1], &dev.p_inv[j + 1], &du, &y);
        let m_next = m_acc + (r_left + r_right).scale(0.5);
        s_acc += (m_acc + m_next).scale(0.5).mul_vec(&dup);
        m_acc = m_next;
        h.push(h_next);
    }
    let (y, y_hat) = build_y(&dev.a, &h, n);
    Ok(VariationData { h, y, y_hat, k: k_nodes })
}

/// `y = h + ∫dA h` and `ŷ = h − ∫A dh`, both by the trapezoid rule.
pub(crate) fn build_y(a: &[Mat], h: &[Vect], n: usize) -> (Vec<Vect>, Vec<Vect>) {
    let mut y = Vec::with_capacity(h.len());
    let mut y_hat = Vec::with_capacity(h.len());
    let mut int_da_h = Vect::zeros(n);
    let mut int_a_dh = Vect::zeros(n);
    y.push(h[0].padded(n));
    y_hat.push(h[0].padded(n));
    for j in 0..h.len() - 1 {
        let (h0, h1) = (h[j].padded(n), h[j + 1].padded(n));
        int_da_h += (a[j + 1] - a[j]).mul_vec(&(h0 + h1).scale(0.5));
        int_a_dh += (a[j] + a[j + 1]).scale(0.5).mul_vec(&(h1 - h0));
        y.push(h1 + int_da_h);
        y_hat.push(h1 - int_a_dh);
    }
    (y, y_hat)
}

/// Variation field of `s ↦ Dev(u + s k)` by a forward difference in `s`:
/// `Y_k = log(g_k⁻¹ g_k^s) / s` in frame coordinates at `g_k`.
pub fn finite_difference_variation(
    model: &LieAlgebraModel,
    conn: &ConnectionData,
    u: &ControlPath,
    k: &ControlPath,
    s: f64,
) -> Result<Vec<Vect>> {
    let real = model.require_realization()?;
    let base = develop(model, conn, u)?;
    let moved = develop(model, conn, &u.perturbed(k, s)?)?;
    base.g
        .iter()
        .zip(&moved.g)
        .enumerate()
        .map(|(j, (g0, g1))| {
            let rel = g0.inverse().ok_or(Error::StepTooLarge { step: j })?.matmul(g1);
            real.log(&rel).map(|x| x.scale(1.0 / s)).ok_or(Error::StepTooLarge { step: j })
        })
        .collect()
}

/// `max_k |Y_k − P_k y_k|` between the finite-difference variation and the
/// Volterra-based prediction.
pub fn variation_identity_error(
    model: &LieAlgebraModel,
    conn: &ConnectionData,
    u: &ControlPath,
    k: &ControlPath,
    s: f64,
) -> Result<f64> {
    let dev = develop(model, conn, u)?;
    let var = solve_variation_h(model, conn, &dev, u, k)?;
    let fd = finite_difference_variation(model, conn, u, k, s)?;
    Ok(fd.iter()
        .zip(dev.p.iter().zip(&var.y))
        .map(|(y_fd, (p, y))| (*y_fd - p.mul_vec(y)).max_abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct VariationLevel {
    pub steps: usize,
    pub s: f64,
    pub error: f64,
    /// `max_j |h_j − k_j|`, zero when the curvature term vanishes.
    pub h_minus_k: f64,
}

/// Variation identity error as `s` and `Δ` are halved together.
#[derive(Clone, Debug, Serialize)]
pub struct VariationStudy {
    pub levels: Vec<VariationLevel>,
    /// Log-log slope of the error against `s`.
    pub slope: f64,
}

/// Runs [`variation_identity_error`] at `steps·2^ℓ` steps and `s/2^ℓ` for
/// `ℓ = 0..=halvings`, with controls sampled from `u` and `k` on `[0, horizon]`.
#[allow(clippy::too_many_arguments)]
pub fn variation_study(
    model: &LieAlgebraModel,
    conn: &ConnectionData,
    u: impl Fn(f64) -> Vect,
    k: impl Fn(f64) -> Vect,
    horizon: f64,
    steps: usize,
    s: f64,
    halvings: usize,
) -> Result<VariationStudy> {
    let mut levels = Vec::with_capacity(halvings + 1);
    for l in 0..=halvings {
        let n = steps << l;
        let s_l = s / (1u64 << l) as f64;
        let uc = ControlPath::from_fn(horizon, n, &u)?;
        let kc = ControlPath::from_fn(horizon, n, &k)?;
        let dev = develop(model, conn, &uc)?;
        let var = solve_variation_h(model, conn, &dev, &uc, &kc)?;
        let h_minus_k = var.h.iter().zip(&var.k).map(|(h, k)| (*h - *k).max_abs()).fold(0.0, f64::max);
        levels.push(VariationLevel { steps: n, s: s_l, error: variation_identity_error(model, conn, &uc, &kc, s_l)?, h_minus_k });
    }
    let xs: Vec<f64> = levels.iter().map(|l| l.s).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.error).collect();
    Ok(VariationStudy { slope: log_slope(&xs, &ys), levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::canonical_connection;
    use crate::registry;

    #[test]
    fn csv_roundtrip() {
        let u = ControlPath::from_fn(1.0, 5, |t| Vect::from_slice(&[t.sin(), t * t])).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let back = ControlPath::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.steps(), 5);
        for (a, b) in back.increments().iter().zip(u.increments()) {
            assert!((*a - *b).max_abs() < 1e-15);
        }
    }

    #[test]
    fn abelian_development_is_translation() {
        let m = registry::abelian(3).unwrap();
        let conn = canonical_connection(&m);
        let u = ControlPath::from_fn(1.0, 20, |t| Vect::from_slice(&[t, (3.0 * t).sin(), -t * t])).unwrap();
        let dev = develop(&m, &conn, &u).unwrap();
        for (g, uk) in dev.g.iter().zip(u.nodes()) {
            for i in 0..3 {
                assert!((g[(i, 3)] - uk[i]).abs() < 1e-14);
            }
        }
        assert!(dev.p.iter().chain(&dev.p_hat).all(|p| *p == Mat::identity(3)));
        assert!(dev.a.iter().all(|a| a.max_abs() == 0.0));
    }
}
