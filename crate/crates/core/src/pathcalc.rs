//! Cylindrical functionals, the gradients `D_tF` and `D̃_tF`, and the
//! Cameron–Martin algebra along simulated paths.
//!
//! Grid conventions. A path has nodes `t_k = kΔ`, `k = 0..=N`. Gradient
//! processes are piecewise constant: value `G_k` holds on `(t_k, t_{k+1}]`
//! and is built from the processes at the left node `t_k`. A cylinder slot at
//! node `s` contributes to `G_k` iff `k < s`, which is the indicator
//! `1_{t ≤ t_s}` read on intervals. The value at `t = 0` itself, where a slot
//! at `s = 0` also counts, is kept separately as [`GradientProcess::at_zero`].
//!
//! Cameron–Martin paths are piecewise linear on the same grid, so
//! `⟨G, h⟩_ℍ = Σ_k G_k · Δh_k`.

use crate::diffusion::{DiffusionPath, Needs, SimConfig, Simulator};
use crate::error::{Error, Result};
use crate::functions::{parse_point_function, PointFunction};
use crate::geometry::{ConnectionData, LieAlgebraModel};
use crate::linalg::{Mat, Vect};
use std::fmt;
use std::sync::Arc;

/// How the single-point values `f_i(X_{t_i})` are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Combiner {
    Product,
    Sum,
}

/// Outer map applied to the combined value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outer {
    Identity,
    /// `√(1 + c)`; used where a functional must stay away from zero.
    SqrtOnePlus,
}

/// `F = outer(f_1(X_{t_1}) ⊙ … ⊙ f_n(X_{t_n}))`.
#[derive(Clone)]
pub struct CylindricalFunction {
    times: Vec<f64>,
    parts: Vec<Arc<dyn PointFunction>>,
    combiner: Combiner,
    outer: Outer,
}

impl fmt::Debug for CylindricalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// `F` and its per-slot frame differentials on one path.
#[derive(Clone, Debug)]
pub struct CylinderValue {
    pub value: f64,
    /// `(node, d_i F)` with `d_i F` in frame coordinates at `X_{t_node}`.
    pub slots: Vec<(usize, Vect)>,
}

impl CylindricalFunction {
    pub fn new(times: Vec<f64>, parts: Vec<Arc<dyn PointFunction>>, combiner: Combiner) -> Result<Self> {
        if times.is_empty() || times.len() != parts.len() {
            return Err(Error::Config("a cylindrical function needs one point function per time".into()));
        }
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("cylinder times must be increasing and non-negative: {times:?}")));
        }
        Ok(CylindricalFunction { times, parts, combiner, outer: Outer::Identity })
    }

    /// `f(X_t)`.
    pub fn single(t: f64, f: Arc<dyn PointFunction>) -> Self {
        CylindricalFunction::new(vec![t], vec![f], Combiner::Product).expect("single time")
    }

    pub fn product(times: Vec<f64>, parts: Vec<Arc<dyn PointFunction>>) -> Result<Self> {
        CylindricalFunction::new(times, parts, Combiner::Product)
    }

    pub fn sum(times: Vec<f64>, parts: Vec<Arc<dyn PointFunction>>) -> Result<Self> {
        CylindricalFunction::new(times, parts, Combiner::Sum)
    }

    pub fn with_outer(mut self, outer: Outer) -> Self {
        self.outer = outer;
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn name(&self) -> String {
        let times: Vec<String> = self.times.iter().map(|t| format!("{t}")).collect();
        let parts: Vec<String> = self.parts.iter().map(|f| f.name()).collect();
        let kind = match self.combiner {
            Combiner::Product => "product",
            Combiner::Sum => "sum",
        };
        let inner = format!("{kind}:{}:{}", times.join(","), parts.join(";"));
        match self.outer {
            Outer::Identity => inner,
            Outer::SqrtOnePlus => format!("sqrt1p:{inner}"),
        }
    }

    /// Grid nodes of the cylinder times on a grid of step `dt` with `steps`
    /// steps, plus a warning for every time that had to be moved.
    pub fn snap(&self, dt: f64, steps: usize) -> Result<(Vec<usize>, Vec<String>)> {
        let horizon = dt * steps as f64;
        let mut nodes = Vec::with_capacity(self.times.len());
        let mut warnings = Vec::new();
        for &t in &self.times {
            if t > horizon * (1.0 + 1e-12) {
                return Err(Error::TimeBeyondHorizon(t, horizon));
            }
            let k = ((t / dt).round() as usize).min(steps);
            if (k as f64 * dt - t).abs() > 1e-9 * dt.max(t) {
                warnings.push(format!("cylinder time {t} snapped to grid time {}", k as f64 * dt));
            }
            nodes.push(k);
        }
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("cylinder times {:?} collide on a grid of step {dt}", self.times)));
        }
        Ok((nodes, warnings))
    }

    /// Value only.
    pub fn value(&self, path: &DiffusionPath, nodes: &[usize]) -> f64 {
        let vals: Vec<f64> = self.parts.iter().zip(nodes).map(|(f, &k)| f.value(&path.g[k])).collect();
        self.outer_value(self.combine(&vals))
    }

    /// Value at explicit group points, one per slot.
    pub fn value_at(&self, points: &[Mat]) -> f64 {
        let vals: Vec<f64> = self.parts.iter().zip(points).map(|(f, g)| f.value(g)).collect();
        self.outer_value(self.combine(&vals))
    }

    /// Value and frame differentials.
    pub fn evaluate(&self, path: &DiffusionPath, nodes: &[usize]) -> CylinderValue {
        let vals: Vec<f64> = self.parts.iter().zip(nodes).map(|(f, &k)| f.value(&path.g[k])).collect();
        let c = self.combine(&vals);
        let outer_d = match self.outer {
            Outer::Identity => 1.0,
            Outer::SqrtOnePlus => 0.5 / (1.0 + c).sqrt(),
        };
        let slots = (0..vals.len())
            .map(|i| {
                let weight = match self.combiner {
                    Combiner::Sum => 1.0,
                    Combiner::Product => vals.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).product(),
                };
                let k = nodes[i];
                (k, self.parts[i].d1(&path.g[k]).scale(outer_d * weight))
            })
            .collect();
        CylinderValue { value: self.outer_value(c), slots }
    }

    fn combine(&self, vals: &[f64]) -> f64 {
        match self.combiner {
            Combiner::Product => vals.iter().product(),
            Combiner::Sum => vals.iter().sum(),
        }
    }

    fn outer_value(&self, c: f64) -> f64 {
        match self.outer {
            Outer::Identity => c,
            Outer::SqrtOnePlus => (1.0 + c).sqrt(),
        }
    }
}

/// Parses a functional id.
///
/// * `<f>`: `f(X_T)` for a point-function id `f` (see
///   [`parse_point_function`]);
/// * `at:<t>:<f>`: `f(X_t)`;
/// * `product:<t1>,<t2>,…:<f1>;<f2>;…` and `sum:…`: multi-time products or
///   sums; a single `f` is reused at every time;
/// * `sqrt1p:<id>`: `√(1 + F)`.
pub fn parse_cylindrical(model: &LieAlgebraModel, id: &str, horizon: f64) -> Result<CylindricalFunction> {
    let id = id.trim();
    if let Some(inner) = id.strip_prefix("sqrt1p:") {
        return Ok(parse_cylindrical(model, inner, horizon)?.with_outer(Outer::SqrtOnePlus));
    }
    let unknown = || Error::UnknownId(id.to_string());
    if let Some(rest) = id.strip_prefix("at:") {
        let (t, f) = rest.split_once(':').ok_or_else(unknown)?;
        let t: f64 = t.trim().parse().map_err(|_| unknown())?;
        return Ok(CylindricalFunction::single(t, parse_point_function(model, f)?));
    }
    for (prefix, combiner) in [("product:", Combiner::Product), ("sum:", Combiner::Sum)] {
        if let Some(rest) = id.strip_prefix(prefix) {
            let (tlist, flist) = rest.split_once(':').ok_or_else(unknown)?;
            let times = tlist
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| unknown()))
                .collect::<Result<Vec<_>>>()?;
            let mut parts = flist.split(';').map(|f| parse_point_function(model, f)).collect::<Result<Vec<_>>>()?;
            if parts.len() == 1 {
                parts = vec![parts[0].clone(); times.len()];
            }
            return CylindricalFunction::new(times, parts, combiner);
        }
    }
    Ok(CylindricalFunction::single(horizon, parse_point_function(model, id)?))
}

/// Piecewise linear path in horizontal coordinates with `h_0 = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct CameronMartinPath {
    dt: f64,
    values: Vec<Vect>,
}

impl CameronMartinPath {
    pub fn new(dt: f64, values: Vec<Vect>) -> Result<Self> {
        if values.is_empty() || values[0].max_abs() != 0.0 {
            return Err(Error::Config("a Cameron-Martin path starts at 0".into()));
        }
        if !(dt > 0.0) || values.iter().any(|v| v.len() != values[0].len() || !v.as_slice().iter().all(|x| x.is_finite())) {
            return Err(Error::Config("Cameron-Martin path values must be finite and of one dimension".into()));
        }
        Ok(CameronMartinPath { dt, values })
    }

    /// Samples `t ↦ h(t) − h(0)`.
    pub fn from_fn(horizon: f64, steps: usize, h: impl Fn(f64) -> Vect) -> Self {
        let dt = horizon / steps as f64;
        let h0 = h(0.0);
        CameronMartinPath { dt, values: (0..=steps).map(|k| h(k as f64 * dt) - h0).collect() }
    }

    /// `t ↦ t·v`.
    pub fn linear(horizon: f64, steps: usize, v: &Vect) -> Self {
        CameronMartinPath::from_fn(horizon, steps, |t| v.scale(t))
    }

    pub fn zeros(d: usize, horizon: f64, steps: usize) -> Self {
        CameronMartinPath::from_fn(horizon, steps, |_| Vect::zeros(d))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn rank(&self) -> usize {
        self.values[0].len()
    }

    pub fn values(&self) -> &[Vect] {
        &self.values
    }

    pub fn increment(&self, k: usize) -> Vect {
        self.values[k + 1] - self.values[k]
    }

    /// `⟨h, h⟩_ℍ = Σ|Δh_k|²/Δ`.
    pub fn energy(&self) -> f64 {
        self.inner(self)
    }

    pub fn inner(&self, other: &CameronMartinPath) -> f64 {
        (0..self.steps()).map(|k| self.increment(k).dot(&other.increment(k))).sum::<f64>() / self.dt
    }

    /// Same path as a list of increments, e.g. to perturb a driving path.
    pub fn increments(&self) -> Vec<Vect> {
        (0..self.steps()).map(|k| self.increment(k)).collect()
    }
}

/// Gradient process on a grid (see the module notes for the layout).
#[derive(Clone, Debug, PartialEq)]
pub struct GradientProcess {
    pub dt: f64,
    /// `G_k` on `(t_k, t_{k+1}]`, `k = 0..N`.
    pub values: Vec<Vect>,
    /// Value at `t = 0`.
    pub at_zero: Vect,
}

impl GradientProcess {
    /// `⟨G, h⟩_ℍ = Σ_k G_k · Δh_k`.
    pub fn pairing(&self, h: &CameronMartinPath) -> f64 {
        assert_eq!(h.steps(), self.values.len(), "grid mismatch");
        self.values.iter().enumerate().map(|(k, g)| g.dot(&h.increment(k))).sum()
    }

    /// `∫|G_t|² dt`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|g| g.norm_sq()).sum::<f64>() * self.dt
    }

    /// Largest coordinate gap to `other`, over the grid and at zero.
    pub fn max_gap(&self, other: &GradientProcess) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b).max_abs())
            .fold((self.at_zero - other.at_zero).max_abs(), f64::max)
    }
}

fn check_nodes(path: &DiffusionPath, value: &CylinderValue) {
    assert!(value.slots.iter().all(|(k, _)| *k <= path.steps()), "cylinder node beyond the path");
}

/// `D_tF = Σ_i 1_{t ≤ t_i} ♯(I + A_{t_i} − A_t)ᵀ P_{t_i}ᵀ d_i f`.
pub fn gradient(path: &DiffusionPath, value: &CylinderValue) -> GradientProcess {
    check_nodes(path, value);
    let (steps, d) = (path.steps(), path.db[0].len());
    let n = path.a[0].rows();
    // suffix sums over slots at nodes > k of u_i = (I + A_s)ᵀ w_i and w_i = P_sᵀ d_i f
    let mut by_node: Vec<(usize, Vect, Vect)> = value
        .slots
        .iter()
        .map(|(s, df)| {
            let w = path.p[*s].tr_mul_vec(df);
            let u = w + path.a[*s].tr_mul_vec(&w);
            (*s, u, w)
        })
        .collect();
    by_node.sort_by_key(|x| x.0);
    let (mut u_sum, mut w_sum) = (Vect::zeros(n), Vect::zeros(n));
    let mut next = by_node.len();
    let mut values = vec![Vect::zeros(d); steps];
    for k in (0..steps).rev() {
        while next > 0 && by_node[next - 1].0 > k {
            next -= 1;
            u_sum += by_node[next].1;
            w_sum += by_node[next].2;
        }
        values[k] = (u_sum - path.a[k].tr_mul_vec(&w_sum)).head(d);
    }
    while next > 0 {
        next -= 1;
        u_sum += by_node[next].1;
        w_sum += by_node[next].2;
    }
    let at_zero = (u_sum - path.a[0].tr_mul_vec(&w_sum)).head(d);
    GradientProcess { dt: path.dt, values, at_zero }
}

/// `D̃_tF = Σ_i 1_{t ≤ t_i} ♯(Q̂_{t_i} Q̂_t⁻¹ P̂_t⁻¹ P_t)ᵀ P̂_{t_i}ᵀ d_i f`, built
/// from the independently integrated `P̂`, `Q̂`.
pub fn damped_gradient(path: &DiffusionPath, value: &CylinderValue) -> GradientProcess {
    assert!(!path.q_hat.is_empty(), "damped gradient needs P̂ and Q̂");
    check_nodes(path, value);
    let (steps, d) = (path.steps(), path.db[0].len());
    let n = path.p[0].rows();
    let mut by_node: Vec<(usize, Vect)> = value
        .slots
        .iter()
        .map(|(s, df)| (*s, path.q_hat[*s].tr_mul_vec(&path.p_hat[*s].tr_mul_vec(df))))
        .collect();
    by_node.sort_by_key(|x| x.0);
    let pull = |k: usize, v: &Vect| -> Vect {
        let y = path.q_hat[k].transpose().solve(v).expect("Q̂ is invertible");
        path.p[k].tr_mul_vec(&path.p_hat_inv[k].tr_mul_vec(&y)).head(d)
    };
    let mut sum = Vect::zeros(n);
    let mut next = by_node.len();
    let mut values = vec![Vect::zeros(d); steps];
    for k in (0..steps).rev() {
        while next > 0 && by_node[next - 1].0 > k {
            next -= 1;
            sum += by_node[next].1;
        }
        values[k] = pull(k, &sum);
    }
    while next > 0 {
        next -= 1;
        sum += by_node[next].1;
    }
    let at_zero = pull(0, &sum);
    GradientProcess { dt: path.dt, values, at_zero }
}

/// `D̃_t = D_t − ½ Q_t^{−ᵀ} ∫_t^T Q_sᵀ Ric_{//_s}ᵀ D_s ds`, the integrand's
/// transport part by the trapezoid rule over each interval of constancy.
pub fn convert_gradients(conn: &ConnectionData, path: &DiffusionPath, grad: &GradientProcess) -> GradientProcess {
    assert!(!path.q.is_empty(), "conversion needs Q");
    let (steps, d) = (path.steps(), grad.at_zero.len());
    let n = path.a[0].rows();
    if conn.ricci().is_zero() {
        return grad.clone();
    }
    let m: Vec<Mat> = (0..=steps).map(|k| path.ricci_at(conn, k).matmul(&path.q[k])).collect();
    let mut s = Vect::zeros(n);
    let mut values = vec![Vect::zeros(d); steps];
    let correct = |k: usize, s: &Vect, g: &Vect| -> Vect {
        let qinv_t = path.q[k].inverse().expect("Q is invertible").transpose();
        *g - qinv_t.mul_vec(s).head(d).scale(0.5)
    };
    for k in (0..steps).rev() {
        let dk = grad.values[k].padded(n);
        s += (m[k] + m[k + 1]).tr_mul_vec(&dk).scale(0.5 * path.dt);
        values[k] = correct(k, &s, &grad.values[k]);
    }
    let at_zero = correct(0, &s, &grad.at_zero);
    GradientProcess { dt: path.dt, values, at_zero }
}

/// `h_t = Q_t ∫_0^t Q_s⁻¹ dk_s`, trapezoid in `Q⁻¹`.
pub fn reparam_k_to_h(path: &DiffusionPath, k: &CameronMartinPath) -> CameronMartinPath {
    assert!(!path.q.is_empty(), "reparametrization needs Q");
    assert_eq!(k.steps(), path.steps(), "grid mismatch");
    let (d, n) = (k.rank(), path.a[0].rows());
    let q_inv: Vec<Mat> = path.q.iter().map(|q| q.inverse().expect("Q is invertible")).collect();
    let mut acc = Vect::zeros(n);
    let mut values = vec![Vect::zeros(d)];
    for j in 0..k.steps() {
        acc += (q_inv[j] + q_inv[j + 1]).mul_vec(&k.increment(j).padded(n)).scale(0.5);
        values.push(path.q[j + 1].mul_vec(&acc).head(d));
    }
    CameronMartinPath { dt: k.dt, values }
}

/// Inverse of [`reparam_k_to_h`]: `dk = dh + ½ Ric_{//} h dt`, trapezoid in
/// `h` with `Ric` conjugated by the half-step transport of each step. With
/// that choice the roundtrip error is `O(Δ²)`.
pub fn reparam_h_to_k(conn: &ConnectionData, path: &DiffusionPath, h: &CameronMartinPath) -> CameronMartinPath {
    assert_eq!(h.steps(), path.steps(), "grid mismatch");
    let (d, n) = (h.rank(), path.a[0].rows());
    let ricci_zero = conn.ricci().is_zero();
    let mut values = vec![Vect::zeros(d)];
    for j in 0..h.steps() {
        let mut next = values[j] + h.increment(j);
        if !ricci_zero {
            let avg = (h.values[j] + h.values[j + 1]).padded(n);
            next += path.ricci_mid(conn, j).mul_vec(&avg).head(d).scale(0.25 * h.dt);
        }
        values.push(next);
    }
    CameronMartinPath { dt: h.dt, values }
}

/// Both sides of `P_t⁻¹ P̂_t Q̂_t ∫_0^t Q̂_s⁻¹ P̂_s⁻¹ P_s dk_s = h_t + ∫_0^t dA_s h_s`
/// with `h` from [`reparam_k_to_h`]; returns the largest coordinate gap
/// over the grid. Integrals are trapezoid sums.
pub fn conversion_identity_check(path: &DiffusionPath, k: &CameronMartinPath) -> f64 {
    assert!(!path.q_hat.is_empty() && !path.q.is_empty(), "conversion check needs Q, P̂, Q̂");
    let n = path.a[0].rows();
    let h = reparam_k_to_h(path, k);
    let kernel: Vec<Mat> = (0..=path.steps())
        .map(|j| {
            let qh_inv = path.q_hat[j].inverse().expect("Q̂ is invertible");
            qh_inv.matmul(&path.p_hat_inv[j]).matmul(&path.p[j])
        })
        .collect();
    let mut lhs_int = Vect::zeros(n);
    let mut rhs_int = Vect::zeros(n);
    let mut worst = 0.0f64;
    for j in 0..path.steps() {
        lhs_int += (kernel[j] + kernel[j + 1]).mul_vec(&k.increment(j).padded(n)).scale(0.5);
        let da = path.a[j + 1] - path.a[j];
        rhs_int += da.mul_vec(&(h.values[j] + h.values[j + 1]).padded(n)).scale(0.5);
        let t = j + 1;
        let lhs = path.p_inv[t].matmul(&path.p_hat[t]).matmul(&path.q_hat[t]).mul_vec(&lhs_int);
        let rhs = h.values[t].padded(n) + rhs_int;
        worst = worst.max((lhs - rhs).max_abs());
    }
    worst
}

/// `⟨k, B⟩_ℍ = Σ_j (Δk_j/Δ) · ΔB_j`, the forward (Itô) pairing.
pub fn cm_pairing(k: &CameronMartinPath, db: &[Vect]) -> f64 {
    assert_eq!(k.steps(), db.len(), "grid mismatch");
    db.iter().enumerate().map(|(j, b)| k.increment(j).dot(b)).sum::<f64>() / k.dt
}

/// `∫⟨ḣ + ½ Ric_{//} h, dB⟩`, the `h` term at the left node of each step.
pub fn ricci_corrected_pairing(conn: &ConnectionData, path: &DiffusionPath, h: &CameronMartinPath) -> f64 {
    let (d, n) = (h.rank(), path.a[0].rows());
    let ricci_zero = conn.ricci().is_zero();
    path.db
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let mut integrand = h.increment(j).scale(1.0 / h.dt);
            if !ricci_zero {
                integrand += path.ricci_at(conn, j).mul_vec(&h.values[j].padded(n)).head(d).scale(0.5);
            }
            integrand.dot(b)
        })
        .sum()
}

/// Driving increments `ΔB + s Δk`.
pub fn perturbed_increments(db: &[Vect], k: &CameronMartinPath, s: f64) -> Vec<Vect> {
    assert_eq!(k.steps(), db.len(), "grid mismatch");
    db.iter().enumerate().map(|(j, b)| *b + k.increment(j).scale(s)).collect()
}

/// Path `path_index` of the ensemble, driven by `B + s k` with the same
/// Brownian increments as the unperturbed path.
pub fn perturbed_path(
    model: &LieAlgebraModel,
    conn: &ConnectionData,
    config: &SimConfig,
    k: &CameronMartinPath,
    s: f64,
    path_index: u64,
) -> Result<DiffusionPath> {
    config.validate()?;
    if k.steps() != config.steps {
        return Err(Error::Dimension(format!("k has {} steps, the grid {}", k.steps(), config.steps)));
    }
    let sim = Simulator::new(model, conn)?;
    let db = perturbed_increments(&sim.increments(config, path_index), k, s);
    Ok(sim.run(&db, config.dt(), config.scheme, Needs::ALL))
}

/// `R^s = exp(s⟨k, B⟩_ℍ − ½ s² ⟨k, k⟩_ℍ)`.
pub fn girsanov_weight(k: &CameronMartinPath, db: &[Vect], s: f64) -> f64 {
    (s * cm_pairing(k, db) - 0.5 * s * s * k.energy()).exp()
}
