//! The horizontal diffusion with generator `½L` and its transport processes.
//!
//! A path is driven by Brownian increments `ΔB_k` in horizontal coordinates at
//! the identity. Each step injects the frame velocity `ξ_k = P_k ΔB_k` through
//! the group exponential and moves `P`, `P̂` by the same half-step exponentials
//! as [`crate::development`]. Along the way it integrates
//!
//! ```text
//! A_{k+1} = A_k + P_m⁻¹ T(P_m ΔB_k) P_m                   (Stratonovich midpoint)
//! A_{k+1} = A_k + P_k⁻¹ T(P_k ΔB_k) P_k − ½ P_k⁻¹ δ_H T P_k Δ  (Itô)
//! Q_{k+1} = exp(−½ P_m⁻¹ Ric P_m Δ) Q_k
//! Q̂_{k+1} = exp(−½ P̂_m⁻¹ Ric P̂_m Δ) Q̂_k
//! ```
//!
//! with `P_m`, `P̂_m` the half-step transports. `Q̂` sees only its own `P̂`, so
//! `U Q̂ = Q + ∫dA Q` is a genuine check of the discretization.

use crate::error::{Error, Result};
use crate::geometry::{ConnectionData, LieAlgebraModel, Realization};
use crate::linalg::{Mat, Vect};
use crate::rng::NormalStream;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    StratonovichMidpoint,
    ItoCorrected,
}

/// Time grid, ensemble size and seed of a simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
}

impl SimConfig {
    pub fn new(horizon: f64, steps: usize, paths: usize, seed: u64) -> Self {
        SimConfig { horizon, steps, paths, seed, scheme: Scheme::StratonovichMidpoint }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.steps == 0 || self.paths == 0 {
            return Err(Error::Config("steps and paths must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        SimConfig { horizon, ..self.clone() }
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        SimConfig { steps, ..self.clone() }
    }

    pub fn with_paths(&self, paths: usize) -> Self {
        SimConfig { paths, ..self.clone() }
    }
}

/// Which optional processes a simulation integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Needs {
    /// `P⁻¹` and `A`; without them only `g` and `P` are recorded.
    pub torsion: bool,
    pub q: bool,
    /// `P̂`, `P̂⁻¹` and `Q̂`.
    pub hat: bool,
}

impl Needs {
    pub const ALL: Needs = Needs { torsion: true, q: true, hat: true };
    pub const BASIC: Needs = Needs { torsion: true, q: false, hat: false };
    pub const Q: Needs = Needs { torsion: true, q: true, hat: false };
    /// Group path and transport only, for functionals of `g` alone.
    pub const PATH: Needs = Needs { torsion: false, q: false, hat: false };
    /// What the damped gradient reads: `g`, `P` and the adjoint processes.
    pub const DAMPED: Needs = Needs { torsion: false, q: false, hat: true };
}

/// One simulated trajectory on the grid `t_k = kΔ`, `k = 0..=N`.
///
/// Optional processes not requested through [`Needs`] are left empty.
#[derive(Clone, Debug)]
pub struct DiffusionPath {
    pub dt: f64,
    pub db: Vec<Vect>,
    pub g: Vec<Mat>,
    pub p: Vec<Mat>,
    pub p_inv: Vec<Mat>,
    pub a: Vec<Mat>,
    pub q: Vec<Mat>,
    pub p_hat: Vec<Mat>,
    pub p_hat_inv: Vec<Mat>,
    pub q_hat: Vec<Mat>,
}

impl DiffusionPath {
    pub fn steps(&self) -> usize {
        self.db.len()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    pub fn end(&self) -> &Mat {
        self.g.last().expect("path has at least one node")
    }

    /// `Ric_{//_k} = P_k⁻¹ Ric P_k` at node `k`.
    pub fn ricci_at(&self, conn: &ConnectionData, k: usize) -> Mat {
        self.p_inv[k].matmul(conn.ricci()).matmul(&self.p[k])
    }

    /// `P_m⁻¹ Ric P_m` with the half-step transport `P_m` of step `k`, the
    /// conjugation the `Q` recurrence uses.
    pub fn ricci_mid(&self, conn: &ConnectionData, k: usize) -> Mat {
        let n = self.p[k].rows();
        let xi = self.p[k].mul_vec(&self.db[k].padded(n));
        let (half, half_inv) = conn.connection_matrix(&xi).scale(-0.5).exp_pair();
        self.p_inv[k].matmul(&half_inv).matmul(conn.ricci()).matmul(&half).matmul(&self.p[k])
    }
}

/// Per-model constants of the step kernel.
pub struct Simulator<'a> {
    pub model: &'a LieAlgebraModel,
    pub conn: &'a ConnectionData,
    real: &'a Realization,
    n: usize,
    d: usize,
    /// `Γ` vanishes on horizontal directions, so `P ≡ I`.
    flat: bool,
    flat_hat: bool,
    ricci_zero: bool,
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a LieAlgebraModel, conn: &'a ConnectionData) -> Result<Self> {
        let (n, d) = (model.dim(), model.rank());
        let flat = (0..d).all(|i| conn.connection_matrix(&Vect::basis(n, i)).is_zero());
        let flat_hat = (0..d).all(|i| conn.adjoint_matrix(&Vect::basis(n, i)).is_zero());
        Ok(Simulator {
            model,
            conn,
            real: model.require_realization()?,
            n,
            d,
            flat,
            flat_hat,
            ricci_zero: conn.ricci().is_zero(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.d
    }

    /// Brownian increments of path `index` under `config`.
    pub fn increments(&self, config: &SimConfig, index: u64) -> Vec<Vect> {
        NormalStream::new(config.seed, index).increments(config.steps, self.d, config.dt())
    }

    /// Simulates along the given increments.
    pub fn run(&self, db: &[Vect], dt: f64, scheme: Scheme, needs: Needs) -> DiffusionPath {
        debug_assert!(needs.torsion || !needs.q, "Q needs P⁻¹");
        let n = self.n;
        let cap = db.len() + 1;
        let with = |on: bool| if on { Vec::with_capacity(cap) } else { Vec::new() };
        let mut path = DiffusionPath {
            dt,
            db: db.to_vec(),
            g: Vec::with_capacity(cap),
            p: Vec::with_capacity(cap),
            p_inv: with(needs.torsion),
            a: with(needs.torsion),
            q: with(needs.q),
            p_hat: with(needs.hat),
            p_hat_inv: with(needs.hat),
            q_hat: with(needs.hat),
        };
        let id = Mat::identity(n);
        let mut g = Mat::identity(self.real.m());
        let (mut p, mut p_inv, mut a) = (id, id, Mat::zeros(n, n));
        let (mut q, mut ph, mut ph_inv, mut qh) = (id, id, id, id);
        let ric = self.conn.ricci();
        // Ric is constant in the left-invariant frame, so the transported
        // half-step factor is a conjugate of one fixed exponential
        let ric_half = if self.ricci_zero { id } else { ric.scale(-0.5 * dt).exp() };
        let delta_t = self.conn.delta_t();
        let push = |path: &mut DiffusionPath, g: Mat, p: Mat, pi: Mat, a: Mat, q: Mat, ph: Mat, phi: Mat, qh: Mat| {
            path.g.push(g);
            path.p.push(p);
            if needs.torsion {
                path.p_inv.push(pi);
                path.a.push(a);
            }
            if needs.q {
                path.q.push(q);
            }
            if needs.hat {
                path.p_hat.push(ph);
                path.p_hat_inv.push(phi);
                path.q_hat.push(qh);
            }
        };
        push(&mut path, g, p, p_inv, a, q, ph, ph_inv, qh);
        for du in db {
            let dup = du.padded(n);
            let xi = if self.flat { dup } else { p.mul_vec(&dup) };
            g = g.matmul(&self.real.exp(&xi));
            let (p0, p0_inv) = (p, p_inv);
            if !self.flat && !needs.torsion {
                let half = self.conn.connection_matrix(&xi).scale(-0.5).exp();
                p = half.matmul(&half.matmul(&p));
            } else {
                let (p_mid, p_mid_inv) = if self.flat {
                    (p, p_inv)
                } else {
                    let (half, half_inv) = self.conn.connection_matrix(&xi).scale(-0.5).exp_pair();
                    let mid = half.matmul(&p);
                    let mid_inv = p_inv.matmul(&half_inv);
                    p = half.matmul(&mid);
                    p_inv = mid_inv.matmul(&half_inv);
                    (mid, mid_inv)
                };
                a += match scheme {
                    Scheme::StratonovichMidpoint => self.transported_torsion(&p_mid, &p_mid_inv, &dup),
                    Scheme::ItoCorrected => {
                        let corr = if self.flat { *delta_t } else { p0_inv.matmul(delta_t).matmul(&p0) };
                        self.transported_torsion(&p0, &p0_inv, &dup) - corr.scale(0.5 * dt)
                    }
                };
                if needs.q && !self.ricci_zero {
                    q = p_mid_inv.matmul(&ric_half.matmul(&p_mid.matmul(&q)));
                }
            }
            if needs.hat {
                let (mid, mid_inv) = if self.flat_hat {
                    (ph, ph_inv)
                } else {
                    let (half, half_inv) = self.conn.adjoint_matrix(&xi).scale(-0.5).exp_pair();
                    let mid = half.matmul(&ph);
                    let mid_inv = ph_inv.matmul(&half_inv);
                    ph = half.matmul(&mid);
                    ph_inv = mid_inv.matmul(&half_inv);
                    (mid, mid_inv)
                };
                if !self.ricci_zero {
                    qh = mid_inv.matmul(&ric_half.matmul(&mid.matmul(&qh)));
                }
            }
            push(&mut path, g, p, p_inv, a, q, ph, ph_inv, qh);
        }
        path
    }

    /// `P⁻¹ T(P v, P ·)` for horizontal coordinates `v` padded to `n`.
    #[inline]
    fn transported_torsion(&self, p: &Mat, p_inv: &Mat, v: &Vect) -> Mat {
        let pv = if self.flat { *v } else { p.mul_vec(v) };
        let t = self.conn.torsion_matrix(&pv);
        if self.flat {
            t
        } else {
            p_inv.matmul(&t).matmul(p)
        }
    }

    /// Path `index` of the ensemble described by `config`.
    pub fn simulate(&self, config: &SimConfig, index: u64, needs: Needs) -> DiffusionPath {
        let db = self.increments(config, index);
        self.run(&db, config.dt(), config.scheme, needs)
    }
}

/// Simulates path `path_index` with every process integrated.
pub fn simulate_path(
    model: &LieAlgebraModel,
    conn: &ConnectionData,
    config: &SimConfig,
    path_index: u64,
) -> Result<DiffusionPath> {
    config.validate()?;
    Ok(Simulator::new(model, conn)?.simulate(config, path_index, Needs::ALL))
}

/// Increments of a path refined `factor` times: each coarse increment is the
/// sum of `factor` consecutive fine ones.
pub fn coarsen(db: &[Vect], factor: usize) -> Vec<Vect> {
    assert!(factor >= 1 && db.len() % factor == 0, "grid of {} steps cannot be coarsened by {factor}", db.len());
    db.chunks(factor)
        .map(|c| c.iter().skip(1).fold(c[0], |acc, v| acc + *v))
        .collect()
}

/// Largest `‖A^strat_k − A^ito_k‖_max` over the ensemble and the grid, both
/// schemes driven by the same increments.
pub fn ito_stratonovich_discrepancy(model: &LieAlgebraModel, conn: &ConnectionData, config: &SimConfig) -> Result<f64> {
    config.validate()?;
    let sim = Simulator::new(model, conn)?;
    let worst = (0..config.paths as u64)
        .map(|i| {
            let db = sim.increments(config, i);
            let s = sim.run(&db, config.dt(), Scheme::StratonovichMidpoint, Needs::BASIC);
            let t = sim.run(&db, config.dt(), Scheme::ItoCorrected, Needs::BASIC);
            s.a.iter().zip(&t.a).map(|(x, y)| (*x - *y).max_abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

/// `max_k ‖U_k Q̂_k − (Q_k + ∫_0^{t_k} dA Q)‖_max` with `U = I + A`, the
/// integral by the trapezoid rule.
pub fn hat_q_residual(path: &DiffusionPath) -> f64 {
    assert!(!path.q.is_empty() && !path.q_hat.is_empty(), "path lacks Q or Q̂");
    let n = path.a[0].rows();
    let mut acc = Mat::zeros(n, n);
    let mut worst = 0.0f64;
    for k in 0..path.a.len() {
        if k > 0 {
            let da = path.a[k] - path.a[k - 1];
            acc += da.matmul(&(path.q[k] + path.q[k - 1])).scale(0.5);
        }
        let lhs = (Mat::identity(n) + path.a[k]).matmul(&path.q_hat[k]);
        worst = worst.max((lhs - path.q[k] - acc).max_abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::canonical_connection;
    use crate::registry;

    #[test]
    fn coarsen_sums_pairs() {
        let db: Vec<Vect> = (0..4).map(|i| Vect::from_slice(&[i as f64, 1.0])).collect();
        let c = coarsen(&db, 2);
        assert_eq!(c, vec![Vect::from_slice(&[1.0, 2.0]), Vect::from_slice(&[5.0, 2.0])]);
    }

    #[test]
    fn exp_pair_inverts() {
        let m = registry::so4_rolling();
        let conn = canonical_connection(&m);
        let x = conn.connection_matrix(&Vect::from_slice(&[0.3, -0.2, 0.1, 0.05, 0.0, 0.0]));
        let (e, ei) = x.exp_pair();
        assert!((e.matmul(&ei) - Mat::identity(6)).max_abs() < 1e-15);
        assert!((e - x.exp()).max_abs() < 1e-15);
    }
}
