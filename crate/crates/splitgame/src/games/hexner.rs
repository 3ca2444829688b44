//! Linear-quadratic pursuit game with hidden target assignment. Each player
//! is a double integrator steering toward zθ, where the target sign θ is
//! drawn by nature and revealed only to player 1. Control effort is penalized
//! quadratically (R_j), the terminal miss by K_j(T). The informed player's
//! optimal behavior switches from concealing (homing to the mean target) to
//! revealing at a problem-dependent critical time t_r, computable from the
//! Riccati recursion below.

use super::{ActionSet, AffineBlock, DimKind, Dynamics, GameSpec, PlayerInput};
use crate::linalg::{self, Mat};
use crate::{Error, Result};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct HexnerParams {
    /// Spatial dimension (2 or 3). Per-player state is (positions, velocities).
    pub sdim: usize,
    pub r1: Mat,
    pub r2: Mat,
    pub k1t: Mat,
    pub k2t: Mat,
    /// Target direction in one player's state space (velocity rows zero).
    pub z: Vec<f64>,
    /// Type targets are z·θ_i.
    pub thetas: Vec<f64>,
    pub horizon: f64,
    /// Per-axis action bounds.
    pub u1_max: Vec<f64>,
    pub u2_max: Vec<f64>,
    /// Collision constraint: margin radius and penalty scale, if enabled.
    pub collision: Option<(f64, f64)>,
}

impl HexnerParams {
    pub fn state_dim(&self) -> usize {
        2 * self.sdim
    }

    fn a_mat(&self) -> Mat {
        let s = self.sdim;
        let mut a = Mat::zeros(2 * s, 2 * s);
        for i in 0..s {
            a.set(i, s + i, 1.0);
        }
        a
    }

    fn b_mat(&self) -> Mat {
        let s = self.sdim;
        let mut b = Mat::zeros(2 * s, s);
        for i in 0..s {
            b.set(s + i, i, 1.0);
        }
        b
    }

    pub fn validate(&self) -> Result<()> {
        if self.sdim != 2 && self.sdim != 3 {
            return Err(Error::config("spatial dimension must be 2 or 3"));
        }
        let n = self.state_dim();
        for (name, m, dim) in [
            ("r1", &self.r1, self.sdim),
            ("r2", &self.r2, self.sdim),
            ("k1t", &self.k1t, n),
            ("k2t", &self.k2t, n),
        ] {
            if m.rows != dim || m.cols != dim {
                return Err(Error::config(format!("{name} must be {dim}x{dim}")));
            }
            if !m.is_symmetric(1e-9) {
                return Err(Error::config(format!("{name} must be symmetric")));
            }
        }
        for (name, m) in [("r1", &self.r1), ("r2", &self.r2)] {
            let eig = linalg::symmetric_eigenvalues(m);
            if eig[0] <= 0.0 {
                return Err(Error::config(format!("{name} must be positive definite")));
            }
        }
        for (name, m) in [("k1t", &self.k1t), ("k2t", &self.k2t)] {
            let eig = linalg::symmetric_eigenvalues(m);
            if eig[0] < -1e-9 {
                return Err(Error::config(format!(
                    "{name} must be positive semidefinite (min eigenvalue {})",
                    eig[0]
                )));
            }
        }
        if self.z.len() != n {
            return Err(Error::config("target direction must match the player state dim"));
        }
        if self.thetas.len() < 2 {
            return Err(Error::config("need at least two type targets"));
        }
        if self.u1_max.len() != self.sdim || self.u2_max.len() != self.sdim {
            return Err(Error::config("action bounds must have one entry per spatial axis"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::config("horizon must be positive"));
        }
        Ok(())
    }
}

/// Unconstrained planar desk configuration: effort penalties
/// R1 = diag(0.05, 0.025), R2 = diag(0.05, 0.1), terminal position penalty
/// diag(1.2, 1.2) for both players (calibrated so the critical time lands at
/// T/2), target direction (0, 1), types θ = ±1, |u| ≤ 12 per axis.
pub fn params_desk_2d() -> HexnerParams {
    HexnerParams {
        sdim: 2,
        r1: Mat::diag(&[0.05, 0.025]),
        r2: Mat::diag(&[0.05, 0.1]),
        k1t: Mat::diag(&[1.2, 1.2, 0.0, 0.0]),
        k2t: Mat::diag(&[1.2, 1.2, 0.0, 0.0]),
        z: vec![0.0, 1.0, 0.0, 0.0],
        thetas: vec![-1.0, 1.0],
        horizon: 1.0,
        u1_max: vec![12.0, 12.0],
        u2_max: vec![12.0, 12.0],
        collision: None,
    }
}

pub fn params_desk_3d() -> HexnerParams {
    HexnerParams {
        sdim: 3,
        r1: Mat::diag(&[0.05, 0.05, 0.025]),
        r2: Mat::diag(&[0.05, 0.05, 0.1]),
        k1t: Mat::diag(&[1.2, 1.2, 1.2, 0.0, 0.0, 0.0]),
        k2t: Mat::diag(&[1.2, 1.2, 1.2, 0.0, 0.0, 0.0]),
        z: vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        thetas: vec![-1.0, 1.0],
        horizon: 1.0,
        u1_max: vec![12.0, 12.0, 12.0],
        u2_max: vec![12.0, 12.0, 12.0],
        collision: None,
    }
}

/// Constrained variant: player 1 must keep a radial separation of 0.05 from
/// player 2 (soft penalty, scale 100), with asymmetric control caps.
pub fn params_constrained_2d() -> HexnerParams {
    let mut p = params_desk_2d();
    p.u1_max = vec![6.0, 12.0];
    p.u2_max = vec![6.0, 4.0];
    p.collision = Some((0.05, 100.0));
    p
}

/// Joint-state game over [x1; x2] with per-player double-integrator blocks.
pub fn hexner_game(params: &HexnerParams) -> Result<GameSpec> {
    params.validate()?;
    let s = params.sdim;
    let n = params.state_dim();
    let a = params.a_mat();
    let b = params.b_mat();
    let blocks = vec![
        AffineBlock { offset: 0, a: a.clone(), b: b.clone(), input: PlayerInput::P1 },
        AffineBlock { offset: n, a, b, input: PlayerInput::P2 },
    ];
    let r1 = params.r1.clone();
    let r2 = params.r2.clone();
    let running = {
        let (r1, r2) = (r1.clone(), r2.clone());
        Arc::new(move |_i: usize, u: &[f64], v: &[f64]| {
            quad_form(&r1, u) - quad_form(&r2, v)
        })
    };
    let running_grad = {
        let (r1, r2) = (r1.clone(), r2.clone());
        Arc::new(move |_i: usize, u: &[f64], v: &[f64]| {
            let gu: Vec<f64> = r1.matvec(u).iter().map(|x| 2.0 * x).collect();
            let gv: Vec<f64> = r2.matvec(v).iter().map(|x| -2.0 * x).collect();
            (gu, gv)
        })
    };
    let k1t = params.k1t.clone();
    let k2t = params.k2t.clone();
    let z = params.z.clone();
    let thetas = params.thetas.clone();
    let terminal = {
        let (k1t, k2t, z, thetas) = (k1t.clone(), k2t.clone(), z.clone(), thetas.clone());
        Arc::new(move |i: usize, x: &[f64]| {
            let th = thetas[i];
            let e1: Vec<f64> = (0..n).map(|d| x[d] - z[d] * th).collect();
            let e2: Vec<f64> = (0..n).map(|d| x[n + d] - z[d] * th).collect();
            quad_form(&k1t, &e1) - quad_form(&k2t, &e2)
        })
    };
    let terminal_grad = {
        let (k1t, k2t, z, thetas) = (k1t.clone(), k2t.clone(), z.clone(), thetas.clone());
        Arc::new(move |i: usize, x: &[f64]| {
            let th = thetas[i];
            let e1: Vec<f64> = (0..n).map(|d| x[d] - z[d] * th).collect();
            let e2: Vec<f64> = (0..n).map(|d| x[n + d] - z[d] * th).collect();
            let mut g = vec![0.0; 2 * n];
            for (d, gi) in k1t.matvec(&e1).iter().enumerate() {
                g[d] = 2.0 * gi;
            }
            for (d, gi) in k2t.matvec(&e2).iter().enumerate() {
                g[n + d] = -2.0 * gi;
            }
            g
        })
    };
    let (margin, gamma) = match params.collision {
        Some((radius, gamma)) => {
            let m: super::MarginFn = Arc::new(move |x: &[f64]| {
                let mut d2 = 0.0;
                for d in 0..s {
                    let dd = x[d] - x[n + d];
                    d2 += dd * dd;
                }
                let dist = d2.sqrt();
                let mut g = vec![0.0; 2 * n];
                if dist > 1e-12 {
                    for d in 0..s {
                        let dd = (x[d] - x[n + d]) / dist;
                        g[d] = dd;
                        g[n + d] = -dd;
                    }
                }
                (dist - radius, g)
            });
            (Some(m), gamma)
        }
        None => (None, 0.0),
    };
    let mut dim_kinds = Vec::with_capacity(2 * n);
    for caps in [&params.u1_max, &params.u2_max] {
        for _ in 0..s {
            dim_kinds.push(DimKind::Pos { lo: -1.0, hi: 1.0 });
        }
        for axis in 0..s {
            dim_kinds.push(DimKind::Vel { scale: caps[axis] });
        }
    }
    let spec = GameSpec {
        name: if s == 2 { "hexner2d".into() } else { "hexner3d".into() },
        dx: 2 * n,
        ntypes: params.thetas.len(),
        horizon: params.horizon,
        uset: ActionSet::from_bounds(
            params.u1_max.iter().map(|m| -m).collect(),
            params.u1_max.clone(),
        ),
        vset: ActionSet::from_bounds(
            params.u2_max.iter().map(|m| -m).collect(),
            params.u2_max.clone(),
        ),
        dynamics: Dynamics::Affine { blocks },
        running,
        running_grad: Some(running_grad),
        step_cost: None,
        terminal,
        terminal_grad: Some(terminal_grad),
        margin,
        gamma,
        dim_kinds,
    };
    spec.validate()?;
    Ok(spec)
}

fn quad_form(m: &Mat, x: &[f64]) -> f64 {
    linalg::dot(&m.matvec(x), x)
}

/// Backward Riccati sweep K̇ = −AᵀK − KA + KᵀB R⁻¹ BᵀK from K(T), the state
/// transitions Φ̇ = AΦ from Φ(T) = I, and the revelation-rate scalars
/// d_j(t) = zᵀΦᵀK B R⁻¹ BᵀKᵀΦ z, all on a uniform grid.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub times: Vec<f64>,
    pub k: [Vec<Mat>; 2],
    pub phi: [Vec<Mat>; 2],
    pub d: [Vec<f64>; 2],
    pub r_inv: [Mat; 2],
}

impl RiccatiSolution {
    pub fn grid_step(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        let h = self.grid_step();
        let idx = (t / h).round() as usize;
        if idx >= self.times.len() || (self.times[idx] - t).abs() > 1e-6 {
            return Err(Error::domain(format!("time {t} is not on the recursion grid")));
        }
        Ok(idx)
    }

    /// Cumulative ∫₀ᵗ (d1 − d2) ds by the trapezoid rule, per grid point.
    pub fn cumulative_gap(&self) -> Vec<f64> {
        let h = self.grid_step();
        let mut cum = Vec::with_capacity(self.times.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for k in 1..self.times.len() {
            let a = self.d[0][k - 1] - self.d[1][k - 1];
            let b = self.d[0][k] - self.d[1][k];
            acc += 0.5 * h * (a + b);
            cum.push(acc);
        }
        cum
    }
}

pub fn riccati_recursion(params: &HexnerParams, grid_step: f64) -> Result<RiccatiSolution> {
    params.validate()?;
    if !(grid_step > 0.0) {
        return Err(Error::config("grid step must be positive"));
    }
    let steps_f = params.horizon / grid_step;
    let steps = steps_f.round() as usize;
    if steps == 0 || (steps_f - steps as f64).abs() > 1e-9 {
        return Err(Error::config("grid step must divide the horizon"));
    }
    let a = params.a_mat();
    let b = params.b_mat();
    let r_inv = [linalg::inverse(&params.r1)?, linalg::inverse(&params.r2)?];
    let n = params.state_dim();
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * grid_step).collect();

    let mut k_out: [Vec<Mat>; 2] = [Vec::new(), Vec::new()];
    let mut phi_out: [Vec<Mat>; 2] = [Vec::new(), Vec::new()];
    let mut d_out: [Vec<f64>; 2] = [Vec::new(), Vec::new()];

    for (j, (kt, rinv)) in [(&params.k1t, &r_inv[0]), (&params.k2t, &r_inv[1])]
        .into_iter()
        .enumerate()
    {
        // Integrate in σ = T − t with RK4 at substep h/10; collect at grid
        // points, then reverse into ascending time order.
        let brb = b.matmul(rinv).matmul(&b.transpose());
        let at = a.transpose();
        let k_rate = |k: &Mat| -> Mat {
            // dK/dσ = AᵀK + KA − KᵀBR⁻¹BᵀK
            at.matmul(k).add(&k.matmul(&a)).sub(&k.transpose().matmul(&brb).matmul(k))
        };
        let phi_rate = |p: &Mat| -> Mat {
            // dΦ/dσ = −AΦ
            a.matmul(p).scale(-1.0)
        };
        let mut k_cur = kt.clone();
        let mut phi_cur = Mat::identity(n);
        let mut ks = vec![k_cur.clone()];
        let mut phis = vec![phi_cur.clone()];
        let h = grid_step / 10.0;
        for _ in 0..steps {
            for _ in 0..10 {
                k_cur = rk4_mat(&k_rate, &k_cur, h);
                phi_cur = rk4_mat(&phi_rate, &phi_cur, h);
            }
            ks.push(k_cur.clone());
            phis.push(phi_cur.clone());
        }
        ks.reverse();
        phis.reverse();
        let z = &params.z;
        for (k_t, phi_t) in ks.iter().zip(&phis) {
            // d = (BᵀKᵀΦz)ᵀ R⁻¹ (BᵀKᵀΦz) ≥ 0
            let w = b.transpose().matmul(&k_t.transpose()).matvec(&phi_t.matvec(z));
            d_out[j].push(linalg::dot(&rinv.matvec(&w), &w));
        }
        k_out[j] = ks;
        phi_out[j] = phis;
    }

    Ok(RiccatiSolution { times, k: k_out, phi: phi_out, d: d_out, r_inv })
}

fn rk4_mat(rate: &impl Fn(&Mat) -> Mat, m: &Mat, h: f64) -> Mat {
    let k1 = rate(m);
    let k2 = rate(&m.add(&k1.scale(0.5 * h)));
    let k3 = rate(&m.add(&k2.scale(0.5 * h)));
    let k4 = rate(&m.add(&k3.scale(h)));
    m.add(&k1.add(&k2.scale(2.0)).add(&k3.scale(2.0)).add(&k4).scale(h / 6.0))
}

/// First grid time minimizing the cumulative ∫₀ᵗ(d1 − d2): the instant the
/// informed player's optimal strategy switches from concealing to revealing.
pub fn hexner_critical_time(ric: &RiccatiSolution) -> f64 {
    let cum = ric.cumulative_gap();
    let mut best = 0usize;
    for (k, &c) in cum.iter().enumerate() {
        if c < cum[best] {
            best = k;
        }
    }
    ric.times[best].clamp(0.0, *ric.times.last().unwrap())
}

/// Feedback law u_j(t) = −R_j⁻¹BᵀK_j x_j + R_j⁻¹BᵀK_jΦ_j z θ̃ with the target
/// estimate θ̃ = 0 while concealing (t ≤ t_r) and the true θ afterwards.
pub fn hexner_ground_truth_action(
    ric: &RiccatiSolution,
    params: &HexnerParams,
    t: f64,
    x_player: &[f64],
    player: PlayerInput,
    theta: f64,
    t_r: f64,
) -> Result<Vec<f64>> {
    let idx = ric.index_of(t)?;
    let j = match player {
        PlayerInput::P1 => 0,
        PlayerInput::P2 => 1,
    };
    let k_t = &ric.k[j][idx];
    let phi_t = &ric.phi[j][idx];
    let b = params.b_mat();
    let rinv = &ric.r_inv[j];
    let theta_eff = if t <= t_r { 0.0 } else { theta };
    let feedback = rinv.matmul(&b.transpose()).matmul(k_t).matvec(x_player);
    let track = rinv
        .matmul(&b.transpose())
        .matmul(k_t)
        .matmul(phi_t)
        .matvec(&params.z.iter().map(|zi| zi * theta_eff).collect::<Vec<_>>());
    Ok(feedback.iter().zip(&track).map(|(f, tr)| -f + tr).collect())
}
