//! Value approximation. `Icnn` is a small feed-forward net that is convex in
//! a designated block of inputs (the belief or dual-vector coordinates) and
//! unrestricted in the rest (the state features). Convexity comes from the
//! usual construction: the convex path applies nonnegative weights to already
//! convex activations and adds affine functions of the convex inputs, with
//! softplus (convex, nondecreasing) between layers. The state path is a plain
//! two-layer tanh net feeding the convex path additively, which does not
//! disturb convexity in the designated block.
//!
//! Everything trains by full-batch gradient descent with a handwritten
//! backward pass; gradients with respect to the inputs are exposed because
//! the saddle-point solver differentiates through next-stage values.

use crate::games::DimKind;
use crate::linalg::Mat;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IcnnConfig {
    pub state_dim: usize,
    pub conv_dim: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl IcnnConfig {
    pub fn new(state_dim: usize, conv_dim: usize) -> Self {
        IcnnConfig { state_dim, conv_dim, hidden: 64, seed: 0 }
    }
}

/// Input-convex value network. `wz1` and `wz` are kept elementwise
/// nonnegative by projection after every training step; that is the whole
/// convexity argument, so `validate` re-checks it on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Icnn {
    pub sdim: usize,
    pub qdim: usize,
    pub h: usize,
    a0: Mat,
    c0: Vec<f64>,
    a1: Mat,
    c1: Vec<f64>,
    wq0: Mat,
    u0: Mat,
    b0: Vec<f64>,
    wz1: Mat,
    wq1: Mat,
    u1m: Mat,
    b1: Vec<f64>,
    wz: Vec<f64>,
    wq: Vec<f64>,
    wu: Vec<f64>,
    bout: f64,
}

struct Activations {
    u1: Vec<f64>,
    u2: Vec<f64>,
    pre_z1: Vec<f64>,
    z1: Vec<f64>,
    pre_z2: Vec<f64>,
    z2: Vec<f64>,
    out: f64,
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone)]
pub struct IcnnGrad {
    a0: Mat,
    c0: Vec<f64>,
    a1: Mat,
    c1: Vec<f64>,
    wq0: Mat,
    u0: Mat,
    b0: Vec<f64>,
    wz1: Mat,
    wq1: Mat,
    u1m: Mat,
    b1: Vec<f64>,
    wz: Vec<f64>,
    wq: Vec<f64>,
    wu: Vec<f64>,
    bout: f64,
}

impl IcnnGrad {
    /// Elementwise `self[i] = f(self[i], other[i])` over every parameter slot.
    fn zip_apply(&mut self, other: &IcnnGrad, f: impl Fn(f64, f64) -> f64 + Copy) {
        let mats: [(&mut Mat, &Mat); 7] = [
            (&mut self.a0, &other.a0),
            (&mut self.a1, &other.a1),
            (&mut self.wq0, &other.wq0),
            (&mut self.u0, &other.u0),
            (&mut self.wz1, &other.wz1),
            (&mut self.wq1, &other.wq1),
            (&mut self.u1m, &other.u1m),
        ];
        for (m, o) in mats {
            for (x, y) in m.data.iter_mut().zip(&o.data) {
                *x = f(*x, *y);
            }
        }
        let vecs: [(&mut Vec<f64>, &Vec<f64>); 7] = [
            (&mut self.c0, &other.c0),
            (&mut self.c1, &other.c1),
            (&mut self.b0, &other.b0),
            (&mut self.b1, &other.b1),
            (&mut self.wz, &other.wz),
            (&mut self.wq, &other.wq),
            (&mut self.wu, &other.wu),
        ];
        for (v, o) in vecs {
            for (x, y) in v.iter_mut().zip(o) {
                *x = f(*x, *y);
            }
        }
        self.bout = f(self.bout, other.bout);
    }
}

fn outer_add(m: &mut Mat, g: &[f64], x: &[f64]) {
    for (r, gr) in g.iter().enumerate() {
        for (c, xc) in x.iter().enumerate() {
            let v = m.at(r, c) + gr * xc;
            m.set(r, c, v);
        }
    }
}

fn tr_matvec(m: &Mat, g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.cols];
    for (r, gr) in g.iter().enumerate() {
        for (c, o) in out.iter_mut().enumerate() {
            *o += m.at(r, c) * gr;
        }
    }
    out
}

impl Icnn {
    pub fn new(cfg: IcnnConfig) -> Self {
        let (s, q, h) = (cfg.state_dim, cfg.conv_dim, cfg.hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut mat = |rows: usize, cols: usize, lo: f64, hi: f64| {
            let mut m = Mat::zeros(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    m.set(r, c, rng.gen_range(lo..hi));
                }
            }
            m
        };
        let ws = 1.0 / (s.max(1) as f64).sqrt();
        let wh = 1.0 / (h as f64).sqrt();
        let wq_scale = 1.0 / (q.max(1) as f64).sqrt();
        let a0 = mat(h, s, -ws, ws);
        let a1 = mat(h, h, -wh, wh);
        let wq0 = mat(h, q, -wq_scale, wq_scale);
        let u0 = mat(h, h, -wh, wh);
        let wz1 = mat(h, h, 0.0, wh);
        let wq1 = mat(h, q, -wq_scale, wq_scale);
        let u1m = mat(h, h, -wh, wh);
        let mut rng2 = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
        let vecr = |rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(lo..hi)).collect()
        };
        Icnn {
            sdim: s,
            qdim: q,
            h,
            a0,
            c0: vecr(&mut rng2, h, -0.1, 0.1),
            a1,
            c1: vecr(&mut rng2, h, -0.1, 0.1),
            wq0,
            u0,
            b0: vecr(&mut rng2, h, -0.1, 0.1),
            wz1,
            wq1,
            u1m,
            b1: vecr(&mut rng2, h, -0.1, 0.1),
            wz: vecr(&mut rng2, h, 0.0, wh),
            wq: vecr(&mut rng2, q, -0.1, 0.1),
            wu: vecr(&mut rng2, h, -0.1, 0.1),
            bout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (s, q, h) = (self.sdim, self.qdim, self.h);
        if h == 0 || h > 4096 || s > 4096 || q == 0 || q > 4096 {
            return Err(Error::config("net dimensions out of range"));
        }
        let shapes: [(&str, &Mat, usize, usize); 7] = [
            ("a0", &self.a0, h, s),
            ("a1", &self.a1, h, h),
            ("wq0", &self.wq0, h, q),
            ("u0", &self.u0, h, h),
            ("wz1", &self.wz1, h, h),
            ("wq1", &self.wq1, h, q),
            ("u1m", &self.u1m, h, h),
        ];
        for (name, m, rows, cols) in shapes {
            if m.rows != rows || m.cols != cols {
                return Err(Error::config(format!("{name} must be {rows}x{cols}")));
            }
            if m.data.len() != rows * cols {
                return Err(Error::config(format!("{name} data length mismatch")));
            }
            if m.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("{name} has non-finite entries")));
            }
        }
        let vecs: [(&str, &[f64], usize); 7] = [
            ("c0", &self.c0, h),
            ("c1", &self.c1, h),
            ("b0", &self.b0, h),
            ("b1", &self.b1, h),
            ("wz", &self.wz, h),
            ("wq", &self.wq, q),
            ("wu", &self.wu, h),
        ];
        for (name, v, len) in vecs {
            if v.len() != len {
                return Err(Error::config(format!("{name} must have length {len}")));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::config(format!("{name} has non-finite entries")));
            }
        }
        if !self.bout.is_finite() {
            return Err(Error::config("bout is non-finite"));
        }
        if self.wz1.data.iter().any(|&v| v < 0.0) || self.wz.iter().any(|&v| v < 0.0) {
            return Err(Error::config("convex-path weights must be nonnegative"));
        }
        Ok(())
    }

    fn forward(&self, s: &[f64], q: &[f64]) -> Activations {
        let tanh_layer = |m: &Mat, x: &[f64], b: &[f64]| -> Vec<f64> {
            m.matvec(x).iter().zip(b).map(|(y, bi)| (y + bi).tanh()).collect()
        };
        let u1 = tanh_layer(&self.a0, s, &self.c0);
        let u2 = tanh_layer(&self.a1, &u1, &self.c1);
        let pre_z1: Vec<f64> = {
            let a = self.wq0.matvec(q);
            let b = self.u0.matvec(&u1);
            (0..self.h).map(|i| a[i] + b[i] + self.b0[i]).collect()
        };
        let z1: Vec<f64> = pre_z1.iter().map(|&x| softplus(x)).collect();
        let pre_z2: Vec<f64> = {
            let a = self.wz1.matvec(&z1);
            let b = self.wq1.matvec(q);
            let c = self.u1m.matvec(&u2);
            (0..self.h).map(|i| a[i] + b[i] + c[i] + self.b1[i]).collect()
        };
        let z2: Vec<f64> = pre_z2.iter().map(|&x| softplus(x)).collect();
        let out = crate::linalg::dot(&self.wz, &z2)
            + crate::linalg::dot(&self.wq, q)
            + crate::linalg::dot(&self.wu, &u2)
            + self.bout;
        Activations { u1, u2, pre_z1, z1, pre_z2, z2, out }
    }

    pub fn value(&self, s: &[f64], q: &[f64]) -> f64 {
        self.forward(s, q).out
    }

    /// Value plus gradients with respect to both input blocks.
    pub fn value_grad(&self, s: &[f64], q: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let act = self.forward(s, q);
        let (gs, gq, _) = self.backward(s, q, &act, 1.0, None);
        (act.out, gs, gq)
    }

    /// Reverse pass. `go` is dLoss/dout. When `grad` is given, parameter
    /// gradients are accumulated into it; input gradients are always
    /// returned.
    fn backward(
        &self,
        s: &[f64],
        q: &[f64],
        act: &Activations,
        go: f64,
        mut grad: Option<&mut IcnnGrad>,
    ) -> (Vec<f64>, Vec<f64>, f64) {
        let h = self.h;
        if let Some(g) = grad.as_deref_mut() {
            for i in 0..h {
                g.wz[i] += go * act.z2[i];
                g.wu[i] += go * act.u2[i];
            }
            for (i, qi) in q.iter().enumerate() {
                g.wq[i] += go * qi;
            }
            g.bout += go;
        }
        let g_pre_z2: Vec<f64> =
            (0..h).map(|i| go * self.wz[i] * sigmoid(act.pre_z2[i])).collect();
        if let Some(g) = grad.as_deref_mut() {
            outer_add(&mut g.wz1, &g_pre_z2, &act.z1);
            outer_add(&mut g.wq1, &g_pre_z2, q);
            outer_add(&mut g.u1m, &g_pre_z2, &act.u2);
            for i in 0..h {
                g.b1[i] += g_pre_z2[i];
            }
        }
        let g_z1 = tr_matvec(&self.wz1, &g_pre_z2);
        let mut g_u2 = tr_matvec(&self.u1m, &g_pre_z2);
        for i in 0..h {
            g_u2[i] += go * self.wu[i];
        }
        let mut g_q = tr_matvec(&self.wq1, &g_pre_z2);
        for (i, w) in self.wq.iter().enumerate() {
            g_q[i] += go * w;
        }
        let g_pre_z1: Vec<f64> =
            (0..h).map(|i| g_z1[i] * sigmoid(act.pre_z1[i])).collect();
        if let Some(g) = grad.as_deref_mut() {
            outer_add(&mut g.wq0, &g_pre_z1, q);
            outer_add(&mut g.u0, &g_pre_z1, &act.u1);
            for i in 0..h {
                g.b0[i] += g_pre_z1[i];
            }
        }
        for (i, gq) in tr_matvec(&self.wq0, &g_pre_z1).iter().enumerate() {
            g_q[i] += gq;
        }
        let mut g_u1 = tr_matvec(&self.u0, &g_pre_z1);
        let g_pre_u2: Vec<f64> =
            (0..h).map(|i| g_u2[i] * (1.0 - act.u2[i] * act.u2[i])).collect();
        if let Some(g) = grad.as_deref_mut() {
            outer_add(&mut g.a1, &g_pre_u2, &act.u1);
            for i in 0..h {
                g.c1[i] += g_pre_u2[i];
            }
        }
        for (i, gu) in tr_matvec(&self.a1, &g_pre_u2).iter().enumerate() {
            g_u1[i] += gu;
        }
        let g_pre_u1: Vec<f64> =
            (0..h).map(|i| g_u1[i] * (1.0 - act.u1[i] * act.u1[i])).collect();
        if let Some(g) = grad.as_deref_mut() {
            outer_add(&mut g.a0, &g_pre_u1, s);
            for i in 0..h {
                g.c0[i] += g_pre_u1[i];
            }
        }
        let g_s = tr_matvec(&self.a0, &g_pre_u1);
        (g_s, g_q, act.out)
    }

    fn zero_grad(&self) -> IcnnGrad {
        IcnnGrad {
            a0: Mat::zeros(self.h, self.sdim),
            c0: vec![0.0; self.h],
            a1: Mat::zeros(self.h, self.h),
            c1: vec![0.0; self.h],
            wq0: Mat::zeros(self.h, self.qdim),
            u0: Mat::zeros(self.h, self.h),
            b0: vec![0.0; self.h],
            wz1: Mat::zeros(self.h, self.h),
            wq1: Mat::zeros(self.h, self.qdim),
            u1m: Mat::zeros(self.h, self.h),
            b1: vec![0.0; self.h],
            wz: vec![0.0; self.h],
            wq: vec![0.0; self.qdim],
            wu: vec![0.0; self.h],
            bout: 0.0,
        }
    }

    fn step_and_project(&mut self, g: &IcnnGrad, lr: f64) {
        let step_mat = |m: &mut Mat, gm: &Mat| {
            for r in 0..m.rows {
                for c in 0..m.cols {
                    let v = m.at(r, c) - lr * gm.at(r, c);
                    m.set(r, c, v);
                }
            }
        };
        let step_vec = |v: &mut [f64], gv: &[f64]| {
            for (a, b) in v.iter_mut().zip(gv) {
                *a -= lr * b;
            }
        };
        step_mat(&mut self.a0, &g.a0);
        step_vec(&mut self.c0, &g.c0);
        step_mat(&mut self.a1, &g.a1);
        step_vec(&mut self.c1, &g.c1);
        step_mat(&mut self.wq0, &g.wq0);
        step_mat(&mut self.u0, &g.u0);
        step_vec(&mut self.b0, &g.b0);
        step_mat(&mut self.wz1, &g.wz1);
        step_mat(&mut self.wq1, &g.wq1);
        step_mat(&mut self.u1m, &g.u1m);
        step_vec(&mut self.b1, &g.b1);
        step_vec(&mut self.wz, &g.wz);
        step_vec(&mut self.wq, &g.wq);
        step_vec(&mut self.wu, &g.wu);
        self.bout -= lr * g.bout;
        // Convexity projection.
        for r in 0..self.wz1.rows {
            for c in 0..self.wz1.cols {
                if self.wz1.at(r, c) < 0.0 {
                    self.wz1.set(r, c, 0.0);
                }
            }
        }
        for w in &mut self.wz {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
    }

    pub fn mse(&self, xs: &[(Vec<f64>, Vec<f64>)], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        xs.iter()
            .zip(ys)
            .map(|((s, q), y)| {
                let d = self.value(s, q) - y;
                d * d
            })
            .sum::<f64>()
            / n
    }

    pub fn fit(
        &mut self,
        xs: &[(Vec<f64>, Vec<f64>)],
        ys: &[f64],
        opts: &FitOptions,
    ) -> Result<FitReport> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::config("fit needs matching nonempty samples and targets"));
        }
        for (s, q) in xs {
            if s.len() != self.sdim || q.len() != self.qdim {
                return Err(Error::config("fit sample dims do not match the net"));
            }
        }
        let n = xs.len() as f64;
        let mut lr = opts.lr;
        let initial_loss = self.mse(xs, ys);
        let mut best = self.clone();
        let mut best_loss = initial_loss;
        let mut loss_at_check = initial_loss;
        let mut epochs_run = 0;
        // Adam state: first and second gradient moments plus a step counter
        // for bias correction. Reset whenever training rewinds.
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let mut m1 = self.zero_grad();
        let mut m2 = self.zero_grad();
        let mut t = 0u32;
        for epoch in 0..opts.epochs {
            let mut grad = self.zero_grad();
            let mut loss = 0.0;
            for ((s, q), y) in xs.iter().zip(ys) {
                let act = self.forward(s, q);
                let d = act.out - y;
                loss += d * d;
                self.backward(s, q, &act, 2.0 * d / n, Some(&mut grad));
            }
            loss /= n;
            if !loss.is_finite() {
                // Blew up: rewind to the best snapshot at a smaller step.
                *self = best.clone();
                m1 = self.zero_grad();
                m2 = self.zero_grad();
                t = 0;
                lr *= 0.5;
                if lr < 1e-12 {
                    break;
                }
                continue;
            }
            if loss < best_loss {
                best_loss = loss;
                best = self.clone();
            }
            if loss < opts.tol {
                epochs_run = epoch + 1;
                break;
            }
            t += 1;
            m1.zip_apply(&grad, |m, g| b1 * m + (1.0 - b1) * g);
            m2.zip_apply(&grad, |v, g| b2 * v + (1.0 - b2) * g * g);
            let bc1 = 1.0 - b1.powi(t as i32);
            let bc2 = 1.0 - b2.powi(t as i32);
            let mut dir = m1.clone();
            dir.zip_apply(&m2, |m, v| (m / bc1) / ((v / bc2).sqrt() + eps));
            self.step_and_project(&dir, lr);
            epochs_run = epoch + 1;
            if (epoch + 1) % opts.check_every == 0 {
                // Monotone progress check over the window: no improvement
                // means the step is too long for the local curvature.
                if std::env::var_os("SPLITGAME_FIT_TRACE").is_some() {
                    eprintln!("epoch {} loss {loss:.3e} lr {lr:.3e}", epoch + 1);
                }
                if loss >= loss_at_check {
                    lr *= 0.5;
                    *self = best.clone();
                    m1 = self.zero_grad();
                    m2 = self.zero_grad();
                    t = 0;
                    if lr < 1e-12 {
                        break;
                    }
                }
                loss_at_check = loss;
            }
        }
        let final_self_loss = self.mse(xs, ys);
        if final_self_loss > best_loss {
            *self = best;
        }
        let final_loss = self.mse(xs, ys);
        Ok(FitReport { initial_loss, final_loss, epochs_run, lr_final: lr })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = NetFile { kind: NET_KIND.into(), net: self.clone() };
        serde_json::to_string(&file).map_err(|e| Error::numeric(format!("net encode: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetFile = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("bad net json: {e}")))?;
        if file.kind != NET_KIND {
            return Err(Error::config(format!("unknown net kind {:?}", file.kind)));
        }
        file.net.validate()?;
        Ok(file.net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::MissingArtifact(format!("net {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

const NET_KIND: &str = "icnn-v1";

#[derive(Serialize, Deserialize)]
struct NetFile {
    kind: String,
    net: Icnn,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub epochs: usize,
    pub lr: f64,
    
    pub check_every: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { epochs: 2000, lr: 1e-2, check_every: 50, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs_run: usize,
    pub lr_final: f64,
}

/// Maps raw states into net inputs: positions pass through, velocities are
/// divided by their reachable span t·u_max at the stage time of the state.
#[derive(Debug, Clone)]
pub struct StateNormalizer {
    kinds: Vec<DimKind>,
    t: f64,
}

impl StateNormalizer {
    pub fn new(kinds: &[DimKind], t: f64) -> Self {
        StateNormalizer { kinds: kinds.to_vec(), t }
    }

    pub fn scale(&self, d: usize) -> f64 {
        match self.kinds[d] {
            DimKind::Pos { .. } => 1.0,
            DimKind::Vel { scale } => 1.0 / (self.t * scale).max(1e-9),
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(d, &v)| v * self.scale(d)).collect()
    }
}

/// Affine map for the convex-input block: identity for beliefs (already in
/// [0,1]), a per-coordinate rescale to [-1,1] for dual vectors.
#[derive(Debug, Clone)]
pub enum QMap {
    Identity,
    Affine { lo: Vec<f64>, hi: Vec<f64> },
}

impl QMap {
    pub fn apply(&self, q: &[f64]) -> Vec<f64> {
        match self {
            QMap::Identity => q.to_vec(),
            QMap::Affine { lo, hi } => q
                .iter()
                .enumerate()
                .map(|(i, &v)| 2.0 * (v - lo[i]) / (hi[i] - lo[i]).max(1e-12) - 1.0)
                .collect(),
        }
    }

    pub fn scale(&self, i: usize) -> f64 {
        match self {
            QMap::Identity => 1.0,
            QMap::Affine { lo, hi } => 2.0 / (hi[i] - lo[i]).max(1e-12),
        }
    }
}

/// A stage-value evaluator: anything the saddle solver can query for a value
/// and gradients at (state, convex-block) points. Raw (unnormalized) inputs.
pub trait ValueMap: Send + Sync {
    fn eval(&self, x: &[f64], q: &[f64]) -> f64;
    /// Returns (value, d/dx, d/dq).
    fn eval_grad(&self, x: &[f64], q: &[f64]) -> (f64, Vec<f64>, Vec<f64>);
    fn qdim(&self) -> usize;
}

/// A trained net together with its input maps.
pub struct NetMap {
    pub net: Icnn,
    pub norm: StateNormalizer,
    pub qmap: QMap,
}

impl ValueMap for NetMap {
    fn eval(&self, x: &[f64], q: &[f64]) -> f64 {
        self.net.value(&self.norm.normalize(x), &self.qmap.apply(q))
    }

    fn eval_grad(&self, x: &[f64], q: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let (v, mut gs, mut gq) =
            self.net.value_grad(&self.norm.normalize(x), &self.qmap.apply(q));
        for (d, g) in gs.iter_mut().enumerate() {
            *g *= self.norm.scale(d);
        }
        for (i, g) in gq.iter_mut().enumerate() {
            *g *= self.qmap.scale(i);
        }
        (v, gs, gq)
    }

    fn qdim(&self) -> usize {
        self.net.qdim
    }
}

/// Exact terminal stage of the primal program: Σᵢ pᵢ gᵢ(x), with the belief
/// passed by its first I−1 coordinates.
pub struct TerminalPrimal {
    pub terminal: crate::games::TerminalCost,
    pub terminal_grad: Option<crate::games::TerminalCostGrad>,
    pub ntypes: usize,
    pub dx: usize,
}

impl TerminalPrimal {
    pub fn from_spec(spec: &crate::games::GameSpec) -> Self {
        TerminalPrimal {
            terminal: spec.terminal.clone(),
            terminal_grad: spec.terminal_grad.clone(),
            ntypes: spec.ntypes,
            dx: spec.dx,
        }
    }

    fn grad_i(&self, i: usize, x: &[f64]) -> Vec<f64> {
        match &self.terminal_grad {
            Some(g) => g(i, x),
            None => central_fd(x, |xx| (self.terminal)(i, xx)),
        }
    }
}

fn central_fd(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    let mut g = vec![0.0; x.len()];
    let mut xx = x.to_vec();
    for d in 0..x.len() {
        xx[d] = x[d] + h;
        let fp = f(&xx);
        xx[d] = x[d] - h;
        let fm = f(&xx);
        xx[d] = x[d];
        g[d] = (fp - fm) / (2.0 * h);
    }
    g
}

impl ValueMap for TerminalPrimal {
    fn eval(&self, x: &[f64], q: &[f64]) -> f64 {
        let p_last = 1.0 - q.iter().sum::<f64>();
        let mut v = p_last * (self.terminal)(self.ntypes - 1, x);
        for (i, &pi) in q.iter().enumerate() {
            v += pi * (self.terminal)(i, x);
        }
        v
    }

    fn eval_grad(&self, x: &[f64], q: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let g_last = (self.terminal)(self.ntypes - 1, x);
        let p_last = 1.0 - q.iter().sum::<f64>();
        let mut v = p_last * g_last;
        let mut gq = vec![0.0; q.len()];
        let mut gx = self.grad_i(self.ntypes - 1, x);
        for g in gx.iter_mut() {
            *g *= p_last;
        }
        for (i, &pi) in q.iter().enumerate() {
            let gi = (self.terminal)(i, x);
            v += pi * gi;
            gq[i] = gi - g_last;
            for (d, gd) in self.grad_i(i, x).iter().enumerate() {
                gx[d] += pi * gd;
            }
        }
        (v, gx, gq)
    }

    fn qdim(&self) -> usize {
        self.ntypes - 1
    }
}

/// Exact terminal stage of the dual program: maxᵢ (p̂ᵢ − gᵢ(x)). The reported
/// value is the exact max; gradients use a logsumexp softening (temperature
/// `temp`) so the saddle solver sees a smooth landscape near ties.
pub struct TerminalDual {
    pub terminal: crate::games::TerminalCost,
    pub terminal_grad: Option<crate::games::TerminalCostGrad>,
    pub ntypes: usize,
    pub dx: usize,
    pub temp: f64,
}

impl TerminalDual {
    pub fn from_spec(spec: &crate::games::GameSpec) -> Self {
        TerminalDual {
            terminal: spec.terminal.clone(),
            terminal_grad: spec.terminal_grad.clone(),
            ntypes: spec.ntypes,
            dx: spec.dx,
            temp: 1e-2,
        }
    }

    fn grad_i(&self, i: usize, x: &[f64]) -> Vec<f64> {
        match &self.terminal_grad {
            Some(g) => g(i, x),
            None => central_fd(x, |xx| (self.terminal)(i, xx)),
        }
    }
}

impl ValueMap for TerminalDual {
    fn eval(&self, x: &[f64], q: &[f64]) -> f64 {
        (0..self.ntypes)
            .map(|i| q[i] - (self.terminal)(i, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn eval_grad(&self, x: &[f64], q: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let vals: Vec<f64> = (0..self.ntypes).map(|i| q[i] - (self.terminal)(i, x)).collect();
        let vmax = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // Softmax weights at temperature temp.
        let ws: Vec<f64> = vals.iter().map(|v| ((v - vmax) / self.temp).exp()).collect();
        let wsum: f64 = ws.iter().sum();
        let mut gx = vec![0.0; x.len()];
        let mut gq = vec![0.0; self.ntypes];
        for (i, w) in ws.iter().enumerate() {
            let wi = w / wsum;
            if wi < 1e-14 {
                continue;
            }
            gq[i] = wi;
            for (d, gd) in self.grad_i(i, x).iter().enumerate() {
                gx[d] -= wi * gd;
            }
        }
        (vmax, gx, gq)
    }

    fn qdim(&self) -> usize {
        self.ntypes
    }
}

/// Weighted sum of two evaluators: the coarse-grid corrected composite
/// base + coeff·delta used while smoothing.
pub struct SumMap {
    pub base: Arc<dyn ValueMap>,
    pub delta: Arc<dyn ValueMap>,
    pub coeff: f64,
}

impl ValueMap for SumMap {
    fn eval(&self, x: &[f64], q: &[f64]) -> f64 {
        self.base.eval(x, q) + self.coeff * self.delta.eval(x, q)
    }

    fn eval_grad(&self, x: &[f64], q: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let (v1, mut gx, mut gq) = self.base.eval_grad(x, q);
        let (v2, gx2, gq2) = self.delta.eval_grad(x, q);
        for (a, b) in gx.iter_mut().zip(&gx2) {
            *a += self.coeff * b;
        }
        for (a, b) in gq.iter_mut().zip(&gq2) {
            *a += self.coeff * b;
        }
        (v1 + self.coeff * v2, gx, gq)
    }

    fn qdim(&self) -> usize {
        self.base.qdim()
    }
}

/// Supporting-line dual point for a scalar-belief value curve: the tangent to
/// Ṽ at p₁ evaluated at the two simplex vertices. For any concave-in-p value
/// these are exactly the dual vectors whose conjugate is attained at p₁.
pub fn dual_tangent_point(value: f64, slope: f64, p1: f64) -> [f64; 2] {
    let p2hat = value - p1 * slope;
    [p2hat + slope, p2hat]
}

/// Per-coordinate bounding box of a set of dual points, widened by `widen`
/// times the span on each side (degenerate spans get an absolute pad).
pub fn dual_range_from_probes(points: &[Vec<f64>], widen: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let Some(first) = points.first() else {
        return Err(Error::domain("no probe points for dual range"));
    };
    let dim = first.len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in points {
        if p.len() != dim {
            return Err(Error::domain("inconsistent dual probe dimensions"));
        }
        for (i, &v) in p.iter().enumerate() {
            lo[i] = lo[i].min(v);
            hi[i] = hi[i].max(v);
        }
    }
    for i in 0..dim {
        let span = hi[i] - lo[i];
        let pad = if span > 1e-9 { widen * span } else { 0.5 };
        lo[i] -= pad;
        hi[i] += pad;
    }
    Ok((lo, hi))
}
