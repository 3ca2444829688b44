//! Closed-form reference solutions for three games with known answers: a
//! repeated game solved by belief convexification and Blackwell
//! approachability, a zero-sum beer-quiche signaling game solved exactly on
//! both the primal and dual side, and the scalar reduction of the
//! linear-quadratic pursuit game. Everything here is independent of the
//! solver stack, so these values anchor its tests.

use crate::games::{ActionSet, DimKind, Dynamics, GameSpec};
use crate::linalg::Mat;
use crate::simplex::{split_from_alpha, Belief, Split};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// A one-shot zero-sum game whose payoff table depends on a hidden type:
/// the row player maximizes, knows which table applies, and the column
/// player only knows the prior probability of the first table.
#[derive(Debug, Clone)]
pub struct RepeatedGameInstance {
    pub g1: Mat,
    pub g2: Mat,
    pub prior: f64,
}

fn canonical_tables() -> (Mat, Mat) {
    let g1 = Mat::from_rows(&[vec![0.0, 1.0, 1.0, 3.0], vec![0.0, 1.0, 0.0, 3.0]]).unwrap();
    let g2 = Mat::from_rows(&[vec![3.0, 0.0, 1.0, 0.0], vec![3.0, 1.0, 1.0, 0.0]]).unwrap();
    (g1, g2)
}

impl RepeatedGameInstance {
    pub fn new(g1: Mat, g2: Mat, prior: f64) -> Result<Self> {
        if g1.rows != g2.rows || g1.cols != g2.cols {
            return Err(Error::config("payoff tables must share dimensions"));
        }
        if g1.rows == 0 || g1.cols == 0 {
            return Err(Error::config("payoff tables must be non-empty"));
        }
        if !(0.0..=1.0).contains(&prior) {
            return Err(Error::config("prior must lie in [0, 1]"));
        }
        Ok(RepeatedGameInstance { g1, g2, prior })
    }

    /// The 2×4 table pair whose value curve and optimal split are known in
    /// closed form.
    pub fn canonical(prior: f64) -> Result<Self> {
        let (g1, g2) = canonical_tables();
        RepeatedGameInstance::new(g1, g2, prior)
    }

    fn is_canonical(&self) -> bool {
        let (g1, g2) = canonical_tables();
        self.g1.rows == 2
            && self.g1.cols == 4
            && self.g1.data == g1.data
            && self.g2.data == g2.data
    }

    /// Type-averaged table q·G₁ + (1−q)·G₂.
    pub fn averaged(&self, q: f64) -> Mat {
        self.g1.scale(q).add(&self.g2.scale(1.0 - q))
    }

    /// One-step embedding in the solver's conventions: the row player's
    /// mixture is the minimizing action (payoffs negated), the column
    /// player's mixture the maximizing one, with no state and the table
    /// payoff as the only cost.
    pub fn one_step_game(&self) -> GameSpec {
        let (rows, cols) = (self.g1.rows, self.g1.cols);
        let tables = [self.g1.clone(), self.g2.clone()];
        let grads = tables.clone();
        let running = Arc::new(move |i: usize, u: &[f64], v: &[f64]| {
            let t = &tables[i];
            let mut acc = 0.0;
            for r in 0..t.rows {
                for c in 0..t.cols {
                    acc += u[r] * t.at(r, c) * v[c];
                }
            }
            -acc
        });
        let running_grad = Arc::new(move |i: usize, u: &[f64], v: &[f64]| {
            let t = &grads[i];
            let gu: Vec<f64> =
                (0..t.rows).map(|r| -(0..t.cols).map(|c| t.at(r, c) * v[c]).sum::<f64>()).collect();
            let gv: Vec<f64> =
                (0..t.cols).map(|c| -(0..t.rows).map(|r| u[r] * t.at(r, c)).sum::<f64>()).collect();
            (gu, gv)
        });
        GameSpec {
            name: "repeated-one-step".into(),
            dx: 0,
            ntypes: 2,
            horizon: 1.0,
            uset: ActionSet::simplex(rows),
            vset: ActionSet::simplex(cols),
            dynamics: Dynamics::Empty,
            running,
            running_grad: Some(running_grad),
            step_cost: None,
            terminal: Arc::new(|_, _| 0.0),
            terminal_grad: Some(Arc::new(|_, _| Vec::new())),
            margin: None,
            gamma: 0.0,
            dim_kinds: Vec::new(),
        }
    }
}

/// Belief interval on which the concavified value is flat: (2−√3, √3−1).
pub fn repeated_flat_segment() -> (f64, f64) {
    let s3 = 3.0_f64.sqrt();
    (2.0 - s3, s3 - 1.0)
}

fn require_canonical(inst: &RepeatedGameInstance) -> Result<()> {
    if !inst.is_canonical() {
        return Err(Error::unsupported("closed form is specific to the built-in table pair"));
    }
    Ok(())
}

/// Value of the non-revealing game at the instance prior: the maximizer
/// mixes rows optimally in the averaged table without leaking the type.
pub fn repeated_nonrevealing_value(inst: &RepeatedGameInstance) -> Result<f64> {
    require_canonical(inst)?;
    let p = inst.prior;
    let (a, b) = repeated_flat_segment();
    Ok(if p <= a {
        3.0 * p
    } else if p <= b {
        1.0 - p * (1.0 - p)
    } else {
        3.0 * (1.0 - p)
    })
}

/// Concave envelope of the non-revealing value: the best the informed player
/// can guarantee with an optimal one-shot belief split.
pub fn repeated_cav_value(inst: &RepeatedGameInstance) -> Result<f64> {
    require_canonical(inst)?;
    let p = inst.prior;
    let (a, b) = repeated_flat_segment();
    Ok(if p <= a {
        3.0 * p
    } else if p <= b {
        6.0 - 3.0 * 3.0_f64.sqrt()
    } else {
        3.0 * (1.0 - p)
    })
}

/// The informed player's optimal randomization at a prior: posterior
/// targets, their marginal weights, and the atom probabilities conditioned
/// on the queried type.
#[derive(Debug, Clone)]
pub struct RepeatedSplit {
    pub split_points: Vec<f64>,
    pub weights: Vec<f64>,
    pub atom_probs: Vec<f64>,
}

pub fn repeated_split_strategy(
    inst: &RepeatedGameInstance,
    true_type: usize,
) -> Result<RepeatedSplit> {
    require_canonical(inst)?;
    if true_type > 1 {
        return Err(Error::domain("type index out of range"));
    }
    let p = inst.prior;
    let (a, b) = repeated_flat_segment();
    if p <= a || p >= b {
        // Outside the flat stretch the envelope touches the curve: playing
        // the non-revealing optimum without randomizing is already optimal.
        return Ok(RepeatedSplit {
            split_points: vec![p],
            weights: vec![1.0],
            atom_probs: vec![1.0],
        });
    }
    let lam = [(b - p) / (b - a), (p - a) / (b - a)];
    let type_mass = |point: f64| if true_type == 0 { point } else { 1.0 - point };
    let denom = if true_type == 0 { p } else { 1.0 - p };
    Ok(RepeatedSplit {
        split_points: vec![a, b],
        weights: lam.to_vec(),
        atom_probs: vec![lam[0] * type_mass(a) / denom, lam[1] * type_mass(b) / denom],
    })
}

/// Exact optimal column mixture of a two-row matrix game (row player
/// maximizes, column player minimizes): the optimum has support at most two,
/// so enumerating pure columns and row-equalizing pairs is exhaustive.
pub fn matrix_col_minimax(m: &Mat) -> Result<(Vec<f64>, f64)> {
    if m.rows != 2 {
        return Err(Error::unsupported("exact matrix solver covers two-row games only"));
    }
    let n = m.cols;
    let mut best_val = f64::INFINITY;
    let mut best = vec![0.0; n];
    for j in 0..n {
        let v = m.at(0, j).max(m.at(1, j));
        if v < best_val {
            best_val = v;
            best = vec![0.0; n];
            best[j] = 1.0;
        }
    }
    for j in 0..n {
        for k in j + 1..n {
            let dj = m.at(0, j) - m.at(1, j);
            let dk = m.at(0, k) - m.at(1, k);
            if (dj - dk).abs() < 1e-15 {
                continue;
            }
            let w = dk / (dk - dj);
            if !(0.0..=1.0).contains(&w) {
                continue;
            }
            let v = w * m.at(0, j) + (1.0 - w) * m.at(0, k);
            if v < best_val {
                best_val = v;
                best = vec![0.0; n];
                best[j] = w;
                best[k] = 1.0 - w;
            }
        }
    }
    Ok((best, best_val))
}

/// What the uninformed player should do given the running vector payoff:
/// nothing in particular while inside the target orthant, otherwise play the
/// optimal column mixture of the table averaged along the outward direction.
#[derive(Debug, Clone)]
pub enum BlackwellDirective {
    Inside,
    Respond { q: [f64; 2], strategy: Vec<f64>, value: f64 },
}

/// One approachability step for the target set {g : g ≤ (s, s)}: project the
/// running average onto the set, renormalize the outward gap onto the belief
/// simplex, and best-respond in the correspondingly averaged table.
pub fn blackwell_step(g: [f64; 2], s: f64) -> BlackwellDirective {
    let out = [(g[0] - s).max(0.0), (g[1] - s).max(0.0)];
    let total = out[0] + out[1];
    if total == 0.0 {
        return BlackwellDirective::Inside;
    }
    let q = [out[0] / total, out[1] / total];
    let inst = RepeatedGameInstance::canonical(0.5).expect("canonical tables are valid");
    let (strategy, value) =
        matrix_col_minimax(&inst.averaged(q[0])).expect("canonical tables have two rows");
    BlackwellDirective::Respond { q, strategy, value }
}

/// Plays `rounds` of the vector-payoff game with the column player following
/// `blackwell_step` and the row player adversarially pushing the running
/// average outward; returns the final Euclidean distance to the target set.
pub fn simulate_approachability(rounds: usize, seed: u64) -> f64 {
    let s = 6.0 - 3.0 * 3.0_f64.sqrt();
    let (g1, g2) = canonical_tables();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut avg = [0.0_f64; 2];
    for n in 0..rounds {
        let sigma = match blackwell_step(avg, s) {
            BlackwellDirective::Inside => vec![0.25; 4],
            BlackwellDirective::Respond { strategy, .. } => strategy,
        };
        let out = [(avg[0] - s).max(0.0), (avg[1] - s).max(0.0)];
        let norm = (out[0] * out[0] + out[1] * out[1]).sqrt();
        let dir = if norm > 0.0 {
            [out[0] / norm, out[1] / norm]
        } else {
            [std::f64::consts::FRAC_1_SQRT_2; 2]
        };
        let score = |r: usize| -> f64 {
            (0..4)
                .map(|c| sigma[c] * (g1.at(r, c) * dir[0] + g2.at(r, c) * dir[1]))
                .sum()
        };
        let row = if score(0) >= score(1) { 0 } else { 1 };
        let mut draw = rng.gen_range(0.0..1.0);
        let mut col = 3;
        for (c, &w) in sigma.iter().enumerate() {
            if draw < w {
                col = c;
                break;
            }
            draw -= w;
        }
        let pay = [g1.at(row, col), g2.at(row, col)];
        let k = n as f64;
        avg[0] = (k * avg[0] + pay[0]) / (k + 1.0);
        avg[1] = (k * avg[1] + pay[1]) / (k + 1.0);
    }
    let out = [(avg[0] - s).max(0.0), (avg[1] - s).max(0.0)];
    (out[0] * out[0] + out[1] * out[1]).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P1Move {
    Beer,
    Quiche,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P2Move {
    Bully,
    Defer,
}

/// Terminal payoff to the informed maximizer; type 0 is strong, type 1 weak.
pub fn beerquiche_payoff(ty: usize, u: P1Move, v: P2Move) -> f64 {
    match (ty, u, v) {
        (0, P1Move::Beer, P2Move::Bully) => 2.0,
        (0, P1Move::Beer, P2Move::Defer) => 1.0,
        (0, P1Move::Quiche, P2Move::Bully) => 1.0,
        (0, P1Move::Quiche, P2Move::Defer) => 0.0,
        (1, P1Move::Beer, P2Move::Bully) => -2.0,
        (1, P1Move::Beer, P2Move::Defer) => 0.0,
        (1, P1Move::Quiche, P2Move::Bully) => -1.0,
        (1, P1Move::Quiche, P2Move::Defer) => 2.0,
        _ => panic!("type index out of range"),
    }
}

/// Belief-averaged terminal value after both moves.
pub fn beerquiche_value2(u: P1Move, v: P2Move, p_t: f64) -> f64 {
    p_t * beerquiche_payoff(0, u, v) + (1.0 - p_t) * beerquiche_payoff(1, u, v)
}

/// Value once the informed move is public: the uninformed player picks the
/// response minimizing the belief-averaged payoff (deferring on ties).
pub fn beerquiche_value1(u: P1Move, p_t: f64) -> (f64, P2Move) {
    let bully = beerquiche_value2(u, P2Move::Bully, p_t);
    let defer = beerquiche_value2(u, P2Move::Defer, p_t);
    if bully < defer {
        (bully, P2Move::Bully)
    } else {
        (defer, P2Move::Defer)
    }
}

/// Full solution of the signaling game from the informed side: stage values,
/// the responses they anticipate, and the optimal belief split with its
/// type-conditional move probabilities.
#[derive(Debug, Clone)]
pub struct BeerQuichePrimal {
    pub p_t: f64,
    pub v0: f64,
    pub v1_beer: f64,
    pub v1_quiche: f64,
    pub p2_after_beer: P2Move,
    pub p2_after_quiche: P2Move,
    pub split: Split,
    pub atom_moves: [P1Move; 2],
}

impl BeerQuichePrimal {
    /// Probability that the given type plays the given move.
    pub fn move_prob(&self, ty: usize, mv: P1Move) -> f64 {
        let alpha = self.split.alpha.as_ref().expect("split carries conditionals");
        (0..2).filter(|&k| self.atom_moves[k] == mv).map(|k| alpha.at(ty, k)).sum()
    }
}

pub fn beerquiche_primal(p_t: f64) -> Result<BeerQuichePrimal> {
    if !(0.0..=1.0).contains(&p_t) {
        return Err(Error::domain("belief must lie in [0, 1]"));
    }
    let (v1_beer, p2_after_beer) = beerquiche_value1(P1Move::Beer, p_t);
    let (v1_quiche, p2_after_quiche) = beerquiche_value1(P1Move::Quiche, p_t);
    let prior = Belief::new(vec![p_t, 1.0 - p_t])?;
    // Below p_T = 2/3 the stage-one maximum is dominated by the chord from
    // the all-quiche vertex to the belief 2/3 where bully and defer tie
    // after beer; above it, pooling on beer is already optimal.
    let (v0, alpha, atom_moves) = if p_t < 2.0 / 3.0 {
        let pr_q_weak = (1.0 - 1.5 * p_t) / (1.0 - p_t);
        let alpha = Mat::from_rows(&[vec![0.0, 1.0], vec![pr_q_weak, 1.0 - pr_q_weak]])?;
        (2.5 * p_t - 1.0, alpha, [P1Move::Quiche, P1Move::Beer])
    } else {
        let alpha = Mat::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]])?;
        (p_t, alpha, [P1Move::Beer, P1Move::Beer])
    };
    let split = split_from_alpha(&prior, &alpha)?;
    Ok(BeerQuichePrimal {
        p_t,
        v0,
        v1_beer,
        v1_quiche,
        p2_after_beer,
        p2_after_quiche,
        split,
        atom_moves,
    })
}

/// A response distribution over bully/defer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum P2Mix {
    Pure(P2Move),
    Mix { bully: f64 },
}

impl P2Mix {
    pub fn bully_prob(&self) -> f64 {
        match self {
            P2Mix::Pure(P2Move::Bully) => 1.0,
            P2Mix::Pure(P2Move::Defer) => 0.0,
            P2Mix::Mix { bully } => *bully,
        }
    }
}

/// Dual-side solution at a payoff certificate p̂: stage-one values and the
/// uninformed player's (possibly mixed) responses.
#[derive(Debug, Clone)]
pub struct BeerQuicheDual {
    pub p_hat: [f64; 2],
    pub v1_beer: f64,
    pub v1_quiche: f64,
    pub after_beer: P2Mix,
    pub after_quiche: P2Mix,
}

/// Dual terminal value min over types of p̂ᵢ − gᵢ.
pub fn beerquiche_dual_value2(u: P1Move, v: P2Move, p_hat: [f64; 2]) -> f64 {
    (p_hat[0] - beerquiche_payoff(0, u, v)).min(p_hat[1] - beerquiche_payoff(1, u, v))
}

/// Closed form of the dual stage-one values. Within the certificate bands
/// where neither pure response supports the envelope, the mixture weights
/// are the envelope's combination coefficients; only the gap w = p̂₁ − p̂₂
/// matters because every branch shifts uniformly with p̂.
pub fn beerquiche_dual(p_hat: [f64; 2]) -> Result<BeerQuicheDual> {
    if !p_hat.iter().all(|x| x.is_finite()) {
        return Err(Error::domain("dual point must be finite"));
    }
    let w = p_hat[0] - p_hat[1];
    let (v1_beer, after_beer) = if w <= 1.0 {
        (p_hat[0] - 1.0, P2Mix::Pure(P2Move::Defer))
    } else if w >= 4.0 {
        (p_hat[1] + 2.0, P2Mix::Pure(P2Move::Bully))
    } else {
        ((2.0 * p_hat[0] + p_hat[1] - 2.0) / 3.0, P2Mix::Mix { bully: (w - 1.0) / 3.0 })
    };
    let (v1_quiche, after_quiche) = if w <= -2.0 {
        (p_hat[0], P2Mix::Pure(P2Move::Defer))
    } else if w >= 2.0 {
        (p_hat[1] + 1.0, P2Mix::Pure(P2Move::Bully))
    } else {
        ((3.0 * p_hat[0] + p_hat[1] - 2.0) / 4.0, P2Mix::Mix { bully: (w + 2.0) / 4.0 })
    };
    Ok(BeerQuicheDual { p_hat, v1_beer, v1_quiche, after_beer, after_quiche })
}

/// The signaling game as a one-step problem in solver conventions: the
/// informed scalar action is the beer probability, the response pair holds
/// the bully probabilities after each observable move, and the expected
/// terminal payoff (negated, informed player minimizing) is the stage cost.
/// Behavioral mixing makes this collapse exact.
pub fn beerquiche_game() -> GameSpec {
    let expected = |i: usize, u: f64, v0: f64, v1: f64| -> f64 {
        if i == 0 {
            u * (v0 + 1.0) + (1.0 - u) * v1
        } else {
            -2.0 * u * v0 + (1.0 - u) * (2.0 - 3.0 * v1)
        }
    };
    let running = Arc::new(move |i: usize, u: &[f64], v: &[f64]| -expected(i, u[0], v[0], v[1]));
    let running_grad = Arc::new(|i: usize, u: &[f64], v: &[f64]| {
        if i == 0 {
            (vec![v[1] - v[0] - 1.0], vec![-u[0], u[0] - 1.0])
        } else {
            (vec![2.0 * v[0] + 2.0 - 3.0 * v[1]], vec![2.0 * u[0], 3.0 * (1.0 - u[0])])
        }
    });
    GameSpec {
        name: "beerquiche".into(),
        dx: 0,
        ntypes: 2,
        horizon: 1.0,
        uset: ActionSet::cube(0.0, 1.0, 1),
        vset: ActionSet::cube(0.0, 1.0, 2),
        dynamics: Dynamics::Empty,
        running,
        running_grad: Some(running_grad),
        step_cost: None,
        terminal: Arc::new(|_, _| 0.0),
        terminal_grad: Some(Arc::new(|_, _| Vec::new())),
        margin: None,
        gamma: 0.0,
        dim_kinds: Vec::new(),
    }
}

/// Analytic value machinery for the scalar pursuit reduction, built from the
/// stamp times where the weight gap d₁−d₂ changes sign and the gap integral
/// over each interval. The backward recursion D̃ₖ = min(D̃ₖ₊₁ + Dₖ, 0)
/// measures how much concealment is still worth at each stamp.
#[derive(Debug, Clone)]
pub struct HexnerAnalytic {
    times: Vec<f64>,
    dtilde: Vec<f64>,
    reveal_idx: usize,
}

pub fn hexner_analytic_values(times: &[f64], segments: &[f64]) -> Result<HexnerAnalytic> {
    if times.len() < 2 || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::config("need at least two finite time stamps"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("time stamps must be strictly increasing"));
    }
    if segments.len() + 1 != times.len() {
        return Err(Error::config("need exactly one gap integral per stamp interval"));
    }
    if segments.iter().any(|d| !d.is_finite()) {
        return Err(Error::config("gap integrals must be finite"));
    }
    for (k, &d) in segments.iter().enumerate() {
        let ok = if k % 2 == 0 { d < 0.0 } else { d > 0.0 };
        if !ok {
            return Err(Error::config(format!(
                "gap integral signs must alternate starting negative, but segment {k} is {d}"
            )));
        }
    }
    // Reveal stamp: first minimizer of the cumulative gap. Everything after
    // it must sit strictly above that minimum, otherwise concealing past the
    // claimed reveal time would still pay and the closed forms do not apply.
    let mut cum = vec![0.0];
    for &d in segments {
        cum.push(cum.last().unwrap() + d);
    }
    let mut reveal_idx = 0;
    for (m, &c) in cum.iter().enumerate() {
        if c < cum[reveal_idx] {
            reveal_idx = m;
        }
    }
    for (m, &c) in cum.iter().enumerate().skip(reveal_idx + 1) {
        if c <= cum[reveal_idx] {
            return Err(Error::config(format!(
                "cumulative gap must stay strictly above its reveal-time minimum afterwards, \
                 but stamp {m} returns to it"
            )));
        }
    }
    let mut dtilde = vec![0.0; times.len()];
    for k in (0..segments.len()).rev() {
        dtilde[k] = (dtilde[k + 1] + segments[k]).min(0.0);
    }
    // With the reveal stamp at the strict cumulative minimum, the recursion
    // is provably negative before it and clamps exactly at it.
    debug_assert_eq!(dtilde[reveal_idx], 0.0);
    debug_assert!(dtilde[..reveal_idx].iter().all(|&d| d < 0.0));
    Ok(HexnerAnalytic { times: times.to_vec(), dtilde, reveal_idx })
}

impl HexnerAnalytic {
    pub fn reveal_time(&self) -> f64 {
        self.times[self.reveal_idx]
    }

    /// Remaining concealment value coefficient at the first stamp.
    pub fn dtilde0(&self) -> f64 {
        self.dtilde[0]
    }

    fn stamp_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9)
            .ok_or_else(|| Error::domain(format!("time {t} is not one of the configured stamps")))
    }

    /// Game value at a stamp for the informed minimizer: 4p(1−p)·D̃.
    pub fn primal_value(&self, t: f64, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain("belief must lie in [0, 1]"));
        }
        let k = self.stamp_index(t)?;
        Ok(4.0 * p * (1.0 - p) * self.dtilde[k])
    }

    /// Dual value at a stamp: the convex conjugate of the primal value over
    /// the belief, evaluated in closed form. Once concealment is worthless
    /// the maximizing belief sits at a vertex; before that, interior beliefs
    /// win inside the band |p̂₁−p̂₂| ≤ −4D̃.
    pub fn dual_value(&self, t: f64, p_hat: [f64; 2]) -> Result<f64> {
        let k = self.stamp_index(t)?;
        let dt = self.dtilde[k];
        if dt == 0.0 {
            return Ok(p_hat[0].max(p_hat[1]));
        }
        let s = p_hat[0] - p_hat[1];
        Ok(if s >= -4.0 * dt {
            p_hat[0]
        } else if s <= 4.0 * dt {
            p_hat[1]
        } else {
            p_hat[1] - dt * (1.0 - s / (4.0 * dt)).powi(2)
        })
    }

    /// Supporting dual point of the initial value curve at belief p*: the
    /// tangent line evaluated at the two belief vertices.
    pub fn subgradient(&self, p_star: f64) -> Result<[f64; 2]> {
        if !(0.0..=1.0).contains(&p_star) {
            return Err(Error::domain("belief must lie in [0, 1]"));
        }
        let d0 = self.dtilde[0];
        Ok([4.0 * (1.0 - p_star).powi(2) * d0, 4.0 * p_star.powi(2) * d0])
    }
}

/// Sign-change stamps of the weight gap and per-interval gap integrals from
/// a solved backward recursion, in the form `hexner_analytic_values` expects.
pub fn gap_stamps(ric: &crate::games::hexner::RiccatiSolution) -> (Vec<f64>, Vec<f64>) {
    let gap: Vec<f64> = ric.d[0].iter().zip(&ric.d[1]).map(|(a, b)| a - b).collect();
    let cum = ric.cumulative_gap();
    let last = gap.len() - 1;
    let mut idx = vec![0usize];
    for k in 0..last {
        if gap[k] == 0.0 && k > 0 {
            idx.push(k);
        } else if gap[k] * gap[k + 1] < 0.0 {
            let cross = if gap[k].abs() <= gap[k + 1].abs() { k } else { k + 1 };
            if cross > *idx.last().unwrap() && cross < last {
                idx.push(cross);
            }
        }
    }
    idx.push(last);
    let times: Vec<f64> = idx.iter().map(|&k| ric.times[k]).collect();
    let segments: Vec<f64> = idx.windows(2).map(|w| cum[w[1]] - cum[w[0]]).collect();
    (times, segments)
}

/// The pursuit game reduced to its scalar tracking coordinate: each player
/// steers one number θ̃ ∈ [−1, 1] toward the hidden target θᵢ ∈ {−1, +1},
/// and the stage cost weighs the squared tracking errors by the integrals of
/// the recursion weights d₁, d₂ over the step. The closed forms in
/// [`HexnerAnalytic`] are the exact primal/dual values of this game, which
/// makes it the cheapest end-to-end target for the backward-induction stack:
/// the tracking coordinates are decoupled from the physical state, so the
/// state here is a single frozen placeholder dimension.
pub fn hexner_reformulated_game(
    ric: &crate::games::hexner::RiccatiSolution,
) -> Result<GameSpec> {
    if ric.times.len() < 2 {
        return Err(Error::config("recursion grid needs at least two time points"));
    }
    let times = ric.times.clone();
    let d1 = ric.d[0].clone();
    let d2 = ric.d[1].clone();
    let horizon = *times.last().unwrap();
    let step = Arc::new(move |i: usize, t: f64, tau: f64, u: &[f64], v: &[f64]| -> f64 {
        let theta = if i == 0 { -1.0 } else { 1.0 };
        let w1 = band_integral(&times, &d1, t, t + tau);
        let w2 = band_integral(&times, &d2, t, t + tau);
        (u[0] - theta).powi(2) * w1 - (v[0] - theta).powi(2) * w2
    });
    Ok(GameSpec {
        name: "pursuit-1d".into(),
        dx: 1,
        ntypes: 2,
        horizon,
        uset: ActionSet::cube(-1.0, 1.0, 1),
        vset: ActionSet::cube(-1.0, 1.0, 1),
        dynamics: Dynamics::Staged { f: Arc::new(|_, x, _, _| x.to_vec()) },
        running: Arc::new(|_, _, _| 0.0),
        running_grad: None,
        step_cost: Some(step),
        terminal: Arc::new(|_, _| 0.0),
        terminal_grad: Some(Arc::new(|_, x| vec![0.0; x.len()])),
        margin: None,
        gamma: 0.0,
        dim_kinds: vec![DimKind::Pos { lo: -1.0, hi: 1.0 }],
    })
}

/// ∫ₐᵇ of the piecewise-linear interpolant of `vals` on the uniform grid
/// `times`, clamped to the grid span. Exact (trapezoid of a linear function)
/// on every cell, so grid-aligned calls reproduce the cumulative trapezoid
/// sums of the recursion itself.
fn band_integral(times: &[f64], vals: &[f64], a: f64, b: f64) -> f64 {
    let t0 = times[0];
    let tn = *times.last().unwrap();
    let h = times[1] - times[0];
    let a = a.clamp(t0, tn);
    let b = b.clamp(t0, tn);
    if b <= a {
        return 0.0;
    }
    let value_at = |t: f64| -> f64 {
        let s = (t - t0) / h;
        let j = (s.floor() as usize).min(times.len() - 2);
        let w = (s - j as f64).clamp(0.0, 1.0);
        vals[j] * (1.0 - w) + vals[j + 1] * w
    };
    let mut acc = 0.0;
    let mut left = a;
    for _ in 0..times.len() + 2 {
        let j = (((left - t0) / h).floor() as usize).min(times.len() - 2);
        let cell_end = t0 + (j + 1) as f64 * h;
        let right = b.min(cell_end);
        acc += 0.5 * (value_at(left) + value_at(right)) * (right - left);
        if right >= b {
            break;
        }
        left = right;
    }
    acc
}
