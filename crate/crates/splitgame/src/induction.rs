//! Backward-induction driver: sweeps from the horizon to t = 0, solving the
//! stage saddle problem at sampled collocation nodes and fitting one value
//! approximator per time step on the optimal stage values. Primal sweeps
//! learn the informed player's value V̂(t, x, p) over beliefs; dual sweeps
//! learn the conjugate V̂*(t, x, p̂) over a box of payoff-certificate
//! vectors. Runs are deterministic under their seed and serialize to a
//! directory of per-step artifacts guarded by a hash-sealed manifest.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::approx::{
    dual_range_from_probes, FitOptions, FitReport, Icnn, IcnnConfig, NetMap, QMap,
    StateNormalizer, TerminalDual, TerminalPrimal, ValueMap,
};
use crate::games::{DimKind, GameSpec, Propagator};
use crate::minimax::{assemble_dual, assemble_primal, solve_saddle, GdaOptions, SaddleReport};
use crate::simplex::Belief;
use crate::{Error, Result};

/// Which value a backward sweep computes: the informed player's (over
/// beliefs) or the uninformed player's conjugate (over dual vectors).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Primal,
    Dual,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Primal => "primal",
            Side::Dual => "dual",
        }
    }

    pub fn parse(s: &str) -> Result<Side> {
        match s {
            "primal" => Ok(Side::Primal),
            "dual" => Ok(Side::Dual),
            _ => Err(Error::config(format!("unknown side '{s}'"))),
        }
    }
}

/// Knobs for a backward sweep.
#[derive(Debug, Clone)]
pub struct InductionConfig {
    /// Collocation nodes per step.
    pub samples: usize,
    /// Splitting atoms per stage problem; 0 picks the side default
    /// (one atom per type for primal sweeps, one more than that for dual).
    pub natoms: usize,
    /// Hidden width of the per-step approximators.
    pub hidden: usize,
    /// Stage saddle solver settings.
    pub gda: GdaOptions,
    /// Regression settings for the per-step fits.
    pub fit: FitOptions,
    pub seed: u64,
    /// Draw a fresh collocation set at every step instead of reusing one
    /// pre-loop sample whose velocity bands rescale with the step time.
    pub resample_per_step: bool,
    /// Fit each step on its own records plus every later step's records.
    pub retain_all: bool,
    /// Fixed sampling/normalization time for all steps (multigrid levels
    /// share one scale this way); None uses each step's own time.
    pub scale_time: Option<f64>,
    /// Relative widening applied to a dual box inferred from a primal run.
    pub dual_widen: f64,
    /// Probe count used when inferring that box.
    pub dual_probes: usize,
}

impl Default for InductionConfig {
    fn default() -> Self {
        InductionConfig {
            samples: 2000,
            natoms: 0,
            hidden: 64,
            gda: GdaOptions::default(),
            fit: FitOptions::default(),
            seed: 0,
            resample_per_step: false,
            retain_all: false,
            scale_time: None,
            dual_widen: 0.25,
            dual_probes: 200,
        }
    }
}

/// Probe coordinate attached to each collocation state: a belief on the
/// type simplex or a dual vector inside a box.
#[derive(Debug, Clone, Copy)]
pub enum ProbeSpace<'a> {
    Belief,
    Dual { lo: &'a [f64], hi: &'a [f64] },
}

const REJECTION_CAP: usize = 10_000;

/// Samples `n` collocation nodes: states uniform over the arena with
/// velocity bands scaled to `t`, probes uniform over the simplex (normalized
/// unit-rate exponentials) or over the dual box. Deterministic under `seed`.
/// States infeasible per the game's margin are rejection-resampled, capped
/// at 10000 attempts per node. Every coordinate consumes exactly one draw
/// regardless of its bounds, so positions and probes are shared across
/// times and only velocity coordinates rescale; at t = 0 velocities are
/// exactly zero.
pub fn sample_collocation(
    spec: &GameSpec,
    t: f64,
    n: usize,
    seed: u64,
    probe: ProbeSpace<'_>,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if n == 0 {
        return Err(Error::config("collocation sample count must be positive"));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::domain("collocation time must be finite and nonnegative"));
    }
    if let ProbeSpace::Dual { lo, hi } = probe {
        if lo.len() != spec.ntypes || hi.len() != spec.ntypes {
            return Err(Error::domain("dual box dimension does not match the game"));
        }
        if lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::domain("dual box has inverted or non-finite bounds"));
        }
    }
    let bounds = spec.sample_bounds(t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let mut attempts = 0usize;
        let x = loop {
            let x: Vec<f64> =
                bounds.iter().map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>()).collect();
            let feasible = match &spec.margin {
                Some(m) => m(&x).0 >= 0.0,
                None => true,
            };
            if feasible {
                break x;
            }
            attempts += 1;
            if attempts >= REJECTION_CAP {
                return Err(Error::numeric(
                    "margin rejection exceeded 10000 attempts for a collocation node",
                ));
            }
        };
        let pt: Vec<f64> = match probe {
            ProbeSpace::Belief => {
                let mut e: Vec<f64> =
                    (0..spec.ntypes).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                if e.iter().sum::<f64>() <= 0.0 {
                    e = vec![1.0; spec.ntypes];
                }
                let s: f64 = e.iter().sum();
                e.iter().map(|v| v / s).collect()
            }
            ProbeSpace::Dual { lo, hi } => {
                lo.iter().zip(hi).map(|(a, b)| a + (b - a) * rng.gen::<f64>()).collect()
            }
        };
        states.push(x);
        points.push(pt);
    }
    Ok((states, points))
}

/// One step's regression records: collocation states, probe coordinates
/// (full beliefs for primal sweeps, dual vectors for dual sweeps), stage
/// saddle values, and the saddle iterates that produced them. The iterates
/// serve as warm starts and decision replays; they are not persisted.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub t: f64,
    pub states: Vec<Vec<f64>>,
    pub points: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub warm: Vec<Option<(Vec<f64>, Vec<f64>)>>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Tab-separated text: header `t  x0..  p0..  target` (dual sweeps use
    /// `phat0..`), one row per record, floats in shortest round-trip form.
    pub fn to_text(&self, side: Side) -> String {
        let mut s = String::from("t");
        for j in 0..self.states.first().map_or(0, |x| x.len()) {
            write!(s, "\tx{j}").unwrap();
        }
        let probe = match side {
            Side::Primal => "p",
            Side::Dual => "phat",
        };
        for j in 0..self.points.first().map_or(0, |p| p.len()) {
            write!(s, "\t{probe}{j}").unwrap();
        }
        s.push_str("\ttarget\n");
        for i in 0..self.len() {
            write!(s, "{}", self.t).unwrap();
            for v in &self.states[i] {
                write!(s, "\t{v}").unwrap();
            }
            for v in &self.points[i] {
                write!(s, "\t{v}").unwrap();
            }
            writeln!(s, "\t{}", self.targets[i]).unwrap();
        }
        s
    }

    /// Strict inverse of `to_text`. Rejects malformed headers, ragged rows,
    /// non-finite values, empty tables, misordered columns, and time columns
    /// that are not bit-identical across rows.
    pub fn parse(text: &str) -> Result<(TrainingSet, Side)> {
        let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
        let header = lines.next().ok_or_else(|| Error::config("empty training table"))?;
        let cols: Vec<&str> = header.split('\t').collect();
        if cols.len() < 3 || cols[0] != "t" || *cols.last().unwrap() != "target" {
            return Err(Error::config("training header must run from 't' to 'target'"));
        }
        let inner = &cols[1..cols.len() - 1];
        let mut nx = 0usize;
        while nx < inner.len() && inner[nx] == format!("x{nx}") {
            nx += 1;
        }
        let rest = &inner[nx..];
        // “phat” is tested before “p”: every dual header also starts with p.
        let side = if rest.first().is_some_and(|c| c.starts_with("phat")) {
            Side::Dual
        } else {
            Side::Primal
        };
        let probe = match side {
            Side::Dual => "phat",
            Side::Primal => "p",
        };
        let np = rest.len();
        if np == 0 {
            return Err(Error::config("training header lists no probe columns"));
        }
        for (j, c) in rest.iter().enumerate() {
            if **c != format!("{probe}{j}") {
                return Err(Error::config(format!("unexpected training column '{c}'")));
            }
        }
        let mut states = Vec::new();
        let mut points = Vec::new();
        let mut targets = Vec::new();
        let mut t_bits: Option<u64> = None;
        let mut t = 0.0f64;
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != cols.len() {
                return Err(Error::config(format!(
                    "training row {} has {} fields, expected {}",
                    row + 2,
                    fields.len(),
                    cols.len()
                )));
            }
            let vals: Vec<f64> = fields.iter().map(|f| parse_finite(f)).collect::<Result<_>>()?;
            match t_bits {
                None => {
                    t_bits = Some(vals[0].to_bits());
                    t = vals[0];
                }
                Some(b) if b != vals[0].to_bits() => {
                    return Err(Error::config("training rows disagree on the step time"));
                }
                _ => {}
            }
            states.push(vals[1..1 + nx].to_vec());
            points.push(vals[1 + nx..1 + nx + np].to_vec());
            targets.push(vals[1 + nx + np]);
        }
        if targets.is_empty() {
            return Err(Error::config("training table has no rows"));
        }
        let warm = vec![None; targets.len()];
        Ok((TrainingSet { t, states, points, targets, warm }, side))
    }
}

fn parse_finite(s: &str) -> Result<f64> {
    let v: f64 =
        s.parse().map_err(|_| Error::config(format!("bad float '{s}' in training table")))?;
    if !v.is_finite() {
        return Err(Error::config(format!("non-finite value '{s}' in training table")));
    }
    Ok(v)
}

/// Per-step solver and regression telemetry.
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    /// Stage saddle solves performed at this step.
    pub solve_calls: usize,
    /// Records in the regression set (grows past `samples` with retain_all).
    pub fit_samples: usize,
    pub fit: FitReport,
}

/// A completed backward sweep: per-step training sets, fitted approximators,
/// telemetry, and everything needed to rebuild the stage value maps.
#[derive(Debug, Clone)]
pub struct InductionRun {
    pub side: Side,
    pub game: String,
    pub tau: f64,
    pub steps: usize,
    pub dx: usize,
    pub ntypes: usize,
    pub dim_kinds: Vec<DimKind>,
    pub config: InductionConfig,
    /// Dual sweeps: the box the conjugate net was trained over.
    pub dual_box: Option<(Vec<f64>, Vec<f64>)>,
    pub sets: Vec<TrainingSet>,
    pub nets: Vec<Icnn>,
    pub stats: Vec<StepStats>,
}

impl InductionRun {
    /// Grid times t = 0, τ, …, (steps − 1)·τ, one per fitted approximator.
    pub fn times(&self) -> Vec<f64> {
        (0..self.steps).map(|k| k as f64 * self.tau).collect()
    }

    /// Sampling/normalization time used at step k.
    pub fn norm_time(&self, k: usize) -> f64 {
        self.config.scale_time.unwrap_or(k as f64 * self.tau)
    }

    pub fn total_solve_calls(&self) -> usize {
        self.stats.iter().map(|s| s.solve_calls).sum()
    }

    fn qmap(&self) -> QMap {
        match &self.dual_box {
            Some((lo, hi)) => QMap::Affine { lo: lo.clone(), hi: hi.clone() },
            None => QMap::Identity,
        }
    }

    /// Value map for step k with that step's normalizer: V̂_k for primal
    /// sweeps, V̂*_k for dual ones.
    pub fn value_map(&self, k: usize) -> Result<Arc<dyn ValueMap>> {
        let net =
            self.nets.get(k).ok_or_else(|| Error::domain("step index beyond the run"))?;
        Ok(Arc::new(NetMap {
            net: net.clone(),
            norm: StateNormalizer::new(&self.dim_kinds, self.norm_time(k)),
            qmap: self.qmap(),
        }))
    }
}

/// Number of backward steps for a grid of spacing `tau`; the spacing must
/// divide the horizon.
pub fn steps_for(horizon: f64, tau: f64) -> Result<usize> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::config("step length must be positive and finite"));
    }
    let k = (horizon / tau).round();
    if k < 1.0 || (k * tau - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::config("step length must divide the horizon"));
    }
    Ok(k as usize)
}

fn resolved_natoms(cfg: &InductionConfig, side: Side, ntypes: usize) -> usize {
    if cfg.natoms > 0 {
        cfg.natoms
    } else {
        match side {
            Side::Primal => ntypes,
            Side::Dual => ntypes + 1,
        }
    }
}

fn qdim(side: Side, ntypes: usize) -> usize {
    match side {
        Side::Primal => ntypes - 1,
        Side::Dual => ntypes,
    }
}

/// Net input coordinates for a stored probe: the belief drops its last
/// (redundant) coordinate, the dual vector passes whole.
fn net_coords(side: Side, pt: &[f64]) -> &[f64] {
    match side {
        Side::Primal => &pt[..pt.len() - 1],
        Side::Dual => pt,
    }
}

fn step_err(k: usize, t: f64, e: Error) -> Error {
    Error::numeric(format!("backward step {k} (t = {t:.6}): {e}"))
}

#[allow(clippy::too_many_arguments)]
fn solve_node(
    spec: &GameSpec,
    prop: &Arc<Propagator>,
    side: Side,
    natoms: usize,
    t: f64,
    x: &[f64],
    pt: &[f64],
    next: &Arc<dyn ValueMap>,
    dual_box: &Option<(Vec<f64>, Vec<f64>)>,
    gda: &GdaOptions,
    warm: Option<(Vec<f64>, Vec<f64>)>,
) -> Result<SaddleReport> {
    match side {
        Side::Primal => {
            let p = Belief::new(pt.to_vec())?;
            let asm = assemble_primal(spec, prop.clone(), t, x, &p, next.clone(), natoms)?;
            solve_saddle(&asm.objective, &asm.xset, &asm.yset, gda, warm)
        }
        Side::Dual => {
            let Some((lo, hi)) = dual_box.as_ref() else {
                return Err(Error::domain("dual sweep carries no dual box"));
            };
            let asm = assemble_dual(spec, prop.clone(), t, x, pt, next.clone(), natoms, (lo, hi))?;
            solve_saddle(&asm.objective, &asm.xset, &asm.yset, gda, warm)
        }
    }
}

pub(crate) fn run_backward(
    spec: &GameSpec,
    tau: f64,
    cfg: &InductionConfig,
    side: Side,
    dual_box: Option<(Vec<f64>, Vec<f64>)>,
) -> Result<InductionRun> {
    let steps = steps_for(spec.horizon, tau)?;
    if cfg.samples == 0 {
        return Err(Error::config("induction needs at least one collocation node"));
    }
    let natoms = resolved_natoms(cfg, side, spec.ntypes);
    let prop = Arc::new(Propagator::new(spec, tau));
    let terminal: Arc<dyn ValueMap> = match side {
        Side::Primal => Arc::new(TerminalPrimal::from_spec(spec)),
        Side::Dual => Arc::new(TerminalDual::from_spec(spec)),
    };
    let qmap = match &dual_box {
        Some((lo, hi)) => QMap::Affine { lo: lo.clone(), hi: hi.clone() },
        None => QMap::Identity,
    };

    let mut sets: Vec<Option<TrainingSet>> = (0..steps).map(|_| None).collect();
    let mut nets: Vec<Option<Icnn>> = (0..steps).map(|_| None).collect();
    let mut stats: Vec<Option<StepStats>> = (0..steps).map(|_| None).collect();
    let mut warm: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; cfg.samples];
    // Raw records carried over from later steps when retain_all is on.
    let mut retained: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();

    let mut next = terminal;
    for k in (0..steps).rev() {
        let t = k as f64 * tau;
        let sample_t = cfg.scale_time.unwrap_or(t);
        let seed_k = if cfg.resample_per_step {
            warm.iter_mut().for_each(|w| *w = None);
            cfg.seed.wrapping_add(k as u64 + 1)
        } else {
            cfg.seed
        };
        let probe = match &dual_box {
            Some((lo, hi)) => ProbeSpace::Dual { lo, hi },
            None => ProbeSpace::Belief,
        };
        let (states, points) = sample_collocation(spec, sample_t, cfg.samples, seed_k, probe)?;

        let reports: Vec<SaddleReport> = states
            .par_iter()
            .zip(points.par_iter())
            .zip(warm.par_iter())
            .map(|((x, pt), w)| {
                solve_node(spec, &prop, side, natoms, t, x, pt, &next, &dual_box, &cfg.gda, w.clone())
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| step_err(k, t, e))?;

        for (w, rep) in warm.iter_mut().zip(&reports) {
            *w = Some((rep.x.clone(), rep.y.clone()));
        }
        let targets: Vec<f64> = reports.iter().map(|r| r.value).collect();

        // Regression inputs, everything normalized at this step's scale.
        let norm = StateNormalizer::new(&spec.dim_kinds, sample_t);
        let mut xs: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(states.len() + retained.len());
        let mut ys: Vec<f64> = Vec::with_capacity(states.len() + retained.len());
        for ((x, pt), v) in states.iter().zip(&points).zip(&targets) {
            xs.push((norm.normalize(x), qmap.apply(net_coords(side, pt))));
            ys.push(*v);
        }
        for (x, pt, v) in &retained {
            xs.push((norm.normalize(x), qmap.apply(net_coords(side, pt))));
            ys.push(*v);
        }

        let mut net = match nets.get(k + 1).and_then(|o| o.as_ref()) {
            Some(later) => later.clone(),
            None => Icnn::new(IcnnConfig {
                state_dim: spec.dx,
                conv_dim: qdim(side, spec.ntypes),
                hidden: cfg.hidden,
                seed: cfg.seed.wrapping_add(k as u64),
            }),
        };
        let report = net.fit(&xs, &ys, &cfg.fit).map_err(|e| step_err(k, t, e))?;
        if !report.final_loss.is_finite() {
            return Err(Error::numeric(format!("fit diverged at backward step {k} (t = {t:.6})")));
        }

        if cfg.retain_all {
            for ((x, pt), v) in states.iter().zip(&points).zip(&targets) {
                retained.push((x.clone(), pt.clone(), *v));
            }
        }

        next = Arc::new(NetMap {
            net: net.clone(),
            norm: StateNormalizer::new(&spec.dim_kinds, sample_t),
            qmap: qmap.clone(),
        });
        stats[k] = Some(StepStats {
            solve_calls: states.len(),
            fit_samples: xs.len(),
            fit: report,
        });
        sets[k] = Some(TrainingSet { t, states, points, targets, warm: warm.clone() });
        nets[k] = Some(net);
    }

    Ok(InductionRun {
        side,
        game: spec.name.clone(),
        tau,
        steps,
        dx: spec.dx,
        ntypes: spec.ntypes,
        dim_kinds: spec.dim_kinds.clone(),
        config: cfg.clone(),
        dual_box,
        sets: sets.into_iter().map(|s| s.unwrap()).collect(),
        nets: nets.into_iter().map(|n| n.unwrap()).collect(),
        stats: stats.into_iter().map(|s| s.unwrap()).collect(),
    })
}

/// Backward sweep for the informed player's value: at every step, solve the
/// splitting stage problem at each node and regress the optimal values.
pub fn cams_primal(spec: &GameSpec, tau: f64, cfg: &InductionConfig) -> Result<InductionRun> {
    run_backward(spec, tau, cfg, Side::Primal, None)
}

/// Backward sweep for the conjugate value, with the dual box inferred from a
/// completed primal run's tangent vectors at t = 0.
pub fn cams_dual(
    spec: &GameSpec,
    tau: f64,
    cfg: &InductionConfig,
    primal: &InductionRun,
) -> Result<InductionRun> {
    let (lo, hi) = dual_range_from_primal(spec, primal, cfg)?;
    run_backward(spec, tau, cfg, Side::Dual, Some((lo, hi)))
}

/// Backward sweep for the conjugate value over an explicit dual box.
pub fn cams_dual_with_box(
    spec: &GameSpec,
    tau: f64,
    cfg: &InductionConfig,
    lo: &[f64],
    hi: &[f64],
) -> Result<InductionRun> {
    if lo.len() != spec.ntypes || hi.len() != spec.ntypes {
        return Err(Error::config("dual box dimension must equal the number of types"));
    }
    if lo.iter().zip(hi).any(|(a, b)| !a.is_finite() || !b.is_finite() || a >= b) {
        return Err(Error::config("dual box must have finite lo < hi per coordinate"));
    }
    run_backward(spec, tau, cfg, Side::Dual, Some((lo.to_vec(), hi.to_vec())))
}

/// Infers a dual box from a primal run: tangent vectors of the fitted t = 0
/// value at probe beliefs, p̂_i = V̂ + g_i − Σ_j g_j p_j with the dropped
/// belief coordinate's gradient pinned to zero, widened by `dual_widen`.
pub fn dual_range_from_primal(
    spec: &GameSpec,
    primal: &InductionRun,
    cfg: &InductionConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if primal.side != Side::Primal {
        return Err(Error::config("dual range inference needs a primal run"));
    }
    if primal.ntypes != spec.ntypes || primal.dx != spec.dx {
        return Err(Error::config("primal run does not match the game"));
    }
    if cfg.dual_probes == 0 {
        return Err(Error::config("dual range inference needs at least one probe"));
    }
    let vm = primal.value_map(0)?;
    let t0 = primal.norm_time(0);
    let (states, beliefs) = sample_collocation(
        spec,
        t0,
        cfg.dual_probes,
        cfg.seed ^ 0x9e37_79b9_7f4a_7c15,
        ProbeSpace::Belief,
    )?;
    let ni = spec.ntypes;
    let mut tangents = Vec::with_capacity(states.len());
    for (x, p) in states.iter().zip(&beliefs) {
        let (v, _, gq) = vm.eval_grad(x, &p[..ni - 1]);
        if !v.is_finite() || gq.iter().any(|g| !g.is_finite()) {
            return Err(Error::numeric("non-finite tangent while inferring the dual box"));
        }
        let mut g = vec![0.0; ni];
        g[..ni - 1].copy_from_slice(&gq);
        let mix: f64 = g.iter().zip(p).map(|(gi, pi)| gi * pi).sum();
        tangents.push(g.iter().map(|gi| v + gi - mix).collect());
    }
    dual_range_from_probes(&tangents, cfg.dual_widen)
}

// ---------------------------------------------------------------------------
// Artifacts: sealed manifest, per-step approximators and training tables.
// ---------------------------------------------------------------------------

/// Ordered `key = value` manifest with a sha-256 seal over its own content.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Manifest { entries: Vec::new() }
    }

    /// Appends an entry. Keys are `[A-Za-z0-9._-]+` and unique; values are
    /// nonempty single-line strings with no surrounding whitespace.
    pub fn push(&mut self, key: &str, value: impl ToString) -> Result<()> {
        let value = value.to_string();
        if key.is_empty()
            || !key.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
        {
            return Err(Error::config(format!("bad manifest key '{key}'")));
        }
        if value.is_empty() || value.trim() != value || value.contains('\n') {
            return Err(Error::config(format!("bad manifest value for '{key}'")));
        }
        if self.get(key).is_some() {
            return Err(Error::config(format!("duplicate manifest key '{key}'")));
        }
        self.entries.push((key.to_string(), value));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Manifest> {
        let mut m = Manifest::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.strip_suffix('\r').unwrap_or(raw).trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::config(format!("manifest line {} has no '='", lineno + 1)));
            };
            m.push(k.trim(), v.trim())?;
        }
        Ok(m)
    }

    /// Hash over canonical `key=value` lines in order, the seal excluded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            if k == "content_hash" {
                continue;
            }
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex(&h.finalize())
    }

    pub fn seal(&mut self) -> Result<()> {
        if self.get("content_hash").is_some() {
            return Err(Error::config("manifest is already sealed"));
        }
        let hash = self.content_hash();
        self.push("content_hash", hash)
    }

    pub fn verify_sealed(&self) -> Result<()> {
        let Some(stored) = self.get("content_hash") else {
            return Err(Error::config("manifest has no content_hash seal"));
        };
        if stored != self.content_hash() {
            return Err(Error::config("manifest content does not match its seal"));
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

fn read_artifact_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::missing_artifact(format!("missing artifact '{}'", path.display()))
        } else {
            Error::from(e)
        }
    })
}

fn read_artifact(path: &Path) -> Result<String> {
    String::from_utf8(read_artifact_bytes(path)?)
        .map_err(|_| Error::config(format!("artifact '{}' is not utf-8", path.display())))
}

/// Verifies a run directory: manifest present and sealed, every file it
/// lists present with a matching hash. Returns the parsed manifest.
pub fn verify_run_dir(dir: &Path) -> Result<Manifest> {
    let m = Manifest::parse(&read_artifact(&dir.join("run.manifest"))?)?;
    m.verify_sealed()?;
    for key in m.keys().filter(|k| k.starts_with("file.")) {
        let name = &key["file.".len()..];
        if name.is_empty() || name.contains('/') || name.contains('\\') || name.contains("..") {
            return Err(Error::config(format!("manifest lists unsafe file name '{name}'")));
        }
        let bytes = read_artifact_bytes(&dir.join(name))?;
        if sha256_hex(&bytes) != m.get(key).unwrap() {
            return Err(Error::config(format!("artifact '{name}' does not match its recorded hash")));
        }
    }
    Ok(m)
}

fn req<'m>(m: &'m Manifest, key: &str) -> Result<&'m str> {
    m.get(key).ok_or_else(|| Error::config(format!("manifest missing key '{key}'")))
}

fn parse_field<T: std::str::FromStr>(s: &str, name: &str) -> Result<T> {
    s.parse().map_err(|_| Error::config(format!("bad manifest value for '{name}'")))
}

fn parse_bool(s: &str, name: &str) -> Result<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::config(format!("bad boolean for '{name}' in manifest"))),
    }
}

fn split_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|f| f.trim().parse::<f64>().map_err(|_| Error::config("bad float list in manifest")))
        .collect()
}

fn join_floats(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl InductionRun {
    /// Writes per-step approximators (`step_XXX.value.json`) and training
    /// tables (`step_XXX.train.tsv`) plus a sealed `run.manifest` recording
    /// the configuration, telemetry, and every file's content hash.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut m = Manifest::new();
        m.push("format", "splitgame-run-v1")?;
        m.push("side", self.side.as_str())?;
        m.push("game", &self.game)?;
        m.push("tau", self.tau)?;
        m.push("steps", self.steps)?;
        m.push("dx", self.dx)?;
        m.push("ntypes", self.ntypes)?;
        let c = &self.config;
        m.push("config.samples", c.samples)?;
        m.push("config.natoms", c.natoms)?;
        m.push("config.hidden", c.hidden)?;
        m.push("config.seed", c.seed)?;
        m.push("config.resample_per_step", c.resample_per_step)?;
        m.push("config.retain_all", c.retain_all)?;
        m.push("config.scale_time", c.scale_time.map_or("per-step".into(), |v: f64| v.to_string()))?;
        m.push("config.dual_widen", c.dual_widen)?;
        m.push("config.dual_probes", c.dual_probes)?;
        m.push("gda.step", c.gda.step)?;
        m.push("gda.prox_x", c.gda.prox_x)?;
        m.push("gda.prox_y", c.gda.prox_y)?;
        m.push("gda.anchor_mix", c.gda.anchor_mix)?;
        m.push("gda.iters", c.gda.iters)?;
        m.push("gda.tol", c.gda.tol)?;
        m.push("gda.restarts", c.gda.restarts)?;
        m.push("gda.seed", c.gda.seed)?;
        m.push("fit.epochs", c.fit.epochs)?;
        m.push("fit.lr", c.fit.lr)?;
        m.push("fit.check_every", c.fit.check_every)?;
        m.push("fit.tol", c.fit.tol)?;
        if let Some((lo, hi)) = &self.dual_box {
            m.push("dual.lo", join_floats(lo))?;
            m.push("dual.hi", join_floats(hi))?;
        }
        for (k, s) in self.stats.iter().enumerate() {
            m.push(&format!("stats.{k:03}.solve_calls"), s.solve_calls)?;
            m.push(&format!("stats.{k:03}.fit_samples"), s.fit_samples)?;
            m.push(&format!("stats.{k:03}.initial_loss"), s.fit.initial_loss)?;
            m.push(&format!("stats.{k:03}.final_loss"), s.fit.final_loss)?;
            m.push(&format!("stats.{k:03}.epochs_run"), s.fit.epochs_run)?;
            m.push(&format!("stats.{k:03}.lr_final"), s.fit.lr_final)?;
        }
        for k in 0..self.steps {
            let net_name = format!("step_{k:03}.value.json");
            let set_name = format!("step_{k:03}.train.tsv");
            self.nets[k].save(&dir.join(&net_name))?;
            std::fs::write(dir.join(&set_name), self.sets[k].to_text(self.side))?;
            m.push(&format!("file.{net_name}"), sha256_hex(&std::fs::read(dir.join(&net_name))?))?;
            m.push(&format!("file.{set_name}"), sha256_hex(&std::fs::read(dir.join(&set_name))?))?;
        }
        m.seal()?;
        std::fs::write(dir.join("run.manifest"), m.to_text())?;
        Ok(())
    }

    /// Rebuilds a run from a verified directory. `spec` supplies the game
    /// structure and must match what the manifest records. Warm starts are
    /// not persisted, so replays load as absent.
    pub fn load(dir: &Path, spec: &GameSpec) -> Result<InductionRun> {
        let m = verify_run_dir(dir)?;
        if req(&m, "format")? != "splitgame-run-v1" {
            return Err(Error::config("unknown run format"));
        }
        let side = Side::parse(req(&m, "side")?)?;
        let game = req(&m, "game")?.to_string();
        if game != spec.name {
            return Err(Error::config(format!("run is for game '{game}', not '{}'", spec.name)));
        }
        let tau: f64 = parse_field(req(&m, "tau")?, "tau")?;
        let steps: usize = parse_field(req(&m, "steps")?, "steps")?;
        let dx: usize = parse_field(req(&m, "dx")?, "dx")?;
        let ntypes: usize = parse_field(req(&m, "ntypes")?, "ntypes")?;
        if dx != spec.dx || ntypes != spec.ntypes {
            return Err(Error::config("run dimensions do not match the game"));
        }
        if steps == 0 || steps_for(spec.horizon, tau)? != steps {
            return Err(Error::config("run grid does not match the game horizon"));
        }
        let config = InductionConfig {
            samples: parse_field(req(&m, "config.samples")?, "config.samples")?,
            natoms: parse_field(req(&m, "config.natoms")?, "config.natoms")?,
            hidden: parse_field(req(&m, "config.hidden")?, "config.hidden")?,
            gda: GdaOptions {
                step: parse_field(req(&m, "gda.step")?, "gda.step")?,
                prox_x: parse_field(req(&m, "gda.prox_x")?, "gda.prox_x")?,
                prox_y: parse_field(req(&m, "gda.prox_y")?, "gda.prox_y")?,
                anchor_mix: parse_field(req(&m, "gda.anchor_mix")?, "gda.anchor_mix")?,
                iters: parse_field(req(&m, "gda.iters")?, "gda.iters")?,
                tol: parse_field(req(&m, "gda.tol")?, "gda.tol")?,
                restarts: parse_field(req(&m, "gda.restarts")?, "gda.restarts")?,
                seed: parse_field(req(&m, "gda.seed")?, "gda.seed")?,
            },
            fit: FitOptions {
                epochs: parse_field(req(&m, "fit.epochs")?, "fit.epochs")?,
                lr: parse_field(req(&m, "fit.lr")?, "fit.lr")?,
                check_every: parse_field(req(&m, "fit.check_every")?, "fit.check_every")?,
                tol: parse_field(req(&m, "fit.tol")?, "fit.tol")?,
            },
            seed: parse_field(req(&m, "config.seed")?, "config.seed")?,
            resample_per_step: parse_bool(
                req(&m, "config.resample_per_step")?,
                "config.resample_per_step",
            )?,
            retain_all: parse_bool(req(&m, "config.retain_all")?, "config.retain_all")?,
            scale_time: match req(&m, "config.scale_time")? {
                "per-step" => None,
                s => Some(parse_field(s, "config.scale_time")?),
            },
            dual_widen: parse_field(req(&m, "config.dual_widen")?, "config.dual_widen")?,
            dual_probes: parse_field(req(&m, "config.dual_probes")?, "config.dual_probes")?,
        };
        let dual_box = match (m.get("dual.lo"), m.get("dual.hi")) {
            (Some(lo), Some(hi)) => {
                let lo = split_floats(lo)?;
                let hi = split_floats(hi)?;
                if lo.len() != ntypes || hi.len() != ntypes {
                    return Err(Error::config("dual box dimension mismatch in the manifest"));
                }
                Some((lo, hi))
            }
            (None, None) => None,
            _ => return Err(Error::config("manifest lists only half a dual box")),
        };
        if (side == Side::Dual) != dual_box.is_some() {
            return Err(Error::config("dual box presence does not match the run side"));
        }
        let mut sets = Vec::with_capacity(steps);
        let mut nets = Vec::with_capacity(steps);
        let mut stats = Vec::with_capacity(steps);
        for k in 0..steps {
            let net = Icnn::load(&dir.join(format!("step_{k:03}.value.json")))?;
            let text = read_artifact(&dir.join(format!("step_{k:03}.train.tsv")))?;
            let (set, set_side) = TrainingSet::parse(&text)?;
            if set_side != side {
                return Err(Error::config("training table side does not match the run"));
            }
            let expect_t = k as f64 * tau;
            if (set.t - expect_t).abs() > 1e-9 * expect_t.abs().max(1.0) {
                return Err(Error::config("training table time does not match its step"));
            }
            if set.states.iter().any(|x| x.len() != dx)
                || set.points.iter().any(|p| p.len() != ntypes)
            {
                return Err(Error::config("training table dimensions do not match the game"));
            }
            let pfx = format!("stats.{k:03}.");
            stats.push(StepStats {
                solve_calls: parse_field(req(&m, &format!("{pfx}solve_calls"))?, "solve_calls")?,
                fit_samples: parse_field(req(&m, &format!("{pfx}fit_samples"))?, "fit_samples")?,
                fit: FitReport {
                    initial_loss: parse_field(req(&m, &format!("{pfx}initial_loss"))?, "initial_loss")?,
                    final_loss: parse_field(req(&m, &format!("{pfx}final_loss"))?, "final_loss")?,
                    epochs_run: parse_field(req(&m, &format!("{pfx}epochs_run"))?, "epochs_run")?,
                    lr_final: parse_field(req(&m, &format!("{pfx}lr_final"))?, "lr_final")?,
                },
            });
            sets.push(set);
            nets.push(net);
        }
        Ok(InductionRun {
            side,
            game,
            tau,
            steps,
            dx,
            ntypes,
            dim_kinds: spec.dim_kinds.clone(),
            config,
            dual_box,
            sets,
            nets,
            stats,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{hexner, ActionSet, Dynamics, PlayerInput};
    use crate::oracles;
    use crate::simplex::lower_convex_hull_1d;

    fn quick_gda() -> GdaOptions {
        GdaOptions {
            step: 0.5,
            prox_x: 0.2,
            prox_y: 0.2,
            anchor_mix: 0.95,
            iters: 10_000,
            tol: 1e-6,
            restarts: 2,
            seed: 0,
        }
    }

    fn quick_cfg(samples: usize) -> InductionConfig {
        InductionConfig {
            samples,
            hidden: 12,
            gda: quick_gda(),
            fit: FitOptions { epochs: 1200, lr: 1e-2, check_every: 25, tol: 1e-12 },
            ..InductionConfig::default()
        }
    }

    /// Frozen-state two-type game with a hand-solvable stage: the minimizer
    /// tracks a type-dependent target (closed-form inner value
    /// p(1−p)(a0−a1)²), the maximizer collects a type-signed side payment
    /// c·v whose optimum is c|p0 − p1|, and the terminal payoff is affine in
    /// the state with a type-dependent slope, which passes through the
    /// belief convexification untouched.
    fn frozen_spec() -> GameSpec {
        let a = [0.6, -0.6];
        let b = [0.5, -0.3];
        let c = 0.5;
        GameSpec {
            name: "frozen-toy".into(),
            dx: 1,
            ntypes: 2,
            horizon: 1.0,
            uset: ActionSet::cube(-1.0, 1.0, 1),
            vset: ActionSet::cube(-1.0, 1.0, 1),
            dynamics: Dynamics::Staged { f: Arc::new(|_, x, _, _| x.to_vec()) },
            running: Arc::new(move |i, u, v| {
                let s = if i == 0 { 1.0 } else { -1.0 };
                (u[0] - a[i]).powi(2) + s * c * v[0]
            }),
            running_grad: Some(Arc::new(move |i, u, _| {
                let s = if i == 0 { 1.0 } else { -1.0 };
                (vec![2.0 * (u[0] - a[i])], vec![s * c])
            })),
            step_cost: None,
            terminal: Arc::new(move |i, x| b[i] * x[0]),
            terminal_grad: Some(Arc::new(move |i, _| vec![b[i]])),
            margin: None,
            gamma: 0.0,
            dim_kinds: vec![DimKind::Pos { lo: -1.0, hi: 1.0 }],
        }
    }

    /// Same shape but with type-independent payoffs, so splitting and
    /// belief updates carry no value.
    fn pooled_spec() -> GameSpec {
        GameSpec {
            name: "pooled-toy".into(),
            dx: 1,
            ntypes: 2,
            horizon: 1.0,
            uset: ActionSet::cube(-1.0, 1.0, 1),
            vset: ActionSet::cube(-1.0, 1.0, 1),
            dynamics: Dynamics::Staged { f: Arc::new(|_, x, _, _| x.to_vec()) },
            running: Arc::new(|_, u, v| (u[0] - 0.3).powi(2) - (v[0] + 0.2).powi(2)),
            running_grad: Some(Arc::new(|_, u, v| {
                (vec![2.0 * (u[0] - 0.3)], vec![-2.0 * (v[0] + 0.2)])
            })),
            step_cost: None,
            terminal: Arc::new(|_, x| x[0] * x[0]),
            terminal_grad: Some(Arc::new(|_, x| vec![2.0 * x[0]])),
            margin: None,
            gamma: 0.0,
            dim_kinds: vec![DimKind::Pos { lo: -1.0, hi: 1.0 }],
        }
    }

    /// Closed-form nonrevealing stage value of `frozen_spec` at belief p0.
    fn frozen_stage(tau: f64, p0: f64) -> f64 {
        tau * (p0 * (1.0 - p0) * 1.44 + 0.5 * (2.0 * p0 - 1.0).abs())
    }

    /// Terminal/continuation part of `frozen_spec`, affine in the belief.
    fn frozen_affine(x: f64, p0: f64) -> f64 {
        x * (0.5 * p0 - 0.3 * (1.0 - p0))
    }

    #[test]
    fn collocation_is_deterministic_and_respects_bounds() {
        let params = hexner::params_desk_2d();
        let spec = hexner::hexner_game(&params).unwrap();
        let (xa, pa) = sample_collocation(&spec, 0.6, 40, 7, ProbeSpace::Belief).unwrap();
        let (xb, pb) = sample_collocation(&spec, 0.6, 40, 7, ProbeSpace::Belief).unwrap();
        assert_eq!(xa, xb);
        assert_eq!(pa, pb);
        let (xc, _) = sample_collocation(&spec, 0.6, 40, 8, ProbeSpace::Belief).unwrap();
        assert_ne!(xa, xc);
        let bounds = spec.sample_bounds(0.6);
        for x in &xa {
            assert_eq!(x.len(), spec.dx);
            for (v, (lo, hi)) in x.iter().zip(&bounds) {
                assert!(v >= lo && v <= hi, "coordinate {v} outside [{lo}, {hi}]");
            }
        }
        for p in &pa {
            assert_eq!(p.len(), 2);
            assert!(p.iter().all(|w| *w >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // At t = 0 every velocity coordinate is exactly zero.
        let (x0, _) = sample_collocation(&spec, 0.0, 10, 7, ProbeSpace::Belief).unwrap();
        for x in &x0 {
            for (v, kind) in x.iter().zip(&spec.dim_kinds) {
                if matches!(kind, DimKind::Vel { .. }) {
                    assert_eq!(*v, 0.0);
                }
            }
        }
        // Dual probes live in their box.
        let (lo, hi) = (vec![-2.0, -1.0], vec![0.5, 3.0]);
        let (_, duals) =
            sample_collocation(&spec, 0.6, 40, 7, ProbeSpace::Dual { lo: &lo, hi: &hi }).unwrap();
        for q in &duals {
            for ((v, a), b) in q.iter().zip(&lo).zip(&hi) {
                assert!(v >= a && v <= b);
            }
        }
    }

    #[test]
    fn collocation_beliefs_cover_the_simplex_evenly() {
        let spec = frozen_spec();
        let (_, ps) = sample_collocation(&spec, 0.5, 1000, 11, ProbeSpace::Belief).unwrap();
        let mean = ps.iter().map(|p| p[0]).sum::<f64>() / ps.len() as f64;
        assert!((mean - 0.5).abs() < 0.03, "belief mean {mean} strays from 1/2");
        // Both halves of the simplex get real mass.
        let low = ps.iter().filter(|p| p[0] < 0.5).count();
        assert!(low > 400 && low < 600, "lopsided belief sample: {low}/1000 below 1/2");
    }

    #[test]
    fn collocation_shares_nodes_across_times_with_scaled_velocities() {
        let params = hexner::params_desk_2d();
        let spec = hexner::hexner_game(&params).unwrap();
        let (xa, pa) = sample_collocation(&spec, 0.4, 25, 3, ProbeSpace::Belief).unwrap();
        let (xb, pb) = sample_collocation(&spec, 0.8, 25, 3, ProbeSpace::Belief).unwrap();
        assert_eq!(pa, pb, "probe coordinates must not depend on the step time");
        for (a, b) in xa.iter().zip(&xb) {
            for ((va, vb), kind) in a.iter().zip(b).zip(&spec.dim_kinds) {
                match kind {
                    DimKind::Pos { .. } => assert_eq!(va, vb),
                    DimKind::Vel { .. } => {
                        assert!((vb - 2.0 * va).abs() <= 1e-12 * (1.0 + vb.abs()))
                    }
                }
            }
        }
    }

    #[test]
    fn collocation_rejection_respects_margins_and_caps_attempts() {
        let mut spec = frozen_spec();
        spec.margin = Some(Arc::new(|x: &[f64]| (x[0], vec![1.0])));
        let (xs, _) = sample_collocation(&spec, 0.5, 60, 5, ProbeSpace::Belief).unwrap();
        assert!(xs.iter().all(|x| x[0] >= 0.0));
        let (ys, _) = sample_collocation(&spec, 0.5, 60, 5, ProbeSpace::Belief).unwrap();
        assert_eq!(xs, ys, "rejection sampling must stay deterministic");

        spec.margin = Some(Arc::new(|_: &[f64]| (-1.0, vec![0.0])));
        let err = sample_collocation(&spec, 0.5, 1, 5, ProbeSpace::Belief).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)), "unexpected error: {err}");
    }

    #[test]
    fn training_text_roundtrips_bitwise_and_rejects_malformed() {
        let set = TrainingSet {
            t: 0.75,
            states: vec![vec![-0.5, 1e-308], vec![0.25, 3.5e11]],
            points: vec![vec![0.125, 0.875], vec![1.0 / 3.0, 2.0 / 3.0]],
            targets: vec![-1.0 / 7.0, 42.0],
            warm: vec![None, None],
        };
        for side in [Side::Primal, Side::Dual] {
            let text = set.to_text(side);
            let (back, got_side) = TrainingSet::parse(&text).unwrap();
            assert_eq!(got_side, side);
            assert_eq!(back.t.to_bits(), set.t.to_bits());
            for (a, b) in back.states.iter().flatten().zip(set.states.iter().flatten()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            for (a, b) in back.points.iter().flatten().zip(set.points.iter().flatten()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            for (a, b) in back.targets.iter().zip(&set.targets) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        let bad = [
            "",                                          // no header
            "t\ttarget\n",                               // no probe columns
            "t\tp0\ttarget\n",                           // no rows
            "t\tp1\ttarget\n0\t1\t2\n",                  // misindexed probe
            "t\tp0\tx0\ttarget\n0\t1\t0\t2\n",           // states after probes
            "t\tp0\ttarget\n0\t1\n",                     // ragged row
            "t\tp0\ttarget\n0\tNaN\t2\n",                // non-finite
            "t\tp0\ttarget\n0\t1\t2\n1\t1\t2\n",         // inconsistent time
            "t\tp0\ttarget\n0\t1\t2\n\n0\t1\t2\n",       // interior blank row
        ];
        for text in bad {
            assert!(TrainingSet::parse(text).is_err(), "accepted malformed table {text:?}");
        }
    }

    #[test]
    fn manifest_seals_and_rejects_tampering() {
        let mut m = Manifest::new();
        m.push("format", "splitgame-run-v1").unwrap();
        m.push("tau", 0.25).unwrap();
        m.seal().unwrap();
        let text = m.to_text();
        let parsed = Manifest::parse(&text).unwrap();
        parsed.verify_sealed().unwrap();
        assert_eq!(parsed.get("tau"), Some("0.25"));

        let tampered = text.replace("0.25", "0.5");
        assert!(Manifest::parse(&tampered).unwrap().verify_sealed().is_err());
        let unsealed = Manifest::parse("a = 1\n").unwrap();
        assert!(unsealed.verify_sealed().is_err());

        assert!(Manifest::parse("a = 1\na = 2\n").is_err(), "duplicate keys");
        assert!(Manifest::parse("bad key = 1\n").is_err(), "key charset");
        assert!(Manifest::parse("noequals\n").is_err(), "missing separator");
        assert!(Manifest::parse("a =\n").is_err(), "empty value");
        assert!(Manifest::parse("# comment\n\na = 1\n").is_ok(), "comments and blanks");
        let mut sealed = Manifest::new();
        sealed.seal().unwrap();
        assert!(sealed.seal().is_err(), "double seal");
    }

    /// Lower convex envelope of (xs, ys) samples re-evaluated at xs.
    fn scratch_lower_env(xs: &[f64], ys: &[f64]) -> Vec<f64> {
        let n = xs.len();
        let mut hull: Vec<usize> = Vec::new();
        for i in 0..n {
            while hull.len() >= 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
                if cross <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(i);
        }
        let mut out = vec![0.0; n];
        let mut seg = 0usize;
        for i in 0..n {
            while seg + 1 < hull.len() - 1 && xs[hull[seg + 1]] <= xs[i] {
                seg += 1;
            }
            let (a, b) = (hull[seg], hull[seg + 1].min(hull[hull.len() - 1]));
            if a == b {
                out[i] = ys[a];
            } else {
                let w = (xs[i] - xs[a]) / (xs[b] - xs[a]);
                out[i] = ys[a] + w * (ys[b] - ys[a]);
            }
        }
        out
    }

    #[test]
    fn scratch_probe_dual_bias() {
        // Discrete dual recursion in closed 1-D form: V*_k(phat) = phat[1] +
        // B_k(s), s = phat[0] - phat[1]; per step B <- vex[min_v max_u
        // (-(u-1)^2 w1 + (v-1)^2 w2 + B(s - 4 u w1 + 4 v w2))].
        let params = hexner::params_desk_2d();
        let ric = hexner::riccati_recursion(&params, 0.0125).unwrap();
        let h = 0.0125;
        let weight = |j: usize, a: f64, b: f64| -> f64 {
            let ia = (a / h).round() as usize;
            let ib = (b / h).round() as usize;
            ric.d[j].iter().zip(ric.d[j].iter().skip(1)).take(ib).skip(ia)
                .map(|(x, y)| 0.5 * h * (x + y))
                .sum()
        };
        let ns = 1201usize;
        let smax = 12.0;
        let sgrid: Vec<f64> = (0..ns).map(|i| -smax + 2.0 * smax * i as f64 / (ns - 1) as f64).collect();
        for steps in [4usize, 8, 16] {
            let tau = 1.0 / steps as f64;
            let mut b: Vec<f64> = sgrid.iter().map(|s| s.max(0.0)).collect();
            for k in (0..steps).rev() {
                let w1 = weight(0, k as f64 * tau, (k + 1) as f64 * tau);
                let w2 = weight(1, k as f64 * tau, (k + 1) as f64 * tau);
                let beval = |s: f64| -> f64 {
                    if s <= sgrid[0] {
                        let sl = (b[1] - b[0]) / (sgrid[1] - sgrid[0]);
                        b[0] + sl * (s - sgrid[0])
                    } else if s >= sgrid[ns - 1] {
                        let sl = (b[ns - 1] - b[ns - 2]) / (sgrid[ns - 1] - sgrid[ns - 2]);
                        b[ns - 1] + sl * (s - sgrid[ns - 1])
                    } else {
                        let f = (s - sgrid[0]) / (2.0 * smax) * (ns - 1) as f64;
                        let i = (f.floor() as usize).min(ns - 2);
                        let w = f - i as f64;
                        b[i] * (1.0 - w) + b[i + 1] * w
                    }
                };
                let psi: Vec<f64> = sgrid
                    .iter()
                    .map(|&s| {
                        let mut best_v = f64::INFINITY;
                        for iv in 0..=80 {
                            let v = -1.0 + 2.0 * iv as f64 / 80.0;
                            let mut best_u = f64::NEG_INFINITY;
                            for iu in 0..=80 {
                                let u = -1.0 + 2.0 * iu as f64 / 80.0;
                                let val = -(u - 1.0) * (u - 1.0) * w1
                                    + (v - 1.0) * (v - 1.0) * w2
                                    + beval(s - 4.0 * u * w1 + 4.0 * v * w2);
                                if val > best_u {
                                    best_u = val;
                                }
                            }
                            if best_u < best_v {
                                best_v = best_u;
                            }
                        }
                        best_v
                    })
                    .collect();
                b = scratch_lower_env(&sgrid, &psi);
            }
            // Analytic: B(0) = -dtilde0 = 0.2306; B at the test tangents.
            let bat = |s: f64| -> f64 {
                let f = (s + smax) / (2.0 * smax) * (ns - 1) as f64;
                let i = (f.floor() as usize).min(ns - 2);
                let w = f - i as f64;
                b[i] * (1.0 - w) + b[i + 1] * w
            };
            let d0 = -0.23058692117397553f64;
            let banal = |s: f64| -> f64 {
                if s >= -4.0 * d0 {
                    s
                } else if s <= 4.0 * d0 {
                    0.0
                } else {
                    -d0 * (1.0 - s / (4.0 * d0)).powi(2)
                }
            };
            println!(
                "steps={steps}: B(0)={:.4} vs {:.4}; B(-0.46)={:.4} vs {:.4}; B(0.46)={:.4} vs {:.4}; B(2)={:.4} vs {:.4}",
                bat(0.0), banal(0.0),
                bat(-0.4611), banal(-0.4611),
                bat(0.4611), banal(0.4611),
                bat(2.0), banal(2.0),
            );
        }
    }

    #[test]
    fn scratch_probe_dual() {
        let params = hexner::params_desk_2d();
        let ric = hexner::riccati_recursion(&params, 0.05).unwrap();
        let spec = oracles::hexner_reformulated_game(&ric).unwrap();
        let cum = ric.cumulative_gap();
        let c_tot = *cum.last().unwrap();
        // Trapezoid weights of each player's tracking gain over the horizon.
        let h = 0.05;
        let w1: f64 = ric.d[0].windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
        let w2: f64 = ric.d[1].windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
        println!("c_tot={c_tot:.6} w1={w1:.6} w2={w2:.6}");

        // One-step conjugate against the closed form.
        let prop = Arc::new(Propagator::new(&spec, 1.0));
        let next: Arc<dyn ValueMap> = Arc::new(TerminalDual::from_spec(&spec));
        let lo = vec![-1.5, -1.5];
        let hi = vec![0.5, 0.5];
        let mut opts = quick_gda();
        opts.iters = 20_000;
        opts.restarts = 3;
        // Discrete one-step stage value: p2 + phi(s), phi the min over v of
        // max_i(p_i + (v - theta_i)^2 W2) with the max player's own-type
        // penalty vanishing at u = theta_i.
        let conj = |p1: f64, p2: f64| -> f64 {
            let s = p1 - p2;
            if s <= -4.0 * w2 {
                p2
            } else if s >= 4.0 * w2 {
                p1
            } else {
                p2 + w2 * (1.0 + s / (4.0 * w2)).powi(2)
            }
        };
        for phat in [[-0.5, -0.1], [-0.2, -0.2], [0.3, -1.0], [-1.0, 0.3]] {
            let asm = assemble_dual(
                &spec,
                prop.clone(),
                0.0,
                &[0.0],
                &phat,
                next.clone(),
                3,
                (&lo, &hi),
            )
            .unwrap();
            let rep = solve_saddle(&asm.objective, &asm.xset, &asm.yset, &opts, None).unwrap();
            println!(
                "one-step phat={phat:?}: solved={:.5} closed={:.5} conv={} res={:.2e}",
                rep.value,
                conj(phat[0], phat[1]),
                rep.converged,
                rep.residual
            );
        }

    }

    #[test]
    fn scratch_probe_dual_sweep() {
        let params = hexner::params_desk_2d();
        let ric = hexner::riccati_recursion(&params, 0.05).unwrap();
        let spec = oracles::hexner_reformulated_game(&ric).unwrap();
        // Four-step sweep: wider box, watch the per-step target ranges.
        let mut cfg = quick_cfg(72);
        cfg.natoms = 3;
        cfg.gda.iters = 12_000;
        cfg.fit.epochs = 2500;
        let lo4 = vec![-1.5, -1.5];
        let hi4 = vec![0.5, 0.5];
        let run = cams_dual_with_box(&spec, 0.25, &cfg, &lo4, &hi4).unwrap();
        for k in 0..run.steps {
            let t = &run.sets[k].targets;
            let mn = t.iter().cloned().fold(f64::INFINITY, f64::min);
            let mx = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            println!(
                "step {k}: targets in [{mn:.4}, {mx:.4}], fit loss {:.2e} -> {:.2e}",
                run.stats[k].fit.initial_loss, run.stats[k].fit.final_loss
            );
        }
        let (times, segments) = oracles::gap_stamps(&ric);
        let analytic = oracles::hexner_analytic_values(&times, &segments).unwrap();
        let vm = run.value_map(0).unwrap();
        // Discrete 4-step envelope values from the grid recursion probe:
        // B4(-0.461) = 0.3547, B4(0) = 0.5604, B4(0.461) = 0.8158.
        let b4 = [0.3547, 0.5604, 0.8158];
        for (pstar, b) in [0.25, 0.5, 0.75].into_iter().zip(b4) {
            let phat = analytic.subgradient(pstar).unwrap();
            let got = vm.eval(&[0.0], &phat);
            let want = analytic.dual_value(0.0, phat).unwrap();
            let disc = phat[1] + b;
            println!("four-step p*={pstar}: fitted={got:.4} discrete={disc:.4} analytic={want:.4} phat={phat:?}");
        }
    }

    #[test]
    fn scratch_probe_frozen_stage() {
        let spec = frozen_spec();
        let tau = 0.5;
        let prop = Arc::new(Propagator::new(&spec, tau));
        let next: Arc<dyn ValueMap> = Arc::new(TerminalPrimal::from_spec(&spec));
        let x = vec![0.3];
        for p0 in [0.25, 0.4, 0.75] {
            let p = Belief::new(vec![p0, 1.0 - p0]).unwrap();
            let want_nr = frozen_stage(tau, p0) + frozen_affine(x[0], p0);
            let grid: Vec<f64> = (0..=2000).map(|j| j as f64 / 2000.0).collect();
            let hs: Vec<(f64, f64)> = grid.iter().map(|&q| (q, frozen_stage(tau, q))).collect();
            let want_vex =
                lower_convex_hull_1d(&hs, p0).unwrap().value + frozen_affine(x[0], p0);
            for (iters, restarts) in [(10_000usize, 2usize), (20_000, 3), (60_000, 6)] {
                let mut opts = quick_gda();
                opts.iters = iters;
                opts.restarts = restarts;
                let asm =
                    assemble_primal(&spec, prop.clone(), 0.5, &x, &p, next.clone(), 2).unwrap();
                let rep =
                    solve_saddle(&asm.objective, &asm.xset, &asm.yset, &opts, None).unwrap();
                let dec = asm.decode(&rep.x, &rep.y, &p).unwrap();
                println!(
                    "p0={p0} iters={iters} restarts={restarts}: value={:.5} nonreveal={want_nr:.5} split-opt={want_vex:.5} conv={} res={:.2e} u=[{:.3},{:.3}] lam=[{:.3},{:.3}] post0=[{:.3},{:.3}]",
                    rep.value,
                    rep.converged,
                    rep.residual,
                    dec.controls[0][0],
                    dec.controls[1][0],
                    dec.lambdas[0],
                    dec.lambdas[1],
                    dec.posteriors[0].weights()[0],
                    dec.posteriors[1].weights()[0],
                );
            }
        }
    }

    #[test]
    fn two_step_frozen_game_matches_hand_rolled_dp() {
        let spec = frozen_spec();
        let tau = 0.5;
        let mut cfg = quick_cfg(32);
        cfg.gda.iters = 20_000;
        cfg.gda.restarts = 3;
        cfg.fit.epochs = 2500;
        let run = cams_primal(&spec, tau, &cfg).unwrap();
        assert_eq!(run.steps, 2);

        // Independent dynamic program: belief-convexified stage values plus
        // the affine part, evaluated by a generic hull routine on a fine
        // grid. The affine-in-belief continuation commutes with the hull.
        let grid: Vec<f64> = (0..=2000).map(|j| j as f64 / 2000.0).collect();
        let h_samples: Vec<(f64, f64)> = grid.iter().map(|&q| (q, frozen_stage(tau, q))).collect();
        let vex_h =
            |q: f64| lower_convex_hull_1d(&h_samples, q).unwrap().value;
        let hh_samples: Vec<(f64, f64)> =
            grid.iter().map(|&q| (q, frozen_stage(tau, q) + vex_h(q))).collect();
        let vex_hh = |q: f64| lower_convex_hull_1d(&hh_samples, q).unwrap().value;

        let oracle = |k: usize, x: f64, p0: f64| -> f64 {
            let belief_part = if k == 1 { vex_h(p0) } else { vex_hh(p0) };
            belief_part + frozen_affine(x, p0)
        };
        for k in [1usize, 0] {
            let set = &run.sets[k];
            for i in 0..set.len() {
                let want = oracle(k, set.states[i][0], set.points[i][0]);
                let got = set.targets[i];
                assert!(
                    (got - want).abs() < 5e-2,
                    "step {k} node {i}: solved {got:.4}, dynamic program {want:.4}"
                );
            }
        }
    }

    #[test]
    fn type_independent_payoffs_degenerate_the_split() {
        let spec = pooled_spec();
        let cfg = quick_cfg(12);
        let run = cams_primal(&spec, 0.5, &cfg).unwrap();
        let prop = Arc::new(Propagator::new(&spec, 0.5));
        for k in [1usize, 0] {
            let next: Arc<dyn ValueMap> = if k == 1 {
                Arc::new(TerminalPrimal::from_spec(&spec))
            } else {
                run.value_map(1).unwrap()
            };
            let set = &run.sets[k];
            for i in 0..4 {
                let p = Belief::new(set.points[i].clone()).unwrap();
                let asm =
                    assemble_primal(&spec, prop.clone(), set.t, &set.states[i], &p, next.clone(), 2)
                        .unwrap();
                let (xs, ys) = set.warm[i].clone().unwrap();
                let dec = asm.decode(&xs, &ys, &p).unwrap();
                let gap = (dec.controls[0][0] - dec.controls[1][0]).abs();
                assert!(gap < 5e-2, "step {k} node {i}: atoms split by {gap}");
                for post in &dec.posteriors {
                    for (w, prior) in post.weights().iter().zip(&set.points[i]) {
                        assert!(
                            (w - prior).abs() < 0.1,
                            "step {k} node {i}: posterior {w} strays from prior {prior}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn vertex_beliefs_match_single_type_solves() {
        let spec = frozen_spec();
        let prop = Arc::new(Propagator::new(&spec, 0.5));
        let next: Arc<dyn ValueMap> = Arc::new(TerminalPrimal::from_spec(&spec));
        let mut opts = quick_gda();
        opts.iters = 20_000;
        opts.restarts = 3;
        opts.tol = 1e-8;
        for x in [vec![-0.4], vec![0.7]] {
            for i in 0..2 {
                let p = Belief::vertex(i, 2);
                let single =
                    assemble_primal(&spec, prop.clone(), 0.5, &x, &p, next.clone(), 1).unwrap();
                let vs =
                    solve_saddle(&single.objective, &single.xset, &single.yset, &opts, None)
                        .unwrap();
                let multi =
                    assemble_primal(&spec, prop.clone(), 0.5, &x, &p, next.clone(), 2).unwrap();
                let vm =
                    solve_saddle(&multi.objective, &multi.xset, &multi.yset, &opts, None).unwrap();
                assert!(
                    (vs.value - vm.value).abs() < 1e-3,
                    "vertex {i} at {x:?}: single {:.6} vs split {:.6}",
                    vs.value,
                    vm.value
                );
            }
        }
    }

    #[test]
    fn splitting_never_raises_the_stage_value() {
        let spec = frozen_spec();
        let prop = Arc::new(Propagator::new(&spec, 0.5));
        let next: Arc<dyn ValueMap> = Arc::new(TerminalPrimal::from_spec(&spec));
        let opts = quick_gda();
        let (states, beliefs) =
            sample_collocation(&spec, 0.5, 12, 99, ProbeSpace::Belief).unwrap();
        for (x, pw) in states.iter().zip(&beliefs) {
            let p = Belief::new(pw.clone()).unwrap();
            let single = assemble_primal(&spec, prop.clone(), 0.5, x, &p, next.clone(), 1).unwrap();
            let vs =
                solve_saddle(&single.objective, &single.xset, &single.yset, &opts, None).unwrap();
            // Warm-start the split problem from the unsplit solution
            // replicated across atoms, so it can only improve on it.
            let du = single.du;
            let mut init_x = Vec::with_capacity(2 * du + 4);
            init_x.extend_from_slice(&vs.x[..du]);
            init_x.extend_from_slice(&vs.x[..du]);
            init_x.extend_from_slice(&[0.5, 0.5, 0.5, 0.5]);
            let mut init_y = Vec::with_capacity(2 * single.dv);
            init_y.extend_from_slice(&vs.y);
            init_y.extend_from_slice(&vs.y);
            let multi = assemble_primal(&spec, prop.clone(), 0.5, x, &p, next.clone(), 2).unwrap();
            let vm = solve_saddle(
                &multi.objective,
                &multi.xset,
                &multi.yset,
                &opts,
                Some((init_x, init_y)),
            )
            .unwrap();
            assert!(
                vm.value <= vs.value + 1e-9,
                "splitting raised the value at {x:?}, {pw:?}: {:.9} > {:.9}",
                vm.value,
                vs.value
            );
        }
    }

    #[test]
    fn conjugate_fits_respect_the_fenchel_inequality() {
        let spec = frozen_spec();
        let tau = 0.5;
        let mut cfg = quick_cfg(48);
        cfg.fit.epochs = 2000;
        let primal = cams_primal(&spec, tau, &cfg).unwrap();
        let dual = cams_dual(&spec, tau, &cfg, &primal).unwrap();
        let (lo, hi) = dual.dual_box.clone().unwrap();
        for k in 0..2 {
            let t = k as f64 * tau;
            let vp = primal.value_map(k).unwrap();
            let vd = dual.value_map(k).unwrap();
            let (xs, ps) = sample_collocation(&spec, t, 100, 17, ProbeSpace::Belief).unwrap();
            let (_, qs) =
                sample_collocation(&spec, t, 100, 18, ProbeSpace::Dual { lo: &lo, hi: &hi })
                    .unwrap();
            for ((x, p), q) in xs.iter().zip(&ps).zip(&qs) {
                let v = vp.eval(x, &p[..1]);
                let w = vd.eval(x, q);
                let pairing: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
                assert!(
                    w >= pairing - v - 0.1,
                    "step {k}: conjugate {w:.4} below pairing {:.4} minus value {v:.4}",
                    pairing
                );
            }
        }
    }

    #[test]
    fn retained_records_grow_the_regression_set() {
        let spec = frozen_spec();
        let mut cfg = quick_cfg(12);
        cfg.retain_all = true;
        cfg.fit.epochs = 300;
        let run = cams_primal(&spec, 0.5, &cfg).unwrap();
        assert_eq!(run.stats[1].fit_samples, 12);
        assert_eq!(run.stats[0].fit_samples, 24);
        assert_eq!(run.stats[0].solve_calls, 12, "retained records are not re-solved");
    }

    #[test]
    fn fit_divergence_aborts_with_the_failing_step() {
        let mut spec = frozen_spec();
        spec.terminal = Arc::new(|_, x: &[f64]| 1e200 * (1.0 + x[0] * x[0]));
        spec.terminal_grad = Some(Arc::new(|_, x: &[f64]| vec![1e200 * 2.0 * x[0]]));
        let mut cfg = quick_cfg(6);
        cfg.gda.iters = 50;
        cfg.gda.restarts = 1;
        cfg.fit.epochs = 40;
        let err = cams_primal(&spec, 0.5, &cfg).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)), "unexpected error kind: {err}");
        let msg = err.to_string();
        assert!(msg.contains("step 1"), "divergence message lacks the step index: {msg}");
    }

    #[test]
    fn runs_are_deterministic_and_roundtrip_through_artifacts() {
        let spec = frozen_spec();
        let mut cfg = quick_cfg(10);
        cfg.gda.iters = 1500;
        cfg.fit.epochs = 200;
        let a = cams_primal(&spec, 0.5, &cfg).unwrap();
        let b = cams_primal(&spec, 0.5, &cfg).unwrap();
        for k in 0..2 {
            let ta: Vec<u64> = a.sets[k].targets.iter().map(|v| v.to_bits()).collect();
            let tb: Vec<u64> = b.sets[k].targets.iter().map(|v| v.to_bits()).collect();
            assert_eq!(ta, tb, "step {k} targets drift between identical runs");
            assert_eq!(
                a.nets[k].to_json().unwrap(),
                b.nets[k].to_json().unwrap(),
                "step {k} approximators drift between identical runs"
            );
        }

        let dir = tempfile::tempdir().unwrap();
        a.save(dir.path()).unwrap();
        verify_run_dir(dir.path()).unwrap();
        let loaded = InductionRun::load(dir.path(), &spec).unwrap();
        assert_eq!(loaded.side, Side::Primal);
        assert_eq!(loaded.steps, 2);
        assert_eq!(loaded.config.samples, cfg.samples);
        assert_eq!(loaded.config.seed, cfg.seed);
        assert_eq!(loaded.config.scale_time, None);
        for k in 0..2 {
            assert_eq!(loaded.nets[k].to_json().unwrap(), a.nets[k].to_json().unwrap());
            for (x, y) in loaded.sets[k].targets.iter().zip(&a.sets[k].targets) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            assert_eq!(loaded.stats[k].solve_calls, a.stats[k].solve_calls);
        }

        // A tampered artifact fails verification as a config error…
        let tsv = dir.path().join("step_000.train.tsv");
        let mut bytes = std::fs::read(&tsv).unwrap();
        let last = bytes.len() - 2;
        bytes[last] ^= 1;
        std::fs::write(&tsv, &bytes).unwrap();
        assert!(matches!(verify_run_dir(dir.path()), Err(Error::Config(_))));

        // …and a deleted one as a missing artifact.
        a.save(dir.path()).unwrap();
        std::fs::remove_file(dir.path().join("step_001.value.json")).unwrap();
        assert!(matches!(verify_run_dir(dir.path()), Err(Error::MissingArtifact(_))));

        // Dual runs carry their box through the roundtrip.
        let lo = vec![-1.5, -1.5];
        let hi = vec![1.5, 1.5];
        let mut dcfg = cfg.clone();
        dcfg.samples = 8;
        let d = cams_dual_with_box(&spec, 0.5, &dcfg, &lo, &hi).unwrap();
        let ddir = tempfile::tempdir().unwrap();
        d.save(ddir.path()).unwrap();
        let dloaded = InductionRun::load(ddir.path(), &spec).unwrap();
        assert_eq!(dloaded.side, Side::Dual);
        assert_eq!(dloaded.dual_box, Some((lo, hi)));
        for (x, y) in dloaded.sets[0].targets.iter().zip(&d.sets[0].targets) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn pursuit_single_step_split_reveals_and_tracks_targets() {
        let params = hexner::params_desk_2d();
        let ric = hexner::riccati_recursion(&params, 1.0).unwrap();
        let spec = hexner::hexner_game(&params).unwrap();
        let mut cfg = quick_cfg(16);
        cfg.hidden = 16;
        cfg.gda.iters = 6000;
        cfg.fit.epochs = 400;
        let run = cams_primal(&spec, 1.0, &cfg).unwrap();
        assert_eq!(run.steps, 1);
        assert_eq!(run.total_solve_calls(), 16);

        // Decision quality at a fixed rest state: solve the single stage at
        // full budget and compare each type's expected first move against
        // the feedback law that steers straight at that type's target.
        let x0 = vec![0.2, -0.3, 0.0, 0.0, -0.1, 0.4, 0.0, 0.0];
        let prop = Arc::new(Propagator::new(&spec, 1.0));
        let next: Arc<dyn ValueMap> = Arc::new(TerminalPrimal::from_spec(&spec));
        let p = Belief::uniform(2);
        let asm = assemble_primal(&spec, prop, 0.0, &x0, &p, next, 2).unwrap();
        let mut opts = cfg.gda;
        opts.iters = 20_000;
        opts.restarts = 3;
        let rep = solve_saddle(&asm.objective, &asm.xset, &asm.yset, &opts, None).unwrap();
        let dec = asm.decode(&rep.x, &rep.y, &p).unwrap();

        let budget = 0.3 * (params.u1_max.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let mut expected = Vec::new();
        for (i, theta) in [(0usize, -1.0), (1usize, 1.0)] {
            let mut act = vec![0.0; 2];
            for k in 0..2 {
                for (j, a) in act.iter_mut().enumerate() {
                    *a += dec.alpha.at(i, k) * dec.controls[k][j];
                }
            }
            let want = hexner::hexner_ground_truth_action(
                &ric,
                &params,
                0.0,
                &x0[..4],
                PlayerInput::P1,
                theta,
                -1.0,
            )
            .unwrap();
            let err = act
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(
                err < budget,
                "type {i}: expected action {act:?} misses the target law {want:?} by {err:.3}"
            );
            expected.push(act);
        }
        let sep = expected[0]
            .iter()
            .zip(&expected[1])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(sep > 1.0, "one-step split fails to reveal: type actions {sep:.3} apart");
    }

    #[test]
    fn reformulated_pursuit_dual_tracks_the_analytic_band() {
        let params = hexner::params_desk_2d();
        let ric = hexner::riccati_recursion(&params, 0.05).unwrap();
        let spec = oracles::hexner_reformulated_game(&ric).unwrap();
        let (times, segments) = oracles::gap_stamps(&ric);
        let analytic = oracles::hexner_analytic_values(&times, &segments).unwrap();
        let mut cfg = quick_cfg(72);
        cfg.natoms = 3;
        cfg.gda.iters = 12_000;
        cfg.fit.epochs = 2500;
        let lo = vec![-0.8, -0.8];
        let hi = vec![0.05, 0.05];
        let run = cams_dual_with_box(&spec, 0.25, &cfg, &lo, &hi).unwrap();
        assert_eq!(run.steps, 4);
        let vm = run.value_map(0).unwrap();
        for pstar in [0.25, 0.5, 0.75] {
            let phat = analytic.subgradient(pstar).unwrap();
            let got = vm.eval(&[0.0], &phat);
            let want = analytic.dual_value(0.0, phat).unwrap();
            assert!(
                (got - want).abs() < 0.1,
                "conjugate at touching point p = {pstar}: fitted {got:.4}, analytic {want:.4}"
            );
        }
    }
}
