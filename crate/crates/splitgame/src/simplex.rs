//! Beliefs, dual payoff vectors, Bayes updates, split decompositions, and the
//! exact 1-D lower convex envelope. Shared by every other module.
//!
//! Tolerances: simplex membership is checked to 1e-9 absolute, affine
//! reconstruction constraints to 1e-8 absolute.

use crate::linalg::Mat;
use crate::{Error, Result};

pub const SIMPLEX_TOL: f64 = 1e-9;
pub const AFFINE_TOL: f64 = 1e-8;

/// Point on the probability simplex over game types: the public posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("belief needs at least one type"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < -SIMPLEX_TOL || *w > 1.0 + SIMPLEX_TOL) {
            return Err(Error::domain("belief entries must lie in [0, 1]"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::domain(format!("belief entries sum to {sum}, expected 1")));
        }
        Ok(Belief(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Belief(vec![1.0 / n as f64; n])
    }

    pub fn vertex(i: usize, n: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Belief(w)
    }

    /// Two-type belief from the probability of the first type.
    pub fn from_scalar(p1: f64) -> Result<Self> {
        Belief::new(vec![p1, 1.0 - p1])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl std::ops::Index<usize> for Belief {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Unconstrained vector of per-type payoff certificates for the uninformed
/// player (the conjugate variable to the belief).
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector(Vec<f64>);

impl DualVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("dual vector needs at least one entry"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("dual vector entries must be finite"));
        }
        Ok(DualVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl std::ops::Index<usize> for DualVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone)]
pub enum SplitAtoms {
    Primal(Vec<Belief>),
    Dual(Vec<DualVector>),
}

/// Atomic mixed-strategy decomposition: weights λ over atoms, the posterior
/// (or dual point) each atom induces, and for the primal side the conditional
/// probabilities α with α[i][k] = Pr(atom k | type i).
#[derive(Debug, Clone)]
pub struct Split {
    pub weights: Vec<f64>,
    pub atoms: SplitAtoms,
    pub alpha: Option<Mat>,
}

impl Split {
    pub fn n_atoms(&self) -> usize {
        self.weights.len()
    }

    /// Full primal invariant check against the prior that produced the split:
    /// λ on the simplex, K = I, reconstruction Σ_k λ^k p^k = p, α rows
    /// stochastic, λ^k = Σ_i α[i][k] p[i]. Zero-mass atoms are excluded from
    /// the reconstruction comparison.
    pub fn check_primal_invariants(&self, p: &Belief) -> Result<()> {
        let atoms = match &self.atoms {
            SplitAtoms::Primal(a) => a,
            SplitAtoms::Dual(_) => return Err(Error::domain("primal check on a dual split")),
        };
        let k_count = self.weights.len();
        if atoms.len() != k_count {
            return Err(Error::domain("weights/atoms length mismatch"));
        }
        if k_count != p.dim() {
            return Err(Error::domain("primal split must carry one atom per type"));
        }
        check_simplex(&self.weights, "split weights")?;
        let mut recon = vec![0.0; p.dim()];
        for (k, atom) in atoms.iter().enumerate() {
            for i in 0..p.dim() {
                recon[i] += self.weights[k] * atom[i];
            }
        }
        for i in 0..p.dim() {
            if (recon[i] - p[i]).abs() > AFFINE_TOL {
                return Err(Error::domain(format!(
                    "split reconstruction off by {} at type {i}",
                    (recon[i] - p[i]).abs()
                )));
            }
        }
        if let Some(alpha) = &self.alpha {
            if alpha.rows != p.dim() || alpha.cols != k_count {
                return Err(Error::domain("alpha shape mismatch"));
            }
            for i in 0..alpha.rows {
                let mut row_sum = 0.0;
                for k in 0..alpha.cols {
                    let a = alpha.at(i, k);
                    if !(-AFFINE_TOL..=1.0 + AFFINE_TOL).contains(&a) {
                        return Err(Error::domain("alpha entries must lie in [0, 1]"));
                    }
                    row_sum += a;
                }
                if (row_sum - 1.0).abs() > AFFINE_TOL {
                    return Err(Error::domain("alpha rows must sum to 1 per type"));
                }
            }
            for k in 0..k_count {
                let lam: f64 = (0..p.dim()).map(|i| alpha.at(i, k) * p[i]).sum();
                if (lam - self.weights[k]).abs() > AFFINE_TOL {
                    return Err(Error::domain("weights inconsistent with alpha and prior"));
                }
            }
        }
        Ok(())
    }

    /// Dual invariant check: λ on the simplex with K = I+1 atoms and
    /// Σ_k λ^k p̂^k = p̂.
    pub fn check_dual_invariants(&self, p_hat: &DualVector) -> Result<()> {
        let atoms = match &self.atoms {
            SplitAtoms::Dual(a) => a,
            SplitAtoms::Primal(_) => return Err(Error::domain("dual check on a primal split")),
        };
        if atoms.len() != self.weights.len() {
            return Err(Error::domain("weights/atoms length mismatch"));
        }
        if self.weights.len() != p_hat.dim() + 1 {
            return Err(Error::domain("dual split must carry I+1 atoms"));
        }
        check_simplex(&self.weights, "split weights")?;
        for i in 0..p_hat.dim() {
            let recon: f64 = atoms.iter().zip(&self.weights).map(|(a, w)| w * a[i]).sum();
            if (recon - p_hat[i]).abs() > AFFINE_TOL {
                return Err(Error::domain("dual split reconstruction violated"));
            }
        }
        Ok(())
    }
}

fn check_simplex(w: &[f64], what: &str) -> Result<()> {
    if w.iter().any(|x| !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(x)) {
        return Err(Error::domain(format!("{what} entries must lie in [0, 1]")));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::domain(format!("{what} must sum to 1")));
    }
    Ok(())
}

/// A finitely supported mixed strategy: atom actions plus their selection
/// probabilities, per type for the informed player or marginal for the
/// uninformed one.
#[derive(Debug, Clone)]
pub enum AtomProbs {
    PerType(Mat),
    Marginal(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct StrategyAtomSet {
    pub actions: Vec<Vec<f64>>,
    pub probs: AtomProbs,
}

impl StrategyAtomSet {
    pub fn check(&self) -> Result<()> {
        match &self.probs {
            AtomProbs::PerType(m) => {
                if m.cols != self.actions.len() {
                    return Err(Error::domain("per-type atom probability shape mismatch"));
                }
                for i in 0..m.rows {
                    let row: Vec<f64> = (0..m.cols).map(|k| m.at(i, k)).collect();
                    check_simplex(&row, "per-type atom probabilities")?;
                }
            }
            AtomProbs::Marginal(w) => {
                if w.len() != self.actions.len() {
                    return Err(Error::domain("marginal atom probability shape mismatch"));
                }
                check_simplex(w, "marginal atom probabilities")?;
            }
        }
        Ok(())
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Result<Belief> {
    if v.is_empty() {
        return Err(Error::domain("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("cannot project non-finite entries"));
    }
    // The projection is invariant to shifting every coordinate by the same
    // constant; shifting the maximum to zero keeps the waterfilling
    // threshold well conditioned even for astronomically scaled inputs,
    // where `cumsum - 1.0` would otherwise round back to `cumsum`.
    let shift = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sorted: Vec<f64> = v.iter().map(|x| x - shift).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    let mut found = false;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let cand = (cumsum - 1.0) / (k + 1) as f64;
        if u - cand > 0.0 {
            theta = cand;
            found = true;
        }
    }
    debug_assert!(found);
    let _ = found;
    let w: Vec<f64> = v.iter().map(|&x| (x - shift - theta).max(0.0)).collect();
    // Renormalize away the last-ulp drift so the Belief constructor's 1e-9
    // membership check cannot trip on accumulated rounding.
    let sum: f64 = w.iter().sum();
    Belief::new(w.into_iter().map(|x| x / sum).collect())
}

/// Posterior after observing atom k of a strategy with per-type atom
/// probabilities (rows = types, cols = atoms): p'[i] ∝ probs[i][k] p[i].
pub fn bayes_update(p: &Belief, atom_probs: &Mat, observed: usize) -> Result<Belief> {
    if atom_probs.rows != p.dim() {
        return Err(Error::domain("atom probability rows must match type count"));
    }
    if observed >= atom_probs.cols {
        return Err(Error::domain("observed atom index out of range"));
    }
    let marginal: f64 = (0..p.dim()).map(|i| atom_probs.at(i, observed) * p[i]).sum();
    if marginal <= 0.0 {
        return Err(Error::domain("unreachable observation: zero marginal probability"));
    }
    let w: Vec<f64> = (0..p.dim()).map(|i| atom_probs.at(i, observed) * p[i] / marginal).collect();
    let sum: f64 = w.iter().sum();
    Belief::new(w.into_iter().map(|x| x / sum).collect())
}

/// Split decomposition induced by conditional atom probabilities α
/// (rows = types, cols = atoms): λ^k = Σ_i α[i][k] p[i] and
/// p^k[i] = α[i][k] p[i] / λ^k. Atoms with λ^k = 0 carry the uniform
/// placeholder posterior.
pub fn split_from_alpha(p: &Belief, alpha: &Mat) -> Result<Split> {
    if alpha.rows != p.dim() {
        return Err(Error::domain("alpha rows must match type count"));
    }
    for i in 0..alpha.rows {
        let row_sum: f64 = (0..alpha.cols).map(|k| alpha.at(i, k)).sum();
        if (row_sum - 1.0).abs() > AFFINE_TOL {
            return Err(Error::domain("alpha rows must sum to 1 per type"));
        }
    }
    let n = p.dim();
    let k_count = alpha.cols;
    let mut weights = Vec::with_capacity(k_count);
    let mut atoms = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let lam: f64 = (0..n).map(|i| alpha.at(i, k) * p[i]).sum();
        weights.push(lam);
        if lam <= 0.0 {
            atoms.push(Belief::uniform(n));
        } else {
            let w: Vec<f64> = (0..n).map(|i| alpha.at(i, k) * p[i] / lam).collect();
            let sum: f64 = w.iter().sum();
            atoms.push(Belief::new(w.into_iter().map(|x| x / sum).collect())?);
        }
    }
    // Clean residual rounding in the weights so they form an exact simplex
    // point.
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(Split { weights, atoms: SplitAtoms::Primal(atoms), alpha: Some(alpha.clone()) })
}

/// Evaluation of the lower convex envelope of 1-D samples at a query point,
/// together with the (at most two) supporting sample abscissae and the convex
/// weights combining them into the query.
#[derive(Debug, Clone)]
pub struct HullPoint {
    pub value: f64,
    pub supports: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

/// Lower convex envelope over [0, 1] of sampled (p, value) pairs, evaluated
/// at `query`. Samples must cover both endpoints. The concave-envelope (Cav)
/// variant is obtained by negating values.
pub fn lower_convex_hull_1d(samples: &[(f64, f64)], query: f64) -> Result<HullPoint> {
    if samples.len() < 2 {
        return Err(Error::domain("hull needs at least two samples"));
    }
    if samples.iter().any(|(p, v)| !p.is_finite() || !v.is_finite()) {
        return Err(Error::domain("hull samples must be finite"));
    }
    if !(0.0..=1.0).contains(&query) {
        return Err(Error::domain("hull query must lie in [0, 1]"));
    }
    let mut pts = samples.to_vec();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if pts[0].0 > SIMPLEX_TOL || pts[pts.len() - 1].0 < 1.0 - SIMPLEX_TOL {
        return Err(Error::domain("hull samples must include p = 0 and p = 1"));
    }
    // Collapse duplicate abscissae to their minimum value.
    let mut dedup: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for (p, v) in pts {
        match dedup.last_mut() {
            Some(last) if (last.0 - p).abs() < 1e-15 => last.1 = last.1.min(v),
            _ => dedup.push((p, v)),
        }
    }
    // Andrew's monotone chain, lower hull only.
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(dedup.len());
    for pt in dedup {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (pt.1 - a.1) - (b.1 - a.1) * (pt.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    // Locate the hull segment containing the query.
    let idx = hull.partition_point(|(p, _)| *p <= query);
    if idx == 0 {
        // query at or below the leftmost abscissa (query == 0 case)
        let s = hull[0];
        return Ok(HullPoint { value: s.1, supports: vec![s], weights: vec![1.0] });
    }
    let left = hull[idx - 1];
    if idx == hull.len() || (query - left.0).abs() < 1e-15 {
        return Ok(HullPoint { value: left.1, supports: vec![left], weights: vec![1.0] });
    }
    let right = hull[idx];
    let t = (query - left.0) / (right.0 - left.0);
    Ok(HullPoint {
        value: (1.0 - t) * left.1 + t * right.1,
        supports: vec![left, right],
        weights: vec![1.0 - t, t],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_symmetry_and_fixed_points() {
        let b = project_simplex(&[0.6, 0.6]).unwrap();
        assert!((b[0] - 0.5).abs() < 1e-12 && (b[1] - 0.5).abs() < 1e-12);
        let b = project_simplex(&[1.0, 0.0]).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12 && b[1].abs() < 1e-12);
    }

    #[test]
    fn projection_rejects_non_finite() {
        assert!(project_simplex(&[f64::NAN, 0.5]).is_err());
        assert!(project_simplex(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn bayes_non_revealing_leaves_belief_unchanged() {
        let p = Belief::new(vec![0.3, 0.7]).unwrap();
        let probs = Mat::from_rows(&[vec![0.4, 0.6], vec![0.4, 0.6]]).unwrap();
        for k in 0..2 {
            let post = bayes_update(&p, &probs, k).unwrap();
            assert!((post[0] - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn bayes_signaling_example() {
        // Two types (strong, weak), two observable actions. The strong type
        // always plays the first action; the weak type plays it with
        // probability 1/4. Prior (1/3, 2/3), observe the first action.
        let p = Belief::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let probs = Mat::from_rows(&[vec![1.0, 0.0], vec![0.25, 0.75]]).unwrap();
        let post = bayes_update(&p, &probs, 0).unwrap();
        assert!((post[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((post[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bayes_zero_marginal_errors() {
        let p = Belief::new(vec![1.0, 0.0]).unwrap();
        let probs = Mat::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let err = bayes_update(&p, &probs, 1).unwrap_err();
        assert!(err.to_string().contains("unreachable"));
    }

    #[test]
    fn split_fully_revealing() {
        let p = Belief::uniform(3);
        let alpha = Mat::identity(3);
        let s = split_from_alpha(&p, &alpha).unwrap();
        s.check_primal_invariants(&p).unwrap();
        for (k, w) in s.weights.iter().enumerate() {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
            if let SplitAtoms::Primal(atoms) = &s.atoms {
                assert!((atoms[k][k] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn split_non_revealing() {
        let p = Belief::new(vec![0.2, 0.8]).unwrap();
        let alpha = Mat::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let s = split_from_alpha(&p, &alpha).unwrap();
        s.check_primal_invariants(&p).unwrap();
        if let SplitAtoms::Primal(atoms) = &s.atoms {
            for atom in atoms {
                assert!((atom[0] - 0.2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn split_signaling_example_reconstructs_strategy() {
        // Prior (1/3, 2/3); conditionals: type 1 plays atom 2 always, type 2
        // plays atom 1 with prob 3/4. Yields λ = (1/2, 1/2), atom posteriors
        // (0, 1) and (2/3, 1/3).
        let p = Belief::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let alpha = Mat::from_rows(&[vec![0.0, 1.0], vec![0.75, 0.25]]).unwrap();
        let s = split_from_alpha(&p, &alpha).unwrap();
        s.check_primal_invariants(&p).unwrap();
        assert!((s.weights[0] - 0.5).abs() < 1e-12);
        assert!((s.weights[1] - 0.5).abs() < 1e-12);
        if let SplitAtoms::Primal(atoms) = &s.atoms {
            assert!(atoms[0][0].abs() < 1e-12);
            assert!((atoms[0][1] - 1.0).abs() < 1e-12);
            assert!((atoms[1][0] - 2.0 / 3.0).abs() < 1e-12);
            assert!((atoms[1][1] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_mass_atom_gets_uniform_placeholder() {
        let p = Belief::new(vec![1.0, 0.0]).unwrap();
        // Type 2 has zero prior mass; atom 2 is only reachable by type 2.
        let alpha = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let s = split_from_alpha(&p, &alpha).unwrap();
        assert!(s.weights[1].abs() < 1e-12);
        if let SplitAtoms::Primal(atoms) = &s.atoms {
            assert!((atoms[1][0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn hull_of_concave_bump_splits_to_vertices() {
        // 4p(1-p)D with D > 0 is concave; its lower envelope is the chord
        // through the endpoints, which is identically zero.
        let d = 0.4;
        let samples: Vec<(f64, f64)> = (0..=100)
            .map(|i| {
                let p = i as f64 / 100.0;
                (p, 4.0 * p * (1.0 - p) * d)
            })
            .collect();
        let h = lower_convex_hull_1d(&samples, 0.5).unwrap();
        assert!(h.value.abs() < 1e-12);
        assert_eq!(h.supports.len(), 2);
        assert!(h.supports[0].0.abs() < 1e-12);
        assert!((h.supports[1].0 - 1.0).abs() < 1e-12);
        assert!((h.weights[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hull_of_convex_function_is_itself() {
        let samples: Vec<(f64, f64)> = (0..=50)
            .map(|i| {
                let p = i as f64 / 50.0;
                (p, (p - 0.3) * (p - 0.3))
            })
            .collect();
        for &(p, v) in &samples {
            let h = lower_convex_hull_1d(&samples, p).unwrap();
            assert!((h.value - v).abs() < 1e-12, "hull deviates at p={p}");
        }
    }

    #[test]
    fn hull_rejects_bad_queries_and_missing_endpoints() {
        let samples = vec![(0.0, 0.0), (1.0, 1.0)];
        assert!(lower_convex_hull_1d(&samples, 1.5).is_err());
        let no_right = vec![(0.0, 0.0), (0.5, 1.0)];
        assert!(lower_convex_hull_1d(&no_right, 0.2).is_err());
    }
}
