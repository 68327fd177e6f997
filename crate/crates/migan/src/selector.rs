//! The model-informed selector: the layer stack that turns a batch of
//! generated solutions into the updated saved set.
//!
//! Four stages, applied pairwise per slot:
//!
//! 1. feasibility filter — prefer feasible candidates, newer wins on ties;
//! 2. comparison — prefer smaller objective, but never displace a feasible
//!    saved solution with a worse one;
//! 3. gradient guidance — nudge candidates along a secant slope estimated
//!    against the historical pool;
//! 4. a second feasibility filter screening the nudged points against the
//!    pre-nudge pool.
//!
//! All stages are written against [`SolutionModel`], so they apply to any
//! constrained problem with a feasibility predicate, not only DC dispatch.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, Mat};
use crate::opf::{Candidate, Feasibility, SolutionModel};

#[derive(Debug, Error)]
pub enum SelectorError {
    #[error("solution pools have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Guard below which a secant denominator counts as zero displacement.
pub const SLOPE_GUARD: f64 = 1e-9;

/// Fixed-length ordered set of candidates. Pools passed to the selector pair
/// slot-by-slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPool {
    candidates: Vec<Candidate>,
}

impl SolutionPool {
    pub fn new(candidates: Vec<Candidate>) -> Self {
        Self { candidates }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn get(&self, i: usize) -> &Candidate {
        &self.candidates[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Candidate> {
        self.candidates.iter()
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn candidates_mut(&mut self) -> &mut Vec<Candidate> {
        &mut self.candidates
    }

    pub fn into_candidates(self) -> Vec<Candidate> {
        self.candidates
    }

    pub fn push(&mut self, candidate: Candidate) {
        self.candidates.push(candidate);
    }

    /// Smallest objective over the whole pool.
    pub fn min_objective(&self) -> Option<f64> {
        self.candidates
            .iter()
            .map(|c| c.objective)
            .min_by(|a, b| a.total_cmp(b))
    }

    /// Best (lowest objective) feasible candidate, with its slot.
    pub fn best_feasible(&self) -> Option<(usize, &Candidate)> {
        self.candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_feasible())
            .min_by(|(_, a), (_, b)| a.objective.total_cmp(&b.objective))
    }

    pub fn count_feasible(&self) -> usize {
        self.candidates.iter().filter(|c| c.is_feasible()).count()
    }
}

impl std::ops::Index<usize> for SolutionPool {
    type Output = Candidate;
    fn index(&self, i: usize) -> &Candidate {
        &self.candidates[i]
    }
}

/// Per-pair feasibility label recorded by the filter layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeasLabel {
    GenFeasSavedInfeas,
    BothFeas,
    BothInfeas,
    GenInfeasSavedFeas,
}

impl FeasLabel {
    fn from_verdicts(gen_feasible: bool, saved_feasible: bool) -> Self {
        match (gen_feasible, saved_feasible) {
            (true, false) => FeasLabel::GenFeasSavedInfeas,
            (true, true) => FeasLabel::BothFeas,
            (false, false) => FeasLabel::BothInfeas,
            (false, true) => FeasLabel::GenInfeasSavedFeas,
        }
    }

    pub fn saved_is_feasible(self) -> bool {
        matches!(self, FeasLabel::BothFeas | FeasLabel::GenInfeasSavedFeas)
    }

    pub fn gen_is_feasible(self) -> bool {
        matches!(self, FeasLabel::GenFeasSavedInfeas | FeasLabel::BothFeas)
    }
}

fn check_lengths(a: &SolutionPool, b: &SolutionPool) -> Result<(), SelectorError> {
    if a.len() != b.len() {
        return Err(SelectorError::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

fn ensure_evaluated<M: SolutionModel>(c: &Candidate, model: &M, honor_relaxation: bool) -> Candidate {
    if c.feasible == Feasibility::Unevaluated {
        model.evaluate(&c.p_g, honor_relaxation)
    } else {
        c.clone()
    }
}

/// Pairwise feasibility filter. The generated candidate passes unless it is
/// infeasible while the saved one is feasible; the per-pair labels are
/// returned for the comparison layer.
pub fn feasibility_filter<M: SolutionModel>(
    gen: &SolutionPool,
    saved: &SolutionPool,
    model: &M,
    honor_relaxation: bool,
) -> Result<(SolutionPool, Vec<FeasLabel>), SelectorError> {
    check_lengths(gen, saved)?;
    let mut out = Vec::with_capacity(gen.len());
    let mut labels = Vec::with_capacity(gen.len());
    for (g, s) in gen.iter().zip(saved.iter()) {
        let g = ensure_evaluated(g, model, honor_relaxation);
        let s = ensure_evaluated(s, model, honor_relaxation);
        let label = FeasLabel::from_verdicts(g.is_feasible(), s.is_feasible());
        out.push(match label {
            FeasLabel::GenInfeasSavedFeas => s,
            _ => g,
        });
        labels.push(label);
    }
    Ok((SolutionPool::new(out), labels))
}

/// Pairwise objective comparison between the filtered pool and the saved pool.
///
/// A feasible saved solution is kept whenever the filtered one is not strictly
/// better; a strictly better filtered solution passes unless it is infeasible
/// while the saved one is feasible (unreachable after a consistent filter).
pub fn comparison_layer(
    filtered: &SolutionPool,
    saved: &SolutionPool,
    labels: &[FeasLabel],
) -> Result<SolutionPool, SelectorError> {
    check_lengths(filtered, saved)?;
    if labels.len() != filtered.len() {
        return Err(SelectorError::LengthMismatch(labels.len(), filtered.len()));
    }
    let mut out = Vec::with_capacity(filtered.len());
    for ((f, s), label) in filtered.iter().zip(saved.iter()).zip(labels) {
        let keep_saved = if f.objective >= s.objective {
            label.saved_is_feasible()
        } else {
            !f.is_feasible() && label.saved_is_feasible()
        };
        out.push(if keep_saved { s.clone() } else { f.clone() });
    }
    Ok(SolutionPool::new(out))
}

/// Secant-slope nudge of each candidate against its historical partner.
///
/// Per coordinate, the slope is the objective difference over the coordinate
/// displacement (zero under the guard); the step moves with the slope when the
/// candidate is already no worse than its partner, and against it otherwise.
/// Angles and verdicts are re-derived for the moved points.
pub fn gradient_guided_layer<M: SolutionModel>(
    pool: &SolutionPool,
    historical: &SolutionPool,
    eta: f64,
    model: &M,
    honor_relaxation: bool,
) -> Result<SolutionPool, SelectorError> {
    assert!(eta > 0.0, "step size must be positive");
    check_lengths(pool, historical)?;
    let mut out = Vec::with_capacity(pool.len());
    for (p, h) in pool.iter().zip(historical.iter()) {
        let df = p.objective - h.objective;
        let sign = if df <= 0.0 { 1.0 } else { -1.0 };
        let mut moved = p.p_g.clone();
        let mut any = false;
        for (m, (&pj, &hj)) in moved.iter_mut().zip(p.p_g.iter().zip(&h.p_g)) {
            let denom = pj - hj;
            if denom.abs() >= SLOPE_GUARD {
                *m = pj + sign * eta * (df / denom);
                any = true;
            }
        }
        if any && df != 0.0 {
            out.push(model.evaluate(&moved, honor_relaxation));
        } else {
            out.push(p.clone());
        }
    }
    Ok(SolutionPool::new(out))
}

/// The full selector: filter, compare, optionally nudge, then screen the
/// nudged points against the pre-nudge pool with a second filter.
pub fn select<M: SolutionModel>(
    gen: &SolutionPool,
    saved: &SolutionPool,
    historical: &SolutionPool,
    model: &M,
    eta: f64,
    gradient_enabled: bool,
    honor_relaxation: bool,
) -> Result<SolutionPool, SelectorError> {
    check_lengths(gen, saved)?;
    check_lengths(gen, historical)?;
    let (stage1, labels) = feasibility_filter(gen, saved, model, honor_relaxation)?;
    let stage2 = comparison_layer(&stage1, saved, &labels)?;
    let stage3 = if gradient_enabled {
        gradient_guided_layer(&stage2, historical, eta, model, honor_relaxation)?
    } else {
        stage2.clone()
    };
    let (updated, _) = feasibility_filter(&stage3, &stage2, model, honor_relaxation)?;
    Ok(updated)
}

/// Minimal inequality-constrained linear problem (`c'x` over `a x <= b`):
/// exercises the selector away from the dispatch model.
#[derive(Debug, Clone)]
pub struct InequalityModel {
    pub c: Vec<f64>,
    pub a: Mat,
    pub b: Vec<f64>,
    pub tol: f64,
}

impl SolutionModel for InequalityModel {
    fn objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }

    fn evaluate(&self, x: &[f64], _honor_relaxation: bool) -> Candidate {
        let feasible = self
            .a
            .matvec(x)
            .iter()
            .zip(&self.b)
            .all(|(ax, b)| *ax <= b + self.tol);
        Candidate {
            p_g: x.to_vec(),
            theta: Vec::new(),
            objective: self.objective(x),
            feasible: if feasible { Feasibility::Feasible } else { Feasibility::Infeasible },
            balance_residual: 0.0,
        }
    }
}
