//! Recursive iteration driver: retrain, emit, keep the best, stop after two
//! consecutive non-improvements.
//!
//! Each outer iteration trains the adversarial pair against the current actual
//! set, emits fresh candidates, and re-seeds the actual set with the smallest
//! objectives from the union. The per-iteration minimum is non-increasing by
//! construction, so the stopping rule fires exactly when two consecutive
//! iterations fail to improve it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gan::{GanError, MiGanState};
use crate::net::TrainHyper;
use crate::opf::{Candidate, OpfProblem, SolutionModel};
use crate::selector::SolutionPool;

#[derive(Debug, Clone)]
pub struct RecursiveConfig {
    /// Actual-set size carried between outer iterations.
    pub m: usize,
    /// Candidates emitted per outer iteration.
    pub h: usize,
    /// Safety cap on outer iterations.
    pub max_outer: usize,
    /// Gradient-guided layer step size.
    pub eta: f64,
    pub gradient_enabled: bool,
    pub hyper: TrainHyper,
    /// Re-initialize the nets at every outer iteration instead of continuing
    /// from the previous ones (ablation switch).
    pub cold_start: bool,
    /// Accepted for interface parity; the driver never reads it.
    pub delta: f64,
}

impl Default for RecursiveConfig {
    fn default() -> Self {
        Self {
            m: 3000,
            h: 300,
            max_outer: 12,
            eta: 1e-3,
            gradient_enabled: true,
            hyper: TrainHyper::default(),
            cold_start: false,
            delta: 0.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum RecursiveError {
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(
        "no fully feasible candidate found in {candidates} candidates over {outer} outer \
         iterations (best relaxed objective {best_relaxed})"
    )]
    NoFeasibleResult {
        outer: usize,
        candidates: usize,
        best_relaxed: f64,
    },
}

/// One row of the outer-iteration log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub k: usize,
    pub f_min: f64,
    pub feasible_emitted: usize,
}

#[derive(Debug, Clone)]
pub struct RecursiveOutcome {
    /// Best candidate, guaranteed feasible under the full constraint set.
    pub best: Candidate,
    pub history: Vec<OuterRecord>,
    pub outer_iterations: usize,
    /// The driver stopped at the cap instead of the stopping rule.
    pub hit_cap: bool,
    /// Final actual set, for chaining into an adapted run.
    pub actual: SolutionPool,
    /// Per-iteration losses accumulated across all outer iterations.
    pub losses: Vec<crate::gan::LossRecord>,
}

/// Keep the `m` smallest-objective candidates of `actual` plus `emitted`,
/// feasible before infeasible, ties broken by insertion order (actual first).
pub fn merge_best(actual: &SolutionPool, emitted: &SolutionPool, m: usize) -> SolutionPool {
    assert!(
        actual.len() + emitted.len() >= m,
        "cannot keep {m} of {} candidates",
        actual.len() + emitted.len()
    );
    let mut all: Vec<(usize, &Candidate)> =
        actual.iter().chain(emitted.iter()).enumerate().collect();
    all.sort_by(|(ia, a), (ib, b)| {
        (!a.is_feasible(), a.objective, *ia)
            .partial_cmp(&(!b.is_feasible(), b.objective, *ib))
            .expect("objectives are ordered")
    });
    SolutionPool::new(all.into_iter().take(m).map(|(_, c)| c.clone()).collect())
}

/// Full run with fresh nets seeded from `seed`.
pub fn run_recursive(
    problem: &OpfProblem,
    initial_actual: SolutionPool,
    cfg: &RecursiveConfig,
    seed: u64,
) -> Result<RecursiveOutcome, RecursiveError> {
    let mut state =
        MiGanState::init(problem, initial_actual.clone(), cfg.hyper.clone(), seed)?;
    state.eta = cfg.eta;
    state.gradient_enabled = cfg.gradient_enabled;
    run_with_state(problem, &mut state, initial_actual, cfg)
}

/// Drive the outer loop over an existing (possibly already trained) state.
pub fn run_with_state(
    problem: &OpfProblem,
    state: &mut MiGanState,
    initial_actual: SolutionPool,
    cfg: &RecursiveConfig,
) -> Result<RecursiveOutcome, RecursiveError> {
    assert!(cfg.m >= 1 && cfg.h >= 1, "m and h must be at least 1");
    assert!(cfg.max_outer >= 3, "the stopping rule needs at least three iterations");
    assert!(!initial_actual.is_empty(), "initial actual set must not be empty");

    let m = cfg.m.min(initial_actual.len());
    let mut actual = initial_actual;
    let mut f_min_history: Vec<f64> = Vec::new();
    let mut incumbents: Vec<Candidate> = Vec::new();
    let mut records: Vec<OuterRecord> = Vec::new();

    for k in 1..=cfg.max_outer {
        if cfg.cold_start && k > 1 {
            let reseed = state.fork_seed();
            *state = MiGanState::init(problem, actual.clone(), cfg.hyper.clone(), reseed)?;
            state.eta = cfg.eta;
            state.gradient_enabled = cfg.gradient_enabled;
        } else {
            state.historical_pool = actual.clone();
        }
        state.train(problem)?;

        let emitted = state.emit_candidates(problem, cfg.h);
        // Only candidates passing the training-level (relaxed) check enter.
        let eligible: Vec<Candidate> = emitted
            .iter()
            .map(|c| problem.evaluate(&c.p_g, true))
            .filter(|c| c.is_feasible())
            .collect();
        let feasible_emitted = eligible.len();
        actual = merge_best(&actual, &SolutionPool::new(eligible), m);

        let best_now = actual[0].clone();
        let f_min = best_now.objective;
        f_min_history.push(f_min);
        incumbents.push(best_now);
        records.push(OuterRecord { k, f_min, feasible_emitted });

        if k >= 3
            && f_min_history[k - 3] <= f_min_history[k - 2]
            && f_min_history[k - 3] <= f_min_history[k - 1]
        {
            let chosen = incumbents[k - 3].clone();
            let losses = state.loss_history.clone();
            return finalize(problem, chosen, actual, records, k, false, losses);
        }
    }

    log::warn!(
        "recursive driver hit the outer-iteration cap ({}); returning the best so far",
        cfg.max_outer
    );
    let chosen = incumbents.last().expect("at least one iteration ran").clone();
    let outer = records.len();
    let losses = state.loss_history.clone();
    finalize(problem, chosen, actual, records, outer, true, losses)
}

fn finalize(
    problem: &OpfProblem,
    chosen: Candidate,
    actual: SolutionPool,
    history: Vec<OuterRecord>,
    outer_iterations: usize,
    hit_cap: bool,
    losses: Vec<crate::gan::LossRecord>,
) -> Result<RecursiveOutcome, RecursiveError> {
    // The reported solution must satisfy the full, un-relaxed constraint set;
    // fall back to the next-best candidate that does.
    let strict = problem.evaluate(&chosen.p_g, false);
    let best = if strict.is_feasible() {
        strict
    } else {
        let fallback = actual
            .iter()
            .map(|c| problem.evaluate(&c.p_g, false))
            .filter(|c| c.is_feasible())
            .min_by(|a, b| a.objective.total_cmp(&b.objective));
        match fallback {
            Some(c) => c,
            None => {
                return Err(RecursiveError::NoFeasibleResult {
                    outer: outer_iterations,
                    candidates: actual.len(),
                    best_relaxed: chosen.objective,
                })
            }
        }
    };
    Ok(RecursiveOutcome { best, history, outer_iterations, hit_cap, actual, losses })
}
