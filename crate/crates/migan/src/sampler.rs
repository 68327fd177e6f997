//! Rejection sampling of feasible dispatch candidates.
//!
//! Dispatch vectors are drawn uniformly within the generator box; in the
//! default balance mode the slack generator is then reset to close the power
//! balance before the feasibility check (pure rejection on the balance
//! equality would almost never accept). A configurable number of randomly
//! chosen inequality rows can be relaxed during sampling to speed up
//! exploration on tighter cases; the relaxation never applies to final
//! acceptance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::opf::{OpfProblem, SolutionModel};
use crate::selector::SolutionPool;

/// How sampled dispatches satisfy the balance equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BalanceMode {
    /// Reset the slack generator to absorb the imbalance (bounds re-checked).
    #[default]
    SlackAdjust,
    /// Keep the raw draw and reject unbalanced candidates.
    Reject,
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub n_samples: usize,
    pub max_attempts: usize,
    /// Number of inequality rows to relax while sampling (see
    /// [`with_relaxation`]).
    pub relax_count: usize,
    pub seed: u64,
    pub balance_mode: BalanceMode,
}

impl SamplerConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        assert!(n_samples >= 1);
        Self {
            n_samples,
            max_attempts: 200 * n_samples,
            relax_count: 0,
            seed,
            balance_mode: BalanceMode::SlackAdjust,
        }
    }

    pub fn with_relax_count(mut self, relax_count: usize) -> Self {
        self.relax_count = relax_count;
        self
    }
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(
        "no feasible sample found in {attempts} attempts; consider relaxing more \
         constraints (relax_count = {relax_count})"
    )]
    Exhausted { attempts: usize, relax_count: usize },
}

/// Uniformly random relaxation mask with exactly `relax_count` rows set;
/// deterministic in the seed.
pub fn choose_relaxed_rows(problem: &OpfProblem, relax_count: usize, seed: u64) -> Vec<bool> {
    let n = problem.n_inequalities();
    assert!(relax_count <= n, "cannot relax {relax_count} of {n} rows");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1); // keep the mask draw independent of the sample stream
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..relax_count {
        let j = rng.random_range(i..n);
        order.swap(i, j);
    }
    let mut mask = vec![false; n];
    for &i in &order[..relax_count] {
        mask[i] = true;
    }
    mask
}

/// Clone the problem with a relaxation mask drawn per the config.
pub fn with_relaxation(problem: &OpfProblem, cfg: &SamplerConfig) -> OpfProblem {
    let mut relaxed = problem.clone();
    relaxed.relaxed_mask = choose_relaxed_rows(problem, cfg.relax_count, cfg.seed);
    relaxed
}

/// Draw up to `n_samples` relaxation-feasible candidates.
///
/// The problem's own `relaxed_mask` is honored (set it with
/// [`with_relaxation`] when `relax_count > 0`). A partial pool is returned
/// with a warning when the attempt budget runs out; an empty one is an error.
pub fn sample_feasible(
    problem: &OpfProblem,
    cfg: &SamplerConfig,
) -> Result<SolutionPool, SamplerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pool = SolutionPool::new(Vec::with_capacity(cfg.n_samples));
    let mut attempts = 0;
    while pool.len() < cfg.n_samples && attempts < cfg.max_attempts {
        attempts += 1;
        let mut p_g: Vec<f64> = (0..problem.n_gen())
            .map(|g| rng.random_range(problem.p_g_min[g]..=problem.p_g_max[g]))
            .collect();
        if cfg.balance_mode == BalanceMode::SlackAdjust {
            problem.slack_adjust(&mut p_g);
        }
        let candidate = problem.evaluate(&p_g, true);
        if candidate.is_feasible() {
            pool.push(candidate);
        }
    }
    if pool.is_empty() {
        return Err(SamplerError::Exhausted { attempts, relax_count: cfg.relax_count });
    }
    if pool.len() < cfg.n_samples {
        log::warn!(
            "sampler found {} of {} candidates within {} attempts",
            pool.len(),
            cfg.n_samples,
            attempts
        );
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::PowerCase;
    use crate::opf::{build_problem, RowKind};

    fn bundled(name: &str) -> OpfProblem {
        let case =
            PowerCase::from_file(format!("{}/cases/{name}.m", env!("CARGO_MANIFEST_DIR"))).unwrap();
        build_problem(&case, 1.0).unwrap()
    }

    /// Three generators on a chain with no line limits and a wide slack
    /// range, so every slack-adjusted draw is feasible.
    fn unconstrained_problem() -> OpfProblem {
        let text = "\
mpc.baseMVA = 100;
mpc.bus = [
 1 3 0 0 0 0 1 1 0 345 1 1.1 0.9;
 2 1 100 0 0 0 1 1 0 345 1 1.1 0.9;
 3 1 0 0 0 0 1 1 0 345 1 1.1 0.9;
];
mpc.gen = [
 1 0 0 0 0 1 100 1 1000 -1000;
 2 0 0 0 0 1 100 1 4 0;
 3 0 0 0 0 1 100 1 4 0;
];
mpc.branch = [
 1 2 0 0.1 0 0 0 0 0 0 1;
 2 3 0 0.1 0 0 0 0 0 0 1;
];
mpc.gencost = [
 2 0 0 3 0 10 0;
 2 0 0 3 0 20 0;
 2 0 0 3 0 30 0;
];
";
        let case = PowerCase::parse(text).unwrap();
        build_problem(&case, 1.0).unwrap()
    }

    #[test]
    fn unconstrained_toy_accepts_every_attempt() {
        let problem = unconstrained_problem();
        let mut cfg = SamplerConfig::new(200, 42);
        cfg.max_attempts = 200; // acceptance rate must be 100% to fill the pool
        let pool = sample_feasible(&problem, &cfg).unwrap();
        assert_eq!(pool.len(), 200);
    }

    #[test]
    fn case9_samples_pass_unrelaxed_check() {
        let problem = bundled("case9");
        let cfg = SamplerConfig::new(3000, 7);
        let pool = sample_feasible(&problem, &cfg).unwrap();
        assert_eq!(pool.len(), 3000);
        for candidate in pool.iter() {
            // relax_count = 0, so the relaxed check equals the full check
            let full = problem.evaluate(&candidate.p_g, false);
            assert!(full.is_feasible());
            assert!(candidate.balance_residual.abs() <= problem.tol);
        }
    }

    #[test]
    fn relaxed_row_is_the_only_violation() {
        let base = bundled("case57");
        let cfg = SamplerConfig::new(64, 21).with_relax_count(1);
        let problem = with_relaxation(&base, &cfg);
        let relaxed_rows: Vec<usize> = problem
            .relaxed_mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(relaxed_rows.len(), 1);
        let pool = sample_feasible(&problem, &cfg).unwrap();
        for candidate in pool.iter() {
            for row in problem.violated_rows(candidate) {
                assert!(relaxed_rows.contains(&row), "violated non-relaxed row {row}");
            }
        }
    }

    #[test]
    fn relaxation_mask_counts() {
        let problem = bundled("case57");
        let n = problem.n_inequalities();
        assert!(choose_relaxed_rows(&problem, 0, 3).iter().all(|&m| !m));
        assert!(choose_relaxed_rows(&problem, n, 3).iter().all(|&m| m));
        let mask = choose_relaxed_rows(&problem, 19, 3);
        assert_eq!(mask.iter().filter(|&&m| m).count(), 19);
    }

    #[test]
    fn relaxation_mask_deterministic_and_seed_sensitive() {
        let problem = bundled("case39");
        let a = choose_relaxed_rows(&problem, 6, 5);
        let b = choose_relaxed_rows(&problem, 6, 5);
        assert_eq!(a, b);
        let c = choose_relaxed_rows(&problem, 6, 6);
        assert_ne!(a, c);
    }

    #[test]
    fn identical_config_gives_bit_identical_pool() {
        let problem = bundled("case9");
        let cfg = SamplerConfig::new(50, 99);
        let a = sample_feasible(&problem, &cfg).unwrap();
        let b = sample_feasible(&problem, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exhaustion_is_an_error() {
        let mut problem = bundled("case9");
        // Make the balance impossible: demand far beyond total capacity.
        problem.rho = 100.0;
        let mut cfg = SamplerConfig::new(10, 1);
        cfg.max_attempts = 200;
        assert!(matches!(
            sample_feasible(&problem, &cfg),
            Err(SamplerError::Exhausted { .. })
        ));
    }

    #[test]
    fn reject_mode_rejects_unbalanced_draws() {
        let problem = unconstrained_problem();
        let mut cfg = SamplerConfig::new(5, 13);
        cfg.balance_mode = BalanceMode::Reject;
        cfg.max_attempts = 2000;
        // Uniform draws essentially never balance exactly.
        assert!(sample_feasible(&problem, &cfg).is_err());
    }

    #[test]
    fn sampled_marginals_are_uniform() {
        // Non-slack coordinate means converge to the box midpoint within
        // three standard errors.
        let problem = unconstrained_problem();
        let n = 10_000;
        let cfg = SamplerConfig::new(n, 2024);
        let pool = sample_feasible(&problem, &cfg).unwrap();
        assert_eq!(pool.len(), n);
        for g in 0..problem.n_gen() {
            if g == problem.slack_gen {
                continue;
            }
            let (lo, hi) = (problem.p_g_min[g], problem.p_g_max[g]);
            let mean = pool.iter().map(|c| c.p_g[g]).sum::<f64>() / n as f64;
            let se = (hi - lo) / 12f64.sqrt() / (n as f64).sqrt();
            let mid = 0.5 * (lo + hi);
            assert!(
                (mean - mid).abs() <= 3.0 * se,
                "gen {g}: mean {mean} vs midpoint {mid} (se {se})"
            );
        }
    }

    #[test]
    fn relaxing_gen_rows_lets_slack_escape_bounds() {
        // With every inequality relaxed, even a wildly unbalanced-then-fixed
        // draw passes the relaxed check.
        let base = bundled("case30");
        let cfg = SamplerConfig::new(20, 4).with_relax_count(base.n_inequalities());
        let problem = with_relaxation(&base, &cfg);
        let pool = sample_feasible(&problem, &cfg).unwrap();
        assert_eq!(pool.len(), 20);
        let gen_rows: Vec<usize> = problem
            .inequality_rows()
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, RowKind::GenUpper(_) | RowKind::GenLower(_)))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(gen_rows.len(), 4);
    }
}
