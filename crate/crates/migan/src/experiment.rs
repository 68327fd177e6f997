//! Experiment orchestration: seeded multi-trial runs, load-scaling sweeps with
//! model adaptation, and runtime benchmarks against the simplex oracle.
//!
//! All randomness flows from a single master seed; trials fan out across
//! threads with per-trial seeds and results are ordered by trial index, so a
//! fixed seed reproduces result files byte-for-byte (timing columns aside).

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::case::{CaseError, PowerCase};
use crate::gan::{GanError, MiGanState};
use crate::net::TrainHyper;
use crate::opf::{build_problem, ModelError, OpfProblem, SolutionModel};
use crate::recursive::{run_recursive, run_with_state, RecursiveConfig, RecursiveError};
use crate::report::{BenchRow, ReportFormat, TrainReport, TrialResult};
use crate::sampler::{choose_relaxed_rows, sample_feasible, SamplerConfig, SamplerError};
use crate::selector::SolutionPool;
use crate::simplex::{solve_lp, LpStatus};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(transparent)]
    Recursive(#[from] RecursiveError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{case} is {status:?} at rho = {rho}")]
    NotSolvable { case: String, rho: f64, status: LpStatus },
    #[error("config file {path}: {msg}")]
    Config { path: String, msg: String },
}

impl ExperimentError {
    /// Process exit code: 2 for parse/validation problems, 3 for infeasible or
    /// failed runs.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Case(_) | ExperimentError::Model(_) | ExperimentError::Config { .. } => 2,
            _ => 3,
        }
    }
}

/// Everything a seeded run needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub case_path: PathBuf,
    pub rho: f64,
    pub seed: u64,
    pub trials: usize,
    /// Initial feasible samples (also the actual-set size).
    pub n_samples: usize,
    /// Relaxed inequality rows while sampling/training; per-case default when
    /// unset.
    pub relax_count: Option<usize>,
    pub eta: f64,
    pub gradient_enabled: bool,
    pub hyper: TrainHyper,
    /// Candidates emitted per recursive iteration.
    pub emit_count: usize,
    pub max_outer: usize,
    /// Feasible samples added when adapting to a new load level.
    pub fresh_samples: usize,
    pub out_dir: Option<PathBuf>,
    pub format: ReportFormat,
}

impl RunConfig {
    pub fn new(case_path: impl Into<PathBuf>) -> Self {
        Self {
            case_path: case_path.into(),
            rho: 1.0,
            seed: 0,
            trials: 5,
            n_samples: 3000,
            relax_count: None,
            eta: 1e-3,
            gradient_enabled: true,
            hyper: TrainHyper::default(),
            emit_count: 300,
            max_outer: 12,
            fresh_samples: 1000,
            out_dir: None,
            format: ReportFormat::Csv,
        }
    }

    fn recursive_cfg(&self) -> RecursiveConfig {
        RecursiveConfig {
            m: self.n_samples,
            h: self.emit_count,
            max_outer: self.max_outer,
            eta: self.eta,
            gradient_enabled: self.gradient_enabled,
            hyper: self.hyper.clone(),
            cold_start: false,
            delta: 0.0,
        }
    }
}

/// Relaxed-row defaults per shipped case.
pub fn default_relax_count(case_name: &str) -> usize {
    match case_name {
        "case39" => 6,
        "case57" => 1,
        "case118" => 19,
        "case162" => 49,
        _ => 0,
    }
}

/// Accept a filesystem path or the bare name of a bundled case.
pub fn resolve_case(arg: &str) -> PathBuf {
    let direct = PathBuf::from(arg);
    if direct.exists() {
        return direct;
    }
    Path::new(env!("CARGO_MANIFEST_DIR")).join("cases").join(format!("{arg}.m"))
}

/// Stateless per-trial seed derivation (splitmix64 over the master seed).
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn oracle_objective(case: &PowerCase, problem: &OpfProblem) -> Result<f64, ExperimentError> {
    let solution = solve_lp(problem);
    if solution.status != LpStatus::Optimal {
        return Err(ExperimentError::NotSolvable {
            case: case.name.clone(),
            rho: problem.rho,
            status: solution.status,
        });
    }
    Ok(solution.objective_opt)
}

fn run_one_trial(
    case: &PowerCase,
    cfg: &RunConfig,
    oracle: f64,
    relax: usize,
    trial: usize,
) -> Result<(TrialResult, crate::recursive::RecursiveOutcome), ExperimentError> {
    let seed = trial_seed(cfg.seed, trial as u64);
    let mut problem = build_problem(case, cfg.rho)?;
    problem.relaxed_mask = choose_relaxed_rows(&problem, relax, seed);
    let sampler = SamplerConfig::new(cfg.n_samples, seed).with_relax_count(relax);
    let started = Instant::now();
    let pool = sample_feasible(&problem, &sampler)?;
    let outcome = run_recursive(&problem, pool, &cfg.recursive_cfg(), seed)?;
    let seconds = started.elapsed().as_secs_f64();
    let row = TrialResult::new(
        trial,
        cfg.rho,
        oracle,
        outcome.best.clone(),
        outcome.outer_iterations,
        seconds,
    );
    Ok((row, outcome))
}

/// Independent seeded trials at a fixed load level; trials run on worker
/// threads and the report rows are ordered by trial index. When an output
/// directory is configured, per-trial loss curves and outer-iteration logs are
/// written alongside the report.
pub fn run_trials(cfg: &RunConfig) -> Result<TrainReport, ExperimentError> {
    assert!(cfg.trials >= 1);
    let case = PowerCase::from_file(&cfg.case_path)?;
    let base = build_problem(&case, cfg.rho)?;
    let oracle = oracle_objective(&case, &base)?;
    let relax = cfg.relax_count.unwrap_or_else(|| default_relax_count(&case.name));

    type TrialOut = Result<(TrialResult, crate::recursive::RecursiveOutcome), ExperimentError>;
    let results: Vec<TrialOut> = std::thread::scope(|scope| {
        let handles: Vec<_> = (1..=cfg.trials)
            .map(|trial| {
                let case = &case;
                scope.spawn(move || run_one_trial(case, cfg, oracle, relax, trial))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("trial thread panicked")).collect()
    });

    let mut trials = Vec::with_capacity(cfg.trials);
    for result in results {
        let (row, outcome) = result?;
        if let Some(dir) = &cfg.out_dir {
            std::fs::create_dir_all(dir)?;
            let loss = std::fs::File::create(
                dir.join(format!("{}_trial{}_loss.csv", case.name, row.trial)),
            )?;
            crate::report::write_loss_csv(&outcome.losses, loss)?;
            let outer = std::fs::File::create(
                dir.join(format!("{}_trial{}_outer.csv", case.name, row.trial)),
            )?;
            crate::report::write_outer_csv(&outcome.history, outer)?;
        }
        trials.push(row);
    }
    Ok(TrainReport::new(case.name.clone(), trials))
}

/// Train at the base load, then walk the given load levels in order, adapting
/// the trained state at each step. One report row per level.
pub fn run_sweep(cfg: &RunConfig, rhos: &[f64]) -> Result<TrainReport, ExperimentError> {
    let case = PowerCase::from_file(&cfg.case_path)?;
    let relax = cfg.relax_count.unwrap_or_else(|| default_relax_count(&case.name));
    let recursive_cfg = cfg.recursive_cfg();

    let mut base_problem = build_problem(&case, 1.0)?;
    let mask = choose_relaxed_rows(&base_problem, relax, cfg.seed);
    base_problem.relaxed_mask = mask.clone();
    let base_oracle = oracle_objective(&case, &base_problem)?;

    let sampler = SamplerConfig::new(cfg.n_samples, cfg.seed).with_relax_count(relax);
    let started = Instant::now();
    let pool = sample_feasible(&base_problem, &sampler)?;
    let mut state =
        MiGanState::init(&base_problem, pool.clone(), cfg.hyper.clone(), cfg.seed)?;
    state.eta = cfg.eta;
    state.gradient_enabled = cfg.gradient_enabled;
    let base_outcome = run_with_state(&base_problem, &mut state, pool, &recursive_cfg)?;
    let base_seconds = started.elapsed().as_secs_f64();

    let mut actual = base_outcome.actual.clone();
    let mut rows = Vec::with_capacity(rhos.len());
    for (step, &rho) in rhos.iter().enumerate() {
        if rho == 1.0 {
            rows.push(TrialResult::new(
                step + 1,
                1.0,
                base_oracle,
                base_outcome.best.clone(),
                base_outcome.outer_iterations,
                base_seconds,
            ));
            continue;
        }
        let mut problem = build_problem(&case, rho)?;
        problem.relaxed_mask = mask.clone();
        let oracle = oracle_objective(&case, &problem)?;

        let started = Instant::now();
        let before = state.historical_pool.len();
        state.adapt_to_load(&problem, cfg.fresh_samples, trial_seed(cfg.seed, 1000 + step as u64))?;
        let fresh = state.historical_pool.candidates()[before..].to_vec();

        // Surviving actual candidates re-judged under the new load, plus the
        // freshly sampled ones.
        let mut next_actual: Vec<_> = actual
            .iter()
            .map(|c| problem.evaluate(&c.p_g, true))
            .filter(|c| c.is_feasible())
            .collect();
        next_actual.extend(fresh);
        let next_actual = SolutionPool::new(next_actual);

        let outcome = run_with_state(&problem, &mut state, next_actual, &recursive_cfg)?;
        let seconds = started.elapsed().as_secs_f64();
        rows.push(TrialResult::new(
            step + 1,
            rho,
            oracle,
            outcome.best.clone(),
            outcome.outer_iterations,
            seconds,
        ));
        actual = outcome.actual;
    }
    Ok(TrainReport::new(case.name.clone(), rows))
}

/// Wall-clock comparison: seconds per exact solve versus seconds per recursive
/// iteration of the adversarial method, one row per (case, method).
pub fn run_bench(case_args: &[String], cfg: &RunConfig) -> Result<Vec<BenchRow>, ExperimentError> {
    let mut rows = Vec::new();
    for arg in case_args {
        let case = PowerCase::from_file(resolve_case(arg))?;
        let problem = build_problem(&case, cfg.rho)?;

        let solution = solve_lp(&problem); // warm the caches before timing
        if solution.status != LpStatus::Optimal {
            return Err(ExperimentError::NotSolvable {
                case: case.name.clone(),
                rho: cfg.rho,
                status: solution.status,
            });
        }
        const REPS: u32 = 5;
        let started = Instant::now();
        for _ in 0..REPS {
            let _ = solve_lp(&problem);
        }
        rows.push(BenchRow {
            case: case.name.clone(),
            method: "simplex".into(),
            seconds: started.elapsed().as_secs_f64() / f64::from(REPS),
            objective: solution.objective_opt,
        });

        let relax = cfg.relax_count.unwrap_or_else(|| default_relax_count(&case.name));
        let mut relaxed = problem.clone();
        relaxed.relaxed_mask = choose_relaxed_rows(&relaxed, relax, cfg.seed);
        let sampler = SamplerConfig::new(cfg.n_samples, cfg.seed).with_relax_count(relax);
        let pool = sample_feasible(&relaxed, &sampler)?;
        let started = Instant::now();
        let outcome = run_recursive(&relaxed, pool, &cfg.recursive_cfg(), cfg.seed)?;
        rows.push(BenchRow {
            case: case.name.clone(),
            method: "migan".into(),
            seconds: started.elapsed().as_secs_f64() / outcome.outer_iterations.max(1) as f64,
            objective: outcome.best.objective,
        });
    }
    Ok(rows)
}

/// Apply a flat `key = value` manifest over a config. Unknown keys are
/// rejected so typos do not silently fall back to defaults.
pub fn apply_config_file(cfg: &mut RunConfig, path: &Path) -> Result<(), ExperimentError> {
    let err = |msg: String| ExperimentError::Config {
        path: path.display().to_string(),
        msg,
    };
    let text = std::fs::read_to_string(path)?;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(format!("line {}: expected key = value", idx + 1)));
        };
        let (key, value) = (key.trim(), value.trim());
        let parse_f64 = || value.parse::<f64>().map_err(|_| err(format!("{key}: bad number '{value}'")));
        let parse_usize =
            || value.parse::<usize>().map_err(|_| err(format!("{key}: bad count '{value}'")));
        let parse_u64 = || value.parse::<u64>().map_err(|_| err(format!("{key}: bad seed '{value}'")));
        let parse_bool =
            || value.parse::<bool>().map_err(|_| err(format!("{key}: bad flag '{value}'")));
        match key {
            "rho" => cfg.rho = parse_f64()?,
            "seed" => cfg.seed = parse_u64()?,
            "trials" => cfg.trials = parse_usize()?,
            "samples" => cfg.n_samples = parse_usize()?,
            "relax" => cfg.relax_count = Some(parse_usize()?),
            "eta" => cfg.eta = parse_f64()?,
            "iterations" => cfg.hyper.iterations = parse_usize()?,
            "batch" => cfg.hyper.batch_size = parse_usize()?,
            "learning-rate" => cfg.hyper.learning_rate = parse_f64()?,
            "early-stop" => cfg.hyper.early_stop = parse_bool()?,
            "emit" => cfg.emit_count = parse_usize()?,
            "max-outer" => cfg.max_outer = parse_usize()?,
            "fresh" => cfg.fresh_samples = parse_usize()?,
            "gradient-layer" => cfg.gradient_enabled = parse_bool()?,
            "format" => {
                cfg.format = value.parse().map_err(|e: String| err(e))?;
            }
            other => return Err(err(format!("unknown key '{other}'"))),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast_cfg(case: &str) -> RunConfig {
        let mut cfg = RunConfig::new(resolve_case(case));
        cfg.trials = 2;
        cfg.n_samples = 150;
        cfg.emit_count = 40;
        cfg.hyper = TrainHyper {
            batch_size: 10,
            iterations: 25,
            hidden_width: 16,
            noise_dim: 8,
            learning_rate: 1e-3,
            ..TrainHyper::default()
        };
        cfg.fresh_samples = 60;
        cfg.seed = 11;
        cfg
    }

    #[test]
    fn bundled_names_resolve() {
        assert!(resolve_case("case9").exists());
        assert!(resolve_case("case57").exists());
    }

    #[test]
    fn per_case_relax_defaults() {
        assert_eq!(default_relax_count("case9"), 0);
        assert_eq!(default_relax_count("case30"), 0);
        assert_eq!(default_relax_count("case39"), 6);
        assert_eq!(default_relax_count("case57"), 1);
        assert_eq!(default_relax_count("case118"), 19);
        assert_eq!(default_relax_count("case162"), 49);
    }

    #[test]
    fn trial_seeds_differ() {
        let a = trial_seed(42, 1);
        let b = trial_seed(42, 2);
        let c = trial_seed(43, 1);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, trial_seed(42, 1));
    }

    #[test]
    fn trials_report_is_deterministic_modulo_timing() {
        let cfg = fast_cfg("case9");
        let a = run_trials(&cfg).unwrap();
        let b = run_trials(&cfg).unwrap();
        assert_eq!(a.case, b.case);
        for (ta, tb) in a.trials.iter().zip(&b.trials) {
            assert_eq!(ta.objective, tb.objective);
            assert_eq!(ta.best, tb.best);
            assert_eq!(ta.recursive_iters, tb.recursive_iters);
        }
    }

    #[test]
    fn trial_rows_are_ordered_and_feasible() {
        let cfg = fast_cfg("case9");
        let report = run_trials(&cfg).unwrap();
        assert_eq!(report.trials.len(), 2);
        for (i, t) in report.trials.iter().enumerate() {
            assert_eq!(t.trial, i + 1);
            assert!(t.best.is_feasible());
            assert!(t.mae_pct >= 0.0);
        }
    }

    #[test]
    fn sweep_single_unit_rho_equals_base_run() {
        let cfg = fast_cfg("case9");
        let sweep = run_sweep(&cfg, &[1.0]).unwrap();
        assert_eq!(sweep.trials.len(), 1);
        assert_eq!(sweep.trials[0].rho, 1.0);
        assert!(sweep.trials[0].best.is_feasible());
    }

    #[test]
    fn sweep_adapts_to_scaled_load() {
        let cfg = fast_cfg("case9");
        let sweep = run_sweep(&cfg, &[1.1, 1.2]).unwrap();
        assert_eq!(sweep.trials.len(), 2);
        for row in &sweep.trials {
            // Feasible under its own rho, judged with the full constraint set.
            let case = PowerCase::from_file(&cfg.case_path).unwrap();
            let problem = build_problem(&case, row.rho).unwrap();
            let strict = problem.evaluate(&row.best.p_g, false);
            assert!(strict.is_feasible(), "rho {}", row.rho);
        }
    }

    #[test]
    fn bench_emits_two_rows_per_case() {
        let mut cfg = fast_cfg("case9");
        cfg.n_samples = 100;
        let rows = run_bench(&["case9".into()], &cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].method, "simplex");
        assert_eq!(rows[1].method, "migan");
        assert!((rows[0].objective - 362.0).abs() < 1e-9);
        assert!(rows[1].seconds > 0.0);
    }

    #[test]
    fn config_file_round_trip_and_unknown_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(
            &path,
            "# manifest\nrho = 1.25\ntrials = 3\nrelax = 2\nformat = json\ngradient-layer = false\n",
        )
        .unwrap();
        let mut cfg = RunConfig::new("x");
        apply_config_file(&mut cfg, &path).unwrap();
        assert_eq!(cfg.rho, 1.25);
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.relax_count, Some(2));
        assert_eq!(cfg.format, ReportFormat::Json);
        assert!(!cfg.gradient_enabled);

        std::fs::write(&path, "bogus = 1\n").unwrap();
        let e = apply_config_file(&mut cfg, &path).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
