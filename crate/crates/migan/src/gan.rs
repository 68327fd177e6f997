//! Adversarial training with the model-informed selector in the loop.
//!
//! Each iteration: the generator proposes a batch of dispatches from noise,
//! the batch is decoded (slack generator reset to balance the load, angles
//! recovered), the selector merges it into the saved pool, and the Wasserstein
//! critic is updated on historical candidates versus the selector output with
//! weight clipping. The generator then follows the critic's score of its raw
//! decoded batch; the selector itself is not differentiated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Mat;
use crate::net::{MlpNet, TrainHyper};
use crate::opf::{Candidate, Feasibility, OpfProblem, SolutionModel};
use crate::sampler::{sample_feasible, SamplerConfig, SamplerError};
use crate::selector::{select, SelectorError, SolutionPool};

/// Placeholder dispatch value for the initial saved set; any real generated
/// batch displaces it in the first iteration.
pub const SENTINEL_DISPATCH: f64 = 1e6;
pub const SENTINEL_OBJECTIVE: f64 = 1e18;

#[derive(Debug, Error)]
pub enum GanError {
    #[error("historical pool must not be empty")]
    EmptyHistorical,
    #[error(transparent)]
    Selector(#[from] SelectorError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub l_generator: f64,
    pub l_critic: f64,
}

/// Everything one training run owns.
#[derive(Debug, Clone)]
pub struct MiGanState {
    pub generator: MlpNet,
    pub discriminator: MlpNet,
    /// The saved set carried across iterations.
    pub saved_pool: SolutionPool,
    /// Candidates treated as real data by the critic.
    pub historical_pool: SolutionPool,
    pub hyper: TrainHyper,
    /// Step size of the gradient-guided selector layer.
    pub eta: f64,
    pub gradient_enabled: bool,
    /// Map raw generator outputs affinely onto the dispatch box before
    /// decoding (off by default; raw outputs follow the critic directly).
    pub output_rescale: bool,
    pub loss_history: Vec<LossRecord>,
    last_generated: Option<SolutionPool>,
    rng: ChaCha8Rng,
}

impl MiGanState {
    /// Fresh nets and a sentinel-filled saved pool.
    pub fn init(
        problem: &OpfProblem,
        historical: SolutionPool,
        hyper: TrainHyper,
        seed: u64,
    ) -> Result<Self, GanError> {
        if historical.is_empty() {
            return Err(GanError::EmptyHistorical);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        let generator = MlpNet::generator(problem.n_gen(), &hyper, &mut rng);
        let discriminator = MlpNet::discriminator(problem.n_gen() + problem.n_bus(), &hyper, &mut rng);
        let sentinel = Candidate {
            p_g: vec![SENTINEL_DISPATCH; problem.n_gen()],
            theta: vec![0.0; problem.n_bus()],
            objective: SENTINEL_OBJECTIVE,
            feasible: Feasibility::Infeasible,
            balance_residual: f64::INFINITY,
        };
        Ok(Self {
            generator,
            discriminator,
            saved_pool: SolutionPool::new(vec![sentinel; hyper.batch_size]),
            historical_pool: historical,
            hyper,
            eta: 1e-3,
            gradient_enabled: true,
            output_rescale: false,
            loss_history: Vec::new(),
            last_generated: None,
            rng,
        })
    }

    /// Generated pool from the most recent iteration, if any.
    pub fn last_generated(&self) -> Option<&SolutionPool> {
        self.last_generated.as_ref()
    }

    /// Deterministic seed derived from this state's stream, for spawning
    /// follow-up states.
    pub fn fork_seed(&mut self) -> u64 {
        self.rng.random()
    }

    fn noise(&mut self, rows: usize) -> Mat {
        let dim = self.hyper.noise_dim;
        let mut z = Mat::zeros(rows, dim);
        for v in z.data_mut() {
            *v = self.rng.sample(StandardNormal);
        }
        z
    }

    /// Raw generator output row -> balanced dispatch vector.
    fn decode_dispatch(&self, problem: &OpfProblem, raw: &[f64]) -> Vec<f64> {
        let mut p_g = raw.to_vec();
        if self.output_rescale {
            for (g, v) in p_g.iter_mut().enumerate() {
                let center = 0.5 * (problem.p_g_min[g] + problem.p_g_max[g]);
                let half = 0.5 * (problem.p_g_max[g] - problem.p_g_min[g]);
                *v = center + *v * half;
            }
        }
        problem.slack_adjust(&mut p_g);
        p_g
    }

    fn decode_batch(&self, problem: &OpfProblem, raw: &Mat, honor_relaxation: bool) -> SolutionPool {
        let candidates = (0..raw.rows())
            .map(|r| {
                let p_g = self.decode_dispatch(problem, raw.row(r));
                problem.evaluate(&p_g, honor_relaxation)
            })
            .collect();
        SolutionPool::new(candidates)
    }

    /// Critic input features: dispatch followed by recovered angles.
    fn featurize(pool: &SolutionPool) -> Mat {
        let n = pool.len();
        let dim = pool[0].p_g.len() + pool[0].theta.len();
        let mut out = Mat::zeros(n, dim);
        for (r, c) in pool.iter().enumerate() {
            let row = out.row_mut(r);
            row[..c.p_g.len()].copy_from_slice(&c.p_g);
            row[c.p_g.len()..].copy_from_slice(&c.theta);
        }
        out
    }

    /// Same-length draw from the historical pool: without replacement when it
    /// is large enough, with replacement otherwise.
    fn draw_historical(&mut self, len: usize) -> SolutionPool {
        let n = self.historical_pool.len();
        let picks: Vec<usize> = if n >= len {
            let mut order: Vec<usize> = (0..n).collect();
            for i in 0..len {
                let j = self.rng.random_range(i..n);
                order.swap(i, j);
            }
            order[..len].to_vec()
        } else {
            (0..len).map(|_| self.rng.random_range(0..n)).collect()
        };
        SolutionPool::new(picks.iter().map(|&i| self.historical_pool[i].clone()).collect())
    }

    /// One iteration: generate, select, update critic and generator, save.
    pub fn train_epoch(&mut self, problem: &OpfProblem) -> Result<(), GanError> {
        let batch = self.hyper.batch_size;
        let z = self.noise(batch);
        let raw = self.generator.forward(&z);
        let generated = self.decode_batch(problem, &raw, true);
        let historical = self.draw_historical(batch);

        let updated = select(
            &generated,
            &self.saved_pool,
            &historical,
            problem,
            self.eta,
            self.gradient_enabled,
            true,
        )?;

        // Critic: difference of means between selector output and historical
        // data, parameters clamped after each step.
        let fake = Self::featurize(&updated);
        let real = Self::featurize(&historical);
        let mut l_critic = 0.0;
        for step in 0..self.hyper.critic_steps.max(1) {
            let mut stacked = Mat::zeros(2 * batch, fake.cols());
            for r in 0..batch {
                stacked.row_mut(r).copy_from_slice(fake.row(r));
                stacked.row_mut(batch + r).copy_from_slice(real.row(r));
            }
            let scores = self.discriminator.forward(&stacked);
            let mean_fake: f64 =
                (0..batch).map(|r| scores.get(r, 0)).sum::<f64>() / batch as f64;
            let mean_real: f64 =
                (0..batch).map(|r| scores.get(batch + r, 0)).sum::<f64>() / batch as f64;
            if step == 0 {
                l_critic = mean_fake - mean_real;
            }
            let mut upstream = Mat::zeros(2 * batch, 1);
            for r in 0..batch {
                upstream.set(r, 0, 1.0 / batch as f64);
                upstream.set(batch + r, 0, -1.0 / batch as f64);
            }
            self.discriminator
                .backward(&upstream)
                .expect("critic forward precedes backward");
            self.discriminator
                .rmsprop_step(&self.hyper, Some(self.hyper.clip_value));
        }

        // Generator: follow the critic's score of the raw decoded batch. The
        // decode is linear (slack closure plus angle recovery), so its
        // transpose chains the critic's input gradient back to the raw output.
        let gen_features = Self::featurize(&generated);
        let scores = self.discriminator.forward(&gen_features);
        let l_generator =
            -(0..batch).map(|r| scores.get(r, 0)).sum::<f64>() / batch as f64;
        let mut upstream = Mat::zeros(batch, 1);
        for r in 0..batch {
            upstream.set(r, 0, -1.0 / batch as f64);
        }
        let input_grad = self
            .discriminator
            .backward(&upstream)
            .expect("critic forward precedes backward");

        let n_g = problem.n_gen();
        let theta_sens = problem.theta_sensitivity();
        let mut gen_upstream = Mat::zeros(batch, n_g);
        for r in 0..batch {
            let row = input_grad.row(r);
            let g_pg = &row[..n_g];
            let g_theta = &row[n_g..];
            let chained = theta_sens.tr_matvec(g_theta);
            let mut total: Vec<f64> = g_pg.iter().zip(&chained).map(|(a, b)| a + b).collect();
            let slack_term = total[problem.slack_gen];
            for (g, t) in total.iter_mut().enumerate() {
                *t = if g == problem.slack_gen { 0.0 } else { *t - slack_term };
            }
            if self.output_rescale {
                for (g, t) in total.iter_mut().enumerate() {
                    *t *= 0.5 * (problem.p_g_max[g] - problem.p_g_min[g]);
                }
            }
            gen_upstream.row_mut(r).copy_from_slice(&total);
        }
        self.generator
            .backward(&gen_upstream)
            .expect("generator forward precedes backward");
        self.generator.rmsprop_step(&self.hyper, None);

        self.saved_pool = updated;
        self.last_generated = Some(generated);
        self.loss_history.push(LossRecord { l_generator, l_critic });
        Ok(())
    }

    /// Run the configured number of iterations, optionally stopping early when
    /// the moving averages of both losses flatten out.
    pub fn train(&mut self, problem: &OpfProblem) -> Result<(), GanError> {
        const WINDOW: usize = 100;
        const FLAT_TOL: f64 = 1e-4;
        const FLAT_RUN: usize = 200;
        let mut streak = 0usize;
        let mut prev_ma: Option<(f64, f64)> = None;
        for _ in 0..self.hyper.iterations {
            self.train_epoch(problem)?;
            if !self.hyper.early_stop {
                continue;
            }
            let n = self.loss_history.len();
            if n < WINDOW {
                continue;
            }
            let tail = &self.loss_history[n - WINDOW..];
            let ma_g = tail.iter().map(|l| l.l_generator).sum::<f64>() / WINDOW as f64;
            let ma_c = tail.iter().map(|l| l.l_critic).sum::<f64>() / WINDOW as f64;
            if let Some((pg, pc)) = prev_ma {
                if (ma_g - pg).abs() < FLAT_TOL && (ma_c - pc).abs() < FLAT_TOL {
                    streak += 1;
                } else {
                    streak = 0;
                }
                if streak >= FLAT_RUN {
                    break;
                }
            }
            prev_ma = Some((ma_g, ma_c));
        }
        Ok(())
    }

    /// Sample `h` candidates from the trained generator; verdicts use the
    /// full, un-relaxed constraint set. Infeasible samples are kept but
    /// flagged, so callers can filter.
    pub fn emit_candidates(&mut self, problem: &OpfProblem, h: usize) -> SolutionPool {
        if h == 0 {
            return SolutionPool::new(Vec::new());
        }
        let z = self.noise(h);
        let raw = self.generator.forward_frozen(&z);
        self.decode_batch(problem, &raw, false)
    }

    /// Move a trained state to a rescaled load: the saved pool is re-judged
    /// under the new problem and freshly sampled feasible candidates extend
    /// the historical pool. Training then continues against the new problem.
    pub fn adapt_to_load(
        &mut self,
        problem_new: &OpfProblem,
        fresh_samples: usize,
        sampler_seed: u64,
    ) -> Result<(), GanError> {
        let rejudged: Vec<Candidate> = self
            .saved_pool
            .iter()
            .map(|c| problem_new.evaluate(&c.p_g, true))
            .collect();
        self.saved_pool = SolutionPool::new(rejudged);
        if fresh_samples > 0 {
            let cfg = SamplerConfig::new(fresh_samples, sampler_seed);
            let fresh = sample_feasible(problem_new, &cfg)?;
            for candidate in fresh.into_candidates() {
                self.historical_pool.push(candidate);
            }
        }
        Ok(())
    }
}
