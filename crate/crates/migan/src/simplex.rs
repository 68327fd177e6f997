//! Exact LP oracle: a dense bounded-variable revised simplex.
//!
//! The dispatch model is reduced to an LP purely in `p_g` by eliminating the
//! angles: each limited line becomes an auxiliary bounded variable tied to the
//! dispatch through the flow sensitivities, and the balance equation becomes a
//! single equality row. The solver is a textbook two-phase simplex over
//! `min c'x  s.t.  A x = b,  l <= x <= u`, refactorizing the basis every
//! iteration — the problems here are small enough that simplicity wins.

use crate::linalg::{dot, lu_factorize, Mat};
use crate::opf::OpfProblem;

const COST_EPS: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// General-form LP: `min c'x` subject to `a x = b` and box bounds.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a: Mat,
    pub b: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// Row duals from the final basis.
    pub y: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
    pub objective: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    FreeZero,
}

struct Solver<'a> {
    lp: &'a LinearProgram,
    n_struct: usize,
    n_total: usize,
    m: usize,
    art_sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<VarState>,
    x: Vec<f64>,
    basic_vars: Vec<usize>,
    iterations: usize,
    bland_after: usize,
}

impl<'a> Solver<'a> {
    fn new(lp: &'a LinearProgram) -> Self {
        let m = lp.a.rows();
        let n = lp.c.len();
        assert_eq!(lp.a.cols(), n);
        assert_eq!(lp.b.len(), m);
        let n_total = n + m;

        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        lower.resize(n_total, 0.0);
        upper.resize(n_total, f64::INFINITY);

        let mut state = vec![VarState::FreeZero; n_total];
        let mut x = vec![0.0; n_total];
        for j in 0..n {
            if lower[j].is_finite() {
                x[j] = lower[j];
                state[j] = VarState::AtLower;
            } else if upper[j].is_finite() {
                x[j] = upper[j];
                state[j] = VarState::AtUpper;
            }
        }

        // One artificial per row, signed so its starting value is nonnegative.
        let mut residual = lp.b.clone();
        for j in 0..n {
            if x[j] != 0.0 {
                for i in 0..m {
                    residual[i] -= lp.a.get(i, j) * x[j];
                }
            }
        }
        let mut art_sign = vec![1.0; m];
        let mut basic_vars = Vec::with_capacity(m);
        for i in 0..m {
            if residual[i] < 0.0 {
                art_sign[i] = -1.0;
            }
            x[n + i] = residual[i].abs();
            state[n + i] = VarState::Basic;
            basic_vars.push(n + i);
        }

        let bland_after = 500 + 10 * n_total;
        Self {
            lp,
            n_struct: n,
            n_total,
            m,
            art_sign,
            lower,
            upper,
            state,
            x,
            basic_vars,
            iterations: 0,
            bland_after,
        }
    }

    fn column(&self, j: usize) -> Vec<f64> {
        if j < self.n_struct {
            self.lp.a.column(j)
        } else {
            let mut col = vec![0.0; self.m];
            col[j - self.n_struct] = self.art_sign[j - self.n_struct];
            col
        }
    }

    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n_struct {
            (0..self.m).map(|i| y[i] * self.lp.a.get(i, j)).sum()
        } else {
            y[j - self.n_struct] * self.art_sign[j - self.n_struct]
        }
    }

    /// Run the simplex loop for the given cost vector. Returns `false` when
    /// the problem is unbounded in the improving direction.
    fn iterate(&mut self, costs: &[f64]) -> bool {
        let max_iterations = 100_000 + 100 * self.n_total;
        loop {
            self.iterations += 1;
            assert!(
                self.iterations < max_iterations,
                "simplex did not terminate within {max_iterations} iterations"
            );
            let bland = self.iterations > self.bland_after;

            // Refactorize and recompute basic values from scratch; this keeps
            // drift out at negligible cost for these sizes.
            let mut bmat = Mat::zeros(self.m, self.m);
            for (slot, &v) in self.basic_vars.iter().enumerate() {
                let col = self.column(v);
                for i in 0..self.m {
                    bmat.set(i, slot, col[i]);
                }
            }
            let lu = lu_factorize(&bmat).expect("simplex basis became singular");
            let mut rhs = self.lp.b.clone();
            for j in 0..self.n_total {
                if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                    let col = self.column(j);
                    for i in 0..self.m {
                        rhs[i] -= col[i] * self.x[j];
                    }
                }
            }
            let xb = lu.solve(&rhs);
            for (slot, &v) in self.basic_vars.iter().enumerate() {
                self.x[v] = xb[slot];
            }

            let cb: Vec<f64> = self.basic_vars.iter().map(|&v| costs[v]).collect();
            let y = lu.solve_transpose(&cb);

            // Pricing: Dantzig's rule, Bland's rule past the threshold.
            let mut entering: Option<(usize, f64, f64)> = None; // (var, dir, score)
            for j in 0..self.n_total {
                if self.state[j] == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = costs[j] - self.col_dot(j, &y);
                let candidate = match self.state[j] {
                    VarState::AtLower if d < -COST_EPS => Some((1.0, -d)),
                    VarState::AtUpper if d > COST_EPS => Some((-1.0, d)),
                    VarState::FreeZero if d.abs() > COST_EPS => {
                        Some((if d < 0.0 { 1.0 } else { -1.0 }, d.abs()))
                    }
                    _ => None,
                };
                if let Some((dir, score)) = candidate {
                    if bland {
                        entering = Some((j, dir, score));
                        break;
                    }
                    if entering.map_or(true, |(_, _, best)| score > best) {
                        entering = Some((j, dir, score));
                    }
                }
            }
            let Some((e, dir, _)) = entering else {
                return true; // optimal for these costs
            };

            let w = lu.solve(&self.column(e));

            // Ratio test: the entering variable moves by t >= 0 in `dir`.
            let mut t_best = self.upper[e] - self.lower[e]; // bound flip distance
            if self.state[e] == VarState::FreeZero {
                t_best = f64::INFINITY;
            }
            let mut leaving: Option<(usize, VarState)> = None;
            let mut leave_weight = 0.0;
            for i in 0..self.m {
                let delta = dir * w[i];
                let bv = self.basic_vars[i];
                let (t, hit) = if delta > PIVOT_EPS {
                    if !self.lower[bv].is_finite() {
                        continue;
                    }
                    ((self.x[bv] - self.lower[bv]) / delta, VarState::AtLower)
                } else if delta < -PIVOT_EPS {
                    if !self.upper[bv].is_finite() {
                        continue;
                    }
                    ((self.upper[bv] - self.x[bv]) / -delta, VarState::AtUpper)
                } else {
                    continue;
                };
                let t = t.max(0.0);
                let better = match leaving {
                    _ if t < t_best - 1e-12 => true,
                    None => t <= t_best + 1e-12,
                    Some((prev, _)) if t <= t_best + 1e-12 => {
                        if bland {
                            bv < self.basic_vars[prev]
                        } else {
                            // Prefer the largest pivot magnitude for stability.
                            delta.abs() > leave_weight
                        }
                    }
                    _ => false,
                };
                if better {
                    t_best = t.min(t_best);
                    leaving = Some((i, hit));
                    leave_weight = delta.abs();
                }
            }

            if !t_best.is_finite() {
                return false; // unbounded ray
            }
            let t = t_best.max(0.0);

            self.x[e] += dir * t;
            for i in 0..self.m {
                let bv = self.basic_vars[i];
                self.x[bv] -= t * dir * w[i];
            }
            match leaving {
                None => {
                    // Bound flip, basis unchanged.
                    self.state[e] = match self.state[e] {
                        VarState::AtLower => VarState::AtUpper,
                        VarState::AtUpper => VarState::AtLower,
                        other => other,
                    };
                    self.x[e] = match self.state[e] {
                        VarState::AtLower => self.lower[e],
                        VarState::AtUpper => self.upper[e],
                        _ => self.x[e],
                    };
                }
                Some((row, hit)) => {
                    let out = self.basic_vars[row];
                    self.state[out] = hit;
                    self.x[out] = match hit {
                        VarState::AtLower => self.lower[out],
                        VarState::AtUpper => self.upper[out],
                        _ => unreachable!(),
                    };
                    self.basic_vars[row] = e;
                    self.state[e] = VarState::Basic;
                }
            }
        }
    }

    fn duals(&self, costs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut bmat = Mat::zeros(self.m, self.m);
        for (slot, &v) in self.basic_vars.iter().enumerate() {
            let col = self.column(v);
            for i in 0..self.m {
                bmat.set(i, slot, col[i]);
            }
        }
        let y = if self.m > 0 {
            let lu = lu_factorize(&bmat).expect("simplex basis became singular");
            let cb: Vec<f64> = self.basic_vars.iter().map(|&v| costs[v]).collect();
            lu.solve_transpose(&cb)
        } else {
            Vec::new()
        };
        let d: Vec<f64> = (0..self.n_struct)
            .map(|j| costs[j] - self.col_dot(j, &y))
            .collect();
        (y, d)
    }
}

/// Solve a general bounded LP.
pub fn solve(lp: &LinearProgram) -> SimplexResult {
    let mut solver = Solver::new(lp);
    let n = solver.n_struct;

    // Phase 1: minimize the sum of artificials.
    let mut phase1_costs = vec![0.0; solver.n_total];
    for j in n..solver.n_total {
        phase1_costs[j] = 1.0;
    }
    solver.iterate(&phase1_costs);
    let infeasibility: f64 = (n..solver.n_total).map(|j| solver.x[j]).sum();
    let scale = 1.0 + lp.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if infeasibility > 1e-8 * scale {
        return SimplexResult {
            status: LpStatus::Infeasible,
            x: solver.x[..n].to_vec(),
            y: vec![0.0; solver.m],
            reduced_costs: vec![0.0; n],
            iterations: solver.iterations,
            objective: f64::NAN,
        };
    }

    // Pin artificials at zero and optimize the true objective.
    for j in n..solver.n_total {
        solver.lower[j] = 0.0;
        solver.upper[j] = 0.0;
        solver.x[j] = 0.0;
    }
    let mut costs = vec![0.0; solver.n_total];
    costs[..n].copy_from_slice(&lp.c);
    let bounded = solver.iterate(&costs);
    if !bounded {
        return SimplexResult {
            status: LpStatus::Unbounded,
            x: solver.x[..n].to_vec(),
            y: vec![0.0; solver.m],
            reduced_costs: vec![0.0; n],
            iterations: solver.iterations,
            objective: f64::NEG_INFINITY,
        };
    }

    let (y, reduced_costs) = solver.duals(&costs);
    let x = solver.x[..n].to_vec();
    let objective = dot(&lp.c, &x);
    SimplexResult {
        status: LpStatus::Optimal,
        x,
        y,
        reduced_costs,
        iterations: solver.iterations,
        objective,
    }
}

/// Duality gap of a claimed optimal point: primal objective minus the bound
/// from the dual certificate `(y, d)`. Near zero at a true optimum.
pub fn duality_gap(lp: &LinearProgram, result: &SimplexResult) -> f64 {
    let mut dual_obj = dot(&result.y, &lp.b);
    for j in 0..lp.c.len() {
        let d = result.reduced_costs[j];
        if d > 0.0 && lp.lower[j].is_finite() {
            dual_obj += d * lp.lower[j];
        } else if d < 0.0 && lp.upper[j].is_finite() {
            dual_obj += d * lp.upper[j];
        }
    }
    (result.objective - dual_obj).abs()
}

// ---------------------------------------------------------------------------
// DC-OPF front end
// ---------------------------------------------------------------------------

/// Exact solution of the dispatch LP.
#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Optimal dispatch (the structural slice of the LP solution).
    pub x_opt: Vec<f64>,
    pub objective_opt: f64,
    pub status: LpStatus,
    pub iterations: usize,
    pub duality_gap: f64,
    /// Full LP point including line-flow auxiliaries, for verification.
    pub x_full: Vec<f64>,
    pub row_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
}

/// Build the reduced LP in `p_g`: one bounded auxiliary per limited line and a
/// single total-balance equality.
pub fn assemble_lp(problem: &OpfProblem) -> LinearProgram {
    let n_g = problem.n_gen();
    let limited: Vec<usize> = (0..problem.n_line())
        .filter(|&k| problem.p_line_max[k].is_finite())
        .collect();
    let n = n_g + limited.len();
    let m = limited.len() + 1;

    let mut a = Mat::zeros(m, n);
    let mut b = vec![0.0; m];
    let sensitivity = problem.flow_sensitivity();
    for (row, &k) in limited.iter().enumerate() {
        for g in 0..n_g {
            a.set(row, g, sensitivity.get(k, g));
        }
        a.set(row, n_g + row, -1.0);
        b[row] = problem.flow_offset()[k];
    }
    let balance = limited.len();
    for g in 0..n_g {
        a.set(balance, g, 1.0);
    }
    b[balance] = problem.total_scaled_load();

    let mut c = problem.c.clone();
    c.resize(n, 0.0);
    let mut lower = problem.p_g_min.clone();
    let mut upper = problem.p_g_max.clone();
    for &k in &limited {
        lower.push(problem.p_line_min[k]);
        upper.push(problem.p_line_max[k]);
    }
    LinearProgram { c, a, b, lower, upper }
}

/// Solve the dispatch LP exactly.
pub fn solve_lp(problem: &OpfProblem) -> LpSolution {
    let lp = assemble_lp(problem);
    let result = solve(&lp);
    let n_g = problem.n_gen();
    let gap = if result.status == LpStatus::Optimal {
        duality_gap(&lp, &result)
    } else {
        f64::NAN
    };
    LpSolution {
        x_opt: result.x[..n_g].to_vec(),
        objective_opt: result.objective,
        status: result.status,
        iterations: result.iterations,
        duality_gap: gap,
        x_full: result.x,
        row_duals: result.y,
        reduced_costs: result.reduced_costs,
    }
}

/// Residuals of the optimality certificate, recomputed from raw problem data.
#[derive(Debug, Clone, Copy)]
pub struct KktReport {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.primal.max(self.dual).max(self.complementarity)
    }

    pub fn pass(&self) -> bool {
        self.max_residual() <= 1e-7
    }
}

/// Check primal feasibility, dual sign conditions and complementary slackness
/// of a claimed solution, independently of how it was produced.
pub fn verify_kkt(problem: &OpfProblem, solution: &LpSolution) -> KktReport {
    let lp = assemble_lp(problem);
    let x = &solution.x_full;
    let y = &solution.row_duals;

    let mut primal: f64 = 0.0;
    let ax = lp.a.matvec(x);
    for (ai, bi) in ax.iter().zip(&lp.b) {
        primal = primal.max((ai - bi).abs());
    }
    for j in 0..x.len() {
        if lp.lower[j].is_finite() {
            primal = primal.max(lp.lower[j] - x[j]);
        }
        if lp.upper[j].is_finite() {
            primal = primal.max(x[j] - lp.upper[j]);
        }
    }

    let active_tol = 1e-7;
    let mut dual: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    for j in 0..x.len() {
        let d = lp.c[j] - (0..lp.b.len()).map(|i| y[i] * lp.a.get(i, j)).sum::<f64>();
        let at_lower = lp.lower[j].is_finite() && (x[j] - lp.lower[j]).abs() <= active_tol;
        let at_upper = lp.upper[j].is_finite() && (lp.upper[j] - x[j]).abs() <= active_tol;
        if at_lower && at_upper {
            continue; // fixed variable: any multiplier sign is valid
        }
        if at_lower {
            dual = dual.max(-d);
        } else if at_upper {
            dual = dual.max(d);
        } else {
            dual = dual.max(d.abs());
        }
        if d > 0.0 && lp.lower[j].is_finite() {
            complementarity = complementarity.max(d * (x[j] - lp.lower[j]));
        } else if d < 0.0 && lp.upper[j].is_finite() {
            complementarity = complementarity.max(-d * (lp.upper[j] - x[j]));
        }
    }

    KktReport { primal, dual, complementarity }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::PowerCase;
    use crate::opf::{build_problem, Feasibility, SolutionModel};

    fn bundled(name: &str) -> OpfProblem {
        let case =
            PowerCase::from_file(format!("{}/cases/{name}.m", env!("CARGO_MANIFEST_DIR"))).unwrap();
        build_problem(&case, 1.0).unwrap()
    }

    #[test]
    fn one_variable_box() {
        let lp = LinearProgram {
            c: vec![1.0],
            a: Mat::zeros(0, 1),
            b: vec![],
            lower: vec![1.0],
            upper: vec![2.0],
        };
        let result = solve(&lp);
        assert_eq!(result.status, LpStatus::Optimal);
        assert_eq!(result.x, vec![1.0]);
        assert_eq!(result.objective, 1.0);
    }

    #[test]
    fn merit_order_toy() {
        // min p1 + 2 p2  s.t. p1 + p2 = 1, 0 <= p <= 1.
        let lp = LinearProgram {
            c: vec![1.0, 2.0],
            a: Mat::from_rows(&[vec![1.0, 1.0]]),
            b: vec![1.0],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        };
        let result = solve(&lp);
        assert_eq!(result.status, LpStatus::Optimal);
        assert!((result.x[0] - 1.0).abs() < 1e-9);
        assert!(result.x[1].abs() < 1e-9);
        assert!((result.objective - 1.0).abs() < 1e-9);
        assert!(duality_gap(&lp, &result) < 1e-9);
    }

    #[test]
    fn infeasible_row_detected() {
        // x1 + x2 = 5 with both in [0, 1].
        let lp = LinearProgram {
            c: vec![1.0, 1.0],
            a: Mat::from_rows(&[vec![1.0, 1.0]]),
            b: vec![5.0],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        };
        assert_eq!(solve(&lp).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let lp = LinearProgram {
            c: vec![-1.0],
            a: Mat::zeros(0, 1),
            b: vec![],
            lower: vec![0.0],
            upper: vec![f64::INFINITY],
        };
        assert_eq!(solve(&lp).status, LpStatus::Unbounded);
    }

    /// Golden optimum for case9 at rho = 1, hand-derived from the merit order
    /// (cheapest unit at its limit, slack unit at its minimum) and confirmed
    /// against the ring-flow limits before freezing.
    const CASE9_OPT: f64 = 362.0;

    #[test]
    fn case9_golden_objective() {
        let problem = bundled("case9");
        let solution = solve_lp(&problem);
        assert_eq!(solution.status, LpStatus::Optimal);
        assert!(
            (solution.objective_opt - CASE9_OPT).abs() < 1e-6 * CASE9_OPT,
            "objective {}",
            solution.objective_opt
        );
        assert!(verify_kkt(&problem, &solution).pass());
        assert!(solution.duality_gap <= 1e-8);
    }

    #[test]
    fn oracle_optimum_is_model_feasible() {
        for name in ["case9", "case30", "case39", "case57"] {
            let problem = bundled(name);
            let solution = solve_lp(&problem);
            assert_eq!(solution.status, LpStatus::Optimal, "{name}");
            let candidate = problem.evaluate(&solution.x_opt, false);
            assert_eq!(candidate.feasible, Feasibility::Feasible, "{name}");
            assert!((candidate.objective - solution.objective_opt).abs() < 1e-9);
        }
    }

    #[test]
    fn kkt_rejects_perturbed_solution() {
        let problem = bundled("case30");
        let mut solution = solve_lp(&problem);
        assert!(verify_kkt(&problem, &solution).pass());
        for (i, v) in solution.x_full.iter_mut().enumerate() {
            *v += 1e-3 * if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        let report = verify_kkt(&problem, &solution);
        assert!(
            report.primal > 1e-7 || report.complementarity > 1e-7,
            "perturbation passed: {report:?}"
        );
    }

    #[test]
    fn deterministic_resolve() {
        let problem = bundled("case57");
        let a = solve_lp(&problem);
        let b = solve_lp(&problem);
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.x_opt, b.x_opt);
    }

    #[test]
    fn cost_scaling_leaves_argmin() {
        let mut problem = bundled("case39");
        let base = solve_lp(&problem);
        for c in problem.c.iter_mut() {
            *c *= 7.0;
        }
        let scaled = solve_lp(&problem);
        for (a, b) in base.x_opt.iter().zip(&scaled.x_opt) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((scaled.objective_opt - 7.0 * base.objective_opt).abs() < 1e-6);
    }

    #[test]
    fn absurd_load_is_infeasible() {
        let case =
            PowerCase::from_file(format!("{}/cases/case9.m", env!("CARGO_MANIFEST_DIR"))).unwrap();
        let problem = build_problem(&case, 100.0).unwrap();
        assert_eq!(solve_lp(&problem).status, LpStatus::Infeasible);
    }

    #[test]
    fn feasible_points_never_beat_oracle() {
        // Grid of balanced dispatches; every model-feasible one must sit at or
        // above the LP optimum.
        let problem = bundled("case9");
        let solution = solve_lp(&problem);
        let mut checked = 0;
        for i in 0..20 {
            for j in 0..20 {
                let p2 = 0.1 + 2.9 * (i as f64) / 19.0;
                let p3 = 0.1 + 2.6 * (j as f64) / 19.0;
                let mut p_g = vec![0.0, p2, p3];
                problem.slack_adjust(&mut p_g);
                let candidate = problem.evaluate(&p_g, false);
                if candidate.is_feasible() {
                    checked += 1;
                    assert!(candidate.objective >= solution.objective_opt - 1e-6);
                }
            }
        }
        assert!(checked > 10, "grid produced too few feasible points");
    }
}
