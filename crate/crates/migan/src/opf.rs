//! The DC optimal-power-flow linear program.
//!
//! Decision variables are the generator dispatch `p_g` and the bus angles
//! `theta`. The model minimizes linear generation cost subject to nodal power
//! balance, line-flow limits and dispatch limits, with the load vector scaled
//! by a coefficient `rho`.
//!
//! Angles are never free decision variables here: given a dispatch, `theta`
//! is recovered from the balance equation by fixing the slack angle at zero
//! and solving the reduced admittance system. Any total imbalance is reported
//! as `balance_residual` and treated as an infeasibility against `tol`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::PowerCase;
use crate::linalg::{dot, lu_factorize, Mat};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("in-service branch graph is disconnected")]
    Disconnected,
    #[error("no generator at the slack bus")]
    NoSlackGenerator,
    #[error("reduced admittance matrix is singular")]
    Singular,
}

/// Feasibility verdict of a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feasibility {
    Feasible,
    Infeasible,
    Unevaluated,
}

/// One dispatch solution with recovered angles and cached evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub p_g: Vec<f64>,
    pub theta: Vec<f64>,
    pub objective: f64,
    pub feasible: Feasibility,
    /// Total injection minus scaled load, absorbed at the slack bus.
    pub balance_residual: f64,
}

impl Candidate {
    pub fn is_feasible(&self) -> bool {
        self.feasible == Feasibility::Feasible
    }
}

/// Inequality rows of the model, in mask order: line upper bounds, line lower
/// bounds, dispatch upper bounds, dispatch lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    LineUpper(usize),
    LineLower(usize),
    GenUpper(usize),
    GenLower(usize),
}

/// A problem that can score and feasibility-check a raw solution vector.
///
/// The model-informed selector is written against this trait so that it works
/// for any constrained problem with a feasibility predicate, not only the DC
/// dispatch model.
pub trait SolutionModel {
    fn objective(&self, x: &[f64]) -> f64;
    fn evaluate(&self, x: &[f64], honor_relaxation: bool) -> Candidate;
}

/// The assembled DC-OPF linear program for one case and one `rho`.
#[derive(Debug, Clone)]
pub struct OpfProblem {
    /// Linear cost per generator (currency / p.u.).
    pub c: Vec<f64>,
    /// Bus-generator incidence, `n_b x n_g`.
    pub mg: Mat,
    /// Bus-load incidence, `n_b x n_d`.
    pub md: Mat,
    /// Bus admittance matrix, `n_b x n_b`.
    pub b_bus: Mat,
    /// Line admittance matrix, `n_line x n_b`.
    pub b_line: Mat,
    /// Base load vector (p.u.), scaled by `rho` in the constraints.
    pub p_d: Vec<f64>,
    pub rho: f64,
    /// Line-flow bounds (p.u.); infinite entries carry no constraint rows.
    pub p_line_min: Vec<f64>,
    pub p_line_max: Vec<f64>,
    pub p_g_min: Vec<f64>,
    pub p_g_max: Vec<f64>,
    pub slack_bus: usize,
    pub slack_gen: usize,
    /// Per inequality row; `true` rows are skipped by relaxed checks.
    pub relaxed_mask: Vec<bool>,
    /// Feasibility tolerance (p.u.).
    pub tol: f64,

    rows: Vec<RowKind>,
    /// `theta = theta_gen * p_g - theta_base` (slack row fixed at zero).
    theta_gen: Mat,
    theta_base: Vec<f64>,
    /// `flows = flow_gen * p_g - flow_base`.
    flow_gen: Mat,
    flow_base: Vec<f64>,
}

pub const DEFAULT_TOL: f64 = 1e-6;

/// Assemble the LP from a parsed case.
pub fn build_problem(case: &PowerCase, rho: f64) -> Result<OpfProblem, ModelError> {
    assert!(rho > 0.0, "rho must be positive");
    let index = case.bus_index();
    let n_b = case.n_bus();
    let n_g = case.n_gen();
    let n_d = case.n_load();

    let lines: Vec<_> = case.branches.iter().filter(|b| b.in_service).collect();
    let n_line = lines.len();

    // Connectivity over the in-service graph (single bus is trivially fine).
    let mut adj = vec![Vec::new(); n_b];
    for br in &lines {
        let f = index[&br.from_bus];
        let t = index[&br.to_bus];
        adj[f].push(t);
        adj[t].push(f);
    }
    let mut seen = vec![false; n_b];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(ModelError::Disconnected);
    }

    let mut b_bus = Mat::zeros(n_b, n_b);
    let mut b_line = Mat::zeros(n_line, n_b);
    let mut p_line_min = vec![0.0; n_line];
    let mut p_line_max = vec![0.0; n_line];
    for (k, br) in lines.iter().enumerate() {
        let f = index[&br.from_bus];
        let t = index[&br.to_bus];
        let susceptance = 1.0 / br.reactance;
        b_bus.add_at(f, f, susceptance);
        b_bus.add_at(t, t, susceptance);
        b_bus.add_at(f, t, -susceptance);
        b_bus.add_at(t, f, -susceptance);
        b_line.set(k, f, susceptance);
        b_line.set(k, t, -susceptance);
        if br.flow_limit == 0.0 {
            log::warn!(
                "branch {}-{} has no rating; treating flow as unlimited",
                br.from_bus,
                br.to_bus
            );
            p_line_min[k] = f64::NEG_INFINITY;
            p_line_max[k] = f64::INFINITY;
        } else {
            p_line_min[k] = -br.flow_limit;
            p_line_max[k] = br.flow_limit;
        }
    }

    let mut mg = Mat::zeros(n_b, n_g);
    for (g, gen) in case.generators.iter().enumerate() {
        mg.set(index[&gen.bus_id], g, 1.0);
    }
    let mut md = Mat::zeros(n_b, n_d);
    for (d, load) in case.loads.iter().enumerate() {
        md.set(index[&load.bus_id], d, 1.0);
    }

    let slack_bus = index[&case.slack_bus_id()];
    let slack_gen = case
        .generators
        .iter()
        .position(|g| index[&g.bus_id] == slack_bus)
        .ok_or(ModelError::NoSlackGenerator)?;

    // Reduced system excluding the slack row/column, factorized once; the
    // angle map is then a dense sensitivity matrix reused per candidate.
    let reduced: Vec<usize> = (0..n_b).filter(|&b| b != slack_bus).collect();
    let nr = reduced.len();
    let mut b_red = Mat::zeros(nr, nr);
    for (i, &bi) in reduced.iter().enumerate() {
        for (j, &bj) in reduced.iter().enumerate() {
            b_red.set(i, j, b_bus.get(bi, bj));
        }
    }
    let lu = if nr > 0 {
        Some(lu_factorize(&b_red).ok_or(ModelError::Singular)?)
    } else {
        None
    };
    let embed = |reduced_theta: &[f64]| -> Vec<f64> {
        let mut full = vec![0.0; n_b];
        for (i, &b) in reduced.iter().enumerate() {
            full[b] = reduced_theta[i];
        }
        full
    };
    let solve_injection = |rhs_full: &[f64]| -> Vec<f64> {
        match &lu {
            Some(lu) => {
                let rhs: Vec<f64> = reduced.iter().map(|&b| rhs_full[b]).collect();
                embed(&lu.solve(&rhs))
            }
            None => vec![0.0; n_b],
        }
    };

    let mut theta_gen = Mat::zeros(n_b, n_g);
    for g in 0..n_g {
        let col = solve_injection(&mg.column(g));
        for b in 0..n_b {
            theta_gen.set(b, g, col[b]);
        }
    }
    let scaled_load: Vec<f64> = case.loads.iter().map(|l| rho * l.p_demand).collect();
    let theta_base = solve_injection(&md.matvec(&scaled_load));

    let flow_gen = b_line.matmul(&theta_gen);
    let flow_base = b_line.matvec(&theta_base);

    let mut rows = Vec::new();
    for (k, &up) in p_line_max.iter().enumerate() {
        if up.is_finite() {
            rows.push(RowKind::LineUpper(k));
        }
    }
    for (k, &lo) in p_line_min.iter().enumerate() {
        if lo.is_finite() {
            rows.push(RowKind::LineLower(k));
        }
    }
    for g in 0..n_g {
        rows.push(RowKind::GenUpper(g));
    }
    for g in 0..n_g {
        rows.push(RowKind::GenLower(g));
    }
    let relaxed_mask = vec![false; rows.len()];

    Ok(OpfProblem {
        c: case.generators.iter().map(|g| g.cost_linear).collect(),
        mg,
        md,
        b_bus,
        b_line,
        p_d: case.loads.iter().map(|l| l.p_demand).collect(),
        rho,
        p_line_min,
        p_line_max,
        p_g_min: case.generators.iter().map(|g| g.p_min).collect(),
        p_g_max: case.generators.iter().map(|g| g.p_max).collect(),
        slack_bus,
        slack_gen,
        relaxed_mask,
        tol: DEFAULT_TOL,
        rows,
        theta_gen,
        theta_base,
        flow_gen,
        flow_base,
    })
}

impl OpfProblem {
    pub fn n_gen(&self) -> usize {
        self.c.len()
    }

    pub fn n_bus(&self) -> usize {
        self.b_bus.rows()
    }

    pub fn n_line(&self) -> usize {
        self.b_line.rows()
    }

    /// Catalog of inequality rows, aligned with `relaxed_mask`.
    pub fn inequality_rows(&self) -> &[RowKind] {
        &self.rows
    }

    pub fn n_inequalities(&self) -> usize {
        self.rows.len()
    }

    /// Effective (scaled) demand at each load point.
    pub fn effective_load(&self) -> Vec<f64> {
        self.p_d.iter().map(|d| self.rho * d).collect()
    }

    pub fn total_scaled_load(&self) -> f64 {
        self.rho * self.p_d.iter().sum::<f64>()
    }

    /// Angle sensitivity to dispatch, used by gradient paths through the
    /// recovered angles.
    pub fn theta_sensitivity(&self) -> &Mat {
        &self.theta_gen
    }

    /// Line-flow sensitivity to dispatch (`flows = flow_sensitivity * p_g -
    /// flow_offset`).
    pub fn flow_sensitivity(&self) -> &Mat {
        &self.flow_gen
    }

    pub fn flow_offset(&self) -> &[f64] {
        &self.flow_base
    }

    /// Recover angles for a dispatch: slack angle fixed at zero, reduced
    /// system solved, total imbalance returned alongside.
    pub fn recover_theta(&self, p_g: &[f64]) -> (Vec<f64>, f64) {
        assert_eq!(p_g.len(), self.n_gen());
        let mut theta = self.theta_gen.matvec(p_g);
        for (t, base) in theta.iter_mut().zip(&self.theta_base) {
            *t -= base;
        }
        let residual = p_g.iter().sum::<f64>() - self.total_scaled_load();
        (theta, residual)
    }

    /// Line flows implied by a dispatch.
    pub fn line_flows(&self, p_g: &[f64]) -> Vec<f64> {
        let mut flows = self.flow_gen.matvec(p_g);
        for (f, base) in flows.iter_mut().zip(&self.flow_base) {
            *f -= base;
        }
        flows
    }

    /// Overwrite the slack generator's output so the dispatch balances the
    /// scaled load exactly. Bounds are deliberately not enforced here; the
    /// feasibility check reports them.
    pub fn slack_adjust(&self, p_g: &mut [f64]) {
        let others: f64 = p_g
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != self.slack_gen)
            .map(|(_, v)| v)
            .sum();
        p_g[self.slack_gen] = self.total_scaled_load() - others;
    }

    /// Check a candidate whose angles were already recovered.
    ///
    /// With `honor_relaxation`, rows flagged in `relaxed_mask` are skipped;
    /// final acceptance always passes `false`.
    pub fn check_feasibility(&self, candidate: &Candidate, honor_relaxation: bool) -> Feasibility {
        if candidate.balance_residual.abs() > self.tol {
            return Feasibility::Infeasible;
        }
        let flows = self.b_line.matvec(&candidate.theta);
        for (i, row) in self.rows.iter().enumerate() {
            if honor_relaxation && self.relaxed_mask[i] {
                continue;
            }
            if self.row_violated(*row, &candidate.p_g, &flows) {
                return Feasibility::Infeasible;
            }
        }
        Feasibility::Feasible
    }

    /// Indices (into `inequality_rows`) violated by a candidate, ignoring the
    /// relaxation mask. Diagnostic companion to `check_feasibility`.
    pub fn violated_rows(&self, candidate: &Candidate) -> Vec<usize> {
        let flows = self.b_line.matvec(&candidate.theta);
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, row)| self.row_violated(**row, &candidate.p_g, &flows))
            .map(|(i, _)| i)
            .collect()
    }

    fn row_violated(&self, row: RowKind, p_g: &[f64], flows: &[f64]) -> bool {
        match row {
            RowKind::LineUpper(k) => flows[k] > self.p_line_max[k] + self.tol,
            RowKind::LineLower(k) => flows[k] < self.p_line_min[k] - self.tol,
            RowKind::GenUpper(g) => p_g[g] > self.p_g_max[g] + self.tol,
            RowKind::GenLower(g) => p_g[g] < self.p_g_min[g] - self.tol,
        }
    }
}

impl SolutionModel for OpfProblem {
    fn objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }

    fn evaluate(&self, x: &[f64], honor_relaxation: bool) -> Candidate {
        let (theta, balance_residual) = self.recover_theta(x);
        let mut candidate = Candidate {
            objective: self.objective(x),
            p_g: x.to_vec(),
            theta,
            feasible: Feasibility::Unevaluated,
            balance_residual,
        };
        candidate.feasible = self.check_feasibility(&candidate, honor_relaxation);
        candidate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::{Branch, Bus, Generator, Load, PowerCase};
    use proptest::prelude::*;

    pub(crate) fn two_bus_case() -> PowerCase {
        PowerCase {
            name: "twobus".into(),
            base_mva: 100.0,
            buses: vec![Bus { id: 1, is_slack: true }, Bus { id: 2, is_slack: false }],
            generators: vec![Generator {
                bus_id: 1,
                p_min: 0.0,
                p_max: 5.0,
                cost_linear: 100.0,
                cost_quadratic: 0.0,
            }],
            branches: vec![Branch {
                from_bus: 1,
                to_bus: 2,
                reactance: 0.1,
                flow_limit: 5.0,
                in_service: true,
            }],
            loads: vec![Load { bus_id: 2, p_demand: 1.0 }],
        }
    }

    fn bundled(name: &str) -> PowerCase {
        PowerCase::from_file(format!("{}/cases/{name}.m", env!("CARGO_MANIFEST_DIR"))).unwrap()
    }

    #[test]
    fn two_bus_stamping() {
        let problem = build_problem(&two_bus_case(), 1.0).unwrap();
        assert_eq!(problem.b_bus.row(0), &[10.0, -10.0]);
        assert_eq!(problem.b_bus.row(1), &[-10.0, 10.0]);
        assert_eq!(problem.b_line.row(0), &[10.0, -10.0]);
    }

    #[test]
    fn two_bus_theta_recovery() {
        let problem = build_problem(&two_bus_case(), 1.0).unwrap();
        let (theta, residual) = problem.recover_theta(&[1.0]);
        assert!((theta[0] - 0.0).abs() < 1e-12);
        assert!((theta[1] - (-0.1)).abs() < 1e-12);
        assert!(residual.abs() < 1e-12);
        let flows = problem.line_flows(&[1.0]);
        assert!((flows[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn case9_has_24_inequality_rows() {
        let problem = build_problem(&bundled("case9"), 1.0).unwrap();
        assert_eq!(problem.n_inequalities(), 24);
        assert!(problem.relaxed_mask.iter().all(|&m| !m));
    }

    #[test]
    fn inequality_counts_are_twice_lines_plus_gens() {
        for (name, want) in [("case9", 24), ("case30", 86), ("case39", 112), ("case57", 168)] {
            let problem = build_problem(&bundled(name), 1.0).unwrap();
            assert_eq!(problem.n_inequalities(), want, "{name}");
        }
    }

    #[test]
    fn rho_scales_effective_load() {
        let case = bundled("case9");
        let base = build_problem(&case, 1.0).unwrap();
        let scaled = build_problem(&case, 1.3).unwrap();
        for (s, b) in scaled.effective_load().iter().zip(base.effective_load()) {
            assert!((s - 1.3 * b).abs() < 1e-12);
        }
        assert!((scaled.total_scaled_load() - 1.3 * base.total_scaled_load()).abs() < 1e-12);
    }

    #[test]
    fn bus_row_sums_are_zero() {
        let problem = build_problem(&bundled("case57"), 1.0).unwrap();
        for b in 0..problem.n_bus() {
            let sum: f64 = problem.b_bus.row(b).iter().sum();
            assert!(sum.abs() < 1e-9, "row {b} sums to {sum}");
        }
    }

    #[test]
    fn incidence_columns_have_one_entry() {
        let problem = build_problem(&bundled("case39"), 1.0).unwrap();
        for g in 0..problem.n_gen() {
            let ones = problem.mg.column(g).iter().filter(|&&v| v != 0.0).count();
            assert_eq!(ones, 1);
        }
        for d in 0..problem.p_d.len() {
            let ones = problem.md.column(d).iter().filter(|&&v| v != 0.0).count();
            assert_eq!(ones, 1);
        }
    }

    #[test]
    fn disconnected_case_rejected() {
        let mut case = two_bus_case();
        case.buses.push(Bus { id: 3, is_slack: false });
        assert!(matches!(build_problem(&case, 1.0), Err(ModelError::Disconnected)));
    }

    #[test]
    fn missing_slack_generator_rejected() {
        let mut case = two_bus_case();
        case.generators[0].bus_id = 2;
        assert!(matches!(build_problem(&case, 1.0), Err(ModelError::NoSlackGenerator)));
    }

    #[test]
    fn zero_flow_limit_is_unlimited() {
        let mut case = two_bus_case();
        case.branches[0].flow_limit = 0.0;
        let problem = build_problem(&case, 1.0).unwrap();
        // Only the two dispatch rows remain.
        assert_eq!(problem.n_inequalities(), 2);
        assert_eq!(problem.p_line_max[0], f64::INFINITY);
    }

    #[test]
    fn bound_violation_is_infeasible() {
        let problem = build_problem(&two_bus_case(), 1.0).unwrap();
        let candidate = problem.evaluate(&[5.0 + 10.0 * problem.tol], false);
        assert_eq!(candidate.feasible, Feasibility::Infeasible);
    }

    #[test]
    fn zero_load_minimum_dispatch_feasible() {
        let mut case = two_bus_case();
        case.loads.clear();
        let problem = build_problem(&case, 1.0).unwrap();
        let candidate = problem.evaluate(&[0.0], false);
        assert_eq!(candidate.feasible, Feasibility::Feasible);
        assert_eq!(candidate.objective, 0.0);
    }

    #[test]
    fn objective_is_dot_product() {
        let problem = build_problem(&bundled("case9"), 1.0).unwrap();
        assert_eq!(problem.objective(&[0.0, 0.0, 0.0]), 0.0);
        let mut problem2 = problem.clone();
        problem2.c = vec![1.0, 2.0, 3.0];
        assert_eq!(problem2.objective(&[1.0, 1.0, 1.0]), 6.0);
    }

    #[test]
    fn slack_adjust_closes_balance() {
        let problem = build_problem(&bundled("case9"), 1.2).unwrap();
        let mut p_g = vec![0.4, 0.9, 1.1];
        problem.slack_adjust(&mut p_g);
        let (_, residual) = problem.recover_theta(&p_g);
        assert!(residual.abs() < 1e-12);
    }

    proptest! {
        // Balance rows hold everywhere except the slack row, which carries
        // exactly the reported residual.
        #[test]
        fn conservation_up_to_slack_row(
            p1 in 0.0f64..3.0, p2 in 0.0f64..3.0, p3 in 0.0f64..3.0,
        ) {
            let problem = build_problem(&bundled("case9"), 1.0).unwrap();
            let p_g = vec![p1, p2, p3];
            let (theta, residual) = problem.recover_theta(&p_g);
            let inj = problem.mg.matvec(&p_g);
            let load = problem.md.matvec(&problem.effective_load());
            let flow = problem.b_bus.matvec(&theta);
            for b in 0..problem.n_bus() {
                let gap = inj[b] - load[b] - flow[b];
                if b == problem.slack_bus {
                    prop_assert!((gap - residual).abs() < 1e-9);
                } else {
                    prop_assert!(gap.abs() < 1e-9, "bus {} gap {}", b, gap);
                }
            }
        }

        // DC linearity: scaling dispatch and loads together scales angles.
        #[test]
        fn homogeneity(alpha in 0.1f64..3.0, p1 in 0.0f64..2.0, p2 in 0.0f64..2.0, p3 in 0.0f64..2.0) {
            let case = bundled("case9");
            let base = build_problem(&case, 1.0).unwrap();
            let scaled = build_problem(&case, alpha).unwrap();
            let p_g = vec![p1, p2, p3];
            let p_g_scaled: Vec<f64> = p_g.iter().map(|v| alpha * v).collect();
            let (theta, _) = base.recover_theta(&p_g);
            let (theta_scaled, _) = scaled.recover_theta(&p_g_scaled);
            for (t, ts) in theta.iter().zip(&theta_scaled) {
                prop_assert!((alpha * t - ts).abs() < 1e-9);
            }
        }

        // Loosening the tolerance never flips feasible to infeasible.
        #[test]
        fn feasibility_monotone_in_tol(
            p1 in 0.0f64..3.0, p2 in 0.0f64..3.0, p3 in 0.0f64..3.0,
            factor in 1.0f64..1000.0,
        ) {
            let mut problem = build_problem(&bundled("case9"), 1.0).unwrap();
            let mut p_g = vec![p1, p2, p3];
            problem.slack_adjust(&mut p_g);
            let tight = problem.evaluate(&p_g, false);
            problem.tol *= factor;
            let loose = problem.evaluate(&p_g, false);
            if tight.feasible == Feasibility::Feasible {
                prop_assert_eq!(loose.feasible, Feasibility::Feasible);
            }
        }
    }
}
