//! Solve a case exactly with the simplex oracle and print the dispatch.
//!
//! ```bash
//! cargo run --example solve_oracle -- [case-name-or-path] [rho]
//! ```

use anyhow::{bail, Result};
use migan::case::PowerCase;
use migan::opf::build_problem;
use migan::simplex::{solve_lp, verify_kkt, LpStatus};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let case_arg = args.next().unwrap_or_else(|| "case9".into());
    let rho: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1.0);

    let path = if std::path::Path::new(&case_arg).exists() {
        case_arg.clone()
    } else {
        format!("{}/cases/{case_arg}.m", env!("CARGO_MANIFEST_DIR"))
    };
    let case = PowerCase::from_file(&path)?;
    println!(
        "{}: {} buses, {} generators, {} lines, {} loads, rho = {rho}",
        case.name,
        case.n_bus(),
        case.n_gen(),
        case.n_line(),
        case.n_load()
    );

    let problem = build_problem(&case, rho)?;
    let started = std::time::Instant::now();
    let solution = solve_lp(&problem);
    let elapsed = started.elapsed();

    match solution.status {
        LpStatus::Optimal => {
            println!(
                "optimal objective {:.6} in {} simplex iterations ({:.2?})",
                solution.objective_opt, solution.iterations, elapsed
            );
            for (g, (p, gen)) in solution.x_opt.iter().zip(&case.generators).enumerate() {
                println!(
                    "  gen {g} @ bus {:>3}: {:>10.4} p.u.  ({:>8.2} MW)",
                    gen.bus_id,
                    p,
                    p * case.base_mva
                );
            }
            let kkt = verify_kkt(&problem, &solution);
            println!(
                "kkt residuals: primal {:.2e}, dual {:.2e}, complementarity {:.2e} ({})",
                kkt.primal,
                kkt.dual,
                kkt.complementarity,
                if kkt.pass() { "pass" } else { "FAIL" }
            );
        }
        LpStatus::Infeasible => bail!("model is infeasible at rho = {rho}"),
        LpStatus::Unbounded => bail!("model is unbounded (check cost signs)"),
    }
    Ok(())
}
