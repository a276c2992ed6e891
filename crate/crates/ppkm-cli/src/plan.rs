//! `plan-params`: guessing-probability security levels for a deployment.
//!
//! Given the dataset size and dimension a deployment must protect, prints
//! the attacker's log2 success probabilities for the two guessing games —
//! recovering a point's transform entries, and recovering a coordinate
//! quotient's unknowns — plus the bit budgets at which both drop below
//! 2^-80. `--table` sweeps the four standard magnitude/precision pairs.

use ppkm::params::security_plan;

use crate::{to_json_text, CmdError, CmdResult};

/// The standard magnitude/precision pairs the parameter table sweeps.
const TABLE_ROWS: [(u32, u32); 4] = [(34, 32), (40, 32), (64, 32), (128, 8)];

#[derive(clap::Args, Debug)]
pub(crate) struct PlanArgs {
    /// Number of data points to protect
    #[arg(long)]
    n: u64,
    /// Data dimension
    #[arg(long)]
    d: u64,
    /// Bit length of scales, shifts and mask keys
    #[arg(long, default_value_t = 34)]
    ell1: u32,
    /// Bit length (precision) of sampled noise
    #[arg(long, default_value_t = 32)]
    ell2: u32,
    /// Render the standard four-row parameter sweep instead of one plan
    #[arg(long)]
    table: bool,
}

/// log2 of the owner-side transform workload, `n * d * ell1^2` bit
/// operations — the price tag next to each security row.
fn log2_workload(n: u64, d: u64, ell1: u32) -> f64 {
    (n as f64).log2() + (d as f64).log2() + 2.0 * f64::from(ell1).log2()
}

pub(crate) fn cmd_plan(args: PlanArgs) -> CmdResult {
    if args.n == 0 || args.d == 0 {
        return Err(CmdError::Usage("--n and --d must be at least 1".into()));
    }
    if !args.table {
        let plan = security_plan(args.n, args.d, args.ell1, args.ell2);
        print!("{}", to_json_text(&plan)?);
        return Ok(());
    }

    println!(
        "{:>5} {:>5} {:>15} {:>18} {:>14} {:>7}",
        "ell1", "ell2", "log2 P[point]", "log2 P[quotient]", "log2 workload", "secure"
    );
    for (ell1, ell2) in TABLE_ROWS {
        let plan = security_plan(args.n, args.d, ell1, ell2);
        println!(
            "{:>5} {:>5} {:>15.2} {:>18.2} {:>14.2} {:>7}",
            ell1,
            ell2,
            plan.log2_p_point_guess,
            plan.log2_p_quotient_guess,
            log2_workload(args.n, args.d, ell1),
            plan.secure
        );
    }
    let thresholds = security_plan(args.n, args.d, TABLE_ROWS[0].0, TABLE_ROWS[0].1);
    println!();
    println!(
        "secure needs 2*ell1 + ell2 >= {:.2} and ell1 + 3*ell2 >= {:.2}",
        thresholds.required_point_bits, thresholds.required_quotient_bits
    );
    Ok(())
}
