//! `analyze`: leakage divergence bounds and attack-cost projections.
//!
//! `--attack-table` prices the known-sample grid-intersection attack over
//! the standard resolution grid. `--kl` evaluates the closed-form
//! divergence lower bounds, either from explicit inputs or by replaying a
//! run transcript: the per-round mask keys are reconstructed from the
//! logged initial keys and the hash chain over the centroid broadcasts,
//! recovering exactly what the aggregator's masked view diverged from.
//! The cross-round repeated-mask divergence compares the `k * dim` masked
//! coordinate sums of consecutive rounds.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use ppkm::analysis::{
    attack_cost, kd_aggregator_ratio, kd_quotient_bound, kd_same_mask, sum_dij_over_mij,
    AttackCostReport, LeakageReport,
};
use ppkm::keysched::KeyChain;
use ppkm::protocol::{LoggedMessage, Message};

use crate::{to_json_text, CmdError, CmdResult};

/// Resolution grid for the attack table: (range, cell, dimension), always
/// with two known points — the attacker's best case.
const ATTACK_GRID: [(f64, f64, u32); 10] = [
    (1000.0, 0.01, 2),
    (1000.0, 0.01, 3),
    (1000.0, 0.01, 4),
    (10.0, 0.001, 5),
    (10.0, 0.001, 6),
    (10.0, 0.001, 8),
    (100.0, 0.01, 9),
    (10.0, 0.001, 10),
    (10.0, 0.001, 12),
    (1000.0, 0.01, 11),
];

#[derive(clap::Args, Debug)]
pub(crate) struct AnalyzeArgs {
    /// Tabulate the known-sample attack cost over the standard grid
    #[arg(long)]
    attack_table: bool,
    /// Evaluate the divergence bounds (explicit inputs or --transcript)
    #[arg(long)]
    kl: bool,
    /// Replay a transcript.jsonl and report per-round divergences
    #[arg(long, value_name = "FILE")]
    transcript: Option<PathBuf>,
    /// Render aligned text instead of JSON
    #[arg(long)]
    table: bool,

    /// Larger coordinate of the compared pair
    #[arg(long, help_heading = "Quotient-bound inputs (--kl)")]
    x11: Option<f64>,
    /// Smaller coordinate of the compared pair
    #[arg(long, help_heading = "Quotient-bound inputs (--kl)")]
    x21: Option<f64>,
    /// Smaller coordinate of the reference pair
    #[arg(long, help_heading = "Quotient-bound inputs (--kl)")]
    x31: Option<f64>,
    /// Larger coordinate of the reference pair
    #[arg(long, help_heading = "Quotient-bound inputs (--kl)")]
    x41: Option<f64>,
    /// Scale applied to the attribute
    #[arg(long, help_heading = "Quotient-bound inputs (--kl)")]
    r1: Option<f64>,
    /// Noise ceiling the bound is evaluated at
    #[arg(long, help_heading = "Quotient-bound inputs (--kl)")]
    eps: Option<f64>,
    /// Data dimension
    #[arg(long, help_heading = "Quotient-bound inputs (--kl)")]
    d: Option<u32>,

    /// Numerator mask on the coordinate sums
    #[arg(long, help_heading = "Aggregator-ratio inputs (--kl)")]
    x: Option<f64>,
    /// Denominator mask on the counts
    #[arg(long, help_heading = "Aggregator-ratio inputs (--kl)")]
    y: Option<f64>,
    /// Unmasked sum of per-cluster coordinate-sum-to-count ratios
    #[arg(long, help_heading = "Aggregator-ratio inputs (--kl)")]
    ratio_sum: Option<f64>,

    /// First round's mask
    #[arg(long, help_heading = "Repeated-mask inputs (--kl)")]
    x1: Option<f64>,
    /// Second round's mask
    #[arg(long, help_heading = "Repeated-mask inputs (--kl)")]
    x2: Option<f64>,
    /// Number of masked values compared across the two rounds
    #[arg(long, help_heading = "Repeated-mask inputs (--kl)")]
    z: Option<f64>,
}

pub(crate) fn cmd_analyze(args: AnalyzeArgs) -> CmdResult {
    match (args.attack_table, args.kl) {
        (true, true) => Err(CmdError::Usage("pick one of --attack-table / --kl".into())),
        (false, false) => {
            Err(CmdError::Usage("nothing to analyze: pass --attack-table or --kl".into()))
        }
        (true, false) => render_attack_table(args.table),
        (false, true) => match &args.transcript {
            Some(path) => analyze_transcript(path, args.table),
            None => analyze_explicit(&args),
        },
    }
}

fn render_attack_table(table: bool) -> CmdResult {
    let rows: Vec<AttackCostReport> = ATTACK_GRID
        .iter()
        .map(|&(range, cell, dim)| attack_cost(2, range, cell, dim))
        .collect::<ppkm::Result<_>>()?;
    if !table {
        print!("{}", to_json_text(&rows)?);
        return Ok(());
    }
    println!("{:>6} {:>8} {:>7} {:>4} {:>11}", "known", "range", "cell", "dim", "log2 steps");
    for r in &rows {
        println!(
            "{:>6} {:>8} {:>7} {:>4} {:>11.2}",
            r.known_points, r.range, r.cell, r.dim, r.log2_steps
        );
    }
    Ok(())
}

fn analyze_explicit(args: &AnalyzeArgs) -> CmdResult {
    let mut report = LeakageReport::default();
    let mut inputs = serde_json::Map::new();

    let quotient = [args.x11, args.x21, args.x31, args.x41, args.r1, args.eps];
    if quotient.iter().any(Option::is_some) || args.d.is_some() {
        let ([Some(x11), Some(x21), Some(x31), Some(x41), Some(r1), Some(eps)], Some(d)) =
            (quotient, args.d)
        else {
            return Err(CmdError::Usage(
                "the quotient bound needs all of --x11 --x21 --x31 --x41 --r1 --eps --d".into(),
            ));
        };
        report.kd_quotient_bound = Some(kd_quotient_bound(x11, x21, x31, x41, r1, eps, d)?);
        inputs.insert(
            "quotient".into(),
            json!({ "x11": x11, "x21": x21, "x31": x31, "x41": x41, "r1": r1, "eps": eps, "d": d }),
        );
    }

    if args.x.is_some() || args.y.is_some() || args.ratio_sum.is_some() {
        let (Some(x), Some(y), Some(ratio_sum)) = (args.x, args.y, args.ratio_sum) else {
            return Err(CmdError::Usage(
                "the aggregator-ratio divergence needs all of --x --y --ratio-sum".into(),
            ));
        };
        let v = kd_aggregator_ratio(x, y, ratio_sum)?;
        report.kd_aggregator_ratio = Some(v);
        report.kd_aggregator_ratio_abs = Some(v.abs());
        inputs.insert("aggregator_ratio".into(), json!({ "x": x, "y": y, "ratio_sum": ratio_sum }));
    }

    if args.x1.is_some() || args.x2.is_some() || args.z.is_some() {
        let (Some(x1), Some(x2), Some(z)) = (args.x1, args.x2, args.z) else {
            return Err(CmdError::Usage(
                "the repeated-mask divergence needs all of --x1 --x2 --z".into(),
            ));
        };
        let v = kd_same_mask(x1, x2, z)?;
        report.kd_same_mask = Some(v);
        report.kd_same_mask_abs = Some(v.abs());
        inputs.insert("same_mask".into(), json!({ "x1": x1, "x2": x2, "z": z }));
    }

    if inputs.is_empty() {
        return Err(CmdError::Usage(
            "--kl needs --transcript or explicit inputs (see --help)".into(),
        ));
    }
    report.inputs = serde_json::Value::Object(inputs);

    if !args.table {
        print!("{}", to_json_text(&report)?);
        return Ok(());
    }
    println!("{:<26} {:>20}", "quantity", "nats");
    let row = |name: &str, v: Option<f64>| {
        if let Some(v) = v {
            println!("{name:<26} {v:>20.6e}");
        }
    };
    row("kd_quotient_bound", report.kd_quotient_bound);
    row("kd_aggregator_ratio", report.kd_aggregator_ratio);
    row("kd_aggregator_ratio_abs", report.kd_aggregator_ratio_abs);
    row("kd_same_mask", report.kd_same_mask);
    row("kd_same_mask_abs", report.kd_same_mask_abs);
    Ok(())
}

/// The per-round divergence report a transcript replay produces.
#[derive(Serialize)]
struct TranscriptLeakage {
    rounds: Vec<RoundLeakage>,
}

/// One round of a replayed transcript, seen through the aggregator's eyes.
#[derive(Serialize)]
struct RoundLeakage {
    round: u64,
    x: f64,
    y: f64,
    sum_dij_over_mij: f64,
    kd_aggregator_ratio: f64,
    kd_aggregator_ratio_abs: f64,
    /// Against the previous round's mask; absent on the first round.
    kd_same_mask: Option<f64>,
    kd_same_mask_abs: Option<f64>,
    /// Empty clusters, whose sum-to-count ratio is undefined.
    clusters_skipped: Vec<usize>,
}

fn malformed(msg: impl Into<String>) -> CmdError {
    CmdError::Runtime(ppkm::Error::InvalidParameter(format!("transcript: {}", msg.into())))
}

fn analyze_transcript(path: &Path, table: bool) -> CmdResult {
    let rounds = replay_transcript(path)?;
    if !table {
        print!("{}", to_json_text(&TranscriptLeakage { rounds })?);
        return Ok(());
    }
    println!(
        "{:>5} {:>14} {:>14} {:>14} {:>14} {:>14}",
        "round", "x", "y", "sum d/m", "|kd ratio|", "|kd mask|"
    );
    for r in &rounds {
        println!(
            "{:>5} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>14}",
            r.round,
            r.x,
            r.y,
            r.sum_dij_over_mij,
            r.kd_aggregator_ratio_abs,
            r.kd_same_mask_abs.map_or("-".into(), |v| format!("{v:.6e}")),
        );
    }
    Ok(())
}

fn replay_transcript(path: &Path) -> Result<Vec<RoundLeakage>, CmdError> {
    let text = std::fs::read_to_string(path)?;
    let mut header: Option<(usize, usize, usize, u32)> = None; // (k, t, dim, ell1)
    let mut chain: Option<KeyChain> = None;
    let mut shares: BTreeMap<u64, Vec<(Vec<Vec<f64>>, Vec<f64>)>> = BTreeMap::new();
    let mut centroid_bodies: BTreeMap<u64, Vec<u8>> = BTreeMap::new();

    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let logged: LoggedMessage = serde_json::from_str(line)?;
        match &logged.message {
            Message::Header { k, t, dim, ell1, .. } => {
                if header.is_none() {
                    header = Some((*k, *t, *dim, *ell1));
                }
            }
            Message::Init { keys, .. } => {
                if chain.is_none() {
                    let (.., ell1) = header.ok_or_else(|| malformed("initial keys precede the header"))?;
                    chain = Some(KeyChain::new(*keys, ell1));
                }
            }
            Message::Shares { round, masked_sums, masked_counts, .. } => {
                shares
                    .entry(*round)
                    .or_default()
                    .push((masked_sums.clone(), masked_counts.clone()));
            }
            Message::Centroids { round, .. } => {
                // Every receiver's copy carries identical bytes; keep one.
                if !centroid_bodies.contains_key(round) {
                    centroid_bodies.insert(*round, logged.message.encode()?);
                }
            }
            _ => {}
        }
    }

    let (k, t, dim, _) = header.ok_or_else(|| malformed("no header message"))?;
    let mut chain = chain.ok_or_else(|| malformed("no initial keys"))?;
    let compared_values = (k * dim) as f64;

    let mut out = Vec::new();
    let mut prev_x: Option<f64> = None;
    for (&round, batch) in &shares {
        let keys = chain.current();
        if keys.round != round {
            return Err(malformed(format!(
                "share rounds are not consecutive: expected {}, found {round}",
                keys.round
            )));
        }
        if batch.len() != t - 1 {
            return Err(malformed(format!(
                "round {round} has {} share messages for {} compute servers",
                batch.len(),
                t - 1
            )));
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0.0; k];
        for (masked_sums, masked_counts) in batch {
            if masked_sums.len() != k || masked_counts.len() != k {
                return Err(malformed(format!("round {round} share has wrong cluster count")));
            }
            for (j, (s, &c)) in masked_sums.iter().zip(masked_counts).enumerate() {
                if s.len() != dim {
                    return Err(malformed(format!("round {round} share has wrong dimension")));
                }
                for (acc, v) in sums[j].iter_mut().zip(s) {
                    *acc += v;
                }
                counts[j] += c;
            }
        }

        let mut d_vecs = Vec::new();
        let mut m_vals = Vec::new();
        let mut clusters_skipped = Vec::new();
        for j in 0..k {
            if counts[j] == 0.0 {
                clusters_skipped.push(j);
                continue;
            }
            d_vecs.push(sums[j].iter().map(|v| v / keys.x).collect::<Vec<f64>>());
            m_vals.push(counts[j] / keys.y);
        }
        if d_vecs.is_empty() {
            return Err(malformed(format!("round {round} has no nonempty clusters")));
        }
        let ratio = sum_dij_over_mij(&d_vecs, &m_vals)?;
        let kd = kd_aggregator_ratio(keys.x, keys.y, ratio)?;
        let same = prev_x.map(|px| kd_same_mask(px, keys.x, compared_values)).transpose()?;
        out.push(RoundLeakage {
            round,
            x: keys.x,
            y: keys.y,
            sum_dij_over_mij: ratio,
            kd_aggregator_ratio: kd,
            kd_aggregator_ratio_abs: kd.abs(),
            kd_same_mask: same,
            kd_same_mask_abs: same.map(f64::abs),
            clusters_skipped,
        });
        prev_x = Some(keys.x);

        let body = centroid_bodies
            .get(&round)
            .ok_or_else(|| malformed(format!("round {round} has shares but no centroid broadcast")))?;
        chain.advance(body);
    }
    Ok(out)
}
