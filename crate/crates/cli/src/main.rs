//! Command-line front end.
//!
//! Exit codes: 0 success, 1 failed checks, 2 usage or parse error, 3 size
//! guard. The guard defaults to n <= 9 and can be raised with --max-n or the
//! HASSETT_CHOW_MAX_N environment variable.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use hassett_chow::export::{
    full_report, poset_dot, presentation_json_weightless, report_json, report_text, table_json,
};
use hassett_chow::presentation::chow_groups_from_table;
use hassett_chow::strata::enumerate_strata;
use hassett_chow::verify::{run_verify, VerifyConfig};
use hassett_chow::weights::{
    chamber_signature_of, format_rational, parse_rational, ChamberSignature, Rational, WeightDatum,
    WeightFamily,
};

const DEFAULT_GUARD: usize = 9;

const EXIT_CHECKS: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_GUARD: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hassett-chow",
    version,
    about = "Strata, relations and Chow groups of moduli of weighted pointed stable curves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Args)]
struct OutputOpts {
    /// Output format
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the report to a file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Raise the default size guard (n <= 9)
    #[arg(long)]
    max_n: Option<usize>,
    /// Worker threads for enumeration/relations (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: strata, relations, Betti/Chow ranks, torsion, checks
    Compute {
        /// Comma-separated weights, e.g. 1,1,1/3,0.25
        #[arg(long)]
        weights: String,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// List the strata, optionally restricted to one dimension
    Strata {
        #[arg(long)]
        weights: String,
        /// Only strata of this complex dimension
        #[arg(long)]
        dim: Option<usize>,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Compare two weight data: chamber equality and both presentations
    Compare {
        weights_a: String,
        weights_b: String,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Walls and per-chamber reports along a one-parameter family
    Sweep {
        /// Family entries, e.g. 1,1,eps,eps,eps
        #[arg(long)]
        family: String,
        /// Parameter interval as lo,hi (default 0,1)
        #[arg(long, default_value = "0,1")]
        range: String,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Run the randomized invariant suite
    Verify {
        /// Largest number of marked points to sample
        #[arg(long, default_value_t = 5)]
        max_n: usize,
        /// Number of random chambers
        #[arg(long, default_value_t = 25)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[command(flatten)]
        output: OutputOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

fn usage_err(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Compute { weights, output } => {
            configure_jobs(&output)?;
            let datum = parse_weights(&weights, &output)?;
            cmd_compute(&datum, &output)
        }
        Command::Strata {
            weights,
            dim,
            output,
        } => {
            configure_jobs(&output)?;
            let datum = parse_weights(&weights, &output)?;
            cmd_strata(&datum, dim, &output)
        }
        Command::Compare {
            weights_a,
            weights_b,
            output,
        } => {
            configure_jobs(&output)?;
            let a = parse_weights(&weights_a, &output)?;
            let b = parse_weights(&weights_b, &output)?;
            if a.n() != b.n() {
                return Err(usage_err(format!(
                    "cannot compare data with {} and {} points",
                    a.n(),
                    b.n()
                )));
            }
            cmd_compare(&a, &b, &output)
        }
        Command::Sweep {
            family,
            range,
            output,
        } => {
            configure_jobs(&output)?;
            cmd_sweep(&family, &range, &output)
        }
        Command::Verify {
            max_n,
            trials,
            seed,
            output,
        } => {
            configure_jobs(&output)?;
            guard(max_n, &output)?;
            cmd_verify(max_n, trials, seed, &output)
        }
    }
}

fn configure_jobs(output: &OutputOpts) -> Result<(), CliError> {
    if let Some(jobs) = output.jobs {
        if jobs == 0 {
            return Err(usage_err("--jobs must be positive"));
        }
        // ignore failure when a global pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    Ok(())
}

fn guard_limit(output: &OutputOpts) -> usize {
    output
        .max_n
        .or_else(|| {
            std::env::var("HASSETT_CHOW_MAX_N")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(DEFAULT_GUARD)
}

fn guard(n: usize, output: &OutputOpts) -> Result<(), CliError> {
    let limit = guard_limit(output);
    if n > limit {
        return Err(CliError {
            code: EXIT_GUARD,
            message: format!(
                "n = {n} exceeds the guard (n <= {limit}); raise it with --max-n or HASSETT_CHOW_MAX_N"
            ),
        });
    }
    Ok(())
}

fn parse_weights(input: &str, output: &OutputOpts) -> Result<WeightDatum, CliError> {
    let datum = WeightDatum::parse(input).map_err(|e| usage_err(e.to_string()))?;
    guard(datum.n(), output)?;
    Ok(datum)
}

fn emit(output: &OutputOpts, content: &str) -> Result<(), CliError> {
    match &output.out {
        Some(path) => fs::write(path, content).map_err(|e| CliError {
            code: EXIT_USAGE,
            message: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn json_string(value: &serde_json::Value) -> String {
    serde_json::to_string_pretty(value).expect("json serialization is infallible")
}

fn cmd_compute(datum: &WeightDatum, output: &OutputOpts) -> Result<ExitCode, CliError> {
    let table = enumerate_strata(datum);
    let (p, checks, poly) = full_report(&table);
    let content = match output.format {
        Format::Json => json_string(&report_json(&table, &p, &checks, &poly)),
        Format::Text | Format::Dot => report_text(&table, &p, &checks, &poly),
    };
    emit(output, &content)?;
    Ok(if checks.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECKS)
    })
}

fn cmd_strata(
    datum: &WeightDatum,
    dim: Option<usize>,
    output: &OutputOpts,
) -> Result<ExitCode, CliError> {
    let table = enumerate_strata(datum);
    if let Some(d) = dim {
        if d > table.max_dim() {
            return Err(usage_err(format!(
                "dimension {d} exceeds the maximum {}",
                table.max_dim()
            )));
        }
    }
    let dims: Vec<usize> = match dim {
        Some(d) => vec![d],
        None => (0..=table.max_dim()).collect(),
    };
    let content = match output.format {
        Format::Dot => poset_dot(&table),
        Format::Json => {
            let mut value = table_json(&table);
            if let Some(d) = dim {
                let obj = value.as_object_mut().unwrap();
                let list = obj["dims"][d.to_string()].clone();
                obj.insert("dims".into(), json!({ d.to_string(): list }));
                obj.insert(
                    "counts".into(),
                    json!({ d.to_string(): table.strata(d).len() }),
                );
            }
            json_string(&value)
        }
        Format::Text => {
            let mut out = format!("weights {datum}\n");
            for d in dims {
                out.push_str(&format!(
                    "dimension {d}: {} strata\n",
                    table.strata(d).len()
                ));
                for (i, tree) in table.strata(d).iter().enumerate() {
                    out.push_str(&format!("  [{i}] {tree}\n"));
                }
            }
            out
        }
    };
    emit(output, &content)?;
    Ok(ExitCode::SUCCESS)
}

fn signature_json(sig: &ChamberSignature) -> serde_json::Value {
    json!(sig
        .mergeable_sets()
        .map(|s| s.labels().collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn cmd_compare(a: &WeightDatum, b: &WeightDatum, output: &OutputOpts) -> Result<ExitCode, CliError> {
    let same = a.same_chamber(b);
    let (ta, tb) = (enumerate_strata(a), enumerate_strata(b));
    let (pa, pb) = (chow_groups_from_table(&ta), chow_groups_from_table(&tb));
    let identical = presentation_json_weightless(&pa) == presentation_json_weightless(&pb)
        && hassett_chow::export::table_json_weightless(&ta)
            == hassett_chow::export::table_json_weightless(&tb);
    if same && !identical {
        return Err(CliError {
            code: EXIT_CHECKS,
            message: "same chamber but outputs differ: invariance violated".into(),
        });
    }
    let content = match output.format {
        Format::Json => json_string(&json!({
            "same_chamber": same,
            "identical_output": identical,
            "a": {
                "weights": a.to_strings(),
                "signature": signature_json(&a.chamber_signature()),
                "betti": pa.betti_vector(),
            },
            "b": {
                "weights": b.to_strings(),
                "signature": signature_json(&b.chamber_signature()),
                "betti": pb.betti_vector(),
            },
        })),
        Format::Text | Format::Dot => {
            let mut out = String::new();
            out.push_str(&format!("A = {a}\nB = {b}\n"));
            out.push_str(&format!(
                "same chamber: {}\n",
                if same { "yes" } else { "no" }
            ));
            if same {
                out.push_str("outputs are byte-identical\n");
            } else {
                let sig_a = a.chamber_signature();
                let sig_b = b.chamber_signature();
                out.push_str(&format!(
                    "signature A ({} sets): {:?}\n",
                    sig_a.len(),
                    sig_a.mergeable_sets().collect::<Vec<_>>()
                ));
                out.push_str(&format!(
                    "signature B ({} sets): {:?}\n",
                    sig_b.len(),
                    sig_b.mergeable_sets().collect::<Vec<_>>()
                ));
            }
            out.push_str(&format!("betti A: {:?}\n", pa.betti_vector()));
            out.push_str(&format!("betti B: {:?}\n", pb.betti_vector()));
            out
        }
    };
    emit(output, &content)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_range(range: &str) -> Result<(Rational, Rational), CliError> {
    let (lo, hi) = range
        .split_once(',')
        .ok_or_else(|| usage_err("--range expects lo,hi"))?;
    let lo = parse_rational(lo).map_err(|e| usage_err(e.to_string()))?;
    let hi = parse_rational(hi).map_err(|e| usage_err(e.to_string()))?;
    Ok((lo, hi))
}

fn cmd_sweep(family: &str, range: &str, output: &OutputOpts) -> Result<ExitCode, CliError> {
    let (lo, hi) = parse_range(range)?;
    let fam = WeightFamily::parse(family, lo, hi).map_err(|e| usage_err(e.to_string()))?;
    guard(fam.n(), output)?;
    let walls = fam.find_walls();

    struct Chamber {
        interval: (Rational, Rational),
        sample: Rational,
        signature: ChamberSignature,
        report: Option<(Vec<usize>, Vec<usize>)>, // (betti, strata counts)
    }
    let mut chambers: Vec<Chamber> = Vec::new();
    for (interval, sample) in fam.chambers() {
        let signature = chamber_signature_of(&fam.evaluate_raw(&sample));
        // adjacent intervals with identical signatures merge
        if let Some(last) = chambers.last_mut() {
            if last.signature == signature {
                last.interval.1 = interval.1.clone();
                continue;
            }
        }
        let report = fam.evaluate(&sample).ok().map(|datum| {
            let table = enumerate_strata(&datum);
            let p = chow_groups_from_table(&table);
            (p.betti_vector(), table.counts())
        });
        chambers.push(Chamber {
            interval,
            sample,
            signature,
            report,
        });
    }

    let content = match output.format {
        Format::Json => {
            let chambers_json: Vec<serde_json::Value> = chambers
                .iter()
                .map(|c| {
                    json!({
                        "interval": [format_rational(&c.interval.0), format_rational(&c.interval.1)],
                        "sample": format_rational(&c.sample),
                        "signature": signature_json(&c.signature),
                        "betti": c.report.as_ref().map(|(b, _)| b.clone()),
                        "strata_counts": c.report.as_ref().map(|(_, s)| s.clone()),
                        "stable": c.report.is_some(),
                    })
                })
                .collect();
            json_string(&json!({
                "family": family,
                "range": [format_rational(fam.domain().0), format_rational(fam.domain().1)],
                "walls": walls.iter().map(format_rational).collect::<Vec<_>>(),
                "chambers": chambers_json,
            }))
        }
        Format::Text | Format::Dot => {
            let mut out = format!("family  {family} on ({range})\n");
            out.push_str(&format!(
                "walls   [{}]\n",
                walls
                    .iter()
                    .map(format_rational)
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
            for c in &chambers {
                let span = format!(
                    "({}, {})",
                    format_rational(&c.interval.0),
                    format_rational(&c.interval.1)
                );
                match &c.report {
                    Some((betti, counts)) => out.push_str(&format!(
                        "chamber {span} sample {}: betti {:?}, strata {:?}\n",
                        format_rational(&c.sample),
                        betti,
                        counts
                    )),
                    None => out.push_str(&format!(
                        "chamber {span} sample {}: unstable (total weight <= 2)\n",
                        format_rational(&c.sample)
                    )),
                }
            }
            out
        }
    };
    emit(output, &content)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(
    max_n: usize,
    trials: usize,
    seed: u64,
    output: &OutputOpts,
) -> Result<ExitCode, CliError> {
    let outcome = run_verify(&VerifyConfig {
        max_n,
        trials,
        seed,
        mutation: None,
    });
    let content = match output.format {
        Format::Json => json_string(&json!({
            "seed": outcome.seed,
            "max_n": max_n,
            "trials": trials,
            "cases": outcome.cases,
            "passed": outcome.passed(),
            "failures": outcome
                .failures
                .iter()
                .map(|f| json!({
                    "n": f.n,
                    "weights": f.weights,
                    "check": f.check,
                    "detail": f.detail,
                }))
                .collect::<Vec<_>>(),
        })),
        Format::Text | Format::Dot => {
            let mut out = format!(
                "verify: seed {seed}, {} cases, {}\n",
                outcome.cases,
                if outcome.passed() { "all passed" } else { "FAILURES" }
            );
            if let Some(min) = outcome.minimized() {
                out.push_str(&format!(
                    "minimized counterexample: n={} weights {} check {}\n  {}\n",
                    min.n, min.weights, min.check, min.detail
                ));
                for f in &outcome.failures {
                    out.push_str(&format!(
                        "failure: n={} {} {}: {}\n",
                        f.n, f.weights, f.check, f.detail
                    ));
                }
            }
            out
        }
    };
    emit(output, &content)?;
    Ok(if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECKS)
    })
}
