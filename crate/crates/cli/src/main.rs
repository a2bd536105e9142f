//! `statechan` command-line front end.
//!
//! Exit codes: 0 when every check passes, 2 when an invariant is violated, 1 on
//! usage or input errors.

mod summary;

use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use statechan::crypto::nizk::statement;
use statechan::crypto::{nizk_prove, nizk_prove_with_nonce, nizk_verify, NizkProof, Point, Scalar};
use statechan::sim::{
    check_invariants, ideal_outcome, run_scenario, sweep_cases, IdealOutcome, Protocol, RunOptions, Scenario, SimError,
    Trace,
};

const USAGE: u8 = 1;
const VIOLATION: u8 = 2;

#[derive(Parser)]
#[command(name = "statechan", version, about = "Simulate state-channel contracts and check their settlement guarantees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and check its trace.
    Run(RunArgs),
    /// Run every strategy in the deviation grid.
    Sweep(SweepArgs),
    /// Re-check a saved trace.
    Check {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Discrete-log equality proofs.
    Nizk {
        #[command(subcommand)]
        op: NizkOp,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Summary,
}

#[derive(Parser)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long, env = "STATECHAN_SEED")]
    seed: Option<u64>,
    /// Where to write the JSON trace.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "summary")]
    format: Format,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Msfe,
    Mscd,
    Duplex,
    All,
}

#[derive(Parser)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "all")]
    protocol: ProtocolArg,
    /// Party counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    n: Vec<usize>,
    /// Executions per scenario; every step of each is an abort point.
    #[arg(long, default_value_t = 2)]
    max_abort_points: u32,
    #[arg(long, env = "STATECHAN_SEED", default_value_t = 1)]
    seed: u64,
    /// Largest party count checked against the ideal functionality.
    #[arg(long, default_value_t = 3)]
    ideal_up_to: usize,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Subcommand)]
enum NizkOp {
    /// Prints `KX KY s`.
    Prove {
        /// Witness scalar.
        #[arg(long)]
        x: String,
        /// Second base point; the first is the curve generator.
        #[arg(long)]
        h: String,
        /// Fixed nonce, for reproducible proofs.
        #[arg(long)]
        k: Option<String>,
        #[arg(long, env = "STATECHAN_SEED")]
        seed: Option<u64>,
    },
    /// Prints the statement `X Y` for a witness.
    Public {
        #[arg(long)]
        x: String,
        #[arg(long)]
        h: String,
    },
    /// Prints 1 if the proof verifies, else 0. Reads `KX KY s` from stdin when
    /// the proof is not given.
    Verify {
        #[arg(long)]
        h: String,
        #[arg(long = "public-x")]
        big_x: String,
        #[arg(long = "public-y")]
        big_y: String,
        proof: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let code = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Check { trace } => cmd_check(&trace),
        Command::Nizk { op } => cmd_nizk(op),
    };
    match code {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(USAGE)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&args.scenario).with_context(|| format!("reading {}", args.scenario.display()))?;
    let mut scenario = Scenario::from_json(&text)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let trace = match run_scenario(&scenario, &RunOptions { inject_fault: args.inject_fault }) {
        Ok(t) => t,
        Err(e @ (SimError::Ledger(_) | SimError::HonestAssertion(_))) => {
            eprintln!("run failed: {e}");
            return Ok(VIOLATION);
        }
        Err(e) => return Err(e.into()),
    };
    let report = check_invariants(&trace);
    if let Some(out) = &args.out {
        std::fs::write(out, trace.to_json()).with_context(|| format!("writing {}", out.display()))?;
    }
    match args.format {
        Format::Json if args.out.is_none() => println!("{}", trace.to_json()),
        Format::Json => {}
        Format::Summary => print!("{}", summary::render(&trace, &report)),
    }
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    Ok(if report.passed() { 0 } else { VIOLATION })
}

fn cmd_check(path: &PathBuf) -> Result<u8> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let trace = Trace::from_json(&text).context("parsing trace")?;
    let report = check_invariants(&trace);
    print!("{}", summary::render(&trace, &report));
    Ok(if report.passed() { 0 } else { VIOLATION })
}

fn cmd_sweep(args: SweepArgs) -> Result<u8> {
    let protocols = match args.protocol {
        ProtocolArg::Msfe => vec![Protocol::Msfe],
        ProtocolArg::Mscd => vec![Protocol::Mscd],
        ProtocolArg::Duplex => vec![Protocol::Duplex],
        ProtocolArg::All => vec![Protocol::Msfe, Protocol::Mscd, Protocol::Duplex],
    };
    if args.n.iter().any(|&n| n < 2) || args.max_abort_points == 0 {
        bail!("need at least two parties and one execution");
    }
    let options = RunOptions { inject_fault: args.inject_fault };
    let (mut cases, mut ideal_checked, mut failed) = (0usize, 0usize, Vec::new());
    for protocol in protocols {
        for &n in &args.n {
            for case in sweep_cases(protocol, n, args.max_abort_points, args.seed) {
                cases += 1;
                let trace = match run_scenario(&case.scenario, &options) {
                    Ok(t) => t,
                    Err(e) => {
                        failed.push(format!("{}: {e}", case.name));
                        continue;
                    }
                };
                let mut problems: Vec<String> = check_invariants(&trace).violations.iter().map(|v| v.to_string()).collect();
                if n <= args.ideal_up_to {
                    if let ideal @ IdealOutcome::Mapped { .. } = ideal_outcome(&case.scenario) {
                        ideal_checked += 1;
                        if let Err(e) = ideal.matches(&trace) {
                            problems.push(format!("[ideal] {e}"));
                        }
                    }
                }
                if !problems.is_empty() {
                    failed.push(format!("{}: {}", case.name, problems.join("; ")));
                }
            }
        }
    }
    println!("{cases} scenarios, {ideal_checked} checked against the ideal functionality, {} failed", failed.len());
    if let Some(first) = failed.first() {
        println!("first failure: {first}");
        for f in &failed[1..] {
            eprintln!("failure: {f}");
        }
        return Ok(VIOLATION);
    }
    println!("all pass");
    Ok(0)
}

fn scalar(s: &str) -> Result<Scalar> {
    Scalar::from_hex(s.trim()).map_err(|e| anyhow!("bad scalar {s:?}: {e}"))
}

fn point(s: &str) -> Result<Point> {
    Point::from_hex(s.trim()).map_err(|e| anyhow!("bad point {s:?}: {e}"))
}

fn cmd_nizk(op: NizkOp) -> Result<u8> {
    let g = Point::generator();
    match op {
        NizkOp::Prove { x, h, k, seed } => {
            let (x, h) = (scalar(&x)?, point(&h)?);
            let proof = match k {
                Some(k) => nizk_prove_with_nonce(&x, &g, &h, &scalar(&k)?)?,
                None => match seed {
                    Some(seed) => nizk_prove(&x, &g, &h, &mut ChaCha20Rng::seed_from_u64(seed))?,
                    None => nizk_prove(&x, &g, &h, &mut rand::rngs::OsRng)?,
                },
            };
            println!("{} {} {}", proof.kx.to_hex(), proof.ky.to_hex(), proof.s.to_hex());
        }
        NizkOp::Public { x, h } => {
            let (big_x, big_y) = statement(&scalar(&x)?, &g, &point(&h)?);
            println!("{} {}", big_x.to_hex(), big_y.to_hex());
        }
        NizkOp::Verify { h, big_x, big_y, proof } => {
            let parts = if proof.is_empty() {
                let mut buf = String::new();
                std::io::stdin().read_to_string(&mut buf)?;
                buf.split_whitespace().map(str::to_owned).collect()
            } else {
                proof
            };
            let [kx, ky, s] = parts.as_slice() else {
                bail!("expected a proof `KX KY s`, got {} values", parts.len());
            };
            let proof = NizkProof {
                kx: point(kx)?,
                ky: point(ky)?,
                s: scalar(s)?,
            };
            let ok = nizk_verify(&g, &point(&h)?, &point(&big_x)?, &point(&big_y)?, &proof);
            println!("{}", ok as u8);
        }
    }
    Ok(0)
}
