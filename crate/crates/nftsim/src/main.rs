//! Command-line entry point: simulation, trace verification, law checking,
//! and the notice case study.
//!
//! Exit codes: 0 success, 1 verification or law violation, 2 usage/config
//! error.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nftsim::laws::{self, History};
use nftsim::ledger;
use nftsim::netsim::{self, Schedule, ScheduleEntry, SimConfig};
use nftsim::notice::{self, Method, NoticeScenario};

#[derive(Parser)]
#[command(name = "nftsim", version, about = "NFT ledger simulator and verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a schedule against a configured network and write a trace file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a trace file, check digests, the six laws, and the
    /// certified-ownership property.
    Verify {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Check the six ownership laws over a persisted chain.
    CheckLaws { chainfile: PathBuf },
    /// Serve a notice by one method and print its property profile.
    ServeNotice {
        #[arg(long)]
        method: MethodArg,
        #[arg(long, default_value_t = true)]
        email_delivered: bool,
    },
    /// Print the 5x4 method/property table.
    NoticeTable,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Alpha,
    Beta,
    Gamma,
    Delta,
    Epsilon,
}

impl From<MethodArg> for Method {
    fn from(value: MethodArg) -> Method {
        match value {
            MethodArg::Alpha => Method::DirectOfficer,
            MethodArg::Beta => Method::RegisteredPost,
            MethodArg::Gamma => Method::Email,
            MethodArg::Delta => Method::Newspaper,
            MethodArg::Epsilon => Method::NftToWallet,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(clean) => {
            if clean {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<bool, String> {
    match command {
        Command::Simulate { config, schedule, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let sched = load_schedule(&schedule)?;
            let trace = netsim::run(&cfg, &sched).map_err(|e| e.to_string())?;
            let mut file = File::create(&out).map_err(|e| e.to_string())?;
            netsim::save_trace(&trace, &mut file).map_err(|e| e.to_string())?;
            file.flush().map_err(|e| e.to_string())?;
            let applied = trace
                .records
                .iter()
                .filter(|r| matches!(r.event, netsim::TickEvent::Applied { .. }))
                .count();
            println!(
                "simulated {} ticks, {} blocks appended, trace written to {}",
                trace.records.len(),
                applied,
                out.display()
            );
            Ok(true)
        }
        Command::Verify { trace } => {
            let file = File::open(&trace).map_err(|e| e.to_string())?;
            let parsed = netsim::load_trace(BufReader::new(file)).map_err(|e| e.to_string())?;
            let replayed =
                netsim::run(&parsed.config, &parsed.schedule).map_err(|e| e.to_string())?;
            if replayed.records != parsed.records {
                println!("FAIL replay: trace does not match a deterministic re-run");
                return Ok(false);
            }
            println!("ok: replay matches recorded digests");

            let mut clean = true;
            let history = replayed.history();
            for report in laws::check_all(&history) {
                if report.holds() {
                    println!("ok: law {} holds", report.law);
                } else {
                    clean = false;
                    for v in &report.violations {
                        println!("FAIL law {} at tick {}: {}", report.law, v.tick, v.description);
                    }
                }
            }
            let theorem = netsim::verify_theorem1(&replayed);
            if theorem.ok() {
                println!("ok: every token publicly certified among all agents");
            } else {
                clean = false;
                for f in &theorem.failures {
                    println!("FAIL certification: {f}");
                }
            }
            Ok(clean)
        }
        Command::CheckLaws { chainfile } => {
            let file = File::open(&chainfile).map_err(|e| e.to_string())?;
            let chain = ledger::load_chain(BufReader::new(file)).map_err(|e| e.to_string())?;
            let history = History::from_chain(&chain);
            let mut clean = true;
            for report in laws::check_all(&history) {
                if report.holds() {
                    println!("ok: law {} holds", report.law);
                } else {
                    clean = false;
                    for v in &report.violations {
                        println!("FAIL law {} at tick {}: {}", report.law, v.tick, v.description);
                    }
                }
            }
            Ok(clean)
        }
        Command::ServeNotice { method, email_delivered } => {
            let mut scenario = NoticeScenario::new(method.into());
            scenario.email_delivered = email_delivered;
            let profile = notice::profile(&scenario).map_err(|e| e.to_string())?;
            let mark = |b: bool| if b { "yes" } else { "no" };
            println!(
                "method {}: a={} b={} c={} d={}",
                scenario.method.label(),
                mark(profile.a),
                mark(profile.b),
                mark(profile.c),
                mark(profile.d)
            );
            Ok(true)
        }
        Command::NoticeTable => {
            let table = notice::method_table().map_err(|e| e.to_string())?;
            println!("method   (a) (b) (c) (d)");
            for (method, profile) in &table {
                let mark = |b: bool| if b { "\u{2713}" } else { "\u{2717}" };
                println!(
                    "{:<8} {:>3} {:>3} {:>3} {:>3}",
                    method.label(),
                    mark(profile.a),
                    mark(profile.b),
                    mark(profile.c),
                    mark(profile.d)
                );
            }
            Ok(true)
        }
    }
}

fn load_config(path: &PathBuf) -> Result<SimConfig, String> {
    // one self-describing record per line, same style as chain persistence
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut config = SimConfig::default();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| format!("config line {}: {e}", idx + 1))?;
        let kind = value
            .get("kind")
            .and_then(|k| k.as_str())
            .ok_or_else(|| format!("config line {}: missing kind", idx + 1))?;
        let field = |name: &str| -> Result<String, String> {
            value
                .get(name)
                .and_then(|v| v.as_str())
                .map(str::to_string)
                .ok_or_else(|| format!("config line {}: missing {name}", idx + 1))
        };
        match kind {
            "node" => config.nodes.push(field("id")?),
            "wallet" => config.wallets.push(netsim::WalletCfg {
                owner: field("owner")?,
                node: field("node")?,
            }),
            "deposit" => config.deposits.push(netsim::DepositCfg {
                agent: field("agent")?,
                amount: value
                    .get("amount")
                    .and_then(|v| v.as_u64())
                    .ok_or_else(|| format!("config line {}: missing amount", idx + 1))?,
            }),
            "seed" => {
                config.seed = value
                    .get("value")
                    .and_then(|v| v.as_u64())
                    .ok_or_else(|| format!("config line {}: missing value", idx + 1))?;
            }
            other => return Err(format!("config line {}: unknown kind {other:?}", idx + 1)),
        }
    }
    Ok(config)
}

fn load_schedule(path: &PathBuf) -> Result<Schedule, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut schedule = Schedule::default();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| format!("schedule line {}: {e}", idx + 1))?;
        if value.get("kind").and_then(|k| k.as_str()) == Some("ticks") {
            schedule.min_ticks = value
                .get("value")
                .and_then(|v| v.as_u64())
                .ok_or_else(|| format!("schedule line {}: missing value", idx + 1))?;
            continue;
        }
        let entry: ScheduleEntry = serde_json::from_value(value)
            .map_err(|e| format!("schedule line {}: {e}", idx + 1))?;
        schedule.entries.push(entry);
    }
    Ok(schedule)
}
