use std::fs;
use std::io::{self, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use parley_core::bargaining::BargainingInstance;
use parley_core::config::Config;
use parley_core::mechanism::{
    check_attacker_dominance, check_victim_optimality, trace_fixed, MechanismParams, ScaledParams, UniformPrior,
};
use parley_core::{format_decimal, parse_rational, rubinstein_split, spne, FixedReport, ReputationParams};
use parley_net::bench::{bench, is_monotone, render_table, write_csv, DEFAULT_GRID};
use parley_net::{
    parse_seed, persist_transcript, run_attacker, run_victim, serve, NegotiationConfig, Role, SessionOptions,
    SessionReport,
};

const EXIT_CONFIG: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "parley", version, about = "Ransom negotiation analysis and two-party protocol")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium offer schedule of the alternating-offers game.
    Offers {
        #[command(flatten)]
        game: GameArgs,
        /// Print CSV instead of a table.
        #[arg(long)]
        csv: bool,
    },
    /// Number of rounds the game lasts.
    Horizon {
        #[command(flatten)]
        game: GameArgs,
    },
    /// Infinite-horizon split for a flat loss.
    Rubinstein {
        #[arg(long, value_parser = money)]
        v: BigRational,
        #[arg(long, value_parser = money)]
        r_max: BigRational,
        #[arg(long, value_parser = money)]
        r_min: BigRational,
    },
    /// Subgame-perfect equilibrium of the single-stage game.
    StageGame(StageGameArgs),
    /// The negotiation mechanism in the clear.
    Mechanism {
        #[command(subcommand)]
        command: MechanismCommand,
    },
    /// Run the victim (garbler) side of the protocol.
    Victim {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        listen: String,
        /// Hex seed for reproducible test runs. Exposes the coin shares.
        #[arg(long)]
        seed: Option<String>,
        /// Write the session transcript here.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Per-step timeout in seconds.
        #[arg(long, default_value_t = 10.0)]
        timeout: f64,
        /// Keep accepting sessions, each on its own thread. Optionally stop after N.
        #[arg(long, num_args = 0..=1, default_missing_value = "0")]
        serve: Option<usize>,
    },
    /// Run the attacker (evaluator) side of the protocol.
    Attacker {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        connect: String,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long, default_value_t = 10.0)]
        timeout: f64,
    },
    /// Loopback timing over k_theta in {8,16} and k in {8,16,32}.
    Bench {
        #[arg(long, value_parser = money, default_value = "1/4")]
        q: BigRational,
        #[arg(long, default_value_t = 21)]
        runs: usize,
        /// Also write the results as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GameArgs {
    /// Key-value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated per-round value losses.
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long)]
    tail: Option<String>,
    #[arg(long)]
    l0: Option<String>,
    #[arg(long)]
    round_length: Option<String>,
    /// Defaults to the total value, i.e. no cap.
    #[arg(long)]
    r_max: Option<String>,
    #[arg(long)]
    r_min: Option<String>,
    /// Odd horizon to use instead of the derived one.
    #[arg(long)]
    rounds: Option<usize>,
}

#[derive(Args)]
struct StageGameArgs {
    #[arg(long, value_parser = money)]
    tau_g: BigRational,
    #[arg(long, value_parser = money)]
    tau_l: BigRational,
    #[arg(long, value_parser = money)]
    kappa_g: BigRational,
    #[arg(long, value_parser = money)]
    kappa_l: BigRational,
    #[arg(long, value_parser = money)]
    c_r: BigRational,
    #[arg(long, value_parser = money)]
    c_d: BigRational,
    #[arg(long, value_parser = money)]
    r_f: BigRational,
    #[arg(long, value_parser = money)]
    v: BigRational,
    #[arg(long, value_parser = money)]
    r_max: BigRational,
}

#[derive(Subcommand)]
enum MechanismCommand {
    /// Fixed-point outcome for given reports and combined coins.
    Eval {
        #[arg(long, value_parser = money)]
        q: BigRational,
        /// Defaults to 1 / (2(1 - q)).
        #[arg(long, value_parser = money)]
        p_bar: Option<BigRational>,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        k_theta: u32,
        #[arg(long)]
        theta_v: u64,
        #[arg(long)]
        theta_a: u64,
        #[arg(long)]
        s0: u64,
        #[arg(long)]
        s1: u64,
    },
    /// Grid checks of truthful reporting for both parties.
    VerifyBic {
        #[arg(long, value_parser = money, default_value = "1/4")]
        q: BigRational,
        /// Points per axis of the attacker grid.
        #[arg(long, default_value_t = 64)]
        points: usize,
        /// Victim reports are searched in steps of 2^-bits.
        #[arg(long, default_value_t = 10)]
        step_bits: u32,
        /// True victim valuations checked.
        #[arg(long, default_value_t = 33)]
        victim_points: usize,
    },
}

fn money(s: &str) -> Result<BigRational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Offers { game, csv } => offers(&game, csv),
        Command::Horizon { game } => horizon(&game),
        Command::Rubinstein { v, r_max, r_min } => rubinstein_split(&v, &r_max, &r_min)
            .map(|r| println!("r = {}", format_decimal(&r)))
            .map_err(Failure::config),
        Command::StageGame(args) => stage_game(&args),
        Command::Mechanism { command } => mechanism(command),
        Command::Victim {
            config,
            listen,
            seed,
            transcript,
            timeout,
            serve,
        } => victim(&config, &listen, seed.as_deref(), transcript.as_deref(), timeout, serve),
        Command::Attacker {
            config,
            connect,
            seed,
            transcript,
            timeout,
        } => attacker(&config, &connect, seed.as_deref(), transcript.as_deref(), timeout),
        Command::Bench { q, runs, csv } => run_bench(&q, runs, csv.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("parley: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_config(path: &Path) -> Result<Config, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    Config::parse(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn instance(game: &GameArgs) -> Result<BargainingInstance<BigRational>, Failure> {
    let mut cfg = match &game.config {
        Some(p) => read_config(p)?,
        None => Config::default(),
    };
    for (key, value) in [
        ("blocks", &game.blocks),
        ("tail", &game.tail),
        ("l0", &game.l0),
        ("round_length", &game.round_length),
        ("r_max", &game.r_max),
        ("r_min", &game.r_min),
    ] {
        if let Some(v) = value {
            cfg.set(key, v.as_str());
        }
    }
    let profile = cfg.loss_profile().map_err(Failure::config)?;
    let r_max = cfg
        .rational("r_max")
        .map_err(Failure::config)?
        .unwrap_or_else(|| profile.total_value());
    let victim = parley_core::VictimParams::new(r_max, profile).map_err(Failure::config)?;
    let r_min = cfg.require_rational("r_min").map_err(Failure::config)?;
    let inst = BargainingInstance::new(victim, r_min).map_err(Failure::config)?;
    Ok(match game.rounds {
        Some(n) => inst.with_horizon(n),
        None => inst,
    })
}

fn offers(game: &GameArgs, csv: bool) -> CliResult {
    let inst = instance(game)?;
    let schedule = inst.schedule().map_err(Failure::config)?;
    if csv {
        let mut wtr = csv::Writer::from_writer(io::stdout());
        let write = |wtr: &mut csv::Writer<io::Stdout>| -> Result<(), csv::Error> {
            wtr.write_record(["round", "offer"])?;
            for (n, r) in schedule.iter() {
                wtr.write_record([n.to_string(), format_decimal(r)])?;
            }
            wtr.flush()?;
            Ok(())
        };
        return write(&mut wtr).map_err(Failure::config);
    }
    let list: Vec<String> = schedule.offers().iter().map(format_decimal).collect();
    println!("N = {}", schedule.horizon());
    println!("offers = [{}]", list.join(", "));
    println!("{:>5}  {:>12}", "round", "offer");
    for (n, r) in schedule.iter() {
        println!("{n:>5}  {:>12}", format_decimal(r));
    }
    Ok(())
}

fn horizon(game: &GameArgs) -> CliResult {
    let inst = instance(game)?;
    let n = inst.resolved_horizon().map_err(Failure::config)?;
    println!("N = {n}");
    println!("R(1, N) = {}", format_decimal(&inst.max_attainable_ransom().map_err(Failure::config)?));
    Ok(())
}

fn stage_game(a: &StageGameArgs) -> CliResult {
    let rep = ReputationParams::new(
        a.tau_g.clone(),
        a.tau_l.clone(),
        a.kappa_g.clone(),
        a.kappa_l.clone(),
        a.c_r.clone(),
        a.c_d.clone(),
    )
    .map_err(Failure::config)?;
    let sol = spne(&rep, &a.r_f, &a.v, &a.r_max).map_err(Failure::config)?;
    let o = &sol.outcome;
    println!("equilibrium = ({}, {})", o.victim_action, o.attacker_action);
    println!("victim payoff = {}", format_decimal(&o.victim_payoff));
    println!("attacker payoff = {}", format_decimal(&o.attacker_payoff));
    println!("regime = {:?}", sol.regime);
    for w in &sol.warnings {
        println!("warning: {w:?}");
    }
    Ok(())
}

fn mechanism(cmd: MechanismCommand) -> CliResult {
    match cmd {
        MechanismCommand::Eval {
            q,
            p_bar,
            k,
            k_theta,
            theta_v,
            theta_a,
            s0,
            s1,
        } => {
            let params = match p_bar {
                Some(p) => MechanismParams::new(q, p, k_theta, k),
                None => MechanismParams::from_q(q, k_theta, k),
            }
            .map_err(Failure::config)?;
            let scaled = ScaledParams::from_params(&params).map_err(Failure::config)?;
            let t = trace_fixed(&scaled, &FixedReport { theta_v, theta_a }, s0, s1).map_err(Failure::config)?;
            println!("p_scale = {}", scaled.p_scale);
            println!("q_scale = {}", scaled.q_scale);
            println!("inv_q_scale = {}", scaled.inv_q_scale);
            println!("r2 = {}", t.r2);
            if let Some(r3) = t.r3 {
                println!("r3 = {r3}");
            }
            println!("branch = {:?}", t.branch);
            println!("r_f = {}", t.outcome.r_f);
            println!("alpha = {}", t.outcome.alpha as u8);
            println!("sigma = {}", t.outcome.sigma as u8);
            Ok(())
        }
        MechanismCommand::VerifyBic {
            q,
            points,
            step_bits,
            victim_points,
        } => {
            let params = MechanismParams::from_q(q, 16, 16).map_err(Failure::config)?;
            let attacker = check_attacker_dominance(&params, points);
            let victim = check_victim_optimality(&params, &UniformPrior::unit(), step_bits, victim_points);
            let line = |name: &str, passed: bool, checked: usize, violations: usize| {
                println!(
                    "{} {name}: {checked} checked, {violations} violations",
                    if passed { "PASS" } else { "FAIL" }
                );
            };
            line("attacker truthfulness", attacker.passed(), attacker.checked, attacker.violations);
            if let Some((gap, tv, ta, report)) = &attacker.worst {
                println!(
                    "  worst gain {} at theta_v = {}, theta_a = {}, report = {}",
                    format_decimal(gap),
                    format_decimal(tv),
                    format_decimal(ta),
                    format_decimal(report)
                );
            }
            line("victim truthfulness", victim.passed(), victim.checked, victim.violations);
            if let Some((gap, theta, _, best)) = &victim.worst {
                println!(
                    "  worst distance {} at theta = {}, best report = {}",
                    format_decimal(gap),
                    format_decimal(theta),
                    format_decimal(best)
                );
            }
            if attacker.passed() && victim.passed() {
                Ok(())
            } else {
                Err(Failure {
                    code: EXIT_CHECK_FAILED,
                    message: "truthfulness check failed".into(),
                })
            }
        }
    }
}

fn session_options(seed: Option<&str>, timeout: f64) -> Result<SessionOptions, Failure> {
    if !(timeout.is_finite() && timeout > 0.0) {
        return Err(Failure::config("timeout must be positive"));
    }
    let seed = seed
        .map(|s| parse_seed(s).ok_or_else(|| Failure::config("seed must be 1 to 32 hex-encoded bytes")))
        .transpose()?;
    Ok(SessionOptions {
        seed,
        step_timeout: Duration::from_secs_f64(timeout),
        ..SessionOptions::default()
    })
}

fn print_report(role: Role, report: &SessionReport) {
    let mut out = io::stdout().lock();
    if let Ok(a) = &report.result {
        let _ = writeln!(out, "role = {role}");
        let _ = writeln!(out, "r_f = {}", a.outcome.r_f);
        let _ = writeln!(out, "alpha = {}", a.outcome.alpha as u8);
        let _ = writeln!(out, "sigma = {}", a.outcome.sigma as u8);
        if let Some(s) = a.shares {
            let _ = writeln!(out, "s0 = {:#x}", s.s0);
            let _ = writeln!(out, "s1 = {:#x}", s.s1);
        }
    }
}

fn finish(role: Role, report: SessionReport, transcript: Option<&Path>) -> CliResult {
    if let Some(path) = transcript {
        persist_transcript(&report.transcript, path)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    }
    print_report(role, &report);
    report.result.map(|_| ()).map_err(|e| Failure {
        code: e.exit_code() as u8,
        message: e.to_string(),
    })
}

fn load_negotiation(path: &Path, role: Role) -> Result<NegotiationConfig, Failure> {
    let cfg = read_config(path)?;
    NegotiationConfig::from_config(&cfg, role).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn victim(
    config: &Path,
    listen: &str,
    seed: Option<&str>,
    transcript: Option<&Path>,
    timeout: f64,
    sessions: Option<usize>,
) -> CliResult {
    let cfg = load_negotiation(config, Role::Victim)?;
    let options = session_options(seed, timeout)?;
    let listener = TcpListener::bind(listen).map_err(|e| Failure {
        code: 3,
        message: format!("cannot listen on {listen}: {e}"),
    })?;
    let Some(limit) = sessions else {
        let (mut stream, _) = listener.accept().map_err(|e| Failure {
            code: 3,
            message: format!("accept failed: {e}"),
        })?;
        let report = run_victim(&mut stream, &cfg, &options);
        return finish(Role::Victim, report, transcript);
    };
    let limit = (limit > 0).then_some(limit);
    let failures = Arc::new(Mutex::new(0usize));
    let counter = Arc::clone(&failures);
    let transcript = transcript.map(Path::to_path_buf);
    serve(listener, Arc::new(cfg), options, limit, move |id, peer, report| {
        if let Some(base) = &transcript {
            let path = base.with_extension(format!("{id}.jsonl"));
            if let Err(e) = persist_transcript(&report.transcript, &path) {
                eprintln!("session {id}: {}: {e}", path.display());
            }
        }
        match &report.result {
            Ok(a) => println!(
                "session {id} {peer}: r_f = {} alpha = {} sigma = {}",
                a.outcome.r_f, a.outcome.alpha as u8, a.outcome.sigma as u8
            ),
            Err(e) => {
                *counter.lock().unwrap() += 1;
                eprintln!("session {id} {peer}: {e}");
            }
        }
    })
    .map_err(|e| Failure {
        code: 3,
        message: format!("accept failed: {e}"),
    })?;
    if *failures.lock().unwrap() > 0 {
        return Err(Failure {
            code: 2,
            message: "some sessions did not complete".into(),
        });
    }
    Ok(())
}

fn attacker(config: &Path, connect: &str, seed: Option<&str>, transcript: Option<&Path>, timeout: f64) -> CliResult {
    let cfg = load_negotiation(config, Role::Attacker)?;
    let options = session_options(seed, timeout)?;
    let mut stream = TcpStream::connect(connect).map_err(|e| Failure {
        code: 3,
        message: format!("cannot connect to {connect}: {e}"),
    })?;
    let report = run_attacker(&mut stream, &cfg, &options);
    finish(Role::Attacker, report, transcript)
}

fn run_bench(q: &BigRational, runs: usize, csv: Option<&Path>) -> CliResult {
    if runs == 0 {
        return Err(Failure::config("runs must be positive"));
    }
    let cells = bench(q, &DEFAULT_GRID, runs).map_err(|e| Failure {
        code: 2,
        message: e.to_string(),
    })?;
    print!("{}", render_table(&cells));
    println!(
        "median over {runs} runs; monotone in both bit widths: {}",
        if is_monotone(&cells) { "yes" } else { "no" }
    );
    if let Some(path) = csv {
        let file = fs::File::create(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        write_csv(&cells, file).map_err(Failure::config)?;
    }
    Ok(())
}
