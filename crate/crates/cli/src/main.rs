use std::path::PathBuf;
use std::process::ExitCode;

use bbm_cli::{run, Experiment, ExperimentConfig, RunError};
use bbm_core::oracles;
use bbm_core::{classify, limiting_free_energy, Complex64, ComplexTemperature};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bbm", version, about = "Branching Brownian motion energy model experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config file.
    Run(RunArgs),
    #[command(name = "tree_moments")]
    TreeMoments(RunArgs),
    #[command(name = "martingale")]
    Martingale(RunArgs),
    #[command(name = "free_energy_scan")]
    FreeEnergyScan(RunArgs),
    #[command(name = "glassy_tail")]
    GlassyTail(RunArgs),
    #[command(name = "isotropy")]
    Isotropy(RunArgs),
    #[command(name = "truncation")]
    Truncation(RunArgs),
    #[command(name = "extremal_max")]
    ExtremalMax(RunArgs),
    #[command(name = "bridge_check")]
    BridgeCheck(RunArgs),
    #[command(name = "cluster_bank")]
    ClusterBank(RunArgs),
    #[command(name = "limit_object")]
    LimitObject(RunArgs),
    /// Evaluate a closed-form oracle.
    #[command(subcommand)]
    Oracle(Oracle),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Oracle {
    /// E|M|^2 of the additive martingale.
    SecondMoment {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 2.0)]
        k: f64,
    },
    /// Many-to-two pair sum.
    PairMoment {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 2.0)]
        k: f64,
    },
    /// Phase and limiting free energy of beta, e.g. `1.2+0.9i`.
    FreeEnergy {
        #[arg(allow_hyphen_values = true)]
        beta: String,
    },
    TailBound {
        x: f64,
    },
    BridgeBound {
        a: f64,
        t: f64,
    },
    Envelope {
        s: f64,
        t: f64,
        gamma: f64,
    },
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn run_command(experiment: Option<Experiment>, args: RunArgs) -> ExitCode {
    let mut cfg = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match ExperimentConfig::from_toml(&text) {
                Ok(c) => c,
                Err(e) => return usage(e),
            },
            Err(e) => return usage(format!("{}: {e}", path.display())),
        },
        None => ExperimentConfig::default(),
    };
    if let Some(e) = experiment {
        cfg.experiment = Some(e);
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if args.replicas.is_some() {
        cfg.replicas = args.replicas;
    }
    if args.out.is_some() {
        cfg.output_dir = args.out;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return usage("--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match run(&cfg) {
        Ok(report) => {
            println!("{}", report.dir.join("manifest.json").display());
            for note in &report.output.notes {
                eprintln!("note: {note}");
            }
            if report.too_many_failures() {
                eprintln!(
                    "error: {} of {} replicas failed",
                    report.output.failed_replicas, report.output.replicas
                );
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(RunError::Usage(u)) => usage(u),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn oracle(o: Oracle) -> ExitCode {
    let result: Result<String, String> = match o {
        Oracle::SecondMoment { sigma, tau, t, k } => oracles::SecondMomentParams::relaxed(sigma, tau, t, k)
            .map(|p| {
                let v = oracles::martingale_second_moment(&p);
                if p.outside_l2_regime {
                    format!("{v} (sigma^2 + tau^2 >= 1: not bounded in L2)")
                } else {
                    v.to_string()
                }
            })
            .map_err(|e| e.to_string()),
        Oracle::PairMoment { sigma, tau, rho, t, k } => {
            oracles::many_to_two_pair_moment(Complex64::new(sigma, rho * tau), rho, tau, t, k)
                .map(|v| v.to_string())
                .map_err(|e| e.to_string())
        }
        Oracle::FreeEnergy { beta } => beta
            .parse::<ComplexTemperature>()
            .map(|b| format!("{} {}", classify(b).tag, limiting_free_energy(b)))
            .map_err(|e| e.to_string()),
        Oracle::TailBound { x } => oracles::gaussian_tail_bound(x).map(|v| v.to_string()).map_err(|e| e.to_string()),
        Oracle::BridgeBound { a, t } => oracles::bridge_barrier_bound(a, t)
            .map(|v| v.to_string())
            .map_err(|e| e.to_string()),
        Oracle::Envelope { s, t, gamma } => oracles::envelope_curve_checked(s, t, gamma)
            .map(|v| v.to_string())
            .map_err(|e| e.to_string()),
    };
    match result {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => usage(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(a) => run_command(None, a),
        Command::TreeMoments(a) => run_command(Some(Experiment::TreeMoments), a),
        Command::Martingale(a) => run_command(Some(Experiment::Martingale), a),
        Command::FreeEnergyScan(a) => run_command(Some(Experiment::FreeEnergyScan), a),
        Command::GlassyTail(a) => run_command(Some(Experiment::GlassyTail), a),
        Command::Isotropy(a) => run_command(Some(Experiment::Isotropy), a),
        Command::Truncation(a) => run_command(Some(Experiment::Truncation), a),
        Command::ExtremalMax(a) => run_command(Some(Experiment::ExtremalMax), a),
        Command::BridgeCheck(a) => run_command(Some(Experiment::BridgeCheck), a),
        Command::ClusterBank(a) => run_command(Some(Experiment::ClusterBank), a),
        Command::LimitObject(a) => run_command(Some(Experiment::LimitObject), a),
        Command::Oracle(o) => oracle(o),
    }
}
