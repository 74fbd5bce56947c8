use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use trustlab::bot::StrategyConfig;
use trustlab::econometrics::{FitOptions, HcVariant, Reference};
use trustlab::questionnaire::QuestionBank;
use trustlab::session::http::AppState;
use trustlab::session::{read_log_dir, ExperimentService, JsonlSink, OperatorConfig};
use trustlab::simulation::{analyze_dir, run_experiment, EffectsFile, SimulationConfig};

#[derive(Parser)]
#[command(name = "trustlab", version, about = "Repeated trust-game experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an experiment and write the export, event log and recovery report.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML file with planted effects and population distributions.
        #[arg(long)]
        effects: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the regression tables on an exported dataset.
    Analyze {
        #[arg(long)]
        data: PathBuf,
        /// Text report path; a JSON copy is written next to it.
        #[arg(long)]
        report: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Run the experiment service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum, default_value_t = Hc::Hc1)]
    hc: Hc,
    /// Use Student-t instead of normal p-values.
    #[arg(long)]
    student_t: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Hc {
    Hc0,
    Hc1,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated HH:MM start times.
    #[arg(long, value_delimiter = ',')]
    slot_times: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory the admin export writes CSV files to.
    #[arg(long)]
    export: Option<PathBuf>,
    /// Run this many simulated subjects through the service, export, and exit.
    #[arg(long)]
    simulate: Option<usize>,
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    bind: Option<String>,
}

type Fallible<T = ()> = Result<T, Box<dyn std::error::Error>>;

fn write(path: &Path, text: &str) -> Fallible {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn simulate(config: SimulationConfig, out: &Path, events: PathBuf) -> Fallible {
    let exp = run_experiment(&config, Some(JsonlSink::create(events)?))?;
    exp.tables.write_to(out)?;
    write(&out.join("sim_report.json"), &exp.report.to_json())?;
    write(&out.join("report.txt"), &exp.analysis.render_text())?;
    for r in &exp.report.recoveries {
        match (r.estimate, r.covered) {
            (Some(est), Some(covered)) => {
                println!("{:<10} planted {:>8.4}  estimate {:>8.4}  covered {}", r.effect, r.planted, est, covered)
            }
            _ => println!("{:<10} planted {:>8.4}  not estimable", r.effect, r.planted),
        }
    }
    println!("rows: trust {} discount {} certainty {}", exp.report.rows[0], exp.report.rows[1], exp.report.rows[2]);
    Ok(())
}

fn serve(args: ServeArgs) -> Fallible {
    let mut op = match &args.config {
        Some(p) => OperatorConfig::load(p)?,
        None => OperatorConfig::default(),
    };
    if let Some(t) = args.slot_times {
        op.slot_times = t;
    }
    if let Some(s) = args.seed {
        op.seed = s;
    }
    if let Some(e) = args.export {
        op.export_dir = Some(e);
    }
    if let Some(e) = args.events {
        op.events_dir = Some(e);
    }
    if let Some(b) = args.bind {
        op.bind = b;
    }
    let strategy = match &op.strategy_table {
        Some(p) => StrategyConfig::load(p)?,
        None => StrategyConfig::shipped(),
    };
    let bank = match &op.questions {
        Some(p) => QuestionBank::load(p)?,
        None => QuestionBank::shipped(),
    };

    if let Some(n) = args.simulate {
        let out = op.export_dir.clone().unwrap_or_else(|| PathBuf::from("export"));
        let mut config = SimulationConfig::new(n, op.seed);
        config.service = op.service();
        config.strategy = strategy;
        config.bank = bank;
        let events = op.events_dir.clone().unwrap_or_else(|| out.join("events"));
        return simulate(config, &out, events);
    }

    let mut svc = match &op.events_dir {
        // resume after a restart; new events append to the same files
        Some(dir) if dir.is_dir() => {
            let logged = read_log_dir(dir)?;
            if !logged.is_empty() {
                eprintln!("resuming from {} logged events", logged.len());
            }
            ExperimentService::restore(op.service(), strategy, bank, &logged)?
        }
        _ => ExperimentService::new(op.service(), strategy, bank)?,
    };
    if let Some(dir) = &op.events_dir {
        svc = svc.with_sink(JsonlSink::create(dir)?);
    }
    let state = AppState::new(svc, op.export_dir.clone());
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&op.bind).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        trustlab::session::http::serve(listener, state).await
    })?;
    Ok(())
}

fn run(cli: Cli) -> Fallible {
    match cli.command {
        Command::Simulate { n, seed, effects, out } => {
            let mut config = SimulationConfig::new(n, seed);
            if let Some(p) = effects {
                config.effects = EffectsFile::load(&p)?;
            }
            let events = out.join("events");
            simulate(config, &out, events)
        }
        Command::Analyze { data, report, fit } => {
            let options = FitOptions {
                hc: match fit.hc {
                    Hc::Hc0 => HcVariant::HC0,
                    Hc::Hc1 => HcVariant::HC1,
                },
                reference: if fit.student_t { Reference::StudentT } else { Reference::Normal },
            };
            let analysis = analyze_dir(&data, options)?;
            write(&report, &analysis.render_text())?;
            write(&report.with_extension("json"), &analysis.to_json())?;
            print!("{}", analysis.render_text());
            Ok(())
        }
        Command::Serve(args) => serve(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
