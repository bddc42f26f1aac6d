use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trapwalk_cli::{
    replay, run_with_workers, Cancel, CliError, ExperimentConfig, ExperimentSpec, Format, Report, WORKERS_ENV,
};

#[derive(Parser)]
#[command(name = "trapwalk", version, about = "Random walks among Bernoulli obstacles: experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its report.
    Run(RunArgs),
    /// Re-run the config embedded in an output file and compare byte for byte.
    Replay {
        file: PathBuf,
        #[arg(long, default_value_t = 0, env = WORKERS_ENV)]
        workers: usize,
    },
    /// Print the default config of an experiment as JSON.
    Schema {
        #[arg(long, default_value = "confine")]
        experiment: String,
    },
    /// List experiment ids.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment id; see `trapwalk list`.
    #[arg(long, required_unless_present = "config")]
    experiment: Option<String>,
    /// JSON config file; the other flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// Drift vector, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    drift: Option<Vec<f64>>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    format: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 = all cores.
    #[arg(long, default_value_t = 0, env = WORKERS_ENV)]
    workers: usize,
}

fn build_config(a: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&a.config, &a.experiment) {
        (Some(path), exp) => {
            let cfg = ExperimentConfig::load(path)?;
            if let Some(id) = exp {
                if id != cfg.spec.id() {
                    return Err(CliError::Config(format!(
                        "--experiment {id} conflicts with {} in {}",
                        cfg.spec.id(),
                        path.display()
                    )));
                }
            }
            cfg
        }
        (None, Some(id)) => ExperimentConfig::default_for(id)?,
        (None, None) => return Err(CliError::Config("give --experiment or --config".into())),
    };
    if let Some(d) = a.dim {
        if d != cfg.model.d && a.drift.is_none() {
            cfg.model.drift.clear();
        }
        cfg.model.d = d;
    }
    if let Some(p) = a.p {
        cfg.model.p = p;
    }
    if let Some(h) = &a.drift {
        cfg.model.drift = h.clone();
    }
    if let Some(n) = a.n {
        cfg.model.n = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(r) = a.replicas {
        cfg.replicas = r;
    }
    if let Some(s) = a.samples {
        cfg.samples = s;
    }
    if let Some(f) = &a.format {
        cfg.format = match f.as_str() {
            "json" => Format::Json,
            "csv" => Format::Csv,
            other => return Err(CliError::Config(format!("unknown format {other:?}; expected json or csv"))),
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn install_interrupt(cancel: &Cancel) {
    let c = cancel.clone();
    // A second handler cannot be installed; ignoring that only loses graceful cancellation.
    let _ = ctrlc::set_handler(move || {
        eprintln!("interrupt: finishing running cells, output will be marked incomplete");
        c.cancel();
    });
}

fn print_checks(report: &Report) {
    for c in &report.checks {
        eprintln!("{} {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    if !report.complete {
        eprintln!("incomplete: run was cancelled");
    }
}

fn main_inner(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::List => {
            for id in ExperimentSpec::IDS {
                println!("{id}");
            }
            Ok(true)
        }
        Command::Schema { experiment } => {
            let cfg = ExperimentConfig::default_for(&experiment)?;
            println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
            Ok(true)
        }
        Command::Run(a) => {
            let cfg = build_config(&a)?;
            let cancel = Cancel::new();
            install_interrupt(&cancel);
            let report = run_with_workers(&cfg, a.workers, &cancel)?;
            let text = report.render(cfg.format)?;
            match &a.out {
                Some(path) => std::fs::write(path, &text)?,
                None => print!("{text}"),
            }
            print_checks(&report);
            Ok(report.passed())
        }
        Command::Replay { file, workers } => {
            let text = std::fs::read_to_string(&file)
                .map_err(|e| CliError::Config(format!("{}: {e}", file.display())))?;
            let cancel = Cancel::new();
            install_interrupt(&cancel);
            let out = replay(&text, workers, &cancel)?;
            match out.first_difference {
                None => eprintln!("replay identical: {}", file.display()),
                Some(line) => eprintln!("replay differs from {} at line {line}", file.display()),
            }
            Ok(out.identical)
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
