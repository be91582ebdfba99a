use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use powerlog::experiment::{self, ExperimentConfig, Overrides, Preset, THREADS_ENV};
use powerlog::Error;

#[derive(Parser)]
#[command(name = "powerlog", version, about = "Transfer-matrix and quantum-dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config file and print the resolved configuration.
    Validate(Common),
    /// Run the full pipeline and write artifacts to the output directory.
    Run(Common),
    /// Monte Carlo Lyapunov estimates as CSV.
    Lyapunov(Common),
    /// Moment series as CSV.
    Moments(Common),
    /// Transport exponent estimates as CSV.
    Transport(Common),
    /// Orbit hit counts against the Fejér bound as CSV.
    Discrepancy(Common),
    /// Deviation-set measures as CSV.
    Ldt(Common),
    /// Integral criterion and outside-probability bound as CSV.
    DtCriterion(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file.
    #[arg(long, value_name = "PATH", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Start from a named preset instead of a file (needs --seed).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Overrides the seed in the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Output directory for `run`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let ov = Overrides {
            seed: self.seed,
            threads: self.threads,
            output_dir: self.out.as_ref().map(|p| p.display().to_string()),
        };
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::from_path(path, &ov),
            (None, Some(name)) => {
                let preset = Preset::from_name(name)?;
                let seed = self.seed.ok_or_else(|| Error::config("--seed", "required with --preset"))?;
                let text = format!("[experiment]\npreset = \"{}\"\nseed = {seed}\n", preset.name());
                ExperimentConfig::from_toml_str(&text, &ov)
            }
            (None, None) => Err(Error::config("--config", "missing")),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 2,
        e if e.is_numeric_policy() => 3,
        _ => 1,
    }
}

fn execute(cmd: &Command) -> Result<(), Error> {
    let (common, table): (&Common, Option<fn(&ExperimentConfig) -> powerlog::Result<String>>) = match cmd {
        Command::Validate(c) | Command::Run(c) => (c, None),
        Command::Lyapunov(c) => (c, Some(experiment::lyapunov_csv)),
        Command::Moments(c) => (c, Some(experiment::moments_table)),
        Command::Transport(c) => (c, Some(experiment::transport_table)),
        Command::Discrepancy(c) => (c, Some(experiment::discrepancy_csv)),
        Command::Ldt(c) => (c, Some(experiment::ldt_csv)),
        Command::DtCriterion(c) => (c, Some(experiment::dt_table)),
    };
    let cfg = common.load()?;
    match (cmd, table) {
        (Command::Validate(_), _) => {
            println!("ok");
            print!("{}", cfg.to_toml());
        }
        (Command::Run(_), _) => {
            let summary = experiment::run(&cfg)?;
            for c in &summary.checks {
                println!("{} {} value={:.6e} threshold={:.6e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
            }
            println!("artifacts written to {}", cfg.experiment.output_dir);
        }
        (_, Some(f)) => {
            let out = experiment::with_pool(cfg.experiment.threads, || f(&cfg))?;
            print!("{out}");
        }
        _ => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::WindowCap { .. } = e {
                eprintln!("hint: set quantum.half_width or raise quantum.window_cap, or shorten quantum.t_grid");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
