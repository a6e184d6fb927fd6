use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use collabtrack::config::SEED_ENV;
use collabtrack::{commands, AppResult, RunConfig};

#[derive(Parser)]
#[command(name = "collabtrack", version, about = "Collaborative particle-filter tracker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the network offline on annotated sequences.
    Pretrain(ConfigArgs),
    /// Track a target through a frame directory.
    Track(ConfigArgs),
    /// Compare a trajectory with ground truth.
    Eval(ConfigArgs),
    /// Generate a synthetic sequence.
    Synth(ConfigArgs),
    /// Write the first-layer filters of a model as images.
    DumpFilters(ConfigArgs),
    /// List every configuration key with its default.
    Keys,
}

#[derive(Args)]
struct ConfigArgs {
    /// key = value file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> AppResult<RunConfig> {
        let env = std::env::var(SEED_ENV).ok();
        RunConfig::load(self.config.as_deref(), env.as_deref(), &self.set)
    }
}

fn run(cli: Cli) -> AppResult<()> {
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Pretrain(a) => commands::pretrain(&a.resolve()?, &mut out).map(drop),
        Command::Track(a) => commands::track(&a.resolve()?, &mut out).map(drop),
        Command::Eval(a) => commands::eval(&a.resolve()?, &mut out).map(drop),
        Command::Synth(a) => commands::synth(&a.resolve()?, &mut out),
        Command::DumpFilters(a) => commands::dump_filters(&a.resolve()?, &mut out).map(drop),
        Command::Keys => {
            for (key, default, help) in collabtrack::config::KEYS {
                println!("{key} = {default}\n    {help}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
