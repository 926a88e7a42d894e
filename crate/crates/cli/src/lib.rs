//! Batch front end for `chosvd-core`: configuration, cohort file formats,
//! and the `synth`, `decompose`, `classify` and `report` commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod output;

use config::{Cli, Command, Purpose, RunConfig};
use error::CliResult;

/// Runs one command. Files are written only once the command has succeeded.
pub fn run(cli: &Cli) -> CliResult<()> {
    let (cfg, files) = match &cli.command {
        Command::Report(args) => {
            print!("{}", commands::cmd_report(&args.out)?);
            return Ok(());
        }
        Command::Synth(args) => {
            let cfg = RunConfig::resolve(args, Purpose::Synth)?;
            let files = commands::cmd_synth(&cfg)?;
            (cfg, files)
        }
        Command::Decompose(args) => {
            let cfg = RunConfig::resolve(args, Purpose::Analyze)?;
            let files = commands::cmd_decompose(&cfg)?;
            (cfg, files)
        }
        Command::Classify(args) => {
            let cfg = RunConfig::resolve(args, Purpose::Analyze)?;
            let files = commands::cmd_classify(&cfg)?;
            (cfg, files)
        }
    };
    files.write_all(&cfg.out)?;
    for p in files.paths() {
        log::info!("wrote {}", cfg.out.join(p).display());
    }
    Ok(())
}
