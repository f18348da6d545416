//! Implementation of the `ncode` command-line tool.
//!
//! Every command that produces an artifact also records a [`RunManifest`]
//! with resolved snapshots of its inputs. `gen-data` and `search` accept
//! `--manifest` to replay a recorded run.

pub mod args;
mod commands;
pub mod error;
pub mod manifest;

pub use args::Cli;
pub use error::CliError;
pub use manifest::{parse_seeds, sidecar_path, RunManifest};

use args::{Command, SpaceCommand};

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Space {
            command: SpaceCommand::Validate { file },
        } => commands::space_validate(&file),
        Command::GenData(a) => with_jobs(a.jobs, || commands::gen_data(&a)),
        Command::Search(a) => commands::search(&a),
        Command::Baseline(a) => with_jobs(a.jobs, || commands::baseline(&a)),
        Command::AblateShuffle(a) => with_jobs(a.jobs, || commands::ablate_shuffle(&a)),
        Command::Report(a) => commands::report(&a),
    }
}

fn with_jobs<T>(jobs: Option<usize>, f: impl FnOnce() -> Result<T, CliError> + Send) -> Result<T, CliError>
where
    T: Send,
{
    match jobs {
        None => f(),
        Some(0) => Err(CliError::Usage("--jobs must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Other(e.to_string()))?
            .install(f),
    }
}
