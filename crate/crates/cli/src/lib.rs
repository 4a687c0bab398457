//! Command-line frontend: flags and config documents in, JSON, CSV or text
//! reports out.
//!
//! Exit codes: 0 success, 1 usage, 2 domain precondition, 3 bound exceeded,
//! 4 missing parameter, 5 malformed config.

pub mod args;
pub mod error;
pub mod exec;
pub mod params;
pub mod report;

use clap::Parser;

pub use args::{Cli, Format};
pub use error::{CliError, CliResult};
pub use report::{emit, Report, SweepRow};

/// What a run prints and how it exits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

fn failure(e: CliError) -> Outcome {
    Outcome { code: e.exit_code(), stdout: String::new(), stderr: format!("error: {e}\n") }
}

/// Parses `argv` (program name first), runs the command and renders the
/// report.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { error::EXIT_USAGE } else { error::EXIT_OK };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code, stdout: String::new(), stderr: text }
            } else {
                Outcome { code, stdout: text, stderr: String::new() }
            };
        }
    };
    match run_cli(&cli) {
        Ok(report) => Outcome { code: error::EXIT_OK, stdout: emit(&report, cli.format), stderr: String::new() },
        Err(e) => failure(e),
    }
}

/// Runs an already parsed command line.
pub fn run_cli(cli: &Cli) -> CliResult<Report> {
    let config = cli.config.as_deref().map(params::load_config).transpose()?;
    let config_seed = match config.as_ref().and_then(|c| c.get("seed")) {
        None | Some(serde_json::Value::Null) => None,
        Some(v) => Some(v.as_u64().ok_or_else(|| CliError::MalformedConfig("`seed` must be a 64-bit unsigned integer".into()))?),
    };
    let ctx = exec::Context { config: config.as_ref(), seed: cli.seed.or(config_seed) };
    exec::execute(&cli.command, &ctx)
}
