//! Command-line front end for `bellcom-core`.
//!
//! Exit codes: 0 on success, 1 for usage or validation errors, 2 when a
//! numeric check fails or an iteration does not converge.

pub mod args;
pub mod commands;
pub mod run_config;

use std::ffi::OsString;
use std::io::Write;

use bellcom_core::Error;
use clap::Parser;

pub use args::Cli;
pub use run_config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_VALIDATION
    }
}

/// Parses `argv` (program name first), runs one subcommand and returns the
/// process exit code.
pub fn run_command<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind::{DisplayHelp, DisplayVersion};
            let text = e.render().to_string();
            return if matches!(e.kind(), DisplayHelp | DisplayVersion) {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            } else {
                let _ = write!(stderr, "{text}");
                EXIT_VALIDATION
            };
        }
    };
    let dump = cli.dump_config;
    let cfg = match cli.into_run_config() {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code(&e);
        }
    };
    if dump {
        let _ = writeln!(stdout, "{}", cfg.to_json());
        return EXIT_OK;
    }
    match run(&cfg, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a validated config on a thread pool of the requested size.
pub fn run(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), Error> {
    let output = with_threads(cfg.threads, || commands::execute(cfg))??;
    if let Some((path, bytes)) = &output.side_file {
        std::fs::write(path, bytes)?;
    }
    match (&cfg.out, output.side_file.is_some()) {
        (Some(path), false) => std::fs::write(path, format!("{}\n", output.text))?,
        _ => writeln!(stdout, "{}", output.text)?,
    }
    match output.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, Error> {
    match threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {k} threads: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Without the `parallel` feature everything runs on the calling thread.
#[cfg(not(feature = "parallel"))]
fn with_threads<R>(_threads: Option<usize>, f: impl FnOnce() -> R) -> Result<R, Error> {
    Ok(f())
}
