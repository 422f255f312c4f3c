//! Command-line front end for the two-stage workflow: pretrain an embedding
//! with `align`, then `train` and `predict` with it.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.

mod commands;
pub mod dataset;
pub mod model_file;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use commands::{sub_seed, Cli, Command};
pub use dataset::{gen_synthetic, load_csv, normalize_unit_sphere, write_csv, Dataset, SyntheticKind, SyntheticParams};
pub use model_file::{
    load_model, save_model, EmbeddingPayload, KernelDescriptor, KpcaPayload, KrrPayload, ModelFile, ModelKind,
    Pretraining, SvcPayload, SvrPayload, FORMAT_VERSION,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Parses `argv` (including the program name), runs the command and returns
/// the exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run_command<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match commands::execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}
