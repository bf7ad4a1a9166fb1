use std::io::Write;
use std::process::ExitCode;

use homforge::cli::{execute, GUARD_ENV};

fn main() -> ExitCode {
    let guard = std::env::var(GUARD_ENV).ok();
    let out = execute(std::env::args_os(), guard.as_deref());
    // Ignore broken pipes; nothing useful to do about them.
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    ExitCode::from(out.code as u8)
}
