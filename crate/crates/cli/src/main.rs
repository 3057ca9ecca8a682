use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use blockspec_cli::{report, run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let outcome = run(&cli);
    let elapsed = start.elapsed();
    match outcome {
        Ok(out) => {
            let text = report::render(&out.report);
            if let Err(e) = std::io::stdout().lock().write_all(text.as_bytes()) {
                eprintln!("error: writing report: {e}");
                return ExitCode::from(blockspec_cli::error::exit::IO);
            }
            eprintln!("wall time: {:.3} s", elapsed.as_secs_f64());
            ExitCode::from(out.status)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
