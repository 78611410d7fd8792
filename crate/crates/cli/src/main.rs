mod commands;
mod report;

use std::process::ExitCode;

use clap::Parser;

use commands::Cli;

/// 0 when every verdict passes, 1 on a failed verdict, 2 on bad usage or
/// malformed input.
fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = cli.out.clone();
    match commands::run(cli) {
        Ok(report) => {
            if let Err(e) = report::emit_report(&report, out.as_deref()) {
                eprintln!("error: cannot write report: {e}");
                return ExitCode::from(2);
            }
            ExitCode::from(if report.passes() { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
