use std::process::ExitCode;

fn main() -> ExitCode {
    stepgap::cli::run()
}
