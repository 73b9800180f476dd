use std::process::ExitCode;

fn main() -> ExitCode {
    survadapt::cli::run()
}
