use std::process::ExitCode;

fn main() -> ExitCode {
    raymaze_bench::cli::run(std::env::args_os())
}
