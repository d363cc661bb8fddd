use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(sgdmix::cli::run(std::env::args_os()))
}
