use std::process::ExitCode;

fn main() -> ExitCode {
    puk_cli::run(std::env::args_os())
}
