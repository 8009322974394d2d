use std::process::ExitCode;

fn main() -> ExitCode {
    vlc_an_cli::run(std::env::args_os())
}
