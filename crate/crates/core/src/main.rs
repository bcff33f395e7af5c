use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::init();
    let code = ferrosim::cli::main_with(std::env::args_os());
    ExitCode::from(code as u8)
}
