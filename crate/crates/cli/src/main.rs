use std::process::ExitCode;

fn main() -> ExitCode {
    let out = ellcert_cli::run(std::env::args_os());
    if out.exit_code == ellcert_cli::EXIT_OK {
        println!("{}", out.summary);
    } else {
        eprintln!("{}", out.summary);
    }
    ExitCode::from(out.exit_code as u8)
}
