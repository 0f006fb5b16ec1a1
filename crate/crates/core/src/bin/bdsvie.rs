use std::process::ExitCode;

fn main() -> ExitCode {
    bdsvie::cli::main()
}
