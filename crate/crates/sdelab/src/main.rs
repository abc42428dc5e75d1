use std::process::ExitCode;

fn main() -> ExitCode {
    sdelab::cli::main()
}
