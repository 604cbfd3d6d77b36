fn main() -> std::process::ExitCode {
    depscore::cli::main_with_args(std::env::args_os())
}
