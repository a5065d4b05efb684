fn main() -> std::process::ExitCode {
    extcontrol::cli::main()
}
