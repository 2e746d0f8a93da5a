fn main() -> std::process::ExitCode {
    taxelwbc::cli::main()
}
