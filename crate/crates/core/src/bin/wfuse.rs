fn main() -> std::process::ExitCode {
    wfuse::cli::main()
}
