fn main() -> std::process::ExitCode {
    droptest_service::cli::main()
}
