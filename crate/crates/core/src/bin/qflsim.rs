fn main() -> std::process::ExitCode {
    qflsim::interface::cli::main()
}
