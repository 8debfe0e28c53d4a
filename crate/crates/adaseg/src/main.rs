fn main() -> std::process::ExitCode {
    adaseg::cli::main()
}
