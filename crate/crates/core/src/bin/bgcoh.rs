fn main() -> std::process::ExitCode {
    bgcoh::cli::main()
}
