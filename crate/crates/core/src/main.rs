fn main() -> std::process::ExitCode {
    geobench::cli::main()
}
