fn main() -> std::process::ExitCode {
    birkhoff::cli::main()
}
