fn main() -> std::process::ExitCode {
    ledsna::cli::main()
}
