fn main() -> std::process::ExitCode {
    sleepcast::cli::main()
}
