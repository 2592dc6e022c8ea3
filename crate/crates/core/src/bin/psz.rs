fn main() -> std::process::ExitCode {
    psz::cli::main()
}
