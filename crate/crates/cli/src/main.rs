fn main() -> std::process::ExitCode {
    mvbridge_cli::main_entry()
}
