fn main() -> std::process::ExitCode {
    rzimpute::cli::main_entry()
}
