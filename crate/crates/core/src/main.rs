fn main() {
    let mut stdout = std::io::stdout();
    let code = memtia::cli::run_command(std::env::args_os(), &mut stdout);
    std::process::exit(code);
}
