use std::io::Write;

fn main() {
    let mut stderr = std::io::stderr();
    if let Err(e) = nosm::cli::configure_threads() {
        let _ = writeln!(stderr, "error: {e}");
        std::process::exit(e.exit_code());
    }
    let code = nosm::cli::run(
        std::env::args_os(),
        &mut std::io::stdout().lock(),
        &mut stderr,
    );
    std::process::exit(code);
}
