use std::io::Write;

fn main() {
    let outcome = entropic_lab::run_args(std::env::args_os());
    print!("{}", outcome.stdout);
    if !outcome.stderr.is_empty() {
        eprintln!("{}", outcome.stderr.trim_end());
    }
    std::io::stdout().flush().ok();
    std::process::exit(outcome.code);
}
