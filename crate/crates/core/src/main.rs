use std::io::Write;

fn main() {
    let env_seed = std::env::var("SEED").ok();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let code = epigame::cli::run(std::env::args_os(), env_seed.as_deref(), &mut out, &mut err);
    let _ = out.flush();
    std::process::exit(code);
}
