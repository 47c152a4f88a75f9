use clap::Parser;

fn main() {
    let cli = match eggq::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            std::process::exit(if usage {
                eggq::ExitKind::Config as i32
            } else {
                0
            });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = eggq::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
