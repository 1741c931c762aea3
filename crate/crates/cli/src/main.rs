use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = iega_cli::Cli::parse();
    if let Err(err) = iega_cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(i32::from(iega_cli::exit_code(&err)));
    }
}
