use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ARO_BENCH_LOG", "warn")).init();
    let cli = aro_fraud_cli::args::Cli::parse();
    if let Err(e) = aro_fraud_cli::run(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
