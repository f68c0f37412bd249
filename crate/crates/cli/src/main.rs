use clap::Parser;
use jsdm_odds_cli::Cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("JSDM_ODDS_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not limit worker threads: {e}");
                }
            }
            _ => log::warn!("ignoring JSDM_ODDS_THREADS={v:?}; expected a positive integer"),
        }
    }
    if let Err(e) = jsdm_odds_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
