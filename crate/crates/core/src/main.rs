use clap::Parser;
use periodic_euler::cli::{dispatch, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(dispatch(Cli::parse()));
}
