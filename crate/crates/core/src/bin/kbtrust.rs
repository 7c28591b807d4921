use clap::Parser;

use kbtrust::pipeline::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("kbtrust: {e}");
        std::process::exit(1);
    }
}
