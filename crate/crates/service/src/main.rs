use clap::Parser;

fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    intentrank_service::cli::run(intentrank_service::cli::Cli::parse())
}
