use clap::Parser;

#[tokio::main]
async fn main() {
    match zts::cli::run(zts::cli::Cli::parse()).await {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
