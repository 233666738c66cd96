use clap::Parser;

fn main() {
    let cli = kpart::cli::Cli::parse();
    match kpart::cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
