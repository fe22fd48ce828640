use clap::Parser;
use walklab::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => println!("{}", summary["result"]),
        Err(e) => {
            eprintln!("walklab: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
