use clap::Parser;
use skewdim_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(record) => {
            for w in &record.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{} -> {}",
                record.command,
                record
                    .config
                    .output_dir
                    .join(format!("{}.json", record.command))
                    .display()
            );
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
