use std::process::ExitCode;

use clap::Parser;
use polyperc::args::Cli;
use polyperc::experiments::REGISTRY;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if cli.command == "list" {
        for e in REGISTRY {
            println!("{:<10} modes: {:<40} {}", e.name(), e.modes().join(","), e.about());
        }
        return ExitCode::SUCCESS;
    }
    let result = cli.resolve().and_then(|cfg| polyperc::execute(&cfg));
    match result {
        Ok(summary) => {
            println!(
                "{} ({}) wrote {} file(s) to {}",
                summary.experiment,
                summary.mode,
                summary.checksums.len(),
                summary.out_dir.display()
            );
            for (name, sum) in &summary.checksums {
                println!("  {name} {sum}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("polyperc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
