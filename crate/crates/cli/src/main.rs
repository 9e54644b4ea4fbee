use clap::Parser;
use lazy_spectra_cli::{config::Cli, exit_code, run};

fn main() {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(_) => {}
        Err(err) => {
            let code = exit_code(&err);
            eprintln!("error: code={code} message=\"{err}\"");
            std::process::exit(code);
        }
    }
}
