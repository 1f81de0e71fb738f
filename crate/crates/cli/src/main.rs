use clap::Parser;

fn main() {
    let cli = bornlab_cli::Cli::parse();
    let code = match bornlab_cli::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
