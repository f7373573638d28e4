use clap::Parser;

fn main() {
    let cli = match heralds_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap would exit 2, which is reserved for "not operationally unitary"
            let code = if e.use_stderr() { heralds_cli::EXIT_ERROR } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(heralds_cli::run(&cli));
}
