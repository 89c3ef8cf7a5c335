use clap::Parser;

fn main() {
    let cli = match gradsense_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own exit code for usage errors is 2, which we reserve for failed computations
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = gradsense_cli::run(&cli) {
        eprintln!("gradsense: {e}");
        std::process::exit(e.exit_code());
    }
}
