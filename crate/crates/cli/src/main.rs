use clap::Parser;
use rqrsim_cli::output::UNITS;
use rqrsim_cli::{resolve, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    eprintln!("rqrsim {}: {UNITS}", cli.command.name());
    let outcome = resolve(cli.config.as_deref(), cli.seed).and_then(|cfg| run(cli.command, &cfg, cli.out.as_deref()));
    match outcome {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
