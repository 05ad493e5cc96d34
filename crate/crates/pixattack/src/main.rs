use clap::Parser;
use pixattack::cli::{run, Cli, Outcome};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap would exit with 2, which is reserved for a failed attack
            let code = if e.use_stderr() { Outcome::Error.exit_code() } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(run(cli).exit_code());
}
