use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = ser_core::cli::Cli::parse();
    match ser_core::cli::run(&cli) {
        Ok(summary) => println!("{}", summary.display()),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
