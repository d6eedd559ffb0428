use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let exp = match sdflow_cli::parse_cli(std::env::args_os()) {
        Ok(e) => e,
        Err(e) => {
            // clap errors carry their own usage text and exit code.
            if let Some(c) = e.downcast_ref::<clap::Error>() {
                c.exit();
            }
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match sdflow_cli::execute(&exp, &mut std::io::stdout()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("run stopped early; partial results were written");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
