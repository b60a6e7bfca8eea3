use std::process::ExitCode;

fn main() -> ExitCode {
    match spikelab_cli::run(std::env::args_os()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(err) => {
            let code = err.exit_code();
            match &err {
                spikelab_cli::CliError::Clap(e) => {
                    let _ = e.print();
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(code as u8)
        }
    }
}
