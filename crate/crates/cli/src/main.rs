use std::process::ExitCode;

fn main() -> ExitCode {
    match co2risk_cli::run(std::env::args_os()) {
        Ok(Some(dir)) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}] {msg}", e.class());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
