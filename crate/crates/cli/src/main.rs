use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let code = chimera_embed_cli::run(std::env::args(), &mut io::stdout(), &mut io::stderr());
    ExitCode::from(code as u8)
}
