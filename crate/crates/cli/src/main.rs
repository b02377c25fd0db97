use clap::Parser;
use ptgraph_cli::commands::{run, Cli, Command};

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Serve { port, host } => {
            let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
            match rt.block_on(ptgraph_cli::server::serve(&host, port)) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
        command => run(command, &mut std::io::stdout(), &mut std::io::stderr()),
    };
    std::process::exit(code);
}
