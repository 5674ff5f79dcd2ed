//! Command-line driver for sparse pre-image kernel machines: training,
//! evaluation, benchmark scenarios, theory checks and synthetic data.

pub mod args;
pub mod bench;
pub mod commands;
pub mod error;
pub mod protocol;

pub use error::{CliError, CliResult};

/// Dispatches a parsed command line.
pub fn run(cli: args::Cli) -> CliResult<()> {
    use args::Command;
    match cli.command {
        Command::Train(a) => commands::cmd_train(&a).map(|_| ()),
        Command::Eval(a) => commands::cmd_eval(&a).map(|_| ()),
        Command::Theory(a) => commands::cmd_theory(&a).map(|_| ()),
        Command::Synth(a) => commands::cmd_synth(&a),
        Command::Bench(a) => {
            let opts = bench::BenchOptions { seed: a.seed, bcw: a.bcw.clone() };
            let rows = bench::run(a.scenario, &opts)?;
            let (csv, json) = bench::write_outputs(&a.out, a.scenario, a.seed, &rows)?;
            log::info!("wrote {} and {}", csv.display(), json.display());
            Ok(())
        }
    }
}
