mod args;
mod cmd;
mod output;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = settings::FileConfig::load(cli.common.config.as_deref())?;
    let common = file.common(&cli.common);
    match cli.command {
        Command::Filter(a) => cmd::filter::run(&common, settings::FilterSettings::resolve(&file, a)?),
        Command::Pseudolabel(a) => cmd::pseudolabel::run(&common, settings::PseudolabelSettings::resolve(&file, a)?),
        Command::TrainToy(a) => cmd::train_toy::run(&common, settings::TrainToySettings::resolve(&file, a)?),
        Command::Gradcheck(a) => cmd::gradcheck::run(&common, settings::GradcheckSettings::resolve(&file, a)?),
        Command::Probe(a) => cmd::probe::run(&common, settings::ProbeSettings::resolve(&file, a)?),
    }
}
