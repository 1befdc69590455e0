use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sarfocus::run::{run, RunOptions, Stage};

#[derive(Parser)]
#[command(
    name = "sarfocus",
    version,
    about = "Spotlight SAR simulation, backprojection and 2-D autofocus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the range-compressed phase history along the true path.
    Simulate(Common),
    /// Backproject the stored phase history with the nominal path.
    Image(Common),
    /// Export image spectra before and after preprocessing.
    Spectrum(Common),
    /// Run the geometry-aided autofocus on the stored image.
    Autofocus(Common),
    /// Report focus metrics for the stored images.
    Metrics(Common),
    /// Run every stage in order.
    All(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML). Defaults to the bundled scenario.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Run directory for all artifacts.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the maximum number of autofocus iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Disable the k_r ramp filter during backprojection.
    #[arg(long)]
    no_ramp_filter: bool,
    /// Dynamic range of exported magnitude pixmaps, dB.
    #[arg(long)]
    export_db_range: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, c) = match cli.command {
        Command::Simulate(c) => (Stage::Simulate, c),
        Command::Image(c) => (Stage::Image, c),
        Command::Spectrum(c) => (Stage::Spectrum, c),
        Command::Autofocus(c) => (Stage::Autofocus, c),
        Command::Metrics(c) => (Stage::Metrics, c),
        Command::All(c) => (Stage::All, c),
    };
    let opts = RunOptions {
        stage,
        scenario: c.scenario,
        out_dir: c.out,
        seed: c.seed,
        iterations: c.iterations,
        no_ramp_filter: c.no_ramp_filter,
        export_db_range: c.export_db_range,
    };
    match run(&opts) {
        Ok(summary) => {
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for m in &summary.metrics {
                println!("{:<10} {:<16} {:.6}", m.image, m.name, m.value);
            }
            println!(
                "{}: wrote {} artifact(s) to {}",
                summary.stages.join(" → "),
                summary.artifacts.len(),
                opts.out_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
