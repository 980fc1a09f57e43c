use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stla::config::{load_config, Task};
use stla::report::{render_text, run, write_report, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "stla", version, about = "Certify small-time local attainability from point data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify attainability at every configured point.
    Certify(Common),
    /// Search the palette for qualifying groups.
    Search(Common),
    /// Build controls that reach the target from nearby starts.
    Reach(Common),
    /// Fit the Hölder exponent of the minimum-time estimate.
    Holder(Common),
    /// Run the operator identity suite on the configured fields.
    Identities(Common),
    /// Run the task list declared in the configuration.
    Run(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "stla-out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Relative zero tolerance for coefficient checks.
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
    /// Print the full text report.
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    // Usage errors share the generic failure code; 2 means "not certified".
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { 0 });
        }
    };
    let (task, common) = match cli.command {
        Command::Certify(c) => (Some(Task::Certify), c),
        Command::Search(c) => (Some(Task::Search), c),
        Command::Reach(c) => (Some(Task::Reach), c),
        Command::Holder(c) => (Some(Task::Holder), c),
        Command::Identities(c) => (Some(Task::Identities), c),
        Command::Run(c) => (None, c),
    };
    let mut cfg = match load_config(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    if let Some(t) = task {
        cfg.tasks = vec![t];
    }
    if let Some(s) = common.seed {
        cfg.engine.seed = s;
    }
    if let Some(t) = common.tol {
        if !(t > 0.0) {
            eprintln!("error: --tol must be positive");
            return ExitCode::from(EXIT_ERROR as u8);
        }
        cfg.engine.tol = t;
    }
    let report = run(&cfg);
    let text = render_text(&report);
    if common.verbose {
        print!("{text}");
    } else {
        println!(
            "{}: {} of {} points certified, exit code {}",
            report.name,
            report.certified(),
            report.points.len(),
            report.exit_code
        );
    }
    match write_report(&report, &common.out) {
        Ok(files) => {
            if common.verbose {
                println!("wrote {} files to {}", files.len(), common.out.display());
            }
        }
        Err(e) => {
            eprintln!("error: writing {}: {e}", common.out.display());
            return ExitCode::from(EXIT_ERROR as u8);
        }
    }
    ExitCode::from(report.exit_code as u8)
}
