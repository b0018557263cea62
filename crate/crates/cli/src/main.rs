use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qbm_cli::config::{parse_config, Scenario};
use qbm_cli::run::{brownian_report, RunOutput};
use qbm_cli::{compare, exit_status, run_all, EXIT_ERROR};

#[derive(Parser)]
#[command(
    name = "qbm",
    version,
    about = "Completely positive quantum Brownian motion scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Maximum number of scenarios run concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Run even when the gas/particle mass ratio is outside the Brownian regime.
    #[arg(long, global = true)]
    override_brownian_limit: bool,
    /// Directory for relative output paths.
    #[arg(long, global = true, env = "QBM_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario in a config file.
    Run { config: PathBuf },
    /// Run the scenarios and print a side-by-side comparison.
    Compare { config: PathBuf },
}

fn load(path: &Path) -> Result<Vec<Scenario>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base).map_err(|e| format!("{}:\n{e}", path.display()))
}

fn print_run(out: &RunOutput, report: bool) {
    let s = &out.summary;
    println!(
        "{}: {} ({:?}), {} records to t = {}, min_eig {:.3e}, oracle deviation {:.3e}",
        s.scenario, s.form, s.status, s.records, s.t_final, s.min_eig_overall, s.oracle_max_rel_dev
    );
    if report {
        print!("{}", s.cp_report_text);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (path, comparing) = match &cli.command {
        Command::Run { config } => (config, false),
        Command::Compare { config } => (config, true),
    };
    let scenarios = match load(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    if comparing {
        if let Err(e) = compare::check_compatible(&scenarios) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    for s in &scenarios {
        if let Err(e) = brownian_report(s).enforce(cli.override_brownian_limit) {
            eprintln!(
                "error: scenario `{}`: {e} (pass --override-brownian-limit to run anyway)",
                s.name
            );
            return ExitCode::from(EXIT_ERROR);
        }
    }

    let results = run_all(&scenarios, &cli.out_dir, cli.jobs);
    for (s, r) in scenarios.iter().zip(&results) {
        match r {
            Ok(out) => print_run(out, s.outputs.report),
            Err(e) => eprintln!("error: {e}"),
        }
    }
    let status = exit_status(&results);
    if comparing && status != EXIT_ERROR {
        let runs: Vec<RunOutput> = results.into_iter().filter_map(Result::ok).collect();
        println!();
        print!("{}", compare::comparison_table(&runs));
    }
    ExitCode::from(status)
}
