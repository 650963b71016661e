use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use xattract::criticality::{classify, CriticalityVerdict};
use xattract::experiments::{
    self, eps_study_rows, experiment_dichotomy, experiment_eps, experiment_sweep,
    experiment_virial, output_file, parse_alpha_grid, parse_eps_list, persist_run, simulate,
    verdict_time, write_table, DichotomyReport, RunConfig, SweepRow, VirialReport,
    EPS_STUDY_HEADER,
};
use xattract::{Error, Result};

#[derive(Parser)]
#[command(
    name = "xattract",
    version,
    about = "Radial cross-attraction chemotaxis simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write its trajectory and final snapshot.
    Run { config: PathBuf },
    /// Classify a parameter triple against the sharp HLS threshold.
    Classify { d: usize, alpha1: f64, alpha2: f64 },
    /// Run the base configuration once per (alpha1, alpha2) pair in the grid file.
    Sweep {
        config: PathBuf,
        alpha_grid: PathBuf,
    },
    /// Measure the virial defect at n and 2n.
    Virial { config: PathBuf },
    /// Compare solutions across regularisation levels, e.g. "1e-2,1e-3,1e-4".
    EpsStudy { config: PathBuf, eps_list: String },
    /// Run a subcritical and a supercritical configuration side by side.
    Dichotomy {
        config_sub: PathBuf,
        config_super: PathBuf,
    },
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let outcome = simulate(&cfg)?;
            let files = persist_run(&cfg, &outcome, "")?;
            println!(
                "verdict={} t={} steps={} max_mass_drift={:e}",
                outcome.verdict.label(),
                outcome.final_state.time(),
                outcome.steps,
                outcome.max_step_mass_drift
            );
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Classify { d, alpha1, alpha2 } => {
            let v = classify::<f64>(d, alpha1, alpha2)?;
            println!("{}", CriticalityVerdict::<f64>::CSV_HEADER.join(","));
            println!("{}", v.csv_row().join(","));
        }
        Command::Sweep { config, alpha_grid } => {
            let cfg = RunConfig::load(&config)?;
            let grid = parse_alpha_grid(&read(&alpha_grid)?)?;
            let rows = experiment_sweep(&cfg, &grid)?;
            let table: Vec<_> = rows.iter().map(SweepRow::csv_row).collect();
            let path = write_table(
                &output_file(&cfg.out_dir, "sweep.csv")?,
                SweepRow::CSV_HEADER,
                &table,
            )?;
            for r in &rows {
                println!(
                    "alpha=({}, {}) ratio={:.4} {} {}",
                    r.alpha1, r.alpha2, r.ratio, r.class, r.verdict
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Virial { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = experiment_virial(&cfg)?;
            let path = write_table(
                &output_file(&cfg.out_dir, "virial.csv")?,
                VirialReport::CSV_HEADER,
                &report.csv_rows(),
            )?;
            println!(
                "n={} defect={:e}  n={} defect={:e}  slope={:.3}{}",
                report.coarse.n,
                report.coarse.max_defect,
                report.fine.n,
                report.fine.max_defect,
                report.slope,
                if report.partial {
                    "  (partial data)"
                } else {
                    ""
                }
            );
            println!("wrote {}", path.display());
        }
        Command::EpsStudy { config, eps_list } => {
            let cfg = RunConfig::load(&config)?;
            let eps = parse_eps_list(&eps_list)?;
            let study = experiment_eps(&cfg, &eps)?;
            let path = write_table(
                &output_file(&cfg.out_dir, "eps_study.csv")?,
                EPS_STUDY_HEADER,
                &eps_study_rows(&study),
            )?;
            println!("gaps decreasing: {}", study.gaps_decreasing());
            println!("wrote {}", path.display());
        }
        Command::Dichotomy {
            config_sub,
            config_super,
        } => {
            let sub = RunConfig::load(&config_sub)?;
            let sup = RunConfig::load(&config_super)?;
            let report = experiment_dichotomy(&sub, &sup)?;
            persist_run(&sub, &report.sub, "dichotomy_sub_")?;
            persist_run(&sup, &report.sup, "dichotomy_super_")?;
            let path = write_table(
                &output_file(&sup.out_dir, "dichotomy.csv")?,
                DichotomyReport::CSV_HEADER,
                &report.csv_rows(),
            )?;
            println!(
                "sub: {}  super: {} at t={} (bound {} x {})  I decreasing: {}",
                report.sub.verdict.label(),
                report.sup.verdict.label(),
                verdict_time(&report.sup.verdict),
                experiments::BLOWUP_SAFETY,
                report.virial_bound,
                report.moment_decreasing
            );
            println!("wrote {}", path.display());
            if !report.holds() {
                return Err(Error::Consistency("dichotomy not reproduced".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
