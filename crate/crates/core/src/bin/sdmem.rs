use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sdmem::density::DensityMethod;
use sdmem::harness::bands::{fit_bands, write_bands};
use sdmem::harness::coeff_check::{coeff_check, COEFF_TOL};
use sdmem::harness::config::{named, ExperimentConfig};
use sdmem::harness::io::{read_dataset_file, write_dataset_file, write_effects, write_json};
use sdmem::harness::mc::{run_mc, simulate_replication, start_values, write_mc};
use sdmem::harness::{estimate, ReportFile};
use sdmem::model::{make_cir_model, make_growth_model, make_ou2d_model, ModelId};
use sdmem::Error;

/// Maximum-likelihood estimation for stochastic differential mixed-effects models.
#[derive(Parser)]
#[command(name = "sdmem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate datasets; writes data.csv and truth.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a dataset; writes report.json.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// cfe2, cfe1, cfe0, eum or exact-ou; defaults to the first configured method.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo study comparing the configured methods.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean and 95% bands of trajectories simulated at fitted values.
    Fitbands {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 5000)]
        sims: usize,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, default_value_t = 5)]
        examples: usize,
        #[arg(long, default_value_t = 3)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare generic and hand-coded expansion coefficients.
    CoeffCheck {
        #[arg(long)]
        model: ModelId,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.0, hide = true)]
        perturb: f64,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SIMULATION: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;
const EXIT_COEFF_BREACH: u8 = 5;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Data(_) | Error::Csv(_) | Error::Json(_) | Error::Unsupported(_) => {
            EXIT_CONFIG
        }
        Error::Simulation(_) => EXIT_SIMULATION,
        _ => 1,
    }
}

fn simulate(config: &Path, out: &Path) -> Result<u8, Error> {
    let cfg = ExperimentConfig::load(config)?;
    let names = cfg.layout().effects.clone();
    std::fs::create_dir_all(out)?;
    for rep in 0..cfg.replications {
        let dir = if cfg.replications == 1 {
            out.to_path_buf()
        } else {
            out.join(format!("rep_{rep:04}"))
        };
        std::fs::create_dir_all(&dir)?;
        let (data, effects) = simulate_replication(&cfg, rep)?;
        write_dataset_file(&dir.join("data.csv"), &data)?;
        write_effects(&dir.join("truth.csv"), &names, &effects)?;
    }
    eprintln!("simulated {} dataset(s) into {}", cfg.replications, out.display());
    Ok(0)
}

fn run_estimate(config: &Path, data: &Path, method: Option<&str>, out: &Path) -> Result<u8, Error> {
    let cfg = ExperimentConfig::load(config)?;
    let method: DensityMethod = match method {
        Some(m) => m.parse()?,
        None => cfg.estimation.methods()?[0],
    };
    let dataset = read_dataset_file(data, cfg.model.as_str())?;
    let start = start_values(&cfg, 0)?;
    let report = estimate(cfg.model, method, &dataset, &start, &cfg.estimation.fit_options())?;
    let layout = cfg.layout();
    let file = ReportFile {
        model: cfg.model,
        method: method.label(),
        design: cfg.design.resolve(cfg.model)?,
        estimates: named(&layout, &report.theta_hat, &report.psi_hat),
        report,
    };
    std::fs::create_dir_all(out)?;
    write_json(&out.join("report.json"), &file)?;
    for (k, v) in &file.estimates {
        println!("{k:>10} = {v:.6}");
    }
    for (k, v) in &file.report.determined {
        println!("{:>10} = {v:.6} (determined)", k);
    }
    println!("loglik = {:.6}, evaluations = {}", file.report.loglik, file.report.evaluations);
    if !file.report.flagged_units.is_empty() {
        eprintln!("warning: inner solver flagged units {:?}", file.report.flagged_units);
    }
    if file.report.converged {
        Ok(0)
    } else {
        eprintln!("warning: outer search stopped at its evaluation budget");
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn run_mc_cmd(config: &Path, reps: Option<usize>, out: &Path) -> Result<u8, Error> {
    let cfg = ExperimentConfig::load(config)?;
    let result = run_mc(&cfg, reps.unwrap_or(cfg.replications))?;
    write_mc(out, &result)?;
    print!("{}", result.table());
    for s in &result.summaries {
        println!(
            "{}: {} included, {} failed, {} hit the evaluation budget",
            s.method, s.n, s.failures, s.non_converged
        );
    }
    Ok(0)
}

fn run_fitbands(
    report: &Path,
    sims: usize,
    points: usize,
    examples: usize,
    seed: u64,
    out: &Path,
) -> Result<u8, Error> {
    let text = std::fs::read_to_string(report)
        .map_err(|e| Error::config(format!("cannot read report {}: {e}", report.display())))?;
    let file: ReportFile = serde_json::from_str(&text)?;
    let (theta, psi) = (&file.report.theta_hat, &file.report.psi_hat);
    let d = &file.design;
    let bands = match file.model {
        ModelId::Growth => fit_bands(&make_growth_model(), theta, psi, d, sims, points, examples, seed),
        ModelId::Ou2d => fit_bands(&make_ou2d_model(), theta, psi, d, sims, points, examples, seed),
        ModelId::Cir => fit_bands(&make_cir_model(), theta, psi, d, sims, points, examples, seed),
    }?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_bands(out, &bands)?;
    eprintln!("wrote {} time points from {sims} simulations to {}", bands.times.len(), out.display());
    Ok(0)
}

fn run_coeff_check(model: ModelId, points: usize, seed: u64, perturb: f64) -> Result<u8, Error> {
    let r = coeff_check(model, points, seed, perturb)?;
    for (k, label) in ["C(-1)", "C(0)", "C(1)", "C(2)"].iter().enumerate() {
        println!("{model} {label:>6}: max relative deviation {:.3e}", r.max_rel[k]);
    }
    if r.pass {
        println!("{model}: pass ({} points, tolerance {COEFF_TOL:e})", r.points);
        Ok(0)
    } else {
        println!("{model}: FAIL (tolerance {COEFF_TOL:e})");
        Ok(EXIT_COEFF_BREACH)
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("SDMEM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // ignore failure: the global pool may already be initialized
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate { config, out } => simulate(config, out),
        Command::Estimate {
            config,
            data,
            method,
            out,
        } => run_estimate(config, data, method.as_deref(), out),
        Command::Mc { config, reps, out } => run_mc_cmd(config, *reps, out),
        Command::Fitbands {
            report,
            sims,
            points,
            examples,
            seed,
            out,
        } => run_fitbands(report, *sims, *points, *examples, *seed, out),
        Command::CoeffCheck {
            model,
            points,
            seed,
            perturb,
        } => run_coeff_check(*model, *points, *seed, *perturb),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
