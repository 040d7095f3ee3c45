use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scrd::design::randomize;
use scrd::error::{Error, Result};
use scrd::exposure::{exposure_quadruple, ExposureQuad, QuadMode};
use scrd::harness::{emit_report, run_power_simulation, SimulationConfig};
use scrd::inference::{
    conditional_fisher_test, estimate_contrast, global_fisher_test, GlobalStatistic,
    ResamplingPlan, Sidedness,
};
use scrd::io::{read_assignment, read_outcomes, read_population, write_assignment, write_draws};
use scrd::optimal_design::optimal_init;
use scrd::population::{Assignment, Population};
use scrd::rngutil::stream;
use scrd::Real;

#[derive(Parser)]
#[command(
    name = "scrd",
    version,
    about = "Design and analysis of composite group-formation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw assignments uniformly from the stabilizer orbit of the initial design
    Randomize {
        #[arg(long)]
        population: PathBuf,
        /// Initial assignment CSV; defaults to the population file's
        /// treatment0/group0 columns
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        draws: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Construct a power-optimal initial assignment by LP relaxation
    Design {
        #[arg(long)]
        population: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: ExposureQuad,
        #[arg(long)]
        kprime: ExposureQuad,
        #[arg(long, default_value_t = 1.2)]
        eta: Real,
        #[arg(long)]
        treated_budget: Option<usize>,
        #[arg(long)]
        seed: u64,
        /// Assignment CSV path; an LP summary lands next to it as JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the exposure contrast with a conservative Wald interval
    Analyze {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        k: ExposureQuad,
        #[arg(long)]
        kprime: ExposureQuad,
        #[arg(long, default_value_t = 0.05)]
        alpha: Real,
    },
    /// Fisher randomization tests
    #[command(subcommand)]
    Test(TestCommand),
    /// Run the Monte Carlo power study
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    population: PathBuf,
    #[arg(long)]
    assignment: PathBuf,
    #[arg(long)]
    outcomes: PathBuf,
}

#[derive(Subcommand)]
enum TestCommand {
    /// Conditional test of the pairwise null on the k/k' focal set
    Pairwise {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        k: ExposureQuad,
        #[arg(long)]
        kprime: ExposureQuad,
        #[arg(long, default_value_t = 500)]
        resamples: usize,
        #[arg(long)]
        seed: u64,
        /// "two" or "greater"
        #[arg(long, default_value = "two")]
        sided: String,
    },
    /// Test of the global sharp null by re-drawing the full design
    Global {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 500)]
        resamples: usize,
        #[arg(long)]
        seed: u64,
    },
}

fn load_initial(population_path: &Path, init: &Option<PathBuf>) -> Result<(Population, Assignment)> {
    let (population, embedded) = read_population(population_path)?;
    let c0 = match init {
        Some(path) => read_assignment(path)?,
        None => embedded.ok_or_else(|| {
            Error::Config(
                "no initial assignment: pass --init or add treatment0,group0 columns".into(),
            )
        })?,
    };
    Ok((population, c0))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Randomize {
            population,
            init,
            seed,
            draws,
            out,
        } => {
            let (pop, c0) = load_initial(&population, &init)?;
            let mut rng = stream(seed, &[0]);
            let mut samples = Vec::with_capacity(draws);
            for _ in 0..draws {
                samples.push(randomize(&c0, &pop, &mut rng)?);
            }
            write_draws(&out, &samples)?;
            println!("wrote {} draw(s) to {}", draws, out.display());
        }
        Command::Design {
            population,
            m,
            k,
            kprime,
            eta,
            treated_budget,
            seed,
            out,
        } => {
            let (pop, _) = read_population(&population)?;
            let mut rng = stream(seed, &[1]);
            let (assignment, report) =
                optimal_init(&pop, m, &k, &kprime, eta, treated_budget, &mut rng)?;
            write_assignment(&out, &assignment)?;
            let report_path = out.with_extension("report.json");
            std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
            println!(
                "wrote {} (LP objective {:.4}, integer objective {}); report: {}",
                out.display(),
                report.lp_objective,
                report.integer_objective,
                report_path.display()
            );
        }
        Command::Analyze {
            data,
            k,
            kprime,
            alpha,
        } => {
            let (pop, _) = read_population(&data.population)?;
            let assignment = read_assignment(&data.assignment)?;
            let outcomes = read_outcomes(&data.outcomes)?;
            let quads = exposure_quadruple(&pop, &assignment, QuadMode::Full)?;
            let est = estimate_contrast(&outcomes, &quads, &pop, &k, &kprime, alpha)?;
            println!("estimate,variance,ci_lower,ci_upper,confidence_level,excluded_strata");
            println!(
                "{:.6},{:.6},{:.6},{:.6},{:.3},{}",
                est.pooled_estimate,
                est.pooled_variance,
                est.ci_lower,
                est.ci_upper,
                est.confidence_level,
                est.excluded_strata
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(";")
            );
            println!("stratum,estimate,variance,n_k,n_kprime,stratum_size");
            for (a, s) in &est.per_stratum {
                println!(
                    "{},{:.6},{:.6},{},{},{}",
                    a, s.estimate, s.variance, s.n_k, s.n_k_prime, s.stratum_size
                );
            }
        }
        Command::Test(TestCommand::Pairwise {
            data,
            k,
            kprime,
            resamples,
            seed,
            sided,
        }) => {
            let sidedness = match sided.as_str() {
                "two" => Sidedness::TwoSided,
                "greater" => Sidedness::Greater,
                other => {
                    return Err(Error::Config(format!(
                        "--sided must be 'two' or 'greater', got '{other}'"
                    )))
                }
            };
            let (pop, _) = read_population(&data.population)?;
            let assignment = read_assignment(&data.assignment)?;
            let outcomes = read_outcomes(&data.outcomes)?;
            let quads = exposure_quadruple(&pop, &assignment, QuadMode::Full)?;
            let mut rng = stream(seed, &[2]);
            let res = conditional_fisher_test(
                &outcomes,
                &quads,
                &pop,
                &k,
                &kprime,
                ResamplingPlan::MonteCarlo { resamples },
                &mut rng,
                sidedness,
            )?;
            println!("statistic,p_value,resamples,degenerate");
            println!(
                "{:.6},{:.6},{},{}",
                res.statistic_observed, res.p_value, res.n_resamples, res.degenerate
            );
            println!("stratum,exposure,focal_count");
            for ((a, h), n) in &res.focal_counts {
                println!("{a},{h},{n}");
            }
        }
        Command::Test(TestCommand::Global {
            data,
            resamples,
            seed,
        }) => {
            let (pop, embedded) = read_population(&data.population)?;
            let assignment = read_assignment(&data.assignment)?;
            let outcomes = read_outcomes(&data.outcomes)?;
            // The reference distribution re-draws from the observed design's
            // orbit; the population file's C0 is used when provided.
            let c0 = embedded.unwrap_or_else(|| assignment.clone());
            let mut rng = stream(seed, &[3]);
            let res = global_fisher_test(
                &outcomes,
                &assignment,
                &pop,
                &c0,
                resamples,
                &mut rng,
                GlobalStatistic::CellMeanRange,
            )?;
            println!("statistic,p_value,resamples,degenerate");
            println!(
                "{:.6},{:.6},{},{}",
                res.statistic_observed, res.p_value, res.n_resamples, res.degenerate
            );
        }
        Command::Simulate { config, out_dir } => {
            let text = std::fs::read_to_string(&config)?;
            let config: SimulationConfig = serde_json::from_str(&text)?;
            let table = run_power_simulation(&config)?;
            let written = emit_report(&table, &out_dir)?;
            for path in written {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
