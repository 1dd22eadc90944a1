use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use subpath_kernel::experiment::{
    curve_csv, feature_mode, parse_methods, robustness_curve, run_experiment, Protocol,
};
use subpath_kernel::oracle::oracle_check;
use subpath_kernel::selection::Grids;
use subpath_kernel::synthetic::{
    generate, generate_pairing_classes, scenario_suite, Scenario, ScenarioParams, VALUE_RANGE,
};
use subpath_kernel::{gram_matrix, AtomicKind, Dataset, Error, FeatureMode, KernelConfig, KernelKind, ValueRange};

/// Largest relative DP/enumeration gap accepted by `oracle-check`.
const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "subpath", version, about = "Subpath kernels for unordered feature trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as JSON lines.
    Gen {
        /// a, b, c, c1, c2, or pairing (seven classes)
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Fraction of distorted leaves (c1, c2)
        #[arg(long, default_value_t = 0.0)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        noise_dims: usize,
        #[arg(long)]
        trees_per_class: Option<usize>,
    },
    /// Compute a Gram matrix and write it as CSV.
    Gram {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "subpath")]
        kernel: String,
        #[arg(long, default_value = "gaussian")]
        atomic: String,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        out: PathBuf,
        /// Histogram bins per dimension (chi2)
        #[arg(long, default_value_t = 4)]
        bins: usize,
        /// Histogram range LO,HI; repeat once per dimension or give one for all
        #[arg(long = "range")]
        ranges: Vec<String>,
    },
    /// Compare the dynamic program with explicit path enumeration.
    OracleCheck {
        #[arg(long, default_value_t = 12)]
        max_nodes: usize,
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Repeated random-split evaluation of several methods.
    Experiment {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated <kernel>-<atomic> list
        #[arg(long, default_value = "rooted-gaussian,rooted-chi2,subpath-gaussian,subpath-chi2")]
        methods: String,
        #[arg(long, default_value_t = 20)]
        repetitions: usize,
        #[arg(long, default_value_t = 20)]
        train_per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON report
        #[arg(long)]
        out: PathBuf,
        /// Per-method summary CSV; defaults to the report path with a .csv extension
        #[arg(long)]
        summary: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Accuracy against distortion ratio for scenario c1 or c2.
    Curve {
        #[arg(long)]
        scenario: String,
        /// Comma-separated ratios
        #[arg(long)]
        ratios: String,
        #[arg(long, default_value = "subpath-gaussian,subpath-chi2")]
        methods: String,
        #[arg(long, default_value_t = 20)]
        repetitions: usize,
        #[arg(long, default_value_t = 20)]
        train_per_class: usize,
        #[arg(long)]
        trees_per_class: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(clap::Args)]
struct GridArgs {
    /// Comma-separated γ grid
    #[arg(long)]
    gammas: Option<String>,
    /// Comma-separated C grid
    #[arg(long)]
    cs: Option<String>,
    /// Comma-separated β grid
    #[arg(long)]
    betas: Option<String>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long)]
    no_normalize: bool,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long = "range")]
    ranges: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for bad arguments, 2 for bad data, 3 for solver and internal failures.
fn exit_code(e: &Error) -> u8 {
    match e.root_cause() {
        Error::Param(_) => 1,
        Error::Convergence { .. } | Error::Svm(_) => 3,
        _ => 2,
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Gen {
            scenario,
            seed,
            out,
            ratio,
            noise_dims,
            trees_per_class,
        } => {
            let ds = if scenario == "pairing" {
                generate_pairing_classes(trees_per_class.unwrap_or(60), seed)?
            } else {
                let mut params = ScenarioParams::new(scenario.parse()?, seed).with_ratio(ratio);
                params.extra_noise_dims = noise_dims;
                if let Some(n) = trees_per_class {
                    params.trees_per_class = n;
                }
                generate(&params)?
            };
            ds.save(&out)?;
            eprintln!("wrote {} trees to {}", ds.len(), out.display());
        }
        Command::Gram {
            data,
            kernel,
            atomic,
            gamma,
            beta,
            normalize,
            out,
            bins,
            ranges,
        } => {
            let ds = Dataset::load(&data)?;
            let atomic: AtomicKind = atomic.parse()?;
            let kind: KernelKind = kernel.parse()?;
            let ranges = parse_ranges(&ranges)?;
            let mode = feature_mode(&ds, atomic, bins, ranges.as_deref())?;
            let mut cfg = KernelConfig::new(atomic, gamma, beta).normalized(normalize);
            if let FeatureMode::Histogram { bins, .. } = &mode {
                cfg = cfg.with_bins(*bins);
            }
            let gram = gram_matrix(&ds.with_features(&mode)?, &cfg, kind)?;
            gram.save(&out)?;
        }
        Command::OracleCheck { max_nodes, cases, seed } => {
            let report = oracle_check(max_nodes, cases, seed)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            if report.max_relative_error > ORACLE_TOLERANCE {
                eprintln!(
                    "mismatch: max relative error {:.3e} exceeds {ORACLE_TOLERANCE:e}",
                    report.max_relative_error
                );
                return Ok(ExitCode::from(3));
            }
        }
        Command::Experiment {
            data,
            methods,
            repetitions,
            train_per_class,
            seed,
            out,
            summary,
            grid,
        } => {
            let ds = Dataset::load(&data)?;
            let methods = parse_methods(&methods)?;
            let protocol = grid.protocol(repetitions, train_per_class, seed, None)?;
            let report = run_experiment(&ds, &methods, &protocol)?;
            write(&out, &report.to_json()?)?;
            let summary = summary.unwrap_or_else(|| out.with_extension("csv"));
            write(&summary, &report.summary_csv())?;
            print!("{}", report.summary_csv());
        }
        Command::Curve {
            scenario,
            ratios,
            methods,
            repetitions,
            train_per_class,
            trees_per_class,
            seed,
            out,
            grid,
        } => {
            let scenario: Scenario = scenario.parse()?;
            if !matches!(scenario, Scenario::C1 | Scenario::C2) {
                return Err(Error::Param("curves are defined for c1 and c2".into()));
            }
            let ratios = parse_list(&ratios, "ratios")?;
            let methods = parse_methods(&methods)?;
            let mut params = ScenarioParams::new(scenario, seed);
            if let Some(n) = trees_per_class {
                params.trees_per_class = n;
            }
            let suite = scenario_suite(&params, &ratios)?;
            let suite: Vec<(f64, Dataset)> = ratios.iter().copied().zip(suite).collect();
            let protocol = grid.protocol(repetitions, train_per_class, seed, Some(scenario))?;
            let points = robustness_curve(&suite, &methods, &protocol)?;
            write(&out, &curve_csv(&points))?;
            print!("{}", curve_csv(&points));
        }
    }
    Ok(ExitCode::SUCCESS)
}

impl GridArgs {
    fn protocol(
        &self,
        repetitions: usize,
        train_per_class: usize,
        seed: u64,
        scenario: Option<Scenario>,
    ) -> Result<Protocol, Error> {
        let mut grids = Grids::default();
        if let Some(g) = &self.gammas {
            grids.gamma = parse_list(g, "gammas")?;
        }
        if let Some(c) = &self.cs {
            grids.c = parse_list(c, "cs")?;
        }
        if let Some(b) = &self.betas {
            grids.beta = parse_list(b, "betas")?;
        }
        let ranges = match (parse_ranges(&self.ranges)?, scenario) {
            (Some(r), _) => Some(r),
            (None, Some(_)) => Some(vec![VALUE_RANGE]),
            (None, None) => None,
        };
        Ok(Protocol {
            repetitions,
            train_per_class,
            seed,
            grids,
            folds: self.folds,
            normalize: !self.no_normalize,
            bins: self.bins.or(scenario.map(Scenario::histogram_bins)).unwrap_or(4),
            ranges,
        })
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Param(format!("{what}: {t:?} is not a number")))
        })
        .collect()
}

fn parse_ranges(raw: &[String]) -> Result<Option<Vec<ValueRange>>, Error> {
    if raw.is_empty() {
        return Ok(None);
    }
    raw.iter()
        .map(|r| match parse_list(r, "range")?.as_slice() {
            &[lo, hi] if lo < hi => Ok(ValueRange::new(lo, hi)),
            _ => Err(Error::Param(format!("range {r:?} is not LO,HI with LO < HI"))),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

fn write(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents)?;
    Ok(())
}

