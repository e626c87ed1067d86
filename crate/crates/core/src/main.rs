use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cfdim::report::{batch_table, parse_batch, run_with, ExitStatus, OutputFormat, Report, RunConfig};
use cfdim::{DoubleDouble, Error, Real};

/// Rigorous Hausdorff-dimension brackets for continued-fraction Cantor sets.
#[derive(Debug, Parser)]
#[command(name = "cfdim", version)]
struct Cli {
    /// Digit set, comma separated (e.g. 1,2 or 1,4,7).
    #[arg(long, value_delimiter = ',', required_unless_present = "batch")]
    set: Vec<f64>,
    /// Polynomial degree r on each cell.
    #[arg(long, default_value_t = 8)]
    degree: usize,
    /// Target mesh size.
    #[arg(long, default_value_t = 0.01)]
    h: f64,
    /// Number of composed maps per word.
    #[arg(long, default_value_t = 1)]
    nu: usize,
    /// Depth of the image intervals used as the domain (0 = whole interval).
    #[arg(long = "nu-prime", default_value_t = 0)]
    nu_prime: usize,
    /// Working precision in decimal digits: 17 selects f64, up to 34 double-double.
    #[arg(long, default_value_t = 34)]
    digits: usize,
    /// Solver tolerance (power iteration and root finding).
    #[arg(long)]
    tol: Option<f64>,
    /// Largest allowed ratio h / h_min before image intervals are merged.
    #[arg(long = "mu-cap", default_value_t = 4.0)]
    mu_cap: f64,
    /// Skip the certificate: heuristic estimate only.
    #[arg(long = "no-verify")]
    no_verify: bool,
    /// Emit the machine-readable report.
    #[arg(long)]
    json: bool,
    /// Run every configuration in a JSON file and print a table.
    #[arg(long)]
    batch: Option<PathBuf>,
    /// Run batch rows in parallel.
    #[arg(long)]
    parallel: bool,
    /// Write the collocation matrix at the computed s to a file.
    #[arg(long = "dump-matrix")]
    dump_matrix: Option<PathBuf>,
}

impl Cli {
    fn config(&self) -> RunConfig {
        RunConfig {
            digits: self.set.clone(),
            r: self.degree,
            h_target: self.h,
            nu: self.nu,
            nu_prime: self.nu_prime,
            precision: self.digits,
            verify: !self.no_verify,
            tol: self.tol,
            mu_cap: self.mu_cap,
            output_format: if self.json { OutputFormat::Json } else { OutputFormat::Text },
        }
    }
}

fn single<T: Real>(cli: &Cli, config: &RunConfig) -> Result<Report, Error> {
    let out = run_with::<T>(config)?;
    if let Some(path) = &cli.dump_matrix {
        let mat = out.problem.kernel.assemble(out.bracket.s_mid);
        let file = File::create(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        mat.write_text(BufWriter::new(file)).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    }
    Ok(out.report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match &cli.batch {
        Some(path) => run_batch(&cli, path),
        None => {
            let config = cli.config();
            let result = config.validate().and_then(|_| {
                if config.precision <= 17 {
                    single::<f64>(&cli, &config)
                } else {
                    single::<DoubleDouble>(&cli, &config)
                }
            });
            match result {
                Ok(report) => {
                    if cli.json {
                        println!("{}", report.to_json());
                    } else {
                        print!("{}", report.to_text());
                    }
                    report.exit_status()
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitStatus::for_error(&e)
                }
            }
        }
    };
    ExitCode::from(status.code() as u8)
}

fn run_batch(cli: &Cli, path: &PathBuf) -> ExitStatus {
    let rows = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        .and_then(|t| parse_batch(&t));
    match rows.and_then(|rows| batch_table(&rows, cli.parallel)) {
        Ok(table) => {
            if cli.json {
                println!("{}", table.to_json());
            } else {
                print!("{}", table.to_text());
            }
            if table.all_verified() {
                ExitStatus::Verified
            } else {
                ExitStatus::Unverified
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::for_error(&e)
        }
    }
}
