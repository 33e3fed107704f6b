use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use qpjacobi::scattering::{read_interchange, write_interchange, ScatteringData};
use qpjacobi::scenario::{self, Scenario, ScenarioConfig, Status};
use qpjacobi::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Direct and inverse scattering for Jacobi operators on finite-gap backgrounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Gauss nodes per bank of every band.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Largest GLM truncation depth.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Tolerance for the reconstructed coefficients and the one-sided agreement.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for randomly drawn test points.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Compute scattering data and write the interchange file.
    Forward,
    /// Reconstruct the coefficients from an interchange file.
    Inverse { data: PathBuf },
    /// Forward then inverse, reporting every invariant.
    Roundtrip,
    /// Period matrix, capacity and the real-axis map z -> w(z).
    SurfaceReport,
    /// Check an interchange file against the admissibility conditions.
    Validate { data: PathBuf },
}

fn load_config(cli: &Cli, data: Option<&ScatteringData>) -> Result<ScenarioConfig> {
    let mut cfg = match (&cli.config, data) {
        (Some(p), _) => ScenarioConfig::from_json(&fs::read_to_string(p)?)?,
        (None, Some(d)) => ScenarioConfig::for_data(d),
        (None, None) => return Err(Error::Parse("--config is required for this command".into())),
    };
    if let Some(g) = cli.grid {
        cfg.grid = g;
    }
    if let Some(d) = cli.depth {
        cfg.inverse.max_depth = d;
    }
    if let Some(t) = cli.tol {
        cfg.tolerances.reconstruction = t;
        cfg.tolerances.consistency = t;
    }
    cfg.check()?;
    Ok(cfg)
}

fn read_data(path: &Path) -> Result<ScatteringData> {
    read_interchange(BufReader::new(File::open(path)?))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    let mut f = create(dir, name)?;
    writeln!(f, "{text}")?;
    f.flush()?;
    Ok(text)
}

fn run(cli: &Cli) -> Result<Status> {
    match &cli.command {
        Command::Forward => {
            let sc = Scenario::build(load_config(cli, None)?)?;
            let (data, report) = scenario::forward(&sc)?;
            let mut f = create(&cli.out, "scattering.dat")?;
            write_interchange(&data, &mut f)?;
            f.flush()?;
            println!("{}", write_json(&cli.out, "forward.json", &report)?);
            Ok(report.status)
        }
        Command::Inverse { data } => {
            let data = read_data(data)?;
            let cfg = load_config(cli, Some(&data))?;
            let report = scenario::inverse(&data, &cfg)?;
            if let Some(rec) = &report.reconstruction {
                let expected = report.max_error.map(|_| cfg.perturbation());
                scenario::write_reconstruction_csv(rec, expected.as_ref(), create(&cli.out, "reconstruction.csv")?)?;
            }
            println!("{}", write_json(&cli.out, "inverse.json", &report)?);
            Ok(report.status)
        }
        Command::Roundtrip => {
            let sc = Scenario::build(load_config(cli, None)?)?;
            let report = scenario::roundtrip(&sc)?;
            println!("{}", write_json(&cli.out, "roundtrip.json", &report)?);
            Ok(report.status)
        }
        Command::SurfaceReport => {
            let cfg = load_config(cli, None)?;
            let out = scenario::surface_report(&cfg, cli.seed, 16)?;
            let mut w = csv::Writer::from_writer(create(&cli.out, "surface_samples.csv")?);
            for s in &out.samples {
                w.serialize(s).map_err(|e| Error::Parse(e.to_string()))?;
            }
            w.flush()?;
            println!("{}", write_json(&cli.out, "surface.json", &out)?);
            Ok(Status::Pass)
        }
        Command::Validate { data } => {
            let data = read_data(data)?;
            let cfg = load_config(cli, Some(&data))?;
            let report = scenario::validate_data(&data, &cfg)?;
            println!("{}", write_json(&cli.out, "validation.json", &report)?);
            Ok(if report.passed() { Status::Pass } else { Status::Warn })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Warn) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
