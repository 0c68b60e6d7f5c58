use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pstream::analysis::{correlation_report, ReportParams};
use pstream::config::{resolve_seed, ExperimentConfig, SEED_ENV};
use pstream::export::{read_scan_csv, write_report_csv, write_scan_csv};
use pstream::fig4::{
    analytic_fig4, symmetric_grid, write_fig4_csv, DEFAULT_HALF_WIDTH, DEFAULT_POINTS,
};
use pstream::scan::{run_scan_with, series_from_points, Workers};
use pstream::source::{
    mean_photon_number, pair_fraction, poisson_pmf, poisson_tail, HENE_WAVELENGTH,
};
use pstream::trace::{ingest_trace, read_trace, DEFAULT_SAMPLING_PERIOD, DEFAULT_THRESHOLD};
use pstream::{Error, Result};

#[derive(Parser)]
#[command(
    name = "pstream",
    version,
    about = "Photon-stream coincidence simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a PZT scan and write scan.csv, report.csv and the resolved config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed and PSTREAM_SEED.
        #[arg(long)]
        seed: Option<u64>,
        /// 1 = sequential, 0 = one per core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Summarize a scan CSV into a key,value report.
    Analyze {
        #[arg(long)]
        scan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Restrict extrema to |x| <= this half-width, m.
        #[arg(long)]
        window: Option<f64>,
        /// Accumulation time per point, s.
        #[arg(long, default_value_t = 1.0)]
        accumulation: f64,
        /// Coincidence resolution for the rate-based g2, s.
        #[arg(long, default_value_t = 10e-9)]
        delta_t: f64,
        #[arg(long, default_value_t = 22e-9)]
        dead_time: f64,
    },
    /// Write the noise-free fringe, coincidence and g2 curves.
    Fig4 {
        #[arg(long)]
        v: f64,
        /// Envelope FWHM, m.
        #[arg(long)]
        leff: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_POINTS)]
        points: usize,
        #[arg(long, default_value_t = DEFAULT_HALF_WIDTH)]
        half_width: f64,
        #[arg(long, default_value_t = HENE_WAVELENGTH)]
        wavelength: f64,
    },
    /// Photon-number statistics for a mean occupancy per dead-time slot.
    Stats {
        #[arg(long)]
        mean: f64,
        #[arg(long, default_value_t = 22e-9)]
        dead_time: f64,
    },
    /// Extract rising edges from an oscilloscope trace.
    Ingest {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// V
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        /// s; used for binary traces, and CSV traces with one sample.
        #[arg(long, default_value_t = DEFAULT_SAMPLING_PERIOD)]
        sampling_period: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            config,
            out,
            seed,
            workers,
        } => simulate(&config, &out, seed, workers),
        Command::Analyze {
            scan,
            out,
            window,
            accumulation,
            delta_t,
            dead_time,
        } => {
            let points = read_scan_csv(&scan)?;
            let (a, b, c) = series_from_points(&points);
            let params = ReportParams {
                accumulation,
                delta_t,
                dead_time,
                window: window.map(|w| (-w, w)),
            };
            let report = correlation_report(&a, &b, &c, &params)?;
            write_report_csv(&report, &out)?;
            for (k, v) in report.rows() {
                println!("{k} = {v}");
            }
            Ok(())
        }
        Command::Fig4 {
            v,
            leff,
            out,
            points,
            half_width,
            wavelength,
        } => {
            let grid = symmetric_grid(half_width, points)?;
            let curves = analytic_fig4(v, leff, &grid, wavelength)?;
            write_fig4_csv(&curves, &out)
        }
        Command::Stats { mean, dead_time } => {
            print!("{}", stats(mean, dead_time)?);
            Ok(())
        }
        Command::Ingest {
            trace,
            out,
            threshold,
            sampling_period,
        } => {
            let file = read_trace(&trace, sampling_period, threshold)?;
            let events = ingest_trace(&file)?;
            let mut s = String::from("channel,index,time_s\n");
            for (ch, times) in [(1, &events.ch1), (2, &events.ch2)] {
                for (i, t) in times.iter().enumerate() {
                    writeln!(s, "{ch},{i},{t}").expect("string write");
                }
            }
            write(&out, &s)?;
            println!("ch1 {} events", events.ch1.len());
            println!("ch2 {} events", events.ch2.len());
            println!("duration {} s", file.duration());
            Ok(())
        }
    }
}

fn simulate(config: &Path, out: &Path, seed: Option<u64>, workers: usize) -> Result<()> {
    let mut cfg = ExperimentConfig::from_json_file(config)?;
    let env = std::env::var(SEED_ENV).ok();
    cfg.scan.seed = resolve_seed(cfg.scan.seed, env.as_deref(), seed)?;
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    let result = run_scan_with(&cfg, Workers::from_count(workers))?;
    write_scan_csv(&result, &out.join("scan.csv"))?;
    write(&out.join("config.json"), &cfg.to_json_pretty())?;

    let (a, b, c) = result.series();
    let params = ReportParams {
        accumulation: cfg.scan.seconds_per_point,
        dead_time: cfg.source.dead_time,
        ..ReportParams::default()
    };
    match correlation_report(&a, &b, &c, &params) {
        Ok(report) => write_report_csv(&report, &out.join("report.csv"))?,
        Err(e) => eprintln!("warning: no report written: {e}"),
    }
    println!(
        "{} points, seed {}, written to {}",
        result.points.len(),
        result.seed,
        out.display()
    );
    Ok(())
}

fn stats(mean: f64, dead_time: f64) -> Result<String> {
    let mut s = String::new();
    writeln!(s, "n,P(n)").expect("string write");
    for n in 0..=4 {
        writeln!(s, "{n},{:.6e}", poisson_pmf(n, mean)?).expect("string write");
    }
    writeln!(s, ">=5,{:.6e}", poisson_tail(5, mean)?).expect("string write");
    writeln!(s).expect("string write");
    writeln!(s, "pair_fraction P(2)/P(1) = {}", pair_fraction(mean)?).expect("string write");
    writeln!(s, "slots per second = {:.6e}", 1.0 / dead_time).expect("string write");
    writeln!(s, "photons per second = {:.6e}", mean / dead_time).expect("string write");
    let singles = mean / dead_time / 2.0;
    writeln!(s, "expected singles per path per second = {singles:.6e}").expect("string write");
    writeln!(
        s,
        "<n> from those singles = {}",
        mean_photon_number(2.0 * singles, 1.0, dead_time)?
    )
    .expect("string write");
    Ok(s)
}
