//! `pvinspect` command line: run inspections, aggregate fleets, serve
//! reviews and emit synthetic fixtures.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure.

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pvinspect_core::analytics::{aggregate_fleet, write_fleet_csv, SiteHealthReport};
use pvinspect_core::config::{DetectorSelection, InspectionConfig};
use pvinspect_core::geojson_io::write_json;
use pvinspect_core::pipeline::{self, run_inspection};
use pvinspect_core::synth::{generate, write_site, SynthParams};
use pvinspect_server::CorsOrigin;

#[derive(Debug, Parser)]
#[command(name = "pvinspect", version, about = "Thermal inspection of photovoltaic sites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the inspection pipeline described by a config file.
    Inspect {
        #[arg(long)]
        config: PathBuf,
        /// Override `worker_count`.
        #[arg(long)]
        workers: Option<usize>,
        /// Override `output_dir`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the detector: `baseline` or `import:<path>`.
        #[arg(long)]
        detector: Option<DetectorSelection>,
    },
    /// Summarize one results directory, or aggregate several with --fleet.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        results: Vec<PathBuf>,
        /// Write the fleet CSV (one row per site plus a FLEET summary row).
        #[arg(long)]
        fleet: bool,
        /// Reference year for age bands; defaults to the current UTC year.
        #[arg(long, requires = "fleet")]
        as_of_year: Option<i32>,
        /// CSV destination; stdout when omitted.
        #[arg(long, requires = "fleet")]
        out: Option<PathBuf>,
    },
    /// Serve a results directory to the review console.
    Serve {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Allowed console origin; any origin when omitted.
        #[arg(long)]
        cors_origin: Option<String>,
    },
    /// Write a synthetic site: IR and RGB GeoTIFFs, ground truth and config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// 8192 px site with 400 tables instead of the 4096 px default.
        #[arg(long)]
        large: bool,
    },
}

/// Failure split by exit code.
enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Invalid(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Inspect { config, workers, output, detector } => inspect(&config, workers, output, detector),
        Command::Report { results, fleet, as_of_year, out } => report(&results, fleet, as_of_year, out.as_deref()),
        Command::Serve { results, port, host, cors_origin } => {
            if !results.is_dir() {
                return Err(invalid(anyhow::anyhow!("{} is not a directory", results.display())));
            }
            let cors = cors_origin.map_or(CorsOrigin::Any, CorsOrigin::Exact);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(pvinspect_server::serve(&results, SocketAddr::new(host, port), cors))?;
            Ok(())
        }
        Command::Synth { out, seed, large } => {
            let params = if large { SynthParams::large(seed) } else { SynthParams::standard(seed) };
            let site = generate(&params)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let files = write_site(&site, &out)?;
            println!(
                "wrote {} ({} tables, {} panels, {} planted defects); run: pvinspect inspect --config {}",
                out.display(),
                site.tables.len(),
                params.panel_count(),
                site.truth.len(),
                files.config.display()
            );
            Ok(())
        }
    }
}

fn inspect(config: &Path, workers: Option<usize>, output: Option<PathBuf>, detector: Option<DetectorSelection>) -> Result<(), Failure> {
    let mut cfg = InspectionConfig::load(config).map_err(invalid)?;
    if let Some(w) = workers {
        cfg.worker_count = w;
    }
    if let Some(o) = output {
        cfg.output_dir = o;
    }
    if let Some(d) = detector {
        cfg.detector = d;
    }
    match run_inspection(&cfg) {
        Ok(res) => {
            let r = &res.report;
            println!(
                "{}: rating {} (OR {:.6}, dT max {:.2} C, APM {:.2}), {} detections, loss {:.4} MW / ${:.0}; results in {}",
                r.site.site_id,
                r.rating,
                r.or_ratio,
                r.delta_t_max,
                r.apm,
                res.detections.len(),
                r.power_loss_mw_dc,
                r.revenue_loss_usd,
                cfg.output_dir.display()
            );
            Ok(())
        }
        Err(e) if e.is_validation() => Err(invalid(e)),
        Err(e) => {
            // keep the partial manifest next to where the results would have gone
            let path = cfg.output_dir.join(pipeline::MANIFEST_FILE);
            if std::fs::create_dir_all(&cfg.output_dir).is_ok() && write_json(&*e.manifest, &path).is_ok() {
                eprintln!("partial manifest written to {}", path.display());
            }
            Err(Failure::Runtime(e.into()))
        }
    }
}

fn report(dirs: &[PathBuf], fleet: bool, as_of_year: Option<i32>, out: Option<&Path>) -> Result<(), Failure> {
    let reports = dirs
        .iter()
        .map(|d| pipeline::read_report(d).with_context(|| format!("reading results in {}", d.display())))
        .collect::<anyhow::Result<Vec<SiteHealthReport>>>()
        .map_err(invalid)?;
    if !fleet {
        for r in &reports {
            println!("{}", serde_json::to_string_pretty(r)?);
        }
        return Ok(());
    }
    let year = as_of_year.unwrap_or_else(|| chrono::Datelike::year(&chrono::Utc::now()));
    let summary = aggregate_fleet(&reports, year).map_err(invalid)?;
    match out {
        Some(path) => {
            let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_fleet_csv(&reports, &summary, f)?;
            eprintln!(
                "{} sites, {:.1} MW DC, mean OR {:.4}, {:.0}% with every letter A or B",
                summary.site_count,
                summary.total_capacity_mw_dc,
                summary.mean_or,
                100.0 * summary.good_or_better_share
            );
        }
        None => write_fleet_csv(&reports, &summary, std::io::stdout().lock())?,
    }
    Ok(())
}
