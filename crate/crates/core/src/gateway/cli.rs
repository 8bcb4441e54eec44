//! `plumewatch` subcommands. Exit status is 0 on success, 1 for invalid
//! input (including usage errors) and 2 for I/O failures.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, IoContext, Result};
use crate::smoke::{run_detection, SmokeParams};
use crate::store::DataRoot;
use crate::survey::{read_survey_csv, run_study, write_study, VariableOutcome};
use crate::telemetry::{read_readings_csv, read_stations_csv, read_wind_csv, TelemetryStore};
use crate::timelapse::{build_pyramid_with, ingest_frames, DatasetId, DEFAULT_SEGMENT_FRAMES, DEFAULT_TILE_SIZE};
use crate::usage::{analyze_lines, parse_cidrs, parse_tz, read_log_glob, write_report, AnalysisConfig};

use super::{run_until_interrupted, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "plumewatch", version, about = "Community air-quality monitoring service and tools")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Data root; overrides the config file.
    #[arg(long, global = true, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Config file; defaults to $PLUMEWATCH_CONFIG.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Register a directory of timestamped frames as a dataset.
    Ingest {
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        dir: PathBuf,
    },
    /// Build the tile pyramid of a dataset.
    Tile {
        #[arg(long)]
        dataset: String,
        #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
        tile_size: u32,
        #[arg(long, default_value_t = DEFAULT_SEGMENT_FRAMES)]
        segment_frames: u32,
    },
    /// Count smoke pixels and segment smoke events.
    Detect {
        #[arg(long)]
        dataset: String,
        /// key = value parameter file.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Import PM2.5 readings (t_iso,station_id,pm25).
    ImportReadings {
        #[arg(long)]
        file: PathBuf,
        /// Stations to register first (station_id,display_name,latitude,longitude,cadence_s).
        #[arg(long)]
        stations: Option<PathBuf>,
    },
    /// Import wind readings (t_iso,speed_ms,direction_deg).
    ImportWind {
        #[arg(long)]
        file: PathBuf,
    },
    /// Usage analytics over access logs.
    Analyze {
        /// Glob of log files, e.g. 'logs/access.log*'.
        #[arg(long)]
        logs: String,
        /// CIDR (or bare IP) to exclude; repeatable or comma separated.
        #[arg(long = "exclude-cidr")]
        exclude_cidr: Vec<String>,
        /// Study time zone; defaults to the config's.
        #[arg(long)]
        tz: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a survey CSV and run the paired tests.
    Survey {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        listen: Option<SocketAddr>,
    },
}

fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        1
    } else {
        2
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("plumewatch: {e}");
            exit_code(&e)
        }
    }
}

fn dataset_arg(raw: &str) -> Result<DatasetId> {
    DatasetId::new(raw)
}

fn execute(cli: Cli) -> Result<()> {
    let mut config = ServiceConfig::resolve(cli.config.as_deref())?;
    if let Some(d) = cli.data {
        config.data_root = d;
    }
    let root = || DataRoot::create(&config.data_root);
    match cli.command {
        Command::Ingest { dataset, dir } => {
            let id = dataset_arg(&dataset)?;
            let d = ingest_frames(&root()?, &id, &dir)?;
            println!(
                "ingested {} frames into {} ({}x{}, every {} s, {} gaps)",
                d.frame_count(),
                d.id,
                d.frame_width,
                d.frame_height,
                d.capture_interval_s,
                d.missing.len()
            );
        }
        Command::Tile {
            dataset,
            tile_size,
            segment_frames,
        } => {
            let id = dataset_arg(&dataset)?;
            let p = build_pyramid_with(&root()?, &id, tile_size, segment_frames)?;
            println!("built {} levels of {}px tiles for {}", p.num_levels, p.tile_size, p.dataset_id);
        }
        Command::Detect { dataset, params } => {
            let id = dataset_arg(&dataset)?;
            let params = match params {
                Some(p) => SmokeParams::parse(&fs::read_to_string(&p).at(&p)?)?,
                None => SmokeParams::default(),
            };
            let report = run_detection(&root()?, &id, &params)?;
            println!("{} smoke events in {} frames", report.events.len(), report.frames.len());
            for e in &report.events {
                println!("  frames {}..={} peak {} {}", e.start_frame, e.end_frame, e.peak_count, e.thumbnail.encode_url());
            }
        }
        Command::ImportReadings { file, stations } => {
            let store = TelemetryStore::open(root()?.telemetry_journal())?;
            if let Some(path) = stations {
                let list = read_stations_csv(File::open(&path).at(&path)?)?;
                let n = list.len();
                for s in list {
                    store.register_station(s)?;
                }
                println!("registered {n} stations");
            }
            let readings = read_readings_csv(File::open(&file).at(&file)?)?;
            println!("imported {} readings", store.ingest_readings(readings)?);
        }
        Command::ImportWind { file } => {
            let store = TelemetryStore::open(root()?.telemetry_journal())?;
            let wind = read_wind_csv(File::open(&file).at(&file)?)?;
            println!("imported {} wind readings", store.ingest_wind_batch(wind)?);
        }
        Command::Analyze {
            logs,
            exclude_cidr,
            tz,
            out,
        } => {
            let exclusions = if exclude_cidr.is_empty() {
                config.exclusions()?
            } else {
                parse_cidrs(&exclude_cidr.join(","))?
            };
            let tz = match tz {
                Some(name) => parse_tz(&name)?,
                None => config.tz()?,
            };
            let capture_dates = capture_dates(&config.data_root)?;
            let lines = read_log_glob(&logs)?;
            let report = analyze_lines(&lines, &capture_dates, &AnalysisConfig { exclusions, tz });
            write_report(&report, &out)?;
            let s = &report.summary;
            println!(
                "{} lines, {} views ({} HG, {} AG), {} users; written to {}",
                report.parse.lines,
                s.total_views,
                s.views_hg,
                s.views_ag,
                s.total_users,
                out.display()
            );
        }
        Command::Survey { input, out } => {
            let rows = read_survey_csv(File::open(&input).at(&input)?)?;
            let report = run_study(&rows)?;
            write_study(&report, &out)?;
            println!(
                "{} responses: {} valid, {} invalid, {} incomplete",
                report.n_rows, report.n_valid, report.n_invalid, report.n_incomplete
            );
            for v in &report.variables {
                match &v.outcome {
                    VariableOutcome::Tested(t) => println!(
                        "  {}: W+ = {}, p = {:.4}, mean diff {:.2} ± {}",
                        v.variable,
                        t.w_plus,
                        t.p_right,
                        t.mean_diff,
                        t.ci95_half_width.map_or("n/a".into(), |c| format!("{c:.2}"))
                    ),
                    VariableOutcome::NoInformation { .. } => println!("  {}: no information (all differences zero)", v.variable),
                }
            }
        }
        Command::Serve { listen } => {
            if let Some(addr) = listen {
                config.listen = addr;
            }
            root()?;
            run_until_interrupted(&config)?;
        }
    }
    Ok(())
}

/// Capture dates of every dataset under `data_root` (none if it is absent).
fn capture_dates(data_root: &Path) -> Result<HashMap<DatasetId, chrono::NaiveDate>> {
    if !data_root.exists() {
        return Ok(HashMap::new());
    }
    Ok(DataRoot::new(data_root)
        .list_datasets()?
        .into_iter()
        .map(|d| (d.id, d.capture_date))
        .collect())
}
