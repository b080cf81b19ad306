//! `haze`: ingest, classify, and analyze hotspot + geotagged-post
//! datasets, or generate synthetic scenarios with planted ground truth.
//!
//! Exit codes: 0 success, 1 validation/data failure, 2 usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{
    parse_bbox, parse_day_range, parse_f64_list, parse_week_bounds, parse_week_list, AreaSpec,
    RunConfig,
};

#[derive(Parser)]
#[command(name = "haze", version, about = "Hotspot and geotagged-post analytics pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate inputs and report ingest counts without analyzing.
    IngestCheck(CommonArgs),
    /// Label each post with the taxonomies it matches.
    Classify(CommonArgs),
    /// Weekly series, topic/hotspot correlations, week classes.
    Temporal(CommonArgs),
    /// Popularity, distance distributions, null models.
    Spatial(CommonArgs),
    /// Profiles, distance CDFs, reduction rates, region analytics.
    Mobility(CommonArgs),
    /// Generate a synthetic scenario with a ground-truth manifest.
    Synth(SynthArgs),
    /// Run every analysis stage and emit a run manifest.
    All(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; CLI flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Post records file.
    #[arg(long)]
    posts: Option<PathBuf>,
    /// Hotspot CSV file.
    #[arg(long)]
    hotspots: Option<PathBuf>,
    /// Region geometry (native CSV or GeoJSON FeatureCollection).
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Air-quality CSV file.
    #[arg(long)]
    air_quality: Option<PathBuf>,
    /// Taxonomy rule file (defaults to the built-in fixture).
    #[arg(long)]
    taxonomies: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed for the null model and sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Null-model iteration count.
    #[arg(long)]
    iterations: Option<u32>,
    /// Weekly post-count eligibility threshold (strictly greater than).
    #[arg(long)]
    tau: Option<u32>,
    /// Relative-spread threshold marking a mobility reducer.
    #[arg(long)]
    rs_threshold: Option<f64>,
    /// Week-class bounds as lo,hi (no-haze < lo, severe > hi).
    #[arg(long, value_parser = parse_week_bounds)]
    week_bounds: Option<(u64, u64)>,
    /// Weeks to exclude everywhere, e.g. 2014-W16,2014-W17 ("none" clears).
    #[arg(long, value_parser = parse_week_list_arg)]
    exclude_weeks: Option<WeekListArg>,
    /// Evacuation weeks, e.g. 2014-W11 ("none" clears).
    #[arg(long, value_parser = parse_week_list_arg)]
    evac_weeks: Option<WeekListArg>,
    /// Local zone offset in minutes (default +420, UTC+7).
    #[arg(long)]
    utc_offset_minutes: Option<i32>,
    /// Distance computation mode: haversine or euclid-degrees.
    #[arg(long, value_parser = parse_distance_mode)]
    distance: Option<haze_core::DistanceMode>,
    /// Stop at the first malformed input row instead of skipping.
    #[arg(long)]
    strict: bool,
    /// Worker thread cap (N=1 must match N=k byte for byte).
    #[arg(long)]
    threads: Option<usize>,
    /// Ingest bounding box filter: minlat,minlon,maxlat,maxlon.
    #[arg(long, value_parser = parse_bbox)]
    bbox: Option<haze_core::ingest::BoundingBox>,
    /// Extra correlation area, name=bbox:... or name=regions:... (repeatable).
    #[arg(long = "area", value_parser = AreaSpec::parse)]
    areas: Vec<AreaSpec>,
    /// Cohort home region code for region analytics.
    #[arg(long)]
    home_region: Option<String>,
    /// Region whose sub-districts the visit buckets use.
    #[arg(long)]
    subdistrict_region: Option<String>,
    /// Analysis day range start,end (ISO dates).
    #[arg(long, value_parser = parse_day_range)]
    day_range: Option<(chrono::NaiveDate, chrono::NaiveDate)>,
    /// Baseline pairing: all-baselines or first-baseline.
    #[arg(long, value_parser = parse_pairing)]
    pairing: Option<haze_core::mobility::PairingMode>,
    /// Distance histogram bin width in km.
    #[arg(long)]
    bin_width_km: Option<f64>,
    /// Reduction-rate distance bin edges in km, e.g. 0,50,500.
    #[arg(long, value_parser = parse_f64_list_arg)]
    distance_bins_km: Option<F64ListArg>,
}

// Comma-separated list values wrapped so clap treats each flag occurrence
// as one value rather than an accumulating Vec.
#[derive(Clone)]
struct WeekListArg(Vec<haze_core::IsoWeekId>);

fn parse_week_list_arg(raw: &str) -> anyhow::Result<WeekListArg> {
    parse_week_list(raw).map(WeekListArg)
}

#[derive(Clone)]
struct F64ListArg(Vec<f64>);

fn parse_f64_list_arg(raw: &str) -> anyhow::Result<F64ListArg> {
    parse_f64_list(raw).map(F64ListArg)
}

fn parse_distance_mode(raw: &str) -> Result<haze_core::DistanceMode, String> {
    raw.parse()
}

fn parse_pairing(raw: &str) -> Result<haze_core::mobility::PairingMode, String> {
    match raw {
        "all-baselines" => Ok(haze_core::mobility::PairingMode::AllBaselines),
        "first-baseline" => Ok(haze_core::mobility::PairingMode::FirstBaseline),
        other => Err(format!(
            "unknown pairing {other:?}, expected all-baselines or first-baseline"
        )),
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Scenario config JSON; a small default scenario when absent.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! overlay {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { config.$field = Some(v.clone()); })*
            };
        }
        overlay!(posts, hotspots, regions, air_quality, taxonomies);
        if let Some(v) = &self.out {
            config.out = v.clone();
        }
        macro_rules! overlay_plain {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { config.$field = v.clone(); })*
            };
        }
        overlay_plain!(
            seed,
            iterations,
            tau,
            rs_threshold,
            week_bounds,
            utc_offset_minutes,
            distance,
            pairing,
            bin_width_km
        );
        if let Some(v) = &self.exclude_weeks {
            config.exclude_weeks = v.0.clone();
        }
        if let Some(v) = &self.evac_weeks {
            config.evac_weeks = v.0.clone();
        }
        if let Some(v) = &self.distance_bins_km {
            config.distance_bins_km = v.0.clone();
        }
        if self.strict {
            config.strict = true;
        }
        if let Some(v) = self.threads {
            config.threads = Some(v);
        }
        if let Some(v) = &self.bbox {
            config.bbox = Some(*v);
        }
        if !self.areas.is_empty() {
            config.areas = self.areas.clone();
        }
        overlay!(home_region, subdistrict_region);
        if let Some(v) = self.day_range {
            config.day_range = Some(v);
        }
        Ok(config)
    }
}

fn install_thread_pool(config: &RunConfig) -> anyhow::Result<()> {
    if let Some(n) = config.threads {
        if n == 0 {
            anyhow::bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow::anyhow!("thread pool: {e}"))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| -> anyhow::Result<()> {
        match &cli.command {
            Command::IngestCheck(args) => {
                let config = args.resolve()?;
                install_thread_pool(&config)?;
                commands::ingest_check(&config)
            }
            Command::Classify(args) => {
                let config = args.resolve()?;
                install_thread_pool(&config)?;
                commands::classify(&config)
            }
            Command::Temporal(args) => {
                let config = args.resolve()?;
                install_thread_pool(&config)?;
                commands::temporal(&config)
            }
            Command::Spatial(args) => {
                let config = args.resolve()?;
                install_thread_pool(&config)?;
                commands::spatial(&config)
            }
            Command::Mobility(args) => {
                let config = args.resolve()?;
                install_thread_pool(&config)?;
                commands::mobility(&config)
            }
            Command::Synth(args) => {
                let config = args.common.resolve()?;
                install_thread_pool(&config)?;
                commands::synth(&config, args.scenario.as_deref())
            }
            Command::All(args) => {
                let config = args.resolve()?;
                install_thread_pool(&config)?;
                commands::all(&config)
            }
        }
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
