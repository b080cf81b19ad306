//! Subcommand implementations. Every command resolves its configuration,
//! dumps it next to the outputs, and writes only under the output
//! directory. `all` additionally records a run manifest with a content
//! hash per output file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use haze_core::ingest::{
    load_air_quality, load_hotspots, load_posts, load_regions, AirQualityTable, HotspotFilter,
    HotspotReport, ParseMode, PostReport, RegionDef,
};
use haze_core::mobility::{
    self, build_pairs, build_profiles, distance_cdf, home_regions, meta_signals, reduction_rate,
    region_diversity, subdistrict_visit_buckets, MetaSignalConfig, MobilityError,
    ALL_SITUATIONS,
};
use haze_core::model::{local_day, FireHotspot, GeoPost};
use haze_core::ruledsl::{self, Taxonomy};
use haze_core::spatial::{
    distance_pdf_csv, hotspot_to_tweet_distribution, null_model, null_model_csv, popularity,
    popularity_csv, tweet_to_hotspot_distribution, SpatialDayIndex, SpatialError,
};
use haze_core::synth::{self, ScenarioConfig};
use haze_core::temporal::{
    build_weekly_series, classify_weeks, correlate_all, correlations_csv, weekly_series_csv,
    TemporalError, WeekClass, WeeklySeries,
};

use crate::config::RunConfig;

/// Writes outputs under one directory and records name, size, and sha256
/// for the run manifest.
struct OutputWriter {
    dir: std::path::PathBuf,
    records: Vec<FileRecord>,
}

#[derive(Serialize)]
struct FileRecord {
    name: String,
    bytes: u64,
    sha256: String,
}

impl OutputWriter {
    fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            records: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, content: impl AsRef<[u8]>) -> Result<()> {
        let content = content.as_ref();
        let path = self.dir.join(name);
        std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        self.records.push(FileRecord {
            name: name.to_string(),
            bytes: content.len() as u64,
            sha256: hex_digest(content),
        });
        Ok(())
    }

    /// The run manifest lists every tracked output (sorted by name) but
    /// not itself and not the resolved config, which echoes invocation
    /// paths.
    fn write_run_manifest(&mut self) -> Result<()> {
        #[derive(Serialize)]
        struct RunManifest<'a> {
            files: &'a [FileRecord],
        }
        self.records.sort_by(|a, b| a.name.cmp(&b.name));
        let json = serde_json::to_string_pretty(&RunManifest {
            files: &self.records,
        })?;
        let path = self.dir.join("run_manifest.json");
        std::fs::write(&path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

fn hex_digest(content: &[u8]) -> String {
    let digest = Sha256::digest(content);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn dump_resolved_config(config: &RunConfig, writer: &OutputWriter) -> Result<()> {
    let json = serde_json::to_string_pretty(config)?;
    let path = writer.dir.join("resolved_config.json");
    std::fs::write(&path, json + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn parse_mode(config: &RunConfig) -> ParseMode {
    if config.strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    }
}

/// Lenient runs still fail when more than 1% of rows are malformed.
fn malformed_gate(what: &str, malformed: u64, total: u64) -> Result<()> {
    if total > 0 && malformed as f64 / total as f64 > 0.01 {
        bail!("{what}: {malformed} of {total} rows malformed (over the 1% budget)");
    }
    Ok(())
}

struct Inputs {
    hotspots: Vec<FireHotspot>,
    hotspot_report: Option<HotspotReport>,
    posts: Vec<GeoPost>,
    post_report: Option<PostReport>,
    regions: Vec<RegionDef>,
    air: Option<AirQualityTable>,
    taxonomies: Vec<Taxonomy>,
}

fn load_inputs(config: &RunConfig, need_posts: bool, need_hotspots: bool) -> Result<Inputs> {
    let mode = parse_mode(config);
    let taxonomies = match &config.taxonomies {
        None => ruledsl::builtin_taxonomies(),
        Some(path) => {
            let raw = std::fs::read_to_string(path)
                .with_context(|| format!("reading taxonomy file {}", path.display()))?;
            ruledsl::parse_taxonomy_file(&raw)
                .map_err(|e| anyhow!("taxonomy file {}: {e}", path.display()))?
        }
    };

    let (hotspots, hotspot_report) = match &config.hotspots {
        Some(path) => {
            let (hotspots, report) = load_hotspots(path, HotspotFilter::default(), mode)?;
            malformed_gate("hotspots", report.malformed, report.total)?;
            (hotspots, Some(report))
        }
        None if need_hotspots => bail!("this command needs --hotspots"),
        None => (Vec::new(), None),
    };

    let (posts, post_report) = match &config.posts {
        Some(path) => {
            let (posts, report) = load_posts(path, mode, config.bbox)?;
            malformed_gate("posts", report.malformed, report.total)?;
            (posts, Some(report))
        }
        None if need_posts => bail!("this command needs --posts"),
        None => (Vec::new(), None),
    };

    let regions = match &config.regions {
        Some(path) => load_regions(path)?,
        None => Vec::new(),
    };
    let air = match &config.air_quality {
        Some(path) => Some(load_air_quality(path)?),
        None => None,
    };

    Ok(Inputs {
        hotspots,
        hotspot_report,
        posts,
        post_report,
        regions,
        air,
        taxonomies,
    })
}

fn classify_posts(posts: &[GeoPost], taxonomies: &[Taxonomy]) -> Vec<BTreeSet<String>> {
    posts
        .par_iter()
        .map(|p| ruledsl::classify(p, taxonomies))
        .collect()
}

fn taxonomy_names(taxonomies: &[Taxonomy]) -> Vec<String> {
    taxonomies.iter().map(|t| t.name.clone()).collect()
}

pub fn ingest_check(config: &RunConfig) -> Result<()> {
    let mut writer = OutputWriter::create(&config.out)?;
    dump_resolved_config(config, &writer)?;
    let inputs = load_inputs(config, false, false)?;

    #[derive(Serialize)]
    struct IngestReportOut {
        hotspots: Option<HotspotReport>,
        posts: Option<PostReport>,
        regions: usize,
        regions_with_subdistricts: usize,
        air_quality_cells: usize,
        taxonomies: Vec<TaxonomySummary>,
    }
    #[derive(Serialize)]
    struct TaxonomySummary {
        name: String,
        rules: usize,
        keywords: usize,
    }

    let report = IngestReportOut {
        hotspots: inputs.hotspot_report,
        posts: inputs.post_report,
        regions: inputs.regions.len(),
        regions_with_subdistricts: inputs
            .regions
            .iter()
            .filter(|r| !r.subdistricts.is_empty())
            .count(),
        air_quality_cells: inputs.air.as_ref().map_or(0, |t| t.len()),
        taxonomies: inputs
            .taxonomies
            .iter()
            .map(|t| TaxonomySummary {
                name: t.name.clone(),
                rules: t.rules.len(),
                keywords: t.keyword_count(),
            })
            .collect(),
    };
    writer.write(
        "ingest_report.json",
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    println!("ingest-check: ok");
    Ok(())
}

pub fn classify(config: &RunConfig) -> Result<()> {
    let mut writer = OutputWriter::create(&config.out)?;
    dump_resolved_config(config, &writer)?;
    let inputs = load_inputs(config, true, false)?;
    run_classify(config, &inputs, &mut writer)
}

fn run_classify(_config: &RunConfig, inputs: &Inputs, writer: &mut OutputWriter) -> Result<()> {
    let classes = classify_posts(&inputs.posts, &inputs.taxonomies);
    let mut out = String::from("post_id,topics\n");
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for (post, topics) in inputs.posts.iter().zip(&classes) {
        let joined = topics.iter().cloned().collect::<Vec<_>>().join(";");
        out.push_str(&format!("{},{}\n", post.id, joined));
        for t in topics {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    writer.write("classifications.csv", out)?;
    for (name, count) in counts {
        println!("classify: {name}: {count} posts");
    }
    Ok(())
}

pub fn temporal(config: &RunConfig) -> Result<()> {
    let mut writer = OutputWriter::create(&config.out)?;
    dump_resolved_config(config, &writer)?;
    let inputs = load_inputs(config, true, true)?;
    run_temporal(config, &inputs, &mut writer).map(|_| ())
}

fn run_temporal(
    config: &RunConfig,
    inputs: &Inputs,
    writer: &mut OutputWriter,
) -> Result<(WeeklySeries, WeekClass)> {
    if inputs.posts.is_empty() {
        bail!("EmptyInput: no posts to analyze");
    }
    if inputs.hotspots.is_empty() {
        bail!("EmptyInput: no hotspots after filtering");
    }
    let cal = config.calendar();
    let names = taxonomy_names(&inputs.taxonomies);
    let classes = classify_posts(&inputs.posts, &inputs.taxonomies);
    let series = build_weekly_series(&inputs.hotspots, &inputs.posts, &classes, &names, &cal)
        .map_err(|e| anyhow!("{e}"))?;
    writer.write("weekly_series.csv", weekly_series_csv(&series))?;

    let excluded: BTreeSet<_> = config.exclude_weeks.iter().copied().collect();
    let cells = correlate_all(
        &inputs.hotspots,
        &inputs.posts,
        &classes,
        &names,
        &config.area_filters()?,
        &inputs.regions,
        &cal,
        &excluded,
    )
    .map_err(|e| anyhow!("{e}"))?;
    writer.write("correlations.csv", correlations_csv(&cells))?;

    let week_class = classify_weeks(&series, &config.week_class_config())
        .map_err(|e: TemporalError| anyhow!("{e}"))?;
    let mut out = String::from("week,hotspot_count,label,evacuation\n");
    for (week, count) in series.weeks.iter().zip(&series.hotspot_count) {
        let label = week_class
            .label_of(*week)
            .map(|l| l.as_str().to_string())
            .unwrap_or_else(|| "excluded".to_string());
        out.push_str(&format!(
            "{week},{count},{label},{}\n",
            week_class.is_evacuation(*week)
        ));
    }
    writer.write("week_classes.csv", out)?;
    Ok((series, week_class))
}

pub fn spatial(config: &RunConfig) -> Result<()> {
    let mut writer = OutputWriter::create(&config.out)?;
    dump_resolved_config(config, &writer)?;
    let inputs = load_inputs(config, true, true)?;
    run_spatial(config, &inputs, &mut writer)
}

fn run_spatial(config: &RunConfig, inputs: &Inputs, writer: &mut OutputWriter) -> Result<()> {
    if inputs.posts.is_empty() {
        bail!("EmptyInput: no posts to analyze");
    }
    if inputs.hotspots.is_empty() {
        bail!("EmptyInput: no hotspots after filtering");
    }
    let cal = config.calendar();
    let mode = config.distance;
    let classes = classify_posts(&inputs.posts, &inputs.taxonomies);
    let hotspot_index = SpatialDayIndex::for_hotspots(&inputs.hotspots, mode);

    let mut topic_posts: BTreeMap<String, Vec<GeoPost>> = BTreeMap::new();
    topic_posts.insert("all".to_string(), inputs.posts.to_vec());
    for taxonomy in &inputs.taxonomies {
        let posts: Vec<GeoPost> = inputs
            .posts
            .iter()
            .zip(&classes)
            .filter(|(_, c)| c.contains(&taxonomy.name))
            .map(|(p, _)| p.clone())
            .collect();
        topic_posts.insert(taxonomy.name.clone(), posts);
    }

    let mut popularity_tables = BTreeMap::new();
    for (topic, posts) in &topic_posts {
        if posts.is_empty() {
            eprintln!("spatial: topic {topic} has no posts, skipping");
            continue;
        }
        popularity_tables.insert(topic.clone(), popularity(posts, &hotspot_index, &cal));
        match tweet_to_hotspot_distribution(posts, &hotspot_index, &cal, config.bin_width_km) {
            Ok(dist) => {
                writer.write(&format!("distance_pdf_{topic}.csv"), distance_pdf_csv(&dist))?
            }
            Err(SpatialError::EmptyDistribution(why)) => {
                eprintln!("spatial: distance pdf for {topic}: {why}");
            }
            Err(e) => return Err(anyhow!("{e}")),
        }
    }
    writer.write("popularity.csv", popularity_csv(&popularity_tables))?;

    for taxonomy in &inputs.taxonomies {
        let posts = &topic_posts[&taxonomy.name];
        if posts.is_empty() {
            continue;
        }
        let real = match hotspot_to_tweet_distribution(
            posts,
            &inputs.hotspots,
            &cal,
            mode,
            config.bin_width_km,
        ) {
            Ok(dist) => dist.summary(),
            Err(SpatialError::EmptyDistribution(why)) => {
                eprintln!("spatial: null model for {}: {why}", taxonomy.name);
                continue;
            }
            Err(e) => return Err(anyhow!("{e}")),
        };
        let null = match null_model(
            posts,
            &inputs.posts,
            &inputs.hotspots,
            &cal,
            mode,
            config.iterations,
            config.seed,
        ) {
            Ok(null) => null,
            Err(SpatialError::EmptyDistribution(why)) => {
                eprintln!("spatial: null model for {}: {why}", taxonomy.name);
                continue;
            }
            Err(e) => return Err(anyhow!("{e}")),
        };
        writer.write(
            &format!("null_model_{}.csv", taxonomy.name),
            null_model_csv(&real, &null),
        )?;
    }
    Ok(())
}

pub fn mobility(config: &RunConfig) -> Result<()> {
    let mut writer = OutputWriter::create(&config.out)?;
    dump_resolved_config(config, &writer)?;
    let inputs = load_inputs(config, true, true)?;
    let cal = config.calendar();
    let names = taxonomy_names(&inputs.taxonomies);
    let classes = classify_posts(&inputs.posts, &inputs.taxonomies);
    if inputs.posts.is_empty() {
        bail!("EmptyInput: no posts to analyze");
    }
    let series = build_weekly_series(&inputs.hotspots, &inputs.posts, &classes, &names, &cal)
        .map_err(|e| anyhow!("{e}"))?;
    let week_class =
        classify_weeks(&series, &config.week_class_config()).map_err(|e| anyhow!("{e}"))?;
    run_mobility(config, &inputs, &week_class, &mut writer)
}

fn run_mobility(
    config: &RunConfig,
    inputs: &Inputs,
    week_class: &WeekClass,
    writer: &mut OutputWriter,
) -> Result<()> {
    let cal = config.calendar();
    let mode = config.distance;
    let profiles = build_profiles(&inputs.posts, config.tau, &cal, mode);
    writer.write("profiles.csv", mobility::profiles_csv(&profiles))?;

    let pairs = build_pairs(&profiles, week_class, config.pairing, mode);
    for situation in ALL_SITUATIONS {
        match distance_cdf(&pairs, situation) {
            Ok(cdf) => writer.write(
                &format!("distance_cdf_{}.csv", situation.as_str()),
                mobility::distance_cdf_csv(&cdf),
            )?,
            Err(MobilityError::EmptyClass(which)) => {
                eprintln!("mobility: no pairs for situation {which}");
            }
            Err(e) => return Err(anyhow!("{e}")),
        }
    }
    let cells = reduction_rate(&pairs, config.rs_threshold, &config.distance_bins_km)
        .map_err(|e| anyhow!("{e}"))?;
    writer.write("reduction_rates.csv", mobility::reduction_rates_csv(&cells))?;

    if inputs.regions.is_empty() {
        eprintln!("mobility: no region geometry loaded, skipping region analytics");
        return Ok(());
    }

    // Cohort: users whose home region is --home-region, or the modal home
    // region when unset.
    let homes = home_regions(&inputs.posts, &inputs.regions);
    let cohort_code = match &config.home_region {
        Some(code) => code.clone(),
        None => {
            let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
            for home in homes.values().flatten() {
                *counts.entry(home.as_str()).or_default() += 1;
            }
            match counts.iter().max_by_key(|(code, n)| (**n, std::cmp::Reverse(**code))) {
                Some((code, _)) => {
                    eprintln!("mobility: --home-region not set, using modal region {code}");
                    code.to_string()
                }
                None => {
                    eprintln!("mobility: no user has a home region, skipping region analytics");
                    return Ok(());
                }
            }
        }
    };
    let cohort_users: BTreeSet<&String> = homes
        .iter()
        .filter(|(_, home)| home.as_deref() == Some(cohort_code.as_str()))
        .map(|(user, _)| user)
        .collect();
    let cohort_posts: Vec<GeoPost> = inputs
        .posts
        .iter()
        .filter(|p| cohort_users.contains(&p.user_id))
        .cloned()
        .collect();
    if cohort_posts.is_empty() {
        eprintln!("mobility: cohort for region {cohort_code} is empty, skipping region analytics");
        return Ok(());
    }

    let home_province = inputs
        .regions
        .iter()
        .find(|r| r.code == cohort_code)
        .map(|r| r.province.clone())
        .ok_or_else(|| anyhow!("home region {cohort_code} not found in the region file"))?;
    let day_range = config.day_range.unwrap_or_else(|| {
        let days: Vec<_> = cohort_posts
            .iter()
            .map(|p| local_day(p.timestamp, &cal))
            .collect();
        (
            *days.iter().min().expect("non-empty cohort"),
            *days.iter().max().expect("non-empty cohort"),
        )
    });

    let rows = region_diversity(&cohort_posts, &inputs.regions, day_range, &home_province, &cal);
    writer.write(
        "region_diversity.csv",
        mobility::region_diversity_csv(
            &rows,
            inputs.air.as_ref().map(|t| (t, cohort_code.as_str())),
        ),
    )?;

    let sub_code = config.subdistrict_region.as_ref().unwrap_or(&cohort_code);
    let sub_region = inputs
        .regions
        .iter()
        .find(|r| r.code == *sub_code)
        .ok_or_else(|| anyhow!("region {sub_code} not found in the region file"))?;
    match subdistrict_visit_buckets(&cohort_posts, sub_region, day_range, &cal) {
        Ok(rows) => writer.write(
            "subdistrict_buckets.csv",
            mobility::subdistrict_buckets_csv(&rows),
        )?,
        Err(MobilityError::MissingSubdistricts(code)) => {
            eprintln!("mobility: region {code} has no sub-district geometry, skipping buckets");
        }
        Err(e) => return Err(anyhow!("{e}")),
    }

    let rows = meta_signals(&cohort_posts, &MetaSignalConfig::default(), &cal);
    writer.write("meta_signals.csv", mobility::meta_signals_csv(&rows))?;
    Ok(())
}

pub fn synth(config: &RunConfig, scenario_path: Option<&Path>) -> Result<()> {
    let writer = OutputWriter::create(&config.out)?;
    dump_resolved_config(config, &writer)?;
    let mut scenario_config = match scenario_path {
        Some(path) => {
            let raw = std::fs::read_to_string(path)
                .with_context(|| format!("reading scenario config {}", path.display()))?;
            serde_json::from_str::<ScenarioConfig>(&raw)
                .with_context(|| format!("parsing scenario config {}", path.display()))?
        }
        None => ScenarioConfig::default(),
    };
    // CLI seed wins over the scenario file.
    scenario_config.seed = config.seed;
    let scenario = synth::generate(&scenario_config).map_err(|e| anyhow!("{e}"))?;
    let paths = synth::write_scenario(&scenario, &config.out)?;
    println!(
        "synth: wrote {} posts, {} hotspot rows, {} regions to {}",
        scenario.manifest.totals.n_posts,
        scenario.manifest.totals.n_hotspot_rows,
        scenario.regions.len(),
        config.out.display()
    );
    println!("synth: manifest at {}", paths.manifest.display());
    Ok(())
}

pub fn all(config: &RunConfig) -> Result<()> {
    let mut writer = OutputWriter::create(&config.out)?;
    dump_resolved_config(config, &writer)?;
    let inputs = load_inputs(config, true, true)?;
    run_classify(config, &inputs, &mut writer)?;
    let (_series, week_class) = run_temporal(config, &inputs, &mut writer)?;
    run_spatial(config, &inputs, &mut writer)?;
    run_mobility(config, &inputs, &week_class, &mut writer)?;
    writer.write_run_manifest()?;
    println!("all: outputs in {}", config.out.display());
    Ok(())
}
