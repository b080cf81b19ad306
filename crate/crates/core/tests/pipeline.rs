//! End-to-end recovery of planted scenario parameters through the real
//! pipeline: files written by the generator, read back by ingest, and
//! analyzed by the temporal, spatial, and mobility modules. Expectations
//! come from the ground-truth manifest, never from hard-coded numbers.

use haze_core::ingest::{load_hotspots, load_posts, load_regions, HotspotFilter, ParseMode};
use haze_core::mobility::{
    build_pairs, build_profiles, distance_cdf, reduction_rate, PairingMode, Situation,
    DEFAULT_DISTANCE_BIN_EDGES_KM, DEFAULT_RS_THRESHOLD,
};
use haze_core::model::{DistanceMode, LocalCalendar};
use haze_core::ruledsl::{builtin_taxonomies, classify};
use haze_core::spatial::{hotspot_to_tweet_distribution, null_model};
use haze_core::synth::{
    generate, write_scenario, CohortConfig, ConcentrationConfig, EvacuationConfig, Scenario,
    ScenarioConfig, TopicConfig, WeeklyHotspotCounts,
};
use haze_core::temporal::{build_weekly_series, classify_weeks, WeekClassConfig};
use haze_core::{GeoPost, Taxonomy};

fn ingest_scenario(scenario: &Scenario) -> (Vec<haze_core::FireHotspot>, Vec<GeoPost>) {
    let dir = tempfile::tempdir().unwrap();
    let paths = write_scenario(scenario, dir.path()).unwrap();
    let (hotspots, _) =
        load_hotspots(&paths.hotspots, HotspotFilter::default(), ParseMode::Strict).unwrap();
    let (posts, _) = load_posts(&paths.posts, ParseMode::Strict, None).unwrap();
    // Region loading is exercised too, so the whole set of written files
    // parses.
    let regions = load_regions(&paths.regions).unwrap();
    assert_eq!(regions.len(), scenario.regions.len());
    (hotspots, posts)
}

fn classified(posts: &[GeoPost], taxonomies: &[Taxonomy]) -> Vec<std::collections::BTreeSet<String>> {
    posts.iter().map(|p| classify(p, taxonomies)).collect()
}

#[test]
fn planted_reducer_fraction_recovers_through_pipeline() {
    let config = ScenarioConfig {
        seed: 97,
        users: CohortConfig {
            count: 200,
            ..Default::default()
        },
        mobility: haze_core::synth::MobilityBehaviorConfig {
            reducer_fraction: 0.4,
            severe_spread_multiplier: 0.25,
            ..Default::default()
        },
        ..Default::default()
    };
    let scenario = generate(&config).unwrap();
    let (hotspots, posts) = ingest_scenario(&scenario);
    let cal = LocalCalendar::default();
    let taxonomies = builtin_taxonomies();
    let names: Vec<String> = taxonomies.iter().map(|t| t.name.clone()).collect();
    let series =
        build_weekly_series(&hotspots, &posts, &classified(&posts, &taxonomies), &names, &cal)
            .unwrap();
    let week_config = WeekClassConfig {
        evacuation_weeks: Default::default(),
        ..Default::default()
    };
    let classes = classify_weeks(&series, &week_config).unwrap();
    let profiles = build_profiles(&posts, 4, &cal, DistanceMode::Haversine);
    assert_eq!(profiles.len(), scenario.manifest.n_users as usize);
    let pairs = build_pairs(&profiles, &classes, PairingMode::AllBaselines, DistanceMode::Haversine);
    let cells = reduction_rate(&pairs, DEFAULT_RS_THRESHOLD, &DEFAULT_DISTANCE_BIN_EDGES_KM).unwrap();
    let severe_near = cells
        .iter()
        .find(|c| c.situation == Situation::SevereHaze && c.bin_start_km == 0.0)
        .expect("severe-haze near bin populated");
    let planted = scenario.manifest.reducer_fraction_planted;
    assert!(
        (severe_near.per_pair - planted).abs() <= 0.005,
        "recovered {} vs planted {planted}",
        severe_near.per_pair
    );
    assert!((severe_near.per_user_mean - planted).abs() <= 0.005);
    // Baseline no-haze vs no-haze pairs: nobody reduces by construction.
    if let Some(nh) = cells.iter().find(|c| c.situation == Situation::NoHaze) {
        assert_eq!(nh.per_pair, 0.0);
    }
}

#[test]
fn planted_centroid_shift_separates_severe_cdf() {
    let config = ScenarioConfig {
        seed: 31,
        users: CohortConfig {
            count: 120,
            ..Default::default()
        },
        mobility: haze_core::synth::MobilityBehaviorConfig {
            shift_fraction: 0.3,
            centroid_shift_km: 100.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let scenario = generate(&config).unwrap();
    let (hotspots, posts) = ingest_scenario(&scenario);
    let cal = LocalCalendar::default();
    let taxonomies = builtin_taxonomies();
    let names: Vec<String> = taxonomies.iter().map(|t| t.name.clone()).collect();
    let series =
        build_weekly_series(&hotspots, &posts, &classified(&posts, &taxonomies), &names, &cal)
            .unwrap();
    let week_config = WeekClassConfig {
        evacuation_weeks: Default::default(),
        ..Default::default()
    };
    let classes = classify_weeks(&series, &week_config).unwrap();
    let profiles = build_profiles(&posts, 4, &cal, DistanceMode::Haversine);
    let pairs = build_pairs(&profiles, &classes, PairingMode::AllBaselines, DistanceMode::Haversine);
    let severe = distance_cdf(&pairs, Situation::SevereHaze).unwrap();
    let no_haze = distance_cdf(&pairs, Situation::NoHaze).unwrap();
    // 30% of users moved 100 km in severe weeks: beyond 50 km the severe
    // CDF sits strictly below the stationary no-haze CDF.
    let at = 50.0;
    assert!(
        severe.fraction_at_or_below(at) < no_haze.fraction_at_or_below(at),
        "severe CDF {} vs no-haze {} at {at} km",
        severe.fraction_at_or_below(at),
        no_haze.fraction_at_or_below(at)
    );
    assert!(no_haze.fraction_at_or_below(at) > 0.99);
    let moved = 1.0 - severe.fraction_at_or_below(at);
    assert!((moved - 0.3).abs() < 0.05, "moved share {moved}");
}

#[test]
fn planted_concentration_beats_null_model() {
    let config = ScenarioConfig {
        seed: 55,
        users: CohortConfig {
            count: 150,
            ..Default::default()
        },
        hotspots: haze_core::synth::HotspotProcessConfig {
            weekly_counts: WeeklyHotspotCounts::Explicit(vec![120, 260, 450]),
            ..Default::default()
        },
        topics: TopicConfig {
            rates: [("haze-hashtag".to_string(), 0.05)].into_iter().collect(),
            concentration: Some(ConcentrationConfig {
                taxonomy: "haze-hashtag".to_string(),
                radius_km: 10.0,
                fraction: 1.0,
            }),
            ..Default::default()
        },
        ..Default::default()
    };
    let scenario = generate(&config).unwrap();
    let (hotspots, posts) = ingest_scenario(&scenario);
    let cal = LocalCalendar::default();
    let taxonomies = builtin_taxonomies();
    let topic: Vec<GeoPost> = posts
        .iter()
        .filter(|p| classify(p, &taxonomies).contains("haze-hashtag"))
        .cloned()
        .collect();
    assert!(!topic.is_empty());
    let real = hotspot_to_tweet_distribution(&topic, &hotspots, &cal, DistanceMode::Haversine, 5.0)
        .unwrap()
        .summary();
    let null = null_model(
        &topic,
        &posts,
        &hotspots,
        &cal,
        DistanceMode::Haversine,
        100,
        1234,
    )
    .unwrap();
    assert!(
        real.mean < null.mean_of_means,
        "real {} vs null {}",
        real.mean,
        null.mean_of_means
    );
    // The planted signal separates every iteration, not just the mean.
    for it in &null.iterations {
        assert!(real.mean < it.mean);
    }
}

#[test]
fn signal_free_topic_sits_inside_null_band() {
    let config = ScenarioConfig {
        seed: 77,
        users: CohortConfig {
            count: 150,
            ..Default::default()
        },
        topics: TopicConfig {
            rates: [("haze-health".to_string(), 0.05)].into_iter().collect(),
            ..Default::default()
        },
        ..Default::default()
    };
    let scenario = generate(&config).unwrap();
    let (hotspots, posts) = ingest_scenario(&scenario);
    let cal = LocalCalendar::default();
    let taxonomies = builtin_taxonomies();
    let topic: Vec<GeoPost> = posts
        .iter()
        .filter(|p| classify(p, &taxonomies).contains("haze-health"))
        .cloned()
        .collect();
    let real = hotspot_to_tweet_distribution(&topic, &hotspots, &cal, DistanceMode::Haversine, 5.0)
        .unwrap()
        .summary();
    let null = null_model(
        &topic,
        &posts,
        &hotspots,
        &cal,
        DistanceMode::Haversine,
        200,
        4321,
    )
    .unwrap();
    let z = (real.mean - null.mean_of_means).abs() / null.stdev_across_iterations;
    assert!(z < 4.0, "signal-free topic is {z} null stdevs from the null mean");
}

#[test]
fn evacuation_fanout_recovers_region_diversity() {
    let config = ScenarioConfig {
        seed: 63,
        users: CohortConfig {
            count: 60,
            home_region_index: Some(0),
            ..Default::default()
        },
        evacuation: Some(EvacuationConfig {
            week_index: 7, // planted severe by the default weekly counts
            fanout_regions: 5,
            fanout_user_fraction: 0.3,
        }),
        ..Default::default()
    };
    let scenario = generate(&config).unwrap();
    let (_, posts) = ingest_scenario(&scenario);
    let cal = LocalCalendar::default();
    let evac = scenario.manifest.evacuation.as_ref().unwrap();
    let home_code = scenario.manifest.home_region_code.as_ref().unwrap();
    let home_province = scenario
        .regions
        .iter()
        .find(|r| &r.code == home_code)
        .unwrap()
        .province
        .clone();
    let rows = haze_core::mobility::region_diversity(
        &posts,
        &scenario.regions,
        (evac.date, evac.date),
        &home_province,
        &cal,
    );
    assert_eq!(rows.len(), 1);
    assert_eq!(
        rows[0].inside_province + rows[0].outside_province,
        evac.fanout_regions,
    );
}
