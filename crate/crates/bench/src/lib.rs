//! Shared fixture builders for the benchmarks.

use chrono::DateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use haze_core::model::{Confidence, FireHotspot, GeoPoint, GeoPost};

pub fn random_points(seed: u64, n: usize) -> Vec<GeoPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| GeoPoint::new(rng.gen_range(-6.0..6.0), rng.gen_range(95.0..107.0)).unwrap())
        .collect()
}

/// Posts spread over `days` consecutive days of June 2014.
pub fn random_posts(seed: u64, n: usize, days: u32) -> Vec<GeoPost> {
    let points = random_points(seed, n);
    points
        .into_iter()
        .enumerate()
        .map(|(i, location)| GeoPost {
            id: format!("p{i:06}"),
            user_id: format!("u{:04}", i % 500),
            timestamp: DateTime::parse_from_rfc3339(&format!(
                "2014-06-{:02}T10:00:00+07:00",
                1 + (i as u32 % days)
            ))
            .unwrap(),
            location,
            text: String::new(),
            source: String::new(),
        })
        .collect()
}

pub fn random_hotspots(seed: u64, n: usize, days: u32) -> Vec<FireHotspot> {
    let points = random_points(seed, n);
    points
        .into_iter()
        .enumerate()
        .map(|(i, location)| FireHotspot {
            id: format!("h{i:06}"),
            date: format!("2014-06-{:02}", 1 + (i as u32 % days)).parse().unwrap(),
            location,
            confidence: Confidence::High,
            peatland: true,
        })
        .collect()
}

/// Short mixed-language texts, roughly half containing rule keywords.
pub fn sample_texts(seed: u64, n: usize) -> Vec<String> {
    const TEMPLATES: [&str; 8] = [
        "selamat pagi dari kota ini",
        "kabut asap tebal menyelimuti wilayah",
        "jalan jalan sore bersama teman",
        "penerbangan ditutup karena jarak pandang",
        "makan nasi goreng enak sekali",
        "banyak warga pakai masker hari ini",
        "menikmati kopi di warung favorit",
        "ayo dukung #melawanasap bersama",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| format!("{} nomor {i}", TEMPLATES[rng.gen_range(0..TEMPLATES.len())]))
        .collect()
}
