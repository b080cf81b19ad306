use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use haze_bench::{random_hotspots, random_points, random_posts, sample_texts};
use haze_core::model::{great_circle_km, DistanceMode, LocalCalendar};
use haze_core::ruledsl::{builtin_taxonomies, classify_text};
use haze_core::spatial::{nearest_hotspot, null_model, SpatialDayIndex};
use haze_core::synth::oracle;
use haze_core::temporal::pearson;

fn bench_distance(c: &mut Criterion) {
    let points = random_points(1, 2000);
    c.bench_function("great_circle_km_1k_pairs", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for pair in points.chunks_exact(2).take(1000) {
                acc += great_circle_km(black_box(pair[0]), black_box(pair[1]));
            }
            acc
        })
    });
}

fn bench_nearest_join(c: &mut Criterion) {
    let cal = LocalCalendar::default();
    let mut group = c.benchmark_group("same_day_nearest_join");
    for &(n_posts, n_hotspots) in &[(2000usize, 500usize), (10_000, 2000)] {
        let posts = random_posts(7, n_posts, 10);
        let hotspots = random_hotspots(8, n_hotspots, 10);
        group.bench_with_input(
            BenchmarkId::new("kd_index", format!("{n_posts}x{n_hotspots}")),
            &(&posts, &hotspots),
            |b, (posts, hotspots)| {
                b.iter(|| {
                    let index = SpatialDayIndex::for_hotspots(hotspots, DistanceMode::Haversine);
                    posts
                        .iter()
                        .filter_map(|p| nearest_hotspot(p, &index, &cal))
                        .count()
                })
            },
        );
        group.bench_with_input(
            BenchmarkId::new("brute_force", format!("{n_posts}x{n_hotspots}")),
            &(&posts, &hotspots),
            |b, (posts, hotspots)| {
                b.iter(|| {
                    oracle::oracle_nearest(posts, hotspots, &cal)
                        .into_iter()
                        .flatten()
                        .count()
                })
            },
        );
    }
    group.finish();
}

fn bench_classify(c: &mut Criterion) {
    let taxonomies = builtin_taxonomies();
    let texts = sample_texts(3, 5000);
    c.bench_function("classify_5k_posts", |b| {
        b.iter(|| {
            texts
                .iter()
                .map(|t| classify_text(black_box(t), &taxonomies).len())
                .sum::<usize>()
        })
    });
}

fn bench_pearson(c: &mut Criterion) {
    let x: Vec<f64> = (0..52).map(|i| (i as f64 * 0.7).sin() * 100.0 + 200.0).collect();
    let y: Vec<f64> = (0..52).map(|i| (i as f64 * 0.7).cos() * 80.0 + 150.0).collect();
    c.bench_function("pearson_52_weeks", |b| {
        b.iter(|| pearson(black_box(&x), black_box(&y)).unwrap())
    });
}

fn bench_null_model(c: &mut Criterion) {
    let cal = LocalCalendar::default();
    let posts = random_posts(11, 20_000, 30);
    let topic: Vec<_> = posts.iter().step_by(40).cloned().collect();
    let hotspots = random_hotspots(12, 600, 30);
    c.bench_function("null_model_100_iterations_20k_posts", |b| {
        b.iter(|| {
            null_model(
                &topic,
                &posts,
                &hotspots,
                &cal,
                DistanceMode::Haversine,
                100,
                99,
            )
            .unwrap()
            .mean_of_means
        })
    });
}

criterion_group!(
    benches,
    bench_distance,
    bench_nearest_join,
    bench_classify,
    bench_pearson,
    bench_null_model
);
criterion_main!(benches);
