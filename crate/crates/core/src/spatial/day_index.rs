//! Exact per-day nearest-neighbor index.
//!
//! Points are embedded in a k-d tree (3D unit vectors for great-circle
//! queries, raw degree coordinates for the planar mode). Queries compare
//! candidates by `(distance_km, id)` using the same distance function as
//! the brute-force scan, so results are identical to exhaustive search,
//! ties included. Subtree pruning uses the embedding-space lower bound
//! converted to the query metric, widened by a small safety margin so
//! floating-point rounding can never prune a true co-minimum.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::model::{local_day, DistanceMode, FireHotspot, GeoPoint, GeoPost, LocalCalendar,
    EARTH_RADIUS_KM};

struct KdPoint {
    embed: [f64; 3],
    location: GeoPoint,
    id: String,
}

/// k-d tree over one day's points.
pub struct KdTree {
    points: Vec<KdPoint>,
    mode: DistanceMode,
    axes: usize,
}

impl KdTree {
    pub fn build(items: Vec<(String, GeoPoint)>, mode: DistanceMode) -> Self {
        let axes = match mode {
            DistanceMode::Haversine => 3,
            DistanceMode::EuclidDegrees => 2,
        };
        let mut points: Vec<KdPoint> = items
            .into_iter()
            .map(|(id, location)| KdPoint {
                embed: match mode {
                    DistanceMode::Haversine => location.to_unit_vector(),
                    DistanceMode::EuclidDegrees => [location.lat(), location.lon(), 0.0],
                },
                location,
                id,
            })
            .collect();
        let len = points.len();
        if len > 1 {
            build_recursive(&mut points, 0, len, 0, axes);
        }
        Self { points, mode, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest point to `query` by `(distance_km, id)`; `None` when empty.
    pub fn nearest(&self, query: GeoPoint) -> Option<(&str, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let query_embed = match self.mode {
            DistanceMode::Haversine => query.to_unit_vector(),
            DistanceMode::EuclidDegrees => [query.lat(), query.lon(), 0.0],
        };
        let mut best: Option<(f64, &str)> = None;
        self.search(0, self.points.len(), 0, query, &query_embed, &mut best);
        best.map(|(d, id)| (id, d))
    }

    fn search<'a>(
        &'a self,
        lo: usize,
        hi: usize,
        depth: usize,
        query: GeoPoint,
        query_embed: &[f64; 3],
        best: &mut Option<(f64, &'a str)>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let node = &self.points[mid];
        let d = self.mode.distance_km(query, node.location);
        let candidate = (d, node.id.as_str());
        let better = match best {
            None => true,
            Some((bd, bid)) => d < *bd || (d == *bd && node.id.as_str() < *bid),
        };
        if better {
            *best = Some(candidate);
        }

        let axis = depth % self.axes;
        let delta = query_embed[axis] - node.embed[axis];
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, depth + 1, query, query_embed, best);

        // Lower bound on the metric distance to any point beyond the
        // splitting plane.
        let lb_km = match self.mode {
            DistanceMode::Haversine => {
                2.0 * EARTH_RADIUS_KM * (delta.abs() / 2.0).min(1.0).asin()
            }
            DistanceMode::EuclidDegrees => delta.abs(),
        };
        let must_visit = match best {
            None => true,
            Some((bd, _)) => lb_km <= *bd * (1.0 + 1e-12) + 1e-12,
        };
        if must_visit {
            self.search(far.0, far.1, depth + 1, query, query_embed, best);
        }
    }
}

fn build_recursive(points: &mut [KdPoint], lo: usize, hi: usize, depth: usize, axes: usize) {
    if hi - lo <= 1 {
        return;
    }
    let axis = depth % axes;
    let mid = lo + (hi - lo) / 2;
    points[lo..hi].select_nth_unstable_by(mid - lo, |a, b| {
        a.embed[axis]
            .partial_cmp(&b.embed[axis])
            .expect("finite embedding coordinates")
            .then_with(|| a.id.cmp(&b.id))
    });
    build_recursive(points, lo, mid, depth + 1, axes);
    build_recursive(points, mid + 1, hi, depth + 1, axes);
}

/// Per-calendar-date nearest-neighbor indexes.
pub struct SpatialDayIndex {
    days: BTreeMap<NaiveDate, KdTree>,
    mode: DistanceMode,
}

impl SpatialDayIndex {
    pub fn build(
        items: impl IntoIterator<Item = (String, GeoPoint, NaiveDate)>,
        mode: DistanceMode,
    ) -> Self {
        let mut grouped: BTreeMap<NaiveDate, Vec<(String, GeoPoint)>> = BTreeMap::new();
        for (id, location, date) in items {
            grouped.entry(date).or_default().push((id, location));
        }
        let days = grouped
            .into_iter()
            .map(|(date, pts)| (date, KdTree::build(pts, mode)))
            .collect();
        Self { days, mode }
    }

    pub fn for_hotspots(hotspots: &[FireHotspot], mode: DistanceMode) -> Self {
        Self::build(
            hotspots
                .iter()
                .map(|h| (h.id.clone(), h.location, h.date)),
            mode,
        )
    }

    pub fn for_posts(posts: &[GeoPost], cal: &LocalCalendar, mode: DistanceMode) -> Self {
        Self::build(
            posts
                .iter()
                .map(|p| (p.id.clone(), p.location, local_day(p.timestamp, cal))),
            mode,
        )
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }

    pub fn day(&self, date: NaiveDate) -> Option<&KdTree> {
        self.days.get(&date)
    }

    pub fn days(&self) -> impl Iterator<Item = (&NaiveDate, &KdTree)> {
        self.days.iter()
    }

    /// Nearest indexed point to `location` on `date`, or `None` when the
    /// date has no points.
    pub fn nearest(&self, date: NaiveDate, location: GeoPoint) -> Option<(&str, f64)> {
        self.days.get(&date).and_then(|tree| tree.nearest(location))
    }
}

/// Nearest same-day hotspot of a post.
pub fn nearest_hotspot(
    post: &GeoPost,
    index: &SpatialDayIndex,
    cal: &LocalCalendar,
) -> Option<(String, f64)> {
    index
        .nearest(local_day(post.timestamp, cal), post.location)
        .map(|(id, d)| (id.to_string(), d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Confidence;
    use crate::synth::oracle::oracle_nearest;
    use chrono::DateTime;
    use rand::{Rng, SeedableRng};

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn post(id: &str, day: u32, lat: f64, lon: f64) -> GeoPost {
        GeoPost {
            id: id.into(),
            user_id: "u".into(),
            timestamp: DateTime::parse_from_rfc3339(&format!(
                "2014-03-{day:02}T10:00:00+07:00"
            ))
            .unwrap(),
            location: pt(lat, lon),
            text: String::new(),
            source: String::new(),
        }
    }

    fn hotspot(id: &str, day: u32, lat: f64, lon: f64) -> FireHotspot {
        FireHotspot {
            id: id.into(),
            date: format!("2014-03-{day:02}").parse().unwrap(),
            location: pt(lat, lon),
            confidence: Confidence::High,
            peatland: true,
        }
    }

    #[test]
    fn hotspot_at_post_location_is_zero_distance() {
        let cal = LocalCalendar::default();
        let hotspots = vec![hotspot("h1", 13, 0.5, 101.4)];
        let index = SpatialDayIndex::for_hotspots(&hotspots, DistanceMode::Haversine);
        let p = post("p1", 13, 0.5, 101.4);
        assert_eq!(
            nearest_hotspot(&p, &index, &cal),
            Some(("h1".to_string(), 0.0))
        );
    }

    #[test]
    fn no_hotspot_that_day_is_none() {
        let cal = LocalCalendar::default();
        let hotspots = vec![hotspot("h1", 12, 0.5, 101.4)];
        let index = SpatialDayIndex::for_hotspots(&hotspots, DistanceMode::Haversine);
        let p = post("p1", 13, 0.5, 101.4);
        assert_eq!(nearest_hotspot(&p, &index, &cal), None);
    }

    #[test]
    fn matches_brute_force_on_random_instance() {
        let cal = LocalCalendar::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let mut posts = Vec::new();
        let mut hotspots = Vec::new();
        for i in 0..500 {
            posts.push(post(
                &format!("p{i:04}"),
                1 + (i % 5) as u32,
                rng.gen_range(-6.0..6.0),
                rng.gen_range(95.0..107.0),
            ));
        }
        for i in 0..200 {
            hotspots.push(hotspot(
                &format!("h{i:04}"),
                1 + (i % 5) as u32,
                rng.gen_range(-6.0..6.0),
                rng.gen_range(95.0..107.0),
            ));
        }
        // Exact coordinate duplicates to force distance ties.
        let dup = hotspots[0].location;
        hotspots.push(FireHotspot {
            id: "h9990".into(),
            location: dup,
            ..hotspots[0].clone()
        });
        let index = SpatialDayIndex::for_hotspots(&hotspots, DistanceMode::Haversine);
        let expected = oracle_nearest(&posts, &hotspots, &cal);
        for (p, want) in posts.iter().zip(expected) {
            let got = nearest_hotspot(p, &index, &cal);
            assert_eq!(got, want, "mismatch for post {}", p.id);
        }
    }

    #[test]
    fn euclid_degrees_mode_matches_its_own_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let items: Vec<(String, GeoPoint)> = (0..300)
            .map(|i| {
                (
                    format!("k{i:03}"),
                    pt(rng.gen_range(-6.0..6.0), rng.gen_range(95.0..107.0)),
                )
            })
            .collect();
        let tree = KdTree::build(items.clone(), DistanceMode::EuclidDegrees);
        for _ in 0..200 {
            let q = pt(rng.gen_range(-6.0..6.0), rng.gen_range(95.0..107.0));
            let brute = items
                .iter()
                .map(|(id, loc)| (DistanceMode::EuclidDegrees.distance_km(q, *loc), id.as_str()))
                .min_by(|a, b| a.partial_cmp(b).unwrap())
                .unwrap();
            let got = tree.nearest(q).unwrap();
            assert_eq!((got.1, got.0), brute);
        }
    }

    #[test]
    fn empty_tree_returns_none() {
        let tree = KdTree::build(Vec::new(), DistanceMode::Haversine);
        assert!(tree.nearest(pt(0.0, 0.0)).is_none());
        assert!(tree.is_empty());
    }
}
