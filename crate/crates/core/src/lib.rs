//! Analytics for fire-hotspot and geotagged social-media datasets.
//!
//! The pipeline reads hotspot, post, region, and air-quality files, labels
//! posts by boolean keyword taxonomies, and derives temporal correlations,
//! spatial hotspot/post joins with Monte Carlo null models, and per-user
//! mobility metrics. A scenario generator with planted ground truth plus
//! brute-force oracles backs the test suites.

pub mod ingest;
pub mod mobility;
pub mod model;
pub mod ruledsl;
pub mod spatial;
pub mod synth;
pub mod temporal;

pub use model::{
    great_circle_km, local_day, local_week, Confidence, DistanceMode, FireHotspot, GeoPoint,
    GeoPost, IsoWeekId, LocalCalendar, EARTH_RADIUS_KM,
};
pub use ruledsl::{
    builtin_taxonomies, classify, matches, parse_rule, parse_taxonomy_file, RuleExpr, Taxonomy,
};
