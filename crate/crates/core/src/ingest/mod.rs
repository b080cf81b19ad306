//! Readers for the four input datasets: hotspots, posts, region geometry,
//! and air-quality tables. All files are UTF-8; dates are ISO-8601;
//! coordinates are WGS84 decimal degrees.

mod air_quality;
mod hotspots;
mod posts;
mod regions;

pub use air_quality::{load_air_quality, AirQualityClass, AirQualityRecord, AirQualityTable};
pub use hotspots::{load_hotspots, HotspotFilter, HotspotReport};
pub use posts::{
    escape_text, format_post_line, load_posts, unescape_text, BoundingBox, PostReader,
    PostReport,
};
pub use regions::{
    assign_region, load_regions, load_regions_from_str, PolygonRing, RegionAssignment,
    RegionDef,
};

use thiserror::Error;

/// Lenient readers skip malformed rows and count them; strict readers stop
/// at the first malformed row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    #[default]
    Lenient,
    Strict,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}:{line}: {column}: {message}")]
    Format {
        path: String,
        line: usize,
        column: String,
        message: String,
    },
    #[error("duplicate key {key} at {path}:{line}")]
    DuplicateKey {
        path: String,
        line: usize,
        key: String,
    },
    #[error("{path}: {message}")]
    InvalidGeometry { path: String, message: String },
    #[error("{path}: {message}")]
    BadFile { path: String, message: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    pub(crate) fn format(
        path: &str,
        line: usize,
        column: &str,
        message: impl Into<String>,
    ) -> Self {
        IngestError::Format {
            path: path.to_string(),
            line,
            column: column.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &str, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.to_string(),
            source,
        }
    }
}
