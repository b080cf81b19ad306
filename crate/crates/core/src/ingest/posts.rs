//! Streaming post reader. One record per line:
//!
//! ```text
//! id,user_id,timestamp,lat,lon,source,text
//! ```
//!
//! The text field is last and unquoted; it may contain commas and any
//! character except a raw newline (newlines are escaped as `\n`,
//! backslashes as `\\`). The first six fields must not contain commas.
//! Memory stays bounded regardless of file size.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::DateTime;
use serde::{Deserialize, Serialize};

use super::{IngestError, ParseMode};
use crate::model::{GeoPoint, GeoPost};

/// Inclusive geographic bounding box used as an optional ingest filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat() >= self.min_lat
            && p.lat() <= self.max_lat
            && p.lon() >= self.min_lon
            && p.lon() <= self.max_lon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PostReport {
    pub total: u64,
    pub malformed: u64,
    pub bbox_rejected: u64,
    pub accepted: u64,
}

/// Escapes a text field for the post file (reversible).
pub fn escape_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            other => out.push(other),
        }
    }
    out
}

pub fn unescape_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

fn parse_line(path: &str, line_no: usize, line: &str) -> Result<GeoPost, IngestError> {
    let mut fields = line.splitn(7, ',');
    let mut next = |name: &str| {
        fields
            .next()
            .ok_or_else(|| IngestError::format(path, line_no, name, "missing field"))
    };
    let id = next("id")?.trim().to_string();
    if id.is_empty() {
        return Err(IngestError::format(path, line_no, "id", "empty id"));
    }
    let user_id = next("user_id")?.trim().to_string();
    let ts_raw = next("timestamp")?.trim();
    let timestamp = DateTime::parse_from_rfc3339(ts_raw)
        .map_err(|e| IngestError::format(path, line_no, "timestamp", e.to_string()))?;
    let lat: f64 = next("lat")?
        .trim()
        .parse()
        .map_err(|_| IngestError::format(path, line_no, "lat", "not a number"))?;
    let lon: f64 = next("lon")?
        .trim()
        .parse()
        .map_err(|_| IngestError::format(path, line_no, "lon", "not a number"))?;
    let location = GeoPoint::new(lat, lon)
        .map_err(|e| IngestError::format(path, line_no, "lat/lon", e.to_string()))?;
    let source = next("source")?.trim().to_string();
    let text = unescape_text(next("text")?);
    Ok(GeoPost {
        id,
        user_id,
        timestamp,
        location,
        text,
        source,
    })
}

/// Serializes a post as one file line (the inverse of the reader).
pub fn format_post_line(post: &GeoPost) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        post.id,
        post.user_id,
        post.timestamp.to_rfc3339(),
        post.location.lat(),
        post.location.lon(),
        post.source,
        escape_text(&post.text)
    )
}

/// Streaming iterator over post records; holds one line in memory at a
/// time. Malformed and bbox-rejected rows are counted, not yielded, in
/// lenient mode.
pub struct PostReader<R: Read> {
    lines: std::io::Lines<BufReader<R>>,
    path: String,
    mode: ParseMode,
    bbox: Option<BoundingBox>,
    line_no: usize,
    pub report: PostReport,
    done: bool,
}

impl PostReader<File> {
    pub fn open(
        path: impl AsRef<Path>,
        mode: ParseMode,
        bbox: Option<BoundingBox>,
    ) -> Result<Self, IngestError> {
        let path_str = path.as_ref().display().to_string();
        let file = File::open(path.as_ref()).map_err(|e| IngestError::io(&path_str, e))?;
        Ok(Self::from_reader(file, path_str, mode, bbox))
    }
}

impl<R: Read> PostReader<R> {
    pub fn from_reader(
        reader: R,
        path: String,
        mode: ParseMode,
        bbox: Option<BoundingBox>,
    ) -> Self {
        Self {
            lines: BufReader::new(reader).lines(),
            path,
            mode,
            bbox,
            line_no: 0,
            report: PostReport::default(),
            done: false,
        }
    }
}

impl<R: Read> Iterator for PostReader<R> {
    type Item = Result<GeoPost, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            let line = match self.lines.next() {
                None => return None,
                Some(Ok(line)) => line,
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(IngestError::io(&self.path, e)));
                }
            };
            self.line_no += 1;
            if self.line_no == 1 && line.starts_with("id,user_id,") {
                continue; // header
            }
            if line.trim().is_empty() {
                continue;
            }
            self.report.total += 1;
            match parse_line(&self.path, self.line_no, &line) {
                Ok(post) => {
                    if let Some(bbox) = &self.bbox {
                        if !bbox.contains(post.location) {
                            self.report.bbox_rejected += 1;
                            continue;
                        }
                    }
                    self.report.accepted += 1;
                    return Some(Ok(post));
                }
                Err(e) => match self.mode {
                    ParseMode::Strict => {
                        self.done = true;
                        return Some(Err(e));
                    }
                    ParseMode::Lenient => {
                        self.report.malformed += 1;
                        continue;
                    }
                },
            }
        }
    }
}

/// Convenience loader that collects the stream.
pub fn load_posts(
    path: impl AsRef<Path>,
    mode: ParseMode,
    bbox: Option<BoundingBox>,
) -> Result<(Vec<GeoPost>, PostReport), IngestError> {
    let mut reader = PostReader::open(path, mode, bbox)?;
    let mut posts = Vec::new();
    for post in &mut reader {
        posts.push(post?);
    }
    Ok((posts, reader.report))
}
