//! Core domain records and the time/space primitives shared by every
//! analysis stage: validated coordinates, posts, hotspots, local-calendar
//! bucketing, and great-circle distance.

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in kilometers (IUGG R1).
pub const EARTH_RADIUS_KM: f64 = 6_371.0088;

/// Default local zone offset: UTC+7 (Western Indonesia Time), in minutes.
pub const DEFAULT_UTC_OFFSET_MINUTES: i32 = 420;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("latitude {0} out of range [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} out of range [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("coordinate is not a finite number")]
    NonFiniteCoordinate,
}

/// A WGS84 coordinate pair in decimal degrees, validated at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeoPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Deserialize)]
struct RawGeoPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawGeoPoint> for GeoPoint {
    type Error = ModelError;
    fn try_from(raw: RawGeoPoint) -> Result<Self, ModelError> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, ModelError> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(ModelError::NonFiniteCoordinate);
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(ModelError::LatitudeOutOfRange(lat));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(ModelError::LongitudeOutOfRange(lon));
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Unit vector on the sphere; used by the spatial index.
    pub fn to_unit_vector(&self) -> [f64; 3] {
        let lat = self.lat.to_radians();
        let lon = self.lon.to_radians();
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    }
}

/// One geotagged social-media post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoPost {
    pub id: String,
    pub user_id: String,
    pub timestamp: DateTime<FixedOffset>,
    pub location: GeoPoint,
    pub text: String,
    /// Free-text client label ("Twitter Web Client", ...); may be empty.
    pub source: String,
}

/// Satellite-detected fire point confidence class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    High,
    Low,
}

/// One satellite-detected fire point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FireHotspot {
    pub id: String,
    pub date: NaiveDate,
    pub location: GeoPoint,
    pub confidence: Confidence,
    pub peatland: bool,
}

/// Week bucketing scheme. Only ISO-8601 weeks are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeekScheme {
    #[default]
    IsoWeek,
}

/// Fixed-offset local calendar used to bucket instants into days and weeks.
///
/// `day` and `week` are pure functions of the instant and the offset, so
/// the same post always lands in the same bucket regardless of the offset
/// its timestamp was recorded with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalCalendar {
    pub utc_offset_minutes: i32,
    pub week_scheme: WeekScheme,
}

impl Default for LocalCalendar {
    fn default() -> Self {
        Self {
            utc_offset_minutes: DEFAULT_UTC_OFFSET_MINUTES,
            week_scheme: WeekScheme::IsoWeek,
        }
    }
}

impl LocalCalendar {
    pub fn with_offset_minutes(utc_offset_minutes: i32) -> Self {
        Self {
            utc_offset_minutes,
            week_scheme: WeekScheme::IsoWeek,
        }
    }

    fn offset(&self) -> FixedOffset {
        FixedOffset::east_opt(self.utc_offset_minutes * 60)
            .expect("offset minutes within +/-24h")
    }
}

/// An ISO-8601 week identifier, e.g. `2014-W11`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct IsoWeekId {
    pub year: i32,
    pub week: u8,
}

impl IsoWeekId {
    pub fn new(year: i32, week: u8) -> Self {
        Self { year, week }
    }

    pub fn from_date(date: NaiveDate) -> Self {
        let iso = date.iso_week();
        Self {
            year: iso.year(),
            week: iso.week() as u8,
        }
    }

    /// Monday of this ISO week.
    pub fn monday(&self) -> NaiveDate {
        NaiveDate::from_isoywd_opt(self.year, self.week as u32, chrono::Weekday::Mon)
            .expect("valid ISO week id")
    }

    pub fn succ(&self) -> Self {
        Self::from_date(self.monday() + chrono::Duration::days(7))
    }

    /// Inclusive week range, in calendar order.
    pub fn range_inclusive(start: IsoWeekId, end: IsoWeekId) -> Vec<IsoWeekId> {
        let mut weeks = Vec::new();
        let mut w = start;
        while w <= end {
            weeks.push(w);
            w = w.succ();
        }
        weeks
    }
}

impl std::fmt::Display for IsoWeekId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-W{:02}", self.year, self.week)
    }
}

impl std::str::FromStr for IsoWeekId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (year, week) = s
            .split_once("-W")
            .ok_or_else(|| format!("invalid week id {s:?}, expected YYYY-Www"))?;
        let year: i32 = year.parse().map_err(|_| format!("bad year in {s:?}"))?;
        let week: u8 = week.parse().map_err(|_| format!("bad week in {s:?}"))?;
        if !(1..=53).contains(&week) {
            return Err(format!("week number {week} out of range 1..=53"));
        }
        Ok(Self { year, week })
    }
}

/// Local calendar day of an instant under the configured offset.
pub fn local_day(t: DateTime<FixedOffset>, cal: &LocalCalendar) -> NaiveDate {
    t.with_timezone(&cal.offset()).date_naive()
}

/// ISO week of the local calendar day.
pub fn local_week(t: DateTime<FixedOffset>, cal: &LocalCalendar) -> IsoWeekId {
    IsoWeekId::from_date(local_day(t, cal))
}

/// Great-circle distance in kilometers (haversine on a sphere of radius
/// [`EARTH_RADIUS_KM`]). Symmetric, zero iff the coordinates are identical.
pub fn great_circle_km(a: GeoPoint, b: GeoPoint) -> f64 {
    if a.lat == b.lat && a.lon == b.lon {
        return 0.0;
    }
    let lat_a = a.lat.to_radians();
    let lat_b = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let s_lat = (dlat / 2.0).sin();
    let s_lon = (dlon / 2.0).sin();
    let h = s_lat * s_lat + lat_a.cos() * lat_b.cos() * s_lon * s_lon;
    2.0 * EARTH_RADIUS_KM * h.min(1.0).sqrt().asin()
}

/// How inter-point distances are computed throughout the pipeline.
///
/// `EuclidDegrees` is the literal planar reading of "distance between two
/// centroids" on raw degree coordinates; it is provided for reproduction
/// runs and reports degree units in the kilometer fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMode {
    #[default]
    Haversine,
    EuclidDegrees,
}

impl DistanceMode {
    pub fn distance_km(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        match self {
            DistanceMode::Haversine => great_circle_km(a, b),
            DistanceMode::EuclidDegrees => {
                let dlat = a.lat - b.lat;
                let dlon = a.lon - b.lon;
                (dlat * dlat + dlon * dlon).sqrt()
            }
        }
    }
}

impl std::str::FromStr for DistanceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "haversine" => Ok(DistanceMode::Haversine),
            "euclid-degrees" => Ok(DistanceMode::EuclidDegrees),
            other => Err(format!(
                "unknown distance mode {other:?}, expected haversine or euclid-degrees"
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent check formula: spherical law of cosines in atan2 form.
    /// Shares no code with the haversine path above.
    fn law_of_cosines_km(a: GeoPoint, b: GeoPoint) -> f64 {
        let (p1, l1) = (a.lat().to_radians(), a.lon().to_radians());
        let (p2, l2) = (b.lat().to_radians(), b.lon().to_radians());
        let dl = l2 - l1;
        let y = ((p2.cos() * dl.sin()).powi(2)
            + (p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos()).powi(2))
        .sqrt();
        let x = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
        EARTH_RADIUS_KM * y.atan2(x)
    }

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn parse_ts(s: &str) -> DateTime<FixedOffset> {
        DateTime::parse_from_rfc3339(s).unwrap()
    }

    #[test]
    fn geopoint_rejects_out_of_range() {
        assert!(GeoPoint::new(95.0, 0.0).is_err());
        assert!(GeoPoint::new(-90.001, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 180.001).is_err());
        assert!(GeoPoint::new(0.0, f64::NAN).is_err());
        assert!(GeoPoint::new(90.0, -180.0).is_ok());
    }

    #[test]
    fn distance_identity_is_exactly_zero() {
        assert_eq!(great_circle_km(pt(0.0, 0.0), pt(0.0, 0.0)), 0.0);
        assert_eq!(great_circle_km(pt(-12.5, 101.25), pt(-12.5, 101.25)), 0.0);
    }

    #[test]
    fn distance_half_circumference() {
        // Frozen from the law-of-cosines check formula: R * pi.
        let expected = 20_015.114_442_035_923;
        let got = great_circle_km(pt(0.0, 0.0), pt(0.0, 180.0));
        assert!(
            (got - expected).abs() < 1e-6,
            "got {got}, expected {expected}"
        );
        assert!((law_of_cosines_km(pt(0.0, 0.0), pt(0.0, 180.0)) - expected).abs() < 1e-9);
    }

    #[test]
    fn distance_agrees_with_law_of_cosines_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1_000 {
            let a = pt(rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..=180.0));
            let b = pt(rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..=180.0));
            let h = great_circle_km(a, b);
            let c = law_of_cosines_km(a, b);
            assert!(
                (h - c).abs() < 1e-6,
                "haversine {h} vs law-of-cosines {c} for {a:?} {b:?}"
            );
        }
    }

    #[test]
    fn local_day_examples() {
        let cal = LocalCalendar::default();
        assert_eq!(
            local_day(parse_ts("2014-03-13T00:30:00+07:00"), &cal),
            NaiveDate::from_ymd_opt(2014, 3, 13).unwrap()
        );
        // 18:30Z + 7h = 01:30 next day.
        assert_eq!(
            local_day(parse_ts("2014-03-12T18:30:00Z"), &cal),
            NaiveDate::from_ymd_opt(2014, 3, 13).unwrap()
        );
        // 16:59Z + 7h = 23:59 same local day.
        assert_eq!(
            local_day(parse_ts("2014-03-13T16:59:00Z"), &cal),
            NaiveDate::from_ymd_opt(2014, 3, 13).unwrap()
        );
    }

    #[test]
    fn local_week_examples() {
        let cal = LocalCalendar::default();
        assert_eq!(
            local_week(parse_ts("2014-01-06T10:00:00+07:00"), &cal),
            IsoWeekId::new(2014, 2)
        );
        assert_eq!(
            local_week(parse_ts("2014-03-13T10:00:00+07:00"), &cal),
            IsoWeekId::new(2014, 11)
        );
        // ISO year rollover.
        assert_eq!(
            local_week(parse_ts("2014-12-29T10:00:00+07:00"), &cal),
            IsoWeekId::new(2015, 1)
        );
    }

    #[test]
    fn week_range_crosses_year_boundary() {
        let weeks = IsoWeekId::range_inclusive(IsoWeekId::new(2014, 51), IsoWeekId::new(2015, 2));
        assert_eq!(
            weeks,
            vec![
                IsoWeekId::new(2014, 51),
                IsoWeekId::new(2014, 52),
                IsoWeekId::new(2015, 1),
                IsoWeekId::new(2015, 2),
            ]
        );
    }

    #[test]
    fn week_id_round_trips_through_display() {
        let w = IsoWeekId::new(2014, 11);
        assert_eq!(w.to_string(), "2014-W11");
        assert_eq!("2014-W11".parse::<IsoWeekId>().unwrap(), w);
        assert!("2014-11".parse::<IsoWeekId>().is_err());
    }

    #[test]
    fn euclid_degrees_mode() {
        let d = DistanceMode::EuclidDegrees.distance_km(pt(0.0, 0.0), pt(3.0, 4.0));
        assert!((d - 5.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(
            lat1 in -90.0f64..=90.0, lon1 in -180.0f64..=180.0,
            lat2 in -90.0f64..=90.0, lon2 in -180.0f64..=180.0,
        ) {
            let a = pt(lat1, lon1);
            let b = pt(lat2, lon2);
            prop_assert_eq!(great_circle_km(a, b), great_circle_km(b, a));
        }

        #[test]
        fn distance_zero_iff_identical(
            lat in -89.0f64..=89.0, lon in -179.0f64..=179.0,
            dlat in 1e-7f64..=1.0, dlon in 1e-7f64..=1.0,
        ) {
            let a = pt(lat, lon);
            prop_assert_eq!(great_circle_km(a, a), 0.0);
            let b = pt(lat + dlat, lon + dlon);
            prop_assert!(great_circle_km(a, b) > 0.0);
        }

        #[test]
        fn triangle_inequality_within_tolerance(
            lat1 in -90.0f64..=90.0, lon1 in -180.0f64..=180.0,
            lat2 in -90.0f64..=90.0, lon2 in -180.0f64..=180.0,
            lat3 in -90.0f64..=90.0, lon3 in -180.0f64..=180.0,
        ) {
            let a = pt(lat1, lon1);
            let b = pt(lat2, lon2);
            let c = pt(lat3, lon3);
            let direct = great_circle_km(a, c);
            let via = great_circle_km(a, b) + great_circle_km(b, c);
            prop_assert!(direct <= via + 1e-9);
        }

        #[test]
        fn geopoint_serde_round_trip(
            lat in -90.0f64..=90.0, lon in -180.0f64..=180.0,
        ) {
            let p = pt(lat, lon);
            let json = serde_json::to_string(&p).unwrap();
            let back: GeoPoint = serde_json::from_str(&json).unwrap();
            prop_assert!((back.lat() - p.lat()).abs() < 1e-9);
            prop_assert!((back.lon() - p.lon()).abs() < 1e-9);
        }

        #[test]
        fn local_day_is_monotone(
            secs1 in 0i64..=1_500_000_000, secs2 in 0i64..=1_500_000_000,
        ) {
            let cal = LocalCalendar::default();
            let t1 = DateTime::from_timestamp(secs1, 0).unwrap().fixed_offset();
            let t2 = DateTime::from_timestamp(secs2, 0).unwrap().fixed_offset();
            if secs1 <= secs2 {
                prop_assert!(local_day(t1, &cal) <= local_day(t2, &cal));
            }
        }
    }
}
