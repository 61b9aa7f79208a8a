use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use super::{Track, TrackError};
use crate::geo::{haversine_m, heading_delta, KT_TO_MPS};

/// Movement features for the most recent pair of points of a track.
///
/// Besides the deltas, the latest position, timestamp and reported ground
/// speed are carried so the fog tier can contextualize without the track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureVector {
    pub icao: String,
    pub first_seen: f64,
    pub speed_delta_kt: f64,
    pub heading_delta_deg: f64,
    pub vertical_rate_fpm: f64,
    pub implied_speed_kt: f64,
    pub report_gap_s: f64,
    pub window_len: usize,
    pub ground_speed_kt: f64,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub last_seen: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureMap {
    pub entries: BTreeMap<String, FeatureVector>,
}

impl FeatureMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn extract_features(track: &Track) -> Result<FeatureVector, TrackError> {
    let n = track.points.len();
    if n < 2 {
        return Err(TrackError::InsufficientHistory(n));
    }
    let prev = &track.points[n - 2];
    let last = &track.points[n - 1];
    let gap = last.timestamp - prev.timestamp;
    let distance = haversine_m(prev.lat_deg, prev.lon_deg, last.lat_deg, last.lon_deg);
    let implied = if gap > 0.0 { distance / gap / KT_TO_MPS } else { 0.0 };
    Ok(FeatureVector {
        icao: track.icao.clone(),
        first_seen: track.first_seen,
        speed_delta_kt: last.ground_speed_kt - prev.ground_speed_kt,
        heading_delta_deg: heading_delta(prev.track_deg, last.track_deg),
        vertical_rate_fpm: last.vertical_rate_fpm as f64,
        implied_speed_kt: implied,
        report_gap_s: gap,
        window_len: n,
        ground_speed_kt: last.ground_speed_kt,
        lat_deg: last.lat_deg,
        lon_deg: last.lon_deg,
        last_seen: last.timestamp,
    })
}

fn round6(v: f64) -> Value {
    let r = (v * 1e6).round() / 1e6;
    // -0.0 would render as "-0.0"
    let r = if r == 0.0 { 0.0 } else { r };
    Number::from_f64(r).map(Value::Number).unwrap_or(Value::Null)
}

fn rounded(value: Value) -> Value {
    match value {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => round6(n.as_f64().unwrap_or(0.0)),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        Value::Array(items) => Value::Array(items.into_iter().map(rounded).collect()),
        other => other,
    }
}

/// Canonical JSON: keys sorted at every level, reals rounded to six
/// fractional digits.
pub fn serialize_features(map: &FeatureMap) -> Vec<u8> {
    let mut doc = Map::new();
    for (key, fv) in &map.entries {
        let value = serde_json::to_value(fv).expect("feature vector serializes");
        doc.insert(key.clone(), rounded(value));
    }
    serde_json::to_vec(&Value::Object(doc)).expect("json serializes")
}

pub fn parse_features(bytes: &[u8]) -> Result<FeatureMap, TrackError> {
    let entries: BTreeMap<String, FeatureVector> =
        serde_json::from_slice(bytes).map_err(|e| TrackError::Schema(e.to_string()))?;
    for (key, fv) in &entries {
        let reals = [
            fv.first_seen,
            fv.speed_delta_kt,
            fv.heading_delta_deg,
            fv.vertical_rate_fpm,
            fv.implied_speed_kt,
            fv.report_gap_s,
            fv.ground_speed_kt,
            fv.lat_deg,
            fv.lon_deg,
            fv.last_seen,
        ];
        if reals.iter().any(|v| !v.is_finite()) {
            return Err(TrackError::Schema(format!("{key}: non-finite value")));
        }
        if !(-180.0..=180.0).contains(&fv.heading_delta_deg) {
            return Err(TrackError::Schema(format!("{key}: heading delta outside [-180, 180]")));
        }
        if fv.implied_speed_kt < 0.0 || fv.report_gap_s < 0.0 {
            return Err(TrackError::Schema(format!("{key}: negative speed or gap")));
        }
    }
    Ok(FeatureMap { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::{AirspaceBox, TrackPoint};
    use proptest::prelude::*;
    use std::collections::VecDeque;

    fn point(t: f64, lat: f64, lon: f64, speed: f64, track: f64) -> TrackPoint {
        TrackPoint {
            timestamp: t,
            lat_deg: lat,
            lon_deg: lon,
            altitude_ft: 30000,
            ground_speed_kt: speed,
            track_deg: track,
            vertical_rate_fpm: 0,
        }
    }

    fn track(points: Vec<TrackPoint>) -> Track {
        Track {
            icao: "ABCDEF".into(),
            first_seen: points[0].timestamp,
            key: format!("{:.3}", points[0].timestamp),
            capacity: 32,
            points: VecDeque::from(points),
            airspace: AirspaceBox::WORLD,
        }
    }

    /// Independent haversine with the same mean radius, in kilometres.
    fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
        let r = 6371.0;
        let dlat = (lat2 - lat1).to_radians() / 2.0;
        let dlon = (lon2 - lon1).to_radians() / 2.0;
        let h = dlat.sin() * dlat.sin()
            + lat1.to_radians().cos() * lat2.to_radians().cos() * dlon.sin() * dlon.sin();
        2.0 * r * h.sqrt().atan2((1.0 - h).sqrt())
    }

    #[test]
    fn steady_flight_has_zero_deltas() {
        let t = track(vec![point(0.0, 1.0, 1.0, 400.0, 90.0), point(10.0, 1.0, 1.01, 400.0, 90.0)]);
        let fv = extract_features(&t).unwrap();
        assert_eq!(fv.speed_delta_kt, 0.0);
        assert_eq!(fv.heading_delta_deg, 0.0);
        assert_eq!(fv.report_gap_s, 10.0);
        assert_eq!(fv.window_len, 2);
    }

    #[test]
    fn heading_wraps_through_north() {
        let t = track(vec![point(0.0, 1.0, 1.0, 400.0, 350.0), point(1.0, 1.0, 1.0, 400.0, 10.0)]);
        assert_eq!(extract_features(&t).unwrap().heading_delta_deg, 20.0);
    }

    #[test]
    fn hundred_km_in_one_second() {
        // 100 km due north along a meridian: 100 / (6371 * pi / 180) degrees.
        let dlat = 100.0 / (6371.0 * std::f64::consts::PI / 180.0);
        let km = haversine_km(10.0, 20.0, 10.0 + dlat, 20.0);
        assert!((km - 100.0).abs() < 1e-9);
        let oracle_kt = km * 1000.0 / 1.0 * 3600.0 / 1852.0;
        assert!((oracle_kt - 194_384.0).abs() / 194_384.0 < 1e-3);
        let t = track(vec![point(0.0, 10.0, 20.0, 450.0, 0.0), point(1.0, 10.0 + dlat, 20.0, 450.0, 0.0)]);
        let fv = extract_features(&t).unwrap();
        assert!((fv.implied_speed_kt - oracle_kt).abs() / oracle_kt < 1e-3);
    }

    #[test]
    fn single_point_is_insufficient() {
        let t = track(vec![point(0.0, 1.0, 1.0, 400.0, 90.0)]);
        assert_eq!(extract_features(&t), Err(TrackError::InsufficientHistory(1)));
    }

    #[test]
    fn only_last_two_points_matter() {
        let tail = [point(5.0, 2.0, 2.0, 300.0, 45.0), point(6.0, 2.001, 2.001, 310.0, 50.0)];
        let a = track(vec![point(0.0, 0.0, 0.0, 100.0, 270.0), tail[0], tail[1]]);
        let b = track(vec![point(1.0, 9.0, 9.0, 999.0, 10.0), tail[0], tail[1]]);
        let (fa, fb) = (extract_features(&a).unwrap(), extract_features(&b).unwrap());
        assert_eq!(fa.speed_delta_kt, fb.speed_delta_kt);
        assert_eq!(fa.heading_delta_deg, fb.heading_delta_deg);
        assert_eq!(fa.implied_speed_kt, fb.implied_speed_kt);
        assert_eq!(fa.report_gap_s, fb.report_gap_s);
    }

    #[test]
    fn empty_map_serializes_to_braces() {
        assert_eq!(serialize_features(&FeatureMap::default()), b"{}");
    }

    fn sample_map() -> FeatureMap {
        let t = track(vec![
            point(1.0, 52.1234567891, 4.98765432101, 401.123456789, 359.99999),
            point(2.3, 52.1334567891, 4.99765432101, 399.987654321, 0.3333333333),
        ]);
        let fv = extract_features(&t).unwrap();
        let mut entries = BTreeMap::new();
        entries.insert(t.key.clone(), fv.clone());
        entries.insert("0.500".into(), FeatureVector { icao: "000001".into(), ..fv });
        FeatureMap { entries }
    }

    #[test]
    fn serialization_is_deterministic_and_sorted() {
        let map = sample_map();
        let a = serialize_features(&map);
        assert_eq!(a, serialize_features(&map));
        let text = String::from_utf8(a).unwrap();
        assert!(text.find("\"0.500\"").unwrap() < text.find("\"1.000\"").unwrap());
        let inner = &text[text.find("{\"first_seen\"").unwrap()..];
        assert!(inner.find("first_seen").unwrap() < inner.find("ground_speed_kt").unwrap());
        for number in text.split(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-')) {
            if let Some((_, frac)) = number.split_once('.') {
                assert!(frac.len() <= 6, "{number}");
            }
        }
    }

    #[test]
    fn serialize_parse_serialize_is_a_fixed_point() {
        let once = serialize_features(&sample_map());
        let twice = serialize_features(&parse_features(&once).unwrap());
        assert_eq!(once, twice);
    }

    #[test]
    fn schema_violations_are_rejected() {
        assert!(parse_features(b"[]").is_err());
        assert!(parse_features(br#"{"k":{"icao":"A"}}"#).is_err());
        let mut doc: Value = serde_json::from_slice(&serialize_features(&sample_map())).unwrap();
        doc["0.500"]["heading_delta_deg"] = Value::from(270.0);
        assert!(parse_features(&serde_json::to_vec(&doc).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn heading_delta_stays_in_range(a in 0.0f64..360.0, b in 0.0f64..360.0) {
            let t = track(vec![point(0.0, 1.0, 1.0, 400.0, a), point(1.0, 1.0, 1.0, 400.0, b)]);
            let d = extract_features(&t).unwrap().heading_delta_deg;
            prop_assert!((-180.0..=180.0).contains(&d));
            let back = (a + d).rem_euclid(360.0);
            prop_assert!((back - b).abs() < 1e-9 || (360.0 - (back - b).abs()) < 1e-9);
        }
    }
}
