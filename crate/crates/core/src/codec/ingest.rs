//! Flightradar24-style CSV import and export.

use std::io::{Read, Write};

use log::warn;

use super::frame::normalize_deg;
use super::record::AdsbRecord;
use super::CodecError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Timestamp,
    Icao,
    Callsign,
    Lat,
    Lon,
    Position,
    Altitude,
    Speed,
    Track,
    VerticalRate,
}

/// Header aliases, compared after lowercasing and trimming.
const ALIASES: &[(&str, Column)] = &[
    ("timestamp", Column::Timestamp),
    ("time", Column::Timestamp),
    ("ts", Column::Timestamp),
    ("unix_time", Column::Timestamp),
    ("icao", Column::Icao),
    ("icao24", Column::Icao),
    ("hex", Column::Icao),
    ("icao_address", Column::Icao),
    ("callsign", Column::Callsign),
    ("call_sign", Column::Callsign),
    ("flight", Column::Callsign),
    ("lat", Column::Lat),
    ("latitude", Column::Lat),
    ("lat_deg", Column::Lat),
    ("lon", Column::Lon),
    ("lng", Column::Lon),
    ("long", Column::Lon),
    ("longitude", Column::Lon),
    ("lon_deg", Column::Lon),
    ("position", Column::Position),
    ("altitude", Column::Altitude),
    ("alt", Column::Altitude),
    ("altitude_ft", Column::Altitude),
    ("baro_altitude", Column::Altitude),
    ("speed", Column::Speed),
    ("ground_speed", Column::Speed),
    ("ground_speed_kt", Column::Speed),
    ("gs", Column::Speed),
    ("track", Column::Track),
    ("track_deg", Column::Track),
    ("direction", Column::Track),
    ("heading", Column::Track),
    ("course", Column::Track),
    ("vertical_rate", Column::VerticalRate),
    ("vertical_rate_fpm", Column::VerticalRate),
    ("vrate", Column::VerticalRate),
];

fn lookup(name: &str) -> Option<Column> {
    let key = name.trim().to_ascii_lowercase();
    ALIASES.iter().find(|(alias, _)| *alias == key).map(|(_, c)| *c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRow {
    /// 1-based line number in the input, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub records: Vec<AdsbRecord>,
    pub skipped: Vec<SkippedRow>,
}

impl IngestReport {
    pub fn skip_count(&self) -> usize {
        self.skipped.len()
    }
}

#[derive(Debug, Default)]
struct Layout {
    timestamp: Option<usize>,
    icao: Option<usize>,
    callsign: Option<usize>,
    lat: Option<usize>,
    lon: Option<usize>,
    position: Option<usize>,
    altitude: Option<usize>,
    speed: Option<usize>,
    track: Option<usize>,
    vertical_rate: Option<usize>,
}

impl Layout {
    fn from_header(header: &csv::StringRecord) -> Result<Self, CodecError> {
        let mut layout = Layout::default();
        for (idx, name) in header.iter().enumerate() {
            let slot = match lookup(name) {
                Some(Column::Timestamp) => &mut layout.timestamp,
                Some(Column::Icao) => &mut layout.icao,
                Some(Column::Callsign) => &mut layout.callsign,
                Some(Column::Lat) => &mut layout.lat,
                Some(Column::Lon) => &mut layout.lon,
                Some(Column::Position) => &mut layout.position,
                Some(Column::Altitude) => &mut layout.altitude,
                Some(Column::Speed) => &mut layout.speed,
                Some(Column::Track) => &mut layout.track,
                Some(Column::VerticalRate) => &mut layout.vertical_rate,
                None => continue,
            };
            slot.get_or_insert(idx);
        }
        let has_position = layout.position.is_some() || (layout.lat.is_some() && layout.lon.is_some());
        let missing: Vec<&str> = [
            ("timestamp", layout.timestamp.is_some()),
            ("icao", layout.icao.is_some()),
            ("lat/lon", has_position),
            ("altitude", layout.altitude.is_some()),
            ("speed", layout.speed.is_some()),
            ("track", layout.track.is_some()),
        ]
        .iter()
        .filter(|(_, present)| !present)
        .map(|(name, _)| *name)
        .collect();
        if !missing.is_empty() {
            return Err(CodecError::Header(missing.join(", ")));
        }
        Ok(layout)
    }

    fn parse_row(&self, row: &csv::StringRecord) -> Result<AdsbRecord, String> {
        let field = |idx: Option<usize>, name: &str| -> Result<&str, String> {
            let idx = idx.ok_or_else(|| format!("missing {name}"))?;
            row.get(idx)
                .map(str::trim)
                .ok_or_else(|| format!("missing {name} field"))
        };
        let real = |idx: Option<usize>, name: &str| -> Result<f64, String> {
            let raw = field(idx, name)?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("{name} is not a number: {raw:?}"))
        };

        let (lat_deg, lon_deg) = match (self.lat, self.lon) {
            (Some(_), Some(_)) => (real(self.lat, "lat")?, real(self.lon, "lon")?),
            _ => {
                let raw = field(self.position, "position")?;
                let (a, b) = raw
                    .split_once(',')
                    .ok_or_else(|| format!("position is not \"lat,lon\": {raw:?}"))?;
                let lat = a.trim().parse::<f64>().map_err(|_| format!("bad position latitude {a:?}"))?;
                let lon = b.trim().parse::<f64>().map_err(|_| format!("bad position longitude {b:?}"))?;
                (lat, lon)
            }
        };
        let callsign = match self.callsign {
            Some(idx) => row
                .get(idx)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string),
            None => None,
        };
        let vertical_rate_fpm = match self.vertical_rate {
            Some(_) => match field(self.vertical_rate, "vertical_rate")? {
                "" => 0,
                _ => real(self.vertical_rate, "vertical_rate")?.round() as i32,
            },
            None => 0,
        };
        let record = AdsbRecord {
            icao: field(self.icao, "icao")?.to_ascii_uppercase(),
            callsign,
            lat_deg,
            lon_deg: if lon_deg == -180.0 { 180.0 } else { lon_deg },
            altitude_ft: real(self.altitude, "altitude")?.round() as i32,
            ground_speed_kt: real(self.speed, "speed")?,
            track_deg: normalize_deg(real(self.track, "track")?),
            vertical_rate_fpm,
            timestamp: real(self.timestamp, "timestamp")?,
        };
        record.validate().map_err(|e| e.to_string())?;
        Ok(record)
    }
}

/// Reads a CSV export. Rows that fail to parse are skipped, logged and
/// listed in the report; the header must name the required columns.
pub fn ingest_csv<R: Read>(input: R) -> Result<IngestReport, CodecError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| CodecError::Header(e.to_string()))?
        .clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(CodecError::EmptyInput);
    }
    let layout = Layout::from_header(&header)?;

    let mut report = IngestReport::default();
    let mut row = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                let line = row.position().map(|p| p.line()).unwrap_or(line);
                match layout.parse_row(&row) {
                    Ok(rec) => report.records.push(rec),
                    Err(reason) => {
                        warn!("skipping csv line {line}: {reason}");
                        report.skipped.push(SkippedRow { line, reason });
                    }
                }
            }
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(line);
                let reason = e.to_string();
                warn!("skipping csv line {line}: {reason}");
                report.skipped.push(SkippedRow { line, reason });
                if !matches!(e.kind(), csv::ErrorKind::Utf8 { .. } | csv::ErrorKind::UnequalLengths { .. }) {
                    break;
                }
            }
        }
    }
    Ok(report)
}

pub const CSV_HEADER: [&str; 9] = [
    "timestamp",
    "icao",
    "callsign",
    "lat",
    "lon",
    "altitude",
    "speed",
    "track",
    "vertical_rate",
];

/// Writes records in the column layout [`ingest_csv`] reads back.
pub fn write_csv<W: Write>(out: W, records: &[AdsbRecord]) -> Result<(), CodecError> {
    let mut writer = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CodecError::Io(e.to_string());
    writer.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        writer
            .write_record([
                format!("{:.3}", r.timestamp),
                r.icao.clone(),
                r.callsign.clone().unwrap_or_default(),
                format!("{:.6}", r.lat_deg),
                format!("{:.6}", r.lon_deg),
                r.altitude_ft.to_string(),
                format!("{:.2}", r.ground_speed_kt),
                format!("{:.2}", r.track_deg),
                r.vertical_rate_fpm.to_string(),
            ])
            .map_err(io)?;
    }
    writer.flush().map_err(|e| CodecError::Io(e.to_string()))?;
    Ok(())
}
