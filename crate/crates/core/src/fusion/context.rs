use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FusionError;
use crate::tracker::{AirspaceBox, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeBand {
    Day,
    Night,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    pub time_band: TimeBand,
    pub sector_id: String,
    pub security_level: u8,
}

/// Sector grid over the airspace box plus the local day window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub airspace: AirspaceBox,
    pub rows: u32,
    pub cols: u32,
    /// Offset of local time from the timestamp epoch, seconds.
    #[serde(default)]
    pub utc_offset_s: i64,
    /// Day window `[day_start_s, day_end_s)` in seconds after local midnight.
    #[serde(default = "default_day_start")]
    pub day_start_s: u32,
    #[serde(default = "default_day_end")]
    pub day_end_s: u32,
    #[serde(default = "default_level")]
    pub default_security_level: u8,
    /// Per-sector security levels, keyed by sector id.
    #[serde(default)]
    pub security_levels: BTreeMap<String, u8>,
}

fn default_day_start() -> u32 {
    6 * 3600
}

fn default_day_end() -> u32 {
    22 * 3600
}

fn default_level() -> u8 {
    1
}

impl GridConfig {
    pub fn new(airspace: AirspaceBox, rows: u32, cols: u32) -> Self {
        GridConfig {
            airspace,
            rows,
            cols,
            utc_offset_s: 0,
            day_start_s: default_day_start(),
            day_end_s: default_day_end(),
            default_security_level: default_level(),
            security_levels: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let b = &self.airspace;
        if self.rows == 0 || self.cols == 0 || !(b.lat_min < b.lat_max) || !(b.lon_min < b.lon_max) {
            return Err(FusionError::Config("grid must have positive rows/cols over a non-empty box".into()));
        }
        if self.day_start_s > self.day_end_s || self.day_end_s > 86_400 {
            return Err(FusionError::Config("day window must satisfy start <= end <= 24h".into()));
        }
        let levels = std::iter::once(&self.default_security_level).chain(self.security_levels.values());
        if levels.into_iter().any(|l| !(1..=3).contains(l)) {
            return Err(FusionError::Config("security levels must be 1..=3".into()));
        }
        Ok(())
    }

    /// Sector containing the position. The upper box edges belong to the last
    /// row/column so the grid covers the closed box exactly.
    pub fn sector(&self, lat: f64, lon: f64) -> Option<String> {
        let b = &self.airspace;
        if !b.contains(lat, lon) {
            return None;
        }
        let cell = |v: f64, lo: f64, hi: f64, n: u32| -> u32 {
            (((v - lo) / (hi - lo) * n as f64).floor() as u32).min(n - 1)
        };
        let row = cell(lat, b.lat_min, b.lat_max, self.rows);
        let col = cell(lon, b.lon_min, b.lon_max, self.cols);
        Some(format!("R{row}C{col}"))
    }

    pub fn time_band(&self, clock: f64) -> TimeBand {
        let local = (clock.floor() as i64 + self.utc_offset_s).rem_euclid(86_400) as u32;
        if (self.day_start_s..self.day_end_s).contains(&local) {
            TimeBand::Day
        } else {
            TimeBand::Night
        }
    }
}

pub fn contextualize(fv: &FeatureVector, clock: f64, grid: &GridConfig) -> Result<Context, FusionError> {
    let sector_id = grid
        .sector(fv.lat_deg, fv.lon_deg)
        .ok_or(FusionError::SectorUnmapped { lat: fv.lat_deg, lon: fv.lon_deg })?;
    let security_level = grid
        .security_levels
        .get(&sector_id)
        .copied()
        .unwrap_or(grid.default_security_level);
    Ok(Context {
        time_band: grid.time_band(clock),
        sector_id,
        security_level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fv_at(lat: f64, lon: f64) -> FeatureVector {
        FeatureVector {
            icao: "ABCDEF".into(),
            first_seen: 1.0,
            speed_delta_kt: 0.0,
            heading_delta_deg: 0.0,
            vertical_rate_fpm: 0.0,
            implied_speed_kt: 400.0,
            report_gap_s: 1.0,
            window_len: 2,
            ground_speed_kt: 400.0,
            lat_deg: lat,
            lon_deg: lon,
            last_seen: 2.0,
        }
    }

    fn grid() -> GridConfig {
        GridConfig::new(AirspaceBox { lat_min: 50.0, lat_max: 54.0, lon_min: 2.0, lon_max: 8.0 }, 4, 6)
    }

    #[test]
    fn day_and_night_boundaries() {
        let g = grid();
        let fv = fv_at(52.0, 5.0);
        assert_eq!(contextualize(&fv, 12.0 * 3600.0, &g).unwrap().time_band, TimeBand::Day);
        assert_eq!(contextualize(&fv, 22.0 * 3600.0, &g).unwrap().time_band, TimeBand::Night);
        assert_eq!(contextualize(&fv, 6.0 * 3600.0, &g).unwrap().time_band, TimeBand::Day);
        assert_eq!(contextualize(&fv, 6.0 * 3600.0 - 1.0, &g).unwrap().time_band, TimeBand::Night);
        // Next day, local offset +2h: 20:00 UTC is 22:00 local.
        let shifted = GridConfig { utc_offset_s: 7200, ..g };
        assert_eq!(shifted.time_band(86_400.0 + 20.0 * 3600.0), TimeBand::Night);
    }

    #[test]
    fn outside_box_is_unmapped() {
        assert!(matches!(
            contextualize(&fv_at(60.0, 5.0), 0.0, &grid()),
            Err(FusionError::SectorUnmapped { .. })
        ));
    }

    #[test]
    fn grid_covers_box_edges() {
        let g = grid();
        assert_eq!(g.sector(50.0, 2.0).unwrap(), "R0C0");
        assert_eq!(g.sector(54.0, 8.0).unwrap(), "R3C5");
        assert_eq!(g.sector(51.0, 3.0).unwrap(), "R1C1");
    }

    #[test]
    fn per_sector_security_level() {
        let mut g = grid();
        g.security_levels.insert("R1C1".into(), 3);
        assert_eq!(contextualize(&fv_at(51.0, 3.0), 0.0, &g).unwrap().security_level, 3);
        assert_eq!(contextualize(&fv_at(50.5, 7.5), 0.0, &g).unwrap().security_level, 1);
        g.security_levels.insert("R0C0".into(), 4);
        assert!(g.validate().is_err());
    }
}
