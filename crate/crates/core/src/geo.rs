//! Spherical-earth helpers shared by the tracker and the simulator.

/// Mean earth radius in metres.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const METRES_PER_NM: f64 = 1852.0;
/// Knots to metres per second.
pub const KT_TO_MPS: f64 = METRES_PER_NM / 3600.0;

/// Great-circle distance in metres.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

/// Initial bearing from the first point to the second, degrees in [0, 360).
pub fn bearing_deg(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dl = (lon2 - lon1).to_radians();
    let y = dl.sin() * p2.cos();
    let x = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos();
    wrap_360(y.atan2(x).to_degrees())
}

/// Point reached after travelling `distance_m` along `bearing_deg`.
pub fn destination(lat: f64, lon: f64, bearing_deg: f64, distance_m: f64) -> (f64, f64) {
    let delta = distance_m / EARTH_RADIUS_M;
    let theta = bearing_deg.to_radians();
    let p1 = lat.to_radians();
    let l1 = lon.to_radians();
    let p2 = (p1.sin() * delta.cos() + p1.cos() * delta.sin() * theta.cos()).asin();
    let l2 = l1 + (theta.sin() * delta.sin() * p1.cos()).atan2(delta.cos() - p1.sin() * p2.sin());
    (p2.to_degrees(), wrap_180(l2.to_degrees()))
}

pub fn wrap_360(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d >= 360.0 { 0.0 } else { d }
}

/// Wraps into (-180, 180].
pub fn wrap_180(deg: f64) -> f64 {
    let d = wrap_360(deg);
    if d > 180.0 { d - 360.0 } else { d }
}

/// Signed smallest rotation from `from` to `to`, in [-180, 180].
pub fn heading_delta(from: f64, to: f64) -> f64 {
    (to - from + 180.0).rem_euclid(360.0) - 180.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_meridian() {
        let d = haversine_m(0.0, 0.0, 90.0, 0.0);
        assert!((d - std::f64::consts::PI / 2.0 * EARTH_RADIUS_M).abs() < 1e-6);
    }

    #[test]
    fn destination_inverts_distance_and_bearing() {
        let (lat, lon) = destination(45.0, 7.0, 63.0, 250_000.0);
        assert!((haversine_m(45.0, 7.0, lat, lon) - 250_000.0).abs() < 1e-3);
        assert!((bearing_deg(45.0, 7.0, lat, lon) - 63.0).abs() < 1e-6);
    }

    #[test]
    fn deltas_wrap() {
        assert_eq!(heading_delta(350.0, 10.0), 20.0);
        assert_eq!(heading_delta(10.0, 350.0), -20.0);
        assert_eq!(wrap_180(190.0), -170.0);
        assert_eq!(wrap_180(-180.0), 180.0);
    }
}
