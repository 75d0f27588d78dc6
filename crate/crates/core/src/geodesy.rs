//! Spherical-earth coordinates and great-circle distance.
//!
//! All angles cross the API in degrees; trigonometry happens in radians.
//! Distances use the haversine formula on a sphere of mean radius
//! [`EARTH_RADIUS_KM`].

use std::fmt;

use thiserror::Error;

/// Mean earth radius (IUGG), kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Half the great circle: the largest distance two points can be apart.
pub const MAX_GCD_KM: f64 = std::f64::consts::PI * EARTH_RADIUS_KM;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("non-finite coordinate: {0}")]
    NonFinite(f64),
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("invalid distance {0} km (must be non-negative and not NaN)")]
    InvalidDistance(f64),
}

/// Wraps a longitude into `[-180, 180)`.
pub fn normalize_lon(lon_raw: f64) -> Result<f64, GeoError> {
    if !lon_raw.is_finite() {
        return Err(GeoError::NonFinite(lon_raw));
    }
    let mut lon = (lon_raw + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid may round up to exactly 360 for tiny negative inputs
    if lon >= 180.0 {
        lon -= 360.0;
    }
    // -0.0 and 0.0 compare equal but print differently
    Ok(if lon == 0.0 { 0.0 } else { lon })
}

/// A point on the sphere in degrees.
///
/// Latitude is validated to `[-90, 90]`, longitude is wrapped into
/// `[-180, 180)`. At the poles every longitude names the same point, so the
/// longitude is canonicalized to 0 there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() {
            return Err(GeoError::NonFinite(lat));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::LatitudeOutOfRange(lat));
        }
        let lon = if lat.abs() == 90.0 {
            normalize_lon(lon)?;
            0.0
        } else {
            normalize_lon(lon)?
        };
        let lat = if lat == 0.0 { 0.0 } else { lat };
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    fn radians(&self) -> (f64, f64) {
        (self.lat.to_radians(), self.lon.to_radians())
    }

    /// Point reached by travelling `distance` along the great circle that
    /// leaves `self` at `bearing_deg` (clockwise from north).
    pub fn destination(&self, bearing_deg: f64, distance: DistanceKm) -> GeoPoint {
        let (lat1, lon1) = self.radians();
        let delta = distance.value() / EARTH_RADIUS_KM;
        let theta = bearing_deg.to_radians();
        let sin_lat2 = lat1.sin() * delta.cos() + lat1.cos() * delta.sin() * theta.cos();
        let lat2 = sin_lat2.clamp(-1.0, 1.0).asin();
        let lon2 = lon1
            + (theta.sin() * delta.sin() * lat1.cos()).atan2(delta.cos() - lat1.sin() * sin_lat2);
        let lat_deg = lat2.to_degrees().clamp(-90.0, 90.0);
        GeoPoint::new(lat_deg, lon2.to_degrees()).expect("finite by construction")
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lat, self.lon)
    }
}

/// A non-negative distance in kilometers.
///
/// Distances returned by [`gcd`] never exceed [`MAX_GCD_KM`]. Scales passed
/// as query radii may be larger (up to `+inf`), which simply means "every
/// point qualifies".
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DistanceKm(f64);

impl DistanceKm {
    pub const ZERO: DistanceKm = DistanceKm(0.0);

    pub fn new(km: f64) -> Result<Self, GeoError> {
        if km.is_nan() || km < 0.0 {
            return Err(GeoError::InvalidDistance(km));
        }
        Ok(Self(if km == 0.0 { 0.0 } else { km }))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// True when the radius reaches every point on the sphere.
    pub fn covers_globe(self) -> bool {
        self.0 >= MAX_GCD_KM
    }
}

impl fmt::Display for DistanceKm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} km", self.0)
    }
}

/// Great-circle distance by the haversine formula.
///
/// The arguments are put in a canonical order first so that
/// `gcd(a, b)` and `gcd(b, a)` are bit-identical.
pub fn gcd(a: GeoPoint, b: GeoPoint) -> DistanceKm {
    let (p, q) = if (a.lat, a.lon) <= (b.lat, b.lon) {
        (a, b)
    } else {
        (b, a)
    };
    let (lat1, lon1) = p.radians();
    let (lat2, lon2) = q.radians();
    let s_lat = ((lat2 - lat1) * 0.5).sin();
    let s_lon = ((lon2 - lon1) * 0.5).sin();
    let h = (s_lat * s_lat + lat1.cos() * lat2.cos() * s_lon * s_lon).clamp(0.0, 1.0);
    DistanceKm(2.0 * EARTH_RADIUS_KM * h.sqrt().asin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_lon(0.0).unwrap(), 0.0);
        assert_eq!(normalize_lon(180.0).unwrap(), -180.0);
        assert_eq!(normalize_lon(540.0).unwrap(), -180.0);
        assert_eq!(normalize_lon(-180.0).unwrap(), -180.0);
        assert_eq!(normalize_lon(-190.0).unwrap(), 170.0);
        for tiny in [1e-20, 1e-15, 3e-14, 1e-13] {
            let n = normalize_lon(-180.0 - tiny).unwrap();
            assert!((-180.0..180.0).contains(&n), "{n}");
        }
        assert!(normalize_lon(f64::NAN).is_err());
        assert!(normalize_lon(f64::INFINITY).is_err());
    }

    #[test]
    fn point_validation() {
        assert!(GeoPoint::new(90.5, 0.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(0.0, f64::NAN).is_err());
        assert_eq!(pt(10.0, 190.0).lon(), -170.0);
        assert_eq!(pt(90.0, 123.0), pt(90.0, -45.0));
        assert_eq!(gcd(pt(-90.0, 10.0), pt(-90.0, 170.0)).value(), 0.0);
    }

    #[test]
    fn distance_validation() {
        assert!(DistanceKm::new(-1.0).is_err());
        assert!(DistanceKm::new(f64::NAN).is_err());
        assert!(DistanceKm::new(f64::INFINITY).unwrap().covers_globe());
        assert!(!DistanceKm::new(20000.0).unwrap().covers_globe());
    }

    #[test]
    fn gcd_examples() {
        assert_eq!(gcd(pt(0.0, 0.0), pt(0.0, 0.0)).value(), 0.0);
        let anti = gcd(pt(0.0, 0.0), pt(0.0, 180.0)).value();
        assert!((anti - 20015.11).abs() < 0.01, "{anti}");
        // spherical Vincenty formula, evaluated independently: 2886.4484297648555
        let bna_lax = gcd(pt(36.12, -86.67), pt(33.94, -118.40)).value();
        assert!((bna_lax - 2886.4484297648555).abs() / 2886.4484297648555 < 1e-3);
        assert!((bna_lax - 2886.4484297648555).abs() < 1e-6);
    }

    #[test]
    fn destination_lands_at_distance() {
        let origin = pt(48.85, 2.35);
        for bearing in [0.0, 45.0, 133.0, 270.0] {
            let dest = origin.destination(bearing, DistanceKm::new(26.0).unwrap());
            assert!((gcd(origin, dest).value() - 26.0).abs() < 1e-6);
        }
    }

    fn arb_point() -> impl Strategy<Value = GeoPoint> {
        (-90.0f64..=90.0, -180.0f64..180.0).prop_map(|(la, lo)| pt(la, lo))
    }

    proptest! {
        #[test]
        fn symmetric_and_nonnegative(a in arb_point(), b in arb_point()) {
            let ab = gcd(a, b).value();
            prop_assert_eq!(ab, gcd(b, a).value());
            prop_assert!((0.0..=MAX_GCD_KM).contains(&ab));
            prop_assert_eq!(gcd(a, a).value(), 0.0);
        }

        #[test]
        fn triangle_inequality(a in arb_point(), b in arb_point(), c in arb_point()) {
            prop_assert!(gcd(a, c).value() <= gcd(a, b).value() + gcd(b, c).value() + 1e-9);
        }

        #[test]
        fn longitude_shift_invariance(a in arb_point(), b in arb_point(), k in 1u8..4) {
            let shift = 90.0 * f64::from(k);
            let a2 = pt(a.lat(), a.lon() + shift);
            let b2 = pt(b.lat(), b.lon() + shift);
            prop_assert!((gcd(a, b).value() - gcd(a2, b2).value()).abs() < 1e-9);
        }

        #[test]
        fn normalized_is_congruent(lon in -1e4f64..1e4) {
            let n = normalize_lon(lon).unwrap();
            prop_assert!((-180.0..180.0).contains(&n));
            let k = ((lon - n) / 360.0).round();
            prop_assert!((lon - n - k * 360.0).abs() < 1e-9);
        }
    }
}
