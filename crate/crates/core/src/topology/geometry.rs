//! Spherical-earth helpers. Angles in degrees at the API, radians inside.

/// Mean earth radius of the spherical model.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Standard gravitational parameter of the earth.
pub const MU_EARTH_KM3_S2: f64 = 398_600.441_8;

/// A point on the earth surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Self {
        GeoPoint {
            lat_deg,
            lon_deg: wrap_lon(lon_deg),
        }
    }

    pub fn from_unit(v: [f64; 3]) -> Self {
        let lat = v[2].clamp(-1.0, 1.0).asin().to_degrees();
        let lon = v[1].atan2(v[0]).to_degrees();
        GeoPoint::new(lat, lon)
    }

    pub fn to_unit(self) -> [f64; 3] {
        let (lat, lon) = (self.lat_deg.to_radians(), self.lon_deg.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    }

    /// Central angle to `other` in radians (haversine form, exact on ties of
    /// mirrored longitude offsets).
    pub fn central_angle(self, other: GeoPoint) -> f64 {
        let (p1, p2) = (self.lat_deg.to_radians(), other.lat_deg.to_radians());
        let dlat = p2 - p1;
        let dlon = (other.lon_deg - self.lon_deg).to_radians();
        let h = (dlat / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dlon / 2.0).sin().powi(2);
        2.0 * h.sqrt().min(1.0).asin()
    }

    /// Great-circle distance on the model sphere, in kilometers.
    pub fn distance_km(self, other: GeoPoint) -> f64 {
        EARTH_RADIUS_KM * self.central_angle(other)
    }

    /// Point reached by travelling `angle_deg` of arc along initial `bearing_deg`.
    pub fn destination(self, bearing_deg: f64, angle_deg: f64) -> GeoPoint {
        let (lat1, lon1) = (self.lat_deg.to_radians(), self.lon_deg.to_radians());
        let (brg, d) = (bearing_deg.to_radians(), angle_deg.to_radians());
        let lat2 = (lat1.sin() * d.cos() + lat1.cos() * d.sin() * brg.cos()).asin();
        let lon2 = lon1 + (brg.sin() * d.sin() * lat1.cos()).atan2(d.cos() - lat1.sin() * lat2.sin());
        GeoPoint::new(lat2.to_degrees(), lon2.to_degrees())
    }
}

/// Wrap a longitude into `[-180, 180)`.
pub fn wrap_lon(lon_deg: f64) -> f64 {
    let w = (lon_deg + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Unit position of a circular-orbit satellite with the given right ascension
/// of the ascending node, inclination and argument of latitude.
pub fn orbit_unit_position(raan_deg: f64, inclination_deg: f64, arg_lat_deg: f64) -> [f64; 3] {
    let (raan, inc, u) = (
        raan_deg.to_radians(),
        inclination_deg.to_radians(),
        arg_lat_deg.to_radians(),
    );
    [
        raan.cos() * u.cos() - raan.sin() * u.sin() * inc.cos(),
        raan.sin() * u.cos() + raan.cos() * u.sin() * inc.cos(),
        u.sin() * inc.sin(),
    ]
}

/// Unit normal of an orbital plane.
pub fn orbit_normal(raan_deg: f64, inclination_deg: f64) -> [f64; 3] {
    let (raan, inc) = (raan_deg.to_radians(), inclination_deg.to_radians());
    [raan.sin() * inc.sin(), -raan.cos() * inc.sin(), inc.cos()]
}

/// Mean motion of a circular orbit, degrees per second.
pub fn mean_motion_deg_s(altitude_km: f64) -> f64 {
    let r = EARTH_RADIUS_KM + altitude_km;
    (MU_EARTH_KM3_S2 / (r * r * r)).sqrt().to_degrees()
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Angle between two unit vectors, radians.
pub fn angle_between(a: [f64; 3], b: [f64; 3]) -> f64 {
    let c = cross(a, b);
    dot(c, c).sqrt().atan2(dot(a, b))
}
