//! Flat-earth geometry around a mission origin.

use serde::{Deserialize, Serialize};

const METERS_PER_DEG_LAT: f64 = 111_320.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        GeoPoint { lat, lon }
    }
}

/// Local east/north offset in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Local {
    pub east: f64,
    pub north: f64,
}

impl Local {
    pub fn new(east: f64, north: f64) -> Self {
        Local { east, north }
    }

    pub fn distance(self, other: Local) -> f64 {
        (self.east - other.east).hypot(self.north - other.north)
    }

    /// Moves toward `target` by at most `max_step` meters. Returns the new point.
    pub fn step_toward(self, target: Local, max_step: f64) -> Local {
        let d = self.distance(target);
        if d <= max_step || d == 0.0 {
            return target;
        }
        let f = max_step / d;
        Local::new(
            self.east + (target.east - self.east) * f,
            self.north + (target.north - self.north) * f,
        )
    }
}

/// Equirectangular projection anchored at `origin`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub origin: GeoPoint,
}

impl Projection {
    pub fn new(origin: GeoPoint) -> Self {
        Projection { origin }
    }

    fn meters_per_deg_lon(&self) -> f64 {
        METERS_PER_DEG_LAT * self.origin.lat.to_radians().cos()
    }

    pub fn to_local(&self, p: GeoPoint) -> Local {
        Local::new(
            (p.lon - self.origin.lon) * self.meters_per_deg_lon(),
            (p.lat - self.origin.lat) * METERS_PER_DEG_LAT,
        )
    }

    pub fn to_geo(&self, l: Local) -> GeoPoint {
        GeoPoint::new(
            self.origin.lat + l.north / METERS_PER_DEG_LAT,
            self.origin.lon + l.east / self.meters_per_deg_lon(),
        )
    }
}

fn orientation(a: GeoPoint, b: GeoPoint, c: GeoPoint) -> f64 {
    (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon)
}

fn on_segment(a: GeoPoint, b: GeoPoint, p: GeoPoint) -> bool {
    p.lon >= a.lon.min(b.lon)
        && p.lon <= a.lon.max(b.lon)
        && p.lat >= a.lat.min(b.lat)
        && p.lat <= a.lat.max(b.lat)
}

fn segments_intersect(p1: GeoPoint, p2: GeoPoint, q1: GeoPoint, q2: GeoPoint) -> bool {
    let d1 = orientation(q1, q2, p1);
    let d2 = orientation(q1, q2, p2);
    let d3 = orientation(p1, p2, q1);
    let d4 = orientation(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Why a polygon was rejected.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PolygonDefect {
    TooFewVertices(usize),
    RepeatedVertex(usize),
    SelfIntersection(usize, usize),
}

/// Checks a closed ring (last vertex implicitly joins the first).
pub fn check_simple_polygon(ring: &[GeoPoint]) -> Result<(), PolygonDefect> {
    let n = ring.len();
    if n < 3 {
        return Err(PolygonDefect::TooFewVertices(n));
    }
    for i in 0..n {
        if ring[i] == ring[(i + 1) % n] {
            return Err(PolygonDefect::RepeatedVertex(i));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n]) {
                return Err(PolygonDefect::SelfIntersection(i, j));
            }
        }
    }
    Ok(())
}

/// Even-odd ray cast; points on the boundary may land either way.
pub fn polygon_contains(ring: &[GeoPoint], p: GeoPoint) -> bool {
    let mut inside = false;
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let lon = a.lon + (p.lat - a.lat) / (b.lat - a.lat) * (b.lon - a.lon);
            if p.lon < lon {
                inside = !inside;
            }
        }
    }
    inside
}
