//! Geographic and projected coordinate values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Geographic position in decimal degrees on the NAD83 datum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct LonLat<T> {
    pub lon: T,
    pub lat: T,
}

impl<T: Real> LonLat<T> {
    /// Builds a point, checking `lon ∈ [-180, 180)` and `lat ∈ (-90, 90)`.
    pub fn new(lon: T, lat: T) -> Result<Self> {
        if !lon.is_finite() || lon < T::lit(-180.0) || lon >= T::lit(180.0) {
            return Err(Error::validation("lon", format!("longitude {lon} outside [-180, 180)")));
        }
        if !lat.is_finite() || lat <= T::lit(-90.0) || lat >= T::lit(90.0) {
            return Err(Error::validation("lat", format!("latitude {lat} outside (-90, 90)")));
        }
        Ok(LonLat { lon, lat })
    }
}

/// A projected UTM position (northern hemisphere).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct Utm<T> {
    pub zone: u8,
    pub easting: T,
    pub northing: T,
}

impl<T: Real> Utm<T> {
    pub fn new(zone: u8, easting: T, northing: T) -> Result<Self> {
        if !(1..=60).contains(&zone) {
            return Err(Error::validation("zone", format!("UTM zone {zone} outside [1, 60]")));
        }
        if !easting.is_finite() {
            return Err(Error::validation("easting", "easting is not finite"));
        }
        if !northing.is_finite() || northing < T::zero() {
            return Err(Error::validation("northing", format!("northing {northing} must be non-negative")));
        }
        Ok(Utm { zone, easting, northing })
    }
}

/// Axis-aligned rectangle in one UTM zone, half-open on the max edges.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct UtmBox<T> {
    pub zone: u8,
    pub min_easting: T,
    pub min_northing: T,
    pub max_easting: T,
    pub max_northing: T,
}

impl<T: Real> UtmBox<T> {
    pub fn new(zone: u8, min_easting: T, min_northing: T, max_easting: T, max_northing: T) -> Result<Self> {
        let finite = [min_easting, min_northing, max_easting, max_northing].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::validation("bbox", "bounding box values must be finite"));
        }
        if min_easting >= max_easting || min_northing >= max_northing {
            return Err(Error::validation("bbox", "bounding box min must be less than max"));
        }
        Ok(UtmBox { zone, min_easting, min_northing, max_easting, max_northing })
    }

    pub fn width(&self) -> T {
        self.max_easting - self.min_easting
    }

    pub fn height(&self) -> T {
        self.max_northing - self.min_northing
    }

    pub fn midpoint(&self) -> Utm<T> {
        let two = T::lit(2.0);
        Utm {
            zone: self.zone,
            easting: (self.min_easting + self.max_easting) / two,
            northing: (self.min_northing + self.max_northing) / two,
        }
    }

    pub fn contains(&self, p: &Utm<T>) -> bool {
        p.zone == self.zone
            && p.easting >= self.min_easting
            && p.easting < self.max_easting
            && p.northing >= self.min_northing
            && p.northing < self.max_northing
    }

    pub fn north_west(&self) -> Utm<T> {
        Utm { zone: self.zone, easting: self.min_easting, northing: self.max_northing }
    }

    pub fn north_east(&self) -> Utm<T> {
        Utm { zone: self.zone, easting: self.max_easting, northing: self.max_northing }
    }

    pub fn south_west(&self) -> Utm<T> {
        Utm { zone: self.zone, easting: self.min_easting, northing: self.min_northing }
    }

    pub fn south_east(&self) -> Utm<T> {
        Utm { zone: self.zone, easting: self.max_easting, northing: self.min_northing }
    }
}
