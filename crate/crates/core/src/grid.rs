//! The tile grid: themes, the power-of-two scale ladder, scenes and tile keys.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coords::{Utm, UtmBox};
use crate::error::{Error, Result};
use crate::real::Real;

/// Edge length of every tile, in pixels.
pub const TILE_SIZE: u32 = 200;

/// Imagery theme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Theme {
    /// Digital ortho-quadrangle aerial photography.
    Doq = 1,
    /// Digital raster graphic (scanned topographic map).
    Drg = 2,
}

impl Theme {
    pub const ALL: [Theme; 2] = [Theme::Doq, Theme::Drg];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(Theme::Doq),
            2 => Ok(Theme::Drg),
            other => Err(Error::validation("theme", format!("unknown theme {other}; expected 1 (DOQ) or 2 (DRG)"))),
        }
    }

    /// Layer name used by the WMS endpoint.
    pub fn layer_name(self) -> &'static str {
        match self {
            Theme::Doq => "DOQ",
            Theme::Drg => "DRG",
        }
    }

    pub fn from_layer_name(name: &str) -> Result<Self> {
        if name.eq_ignore_ascii_case("DOQ") {
            Ok(Theme::Doq)
        } else if name.eq_ignore_ascii_case("DRG") {
            Ok(Theme::Drg)
        } else {
            Err(Error::validation("layers", format!("unknown layer {name:?}; expected DOQ or DRG")))
        }
    }
}

impl TryFrom<u8> for Theme {
    type Error = Error;
    fn try_from(code: u8) -> Result<Self> {
        Theme::from_code(code)
    }
}

impl From<Theme> for u8 {
    fn from(t: Theme) -> u8 {
        t.code()
    }
}

impl fmt::Display for Theme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.layer_name())
    }
}

/// Scale code `s` with a resolution of `2^(s-10)` metres per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Scale(u8);

impl Scale {
    pub const MIN: u8 = 8;
    pub const MAX: u8 = 24;
    /// Scale codes accepted on the wire by the map endpoints.
    pub const SERVED_MIN: u8 = 10;
    pub const SERVED_MAX: u8 = 16;

    pub fn new(code: u8) -> Result<Self> {
        if (Self::MIN..=Self::MAX).contains(&code) {
            Ok(Scale(code))
        } else {
            Err(Error::validation("scale", format!("scale {code} outside [{}, {}]", Self::MIN, Self::MAX)))
        }
    }

    /// Parses a scale restricted to the served band 10..=16.
    pub fn served(code: u8) -> Result<Self> {
        if (Self::SERVED_MIN..=Self::SERVED_MAX).contains(&code) {
            Ok(Scale(code))
        } else {
            Err(Error::validation(
                "scale",
                format!("scale {code} outside [{}, {}]", Self::SERVED_MIN, Self::SERVED_MAX),
            ))
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn meters_per_pixel<T: Real>(self) -> T {
        T::lit(2.0).powi(i32::from(self.0) - 10)
    }

    /// Ground span of one tile edge in metres.
    pub fn tile_span<T: Real>(self) -> T {
        self.meters_per_pixel::<T>() * T::lit(f64::from(TILE_SIZE))
    }

    /// The next coarser scale, if any.
    pub fn coarser(self) -> Option<Scale> {
        (self.0 < Self::MAX).then(|| Scale(self.0 + 1))
    }

    pub fn finer(self) -> Option<Scale> {
        (self.0 > Self::MIN).then(|| Scale(self.0 - 1))
    }
}

impl TryFrom<u8> for Scale {
    type Error = Error;
    fn try_from(code: u8) -> Result<Self> {
        Scale::new(code)
    }
}

impl From<Scale> for u8 {
    fn from(s: Scale) -> u8 {
        s.0
    }
}

/// Resolution of a scale code: `2^(code - 10)` metres per pixel.
pub fn meters_per_pixel(code: u8) -> Result<f64> {
    Ok(Scale::new(code)?.meters_per_pixel())
}

/// A seamless mosaic; for UTM data the scene number is the zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Scene(u8);

impl Scene {
    pub const SERVED_MIN: u8 = 3;
    pub const SERVED_MAX: u8 = 20;

    pub fn new(zone: u8) -> Result<Self> {
        if (1..=60).contains(&zone) {
            Ok(Scene(zone))
        } else {
            Err(Error::validation("scene", format!("scene {zone} outside [1, 60]")))
        }
    }

    pub fn zone(self) -> u8 {
        self.0
    }

    pub fn is_served(self) -> bool {
        (Self::SERVED_MIN..=Self::SERVED_MAX).contains(&self.0)
    }

    pub fn require_served(self) -> Result<Self> {
        if self.is_served() {
            Ok(self)
        } else {
            Err(Error::domain("scene", format!("UTM zone {} is outside the served zones 3-20", self.0)))
        }
    }
}

impl TryFrom<u8> for Scene {
    type Error = Error;
    fn try_from(zone: u8) -> Result<Self> {
        Scene::new(zone)
    }
}

impl From<Scene> for u8 {
    fn from(s: Scene) -> u8 {
        s.0
    }
}

/// Primary key of one tile. `x` counts columns eastward from easting 0,
/// `y` counts rows northward from the equator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct TileId {
    pub theme: Theme,
    pub scale: Scale,
    pub scene: Scene,
    pub x: u32,
    pub y: u32,
}

impl TileId {
    pub fn new(theme: Theme, scale: Scale, scene: Scene, x: u32, y: u32) -> Self {
        TileId { theme, scale, scene, x, y }
    }

    /// Same theme/scale/scene at another column and row.
    pub fn with_xy(self, x: u32, y: u32) -> Self {
        TileId { x, y, ..self }
    }

    /// Tile offset by `(dx, dy)` in the adjacency table's arithmetic.
    pub fn neighbor(self, dx: i64, dy: i64) -> Result<TileId> {
        let x = i64::from(self.x) + dx;
        let y = i64::from(self.y) + dy;
        let x = u32::try_from(x).map_err(|_| Error::domain("x", format!("neighbor column {x} is out of range")))?;
        let y = u32::try_from(y).map_err(|_| Error::domain("y", format!("neighbor row {y} is out of range")))?;
        Ok(self.with_xy(x, y))
    }

    /// The tile one level coarser that contains this tile.
    pub fn parent(self) -> Option<TileId> {
        let scale = self.scale.coarser()?;
        Some(TileId { scale, x: self.x / 2, y: self.y / 2, ..self })
    }

    /// Ground footprint of the tile.
    pub fn extent<T: Real>(&self) -> UtmBox<T> {
        tile_extent(self)
    }
}

impl fmt::Display for TileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}/{}/{}", self.theme.code(), self.scale.code(), self.scene.zone(), self.x, self.y)
    }
}

/// `[x·L, (x+1)·L) × [y·L, (y+1)·L)` with `L = 200 · metersPerPixel(scale)`.
pub fn tile_extent<T: Real>(id: &TileId) -> UtmBox<T> {
    let span = id.scale.tile_span::<T>();
    let x = T::lit(f64::from(id.x));
    let y = T::lit(f64::from(id.y));
    UtmBox {
        zone: id.scene.zone(),
        min_easting: x * span,
        min_northing: y * span,
        max_easting: (x + T::one()) * span,
        max_northing: (y + T::one()) * span,
    }
}

/// The tile whose half-open footprint contains `p`.
pub fn tile_for_utm<T: Real>(theme: Theme, scale: Scale, p: &Utm<T>) -> Result<TileId> {
    if !p.easting.is_finite() || p.easting < T::zero() {
        return Err(Error::domain("easting", format!("easting {} is negative", p.easting)));
    }
    if !p.northing.is_finite() || p.northing < T::zero() {
        return Err(Error::domain("northing", format!("northing {} is negative", p.northing)));
    }
    let span = scale.tile_span::<T>();
    let x = (p.easting / span).floor().as_f64();
    let y = (p.northing / span).floor().as_f64();
    if x > f64::from(u32::MAX) || y > f64::from(u32::MAX) {
        return Err(Error::domain("easting", "coordinate beyond tile index range"));
    }
    Ok(TileId { theme, scale, scene: Scene::new(p.zone)?, x: x as u32, y: y as u32 })
}
