//! Tile metadata and the five-point area description used to compose images.

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coords::{LonLat, Utm, UtmBox};
use crate::error::{Error, Result};
use crate::gazetteer::NearestPlace;
use crate::grid::{tile_extent, Scale, Scene, Theme, TileId, TILE_SIZE};
use crate::projection::{lon_lat_to_utm, TransverseMercator};
use crate::real::Real;

/// Image dimension limits of the map endpoints, in pixels.
pub const MIN_IMAGE_PX: u32 = 50;
pub const MAX_IMAGE_PX: u32 = 2000;

/// Tiles outside this band have no meaningful geographic footprint.
const MAX_TILE_EASTING: f64 = 1_000_000.0;
const MAX_TILE_NORTHING: f64 = 9_400_000.0;

/// Date a tile was photographed or published.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum CaptureDate {
    Known(NaiveDate),
    #[default]
    Unknown,
}

impl CaptureDate {
    pub fn known(self) -> Option<NaiveDate> {
        match self {
            CaptureDate::Known(d) => Some(d),
            CaptureDate::Unknown => None,
        }
    }
}

impl fmt::Display for CaptureDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaptureDate::Known(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            CaptureDate::Unknown => f.write_str("unknown"),
        }
    }
}

impl std::str::FromStr for CaptureDate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("unknown") || s.is_empty() {
            return Ok(CaptureDate::Unknown);
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map(CaptureDate::Known)
            .map_err(|e| Error::validation("capture_date", format!("bad date {s:?}: {e}")))
    }
}

impl Serialize for CaptureDate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CaptureDate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A tile key with its geographic fiducials and capture date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct TileMeta<T = f64> {
    pub id: TileId,
    pub tile_exists: bool,
    pub capture_date: CaptureDate,
    pub meters_per_pixel: T,
    pub utm_extent: UtmBox<T>,
    pub north_west: LonLat<T>,
    pub north_east: LonLat<T>,
    pub south_west: LonLat<T>,
    pub south_east: LonLat<T>,
    pub center: LonLat<T>,
}

fn project_inverse<T: Real>(tm: &TransverseMercator<T>, p: Utm<T>) -> LonLat<T> {
    let (dlon, lat) = tm.inverse_radians(p.easting, p.northing);
    LonLat { lon: crate::projection::central_meridian::<T>(p.zone) + dlon.to_degrees(), lat: lat.to_degrees() }
}

/// Geometry-only metadata for a tile: corners and center projected from the
/// tile's UTM footprint, `tile_exists` false and the date unknown.
pub fn tile_meta<T: Real>(id: &TileId) -> Result<TileMeta<T>> {
    let extent: UtmBox<T> = tile_extent(id);
    if extent.max_easting > T::lit(MAX_TILE_EASTING) || extent.max_northing > T::lit(MAX_TILE_NORTHING) {
        return Err(Error::domain("x", format!("tile {id} lies outside the projectable zone area")));
    }
    let tm = TransverseMercator::<T>::utm();
    Ok(TileMeta {
        id: *id,
        tile_exists: false,
        capture_date: CaptureDate::Unknown,
        meters_per_pixel: id.scale.meters_per_pixel(),
        utm_extent: extent,
        north_west: project_inverse(&tm, extent.north_west()),
        north_east: project_inverse(&tm, extent.north_east()),
        south_west: project_inverse(&tm, extent.south_west()),
        south_east: project_inverse(&tm, extent.south_east()),
        center: project_inverse(&tm, extent.midpoint()),
    })
}

/// Location of a corner or center pixel inside its tile. Offsets are counted
/// rightward and downward from the tile's top-left pixel; `point` is the
/// geographic position of that pixel's center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct LonLatPtOffset<T = f64> {
    pub point: LonLat<T>,
    pub x_offset: u32,
    pub y_offset: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct AreaCoordinate<T = f64> {
    pub tile_meta: TileMeta<T>,
    pub offset: LonLatPtOffset<T>,
}

/// Corner and center tiles of an image, with crop offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct AreaBoundingBox<T = f64> {
    pub north_west: AreaCoordinate<T>,
    pub north_east: AreaCoordinate<T>,
    pub south_west: AreaCoordinate<T>,
    pub south_east: AreaCoordinate<T>,
    pub center: AreaCoordinate<T>,
    pub nearest_place: Option<NearestPlace>,
}

impl<T: Real> AreaBoundingBox<T> {
    pub fn theme(&self) -> Theme {
        self.north_west.tile_meta.id.theme
    }

    pub fn scale(&self) -> Scale {
        self.north_west.tile_meta.id.scale
    }

    /// Number of tile columns and rows the image spans.
    pub fn tile_span(&self) -> (u32, u32) {
        let nw = &self.north_west.tile_meta.id;
        let ne = &self.north_east.tile_meta.id;
        let sw = &self.south_west.tile_meta.id;
        (ne.x - nw.x + 1, nw.y - sw.y + 1)
    }

    /// Image size in pixels, recovered from the corner offsets.
    pub fn image_size(&self) -> (u32, u32) {
        let nw = &self.north_west;
        let ne = &self.north_east;
        let sw = &self.south_west;
        let w = (ne.tile_meta.id.x - nw.tile_meta.id.x) * TILE_SIZE + ne.offset.x_offset + 1 - nw.offset.x_offset;
        let h = (nw.tile_meta.id.y - sw.tile_meta.id.y) * TILE_SIZE + sw.offset.y_offset + 1 - nw.offset.y_offset;
        (w, h)
    }

    /// Ground frame of the image described by this box.
    pub fn frame(&self) -> ImageFrame<T> {
        let nw = &self.north_west;
        let r = self.scale().meters_per_pixel::<T>();
        let extent = &nw.tile_meta.utm_extent;
        let (width, height) = self.image_size();
        ImageFrame {
            zone: extent.zone,
            west: extent.min_easting + T::lit(f64::from(nw.offset.x_offset)) * r,
            north: extent.max_northing - T::lit(f64::from(nw.offset.y_offset)) * r,
            res_x: r,
            res_y: r,
            width,
            height,
        }
    }

    /// Every tile the image touches, in composition order (columns west to
    /// east, rows north to south within a column).
    pub fn tiles(&self) -> Vec<TileId> {
        let nw = self.north_west.tile_meta.id;
        let x_end = self.north_east.tile_meta.id.x;
        let y_end = self.south_west.tile_meta.id.y;
        let mut out = Vec::new();
        for x in nw.x..=x_end {
            for y in (y_end..=nw.y).rev() {
                out.push(nw.with_xy(x, y));
            }
        }
        out
    }
}

/// Placement of an image on the ground: top-left corner, pixel size and
/// dimensions. Pixel `(col, row)` covers
/// `[west + col·res_x, west + (col+1)·res_x) × (north - (row+1)·res_y, north - row·res_y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageFrame<T> {
    pub zone: u8,
    pub west: T,
    pub north: T,
    pub res_x: T,
    pub res_y: T,
    pub width: u32,
    pub height: u32,
}

impl<T: Real> ImageFrame<T> {
    pub fn pixel_center(&self, col: u32, row: u32) -> Utm<T> {
        let half = T::lit(0.5);
        Utm {
            zone: self.zone,
            easting: self.west + (T::lit(f64::from(col)) + half) * self.res_x,
            northing: self.north - (T::lit(f64::from(row)) + half) * self.res_y,
        }
    }

    pub fn east(&self) -> T {
        self.west + T::lit(f64::from(self.width)) * self.res_x
    }

    pub fn south(&self) -> T {
        self.north - T::lit(f64::from(self.height)) * self.res_y
    }
}

fn check_image_size(width: u32, height: u32) -> Result<()> {
    for (name, v) in [("width", width), ("height", height)] {
        if !(MIN_IMAGE_PX..=MAX_IMAGE_PX).contains(&v) {
            return Err(Error::validation(name, format!("{name} {v} outside [{MIN_IMAGE_PX}, {MAX_IMAGE_PX}]")));
        }
    }
    Ok(())
}

/// Global pixel column/row (row counted northward) to area coordinate.
fn area_coordinate<T: Real>(
    tm: &TransverseMercator<T>,
    theme: Theme,
    scale: Scale,
    scene: Scene,
    col: i64,
    row: i64,
) -> Result<AreaCoordinate<T>> {
    let size = i64::from(TILE_SIZE);
    if col < 0 || row < 0 {
        return Err(Error::domain("center", "image extends beyond the zone's grid origin"));
    }
    let id = TileId::new(theme, scale, scene, (col / size) as u32, (row / size) as u32);
    let tile_meta = tile_meta(&id)?;
    let r = scale.meters_per_pixel::<T>();
    let half = T::lit(0.5);
    let center =
        Utm { zone: scene.zone(), easting: (T::lit(col as f64) + half) * r, northing: (T::lit(row as f64) + half) * r };
    Ok(AreaCoordinate {
        tile_meta,
        offset: LonLatPtOffset {
            point: project_inverse(tm, center),
            x_offset: (col % size) as u32,
            y_offset: (size - 1 - row % size) as u32,
        },
    })
}

/// Area description for an image whose top-left corner sits on the global
/// pixel lattice at column `west_col` and whose top edge is at lattice row
/// `north_row` (rows count northward from the equator, so the top pixel row
/// is `north_row - 1`). No size limits are applied.
pub fn area_from_lattice<T: Real>(
    theme: Theme,
    scale: Scale,
    scene: Scene,
    west_col: i64,
    north_row: i64,
    width: u32,
    height: u32,
) -> Result<AreaBoundingBox<T>> {
    if width == 0 || height == 0 {
        return Err(Error::validation("width", "image must be at least one pixel"));
    }
    let tm = TransverseMercator::<T>::utm();
    let w = i64::from(width);
    let h = i64::from(height);
    let top = north_row - 1;
    let bottom = north_row - h;
    let east = west_col + w - 1;
    let at = |col, row| area_coordinate(&tm, theme, scale, scene, col, row);
    Ok(AreaBoundingBox {
        north_west: at(west_col, top)?,
        north_east: at(east, top)?,
        south_west: at(west_col, bottom)?,
        south_east: at(east, bottom)?,
        center: at(west_col + w / 2, top - h / 2)?,
        nearest_place: None,
    })
}

/// Area for a `width × height` image at `scale` centered on a UTM point.
///
/// The image covers `[cE - W·r/2, cE + W·r/2) × [cN - H·r/2, cN + H·r/2)`,
/// snapped to the nearest pixel boundary of the scale's lattice so that all
/// crop offsets are whole pixels. Each corner names the tile containing the
/// center of that corner pixel; the center coordinate names pixel `(W/2, H/2)`.
pub fn area_from_utm<T: Real>(
    theme: Theme,
    scale: Scale,
    center: Utm<T>,
    width: u32,
    height: u32,
) -> Result<AreaBoundingBox<T>> {
    check_image_size(width, height)?;
    let scene = Scene::new(center.zone)?.require_served()?;
    let r = scale.meters_per_pixel::<T>();
    let half = T::lit(0.5);
    let west = center.easting / r - T::lit(f64::from(width)) * half;
    let north = center.northing / r + T::lit(f64::from(height)) * half;
    let west_col = (west + half).floor().as_f64() as i64;
    let north_row = (north + half).floor().as_f64() as i64;
    area_from_lattice(theme, scale, scene, west_col, north_row, width, height)
}

/// Area for an image centered on a geographic point.
pub fn area_from_lon_lat<T: Real>(
    theme: Theme,
    scale: Scale,
    center: LonLat<T>,
    width: u32,
    height: u32,
) -> Result<AreaBoundingBox<T>> {
    check_image_size(width, height)?;
    let utm = lon_lat_to_utm(center, None)?;
    if !Scene::new(utm.zone)?.is_served() {
        return Err(Error::domain(
            "lon",
            format!("point falls in UTM zone {}, outside the served zones 3-20", utm.zone),
        ));
    }
    area_from_utm(theme, scale, utm, width, height)
}
