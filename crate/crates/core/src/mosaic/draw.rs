use std::fmt;
use std::str::FromStr;

use image::Rgb;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::text::draw_text;
use super::Canvas;
use crate::area::ImageFrame;
use crate::error::{Error, Result};
use crate::grid::{Scale, TILE_SIZE};
use crate::projection::{central_meridian, TransverseMercator};

/// Placeholder logo mark size and its inset from the bottom-right corner.
pub const LOGO_WIDTH: u32 = 48;
pub const LOGO_HEIGHT: u32 = 24;
pub const LOGO_MARGIN: u32 = 4;

/// Minimum on-screen spacing of automatically spaced grid lines.
const MIN_GRID_SPACING_PX: f64 = 100.0;

/// Metres per degree of latitude, for picking graticule spacing only.
const METERS_PER_DEGREE: f64 = 111_320.0;

/// Colour with alpha, written as eight hex digits `AARRGGBB`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Argb {
    pub a: u8,
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Argb {
    pub const fn new(a: u8, r: u8, g: u8, b: u8) -> Self {
        Argb { a, r, g, b }
    }

    pub const fn opaque(r: u8, g: u8, b: u8) -> Self {
        Argb { a: 0xFF, r, g, b }
    }
}

impl FromStr for Argb {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::validation("color", format!("{s:?} is not an 8-digit ARGB hex string")));
        }
        let v = u32::from_str_radix(s, 16).expect("validated hex");
        let [a, r, g, b] = v.to_be_bytes();
        Ok(Argb { a, r, g, b })
    }
}

impl fmt::Display for Argb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02X}{:02X}{:02X}{:02X}", self.a, self.r, self.g, self.b)
    }
}

impl Serialize for Argb {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Argb {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// `out = α·color + (1 − α)·under`, α = a / 255, rounded to nearest.
pub fn blend_pixel(canvas: &mut Canvas, x: u32, y: u32, color: Argb) {
    let under = canvas.get_pixel(x, y).0;
    let alpha = u32::from(color.a);
    let mix = |top: u8, bottom: u8| -> u8 {
        ((alpha * u32::from(top) + (255 - alpha) * u32::from(bottom) + 127) / 255) as u8
    };
    canvas.put_pixel(x, y, Rgb([mix(color.r, under[0]), mix(color.g, under[1]), mix(color.b, under[2])]));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GridStyle {
    #[default]
    None,
    UtmGrid,
    GeoGrid,
}

impl FromStr for GridStyle {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("blank") || s.eq_ignore_ascii_case("default") {
            Ok(GridStyle::None)
        } else if s.eq_ignore_ascii_case("UtmGrid") {
            Ok(GridStyle::UtmGrid)
        } else if s.eq_ignore_ascii_case("GeoGrid") {
            Ok(GridStyle::GeoGrid)
        } else {
            Err(Error::validation("styles", format!("unknown style {s:?}; expected blank, UtmGrid or GeoGrid")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderStyle {
    pub grid_style: GridStyle,
    pub grid_width_px: u32,
    pub grid_color: Argb,
    pub border_width_px: u32,
    pub border_color: Argb,
    /// Accepted for compatibility; text always uses the built-in bitmap font.
    pub font_name: String,
    pub font_color: Argb,
    pub logo: bool,
    /// Debug aid: outline the source tiles.
    pub tile_boundaries: bool,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle {
            grid_style: GridStyle::None,
            grid_width_px: 1,
            grid_color: Argb::opaque(255, 255, 255),
            border_width_px: 0,
            border_color: Argb::opaque(0, 0, 0),
            font_name: "Arial".to_string(),
            font_color: Argb::opaque(0, 0, 0),
            logo: false,
            tile_boundaries: false,
        }
    }
}

/// Smallest `{1, 2, 5}·10^k` at least `minimum`.
fn nice_step(minimum: f64) -> f64 {
    let mut magnitude = 10f64.powf(minimum.log10().floor() - 1.0);
    loop {
        for m in [1.0, 2.0, 5.0] {
            let step = m * magnitude;
            if step >= minimum * (1.0 - 1e-12) {
                return step;
            }
        }
        magnitude *= 10.0;
    }
}

/// Grid spacing in metres: smallest `{1,2,5}·10^k` at least 100 px apart.
pub fn choose_utm_spacing(frame: &ImageFrame<f64>) -> f64 {
    nice_step(MIN_GRID_SPACING_PX * frame.res_x.max(frame.res_y))
}

/// Graticule spacing in degrees, chosen the same way.
pub fn choose_geo_spacing(frame: &ImageFrame<f64>, center_lat: f64) -> f64 {
    let cos_lat = center_lat.to_radians().cos().max(0.05);
    nice_step(MIN_GRID_SPACING_PX * frame.res_x.max(frame.res_y) / (METERS_PER_DEGREE * cos_lat))
}

/// First pixel index of a line `width` pixels thick centered on `pos`.
fn line_start(pos: i64, width: u32) -> i64 {
    pos - (i64::from(width) - 1) / 2
}

fn paint_column(canvas: &mut Canvas, col: i64, width: u32, color: Argb) {
    let start = line_start(col, width);
    for c in start..start + i64::from(width) {
        if (0..i64::from(canvas.width())).contains(&c) {
            for r in 0..canvas.height() {
                blend_pixel(canvas, c as u32, r, color);
            }
        }
    }
}

fn paint_row(canvas: &mut Canvas, row: i64, width: u32, color: Argb) {
    let start = line_start(row, width);
    for r in start..start + i64::from(width) {
        if (0..i64::from(canvas.height())).contains(&r) {
            for c in 0..canvas.width() {
                blend_pixel(canvas, c, r as u32, color);
            }
        }
    }
}

/// Canvas columns and rows of UTM grid lines `spacing` metres apart.
///
/// A vertical line at easting `e ∈ [west, east)` occupies column
/// `floor((e − west) / res_x)`; a horizontal line at northing
/// `n ∈ (south, north]` occupies row `floor((north − n) / res_y)`.
pub fn utm_grid_positions(frame: &ImageFrame<f64>, spacing: f64) -> (Vec<i64>, Vec<i64>) {
    let mut cols = Vec::new();
    let mut k = (frame.west / spacing).ceil();
    while k * spacing < frame.east() {
        cols.push(((k * spacing - frame.west) / frame.res_x).floor() as i64);
        k += 1.0;
    }
    let mut rows = Vec::new();
    let mut k = (frame.north / spacing).floor();
    while k * spacing > frame.south() {
        rows.push(((frame.north - k * spacing) / frame.res_y).floor() as i64);
        k -= 1.0;
    }
    (cols, rows)
}

pub fn draw_utm_grid(canvas: &mut Canvas, frame: &ImageFrame<f64>, spacing: f64, width: u32, color: Argb) {
    if width == 0 || spacing <= 0.0 {
        return;
    }
    let (cols, rows) = utm_grid_positions(frame, spacing);
    for c in cols {
        paint_column(canvas, c, width, color);
    }
    for r in rows {
        paint_row(canvas, r, width, color);
    }
}

/// Lon/lat graticule. A pixel is on a meridian when the next pixel to its
/// right lies across a multiple of `spacing` degrees of longitude, and on a
/// parallel likewise for the pixel below it and latitude. Geographic
/// coordinates are computed exactly on an 8-pixel lattice and bilinearly
/// interpolated in between.
pub fn draw_geo_grid(canvas: &mut Canvas, frame: &ImageFrame<f64>, spacing: f64, width: u32, color: Argb) {
    if width == 0 || spacing <= 0.0 {
        return;
    }
    const STEP: u32 = 8;
    let (w, h) = (frame.width, frame.height);
    let tm = TransverseMercator::<f64>::utm();
    let cm = central_meridian::<f64>(frame.zone);
    let nx = w.div_ceil(STEP) + 2;
    let ny = h.div_ceil(STEP) + 2;
    let mut lattice = Vec::with_capacity((nx * ny) as usize);
    for j in 0..ny {
        for i in 0..nx {
            let e = frame.west + (f64::from(i * STEP) + 0.5) * frame.res_x;
            let n = frame.north - (f64::from(j * STEP) + 0.5) * frame.res_y;
            let (dlon, lat) = tm.inverse_radians(e, n.max(0.0));
            lattice.push((cm + dlon.to_degrees(), lat.to_degrees()));
        }
    }
    let geo = |c: u32, r: u32| -> (f64, f64) {
        let (i, fx) = (c / STEP, f64::from(c % STEP) / f64::from(STEP));
        let (j, fy) = (r / STEP, f64::from(r % STEP) / f64::from(STEP));
        let at = |i: u32, j: u32| lattice[(j * nx + i) as usize];
        let (a, b, cc, d) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
        let lerp = |p: f64, q: f64, t: f64| p + (q - p) * t;
        (lerp(lerp(a.0, b.0, fx), lerp(cc.0, d.0, fx), fy), lerp(lerp(a.1, b.1, fx), lerp(cc.1, d.1, fx), fy))
    };
    let band = |v: f64| (v / spacing).floor() as i64;
    let mut mask = vec![false; (w * h) as usize];
    for r in 0..h {
        for c in 0..w {
            let (lon, lat) = geo(c, r);
            let (lon_right, _) = geo(c + 1, r);
            let (_, lat_below) = geo(c, r + 1);
            if band(lon) != band(lon_right) {
                let start = line_start(i64::from(c), width);
                for cc in start.max(0)..(start + i64::from(width)).min(i64::from(w)) {
                    mask[(r * w) as usize + cc as usize] = true;
                }
            }
            if band(lat) != band(lat_below) {
                let start = line_start(i64::from(r), width);
                for rr in start.max(0)..(start + i64::from(width)).min(i64::from(h)) {
                    mask[rr as usize * w as usize + c as usize] = true;
                }
            }
        }
    }
    for (idx, on) in mask.iter().enumerate() {
        if *on {
            blend_pixel(canvas, idx as u32 % w, idx as u32 / w, color);
        }
    }
}

/// Draws the grid the style asks for, with automatic spacing.
/// A zero grid width draws nothing.
pub fn draw_grid(canvas: &mut Canvas, frame: &ImageFrame<f64>, style: &RenderStyle) {
    if style.grid_width_px == 0 {
        return;
    }
    match style.grid_style {
        GridStyle::None => {}
        GridStyle::UtmGrid => {
            let spacing = choose_utm_spacing(frame);
            draw_utm_grid(canvas, frame, spacing, style.grid_width_px, style.grid_color);
        }
        GridStyle::GeoGrid => {
            let tm = TransverseMercator::<f64>::utm();
            let mid_n = (frame.north + frame.south()) / 2.0;
            let (_, lat) = tm.inverse_radians((frame.west + frame.east()) / 2.0, mid_n.max(0.0));
            let spacing = choose_geo_spacing(frame, lat.to_degrees());
            draw_geo_grid(canvas, frame, spacing, style.grid_width_px, style.grid_color);
        }
    }
}

pub fn draw_border(canvas: &mut Canvas, width: u32, color: Argb) {
    if width == 0 {
        return;
    }
    let (w, h) = canvas.dimensions();
    for y in 0..h {
        for x in 0..w {
            if x < width || y < width || x + width >= w || y + width >= h {
                blend_pixel(canvas, x, y, color);
            }
        }
    }
}

/// Placeholder mark in the bottom-right corner: a translucent white box
/// with a one-pixel outline and a short caption in `color`.
pub fn draw_logo(canvas: &mut Canvas, color: Argb) {
    let (w, h) = canvas.dimensions();
    if w < LOGO_WIDTH + LOGO_MARGIN || h < LOGO_HEIGHT + LOGO_MARGIN {
        return;
    }
    let x0 = w - LOGO_MARGIN - LOGO_WIDTH;
    let y0 = h - LOGO_MARGIN - LOGO_HEIGHT;
    let backing = Argb::new(0xC0, 255, 255, 255);
    for y in y0..y0 + LOGO_HEIGHT {
        for x in x0..x0 + LOGO_WIDTH {
            let edge = x == x0 || y == y0 || x == x0 + LOGO_WIDTH - 1 || y == y0 + LOGO_HEIGHT - 1;
            blend_pixel(canvas, x, y, if edge { color } else { backing });
        }
    }
    draw_text(canvas, i64::from(x0 + 4), i64::from(y0 + 8), "TERRA", color, 1);
}

/// Grid, tile outlines, border and logo, in that order.
pub fn decorate(canvas: &mut Canvas, frame: &ImageFrame<f64>, scale: Option<Scale>, style: &RenderStyle) {
    draw_grid(canvas, frame, style);
    if style.tile_boundaries {
        if let Some(scale) = scale {
            let span = f64::from(TILE_SIZE) * scale.meters_per_pixel::<f64>();
            draw_utm_grid(canvas, frame, span, 1, Argb::opaque(255, 255, 0));
        }
    }
    draw_border(canvas, style.border_width_px, style.border_color);
    if style.logo {
        draw_logo(canvas, style.font_color);
    }
}
