//! Image composition from tiles.

mod draw;
mod rescale;
mod text;

use image::{Rgb, RgbImage};

pub use draw::{
    blend_pixel, choose_geo_spacing, choose_utm_spacing, decorate, draw_border, draw_geo_grid, draw_grid, draw_logo,
    draw_utm_grid, utm_grid_positions, Argb, GridStyle, RenderStyle, LOGO_HEIGHT, LOGO_MARGIN, LOGO_WIDTH,
};
pub use rescale::{resample_region, rescale};
pub use text::{draw_text, message_image, text_width, GLYPH_SIZE};

use crate::area::AreaBoundingBox;
use crate::codec::decode_any;
use crate::error::{Error, Result};
use crate::grid::{TileId, TILE_SIZE};
use crate::real::Real;

/// An 8-bit RGB raster.
pub type Canvas = RgbImage;

/// Fill for tiles that do not exist (shared with the pyramid builder).
pub const FILL_GRAY: u8 = 128;

pub fn blank_canvas(width: u32, height: u32, gray: u8) -> Canvas {
    RgbImage::from_pixel(width, height, Rgb([gray; 3]))
}

/// Copies `tile` onto `canvas` with its top-left corner at `(dx, dy)`,
/// clipping to the canvas.
fn blit(canvas: &mut Canvas, tile: &RgbImage, dx: i64, dy: i64) {
    let (cw, ch) = (i64::from(canvas.width()), i64::from(canvas.height()));
    let (tw, th) = (i64::from(tile.width()), i64::from(tile.height()));
    let x0 = dx.max(0);
    let y0 = dy.max(0);
    let x1 = (dx + tw).min(cw);
    let y1 = (dy + th).min(ch);
    for y in y0..y1 {
        for x in x0..x1 {
            let px = *tile.get_pixel((x - dx) as u32, (y - dy) as u32);
            canvas.put_pixel(x as u32, y as u32, px);
        }
    }
}

fn fill(canvas: &mut Canvas, dx: i64, dy: i64, size: i64, gray: u8) {
    let (cw, ch) = (i64::from(canvas.width()), i64::from(canvas.height()));
    for y in dy.max(0)..(dy + size).min(ch) {
        for x in dx.max(0)..(dx + size).min(cw) {
            canvas.put_pixel(x as u32, y as u32, Rgb([gray; 3]));
        }
    }
}

/// Builds the image an [`AreaBoundingBox`] describes.
///
/// Columns run from the north-west tile to the north-east tile and, within
/// each column, rows run from the north-west tile's row down to the
/// south-west tile's row. Tile `(x, y)` lands at
/// `((x - xStart)·200 - xOffset, (yStart - y)·200 - yOffset)`, so the
/// north-west offsets crop the left and top edges and the canvas size
/// crops the right and bottom. Each tile is fetched exactly once;
/// `fetch` returning `None` leaves that tile's square mid-gray.
pub fn compose_area<T, F>(abb: &AreaBoundingBox<T>, mut fetch: F) -> Result<Canvas>
where
    T: Real,
    F: FnMut(&TileId) -> Result<Option<Vec<u8>>>,
{
    let (width, height) = abb.image_size();
    let mut canvas = blank_canvas(width, height, FILL_GRAY);

    let start = abb.north_west.tile_meta.id;
    let x_end = abb.north_east.tile_meta.id.x;
    let y_end = abb.south_west.tile_meta.id.y;
    let x_off = i64::from(abb.north_west.offset.x_offset);
    let y_off = i64::from(abb.north_west.offset.y_offset);
    let size = i64::from(TILE_SIZE);

    for x in start.x..=x_end {
        for y in (y_end..=start.y).rev() {
            let id = start.with_xy(x, y);
            let dx = (i64::from(x) - i64::from(start.x)) * size - x_off;
            let dy = (i64::from(start.y) - i64::from(y)) * size - y_off;
            match fetch(&id)? {
                Some(bytes) => {
                    let tile = decode_any(&bytes).map_err(|e| Error::Render { tile: id, message: e.to_string() })?;
                    if tile.dimensions() != (TILE_SIZE, TILE_SIZE) {
                        return Err(Error::Render {
                            tile: id,
                            message: format!("tile is {}x{}, expected 200x200", tile.width(), tile.height()),
                        });
                    }
                    blit(&mut canvas, &tile, dx, dy);
                }
                None => fill(&mut canvas, dx, dy, size, FILL_GRAY),
            }
        }
    }
    Ok(canvas)
}
