use image::{Rgb, RgbImage};

use crate::grid::{TileId, TILE_SIZE};
use crate::mosaic::FILL_GRAY;

/// The four children of `parent` in the order top-left, top-right,
/// bottom-left, bottom-right. Rows grow northward, so the top pair has
/// the odd row.
pub(crate) fn child_ids(parent: &TileId) -> [TileId; 4] {
    let scale = parent.scale.finer().expect("parent has a finer scale");
    let (x, y) = (parent.x * 2, parent.y * 2);
    let child = |x, y| TileId { scale, x, y, ..*parent };
    [child(x, y + 1), child(x + 1, y + 1), child(x, y), child(x + 1, y)]
}

/// Halves an image with a 2×2 box mean, rounding half up.
pub fn downsample_box(src: &RgbImage) -> RgbImage {
    let (w, h) = (src.width() / 2, src.height() / 2);
    RgbImage::from_fn(w, h, |x, y| {
        let mut out = [0u8; 3];
        for (c, v) in out.iter_mut().enumerate() {
            let sum: u32 = [(0, 0), (1, 0), (0, 1), (1, 1)]
                .iter()
                .map(|&(dx, dy)| u32::from(src.get_pixel(2 * x + dx, 2 * y + dy).0[c]))
                .sum();
            *v = ((sum + 2) / 4) as u8;
        }
        Rgb(out)
    })
}

/// Parent tile from up to four children in [`child_ids`] order. Missing
/// children contribute fill gray.
pub(crate) fn assemble_parent(children: &[Option<RgbImage>; 4]) -> RgbImage {
    let mut block = RgbImage::from_pixel(2 * TILE_SIZE, 2 * TILE_SIZE, Rgb([FILL_GRAY; 3]));
    let origins = [(0, 0), (TILE_SIZE, 0), (0, TILE_SIZE), (TILE_SIZE, TILE_SIZE)];
    for (child, (ox, oy)) in children.iter().zip(origins) {
        if let Some(img) = child {
            image::imageops::replace(&mut block, img, i64::from(ox), i64::from(oy));
        }
    }
    downsample_box(&block)
}
