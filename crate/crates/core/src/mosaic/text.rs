use font8x8::{UnicodeFonts, BASIC_FONTS};
use image::Rgb;

use super::draw::{blend_pixel, Argb};
use super::Canvas;

/// Glyph cell edge in pixels (before scaling).
pub const GLYPH_SIZE: u32 = 8;

pub fn text_width(text: &str, scale: u32) -> u32 {
    text.chars().count() as u32 * GLYPH_SIZE * scale
}

/// Draws `text` with its top-left corner at `(x, y)` using the built-in
/// 8×8 bitmap font. Characters without a glyph render as `?`.
pub fn draw_text(canvas: &mut Canvas, x: i64, y: i64, text: &str, color: Argb, scale: u32) {
    let scale = scale.max(1);
    let cell = i64::from(GLYPH_SIZE * scale);
    let (w, h) = (i64::from(canvas.width()), i64::from(canvas.height()));
    for (i, ch) in text.chars().enumerate() {
        let glyph = BASIC_FONTS.get(ch).or_else(|| BASIC_FONTS.get('?')).unwrap_or([0; 8]);
        let gx = x + i as i64 * cell;
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..8 {
                if bits & (1 << col) == 0 {
                    continue;
                }
                for sy in 0..i64::from(scale) {
                    for sx in 0..i64::from(scale) {
                        let px = gx + col * i64::from(scale) + sx;
                        let py = y + row as i64 * i64::from(scale) + sy;
                        if (0..w).contains(&px) && (0..h).contains(&py) {
                            blend_pixel(canvas, px as u32, py as u32, color);
                        }
                    }
                }
            }
        }
    }
}

fn wrap(message: &str, max_chars: usize) -> Vec<String> {
    let max_chars = max_chars.max(1);
    let mut lines = Vec::new();
    let mut line = String::new();
    for word in message.split_whitespace() {
        let mut word = word.to_string();
        while word.chars().count() > max_chars {
            if !line.is_empty() {
                lines.push(std::mem::take(&mut line));
            }
            let head: String = word.chars().take(max_chars).collect();
            word = word.chars().skip(max_chars).collect();
            lines.push(head);
        }
        let needed = if line.is_empty() { word.len() } else { line.len() + 1 + word.len() };
        if needed > max_chars && !line.is_empty() {
            lines.push(std::mem::take(&mut line));
        }
        if !line.is_empty() {
            line.push(' ');
        }
        line.push_str(&word);
    }
    if !line.is_empty() {
        lines.push(line);
    }
    lines
}

/// White image of the given size with `message` word-wrapped in black
/// from the top-left, 4 px margin.
pub fn message_image(width: u32, height: u32, message: &str) -> Canvas {
    let mut canvas = Canvas::from_pixel(width.max(1), height.max(1), Rgb([255; 3]));
    let margin = 4u32;
    let max_chars = (width.saturating_sub(2 * margin) / GLYPH_SIZE) as usize;
    let black = Argb::opaque(0, 0, 0);
    for (i, line) in wrap(message, max_chars).iter().enumerate() {
        let y = i64::from(margin) + i as i64 * i64::from(GLYPH_SIZE + 2);
        if y >= i64::from(height) {
            break;
        }
        draw_text(&mut canvas, i64::from(margin), y, line, black, 1);
    }
    canvas
}
