//! Tile pyramid imagery core.
//!
//! Geometry and projection code is generic over [`Real`] (`f32` or `f64`);
//! the aliases below fix the `f64` variants used on the wire.

pub mod area;
pub mod codec;
pub mod coords;
pub mod error;
pub mod gazetteer;
pub mod grid;
pub mod mosaic;
pub mod projection;
mod real;
pub mod store;

pub use error::{Error, Result};
pub use real::Real;

pub type LonLatPt = coords::LonLat<f64>;
pub type UtmPt = coords::Utm<f64>;
pub type UtmRect = coords::UtmBox<f64>;

pub type LonLatPtF32 = coords::LonLat<f32>;
pub type UtmPtF32 = coords::Utm<f32>;
pub type UtmRectF32 = coords::UtmBox<f32>;
