//! Stateless HTTP service over a tile store and gazetteer.
//!
//! Method endpoints answer with JSON (PascalCase field names, mirroring the
//! original web-method payloads); `GetTile`, `OgcMap` and `GetImageArea`
//! answer with image bytes. Parameter names are case-insensitive.

pub mod config;
pub mod error;
pub mod http;
pub mod params;
pub mod service;
pub mod wms;

pub use config::ServiceConfig;
pub use error::{ErrorCode, ServiceError};
pub use params::Params;
pub use service::{Reply, Service, ENDPOINTS};
