//! A small synthetic world for integration tests: an 8×8-tile DOQ and DRG
//! coverage around downtown San Francisco at 1 m/px, its pyramid, and the
//! bundled gazetteer.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::{Rgb, RgbImage};
use terra_core::gazetteer::Gazetteer;
use terra_core::grid::{Scale, Theme};
use terra_core::store::{RasterPlacement, TileStore};
use terra_service::http::BackgroundServer;
use terra_service::Service;

pub const ZONE: u8 = 10;
/// South-west corner of the base coverage; tile (2752, 20904) at scale 10.
pub const ORIGIN_EASTING: f64 = 550_400.0;
pub const ORIGIN_NORTHING: f64 = 4_180_800.0;
pub const BASE_TILES: u32 = 8;
pub const BASE_X: u32 = 2752;
pub const BASE_Y: u32 = 20904;
pub const CAPTURE_DATE: &str = "1993-06-14";

/// Center of the 600×400 scale-10 scenario, in zone 10.
pub const SCENARIO_EASTING: f64 = 551_000.0;
pub const SCENARIO_NORTHING: f64 = 4_181_050.0;

pub const SF_LON: f64 = -122.4194;
pub const SF_LAT: f64 = 37.7749;

pub fn places_csv() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/places.csv")
}

/// Deterministic texture with enough structure that any misplaced pixel
/// shows up.
pub fn base_raster(theme: Theme) -> RgbImage {
    let n = BASE_TILES * 200;
    let salt = u32::from(theme.code()) * 37;
    RgbImage::from_fn(n, n, |x, y| {
        Rgb([((x + salt) % 256) as u8, ((y * 3 + salt) % 256) as u8, ((x ^ y).wrapping_mul(7) % 251) as u8])
    })
}

pub fn placement() -> RasterPlacement {
    RasterPlacement {
        zone: ZONE,
        origin_easting: ORIGIN_EASTING,
        origin_northing: ORIGIN_NORTHING,
        base_scale: Scale::new(10).expect("scale 10"),
        capture_date: CAPTURE_DATE.parse().expect("date"),
    }
}

/// Fills `root` with both themes and their pyramids.
pub fn populate(root: &Path, lossless: bool) -> TileStore {
    let store = TileStore::open_or_create(root, lossless).expect("create store");
    for theme in Theme::ALL {
        store.ingest_raster(&base_raster(theme), &placement(), theme).expect("ingest");
        store.build_pyramid(theme, None).expect("pyramid");
    }
    store
}

pub struct Fixture {
    dir: tempfile::TempDir,
    pub service: Arc<Service>,
}

impl Fixture {
    /// A lossless store served in test mode (PNG output).
    pub fn new() -> Fixture {
        Fixture::with_mode(true)
    }

    pub fn with_mode(lossless: bool) -> Fixture {
        let dir = tempfile::tempdir().expect("tempdir");
        let store = populate(&dir.path().join("store"), lossless);
        let gazetteer = Gazetteer::new();
        gazetteer.load_file(places_csv()).expect("gazetteer");
        let service = Service::new(Arc::new(store), Arc::new(gazetteer), lossless);
        Fixture { dir, service: Arc::new(service) }
    }

    pub fn store_root(&self) -> PathBuf {
        self.dir.path().join("store")
    }

    pub fn scratch(&self) -> &Path {
        self.dir.path()
    }

    pub fn serve(&self) -> BackgroundServer {
        BackgroundServer::start(Arc::clone(&self.service), "127.0.0.1:0").expect("start server")
    }
}

impl Default for Fixture {
    fn default() -> Self {
        Fixture::new()
    }
}
