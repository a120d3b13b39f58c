//! Tile persistence.
//!
//! Tiles live in a directory tree `<root>/<theme>/<scale>/<scene>/<x>/<y>.<ext>`
//! next to a single `manifest.json` that lists every tile. A tile is only
//! visible once the manifest names it, and the manifest is replaced by an
//! atomic rename, so each write operation either fully lands or leaves the
//! store as it was.

mod manifest;
mod pyramid;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use manifest::{Coverage, Manifest, TileRecord, MANIFEST_FILE};
pub use pyramid::downsample_box;

use crate::area::{tile_meta, CaptureDate, TileMeta};
use crate::codec::{decode, encode, Encoding};
use crate::error::{Error, Result};
use crate::grid::{Scale, Scene, Theme, TileId, TILE_SIZE};

/// Encoded tile bytes with their key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileBlob {
    pub id: TileId,
    pub encoding: Encoding,
    pub bytes: Vec<u8>,
}

/// Storage encoding policy: 2, 8 and 32 m topo tiles are GIF, everything
/// else JPEG. Lossless stores use PNG throughout.
pub fn encoding_for(theme: Theme, scale: Scale, lossless: bool) -> Encoding {
    if lossless {
        Encoding::Png
    } else if theme == Theme::Drg && matches!(scale.code(), 11 | 13 | 15) {
        Encoding::Gif
    } else {
        Encoding::Jpeg
    }
}

/// Where an ingested raster sits on the ground. The origin is the raster's
/// south-west corner and must fall on a tile boundary of `base_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterPlacement {
    pub zone: u8,
    pub origin_easting: f64,
    pub origin_northing: f64,
    pub base_scale: Scale,
    #[serde(default)]
    pub capture_date: CaptureDate,
}

impl RasterPlacement {
    /// Reads a TOML placement sidecar.
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::validation("placement", e.to_string()))
    }

    /// Column and row of the tile holding the raster's south-west corner.
    fn origin_tile(&self) -> Result<(u32, u32)> {
        let span: f64 = self.base_scale.tile_span();
        let ix = self.origin_easting / span;
        let iy = self.origin_northing / span;
        if !(ix.is_finite() && iy.is_finite()) || ix < 0.0 || iy < 0.0 {
            return Err(Error::validation("placement", "origin must be non-negative"));
        }
        if ix.fract() != 0.0 || iy.fract() != 0.0 {
            return Err(Error::validation(
                "placement",
                format!(
                    "origin ({}, {}) is not aligned to the {span} m tile grid",
                    self.origin_easting, self.origin_northing
                ),
            ));
        }
        Ok((ix as u32, iy as u32))
    }
}

/// Staged writes applied as a unit by [`TileStore::commit`].
#[derive(Default)]
struct Batch {
    tiles: Vec<(TileBlob, CaptureDate)>,
}

pub struct TileStore {
    root: PathBuf,
    manifest: RwLock<Arc<Manifest>>,
    writer: Mutex<()>,
}

impl std::fmt::Debug for TileStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TileStore").field("root", &self.root).finish_non_exhaustive()
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!("{}.tmp", path.extension().and_then(|e| e.to_str()).unwrap_or("")));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

impl TileStore {
    /// Opens the store at `root`, creating an empty one when no manifest
    /// exists yet. `lossless` only applies to newly created stores.
    pub fn open_or_create(root: impl Into<PathBuf>, lossless: bool) -> Result<Self> {
        let root = root.into();
        if root.join(MANIFEST_FILE).exists() {
            return Self::open(root);
        }
        fs::create_dir_all(&root)?;
        let manifest = Manifest::new(lossless);
        write_atomic(&root.join(MANIFEST_FILE), manifest.to_json()?.as_bytes())?;
        Ok(TileStore { root, manifest: RwLock::new(Arc::new(manifest)), writer: Mutex::new(()) })
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let text = fs::read_to_string(root.join(MANIFEST_FILE))?;
        let manifest = Manifest::from_json(&text)?;
        Ok(TileStore { root, manifest: RwLock::new(Arc::new(manifest)), writer: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> Arc<Manifest> {
        self.manifest.read().expect("manifest lock poisoned").clone()
    }

    pub fn is_lossless(&self) -> bool {
        self.manifest().lossless
    }

    pub fn encoding_for(&self, theme: Theme, scale: Scale) -> Encoding {
        encoding_for(theme, scale, self.is_lossless())
    }

    /// SHA-256 of the manifest file as stored on disk, hex encoded.
    pub fn manifest_digest(&self) -> Result<String> {
        let bytes = fs::read(self.root.join(MANIFEST_FILE))?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn tile_path(&self, id: &TileId, encoding: Encoding) -> PathBuf {
        self.root
            .join(id.theme.code().to_string())
            .join(id.scale.code().to_string())
            .join(id.scene.zone().to_string())
            .join(id.x.to_string())
            .join(format!("{}.{}", id.y, encoding.extension()))
    }

    fn check_blob(&self, blob: &TileBlob) -> Result<()> {
        let expected = self.encoding_for(blob.id.theme, blob.id.scale);
        if blob.encoding != expected {
            return Err(Error::validation(
                "encoding",
                format!("tile {} must be stored as {expected}, got {}", blob.id, blob.encoding),
            ));
        }
        let img = decode(&blob.bytes, blob.encoding)
            .map_err(|e| Error::validation("bytes", format!("tile {} does not decode: {e}", blob.id)))?;
        if img.dimensions() != (TILE_SIZE, TILE_SIZE) {
            return Err(Error::validation(
                "bytes",
                format!("tile {} is {}x{}, expected 200x200", blob.id, img.width(), img.height()),
            ));
        }
        Ok(())
    }

    /// Writes every staged tile, then publishes them with one manifest
    /// update. Any failure restores the files it touched.
    fn commit(&self, batch: Batch) -> Result<usize> {
        let _guard = self.writer.lock().expect("store writer lock poisoned");
        let current = self.manifest();
        let mut next = (*current).clone();

        // (path, previous bytes) for rollback
        let mut touched: Vec<(PathBuf, Option<Vec<u8>>)> = Vec::new();
        let result = (|| -> Result<()> {
            for (blob, date) in &batch.tiles {
                let path = self.tile_path(&blob.id, blob.encoding);
                let previous = match fs::read(&path) {
                    Ok(b) => Some(b),
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
                    Err(e) => return Err(e.into()),
                };
                touched.push((path.clone(), previous));
                write_atomic(&path, &blob.bytes)?;
                next.tiles.insert(blob.id, TileRecord { encoding: blob.encoding, capture_date: *date });
            }
            write_atomic(&self.root.join(MANIFEST_FILE), next.to_json()?.as_bytes())
        })();

        match result {
            Ok(()) => {
                let count = batch.tiles.len();
                *self.manifest.write().expect("manifest lock poisoned") = Arc::new(next);
                Ok(count)
            }
            Err(err) => {
                for (path, previous) in touched.into_iter().rev() {
                    let restored = match previous {
                        Some(bytes) => write_atomic(&path, &bytes),
                        None => fs::remove_file(&path)
                            .or_else(|e| if e.kind() == std::io::ErrorKind::NotFound { Ok(()) } else { Err(e) })
                            .map_err(Error::from),
                    };
                    if let Err(e) = restored {
                        log::error!("rollback of {} failed: {e}", path.display());
                    }
                }
                Err(err)
            }
        }
    }

    /// Stores one tile. The date of an existing tile is kept.
    pub fn put_tile(&self, blob: TileBlob) -> Result<()> {
        self.check_blob(&blob)?;
        let date = self.manifest().tiles.get(&blob.id).map(|r| r.capture_date).unwrap_or_default();
        self.put_tile_dated(blob, date)
    }

    pub fn put_tile_dated(&self, blob: TileBlob, capture_date: CaptureDate) -> Result<()> {
        self.check_blob(&blob)?;
        self.commit(Batch { tiles: vec![(blob, capture_date)] }).map(|_| ())
    }

    /// Stored bytes of a tile, unmodified.
    pub fn get_tile(&self, id: &TileId) -> Result<TileBlob> {
        let record = self.manifest().tiles.get(id).copied().ok_or_else(|| Error::NotFound(format!("tile {id}")))?;
        let bytes = fs::read(self.tile_path(id, record.encoding))?;
        Ok(TileBlob { id: *id, encoding: record.encoding, bytes })
    }

    /// Decoded pixels of a stored tile, `None` when absent.
    pub fn get_tile_pixels(&self, id: &TileId) -> Result<Option<RgbImage>> {
        match self.get_tile(id) {
            Ok(blob) => Ok(Some(decode(&blob.bytes, blob.encoding)?)),
            Err(Error::NotFound(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Tile geometry plus existence and capture date. Absent tiles still
    /// get geometry, with `tile_exists` false and an unknown date.
    pub fn tile_meta(&self, id: &TileId) -> Result<TileMeta> {
        let mut meta: TileMeta = tile_meta(id)?;
        self.decorate_meta(&mut meta);
        Ok(meta)
    }

    /// Fills `tile_exists` and `capture_date` of geometry-only metadata.
    pub fn decorate_meta<T>(&self, meta: &mut TileMeta<T>) {
        match self.manifest().tiles.get(&meta.id) {
            Some(rec) => {
                meta.tile_exists = true;
                meta.capture_date = rec.capture_date;
            }
            None => {
                meta.tile_exists = false;
                meta.capture_date = CaptureDate::Unknown;
            }
        }
    }

    pub fn tile_ids(&self) -> Vec<TileId> {
        self.manifest().tiles.keys().copied().collect()
    }

    /// Cuts a raster into 200×200 tiles at the placement's base scale.
    /// All tiles are written or none are.
    pub fn ingest_raster(&self, pixels: &RgbImage, placement: &RasterPlacement, theme: Theme) -> Result<usize> {
        let (w, h) = pixels.dimensions();
        if w == 0 || h == 0 || w % TILE_SIZE != 0 || h % TILE_SIZE != 0 {
            return Err(Error::validation(
                "raster",
                format!("raster is {w}x{h}; both sides must be positive multiples of 200"),
            ));
        }
        let scene = Scene::new(placement.zone)?;
        let (x0, y0) = placement.origin_tile()?;
        let cols = w / TILE_SIZE;
        let rows = h / TILE_SIZE;
        let encoding = self.encoding_for(theme, placement.base_scale);

        let mut batch = Batch::default();
        for j in 0..rows {
            for i in 0..cols {
                let tile =
                    image::imageops::crop_imm(pixels, i * TILE_SIZE, j * TILE_SIZE, TILE_SIZE, TILE_SIZE).to_image();
                let id = TileId::new(theme, placement.base_scale, scene, x0 + i, y0 + rows - 1 - j);
                let bytes = encode(&tile, encoding)?;
                batch.tiles.push((TileBlob { id, encoding, bytes }, placement.capture_date));
            }
        }
        self.commit(batch)
    }

    /// Reads a raster image (PNG, PPM, JPEG...) and its TOML placement
    /// sidecar, then ingests it.
    pub fn ingest_file(&self, raster: impl AsRef<Path>, sidecar: impl AsRef<Path>, theme: Theme) -> Result<usize> {
        let placement = RasterPlacement::from_toml_file(sidecar)?;
        let pixels = image::open(raster)?.into_rgb8();
        self.ingest_raster(&pixels, &placement, theme)
    }

    /// Builds scale `from + 1` from every tile at `from`, one parent per
    /// 2×2 block of children. Returns the number of parents written.
    pub fn build_pyramid_level(&self, theme: Theme, from: Scale) -> Result<usize> {
        let to = from
            .coarser()
            .ok_or_else(|| Error::validation("scale", format!("scale {} has no coarser level", from.code())))?;
        let manifest = self.manifest();
        let mut parents: BTreeMap<TileId, CaptureDate> = BTreeMap::new();
        for (id, rec) in manifest.tiles.range(..) {
            if id.theme == theme && id.scale == from {
                let parent = id.parent().expect("coarser scale exists");
                let date = parents.entry(parent).or_default();
                // latest known date among the children
                if let Some(d) = rec.capture_date.known() {
                    if date.known().is_none_or(|cur| d > cur) {
                        *date = CaptureDate::Known(d);
                    }
                }
            }
        }
        if parents.is_empty() {
            return Ok(0);
        }
        let encoding = self.encoding_for(theme, to);
        let mut batch = Batch::default();
        for (parent, date) in parents {
            let children = pyramid::child_ids(&parent);
            let mut quads: [Option<RgbImage>; 4] = Default::default();
            for (slot, child) in quads.iter_mut().zip(children.iter()) {
                *slot = self.get_tile_pixels(child)?;
            }
            let img = pyramid::assemble_parent(&quads);
            let bytes = encode(&img, encoding)?;
            batch.tiles.push((TileBlob { id: parent, encoding, bytes }, date));
        }
        self.commit(batch)
    }

    /// Builds coarser levels from the finest stored scale of `theme`.
    ///
    /// With `levels: None`, stops once a level holds a single tile per
    /// scene. With `Some(n)`, builds until the pyramid has `n` levels in
    /// total (the base included), padding with fill where needed. Returns
    /// `(scale, tile count)` per level, base first.
    pub fn build_pyramid(&self, theme: Theme, levels: Option<usize>) -> Result<Vec<(Scale, usize)>> {
        let manifest = self.manifest();
        let Some((base, _)) = manifest.scale_range(theme) else {
            return Ok(Vec::new());
        };
        let count_at = |m: &Manifest, s: Scale| m.tiles.keys().filter(|id| id.theme == theme && id.scale == s).count();
        let scenes_at = |m: &Manifest, s: Scale| {
            m.tiles
                .keys()
                .filter(|id| id.theme == theme && id.scale == s)
                .map(|id| id.scene)
                .collect::<std::collections::BTreeSet<_>>()
                .len()
        };
        let mut out = vec![(base, count_at(&manifest, base))];
        let mut scale = base;
        loop {
            let done = match levels {
                Some(n) => out.len() >= n,
                None => {
                    let m = self.manifest();
                    count_at(&m, scale) <= scenes_at(&m, scale)
                }
            };
            if done {
                break;
            }
            let Some(next) = scale.coarser() else { break };
            let written = self.build_pyramid_level(theme, scale)?;
            out.push((next, written));
            scale = next;
        }
        Ok(out)
    }
}
