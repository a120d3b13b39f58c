//! The store's manifest file: one JSON document listing every stored tile.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::area::CaptureDate;
use crate::codec::Encoding;
use crate::error::{Error, Result};
use crate::grid::{Scale, Scene, Theme, TileId};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileRecord {
    pub encoding: Encoding,
    pub capture_date: CaptureDate,
}

/// Tile index bounds for one (theme, scale, scene), inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub theme: Theme,
    pub scale: Scale,
    pub scene: Scene,
    pub min_x: u32,
    pub min_y: u32,
    pub max_x: u32,
    pub max_y: u32,
    pub tile_count: usize,
}

impl Coverage {
    pub fn contains(&self, id: &TileId) -> bool {
        id.theme == self.theme
            && id.scale == self.scale
            && id.scene == self.scene
            && (self.min_x..=self.max_x).contains(&id.x)
            && (self.min_y..=self.max_y).contains(&id.y)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub lossless: bool,
    pub tiles: BTreeMap<TileId, TileRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ThemeScales {
    theme: Theme,
    min_scale: Scale,
    max_scale: Scale,
}

#[derive(Debug, Serialize, Deserialize)]
struct TileEntry {
    theme: Theme,
    scale: Scale,
    scene: Scene,
    x: u32,
    y: u32,
    encoding: Encoding,
    capture_date: CaptureDate,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    format: u32,
    lossless: bool,
    themes: Vec<ThemeScales>,
    coverage: Vec<Coverage>,
    tiles: Vec<TileEntry>,
}

impl Manifest {
    pub fn new(lossless: bool) -> Self {
        Manifest { lossless, tiles: BTreeMap::new() }
    }

    pub fn coverage(&self) -> Vec<Coverage> {
        let mut out: BTreeMap<(Theme, Scale, Scene), Coverage> = BTreeMap::new();
        for id in self.tiles.keys() {
            out.entry((id.theme, id.scale, id.scene))
                .and_modify(|c| {
                    c.min_x = c.min_x.min(id.x);
                    c.max_x = c.max_x.max(id.x);
                    c.min_y = c.min_y.min(id.y);
                    c.max_y = c.max_y.max(id.y);
                    c.tile_count += 1;
                })
                .or_insert(Coverage {
                    theme: id.theme,
                    scale: id.scale,
                    scene: id.scene,
                    min_x: id.x,
                    min_y: id.y,
                    max_x: id.x,
                    max_y: id.y,
                    tile_count: 1,
                });
        }
        out.into_values().collect()
    }

    pub fn themes(&self) -> BTreeSet<Theme> {
        self.tiles.keys().map(|id| id.theme).collect()
    }

    /// Finest and coarsest stored scale of a theme.
    pub fn scale_range(&self, theme: Theme) -> Option<(Scale, Scale)> {
        let mut scales = self.tiles.keys().filter(|id| id.theme == theme).map(|id| id.scale);
        let first = scales.next()?;
        Some(scales.fold((first, first), |(lo, hi), s| (lo.min(s), hi.max(s))))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ManifestFile {
            format: MANIFEST_FORMAT,
            lossless: self.lossless,
            themes: self
                .themes()
                .into_iter()
                .filter_map(|theme| {
                    self.scale_range(theme).map(|(min_scale, max_scale)| ThemeScales { theme, min_scale, max_scale })
                })
                .collect(),
            coverage: self.coverage(),
            tiles: self
                .tiles
                .iter()
                .map(|(id, rec)| TileEntry {
                    theme: id.theme,
                    scale: id.scale,
                    scene: id.scene,
                    x: id.x,
                    y: id.y,
                    encoding: rec.encoding,
                    capture_date: rec.capture_date,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::Codec(e.to_string()))
    }

    /// Parses a manifest and checks that the declared coverage agrees with
    /// the tile list.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ManifestFile = serde_json::from_str(text)
            .map_err(|e| Error::validation("manifest", format!("malformed manifest: {e}")))?;
        if file.format != MANIFEST_FORMAT {
            return Err(Error::validation("manifest", format!("unsupported manifest format {}", file.format)));
        }
        let mut tiles = BTreeMap::new();
        for t in file.tiles {
            let id = TileId::new(t.theme, t.scale, t.scene, t.x, t.y);
            tiles.insert(id, TileRecord { encoding: t.encoding, capture_date: t.capture_date });
        }
        let manifest = Manifest { lossless: file.lossless, tiles };
        if manifest.coverage() != file.coverage {
            return Err(Error::validation("manifest", "coverage does not match tile list"));
        }
        Ok(manifest)
    }
}
