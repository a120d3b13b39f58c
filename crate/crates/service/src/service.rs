//! Endpoint handlers. Every handler is a pure function of its parameters
//! and the read-only store and gazetteer.

use std::sync::Arc;

use serde::Serialize;
use terra_core::area::{area_from_lon_lat, AreaBoundingBox, TileMeta, MAX_IMAGE_PX, MIN_IMAGE_PX};
use terra_core::codec::{encode, Encoding};
use terra_core::gazetteer::{Gazetteer, Place, PlaceFacts};
use terra_core::grid::{tile_for_utm, Scale, Scene, Theme, TileId};
use terra_core::mosaic::{compose_area, decorate, message_image, Argb, Canvas, GridStyle, RenderStyle};
use terra_core::projection::lon_lat_to_utm;
use terra_core::store::{TileBlob, TileStore};
use terra_core::{Error as CoreError, LonLatPt};

use crate::config::ServiceConfig;
use crate::error::{ErrorCode, ServiceError};
use crate::params::{parse_value, Params};

pub const JSON: &str = "application/json";

/// Largest image edge used for error images.
pub const MAX_MESSAGE_IMAGE_PX: u32 = 4096;
/// Error image edge used when the requested size cannot be parsed.
pub const FALLBACK_MESSAGE_IMAGE_PX: u32 = 256;
/// Upper bound for the G and B pixel widths.
pub const MAX_LINE_WIDTH_PX: u32 = 100;

/// A complete HTTP response body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
    /// Set when the body reports a failure, including failures rendered as
    /// images.
    pub error: Option<ErrorCode>,
}

impl Reply {
    pub fn json<T: Serialize>(value: &T) -> Reply {
        match serde_json::to_vec(value) {
            Ok(body) => Reply { status: 200, content_type: JSON.into(), body, error: None },
            Err(e) => Reply::error(&ServiceError::new(ErrorCode::Internal, format!("serialization failed: {e}"))),
        }
    }

    pub fn bytes(content_type: &str, body: Vec<u8>) -> Reply {
        Reply { status: 200, content_type: content_type.into(), body, error: None }
    }

    pub fn error(err: &ServiceError) -> Reply {
        Reply {
            status: err.code.http_status(),
            content_type: JSON.into(),
            body: serde_json::to_vec(err).unwrap_or_default(),
            error: Some(err.code),
        }
    }

    fn from_result<T: Serialize>(r: Result<T, ServiceError>) -> Reply {
        match r {
            Ok(v) => Reply::json(&v),
            Err(e) => Reply::error(&e),
        }
    }
}

/// Endpoint names, matched case-insensitively with an optional `.ashx`
/// or `.aspx` suffix.
pub const ENDPOINTS: [&str; 8] = [
    "GetTile",
    "GetTileMetaFromTileId",
    "GetTileMetaFromLonLatPt",
    "GetAreaFromPt",
    "GetPlaceFacts",
    "GetPlaceList",
    "OgcMap",
    "GetImageArea",
];

pub struct Service {
    store: Arc<TileStore>,
    gazetteer: Arc<Gazetteer>,
    test_mode: bool,
}

impl std::fmt::Debug for Service {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Service")
            .field("store", &self.store)
            .field("test_mode", &self.test_mode)
            .finish_non_exhaustive()
    }
}

pub(crate) fn parse_theme(name: &str, raw: &str) -> Result<Theme, ServiceError> {
    let raw = raw.trim();
    let parsed = match raw.parse::<u8>() {
        Ok(code) => Theme::from_code(code),
        Err(_) => Theme::from_layer_name(raw),
    };
    parsed.map_err(|e| ServiceError::from(e).for_parameter(name))
}

pub(crate) fn parse_served_scale(name: &str, raw: &str) -> Result<Scale, ServiceError> {
    let code: u8 = parse_value(name, raw)?;
    Scale::served(code).map_err(|e| ServiceError::from(e).for_parameter(name))
}

pub(crate) fn parse_image_size(name: &str, raw: &str) -> Result<u32, ServiceError> {
    let v: u32 = parse_value(name, raw)?;
    if !(MIN_IMAGE_PX..=MAX_IMAGE_PX).contains(&v) {
        return Err(ServiceError::validation(name, format!("{name} {v} outside [{MIN_IMAGE_PX}, {MAX_IMAGE_PX}]")));
    }
    Ok(v)
}

/// Size for an error image: the requested dimension when it parses,
/// clamped to a sane range.
pub(crate) fn message_dimension(raw: Option<&str>) -> u32 {
    raw.and_then(|r| r.trim().parse::<i64>().ok())
        .map(|v| v.clamp(1, i64::from(MAX_MESSAGE_IMAGE_PX)) as u32)
        .unwrap_or(FALLBACK_MESSAGE_IMAGE_PX)
}

fn core_err(name: &str) -> impl Fn(CoreError) -> ServiceError + '_ {
    move |e| {
        let had_param = e.parameter().is_some();
        let se = ServiceError::from(e);
        if had_param {
            se.for_parameter(name)
        } else {
            se
        }
    }
}

impl Service {
    pub fn new(store: Arc<TileStore>, gazetteer: Arc<Gazetteer>, test_mode: bool) -> Self {
        Service { store, gazetteer, test_mode }
    }

    /// Opens the store and gazetteer named by `config`.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let root = config.store.as_ref().ok_or(crate::config::ConfigError::MissingStore)?;
        let store = TileStore::open(root).map_err(|e| format!("cannot open tile store {}: {e}", root.display()))?;
        let gazetteer = Gazetteer::new();
        if let Some(path) = &config.gazetteer {
            let report =
                gazetteer.load_file(path).map_err(|e| format!("cannot load gazetteer {}: {e}", path.display()))?;
            log::info!("gazetteer: {} places, {} rows rejected", report.loaded, report.rejected.len());
        }
        Ok(Service::new(Arc::new(store), Arc::new(gazetteer), config.test_mode))
    }

    pub fn store(&self) -> &TileStore {
        &self.store
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    pub fn test_mode(&self) -> bool {
        self.test_mode
    }

    /// Encoding of composed images: JPEG, or PNG in test mode.
    pub fn image_encoding(&self) -> Encoding {
        if self.test_mode {
            Encoding::Png
        } else {
            Encoding::Jpeg
        }
    }

    /// Dispatches one request. `path` is the URL path, with or without the
    /// leading slash.
    pub fn handle(&self, path: &str, params: &Params) -> Reply {
        let name = path.trim_start_matches('/');
        let name = name.strip_suffix(".ashx").or_else(|| name.strip_suffix(".aspx")).unwrap_or(name);
        let Some(endpoint) = ENDPOINTS.iter().find(|e| e.eq_ignore_ascii_case(name)) else {
            return Reply::error(&ServiceError::not_found(format!("no endpoint named {name:?}")));
        };
        match *endpoint {
            "GetTile" => match self.get_tile(params) {
                Ok(blob) => Reply::bytes(blob.encoding.media_type(), blob.bytes),
                Err(e) => Reply::error(&e),
            },
            "GetTileMetaFromTileId" => Reply::from_result(self.tile_meta_from_tile_id(params)),
            "GetTileMetaFromLonLatPt" => Reply::from_result(self.tile_meta_from_lon_lat(params)),
            "GetAreaFromPt" => Reply::from_result(self.area_from_pt(params)),
            "GetPlaceFacts" => Reply::from_result(self.place_facts(params)),
            "GetPlaceList" => Reply::from_result(self.place_list(params)),
            "OgcMap" => self.ogc_map(params),
            "GetImageArea" => self.image_area(params),
            _ => unreachable!("endpoint table and dispatch disagree"),
        }
    }

    fn tile_id(&self, p: &Params) -> Result<TileId, ServiceError> {
        let theme = parse_theme("Theme", p.required(&["Theme", "T"])?)?;
        let scale = parse_served_scale("Scale", p.required(&["Scale", "S"])?)?;
        let zone: u8 = p.parse(&["Scene", "Zone"])?;
        let scene = Scene::new(zone).map_err(core_err("Scene"))?;
        let x: u32 = p.parse(&["X"])?;
        let y: u32 = p.parse(&["Y"])?;
        Ok(TileId::new(theme, scale, scene, x, y))
    }

    fn lon_lat(&self, p: &Params) -> Result<LonLatPt, ServiceError> {
        let lon: f64 = p.parse(&["Lon"])?;
        let lat: f64 = p.parse(&["Lat"])?;
        LonLatPt::new(lon, lat).map_err(ServiceError::from)
    }

    pub fn get_tile(&self, p: &Params) -> Result<TileBlob, ServiceError> {
        let id = self.tile_id(p)?;
        self.store.get_tile(&id).map_err(ServiceError::from)
    }

    pub fn tile_meta_from_tile_id(&self, p: &Params) -> Result<TileMeta, ServiceError> {
        let id = self.tile_id(p)?;
        self.store.tile_meta(&id).map_err(ServiceError::from)
    }

    pub fn tile_meta_from_lon_lat(&self, p: &Params) -> Result<TileMeta, ServiceError> {
        let theme = parse_theme("Theme", p.required(&["Theme", "T"])?)?;
        let scale = parse_served_scale("Scale", p.required(&["Scale", "S"])?)?;
        let point = self.lon_lat(p)?;
        let utm = lon_lat_to_utm(point, None)?;
        Scene::new(utm.zone)?.require_served()?;
        let id = tile_for_utm(theme, scale, &utm)?;
        self.store.tile_meta(&id).map_err(ServiceError::from)
    }

    /// Area description for an image, decorated with capture dates and the
    /// nearest significant place.
    pub fn area(
        &self,
        theme: Theme,
        scale: Scale,
        center: LonLatPt,
        width: u32,
        height: u32,
    ) -> Result<AreaBoundingBox, ServiceError> {
        let mut abb: AreaBoundingBox = area_from_lon_lat(theme, scale, center, width, height)?;
        for ac in [&mut abb.north_west, &mut abb.north_east, &mut abb.south_west, &mut abb.south_east, &mut abb.center]
        {
            self.store.decorate_meta(&mut ac.tile_meta);
        }
        abb.nearest_place = match self.gazetteer.nearest_place(center) {
            Ok(n) => Some(n),
            Err(CoreError::State(_)) => None,
            Err(e) => return Err(e.into()),
        };
        Ok(abb)
    }

    pub fn area_from_pt(&self, p: &Params) -> Result<AreaBoundingBox, ServiceError> {
        let theme = parse_theme("Theme", p.required(&["Theme", "T"])?)?;
        let scale = parse_served_scale("Scale", p.required(&["Scale", "S"])?)?;
        let center = self.lon_lat(p)?;
        let width = parse_image_size("Width", p.required(&["Width", "W"])?)?;
        let height = parse_image_size("Height", p.required(&["Height", "H"])?)?;
        self.area(theme, scale, center, width, height)
    }

    pub fn place_facts(&self, p: &Params) -> Result<Vec<PlaceFacts>, ServiceError> {
        let field = |names: &[&str]| p.get(names).unwrap_or("").to_string();
        let query = Place::new(field(&["City", "Place"]), field(&["State"]), field(&["Country"]));
        self.gazetteer.place_facts(&query).map_err(|e| ServiceError::from(e).for_parameter("City"))
    }

    pub fn place_list(&self, p: &Params) -> Result<Vec<PlaceFacts>, ServiceError> {
        let ul = LonLatPt::new(p.parse(&["UpperLeftLon"])?, p.parse(&["UpperLeftLat"])?)?;
        let lr = LonLatPt::new(p.parse(&["LowerRightLon"])?, p.parse(&["LowerRightLat"])?)?;
        let max: usize = p.parse(&["MaxItems"])?;
        Ok(self.gazetteer.place_list(ul, lr, max)?)
    }

    /// Composes the image for an area from stored tiles; absent tiles are
    /// left mid-gray.
    pub fn compose(&self, abb: &AreaBoundingBox) -> Result<Canvas, ServiceError> {
        compose_area(abb, |id| match self.store.get_tile(id) {
            Ok(blob) => Ok(Some(blob.bytes)),
            Err(CoreError::NotFound(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .map_err(ServiceError::from)
    }

    fn encode_reply(&self, canvas: &Canvas, encoding: Encoding) -> Reply {
        match encode(canvas, encoding) {
            Ok(bytes) => Reply::bytes(encoding.media_type(), bytes),
            Err(e) => Reply::error(&e.into()),
        }
    }

    /// Message image for a failed image request, sized as requested.
    pub(crate) fn message_reply(
        &self,
        err: &ServiceError,
        width: Option<&str>,
        height: Option<&str>,
        encoding: Encoding,
        status: u16,
    ) -> Reply {
        let canvas = message_image(message_dimension(width), message_dimension(height), &err.message);
        let mut reply = self.encode_reply(&canvas, encoding);
        reply.status = status;
        reply.error = Some(err.code);
        reply
    }

    pub fn image_area(&self, p: &Params) -> Reply {
        match self.render_image_area(p) {
            Ok(canvas) => self.encode_reply(&canvas, self.image_encoding()),
            Err(e) => self.message_reply(&e, p.get(&["W"]), p.get(&["H"]), self.image_encoding(), e.code.http_status()),
        }
    }

    /// Parses the map-server style parameters (F, FC, G, GC, B, BC, LOGO).
    pub fn render_style(p: &Params) -> Result<RenderStyle, ServiceError> {
        let defaults = RenderStyle::default();
        let color = |name: &str, default: Argb| -> Result<Argb, ServiceError> {
            match p.get(&[name]) {
                Some(raw) if !raw.trim().is_empty() => {
                    raw.trim().parse::<Argb>().map_err(|e| ServiceError::from(e).for_parameter(name))
                }
                _ => Ok(default),
            }
        };
        let width = |name: &str| -> Result<u32, ServiceError> {
            let v: u32 = p.parse_or(&[name], 0)?;
            if v > MAX_LINE_WIDTH_PX {
                return Err(ServiceError::validation(name, format!("{name} {v} exceeds {MAX_LINE_WIDTH_PX} px")));
            }
            Ok(v)
        };
        let grid_width_px = width("G")?;
        let logo = match p.get(&["LOGO"]).map(str::trim) {
            None | Some("") | Some("0") => false,
            Some("1") => true,
            Some(other) => return Err(ServiceError::validation("LOGO", format!("LOGO must be 0 or 1, got {other:?}"))),
        };
        Ok(RenderStyle {
            grid_style: if grid_width_px > 0 { GridStyle::UtmGrid } else { GridStyle::None },
            grid_width_px,
            grid_color: color("GC", defaults.grid_color)?,
            border_width_px: width("B")?,
            border_color: color("BC", defaults.border_color)?,
            font_name: p
                .get(&["F"])
                .map(str::trim)
                .filter(|f| !f.is_empty())
                .unwrap_or(&defaults.font_name)
                .to_string(),
            font_color: color("FC", defaults.font_color)?,
            logo,
            tile_boundaries: matches!(p.get(&["TB"]).map(str::trim), Some("1")),
        })
    }

    /// The composed and decorated canvas for a GetImageArea request.
    pub fn render_image_area(&self, p: &Params) -> Result<Canvas, ServiceError> {
        let theme = parse_theme("T", p.required(&["T"])?)?;
        let scale = parse_served_scale("S", p.required(&["S"])?)?;
        let lon: f64 = p.parse(&["Lon"])?;
        let lat: f64 = p.parse(&["Lat"])?;
        let width = parse_image_size("W", p.required(&["W"])?)?;
        let height = parse_image_size("H", p.required(&["H"])?)?;
        let style = Self::render_style(p)?;
        let center = LonLatPt::new(lon, lat)?;
        let abb = self.area(theme, scale, center, width, height)?;
        let mut canvas = self.compose(&abb)?;
        decorate(&mut canvas, &abb.frame(), Some(scale), &style);
        Ok(canvas)
    }
}
