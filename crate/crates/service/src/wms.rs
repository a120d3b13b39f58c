//! The OGC map endpoint: GetCapabilities and GetMap with the se_xml,
//! se_blank and se_inimage exception styles.

use std::fmt::Write as _;

use terra_core::area::{area_from_lattice, ImageFrame};
use terra_core::codec::{encode, Encoding};
use terra_core::grid::{Scale, Scene, Theme};
use terra_core::mosaic::{blank_canvas, decorate, resample_region, Canvas, GridStyle, RenderStyle};
use terra_core::UtmRect;

use crate::error::{ErrorCode, ServiceError};
use crate::params::Params;
use crate::service::{message_dimension, parse_image_size, Reply, Service};

pub const WMS_VERSION: &str = "1.1.1";
pub const SE_XML_MEDIA_TYPE: &str = "application/vnd.ogc.se_xml";
pub const CAPABILITIES_MEDIA_TYPE: &str = "application/vnd.ogc.wms_xml";
/// Largest native composition edge a GetMap may need.
pub const MAX_NATIVE_PX: u32 = 4096;
/// EPSG codes 26903..=26920 are NAD83 / UTM zones 3..=20.
const EPSG_NAD83_UTM_BASE: u32 = 26900;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExceptionStyle {
    #[default]
    Xml,
    Blank,
    InImage,
}

impl ExceptionStyle {
    /// Parses the Exceptions parameter; absent or unknown values fall back
    /// to the XML style.
    pub fn from_param(raw: Option<&str>) -> Self {
        match raw.map(|s| s.trim().to_ascii_lowercase()).as_deref() {
            Some("se_blank") | Some("application/vnd.ogc.se_blank") => ExceptionStyle::Blank,
            Some("se_inimage") | Some("application/vnd.ogc.se_inimage") => ExceptionStyle::InImage,
            _ => ExceptionStyle::Xml,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WmsRequest {
    GetMap,
    GetCapabilities,
}

/// A validated GetMap request.
#[derive(Debug, Clone, PartialEq)]
pub struct OgcMapRequest {
    pub layer: Theme,
    pub style: GridStyle,
    pub bbox: UtmRect,
    pub width: u32,
    pub height: u32,
    pub format: Encoding,
    pub exceptions: ExceptionStyle,
}

/// Native scale whose resolution is nearest (linearly) to `meters_per_pixel`,
/// ties going to the finer scale.
pub fn select_native_scale(meters_per_pixel: f64) -> Scale {
    let mut best = Scale::served(Scale::SERVED_MIN).expect("served minimum");
    let mut best_diff = f64::INFINITY;
    for code in Scale::SERVED_MIN..=Scale::SERVED_MAX {
        let scale = Scale::served(code).expect("served range");
        let diff = (scale.meters_per_pixel::<f64>() - meters_per_pixel).abs();
        if diff < best_diff {
            best = scale;
            best_diff = diff;
        }
    }
    best
}

/// Zone named by an `EPSG:269zz` code; only zones 3-20 are served.
pub fn parse_srs(raw: &str) -> Result<Scene, ServiceError> {
    let bad =
        || ServiceError::validation("SRS", format!("unsupported SRS {raw:?}; expected EPSG:26903 through EPSG:26920"));
    let code = raw
        .trim()
        .split_once(':')
        .filter(|(auth, _)| auth.eq_ignore_ascii_case("EPSG"))
        .and_then(|(_, code)| code.parse::<u32>().ok())
        .ok_or_else(bad)?;
    let zone = code.checked_sub(EPSG_NAD83_UTM_BASE).filter(|z| (1..=60).contains(z)).ok_or_else(bad)?;
    let scene = Scene::new(zone as u8).map_err(|_| bad())?;
    if !scene.is_served() {
        return Err(bad());
    }
    Ok(scene)
}

pub fn parse_bbox(raw: &str, scene: Scene) -> Result<UtmRect, ServiceError> {
    let bad = |m: String| ServiceError::validation("BBOX", m);
    let v: Vec<f64> = raw
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad(format!("BBOX {raw:?} is not four numbers")))?;
    let [minx, miny, maxx, maxy] = v[..] else {
        return Err(bad(format!("BBOX {raw:?} must have four values")));
    };
    if v.iter().any(|x| !x.is_finite()) {
        return Err(bad(format!("BBOX {raw:?} is not finite")));
    }
    if minx < 0.0 || miny < 0.0 {
        return Err(ServiceError {
            code: ErrorCode::Domain,
            message: format!("BBOX {raw:?} extends west of easting 0 or south of the equator"),
            parameter: Some("BBOX".into()),
        });
    }
    UtmRect::new(scene.zone(), minx, miny, maxx, maxy).map_err(|e| ServiceError::from(e).for_parameter("BBOX"))
}

fn parse_format(raw: &str, test_mode: bool) -> Result<Encoding, ServiceError> {
    match Encoding::from_media_type(raw.trim()) {
        Some(Encoding::Jpeg) => Ok(Encoding::Jpeg),
        Some(Encoding::Png) if test_mode => Ok(Encoding::Png),
        _ => Err(ServiceError::validation(
            "Format",
            format!("unsupported format {raw:?}; expected image/jpeg{}", if test_mode { " or image/png" } else { "" }),
        )),
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// WMS exception code attribute for an error, if one applies.
fn exception_code(err: &ServiceError) -> Option<&'static str> {
    let param = err.parameter.as_deref().map(str::to_ascii_lowercase);
    match param.as_deref() {
        Some("srs") => Some("InvalidSRS"),
        Some("format") => Some("InvalidFormat"),
        Some("layers") => Some("LayerNotDefined"),
        Some("styles") => Some("StyleNotDefined"),
        _ if err.code == ErrorCode::Internal => None,
        _ => Some("InvalidParameterValue"),
    }
}

pub fn exception_document(err: &ServiceError) -> String {
    let mut attrs = String::new();
    if let Some(code) = exception_code(err) {
        let _ = write!(attrs, " code=\"{code}\"");
    }
    if let Some(p) = &err.parameter {
        let _ = write!(attrs, " locator=\"{}\"", xml_escape(p));
    }
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <ServiceExceptionReport version=\"{WMS_VERSION}\">\n  \
         <ServiceException{attrs}>{}</ServiceException>\n\
         </ServiceExceptionReport>\n",
        xml_escape(&err.message)
    )
}

/// Minimal capabilities document: both layers, the served SRS range,
/// supported formats, styles and exception styles.
pub fn capabilities_document(test_mode: bool) -> String {
    let srs: String = (Scene::SERVED_MIN..=Scene::SERVED_MAX)
        .map(|z| format!("      <SRS>EPSG:{}</SRS>\n", EPSG_NAD83_UTM_BASE + u32::from(z)))
        .collect();
    let formats =
        if test_mode { "<Format>image/jpeg</Format><Format>image/png</Format>" } else { "<Format>image/jpeg</Format>" };
    let styles = ["blank", "UtmGrid", "GeoGrid"]
        .iter()
        .map(|s| format!("<Style><Name>{s}</Name><Title>{s}</Title></Style>"))
        .collect::<String>();
    let layers: String = Theme::ALL
        .iter()
        .map(|t| {
            let title = match t {
                Theme::Doq => "USGS digital ortho-quadrangle aerial imagery",
                Theme::Drg => "USGS digital raster graphic topographic maps",
            };
            format!(
                "      <Layer queryable=\"0\"><Name>{}</Name><Title>{title}</Title>{styles}</Layer>\n",
                t.layer_name()
            )
        })
        .collect();
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
<WMT_MS_Capabilities version=\"{WMS_VERSION}\">\n\
  <Service>\n\
    <Name>OGC:WMS</Name>\n\
    <Title>Terra tile pyramid map server</Title>\n\
    <OnlineResource xmlns:xlink=\"http://www.w3.org/1999/xlink\" xlink:href=\"OgcMap\"/>\n\
  </Service>\n\
  <Capability>\n\
    <Request>\n\
      <GetCapabilities><Format>{CAPABILITIES_MEDIA_TYPE}</Format></GetCapabilities>\n\
      <GetMap>{formats}</GetMap>\n\
    </Request>\n\
    <Exception><Format>{SE_XML_MEDIA_TYPE}</Format><Format>application/vnd.ogc.se_blank</Format><Format>application/vnd.ogc.se_inimage</Format></Exception>\n\
    <Layer>\n\
      <Title>Terra imagery</Title>\n\
{srs}{layers}    </Layer>\n\
  </Capability>\n\
</WMT_MS_Capabilities>\n"
    )
}

impl Service {
    pub fn ogc_map(&self, p: &Params) -> Reply {
        let request = match p.get(&["Request"]).map(str::trim) {
            Some(r) if r.eq_ignore_ascii_case("GetCapabilities") => WmsRequest::GetCapabilities,
            Some(r) if r.eq_ignore_ascii_case("GetMap") => WmsRequest::GetMap,
            Some(r) => {
                let err = ServiceError::validation(
                    "Request",
                    format!("unknown request {r:?}; expected GetMap or GetCapabilities"),
                );
                return self.wms_exception(&err, p);
            }
            None => return self.wms_exception(&ServiceError::missing("Request"), p),
        };
        match request {
            WmsRequest::GetCapabilities => match self.check_capabilities(p) {
                Ok(()) => Reply::bytes(CAPABILITIES_MEDIA_TYPE, capabilities_document(self.test_mode()).into_bytes()),
                Err(e) => self.xml_exception(&e),
            },
            WmsRequest::GetMap => match self.parse_get_map(p).and_then(|req| self.render_get_map(&req)) {
                Ok(reply) => reply,
                Err(e) => self.wms_exception(&e, p),
            },
        }
    }

    fn check_version(p: &Params) -> Result<(), ServiceError> {
        let v = p.required(&["Version", "WmtVer"])?.trim();
        if v != WMS_VERSION {
            return Err(ServiceError::validation(
                "Version",
                format!("unsupported version {v:?}; expected {WMS_VERSION}"),
            ));
        }
        Ok(())
    }

    fn check_service(raw: &str) -> Result<(), ServiceError> {
        if !raw.trim().eq_ignore_ascii_case("wms") {
            return Err(ServiceError::validation("Service", format!("unsupported service {raw:?}; expected wms")));
        }
        Ok(())
    }

    fn check_capabilities(&self, p: &Params) -> Result<(), ServiceError> {
        Self::check_version(p)?;
        Self::check_service(p.required(&["Service"])?)
    }

    pub fn parse_get_map(&self, p: &Params) -> Result<OgcMapRequest, ServiceError> {
        Self::check_version(p)?;
        if let Some(s) = p.get(&["Service"]) {
            Self::check_service(s)?;
        }
        let layers = p.required(&["Layers"])?;
        let layer = Theme::from_layer_name(layers.trim()).map_err(|e| ServiceError::from(e).for_parameter("Layers"))?;
        let style = p
            .get(&["Styles"])
            .unwrap_or("")
            .parse::<GridStyle>()
            .map_err(|e| ServiceError::from(e).for_parameter("Styles"))?;
        let scene = parse_srs(p.required(&["SRS"])?)?;
        let bbox = parse_bbox(p.required(&["BBOX"])?, scene)?;
        let width = parse_image_size("Width", p.required(&["Width"])?)?;
        let height = parse_image_size("Height", p.required(&["Height"])?)?;
        let format = parse_format(p.required(&["Format"])?, self.test_mode())?;
        Ok(OgcMapRequest {
            layer,
            style,
            bbox,
            width,
            height,
            format,
            exceptions: ExceptionStyle::from_param(p.get(&["Exceptions"])),
        })
    }

    /// Composes the BBOX at the nearest native scale, resamples it to the
    /// requested size and draws the requested grid.
    pub fn render_get_map_canvas(&self, req: &OgcMapRequest) -> Result<Canvas, ServiceError> {
        let b = &req.bbox;
        let res_x = b.width() / f64::from(req.width);
        let res_y = b.height() / f64::from(req.height);
        let scale = select_native_scale(res_x);
        let r: f64 = scale.meters_per_pixel();

        let west_col = (b.min_easting / r).floor() as i64;
        let east_col = (b.max_easting / r).ceil() as i64;
        let south_row = (b.min_northing / r).floor() as i64;
        let north_row = (b.max_northing / r).ceil() as i64;
        let native_w = (east_col - west_col).max(1);
        let native_h = (north_row - south_row).max(1);
        if native_w > i64::from(MAX_NATIVE_PX) || native_h > i64::from(MAX_NATIVE_PX) {
            return Err(ServiceError::validation(
                "BBOX",
                format!(
                    "BBOX needs a {native_w}x{native_h} native image at {r} m/px; at most {MAX_NATIVE_PX} px per side"
                ),
            ));
        }
        let scene = Scene::new(b.zone)?;
        let abb =
            area_from_lattice::<f64>(req.layer, scale, scene, west_col, north_row, native_w as u32, native_h as u32)?;
        let native = self.compose(&abb)?;

        let region = [
            b.min_easting / r - west_col as f64,
            north_row as f64 - b.max_northing / r,
            b.max_easting / r - west_col as f64,
            north_row as f64 - b.min_northing / r,
        ];
        let mut canvas = resample_region(&native, region, req.width, req.height);
        let frame = ImageFrame {
            zone: b.zone,
            west: b.min_easting,
            north: b.max_northing,
            res_x,
            res_y,
            width: req.width,
            height: req.height,
        };
        let style = RenderStyle { grid_style: req.style, ..RenderStyle::default() };
        decorate(&mut canvas, &frame, None, &style);
        Ok(canvas)
    }

    fn render_get_map(&self, req: &OgcMapRequest) -> Result<Reply, ServiceError> {
        let canvas = self.render_get_map_canvas(req)?;
        let bytes = encode(&canvas, req.format)?;
        Ok(Reply::bytes(req.format.media_type(), bytes))
    }

    fn xml_exception(&self, err: &ServiceError) -> Reply {
        Reply {
            status: 200,
            content_type: SE_XML_MEDIA_TYPE.into(),
            body: exception_document(err).into_bytes(),
            error: Some(err.code),
        }
    }

    /// Reports a GetMap failure in the style the request asked for.
    /// Exceptions follow WMS practice and use HTTP 200.
    fn wms_exception(&self, err: &ServiceError, p: &Params) -> Reply {
        let style = ExceptionStyle::from_param(p.get(&["Exceptions"]));
        let encoding = p
            .get(&["Format"])
            .and_then(|f| parse_format(f, self.test_mode()).ok())
            .unwrap_or_else(|| self.image_encoding());
        let (w, h) = (p.get(&["Width"]), p.get(&["Height"]));
        match style {
            ExceptionStyle::Xml => self.xml_exception(err),
            ExceptionStyle::Blank => {
                let canvas = blank_canvas(message_dimension(w), message_dimension(h), 255);
                match encode(&canvas, encoding) {
                    Ok(bytes) => Reply {
                        status: 200,
                        content_type: encoding.media_type().into(),
                        body: bytes,
                        error: Some(err.code),
                    },
                    Err(e) => self.xml_exception(&e.into()),
                }
            }
            ExceptionStyle::InImage => self.message_reply(err, w, h, encoding, 200),
        }
    }
}
