//! Blocking and background calls against the service's HTTP endpoints.

use std::sync::Arc;
use std::time::Duration;

use serde::de::DeserializeOwned;
use terra_core::area::{AreaBoundingBox, TileMeta};
use terra_core::gazetteer::{Place, PlaceFacts};
use terra_core::grid::{Scale, Theme, TileId};
use terra_core::mosaic::{GridStyle, RenderStyle};
use terra_core::LonLatPt;

use crate::error::{ClientError, ErrorCode, Result, ServiceError};
use crate::pending::PendingCall;

/// Largest response body accepted.
const MAX_BODY_BYTES: u64 = 256 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Pause before retry `i` (1-based); the last entry repeats.
    pub backoff: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, backoff: [100, 200, 400].map(Duration::from_millis).to_vec() }
    }
}

impl RetryPolicy {
    pub fn delay_before(&self, retry: u32) -> Duration {
        let i = (retry.max(1) - 1) as usize;
        self.backoff.get(i).or(self.backoff.last()).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceEndpoint {
    pub base_url: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl ServiceEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        ServiceEndpoint { base_url: base_url.into(), timeout: Duration::from_secs(30), retry: RetryPolicy::default() }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.timeout.is_zero() {
            return Err(ClientError::Invalid("timeout must be positive".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(ClientError::Invalid("at least one attempt is required".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(ClientError::Invalid(format!("base URL {:?} is not http(s)", self.base_url)));
        }
        Ok(())
    }
}

/// Raw HTTP answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawResponse {
    pub status: u16,
    pub content_type: String,
    /// The `X-Terra-Error` header, present when an image body reports a
    /// failure.
    pub error_header: Option<String>,
    pub body: Vec<u8>,
}

impl RawResponse {
    /// The service error this response carries, if any.
    pub fn service_error(&self) -> Option<ServiceError> {
        if self.content_type.starts_with("application/json") && self.status >= 400 {
            if let Ok(e) = serde_json::from_slice::<ServiceError>(&self.body) {
                return Some(e);
            }
        }
        if let Some(h) = &self.error_header {
            return Some(ServiceError {
                code: ErrorCode::from_wire(h).unwrap_or(ErrorCode::Internal),
                message: format!("service reported {h} (HTTP {})", self.status),
                parameter: None,
            });
        }
        (self.status >= 400).then(|| ServiceError {
            code: ErrorCode::from_status(self.status),
            message: format!(
                "HTTP {}: {}",
                self.status,
                String::from_utf8_lossy(&self.body).chars().take(200).collect::<String>()
            ),
            parameter: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileBytes {
    pub media_type: String,
    pub bytes: Vec<u8>,
}

/// Parameters of a GetImageArea request.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageAreaRequest {
    pub theme: Theme,
    pub scale: Scale,
    pub center: LonLatPt,
    pub width: u32,
    pub height: u32,
    pub style: RenderStyle,
}

impl ImageAreaRequest {
    pub fn query(&self) -> Vec<(String, String)> {
        let s = &self.style;
        let grid = if s.grid_style == GridStyle::None { 0 } else { s.grid_width_px };
        let mut q = vec![
            ("T".to_string(), self.theme.code().to_string()),
            ("S".into(), self.scale.code().to_string()),
            ("Lon".into(), fmt_deg(self.center.lon)),
            ("Lat".into(), fmt_deg(self.center.lat)),
            ("W".into(), self.width.to_string()),
            ("H".into(), self.height.to_string()),
            ("F".into(), s.font_name.clone()),
            ("FC".into(), s.font_color.to_string()),
            ("G".into(), grid.to_string()),
            ("GC".into(), s.grid_color.to_string()),
            ("B".into(), s.border_width_px.to_string()),
            ("BC".into(), s.border_color.to_string()),
            ("LOGO".into(), u8::from(s.logo).to_string()),
        ];
        if s.tile_boundaries {
            q.push(("TB".into(), "1".into()));
        }
        q
    }
}

/// Shortest decimal that reads back as the same `f64`.
fn fmt_deg(v: f64) -> String {
    format!("{v:?}")
}

struct Inner {
    endpoint: ServiceEndpoint,
    agent: ureq::Agent,
}

/// A service client. Cloning is cheap and clones share the connection pool.
#[derive(Clone)]
pub struct Client {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Client {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Client").field("endpoint", &self.inner.endpoint).finish()
    }
}

fn tile_query(id: &TileId) -> Vec<(String, String)> {
    vec![
        ("Theme".into(), id.theme.code().to_string()),
        ("Scale".into(), id.scale.code().to_string()),
        ("Scene".into(), id.scene.zone().to_string()),
        ("X".into(), id.x.to_string()),
        ("Y".into(), id.y.to_string()),
    ]
}

fn pairs<const N: usize>(items: [(&str, String); N]) -> Vec<(String, String)> {
    items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

macro_rules! begin {
    ($(#[$m:meta])* $name:ident => $sync:ident($($arg:ident: $ty:ty),*) -> $out:ty) => {
        $(#[$m])*
        pub fn $name(&self, $($arg: $ty),*) -> PendingCall<$out> {
            let client = self.clone();
            PendingCall::spawn(move || client.$sync($($arg),*))
        }
    };
}

impl Client {
    pub fn new(endpoint: ServiceEndpoint) -> Result<Client> {
        endpoint.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(endpoint.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Client { inner: Arc::new(Inner { endpoint, agent }) })
    }

    pub fn endpoint(&self) -> &ServiceEndpoint {
        &self.inner.endpoint
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.inner.endpoint.base_url.trim_end_matches('/'), path)
    }

    fn attempt(&self, url: &str, query: &[(String, String)]) -> std::result::Result<RawResponse, String> {
        let mut resp = self
            .inner
            .agent
            .get(url)
            .query_pairs(query.iter().map(|(k, v)| (k.as_str(), v.as_str())))
            .call()
            .map_err(|e| e.to_string())?;
        let header = |name: &str| resp.headers().get(name).and_then(|v| v.to_str().ok()).map(str::to_string);
        let content_type = header("content-type").unwrap_or_default();
        let error_header = header("x-terra-error");
        let status = resp.status().as_u16();
        let body = resp.body_mut().with_config().limit(MAX_BODY_BYTES).read_to_vec().map_err(|e| e.to_string())?;
        Ok(RawResponse { status, content_type, error_header, body })
    }

    /// Issues a GET, retrying transport failures per the retry policy.
    /// Any HTTP answer, including an error status, ends the retries.
    pub fn get_raw(&self, path: &str, query: &[(String, String)]) -> Result<RawResponse> {
        let url = self.url(path);
        let policy = &self.inner.endpoint.retry;
        let mut last = String::new();
        for attempt in 1..=policy.max_attempts {
            if attempt > 1 {
                std::thread::sleep(policy.delay_before(attempt - 1));
            }
            match self.attempt(&url, query) {
                Ok(r) => return Ok(r),
                Err(e) => {
                    log::debug!("attempt {attempt} on {url} failed: {e}");
                    last = e;
                }
            }
        }
        Err(ClientError::Transport { attempts: policy.max_attempts, message: last })
    }

    fn checked(&self, path: &str, query: &[(String, String)]) -> Result<RawResponse> {
        let r = self.get_raw(path, query)?;
        match r.service_error() {
            Some(e) => Err(e.into()),
            None => Ok(r),
        }
    }

    fn json<T: DeserializeOwned>(&self, path: &str, query: &[(String, String)]) -> Result<T> {
        let r = self.checked(path, query)?;
        serde_json::from_slice(&r.body).map_err(|e| ClientError::Decode(format!("{path}: {e}")))
    }

    pub fn get_tile(&self, id: TileId) -> Result<TileBytes> {
        let r = self.checked("GetTile", &tile_query(&id))?;
        Ok(TileBytes { media_type: r.content_type, bytes: r.body })
    }

    pub fn get_tile_meta_from_tile_id(&self, id: TileId) -> Result<TileMeta> {
        self.json("GetTileMetaFromTileId", &tile_query(&id))
    }

    pub fn get_tile_meta_from_lon_lat_pt(&self, theme: Theme, scale: Scale, point: LonLatPt) -> Result<TileMeta> {
        self.json(
            "GetTileMetaFromLonLatPt",
            &pairs([
                ("Theme", theme.code().to_string()),
                ("Scale", scale.code().to_string()),
                ("Lon", fmt_deg(point.lon)),
                ("Lat", fmt_deg(point.lat)),
            ]),
        )
    }

    pub fn get_area_from_pt(
        &self,
        theme: Theme,
        scale: Scale,
        center: LonLatPt,
        width: u32,
        height: u32,
    ) -> Result<AreaBoundingBox> {
        self.json(
            "GetAreaFromPt",
            &pairs([
                ("Theme", theme.code().to_string()),
                ("Scale", scale.code().to_string()),
                ("Lon", fmt_deg(center.lon)),
                ("Lat", fmt_deg(center.lat)),
                ("Width", width.to_string()),
                ("Height", height.to_string()),
            ]),
        )
    }

    pub fn get_place_facts(&self, place: Place) -> Result<Vec<PlaceFacts>> {
        self.json("GetPlaceFacts", &pairs([("City", place.city), ("State", place.state), ("Country", place.country)]))
    }

    pub fn get_place_list(
        &self,
        upper_left: LonLatPt,
        lower_right: LonLatPt,
        max_items: usize,
    ) -> Result<Vec<PlaceFacts>> {
        self.json(
            "GetPlaceList",
            &pairs([
                ("UpperLeftLon", fmt_deg(upper_left.lon)),
                ("UpperLeftLat", fmt_deg(upper_left.lat)),
                ("LowerRightLon", fmt_deg(lower_right.lon)),
                ("LowerRightLat", fmt_deg(lower_right.lat)),
                ("MaxItems", max_items.to_string()),
            ]),
        )
    }

    /// The composed image bytes as the service encoded them.
    pub fn get_image_area(&self, request: ImageAreaRequest) -> Result<TileBytes> {
        let r = self.checked("GetImageArea", &request.query())?;
        Ok(TileBytes { media_type: r.content_type, bytes: r.body })
    }

    /// Raw OgcMap call; WMS exceptions arrive as successful responses whose
    /// `error_header` is set.
    pub fn ogc_map(&self, query: Vec<(String, String)>) -> Result<RawResponse> {
        self.get_raw("OgcMap", &query)
    }

    begin!(begin_get_tile => get_tile(id: TileId) -> TileBytes);
    begin!(begin_get_tile_meta_from_tile_id => get_tile_meta_from_tile_id(id: TileId) -> TileMeta);
    begin!(begin_get_tile_meta_from_lon_lat_pt => get_tile_meta_from_lon_lat_pt(theme: Theme, scale: Scale, point: LonLatPt) -> TileMeta);
    begin!(begin_get_area_from_pt => get_area_from_pt(theme: Theme, scale: Scale, center: LonLatPt, width: u32, height: u32) -> AreaBoundingBox);
    begin!(begin_get_place_facts => get_place_facts(place: Place) -> Vec<PlaceFacts>);
    begin!(begin_get_place_list => get_place_list(upper_left: LonLatPt, lower_right: LonLatPt, max_items: usize) -> Vec<PlaceFacts>);
    begin!(begin_get_image_area => get_image_area(request: ImageAreaRequest) -> TileBytes);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_schedule() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay_before(1), Duration::from_millis(100));
        assert_eq!(p.delay_before(3), Duration::from_millis(400));
        assert_eq!(p.delay_before(9), Duration::from_millis(400));
    }

    #[test]
    fn endpoint_validation() {
        assert!(Client::new(ServiceEndpoint::new("http://h").with_timeout(Duration::ZERO)).is_err());
        let none = RetryPolicy { max_attempts: 0, backoff: vec![] };
        assert!(Client::new(ServiceEndpoint::new("http://h").with_retry(none)).is_err());
        assert!(Client::new(ServiceEndpoint::new("ftp://h")).is_err());
    }

    #[test]
    fn degrees_round_trip_through_text() {
        for v in [-122.4194, 37.774_900_000_000_01, 1.0 / 3.0] {
            assert_eq!(fmt_deg(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn error_bodies() {
        let json = RawResponse {
            status: 400,
            content_type: "application/json".into(),
            error_header: Some("validation".into()),
            body: br#"{"Code":"validation","Message":"Scale 99 is not served","Parameter":"Scale"}"#.to_vec(),
        };
        assert_eq!(json.service_error().unwrap().parameter.as_deref(), Some("Scale"));
        let image = RawResponse {
            status: 200,
            content_type: "image/png".into(),
            error_header: Some("domain".into()),
            body: vec![],
        };
        assert_eq!(image.service_error().unwrap().code, ErrorCode::Domain);
        let ok = RawResponse { status: 200, content_type: "image/png".into(), error_header: None, body: vec![] };
        assert!(ok.service_error().is_none());
    }
}
