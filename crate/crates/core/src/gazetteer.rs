//! Place-name index: keyword search, area listing and nearest landmark.
//!
//! Source files are comma-separated text with a header row:
//!
//! ```text
//! name,state,country,lon,lat,type,population
//! San Francisco,California,United States of America,-122.4194,37.7749,city,873965
//! ```
//!
//! Lines starting with `#` are ignored; `population` may be empty.
//! `type` is one of `city`, `landmark`, `park`, `water`, `other`.

use std::cmp::Ordering;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::coords::LonLat;
use crate::error::{Error, Result};

/// Mean Earth radius used for great-circle distances, in metres.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase", default)]
pub struct Place {
    pub city: String,
    pub state: String,
    pub country: String,
}

impl Place {
    pub fn new(city: impl Into<String>, state: impl Into<String>, country: impl Into<String>) -> Self {
        Place { city: city.into(), state: state.into(), country: country.into() }
    }

    fn is_blank(&self) -> bool {
        [&self.city, &self.state, &self.country].iter().all(|f| f.trim().is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceType {
    City,
    Landmark,
    Park,
    Water,
    Other,
}

impl PlaceType {
    /// Whether the type may be reported as a nearest landmark.
    pub fn is_significant(self) -> bool {
        matches!(self, PlaceType::City | PlaceType::Landmark)
    }
}

impl std::str::FromStr for PlaceType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "city" => Ok(PlaceType::City),
            "landmark" => Ok(PlaceType::Landmark),
            "park" => Ok(PlaceType::Park),
            "water" => Ok(PlaceType::Water),
            "other" => Ok(PlaceType::Other),
            other => Err(format!("unknown place type {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct PlaceFacts {
    pub place: Place,
    pub center: LonLat<f64>,
    pub place_type: PlaceType,
    pub population: Option<u64>,
}

/// Eight-point compass direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Direction {
    const ALL: [Direction; 8] = [
        Direction::N,
        Direction::NE,
        Direction::E,
        Direction::SE,
        Direction::S,
        Direction::SW,
        Direction::W,
        Direction::NW,
    ];

    /// Quantizes a bearing (degrees clockwise from north) into 45° sectors
    /// centered on the compass points.
    pub fn from_bearing(bearing_deg: f64) -> Self {
        let b = bearing_deg.rem_euclid(360.0);
        let idx = ((b + 22.5) / 45.0).floor() as usize % 8;
        Self::ALL[idx]
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Nearest significant place to a point: "`distance` `direction` of `name`".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct NearestPlace {
    pub name: String,
    pub distance_meters: f64,
    pub direction: Direction,
}

/// Great-circle distance on the mean sphere (haversine).
pub fn great_circle_distance(a: LonLat<f64>, b: LonLat<f64>) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Initial great-circle bearing from `from` to `to`, degrees clockwise from north.
pub fn initial_bearing(from: LonLat<f64>, to: LonLat<f64>) -> f64 {
    let (p1, p2) = (from.lat.to_radians(), to.lat.to_radians());
    let dl = (to.lon - from.lon).to_radians();
    let y = dl.sin() * p2.cos();
    let x = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos();
    y.atan2(x).to_degrees().rem_euclid(360.0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowDiagnostic {
    /// 1-based line number in the source file.
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub loaded: usize,
    pub rejected: Vec<RowDiagnostic>,
}

#[derive(Debug, Default)]
struct PlaceIndex {
    /// Sorted by (city, state), case-insensitively.
    places: Vec<PlaceFacts>,
    /// Indices into `places` ordered by longitude.
    by_lon: Vec<usize>,
}

fn name_key(p: &PlaceFacts) -> (String, String) {
    (p.place.city.to_lowercase(), p.place.state.to_lowercase())
}

fn name_order(a: &PlaceFacts, b: &PlaceFacts) -> Ordering {
    name_key(a).cmp(&name_key(b))
}

impl PlaceIndex {
    fn build(mut places: Vec<PlaceFacts>) -> Self {
        places.sort_by(name_order);
        let mut by_lon: Vec<usize> = (0..places.len()).collect();
        by_lon.sort_by(|&a, &b| places[a].center.lon.total_cmp(&places[b].center.lon));
        PlaceIndex { places, by_lon }
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    name: String,
    state: String,
    country: String,
    lon: String,
    lat: String,
    #[serde(rename = "type")]
    place_type: String,
    #[serde(default)]
    population: Option<String>,
}

fn parse_row(row: Row) -> std::result::Result<PlaceFacts, String> {
    if row.name.trim().is_empty() {
        return Err("empty name".into());
    }
    let lon: f64 = row.lon.trim().parse().map_err(|_| format!("bad longitude {:?}", row.lon))?;
    let lat: f64 = row.lat.trim().parse().map_err(|_| format!("bad latitude {:?}", row.lat))?;
    let center = LonLat::new(lon, lat).map_err(|e| e.to_string())?;
    let place_type = row.place_type.parse()?;
    let population = match row.population.as_deref().map(str::trim) {
        None | Some("") => None,
        Some(p) => Some(p.parse().map_err(|_| format!("bad population {p:?}"))?),
    };
    Ok(PlaceFacts {
        place: Place::new(row.name.trim(), row.state.trim(), row.country.trim()),
        center,
        place_type,
        population,
    })
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Parses a gazetteer source, returning the valid rows and a diagnostic for
/// each rejected row.
pub fn parse_places<R: Read>(source: R) -> Result<(Vec<PlaceFacts>, Vec<RowDiagnostic>)> {
    let mut reader =
        csv::ReaderBuilder::new().comment(Some(b'#')).flexible(true).trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let mut out = Vec::new();
    let mut rejected = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(csv_error(e)),
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                rejected.push(RowDiagnostic { line, message: e.to_string() });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parsed = record.deserialize::<Row>(Some(&headers)).map_err(|e| e.to_string()).and_then(parse_row);
        match parsed {
            Ok(p) => out.push(p),
            Err(message) => rejected.push(RowDiagnostic { line, message }),
        }
    }
    Ok((out, rejected))
}

/// Thread-safe gazetteer. Loads swap the whole index; readers keep using the
/// snapshot they started with.
#[derive(Debug, Default)]
pub struct Gazetteer {
    index: RwLock<Arc<PlaceIndex>>,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_places(places: Vec<PlaceFacts>) -> Self {
        Gazetteer { index: RwLock::new(Arc::new(PlaceIndex::build(places))) }
    }

    pub fn load_file(&self, path: impl AsRef<Path>) -> Result<LoadReport> {
        let file = std::fs::File::open(path.as_ref())?;
        self.load_reader(file)
    }

    pub fn load_reader<R: Read>(&self, source: R) -> Result<LoadReport> {
        let (places, rejected) = parse_places(source)?;
        for d in &rejected {
            log::warn!("gazetteer line {}: {}", d.line, d.message);
        }
        if places.is_empty() {
            return Err(Error::validation("gazetteer", "no valid place rows"));
        }
        let loaded = places.len();
        let index = Arc::new(PlaceIndex::build(places));
        *self.index.write().expect("gazetteer lock poisoned") = index;
        Ok(LoadReport { loaded, rejected })
    }

    fn snapshot(&self) -> Arc<PlaceIndex> {
        self.index.read().expect("gazetteer lock poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.snapshot().places.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All places, in name order.
    pub fn places(&self) -> Vec<PlaceFacts> {
        self.snapshot().places.clone()
    }

    /// Case-insensitive exact match on every non-blank field of `query`.
    pub fn place_facts(&self, query: &Place) -> Result<Vec<PlaceFacts>> {
        if query.is_blank() {
            return Err(Error::validation("place", "at least one of city, state, country is required"));
        }
        let matches = |want: &str, have: &str| {
            let want = want.trim();
            want.is_empty() || want.eq_ignore_ascii_case(have)
        };
        Ok(self
            .snapshot()
            .places
            .iter()
            .filter(|p| {
                matches(&query.city, &p.place.city)
                    && matches(&query.state, &p.place.state)
                    && matches(&query.country, &p.place.country)
            })
            .cloned()
            .collect())
    }

    /// Places whose center lies inside the rectangle (edges inclusive),
    /// most populous first, then by name; at most `max_items`.
    pub fn place_list(
        &self,
        upper_left: LonLat<f64>,
        lower_right: LonLat<f64>,
        max_items: usize,
    ) -> Result<Vec<PlaceFacts>> {
        if !(upper_left.lat > lower_right.lat && upper_left.lon < lower_right.lon) {
            return Err(Error::validation("upperLeft", "upper-left must be north-west of lower-right"));
        }
        if max_items == 0 {
            return Err(Error::validation("maxItems", "maxItems must be at least 1"));
        }
        let index = self.snapshot();
        let lon_of = |i: &usize| index.places[*i].center.lon;
        let start = index.by_lon.partition_point(|i| lon_of(i) < upper_left.lon);
        let end = index.by_lon.partition_point(|i| lon_of(i) <= lower_right.lon);
        let mut hits: Vec<&PlaceFacts> = index.by_lon[start..end]
            .iter()
            .map(|&i| &index.places[i])
            .filter(|p| p.center.lat <= upper_left.lat && p.center.lat >= lower_right.lat)
            .collect();
        hits.sort_by(|a, b| b.population.cmp(&a.population).then_with(|| name_order(a, b)));
        Ok(hits.into_iter().take(max_items).cloned().collect())
    }

    /// Nearest city or landmark to `p`, with the compass direction from the
    /// place to `p`. Equal distances resolve to the first name.
    pub fn nearest_place(&self, p: LonLat<f64>) -> Result<NearestPlace> {
        let index = self.snapshot();
        let best = index
            .places
            .iter()
            .filter(|pl| pl.place_type.is_significant())
            .map(|pl| (great_circle_distance(pl.center, p), pl))
            // places are name-ordered, so min_by keeps the first of equals
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let (distance, place) = best.ok_or_else(|| Error::State("gazetteer has no cities or landmarks".into()))?;
        let direction =
            if distance == 0.0 { Direction::N } else { Direction::from_bearing(initial_bearing(place.center, p)) };
        Ok(NearestPlace { name: place.place.city.clone(), distance_meters: distance, direction })
    }
}
