//! The `terra` command line.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use terra_core::codec::{decode_any, encode, Encoding};
use terra_core::coords::Utm;
use terra_core::grid::{Scale, Theme};
use terra_core::mosaic::{compose_area, decorate, Argb, GridStyle, RenderStyle};
use terra_core::projection::{lon_lat_to_utm, utm_to_lon_lat};
use terra_core::store::{RasterPlacement, TileStore};
use terra_core::LonLatPt;

use crate::client::{Client, ImageAreaRequest, RetryPolicy, ServiceEndpoint};
use crate::error::{ClientError, ErrorCode};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_TRANSPORT: u8 = 2;
pub const EXIT_SERVICE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "terra", version, about = "Tile service client, image downloader and store maintenance tool")]
struct Cli {
    /// Service base URL.
    #[arg(long, global = true, env = "TERRA_URL", default_value = "http://127.0.0.1:8080")]
    url: String,
    /// Per-request timeout in milliseconds.
    #[arg(long, global = true, default_value_t = 30_000, value_parser = clap::value_parser!(u64).range(1..))]
    timeout_ms: u64,
    /// Attempts per request before giving up.
    #[arg(long, global = true, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    attempts: u32,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compose an image around a point from service tiles.
    DownloadImage(DownloadArgs),
    /// Cut a georeferenced raster into tiles in a local store.
    Ingest(IngestArgs),
    /// Build coarser pyramid levels in a local store.
    BuildPyramid(PyramidArgs),
    /// Convert between lon/lat and UTM: `convert LON LAT` or `convert ZONE EASTING NORTHING`.
    Convert(ConvertArgs),
    /// Re-run a request saved after a transport failure.
    Replay { file: PathBuf },
}

fn parse_theme(raw: &str) -> Result<Theme, String> {
    match raw.trim().parse::<u8>() {
        Ok(code) => Theme::from_code(code),
        Err(_) => Theme::from_layer_name(raw.trim()),
    }
    .map_err(|e| e.to_string())
}

fn parse_argb(raw: &str) -> Result<Argb, String> {
    raw.parse::<Argb>().map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
struct DownloadArgs {
    #[arg(long, allow_hyphen_values = true)]
    lon: f64,
    #[arg(long, allow_hyphen_values = true)]
    lat: f64,
    /// 1 or DOQ, 2 or DRG.
    #[arg(long, value_parser = parse_theme)]
    theme: Theme,
    /// Scale code; 10 is 1 m/px.
    #[arg(long, value_parser = clap::value_parser!(u8).range(10..=16))]
    scale: u8,
    #[arg(long, value_parser = clap::value_parser!(u32).range(50..=2000))]
    width: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(50..=2000))]
    height: u32,
    /// Output file; the extension picks the format (png, jpg, gif).
    #[arg(long, short)]
    output: PathBuf,
    /// UTM grid line width in pixels; 0 draws no grid.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u32).range(0..=100))]
    grid: u32,
    #[arg(long, value_parser = parse_argb)]
    grid_color: Option<Argb>,
    /// Border width in pixels.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u32).range(0..=100))]
    border: u32,
    #[arg(long, value_parser = parse_argb)]
    border_color: Option<Argb>,
    #[arg(long, value_parser = parse_argb)]
    font_color: Option<Argb>,
    #[arg(long)]
    logo: bool,
    /// Outline tile boundaries.
    #[arg(long)]
    tile_boundaries: bool,
    /// Ask the service to compose the image instead.
    #[arg(long)]
    via_server: bool,
    /// Where to save the request if the service cannot be reached
    /// (default: OUTPUT.request.json).
    #[arg(long)]
    request_file: Option<PathBuf>,
}

impl DownloadArgs {
    fn style(&self) -> RenderStyle {
        let d = RenderStyle::default();
        RenderStyle {
            grid_style: if self.grid > 0 { GridStyle::UtmGrid } else { GridStyle::None },
            grid_width_px: self.grid,
            grid_color: self.grid_color.unwrap_or(d.grid_color),
            border_width_px: self.border,
            border_color: self.border_color.unwrap_or(d.border_color),
            font_color: self.font_color.unwrap_or(d.font_color),
            logo: self.logo,
            tile_boundaries: self.tile_boundaries,
            ..d
        }
    }
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    raster: PathBuf,
    /// TOML sidecar with zone, origin_easting, origin_northing, base_scale
    /// and optional capture_date.
    #[arg(long)]
    placement: PathBuf,
    #[arg(long, value_parser = parse_theme)]
    theme: Theme,
    /// Store tiles losslessly (only when creating a new store).
    #[arg(long)]
    lossless: bool,
}

#[derive(Debug, Args)]
struct PyramidArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, value_parser = parse_theme)]
    theme: Theme,
    /// Total number of levels including the base; by default levels are
    /// added until each zone fits in one tile.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=17))]
    levels: Option<u32>,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    /// Project into this zone instead of the longitude's own.
    #[arg(long)]
    zone: Option<u8>,
    #[arg(num_args = 2..=3, allow_negative_numbers = true, required = true)]
    values: Vec<f64>,
}

/// A command that failed, with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        let code = match e {
            ClientError::Transport { .. } => EXIT_TRANSPORT,
            ClientError::Invalid(_) => EXIT_USAGE,
            ClientError::Service(_) | ClientError::Decode(_) => EXIT_SERVICE,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<terra_core::Error> for Failure {
    fn from(e: terra_core::Error) -> Self {
        Failure { code: EXIT_SERVICE, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

/// Contents of a saved request file.
#[derive(Debug, Serialize, Deserialize)]
pub struct SavedRequest {
    pub args: Vec<String>,
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run(argv: Vec<OsString>) -> u8 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli, &argv) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("terra: {f}");
            f.code
        }
    }
}

fn client(cli: &Cli) -> Result<Client, Failure> {
    let endpoint = ServiceEndpoint::new(cli.url.clone())
        .with_timeout(Duration::from_millis(cli.timeout_ms))
        .with_retry(RetryPolicy { max_attempts: cli.attempts, ..RetryPolicy::default() });
    Ok(Client::new(endpoint)?)
}

fn execute(cli: Cli, argv: &[OsString]) -> Result<(), Failure> {
    match &cli.command {
        Command::DownloadImage(args) => {
            let client = client(&cli)?;
            match download(&client, args) {
                Err(Failure { code: EXIT_TRANSPORT, message }) => {
                    let path = args.request_file.clone().unwrap_or_else(|| request_file_for(&args.output));
                    let saved =
                        SavedRequest { args: argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect() };
                    let note = match serde_json::to_vec_pretty(&saved)
                        .map_err(|e| e.to_string())
                        .and_then(|b| std::fs::write(&path, b).map_err(|e| e.to_string()))
                    {
                        Ok(()) => {
                            format!("request saved to {}; rerun with `terra replay {}`", path.display(), path.display())
                        }
                        Err(e) => format!("could not save request to {}: {e}", path.display()),
                    };
                    Err(Failure { code: EXIT_TRANSPORT, message: format!("{message}\n{note}") })
                }
                other => other,
            }
        }
        Command::Ingest(args) => ingest(args),
        Command::BuildPyramid(args) => build_pyramid(args),
        Command::Convert(args) => convert(args),
        Command::Replay { file } => {
            let text = std::fs::read(file).map_err(|e| usage(format!("cannot read {}: {e}", file.display())))?;
            let saved: SavedRequest = serde_json::from_slice(&text)
                .map_err(|e| usage(format!("{} is not a request file: {e}", file.display())))?;
            if saved.args.first().is_some_and(|a| a == "replay") {
                return Err(usage("a request file cannot itself replay a request"));
            }
            let mut argv: Vec<OsString> = vec!["terra".into()];
            argv.extend(saved.args.into_iter().map(OsString::from));
            match run(argv) {
                EXIT_OK => Ok(()),
                code => Err(Failure { code, message: "replayed request failed".into() }),
            }
        }
    }
}

fn request_file_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(OsString::from).unwrap_or_else(|| "terra".into());
    name.push(".request.json");
    output.with_file_name(name)
}

fn output_encoding(path: &Path) -> Result<Encoding, Failure> {
    path.extension()
        .and_then(|e| e.to_str())
        .and_then(Encoding::from_extension)
        .ok_or_else(|| usage(format!("cannot tell the image format of {}; use .png, .jpg or .gif", path.display())))
}

fn download(client: &Client, args: &DownloadArgs) -> Result<(), Failure> {
    let encoding = output_encoding(&args.output)?;
    let center = LonLatPt::new(args.lon, args.lat).map_err(|e| usage(e.to_string()))?;
    let scale = Scale::served(args.scale).map_err(|e| usage(e.to_string()))?;
    let style = args.style();

    let bytes = if args.via_server {
        let req = ImageAreaRequest { theme: args.theme, scale, center, width: args.width, height: args.height, style };
        let image = client.get_image_area(req)?;
        if Encoding::sniff(&image.bytes) == Some(encoding) {
            image.bytes
        } else {
            encode(&decode_any(&image.bytes)?, encoding)?
        }
    } else {
        let abb = client.get_area_from_pt(args.theme, scale, center, args.width, args.height)?;
        let total = abb.tiles().len();
        let mut missing = 0usize;
        let mut failure: Option<ClientError> = None;
        let composed = compose_area(&abb, |id| match client.get_tile(*id) {
            Ok(tile) => Ok(Some(tile.bytes)),
            Err(e) if e.service_code() == Some(ErrorCode::NotFound) => {
                missing += 1;
                Ok(None)
            }
            Err(e) => {
                let message = e.to_string();
                failure = Some(e);
                Err(terra_core::Error::State(message))
            }
        });
        let mut canvas = match (composed, failure) {
            (_, Some(e)) => return Err(e.into()),
            (result, None) => result?,
        };
        if missing > 0 {
            eprintln!("warning: {missing} of {total} tiles not found; filled with gray");
        }
        decorate(&mut canvas, &abb.frame(), Some(scale), &style);
        encode(&canvas, encoding)?
    };
    std::fs::write(&args.output, &bytes)
        .map_err(|e| Failure { code: EXIT_SERVICE, message: format!("cannot write {}: {e}", args.output.display()) })?;
    println!("wrote {} ({}x{})", args.output.display(), args.width, args.height);
    Ok(())
}

fn ingest(args: &IngestArgs) -> Result<(), Failure> {
    let placement = RasterPlacement::from_toml_file(&args.placement)?;
    let store = TileStore::open_or_create(&args.store, args.lossless)?;
    println!("ingesting {} into {} as {}", args.raster.display(), args.store.display(), args.theme.layer_name());
    let n = store.ingest_file(&args.raster, &args.placement, args.theme)?;
    println!("stored {n} tiles at scale {} in zone {}", placement.base_scale.code(), placement.zone);
    Ok(())
}

fn build_pyramid(args: &PyramidArgs) -> Result<(), Failure> {
    let store = TileStore::open(&args.store)?;
    let levels = store.build_pyramid(args.theme, args.levels.map(|l| l as usize))?;
    for (scale, count) in &levels {
        println!("scale {}: {count} tiles", scale.code());
    }
    Ok(())
}

fn convert(args: &ConvertArgs) -> Result<(), Failure> {
    match args.values[..] {
        [lon, lat] => {
            let p = LonLatPt::new(lon, lat).map_err(|e| usage(e.to_string()))?;
            let u = lon_lat_to_utm(p, args.zone)?;
            println!("zone={} easting={:.3} northing={:.3}", u.zone, u.easting, u.northing);
        }
        [zone, easting, northing] => {
            if args.zone.is_some() {
                return Err(usage("--zone applies only to lon/lat input"));
            }
            if zone.fract() != 0.0 || !(1.0..=60.0).contains(&zone) {
                return Err(usage(format!("zone {zone} is not an integer in 1..=60")));
            }
            let p = utm_to_lon_lat(Utm { zone: zone as u8, easting, northing })?;
            println!("lon={:.9} lat={:.9}", p.lon, p.lat);
        }
        _ => return Err(usage("convert takes LON LAT or ZONE EASTING NORTHING")),
    }
    Ok(())
}
