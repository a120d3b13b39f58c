//! Geographic <-> UTM conversion on the GRS80 ellipsoid (NAD83).
//!
//! Forward and inverse use Krüger's series for the transverse Mercator
//! projection, carried to sixth order in the third flattening `n`:
//!
//! * forward: geodetic latitude -> conformal latitude (closed form), then
//!   `ξ = ξ' + Σ αⱼ sin(2jξ') cosh(2jη')`, `η = η' + Σ αⱼ cos(2jξ') sinh(2jη')`
//!   for j = 1..6;
//! * inverse: `ξ' = ξ - Σ βⱼ sin(2jξ) cosh(2jη)` (same shape with βⱼ), then the
//!   conformal latitude is inverted with Newton's method on `tan φ`.
//!
//! Truncation error of the sixth-order series is well below a millimetre
//! anywhere within a few thousand kilometres of the central meridian.

use crate::coords::{LonLat, Utm};
use crate::error::{Error, Result};
use crate::real::Real;

pub const UTM_SCALE_FACTOR: f64 = 0.9996;
pub const UTM_FALSE_EASTING: f64 = 500_000.0;

/// Forward projection refuses points farther than this from the zone's
/// central meridian (only reachable with a forced zone).
pub const MAX_CENTRAL_MERIDIAN_OFFSET_DEG: f64 = 10.0;

/// Latitudes accepted by the forward projection, in degrees.
pub const MIN_LATITUDE_DEG: f64 = 0.0;
pub const MAX_LATITUDE_DEG: f64 = 84.0;

/// Sanity band for inverse eastings, in metres.
pub const MIN_EASTING: f64 = 160_000.0;
pub const MAX_EASTING: f64 = 840_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid<T> {
    pub semi_major_axis: T,
    pub inverse_flattening: T,
}

impl<T: Real> Ellipsoid<T> {
    /// The NAD83 reference ellipsoid.
    pub fn grs80() -> Self {
        Ellipsoid { semi_major_axis: T::lit(6_378_137.0), inverse_flattening: T::lit(298.257_222_101) }
    }

    pub fn flattening(&self) -> T {
        T::one() / self.inverse_flattening
    }

    /// First eccentricity `e`.
    pub fn eccentricity(&self) -> T {
        let f = self.flattening();
        (f * (T::lit(2.0) - f)).sqrt()
    }

    /// Third flattening `n = f / (2 - f)`.
    pub fn third_flattening(&self) -> T {
        let f = self.flattening();
        f / (T::lit(2.0) - f)
    }
}

/// Transverse Mercator projection for one ellipsoid and scale factor.
/// The central meridian is supplied per call so one instance serves all zones.
#[derive(Debug, Clone)]
pub struct TransverseMercator<T> {
    e: T,
    e2m: T,
    /// `k0 · A` where `A` is the rectifying radius.
    scaled_radius: T,
    false_easting: T,
    alpha: [T; 6],
    beta: [T; 6],
}

fn poly<T: Real>(n: T, terms: &[(f64, f64)]) -> T {
    // terms are (coefficient numerator / denominator pre-divided, power)
    terms.iter().fold(T::zero(), |acc, &(c, p)| acc + T::lit(c) * n.powf(T::lit(p)))
}

impl<T: Real> TransverseMercator<T> {
    pub fn new(ellipsoid: Ellipsoid<T>, scale_factor: T, false_easting: T) -> Self {
        let n = ellipsoid.third_flattening();
        let e = ellipsoid.eccentricity();
        let n2 = n * n;
        let rectifying = ellipsoid.semi_major_axis / (T::one() + n)
            * (T::one() + n2 / T::lit(4.0) + n2 * n2 / T::lit(64.0) + n2 * n2 * n2 / T::lit(256.0));

        let alpha = [
            poly(
                n,
                &[
                    (1.0 / 2.0, 1.0),
                    (-2.0 / 3.0, 2.0),
                    (5.0 / 16.0, 3.0),
                    (41.0 / 180.0, 4.0),
                    (-127.0 / 288.0, 5.0),
                    (7891.0 / 37800.0, 6.0),
                ],
            ),
            poly(
                n,
                &[
                    (13.0 / 48.0, 2.0),
                    (-3.0 / 5.0, 3.0),
                    (557.0 / 1440.0, 4.0),
                    (281.0 / 630.0, 5.0),
                    (-1983433.0 / 1935360.0, 6.0),
                ],
            ),
            poly(
                n,
                &[(61.0 / 240.0, 3.0), (-103.0 / 140.0, 4.0), (15061.0 / 26880.0, 5.0), (167603.0 / 181440.0, 6.0)],
            ),
            poly(n, &[(49561.0 / 161280.0, 4.0), (-179.0 / 168.0, 5.0), (6601661.0 / 7257600.0, 6.0)]),
            poly(n, &[(34729.0 / 80640.0, 5.0), (-3418889.0 / 1995840.0, 6.0)]),
            poly(n, &[(212378941.0 / 319334400.0, 6.0)]),
        ];
        let beta = [
            poly(
                n,
                &[
                    (1.0 / 2.0, 1.0),
                    (-2.0 / 3.0, 2.0),
                    (37.0 / 96.0, 3.0),
                    (-1.0 / 360.0, 4.0),
                    (-81.0 / 512.0, 5.0),
                    (96199.0 / 604800.0, 6.0),
                ],
            ),
            poly(
                n,
                &[
                    (1.0 / 48.0, 2.0),
                    (1.0 / 15.0, 3.0),
                    (-437.0 / 1440.0, 4.0),
                    (46.0 / 105.0, 5.0),
                    (-1118711.0 / 3870720.0, 6.0),
                ],
            ),
            poly(n, &[(17.0 / 480.0, 3.0), (-37.0 / 840.0, 4.0), (-209.0 / 4480.0, 5.0), (5569.0 / 90720.0, 6.0)]),
            poly(n, &[(4397.0 / 161280.0, 4.0), (-11.0 / 504.0, 5.0), (-830251.0 / 7257600.0, 6.0)]),
            poly(n, &[(4583.0 / 161280.0, 5.0), (-108847.0 / 3991680.0, 6.0)]),
            poly(n, &[(20648693.0 / 638668800.0, 6.0)]),
        ];

        TransverseMercator {
            e,
            e2m: T::one() - e * e,
            scaled_radius: scale_factor * rectifying,
            false_easting,
            alpha,
            beta,
        }
    }

    /// UTM parameters on GRS80.
    pub fn utm() -> Self {
        Self::new(Ellipsoid::grs80(), T::lit(UTM_SCALE_FACTOR), T::lit(UTM_FALSE_EASTING))
    }

    /// `tan` of the conformal latitude given `tan` of the geodetic latitude.
    fn conformal_tan(&self, tau: T) -> T {
        let hyp = (T::one() + tau * tau).sqrt();
        let sigma = (self.e * (self.e * tau / hyp).atanh()).sinh();
        tau * (T::one() + sigma * sigma).sqrt() - sigma * hyp
    }

    /// Inverts [`Self::conformal_tan`] by Newton iteration.
    fn geodetic_tan(&self, tau_prime: T) -> T {
        let mut tau = tau_prime;
        for _ in 0..12 {
            let tp = self.conformal_tan(tau);
            let slope = self.e2m * (T::one() + tp * tp).sqrt() * (T::one() + tau * tau).sqrt()
                / (T::one() + self.e2m * tau * tau);
            let step = (tau_prime - tp) / slope;
            tau = tau + step;
            if step.abs() <= T::solver_tolerance() * (T::one() + tau.abs()) {
                break;
            }
        }
        tau
    }

    /// Projects geodetic (λ offset from central meridian, φ), both in
    /// radians, to (easting, northing) with zero false northing.
    pub fn forward_radians(&self, dlon: T, lat: T) -> (T, T) {
        let tau_prime = self.conformal_tan(lat.tan());
        let (sin_l, cos_l) = dlon.sin_cos();
        let xi_p = tau_prime.atan2(cos_l);
        let eta_p = (sin_l / (tau_prime * tau_prime + cos_l * cos_l).sqrt()).asinh();

        let mut xi = xi_p;
        let mut eta = eta_p;
        for (j, a) in self.alpha.iter().enumerate() {
            let k = T::lit(2.0 * (j + 1) as f64);
            xi = xi + *a * (k * xi_p).sin() * (k * eta_p).cosh();
            eta = eta + *a * (k * xi_p).cos() * (k * eta_p).sinh();
        }
        (self.false_easting + self.scaled_radius * eta, self.scaled_radius * xi)
    }

    /// Inverse of [`Self::forward_radians`]; returns (λ offset, φ) in radians.
    pub fn inverse_radians(&self, easting: T, northing: T) -> (T, T) {
        let xi = northing / self.scaled_radius;
        let eta = (easting - self.false_easting) / self.scaled_radius;

        let mut xi_p = xi;
        let mut eta_p = eta;
        for (j, b) in self.beta.iter().enumerate() {
            let k = T::lit(2.0 * (j + 1) as f64);
            xi_p = xi_p - *b * (k * xi).sin() * (k * eta).cosh();
            eta_p = eta_p - *b * (k * xi).cos() * (k * eta).sinh();
        }

        let sinh_eta = eta_p.sinh();
        let cos_xi = xi_p.cos();
        let tau_prime = xi_p.sin() / (sinh_eta * sinh_eta + cos_xi * cos_xi).sqrt();
        let dlon = sinh_eta.atan2(cos_xi);
        let lat = self.geodetic_tan(tau_prime).atan();
        (dlon, lat)
    }
}

/// Central meridian of a UTM zone, in degrees.
pub fn central_meridian<T: Real>(zone: u8) -> T {
    T::lit(f64::from(zone) * 6.0 - 183.0)
}

/// UTM zone containing `lon`: `floor((lon + 180) / 6) + 1`.
pub fn utm_zone_for_longitude<T: Real>(lon: T) -> Result<u8> {
    if !lon.is_finite() || lon < T::lit(-180.0) || lon >= T::lit(180.0) {
        return Err(Error::domain("lon", format!("longitude {lon} outside [-180, 180)")));
    }
    let zone = ((lon + T::lit(180.0)) / T::lit(6.0)).floor().as_f64() as i64 + 1;
    Ok(zone.clamp(1, 60) as u8)
}

fn wrap_degrees<T: Real>(d: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    let mut w = d % full;
    if w > half {
        w = w - full;
    } else if w <= -half {
        w = w + full;
    }
    w
}

/// Forward UTM projection. The zone is `forced_zone` when given, otherwise
/// the zone containing the point's longitude.
pub fn lon_lat_to_utm<T: Real>(p: LonLat<T>, forced_zone: Option<u8>) -> Result<Utm<T>> {
    let p = LonLat::new(p.lon, p.lat)?;
    if p.lat < T::lit(MIN_LATITUDE_DEG) || p.lat > T::lit(MAX_LATITUDE_DEG) {
        return Err(Error::domain("lat", format!("latitude {} outside the projection's valid band [0, 84]", p.lat)));
    }
    let zone = match forced_zone {
        Some(z) if (1..=60).contains(&z) => z,
        Some(z) => return Err(Error::validation("zone", format!("UTM zone {z} outside [1, 60]"))),
        None => utm_zone_for_longitude(p.lon)?,
    };
    let dlon = wrap_degrees(p.lon - central_meridian::<T>(zone));
    if dlon.abs() > T::lit(MAX_CENTRAL_MERIDIAN_OFFSET_DEG) {
        return Err(Error::domain("lon", format!("longitude {} too far from zone {zone}'s central meridian", p.lon)));
    }
    let (easting, northing) = TransverseMercator::<T>::utm().forward_radians(dlon.to_radians(), p.lat.to_radians());
    Ok(Utm { zone, easting, northing })
}

/// Inverse UTM projection.
pub fn utm_to_lon_lat<T: Real>(p: Utm<T>) -> Result<LonLat<T>> {
    let p = Utm::new(p.zone, p.easting, p.northing)?;
    if p.easting <= T::lit(MIN_EASTING) || p.easting >= T::lit(MAX_EASTING) {
        return Err(Error::domain("easting", format!("easting {} outside ({MIN_EASTING}, {MAX_EASTING})", p.easting)));
    }
    let (dlon, lat) = TransverseMercator::<T>::utm().inverse_radians(p.easting, p.northing);
    let lon = wrap_degrees(central_meridian::<T>(p.zone) + dlon.to_degrees());
    let lon = if lon >= T::lit(180.0) { lon - T::lit(360.0) } else { lon };
    Ok(LonLat { lon, lat: lat.to_degrees() })
}
