//! Sun position and plane-of-array transposition.

use serde::{Deserialize, Serialize};

use crate::math::{self, PI};
use crate::model::SiteConfig;
use crate::time::{self, Hour};

/// Solar constant in W/m².
const SOLAR_CONSTANT: f64 = 1367.0;

/// Zenith angles above this are treated as this for beam geometry.
const MAX_BEAM_ZENITH_DEG: f64 = 85.0;

/// Ground reflectance used when none is configured.
pub const DEFAULT_ALBEDO: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SunPosition {
    pub zenith_deg: f64,
    /// Clockwise from north.
    pub azimuth_deg: f64,
    /// Extraterrestrial normal irradiance in W/m².
    pub extraterrestrial_wm2: f64,
}

impl SunPosition {
    pub fn is_up(&self) -> bool {
        self.zenith_deg < 90.0
    }
}

/// Sun position at the middle of `hour`.
pub fn sun_position(site: &SiteConfig, hour: Hour) -> SunPosition {
    sun_position_at(site.latitude_deg, site.longitude_deg, hour.unix_seconds() as f64 + 1800.0)
}

/// Sun position at an instant given in Unix seconds.
pub fn sun_position_at(latitude_deg: f64, longitude_deg: f64, unix_seconds: f64) -> SunPosition {
    let (doy, utc_hour) = time::day_of_year_and_hour(unix_seconds);
    let gamma = 2.0 * PI / 365.0 * (doy as f64 - 1.0 + (utc_hour - 12.0) / 24.0);
    let (s1, c1) = (math::sin(gamma), math::cos(gamma));
    let (s2, c2) = (math::sin(2.0 * gamma), math::cos(2.0 * gamma));
    let (s3, c3) = (math::sin(3.0 * gamma), math::cos(3.0 * gamma));

    let decl = 0.006918 - 0.399912 * c1 + 0.070257 * s1 - 0.006758 * c2 + 0.000907 * s2
        - 0.002697 * c3
        + 0.00148 * s3;
    let eot_min = 229.18 * (0.000075 + 0.001868 * c1 - 0.032077 * s1 - 0.014615 * c2 - 0.040849 * s2);

    let true_solar_min = utc_hour * 60.0 + eot_min + 4.0 * longitude_deg;
    let hour_angle = math::to_rad(true_solar_min / 4.0 - 180.0);
    let lat = math::to_rad(latitude_deg);

    let cos_zen = math::sin(lat) * math::sin(decl) + math::cos(lat) * math::cos(decl) * math::cos(hour_angle);
    let zenith = math::acos(cos_zen);
    let az = math::atan2(
        math::sin(hour_angle),
        math::cos(hour_angle) * math::sin(lat) - math::tan(decl) * math::cos(lat),
    );
    let mut azimuth_deg = math::to_deg(az) + 180.0;
    if azimuth_deg >= 360.0 {
        azimuth_deg -= 360.0;
    }
    let extraterrestrial_wm2 = SOLAR_CONSTANT * (1.0 + 0.033 * math::cos(2.0 * PI * doy as f64 / 365.0));
    SunPosition { zenith_deg: math::to_deg(zenith), azimuth_deg, extraterrestrial_wm2 }
}

/// Erbs diffuse fraction of global horizontal irradiance.
pub fn erbs_diffuse_fraction(kt: f64) -> f64 {
    if kt <= 0.22 {
        1.0 - 0.09 * kt
    } else if kt <= 0.8 {
        0.9511 - 0.1604 * kt + 4.388 * kt * kt - 16.638 * kt * kt * kt + 12.336 * kt * kt * kt * kt
    } else {
        0.165
    }
}

/// Hourly clearness index; zero when the sun is down.
pub fn clearness_index(ghi_wh_m2: f64, sun: &SunPosition) -> f64 {
    let cos_z = math::cos(math::to_rad(sun.zenith_deg));
    if cos_z <= 0.0 {
        return 0.0;
    }
    let horizontal_extra = sun.extraterrestrial_wm2 * math::cos(math::to_rad(sun.zenith_deg.min(MAX_BEAM_ZENITH_DEG)));
    (ghi_wh_m2 / horizontal_extra).clamp(0.0, 1.0)
}

/// Irradiation on the panel plane from global horizontal irradiation using
/// Erbs decomposition, isotropic sky diffuse and ground reflection.
///
/// Written as GHI plus corrections so that a horizontal panel receives
/// exactly GHI. With the sun below the horizon everything is diffuse.
pub fn project_to_poa(ghi_wh_m2: f64, sun: &SunPosition, site: &SiteConfig, albedo: f64) -> f64 {
    if ghi_wh_m2 <= 0.0 {
        return 0.0;
    }
    let beta = math::to_rad(site.panel_tilt_deg);
    let cos_beta = math::cos(beta);
    let sky_view = (1.0 + cos_beta) / 2.0;
    let ground_view = (1.0 - cos_beta) / 2.0;

    let (beam, diffuse, rb) = if sun.is_up() {
        let diffuse = ghi_wh_m2 * erbs_diffuse_fraction(clearness_index(ghi_wh_m2, sun));
        let z = math::to_rad(sun.zenith_deg.min(MAX_BEAM_ZENITH_DEG));
        let cos_z = math::cos(z);
        let cos_inc = cos_z * cos_beta
            + math::sin(z) * math::sin(beta) * math::cos(math::to_rad(sun.azimuth_deg - site.panel_azimuth_deg));
        (ghi_wh_m2 - diffuse, diffuse, cos_inc.max(0.0) / cos_z)
    } else {
        (0.0, ghi_wh_m2, 1.0)
    };

    let poa = ghi_wh_m2 + beam * (rb - 1.0) + diffuse * (sky_view - 1.0) + ghi_wh_m2 * albedo * ground_view;
    poa.max(0.0)
}
