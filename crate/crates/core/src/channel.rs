//! Physical-layer chain: geometry, UMa line-of-sight pathloss, received
//! power, thermal noise, and SINR.
//!
//! All internal arithmetic is in linear SI units (watts, hertz, meters).
//! Decibel values only appear at the edges ([`sinr_db`], [`watts_to_dbm`]).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Cartesian position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Same ground position, different height.
    pub fn with_z(self, z: f64) -> Self {
        Self { z, ..self }
    }
}

/// Axis-aligned coverage box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Volume {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for Volume {
    fn default() -> Self {
        Self::cube(1000.0)
    }
}

impl Volume {
    /// `[-half, half]` on every axis.
    pub fn cube(half: f64) -> Self {
        Self {
            x_min: -half,
            x_max: half,
            y_min: -half,
            y_max: half,
            z_min: -half,
            z_max: half,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("x", self.x_min, self.x_max),
            ("y", self.y_min, self.y_max),
            ("z", self.z_min, self.z_max),
        ];
        for (axis, lo, hi) in axes {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Validation(format!(
                    "volume {axis} range [{lo}, {hi}] must be finite with min < max"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (self.x_min..=self.x_max).contains(&p.x)
            && (self.y_min..=self.y_max).contains(&p.y)
            && (self.z_min..=self.z_max).contains(&p.z)
    }

    /// Clamp a point onto the box.
    pub fn clamp(&self, p: Point3) -> Point3 {
        Point3 {
            x: p.x.clamp(self.x_min, self.x_max),
            y: p.y.clamp(self.y_min, self.y_max),
            z: p.z.clamp(self.z_min, self.z_max),
        }
    }
}

/// Bandwidth over which thermal noise is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseBandwidth {
    /// `B * Δf`: one subcarrier spacing per resource block.
    #[default]
    RbGrid,
    /// `B * data_subcarriers_per_rb * Δf`: the data-carrying bandwidth.
    EffectiveData,
}

/// Physical and model constants for the link budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub carrier_frequency_ghz: f64,
    pub tx_power_dbm: f64,
    /// Linear transmit antenna gain (1.0 = isotropic).
    pub tx_gain_linear: f64,
    /// Linear receive antenna gain (1.0 = isotropic).
    pub rx_gain_linear: f64,
    pub h_bs: f64,
    pub h_ut: f64,
    /// Effective environment height.
    pub h_e: f64,
    pub rb_count: u32,
    pub data_subcarriers_per_rb: u32,
    pub numerology: u32,
    /// Thermal noise power spectral density, W/Hz.
    pub noise_psd_w_per_hz: f64,
    pub noise_bandwidth: NoiseBandwidth,
    pub d2d_min: f64,
    pub d2d_max: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            carrier_frequency_ghz: 5.0,
            tx_power_dbm: 24.0,
            tx_gain_linear: 1.0,
            rx_gain_linear: 1.0,
            h_bs: 25.0,
            h_ut: 1.5,
            h_e: 1.0,
            rb_count: 266,
            data_subcarriers_per_rb: 9,
            numerology: 0,
            // -174 dBm/Hz
            noise_psd_w_per_hz: 10f64.powf(-20.4),
            noise_bandwidth: NoiseBandwidth::RbGrid,
            d2d_min: 10.0,
            d2d_max: 5000.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_frequency_ghz", self.carrier_frequency_ghz),
            ("tx_gain_linear", self.tx_gain_linear),
            ("rx_gain_linear", self.rx_gain_linear),
            ("noise_psd_w_per_hz", self.noise_psd_w_per_hz),
            ("h_bs", self.h_bs),
            ("h_ut", self.h_ut),
            ("d2d_min", self.d2d_min),
            ("d2d_max", self.d2d_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(Error::InvalidConfig("tx_power_dbm must be finite".into()));
        }
        if !self.h_e.is_finite() {
            return Err(Error::InvalidConfig("h_e must be finite".into()));
        }
        if self.rb_count == 0 || self.data_subcarriers_per_rb == 0 {
            return Err(Error::InvalidConfig(
                "rb_count and data_subcarriers_per_rb must be at least 1".into(),
            ));
        }
        if self.numerology > 6 {
            return Err(Error::InvalidConfig(format!(
                "numerology {} out of range 0..=6",
                self.numerology
            )));
        }
        if self.h_bs <= self.h_e || self.h_ut <= self.h_e {
            return Err(Error::InvalidConfig(
                "antenna heights must exceed the effective environment height".into(),
            ));
        }
        if self.d2d_min >= self.d2d_max {
            return Err(Error::InvalidConfig("d2d_min must be below d2d_max".into()));
        }
        Ok(())
    }

    /// Subcarrier spacing for the configured numerology, Hz.
    pub fn scs_hz(&self) -> f64 {
        15_000.0 * f64::from(1u32 << self.numerology.min(30))
    }

    /// Slot length, seconds.
    pub fn slot_duration_s(&self) -> f64 {
        1e-3 / f64::from(1u32 << self.numerology.min(30))
    }

    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Ground-plane distance; ignores z.
pub fn distance_2d(a: &Point3, b: &Point3) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

pub fn distance_3d(a: &Point3, b: &Point3) -> f64 {
    distance_2d(a, b).hypot(a.z - b.z)
}

/// `4 (h_BS - h_E)(h_UT - h_E) f / c`, meters.
pub fn breakpoint_distance(cfg: &ModelConfig) -> f64 {
    4.0 * (cfg.h_bs - cfg.h_e) * (cfg.h_ut - cfg.h_e) * cfg.carrier_frequency_ghz * 1e9
        / SPEED_OF_LIGHT
}

/// Linear UMa LoS pathloss (≥ 1).
///
/// Below the breakpoint the loss grows as `d3d^2.2`, above it as `d3d^4`
/// scaled so that both branches meet at `d_BP`. `d2d` outside
/// `[d2d_min, d2d_max]` is an error; callers decide whether to clamp or
/// reject.
pub fn pathloss_uma_los(d2d: f64, d3d: f64, cfg: &ModelConfig) -> Result<f64> {
    if !(d2d >= cfg.d2d_min && d2d <= cfg.d2d_max) {
        return Err(Error::DistanceOutOfRange {
            d2d,
            min: cfg.d2d_min,
            max: cfg.d2d_max,
        });
    }
    // d3d is computed with a different rounding path than d2d
    if d3d < d2d * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "3D distance {d3d} shorter than 2D distance {d2d}"
        )));
    }
    let f2 = cfg.carrier_frequency_ghz * cfg.carrier_frequency_ghz;
    let base = 10f64.powf(2.8) * f2;
    let d_bp = breakpoint_distance(cfg);
    if d2d <= d_bp {
        Ok(base * d3d.powf(2.2))
    } else {
        let dh = cfg.h_bs - cfg.h_ut;
        Ok(base * d3d.powi(4) / (d_bp * d_bp + dh * dh).powf(0.9))
    }
}

/// Thermal noise power, watts.
pub fn noise_power(cfg: &ModelConfig) -> f64 {
    let rb_grid = f64::from(cfg.rb_count) * cfg.scs_hz();
    let bandwidth = match cfg.noise_bandwidth {
        NoiseBandwidth::RbGrid => rb_grid,
        NoiseBandwidth::EffectiveData => rb_grid * f64::from(cfg.data_subcarriers_per_rb),
    };
    cfg.noise_psd_w_per_hz * bandwidth
}

/// Received power at the UE when the cell's transmit power is shared among
/// `load` associated UEs, watts.
pub fn rsrp(ngmc: &Point3, ue: &Point3, load: u32, cfg: &ModelConfig) -> Result<f64> {
    if load == 0 {
        return Err(Error::ZeroLoad);
    }
    let pl = pathloss_uma_los(distance_2d(ngmc, ue), distance_3d(ngmc, ue), cfg)?;
    Ok(received_power(pl, load, cfg))
}

/// RSRP from an already computed linear pathloss.
pub fn received_power(pathloss: f64, load: u32, cfg: &ModelConfig) -> f64 {
    cfg.tx_power_w() * cfg.tx_gain_linear * cfg.rx_gain_linear / (f64::from(load) * pathloss)
}

/// Interference-free SINR in dB. Zero received power maps to
/// `f64::NEG_INFINITY`.
pub fn sinr_db(received: f64, noise: f64) -> f64 {
    if received <= 0.0 {
        return f64::NEG_INFINITY;
    }
    10.0 * (received / noise).log10()
}
