//! Power delay profiles from windowed, zero-padded inverse transforms.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BandConfig;
use crate::sweep::FrequencySweep;
use crate::SPEED_OF_LIGHT;

pub const DEFAULT_ZERO_PAD: usize = 8;
pub const DEFAULT_KAISER_BETA: f64 = 6.0;

/// Energy fraction in the upper half of the delay axis above which a PDP is
/// flagged as possibly aliased.
pub const ALIASING_ENERGY_FRACTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    Hann,
    Kaiser { beta: f64 },
}

impl Default for Window {
    fn default() -> Self {
        Window::Kaiser {
            beta: DEFAULT_KAISER_BETA,
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Rectangular => write!(f, "rectangular"),
            Window::Hann => write!(f, "hann"),
            Window::Kaiser { beta } => write!(f, "kaiser({beta})"),
        }
    }
}

impl FromStr for Window {
    type Err = Error;

    /// `rectangular`, `hann`, `kaiser` (β = 6) or `kaiser(β)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "rectangular" | "rect" => return Ok(Window::Rectangular),
            "hann" => return Ok(Window::Hann),
            "kaiser" => return Ok(Window::default()),
            _ => {}
        }
        s.strip_prefix("kaiser(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|b| b.trim().parse::<f64>().ok())
            .filter(|b| b.is_finite() && *b >= 0.0)
            .map(|beta| Window::Kaiser { beta })
            .ok_or_else(|| Error::invalid("window", format!("unknown window '{s}'")))
    }
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Symmetric window coefficients of length `n`.
pub fn window_coefficients(window: Window, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let m = (n - 1) as f64;
    match window {
        Window::Rectangular => vec![1.0; n],
        Window::Hann => (0..n)
            .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / m).cos())
            .collect(),
        Window::Kaiser { beta } => {
            let norm = bessel_i0(beta);
            (0..n)
                .map(|k| {
                    let r = 2.0 * k as f64 / m - 1.0;
                    bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm
                })
                .collect()
        }
    }
}

/// Path-length resolution `c / (f_stop − f_start)` (m).
pub fn delay_resolution(cfg: &BandConfig) -> f64 {
    SPEED_OF_LIGHT / cfg.span()
}

/// Maximum unambiguous path length `c / Δf` (m).
pub fn alias_free_range(cfg: &BandConfig) -> f64 {
    SPEED_OF_LIGHT / cfg.spacing()
}

/// Power versus path length `z = cτ` on `[0, alias_free_range)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerDelayProfile {
    /// Path-length axis (m), starting at 0.
    pub path_lengths: Vec<f64>,
    /// Linear power. A single tap of amplitude `a` peaks at `|a|²`.
    pub power: Vec<f64>,
    /// Power in dB relative to the global maximum.
    pub power_db: Vec<f64>,
    /// `c / B` (m).
    pub delay_resolution: f64,
    /// `c / Δf` (m).
    pub alias_free_range: f64,
    pub window: Window,
    pub zero_pad_factor: usize,
    /// Fraction of the total energy in the upper half of the axis.
    pub upper_half_energy_fraction: f64,
}

impl PowerDelayProfile {
    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// Spacing of the (padded) path-length axis (m).
    pub fn axis_spacing(&self) -> f64 {
        self.alias_free_range / self.len() as f64
    }

    pub fn delays(&self) -> Vec<f64> {
        self.path_lengths
            .iter()
            .map(|z| z / SPEED_OF_LIGHT)
            .collect()
    }

    pub fn peak_index(&self) -> usize {
        self.power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i)
    }

    pub fn peak_power(&self) -> f64 {
        self.power[self.peak_index()]
    }

    pub fn aliasing_warning(&self) -> bool {
        self.upper_half_energy_fraction > ALIASING_ENERGY_FRACTION
    }
}

/// Window, zero-pad to `N_f × zero_pad_factor`, inverse transform and take
/// the squared magnitude.
///
/// The transform is scaled by the window sum, so a unit tap keeps unit
/// peak power regardless of window or padding.
pub fn pdp(
    sweep: &FrequencySweep,
    window: Window,
    zero_pad_factor: usize,
) -> Result<PowerDelayProfile> {
    if zero_pad_factor == 0 {
        return Err(Error::invalid("zero_pad_factor", "must be ≥ 1"));
    }
    let n = sweep.len();
    let m = n * zero_pad_factor;
    let w = window_coefficients(window, n);
    let gain: f64 = w.iter().sum();

    let mut buf: Vec<Complex64> = sweep
        .values()
        .iter()
        .zip(&w)
        .map(|(v, wk)| v * *wk)
        .collect();
    buf.resize(m, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);

    let power: Vec<f64> = buf.iter().map(|h| (h / gain).norm_sqr()).collect();
    let peak = power.iter().copied().fold(0.0, f64::max);
    let power_db = power.iter().map(|p| 10.0 * (p / peak).log10()).collect();
    let band = sweep.band();
    let range = alias_free_range(band);
    let spacing = range / m as f64;
    let total: f64 = power.iter().sum();
    let upper: f64 = power[m / 2..].iter().sum();
    let upper_half_energy_fraction = if total > 0.0 { upper / total } else { 0.0 };
    if upper_half_energy_fraction > ALIASING_ENERGY_FRACTION {
        log::debug!(
            "{}: {:.1}% of PDP energy in the upper half of the delay axis",
            sweep.label(),
            100.0 * upper_half_energy_fraction
        );
    }

    Ok(PowerDelayProfile {
        path_lengths: (0..m).map(|i| i as f64 * spacing).collect(),
        power,
        power_db,
        delay_resolution: delay_resolution(band),
        alias_free_range: range,
        window,
        zero_pad_factor,
        upper_half_energy_fraction,
    })
}
