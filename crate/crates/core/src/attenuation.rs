//! Calibrated excess attenuation and its per-hypothesis statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BandConfig;
use crate::sweep::FrequencySweep;

/// How a coefficient ratio is expressed in dB.
///
/// Transmission coefficients are voltage-like, so the default reads the
/// magnitude ratio as an amplitude (`20·log10`). `Power10Log` treats the
/// stored magnitudes as power-like quantities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DbConvention {
    #[default]
    #[serde(rename = "amplitude_20log")]
    Amplitude20Log,
    #[serde(rename = "power_10log")]
    Power10Log,
}

impl DbConvention {
    pub fn factor(self) -> f64 {
        match self {
            DbConvention::Amplitude20Log => 20.0,
            DbConvention::Power10Log => 10.0,
        }
    }
}

/// Per-frequency excess attenuation (dB) of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct AttenuationSeries {
    band: BandConfig,
    values: Vec<f64>,
    label: String,
}

impl AttenuationSeries {
    pub fn new(band: BandConfig, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        band.validate()?;
        if values.len() != band.n_points {
            return Err(Error::invalid(
                "attenuation series",
                format!("{} values for a {}-point band", values.len(), band.n_points),
            ));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "attenuation",
                index,
            });
        }
        Ok(Self {
            band,
            values,
            label: label.into(),
        })
    }

    pub fn band(&self) -> &BandConfig {
        &self.band
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttenuationStats {
    pub mean_db: f64,
    pub std_db: f64,
}

impl AttenuationStats {
    /// Mean and population standard deviation (1/N normalization).
    /// `None` for an empty slice.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean_db: mean,
            std_db: var.sqrt(),
        })
    }
}

/// `A_k = −20·log10(|T(f_k)| / |T₀(f_k)|)`, using the default convention.
pub fn excess_attenuation(
    measured: &FrequencySweep,
    baseline: &FrequencySweep,
) -> Result<AttenuationSeries> {
    excess_attenuation_with(measured, baseline, DbConvention::default())
}

pub fn excess_attenuation_with(
    measured: &FrequencySweep,
    baseline: &FrequencySweep,
    convention: DbConvention,
) -> Result<AttenuationSeries> {
    if measured.band() != baseline.band() {
        return Err(Error::BandMismatch(format!(
            "measured {:?} vs baseline {:?}",
            measured.band(),
            baseline.band()
        )));
    }
    let factor = convention.factor();
    let mut out = Vec::with_capacity(measured.len());
    for (index, (t, t0)) in measured.values().iter().zip(baseline.values()).enumerate() {
        let base = t0.norm();
        if base == 0.0 {
            return Err(Error::ZeroBaseline { index });
        }
        let a = -factor * (t.norm() / base).log10();
        if !a.is_finite() {
            return Err(Error::NonFinite {
                what: "attenuation",
                index,
            });
        }
        out.push(a);
    }
    AttenuationSeries::new(measured.band().clone(), out, measured.label())
}

/// Population mean and standard deviation of the series.
pub fn stats(series: &AttenuationSeries) -> AttenuationStats {
    // Series are never empty: bands have at least two points.
    AttenuationStats::from_values(series.values()).expect("nonempty series")
}
