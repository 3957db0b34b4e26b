use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{frequency_grid, BandConfig};

/// One band's complex transmission coefficients on the band grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencySweep {
    band: BandConfig,
    values: Vec<Complex64>,
    label: String,
}

impl FrequencySweep {
    /// Rejects length mismatches, non-finite values and exact zeros.
    pub fn new(band: BandConfig, values: Vec<Complex64>, label: impl Into<String>) -> Result<Self> {
        band.validate()?;
        if values.len() != band.n_points {
            return Err(Error::invalid(
                "sweep",
                format!("{} values for a {}-point band", values.len(), band.n_points),
            ));
        }
        for (index, v) in values.iter().enumerate() {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite {
                    what: "transmission coefficient",
                    index,
                });
            }
            if v.re == 0.0 && v.im == 0.0 {
                return Err(Error::invalid(
                    "sweep",
                    format!("transmission coefficient is exactly zero at index {index}"),
                ));
            }
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

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn frequencies(&self) -> Vec<f64> {
        frequency_grid(&self.band)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multiplies every coefficient by `factor` (must be nonzero and finite).
    pub fn scaled(&self, factor: Complex64) -> Result<Self> {
        Self::new(
            self.band.clone(),
            self.values.iter().map(|v| v * factor).collect(),
            self.label.clone(),
        )
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}
