//! Target offset from the perturbation of the multipath structure.
//!
//! A new component is modelled as a single scatter TX → target → RX, so
//! its path length fixes an ellipse with the antennas as foci. One length
//! cannot fix both coordinates; the along-link coordinate is assumed (link
//! midpoint by default) and the lateral offset is solved for.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::PerturbationReport;
use crate::geometry::{los_path_length, Scene};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LosBlocking,
    NearFieldAttenuation,
    ScatterPath,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::LosBlocking => "los_blocking",
            Regime::NearFieldAttenuation => "near_field_attenuation",
            Regime::ScatterPath => "scatter_path",
        }
    }
}

/// Piecewise-linear map from mean matched attenuation (dB) to offset (m),
/// used when no scatter path is available. Clamped at both ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttenuationMap {
    /// `[mean_rho_db, y_m]` knots, strictly increasing in dB.
    pub points: Vec<[f64; 2]>,
    pub uncertainty_m: f64,
}

impl AttenuationMap {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::invalid("attenuation map", "needs at least one knot"));
        }
        if self.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("attenuation map", "knots must be finite"));
        }
        if self.points.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::invalid("attenuation map", "dB knots must increase"));
        }
        if !(self.uncertainty_m > 0.0) {
            return Err(Error::invalid(
                "attenuation map",
                "uncertainty must be positive",
            ));
        }
        Ok(())
    }

    pub fn offset_for(&self, rho_db: f64) -> f64 {
        let pts = &self.points;
        if rho_db <= pts[0][0] {
            return pts[0][1];
        }
        for w in pts.windows(2) {
            let ([x0, y0], [x1, y1]) = (w[0], w[1]);
            if rho_db <= x1 {
                return y0 + (y1 - y0) * (rho_db - x0) / (x1 - x0);
            }
        }
        pts[pts.len() - 1][1]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeOptions {
    /// Mean matched attenuation above which a target is considered present.
    pub rho_threshold_db: f64,
    /// LoS attenuation above which the link is considered blocked.
    pub los_block_threshold_db: f64,
    /// Along-link coordinate of the scatterer (m); link midpoint if absent.
    pub assumed_x_m: Option<f64>,
    /// Shift measured path lengths so the strongest baseline component sits
    /// at the LoS length.
    pub align_to_los: bool,
    /// Added to the solved offset. The solved point is the scattering
    /// surface, so a cylinder of radius r needs r here to report its axis.
    pub surface_offset_m: f64,
    pub attenuation_map: Option<AttenuationMap>,
}

impl Default for LocalizeOptions {
    fn default() -> Self {
        Self {
            rho_threshold_db: 3.0,
            los_block_threshold_db: 10.0,
            assumed_x_m: None,
            align_to_los: true,
            surface_offset_m: 0.0,
            attenuation_map: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub delta_k: usize,
    pub mean_rho_db: Option<f64>,
    pub los_rho_db: Option<f64>,
    /// After alignment.
    pub mean_new_path_length_m: Option<f64>,
    /// False when nothing in the report points at a target.
    pub target_evidence: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetEstimate {
    pub regime: Regime,
    pub y_m: Option<f64>,
    pub sigma_m: Option<f64>,
    pub evidence: Evidence,
}

/// Attenuation of the strongest baseline component, `None` if it was lost.
fn los_rho_db(report: &PerturbationReport) -> Option<f64> {
    let los = report.baseline.strongest()?;
    report.pair_for_baseline(los).map(|m| m.rho_db())
}

/// Regime decision. The LoS test runs first since a blocked LoS also drives
/// the mean attenuation up.
pub fn classify_regime(report: &PerturbationReport, opts: &LocalizeOptions) -> (Regime, bool) {
    if report.delta_k > 0 {
        return (Regime::ScatterPath, true);
    }
    let los_lost = report
        .baseline
        .strongest()
        .is_some_and(|i| report.unmatched_baseline.contains(&i));
    if los_lost || los_rho_db(report).is_some_and(|r| r >= opts.los_block_threshold_db) {
        return (Regime::LosBlocking, true);
    }
    let near = report
        .mean_rho_db()
        .is_some_and(|m| m >= opts.rho_threshold_db);
    (Regime::NearFieldAttenuation, near)
}

/// `√(x² + y²) + √((d − x)² + y²)`.
pub fn scatter_path_length(x: f64, y: f64, d: f64) -> f64 {
    x.hypot(y) + (d - x).hypot(y)
}

/// Lateral offset `y ≥ 0` of the point at along-link coordinate `x` whose
/// scatter path has length `path_length`.
pub fn invert_scatter_path(path_length: f64, scene: &Scene, assumed_x: f64) -> Result<f64> {
    invert_with_baseline(path_length, los_path_length(scene), assumed_x)
}

fn invert_with_baseline(l: f64, d: f64, x: f64) -> Result<f64> {
    if !(l.is_finite() && x.is_finite()) {
        return Err(Error::invalid("scatter path", "non-finite input"));
    }
    if l < d * (1.0 - 1e-12) {
        return Err(Error::UnphysicalPathLength {
            length_m: l,
            los_m: d,
        });
    }
    let a = 0.5 * l;
    let u = x - 0.5 * d;
    if u.abs() > a {
        return Err(Error::invalid(
            "assumed_x",
            format!("{x} m lies outside the ellipse of path length {l} m"),
        ));
    }
    let b2 = (a * a - 0.25 * d * d).max(0.0);
    Ok((b2 * (1.0 - (u / a).powi(2))).max(0.0).sqrt())
}

/// Sensitivity of the offset to a path-length error of `delta`.
fn propagate(l: f64, d: f64, x: f64, y: f64, delta: f64) -> Result<f64> {
    if y > 0.0 {
        let dl_dy = y / x.hypot(y) + y / (d - x).hypot(y);
        Ok(delta / dl_dy)
    } else {
        Ok(invert_with_baseline(l + delta, d, x)? - y)
    }
}

pub fn estimate_offset(
    report: &PerturbationReport,
    scene: &Scene,
    opts: &LocalizeOptions,
) -> Result<OffsetEstimate> {
    if let Some(map) = &opts.attenuation_map {
        map.validate()?;
    }
    let d = los_path_length(scene);
    let x = opts.assumed_x_m.unwrap_or(0.5 * d);
    let (regime, target_evidence) = classify_regime(report, opts);

    let shift = match (opts.align_to_los, report.baseline.strongest()) {
        (true, Some(i)) => d - report.baseline.components()[i].path_length_m,
        _ => 0.0,
    };
    let new = report.new_components.components();
    let mean_new = (!new.is_empty())
        .then(|| new.iter().map(|c| c.path_length_m).sum::<f64>() / new.len() as f64 + shift);

    let evidence = Evidence {
        delta_k: report.delta_k,
        mean_rho_db: report.mean_rho_db(),
        los_rho_db: los_rho_db(report),
        mean_new_path_length_m: mean_new,
        target_evidence,
    };

    let (y_m, sigma_m) = match (regime, mean_new, &opts.attenuation_map) {
        (Regime::ScatterPath, Some(l), _) => {
            let y = invert_with_baseline(l, d, x)?;
            let sigma = propagate(l, d, x, y, report.baseline.delay_resolution_m())?;
            (Some(y + opts.surface_offset_m), Some(sigma))
        }
        (_, _, Some(map)) => {
            let rho = evidence.mean_rho_db.unwrap_or(0.0);
            (Some(map.offset_for(rho)), Some(map.uncertainty_m))
        }
        _ => (None, None),
    };
    Ok(OffsetEstimate {
        regime,
        y_m,
        sigma_m,
        evidence,
    })
}
