//! Discrete multipath components and their perturbation by a target.

use serde::{Deserialize, Serialize};

use crate::cir::PowerDelayProfile;
use crate::error::{Error, Result};
use crate::SPEED_OF_LIGHT;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultipathComponent {
    pub path_length_m: f64,
    pub delay_s: f64,
    /// Linear magnitude, on the same scale as the sweep coefficients.
    pub amplitude: f64,
}

impl MultipathComponent {
    pub fn from_path_length(path_length_m: f64, amplitude: f64) -> Self {
        Self {
            path_length_m,
            delay_s: path_length_m / SPEED_OF_LIGHT,
            amplitude,
        }
    }

    pub fn amplitude_db(&self) -> f64 {
        20.0 * self.amplitude.log10()
    }
}

/// Components sorted by strictly increasing delay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFeatureSet")]
pub struct CirFeatureSet {
    components: Vec<MultipathComponent>,
    delay_resolution_m: f64,
    label: String,
}

#[derive(Deserialize)]
struct RawFeatureSet {
    components: Vec<MultipathComponent>,
    delay_resolution_m: f64,
    label: String,
}

impl TryFrom<RawFeatureSet> for CirFeatureSet {
    type Error = Error;

    fn try_from(raw: RawFeatureSet) -> Result<Self> {
        CirFeatureSet::new(raw.components, raw.delay_resolution_m, raw.label)
    }
}

impl CirFeatureSet {
    pub fn new(
        components: Vec<MultipathComponent>,
        delay_resolution_m: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if !(delay_resolution_m.is_finite() && delay_resolution_m > 0.0) {
            return Err(Error::invalid(
                "feature set",
                "delay resolution must be positive",
            ));
        }
        for (index, c) in components.iter().enumerate() {
            if !(c.path_length_m.is_finite() && c.delay_s.is_finite() && c.amplitude.is_finite()) {
                return Err(Error::NonFinite {
                    what: "multipath component",
                    index,
                });
            }
            if c.amplitude <= 0.0 {
                return Err(Error::invalid(
                    "feature set",
                    format!("component {index} has nonpositive amplitude"),
                ));
            }
        }
        if components.windows(2).any(|w| w[1].delay_s <= w[0].delay_s) {
            return Err(Error::invalid(
                "feature set",
                "delays must be strictly increasing",
            ));
        }
        Ok(Self {
            components,
            delay_resolution_m,
            label: label.into(),
        })
    }

    pub fn empty(delay_resolution_m: f64, label: impl Into<String>) -> Self {
        Self {
            components: Vec::new(),
            delay_resolution_m,
            label: label.into(),
        }
    }

    pub fn components(&self) -> &[MultipathComponent] {
        &self.components
    }

    /// Number of components K.
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn delay_resolution_m(&self) -> f64 {
        self.delay_resolution_m
    }

    pub fn delay_resolution_s(&self) -> f64 {
        self.delay_resolution_m / SPEED_OF_LIGHT
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Index of the strongest component.
    pub fn strongest(&self) -> Option<usize> {
        self.components
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.amplitude.total_cmp(&b.1.amplitude))
            .map(|(i, _)| i)
    }

    fn subset(&self, indices: &[usize], label: &str) -> Self {
        Self {
            components: indices.iter().map(|&i| self.components[i]).collect(),
            delay_resolution_m: self.delay_resolution_m,
            label: label.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractOptions {
    pub max_components: usize,
    pub min_prominence_db: f64,
    /// In padded PDP bins.
    pub min_separation_bins: usize,
    /// Peaks weaker than this (dB relative to the PDP maximum) are ignored.
    pub floor_db: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            max_components: 9,
            min_prominence_db: 6.0,
            min_separation_bins: 3,
            floor_db: -30.0,
        }
    }
}

impl ExtractOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_components == 0 {
            return Err(Error::invalid("max_components", "must be ≥ 1"));
        }
        if !(self.min_prominence_db.is_finite() && self.min_prominence_db >= 0.0) {
            return Err(Error::invalid(
                "min_prominence_db",
                "must be finite and ≥ 0",
            ));
        }
        if self.floor_db.is_nan() || self.floor_db > 0.0 {
            return Err(Error::invalid("floor_db", "must be ≤ 0"));
        }
        Ok(())
    }
}

/// Circular local maxima: strictly above the left neighbour and not below the
/// right one, so a flat top yields one peak.
fn local_maxima(p: &[f64]) -> Vec<usize> {
    let n = p.len();
    if n < 3 {
        return Vec::new();
    }
    (0..n)
        .filter(|&i| {
            let l = p[(i + n - 1) % n];
            let r = p[(i + 1) % n];
            p[i] > l && p[i] >= r
        })
        .collect()
}

/// Topographic prominence of the peak at `i` on a circular axis, as a power
/// ratio (peak over key col).
fn prominence_ratio(p: &[f64], i: usize) -> f64 {
    let n = p.len();
    let height = p[i];
    let walk = |step: usize| {
        let mut lowest = height;
        let mut j = i;
        for _ in 1..n {
            j = (j + step) % n;
            if p[j] > height {
                break;
            }
            lowest = lowest.min(p[j]);
        }
        lowest
    };
    let col = walk(1).max(walk(n - 1));
    if col > 0.0 {
        height / col
    } else {
        f64::INFINITY
    }
}

fn circular_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

/// Picks prominent, well-separated PDP peaks as multipath components.
///
/// Candidates are taken strongest first; a candidate closer than
/// `min_separation_bins` to an accepted one is dropped.
pub fn extract_features(pdp: &PowerDelayProfile, opts: &ExtractOptions) -> Result<CirFeatureSet> {
    opts.validate()?;
    let p = &pdp.power;
    let n = p.len();
    let peak = pdp.peak_power();
    if !(peak > 0.0) {
        return Err(Error::NoPeaks);
    }
    let floor = peak * 10f64.powf(opts.floor_db / 10.0);
    let min_ratio = 10f64.powf(opts.min_prominence_db / 10.0);

    let mut candidates: Vec<usize> = local_maxima(p)
        .into_iter()
        .filter(|&i| p[i] >= floor && prominence_ratio(p, i) >= min_ratio)
        .collect();
    candidates.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));

    let mut accepted: Vec<usize> = Vec::new();
    for i in candidates {
        if accepted.len() == opts.max_components {
            break;
        }
        if accepted
            .iter()
            .all(|&j| circular_distance(i, j, n) >= opts.min_separation_bins)
        {
            accepted.push(i);
        }
    }
    if accepted.is_empty() {
        return Err(Error::NoPeaks);
    }
    accepted.sort_unstable();
    let components = accepted
        .iter()
        .map(|&i| MultipathComponent::from_path_length(pdp.path_lengths[i], p[i].sqrt()))
        .collect();
    CirFeatureSet::new(components, pdp.delay_resolution, "")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub baseline_index: usize,
    pub observed_index: usize,
    /// observed amplitude / baseline amplitude.
    pub rho: f64,
}

impl MatchedPair {
    /// Positive for attenuation.
    pub fn rho_db(&self) -> f64 {
        -20.0 * self.rho.log10()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub baseline: CirFeatureSet,
    pub observed: CirFeatureSet,
    /// Sorted by baseline index.
    pub matched_pairs: Vec<MatchedPair>,
    /// Same order as `matched_pairs`.
    pub rho_db: Vec<f64>,
    pub new_components: CirFeatureSet,
    /// Observed indices of `new_components`.
    pub new_indices: Vec<usize>,
    pub delta_k: usize,
    pub unmatched_baseline: Vec<usize>,
    pub delay_tolerance_s: f64,
}

impl PerturbationReport {
    pub fn mean_rho_db(&self) -> Option<f64> {
        if self.rho_db.is_empty() {
            None
        } else {
            Some(self.rho_db.iter().sum::<f64>() / self.rho_db.len() as f64)
        }
    }

    pub fn pair_for_baseline(&self, baseline_index: usize) -> Option<&MatchedPair> {
        self.matched_pairs
            .iter()
            .find(|m| m.baseline_index == baseline_index)
    }
}

/// Default matching tolerance: two resolution bins.
pub fn default_delay_tolerance(set: &CirFeatureSet) -> f64 {
    2.0 * set.delay_resolution_s()
}

/// Greedy nearest-delay matching: pairs within `delay_tolerance_s` are taken
/// closest first, each component at most once.
pub fn match_and_perturb(
    baseline: &CirFeatureSet,
    observed: &CirFeatureSet,
    delay_tolerance_s: f64,
) -> PerturbationReport {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, b) in baseline.components().iter().enumerate() {
        for (j, o) in observed.components().iter().enumerate() {
            let gap = (b.delay_s - o.delay_s).abs();
            if gap <= delay_tolerance_s {
                pairs.push((gap, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut b_used = vec![false; baseline.k()];
    let mut o_used = vec![false; observed.k()];
    let mut matched = Vec::new();
    for (_, i, j) in pairs {
        if !b_used[i] && !o_used[j] {
            b_used[i] = true;
            o_used[j] = true;
            matched.push(MatchedPair {
                baseline_index: i,
                observed_index: j,
                rho: observed.components[j].amplitude / baseline.components[i].amplitude,
            });
        }
    }
    matched.sort_by_key(|m| m.baseline_index);

    let new_indices: Vec<usize> = (0..observed.k()).filter(|&j| !o_used[j]).collect();
    let unmatched_baseline = (0..baseline.k()).filter(|&i| !b_used[i]).collect();
    let new_components = observed.subset(&new_indices, "new");
    PerturbationReport {
        baseline: baseline.clone(),
        observed: observed.clone(),
        rho_db: matched.iter().map(MatchedPair::rho_db).collect(),
        matched_pairs: matched,
        delta_k: new_indices.len(),
        new_components,
        new_indices,
        unmatched_baseline,
        delay_tolerance_s,
    }
}
