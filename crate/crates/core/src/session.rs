//! Session configuration and batch experiment runs.
//!
//! A run synthesizes a baseline and one sweep per offset for every band,
//! then writes attenuation, statistics, classification, PDP, feature and
//! localization outputs into a fixed directory layout:
//!
//! ```text
//! <out>/summary.json
//! <out>/<band>/sweeps/{baseline,y_<cm>cm}.txt
//! <out>/<band>/attenuation/y_<cm>cm.csv
//! <out>/<band>/summary.csv            y_cm,mean_db,std_db
//! <out>/<band>/models.json
//! <out>/<band>/classification.csv
//! <out>/<band>/pdp/{baseline,y_<cm>cm}.csv
//! <out>/<band>/features/{baseline,y_<cm>cm}.csv
//! <out>/<band>/perturbation/y_<cm>cm.csv
//! <out>/<band>/localization.csv
//! ```
//!
//! Per-offset work runs in parallel; every random stream has its own seed
//! derived from the session seed, so output bytes do not depend on thread
//! scheduling.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attenuation::{
    excess_attenuation_with, stats, AttenuationSeries, AttenuationStats, DbConvention,
};
use crate::cir::{pdp, PowerDelayProfile, Window, DEFAULT_ZERO_PAD};
use crate::error::{Error, Result};
use crate::features::{
    extract_features, match_and_perturb, CirFeatureSet, ExtractOptions, PerturbationReport,
};
use crate::freqclass::{classify, fit_models, ClassificationResult, DEFAULT_EPSILON};
use crate::geometry::{BandConfig, BandId, Material, Scene, Target};
use crate::io;
use crate::localize::{estimate_offset, AttenuationMap, LocalizeOptions, OffsetEstimate};
use crate::sweep::FrequencySweep;
use crate::synth::{synthesize_sweep, SynthesisConfig};

/// A band given by name (`"W"`, `"G"`) or as a full grid table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandSpec {
    Named(BandId),
    Grid(BandConfig),
}

impl BandSpec {
    pub fn resolve(&self) -> Result<BandConfig> {
        match self {
            BandSpec::Named(id) => BandConfig::for_id(*id).ok_or_else(|| {
                Error::Config(format!("band '{}' needs an explicit grid", id.as_str()))
            }),
            BandSpec::Grid(cfg) => {
                cfg.validate()?;
                Ok(cfg.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    pub diameter: f64,
    pub height: f64,
    pub material: Material,
    /// Along-link position of the target center (m); link midpoint if absent.
    pub along_link_m: Option<f64>,
}

impl Default for TargetConfig {
    fn default() -> Self {
        let t = Target::phantom(&Scene::paper(), 0.0);
        Self {
            diameter: t.diameter,
            height: t.height,
            material: t.material,
            along_link_m: None,
        }
    }
}

impl TargetConfig {
    pub fn at(&self, scene: &Scene, y: f64) -> Target {
        let x = self
            .along_link_m
            .unwrap_or_else(|| 0.5 * crate::geometry::los_path_length(scene));
        Target {
            center: scene.link_point(x, y),
            diameter: self.diameter,
            height: self.height,
            material: self.material,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub epsilon: f64,
    pub convention: DbConvention,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            convention: DbConvention::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub window: Window,
    pub zero_pad_factor: usize,
    pub max_components: usize,
    pub min_prominence_db: f64,
    pub min_separation_bins: usize,
    pub floor_db: f64,
    /// Matching tolerance in delay-resolution bins.
    pub delay_tolerance_bins: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let e = ExtractOptions::default();
        Self {
            window: Window::default(),
            zero_pad_factor: DEFAULT_ZERO_PAD,
            max_components: e.max_components,
            min_prominence_db: e.min_prominence_db,
            min_separation_bins: e.min_separation_bins,
            floor_db: e.floor_db,
            delay_tolerance_bins: 2.0,
        }
    }
}

impl FeatureConfig {
    pub fn extract_options(&self) -> ExtractOptions {
        ExtractOptions {
            max_components: self.max_components,
            min_prominence_db: self.min_prominence_db,
            min_separation_bins: self.min_separation_bins,
            floor_db: self.floor_db,
        }
    }

    pub fn delay_tolerance_s(&self, set: &CirFeatureSet) -> f64 {
        self.delay_tolerance_bins * set.delay_resolution_s()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeConfig {
    pub rho_threshold_db: f64,
    pub los_block_threshold_db: f64,
    pub assumed_x_m: Option<f64>,
    pub align_to_los: bool,
    /// Defaults to the target radius.
    pub surface_offset_m: Option<f64>,
    pub attenuation_map: Option<AttenuationMap>,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        let o = LocalizeOptions::default();
        Self {
            rho_threshold_db: o.rho_threshold_db,
            los_block_threshold_db: o.los_block_threshold_db,
            assumed_x_m: o.assumed_x_m,
            align_to_los: o.align_to_los,
            surface_offset_m: None,
            attenuation_map: o.attenuation_map,
        }
    }
}

impl LocalizeConfig {
    pub fn options(&self, target: &TargetConfig) -> LocalizeOptions {
        LocalizeOptions {
            rho_threshold_db: self.rho_threshold_db,
            los_block_threshold_db: self.los_block_threshold_db,
            assumed_x_m: self.assumed_x_m,
            align_to_los: self.align_to_los,
            surface_offset_m: self.surface_offset_m.unwrap_or(0.5 * target.diameter),
            attenuation_map: self.attenuation_map.clone(),
        }
    }
}

/// Everything a run depends on besides the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub seed: u64,
    /// Lateral target offsets (m).
    pub offsets_m: Vec<f64>,
    pub bands: Vec<BandSpec>,
    pub scene: Scene,
    pub target: TargetConfig,
    /// `seed` here is ignored; every sweep gets a derived seed.
    pub synthesis: SynthesisConfig,
    pub classifier: ClassifierConfig,
    pub features: FeatureConfig,
    pub localize: LocalizeConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            offsets_m: vec![0.0, 0.03, 0.06, 0.12, 0.25, 0.50],
            bands: vec![BandSpec::Named(BandId::W), BandSpec::Named(BandId::G)],
            scene: Scene::paper(),
            target: TargetConfig::default(),
            synthesis: SynthesisConfig::default(),
            classifier: ClassifierConfig::default(),
            features: FeatureConfig::default(),
            localize: LocalizeConfig::default(),
        }
    }
}

impl SessionConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml(&io::read_text(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::Config("at least one band is required".into()));
        }
        let mut names = BTreeSet::new();
        for b in &self.bands {
            let band = b.resolve()?;
            if !names.insert(band_dir(&band)) {
                return Err(Error::Config(format!(
                    "band {} listed twice",
                    band_dir(&band)
                )));
            }
        }
        let mut labels = BTreeSet::new();
        for &y in &self.offsets_m {
            if !y.is_finite() {
                return Err(Error::Config("offsets must be finite".into()));
            }
            if !labels.insert(offset_label(y)) {
                return Err(Error::Config(format!("offset {} cm listed twice", cm(y))));
            }
        }
        self.scene.validate()?;
        self.target.at(&self.scene, 0.0).validate()?;
        self.synthesis.validate()?;
        self.features.extract_options().validate()?;
        if !(self.features.delay_tolerance_bins >= 0.0) {
            return Err(Error::Config("delay_tolerance_bins must be ≥ 0".into()));
        }
        if self.features.zero_pad_factor == 0 {
            return Err(Error::Config("zero_pad_factor must be ≥ 1".into()));
        }
        if let Some(map) = &self.localize.attenuation_map {
            map.validate()?;
        }
        Ok(())
    }

    pub fn resolved_bands(&self) -> Result<Vec<BandConfig>> {
        self.bands.iter().map(BandSpec::resolve).collect()
    }
}

/// Offset in centimeters, rounded to 0.01 cm, without trailing zeros.
pub fn cm(y_m: f64) -> String {
    let s = format!("{:.2}", 100.0 * y_m);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// File stem for an offset, e.g. `y_12cm`.
pub fn offset_label(y_m: f64) -> String {
    format!("y_{}cm", cm(y_m))
}

fn band_dir(band: &BandConfig) -> String {
    match band.band_id {
        BandId::Custom => format!("custom_{}_{}", band.f_start, band.f_stop),
        id => id.as_str().to_string(),
    }
}

/// SplitMix64 finalizer over the session seed and a stream coordinate.
pub fn derive_seed(seed: u64, band: usize, stream: u64, index: usize) -> u64 {
    let mut z = seed
        ^ (band as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ stream.wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (index as u64).wrapping_mul(0x94D0_49BB_1331_11EB);
    for _ in 0..2 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

const STREAM_BASELINE: u64 = 1;
const STREAM_MEASURE: u64 = 2;
const STREAM_TRAIN_BASELINE: u64 = 3;
const STREAM_TRAIN: u64 = 4;

/// Baseline and per-offset sweeps of one band.
#[derive(Clone, Debug)]
pub struct BandSweeps {
    pub band: BandConfig,
    pub baseline: FrequencySweep,
    pub offsets: Vec<(f64, FrequencySweep)>,
}

fn sweep_for(
    session: &SessionConfig,
    band: &BandConfig,
    y: Option<f64>,
    seed: u64,
) -> Result<FrequencySweep> {
    let syn = SynthesisConfig {
        seed,
        ..session.synthesis.clone()
    };
    let target = y.map(|y| session.target.at(&session.scene, y));
    let s = synthesize_sweep(&session.scene, target.as_ref(), band, &syn)?;
    Ok(match y {
        Some(y) => s.with_label(offset_label(y)),
        None => s,
    })
}

/// Measurement sweeps only, as written by `simulate`.
pub fn simulate(session: &SessionConfig) -> Result<Vec<BandSweeps>> {
    session.validate()?;
    session
        .resolved_bands()?
        .into_iter()
        .enumerate()
        .map(|(b, band)| {
            let baseline = sweep_for(
                session,
                &band,
                None,
                derive_seed(session.seed, b, STREAM_BASELINE, 0),
            )?;
            let offsets = session
                .offsets_m
                .par_iter()
                .enumerate()
                .map(|(i, &y)| {
                    let s = sweep_for(
                        session,
                        &band,
                        Some(y),
                        derive_seed(session.seed, b, STREAM_MEASURE, i),
                    )?;
                    Ok((y, s))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(BandSweeps {
                band,
                baseline,
                offsets,
            })
        })
        .collect()
}

pub fn write_sweeps(out: &Path, bands: &[BandSweeps]) -> Result<()> {
    for b in bands {
        let dir = out.join(band_dir(&b.band)).join("sweeps");
        io::write_sweep(&b.baseline, &dir.join("baseline.txt"))?;
        for (y, s) in &b.offsets {
            io::write_sweep(s, &dir.join(format!("{}.txt", offset_label(*y))))?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetSummary {
    pub y_m: f64,
    pub stats: AttenuationStats,
    /// Index into the session offsets; absent with fewer than two offsets.
    pub classified_index: Option<usize>,
    pub classification_ambiguous: Option<bool>,
    pub estimate: OffsetEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub band: BandConfig,
    pub baseline_components: usize,
    pub offsets: Vec<OffsetSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub seed: u64,
    pub bands: Vec<BandSummary>,
}

struct OffsetOutputs {
    y: f64,
    sweep: FrequencySweep,
    attenuation: AttenuationSeries,
    training: AttenuationSeries,
    pdp: PowerDelayProfile,
    features: CirFeatureSet,
    report: PerturbationReport,
    estimate: OffsetEstimate,
}

fn profile_and_features(
    session: &SessionConfig,
    sweep: &FrequencySweep,
) -> Result<(PowerDelayProfile, CirFeatureSet)> {
    let f = &session.features;
    let p = pdp(sweep, f.window, f.zero_pad_factor)?;
    let set = extract_features(&p, &f.extract_options())?.with_label(sweep.label());
    Ok((p, set))
}

/// Runs the full pipeline and writes the output tree under `out`.
pub fn run_experiment(session: &SessionConfig, out: &Path) -> Result<ExperimentSummary> {
    session.validate()?;
    let conv = session.classifier.convention;
    let loc_opts = session.localize.options(&session.target);
    let mut summaries = Vec::new();

    for (b, band) in session.resolved_bands()?.into_iter().enumerate() {
        let seed = |stream, i| derive_seed(session.seed, b, stream, i);
        let baseline = sweep_for(session, &band, None, seed(STREAM_BASELINE, 0))?;
        let train_baseline = sweep_for(session, &band, None, seed(STREAM_TRAIN_BASELINE, 0))?;
        let (base_pdp, base_features) = profile_and_features(session, &baseline)?;

        let outputs: Vec<OffsetOutputs> = session
            .offsets_m
            .par_iter()
            .enumerate()
            .map(|(i, &y)| {
                let sweep = sweep_for(session, &band, Some(y), seed(STREAM_MEASURE, i))?;
                let train = sweep_for(session, &band, Some(y), seed(STREAM_TRAIN, i))?;
                let attenuation = excess_attenuation_with(&sweep, &baseline, conv)?;
                let training = excess_attenuation_with(&train, &train_baseline, conv)?;
                let (p, features) = profile_and_features(session, &sweep)?;
                let tol = session.features.delay_tolerance_s(&base_features);
                let report = match_and_perturb(&base_features, &features, tol);
                let estimate = estimate_offset(&report, &session.scene, &loc_opts)?;
                Ok(OffsetOutputs {
                    y,
                    sweep,
                    attenuation,
                    training,
                    pdp: p,
                    features,
                    report,
                    estimate,
                })
            })
            .collect::<Result<_>>()?;

        let classifications: Option<(Vec<_>, Vec<ClassificationResult>)> = if outputs.len() >= 2 {
            let training: Vec<AttenuationSeries> =
                outputs.iter().map(|o| o.training.clone()).collect();
            let models = fit_models(&training, session.classifier.epsilon)?;
            let results = outputs
                .par_iter()
                .map(|o| classify(&o.attenuation, &models))
                .collect::<Result<Vec<_>>>()?;
            Some((models, results))
        } else {
            None
        };

        // Writes happen after the join, in offset order.
        let dir = out.join(band_dir(&band));
        io::write_sweep(&baseline, &dir.join("sweeps/baseline.txt"))?;
        io::write_text(&dir.join("pdp/baseline.csv"), &io::format_pdp(&base_pdp))?;
        io::write_features(&base_features, &dir.join("features/baseline.csv"))?;

        let mut summary_csv = String::from("y_cm,mean_db,std_db\n");
        let mut loc_csv = String::from(
            "y_cm,regime,y_est_cm,sigma_cm,delta_k,mean_rho_db,los_rho_db,target_evidence\n",
        );
        let mut class_csv =
            String::from("y_cm,winner_index,winner_y_cm,ambiguous,out_of_range,votes\n");
        let mut offsets = Vec::new();
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();

        for (i, o) in outputs.iter().enumerate() {
            let name = offset_label(o.y);
            io::write_sweep(&o.sweep, &dir.join(format!("sweeps/{name}.txt")))?;
            io::write_attenuation(&o.attenuation, &dir.join(format!("attenuation/{name}.csv")))?;
            io::write_text(
                &dir.join(format!("pdp/{name}.csv")),
                &io::format_pdp(&o.pdp),
            )?;
            io::write_features(&o.features, &dir.join(format!("features/{name}.csv")))?;
            io::write_text(
                &dir.join(format!("perturbation/{name}.csv")),
                &io::format_perturbation(&o.report),
            )?;

            let st = stats(&o.attenuation);
            let _ = writeln!(summary_csv, "{},{},{}", cm(o.y), st.mean_db, st.std_db);
            let e = &o.estimate;
            let _ = writeln!(
                loc_csv,
                "{},{},{},{},{},{},{},{}",
                cm(o.y),
                e.regime.as_str(),
                opt(e.y_m.map(|v| 100.0 * v)),
                opt(e.sigma_m.map(|v| 100.0 * v)),
                e.evidence.delta_k,
                opt(e.evidence.mean_rho_db),
                opt(e.evidence.los_rho_db),
                e.evidence.target_evidence
            );
            let class = classifications.as_ref().map(|(_, r)| &r[i]);
            if let Some(c) = class {
                let votes: Vec<String> = c.per_sample_votes.iter().map(usize::to_string).collect();
                let _ = writeln!(
                    class_csv,
                    "{},{},{},{},{},{}",
                    cm(o.y),
                    c.winner,
                    cm(session.offsets_m[c.winner]),
                    c.ambiguous,
                    c.out_of_range,
                    votes.join(";")
                );
            }
            offsets.push(OffsetSummary {
                y_m: o.y,
                stats: st,
                classified_index: class.map(|c| c.winner),
                classification_ambiguous: class.map(|c| c.ambiguous),
                estimate: o.estimate.clone(),
            });
        }
        io::write_text(&dir.join("summary.csv"), &summary_csv)?;
        io::write_text(&dir.join("localization.csv"), &loc_csv)?;
        if let Some((models, _)) = classifications {
            io::write_models(
                &io::ModelSet::new(Some(band.band_id), models),
                &dir.join("models.json"),
            )?;
            io::write_text(&dir.join("classification.csv"), &class_csv)?;
        }
        summaries.push(BandSummary {
            band,
            baseline_components: base_features.k(),
            offsets,
        });
    }

    let summary = ExperimentSummary {
        seed: session.seed,
        bands: summaries,
    };
    io::write_text(&out.join("summary.json"), &io::to_json(&summary))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cm_labels() {
        assert_eq!(cm(0.0), "0");
        assert_eq!(cm(0.03), "3");
        assert_eq!(cm(0.125), "12.5");
        assert_eq!(cm(-0.0), "0");
        assert_eq!(offset_label(0.5), "y_50cm");
    }

    #[test]
    fn toml_defaults_and_forms() {
        let cfg = SessionConfig::from_toml("").unwrap();
        assert_eq!(cfg, SessionConfig::default());
        let text = r#"
            seed = 9
            offsets_m = [0.0, 0.12]
            bands = ["G", { band_id = "custom", f_start = 1e9, f_stop = 2e9, n_points = 11 }]
            [features]
            window = { kind = "hann" }
            [localize]
            surface_offset_m = 0.0
        "#;
        let cfg = SessionConfig::from_toml(text).unwrap();
        assert_eq!(cfg.seed, 9);
        let bands = cfg.resolved_bands().unwrap();
        assert_eq!(bands[0], BandConfig::g_band());
        assert_eq!(bands[1].n_points, 11);
        assert_eq!(cfg.features.window, Window::Hann);
        assert_eq!(cfg.localize.options(&cfg.target).surface_offset_m, 0.0);
        assert_eq!(
            SessionConfig::default()
                .localize
                .options(&cfg.target)
                .surface_offset_m,
            0.03
        );
    }

    #[test]
    fn invalid_sessions() {
        assert!(SessionConfig::from_toml("bands = []").is_err());
        assert!(SessionConfig::from_toml("offsets_m = [0.03, 0.0300001]").is_err());
        assert!(SessionConfig::from_toml("colour = 1").is_err());
        assert!(SessionConfig::from_toml("bands = [\"custom\"]").is_err());
    }

    #[test]
    fn seeds_differ_per_stream() {
        let mut seen = BTreeSet::new();
        for b in 0..2 {
            for s in 1..5 {
                for i in 0..6 {
                    assert!(seen.insert(derive_seed(7, b, s, i)));
                }
            }
        }
    }
}
