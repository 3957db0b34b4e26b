//! Passive human-blockage sensing for sub-THz links.
//!
//! The pipeline runs from raw channel observations to a blocker offset:
//!
//! - [`geometry`]: link scene, target phantom, band grids and image-method ray paths.
//! - [`synth`]: synthetic frequency sweeps from a ray sum with knife-edge blockage.
//! - [`attenuation`]: calibrated excess attenuation and its statistics.
//! - [`freqclass`]: histogram likelihood-ratio classification with majority voting.
//! - [`cir`]: power delay profiles from windowed inverse transforms.
//! - [`features`]: multipath component extraction and baseline matching.
//! - [`localize`]: regime decision and offset inversion from new path lengths.
//! - [`io`] and [`session`]: file formats and batch experiment runs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attenuation;
pub mod cir;
pub mod error;
pub mod features;
pub mod freqclass;
pub mod fresnel;
pub mod geometry;
pub mod io;
pub mod localize;
pub mod session;
pub mod sweep;
pub mod synth;

pub use attenuation::{
    excess_attenuation, excess_attenuation_with, stats, AttenuationSeries, AttenuationStats,
    DbConvention,
};
pub use cir::{alias_free_range, delay_resolution, pdp, PowerDelayProfile, Window};
pub use error::{Error, Result};
pub use features::{
    extract_features, match_and_perturb, CirFeatureSet, ExtractOptions, MatchedPair,
    MultipathComponent, PerturbationReport,
};
pub use freqclass::{
    classify, fit_distribution, fit_models, llr, shared_edges, Binning, ClassificationResult, Llr,
    SampleDistribution,
};
pub use geometry::{
    frequency_grid, image_paths, los_path_length, BandConfig, BandId, ImagePath, Material, Point2,
    Point3, ReflectionLoss, Scene, Surface, SurfaceClass, Target,
};
pub use localize::{
    classify_regime, estimate_offset, invert_scatter_path, scatter_path_length, AttenuationMap,
    Evidence, LocalizeOptions, OffsetEstimate, Regime,
};
pub use session::{run_experiment, ExperimentSummary, SessionConfig};
pub use sweep::FrequencySweep;
pub use synth::{
    blockage_gain, fresnel_parameter, knife_edge_loss, synthesize_sweep, BlockageModel,
    RayComponent, SynthesisConfig,
};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
