//! Histogram likelihood-ratio classification of the blocker offset.
//!
//! Each hypothesis is a smoothed histogram of its excess-attenuation samples
//! over bin edges shared by all hypotheses. An observed series is classified
//! sample by sample: a hypothesis earns a vote at a sample when its
//! log-likelihood ratio against every other hypothesis is positive there.
//! The hypothesis with most votes wins.

use serde::{Deserialize, Serialize};

use crate::attenuation::AttenuationSeries;
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const MIN_BINS: usize = 8;
pub const MAX_BINS: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub enum Binning {
    Edges(Vec<f64>),
    /// Equal-width bins spanning the series range.
    Count(usize),
}

/// Smoothed sample distribution `Pr(A | F_i)` of one hypothesis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleDistribution {
    pub label: String,
    pub bin_edges: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub smoothing_epsilon: f64,
}

impl SampleDistribution {
    pub fn n_bins(&self) -> usize {
        self.probabilities.len()
    }

    /// Probability of the bin containing `a`, and whether `a` was clamped
    /// into a boundary bin.
    pub fn probability(&self, a: f64) -> (f64, bool) {
        let (bin, clamped) = bin_index(&self.bin_edges, a);
        (self.probabilities[bin], clamped)
    }

    pub fn validate(&self) -> Result<()> {
        validate_edges(&self.bin_edges)?;
        if self.probabilities.len() + 1 != self.bin_edges.len() {
            return Err(Error::invalid(
                "distribution",
                "probabilities and edges disagree in length",
            ));
        }
        if self
            .probabilities
            .iter()
            .any(|p| !(p.is_finite() && *p > 0.0))
        {
            return Err(Error::invalid(
                "distribution",
                "probabilities must be positive",
            ));
        }
        let sum: f64 = self.probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "distribution",
                format!("probabilities sum to {sum}"),
            ));
        }
        Ok(())
    }
}

fn validate_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 3 {
        return Err(Error::invalid("binning", "need at least 2 bins"));
    }
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "binning",
            "edges must be finite and strictly increasing",
        ));
    }
    Ok(())
}

/// Bin of `a`; the last bin is closed on the right. Values outside the
/// edges are clamped to the boundary bins.
pub fn bin_index(edges: &[f64], a: f64) -> (usize, bool) {
    let last = edges.len() - 2;
    if a < edges[0] {
        return (0, true);
    }
    if a > edges[last + 1] {
        return (last, true);
    }
    let i = edges.partition_point(|e| *e <= a);
    (i.saturating_sub(1).min(last), false)
}

fn linspace(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins)
        .map(|i| {
            if i == bins {
                hi
            } else {
                lo + (hi - lo) * i as f64 / bins as f64
            }
        })
        .collect()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Shared bin edges over the pooled training data, with the
/// Freedman–Diaconis bin count clamped to `[8, 64]`.
pub fn shared_edges(training: &[&AttenuationSeries]) -> Result<Vec<f64>> {
    let mut pooled: Vec<f64> = training
        .iter()
        .flat_map(|s| s.values().iter().copied())
        .collect();
    if pooled.is_empty() {
        return Err(Error::invalid("training", "no samples"));
    }
    pooled.sort_by(f64::total_cmp);
    let (lo, hi) = (pooled[0], pooled[pooled.len() - 1]);
    if hi == lo {
        return Ok(linspace(lo - 0.5, hi + 0.5, MIN_BINS));
    }
    let iqr = quantile(&pooled, 0.75) - quantile(&pooled, 0.25);
    let width = 2.0 * iqr / (pooled.len() as f64).cbrt();
    let bins = if width > 0.0 {
        ((hi - lo) / width).ceil() as usize
    } else {
        MAX_BINS
    };
    Ok(linspace(lo, hi, bins.clamp(MIN_BINS, MAX_BINS)))
}

/// Normalized histogram with `epsilon` probability mass added per bin.
///
/// Samples outside the edges are left out; if none remain the fit fails.
pub fn fit_distribution(
    series: &AttenuationSeries,
    binning: &Binning,
    epsilon: f64,
) -> Result<SampleDistribution> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid("epsilon", "smoothing mass must be positive"));
    }
    let edges = match binning {
        Binning::Edges(e) => e.clone(),
        Binning::Count(n) => {
            if *n < 2 {
                return Err(Error::invalid("binning", "need at least 2 bins"));
            }
            let v = series.values();
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                linspace(lo, hi, *n)
            } else {
                linspace(lo - 0.5, hi + 0.5, *n)
            }
        }
    };
    validate_edges(&edges)?;
    let bins = edges.len() - 1;
    let mut counts = vec![0usize; bins];
    let mut inside = 0usize;
    for &a in series.values() {
        let (b, clamped) = bin_index(&edges, a);
        if !clamped {
            counts[b] += 1;
            inside += 1;
        }
    }
    if inside == 0 {
        return Err(Error::EmptyHistogram {
            count: series.len(),
            lo: edges[0],
            hi: edges[bins],
        });
    }
    let norm = 1.0 + bins as f64 * epsilon;
    let probabilities = counts
        .iter()
        .map(|&c| (c as f64 / inside as f64 + epsilon) / norm)
        .collect();
    Ok(SampleDistribution {
        label: series.label().to_string(),
        bin_edges: edges,
        probabilities,
        smoothing_epsilon: epsilon,
    })
}

/// Fits every training series over shared Freedman–Diaconis edges.
pub fn fit_models(training: &[AttenuationSeries], epsilon: f64) -> Result<Vec<SampleDistribution>> {
    let refs: Vec<&AttenuationSeries> = training.iter().collect();
    let edges = shared_edges(&refs)?;
    training
        .iter()
        .map(|s| fit_distribution(s, &Binning::Edges(edges.clone()), epsilon))
        .collect()
}

/// Log-likelihood ratio in nats.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Llr {
    pub nats: f64,
    /// The observed value lay outside the bin range.
    pub clamped: bool,
}

/// `Γ_{i,j}(a) = ln[Pr(a | F_i) / Pr(a | F_j)]`.
pub fn llr(d_i: &SampleDistribution, d_j: &SampleDistribution, a: f64) -> Result<Llr> {
    if d_i.bin_edges != d_j.bin_edges {
        return Err(Error::EdgeMismatch);
    }
    let (p_i, clamped) = d_i.probability(a);
    let (p_j, _) = d_j.probability(a);
    Ok(Llr {
        nats: (p_i / p_j).ln(),
        clamped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    /// Zero-based index of the winning model.
    pub winner: usize,
    /// `vote_matrix[i][j]`: samples at which `Γ_{i,j} > 0`.
    pub vote_matrix: Vec<Vec<usize>>,
    /// Samples at which each model beat all others.
    pub per_sample_votes: Vec<usize>,
    /// (sample, unordered pair) combinations with `Γ = 0`.
    pub pair_ties: usize,
    /// The top vote count was shared (or nobody voted); the winner is then
    /// the lowest tied index.
    pub ambiguous: bool,
    /// Observed samples clamped into a boundary bin.
    pub out_of_range: usize,
}

/// One-vs-all LLR tests at every observed sample, then a majority vote.
pub fn classify(
    observed: &AttenuationSeries,
    models: &[SampleDistribution],
) -> Result<ClassificationResult> {
    if models.len() < 2 {
        return Err(Error::invalid("models", "need at least 2 hypotheses"));
    }
    let edges = &models[0].bin_edges;
    if models.iter().any(|m| &m.bin_edges != edges) {
        return Err(Error::EdgeMismatch);
    }
    let h = models.len();
    let mut vote_matrix = vec![vec![0usize; h]; h];
    let mut per_sample_votes = vec![0usize; h];
    let mut pair_ties = 0;
    let mut out_of_range = 0;

    for &a in observed.values() {
        let (bin, clamped) = bin_index(edges, a);
        if clamped {
            out_of_range += 1;
        }
        for i in 0..h {
            let mut wins_all = true;
            for j in 0..h {
                if i == j {
                    continue;
                }
                let g = (models[i].probabilities[bin] / models[j].probabilities[bin]).ln();
                if g > 0.0 {
                    vote_matrix[i][j] += 1;
                } else {
                    wins_all = false;
                    if g == 0.0 && i < j {
                        pair_ties += 1;
                    }
                }
            }
            if wins_all {
                per_sample_votes[i] += 1;
            }
        }
    }

    let top = *per_sample_votes.iter().max().unwrap_or(&0);
    let tied = per_sample_votes.iter().filter(|&&v| v == top).count();
    let winner = per_sample_votes.iter().position(|&v| v == top).unwrap_or(0);
    Ok(ClassificationResult {
        winner,
        vote_matrix,
        per_sample_votes,
        pair_ties,
        ambiguous: tied > 1 || top == 0,
        out_of_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BandConfig, BandId};
    use approx::assert_relative_eq;

    fn series(values: Vec<f64>, label: &str) -> AttenuationSeries {
        let band = BandConfig::new(BandId::Custom, 1e9, 2e9, values.len()).unwrap();
        AttenuationSeries::new(band, values, label).unwrap()
    }

    #[test]
    fn constant_series_two_bins() {
        let s = series(vec![0.2; 10], "c");
        let eps = 1e-3;
        let d = fit_distribution(&s, &Binning::Edges(vec![0.0, 1.0, 2.0]), eps).unwrap();
        let delta = eps / (1.0 + 2.0 * eps);
        assert_relative_eq!(d.probabilities[0], 1.0 - delta, epsilon = 1e-15);
        assert_relative_eq!(d.probabilities[1], delta, epsilon = 1e-15);
        d.validate().unwrap();
    }

    #[test]
    fn bin_centers_are_uniform() {
        let s = series(vec![0.5, 1.5, 2.5, 3.5], "u");
        let d = fit_distribution(&s, &Binning::Edges(vec![0.0, 1.0, 2.0, 3.0, 4.0]), 1e-9).unwrap();
        for p in &d.probabilities {
            assert_relative_eq!(*p, 0.25, epsilon = 1e-9);
        }
        let sum: f64 = d.probabilities.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_outside_is_an_error() {
        let s = series(vec![10.0, 11.0], "o");
        let err = fit_distribution(&s, &Binning::Edges(vec![0.0, 1.0, 2.0]), 1e-6);
        assert!(matches!(err, Err(Error::EmptyHistogram { .. })));
        assert!(fit_distribution(&s, &Binning::Edges(vec![0.0, 1.0]), 1e-6).is_err());
        assert!(fit_distribution(&s, &Binning::Count(1), 1e-6).is_err());
    }

    #[test]
    fn count_binning_spans_range() {
        let s = series(vec![1.0, 2.0, 3.0, 5.0], "c");
        let d = fit_distribution(&s, &Binning::Count(4), 1e-6).unwrap();
        assert_eq!(d.bin_edges, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn llr_examples() {
        let edges = vec![0.0, 1.0, 2.0];
        let a = SampleDistribution {
            label: "a".into(),
            bin_edges: edges.clone(),
            probabilities: vec![0.6, 0.4],
            smoothing_epsilon: 1e-6,
        };
        let b = SampleDistribution {
            probabilities: vec![0.3, 0.7],
            ..a.clone()
        };
        assert_eq!(llr(&a, &a, 0.5).unwrap().nats, 0.0);
        assert_relative_eq!(llr(&a, &b, 0.5).unwrap().nats, 2f64.ln(), epsilon = 1e-15);
        let out = llr(&a, &b, -4.0).unwrap();
        assert!(out.clamped);
        assert_relative_eq!(out.nats, 2f64.ln(), epsilon = 1e-15);
        let c = SampleDistribution {
            bin_edges: vec![0.0, 1.5, 2.0],
            ..a.clone()
        };
        assert!(matches!(llr(&a, &c, 0.5), Err(Error::EdgeMismatch)));
    }

    #[test]
    fn bin_lookup_edges() {
        let e = [0.0, 1.0, 2.0];
        assert_eq!(bin_index(&e, 0.0), (0, false));
        assert_eq!(bin_index(&e, 1.0), (1, false));
        assert_eq!(bin_index(&e, 2.0), (1, false));
        assert_eq!(bin_index(&e, 2.1), (1, true));
        assert_eq!(bin_index(&e, -0.1), (0, true));
    }

    #[test]
    fn self_consistency_and_identical_models() {
        let low = series((0..50).map(|k| (k % 5) as f64 * 0.1).collect(), "low");
        let high = series(
            (0..50).map(|k| 10.0 + (k % 7) as f64 * 0.3).collect(),
            "high",
        );
        let models =
            fit_models(&[low.clone(), high.clone(), low.clone()], DEFAULT_EPSILON).unwrap();
        // first and third are identical, second distinct
        let r = classify(&high, &models).unwrap();
        assert_eq!(r.winner, 1);
        assert!(!r.ambiguous);
        assert_eq!(r.per_sample_votes, vec![0, 50, 0]);

        let r = classify(&low, &models).unwrap();
        assert!(r.ambiguous);
        assert_eq!(r.winner, 0);

        let two = fit_models(&[low.clone(), high.clone()], DEFAULT_EPSILON).unwrap();
        assert_eq!(classify(&low, &two).unwrap().winner, 0);
        assert_eq!(classify(&high, &two).unwrap().winner, 1);
    }

    #[test]
    fn vote_accounting() {
        let a = series((0..40).map(|k| (k % 4) as f64).collect(), "a");
        let b = series((0..40).map(|k| 2.0 + (k % 5) as f64).collect(), "b");
        let c = series((0..40).map(|k| 5.0 + (k % 3) as f64).collect(), "c");
        let models = fit_models(&[a.clone(), b, c], DEFAULT_EPSILON).unwrap();
        let r = classify(&a, &models).unwrap();
        let wins: usize = r.vote_matrix.iter().flatten().sum();
        assert_eq!(wins + r.pair_ties, a.len() * 3);
    }

    #[test]
    fn classify_needs_shared_edges_and_two_models() {
        let a = series(vec![0.0, 1.0, 2.0], "a");
        let m1 = fit_distribution(&a, &Binning::Count(2), 1e-6).unwrap();
        let m2 = fit_distribution(&a, &Binning::Count(3), 1e-6).unwrap();
        assert!(matches!(
            classify(&a, &[m1.clone(), m2]),
            Err(Error::EdgeMismatch)
        ));
        assert!(classify(&a, &[m1]).is_err());
    }
}
