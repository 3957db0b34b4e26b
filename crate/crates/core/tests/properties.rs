use std::f64::consts::PI;

use blockscope::features::default_delay_tolerance;
use blockscope::io::{format_sweep, parse_sweep};
use blockscope::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn taps_sweep(band: &BandConfig, taps: &[(f64, f64)]) -> FrequencySweep {
    let values = (0..band.n_points)
        .map(|k| {
            let f = band.frequency(k);
            taps.iter()
                .map(|&(z, a)| Complex64::from_polar(a, -2.0 * PI * f * z / SPEED_OF_LIGHT))
                .sum()
        })
        .collect();
    FrequencySweep::new(band.clone(), values, "taps").unwrap()
}

fn feature_set(taps: &[(f64, f64)]) -> CirFeatureSet {
    let mut taps = taps.to_vec();
    taps.sort_by(|a, b| a.0.total_cmp(&b.0));
    taps.dedup_by(|a, b| a.0 == b.0);
    let comps = taps
        .iter()
        .map(|&(z, a)| MultipathComponent::from_path_length(z, a))
        .collect();
    CirFeatureSet::new(comps, 3.331e-3, "p").unwrap()
}

fn arb_set(max: usize) -> impl Strategy<Value = CirFeatureSet> {
    prop::collection::vec((0.5f64..3.0, 0.01f64..1.0), 0..=max).prop_map(|t| feature_set(&t))
}

/// Maximum-cardinality, then minimum-total-gap assignment by exhaustive search.
fn brute_force(
    base: &CirFeatureSet,
    obs: &CirFeatureSet,
    tol: f64,
) -> (usize, f64, Vec<(usize, usize)>) {
    #[allow(clippy::too_many_arguments)]
    fn go(
        i: usize,
        b: &[f64],
        o: &[f64],
        tol: f64,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        cost: f64,
        best: &mut (usize, f64, Vec<(usize, usize)>),
    ) {
        if i == b.len() {
            let better = cur.len() > best.0 || (cur.len() == best.0 && cost < best.1 - 1e-18);
            if better {
                *best = (cur.len(), cost, cur.clone());
            }
            return;
        }
        go(i + 1, b, o, tol, used, cur, cost, best);
        for j in 0..o.len() {
            let gap = (b[i] - o[j]).abs();
            if !used[j] && gap <= tol {
                used[j] = true;
                cur.push((i, j));
                go(i + 1, b, o, tol, used, cur, cost + gap, best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let b: Vec<f64> = base.components().iter().map(|c| c.delay_s).collect();
    let o: Vec<f64> = obs.components().iter().map(|c| c.delay_s).collect();
    let mut best = (0, f64::INFINITY, Vec::new());
    go(
        0,
        &b,
        &o,
        tol,
        &mut vec![false; o.len()],
        &mut Vec::new(),
        0.0,
        &mut best,
    );
    if best.2.is_empty() {
        best.1 = 0.0;
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn self_match_is_identity(s in arb_set(9)) {
        let r = match_and_perturb(&s, &s, default_delay_tolerance(&s));
        prop_assert_eq!(r.delta_k, 0);
        prop_assert!(r.unmatched_baseline.is_empty());
        prop_assert_eq!(r.matched_pairs.len(), s.k());
        prop_assert!(r.matched_pairs.iter().all(|m| m.rho == 1.0));
    }

    #[test]
    fn components_are_conserved(b in arb_set(9), o in arb_set(9), bins in 0.0f64..20.0) {
        let r = match_and_perturb(&b, &o, bins * b.delay_resolution_s());
        prop_assert_eq!(
            b.k() + o.k(),
            2 * r.matched_pairs.len() + r.delta_k + r.unmatched_baseline.len()
        );
        prop_assert_eq!(r.delta_k, r.new_components.k());
        for m in &r.matched_pairs {
            prop_assert!(!r.new_indices.contains(&m.observed_index));
        }
    }

    #[test]
    fn swapping_arguments_inverts_rho(b in arb_set(9), o in arb_set(9), bins in 0.0f64..20.0) {
        let tol = bins * b.delay_resolution_s();
        let fwd = match_and_perturb(&b, &o, tol);
        let rev = match_and_perturb(&o, &b, tol);
        prop_assert_eq!(fwd.matched_pairs.len(), rev.matched_pairs.len());
        for m in &fwd.matched_pairs {
            let back = rev.pair_for_baseline(m.observed_index).unwrap();
            prop_assert_eq!(back.observed_index, m.baseline_index);
            prop_assert!((back.rho * m.rho - 1.0).abs() < 1e-12);
        }
        prop_assert_eq!(&fwd.new_indices, &rev.unmatched_baseline);
        prop_assert_eq!(&fwd.unmatched_baseline, &rev.new_indices);
    }

    #[test]
    fn greedy_is_maximal_and_half_optimal(b in arb_set(6), o in arb_set(6), bins in 0.0f64..60.0) {
        let tol = bins * b.delay_resolution_s();
        let r = match_and_perturb(&b, &o, tol);
        let (best, _, _) = brute_force(&b, &o, tol);
        prop_assert!(2 * r.matched_pairs.len() >= best);
        // maximal: no unmatched pair is still within tolerance
        for &i in &r.unmatched_baseline {
            for &j in &r.new_indices {
                let gap = (b.components()[i].delay_s - o.components()[j].delay_s).abs();
                prop_assert!(gap > tol);
            }
        }
    }

    #[test]
    fn greedy_equals_exhaustive_on_separated_sets(
        zb in prop::collection::btree_set(0u32..40, 0..=6),
        shifts in prop::collection::vec((-0.9f64..0.9, any::<bool>()), 6),
    ) {
        // Grid spacing 5 bins, tolerance 2 bins: every component has at most
        // one partner, as in a baseline/target pair without crowding.
        let res = 3.331e-3;
        let base: Vec<(f64, f64)> = zb.iter().map(|&k| (0.5 + 5.0 * res * k as f64, 1.0)).collect();
        let obs: Vec<(f64, f64)> = base
            .iter()
            .zip(&shifts)
            .filter(|(_, s)| s.1)
            .map(|(&(z, _), s)| (z + 2.0 * res * s.0, 0.5))
            .collect();
        let (b, o) = (feature_set(&base), feature_set(&obs));
        let tol = 2.0 * res / SPEED_OF_LIGHT;
        let r = match_and_perturb(&b, &o, tol);
        let (_, _, mut best) = brute_force(&b, &o, tol);
        best.sort_unstable();
        let greedy: Vec<(usize, usize)> =
            r.matched_pairs.iter().map(|m| (m.baseline_index, m.observed_index)).collect();
        prop_assert_eq!(greedy, best);
    }

    #[test]
    fn scatter_round_trip(y in 1e-3f64..0.5, frac in 0.1f64..0.9) {
        let d = 0.92;
        let x = frac * d;
        let l = scatter_path_length(x, y, d);
        let scene = Scene::paper();
        let back = invert_scatter_path(l, &scene, x).unwrap();
        prop_assert!((back - y).abs() < 1e-9, "y={} back={}", y, back);
    }

    #[test]
    fn inversion_is_monotone(l1 in 0.9201f64..2.0, dl in 1e-6f64..0.5) {
        let scene = Scene::paper();
        let a = invert_scatter_path(l1, &scene, 0.46).unwrap();
        let b = invert_scatter_path(l1 + dl, &scene, 0.46).unwrap();
        prop_assert!(b > a);
    }

    #[test]
    fn sweep_text_round_trip(seed in any::<u64>(), label in "[a-z0-9 =_.-]{0,20}") {
        let band = BandConfig::w_band();
        let syn = SynthesisConfig { seed, ..Default::default() };
        let s = synthesize_sweep(&Scene::paper(), None, &band, &syn).unwrap().with_label(label.trim());
        let back = parse_sweep(&format_sweep(&s), "mem").unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn calibration_identity(seed in any::<u64>(), y in -0.5f64..0.5) {
        let scene = Scene::paper();
        let syn = SynthesisConfig { seed, ..Default::default() };
        let t = Target::phantom(&scene, y);
        let s = synthesize_sweep(&scene, Some(&t), &BandConfig::g_band(), &syn).unwrap();
        let a = excess_attenuation(&s, &s).unwrap();
        prop_assert!(a.values().iter().all(|v| v.abs() <= 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn extraction_ignores_global_scale(scale in 1e-4f64..1e4, z1 in 0.6f64..1.4, gap in 0.1f64..1.5) {
        let band = BandConfig::g_band();
        let taps = [(z1, 1.0), (z1 + gap, 0.3)];
        let opts = ExtractOptions::default();
        let s = taps_sweep(&band, &taps);
        let f1 = extract_features(&pdp(&s, Window::default(), 8).unwrap(), &opts).unwrap();
        let scaled = s.scaled(Complex64::new(scale, 0.0)).unwrap();
        let f2 = extract_features(&pdp(&scaled, Window::default(), 8).unwrap(), &opts).unwrap();
        prop_assert_eq!(f1.k(), f2.k());
        for (a, b) in f1.components().iter().zip(f2.components()) {
            prop_assert_eq!(a.path_length_m, b.path_length_m);
            prop_assert!((b.amplitude / a.amplitude / scale - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn time_shift_moves_peak(z in 0.3f64..1.5, shift in 0.05f64..1.5) {
        let band = BandConfig::g_band();
        let s = taps_sweep(&band, &[(z, 1.0), (z + 0.4, 0.2)]);
        let rot: Vec<Complex64> = s
            .values()
            .iter()
            .zip(s.frequencies())
            .map(|(v, f)| v * Complex64::from_polar(1.0, -2.0 * PI * f * shift / SPEED_OF_LIGHT))
            .collect();
        let shifted = FrequencySweep::new(band.clone(), rot, "shifted").unwrap();
        let p0 = pdp(&s, Window::default(), 8).unwrap();
        let p1 = pdp(&shifted, Window::default(), 8).unwrap();
        let range = p0.alias_free_range;
        let moved = (p1.path_lengths[p1.peak_index()] - p0.path_lengths[p0.peak_index()]).rem_euclid(range);
        prop_assert!((moved - shift).abs() <= 1.01 * p0.axis_spacing(), "moved {} vs {}", moved, shift);
        // A whole-bin shift leaves sampled peak powers untouched.
        let bins = (shift / p0.axis_spacing()).round();
        let exact = bins * p0.axis_spacing();
        let rot: Vec<Complex64> = s
            .values()
            .iter()
            .zip(s.frequencies())
            .map(|(v, f)| v * Complex64::from_polar(1.0, -2.0 * PI * (f - band.f_start) * exact / SPEED_OF_LIGHT))
            .collect();
        let p2 = pdp(&FrequencySweep::new(band, rot, "s").unwrap(), Window::default(), 8).unwrap();
        let db = 10.0 * (p2.peak_power() / p0.peak_power()).log10();
        prop_assert!(db.abs() < 1e-6);
    }

    #[test]
    fn padding_never_moves_peak_by_more_than_a_bin(z in 0.2f64..3.0, pad in 2usize..16) {
        let band = BandConfig::g_band();
        let s = taps_sweep(&band, &[(z, 1.0)]);
        for w in [Window::Rectangular, Window::Hann, Window::default()] {
            let p1 = pdp(&s, w, 1).unwrap();
            let pp = pdp(&s, w, pad).unwrap();
            let zp = pp.path_lengths[pp.peak_index()];
            let z1 = p1.path_lengths[p1.peak_index()];
            prop_assert!((zp - z1).abs() <= p1.axis_spacing() + 1e-12);
            prop_assert!((zp - z).abs() <= pp.axis_spacing());
        }
    }

    #[test]
    fn equal_taps_read_equal_under_every_window(z in 0.3f64..1.5, sep_bins in 5.0f64..60.0) {
        let band = BandConfig::g_band();
        let res = delay_resolution(&band);
        let s = taps_sweep(&band, &[(z, 0.5), (z + sep_bins * res, 0.5)]);
        for w in [Window::Rectangular, Window::Hann, Window::default()] {
            let p = pdp(&s, w, 8).unwrap();
            let near = |target: f64| {
                p.path_lengths
                    .iter()
                    .zip(&p.power_db)
                    .filter(|(zz, _)| (**zz - target).abs() <= res)
                    .map(|(_, db)| *db)
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            let diff = near(z) - near(z + sep_bins * res);
            let limit = 0.1;
            prop_assert!(diff.abs() < limit, "{}: {} dB", w, diff);
        }
    }
}

#[test]
fn parseval_with_synthetic_room() {
    let syn = SynthesisConfig {
        seed: 5,
        ..Default::default()
    };
    let s = synthesize_sweep(&Scene::paper(), None, &BandConfig::g_band(), &syn).unwrap();
    let p = pdp(&s, Window::Rectangular, 1).unwrap();
    let lhs: f64 = p.power.iter().sum();
    let rhs = s.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / s.len() as f64;
    assert!(((lhs - rhs) / rhs).abs() < 1e-9);
}
