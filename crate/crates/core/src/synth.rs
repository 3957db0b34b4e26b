//! Synthetic frequency sweeps from a ray sum with knife-edge blockage.
//!
//! Every image-method path contributes `a_p·g_p(f)·exp(−j2πfℓ_p/c)`, with
//! `a_p` the 1/ℓ spreading and reflection loss and `g_p` the diffraction gain
//! of the cylinder, modelled as an infinitely tall absorbing strip in the
//! horizontal plane. A conducting cylinder also adds a first-order specular
//! scatter ray off its surface.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fresnel::knife_edge_field;
use crate::geometry::{
    image_paths, los_path_length, BandConfig, Material, Point2, Point3, Scene, Surface, Target,
};
use crate::sweep::FrequencySweep;
use crate::SPEED_OF_LIGHT;

/// Rays further than this many first-Fresnel-zone radii from the strip are
/// left untouched.
pub const FRESNEL_ZONE_CUTOFF: f64 = 3.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockageModel {
    /// Only the cylinder edge nearest the ray, as one absorbing half-plane.
    SingleKnifeEdge,
    /// Absorbing strip spanning the cylinder diameter.
    #[default]
    DoubleKnifeEdge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    /// Noise level in dB relative to the unobstructed LoS amplitude;
    /// `-inf` disables noise.
    pub noise_floor_db: f64,
    pub seed: u64,
    pub blockage_model: BlockageModel,
    /// Maximum number of wall/floor/ceiling bounces.
    pub max_order: usize,
    /// Add the specular scatter ray off a conducting target.
    pub target_scatter: bool,
    /// Common amplitude constant applied to all rays.
    pub amplitude_scale: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            noise_floor_db: -60.0,
            seed: 0,
            blockage_model: BlockageModel::default(),
            max_order: 1,
            target_scatter: true,
            amplitude_scale: 1.0,
        }
    }
}

impl SynthesisConfig {
    pub fn noiseless() -> Self {
        Self {
            noise_floor_db: f64::NEG_INFINITY,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.noise_floor_db.is_nan() || self.noise_floor_db > 0.0 {
            return Err(Error::invalid("synthesis", "noise floor must be ≤ 0 dB"));
        }
        if !(self.amplitude_scale.is_finite() && self.amplitude_scale > 0.0) {
            return Err(Error::invalid(
                "synthesis",
                "amplitude scale must be positive",
            ));
        }
        Ok(())
    }
}

/// `ν = h·√(2(d₁+d₂)/(λ·d₁·d₂))`.
pub fn fresnel_parameter_from(clearance: f64, d1: f64, d2: f64, wavelength: f64) -> f64 {
    clearance * (2.0 * (d1 + d2) / (wavelength * d1 * d2)).sqrt()
}

/// Fresnel parameter of an edge point relative to the TX→RX line.
///
/// The clearance is the signed perpendicular distance of the edge from the
/// line, positive to the left of TX→RX.
pub fn fresnel_parameter(tx: Point2, rx: Point2, edge: Point2, frequency: f64) -> Result<f64> {
    if !(frequency > 0.0) {
        return Err(Error::invalid("frequency", "must be positive"));
    }
    let link = rx - tx;
    let len = link.norm();
    if len == 0.0 {
        return Err(Error::Geometry("tx and rx coincide".into()));
    }
    let u = Point2::new(link.x / len, link.y / len);
    let rel = edge - tx;
    let d1 = rel.dot(u);
    let d2 = len - d1;
    if d1 <= 0.0 || d2 <= 0.0 {
        return Err(Error::Geometry(format!(
            "edge is not strictly between tx and rx (d1 = {d1} m, d2 = {d2} m)"
        )));
    }
    let clearance = u.cross(rel);
    Ok(fresnel_parameter_from(
        clearance,
        d1,
        d2,
        SPEED_OF_LIGHT / frequency,
    ))
}

/// Knife-edge excess loss `−20·log10|F(ν)|` in dB.
pub fn knife_edge_loss(nu: f64) -> f64 {
    -20.0 * knife_edge_field(nu).norm().log10()
}

#[derive(Clone, Debug, PartialEq)]
pub enum RayKind {
    Specular { surfaces: Vec<Surface> },
    TargetScatter,
}

/// One propagation path of the synthetic channel.
#[derive(Clone, Debug, PartialEq)]
pub struct RayComponent {
    pub path_length: f64,
    /// Linear gain before blockage (spreading, reflection loss, scatter).
    pub amplitude: Complex64,
    /// The target lies within the Fresnel-zone cutoff of this ray somewhere
    /// in the band.
    pub blocked: bool,
    pub kind: RayKind,
    /// Polyline TX → interaction points → RX.
    pub vertices: Vec<Point3>,
}

/// Where the strip sits relative to the ray leg it is closest to.
#[derive(Clone, Copy, Debug, PartialEq)]
struct StripGeometry {
    /// Signed lateral offset of the strip center from the ray (m).
    lateral: f64,
    half_width: f64,
    /// Distances along the ray from its source and to its end (m).
    d1: f64,
    d2: f64,
}

impl StripGeometry {
    fn locate(ray: &RayComponent, target: &Target) -> Option<Self> {
        let pts: Vec<Point2> = ray.vertices.iter().map(|v| v.horizontal()).collect();
        let legs: Vec<f64> = pts.windows(2).map(|w| w[0].distance(w[1])).collect();
        let total: f64 = legs.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let scale = ray.path_length / total;
        let r = target.radius();

        let mut best: Option<(f64, StripGeometry)> = None;
        let mut before = 0.0;
        for (w, &len) in pts.windows(2).zip(&legs) {
            if len > 0.0 {
                let u = Point2::new((w[1].x - w[0].x) / len, (w[1].y - w[0].y) / len);
                let rel = target.center - w[0];
                let along = rel.dot(u);
                if along > 0.0 && along < len {
                    let lateral = u.cross(rel);
                    let gap = (lateral.abs() - r).max(0.0);
                    let d1 = (before + along) * scale;
                    let cand = StripGeometry {
                        lateral,
                        half_width: r,
                        d1,
                        d2: ray.path_length - d1,
                    };
                    if best.is_none_or(|(g, _)| gap < g) {
                        best = Some((gap, cand));
                    }
                }
            }
            before += len;
        }
        best.map(|(_, g)| g)
    }

    fn fresnel_radius(&self, wavelength: f64) -> f64 {
        (wavelength * self.d1 * self.d2 / (self.d1 + self.d2)).sqrt()
    }

    fn within_cutoff(&self, wavelength: f64) -> bool {
        let gap = (self.lateral.abs() - self.half_width).max(0.0);
        gap <= FRESNEL_ZONE_CUTOFF * self.fresnel_radius(wavelength)
    }

    fn gain(&self, frequency: f64, model: BlockageModel) -> Complex64 {
        let wavelength = SPEED_OF_LIGHT / frequency;
        if !self.within_cutoff(wavelength) {
            return Complex64::new(1.0, 0.0);
        }
        let nu_lo =
            fresnel_parameter_from(self.lateral - self.half_width, self.d1, self.d2, wavelength);
        let nu_hi =
            fresnel_parameter_from(self.lateral + self.half_width, self.d1, self.d2, wavelength);
        match model {
            // Open aperture (−∞, ν_lo) ∪ (ν_hi, ∞).
            BlockageModel::DoubleKnifeEdge => {
                Complex64::new(1.0, 0.0) - knife_edge_field(nu_lo) + knife_edge_field(nu_hi)
            }
            BlockageModel::SingleKnifeEdge => {
                if self.lateral >= 0.0 {
                    knife_edge_field(-nu_lo)
                } else {
                    knife_edge_field(nu_hi)
                }
            }
        }
    }
}

/// Complex diffraction gain of `ray` caused by `target` at `frequency`.
///
/// Unity when the target does not project onto the ray or lies beyond the
/// Fresnel-zone cutoff. The scene is accepted for signature symmetry with
/// the other geometry operations; the ray already carries its polyline.
pub fn blockage_gain(
    _scene: &Scene,
    target: &Target,
    ray: &RayComponent,
    frequency: f64,
    model: BlockageModel,
) -> Complex64 {
    if matches!(ray.kind, RayKind::TargetScatter) {
        return Complex64::new(1.0, 0.0);
    }
    StripGeometry::locate(ray, target)
        .map_or(Complex64::new(1.0, 0.0), |g| g.gain(frequency, model))
}

/// Shortest distance from `c` to the segment `a`–`b`.
fn segment_distance(a: Point2, b: Point2, c: Point2) -> f64 {
    let ab = b - a;
    let t = ((c - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
    a.add_scaled(ab, t).distance(c)
}

/// Specular reflection point on the cylinder for the TX → RX pair, as the
/// minimizer of the bistatic path length over the circle.
fn specular_point(tx: Point2, rx: Point2, center: Point2, r: f64) -> Point2 {
    let at = |theta: f64| Point2::new(center.x + r * theta.cos(), center.y + r * theta.sin());
    let len = |theta: f64| {
        let p = at(theta);
        tx.distance(p) + p.distance(rx)
    };
    const COARSE: usize = 720;
    let step = 2.0 * PI / COARSE as f64;
    let best = (0..COARSE)
        .map(|i| i as f64 * step)
        .min_by(|a, b| len(*a).total_cmp(&len(*b)))
        .unwrap_or(0.0);

    // the path-length derivative changes sign across the minimum
    let slope = |theta: f64| {
        let p = at(theta);
        let tangent = Point2::new(-theta.sin(), theta.cos());
        let (a, b) = (p - tx, p - rx);
        tangent.dot(a) / a.norm() + tangent.dot(b) / b.norm()
    };
    let (mut lo, mut hi) = (best - step, best + step);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    at(0.5 * (lo + hi))
}

/// First-order specular scatter off a conducting cylinder, with the
/// geometric-optics divergence of a surface curved in the horizontal plane
/// and flat vertically. `None` when the cylinder intersects the LoS segment
/// or absorbs.
fn target_scatter_ray(scene: &Scene, target: &Target, scale: f64) -> Option<RayComponent> {
    if target.material != Material::PerfectlyConducting {
        return None;
    }
    let r = target.radius();
    if segment_distance(scene.tx, scene.rx, target.center) <= r {
        return None;
    }
    let p = specular_point(scene.tx, scene.rx, target.center, r);
    let s_i = scene.tx.distance(p);
    let s_r = p.distance(scene.rx);
    let normal = Point2::new((p.x - target.center.x) / r, (p.y - target.center.y) / r);
    let to_tx = Point2::new((scene.tx.x - p.x) / s_i, (scene.tx.y - p.y) / s_i);
    let cos_i = normal.dot(to_tx);
    if cos_i <= 0.0 {
        return None;
    }
    let rho_h = 1.0 / (1.0 / s_i + 2.0 / (r * cos_i));
    let rho_v = s_i;
    let spread = (rho_v * rho_h / ((rho_v + s_r) * (rho_h + s_r))).sqrt() / s_i;
    let h = scene.plane_height;
    Some(RayComponent {
        path_length: s_i + s_r,
        // vertical polarization parallel to the cylinder axis: R = −1
        amplitude: Complex64::new(-scale * spread, 0.0),
        blocked: false,
        kind: RayKind::TargetScatter,
        vertices: vec![
            Point3 {
                x: scene.tx.x,
                y: scene.tx.y,
                z: h,
            },
            Point3 {
                x: p.x,
                y: p.y,
                z: h,
            },
            Point3 {
                x: scene.rx.x,
                y: scene.rx.y,
                z: h,
            },
        ],
    })
}

/// All rays of the scene, with the blockage flag evaluated over `band`.
pub fn scene_rays(
    scene: &Scene,
    target: Option<&Target>,
    band: &BandConfig,
    syn: &SynthesisConfig,
) -> Result<Vec<RayComponent>> {
    let paths = image_paths(scene, syn.max_order)?;
    if paths.is_empty() {
        return Err(Error::Geometry("no propagation paths".into()));
    }
    // the longest wavelength has the widest Fresnel zone
    let longest = SPEED_OF_LIGHT / band.f_start.max(f64::MIN_POSITIVE);
    let mut rays: Vec<RayComponent> = paths
        .into_iter()
        .map(|p| {
            let loss_db = p.reflection_loss_db(&scene.reflection_loss);
            let mag = syn.amplitude_scale / p.path_length * 10f64.powf(-loss_db / 20.0);
            let mut ray = RayComponent {
                path_length: p.path_length,
                amplitude: Complex64::new(mag, 0.0),
                blocked: false,
                kind: RayKind::Specular {
                    surfaces: p.surfaces,
                },
                vertices: p.vertices,
            };
            if let Some(t) = target {
                ray.blocked =
                    StripGeometry::locate(&ray, t).is_some_and(|g| g.within_cutoff(longest));
            }
            ray
        })
        .collect();
    if let Some(t) = target {
        if syn.target_scatter {
            rays.extend(target_scatter_ray(scene, t, syn.amplitude_scale));
        }
    }
    Ok(rays)
}

/// Synthesizes `T(f_k) = Σ_p g_p(f_k)·a_p·exp(−j2πf_kℓ_p/c) + n_k`.
///
/// Noise is circular complex Gaussian with power `noise_floor_db` relative to
/// the unobstructed LoS amplitude, drawn from a ChaCha8 stream seeded by
/// `syn.seed`.
pub fn synthesize_sweep(
    scene: &Scene,
    target: Option<&Target>,
    band: &BandConfig,
    syn: &SynthesisConfig,
) -> Result<FrequencySweep> {
    band.validate()?;
    syn.validate()?;
    if let Some(t) = target {
        t.validate()?;
    }
    let rays = scene_rays(scene, target, band, syn)?;
    let strips: Vec<Option<StripGeometry>> = rays
        .iter()
        .map(|r| match (target, &r.kind) {
            (Some(t), RayKind::Specular { .. }) if r.blocked => StripGeometry::locate(r, t),
            _ => None,
        })
        .collect();

    let sigma = if syn.noise_floor_db == f64::NEG_INFINITY {
        0.0
    } else {
        syn.amplitude_scale / los_path_length(scene) * 10f64.powf(syn.noise_floor_db / 20.0)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(syn.seed);

    let mut values = Vec::with_capacity(band.n_points);
    for k in 0..band.n_points {
        let f = band.frequency(k);
        let mut t = Complex64::new(0.0, 0.0);
        for (ray, strip) in rays.iter().zip(&strips) {
            let phase = -2.0 * PI * f * ray.path_length / SPEED_OF_LIGHT;
            let mut c = ray.amplitude * Complex64::from_polar(1.0, phase);
            if let Some(g) = strip {
                c *= g.gain(f, syn.blockage_model);
            }
            t += c;
        }
        if sigma > 0.0 {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            t += Complex64::new(re, im) * (sigma / 2f64.sqrt());
        }
        values.push(t);
    }
    let label = match target {
        Some(_) => "target",
        None => "baseline",
    };
    FrequencySweep::new(band.clone(), values, label)
}
