//! Link scene, blocker phantom, band grids and image-method ray paths.
//!
//! The horizontal plane uses the link frame: TX at the origin, RX along the
//! first axis, lateral target offsets along the second. Floor and ceiling
//! reflections are computed in 3D using the height of that plane above the
//! floor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the horizontal link plane (m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn add_scaled(self, dir: Point2, t: f64) -> Point2 {
        Point2::new(self.x + t * dir.x, self.y + t * dir.y)
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;

    fn sub(self, other: Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// A point in 3D, link-frame horizontal coordinates plus height above floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn horizontal(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn distance(self, other: Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Reflection loss per bounce for each surface class (dB, ≥ 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectionLoss {
    pub floor: f64,
    pub ceiling: f64,
    pub wall: f64,
}

impl Default for ReflectionLoss {
    fn default() -> Self {
        Self {
            floor: 6.0,
            ceiling: 10.0,
            wall: 8.0,
        }
    }
}

impl ReflectionLoss {
    pub fn for_class(&self, class: SurfaceClass) -> f64 {
        match class {
            SurfaceClass::Floor => self.floor,
            SurfaceClass::Ceiling => self.ceiling,
            SurfaceClass::Wall => self.wall,
        }
    }
}

/// The measurement room and link endpoints.
///
/// The room is an axis-aligned box in the link frame whose horizontal corner
/// sits at `room_origin`; it spans `room_width` along the first axis,
/// `room_depth` along the second and `room_height` vertically. TX and RX sit
/// at `plane_height` above the floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scene {
    pub tx: Point2,
    pub rx: Point2,
    pub plane_height: f64,
    pub room_width: f64,
    pub room_depth: f64,
    pub room_height: f64,
    pub room_origin: Point2,
    pub reflection_loss: ReflectionLoss,
}

impl Default for Scene {
    fn default() -> Self {
        Scene::paper()
    }
}

impl Scene {
    /// 0.92 m link at 1 m height in a 4 m × 4 m × 3 m room.
    ///
    /// The link placement inside the room is a free choice; this one keeps
    /// every single-bounce path distinct after folding into the G-band
    /// alias-free range.
    pub fn paper() -> Self {
        Self {
            tx: Point2::new(0.0, 0.0),
            rx: Point2::new(0.92, 0.0),
            plane_height: 1.0,
            room_width: 4.0,
            room_depth: 4.0,
            room_height: 3.0,
            room_origin: Point2::new(-0.3, -1.1),
            reflection_loss: ReflectionLoss::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tx.is_finite() && self.rx.is_finite() && self.room_origin.is_finite()) {
            return Err(Error::invalid("scene", "non-finite coordinates"));
        }
        if self.tx.distance(self.rx) <= 0.0 {
            return Err(Error::invalid("scene", "tx and rx coincide"));
        }
        for (name, v) in [
            ("room_width", self.room_width),
            ("room_depth", self.room_depth),
            ("room_height", self.room_height),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid("scene", format!("{name} must be positive")));
            }
        }
        if !(self.plane_height > 0.0 && self.plane_height < self.room_height) {
            return Err(Error::invalid(
                "scene",
                format!(
                    "plane height {} m outside (0, {}) m",
                    self.plane_height, self.room_height
                ),
            ));
        }
        let l = self.reflection_loss;
        if [l.floor, l.ceiling, l.wall]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::invalid("scene", "reflection losses must be ≥ 0 dB"));
        }
        Ok(())
    }

    /// Unit vector from TX to RX.
    pub fn link_direction(&self) -> Point2 {
        let v = self.rx - self.tx;
        let n = v.norm();
        Point2::new(v.x / n, v.y / n)
    }

    /// Point at along-link coordinate `x` (from TX) and signed lateral offset
    /// `y` (positive to the left of TX→RX).
    pub fn link_point(&self, x: f64, y: f64) -> Point2 {
        let u = self.link_direction();
        let n = Point2::new(-u.y, u.x);
        Point2::new(self.tx.x + x * u.x + y * n.x, self.tx.y + x * u.y + y * n.y)
    }

    fn to_room(&self, p: Point2) -> [f64; 3] {
        [
            p.x - self.room_origin.x,
            p.y - self.room_origin.y,
            self.plane_height,
        ]
    }

    fn room_to_world(&self, p: [f64; 3]) -> Point3 {
        Point3 {
            x: p[0] + self.room_origin.x,
            y: p[1] + self.room_origin.y,
            z: p[2],
        }
    }

    fn room_dims(&self) -> [f64; 3] {
        [self.room_width, self.room_depth, self.room_height]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    PerfectlyAbsorbing,
    PerfectlyConducting,
}

/// Cylindrical blocker; `center` is its projection on the link plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub center: Point2,
    pub diameter: f64,
    pub height: f64,
    pub material: Material,
}

impl Target {
    /// Metal cylinder phantom, 6 cm diameter and 50 cm tall, at lateral
    /// offset `y` from the link midpoint.
    pub fn phantom(scene: &Scene, y: f64) -> Self {
        let d = los_path_length(scene);
        Self {
            center: scene.link_point(d / 2.0, y),
            diameter: 0.06,
            height: 0.50,
            material: Material::PerfectlyConducting,
        }
    }

    pub fn radius(&self) -> f64 {
        self.diameter / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center.is_finite() {
            return Err(Error::invalid("target", "non-finite center"));
        }
        if !(self.diameter > 0.0 && self.height > 0.0) {
            return Err(Error::invalid(
                "target",
                "diameter and height must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BandId {
    W,
    G,
    #[serde(rename = "custom")]
    Custom,
}

impl BandId {
    pub fn as_str(self) -> &'static str {
        match self {
            BandId::W => "W",
            BandId::G => "G",
            BandId::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "W" | "w" => Some(BandId::W),
            "G" | "g" => Some(BandId::G),
            "custom" => Some(BandId::Custom),
            _ => None,
        }
    }
}

/// Equally spaced sweep grid of one band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub band_id: BandId,
    pub f_start: f64,
    pub f_stop: f64,
    pub n_points: usize,
}

impl BandConfig {
    pub fn new(band_id: BandId, f_start: f64, f_stop: f64, n_points: usize) -> Result<Self> {
        let cfg = Self {
            band_id,
            f_start,
            f_stop,
            n_points,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 75–110 GHz, 1001 points.
    pub fn w_band() -> Self {
        Self {
            band_id: BandId::W,
            f_start: 75e9,
            f_stop: 110e9,
            n_points: 1001,
        }
    }

    /// 170–260 GHz, 1001 points.
    pub fn g_band() -> Self {
        Self {
            band_id: BandId::G,
            f_start: 170e9,
            f_stop: 260e9,
            n_points: 1001,
        }
    }

    pub fn for_id(id: BandId) -> Option<Self> {
        match id {
            BandId::W => Some(Self::w_band()),
            BandId::G => Some(Self::g_band()),
            BandId::Custom => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_start.is_finite() && self.f_stop.is_finite() && self.f_start >= 0.0) {
            return Err(Error::invalid("band", "frequencies must be finite and ≥ 0"));
        }
        if self.f_stop <= self.f_start {
            return Err(Error::invalid("band", "f_stop must exceed f_start"));
        }
        if self.n_points < 2 {
            return Err(Error::invalid("band", "need at least 2 points"));
        }
        Ok(())
    }

    pub fn span(&self) -> f64 {
        self.f_stop - self.f_start
    }

    pub fn spacing(&self) -> f64 {
        self.span() / (self.n_points - 1) as f64
    }

    /// The k-th grid frequency, by index formula.
    pub fn frequency(&self, k: usize) -> f64 {
        if k + 1 == self.n_points {
            self.f_stop
        } else {
            self.f_start + (k as f64 * self.span()) / (self.n_points - 1) as f64
        }
    }

    pub fn center_frequency(&self) -> f64 {
        0.5 * (self.f_start + self.f_stop)
    }
}

/// Grid frequencies `f_k = f_start + k·(f_stop − f_start)/(N_f − 1)`.
pub fn frequency_grid(cfg: &BandConfig) -> Vec<f64> {
    (0..cfg.n_points).map(|k| cfg.frequency(k)).collect()
}

pub fn los_path_length(scene: &Scene) -> f64 {
    scene.tx.distance(scene.rx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SurfaceClass {
    Floor,
    Ceiling,
    Wall,
}

/// Room surface; walls are named by the link-frame axis they bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Surface {
    Floor,
    Ceiling,
    WallXMin,
    WallXMax,
    WallYMin,
    WallYMax,
}

impl Surface {
    pub fn class(self) -> SurfaceClass {
        match self {
            Surface::Floor => SurfaceClass::Floor,
            Surface::Ceiling => SurfaceClass::Ceiling,
            _ => SurfaceClass::Wall,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Surface::Floor => "floor",
            Surface::Ceiling => "ceiling",
            Surface::WallXMin => "wall_x_min",
            Surface::WallXMax => "wall_x_max",
            Surface::WallYMin => "wall_y_min",
            Surface::WallYMax => "wall_y_max",
        }
    }

    fn from_axis(axis: usize, max_side: bool) -> Self {
        match (axis, max_side) {
            (0, false) => Surface::WallXMin,
            (0, true) => Surface::WallXMax,
            (1, false) => Surface::WallYMin,
            (1, true) => Surface::WallYMax,
            (_, false) => Surface::Floor,
            (_, true) => Surface::Ceiling,
        }
    }
}

/// One specular ray path between TX and RX.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePath {
    pub path_length: f64,
    pub bounce_count: usize,
    /// Surfaces in the order the ray hits them, TX side first.
    pub surfaces: Vec<Surface>,
    /// Polyline TX → bounce points → RX.
    pub vertices: Vec<Point3>,
}

impl ImagePath {
    pub fn reflection_loss_db(&self, loss: &ReflectionLoss) -> f64 {
        self.surfaces
            .iter()
            .map(|s| loss.for_class(s.class()))
            .sum()
    }
}

/// Coordinate of the `m`-th mirror image of `s` for walls at 0 and `len`.
fn image_coordinate(s: f64, m: i64, len: f64) -> f64 {
    if m.rem_euclid(2) == 0 {
        m as f64 * len + s
    } else {
        (m + 1) as f64 * len - s
    }
}

/// Folds an unfolded coordinate back into `[0, len]`.
fn fold(u: f64, len: f64) -> f64 {
    let r = u.rem_euclid(2.0 * len);
    if r > len {
        2.0 * len - r
    } else {
        r
    }
}

/// Specular paths up to `max_order` bounces in the shoebox room, by mirror
/// images of TX. Sorted by path length (ties by surface sequence).
pub fn image_paths(scene: &Scene, max_order: usize) -> Result<Vec<ImagePath>> {
    scene.validate()?;
    let dims = scene.room_dims();
    let tx = scene.to_room(scene.tx);
    let rx = scene.to_room(scene.rx);
    for (name, p) in [("tx", tx), ("rx", rx)] {
        if (0..2).any(|a| !(p[a] > 0.0 && p[a] < dims[a])) {
            return Err(Error::Geometry(format!("{name} lies outside the room")));
        }
    }

    let order = max_order as i64;
    let mut paths = Vec::new();
    for mx in -order..=order {
        for my in -(order - mx.abs())..=(order - mx.abs()) {
            let rest = order - mx.abs() - my.abs();
            for mz in -rest..=rest {
                paths.push(trace_image(scene, tx, rx, dims, [mx, my, mz]));
            }
        }
    }
    paths.sort_by(|a, b| {
        a.path_length
            .total_cmp(&b.path_length)
            .then_with(|| a.surfaces.cmp(&b.surfaces))
    });
    Ok(paths)
}

fn trace_image(
    scene: &Scene,
    tx: [f64; 3],
    rx: [f64; 3],
    dims: [f64; 3],
    m: [i64; 3],
) -> ImagePath {
    let img: [f64; 3] = std::array::from_fn(|a| image_coordinate(tx[a], m[a], dims[a]));
    let dir: [f64; 3] = std::array::from_fn(|a| rx[a] - img[a]);
    let length = dir.iter().map(|v| v * v).sum::<f64>().sqrt();

    // Planes k·L crossed between the image and the receiver.
    let mut crossings: Vec<(f64, usize, i64)> = Vec::new();
    for a in 0..3 {
        let ks = if m[a] > 0 { 1..=m[a] } else { (m[a] + 1)..=0 };
        for k in ks {
            let t = (k as f64 * dims[a] - img[a]) / dir[a];
            crossings.push((t, a, k));
        }
    }
    crossings.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    let mut vertices = vec![scene.room_to_world(tx)];
    let mut surfaces = Vec::with_capacity(crossings.len());
    for &(t, axis, k) in &crossings {
        let p: [f64; 3] = std::array::from_fn(|a| fold(img[a] + t * dir[a], dims[a]));
        vertices.push(scene.room_to_world(p));
        surfaces.push(Surface::from_axis(axis, k.rem_euclid(2) == 1));
    }
    vertices.push(scene.room_to_world(rx));

    ImagePath {
        path_length: length,
        bounce_count: crossings.len(),
        surfaces,
        vertices,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn band_spacings() {
        assert_relative_eq!(BandConfig::w_band().spacing(), 35e6, max_relative = 1e-12);
        assert_relative_eq!(BandConfig::g_band().spacing(), 90e6, max_relative = 1e-12);
        let g = frequency_grid(&BandConfig::g_band());
        assert_eq!(g.len(), 1001);
        assert_eq!(g[0], 170e9);
        assert_eq!(g[1000], 260e9);
        // integer-Hz grid is exact
        for (k, f) in g.iter().enumerate() {
            assert_eq!(*f, 170e9 + 90e6 * k as f64);
        }
    }

    #[test]
    fn two_point_grid() {
        let cfg = BandConfig::new(BandId::Custom, 0.0, 1.0, 2).unwrap();
        assert_eq!(frequency_grid(&cfg), vec![0.0, 1.0]);
    }

    #[test]
    fn band_validation() {
        assert!(BandConfig::new(BandId::G, 2.0, 1.0, 10).is_err());
        assert!(BandConfig::new(BandId::G, 1.0, 2.0, 1).is_err());
    }

    #[test]
    fn los_lengths() {
        assert_relative_eq!(los_path_length(&Scene::paper()), 0.92);
        let mut s = Scene::paper();
        s.tx = Point2::new(1.0, 0.5);
        s.rx = Point2::new(0.0, 0.5);
        assert_relative_eq!(los_path_length(&s), 1.0);
        s.tx = Point2::new(0.0, 0.0);
        s.rx = Point2::new(3.0, 4.0);
        assert_relative_eq!(los_path_length(&s), 5.0);
    }

    #[test]
    fn los_only_at_order_zero() {
        let p = image_paths(&Scene::paper(), 0).unwrap();
        assert_eq!(p.len(), 1);
        assert_relative_eq!(p[0].path_length, 0.92, epsilon = 1e-12);
        assert_eq!(p[0].bounce_count, 0);
    }

    #[test]
    fn floor_bounce_matches_mirror_geometry() {
        let paths = image_paths(&Scene::paper(), 1).unwrap();
        assert_eq!(paths.len(), 7);
        let floor = paths
            .iter()
            .find(|p| p.surfaces == [Surface::Floor])
            .unwrap();
        // direct 3D mirror: TX image at z = -1 m
        let expected = 2.0 * (0.46f64.powi(2) + 1.0).sqrt();
        assert_relative_eq!(floor.path_length, expected, epsilon = 1e-12);
        assert_relative_eq!(floor.path_length, 2.20145, epsilon = 1e-5);
        // bounce point lies on the floor at the link midpoint
        let b = floor.vertices[1];
        assert_relative_eq!(b.z, 0.0, epsilon = 1e-12);
        assert_relative_eq!(b.x, 0.46, epsilon = 1e-12);
    }

    #[test]
    fn floor_and_ceiling_closed_form() {
        let mut s = Scene::paper();
        s.plane_height = 1.2;
        s.room_height = 2.8;
        let paths = image_paths(&s, 1).unwrap();
        let get = |surf| {
            paths
                .iter()
                .find(|p| p.surfaces == [surf])
                .unwrap()
                .path_length
        };
        let d = 0.92f64;
        assert_relative_eq!(
            get(Surface::Floor),
            2.0 * ((d / 2.0).powi(2) + 1.2f64.powi(2)).sqrt(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            get(Surface::Ceiling),
            2.0 * ((d / 2.0).powi(2) + 1.6f64.powi(2)).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn outside_room_is_rejected() {
        let mut s = Scene::paper();
        s.rx = Point2::new(10.0, 0.0);
        assert!(matches!(image_paths(&s, 1), Err(Error::Geometry(_))));
    }

    #[test]
    fn second_order_bounce_points_lie_on_surfaces() {
        let s = Scene::paper();
        let paths = image_paths(&s, 2).unwrap();
        assert!(paths.iter().any(|p| p.bounce_count == 2));
        for p in &paths {
            assert_eq!(p.vertices.len(), p.bounce_count + 2);
            let polyline: f64 = p.vertices.windows(2).map(|w| w[0].distance(w[1])).sum();
            assert_relative_eq!(polyline, p.path_length, epsilon = 1e-9);
            for (v, surf) in p.vertices[1..].iter().zip(&p.surfaces) {
                let on = match surf {
                    Surface::Floor => v.z.abs(),
                    Surface::Ceiling => (v.z - s.room_height).abs(),
                    Surface::WallXMin => (v.x - s.room_origin.x).abs(),
                    Surface::WallXMax => (v.x - s.room_origin.x - s.room_width).abs(),
                    Surface::WallYMin => (v.y - s.room_origin.y).abs(),
                    Surface::WallYMax => (v.y - s.room_origin.y - s.room_depth).abs(),
                };
                assert!(on < 1e-9, "{surf:?} vertex {v:?}");
            }
        }
    }
}
