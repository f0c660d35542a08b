//! World geometry: the corridor regions, the periodic band, minimum-image
//! displacements, wall queries, and non-overlapping placement sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// Seeded generator used everywhere randomness is needed. ChaCha8 is portable
/// across platforms, so a seed fully determines a trial on any machine.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Interaction terms closer than this are treated as coincident and skipped.
pub const COINCIDENT_EPS: f64 = 1e-6;

/// 2-D point or vector in meters. Components must stay finite.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Vec2 {
        debug_assert!(x.is_finite() && y.is_finite(), "non-finite Vec2 ({x}, {y})");
        Vec2 { x, y }
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    /// Unit vector, or `None` for (near-)zero input.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        if n < 1e-12 {
            None
        } else {
            Some(Vec2::new(self.x / n, self.y / n))
        }
    }

    /// Unsigned angle between two vectors, in [0, pi].
    pub fn angle_between(self, other: Vec2) -> f64 {
        self.cross(other).abs().atan2(self.dot(other))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl std::ops::AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        *self = *self + o;
    }
}

impl std::ops::SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        *self = *self - o;
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Rect {
        Rect { x_min, x_max, y_min, y_max }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Whole disk inside the closed rectangle.
    pub fn contains_disk(&self, center: Vec2, radius: f64) -> bool {
        center.x - radius >= self.x_min
            && center.x + radius <= self.x_max
            && center.y - radius >= self.y_min
            && center.y + radius <= self.y_max
    }

    /// Disk intersects the open interior.
    pub fn intersects_disk_interior(&self, center: Vec2, radius: f64) -> bool {
        center.x + radius > self.x_min
            && center.x - radius < self.x_max
            && center.y + radius > self.y_min
            && center.y - radius < self.y_max
    }
}

/// Horizontal solid wall segment (possibly a half-line; use infinite bounds).
/// `inward_y` is the unit y direction pointing into the corridor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallSegment {
    pub y: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub inward_y: f64,
}

impl WallSegment {
    /// Closest point of the segment to `p`.
    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(self.x_min, self.x_max), self.y)
    }

    /// Depth by which a disk penetrates the wall, treating the wall as solid
    /// on its outward side. Positive when the disk must be pushed inward.
    /// A center that crossed to the outward side of the wall plane counts as
    /// penetration of radius + |signed distance|.
    pub fn disk_penetration(&self, center: Vec2, radius: f64) -> Option<(f64, Vec2)> {
        if center.x >= self.x_min && center.x <= self.x_max {
            let signed = (center.y - self.y) * self.inward_y;
            let depth = radius - signed;
            if depth > 0.0 {
                return Some((depth, Vec2::new(0.0, self.inward_y)));
            }
            return None;
        }
        // Near an endpoint: only plain disk-point overlap applies.
        let q = self.closest_point(center);
        let d = (center - q).norm();
        if d < radius {
            let dir = (center - q)
                .normalized()
                .unwrap_or(Vec2::new(0.0, self.inward_y));
            return Some((radius - d, dir));
        }
        None
    }
}

/// Vertical wall seen only by crowd agents (the confinement lines that keep
/// the crowd inside its region). `inward_x` points into the allowed side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerticalWall {
    pub x: f64,
    pub inward_x: f64,
}

impl VerticalWall {
    pub fn disk_penetration(&self, center: Vec2, radius: f64) -> f64 {
        radius - (center.x - self.x) * self.inward_x
    }
}

/// The standard corridor world: a crowd region `[0, W] x [0, H]` whose top and
/// bottom edges are periodic, flanked by a start region extending left and a
/// goal region extending right, both bounded by solid walls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub crowd_region: Rect,
    /// Left edge of the goal region (goal is the half-plane x >= goal_x_min).
    pub goal_x_min: f64,
    /// Right edge of the start region (start is the half-plane x <= start_x_max).
    pub start_x_max: f64,
    /// x-interval over which y is periodic with period `height()`.
    pub band_x_min: f64,
    pub band_x_max: f64,
    /// Solid boundary segments (top/bottom of start and goal regions).
    pub walls: Vec<WallSegment>,
    /// Counter-flow removal line: agents fully past it are respawned.
    pub crowd_exit_x: Option<f64>,
    /// Vertical walls restricting crowd agents only.
    pub crowd_walls: Vec<VerticalWall>,
}

impl EnvironmentSpec {
    /// Corridor height (the periodic period H).
    pub fn height(&self) -> f64 {
        self.crowd_region.height()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.start_x_max >= self.goal_x_min {
            return Err(SimError::InvalidEnvironment(
                "start and goal region closures must be disjoint".into(),
            ));
        }
        if self.start_x_max != self.crowd_region.x_min {
            return Err(SimError::InvalidEnvironment(
                "start region boundary must touch the crowd region boundary".into(),
            ));
        }
        if self.goal_x_min >= self.crowd_region.x_max {
            return Err(SimError::InvalidEnvironment(
                "crowd and goal region interiors must intersect".into(),
            ));
        }
        if self.height() <= 0.0 || self.crowd_region.width() <= 0.0 {
            return Err(SimError::InvalidEnvironment(
                "crowd region must have positive extent".into(),
            ));
        }
        Ok(())
    }

    pub fn in_band(&self, p: Vec2) -> bool {
        p.x >= self.band_x_min && p.x <= self.band_x_max
    }

    /// Wrap a position through the periodic boundary. Only positions whose x
    /// lies in the periodic band are affected; everyone else is in a region
    /// with solid walls and passes through unchanged.
    pub fn wrap_position(&self, p: Vec2) -> Vec2 {
        if !self.in_band(p) {
            return p;
        }
        let h = self.height();
        let y = (p.y - self.crowd_region.y_min).rem_euclid(h) + self.crowd_region.y_min;
        Vec2::new(p.x, y)
    }

    /// Displacement `to - from` with the y component replaced by its
    /// minimum-image value when both endpoints lie in the periodic band.
    pub fn displacement(&self, from: Vec2, to: Vec2) -> Vec2 {
        let mut d = to - from;
        if self.in_band(from) && self.in_band(to) {
            let h = self.height();
            d.y -= h * (d.y / h).round();
        }
        d
    }

    /// Nearest point of the solid boundary within `r_s`, relative to `p`.
    /// The periodic parts of the boundary are not walls and never count.
    pub fn closest_boundary_point(&self, p: Vec2, r_s: f64) -> Option<Vec2> {
        let mut best: Option<Vec2> = None;
        let mut best_d = r_s;
        for wall in &self.walls {
            let q = wall.closest_point(p);
            let rel = q - p;
            let d = rel.norm();
            if d < best_d {
                best_d = d;
                best = Some(rel);
            }
        }
        best
    }

    /// Nearest wall point seen by a crowd agent: the solid boundary plus the
    /// crowd confinement walls.
    pub fn closest_crowd_wall_point(&self, p: Vec2) -> Option<Vec2> {
        let mut best: Option<Vec2> = None;
        let mut best_d = f64::INFINITY;
        for wall in &self.walls {
            let rel = wall.closest_point(p) - p;
            let d = rel.norm();
            if d < best_d {
                best_d = d;
                best = Some(rel);
            }
        }
        for wall in &self.crowd_walls {
            let rel = Vec2::new(wall.x - p.x, 0.0);
            let d = rel.norm();
            if d < best_d {
                best_d = d;
                best = Some(rel);
            }
        }
        best
    }

    /// Whole disk inside the region `x >= x_min` within the corridor. Inside
    /// the periodic band the corridor has no solid top/bottom, so only the
    /// half-plane test applies there; beyond the band the walls bound y.
    pub fn region_contains_disk(&self, x_min: f64, center: Vec2, radius: f64) -> bool {
        if center.x - radius < x_min {
            return false;
        }
        if center.x - radius >= self.band_x_min && center.x + radius <= self.band_x_max {
            return true;
        }
        center.y - radius >= self.crowd_region.y_min
            && center.y + radius <= self.crowd_region.y_max
    }
}

/// True iff the minimum distance from segment `ab` to `center` is below
/// `radius` (the segment pierces the open disk).
pub fn segment_intersects_disk(a: Vec2, b: Vec2, center: Vec2, radius: f64) -> bool {
    point_segment_distance(center, a, b) < radius
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq < 1e-24 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Rejection-sample `n` centers uniformly in `region` such that every disk of
/// diameter `min_sep` stays fully inside and no two centers come closer than
/// `min_sep`. Each agent gets at most `PLACEMENT_RETRY_CAP` fresh draws.
pub fn sample_positions(
    region: &Rect,
    n: usize,
    min_sep: f64,
    rng: &mut SimRng,
) -> Result<Vec<Vec2>, SimError> {
    let mut placed: Vec<Vec2> = Vec::with_capacity(n);
    for _ in 0..n {
        let p = sample_position_avoiding(region, min_sep / 2.0, min_sep, &placed, rng)?;
        placed.push(p);
    }
    Ok(placed)
}

pub const PLACEMENT_RETRY_CAP: usize = 10_000;

/// One rejection-sampled center with disk radius `radius` fully inside
/// `region` and at least `min_sep` from every entry of `existing`.
pub fn sample_position_avoiding(
    region: &Rect,
    radius: f64,
    min_sep: f64,
    existing: &[Vec2],
    rng: &mut SimRng,
) -> Result<Vec2, SimError> {
    let x_lo = region.x_min + radius;
    let x_hi = region.x_max - radius;
    let y_lo = region.y_min + radius;
    let y_hi = region.y_max - radius;
    if x_lo > x_hi || y_lo > y_hi {
        return Err(SimError::PlacementFailed {
            placed: existing.len(),
            attempts: 0,
        });
    }
    let min_sep_sq = min_sep * min_sep;
    for _ in 0..PLACEMENT_RETRY_CAP {
        let p = Vec2::new(rng.random_range(x_lo..=x_hi), rng.random_range(y_lo..=y_hi));
        if existing.iter().all(|&q| (p - q).norm_sq() >= min_sep_sq) {
            return Ok(p);
        }
    }
    Err(SimError::PlacementFailed {
        placed: existing.len(),
        attempts: PLACEMENT_RETRY_CAP,
    })
}
