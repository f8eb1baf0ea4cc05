//! Tolerance-parameterized 3D geometry kernel.
//!
//! Every predicate that the gathering algorithm branches on (same plane,
//! same position, on a circle) is decided against an explicit [`Tolerances`]
//! value. Circles are always horizontal: they live in a plane whose normal is
//! the Z axis, and the cones built over them open downward from an apex on
//! the +Z side with a 45 degree semi-vertical angle.

use std::cmp::Ordering;
use std::ops::{Add, Mul, Sub};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("segment endpoints coincide (length {length:e})")]
    DegenerateSegment { length: f64 },
    #[error("points are not coplanar: z spread {spread:e} exceeds eps_z")]
    NotCoplanar { spread: f64 },
    #[error("circle radius {radius:e} is too small to carry a cone")]
    DegenerateCircle { radius: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid tolerances: {0}")]
    InvalidTolerances(&'static str),
}

pub type Result<T> = std::result::Result<T, GeomError>;

/// A position in 3D Euclidean space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Point3 {
    fn from([x, y, z]: [f64; 3]) -> Self {
        Point3 { x, y, z }
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dist(&self, other: &Point3) -> f64 {
        (*self - *other).norm()
    }

    /// Distance between the projections onto the XY plane.
    pub fn horizontal_dist(&self, other: &Point3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(&self, other: &Point3) -> Point3 {
        Point3::new(
            (self.x + other.x) * 0.5,
            (self.y + other.y) * 0.5,
            (self.z + other.z) * 0.5,
        )
    }

    /// Total lexicographic order on (x, y, z).
    pub fn lex_cmp(&self, other: &Point3) -> Ordering {
        self.x
            .total_cmp(&other.x)
            .then(self.y.total_cmp(&other.y))
            .then(self.z.total_cmp(&other.z))
    }

    /// Bitwise equality of all three coordinates.
    pub fn bits_eq(&self, other: &Point3) -> bool {
        self.x.to_bits() == other.x.to_bits()
            && self.y.to_bits() == other.y.to_bits()
            && self.z.to_bits() == other.z.to_bits()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn dist_to_segment(p: &Point3, a: &Point3, b: &Point3) -> f64 {
    let ab = *b - *a;
    let len2 = ab.x * ab.x + ab.y * ab.y + ab.z * ab.z;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let ap = *p - *a;
    let t = ((ap.x * ab.x + ap.y * ab.y + ap.z * ab.z) / len2).clamp(0.0, 1.0);
    p.dist(&(*a + ab * t))
}

/// Comparison thresholds used by every geometric predicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Two z values closer than this belong to the same horizontal plane.
    pub eps_z: f64,
    /// Slack for "lies on this circle / segment / cone".
    pub eps_geom: f64,
    /// Two positions closer than this are one position.
    pub eps_gather: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_z: 1e-9,
            eps_geom: 1e-9,
            eps_gather: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn new(eps_z: f64, eps_geom: f64, eps_gather: f64) -> Result<Self> {
        let tol = Tolerances {
            eps_z,
            eps_geom,
            eps_gather,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.eps_z, self.eps_geom, self.eps_gather];
        if all.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(GeomError::InvalidTolerances("all tolerances must be finite and positive"));
        }
        if self.eps_geom > self.eps_z {
            return Err(GeomError::InvalidTolerances("eps_geom must not exceed eps_z"));
        }
        Ok(())
    }

    /// The same tolerances expressed in a unit of length `1 / factor` times
    /// as long (a frame with scale `s` sees lengths multiplied by `1 / s`).
    pub fn scaled(&self, factor: f64) -> Tolerances {
        Tolerances {
            eps_z: self.eps_z * factor,
            eps_geom: self.eps_geom * factor,
            eps_gather: self.eps_gather * factor,
        }
    }
}

/// A horizontal circle together with the input points found on it.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleZ {
    pub center: Point3,
    pub radius: f64,
    pub on_circle: Vec<Point3>,
}

/// Apex of the upright equilateral triangle erected on `[p, q]`.
///
/// The triangle lies in the vertical plane through the segment and its
/// apex sits straight above the midpoint.
pub fn triangle_peak(p: &Point3, q: &Point3, tol: &Tolerances) -> Result<Point3> {
    let dz = (p.z - q.z).abs();
    if dz > tol.eps_z {
        return Err(GeomError::NotCoplanar { spread: dz });
    }
    let side = p.dist(q);
    if side <= tol.eps_geom {
        return Err(GeomError::DegenerateSegment { length: side });
    }
    let mid = p.midpoint(q);
    Ok(Point3::new(mid.x, mid.y, mid.z + 0.5 * 3f64.sqrt() * side))
}

/// Apex of the 45 degree cone standing on `circle`.
pub fn cone_vertex(circle: &CircleZ, tol: &Tolerances) -> Result<Point3> {
    if circle.radius <= tol.eps_geom {
        return Err(GeomError::DegenerateCircle {
            radius: circle.radius,
        });
    }
    let c = circle.center;
    Ok(Point3::new(c.x, c.y, c.z + circle.radius))
}

/// The co-circularity circle of `points` if there is one, else their
/// minimum enclosing circle. Points lying on the returned circle (within
/// `eps_geom`) are reported in `on_circle`, in input order.
pub fn compute_circle(points: &[Point3], tol: &Tolerances) -> Result<CircleZ> {
    planar_circle(points, tol, |flat| {
        cocircle(flat, tol.eps_geom).unwrap_or_else(|| min_enclosing_disc(flat))
    })
}

/// The minimum enclosing circle of `points`, skipping the co-circularity
/// shortcut of [`compute_circle`].
pub fn min_enclosing_circle(points: &[Point3], tol: &Tolerances) -> Result<CircleZ> {
    planar_circle(points, tol, min_enclosing_disc)
}

fn planar_circle(points: &[Point3], tol: &Tolerances, fit: impl FnOnce(&[[f64; 2]]) -> Disc) -> Result<CircleZ> {
    let first = points.first().ok_or(GeomError::EmptyInput)?;
    let (zmin, zmax) = points
        .iter()
        .fold((first.z, first.z), |(lo, hi), p| (lo.min(p.z), hi.max(p.z)));
    if zmax - zmin > tol.eps_z {
        return Err(GeomError::NotCoplanar {
            spread: zmax - zmin,
        });
    }
    let z = 0.5 * (zmin + zmax);
    let flat: Vec<[f64; 2]> = points.iter().map(|p| [p.x, p.y]).collect();
    let disc = fit(&flat);
    let on_circle = points
        .iter()
        .zip(&flat)
        .filter(|(_, q)| (disc.dist_to_center(q) - disc.r).abs() <= tol.eps_geom)
        .map(|(p, _)| *p)
        .collect();
    Ok(CircleZ {
        center: Point3::new(disc.c[0], disc.c[1], z),
        radius: disc.r,
        on_circle,
    })
}

/// The candidate nearest to `from`. Candidates whose distance is within
/// `eps_geom` of the minimum are tied; the lexicographically smallest of
/// them wins.
pub fn closest_point(from: &Point3, candidates: &[Point3], tol: &Tolerances) -> Result<Point3> {
    let best = candidates
        .iter()
        .map(|c| from.dist(c))
        .min_by(f64::total_cmp)
        .ok_or(GeomError::EmptyInput)?;
    Ok(*candidates
        .iter()
        .filter(|c| from.dist(c) <= best + tol.eps_geom)
        .min_by(|a, b| a.lex_cmp(b))
        .expect("the minimizer itself passes the filter"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Disc {
    pub c: [f64; 2],
    pub r: f64,
}

impl Disc {
    fn dist_to_center(&self, p: &[f64; 2]) -> f64 {
        (p[0] - self.c[0]).hypot(p[1] - self.c[1])
    }

    fn contains(&self, p: &[f64; 2]) -> bool {
        // relative slack keeps Welzl from chasing rounding noise
        self.dist_to_center(p) <= self.r + 1e-12 * (1.0 + self.r)
    }

    fn from_two(a: &[f64; 2], b: &[f64; 2]) -> Disc {
        let c = [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5];
        let r = (a[0] - c[0]).hypot(a[1] - c[1]).max((b[0] - c[0]).hypot(b[1] - c[1]));
        Disc { c, r }
    }

    /// Circumscribed circle, or `None` for a (numerically) collinear triple.
    fn circumscribed(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2]) -> Option<Disc> {
        let (bx, by) = (b[0] - a[0], b[1] - a[1]);
        let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
        let d = 2.0 * (bx * cy - by * cx);
        if d == 0.0 {
            return None;
        }
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let ux = (cy * b2 - by * c2) / d;
        let uy = (bx * c2 - cx * b2) / d;
        if !(ux.is_finite() && uy.is_finite()) {
            return None;
        }
        let center = [a[0] + ux, a[1] + uy];
        let r = [a, b, c]
            .iter()
            .map(|p| (p[0] - center[0]).hypot(p[1] - center[1]))
            .fold(0.0, f64::max);
        Some(Disc { c: center, r })
    }

    fn from_three(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2]) -> Disc {
        Disc::circumscribed(a, b, c).unwrap_or_else(|| {
            [Disc::from_two(a, b), Disc::from_two(a, c), Disc::from_two(b, c)]
                .into_iter()
                .max_by(|x, y| x.r.total_cmp(&y.r))
                .unwrap()
        })
    }
}

fn dist_to_line(p: &[f64; 2], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    ((p[0] - a[0]) * dy - (p[1] - a[1]) * dx).abs() / dx.hypot(dy)
}

/// Circle through every point, fitted on the first non-collinear triple.
fn cocircle(pts: &[[f64; 2]], eps: f64) -> Option<Disc> {
    if pts.len() < 3 {
        return None;
    }
    let a = &pts[0];
    let b = pts.iter().find(|p| (p[0] - a[0]).hypot(p[1] - a[1]) > eps)?;
    let c = pts.iter().find(|p| dist_to_line(p, a, b) > eps)?;
    let disc = Disc::circumscribed(a, b, c)?;
    pts.iter()
        .all(|p| (disc.dist_to_center(p) - disc.r).abs() <= eps)
        .then_some(disc)
}

const MEC_SHUFFLE_SEED: u64 = 0x6d65_635f_7365_6564;

/// Welzl's minimum enclosing disc with a fixed-seed shuffle.
pub(crate) fn min_enclosing_disc(pts: &[[f64; 2]]) -> Disc {
    assert!(!pts.is_empty());
    let mut order: Vec<[f64; 2]> = pts.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(MEC_SHUFFLE_SEED ^ pts.len() as u64);
    order.shuffle(&mut rng);

    let mut disc = Disc { c: order[0], r: 0.0 };
    for i in 1..order.len() {
        if disc.contains(&order[i]) {
            continue;
        }
        let p = order[i];
        disc = Disc { c: p, r: 0.0 };
        for j in 0..i {
            if disc.contains(&order[j]) {
                continue;
            }
            let q = order[j];
            disc = Disc::from_two(&p, &q);
            for r in &order[..j] {
                if !disc.contains(r) {
                    disc = Disc::from_three(&p, &q, r);
                }
            }
        }
    }
    disc
}
