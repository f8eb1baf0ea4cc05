//! Destination computation for a single robot.
//!
//! A robot only ever sees the configuration through its own [`LocalFrame`]:
//! its position is the origin, its X/Y axes are rotated (and possibly
//! mirrored) arbitrarily and its unit of length is private. Only the +Z
//! direction is shared with everyone else.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{check_level, decompose, ConfigError, Configuration};
use crate::geom3::{
    closest_point, compute_circle, cone_vertex, triangle_peak, GeomError, Point3, Tolerances,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DestinationError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid frame: {0}")]
    InvalidFrame(&'static str),
}

/// Private coordinate system of a robot.
///
/// `to_local(p) = M · (p − origin) / scale` where `M` rotates by `-rotation`
/// about Z and then, when `reflect` is set, mirrors the Y axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: Point3,
    /// Radians, about +Z.
    pub rotation: f64,
    pub reflect: bool,
    pub scale: f64,
}

impl LocalFrame {
    pub fn new(origin: Point3, rotation: f64, reflect: bool, scale: f64) -> Result<Self, DestinationError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(DestinationError::InvalidFrame("scale must be finite and positive"));
        }
        if !rotation.is_finite() || !origin.is_finite() {
            return Err(DestinationError::InvalidFrame("non-finite frame parameter"));
        }
        Ok(LocalFrame {
            origin,
            rotation,
            reflect,
            scale,
        })
    }

    pub fn identity(origin: Point3) -> Self {
        LocalFrame {
            origin,
            rotation: 0.0,
            reflect: false,
            scale: 1.0,
        }
    }

    /// Same orientation and unit, re-anchored at `origin`.
    pub fn at(&self, origin: Point3) -> Self {
        LocalFrame { origin, ..*self }
    }

    pub fn to_local(&self, p: &Point3) -> Point3 {
        let (s, c) = self.rotation.sin_cos();
        let v = (*p - self.origin) * (1.0 / self.scale);
        let x = c * v.x + s * v.y;
        let y = -s * v.x + c * v.y;
        Point3::new(x, if self.reflect { -y } else { y }, v.z)
    }

    pub fn to_global(&self, q: &Point3) -> Point3 {
        let (s, c) = self.rotation.sin_cos();
        let qy = if self.reflect { -q.y } else { q.y };
        let v = Point3::new(c * q.x - s * qy, s * q.x + c * qy, q.z);
        self.origin + v * self.scale
    }

    /// Global tolerances expressed in this frame's unit of length.
    pub fn local_tolerances(&self, tol: &Tolerances) -> Tolerances {
        tol.scaled(1.0 / self.scale)
    }
}

/// What a robot saw during its Look, in its own frame. The robot itself
/// is always the first entry, at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub seen: Vec<Point3>,
}

impl Snapshot {
    /// Observes `positions` (global) from `frame`. `tol` is in local units.
    pub fn capture<'a, I>(frame: &LocalFrame, positions: I, tol: &Tolerances) -> Snapshot
    where
        I: IntoIterator<Item = &'a Point3>,
    {
        let mut seen = vec![Point3::ORIGIN];
        for p in positions {
            let q = frame.to_local(p);
            if !seen.iter().any(|s| s.dist(&q) < tol.eps_gather) {
                seen.push(q);
            }
        }
        Snapshot { seen }
    }

    pub fn self_pos(&self) -> Point3 {
        Point3::ORIGIN
    }
}

/// Which branch of the destination rule produced a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    /// Sole topmost position: stay put.
    Stay,
    /// One of two topmost positions: climb to the triangle peak.
    TrianglePeak,
    /// Topmost and on the circle: climb to the cone apex.
    ConeVertex,
    /// Topmost but strictly inside the circle: slide to the nearest circle position.
    ClosestOnCircle,
    /// Below the top plane: head for the nearest position on the top circle.
    ApproachTop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub target: Point3,
    pub rule: Rule,
}

/// The destination rule, evaluated on a local snapshot.
pub fn compute_destination(snap: &Snapshot, tol: &Tolerances) -> Result<Decision, DestinationError> {
    let me = snap.self_pos();
    let config = Configuration::new(snap.seen.iter().copied(), *tol)?;
    let stack = decompose(&config);
    let level = check_level(&stack, &me)?;
    let top = &stack.top().members;

    let decision = if level == 1 {
        match top.len() {
            1 => Decision {
                target: me,
                rule: Rule::Stay,
            },
            2 => Decision {
                target: triangle_peak(&top[0], &top[1], tol)?,
                rule: Rule::TrianglePeak,
            },
            _ => {
                let circle = compute_circle(top, tol)?;
                if circle.on_circle.iter().any(|p| p.dist(&me) < tol.eps_gather) {
                    Decision {
                        target: cone_vertex(&circle, tol)?,
                        rule: Rule::ConeVertex,
                    }
                } else {
                    Decision {
                        target: closest_point(&me, &circle.on_circle, tol)?,
                        rule: Rule::ClosestOnCircle,
                    }
                }
            }
        }
    } else {
        let circle = compute_circle(top, tol)?;
        Decision {
            target: closest_point(&me, &circle.on_circle, tol)?,
            rule: Rule::ApproachTop,
        }
    };
    Ok(decision)
}

/// One compute phase seen from outside: observe `global_config` through
/// `frame` (anchored at the robot), decide, and map the target back to
/// global coordinates. `tol` is in global units.
pub fn gathering3d_step(
    frame: &LocalFrame,
    global_config: &[Point3],
    tol: &Tolerances,
) -> Result<Decision, DestinationError> {
    let local_tol = frame.local_tolerances(tol);
    let snap = Snapshot::capture(frame, global_config, &local_tol);
    let local = compute_destination(&snap, &local_tol)?;
    Ok(Decision {
        target: frame.to_global(&local.target),
        rule: local.rule,
    })
}
