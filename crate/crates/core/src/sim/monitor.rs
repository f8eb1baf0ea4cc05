//! Runtime checks of the correctness argument, evaluated over a trace.
//!
//! The suite rebuilds the ground-truth configuration from the initial
//! positions and the Move events, so it can run inline (fed by the
//! simulator event by event) or offline over a parsed trace, with the same
//! verdicts either way.
//!
//! | id | property |
//! |----|----------|
//! | M1 | once a top-plane robot climbs toward the peak of the C2 triangle, every top-plane position stays on one of the triangle's two slanted sides |
//! | M2 | once a top-plane robot climbs a C>2 cone, every top-plane position stays on that cone's surface; a new co-circular top plane on the cone must give the same apex |
//! | M3 | a slant move of length ≥ δ (slant > δ) cuts the distance to the cone axis by ≥ δ/√2 |
//! | M4 | a triangle-side move of length ≥ δ (side s > δ) ends within √(a² − (s² − (s−δ)²)/4) of the axis |
//! | M5 | the top-plane circle radius does not grow while the top level stays put |

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{EventKind, Trace, TraceEvent, TraceHeader};
use crate::config::{classify, decompose, ConfigClass, Configuration};
use crate::geom3::{compute_circle, dist_to_segment, Point3, Tolerances};
use crate::robot::Rule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MonitorId {
    M1,
    M2,
    M3,
    M4,
    M5,
}

impl MonitorId {
    pub const ALL: [MonitorId; 5] = [MonitorId::M1, MonitorId::M2, MonitorId::M3, MonitorId::M4, MonitorId::M5];
}

impl fmt::Display for MonitorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

pub type Flags = BTreeMap<MonitorId, bool>;

/// Ground-truth state after an event, as seen by the monitors.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub class: ConfigClass,
    pub top_plane_radius: f64,
    pub flags: Flags,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonitorReport {
    pub passes: BTreeMap<MonitorId, u64>,
    pub failures: BTreeMap<MonitorId, u64>,
    /// Largest amount by which any check missed its bound (0 when clean).
    pub max_violation: f64,
    /// Flags per event, aligned with the trace's events.
    pub per_event: Vec<Flags>,
}

impl MonitorReport {
    pub fn is_clean(&self) -> bool {
        self.failures.values().all(|&n| n == 0)
    }

    pub fn total_failures(&self) -> u64 {
        self.failures.values().sum()
    }
}

#[derive(Debug, Clone)]
struct TopView {
    class: ConfigClass,
    z_level: f64,
    members: Vec<Point3>,
    center: Point3,
    radius: f64,
}

impl TopView {
    fn of(positions: &[Point3], tol: &Tolerances) -> TopView {
        let config = Configuration::new(positions.iter().copied(), *tol).expect("non-empty");
        let stack = decompose(&config);
        let top = stack.top();
        let circle = compute_circle(&top.members, tol).expect("plane members are coplanar");
        TopView {
            class: classify(&stack),
            z_level: top.z_level,
            members: top.members.clone(),
            center: circle.center,
            radius: circle.radius,
        }
    }
}

#[derive(Debug, Clone)]
struct TriangleRegime {
    base: [Point3; 2],
    peak: Point3,
    climbing: bool,
}

impl TriangleRegime {
    fn side_distance(&self, p: &Point3) -> f64 {
        dist_to_segment(p, &self.base[0], &self.peak).min(dist_to_segment(p, &self.base[1], &self.peak))
    }
}

#[derive(Debug, Clone)]
struct ConeRegime {
    center: Point3,
    radius: f64,
    vertex: Point3,
    climbing: bool,
}

impl ConeRegime {
    fn from_view(v: &TopView) -> ConeRegime {
        ConeRegime {
            center: v.center,
            radius: v.radius,
            vertex: Point3::new(v.center.x, v.center.y, v.center.z + v.radius),
            climbing: false,
        }
    }

    /// How far `p` is from the lateral surface between base and apex.
    fn surface_distance(&self, p: &Point3) -> f64 {
        let rho = p.horizontal_dist(&self.center);
        let h = p.z - self.center.z;
        let off = (rho + h - self.radius).abs();
        off.max(-h).max(h - self.radius)
    }
}

/// Incremental monitor state machine.
#[derive(Debug, Clone)]
pub struct MonitorSuite {
    tol: Tolerances,
    delta: f64,
    positions: Vec<Point3>,
    pending: Vec<Option<(Rule, Point3)>>,
    view: TopView,
    triangle: Option<TriangleRegime>,
    cone: Option<ConeRegime>,
    report: MonitorReport,
}

impl MonitorSuite {
    pub fn new(initial: &[Point3], delta: f64, tol: Tolerances) -> MonitorSuite {
        let view = TopView::of(initial, &tol);
        let mut suite = MonitorSuite {
            tol,
            delta,
            positions: initial.to_vec(),
            pending: vec![None; initial.len()],
            view: view.clone(),
            triangle: None,
            cone: None,
            report: MonitorReport::default(),
        };
        suite.update_regimes(&view);
        suite
    }

    pub fn class(&self) -> ConfigClass {
        self.view.class
    }

    pub fn top_plane_radius(&self) -> f64 {
        self.view.radius
    }

    pub fn report(&self) -> &MonitorReport {
        &self.report
    }

    pub fn into_report(self) -> MonitorReport {
        self.report
    }

    /// Feeds one event. Only `robot_id`, `kind`, `pos_after`, `destination`
    /// and `rule` are read; recorded verdicts are ignored.
    pub fn observe(&mut self, ev: &TraceEvent) -> Observation {
        let mut flags = Flags::new();
        match ev.kind {
            EventKind::Compute => {
                if let (Some(rule), Some(dest)) = (ev.rule, ev.destination) {
                    self.pending[ev.robot_id] = Some((rule, dest));
                }
            }
            EventKind::Move => self.observe_move(ev, &mut flags),
            EventKind::Look | EventKind::Crash => {}
        }
        for (id, ok) in &flags {
            let counter = if *ok { &mut self.report.passes } else { &mut self.report.failures };
            *counter.entry(*id).or_default() += 1;
        }
        self.report.per_event.push(flags.clone());
        Observation {
            class: self.view.class,
            top_plane_radius: self.view.radius,
            flags,
        }
    }

    fn record(&mut self, flags: &mut Flags, id: MonitorId, excess: f64) {
        let ok = excess <= 0.0;
        if !ok {
            self.report.max_violation = self.report.max_violation.max(excess);
        }
        let entry = flags.entry(id).or_insert(true);
        *entry &= ok;
    }

    fn observe_move(&mut self, ev: &TraceEvent, flags: &mut Flags) {
        let tol = self.tol;
        let delta = self.delta;
        let before = self.positions[ev.robot_id];
        let after = ev.pos_after;
        self.positions[ev.robot_id] = after;
        let pending = self.pending[ev.robot_id].take();
        let old = std::mem::replace(&mut self.view, TopView::of(&self.positions, &tol));

        let travelled = before.dist(&after);
        match pending {
            Some((Rule::ConeVertex, apex)) => {
                let slant = before.dist(&apex);
                if travelled >= delta && slant > delta {
                    let gain = before.horizontal_dist(&apex) - after.horizontal_dist(&apex);
                    self.record(flags, MonitorId::M3, (delta / SQRT_2 - tol.eps_geom) - gain);
                }
                if let Some(cone) = self.cone.as_mut() {
                    if apex.dist(&cone.vertex) < tol.eps_gather {
                        cone.climbing = true;
                    }
                }
            }
            Some((Rule::TrianglePeak, peak)) => {
                let side = before.dist(&peak);
                if travelled >= delta && side > delta {
                    let a = 0.5 * side;
                    let bound = (a * a - (side * side - (side - delta).powi(2)) / 4.0).max(0.0).sqrt();
                    self.record(flags, MonitorId::M4, after.horizontal_dist(&peak) - (bound + tol.eps_geom));
                }
                if let Some(tri) = self.triangle.as_mut() {
                    if peak.dist(&tri.peak) < tol.eps_gather {
                        tri.climbing = true;
                    }
                }
            }
            _ => {}
        }

        if (self.view.z_level - old.z_level).abs() <= tol.eps_z {
            self.record(flags, MonitorId::M5, self.view.radius - (old.radius + tol.eps_geom));
        }

        let view = self.view.clone();
        if let Some(tri) = self.triangle.as_ref().filter(|t| t.climbing) {
            let worst = view.members.iter().map(|p| tri.side_distance(p)).fold(0.0, f64::max);
            self.record(flags, MonitorId::M1, worst - tol.eps_geom);
        }
        if let Some(cone) = self.cone.as_ref().filter(|c| c.climbing) {
            let worst = view.members.iter().map(|p| cone.surface_distance(p)).fold(0.0, f64::max);
            let mut excess = worst - tol.eps_geom;
            if view.class == ConfigClass::Cgt2 && worst <= tol.eps_geom {
                // a slice of the cone must lead back to the same apex
                let apex = Point3::new(view.center.x, view.center.y, view.center.z + view.radius);
                excess = excess.max(apex.dist(&cone.vertex) - tol.eps_geom);
            }
            self.record(flags, MonitorId::M2, excess);
        }
        self.update_regimes(&view);
    }

    fn update_regimes(&mut self, view: &TopView) {
        let tol = self.tol;
        match view.class {
            ConfigClass::C2 => {
                self.cone = None;
                let keep = self
                    .triangle
                    .as_ref()
                    .is_some_and(|t| view.members.iter().all(|p| t.side_distance(p) <= tol.eps_geom));
                if !keep {
                    let (a, b) = (view.members[0], view.members[1]);
                    let mid = a.midpoint(&b);
                    self.triangle = Some(TriangleRegime {
                        base: [a, b],
                        peak: Point3::new(mid.x, mid.y, mid.z + 0.5 * 3f64.sqrt() * a.dist(&b)),
                        climbing: false,
                    });
                }
            }
            ConfigClass::Cgt2 => {
                self.triangle = None;
                let fresh = ConeRegime::from_view(view);
                let keep = self.cone.as_ref().is_some_and(|c| {
                    if c.climbing {
                        view.members.iter().all(|p| c.surface_distance(p) <= tol.eps_geom)
                            && fresh.vertex.dist(&c.vertex) <= tol.eps_geom
                    } else {
                        fresh.center.dist(&c.center) <= tol.eps_geom && (fresh.radius - c.radius).abs() <= tol.eps_geom
                    }
                });
                if !keep {
                    self.cone = Some(fresh);
                }
            }
            ConfigClass::C1 => {
                if !self.triangle.as_ref().is_some_and(|t| t.climbing) {
                    self.triangle = None;
                }
                if !self.cone.as_ref().is_some_and(|c| c.climbing) {
                    self.cone = None;
                }
            }
        }
    }
}

/// Replays the full monitor suite over a finished trace.
pub fn monitors(trace: &Trace) -> MonitorReport {
    replay_monitors(&trace.header, &trace.events)
}

/// Replays the monitor suite over a (possibly partial) event stream.
pub fn replay_monitors(header: &TraceHeader, events: &[TraceEvent]) -> MonitorReport {
    let initial: Vec<Point3> = header.robots.iter().map(|r| r.position).collect();
    let mut suite = MonitorSuite::new(&initial, header.params.delta, header.params.tol);
    for ev in events {
        suite.observe(ev);
    }
    suite.into_report()
}
