//! Deterministic Look-Compute-Move simulator.
//!
//! One run is a single event stream. Each event is one phase of one robot
//! (or a crash). Look stores a snapshot in the robot's frame, Compute turns
//! that snapshot into a destination, and Move travels toward it, possibly
//! stopped early by the adversary after at least `delta`. Nothing but the
//! stored snapshot is visible to Compute, and nothing survives a cycle.

mod monitor;
mod scheduler;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ConfigClass;
use crate::geom3::{GeomError, Point3, Tolerances};
use crate::robot::{compute_destination, DestinationError, LocalFrame, Rule, Snapshot};

pub use monitor::{monitors, replay_monitors, Flags, MonitorId, MonitorReport, MonitorSuite, Observation};
pub use scheduler::{fairness_window, Scheduler, SchedulerPolicy, Slot};

pub const TRACE_SCHEMA: &str = "gather3d-trace/1";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no robot is alive")]
    AllCrashed,
    #[error("unknown robot {0}")]
    UnknownRobot(usize),
    #[error("robot {0} has already crashed")]
    AlreadyCrashed(usize),
    #[error("at least one robot is required")]
    NoRobots,
    #[error("initial positions must be distinct (robots {0} and {1} coincide)")]
    CoincidentStart(usize, usize),
    #[error("f < n required ({faults} faults for {robots} robots)")]
    TooManyFaults { faults: usize, robots: usize },
    #[error("robot {0} is scheduled to crash twice")]
    DuplicateFault(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("robot {robot} failed to compute at event {event}: {source}")]
    Compute {
        robot: usize,
        event: u64,
        #[source]
        source: DestinationError,
    },
}

impl From<GeomError> for SimError {
    fn from(e: GeomError) -> Self {
        SimError::InvalidParams(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Minimum travel per move unless the destination is closer.
    pub delta: f64,
    pub tol: Tolerances,
    pub seed: u64,
    pub max_events: u64,
    pub scheduler: SchedulerPolicy,
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        self.tol.validate()?;
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(SimError::InvalidParams("delta must be positive".into()));
        }
        if self.max_events == 0 {
            return Err(SimError::InvalidParams("max_events must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedCrash {
    pub robot: usize,
    pub at_event: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultPlan {
    pub crashes: Vec<PlannedCrash>,
}

impl FaultPlan {
    pub fn none() -> Self {
        FaultPlan::default()
    }

    pub fn f(&self) -> usize {
        self.crashes.len()
    }

    pub fn validate(&self, n: usize) -> Result<(), SimError> {
        if self.f() >= n {
            return Err(SimError::TooManyFaults {
                faults: self.f(),
                robots: n,
            });
        }
        let mut seen = vec![false; n];
        for c in &self.crashes {
            if c.robot >= n {
                return Err(SimError::UnknownRobot(c.robot));
            }
            if std::mem::replace(&mut seen[c.robot], true) {
                return Err(SimError::DuplicateFault(c.robot));
            }
        }
        Ok(())
    }
}

/// Frame orientation and unit of one robot; the origin follows the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    /// Radians about +Z.
    pub rotation: f64,
    pub reflect: bool,
    pub scale: f64,
}

impl FrameSpec {
    pub const IDENTITY: FrameSpec = FrameSpec {
        rotation: 0.0,
        reflect: false,
        scale: 1.0,
    };

    pub fn at(&self, origin: Point3) -> Result<LocalFrame, DestinationError> {
        LocalFrame::new(origin, self.rotation, self.reflect, self.scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub position: Point3,
    pub frame: FrameSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Phase {
    Idle,
    Looked(Snapshot),
    Computed { target: Point3, rule: Rule },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub id: usize,
    pub pos: Point3,
    pub frame: LocalFrame,
    pub phase: Phase,
    pub alive: bool,
}

impl RobotState {
    fn next_kind(&self) -> EventKind {
        match self.phase {
            Phase::Idle => EventKind::Look,
            Phase::Looked(_) => EventKind::Compute,
            Phase::Computed { .. } => EventKind::Move,
        }
    }

    fn slot(&self) -> Slot {
        Slot {
            alive: self.alive,
            remaining: match self.phase {
                Phase::Idle => 3,
                Phase::Looked(_) => 2,
                Phase::Computed { .. } => 1,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Look,
    Compute,
    Move,
    Crash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub event_index: u64,
    pub robot_id: usize,
    pub kind: EventKind,
    pub pos_before: Point3,
    pub pos_after: Point3,
    /// Global target, on Compute and Move events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<Point3>,
    /// Radius of the top-plane circle after the event.
    pub top_plane_radius: f64,
    /// Configuration class after the event.
    pub class: ConfigClass,
    pub monitor_flags: Flags,
    /// Local snapshot, on Look events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<Snapshot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<Rule>,
    /// Target in the robot's own frame, on Compute events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_destination: Option<Point3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: String,
    pub robots: Vec<RobotSpec>,
    pub params: SimParams,
    pub faults: FaultPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub gathered: bool,
    pub gather_point: Option<Point3>,
    pub events_used: u64,
    pub moves: u64,
    pub monitor_failures: BTreeMap<MonitorId, u64>,
    pub max_monitor_violation: f64,
    /// Largest distance between two alive robots at the end.
    pub final_span: f64,
    /// The gathering point coincides with a crashed robot.
    pub gathered_at_crashed: bool,
    /// Completed moves that ended on another robot before gathering.
    pub colocations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
    pub summary: RunSummary,
}

/// Travels from `pos` toward `dest`. The adversary proposes a travel length;
/// anything below `delta` is raised to `delta`, and a length reaching the
/// destination lands on it exactly.
pub fn move_toward(pos: Point3, dest: Point3, delta: f64, proposed: f64) -> Point3 {
    let d = pos.dist(&dest);
    let len = proposed.max(delta);
    if len >= d {
        dest
    } else {
        pos + (dest - pos) * (len / d)
    }
}

/// Where a robot in `Computed` phase ends its move. The adversary lets the
/// move finish with probability 1/2, otherwise stops it after a uniform
/// length in `[delta, d)`.
pub fn apply_move<R: Rng>(r: &RobotState, params: &SimParams, rng: &mut R) -> Point3 {
    let Phase::Computed { target, .. } = r.phase else {
        return r.pos;
    };
    let d = r.pos.dist(&target);
    if d <= params.delta || rng.random_bool(0.5) {
        return target;
    }
    let proposed = params.delta + rng.random::<f64>() * (d - params.delta);
    move_toward(r.pos, target, params.delta, proposed)
}

/// A running simulation.
#[derive(Debug)]
pub struct Simulation {
    robots: Vec<RobotState>,
    specs: Vec<RobotSpec>,
    params: SimParams,
    faults: FaultPlan,
    pending_crashes: Vec<PlannedCrash>,
    scheduler: Scheduler,
    rng: ChaCha8Rng,
    next_event: u64,
    monitor: MonitorSuite,
    events: Vec<TraceEvent>,
    moves: u64,
    colocations: u64,
}

impl Simulation {
    pub fn new(initial: &[RobotSpec], params: SimParams, faults: FaultPlan) -> Result<Self, SimError> {
        params.validate()?;
        let n = initial.len();
        if n == 0 {
            return Err(SimError::NoRobots);
        }
        faults.validate(n)?;
        for (i, a) in initial.iter().enumerate() {
            if !a.position.is_finite() {
                return Err(SimError::InvalidParams(format!("robot {i} has a non-finite position")));
            }
            if let Some(j) = initial[..i]
                .iter()
                .position(|b| b.position.dist(&a.position) < params.tol.eps_gather)
            {
                return Err(SimError::CoincidentStart(j, i));
            }
        }
        let robots = initial
            .iter()
            .enumerate()
            .map(|(id, spec)| {
                Ok(RobotState {
                    id,
                    pos: spec.position,
                    frame: spec.frame.at(spec.position).map_err(|e| SimError::InvalidParams(e.to_string()))?,
                    phase: Phase::Idle,
                    alive: true,
                })
            })
            .collect::<Result<Vec<_>, SimError>>()?;

        let mut pending_crashes = faults.crashes.clone();
        pending_crashes.sort_by_key(|c| (c.at_event, c.robot));
        let crash_slots: Vec<u64> = pending_crashes.iter().map(|c| c.at_event).collect();
        let positions: Vec<Point3> = initial.iter().map(|s| s.position).collect();
        Ok(Simulation {
            robots,
            specs: initial.to_vec(),
            scheduler: Scheduler::new(params.scheduler, n, &crash_slots),
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            monitor: MonitorSuite::new(&positions, params.delta, params.tol),
            params,
            faults,
            pending_crashes,
            next_event: 0,
            events: Vec::new(),
            moves: 0,
            colocations: 0,
        })
    }

    pub fn robots(&self) -> &[RobotState] {
        &self.robots
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn positions(&self) -> Vec<Point3> {
        self.robots.iter().map(|r| r.pos).collect()
    }

    /// Freezes a robot for good. It stays visible to everyone else.
    pub fn inject_crash(&mut self, robot_id: usize) -> Result<(), SimError> {
        let r = self.robots.get_mut(robot_id).ok_or(SimError::UnknownRobot(robot_id))?;
        if !r.alive {
            return Err(SimError::AlreadyCrashed(robot_id));
        }
        r.alive = false;
        Ok(())
    }

    /// Picks the next scheduled action.
    pub fn schedule_next(&mut self) -> Result<(usize, EventKind), SimError> {
        let slots: Vec<Slot> = self.robots.iter().map(RobotState::slot).collect();
        let id = self.scheduler.next(&slots, self.next_event, &mut self.rng)?;
        Ok((id, self.robots[id].next_kind()))
    }

    /// Executes one event (a due crash, or one scheduled phase).
    pub fn step(&mut self) -> Result<&TraceEvent, SimError> {
        let index = self.next_event;
        let due = self
            .pending_crashes
            .first()
            .filter(|c| c.at_event <= index)
            .copied();
        let mut ev = if let Some(crash) = due {
            self.pending_crashes.remove(0);
            if self.robots[crash.robot].alive && self.robots.iter().filter(|r| r.alive).count() > 1 {
                self.inject_crash(crash.robot)?;
                let pos = self.robots[crash.robot].pos;
                blank_event(index, crash.robot, EventKind::Crash, pos, pos)
            } else {
                // nothing left to crash; spend the slot on a regular action
                let (id, kind) = self.schedule_next()?;
                self.act(index, id, kind)?
            }
        } else {
            let (id, kind) = self.schedule_next()?;
            self.act(index, id, kind)?
        };

        let obs = self.monitor.observe(&ev);
        ev.class = obs.class;
        ev.top_plane_radius = obs.top_plane_radius;
        ev.monitor_flags = obs.flags;
        self.events.push(ev);
        self.next_event += 1;
        Ok(self.events.last().unwrap())
    }

    fn act(&mut self, index: u64, id: usize, kind: EventKind) -> Result<TraceEvent, SimError> {
        let tol = self.params.tol;
        let pos = self.robots[id].pos;
        let mut ev = blank_event(index, id, kind, pos, pos);
        match kind {
            EventKind::Look => {
                let frame = self.robots[id].frame.at(pos);
                let local_tol = frame.local_tolerances(&tol);
                let positions = self.positions();
                let snap = Snapshot::capture(&frame, &positions, &local_tol);
                let r = &mut self.robots[id];
                r.frame = frame;
                r.phase = Phase::Looked(snap.clone());
                ev.snapshot = Some(snap);
            }
            EventKind::Compute => {
                let r = &mut self.robots[id];
                let Phase::Looked(snap) = &r.phase else {
                    unreachable!("compute scheduled outside the Looked phase")
                };
                let local_tol = r.frame.local_tolerances(&tol);
                let decision = compute_destination(snap, &local_tol).map_err(|source| SimError::Compute {
                    robot: id,
                    event: index,
                    source,
                })?;
                let target = r.frame.to_global(&decision.target);
                r.phase = Phase::Computed {
                    target,
                    rule: decision.rule,
                };
                ev.destination = Some(target);
                ev.rule = Some(decision.rule);
                ev.local_destination = Some(decision.target);
            }
            EventKind::Move => {
                let new_pos = apply_move(&self.robots[id], &self.params, &mut self.rng);
                let r = &mut self.robots[id];
                if let Phase::Computed { target, rule } = r.phase {
                    ev.destination = Some(target);
                    ev.rule = Some(rule);
                }
                r.pos = new_pos;
                r.phase = Phase::Idle;
                ev.pos_after = new_pos;
                self.moves += 1;
                if !new_pos.bits_eq(&pos)
                    && self
                        .robots
                        .iter()
                        .any(|o| o.id != id && o.pos.dist(&new_pos) < tol.eps_gather)
                {
                    self.colocations += 1;
                }
            }
            EventKind::Crash => unreachable!("crashes are not scheduled"),
        }
        Ok(ev)
    }

    /// All alive robots share one position and none of them will ever
    /// move again: every pending or fresh destination is its own position.
    pub fn is_gathered(&self) -> Result<bool, SimError> {
        let tol = self.params.tol;
        let alive: Vec<&RobotState> = self.robots.iter().filter(|r| r.alive).collect();
        for (i, a) in alive.iter().enumerate() {
            if alive[i + 1..].iter().any(|b| a.pos.dist(&b.pos) >= tol.eps_gather) {
                return Ok(false);
            }
        }
        let positions = self.positions();
        for r in &alive {
            let target = match &r.phase {
                Phase::Computed { target, .. } => *target,
                Phase::Looked(snap) => self.fresh_target(r, snap)?,
                Phase::Idle => {
                    let frame = r.frame.at(r.pos);
                    let snap = Snapshot::capture(&frame, &positions, &frame.local_tolerances(&tol));
                    self.fresh_target(r, &snap)?
                }
            };
            if target.dist(&r.pos) >= tol.eps_gather {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn fresh_target(&self, r: &RobotState, snap: &Snapshot) -> Result<Point3, SimError> {
        let frame = r.frame.at(r.pos);
        let d = compute_destination(snap, &frame.local_tolerances(&self.params.tol)).map_err(|source| {
            SimError::Compute {
                robot: r.id,
                event: self.next_event,
                source,
            }
        })?;
        Ok(frame.to_global(&d.target))
    }

    /// Runs until gathered or out of budget, and hands back the trace.
    pub fn run_to_end(mut self) -> Result<Trace, SimError> {
        let mut gathered = self.is_gathered()?;
        while !gathered && self.next_event < self.params.max_events {
            self.step()?;
            gathered = self.is_gathered()?;
        }
        Ok(self.finish(gathered))
    }

    fn finish(self, gathered: bool) -> Trace {
        let alive: Vec<Point3> = self.robots.iter().filter(|r| r.alive).map(|r| r.pos).collect();
        let final_span = alive
            .iter()
            .enumerate()
            .flat_map(|(i, a)| alive[i + 1..].iter().map(move |b| a.dist(b)))
            .fold(0.0, f64::max);
        let gather_point = gathered.then(|| alive[0]);
        let gathered_at_crashed = gather_point.is_some_and(|g| {
            self.robots
                .iter()
                .any(|r| !r.alive && r.pos.dist(&g) < self.params.tol.eps_gather)
        });
        let report = self.monitor.report();
        let summary = RunSummary {
            gathered,
            gather_point,
            events_used: self.next_event,
            moves: self.moves,
            monitor_failures: MonitorId::ALL
                .iter()
                .map(|&id| (id, report.failures.get(&id).copied().unwrap_or(0)))
                .collect(),
            max_monitor_violation: report.max_violation,
            final_span,
            gathered_at_crashed,
            colocations: self.colocations,
        };
        Trace {
            header: TraceHeader {
                schema: TRACE_SCHEMA.to_string(),
                robots: self.specs,
                params: self.params,
                faults: self.faults,
            },
            events: self.events,
            summary,
        }
    }
}

fn blank_event(index: u64, robot_id: usize, kind: EventKind, before: Point3, after: Point3) -> TraceEvent {
    TraceEvent {
        event_index: index,
        robot_id,
        kind,
        pos_before: before,
        pos_after: after,
        destination: None,
        top_plane_radius: 0.0,
        class: ConfigClass::C1,
        monitor_flags: Flags::new(),
        snapshot: None,
        rule: None,
        local_destination: None,
    }
}

/// Simulates `initial` under `params` and `faults` until the alive robots
/// have gathered or `max_events` events have been spent.
pub fn run(initial: &[RobotSpec], params: SimParams, faults: FaultPlan) -> Result<Trace, SimError> {
    Simulation::new(initial, params, faults)?.run_to_end()
}
