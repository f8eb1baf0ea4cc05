//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use gather3d::cli::run_config::Setup;
use gather3d::cli::trace_io::trace_to_string;
use gather3d::cli::{check_trace, cmd_check, simulate, Exit};
use gather3d::geom3::{compute_circle, cone_vertex, min_enclosing_circle, Point3, Tolerances};
use gather3d::robot::{gathering3d_step, LocalFrame, Rule};
use gather3d::sim::{
    EventKind, FaultPlan, Flags, FrameSpec, MonitorId, RobotSpec, RunSummary, SchedulerPolicy, SimParams, Trace,
    TraceEvent, TraceHeader, TRACE_SCHEMA,
};
use gather3d::config::decompose;
use gather3d::{ConfigClass, Configuration};
use rand::Rng;
use rayon::prelude::*;

use common::{brute_mec, fault_counts, rng, sweep_instance, POLICIES};

const CASES_PER_CELL: u64 = 50;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

struct SweepRun {
    n: usize,
    policy: SchedulerPolicy,
    f: usize,
    case: u64,
    setup: Setup,
    trace: Trace,
}

fn sweep() -> (Vec<SweepRun>, Duration) {
    let mut cells = Vec::new();
    for n in 1..=12 {
        for policy in POLICIES {
            for f in fault_counts(n) {
                for case in 0..CASES_PER_CELL {
                    cells.push((n, policy, f, case));
                }
            }
        }
    }
    let start = Instant::now();
    let runs = cells
        .into_par_iter()
        .map(|(n, policy, f, case)| {
            let setup = sweep_instance(n, policy, f, case);
            let trace = simulate(&setup).expect("simulation runs");
            SweepRun {
                n,
                policy,
                f,
                case,
                setup,
                trace,
            }
        })
        .collect();
    (runs, start.elapsed())
}

fn label(r: &SweepRun) -> String {
    format!("n={} {:?} f={} case={}", r.n, r.policy, r.f, r.case)
}

fn criterion_1(runs: &[SweepRun], elapsed: Duration) -> Outcome {
    let failed: Vec<&SweepRun> = runs.iter().filter(|r| !r.trace.summary.gathered).collect();
    let worst = runs.iter().map(|r| r.trace.summary.events_used).max().unwrap_or(0);
    let mut detail = format!(
        "{}/{} runs gathered, max events {}, sweep took {:.1}s",
        runs.len() - failed.len(),
        runs.len(),
        worst,
        elapsed.as_secs_f64()
    );
    for r in failed.iter().take(5) {
        detail += &format!("\n    not gathered: {} span {:.3e}", label(r), r.trace.summary.final_span);
    }
    outcome(failed.is_empty() && elapsed < Duration::from_secs(60), detail)
}

fn criterion_2() -> Outcome {
    let tol = Tolerances::default();
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let n = r.random_range(1..=12);
        let span = 10f64.powf(r.random_range(-1.0..2.0));
        let z = r.random_range(-5.0..5.0);
        let pts: Vec<Point3> = (0..n)
            .map(|_| {
                if case % 3 == 0 {
                    // clustered near a circle, where the support set is large
                    let t = r.random_range(0.0..std::f64::consts::TAU);
                    let rad = span * r.random_range(0.95..1.0);
                    Point3::new(rad * t.cos(), rad * t.sin(), z)
                } else {
                    Point3::new(r.random_range(-span..span), r.random_range(-span..span), z)
                }
            })
            .collect();
        let flat: Vec<[f64; 2]> = pts.iter().map(|p| [p.x, p.y]).collect();
        let got = min_enclosing_circle(&pts, &tol).expect("coplanar input");
        let (c, rad) = brute_mec(&flat);
        let err = (got.center.x - c[0])
            .hypot(got.center.y - c[1])
            .max((got.radius - rad).abs());
        worst = worst.max(err);
    }
    outcome(worst <= 1e-9, format!("1000 cases, worst center/radius error {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let tol = Tolerances::default();
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let c = Point3::new(r.random_range(-10.0..10.0), r.random_range(-10.0..10.0), r.random_range(-10.0..10.0));
        let a = r.random_range(0.1..10.0);
        let h = a * r.random_range(0.0..0.95);
        let m = r.random_range(3..=8);
        let ring = |rad: f64, z: f64, r: &mut rand_chacha::ChaCha8Rng| -> Vec<Point3> {
            (0..m)
                .map(|_| {
                    let t = r.random_range(0.0..std::f64::consts::TAU);
                    Point3::new(c.x + rad * t.cos(), c.y + rad * t.sin(), z)
                })
                .collect()
        };
        let base = ring(a, c.z, &mut r);
        let slice = ring(a - h, c.z + h, &mut r);
        let original = cone_vertex(&compute_circle(&base, &tol).unwrap(), &tol).unwrap();
        let sliced = cone_vertex(&compute_circle(&slice, &tol).unwrap(), &tol).unwrap();
        worst = worst.max(original.dist(&sliced));
        worst = worst.max(original.dist(&Point3::new(c.x, c.y, c.z + a)));
    }
    outcome(worst <= 1e-9, format!("1000 (circle, slice) pairs, worst apex gap {worst:.2e}"))
}

/// Distance gap between the two nearest circle candidates, if the rule
/// picks among several.
fn tie_gap(config: &[Point3], me: Point3, rule: Rule, tol: &Tolerances) -> f64 {
    if !matches!(rule, Rule::ClosestOnCircle | Rule::ApproachTop) {
        return f64::INFINITY;
    }
    let ztop = config.iter().map(|p| p.z).fold(f64::MIN, f64::max);
    let mut top: Vec<Point3> = config.iter().copied().filter(|p| ztop - p.z <= 1e-6).collect();
    top.sort_by(|a, b| a.lex_cmp(b));
    let circle = compute_circle(&top, tol).unwrap();
    let mut d: Vec<f64> = circle.on_circle.iter().map(|p| p.dist(&me)).collect();
    d.sort_by(f64::total_cmp);
    if d.len() < 2 {
        f64::INFINITY
    } else {
        d[1] - d[0]
    }
}

fn criterion_4() -> Outcome {
    let tol = Tolerances::default();
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut skipped = 0;
    let mut rules: BTreeMap<String, u32> = BTreeMap::new();
    while done < 1000 {
        let n = r.random_range(1..=12);
        let layers = [None, Some(1), Some(2), Some(3)][r.random_range(0..4)];
        let cfg = gather3d::cli::run_config::generate(n, layers, 10.0, r.random()).unwrap();
        let config: Vec<Point3> = cfg.robots.iter().map(|e| Point3::from(e.position)).collect();
        let me = config[r.random_range(0..n)];
        let id = gathering3d_step(&LocalFrame::identity(me), &config, &tol).unwrap();
        if tie_gap(&config, me, id.rule, &tol) < 1e-6 {
            skipped += 1;
            continue;
        }
        let frame = LocalFrame::new(
            me,
            r.random_range(0.0..std::f64::consts::TAU),
            r.random_bool(0.5),
            2f64.powf(r.random_range(-3.0..3.0)),
        )
        .unwrap();
        let got = gathering3d_step(&frame, &config, &tol).unwrap();
        let rel = got.target.dist(&id.target) / id.target.norm().max(1.0);
        worst = worst.max(rel);
        if got.rule != id.rule {
            worst = f64::INFINITY;
        }
        *rules.entry(format!("{:?}", id.rule)).or_default() += 1;
        done += 1;
    }
    outcome(
        worst <= 1e-9,
        format!("1000 snapshots ({skipped} tied skipped), worst relative error {worst:.2e}, rules {rules:?}"),
    )
}

fn criterion_5(runs: &[SweepRun]) -> Outcome {
    let mut totals: BTreeMap<MonitorId, (u64, u64)> = BTreeMap::new();
    let mut dirty = Vec::new();
    let mut worst: f64 = 0.0;
    let mut classes: BTreeMap<ConfigClass, u64> = BTreeMap::new();
    for run in runs {
        let report = gather3d::sim::monitors(&run.trace);
        for id in MonitorId::ALL {
            let e = totals.entry(id).or_default();
            e.0 += report.passes.get(&id).copied().unwrap_or(0);
            e.1 += report.failures.get(&id).copied().unwrap_or(0);
        }
        worst = worst.max(report.max_violation);
        if !report.is_clean() {
            dirty.push(run);
        }
        if let Some(first) = run.trace.events.first() {
            *classes.entry(first.class).or_default() += 1;
        }
    }
    let mut detail = format!("{} runs, {} dirty, worst violation {:.2e}; checks (pass, fail):", runs.len(), dirty.len(), worst);
    for (id, (p, f)) in &totals {
        detail += &format!(" {id}=({p}, {f})");
    }
    detail += &format!("; class counts at the first event {classes:?}");
    let (three_point, m5_total, m2_after_m5, m2_total) = anatomy(runs);
    detail += &format!(
        "\n    {three_point}/{m5_total} M5 failures leave exactly 3 positions on the top plane (their circumcircle outgrows the old MEC); \
         {m2_after_m5}/{m2_total} M2 failures follow an earlier M5 failure in the same run"
    );
    for r in dirty.iter().take(5) {
        detail += &format!("\n    dirty: {} failures {:?}", label(r), r.trace.summary.monitor_failures);
    }
    outcome(dirty.is_empty(), detail)
}

/// Where the M5 and M2 failures of the sweep come from.
fn anatomy(runs: &[SweepRun]) -> (u64, u64, u64, u64) {
    let tol = Tolerances::default();
    let (mut three_point, mut m5_total, mut m2_after_m5, mut m2_total) = (0, 0, 0, 0);
    for run in runs {
        let mut pos: Vec<Point3> = run.trace.header.robots.iter().map(|s| s.position).collect();
        let mut seen_m5 = false;
        for ev in &run.trace.events {
            if ev.kind == EventKind::Move {
                pos[ev.robot_id] = ev.pos_after;
            }
            if ev.monitor_flags.get(&MonitorId::M5) == Some(&false) {
                m5_total += 1;
                seen_m5 = true;
                let config = Configuration::new(pos.iter().copied(), tol).unwrap();
                if decompose(&config).top().members.len() == 3 {
                    three_point += 1;
                }
            }
            if ev.monitor_flags.get(&MonitorId::M2) == Some(&false) {
                m2_total += 1;
                m2_after_m5 += u64::from(seen_m5);
            }
        }
    }
    (three_point, m5_total, m2_after_m5, m2_total)
}

fn criterion_6(runs: &[SweepRun]) -> Outcome {
    let tol = Tolerances::default();
    let mut checked = 0;
    let mut crashes = 0;
    let mut apart = 0;
    let mut problems = Vec::new();
    for run in runs.iter().filter(|r| r.f > 0) {
        checked += 1;
        let t = &run.trace;
        let mut pos: Vec<Point3> = t.header.robots.iter().map(|s| s.position).collect();
        let mut frozen: Vec<Option<Point3>> = vec![None; pos.len()];
        for ev in &t.events {
            let i = ev.robot_id;
            if let Some(p) = frozen[i] {
                problems.push(format!("{}: crashed robot {i} acted at event {}", label(run), ev.event_index));
                if !ev.pos_after.bits_eq(&p) {
                    problems.push(format!("{}: crashed robot {i} moved", label(run)));
                }
            }
            match ev.kind {
                EventKind::Crash => {
                    if !ev.pos_before.bits_eq(&pos[i]) || !ev.pos_after.bits_eq(&pos[i]) {
                        problems.push(format!("{}: crash event moved robot {i}", label(run)));
                    }
                    frozen[i] = Some(pos[i]);
                    crashes += 1;
                }
                EventKind::Move => pos[i] = ev.pos_after,
                _ => {}
            }
        }
        let alive: Vec<Point3> = (0..pos.len()).filter(|&i| frozen[i].is_none()).map(|i| pos[i]).collect();
        let span = alive
            .iter()
            .flat_map(|a| alive.iter().map(move |b| a.dist(b)))
            .fold(0.0, f64::max);
        if !t.summary.gathered || span >= tol.eps_gather {
            problems.push(format!("{}: alive robots not gathered (span {span:.2e})", label(run)));
        }
        if let Some(g) = t.summary.gather_point {
            if frozen.iter().flatten().any(|p| p.dist(&g) >= tol.eps_gather) {
                apart += 1;
            }
        }
    }
    let mut detail = format!(
        "{checked} faulty runs, {crashes} crashes, {apart} runs gathered away from a crashed robot, {} problems",
        problems.len()
    );
    for p in problems.iter().take(5) {
        detail += &format!("\n    {p}");
    }
    outcome(problems.is_empty(), detail)
}

fn criterion_7(runs: &[SweepRun]) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let step = (runs.len() / 100).max(1);
    let sample: Vec<&SweepRun> = runs.iter().step_by(step).take(100).collect();
    let mut problems = Vec::new();
    for (k, run) in sample.iter().enumerate() {
        let first = trace_to_string(&run.trace);
        let again = trace_to_string(&simulate(&run.setup).unwrap());
        if first != again {
            problems.push(format!("{}: rerun differs", label(run)));
        }
        let path = dir.path().join(format!("t{k}.jsonl"));
        std::fs::write(&path, &first).unwrap();
        let report = check_trace(&path).unwrap();
        let inline: Vec<(MonitorId, u64)> = run.trace.summary.monitor_failures.iter().map(|(k, v)| (*k, *v)).collect();
        if report.mismatches != 0 || report.failures != inline {
            problems.push(format!("{}: replay disagrees ({} event mismatches)", label(run), report.mismatches));
        }
        let expected = if run.trace.summary.monitor_failures.values().all(|&n| n == 0) {
            Exit::Success
        } else {
            Exit::MonitorFailure
        };
        if report.exit() != expected {
            problems.push(format!("{}: check verdict differs from the run", label(run)));
        }
    }
    let mut detail = format!("{} traces rerun and replayed, {} problems", sample.len(), problems.len());
    for p in problems.iter().take(5) {
        detail += &format!("\n    {p}");
    }
    outcome(sample.len() == 100 && problems.is_empty(), detail)
}

fn event(i: usize, robot: usize, kind: EventKind, before: Point3, after: Point3, plan: Option<(Rule, Point3)>) -> TraceEvent {
    TraceEvent {
        event_index: i as u64,
        robot_id: robot,
        kind,
        pos_before: before,
        pos_after: after,
        destination: plan.map(|p| p.1),
        top_plane_radius: 0.0,
        class: ConfigClass::C1,
        monitor_flags: Flags::new(),
        snapshot: None,
        rule: plan.map(|p| p.0),
        local_destination: None,
    }
}

/// Robot 0 climbs partway toward `target` under `rule`, then jumps to `off`.
fn teleport_trace(start: &[Point3], rule: Rule, target: Point3, partway: Point3, off: Point3) -> Trace {
    let p0 = start[0];
    let plan = Some((rule, target));
    let jump = Some((Rule::Stay, off));
    let events = vec![
        event(0, 0, EventKind::Look, p0, p0, None),
        event(1, 0, EventKind::Compute, p0, p0, plan),
        event(2, 0, EventKind::Move, p0, partway, plan),
        event(3, 0, EventKind::Look, partway, partway, None),
        event(4, 0, EventKind::Compute, partway, partway, jump),
        event(5, 0, EventKind::Move, partway, off, jump),
    ];
    Trace {
        header: TraceHeader {
            schema: TRACE_SCHEMA.to_string(),
            robots: start
                .iter()
                .map(|&position| RobotSpec {
                    position,
                    frame: FrameSpec::IDENTITY,
                })
                .collect(),
            params: SimParams {
                delta: 0.1,
                tol: Tolerances::default(),
                seed: 0,
                max_events: 50_000,
                scheduler: SchedulerPolicy::RoundRobinAsync,
            },
            faults: FaultPlan::none(),
        },
        events,
        summary: RunSummary {
            gathered: false,
            gather_point: None,
            events_used: 6,
            moves: 2,
            monitor_failures: BTreeMap::new(),
            max_monitor_violation: 0.0,
            final_span: 0.0,
            gathered_at_crashed: false,
            colocations: 0,
        },
    }
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let h = 3f64.sqrt() / 2.0;
    let triangle = teleport_trace(
        &[Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)],
        Rule::TrianglePeak,
        Point3::new(0.5, 0.0, h),
        Point3::new(0.25, 0.0, h / 2.0),
        Point3::new(0.25, 2.0, h / 2.0),
    );
    let square: Vec<Point3> = (0..4)
        .map(|k| {
            let t = k as f64 * std::f64::consts::FRAC_PI_2;
            Point3::new(t.cos(), t.sin(), 0.0)
        })
        .collect();
    let cone = teleport_trace(
        &square,
        Rule::ConeVertex,
        Point3::new(0.0, 0.0, 1.0),
        Point3::new(0.5, 0.0, 0.5),
        Point3::new(3.0, 0.0, 0.5),
    );
    let mut detail = String::new();
    let mut passed = true;
    for (name, trace, want) in [("M1", triangle, MonitorId::M1), ("M2", cone, MonitorId::M2)] {
        let path = dir.path().join(format!("{name}.jsonl"));
        std::fs::write(&path, trace_to_string(&trace)).unwrap();
        let report = check_trace(&path).unwrap();
        let fails = report.failures.iter().find(|(id, _)| *id == want).map_or(0, |x| x.1);
        let exit = cmd_check(&path).unwrap();
        passed &= fails > 0 && exit == Exit::MonitorFailure;
        detail += &format!("{name} teleport: {fails} {want} failures, cmd_check exit {}; ", exit.code());
    }
    outcome(passed, detail.trim_end_matches("; ").to_string())
}

fn main() {
    let (runs, elapsed) = sweep();
    let results = [
        ("1 gathering sweep", criterion_1(&runs, elapsed)),
        ("2 MEC vs brute-force oracle", criterion_2()),
        ("3 cone slice keeps the apex", criterion_3()),
        ("4 frame equivariance", criterion_4()),
        ("5 monitors clean on the sweep", criterion_5(&runs)),
        ("6 crash freezing", criterion_6(&runs)),
        ("7 determinism and replay", criterion_7(&runs)),
        ("8 negative controls", criterion_8()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("criterion {name}: {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
