//! Independent oracles and instance generators shared by the integration tests.
#![allow(dead_code)]

use gather3d::cli::run_config::{generate, FaultEntry, Setup};
use gather3d::sim::SchedulerPolicy;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const POLICIES: [SchedulerPolicy; 3] = [
    SchedulerPolicy::Synchronous,
    SchedulerPolicy::RoundRobinAsync,
    SchedulerPolicy::RandomAdversary,
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Circle through three points, `None` when (nearly) collinear.
pub fn circumcircle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Option<([f64; 2], f64)> {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let scale = (bx * bx + by * by).max(cx * cx + cy * cy);
    if d.abs() <= 1e-12 * scale {
        return None;
    }
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    Some(([a[0] + ux, a[1] + uy], (ux * ux + uy * uy).sqrt()))
}

/// Minimum enclosing circle by exhaustion: every pair-diameter and every
/// circumscribed triple, smallest one that covers all points.
pub fn brute_mec(pts: &[[f64; 2]]) -> ([f64; 2], f64) {
    assert!(!pts.is_empty());
    if pts.len() == 1 {
        return (pts[0], 0.0);
    }
    let covers = |c: [f64; 2], r: f64| {
        pts.iter()
            .all(|p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt() <= r * (1.0 + 1e-12) + 1e-12)
    };
    let mut best: Option<([f64; 2], f64)> = None;
    let mut consider = |c: [f64; 2], r: f64| {
        if best.is_none_or(|(_, br)| r < br) && covers(c, r) {
            best = Some((c, r));
        }
    };
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let (a, b) = (pts[i], pts[j]);
            let c = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            consider(c, ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() / 2.0);
            for &p in &pts[j + 1..] {
                if let Some((c, r)) = circumcircle(a, b, p) {
                    consider(c, r);
                }
            }
        }
    }
    best.expect("some pair circle always encloses")
}

/// Planes by plain sorting: heights descending, split at gaps above `eps`.
pub fn sorted_levels(zs: &[f64], eps: f64) -> Vec<Vec<f64>> {
    let mut zs = zs.to_vec();
    zs.sort_by(|a, b| b.total_cmp(a));
    let mut out: Vec<Vec<f64>> = Vec::new();
    for z in zs {
        match out.last_mut() {
            Some(level) if level.last().unwrap() - z <= eps => level.push(z),
            _ => out.push(vec![z]),
        }
    }
    out
}

/// Fault counts exercised for `n` robots: 0, n/2 and n-1, without repeats.
pub fn fault_counts(n: usize) -> Vec<usize> {
    let mut v = vec![0, n / 2, n - 1];
    v.dedup();
    v.sort_unstable();
    v.dedup();
    v
}

/// One seeded instance of the gathering sweep. Layering rotates through
/// random heights, a single plane, two planes and n/3 planes so every
/// class shows up; `f` robots crash at uniform events in `[0, 30n)`.
pub fn sweep_instance(n: usize, policy: SchedulerPolicy, f: usize, case: u64) -> Setup {
    let seed = (n as u64) << 40 | (f as u64) << 32 | (policy as u64) << 24 | case;
    let layers = match case % 4 {
        0 => None,
        1 => Some(1),
        2 => Some(2),
        _ => Some((n / 3).max(1)),
    };
    let mut cfg = generate(n, layers, 10.0, seed).expect("valid generator input");
    let mut r = rng(seed ^ 0x5eed_fa17);
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut r);
    cfg.faults = ids[..f]
        .iter()
        .map(|&robot| FaultEntry {
            robot,
            at_event: r.random_range(0..30 * n as u64),
        })
        .collect();
    cfg.params.scheduler = policy;
    cfg.params.max_events = 50_000;
    cfg.to_setup().expect("generated config is valid")
}
