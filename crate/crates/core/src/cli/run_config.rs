//! The JSON run configuration and the random instance generator.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::geom3::{Point3, Tolerances};
use crate::sim::{FaultPlan, FrameSpec, PlannedCrash, RobotSpec, SchedulerPolicy, SimParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub robots: Vec<RobotEntry>,
    #[serde(default)]
    pub params: ParamsEntry,
    #[serde(default)]
    pub faults: Vec<FaultEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotEntry {
    pub position: [f64; 3],
    #[serde(default)]
    pub frame: FrameEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameEntry {
    pub rotation_deg: f64,
    pub reflect: bool,
    pub scale: f64,
}

impl Default for FrameEntry {
    fn default() -> Self {
        FrameEntry {
            rotation_deg: 0.0,
            reflect: false,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsEntry {
    pub delta: f64,
    pub eps_z: f64,
    pub eps_geom: f64,
    pub eps_gather: f64,
    pub seed: u64,
    pub max_events: u64,
    pub scheduler: SchedulerPolicy,
}

impl Default for ParamsEntry {
    fn default() -> Self {
        let tol = Tolerances::default();
        ParamsEntry {
            delta: 1.0,
            eps_z: tol.eps_z,
            eps_geom: tol.eps_geom,
            eps_gather: tol.eps_gather,
            seed: 0,
            max_events: 50_000,
            scheduler: SchedulerPolicy::RandomAdversary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEntry {
    pub robot: usize,
    pub at_event: u64,
}

/// A validated configuration, ready to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub robots: Vec<RobotSpec>,
    pub params: SimParams,
    pub faults: FaultPlan,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            CliError::Config(format!(
                "line {} column {}, field `{}`: {}",
                inner.line(),
                inner.column(),
                e.path(),
                inner
            ))
        })
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        RunConfig::parse(&text)
    }

    pub fn to_setup(&self) -> Result<Setup, CliError> {
        let p = &self.params;
        let tol = Tolerances::new(p.eps_z, p.eps_geom, p.eps_gather).map_err(|e| CliError::Config(e.to_string()))?;
        let n = self.robots.len();
        if n == 0 {
            return Err(CliError::Config("at least one robot is required".into()));
        }
        if self.faults.len() >= n {
            return Err(CliError::Config(format!(
                "f < n required ({} faults for {} robots)",
                self.faults.len(),
                n
            )));
        }
        let mut robots = Vec::with_capacity(n);
        for (i, r) in self.robots.iter().enumerate() {
            let position = Point3::from(r.position);
            if !position.is_finite() {
                return Err(CliError::Config(format!("robots[{i}].position must be finite")));
            }
            if !(r.frame.scale.is_finite() && r.frame.scale > 0.0) {
                return Err(CliError::Config(format!("robots[{i}].frame.scale must be positive")));
            }
            if !r.frame.rotation_deg.is_finite() {
                return Err(CliError::Config(format!("robots[{i}].frame.rotation_deg must be finite")));
            }
            if let Some(j) = robots
                .iter()
                .position(|s: &RobotSpec| s.position.dist(&position) < tol.eps_gather)
            {
                return Err(CliError::Config(format!(
                    "positions must be distinct (robots[{j}] and robots[{i}])"
                )));
            }
            robots.push(RobotSpec {
                position,
                frame: FrameSpec {
                    rotation: r.frame.rotation_deg.to_radians(),
                    reflect: r.frame.reflect,
                    scale: r.frame.scale,
                },
            });
        }
        let faults = FaultPlan {
            crashes: self
                .faults
                .iter()
                .map(|f| PlannedCrash {
                    robot: f.robot,
                    at_event: f.at_event,
                })
                .collect(),
        };
        faults.validate(n).map_err(|e| CliError::Config(e.to_string()))?;
        let params = SimParams {
            delta: p.delta,
            tol,
            seed: p.seed,
            max_events: p.max_events,
            scheduler: p.scheduler,
        };
        params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Setup { robots, params, faults })
    }
}

/// Random instance with `n` distinct positions in a cube of side `spread`.
///
/// With `z_layers = Some(k)` the robots are dealt round-robin onto `k`
/// random horizontal planes (so `k = 1` makes everything coplanar);
/// `None` draws every height independently. Frames are random; params are
/// defaults with `delta = spread / 10` and the given seed.
pub fn generate(n: usize, z_layers: Option<usize>, spread: f64, seed: u64) -> Result<RunConfig, CliError> {
    if n < 1 {
        return Err(CliError::Config("n >= 1 required".into()));
    }
    if z_layers == Some(0) {
        return Err(CliError::Config("z_layers must be at least 1".into()));
    }
    if !(spread.is_finite() && spread > 0.0) {
        return Err(CliError::Config("spread must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 * spread;
    let levels: Vec<f64> = match z_layers {
        Some(k) => (0..k).map(|_| rng.random_range(0.0..spread)).collect(),
        None => Vec::new(),
    };
    let min_gap = spread * 1e-3;
    let mut positions: Vec<[f64; 3]> = Vec::with_capacity(n);
    while positions.len() < n {
        let i = positions.len();
        let z = if levels.is_empty() {
            rng.random_range(0.0..spread)
        } else {
            levels[i % levels.len()]
        };
        let p = [rng.random_range(-half..half), rng.random_range(-half..half), z];
        let close = positions
            .iter()
            .any(|q| Point3::from(*q).dist(&Point3::from(p)) < min_gap);
        if !close {
            positions.push(p);
        }
    }
    let robots = positions
        .into_iter()
        .map(|position| RobotEntry {
            position,
            frame: FrameEntry {
                rotation_deg: rng.random_range(0.0..360.0),
                reflect: rng.random_bool(0.5),
                scale: 2f64.powf(rng.random_range(-1.0..1.0)),
            },
        })
        .collect();
    Ok(RunConfig {
        robots,
        params: ParamsEntry {
            delta: spread / 10.0,
            seed,
            ..ParamsEntry::default()
        },
        faults: Vec::new(),
    })
}
