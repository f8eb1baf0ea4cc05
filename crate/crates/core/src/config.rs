//! Configurations and their horizontal plane stack.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom3::{Point3, Tolerances};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("a configuration needs at least one position")]
    Empty,
    #[error("point ({}, {}, {}) is not a position of the configuration", .0.x, .0.y, .0.z)]
    NotInConfiguration(Point3),
}

/// Set of occupied positions. Robots sharing a position (within
/// `eps_gather`) are counted once.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    positions: Vec<Point3>,
    tol: Tolerances,
}

impl Configuration {
    /// Deduplicates greedily in input order: the first point of each
    /// cluster is kept as its representative.
    pub fn new<I>(points: I, tol: Tolerances) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = Point3>,
    {
        let mut positions: Vec<Point3> = Vec::new();
        for p in points {
            if !positions.iter().any(|q| q.dist(&p) < tol.eps_gather) {
                positions.push(p);
            }
        }
        if positions.is_empty() {
            return Err(ConfigError::Empty);
        }
        Ok(Configuration { positions, tol })
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub z_level: f64,
    /// Sorted lexicographically.
    pub members: Vec<Point3>,
}

/// Horizontal planes through the positions, topmost first.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneStack {
    pub planes: Vec<Plane>,
    pub tol: Tolerances,
}

impl PlaneStack {
    pub fn top(&self) -> &Plane {
        &self.planes[0]
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConfigClass {
    C1,
    C2,
    Cgt2,
}

impl fmt::Display for ConfigClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfigClass::C1 => "C1",
            ConfigClass::C2 => "C2",
            ConfigClass::Cgt2 => "Cgt2",
        })
    }
}

/// Single-linkage clustering of z values with threshold `eps_z`.
pub fn decompose(c: &Configuration) -> PlaneStack {
    let tol = c.tol;
    let mut pts = c.positions.clone();
    pts.sort_by(|a, b| b.z.total_cmp(&a.z).then(a.lex_cmp(b)));

    let mut groups: Vec<Vec<Point3>> = Vec::new();
    for p in pts {
        match groups.last_mut() {
            Some(g) if g.last().unwrap().z - p.z <= tol.eps_z => g.push(p),
            _ => groups.push(vec![p]),
        }
    }
    let planes = groups
        .into_iter()
        .map(|mut members| {
            // sorted by descending z, so first/last bracket the level
            let z_level = 0.5 * (members[0].z + members[members.len() - 1].z);
            members.sort_by(|a, b| a.lex_cmp(b));
            Plane { z_level, members }
        })
        .collect();
    PlaneStack { planes, tol }
}

pub fn classify(ps: &PlaneStack) -> ConfigClass {
    match ps.top().members.len() {
        1 => ConfigClass::C1,
        2 => ConfigClass::C2,
        _ => ConfigClass::Cgt2,
    }
}

/// 1-based index (from the top) of the plane holding `p`.
pub fn check_level(ps: &PlaneStack, p: &Point3) -> Result<usize, ConfigError> {
    ps.planes
        .iter()
        .position(|plane| {
            (plane.z_level - p.z).abs() <= ps.tol.eps_z + ps.tol.eps_gather
                && plane.members.iter().any(|m| m.dist(p) < ps.tol.eps_gather)
        })
        .map(|i| i + 1)
        .ok_or(ConfigError::NotInConfiguration(*p))
}
