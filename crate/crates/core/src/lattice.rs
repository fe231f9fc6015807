//! One-dimensional lattices and their site metric.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    ChainOpen,
    ChainPeriodic,
}

/// A finite chain of sites with the path metric.
///
/// All locality statements in this crate (ranges, `‖m‖_r`, light cones) are
/// relative to [`Lattice::distance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    n: usize,
    geometry: Geometry,
    positions: Vec<i64>,
}

impl Lattice {
    pub fn chain(n: usize, geometry: Geometry) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("a chain needs at least 2 sites, got {n}")));
        }
        Ok(Self {
            n,
            geometry,
            positions: (0..n as i64).collect(),
        })
    }

    pub fn open(n: usize) -> Result<Self> {
        Self::chain(n, Geometry::ChainOpen)
    }

    pub fn periodic(n: usize) -> Result<Self> {
        Self::chain(n, Geometry::ChainPeriodic)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    /// Path distance between sites `i` and `j`.
    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> usize {
        let d = i.abs_diff(j);
        match self.geometry {
            Geometry::ChainOpen => d,
            Geometry::ChainPeriodic => d.min(self.n - d),
        }
    }

    /// Largest distance between any two sites.
    pub fn diameter(&self) -> usize {
        match self.geometry {
            Geometry::ChainOpen => self.n - 1,
            Geometry::ChainPeriodic => self.n / 2,
        }
    }
}

/// Builds a chain lattice; rejects `n < 2`.
pub fn build_chain(n: usize, geometry: Geometry) -> Result<Lattice> {
    Lattice::chain(n, geometry)
}
