//! CSV (`x, r1, r2`) plus JSON sidecar storage of ground states.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GroundStatePair;
use crate::error::{Error, Result};
use crate::grid::{Grid, RealField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateMeta {
    pub p: f64,
    pub beta: f64,
    #[serde(rename = "L")]
    pub half_length: f64,
    pub n: usize,
    pub m1: f64,
    pub m2: f64,
    pub energy: f64,
    pub residual_norm: f64,
}

impl GroundStatePair {
    pub fn meta(&self) -> GroundStateMeta {
        GroundStateMeta {
            p: self.p,
            beta: self.beta,
            half_length: self.grid().half_length(),
            n: self.grid().len(),
            m1: self.m1,
            m2: self.m2,
            energy: self.energy,
            residual_norm: self.residual_norm,
        }
    }

    /// Writes the profiles to `path` and the metadata to the sibling `.json` file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "r1", "r2"])?;
        for (m, x) in self.grid().nodes().iter().enumerate() {
            w.write_record([*x, self.r1.values()[m], self.r2.values()[m]].map(|v| v.to_string()))?;
        }
        w.flush()?;
        fs::write(path.with_extension("json"), serde_json::to_string_pretty(&self.meta())?)?;
        Ok(())
    }

    /// Reads a pair written by [`GroundStatePair::save`], recomputing the derived quantities.
    pub fn load(path: &Path) -> Result<Self> {
        let meta: GroundStateMeta = serde_json::from_str(&fs::read_to_string(path.with_extension("json"))?)?;
        let grid = Grid::new(meta.half_length, meta.n)?;
        let mut r = csv::Reader::from_path(path)?;
        let mut r1 = Vec::with_capacity(meta.n);
        let mut r2 = Vec::with_capacity(meta.n);
        for (m, rec) in r.records().enumerate() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("bad ground-state value: {e}")))?;
            if v.len() != 3 {
                return Err(Error::Config("ground-state rows need 3 columns".into()));
            }
            if m >= meta.n || (v[0] - grid.nodes()[m]).abs() > 1e-9 * meta.half_length {
                return Err(Error::Config("ground-state nodes do not match L and n".into()));
            }
            r1.push(v[1]);
            r2.push(v[2]);
        }
        let pair = Self::from_profiles(
            RealField::from_values(&grid, r1)?,
            RealField::from_values(&grid, r2)?,
            meta.p,
            meta.beta,
        )?;
        if (pair.m1 - meta.m1).abs() > 1e-12 * meta.m1.abs().max(1.0) {
            return Err(Error::Config("stored mass does not match the profiles".into()));
        }
        Ok(pair)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::{solve_ground_state, Branch, SolverOptions};

    #[test]
    fn round_trip_is_exact() {
        let g = Grid::new(20.0, 1024).unwrap();
        let opts = SolverOptions {
            verify_minimality: false,
            ..SolverOptions::default()
        };
        let r = solve_ground_state(1.0, 2.0, &g, Branch::Symmetric, opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gs.csv");
        r.save(&path).unwrap();
        let back = GroundStatePair::load(&path).unwrap();
        assert_eq!(back.r1().values(), r.r1().values());
        assert_eq!(back.m2(), r.m2());
        assert_eq!(back.energy(), r.energy());
        assert_eq!(back.meta().n, 1024);
    }
}
