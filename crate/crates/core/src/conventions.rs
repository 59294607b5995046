//! Sign and scale conventions that the discretization leaves open and that are
//! pinned by the oracle runs in [`crate::validation`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conventions {
    /// Coincidence limit of the double layer is `curvature_factor · κ · φ`.
    pub curvature_factor: f64,
    /// Sign of the `½q` jump when the exterior flux is recovered from a
    /// single-layer density: `g = jump_sign·½q + K'q`.
    pub adjoint_jump_sign: f64,
    /// Global sign applied to the assembled shape gradient.
    pub gradient_sign: f64,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            curvature_factor: 0.5,
            adjoint_jump_sign: 1.0,
            gradient_sign: 1.0,
        }
    }
}

impl Conventions {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("conventions serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("conventions", e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingData(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }
}
