//! TOML front-end for the pursuit game family. Matrices are given flat in
//! row-major order; omitted terminal weights default to the calibrated desk
//! values.

use super::hexner::{params_desk_2d, params_desk_3d, HexnerParams};
use crate::linalg::Mat;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub game: GameSection,
    #[serde(default)]
    pub hexner: Option<HexnerSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    /// One of "hexner2d", "hexner3d", "hexner2d-constrained",
    /// "beerquiche", "repeated".
    pub kind: String,
    #[serde(default)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HexnerSection {
    #[serde(default)]
    pub sdim: Option<usize>,
    /// Row-major square matrices over the spatial axes.
    #[serde(default)]
    pub r1: Option<Vec<f64>>,
    #[serde(default)]
    pub r2: Option<Vec<f64>>,
    /// Row-major square matrices over the full per-player state.
    #[serde(default)]
    pub k1t: Option<Vec<f64>>,
    #[serde(default)]
    pub k2t: Option<Vec<f64>>,
    #[serde(default)]
    pub z: Option<Vec<f64>>,
    #[serde(default)]
    pub thetas: Option<Vec<f64>>,
    #[serde(default)]
    pub u1_max: Option<Vec<f64>>,
    #[serde(default)]
    pub u2_max: Option<Vec<f64>>,
    #[serde(default)]
    pub collision_radius: Option<f64>,
    #[serde(default)]
    pub collision_penalty: Option<f64>,
}

fn square_from_flat(name: &str, flat: &[f64], dim: usize) -> Result<Mat> {
    if flat.len() != dim * dim {
        return Err(Error::config(format!(
            "{name} must have {} entries for a {dim}x{dim} matrix, got {}",
            dim * dim,
            flat.len()
        )));
    }
    let rows: Vec<Vec<f64>> = flat.chunks(dim).map(<[f64]>::to_vec).collect();
    Mat::from_rows(&rows)
}

impl GameConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("bad game config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::MissingArtifact(format!("game config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn hexner_params(&self) -> Result<HexnerParams> {
        let base = match self.game.kind.as_str() {
            "hexner2d" => params_desk_2d(),
            "hexner3d" => params_desk_3d(),
            "hexner2d-constrained" => super::hexner::params_constrained_2d(),
            other => {
                return Err(Error::config(format!(
                    "game kind {other:?} has no pursuit parameters"
                )))
            }
        };
        let mut p = base;
        if let Some(h) = self.game.horizon {
            p.horizon = h;
        }
        let Some(sec) = &self.hexner else {
            p.validate()?;
            return Ok(p);
        };
        if let Some(sdim) = sec.sdim {
            if sdim != p.sdim {
                // Rebuild from the matching desk preset so defaults have the
                // right shapes, then reapply overrides below.
                p = match sdim {
                    2 => params_desk_2d(),
                    3 => params_desk_3d(),
                    _ => return Err(Error::config("sdim must be 2 or 3")),
                };
                if let Some(h) = self.game.horizon {
                    p.horizon = h;
                }
            }
        }
        let s = p.sdim;
        let n = 2 * s;
        if let Some(flat) = &sec.r1 {
            p.r1 = square_from_flat("r1", flat, s)?;
        }
        if let Some(flat) = &sec.r2 {
            p.r2 = square_from_flat("r2", flat, s)?;
        }
        if let Some(flat) = &sec.k1t {
            p.k1t = square_from_flat("k1t", flat, n)?;
        }
        if let Some(flat) = &sec.k2t {
            p.k2t = square_from_flat("k2t", flat, n)?;
        }
        if let Some(z) = &sec.z {
            p.z = z.clone();
        }
        if let Some(t) = &sec.thetas {
            p.thetas = t.clone();
        }
        if let Some(u) = &sec.u1_max {
            p.u1_max = u.clone();
        }
        if let Some(u) = &sec.u2_max {
            p.u2_max = u.clone();
        }
        match (sec.collision_radius, sec.collision_penalty) {
            (Some(r), Some(g)) => p.collision = Some((r, g)),
            (None, None) => {}
            _ => {
                return Err(Error::config(
                    "collision_radius and collision_penalty must be set together",
                ))
            }
        }
        p.validate()?;
        Ok(p)
    }
}
