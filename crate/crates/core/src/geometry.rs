//! Schwarzschild background weights and the radial mesh.
//!
//! The mesh is one-dimensional (slab symmetry): every cell has two faces of unit
//! measure, the flux weight at a face is the lapse `a(r) = 1 - 2M/r`, and the
//! source weight of a cell is `θ = 2M / r²` at its center. The innermost face sits
//! exactly on the horizon `r = 2M`, where the lapse is exactly zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FluxModel;

/// Number of faces per one-dimensional cell.
pub const FACES_PER_CELL: f64 = 2.0;

/// Margin keeping the time step strictly below the source stability bound.
pub const SOURCE_MARGIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Background {
    mass: f64,
}

impl Background {
    pub fn new(mass: f64) -> Result<Self> {
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(Error::domain(format!("mass must be finite and >= 0, got {mass}")));
        }
        Ok(Self { mass })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn horizon(&self) -> f64 {
        2.0 * self.mass
    }

    /// Lapse weight without the `r > 0` check; flat space returns exactly 1.
    #[inline]
    pub(crate) fn weight(&self, r: f64) -> f64 {
        if self.mass == 0.0 {
            1.0
        } else {
            1.0 - 2.0 * self.mass / r
        }
    }

    /// Source weight `2M / r²`; flat space returns exactly 0.
    #[inline]
    pub fn theta(&self, r: f64) -> f64 {
        if self.mass == 0.0 {
            0.0
        } else {
            2.0 * self.mass / (r * r)
        }
    }
}

/// `1 - 2M/r`.
pub fn lapse(bg: &Background, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("radius must be positive, got {r}")));
    }
    Ok(bg.weight(r))
}

/// What a boundary cell sees beyond a truncated face.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GhostPolicy {
    /// Zero-gradient extrapolation of the adjacent cell.
    #[default]
    Copy,
    /// A fixed state in `[-1, 1]`.
    Fixed(f64),
}

impl GhostPolicy {
    pub fn ghost(&self, adjacent: f64) -> f64 {
        match *self {
            GhostPolicy::Copy => adjacent,
            GhostPolicy::Fixed(v) => v,
        }
    }
}

impl fmt::Display for GhostPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GhostPolicy::Copy => write!(f, "copy"),
            GhostPolicy::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

impl FromStr for GhostPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s == "copy" {
            return Ok(GhostPolicy::Copy);
        }
        if let Some(rest) = s.strip_prefix("fixed:") {
            let v: f64 = rest
                .trim()
                .parse()
                .map_err(|_| format!("cannot parse fixed ghost value '{rest}'"))?;
            if !(-1.0..=1.0).contains(&v) {
                return Err(format!("fixed ghost value {v} outside [-1, 1]"));
            }
            return Ok(GhostPolicy::Fixed(v));
        }
        Err(format!("expected \"copy\" or \"fixed:<value>\", got '{s}'"))
    }
}

impl TryFrom<String> for GhostPolicy {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<GhostPolicy> for String {
    fn from(g: GhostPolicy) -> String {
        g.to_string()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialMesh {
    background: Background,
    faces: Vec<f64>,
    centers: Vec<f64>,
    widths: Vec<f64>,
    face_weights: Vec<f64>,
    cell_thetas: Vec<f64>,
}

impl RadialMesh {
    pub fn background(&self) -> Background {
        self.background
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }

    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn face_weights(&self) -> &[f64] {
        &self.face_weights
    }

    pub fn cell_thetas(&self) -> &[f64] {
        &self.cell_thetas
    }

    pub fn r_min(&self) -> f64 {
        self.faces[0]
    }

    pub fn r_max(&self) -> f64 {
        self.faces[self.faces.len() - 1]
    }

    /// True when the innermost face lies on the horizon and carries zero weight.
    pub fn touches_horizon(&self) -> bool {
        self.face_weights[0] == 0.0
    }

    /// Width-weighted L1 norm of `a - b`.
    pub fn l1_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.widths
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * (x - y).abs())
            .sum()
    }
}

/// `cells` equal cells spanning `[2M, r_max]`.
pub fn build_uniform_mesh(bg: &Background, r_max: f64, cells: usize) -> Result<RadialMesh> {
    if cells < 2 {
        return Err(Error::domain(format!("cells must be >= 2, got {cells}")));
    }
    let r_min = bg.horizon();
    if !(r_max > r_min) || !r_max.is_finite() {
        return Err(Error::domain(format!(
            "r_max = {r_max} must exceed the horizon radius {r_min}"
        )));
    }
    let span = r_max - r_min;
    let faces: Vec<f64> = (0..=cells)
        .map(|j| {
            if j == cells {
                r_max
            } else {
                r_min + span * j as f64 / cells as f64
            }
        })
        .collect();
    let centers: Vec<f64> = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let widths: Vec<f64> = faces.windows(2).map(|w| w[1] - w[0]).collect();
    let face_weights = faces.iter().map(|&r| bg.weight(r)).collect();
    let cell_thetas = centers.iter().map(|&r| bg.theta(r)).collect();
    Ok(RadialMesh {
        background: *bg,
        faces,
        centers,
        widths,
        face_weights,
        cell_thetas,
    })
}

/// Largest admissible time step for the explicit scheme on `mesh`.
///
/// `min(τ₁, τ₂ (1 - 1e-6))` with `τ₁ = |K| / (2 p_K L max a)` from the flux CFL
/// condition (`p_K = 2`, `L = nf_lipschitz`) and `τ₂ = 1 / (2 max θ max|f' + h'|)` from
/// the source condition. Either bound is infinite when its denominator vanishes.
pub fn max_timestep(mesh: &RadialMesh, m: &FluxModel, nf_lipschitz: f64) -> Result<f64> {
    if mesh.cells() == 0 {
        return Err(Error::domain("empty mesh"));
    }
    if !(nf_lipschitz > 0.0) {
        return Err(Error::domain(format!(
            "numerical flux Lipschitz bound must be positive, got {nf_lipschitz}"
        )));
    }
    let min_width = mesh.widths.iter().copied().fold(f64::INFINITY, f64::min);
    let max_weight = mesh.face_weights.iter().copied().fold(0.0, f64::max);
    let tau_flux = if max_weight > 0.0 {
        min_width / (2.0 * FACES_PER_CELL * nf_lipschitz * max_weight)
    } else {
        f64::INFINITY
    };
    let max_theta = mesh.cell_thetas.iter().copied().fold(0.0, f64::max);
    let source_rate = max_theta * m.max_abs_total_derivative();
    let tau_source = if source_rate > 0.0 {
        1.0 / (2.0 * source_rate)
    } else {
        f64::INFINITY
    };
    Ok(tau_flux.min(tau_source * (1.0 - SOURCE_MARGIN)))
}
