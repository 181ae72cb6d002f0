//! Per-subcommand JSON configs. Unknown keys are rejected; defaults are
//! filled in and echoed back in the report.

use eulergram::{PolyRectangle, Rect, ShapeSpec, ShotNoiseModel, Vec2};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn two() -> usize {
    2
}

fn sixty_four() -> usize {
    64
}

fn default_factors() -> Vec<usize> {
    vec![4, 8, 16]
}

fn default_size() -> usize {
    257
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiConfig {
    pub shape: ShapeSpec,
    pub epsilon: f64,
    /// Lattice translation applied before digitizing.
    #[serde(default)]
    pub offset: Vec2,
    /// Empty lattice rows kept around the shape's bounding box.
    #[serde(default = "two")]
    pub margin: usize,
    /// Also write `grid.pgm`.
    #[serde(default)]
    pub dump_grid: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub shape: ShapeSpec,
    /// Observation window; the shape is intersected with it.
    #[serde(default)]
    pub window: Option<PolyRectangle>,
    /// Strictly decreasing mesh schedule.
    pub epsilons: Vec<f64>,
    /// Quadrature mesh of the bicovariogram column; omitted when absent.
    #[serde(default)]
    pub quad_mesh: Option<f64>,
    #[serde(default)]
    pub offset: Vec2,
}

/// Exactly one of `shape` and `polyrect`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerimeterConfig {
    #[serde(default)]
    pub shape: Option<ShapeSpec>,
    #[serde(default)]
    pub polyrect: Option<PolyRectangle>,
    pub epsilons: Vec<f64>,
    pub quad_mesh: f64,
    #[serde(default = "sixty_four")]
    pub n_directions: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthSpec {
    /// A shape digitized at `fine_epsilon`.
    Shape { shape: ShapeSpec, fine_epsilon: f64 },
    /// Random disc unions on a `size²` grid of mesh 1.
    Random {
        trials: usize,
        #[serde(default = "default_size")]
        size: usize,
        seed: u64,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub truth: TruthSpec,
    /// Coarse-to-fine mesh ratios, each at least 4.
    #[serde(default = "default_factors")]
    pub factors: Vec<usize>,
    /// Snapped outward to fine pixel boundaries before use.
    #[serde(default)]
    pub window: Option<Rect>,
    /// Write `truth.pgm` (shape truth only).
    #[serde(default)]
    pub dump_grid: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotnoiseConfig {
    pub model: ShotNoiseModel,
    pub window: PolyRectangle,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitiesConfig {
    pub model: ShotNoiseModel,
    pub epsilon: f64,
    pub window: Rect,
    pub replicates: usize,
    pub seed: u64,
}

pub fn parse<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))
}

pub fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::ConfigInvalid(msg()))
    }
}

pub fn check_schedule(epsilons: &[f64]) -> Result<(), CliError> {
    check(!epsilons.is_empty(), || "epsilons must not be empty".into())?;
    check(epsilons.iter().all(|&e| e > 0.0 && e.is_finite()), || {
        format!("epsilons must be positive and finite, got {epsilons:?}")
    })?;
    check(epsilons.windows(2).all(|w| w[1] < w[0]), || {
        format!("epsilons must be strictly decreasing, got {epsilons:?}")
    })
}
