//! Problem recipes shared by the experiments.

use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::drift::DriftSpec;
use crate::error::{config, Result};
use crate::grid::{build_grid, Domain, SpaceGrid, TimeGrid};
use crate::solver::{ProblemSpec, SolverConfig, Source};

/// Named initial data and sources.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Zero,
    One,
    /// Smooth bump of height 1 centered in the domain.
    Bump,
    /// First Dirichlet eigenfunction of the domain's bounding box (radial: `cos(πr/2R)`).
    Sine,
    /// `1 − d²` clamped at zero, `d` the normalized distance to the center.
    Paraboloid,
    /// Positive bump on one side, negative bump on the other.
    TwoBumps,
}

pub const PRESETS: [&str; 6] = ["zero", "one", "bump", "sine", "paraboloid", "two_bumps"];

impl FromStr for Preset {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "zero" => Preset::Zero,
            "one" => Preset::One,
            "bump" => Preset::Bump,
            "sine" => Preset::Sine,
            "paraboloid" => Preset::Paraboloid,
            "two_bumps" => Preset::TwoBumps,
            other => return Err(config(format!("unknown preset \"{other}\"; expected one of {}", PRESETS.join(", ")))),
        })
    }
}

fn bump_profile(s: f64) -> f64 {
    if s < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

impl Preset {
    pub fn is_zero(self) -> bool {
        self == Preset::Zero
    }

    /// Node values on `grid`.
    pub fn values(self, grid: &SpaceGrid) -> Vec<f64> {
        (0..grid.len()).map(|j| self.at(grid.domain(), grid.coord(j))).collect()
    }

    fn at(self, domain: &Domain, c: &[f64]) -> f64 {
        // normalized coordinates in [−1, 1] per axis (radial: r/R ∈ [0, 1])
        let y: Vec<f64> = match *domain {
            Domain::Interval { lo, hi } => vec![(2.0 * c[0] - lo - hi) / (hi - lo)],
            Domain::Rectangle { lo, hi } => (0..2).map(|a| (2.0 * c[a] - lo[a] - hi[a]) / (hi[a] - lo[a])).collect(),
            Domain::RadialBall { radius, .. } => vec![c[0] / radius],
        };
        let d = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let radial = domain.is_radial();
        match self {
            Preset::Zero => 0.0,
            Preset::One => 1.0,
            Preset::Bump => bump_profile(d / 0.5),
            Preset::Sine => {
                if radial {
                    (0.5 * PI * y[0]).cos()
                } else {
                    y.iter().map(|v| (0.5 * PI * v).cos()).product()
                }
            }
            Preset::Paraboloid => (1.0 - d * d).max(0.0),
            Preset::TwoBumps => {
                if radial {
                    bump_profile(y[0] / 0.35) - bump_profile((y[0] - 0.65) / 0.25)
                } else {
                    let shifted = |x0: f64| {
                        let mut s = (y[0] - x0) * (y[0] - x0);
                        s += y[1..].iter().map(|v| v * v).sum::<f64>();
                        s.sqrt()
                    };
                    bump_profile(shifted(-0.5) / 0.4) - bump_profile(shifted(0.5) / 0.4)
                }
            }
        }
    }
}

/// Everything needed to build a [`ProblemSpec`] at any resolution.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub domain: Domain,
    pub resolution: usize,
    pub horizon: f64,
    pub steps: usize,
    pub nu: f64,
    pub drift: DriftSpec,
    pub initial: Preset,
    pub source: Preset,
    pub solver: SolverConfig,
}

impl Scenario {
    pub fn grid(&self) -> Result<Arc<SpaceGrid>> {
        Ok(Arc::new(build_grid(&self.domain, self.resolution)?))
    }

    pub fn time(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.steps)
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let grid = self.grid()?;
        self.problem_on(grid)
    }

    /// The problem on a given grid of the same domain.
    pub fn problem_on(&self, grid: Arc<SpaceGrid>) -> Result<ProblemSpec> {
        let u0 = self.initial.values(&grid);
        let source = if self.source.is_zero() { Source::Zero } else { Source::Steady(self.source.values(&grid)) };
        ProblemSpec::new(grid, self.time()?, self.nu, self.drift.clone(), u0, source)
    }

    /// Twice the spatial resolution and twice the number of steps.
    pub fn refined(&self) -> Self {
        Self { resolution: 2 * self.resolution, steps: 2 * self.steps, ..self.clone() }
    }

    /// Spatial and temporal resolution multiplied by `factor`.
    pub fn scaled_resolution(&self, factor: usize) -> Self {
        Self { resolution: factor * self.resolution, steps: factor * self.steps, ..self.clone() }
    }

    pub fn with_drift(&self, drift: DriftSpec) -> Self {
        Self { drift, ..self.clone() }
    }

    pub fn with_data(&self, initial: Preset, source: Preset) -> Self {
        Self { initial, source, ..self.clone() }
    }
}
