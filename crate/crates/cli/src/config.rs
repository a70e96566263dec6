//! JSON run configuration: parsing, validation and default resolution.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use driftlab_core::harness::{Preset, Scenario, Tolerances, EXPERIMENTS};
use driftlab_core::{mollify, Domain, DriftSpec, MollifierConfig, SampledDrift, SolverConfig, SpaceGrid, TimeGrid};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::CliError;

/// One experiment invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physics: Option<PhysicsConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Interval {
        bounds: [f64; 2],
        resolution: usize,
    },
    /// `bounds = [[x_lo, x_hi], [y_lo, y_hi]]`.
    Rectangle {
        bounds: [[f64; 2]; 2],
        resolution: usize,
    },
    /// Radially symmetric ball in `ℝⁿ`.
    Ball {
        n: usize,
        #[serde(default = "one")]
        radius: f64,
        resolution: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(default = "one")]
    pub nu: f64,
    pub drift: DriftConfig,
    #[serde(default = "zero_preset")]
    pub u0: Preset,
    #[serde(default = "zero_preset")]
    pub f: Preset,
}

/// Drift catalog entry; the dimension is taken from the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftConfig {
    Constant {
        value: Vec<f64>,
    },
    /// `scale · x · (1 + perturbation · |x|)`.
    Linear {
        scale: f64,
        #[serde(default)]
        perturbation: f64,
    },
    RadialPower {
        alpha: f64,
    },
    Nonuniqueness {},
    Instability {
        epsilon: f64,
    },
    /// CSV written by the sampled-drift exporter, relative to the config file.
    Sampled {
        path: PathBuf,
    },
    Mollified {
        inner: Box<DriftConfig>,
        scale: f64,
    },
}

/// Experiment-specific parameters; absent entries are filled with defaults
/// before the run and echoed into the report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Integrability exponent of `f` in the maximum principle.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    /// Mollifier scales of the stability sweep, strictly decreasing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_perturbation: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Dimensions of the non-uniqueness check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Dimension of the heat-kernel and instability checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

fn zero_preset() -> Preset {
    Preset::Zero
}

/// Experiments that solve the PDE and need domain, time and physics blocks.
pub fn needs_scenario(experiment: &str) -> bool {
    !matches!(experiment, "nonuniqueness" | "heat_kernel" | "instability")
}

impl DomainConfig {
    pub fn domain(&self) -> Result<Domain, CliError> {
        Ok(match *self {
            DomainConfig::Interval { bounds, .. } => Domain::interval(bounds[0], bounds[1])?,
            DomainConfig::Rectangle { bounds, .. } => {
                Domain::rectangle([bounds[0][0], bounds[1][0]], [bounds[0][1], bounds[1][1]])?
            }
            DomainConfig::Ball { n, radius, .. } => Domain::radial_ball(n, radius)?,
        })
    }

    pub fn resolution(&self) -> usize {
        match *self {
            DomainConfig::Interval { resolution, .. }
            | DomainConfig::Rectangle { resolution, .. }
            | DomainConfig::Ball { resolution, .. } => resolution,
        }
    }
}

impl DriftConfig {
    /// Builds the drift for `grid`; sampled files are resolved against `base_dir`.
    pub fn build(&self, grid: &Arc<SpaceGrid>, time: &TimeGrid, base_dir: &Path) -> Result<DriftSpec, CliError> {
        let dim = grid.domain().dim();
        Ok(match self {
            DriftConfig::Constant { value } => DriftSpec::Constant { value: value.clone() },
            DriftConfig::Linear { scale, perturbation } => {
                DriftSpec::Linear { scale: *scale, perturbation: *perturbation }
            }
            DriftConfig::RadialPower { alpha } => DriftSpec::RadialPower { dim, alpha: *alpha },
            DriftConfig::Nonuniqueness {} => DriftSpec::Nonuniqueness { dim },
            DriftConfig::Instability { epsilon } => DriftSpec::Instability { dim, epsilon: *epsilon },
            DriftConfig::Sampled { path } => {
                let full = base_dir.join(path);
                let file = File::open(&full).map_err(|e| CliError::Io { path: full.clone(), source: e })?;
                let sampled = SampledDrift::read_csv(BufReader::new(file), grid.clone(), time)?;
                DriftSpec::Sampled(Arc::new(sampled))
            }
            DriftConfig::Mollified { inner, scale } => {
                let inner = inner.build(grid, time, base_dir)?;
                mollify(&inner, &MollifierConfig::new(*scale)?, grid, time)?
            }
        })
    }
}

impl RunConfig {
    /// Parses JSON text; syntax errors and unknown keys carry line numbers.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("{e}")))
    }

    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        let cfg = Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the experiment name, required blocks and tolerance signs.
    pub fn validate(&self) -> Result<(), CliError> {
        if !EXPERIMENTS.contains(&self.experiment.as_str()) {
            return Err(CliError::Config(format!(
                "unknown experiment \"{}\"; expected one of {}",
                self.experiment,
                EXPERIMENTS.join(", ")
            )));
        }
        if needs_scenario(&self.experiment) {
            for (name, present) in
                [("domain", self.domain.is_some()), ("time", self.time.is_some()), ("physics", self.physics.is_some())]
            {
                if !present {
                    return Err(CliError::Config(format!(
                        "experiment \"{}\" needs a \"{name}\" block",
                        self.experiment
                    )));
                }
            }
        }
        let tol = serde_json::to_value(&self.tolerances).expect("tolerances serialize");
        for (key, value) in tol.as_object().expect("tolerances are an object") {
            if let Some(v) = value.as_f64() {
                let ok = if key == "nonspectral" { v >= 0.0 } else { v > 0.0 };
                if !ok || !v.is_finite() {
                    return Err(CliError::Config(format!("tolerance \"{key}\" must be positive and finite, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Copy with every parameter the experiment uses set to its effective value.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        let p = &mut c.params;
        let horizon = self.time.as_ref().map_or(1.0, |t| t.horizon);
        let n = self.domain.as_ref().and_then(|d| d.domain().ok()).map_or(1, |d| d.dim());
        match self.experiment.as_str() {
            "l1_decay" => {
                p.t1.get_or_insert(0.0);
                p.t2.get_or_insert(horizon);
            }
            "max_principle" => {
                p.s.get_or_insert(n as f64 + 2.0);
            }
            "stability_sweep" => {
                p.scales.get_or_insert_with(|| vec![0.2, 0.1, 0.05, 0.025]);
                p.data_perturbation.get_or_insert(false);
            }
            "duality" => {
                p.probes.get_or_insert(3);
                p.seed.get_or_insert(0);
            }
            "nonuniqueness" => {
                p.dims.get_or_insert_with(|| vec![2, 3]);
                p.samples.get_or_insert(100);
                p.seed.get_or_insert(0);
            }
            "heat_kernel" => {
                p.n.get_or_insert(2);
                p.alphas.get_or_insert_with(|| vec![0.0, 0.2]);
                p.times.get_or_insert_with(|| vec![0.125, 0.25, 0.5]);
            }
            "instability" => {
                p.n.get_or_insert(2);
                p.epsilons.get_or_insert_with(|| vec![0.5, 0.25, 0.1]);
                p.a.get_or_insert(1.5);
            }
            _ => {}
        }
        c
    }

    /// The PDE instance described by the domain, time and physics blocks.
    pub fn scenario(&self, base_dir: &Path) -> Result<Scenario, CliError> {
        let missing = |b: &str| CliError::Config(format!("missing \"{b}\" block"));
        let d = self.domain.as_ref().ok_or_else(|| missing("domain"))?;
        let t = self.time.as_ref().ok_or_else(|| missing("time"))?;
        let ph = self.physics.as_ref().ok_or_else(|| missing("physics"))?;
        let domain = d.domain()?;
        let grid = Arc::new(SpaceGrid::new(&domain, d.resolution())?);
        let time = TimeGrid::new(t.horizon, t.steps)?;
        let drift = ph.drift.build(&grid, &time, base_dir)?;
        drift.check_compatible(&grid)?;
        Ok(Scenario {
            domain,
            resolution: d.resolution(),
            horizon: t.horizon,
            steps: t.steps,
            nu: ph.nu,
            drift,
            initial: ph.u0,
            source: ph.f,
            solver: self.solver,
        })
    }

    /// Reference configuration of each experiment, as run by `--suite`.
    pub fn builtin(experiment: &str) -> Option<Self> {
        let interval = |n: usize, t: f64, k: usize, u0: &str, f: &str| {
            json!({
                "domain": {"kind": "interval", "bounds": [0.0, 1.0], "resolution": n},
                "time": {"T": t, "steps": k},
                "physics": {"nu": 1.0, "drift": {"kind": "linear", "scale": -1.0}, "u0": u0, "f": f},
            })
        };
        let mut v = match experiment {
            "energy" => interval(200, 1.0, 400, "bump", "one"),
            "l1_decay" => {
                let mut v = interval(200, 1.0, 400, "two_bumps", "zero");
                v["params"] = json!({"t1": 0.25, "t2": 0.75});
                v
            }
            "max_principle" => interval(200, 1.0, 400, "bump", "one"),
            "stability_sweep" => json!({
                "domain": {"kind": "interval", "bounds": [-1.0, 1.0], "resolution": 400},
                "time": {"T": 0.5, "steps": 200},
                "physics": {"drift": {"kind": "linear", "scale": -1.0, "perturbation": 0.5}, "u0": "bump"},
            }),
            "duality" => interval(200, 1.0, 200, "bump", "one"),
            "uniqueness" => interval(80, 1.0, 80, "bump", "zero"),
            "nonuniqueness" | "heat_kernel" | "instability" => json!({}),
            _ => return None,
        };
        v["experiment"] = json!(experiment);
        Some(serde_json::from_value(v).expect("builtin configurations are valid"))
    }
}
