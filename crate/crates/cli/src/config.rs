//! TOML run configuration: a serializable mirror of the core scenario plus
//! the sweep section.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use kssm_core::diagnostics::ClassifierConfig;
use kssm_core::grid::Grid;
use kssm_core::model::{InitialConditionSpec, MotilitySpec, SourceSpec};
use kssm_core::scenario::Scenario;
use kssm_core::stepper::StepConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    /// Domain length per axis.
    pub extent: Vec<f64>,
    /// Cells per axis.
    pub cells: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> anyhow::Result<Grid<f64>> {
        let grid = match self.dim {
            1 => {
                if self.extent.len() != 1 || self.cells.len() != 1 {
                    bail!("1D grids take one extent and one cell count");
                }
                Grid::new_1d(self.extent[0], self.cells[0])?
            }
            2 => {
                if self.extent.len() != 2 || self.cells.len() != 2 {
                    bail!("2D grids take two extents and two cell counts");
                }
                Grid::new_2d(self.extent[0], self.extent[1], self.cells[0], self.cells[1])?
            }
            d => bail!("unsupported dimension {d}"),
        };
        Ok(grid)
    }

    pub fn from_grid(grid: &Grid<f64>) -> Self {
        let dim = grid.dim();
        Self {
            dim,
            extent: grid.extents()[..dim].to_vec(),
            cells: grid.cells()[..dim].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub comparison: bool,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

/// One sweep axis: a parameter name and the values it takes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// One of: `lambda`, `alpha`, `mu`, `ic_amplitude`, `gamma_chi`,
    /// `gamma_k`, `gamma_c`, `gamma_a`, `gamma_b`.
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axes: Vec<SweepAxis>,
    /// Safety cap on the total number of runs.
    #[serde(default = "default_max_runs")]
    pub max_runs: usize,
}

fn default_max_runs() -> usize {
    256
}

/// Full run configuration as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub grid: GridSpec,
    pub motility: MotilitySpec<f64>,
    pub source: SourceSpec<f64>,
    pub initial: InitialConditionSpec<f64>,
    #[serde(default = "StepConfig::default")]
    pub step: StepConfig<f64>,
    #[serde(default = "ClassifierConfig::default")]
    pub classifier: ClassifierConfig<f64>,
    pub run: RunSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing run config")?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn to_scenario(&self) -> anyhow::Result<Scenario<f64>> {
        let scn = Scenario {
            name: self.name.clone().unwrap_or_else(|| "custom".into()),
            grid: self.grid.build()?,
            motility: self.motility,
            source: self.source,
            initial: self.initial.clone(),
            step: self.step,
            classifier: self.classifier,
            horizon: self.run.horizon,
            seed: self.run.seed,
            comparison: self.run.comparison,
            snapshot_times: self.run.snapshot_times.clone(),
        };
        scn.validate()?;
        Ok(scn)
    }

    pub fn from_scenario(scn: &Scenario<f64>) -> Self {
        Self {
            name: Some(scn.name.clone()),
            grid: GridSpec::from_grid(&scn.grid),
            motility: scn.motility,
            source: scn.source,
            initial: scn.initial.clone(),
            step: scn.step,
            classifier: scn.classifier,
            run: RunSection {
                horizon: scn.horizon,
                seed: scn.seed,
                comparison: scn.comparison,
                snapshot_times: scn.snapshot_times.clone(),
            },
            sweep: None,
        }
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}

/// Apply one sweep parameter to a scenario.
pub fn apply_sweep_param(
    scn: &mut Scenario<f64>,
    param: &str,
    value: f64,
) -> anyhow::Result<()> {
    match param {
        "lambda" => {
            // lambda = 0 degenerates to the source-free system.
            scn.source = if value == 0.0 {
                SourceSpec::Zero
            } else {
                match scn.source {
                    SourceSpec::LogPower { alpha, mu, .. } => SourceSpec::LogPower {
                        lambda: value,
                        alpha,
                        mu,
                    },
                    _ => SourceSpec::LogPower {
                        lambda: value,
                        alpha: 1.0,
                        mu: 0.0,
                    },
                }
            };
        }
        "alpha" => match &mut scn.source {
            SourceSpec::LogPower { alpha, .. } => *alpha = value,
            other => bail!("alpha sweep needs a log_power source, got {other:?}"),
        },
        "mu" => match &mut scn.source {
            SourceSpec::LogPower { mu, .. } => *mu = value,
            SourceSpec::Logistic { mu } => *mu = value,
            other => bail!("mu sweep does not apply to {other:?}"),
        },
        "ic_amplitude" => match &mut scn.initial {
            InitialConditionSpec::GaussianBump { amplitude, .. } => *amplitude = value,
            InitialConditionSpec::Constant { value: v } => *v = value,
            InitialConditionSpec::PerturbedConstant { amplitude, .. } => *amplitude = value,
        },
        "gamma_chi" => match &mut scn.motility {
            MotilitySpec::ExpDecay { chi } => *chi = value,
            other => bail!("gamma_chi sweep needs exp_decay motility, got {other:?}"),
        },
        "gamma_k" => match &mut scn.motility {
            MotilitySpec::PowerDecay { k } => *k = value,
            other => bail!("gamma_k sweep needs power_decay motility, got {other:?}"),
        },
        "gamma_c" => match &mut scn.motility {
            MotilitySpec::LogGrowth { c } => *c = value,
            MotilitySpec::Constant { c } => *c = value,
            other => bail!("gamma_c sweep does not apply to {other:?}"),
        },
        "gamma_a" => match &mut scn.motility {
            MotilitySpec::AffineOsc { a, .. } => *a = value,
            other => bail!("gamma_a sweep needs affine_osc motility, got {other:?}"),
        },
        "gamma_b" => match &mut scn.motility {
            MotilitySpec::AffineOsc { b, .. } => *b = value,
            other => bail!("gamma_b sweep needs affine_osc motility, got {other:?}"),
        },
        other => bail!("unknown sweep parameter {other:?}"),
    }
    Ok(())
}
