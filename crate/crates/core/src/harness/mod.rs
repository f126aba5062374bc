//! Monte Carlo sweeps over factor-model parameters.
//!
//! A sweep varies one parameter of a base [`FactorModelSpec`] over a grid.
//! For every grid point and replicate it simulates a matrix, runs
//! [`pa_select`] and records the selected rank. Replicate `r` of point `i`
//! draws from streams derived from `(seed, i, r)` only, so results do not
//! depend on thread count or scheduling.

mod io;
mod presets;
mod svg;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PaError, Result};
use crate::seed;
use crate::select::{pa_select, PaConfig};
use crate::simulate::{simulate_factor_model, FactorModelSpec, Loadings};

pub use io::{emit_selection, emit_sweep, load_matrix_csv, replicate_csv, selection_csv, sweep_csv, EmittedFiles};
pub use presets::{preset, presets, Preset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    SignalStrength,
    Sparsity,
    Dimension,
    Shadowing,
    Custom,
}

impl SweepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepKind::SignalStrength => "signal_strength",
            SweepKind::Sparsity => "sparsity",
            SweepKind::Dimension => "dimension",
            SweepKind::Shadowing => "shadowing",
            SweepKind::Custom => "custom",
        }
    }

    /// Parameter each named study sweeps; `None` for `custom`.
    pub fn default_target(&self) -> Option<SweepTarget> {
        match self {
            SweepKind::SignalStrength => Some(SweepTarget::Strength { block: 0 }),
            SweepKind::Sparsity => Some(SweepTarget::Sparsity { block: 0 }),
            SweepKind::Dimension => Some(SweepTarget::SampleSize),
            SweepKind::Shadowing => Some(SweepTarget::Strength { block: 1 }),
            SweepKind::Custom => None,
        }
    }
}

/// What a grid value overwrites in the base model. Blocks index the random
/// loading blocks of the base spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepTarget {
    Strength { block: usize },
    Sparsity { block: usize },
    SampleSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub name: SweepKind,
    /// Overrides the parameter implied by `name`; required for `custom`.
    #[serde(default)]
    pub target: Option<SweepTarget>,
    pub grid: Vec<f64>,
    pub replicates: usize,
    pub base: FactorModelSpec,
    #[serde(default)]
    pub pa: PaConfig,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the CLI falls back to its default when absent.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Read every loading-block strength as a multiple of `sqrt(p / n)`,
    /// evaluated after the grid value is applied.
    #[serde(default)]
    pub strengths_relative_to_sqrt_gamma: bool,
    /// File stem for emitted outputs; defaults to `name`.
    #[serde(default)]
    pub label: Option<String>,
}

impl SweepSpec {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.name.as_str())
    }

    pub fn target(&self) -> Result<SweepTarget> {
        self.target
            .or_else(|| self.name.default_target())
            .ok_or_else(|| PaError::Config("custom sweeps need a target".into()))
    }

    /// Checks the grid, replicate count and every per-point model.
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(PaError::Config("sweep grid is empty".into()));
        }
        if self.replicates == 0 {
            return Err(PaError::Config("replicates must be at least 1".into()));
        }
        if let Some(v) = self.grid.iter().find(|v| !v.is_finite()) {
            return Err(PaError::Config(format!("grid value {v} is not finite")));
        }
        if let Some(label) = &self.label {
            if label.is_empty() || label.contains(['/', '\\']) {
                return Err(PaError::Config(format!("label {label:?} is not a plain file stem")));
            }
        }
        self.pa.validate()?;
        for &param in &self.grid {
            self.model_at(param)?;
        }
        Ok(())
    }

    /// Base model with the grid value applied and relative strengths resolved.
    pub fn model_at(&self, param: f64) -> Result<FactorModelSpec> {
        let mut model = self.base.clone();
        match self.target()? {
            SweepTarget::Strength { block } => block_mut(&mut model, block)?.strength = param,
            SweepTarget::Sparsity { block } => block_mut(&mut model, block)?.sparsity = param,
            SweepTarget::SampleSize => {
                if !(param >= 2.0 && param.fract() == 0.0) {
                    return Err(PaError::Config(format!(
                        "sample size must be an integer >= 2, got {param}"
                    )));
                }
                model.n = param as usize;
            }
        }
        if self.strengths_relative_to_sqrt_gamma {
            let scale = (model.p as f64 / model.n as f64).sqrt();
            match &mut model.loadings {
                Loadings::Random(blocks) => blocks.iter_mut().for_each(|b| b.strength *= scale),
                Loadings::Explicit(_) => {
                    return Err(PaError::Config(
                        "relative strengths need random loading blocks".into(),
                    ))
                }
            }
        }
        model.validate()?;
        Ok(model)
    }
}

fn block_mut(model: &mut FactorModelSpec, block: usize) -> Result<&mut crate::simulate::LoadingSpec> {
    match &mut model.loadings {
        Loadings::Random(blocks) => {
            let count = blocks.len();
            blocks.get_mut(block).ok_or_else(|| {
                PaError::Config(format!("sweep targets loading block {block}, base has {count}"))
            })
        }
        Loadings::Explicit(_) => Err(PaError::Config(
            "strength and sparsity sweeps need random loading blocks".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: f64,
    pub mean_rank: f64,
    /// Sample standard deviation (divisor `replicates - 1`; 0 for one replicate).
    pub sd_rank: f64,
    pub ranks: Vec<usize>,
}

impl SweepPoint {
    pub fn from_ranks(param: f64, ranks: Vec<usize>) -> Self {
        let (mean_rank, sd_rank) = mean_sd(&ranks);
        Self {
            param,
            mean_rank,
            sd_rank,
            ranks,
        }
    }

    /// Fraction of replicates that selected exactly `rank`.
    pub fn fraction_equal(&self, rank: usize) -> f64 {
        self.ranks.iter().filter(|&&r| r == rank).count() as f64 / self.ranks.len() as f64
    }
}

/// Mean and sample SD, summed in index order.
pub fn mean_sd(ranks: &[usize]) -> (f64, f64) {
    if ranks.is_empty() {
        return (0.0, 0.0);
    }
    let n = ranks.len() as f64;
    let mean = ranks.iter().map(|&r| r as f64).sum::<f64>() / n;
    if ranks.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = ranks.iter().map(|&r| (r as f64 - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub points: Vec<SweepPoint>,
    pub seed: u64,
    /// Not part of the deterministic outputs.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl SweepResult {
    pub fn point(&self, param: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|pt| pt.param == param)
    }
}

/// Seed of replicate `replicate` at grid point `point`.
pub fn replicate_seed(master: u64, point: usize, replicate: usize) -> u64 {
    seed::derive_seed(master, &[point as u64, replicate as u64])
}

/// Rank selected for one replicate: data from stream `(s, 0)`, permutations
/// seeded by `derive_seed(s, [1])`, where `s` is the replicate seed.
pub fn run_replicate(model: &FactorModelSpec, pa: &PaConfig, replicate_seed: u64) -> Result<usize> {
    let x = simulate_factor_model(model, &mut seed::stream(replicate_seed, &[0]))?;
    let cfg = PaConfig {
        seed: seed::derive_seed(replicate_seed, &[1]),
        ..pa.clone()
    };
    Ok(pa_select(&x, &cfg)?.selected_rank)
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let start = Instant::now();
    let models = spec
        .grid
        .iter()
        .map(|&param| spec.model_at(param))
        .collect::<Result<Vec<_>>>()?;
    let reps = spec.replicates;
    let ranks = (0..models.len() * reps)
        .into_par_iter()
        .map(|idx| {
            let (point, rep) = (idx / reps, idx % reps);
            run_replicate(&models[point], &spec.pa, replicate_seed(spec.seed, point, rep))
        })
        .collect::<Result<Vec<_>>>()?;
    let points = spec
        .grid
        .iter()
        .zip(ranks.chunks(reps))
        .map(|(&param, chunk)| SweepPoint::from_ranks(param, chunk.to_vec()))
        .collect();
    Ok(SweepResult {
        spec: spec.clone(),
        points,
        seed: spec.seed,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}
