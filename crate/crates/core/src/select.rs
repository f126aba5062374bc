//! Parallel Analysis.
//!
//! The observed singular values of `X` are compared, rank by rank, against a
//! percentile of the singular values of `K` column-permuted copies `X_pi`. A
//! rank is selected when the observed value is strictly larger than its
//! threshold; in stepwise mode selection stops at the first rank that fails.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PaError, Result};
use crate::permute::PermutationArray;
use crate::seed;
use crate::spectra::{check_finite, singular_values, SingularSpectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PaConfig {
    pub num_permutations: usize,
    /// Percentile in (0, 100]; 100 compares against the maximum.
    pub percentile: f64,
    /// Largest rank considered; `None` means `min(n, p)`.
    pub max_rank: Option<usize>,
    pub stepwise: bool,
    pub demean_columns: bool,
    pub seed: u64,
}

impl Default for PaConfig {
    fn default() -> Self {
        Self {
            num_permutations: 19,
            percentile: 100.0,
            max_rank: None,
            stepwise: true,
            demean_columns: false,
            seed: 0,
        }
    }
}

impl PaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_permutations == 0 {
            return Err(PaError::invalid("num_permutations must be at least 1"));
        }
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(PaError::invalid(format!(
                "percentile must lie in (0, 100], got {}",
                self.percentile
            )));
        }
        if self.max_rank == Some(0) {
            return Err(PaError::invalid("max_rank must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected_rank: usize,
    /// Per-rank selection flags (observed > threshold), for ranks `1..=max_rank`.
    pub selected: Vec<bool>,
    pub observed: SingularSpectrum,
    pub thresholds: Vec<f64>,
    pub perm_spectra: Vec<SingularSpectrum>,
    /// Effective rank cap after clamping to `min(n, p)`.
    pub max_rank: usize,
    pub config: PaConfig,
    pub seed: u64,
}

/// Smallest value `v` such that at least `ceil(q * len / 100)` values are `<= v`.
pub fn percentile_nearest_rank(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(PaError::invalid("percentile of an empty list"));
    }
    if !(q > 0.0 && q <= 100.0) {
        return Err(PaError::invalid(format!("percentile must lie in (0, 100], got {q}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64) / 100.0).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Centers each column at mean zero.
pub fn demean(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    if x.nrows() == 0 {
        return out;
    }
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / col.len() as f64;
        col.add_scalar_mut(-mean);
    }
    out
}

pub fn pa_select(x: &DMatrix<f64>, cfg: &PaConfig) -> Result<SelectionResult> {
    cfg.validate()?;
    let (n, p) = x.shape();
    if n < 2 {
        return Err(PaError::invalid(format!(
            "parallel analysis needs at least 2 rows, got {n}"
        )));
    }
    if p == 0 {
        return Err(PaError::invalid("parallel analysis needs at least 1 column"));
    }
    check_finite(x)?;

    let centered;
    let data = if cfg.demean_columns {
        centered = demean(x);
        &centered
    } else {
        x
    };

    let max_rank = cfg.max_rank.unwrap_or(usize::MAX).min(n.min(p));
    let observed = singular_values(data, Some(max_rank))?;

    // Permutation m draws from its own stream; collecting an indexed parallel
    // iterator keeps the output in permutation order.
    let perm_spectra = (0..cfg.num_permutations)
        .into_par_iter()
        .map(|m| {
            let mut rng = seed::stream(cfg.seed, &[m as u64]);
            let pi = PermutationArray::sample_uniform(n, p, &mut rng)?;
            singular_values(&pi.apply(data)?, Some(max_rank))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut column = Vec::with_capacity(perm_spectra.len());
    let thresholds = (0..max_rank)
        .map(|k| {
            column.clear();
            column.extend(perm_spectra.iter().map(|s| s.values[k]));
            percentile_nearest_rank(&column, cfg.percentile)
        })
        .collect::<Result<Vec<_>>>()?;

    let selected: Vec<bool> = observed
        .values
        .iter()
        .zip(&thresholds)
        .map(|(obs, thr)| obs > thr)
        .collect();
    let selected_rank = if cfg.stepwise {
        selected.iter().take_while(|&&s| s).count()
    } else {
        selected.iter().filter(|&&s| s).count()
    };

    Ok(SelectionResult {
        selected_rank,
        selected,
        observed,
        thresholds,
        perm_spectra,
        max_rank,
        config: cfg.clone(),
        seed: cfg.seed,
    })
}
