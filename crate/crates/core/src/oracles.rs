//! Closed-form reference quantities.
//!
//! Everything here is exact to floating rounding: no iteration and no
//! randomness, except the explicitly empirical estimators at the bottom
//! ([`estimate_noise_level`], [`localization_study`]) which take a seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PaError, Result};
use crate::seed;
use crate::simulate::{gen_loadings, localization, simulate_spiked, LoadingSpec, SpikedModelSpec};
use crate::spectra::operator_norm;

const UNIT_TOLERANCE: f64 = 1e-10;

fn lp_pow(v: &[f64], k: i32) -> f64 {
    v.iter().map(|x| x.abs().powi(k)).sum()
}

fn check_unit(v: &[f64]) -> Result<()> {
    let norm = lp_pow(v, 2).sqrt();
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(PaError::invalid(format!("vector must have unit norm, got {norm}")));
    }
    Ok(())
}

/// Trace-moment constant `C_k(v)` for `k` in {2, 3, 4}:
///
/// * `C_2 = 1/(n-1) + |v|_4^4`
/// * `C_3 = 1/(n-1)^2 + 9/n |v|_4^4 + |v|_6^6`
/// * `C_4 = 1/(n-1)^3 + 4/(n-1)^2 |v|_4^4 + 12/n (|v|_4^8 + |v|_6^6) + |v|_8^8`
pub fn c_k(v: &[f64], n: usize, k: u32) -> Result<f64> {
    check_unit(v)?;
    if n < 2 {
        return Err(PaError::invalid(format!("C_k needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    let m = nf - 1.0;
    let v4 = lp_pow(v, 4);
    match k {
        2 => Ok(1.0 / m + v4),
        3 => Ok(1.0 / (m * m) + 9.0 / nf * v4 + lp_pow(v, 6)),
        4 => Ok(1.0 / (m * m * m) + 4.0 / (m * m) * v4 + 12.0 / nf * (v4 * v4 + lp_pow(v, 6)) + lp_pow(v, 8)),
        _ => Err(PaError::invalid(format!("moment order must be 2, 3 or 4, got {k}"))),
    }
}

/// `A_nk = sum_i theta_i * C_k(v_i)^{1/(2k)}`.
pub fn a_nk(strengths: &[f64], vectors: &[Vec<f64>], n: usize, k: u32) -> Result<f64> {
    if strengths.len() != vectors.len() {
        return Err(PaError::invalid("need one vector per spike strength"));
    }
    strengths.iter().zip(vectors).try_fold(0.0, |acc, (&theta, v)| {
        if theta.is_nan() || theta < 0.0 {
            return Err(PaError::invalid(format!("spike strengths must be >= 0, got {theta}")));
        }
        Ok(acc + theta * c_k(v, n, k)?.powf(1.0 / (2.0 * k as f64)))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub k: u32,
    /// `C_k(v_i)` per spike.
    pub c_k: Vec<f64>,
    pub a_nk: f64,
    pub n: usize,
    pub strengths: Vec<f64>,
    /// Euclidean norms of the supplied vectors.
    pub v_norms: Vec<f64>,
}

pub fn bound_report(strengths: &[f64], vectors: &[Vec<f64>], n: usize, k: u32) -> Result<BoundReport> {
    Ok(BoundReport {
        k,
        c_k: vectors.iter().map(|v| c_k(v, n, k)).collect::<Result<_>>()?,
        a_nk: a_nk(strengths, vectors, n, k)?,
        n,
        strengths: strengths.to_vec(),
        v_norms: vectors.iter().map(|v| lp_pow(v, 2).sqrt()).collect(),
    })
}

/// Detection threshold `sqrt(gamma)` for identity noise covariance, as
/// stated alongside the spiked-model corollary.
pub fn bbp_threshold_identity_noise(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(gamma.sqrt())
}

/// Classical spiked-SVD threshold `gamma^{1/4}` under the `n^{-1/2} Y` noise
/// scaling. Reported next to [`bbp_threshold_identity_noise`]; neither is
/// asserted against simulation.
pub fn bbp_threshold_classical(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(gamma.powf(0.25))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(PaError::invalid(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

/// Bulk edge `1 + sqrt(gamma)` of `n^{-1/2} Y` with identity variance
/// profile. A derived reference, validated by simulation; no closed form is
/// available for general variance profiles.
pub fn noise_edge_identity(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(1.0 + gamma.sqrt())
}

/// Heuristic size of a permuted signal: `theta_total * (n^{-1/2} + p^{-1/2})`.
pub fn permuted_norm_heuristic(theta_total: f64, n: usize, p: usize) -> Result<f64> {
    if theta_total.is_nan() || theta_total < 0.0 {
        return Err(PaError::invalid("total strength must be >= 0"));
    }
    Ok(theta_total * shadowing_ratio(n, p)?)
}

/// Relative strength below which a factor is shadowed: `n^{-1/2} + p^{-1/2}`.
pub fn shadowing_ratio(n: usize, p: usize) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(PaError::invalid("shadowing ratio needs n, p >= 1"));
    }
    Ok((n as f64).powf(-0.5) + (p as f64).powf(-0.5))
}

/// Localization `(9/cp)^{1/4}` quoted for sparse Gaussian loadings.
pub fn expected_localization_quoted(support: f64) -> f64 {
    (9.0 / support).powf(0.25)
}

/// Localization `(3/cp)^{1/4}` from `E g^4 = 3` for Gaussian entries.
pub fn expected_localization_moment(support: f64) -> f64 {
    (3.0 / support).powf(0.25)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub support: usize,
    pub draws: usize,
    pub empirical_mean: f64,
    pub std_error: f64,
    pub quoted: f64,
    pub moment: f64,
}

/// Monte Carlo mean of `|lambda|_4/|lambda|_2` over sparse Gaussian loadings
/// with `support` nonzero coordinates.
pub fn localization_study(support: usize, draws: usize, master_seed: u64) -> Result<LocalizationReport> {
    if support == 0 || draws < 2 {
        return Err(PaError::invalid("localization study needs support >= 1 and draws >= 2"));
    }
    let spec = LoadingSpec::dense(support, 1, 1.0);
    let values = (0..draws)
        .into_par_iter()
        .map(|d| {
            let l = gen_loadings(&spec, &mut seed::stream(master_seed, &[d as u64]))?;
            localization(l.as_slice())
        })
        .collect::<Result<Vec<_>>>()?;
    let (mean, se) = mean_and_se(&values);
    Ok(LocalizationReport {
        support,
        draws,
        empirical_mean: mean,
        std_error: se,
        quoted: expected_localization_quoted(support as f64),
        moment: expected_localization_moment(support as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevelEstimate {
    pub median: f64,
    pub norms: Vec<f64>,
}

/// Empirical noise level: median operator norm of the noise part of `spec`
/// (spikes dropped) over `replicates` draws.
pub fn estimate_noise_level(spec: &SpikedModelSpec, replicates: usize, master_seed: u64) -> Result<NoiseLevelEstimate> {
    if replicates == 0 {
        return Err(PaError::invalid("need at least one replicate"));
    }
    let noise_only = SpikedModelSpec {
        strengths: Vec::new(),
        directions: crate::simulate::Directions::RandomDelocalized,
        ..spec.clone()
    };
    let norms = (0..replicates)
        .into_par_iter()
        .map(|r| operator_norm(&simulate_spiked(&noise_only, &mut seed::stream(master_seed, &[r as u64]))?))
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = norms.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    Ok(NoiseLevelEstimate { median, norms })
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
