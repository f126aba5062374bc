//! Monte Carlo and exhaustive checks of trace moments of permuted rank-one
//! matrices.
//!
//! For unit vectors `u` (with `sum(u) = 0`) and `v`, the random matrix
//! `A = (u v^T)_pi` has entries `A[(a, b)] = u[pi_b(a)] * v[b]`. This module
//! estimates `E tr((A^T A)^k)` for `k = 1..=4` and the entry moments
//! `E A_ij`, `E A_ij^2`, `E A_ij A_kj`, and compares them with the closed forms
//! in [`crate::oracles`].

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PaError, Result};
use crate::oracles;
use crate::permute::PermutationArray;
use crate::seed;

/// Number of standard errors allowed between an estimate and its bound.
pub const SE_MARGIN: f64 = 3.0;
/// Exhaustive enumeration is used automatically when `(n!)^p` is at most this.
pub const EXHAUSTIVE_LIMIT: u64 = 1_000_000;
pub const DEFAULT_REPLICATES: usize = 10_000;

const UNIT_TOLERANCE: f64 = 1e-10;
const CENTER_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub k: u32,
    pub estimate: f64,
    pub std_error: f64,
    /// Monte Carlo replicates, or the number of enumerated arrays.
    pub replicates: u64,
    /// `C_k(v)`; absent for `k = 1`, where the moment is exactly `|u|^2 |v|^2`.
    pub bound: Option<f64>,
    pub exhaustive: bool,
    pub n: usize,
    pub p: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryMoments {
    pub mean: f64,
    pub mean_se: f64,
    pub second: f64,
    pub second_se: f64,
    pub cross: f64,
    pub cross_se: f64,
    pub replicates: u64,
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub estimate: MomentEstimate,
    pub bound: f64,
    /// `bound - (estimate - SE_MARGIN * std_error)`; nonnegative on pass.
    pub slack: f64,
    pub pass: bool,
}

/// Closed forms `(E A_ij, E A_ij^2, E A_ij A_kj)` for `i != k`.
pub fn entry_moments_closed_form(n: usize, v_j: f64) -> (f64, f64, f64) {
    let nf = n as f64;
    (0.0, v_j * v_j / nf, -v_j * v_j / (nf * (nf - 1.0)))
}

/// `(n!)^p` if it fits in a `u64`.
pub fn enumeration_size(n: usize, p: usize) -> Option<u64> {
    let fact = (1..=n as u64).try_fold(1u64, |acc, i| acc.checked_mul(i))?;
    (0..p).try_fold(1u64, |acc, _| acc.checked_mul(fact))
}

pub fn exhaustive_feasible(n: usize, p: usize) -> bool {
    enumeration_size(n, p).is_some_and(|s| s <= EXHAUSTIVE_LIMIT)
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn validate(u: &[f64], v: &[f64], k: Option<u32>) -> Result<()> {
    if u.len() < 2 {
        return Err(PaError::invalid("u needs at least 2 entries"));
    }
    if v.is_empty() {
        return Err(PaError::invalid("v needs at least 1 entry"));
    }
    let nu = norm_sq(u).sqrt();
    if (nu - 1.0).abs() > UNIT_TOLERANCE {
        return Err(PaError::invalid(format!("u must have unit norm, got |u| = {nu}")));
    }
    let nv = norm_sq(v).sqrt();
    if (nv - 1.0).abs() > UNIT_TOLERANCE {
        return Err(PaError::invalid(format!("v must have unit norm, got |v| = {nv}")));
    }
    let total: f64 = u.iter().sum();
    if total.abs() > CENTER_TOLERANCE {
        return Err(PaError::invalid(format!("u must be orthogonal to the ones vector, got sum(u) = {total}")));
    }
    if let Some(k) = k {
        if !(1..=4).contains(&k) {
            return Err(PaError::invalid(format!("moment order must be in 1..=4, got {k}")));
        }
    }
    Ok(())
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut acc = Compensated::default();
    values.iter().for_each(|&x| acc.add(x));
    let mean = acc.value() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let mut sq = Compensated::default();
    values.iter().for_each(|&x| sq.add((x - mean) * (x - mean)));
    (mean, (sq.value() / (n - 1.0) / n).sqrt())
}

fn permuted_outer(u: &[f64], v: &[f64], perms: &[Vec<usize>]) -> DMatrix<f64> {
    DMatrix::from_fn(u.len(), v.len(), |a, b| u[perms[b][a]] * v[b])
}

/// `tr((A^T A)^k)` for each requested `k`, through the smaller Gram matrix.
fn trace_powers(a: &DMatrix<f64>, ks: &[u32]) -> Vec<f64> {
    // An explicit transpose followed by a plain product takes the blocked
    // gemm path; `tr_mul` does not and is several times slower here.
    let g = if a.ncols() <= a.nrows() { a.transpose() * a } else { a * a.transpose() };
    let g2 = ks.iter().any(|&k| k >= 3).then(|| &g * &g);
    ks.iter()
        .map(|&k| match k {
            1 => g.trace(),
            2 => g.norm_squared(),
            3 => g.component_mul(g2.as_ref().unwrap()).sum(),
            4 => g2.as_ref().unwrap().norm_squared(),
            _ => unreachable!("validated"),
        })
        .collect()
}

fn bound_for(v: &[f64], n: usize, k: u32) -> Result<Option<f64>> {
    if k == 1 {
        Ok(None)
    } else {
        oracles::c_k(v, n, k).map(Some)
    }
}

/// Single-order wrapper around [`trace_moments_mc`].
pub fn trace_moment_mc<R: RngCore + ?Sized>(u: &[f64], v: &[f64], k: u32, replicates: usize, rng: &mut R) -> Result<MomentEstimate> {
    Ok(trace_moments_mc(u, v, &[k], replicates, rng)?.remove(0))
}

/// Monte Carlo estimates of `E tr((A^T A)^k)` for several orders from the same
/// permutation draws. Replicate `r` uses its own stream derived from one draw
/// of `rng`, so results do not depend on the thread count.
///
/// For `k = 1` the trace equals `|u|^2 |v|^2` for every permutation, and that
/// value is returned with zero standard error.
pub fn trace_moments_mc<R: RngCore + ?Sized>(
    u: &[f64],
    v: &[f64],
    ks: &[u32],
    replicates: usize,
    rng: &mut R,
) -> Result<Vec<MomentEstimate>> {
    validate(u, v, None)?;
    for &k in ks {
        validate(u, v, Some(k))?;
    }
    if replicates == 0 {
        return Err(PaError::invalid("need at least one replicate"));
    }
    let (n, p) = (u.len(), v.len());
    let base = rng.next_u64();
    let random_ks: Vec<u32> = ks.iter().copied().filter(|&k| k > 1).collect();
    let samples: Vec<Vec<f64>> = if random_ks.is_empty() {
        Vec::new()
    } else {
        (0..replicates)
            .into_par_iter()
            .map(|r| {
                let mut stream = seed::stream(base, &[r as u64]);
                let pi = PermutationArray::sample_uniform(n, p, &mut stream)?;
                Ok(trace_powers(&permuted_outer(u, v, pi.columns()), &random_ks))
            })
            .collect::<Result<_>>()?
    };
    let frobenius = norm_sq(u) * norm_sq(v);
    ks.iter()
        .map(|&k| {
            let (estimate, std_error) = if k == 1 {
                (frobenius, 0.0)
            } else {
                let idx = random_ks.iter().position(|&x| x == k).unwrap();
                let column: Vec<f64> = samples.iter().map(|s| s[idx]).collect();
                mean_and_se(&column)
            };
            Ok(MomentEstimate {
                k,
                estimate,
                std_error,
                replicates: replicates as u64,
                bound: bound_for(v, n, k)?,
                exhaustive: false,
                n,
                p,
            })
        })
        .collect()
}

/// All permutations of `0..n` in lexicographic order.
fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..n).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            return out;
        };
        let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
        out.push(cur.clone());
    }
}

/// Calls `f` once for every permutation array of shape `(n, p)`.
fn for_each_array(n: usize, p: usize, mut f: impl FnMut(&[Vec<usize>])) {
    let perms = all_permutations(n);
    let mut odometer = vec![0usize; p];
    let mut current: Vec<Vec<usize>> = vec![perms[0].clone(); p];
    loop {
        f(&current);
        let mut col = 0;
        loop {
            if col == p {
                return;
            }
            odometer[col] += 1;
            if odometer[col] < perms.len() {
                current[col].clone_from(&perms[odometer[col]]);
                break;
            }
            odometer[col] = 0;
            current[col].clone_from(&perms[0]);
            col += 1;
        }
    }
}

fn check_enumerable(n: usize, p: usize) -> Result<u64> {
    // Explicit enumeration goes a little beyond the automatic limit so that
    // n = 5, p = 3 (1.7e6 arrays) stays available.
    match enumeration_size(n, p) {
        Some(s) if s <= 4 * EXHAUSTIVE_LIMIT => Ok(s),
        _ => Err(PaError::invalid(format!("(n!)^p too large to enumerate for n={n}, p={p}"))),
    }
}

/// Exact `E tr((A^T A)^k)` by enumerating every permutation array.
pub fn trace_moments_exhaustive(u: &[f64], v: &[f64], ks: &[u32]) -> Result<Vec<MomentEstimate>> {
    validate(u, v, None)?;
    for &k in ks {
        validate(u, v, Some(k))?;
    }
    let (n, p) = (u.len(), v.len());
    let count = check_enumerable(n, p)?;
    let mut sums = vec![Compensated::default(); ks.len()];
    for_each_array(n, p, |perms| {
        let traces = trace_powers(&permuted_outer(u, v, perms), ks);
        sums.iter_mut().zip(traces).for_each(|(s, t)| s.add(t));
    });
    ks.iter()
        .zip(sums)
        .map(|(&k, s)| {
            Ok(MomentEstimate {
                k,
                estimate: s.value() / count as f64,
                std_error: 0.0,
                replicates: count,
                bound: bound_for(v, n, k)?,
                exhaustive: true,
                n,
                p,
            })
        })
        .collect()
}

fn check_entry_indices(n: usize, p: usize, i: usize, j: usize, k_row: usize) -> Result<()> {
    if i == k_row {
        return Err(PaError::invalid("entry cross moment needs distinct rows i != k"));
    }
    if i >= n || k_row >= n || j >= p {
        return Err(PaError::invalid(format!("entry indices out of range for a {n}x{p} matrix")));
    }
    Ok(())
}

/// Monte Carlo estimates of `E A_ij`, `E A_ij^2` and `E A_ij A_kj` (0-based
/// indices, `i != k_row`). Only column `j` of the permutation array affects
/// these, so each replicate draws that column alone.
pub fn entry_pair_moment_mc<R: Rng + ?Sized>(
    u: &[f64],
    v: &[f64],
    i: usize,
    j: usize,
    k_row: usize,
    replicates: usize,
    rng: &mut R,
) -> Result<EntryMoments> {
    validate(u, v, None)?;
    let n = u.len();
    check_entry_indices(n, v.len(), i, j, k_row)?;
    if replicates < 2 {
        return Err(PaError::invalid("need at least two replicates"));
    }
    let base = rng.next_u64();
    let draws: Vec<(f64, f64)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut stream = seed::stream(base, &[r as u64]);
            let pi = PermutationArray::sample_uniform(n, 1, &mut stream).expect("n >= 2");
            let col = pi.column(0);
            (u[col[i]] * v[j], u[col[k_row]] * v[j])
        })
        .collect();
    let a: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let a2: Vec<f64> = a.iter().map(|x| x * x).collect();
    let ak: Vec<f64> = draws.iter().map(|d| d.0 * d.1).collect();
    let (mean, mean_se) = mean_and_se(&a);
    let (second, second_se) = mean_and_se(&a2);
    let (cross, cross_se) = mean_and_se(&ak);
    Ok(EntryMoments {
        mean,
        mean_se,
        second,
        second_se,
        cross,
        cross_se,
        replicates: replicates as u64,
        exhaustive: false,
    })
}

/// Exact entry moments by enumerating every permutation array.
pub fn entry_pair_moment_exhaustive(u: &[f64], v: &[f64], i: usize, j: usize, k_row: usize) -> Result<EntryMoments> {
    validate(u, v, None)?;
    let (n, p) = (u.len(), v.len());
    check_entry_indices(n, p, i, j, k_row)?;
    let count = check_enumerable(n, p)?;
    let (mut a, mut a2, mut ak) = (Compensated::default(), Compensated::default(), Compensated::default());
    for_each_array(n, p, |perms| {
        let x = u[perms[j][i]] * v[j];
        let y = u[perms[j][k_row]] * v[j];
        a.add(x);
        a2.add(x * x);
        ak.add(x * y);
    });
    let c = count as f64;
    Ok(EntryMoments {
        mean: a.value() / c,
        mean_se: 0.0,
        second: a2.value() / c,
        second_se: 0.0,
        cross: ak.value() / c,
        cross_se: 0.0,
        replicates: count,
        exhaustive: true,
    })
}

/// Compares `E tr((A^T A)^k)` with `C_k(v)` for `k` in {2, 3, 4}. Uses exact
/// enumeration when `(n!)^p <= EXHAUSTIVE_LIMIT`, Monte Carlo otherwise; passes
/// iff `estimate - SE_MARGIN * std_error <= C_k(v)`.
pub fn check_bound<R: RngCore + ?Sized>(u: &[f64], v: &[f64], k: u32, replicates: usize, rng: &mut R) -> Result<BoundCheck> {
    if !(2..=4).contains(&k) {
        return Err(PaError::invalid(format!("bounds exist for k in 2..=4, got {k}")));
    }
    let estimate = if exhaustive_feasible(u.len(), v.len()) {
        validate(u, v, Some(k))?;
        trace_moments_exhaustive(u, v, &[k])?.remove(0)
    } else {
        trace_moment_mc(u, v, k, replicates, rng)?
    };
    Ok(bound_check_from(estimate))
}

pub fn bound_check_from(estimate: MomentEstimate) -> BoundCheck {
    let bound = estimate.bound.unwrap_or(f64::INFINITY);
    let slack = bound - (estimate.estimate - SE_MARGIN * estimate.std_error);
    BoundCheck {
        pass: slack >= 0.0,
        bound,
        slack,
        estimate,
    }
}

/// Random unit `u` orthogonal to the ones vector and random unit `v`.
pub fn random_centered_pair<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    use rand_distr::{Distribution, StandardNormal};
    let mut u: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let mean = u.iter().sum::<f64>() / n as f64;
    u.iter_mut().for_each(|x| *x -= mean);
    let nu = norm_sq(&u).sqrt();
    u.iter_mut().for_each(|x| *x /= nu);
    let mut v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
    let nv = norm_sq(&v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    (u, v)
}
