//! Generators for factor models and signal-plus-noise spiked models.
//!
//! Factor model: `X = U Psi^{1/2} Lambda^T + Z Phi^{1/2}` with `U` (n x r) and
//! `Z` (n x p) holding iid standardized entries. Noise rows therefore have the
//! form `D^{1/2} eps_i` and are invariant in distribution under any fixed
//! per-column permutation. No common shift term is generated.
//!
//! Spiked model: `X = sum_k theta_k u_k v_k^T + n^{-1/2} Y diag(T)^{1/2}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{PaError, Result};

/// Entry distribution, always standardized to mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EntryDistribution {
    #[default]
    Gaussian,
    Rademacher,
    /// Student-t scaled by `sqrt((df - 2) / df)`; `df >= 7`.
    StudentT { df: f64 },
}

impl EntryDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EntryDistribution::StudentT { df } if !(df >= 7.0 && df.is_finite()) => Err(
                PaError::Config(format!("student_t needs finite df >= 7, got {df}")),
            ),
            _ => Ok(()),
        }
    }

    /// Fills an `n x p` matrix column by column.
    pub fn sample_matrix<R: Rng + ?Sized>(&self, n: usize, p: usize, rng: &mut R) -> DMatrix<f64> {
        match *self {
            EntryDistribution::Gaussian => DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng)),
            EntryDistribution::Rademacher => {
                DMatrix::from_fn(n, p, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
            }
            EntryDistribution::StudentT { df } => {
                let t = StudentT::new(df).expect("validated df");
                let scale = ((df - 2.0) / df).sqrt();
                DMatrix::from_fn(n, p, |_, _| scale * t.sample(rng))
            }
        }
    }
}

/// Random loading block: `m` columns of length `p`, each with Euclidean norm
/// `strength`, supported on the first `floor(sparsity * p)` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadingSpec {
    pub p: usize,
    pub m: usize,
    pub strength: f64,
    #[serde(default = "one")]
    pub sparsity: f64,
    /// Scatter the support over random coordinates instead of the leading ones.
    #[serde(default)]
    pub shuffle_support: bool,
}

fn one() -> f64 {
    1.0
}

impl LoadingSpec {
    pub fn dense(p: usize, m: usize, strength: f64) -> Self {
        Self {
            p,
            m,
            strength,
            sparsity: 1.0,
            shuffle_support: false,
        }
    }

    /// `floor(sparsity * p)`, with a small guard so that grids like `k / p`
    /// do not lose a coordinate to rounding.
    pub fn support_size(&self) -> usize {
        ((self.sparsity * self.p as f64) + 1e-9).floor().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.p == 0 {
            return Err(PaError::Config("loading block needs p >= 1 and m >= 1".into()));
        }
        if !(self.strength >= 0.0 && self.strength.is_finite()) {
            return Err(PaError::Config(format!(
                "loading strength must be finite and >= 0, got {}",
                self.strength
            )));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(PaError::Config(format!(
                "sparsity must lie in (0, 1], got {}",
                self.sparsity
            )));
        }
        if self.support_size() == 0 {
            return Err(PaError::Config(format!(
                "sparsity {} leaves no nonzero coordinate out of {}",
                self.sparsity, self.p
            )));
        }
        Ok(())
    }
}

pub fn gen_loadings<R: Rng + ?Sized>(spec: &LoadingSpec, rng: &mut R) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let support = spec.support_size();
    let mut out = DMatrix::zeros(spec.p, spec.m);
    let mut rows: Vec<usize> = (0..spec.p).collect();
    for j in 0..spec.m {
        if spec.shuffle_support {
            rows.shuffle(rng);
        }
        let draws: Vec<f64> = (0..support).map(|_| StandardNormal.sample(rng)).collect();
        let norm = draws.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(PaError::invalid("degenerate all-zero loading draw"));
        }
        for (k, d) in draws.iter().enumerate() {
            out[(rows[k], j)] = spec.strength * d / norm;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Loadings {
    /// `p` rows of `r` loadings each.
    Explicit(Vec<Vec<f64>>),
    /// Column blocks generated with [`gen_loadings`], concatenated left to right.
    Random(Vec<LoadingSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorModelSpec {
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub loadings: Loadings,
    /// `r x r` factor covariance; identity when absent.
    #[serde(default)]
    pub factor_cov: Option<Vec<Vec<f64>>>,
    /// Diagonal idiosyncratic variances; all ones when absent.
    #[serde(default)]
    pub idio_var: Option<Vec<f64>>,
    #[serde(default)]
    pub factor_distribution: EntryDistribution,
    #[serde(default)]
    pub noise_distribution: EntryDistribution,
}

impl FactorModelSpec {
    /// One-factor model with a dense random loading of norm `strength` and
    /// unit idiosyncratic variances.
    pub fn one_factor(n: usize, p: usize, strength: f64) -> Self {
        Self {
            n,
            p,
            r: 1,
            loadings: Loadings::Random(vec![LoadingSpec::dense(p, 1, strength)]),
            factor_cov: None,
            idio_var: None,
            factor_distribution: EntryDistribution::Gaussian,
            noise_distribution: EntryDistribution::Gaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(PaError::Config("factor model needs n >= 1 and p >= 1".into()));
        }
        match &self.loadings {
            Loadings::Explicit(rows) => {
                if rows.len() != self.p || rows.iter().any(|row| row.len() != self.r) {
                    return Err(PaError::Config(format!(
                        "explicit loadings must be {} rows of {} values",
                        self.p, self.r
                    )));
                }
                if rows.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(PaError::Config("loadings contain non-finite values".into()));
                }
            }
            Loadings::Random(blocks) => {
                for b in blocks {
                    b.validate()?;
                    if b.p != self.p {
                        return Err(PaError::Config(format!(
                            "loading block has p = {}, model has p = {}",
                            b.p, self.p
                        )));
                    }
                }
                let cols: usize = blocks.iter().map(|b| b.m).sum();
                if cols != self.r {
                    return Err(PaError::Config(format!(
                        "loading blocks provide {cols} columns, r = {}",
                        self.r
                    )));
                }
            }
        }
        if let Some(cov) = &self.factor_cov {
            factor_cov_sqrt(cov, self.r)?;
        }
        if let Some(phi) = &self.idio_var {
            if phi.len() != self.p {
                return Err(PaError::Config(format!(
                    "idio_var has {} entries, p = {}",
                    phi.len(),
                    self.p
                )));
            }
            if phi.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(PaError::Config("idio_var entries must be finite and >= 0".into()));
            }
        }
        self.factor_distribution.validate()?;
        self.noise_distribution.validate()
    }

    /// The `p x r` loading matrix; random blocks consume `rng`.
    pub fn resolve_loadings<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DMatrix<f64>> {
        match &self.loadings {
            Loadings::Explicit(rows) => Ok(DMatrix::from_fn(self.p, self.r, |i, j| rows[i][j])),
            Loadings::Random(blocks) => {
                let mut out = DMatrix::zeros(self.p, self.r);
                let mut col = 0;
                for b in blocks {
                    let block = gen_loadings(b, rng)?;
                    out.columns_mut(col, b.m).copy_from(&block);
                    col += b.m;
                }
                Ok(out)
            }
        }
    }
}

/// Symmetric square root of a PSD matrix given as rows.
fn factor_cov_sqrt(cov: &[Vec<f64>], r: usize) -> Result<DMatrix<f64>> {
    if cov.len() != r || cov.iter().any(|row| row.len() != r) {
        return Err(PaError::Config(format!("factor_cov must be {r} x {r}")));
    }
    let m = DMatrix::from_fn(r, r, |i, j| cov[i][j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(PaError::Config("factor_cov contains non-finite values".into()));
    }
    let scale = m.amax().max(1.0);
    if (&m - m.transpose()).amax() > 1e-12 * scale {
        return Err(PaError::Config("factor_cov is not symmetric".into()));
    }
    if r == 0 {
        return Ok(m);
    }
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
        return Err(PaError::Config("factor_cov is not positive semidefinite".into()));
    }
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose())
}

pub fn simulate_factor_model<R: Rng + ?Sized>(spec: &FactorModelSpec, rng: &mut R) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let loadings = spec.resolve_loadings(rng)?;
    let mut x = noise_matrix(
        spec.n,
        spec.idio_var.as_deref().unwrap_or(&vec![1.0; spec.p]),
        spec.noise_distribution,
        rng,
        false,
    );
    if spec.r > 0 {
        let u = spec.factor_distribution.sample_matrix(spec.n, spec.r, rng);
        let scaled = match &spec.factor_cov {
            Some(cov) => factor_cov_sqrt(cov, spec.r)? * loadings.transpose(),
            None => loadings.transpose(),
        };
        x.gemm(1.0, &u, &scaled, 1.0);
    }
    Ok(x)
}

/// `n x p` noise with rows `D^{1/2} eps_i`: column `j` is scaled by
/// `sqrt(variances[j])`. Used for both factor-model and spiked-model noise.
pub fn invariant_noise<R: Rng + ?Sized>(
    n: usize,
    variances: &[f64],
    dist: EntryDistribution,
    rng: &mut R,
) -> DMatrix<f64> {
    noise_matrix(n, variances, dist, rng, false)
}

fn noise_matrix<R: Rng + ?Sized>(
    n: usize,
    variances: &[f64],
    dist: EntryDistribution,
    rng: &mut R,
    scale_by_n: bool,
) -> DMatrix<f64> {
    let mut z = dist.sample_matrix(n, variances.len(), rng);
    let global = if scale_by_n { 1.0 / (n as f64).sqrt() } else { 1.0 };
    for (mut col, v) in z.column_iter_mut().zip(variances) {
        col *= global * v.sqrt();
    }
    z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Directions {
    /// Independent Gaussian vectors normalized to unit length.
    RandomDelocalized,
    /// Unit vectors, one `u` (length n) and one `v` (length p) per spike.
    Explicit { u: Vec<Vec<f64>>, v: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikedModelSpec {
    pub n: usize,
    pub p: usize,
    pub strengths: Vec<f64>,
    pub directions: Directions,
    /// Noise variance profile `T`; all ones when absent.
    #[serde(default)]
    pub noise_var: Option<Vec<f64>>,
    #[serde(default)]
    pub noise_distribution: EntryDistribution,
}

const UNIT_TOLERANCE: f64 = 1e-10;

fn check_unit(v: &[f64], what: &str) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(PaError::Config(format!("{what} has norm {norm}, expected 1")));
    }
    Ok(())
}

impl SpikedModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(PaError::Config("spiked model needs n >= 1 and p >= 1".into()));
        }
        if self.strengths.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(PaError::Config("spike strengths must be finite and >= 0".into()));
        }
        if let Directions::Explicit { u, v } = &self.directions {
            let r = self.strengths.len();
            if u.len() != r || v.len() != r {
                return Err(PaError::Config(format!("need {r} u and v directions")));
            }
            for (k, (uk, vk)) in u.iter().zip(v).enumerate() {
                if uk.len() != self.n || vk.len() != self.p {
                    return Err(PaError::Config(format!("direction {k} has wrong length")));
                }
                check_unit(uk, &format!("u[{k}]"))?;
                check_unit(vk, &format!("v[{k}]"))?;
            }
        }
        if let Some(t) = &self.noise_var {
            if t.len() != self.p || t.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(PaError::Config(format!(
                    "noise_var must have {} finite nonnegative entries",
                    self.p
                )));
            }
        }
        self.noise_distribution.validate()
    }
}

fn random_unit<R: Rng + ?Sized>(len: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let g: DVector<f64> = DVector::from_fn(len, |_, _| StandardNormal.sample(rng));
        let norm = g.norm();
        if norm > 0.0 {
            return g / norm;
        }
    }
}

pub fn simulate_spiked<R: Rng + ?Sized>(spec: &SpikedModelSpec, rng: &mut R) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let mut x = noise_matrix(
        n,
        spec.noise_var.as_deref().unwrap_or(&vec![1.0; p]),
        spec.noise_distribution,
        rng,
        true,
    );
    for (k, &theta) in spec.strengths.iter().enumerate() {
        let (u, v) = match &spec.directions {
            Directions::RandomDelocalized => (random_unit(n, rng), random_unit(p, rng)),
            Directions::Explicit { u, v } => (
                DVector::from_column_slice(&u[k]),
                DVector::from_column_slice(&v[k]),
            ),
        };
        x.ger(theta, &u, &v, 1.0);
    }
    Ok(x)
}

/// `|lambda|_4 / |lambda|_2`, a value in (0, 1].
pub fn localization(lambda: &[f64]) -> Result<f64> {
    let scale = lambda.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Err(PaError::invalid("localization of a zero or non-finite vector"));
    }
    // Rescale by the max entry so fourth powers neither overflow nor underflow.
    let (s2, s4) = lambda.iter().fold((0.0, 0.0), |(a, b), v| {
        let t = (v / scale) * (v / scale);
        (a + t, b + t * t)
    });
    Ok(s4.powf(0.25) / s2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permute::PermutationArray;
    use crate::seed::stream;
    use crate::spectra::{operator_norm, singular_values};

    fn mean_sd(xs: &[f64]) -> (f64, f64) {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0);
        (m, v.sqrt())
    }

    #[test]
    fn one_sparse_loading_has_single_coordinate() {
        let p = 50;
        let spec = LoadingSpec { sparsity: 1.0 / p as f64, ..LoadingSpec::dense(p, 3, 2.5) };
        let l = gen_loadings(&spec, &mut stream(1, &[])).unwrap();
        for col in l.column_iter() {
            let nz: Vec<f64> = col.iter().copied().filter(|v| *v != 0.0).collect();
            assert_eq!(nz.len(), 1);
            assert!((nz[0].abs() - 2.5).abs() < 1e-12);
            assert!(col[0] != 0.0);
        }
    }

    #[test]
    fn loading_columns_have_exact_norm_and_leading_support() {
        let spec = LoadingSpec { sparsity: 0.02, ..LoadingSpec::dense(300, 4, 1.7) };
        assert_eq!(spec.support_size(), 6);
        let l = gen_loadings(&spec, &mut stream(2, &[])).unwrap();
        for col in l.column_iter() {
            assert!((col.norm() - 1.7).abs() < 1e-12);
            assert!(col.iter().skip(6).all(|v| *v == 0.0));
        }
        for k in 1..=10 {
            let s = LoadingSpec { sparsity: k as f64 / 300.0, ..LoadingSpec::dense(300, 1, 1.0) };
            assert_eq!(s.support_size(), k);
        }
    }

    #[test]
    fn shuffled_support_keeps_size() {
        let spec = LoadingSpec { sparsity: 0.1, shuffle_support: true, ..LoadingSpec::dense(100, 2, 1.0) };
        let l = gen_loadings(&spec, &mut stream(3, &[])).unwrap();
        for col in l.column_iter() {
            assert_eq!(col.iter().filter(|v| **v != 0.0).count(), 10);
        }
    }

    #[test]
    fn empty_support_is_rejected() {
        let spec = LoadingSpec { sparsity: 0.5 / 300.0, ..LoadingSpec::dense(300, 1, 1.0) };
        assert!(gen_loadings(&spec, &mut stream(1, &[])).is_err());
    }

    /// E|X|_F^2 = n (theta^2 + p) for one unit-variance factor and unit noise.
    #[test]
    fn factor_model_energy_matches_expectation() {
        let (n, p, theta) = (40, 25, 3.0);
        let spec = FactorModelSpec::one_factor(n, p, theta);
        let reps = 400;
        let energy: Vec<f64> = (0..reps)
            .map(|r| {
                let x = simulate_factor_model(&spec, &mut stream(10, &[r])).unwrap();
                x.norm_squared()
            })
            .collect();
        let (m, sd) = mean_sd(&energy);
        let want = n as f64 * (theta * theta + p as f64);
        assert!((m - want).abs() <= 3.0 * sd / (reps as f64).sqrt(), "{m} vs {want}");
    }

    #[test]
    fn zero_loadings_give_pure_noise_energy() {
        let (n, p) = (30, 12);
        let phi: Vec<f64> = (0..p).map(|j| 0.5 + j as f64 * 0.25).collect();
        let spec = FactorModelSpec {
            idio_var: Some(phi.clone()),
            ..FactorModelSpec::one_factor(n, p, 0.0)
        };
        let reps = 400;
        let per_row: Vec<f64> = (0..reps)
            .map(|r| simulate_factor_model(&spec, &mut stream(11, &[r])).unwrap().norm_squared() / n as f64)
            .collect();
        let (m, sd) = mean_sd(&per_row);
        let want: f64 = phi.iter().sum();
        assert!((m - want).abs() <= 3.0 * sd / (reps as f64).sqrt(), "{m} vs {want}");
    }

    #[test]
    fn noiseless_one_factor_is_rank_one() {
        let spec = FactorModelSpec {
            idio_var: Some(vec![0.0; 15]),
            ..FactorModelSpec::one_factor(20, 15, 2.0)
        };
        let x = simulate_factor_model(&spec, &mut stream(4, &[])).unwrap();
        let s = singular_values(&x, None).unwrap();
        assert!(s.values[0] > 1.0);
        assert!(s.values[1] <= 1e-10);
    }

    #[test]
    fn factor_cov_and_explicit_loadings() {
        let spec = FactorModelSpec {
            n: 10,
            p: 3,
            r: 2,
            loadings: Loadings::Explicit(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]),
            factor_cov: Some(vec![vec![2.0, 0.5], vec![0.5, 1.0]]),
            idio_var: None,
            factor_distribution: EntryDistribution::Rademacher,
            noise_distribution: EntryDistribution::StudentT { df: 8.0 },
        };
        let x = simulate_factor_model(&spec, &mut stream(5, &[])).unwrap();
        assert_eq!(x.shape(), (10, 3));
        let bad = FactorModelSpec {
            factor_cov: Some(vec![vec![1.0, 2.0], vec![2.0, 1.0]]),
            ..spec.clone()
        };
        assert!(bad.validate().is_err());
        let bad = FactorModelSpec { r: 3, ..spec.clone() };
        assert!(bad.validate().is_err());
        let bad = FactorModelSpec { noise_distribution: EntryDistribution::StudentT { df: 3.0 }, ..spec };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let spec = FactorModelSpec::one_factor(12, 7, 1.5);
        let a = simulate_factor_model(&spec, &mut stream(8, &[1])).unwrap();
        let b = simulate_factor_model(&spec, &mut stream(8, &[1])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn standardized_distributions_have_unit_variance() {
        for dist in [
            EntryDistribution::Gaussian,
            EntryDistribution::Rademacher,
            EntryDistribution::StudentT { df: 9.0 },
        ] {
            let z = dist.sample_matrix(200_000, 1, &mut stream(6, &[]));
            let xs: Vec<f64> = z.iter().copied().collect();
            let (m, sd) = mean_sd(&xs);
            assert!(m.abs() < 0.01, "{dist:?} mean {m}");
            assert!((sd - 1.0).abs() < 0.01, "{dist:?} sd {sd}");
        }
    }

    #[test]
    fn pure_noise_spiked_edge() {
        let (n, p) = (1000, 1000);
        let spec = SpikedModelSpec {
            n,
            p,
            strengths: vec![],
            directions: Directions::RandomDelocalized,
            noise_var: None,
            noise_distribution: EntryDistribution::Gaussian,
        };
        let x = simulate_spiked(&spec, &mut stream(12, &[])).unwrap();
        let edge = 1.0 + (p as f64 / n as f64).sqrt();
        let norm = operator_norm(&x).unwrap();
        assert!((norm - edge).abs() <= 0.05, "{norm} vs {edge}");
    }

    #[test]
    fn large_spike_dominates() {
        let spec = SpikedModelSpec {
            n: 500,
            p: 500,
            strengths: vec![10.0],
            directions: Directions::RandomDelocalized,
            noise_var: None,
            noise_distribution: EntryDistribution::Gaussian,
        };
        let x = simulate_spiked(&spec, &mut stream(13, &[])).unwrap();
        let s1 = operator_norm(&x).unwrap();
        assert!((s1 - 10.0).abs() <= 1.0, "sigma_1 = {s1}");
    }

    #[test]
    fn explicit_directions_must_be_unit() {
        let spec = SpikedModelSpec {
            n: 2,
            p: 2,
            strengths: vec![1.0],
            directions: Directions::Explicit { u: vec![vec![1.0, 1.0]], v: vec![vec![1.0, 0.0]] },
            noise_var: None,
            noise_distribution: EntryDistribution::Gaussian,
        };
        assert!(simulate_spiked(&spec, &mut stream(1, &[])).is_err());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let ok = SpikedModelSpec {
            directions: Directions::Explicit { u: vec![vec![h, -h]], v: vec![vec![1.0, 0.0]] },
            ..spec
        };
        assert!(simulate_spiked(&ok, &mut stream(1, &[])).is_ok());
    }

    #[test]
    fn localization_examples() {
        let mut e1 = vec![0.0; 10];
        e1[0] = 1.0;
        assert!((localization(&e1).unwrap() - 1.0).abs() < 1e-15);
        let flat = vec![0.1; 100];
        assert!((localization(&flat).unwrap() - 100f64.powf(-0.25)).abs() < 1e-12);
        assert!(localization(&[0.0, 0.0]).is_err());
        assert!((localization(&[1e-200, 0.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    /// Kolmogorov-Smirnov distance between two samples.
    fn ks_distance(a: &mut [f64], b: &mut [f64]) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            // Step past every copy of the smaller value so ties are compared
            // only after both empirical CDFs have jumped.
            let x = a[i].min(b[j]);
            while i < a.len() && a[i] == x {
                i += 1;
            }
            while j < b.len() && b[j] == x {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    /// For a fixed permutation array, per-entry statistics of N and N_pi agree
    /// across noise replicates.
    #[test]
    fn invariant_noise_is_permutation_invariant() {
        let (n, p, reps) = (6, 3, 4000);
        let variances = [0.5, 1.0, 4.0];
        let pi = PermutationArray::new(n, vec![vec![5, 4, 3, 2, 1, 0], vec![1, 2, 3, 4, 5, 0], (0..n).collect()])
            .unwrap();
        let mut orig = vec![Vec::with_capacity(reps); n * p];
        let mut perm = vec![Vec::with_capacity(reps); n * p];
        for r in 0..reps {
            let noise = invariant_noise(n, &variances, EntryDistribution::Rademacher, &mut stream(20, &[r as u64]));
            let permuted = pi.apply(&noise).unwrap();
            for (idx, (a, b)) in noise.iter().zip(permuted.iter()).enumerate() {
                orig[idx].push(*a);
                perm[idx].push(*b);
            }
        }
        // Two-sample KS critical value at alpha = 0.001.
        let crit = 1.95 * (2.0 / reps as f64).sqrt();
        for idx in 0..n * p {
            let (m1, s1) = mean_sd(&orig[idx]);
            let (m2, s2) = mean_sd(&perm[idx]);
            let var = variances[idx / n];
            let se = (2.0 * var / reps as f64).sqrt();
            assert!((m1 - m2).abs() <= 4.0 * se);
            assert!((s1 - s2).abs() <= 0.1 * var.sqrt());
            assert!(ks_distance(&mut orig[idx].clone(), &mut perm[idx].clone()) <= crit);
        }
    }
}
