//! Per-column permutation arrays.
//!
//! A [`PermutationArray`] holds one permutation of `0..n` for each of `p`
//! columns. Permutations are stored as forward index maps: applying the array
//! to `X` gives `Y[(i, j)] = X[(perm_j[i], j)]`, i.e. output row `i` of column
//! `j` reads input row `perm_j[i]`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{PaError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationArray {
    n: usize,
    perms: Vec<Vec<usize>>,
}

impl PermutationArray {
    /// Builds an array from explicit 0-based index maps, checking that each is
    /// a bijection of `0..n`.
    pub fn new(n: usize, perms: Vec<Vec<usize>>) -> Result<Self> {
        check_sizes(n, perms.len())?;
        let mut seen = vec![false; n];
        for (j, perm) in perms.iter().enumerate() {
            if perm.len() != n {
                return Err(PaError::invalid(format!(
                    "permutation {j} has length {}, expected {n}",
                    perm.len()
                )));
            }
            seen.iter_mut().for_each(|s| *s = false);
            for &idx in perm {
                if idx >= n || std::mem::replace(&mut seen[idx], true) {
                    return Err(PaError::invalid(format!(
                        "permutation {j} is not a bijection of 0..{n}"
                    )));
                }
            }
        }
        Ok(Self { n, perms })
    }

    pub fn identity(n: usize, p: usize) -> Result<Self> {
        check_sizes(n, p)?;
        Ok(Self {
            n,
            perms: vec![(0..n).collect(); p],
        })
    }

    /// Draws `p` independent uniform permutations of `0..n` (Fisher-Yates on
    /// the supplied stream, column by column).
    pub fn sample_uniform<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<Self> {
        check_sizes(n, p)?;
        let perms = (0..p)
            .map(|_| {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(rng);
                perm
            })
            .collect();
        Ok(Self { n, perms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.perms.len()
    }

    pub fn column(&self, j: usize) -> &[usize] {
        &self.perms[j]
    }

    pub fn columns(&self) -> &[Vec<usize>] {
        &self.perms
    }

    /// Column-wise inverse, so that `inv.apply(&pi.apply(x))` returns `x`.
    pub fn inverse(&self) -> Self {
        let perms = self
            .perms
            .iter()
            .map(|perm| {
                let mut inv = vec![0; self.n];
                for (i, &src) in perm.iter().enumerate() {
                    inv[src] = i;
                }
                inv
            })
            .collect();
        Self { n: self.n, perms }
    }

    /// Returns `X_pi` with `X_pi[(i, j)] = X[(perm_j[i], j)]`. Entries are
    /// moved, never recomputed.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.n || x.ncols() != self.p() {
            return Err(PaError::DimensionMismatch {
                expected: format!("{}x{}", self.n, self.p()),
                found: format!("{}x{}", x.nrows(), x.ncols()),
            });
        }
        let mut out = DMatrix::zeros(self.n, self.p());
        for (j, perm) in self.perms.iter().enumerate() {
            let src = x.column(j);
            let mut dst = out.column_mut(j);
            for (i, &k) in perm.iter().enumerate() {
                dst[i] = src[k];
            }
        }
        Ok(out)
    }
}

fn check_sizes(n: usize, p: usize) -> Result<()> {
    if n == 0 || p == 0 {
        return Err(PaError::invalid(format!(
            "permutation array needs n >= 1 and p >= 1, got n={n}, p={p}"
        )));
    }
    Ok(())
}
