//! Multilinear moments: exact values from a model, empirical estimates from
//! binary samples, and the moment matrices `C_ST` / `C_ST1` of a partition.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hadamard::extension_column;
use crate::model::MixtureModel;
use crate::scalar::Scalar;

/// Largest number of observables a dense moment vector may cover.
pub const MAX_MOMENT_VARS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Exact,
    Empirical {
        sample_count: usize,
    },
    /// Loaded from a file or perturbed by the caller.
    External,
}

/// Dense map from subsets of `n` observables (bitmasks) to `E[X_S]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector<T: Scalar = f64> {
    n: usize,
    values: Vec<T>,
    provenance: Provenance,
}

impl<T: Scalar> MomentVector<T> {
    /// Wraps raw values; requires `values.len() == 2^n` and `values[0] == 1`.
    pub fn new(n: usize, values: Vec<T>, provenance: Provenance) -> Result<Self> {
        if n > MAX_MOMENT_VARS {
            return Err(Error::TooLarge {
                what: "moment vector observables",
                got: n,
                max: MAX_MOMENT_VARS,
            });
        }
        if values.len() != 1usize << n {
            return Err(Error::DimensionMismatch(format!(
                "moment vector over n = {n} needs {} values, got {}",
                1usize << n,
                values.len()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if values[0] != T::one() {
            return Err(Error::InvalidModel(format!(
                "empty-set moment is {}, expected 1",
                values[0]
            )));
        }
        Ok(Self { n, values, provenance })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `E[X_S]` for the observables in `indices`.
    pub fn get(&self, indices: &[usize]) -> Result<T> {
        Ok(self.values[subset_mask(indices, self.n)?])
    }

    /// Returns a copy with `delta[mask]` added to every nonempty subset.
    pub fn perturbed(&self, delta: impl Fn(usize) -> T) -> Self {
        let mut values = self.values.clone();
        for (mask, v) in values.iter_mut().enumerate().skip(1) {
            *v += delta(mask);
        }
        Self {
            n: self.n,
            values,
            provenance: Provenance::External,
        }
    }
}

/// Bitmask of `indices`, checked against `n`.
pub fn subset_mask(indices: &[usize], n: usize) -> Result<usize> {
    let mut mask = 0usize;
    for &i in indices {
        if i >= n {
            return Err(Error::IndexOutOfRange(format!("observable {i} with n = {n}")));
        }
        mask |= 1 << i;
    }
    Ok(mask)
}

/// Maps a bitmask local to `indices` (bit `b` means `indices[b]`) to a global one.
pub fn global_mask(local: usize, indices: &[usize]) -> usize {
    let mut mask = 0usize;
    let mut bits = local;
    while bits != 0 {
        let b = bits.trailing_zeros() as usize;
        mask |= 1 << indices[b];
        bits &= bits - 1;
    }
    mask
}

/// Moments `H(m) pi` for raw parameters; nothing is validated beyond shapes.
pub fn moments_of_parameters<T: Scalar>(pi: &DVector<T>, m: &DMatrix<T>) -> Result<Vec<T>> {
    let n = m.nrows();
    if n > MAX_MOMENT_VARS {
        return Err(Error::TooLarge {
            what: "moment vector observables",
            got: n,
            max: MAX_MOMENT_VARS,
        });
    }
    if m.ncols() != pi.len() {
        return Err(Error::DimensionMismatch(format!(
            "pi has {} entries, m has {} columns",
            pi.len(),
            m.ncols()
        )));
    }
    let mut values = vec![T::zero(); 1usize << n];
    for (j, &weight) in pi.iter().enumerate() {
        let col = extension_column(m.column(j).iter().copied(), n);
        for (v, c) in values.iter_mut().zip(col) {
            *v += weight * c;
        }
    }
    Ok(values)
}

/// `mu(S) = sum_j pi_j prod_{i in S} m[i][j]`, one Hadamard column at a time.
pub fn exact_moments<T: Scalar>(model: &MixtureModel<T>) -> Result<MomentVector<T>> {
    let mut values = moments_of_parameters(model.pi(), model.m())?;
    values[0] = T::one();
    MomentVector::new(model.n(), values, Provenance::Exact)
}

/// `N x n` binary sample matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinarySamples {
    n: usize,
    data: Vec<u8>,
}

impl BinarySamples {
    pub fn new(n: usize, data: Vec<u8>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("samples need at least one observable".into()));
        }
        if !data.len().is_multiple_of(n) {
            return Err(Error::DimensionMismatch(format!(
                "{} entries do not form rows of length {n}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|&x| x > 1) {
            return Err(Error::NonBinary {
                row: pos / n,
                col: pos % n,
                value: data[pos],
            });
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.first().map(|r| r.len()).unwrap_or(0);
        if let Some(i) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "sample {i} has {} entries, expected {n}",
                rows[i].len()
            )));
        }
        Self::new(n, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, s: usize) -> &[u8] {
        &self.data[s * self.n..(s + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks_exact(self.n)
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }
}

const COUNT_BLOCK: usize = 1 << 14;

/// Empirical moments: histogram of sample supports, then a superset-sum
/// transform so that `count[S]` is the number of samples containing `S`.
/// Counts are exact integers merged across blocks before the final division.
pub fn empirical_moments<T: Scalar>(samples: &BinarySamples) -> Result<MomentVector<T>> {
    let n = samples.n();
    if n > MAX_MOMENT_VARS {
        return Err(Error::TooLarge {
            what: "moment vector observables",
            got: n,
            max: MAX_MOMENT_VARS,
        });
    }
    let total = samples.len();
    if total == 0 {
        return Err(Error::InvalidModel("empirical moments need at least one sample".into()));
    }
    let size = 1usize << n;
    let block_rows = COUNT_BLOCK;
    let mut counts = samples
        .as_slice()
        .par_chunks(block_rows * n)
        .map(|block| {
            let mut hist = vec![0u64; size];
            for row in block.chunks_exact(n) {
                let support = row
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (i, &x)| acc | ((x as usize) << i));
                hist[support] += 1;
            }
            hist
        })
        .reduce(
            || vec![0u64; size],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    for b in 0..n {
        let bit = 1usize << b;
        for mask in 0..size {
            if mask & bit == 0 {
                counts[mask] += counts[mask | bit];
            }
        }
    }
    let denom = T::from_count(total);
    let mut values: Vec<T> = counts.iter().map(|&c| T::lit(c as f64) / denom).collect();
    values[0] = T::one();
    MomentVector::new(n, values, Provenance::Empirical { sample_count: total })
}

/// Disjoint observable blocks `S`, `T` and an anchor observable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubsetPartition {
    s: Vec<usize>,
    t: Vec<usize>,
    anchor: usize,
}

impl SubsetPartition {
    /// Sorts `s` and `t`; rejects overlaps and repeated indices.
    pub fn new(mut s: Vec<usize>, mut t: Vec<usize>, anchor: usize) -> Result<Self> {
        s.sort_unstable();
        t.sort_unstable();
        let mut all: Vec<usize> = s.iter().chain(t.iter()).copied().collect();
        all.push(anchor);
        let count = all.len();
        all.sort_unstable();
        all.dedup();
        if all.len() != count {
            return Err(Error::InvalidPartition(format!(
                "S = {s:?}, T = {t:?}, anchor = {anchor} are not pairwise disjoint"
            )));
        }
        Ok(Self { s, t, anchor })
    }

    pub fn s(&self) -> &[usize] {
        &self.s
    }

    pub fn t(&self) -> &[usize] {
        &self.t
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    /// `S ∪ T ∪ {anchor}` in ascending order.
    pub fn observables(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.s.iter().chain(self.t.iter()).copied().collect();
        all.push(self.anchor);
        all.sort_unstable();
        all
    }

    /// Largest observable index used.
    pub fn max_index(&self) -> usize {
        self.observables().last().copied().unwrap_or(0)
    }

    /// Ordering key `(|S|, S, T, anchor)` used to break ties in the search.
    pub fn sort_key(&self) -> (usize, &[usize], &[usize], usize) {
        (self.s.len(), &self.s, &self.t, self.anchor)
    }

    /// Parses `"S;T;anchor"` with comma-separated index lists, e.g. `"1,2;3,4;0"`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(';').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!(
                "subset '{text}' must have the form \"S;T;anchor\""
            )));
        }
        let list = |p: &str| -> Result<Vec<usize>> {
            p.split(',')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(|x| {
                    x.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad index '{x}' in '{text}'")))
                })
                .collect()
        };
        let anchor = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("bad anchor '{}' in '{text}'", parts[2])))?;
        Self::new(list(parts[0])?, list(parts[1])?, anchor)
    }
}

impl std::fmt::Display for SubsetPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "{};{};{}", join(&self.s), join(&self.t), self.anchor)
    }
}

/// `C[a][b] = mu(A ∪ B)` and `C1[a][b] = mu(A ∪ B ∪ {anchor})` for local
/// bitmasks `a` over `S` and `b` over `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrices<T: Scalar = f64> {
    pub c: DMatrix<T>,
    pub c1: DMatrix<T>,
}

pub fn assemble_pair_matrices<T: Scalar>(mu: &MomentVector<T>, p: &SubsetPartition) -> Result<PairMatrices<T>> {
    if p.max_index() >= mu.n() {
        return Err(Error::IndexOutOfRange(format!(
            "partition {p} uses observable {} but moments cover n = {}",
            p.max_index(),
            mu.n()
        )));
    }
    let rows = 1usize << p.s.len();
    let cols = 1usize << p.t.len();
    let anchor = 1usize << p.anchor;
    let values = mu.values();
    let mut c = DMatrix::zeros(rows, cols);
    let mut c1 = DMatrix::zeros(rows, cols);
    for a in 0..rows {
        let ga = global_mask(a, &p.s);
        for b in 0..cols {
            let g = ga | global_mask(b, &p.t);
            c[(a, b)] = values[g];
            c1[(a, b)] = values[g | anchor];
        }
    }
    Ok(PairMatrices { c, c1 })
}

/// Moments of the observables `indices`, relabeled so that bit `b` of the
/// result refers to `indices[b]`.
pub fn restrict_moments<T: Scalar>(mu: &MomentVector<T>, indices: &[usize]) -> Result<MomentVector<T>> {
    subset_mask(indices, mu.n())?;
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != indices.len() {
        return Err(Error::InvalidPartition(format!("repeated observable in {indices:?}")));
    }
    let values = (0..1usize << indices.len())
        .map(|local| mu.values()[global_mask(local, indices)])
        .collect();
    MomentVector::new(indices.len(), values, mu.provenance())
}
