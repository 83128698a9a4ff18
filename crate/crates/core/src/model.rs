//! Mixture models, the separated model class and the two distances between
//! models and between moment vectors.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::moments::MomentVector;
use crate::scalar::Scalar;

/// Largest `k` for which the relabeling search in [`model_distance`] runs.
pub const MAX_RELABEL_K: usize = 10;

/// Mixing weights `pi` (length `k`) and conditional means `m` (`n x k`).
///
/// `m[(i, j)]` is `E[X_i | U = j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel<T: Scalar = f64> {
    pi: DVector<T>,
    m: DMatrix<T>,
}

impl<T: Scalar> MixtureModel<T> {
    /// Validates that `pi` lies on the simplex (sum within `1e-12`) and every
    /// mean lies in `[0, 1]`.
    pub fn new(pi: DVector<T>, m: DMatrix<T>) -> Result<Self> {
        let k = pi.len();
        if k == 0 || m.nrows() == 0 {
            return Err(Error::InvalidModel("k and n must be positive".into()));
        }
        if m.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "pi has {k} entries but m has {} columns",
                m.ncols()
            )));
        }
        if pi.iter().chain(m.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if let Some(j) = pi.iter().position(|&p| p < T::zero()) {
            return Err(Error::InvalidModel(format!("pi[{j}] = {} is negative", pi[j])));
        }
        let total = pi.sum();
        if (total - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::InvalidModel(format!("pi sums to {total}, not 1")));
        }
        for ((i, j), &x) in m
            .iter()
            .enumerate()
            .map(|(idx, x)| ((idx % m.nrows(), idx / m.nrows()), x))
        {
            if x < T::zero() || x > T::one() {
                return Err(Error::InvalidModel(format!("m[{i}][{j}] = {x} outside [0, 1]")));
            }
        }
        Ok(Self { pi, m })
    }

    /// Builds from row-major nested vectors, as found in model files.
    pub fn from_rows(pi: Vec<T>, rows: &[Vec<T>]) -> Result<Self> {
        let k = pi.len();
        if let Some(i) = rows.iter().position(|r| r.len() != k) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} of m has {} entries, expected {k}",
                rows[i].len()
            )));
        }
        let m = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
        Self::new(DVector::from_vec(pi), m)
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn pi(&self) -> &DVector<T> {
        &self.pi
    }

    pub fn m(&self) -> &DMatrix<T> {
        &self.m
    }

    /// Rows of `m` as nested vectors.
    pub fn m_rows(&self) -> Vec<Vec<T>> {
        self.m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// Relabels components: column `j` of the result is column `perm[j]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.k())?;
        let pi = DVector::from_fn(self.k(), |j, _| self.pi[perm[j]]);
        let m = DMatrix::from_fn(self.n(), self.k(), |i, j| self.m[(i, perm[j])]);
        Ok(Self { pi, m })
    }

    /// Model on the observables `rows` (in the given order).
    pub fn restrict_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&i) = rows.iter().find(|&&i| i >= self.n()) {
            return Err(Error::IndexOutOfRange(format!("observable {i} with n = {}", self.n())));
        }
        let m = DMatrix::from_fn(rows.len(), self.k(), |r, j| self.m[(rows[r], j)]);
        Self::new(self.pi.clone(), m)
    }

    /// Smallest gap `|m[i][j] - m[i][j']|` over all rows and column pairs.
    /// `None` when `k = 1`.
    pub fn min_separation(&self) -> Option<T> {
        let mut best: Option<T> = None;
        for i in 0..self.n() {
            for a in 0..self.k() {
                for b in a + 1..self.k() {
                    let gap = (self.m[(i, a)] - self.m[(i, b)]).abs();
                    best = Some(match best {
                        Some(x) if x <= gap => x,
                        _ => gap,
                    });
                }
            }
        }
        best
    }

    pub fn min_pi(&self) -> T {
        self.pi.min()
    }
}

fn check_permutation(perm: &[usize], k: usize) -> Result<()> {
    let mut seen = vec![false; k];
    if perm.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "permutation of length {} for k = {k}",
            perm.len()
        )));
    }
    for &p in perm {
        if p >= k || seen[p] {
            return Err(Error::InvalidModel(format!("{perm:?} is not a permutation of 0..{k}")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Parameters of the separated model class: every row is `zeta`-separated and
/// every mixing weight is at least `pi_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelClassParams<T: Scalar = f64> {
    pub zeta: T,
    pub pi_min: T,
}

impl<T: Scalar> ModelClassParams<T> {
    pub fn new(zeta: T, pi_min: T) -> Result<Self> {
        if !(zeta > T::zero() && zeta <= T::one()) {
            return Err(Error::Infeasible(format!("zeta = {zeta} must lie in (0, 1]")));
        }
        if !(pi_min > T::zero() && pi_min <= T::one()) {
            return Err(Error::Infeasible(format!("pi_min = {pi_min} must lie in (0, 1]")));
        }
        Ok(Self { zeta, pi_min })
    }

    /// For `k >= 2`, rows with entries in `[0, 1]` cannot be separated by more
    /// than `1 / (k - 1)`.
    pub fn separation_warning(&self, k: usize) -> Option<String> {
        if k >= 2 && self.zeta > T::one() / T::from_count(k - 1) + T::tol(1e-12) {
            Some(format!(
                "zeta = {} exceeds 1/(k-1) = {}; no model with k = {k} can be that separated",
                self.zeta,
                1.0 / (k - 1) as f64
            ))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation<T: Scalar = f64> {
    /// `pi[j] < pi_min`.
    MixingWeight { j: usize, value: T },
    /// `|m[i][j] - m[i][j2]| < zeta`.
    Separation { i: usize, j: usize, j2: usize, gap: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport<T: Scalar = f64> {
    pub member: bool,
    /// First violated constraint; weights are checked before rows.
    pub violation: Option<Violation<T>>,
}

/// Checks membership in the separated class. Comparisons allow `1e-12` of
/// rounding slack.
pub fn validate_membership<T: Scalar>(model: &MixtureModel<T>, params: &ModelClassParams<T>) -> MembershipReport<T> {
    let slack = T::tol(1e-12);
    for (j, &p) in model.pi.iter().enumerate() {
        if p < params.pi_min - slack {
            return MembershipReport {
                member: false,
                violation: Some(Violation::MixingWeight { j, value: p }),
            };
        }
    }
    let k = model.k();
    for i in 0..model.n() {
        for j in 0..k {
            for j2 in j + 1..k {
                let gap = (model.m[(i, j)] - model.m[(i, j2)]).abs();
                if gap < params.zeta - slack {
                    return MembershipReport {
                        member: false,
                        violation: Some(Violation::Separation { i, j, j2, gap }),
                    };
                }
            }
        }
    }
    MembershipReport {
        member: true,
        violation: None,
    }
}

/// Distance between raw parameter sets, minimized over relabelings.
///
/// Inputs need not be valid models, so estimator output can be compared
/// directly. Exact: the bottleneck assignment is found by exhaustive
/// branch-and-bound over all `k!` permutations.
pub fn parameter_distance<T: Scalar>(
    pi_a: &DVector<T>,
    m_a: &DMatrix<T>,
    pi_b: &DVector<T>,
    m_b: &DMatrix<T>,
) -> Result<T> {
    let k = pi_a.len();
    if pi_b.len() != k || m_a.ncols() != k || m_b.ncols() != k || m_a.nrows() != m_b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "models of shape (k={}, n={}) and (k={}, n={})",
            k,
            m_a.nrows(),
            pi_b.len(),
            m_b.nrows()
        )));
    }
    if k > MAX_RELABEL_K {
        return Err(Error::EnumerationLimit { k, max: MAX_RELABEL_K });
    }
    // cost[j][l]: discrepancy when component j of a is matched to l of b
    let mut cost = vec![vec![T::zero(); k]; k];
    for j in 0..k {
        for l in 0..k {
            let mut c = (pi_a[j] - pi_b[l]).abs();
            for i in 0..m_a.nrows() {
                let d = (m_a[(i, j)] - m_b[(i, l)]).abs();
                if d > c || d.is_nan() {
                    c = d;
                }
            }
            cost[j][l] = c;
        }
    }
    let mut best: Option<T> = None;
    let mut used = vec![false; k];
    bottleneck_search(&cost, 0, T::zero(), &mut used, &mut best);
    Ok(best.unwrap_or_else(T::zero))
}

fn bottleneck_search<T: Scalar>(cost: &[Vec<T>], j: usize, current: T, used: &mut [bool], best: &mut Option<T>) {
    if let Some(b) = *best {
        if current >= b {
            return;
        }
    }
    if j == cost.len() {
        *best = Some(current);
        return;
    }
    for l in 0..cost.len() {
        if used[l] {
            continue;
        }
        used[l] = true;
        let c = if cost[j][l] > current { cost[j][l] } else { current };
        if c.is_finite() {
            bottleneck_search(cost, j + 1, c, used, best);
        }
        used[l] = false;
    }
}

/// `d_model`: L-infinity distance between parameters, minimized over all
/// relabelings of the latent variable. Requires `k <= 10`.
pub fn model_distance<T: Scalar>(a: &MixtureModel<T>, b: &MixtureModel<T>) -> Result<T> {
    parameter_distance(&a.pi, &a.m, &b.pi, &b.m)
}

/// `d_stat`: largest absolute difference over all `2^n` subset moments.
pub fn stat_distance<T: Scalar>(mu: &MomentVector<T>, other: &MomentVector<T>) -> Result<T> {
    if mu.n() != other.n() {
        return Err(Error::DimensionMismatch(format!(
            "moment vectors over n = {} and n = {}",
            mu.n(),
            other.n()
        )));
    }
    Ok(mu.values().iter().zip(other.values()).fold(T::zero(), |acc, (x, y)| {
        let d = (*x - *y).abs();
        if d > acc {
            d
        } else {
            acc
        }
    }))
}

/// Random member of the separated class, deterministic in `seed`.
///
/// Each row takes `k` sorted uniforms on `[0, 1 - (k-1) zeta]` and adds
/// `j * zeta` to the `j`-th; one column shuffle is shared by all rows.
/// Weights are uniform on the simplex, then mixed toward the uniform vector
/// just far enough to respect `pi_min`.
pub fn random_model<T: Scalar>(k: usize, n: usize, zeta: T, pi_min: T, seed: u64) -> Result<MixtureModel<T>> {
    if k == 0 || n == 0 {
        return Err(Error::Infeasible("k and n must be positive".into()));
    }
    let params = ModelClassParams::new(zeta, pi_min)?;
    let slack = T::tol(1e-12);
    let width = T::one() - T::from_count(k - 1) * params.zeta;
    if width < -slack {
        return Err(Error::Infeasible(format!(
            "(k - 1) * zeta = {} exceeds 1",
            T::from_count(k - 1) * params.zeta
        )));
    }
    let width = if width < T::zero() { T::zero() } else { width };
    let uniform = T::one() / T::from_count(k);
    if params.pi_min > uniform + slack {
        return Err(Error::Infeasible(format!(
            "k * pi_min = {} exceeds 1",
            T::from_count(k) * params.pi_min
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffle: Vec<usize> = (0..k).collect();
    for j in (1..k).rev() {
        let l = rng.gen_range(0..=j);
        shuffle.swap(j, l);
    }
    let mut m = DMatrix::zeros(n, k);
    for i in 0..n {
        let mut row: Vec<T> = (0..k).map(|_| width * T::lit(rng.gen::<f64>())).collect();
        row.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        for (j, x) in row.iter_mut().enumerate() {
            *x += T::from_count(j) * params.zeta;
            if *x > T::one() {
                *x = T::one();
            }
        }
        for j in 0..k {
            m[(i, j)] = row[shuffle[j]];
        }
    }

    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    let mut pi = DVector::from_fn(k, |j, _| T::lit(raw[j] / total));
    let lowest = pi.min();
    if lowest < params.pi_min {
        let t = if uniform - lowest > T::zero() {
            (params.pi_min - lowest) / (uniform - lowest) + slack
        } else {
            T::one()
        };
        if t >= T::one() {
            pi = DVector::from_element(k, uniform);
        } else {
            pi = pi.map(|p| p + t * (uniform - p));
        }
    }
    MixtureModel::new(pi, m)
}
