//! Hadamard products and extensions, Vandermonde matrices, the rank-one
//! annihilator witness, Kruskal rank and the singular value certificates
//! for separated models.
//!
//! Subsets are bitmasks: bit `b` set means source row `b` belongs to the
//! subset, and rows of an extension appear in ascending bitmask order. The
//! same convention indexes moment vectors and moment matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Largest number of source rows an extension may have.
pub const MAX_EXTENSION_ROWS: usize = 24;

/// Largest column count accepted by [`kruskal_rank`].
pub const MAX_KRUSKAL_COLUMNS: usize = 12;

/// Entrywise product.
pub fn hadamard_product<T: Scalar>(u: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "Hadamard product of lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(u.component_mul(v))
}

/// The `2^r x k` matrix whose row `S` is the entrywise product of the source
/// rows in `S`. Row `0` (the empty set) is all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct HadamardExtension<T: Scalar = f64> {
    r: usize,
    data: DMatrix<T>,
}

impl<T: Scalar> HadamardExtension<T> {
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn k(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.data
    }

    pub fn row(&self, mask: usize) -> DVector<T> {
        self.data.row(mask).transpose()
    }
}

/// Builds the extension row by row: `row(S) = row(S \ {b}) * source(b)` where
/// `b` is the lowest set bit of `S`.
pub fn hadamard_extension<T: Scalar>(rows: &DMatrix<T>) -> Result<HadamardExtension<T>> {
    let r = rows.nrows();
    if r > MAX_EXTENSION_ROWS {
        return Err(Error::TooLarge {
            what: "Hadamard extension rows",
            got: r,
            max: MAX_EXTENSION_ROWS,
        });
    }
    let k = rows.ncols();
    let size = 1usize << r;
    let mut data = DMatrix::zeros(size, k);
    for j in 0..k {
        let col = extension_column(rows.column(j).iter().copied(), r);
        data.set_column(j, &DVector::from_vec(col));
    }
    Ok(HadamardExtension { r, data })
}

/// One column of the extension, for source values `values` (length `r`).
pub(crate) fn extension_column<T: Scalar>(values: impl Iterator<Item = T>, r: usize) -> Vec<T> {
    let values: Vec<T> = values.collect();
    debug_assert_eq!(values.len(), r);
    let mut col = vec![T::zero(); 1usize << r];
    col[0] = T::one();
    for mask in 1..col.len() {
        let b = mask.trailing_zeros() as usize;
        col[mask] = col[mask & (mask - 1)] * values[b];
    }
    col
}

/// `r x k` Vandermonde matrix with entries `nodes[j]^i`, `i = 0..r`, and `0^0 = 1`.
pub fn vandermonde<T: Scalar>(nodes: &DVector<T>, r: usize) -> DMatrix<T> {
    let k = nodes.len();
    let mut v = DMatrix::zeros(r, k);
    for j in 0..k {
        let mut p = T::one();
        for i in 0..r {
            v[(i, j)] = p;
            p *= nodes[j];
        }
    }
    v
}

/// Rank-one vector `h` with `h_S = (-1)^{|S|} prod_{i not in S} m[i][i]`,
/// indexed over subsets of the `k - 1` rows of `m` (shape `(k-1) x k`).
///
/// Its inner product with column `j` of the Hadamard extension of `m` is
/// `prod_i (m[i][i] - m[i][j])`, which vanishes for every `j < k - 1`.
pub fn rank_one_annihilator<T: Scalar>(m: &DMatrix<T>) -> Result<DVector<T>> {
    let k = m.ncols();
    if k < 2 || m.nrows() + 1 != k {
        return Err(Error::DimensionMismatch(format!(
            "annihilator needs a (k-1) x k matrix with k >= 2, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let r = k - 1;
    let full = (1usize << r) - 1;
    let diag: Vec<T> = (0..r).map(|i| m[(i, i)]).collect();
    let h = DVector::from_fn(1usize << r, |mask, _| {
        let complement = full & !mask;
        let mut v = T::one();
        for (i, d) in diag.iter().enumerate() {
            if complement >> i & 1 == 1 {
                v *= *d;
            }
        }
        if mask.count_ones() % 2 == 1 {
            -v
        } else {
            v
        }
    });
    Ok(h)
}

/// Lower bound `(1/sqrt(k)) (zeta / (2 sqrt 5))^(k-1)` on `sigma_k` of the
/// Hadamard extension of any `zeta`-separated matrix with `k` columns.
pub fn sigma_k_lower_bound<T: Scalar>(k: usize, zeta: T) -> T {
    let ratio = zeta / (T::lit(2.0) * T::lit(5.0).sqrt());
    ratio.powi(k as i32 - 1) / T::from_count(k).sqrt()
}

/// Lower bound `pi_min * sigma_k_lower_bound(k, zeta)^2` on `sigma_k` of the
/// moment matrix `C_ST` of a separated model.
pub fn sigma_k_cst_lower_bound<T: Scalar>(k: usize, zeta: T, pi_min: T) -> T {
    let s = sigma_k_lower_bound(k, zeta);
    pi_min * s * s
}

/// Largest `r` such that every `r` columns of `a` are linearly independent,
/// with numerical rank decided by `sigma_r > 1e-9 sigma_1` of each submatrix.
pub fn kruskal_rank<T: Scalar>(a: &DMatrix<T>) -> Result<usize> {
    let cols = a.ncols();
    if cols > MAX_KRUSKAL_COLUMNS {
        return Err(Error::TooLarge {
            what: "Kruskal rank columns",
            got: cols,
            max: MAX_KRUSKAL_COLUMNS,
        });
    }
    let threshold = T::tol(1e-9);
    let mut rank = 0;
    for r in 1..=cols.min(a.nrows()) {
        let all_independent = (0u32..(1u32 << cols))
            .filter(|mask| mask.count_ones() as usize == r)
            .all(|mask| {
                let idx: Vec<usize> = (0..cols).filter(|c| mask >> c & 1 == 1).collect();
                let sub = a.select_columns(idx.iter());
                match linalg::singular_values(&sub) {
                    Ok(s) => s[0] > T::zero() && s[r - 1] > threshold * s[0],
                    Err(_) => false,
                }
            });
        if !all_independent {
            break;
        }
        rank = r;
    }
    Ok(rank)
}
