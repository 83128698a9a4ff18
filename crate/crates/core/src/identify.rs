//! Parameter identification from multilinear moments by simultaneous
//! diagonalization of the moment pencil `(C_ST1, C_ST)`.
//!
//! For a partition `(S, T, anchor)` the moment matrices factor as
//! `C = H(m[S]) diag(pi) H(m[T])^T` and `C1 = H(m[S]) diag(pi * m_anchor) H(m[T])^T`.
//! After projecting onto the top `k` singular subspaces of `C`, the
//! eigenvectors of `C1 C^-1` recover `H(m[S])` (and those of `C1^T C^-T`
//! recover `H(m[T])`) up to column scale, with the anchor means as the
//! eigenvalues. Columns are rescaled so the empty-set row of the lifted
//! factor is all ones, after which `pi` and the remaining rows of `m` come
//! from small linear solves.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{parameter_distance, MixtureModel};
use crate::moments::{
    assemble_pair_matrices, global_mask, moments_of_parameters, restrict_moments, MomentVector, SubsetPartition,
};
use crate::scalar::Scalar;

/// Tolerances and search limits. Relative tolerances are lifted with
/// [`Scalar::tol`].
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifyOptions {
    /// `sigma_k(C)` must exceed `rank_tol * sigma_1(C)`.
    pub rank_tol: f64,
    /// Adjacent sorted eigenvalues must differ by more than
    /// `sep_tol * max(spread, largest magnitude)`.
    pub sep_tol: f64,
    /// Imaginary-part tolerance relative to the pencil matrix norm.
    pub imag_tol: f64,
    /// Smallest `|pi_j|` that may be divided by.
    pub pi_tol: f64,
    /// Smallest `|(U S)_{empty, j}|` accepted by the column normalization.
    pub row0_tol: f64,
    /// Clamp negative weights to zero and renormalize the reported `pi`.
    pub project_simplex: bool,
    /// Smallest `|S| = |T|` tried by the search; default `ceil(log2 k)`.
    pub min_subset_size: Option<usize>,
    pub max_candidates: usize,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        Self {
            rank_tol: 1e-10,
            sep_tol: 1e-7,
            imag_tol: 1e-6,
            pi_tol: 1e-10,
            row0_tol: 1e-10,
            project_simplex: false,
            min_subset_size: None,
            max_candidates: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics<T: Scalar = f64> {
    pub sigma_k_ctilde: T,
    pub sigma_1_ctilde: T,
    /// Largest imaginary part discarded by either eigendecomposition.
    pub eig_imag_residual: T,
    /// Largest eigenpair residual of either eigendecomposition.
    pub eig_defect: T,
    /// `||H(m~[A]) pi~ - mu^[2^A]||_inf` over `A = S ∪ T ∪ {anchor}`.
    pub fit_residual: T,
    /// Factors applied to the columns of the S-side eigenvectors.
    pub column_scales: Vec<T>,
    /// Factors applied to the columns of the T-side eigenvectors.
    pub t_column_scales: Vec<T>,
    /// Sorted eigenvalues of `C1 C^-1`: the anchor means.
    pub anchor_eigenvalues: Vec<T>,
    /// Smallest gap between adjacent anchor eigenvalues.
    pub min_eigen_gap: T,
    /// Largest difference between the two sorted spectra.
    pub spectrum_mismatch: T,
    /// `|S| = |T| = k - 1`, the block size the accuracy guarantee is stated for.
    pub full_size_blocks: bool,
}

/// Internal factors kept for extending the estimate to further observables.
#[derive(Debug, Clone, PartialEq)]
pub struct Factors<T: Scalar = f64> {
    pub u_hat: DMatrix<T>,
    pub s_hat: DMatrix<T>,
    pub v_hat: DMatrix<T>,
    pub t_hat: DMatrix<T>,
    /// Weights before any simplex projection.
    pub pi_raw: DVector<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationResult<T: Scalar = f64> {
    pub pi_tilde: DVector<T>,
    /// One row per entry of `observables`; columns ordered by descending
    /// anchor mean.
    pub m_tilde: DMatrix<T>,
    /// Sorted `S ∪ T ∪ {anchor}`.
    pub observables: Vec<usize>,
    pub partition: SubsetPartition,
    pub diagnostics: Diagnostics<T>,
    pub factors: Factors<T>,
}

impl<T: Scalar> IdentificationResult<T> {
    pub fn k(&self) -> usize {
        self.pi_tilde.len()
    }

    /// Estimated means of `observable`, if it was part of the identification.
    pub fn row(&self, observable: usize) -> Option<DVector<T>> {
        self.observables
            .iter()
            .position(|&o| o == observable)
            .map(|r| self.m_tilde.row(r).transpose())
    }

    /// `d_model` between the estimate and `model` restricted to the
    /// identified observables.
    pub fn distance_to(&self, model: &MixtureModel<T>) -> Result<T> {
        let truth = model.restrict_rows(&self.observables)?;
        parameter_distance(&self.pi_tilde, &self.m_tilde, truth.pi(), truth.m())
    }
}

fn ceil_log2(k: usize) -> usize {
    let mut s = 0;
    while (1usize << s) < k {
        s += 1;
    }
    s
}

fn max_abs<T: Scalar>(it: impl Iterator<Item = T>) -> T {
    it.fold(T::zero(), |acc, x| {
        let a = x.abs();
        if a > acc || a.is_nan() {
            a
        } else {
            acc
        }
    })
}

fn check_spectrum<T: Scalar>(values: &DVector<T>, sep_tol: f64) -> Result<T> {
    let k = values.len();
    if k < 2 {
        return Ok(T::zero());
    }
    let spread = values[0] - values[k - 1];
    let scale = max_abs(values.iter().copied());
    let scale = if spread > scale { spread } else { scale };
    let threshold = T::tol(sep_tol) * scale;
    let mut min_gap = spread;
    for j in 1..k {
        let gap = values[j - 1] - values[j];
        if gap < min_gap {
            min_gap = gap;
        }
    }
    if !(min_gap > threshold) {
        return Err(Error::EigenvalueCollision {
            gap: min_gap.to_f64_lossy(),
            threshold: threshold.to_f64_lossy(),
        });
    }
    Ok(min_gap)
}

/// Rescales each column of `eigvecs` so the empty-set row of `basis * eigvecs`
/// equals one; returns the scales applied.
fn normalize_columns<T: Scalar>(basis: &DMatrix<T>, eigvecs: &mut DMatrix<T>, row0_tol: f64) -> Result<Vec<T>> {
    let lifted_row0 = basis.row(0) * &*eigvecs;
    let tol = T::tol(row0_tol);
    let mut scales = Vec::with_capacity(eigvecs.ncols());
    for j in 0..eigvecs.ncols() {
        let v = lifted_row0[j];
        if !(v.abs() >= tol) {
            return Err(Error::NormalizationUnstable {
                column: j,
                value: v.to_f64_lossy(),
            });
        }
        let scale = T::one() / v;
        eigvecs.column_mut(j).scale_mut(scale);
        scales.push(scale);
    }
    Ok(scales)
}

fn divide_by_pi<T: Scalar>(x: &DMatrix<T>, pi: &DVector<T>, pi_tol: f64) -> Result<DMatrix<T>> {
    let tol = T::tol(pi_tol);
    if let Some(j) = pi.iter().position(|p| !(p.abs() > tol)) {
        return Err(Error::DegeneratePi {
            index: j,
            value: pi[j].to_f64_lossy(),
        });
    }
    // x is k x r (one column per observable); result is r x k
    Ok(DMatrix::from_fn(x.ncols(), x.nrows(), |r, j| x[(j, r)] / pi[j]))
}

fn project_to_simplex<T: Scalar>(pi: &DVector<T>) -> DVector<T> {
    let clamped = pi.map(|p| if p > T::zero() { p } else { T::zero() });
    let total = clamped.sum();
    if total > T::zero() {
        clamped / total
    } else {
        DVector::from_element(pi.len(), T::one() / T::from_count(pi.len()))
    }
}

/// Identifies `(pi, m)` on `S ∪ T ∪ {anchor}` from (approximate) moments.
pub fn identify<T: Scalar>(
    mu_hat: &MomentVector<T>,
    k: usize,
    partition: &SubsetPartition,
    opts: &IdentifyOptions,
) -> Result<IdentificationResult<T>> {
    if k == 0 {
        return Err(Error::InvalidModel("k must be positive".into()));
    }
    let (s_idx, t_idx) = (partition.s(), partition.t());
    if (1usize << s_idx.len()) < k || (1usize << t_idx.len()) < k {
        return Err(Error::InvalidPartition(format!(
            "blocks of sizes {} and {} cannot carry k = {k} components (need 2^|S|, 2^|T| >= k)",
            s_idx.len(),
            t_idx.len()
        )));
    }
    let pm = assemble_pair_matrices(mu_hat, partition)?;

    let dec = linalg::svd(&pm.c)?;
    let sigma_1 = dec.sigma[0];
    let sigma_k = dec.sigma[k - 1];
    let threshold = T::tol(opts.rank_tol) * sigma_1;
    if !(sigma_k > threshold) {
        return Err(Error::RankDeficient {
            sigma_k: sigma_k.to_f64_lossy(),
            threshold: threshold.to_f64_lossy(),
        });
    }
    let u_hat = dec.u.columns(0, k).into_owned();
    let v_hat = dec.v.columns(0, k).into_owned();
    let c_proj = u_hat.transpose() * &pm.c * &v_hat;
    let c1_proj = u_hat.transpose() * &pm.c1 * &v_hat;

    // C1 C^-1 = (C^-T C1^T)^T and C1^T C^-T = (C^-1 C1)^T
    let pencil_s = linalg::solve_matrix(&c_proj.transpose(), &c1_proj.transpose())?.transpose();
    let pencil_t = linalg::solve_matrix(&c_proj, &c1_proj)?.transpose();
    let imag_s = T::tol(opts.imag_tol) * linalg::spectral_norm(&pencil_s)?;
    let imag_t = T::tol(opts.imag_tol) * linalg::spectral_norm(&pencil_t)?;
    let eig_s = linalg::eig_real(&pencil_s, Some(imag_s))?;
    let eig_t = linalg::eig_real(&pencil_t, Some(imag_t))?;
    let min_gap = check_spectrum(&eig_s.eigenvalues, opts.sep_tol)?;
    check_spectrum(&eig_t.eigenvalues, opts.sep_tol)?;

    let mut s_hat = eig_s.eigenvectors.clone();
    let mut t_hat = eig_t.eigenvectors.clone();
    let column_scales = normalize_columns(&u_hat, &mut s_hat, opts.row0_tol)?;
    let t_column_scales = normalize_columns(&v_hat, &mut t_hat, opts.row0_tol)?;

    // pi from the empty-set column; T-side and anchor rows share the S-side solve
    let mut rhs_s = DMatrix::zeros(pm.c.nrows(), 1 + t_idx.len() + 1);
    rhs_s.set_column(0, &pm.c.column(0));
    for b in 0..t_idx.len() {
        rhs_s.set_column(1 + b, &pm.c.column(1 << b));
    }
    rhs_s.set_column(1 + t_idx.len(), &pm.c1.column(0));
    let sol_s = linalg::solve_matrix(&s_hat, &(u_hat.transpose() * rhs_s))?;
    let pi_raw: DVector<T> = sol_s.column(0).into_owned();
    let rows_s = divide_by_pi(&sol_s.columns(1, t_idx.len() + 1).into_owned(), &pi_raw, opts.pi_tol)?;

    let mut rhs_t = DMatrix::zeros(pm.c.ncols(), s_idx.len());
    for a in 0..s_idx.len() {
        rhs_t.set_column(a, &pm.c.row(1 << a).transpose());
    }
    let rows_t = if s_idx.is_empty() {
        DMatrix::zeros(0, k)
    } else {
        let sol_t = linalg::solve_matrix(&t_hat, &(v_hat.transpose() * rhs_t))?;
        divide_by_pi(&sol_t, &pi_raw, opts.pi_tol)?
    };

    let observables = partition.observables();
    let mut m_tilde = DMatrix::zeros(observables.len(), k);
    let position = |o: usize| observables.binary_search(&o).expect("observable in partition");
    for (b, &i) in t_idx.iter().enumerate() {
        m_tilde.set_row(position(i), &rows_s.row(b));
    }
    m_tilde.set_row(position(partition.anchor()), &rows_s.row(t_idx.len()));
    for (a, &i) in s_idx.iter().enumerate() {
        m_tilde.set_row(position(i), &rows_t.row(a));
    }

    let pi_tilde = if opts.project_simplex {
        project_to_simplex(&pi_raw)
    } else {
        pi_raw.clone()
    };
    let fit = moments_of_parameters(&pi_tilde, &m_tilde)?;
    let observed = restrict_moments(mu_hat, &observables)?;
    let fit_residual = max_abs(fit.iter().zip(observed.values()).map(|(a, b)| *a - *b));

    let spectrum_mismatch = max_abs(
        eig_s
            .eigenvalues
            .iter()
            .zip(eig_t.eigenvalues.iter())
            .map(|(a, b)| *a - *b),
    );
    let bigger = |a: T, b: T| if a > b { a } else { b };
    let diagnostics = Diagnostics {
        sigma_k_ctilde: sigma_k,
        sigma_1_ctilde: sigma_1,
        eig_imag_residual: bigger(eig_s.max_imag_residual, eig_t.max_imag_residual),
        eig_defect: bigger(eig_s.max_defect, eig_t.max_defect),
        fit_residual,
        column_scales,
        t_column_scales,
        anchor_eigenvalues: eig_s.eigenvalues.iter().copied().collect(),
        min_eigen_gap: min_gap,
        spectrum_mismatch,
        full_size_blocks: s_idx.len() + 1 == k && t_idx.len() + 1 == k,
    };
    Ok(IdentificationResult {
        pi_tilde,
        m_tilde,
        observables,
        partition: partition.clone(),
        diagnostics,
        factors: Factors {
            u_hat,
            s_hat,
            v_hat,
            t_hat,
            pi_raw,
        },
    })
}

fn combinations(pool: &[usize], size: usize) -> Vec<Vec<usize>> {
    fn rec(pool: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..pool.len() {
            if pool.len() - i < size - cur.len() {
                break;
            }
            cur.push(pool[i]);
            rec(pool, size, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(pool, size, 0, &mut Vec::with_capacity(size), &mut out);
    out
}

fn binomial(n: usize, r: usize) -> usize {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: usize = 1;
    for i in 0..r {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Subset sizes tried by [`identify_search`] for `k` components.
pub fn search_sizes(k: usize, opts: &IdentifyOptions) -> std::ops::RangeInclusive<usize> {
    let max = k.saturating_sub(1);
    let min = opts.min_subset_size.unwrap_or_else(|| ceil_log2(k)).min(max);
    min..=max
}

/// Number of partitions [`identify_search`] would evaluate.
pub fn candidate_count(n: usize, k: usize, opts: &IdentifyOptions) -> usize {
    search_sizes(k, opts)
        .map(|s| {
            binomial(n, s)
                .saturating_mul(binomial(n.saturating_sub(s), s))
                .saturating_mul(n.saturating_sub(2 * s))
        })
        .fold(0usize, |a, b| a.saturating_add(b))
}

/// All partitions with `|S| = |T|` in [`search_sizes`], in lexicographic
/// `(|S|, S, T, anchor)` order.
pub fn candidate_partitions(n: usize, k: usize, opts: &IdentifyOptions) -> Vec<SubsetPartition> {
    let all: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    for s in search_sizes(k, opts) {
        for s_set in combinations(&all, s) {
            let rest: Vec<usize> = all.iter().copied().filter(|i| !s_set.contains(i)).collect();
            for t_set in combinations(&rest, s) {
                for &anchor in rest.iter().filter(|i| !t_set.contains(i)) {
                    out.push(
                        SubsetPartition::new(s_set.clone(), t_set.clone(), anchor).expect("disjoint by construction"),
                    );
                }
            }
        }
    }
    out
}

/// Runs [`identify`] on every candidate partition and keeps the estimate whose
/// implied moments fit the observed ones best; ties go to the
/// lexicographically smallest `(|S|, S, T, anchor)`.
pub fn identify_search<T: Scalar>(
    mu_hat: &MomentVector<T>,
    k: usize,
    opts: &IdentifyOptions,
) -> Result<IdentificationResult<T>> {
    let n = mu_hat.n();
    if k == 0 || n + 1 < 2 * k {
        return Err(Error::PreconditionFailed(format!(
            "search needs n >= 2k - 1 observables, got n = {n} for k = {k}"
        )));
    }
    if let Some(min) = opts.min_subset_size {
        if min + 1 > k && k > 1 {
            return Err(Error::PreconditionFailed(format!(
                "min_subset_size = {min} exceeds k - 1 = {}",
                k - 1
            )));
        }
    }
    let count = candidate_count(n, k, opts);
    if count > opts.max_candidates {
        return Err(Error::TooLarge {
            what: "candidate partitions",
            got: count,
            max: opts.max_candidates,
        });
    }
    let candidates = candidate_partitions(n, k, opts);
    let tried = candidates.len();
    candidates
        .into_par_iter()
        .filter_map(|p| identify(mu_hat, k, &p, opts).ok())
        .filter(|r| r.diagnostics.fit_residual.is_finite())
        .min_by(|a, b| {
            a.diagnostics
                .fit_residual
                .partial_cmp(&b.diagnostics.fit_residual)
                .expect("finite residuals")
                .then_with(|| a.partition.sort_key().cmp(&b.partition.sort_key()))
        })
        .ok_or(Error::NoViableCandidate { tried })
}

/// Estimates every observable's means from the T-side factors of `result`.
///
/// Rows already identified are copied; each other observable `i` solves
/// `T^ diag(pi~) m_i = V^T (mu^(R ∪ {i}))_{R ⊆ T}`. Returns an `n x k` matrix.
pub fn extend_to_all_observables<T: Scalar>(
    result: &IdentificationResult<T>,
    mu_hat: &MomentVector<T>,
    opts: &IdentifyOptions,
) -> Result<DMatrix<T>> {
    let n = mu_hat.n();
    let k = result.k();
    let pi = &result.factors.pi_raw;
    let tol = T::tol(opts.pi_tol);
    if let Some(j) = pi.iter().position(|p| !(p.abs() > tol)) {
        return Err(Error::DegeneratePi {
            index: j,
            value: pi[j].to_f64_lossy(),
        });
    }
    if result.observables.last().is_some_and(|&o| o >= n) {
        return Err(Error::IndexOutOfRange(format!(
            "result uses observables {:?} but moments cover n = {n}",
            result.observables
        )));
    }
    let t_idx = result.partition.t();
    let missing: Vec<usize> = (0..n)
        .filter(|i| result.observables.binary_search(i).is_err())
        .collect();
    let mut full = DMatrix::zeros(n, k);
    for (r, &o) in result.observables.iter().enumerate() {
        full.set_row(o, &result.m_tilde.row(r));
    }
    if missing.is_empty() {
        return Ok(full);
    }
    let size = 1usize << t_idx.len();
    let values = mu_hat.values();
    let rhs = DMatrix::from_fn(size, missing.len(), |b, c| {
        values[global_mask(b, t_idx) | (1 << missing[c])]
    });
    let sol = linalg::solve_matrix(&result.factors.t_hat, &(result.factors.v_hat.transpose() * rhs))?;
    let rows = divide_by_pi(&sol, pi, opts.pi_tol)?;
    for (c, &i) in missing.iter().enumerate() {
        full.set_row(i, &rows.row(c));
    }
    Ok(full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::model_distance;
    use crate::moments::exact_moments;

    fn model(pi: &[f64], rows: &[&[f64]]) -> MixtureModel {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        MixtureModel::from_rows(pi.to_vec(), &rows).unwrap()
    }

    #[test]
    fn single_component() {
        let truth = model(&[1.0], &[&[0.3], &[0.6], &[0.8]]);
        let mu = exact_moments(&truth).unwrap();
        let p = SubsetPartition::new(vec![], vec![], 1).unwrap();
        let r = identify(&mu, 1, &p, &IdentifyOptions::default()).unwrap();
        assert!((r.pi_tilde[0] - 1.0).abs() < 1e-14);
        assert!((r.row(1).unwrap()[0] - 0.6).abs() < 1e-14);
        let full = extend_to_all_observables(&r, &mu, &IdentifyOptions::default()).unwrap();
        for i in 0..3 {
            assert!((full[(i, 0)] - truth.m()[(i, 0)]).abs() < 1e-14);
        }
    }

    #[test]
    fn two_components_three_observables() {
        let truth = model(&[0.3, 0.7], &[&[0.1, 0.9], &[0.2, 0.8], &[0.3, 0.7]]);
        let mu = exact_moments(&truth).unwrap();
        let p = SubsetPartition::new(vec![1], vec![2], 0).unwrap();
        let r = identify(&mu, 2, &p, &IdentifyOptions::default()).unwrap();
        assert!(r.distance_to(&truth).unwrap() <= 1e-8);
        assert!(r.diagnostics.fit_residual < 1e-12);
        assert!(r.diagnostics.full_size_blocks);
        // columns sorted by descending anchor mean
        assert!(r.diagnostics.anchor_eigenvalues[0] > r.diagnostics.anchor_eigenvalues[1]);
        assert!((r.diagnostics.anchor_eigenvalues[0] - 0.9).abs() < 1e-9);
    }

    #[test]
    fn duplicate_columns_never_pass_silently() {
        let truth = model(&[0.4, 0.6], &[&[0.5, 0.5], &[0.2, 0.2], &[0.7, 0.7]]);
        let mu = exact_moments(&truth).unwrap();
        let p = SubsetPartition::new(vec![1], vec![2], 0).unwrap();
        let err = identify(&mu, 2, &p, &IdentifyOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::RankDeficient { .. } | Error::EigenvalueCollision { .. }
        ));
    }

    #[test]
    fn unseparated_anchor_is_a_collision() {
        let truth = model(&[0.4, 0.6], &[&[0.5, 0.5], &[0.2, 0.9], &[0.7, 0.1]]);
        let mu = exact_moments(&truth).unwrap();
        let p = SubsetPartition::new(vec![1], vec![2], 0).unwrap();
        let err = identify(&mu, 2, &p, &IdentifyOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EigenvalueCollision { .. }));
    }

    #[test]
    fn blocks_too_small_for_k() {
        let truth = model(
            &[0.2, 0.3, 0.5],
            &[&[0.1, 0.5, 0.9], &[0.2, 0.6, 0.9], &[0.7, 0.1, 0.4]],
        );
        let mu = exact_moments(&truth).unwrap();
        let p = SubsetPartition::new(vec![1], vec![2], 0).unwrap();
        assert!(matches!(
            identify(&mu, 3, &p, &IdentifyOptions::default()),
            Err(Error::InvalidPartition(_))
        ));
    }

    #[test]
    fn projection_is_opt_in() {
        let truth = model(&[0.3, 0.7], &[&[0.1, 0.9], &[0.2, 0.8], &[0.3, 0.7]]);
        let mu = exact_moments(&truth)
            .unwrap()
            .perturbed(|mask| if mask % 2 == 0 { 1e-4 } else { -1e-4 });
        let p = SubsetPartition::new(vec![1], vec![2], 0).unwrap();
        let raw = identify(&mu, 2, &p, &IdentifyOptions::default()).unwrap();
        let opts = IdentifyOptions {
            project_simplex: true,
            ..Default::default()
        };
        let projected = identify(&mu, 2, &p, &opts).unwrap();
        assert!((projected.pi_tilde.sum() - 1.0).abs() < 1e-14);
        assert!(projected.pi_tilde.iter().all(|&p| p >= 0.0));
        assert_eq!(raw.factors.pi_raw, projected.factors.pi_raw);
        assert_eq!(raw.pi_tilde, raw.factors.pi_raw);
    }

    #[test]
    fn extension_examples() {
        let truth = model(
            &[0.35, 0.65],
            &[&[0.1, 0.9], &[0.2, 0.8], &[0.3, 0.7], &[0.55, 0.15], &[0.05, 0.95]],
        );
        let mu = exact_moments(&truth).unwrap();
        let p = SubsetPartition::new(vec![1], vec![2], 0).unwrap();
        let opts = IdentifyOptions::default();
        let r = identify(&mu, 2, &p, &opts).unwrap();
        let full = extend_to_all_observables(&r, &mu, &opts).unwrap();
        // identified rows are reproduced exactly
        for &o in &r.observables {
            assert!((full.row(o).transpose() - r.row(o).unwrap()).amax() <= 1e-12);
        }
        let est = MixtureModel::new(
            r.pi_tilde.map(|p| p / r.pi_tilde.sum()),
            full.map(|x| x.clamp(0.0, 1.0)),
        )
        .unwrap();
        assert!(model_distance(&est, &truth).unwrap() <= 1e-8);
    }

    #[test]
    fn extension_rejects_zero_weight() {
        let truth = model(&[0.3, 0.7], &[&[0.1, 0.9], &[0.2, 0.8], &[0.3, 0.7], &[0.4, 0.5]]);
        let mu = exact_moments(&truth).unwrap();
        let p = SubsetPartition::new(vec![1], vec![2], 0).unwrap();
        let mut r = identify(&mu, 2, &p, &IdentifyOptions::default()).unwrap();
        r.factors.pi_raw[1] = 0.0;
        assert!(matches!(
            extend_to_all_observables(&r, &mu, &IdentifyOptions::default()),
            Err(Error::DegeneratePi { index: 1, .. })
        ));
    }

    #[test]
    fn candidate_enumeration() {
        let opts = IdentifyOptions::default();
        // n = 3, k = 2: S and T singletons, anchor the remaining observable
        let c = candidate_partitions(3, 2, &opts);
        assert_eq!(c.len(), 6);
        assert_eq!(candidate_count(3, 2, &opts), 6);
        assert_eq!(c[0], SubsetPartition::new(vec![0], vec![1], 2).unwrap());
        assert_eq!(candidate_count(8, 3, &opts), 28 * 15 * 4);
        assert_eq!(candidate_partitions(8, 3, &opts).len(), 28 * 15 * 4);
        assert_eq!(search_sizes(4, &opts), 2..=3);
        assert_eq!(search_sizes(1, &opts), 0..=0);
    }

    #[test]
    fn search_needs_enough_observables() {
        let truth = model(&[0.3, 0.7], &[&[0.1, 0.9], &[0.2, 0.8]]);
        let mu = exact_moments(&truth).unwrap();
        assert!(matches!(
            identify_search(&mu, 2, &IdentifyOptions::default()),
            Err(Error::PreconditionFailed(_))
        ));
        let opts = IdentifyOptions {
            max_candidates: 1,
            ..Default::default()
        };
        let truth = model(&[0.3, 0.7], &[&[0.1, 0.9], &[0.2, 0.8], &[0.3, 0.7]]);
        let mu = exact_moments(&truth).unwrap();
        assert!(matches!(identify_search(&mu, 2, &opts), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn search_reports_when_nothing_works() {
        let truth = model(&[0.3, 0.7], &[&[0.5, 0.5], &[0.5, 0.5], &[0.5, 0.5]]);
        let mu = exact_moments(&truth).unwrap();
        assert_eq!(
            identify_search(&mu, 2, &IdentifyOptions::default()).unwrap_err(),
            Error::NoViableCandidate { tried: 6 }
        );
    }
}
