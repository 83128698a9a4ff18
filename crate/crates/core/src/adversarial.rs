//! Hard instances: models whose Hadamard extension is nearly singular, and
//! pairs of models that are far apart in parameters yet almost
//! indistinguishable from their moments.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hadamard::hadamard_extension;
use crate::linalg;
use crate::model::{model_distance, stat_distance, validate_membership, MixtureModel, ModelClassParams};
use crate::moments::exact_moments;
use crate::scalar::Scalar;

/// Largest `n` for which the full `2^n x k` extension is materialized.
pub const MAX_ADVERSARIAL_N: usize = 20;

/// Two models sharing `m` whose weights differ along the weakest direction
/// of `H(m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialPair<T: Scalar = f64> {
    pub base: MixtureModel<T>,
    pub alternate: MixtureModel<T>,
    /// `sigma_k(H(m))`.
    pub sigma: T,
    /// Unit right singular vector of `H(m)` for `sigma`.
    pub alpha: DVector<T>,
    pub eps: T,
    /// Measured `d_model(base, alternate)`.
    pub certified_model_gap: T,
    /// Measured `d_stat` between the exact moments of the two models.
    pub certified_stat_gap: T,
    /// Analytic upper bound on `sigma`, when the construction provides one.
    pub sigma_upper_bound: Option<T>,
}

/// `n` identical rows `(0, zeta, 2 zeta, ..., (k-1) zeta)` with uniform weights.
pub fn near_singular_model<T: Scalar>(k: usize, n: usize, zeta: T) -> Result<MixtureModel<T>> {
    if k == 0 || n == 0 {
        return Err(Error::Infeasible("k and n must be positive".into()));
    }
    if !(zeta > T::zero()) || T::from_count(k - 1) * zeta > T::one() + T::tol(1e-12) {
        return Err(Error::Infeasible(format!(
            "zeta = {zeta} does not fit k = {k} levels in [0, 1]"
        )));
    }
    if n + 1 < k {
        return Err(Error::Infeasible(format!("n = {n} is smaller than k - 1 = {}", k - 1)));
    }
    let m = DMatrix::from_fn(n, k, |_, j| {
        let v = T::from_count(j) * zeta;
        if v > T::one() {
            T::one()
        } else {
            v
        }
    });
    let pi = DVector::from_element(k, T::one() / T::from_count(k));
    MixtureModel::new(pi, m)
}

/// `n 2^n (k zeta)^k`, the upper bound on `sigma_k(H(m))` for
/// [`near_singular_model`].
pub fn near_singular_sigma_bound<T: Scalar>(k: usize, n: usize, zeta: T) -> T {
    T::from_count(n) * T::lit(2.0).powi(n as i32) * (T::from_count(k) * zeta).powi(k as i32)
}

/// Perturbs the weights of `model` along the smallest right singular vector
/// `alpha` of `H(m)`: `pi^ = pi + 2 sqrt(k) eps (alpha - (1^T alpha) e_1)`.
///
/// Both gaps are re-measured from scratch and the result is rejected if
/// `d_model <= eps`, `d_stat > 4 k sigma eps` or `min pi^ < pi_min / 4`.
pub fn confusable_pair<T: Scalar>(
    model: &MixtureModel<T>,
    params: &ModelClassParams<T>,
    eps: T,
) -> Result<AdversarialPair<T>> {
    let k = model.k();
    let n = model.n();
    if n > MAX_ADVERSARIAL_N {
        return Err(Error::TooLarge {
            what: "observables for the adversarial construction",
            got: n,
            max: MAX_ADVERSARIAL_N,
        });
    }
    let report = validate_membership(model, params);
    if !report.member {
        return Err(Error::PreconditionFailed(format!(
            "model is not in the separated class: {:?}",
            report.violation
        )));
    }
    let sqrt_k = T::from_count(k).sqrt();
    let eps_cap = {
        let a = params.pi_min / (T::lit(4.0) * sqrt_k);
        if a < params.zeta {
            a
        } else {
            params.zeta
        }
    };
    if !(eps > T::zero() && eps < eps_cap) {
        return Err(Error::PreconditionFailed(format!(
            "eps = {eps} must satisfy 0 < eps < min(pi_min / (4 sqrt k), zeta) = {eps_cap}"
        )));
    }
    let h = hadamard_extension(model.m())?.into_matrix();
    let (sigmas, v) = linalg::right_singular_vectors(&h)?;
    let sigma = sigmas[k - 1];
    if !(sigma < T::lit(0.5)) {
        return Err(Error::PreconditionFailed(format!(
            "sigma_k(H(m)) = {sigma} must be below 1/2"
        )));
    }
    let mut alpha: DVector<T> = v.column(k - 1).into_owned();
    let lead = alpha.iamax();
    if alpha[lead] < T::zero() {
        alpha = -alpha;
    }
    let mass = alpha.sum();
    let mut direction = alpha.clone();
    direction[0] -= mass;
    let pi_hat = model.pi() + direction * (T::lit(2.0) * sqrt_k * eps);
    let alternate = MixtureModel::new(pi_hat, model.m().clone())?;

    let certified_model_gap = model_distance(model, &alternate)?;
    let certified_stat_gap = stat_distance(&exact_moments(model)?, &exact_moments(&alternate)?)?;
    let stat_cap = T::lit(4.0) * T::from_count(k) * sigma * eps;
    if !(certified_model_gap > eps) {
        return Err(Error::CertificateFailed(format!(
            "d_model = {certified_model_gap} does not exceed eps = {eps}"
        )));
    }
    if !(certified_stat_gap <= stat_cap) {
        return Err(Error::CertificateFailed(format!(
            "d_stat = {certified_stat_gap} exceeds 4 k sigma eps = {stat_cap}"
        )));
    }
    let floor = params.pi_min / T::lit(4.0);
    if alternate.min_pi() < floor {
        return Err(Error::CertificateFailed(format!(
            "min alternate weight {} below pi_min / 4 = {floor}",
            alternate.min_pi()
        )));
    }
    Ok(AdversarialPair {
        base: model.clone(),
        alternate,
        sigma,
        alpha,
        eps,
        certified_model_gap,
        certified_stat_gap,
        sigma_upper_bound: None,
    })
}

/// Separation and weight floor used by [`lower_bound_instance`]: `1/(8k)`, `1/(4k)`.
pub fn lower_bound_params<T: Scalar>(k: usize) -> Result<ModelClassParams<T>> {
    ModelClassParams::new(T::one() / T::from_count(8 * k), T::one() / T::from_count(4 * k))
}

/// Default `eps`: half of `min(pi_min / (4 sqrt k), zeta)` for [`lower_bound_params`].
pub fn default_lower_bound_eps<T: Scalar>(k: usize) -> Result<T> {
    let p = lower_bound_params::<T>(k)?;
    let a = p.pi_min / (T::lit(4.0) * T::from_count(k).sqrt());
    Ok(if a < p.zeta { a } else { p.zeta } / T::lit(2.0))
}

/// The witness pair on `n = 2k - 1` observables with `zeta = 1/(8k)` and
/// `pi_min = 1/(4k)`. Requires the analytic bound `(2k-1) 2^(2k-1) (k zeta)^k`
/// on `sigma` to be below `1/2`.
pub fn lower_bound_instance<T: Scalar>(k: usize, eps: T) -> Result<AdversarialPair<T>> {
    if k < 2 {
        return Err(Error::PreconditionFailed(
            "the lower-bound construction needs k >= 2".into(),
        ));
    }
    let n = 2 * k - 1;
    if n > MAX_ADVERSARIAL_N {
        return Err(Error::TooLarge {
            what: "observables for the adversarial construction",
            got: n,
            max: MAX_ADVERSARIAL_N,
        });
    }
    let params = lower_bound_params::<T>(k)?;
    let bound = near_singular_sigma_bound(k, n, params.zeta);
    if !(bound < T::lit(0.5)) {
        return Err(Error::PreconditionFailed(format!(
            "sigma bound {bound} is not below 1/2"
        )));
    }
    let base = near_singular_model(k, n, params.zeta)?;
    let mut pair = confusable_pair(&base, &params, eps)?;
    if pair.sigma > bound {
        return Err(Error::CertificateFailed(format!(
            "measured sigma {} exceeds the analytic bound {bound}",
            pair.sigma
        )));
    }
    pair.sigma_upper_bound = Some(bound);
    Ok(pair)
}

/// `max_i prod_{j != i} max(1, |x_j|) / |x_i - x_j|`, a lower bound on
/// `||V(nodes)^-1||_inf`.
pub fn vandermonde_inverse_norm_bound<T: Scalar>(nodes: &DVector<T>) -> Result<T> {
    let k = nodes.len();
    for i in 0..k {
        for j in i + 1..k {
            if nodes[i] == nodes[j] {
                return Err(Error::RepeatedNodes(i, j));
            }
        }
    }
    let mut best = T::zero();
    for i in 0..k {
        let mut prod = T::one();
        for j in 0..k {
            if j != i {
                let top = if nodes[j].abs() > T::one() {
                    nodes[j].abs()
                } else {
                    T::one()
                };
                prod *= top / (nodes[i] - nodes[j]).abs();
            }
        }
        if prod > best {
            best = prod;
        }
    }
    Ok(best)
}
