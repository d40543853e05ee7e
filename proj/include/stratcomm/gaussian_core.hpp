#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "stratcomm/errors.hpp"
#include "stratcomm/types.hpp"

namespace stratcomm {

using IndexSet = std::vector<Eigen::Index>;

/// MMSE coefficients and residual variance of target given a set of variables.
struct ConditionalResult {
    Eigen::VectorXd coefficients;  ///< one per conditioning variable, in `given` order
    double residual_variance = 0.0;
};

namespace detail {

/// Lower-triangular Cholesky factor under a strict pivot policy: a pivot that
/// is negative, non-finite, or below 1e-12 times the variable's own variance
/// fails the whole factorization. Near-singular matrices are rejected, never
/// regularized. The per-variable floor keeps legitimately heteroscale blocks
/// (e.g. a huge test-channel noise next to a unit-variance W) factorable.
inline std::optional<Eigen::MatrixXd> cholesky_lower(const Eigen::MatrixXd& m) {
    const Eigen::Index n = m.rows();
    if (m.cols() != n) return std::nullopt;
    Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double pivot = m(j, j) - lower.row(j).head(j).squaredNorm();
        if (!std::isfinite(pivot) || !(pivot > 1e-12 * m(j, j))) return std::nullopt;
        lower(j, j) = std::sqrt(pivot);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double s =
                m(i, j) - (lower.row(i).head(j).array() * lower.row(j).head(j).array()).sum();
            lower(i, j) = s / lower(j, j);
        }
    }
    return lower;
}

inline double logdet_from_cholesky(const Eigen::MatrixXd& lower) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < lower.rows(); ++i) acc += std::log(lower(i, i));
    return 2.0 * acc;
}

inline void check_index_set(const CovMatrix& cov, const IndexSet& set) {
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (set[i] < 0 || set[i] >= cov.rows()) throw DomainError("variable index out of range");
        for (std::size_t j = i + 1; j < set.size(); ++j)
            if (set[i] == set[j]) throw DomainError("duplicate variable index in set");
    }
}

inline Eigen::MatrixXd gather(const CovMatrix& cov, const IndexSet& rows, const IndexSet& cols) {
    Eigen::MatrixXd out(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = cov(rows[i], cols[j]);
    return out;
}

}  // namespace detail

/// Builds the 2x2 (no SI) or 3x3 (SI) covariance of (X, theta[, W]) in source
/// units^2 and validates it: sigma_x2 > 0, r_theta > rho_xtheta^2 strictly,
/// and (with SI) the full matrix passes the strict Cholesky test.
inline CovMatrix validate_model(const ModelParams& p) {
    if (!(p.sigma_x2 > 0.0)) throw NonpositiveVariance("sigma_x2 must be positive");
    const int si_fields = int(p.rho_xw.has_value()) + int(p.rho_thetaw.has_value()) + int(p.r_w.has_value());
    if (si_fields != 0 && si_fields != 3)
        throw DomainError("side-information fields rho_xw, rho_thetaw, r_w are all-or-none");
    if (!(p.r_theta > p.rho_xtheta * p.rho_xtheta))
        throw DegeneratePrivateInfo("requires r_theta > rho_xtheta^2");
    const bool si = si_fields == 3;
    if (si && !(*p.r_w > 0.0)) throw NonpositiveVariance("r_w must be positive");

    const Eigen::Index n = si ? 3 : 2;
    CovMatrix cov(n, n);
    cov(0, 0) = 1.0;
    cov(0, 1) = cov(1, 0) = p.rho_xtheta;
    cov(1, 1) = p.r_theta;
    if (si) {
        cov(0, 2) = cov(2, 0) = *p.rho_xw;
        cov(1, 2) = cov(2, 1) = *p.rho_thetaw;
        cov(2, 2) = *p.r_w;
    }
    cov *= p.sigma_x2;
    const auto lower = detail::cholesky_lower(cov);
    if (!lower)
        throw NotPositiveDefinite("covariance of (X, theta, W) is not positive definite");
    // Validation policy: pivots below 1e-12 * max(diagonal) mark the model as
    // near-singular and are rejected outright.
    const double floor = 1e-12 * cov.diagonal().maxCoeff();
    for (Eigen::Index j = 0; j < n; ++j)
        if (!((*lower)(j, j) * (*lower)(j, j) > floor))
            throw NotPositiveDefinite("covariance of (X, theta, W) is near-singular");
    return cov;
}

/// Exact Gaussian conditioning: coefficients c with E[target | given] =
/// c' * given, and the Schur-complement residual variance. Conditioning on
/// the empty set returns the marginal variance.
inline ConditionalResult conditional(const CovMatrix& cov, Eigen::Index target,
                                     const IndexSet& given) {
    if (target < 0 || target >= cov.rows()) throw DomainError("target index out of range");
    detail::check_index_set(cov, given);
    for (Eigen::Index g : given)
        if (g == target) throw DomainError("target may not appear in the conditioning set");

    if (given.empty()) return {Eigen::VectorXd(0), cov(target, target)};

    const Eigen::MatrixXd block = detail::gather(cov, given, given);
    const Eigen::VectorXd cross = detail::gather(cov, given, {target}).col(0);
    const auto lower = detail::cholesky_lower(block);
    if (!lower) throw SingularConditioningBlock("conditioning block is singular or indefinite");
    const Eigen::VectorXd coeff =
        lower->transpose().triangularView<Eigen::Upper>().solve(
            lower->triangularView<Eigen::Lower>().solve(cross));
    const double residual = cov(target, target) - cross.dot(coeff);
    return {coeff, std::max(residual, 0.0)};
}

/// Mutual information between two disjoint sets of jointly Gaussian
/// variables, in bits: I = log2(det Sigma_A * det Sigma_B / det Sigma_AB) / 2.
inline double mutual_information(const CovMatrix& cov, const IndexSet& set_a,
                                 const IndexSet& set_b) {
    detail::check_index_set(cov, set_a);
    detail::check_index_set(cov, set_b);
    for (Eigen::Index a : set_a)
        for (Eigen::Index b : set_b)
            if (a == b) throw OverlappingSets("mutual information requires disjoint sets");
    if (set_a.empty() || set_b.empty()) return 0.0;

    IndexSet joint = set_a;
    joint.insert(joint.end(), set_b.begin(), set_b.end());
    const auto la = detail::cholesky_lower(detail::gather(cov, set_a, set_a));
    const auto lb = detail::cholesky_lower(detail::gather(cov, set_b, set_b));
    const auto lj = detail::cholesky_lower(detail::gather(cov, joint, joint));
    if (!la || !lb || !lj) throw SingularBlock("a covariance sub-block is singular or indefinite");
    const double nats = 0.5 * (detail::logdet_from_cholesky(*la) + detail::logdet_from_cholesky(*lb) -
                               detail::logdet_from_cholesky(*lj));
    return std::max(nats / std::log(2.0), 0.0);
}

/// Covariance of linear combinations: out(i, j) = v_i' * cov * v_j.
inline CovMatrix lincomb_cov(const CovMatrix& cov, const std::vector<Eigen::VectorXd>& vectors) {
    const Eigen::Index n = cov.rows();
    for (const auto& v : vectors)
        if (v.size() != n) throw DimensionMismatch("coefficient vector length must equal covariance dimension");
    const Eigen::Index m = Eigen::Index(vectors.size());
    CovMatrix out(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const Eigen::VectorXd w = cov * vectors[j];
        for (Eigen::Index i = 0; i < m; ++i) out(i, j) = vectors[i].dot(w);
    }
    out = ((out + out.transpose()) / 2.0).eval();
    return out;
}

/// Variance of a single linear combination, v' * cov * v.
inline double quadratic_form(const CovMatrix& cov, const Eigen::VectorXd& v) {
    if (v.size() != cov.rows()) throw DimensionMismatch("coefficient vector length must equal covariance dimension");
    return std::max(v.dot(cov * v), 0.0);
}

}  // namespace stratcomm
