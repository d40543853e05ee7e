#pragma once

#include <cmath>
#include <sstream>
#include <vector>

#include "stratcomm/errors.hpp"
#include "stratcomm/gaussian_core.hpp"
#include "stratcomm/solver.hpp"
#include "stratcomm/types.hpp"

namespace stratcomm {

/// A = sqrt(1 + 4(r + rho)); finite on the whole valid domain since
/// r > rho^2 implies r + rho > -1/4.
inline double closed_form_a_value(double r, double rho) {
    return std::sqrt(1.0 + 4.0 * (r + rho));
}

/// The closed-form leader coefficient (A - 1) / (2(r + rho)), evaluated in the
/// rationalized form 2 / (A + 1), which is exact and stays finite as
/// r + rho -> 0.
inline double closed_form_alpha(double r, double rho) {
    return 2.0 / (closed_form_a_value(r, rho) + 1.0);
}

namespace detail {

struct GameOutcome {
    DistortionPair distortions;
    double dec_y = 0.0;
    double dec_w = 0.0;
};

/// Distortions of the noiseless one-shot game for encoder Y = X + a*theta + b*W
/// against the exact conditional-mean decoder (on Y alone, or on (Y, W)).
/// `base` is the validated covariance of (X, theta[, W]).
inline GameOutcome noiseless_game(const CovMatrix& base, double a, double b, bool decoder_uses_w) {
    const Eigen::Index dim = base.rows();
    if ((b != 0.0 || decoder_uses_w) && dim < 3)
        throw DomainError("side information requested but the model has no W");

    std::vector<Eigen::VectorXd> vecs;
    for (Eigen::Index i = 0; i < dim; ++i) vecs.push_back(Eigen::VectorXd::Unit(dim, i));
    Eigen::VectorXd v_y = Eigen::VectorXd::Zero(dim);
    v_y(0) = 1.0;
    v_y(1) = a;
    if (dim > 2) v_y(2) = b;
    vecs.push_back(v_y);

    const CovMatrix aug = lincomb_cov(base, vecs);
    IndexSet given{dim};  // Y sits after the base variables
    if (decoder_uses_w) given.push_back(2);
    const ConditionalResult dec = conditional(aug, 0, given);
    const double dec_y = dec.coefficients(0);
    const double dec_w = decoder_uses_w ? dec.coefficients(1) : 0.0;

    Eigen::VectorXd err = Eigen::VectorXd::Zero(dim);
    err(0) = 1.0;
    err(1) = 1.0;
    err -= dec_y * v_y;
    if (decoder_uses_w) err(2) -= dec_w;
    const double d_e = quadratic_form(base, err);
    return {{d_e, dec.residual_variance}, dec_y, dec_w};
}

inline double relative_gap(double a, double b, double scale) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), scale});
}

}  // namespace detail

/// Leader's payoff pair at theta-coefficient `a` under the follower's exact
/// best response (conditional mean of X given Y, or given (Y, W) when
/// `use_si` is set). Everything is computed through the conditioning oracle.
inline DistortionPair encoder_objective(const ModelParams& params, double a, bool use_si) {
    if (use_si && !params.has_si())
        throw DomainError("use_si requires side-information fields");
    const CovMatrix base = validate_model(params);
    return detail::noiseless_game(base, a, 0.0, use_si).distortions;
}

/// Closed-form noiseless equilibrium without side information, cross-checked
/// against the conditional-expectation oracle before returning.
inline EquilibriumReport closed_form_equilibrium(double r, double rho, double sigma_x2) {
    if (!(sigma_x2 > 0.0)) throw NonpositiveVariance("sigma_x2 must be positive");
    if (!(r > rho * rho)) throw DegeneratePrivateInfo("requires r > rho^2");
    if (r + rho == 0.0) throw DomainError("requires r + rho != 0");

    const double a_value = closed_form_a_value(r, rho);
    const double alpha = closed_form_alpha(r, rho);
    const double kappa = (1.0 + alpha * rho) / (1.0 + alpha * alpha * r + 2.0 * alpha * rho);
    // (A - 3)(r + rho)/(A - 1) rationalized to (A - 3)(A + 1)/4.
    const double d_e = sigma_x2 * (1.0 + (a_value - 3.0) * (a_value + 1.0) / 4.0);
    const double d_d = sigma_x2 * ((r - rho * rho) * (a_value - 1.0)) /
                       (a_value * (2.0 * r + a_value * rho + rho));

    ModelParams params;
    params.sigma_x2 = sigma_x2;
    params.rho_xtheta = rho;
    params.r_theta = r;
    const detail::GameOutcome oracle = detail::noiseless_game(validate_model(params), alpha, 0.0, false);
    const double scale = 1e-6 * sigma_x2;
    if (detail::relative_gap(d_e, oracle.distortions.d_e, scale) > 1e-9 ||
        detail::relative_gap(d_d, oracle.distortions.d_d, scale) > 1e-9 ||
        std::abs(kappa - oracle.dec_y) > 1e-9) {
        std::ostringstream msg;
        msg << "closed form and conditioning oracle disagree: D_E " << d_e << " vs "
            << oracle.distortions.d_e << ", D_D " << d_d << " vs " << oracle.distortions.d_d;
        throw InternalInconsistency(msg.str());
    }

    EquilibriumReport rep;
    rep.alpha = alpha;
    rep.decoder_y = kappa;
    rep.decoder_w = 0.0;
    rep.distortions = {d_e, d_d};
    rep.a_value = a_value;
    rep.method = SolveMethod::closed_form;
    return rep;
}

/// Numeric Stackelberg solve: the leader's theta-coefficient minimizes D_E
/// under the follower's best response, searched over the standard expanding
/// bracket. With side information the decoder conditions on (Y, W).
inline EquilibriumReport solve_stackelberg(const ModelParams& params, bool use_si) {
    if (use_si && !params.has_si())
        throw DomainError("use_si requires side-information fields");
    const CovMatrix base = validate_model(params);
    const bool dec_w = use_si && params.has_si();

    const double anchor = std::max(1.0, std::abs(closed_form_alpha(params.r_theta, params.rho_xtheta)));
    auto objective = [&](double a) { return detail::noiseless_game(base, a, 0.0, dec_w).distortions.d_e; };
    const ScalarMinResult res = minimize_expanding(objective, -10.0 * anchor, 10.0 * anchor, 1e-9);

    const detail::GameOutcome at_min = detail::noiseless_game(base, res.argmin, 0.0, dec_w);
    EquilibriumReport rep;
    rep.alpha = res.argmin;
    rep.decoder_y = at_min.dec_y;
    rep.decoder_w = at_min.dec_w;
    rep.distortions = at_min.distortions;
    rep.a_value = closed_form_a_value(params.r_theta, params.rho_xtheta);
    rep.method = SolveMethod::numeric;
    return rep;
}

struct TxSiAuditRow {
    double a = 0.0;
    double b = 0.0;
    double deviation_d_e = 0.0;  ///< relative to the b = 0 outcome
    double deviation_d_d = 0.0;
};

/// Result of the encoder-side-information invariance audit: distortions of
/// Y = X + a*theta + b*W with a (Y, W)-decoder, compared against b = 0.
struct TxSiAuditReport {
    std::vector<TxSiAuditRow> rows;
    double max_deviation = 0.0;
    double argmin_without_w = 0.0;    ///< equilibrium a when the encoder may not touch W
    double argmin_with_w = 0.0;       ///< equilibrium a when it may (at the largest |b| probed)
    double argmin_deviation = 0.0;
    double tol_distortion = 1e-10;
    double tol_argmin = 1e-6;
    bool pass = false;
};

inline std::vector<double> default_coefficient_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(-2.0 + 0.2 * double(i));
    return grid;
}

/// Checks that mixing W into the encoder output changes nothing when the
/// decoder already conditions on (Y, W): value-level over (a, b) grids, and
/// argmin-level by re-solving the leader problem with the W-coefficient held
/// at the largest probed |b|.
inline TxSiAuditReport transmitter_si_audit(const ModelParams& params,
                                            const std::vector<double>& b_grid,
                                            const std::vector<double>& a_grid = default_coefficient_grid()) {
    if (!params.has_si()) throw DomainError("transmitter_si_audit requires side information");
    const CovMatrix base = validate_model(params);

    TxSiAuditReport report;
    const double scale = 1e-3 * params.sigma_x2;
    for (double a : a_grid) {
        const DistortionPair ref = detail::noiseless_game(base, a, 0.0, true).distortions;
        for (double b : b_grid) {
            const DistortionPair got = detail::noiseless_game(base, a, b, true).distortions;
            TxSiAuditRow row;
            row.a = a;
            row.b = b;
            row.deviation_d_e = detail::relative_gap(got.d_e, ref.d_e, scale);
            row.deviation_d_d = detail::relative_gap(got.d_d, ref.d_d, scale);
            report.rows.push_back(row);
            report.max_deviation =
                std::max({report.max_deviation, row.deviation_d_e, row.deviation_d_d});
        }
    }

    double b_probe = 0.0;
    for (double b : b_grid) b_probe = std::abs(b) > std::abs(b_probe) ? b : b_probe;
    const double anchor = std::max(1.0, std::abs(closed_form_alpha(params.r_theta, params.rho_xtheta)));
    auto obj_plain = [&](double a) { return detail::noiseless_game(base, a, 0.0, true).distortions.d_e; };
    auto obj_mixed = [&](double a) { return detail::noiseless_game(base, a, b_probe, true).distortions.d_e; };
    report.argmin_without_w = minimize_expanding(obj_plain, -10.0 * anchor, 10.0 * anchor, 1e-9).argmin;
    report.argmin_with_w = minimize_expanding(obj_mixed, -10.0 * anchor, 10.0 * anchor, 1e-9).argmin;
    report.argmin_deviation = std::abs(report.argmin_with_w - report.argmin_without_w);

    report.pass = report.max_deviation < report.tol_distortion &&
                  report.argmin_deviation < report.tol_argmin;
    return report;
}

}  // namespace stratcomm
