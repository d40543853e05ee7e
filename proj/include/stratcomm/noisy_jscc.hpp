#pragma once

#include <cmath>
#include <sstream>
#include <vector>

#include "stratcomm/equilibrium.hpp"
#include "stratcomm/errors.hpp"
#include "stratcomm/gaussian_core.hpp"
#include "stratcomm/solver.hpp"
#include "stratcomm/strategic_rd.hpp"
#include "stratcomm/types.hpp"

namespace stratcomm {

/// Capacity of the additive Gaussian channel in bits.
inline double capacity(const ChannelParams& ch) {
    if (!(ch.p_t > 0.0)) throw DomainError("p_t must be positive");
    if (!(ch.sigma_n2 > 0.0)) throw DomainError("sigma_n2 must be positive");
    return 0.5 * std::log2(1.0 + ch.p_t / ch.sigma_n2);
}

struct UncodedScheme {
    LinearStrategyPair strategies;
    DistortionPair distortions;
};

namespace detail {

struct NoisyOutcome {
    DistortionPair distortions;
    double dec_y = 0.0;
    double dec_w = 0.0;
    double power = 0.0;
};

/// Distortions of the single-letter noisy game for U = gamma*(X + a*theta +
/// w_coeff*W), Y = U + N, against the conditional-mean decoder.
inline NoisyOutcome noisy_game(const CovMatrix& model, const ChannelParams& ch, double gamma,
                               double a, bool decoder_uses_w, double w_coeff = 0.0) {
    const Eigen::Index dim = model.rows();
    if ((decoder_uses_w || w_coeff != 0.0) && dim < 3)
        throw DomainError("side information requested but the model has no W");

    const Eigen::Index base_dim = dim + 1;  // noise appended last
    CovMatrix base = CovMatrix::Zero(base_dim, base_dim);
    base.topLeftCorner(dim, dim) = model;
    base(dim, dim) = ch.sigma_n2;

    Eigen::VectorXd v_u = Eigen::VectorXd::Zero(base_dim);
    v_u(0) = gamma;
    v_u(1) = gamma * a;
    if (dim > 2) v_u(2) = gamma * w_coeff;
    Eigen::VectorXd v_y = v_u;
    v_y(dim) = 1.0;

    std::vector<Eigen::VectorXd> vecs;
    for (Eigen::Index i = 0; i < dim; ++i) vecs.push_back(Eigen::VectorXd::Unit(base_dim, i));
    vecs.push_back(v_y);
    const CovMatrix aug = lincomb_cov(base, vecs);
    const Eigen::Index y = dim;

    IndexSet given{y};
    if (decoder_uses_w) given.push_back(2);
    const ConditionalResult dec = conditional(aug, 0, given);

    NoisyOutcome out;
    out.dec_y = dec.coefficients(0);
    out.dec_w = decoder_uses_w ? dec.coefficients(1) : 0.0;
    out.distortions.d_d = dec.residual_variance;
    Eigen::VectorXd err = Eigen::VectorXd::Zero(base_dim);
    err(0) = 1.0;
    err(1) = 1.0;
    err -= out.dec_y * v_y;
    if (decoder_uses_w) err(2) -= out.dec_w;
    out.distortions.d_e = quadratic_form(base, err);
    out.power = quadratic_form(base, v_u);
    return out;
}

/// Gain that spends the full power budget on X + a*theta.
inline double full_power_gain(const ModelParams& p, const ChannelParams& ch, double a) {
    const double signal = p.sigma_x2 * (1.0 + 2.0 * a * p.rho_xtheta + a * a * p.r_theta);
    return std::sqrt(ch.p_t / signal);
}

inline void check_full_power(double power, double p_t) {
    if (std::abs(power - p_t) > 1e-12 * p_t)
        throw InternalInconsistency("transmit power does not meet the budget with equality");
}

}  // namespace detail

/// Classical uncoded pair for the common-objective source: g(X) scales X to
/// the power budget and h(Y) is the matched linear MMSE decoder. With no
/// private information the two costs coincide, so both distortion fields
/// carry the receiver distortion. Verifies the optimum-performance identity
/// log2(sigma_x2 / D_D)/2 = capacity before returning.
inline UncodedScheme goblick_mappings(double sigma_x2, const ChannelParams& ch) {
    if (!(sigma_x2 > 0.0)) throw NonpositiveVariance("sigma_x2 must be positive");
    const double cap = capacity(ch);
    UncodedScheme scheme;
    scheme.strategies.enc_scale = std::sqrt(ch.p_t / sigma_x2);
    scheme.strategies.enc_alpha = 0.0;
    scheme.strategies.enc_w = 0.0;
    scheme.strategies.dec_y = sigma_x2 * scheme.strategies.enc_scale / (ch.p_t + ch.sigma_n2);
    scheme.strategies.dec_w = 0.0;
    const double d_d = sigma_x2 * ch.sigma_n2 / (ch.p_t + ch.sigma_n2);
    scheme.distortions = {d_d, d_d};
    const double opta = 0.5 * std::log2(sigma_x2 / d_d);
    if (std::abs(opta - cap) > 1e-12 * std::max(1.0, cap))
        throw InternalInconsistency("uncoded receiver distortion violates the capacity identity");
    return scheme;
}

/// Strategic uncoded pair without side information: the noiseless equilibrium
/// coefficient, scaled to spend the full power budget, with the exact MMSE
/// decoder. The coefficient does not depend on the channel parameters.
inline UncodedScheme strategic_uncoded_no_si(double r, double rho, double sigma_x2,
                                             const ChannelParams& ch) {
    if (!(sigma_x2 > 0.0)) throw NonpositiveVariance("sigma_x2 must be positive");
    if (!(r > rho * rho)) throw DegeneratePrivateInfo("requires r > rho^2");
    capacity(ch);  // validates the channel

    ModelParams params;
    params.sigma_x2 = sigma_x2;
    params.rho_xtheta = rho;
    params.r_theta = r;
    const CovMatrix model = validate_model(params);
    const double alpha = closed_form_alpha(r, rho);
    const double gamma = detail::full_power_gain(params, ch, alpha);
    const detail::NoisyOutcome outcome = detail::noisy_game(model, ch, gamma, alpha, false);
    detail::check_full_power(outcome.power, ch.p_t);

    UncodedScheme scheme;
    scheme.strategies = {gamma, alpha, 0.0, outcome.dec_y, 0.0};
    scheme.distortions = outcome.distortions;
    return scheme;
}

struct LinearSiResult {
    LinearStrategyPair strategies;  ///< numeric leader argmin (canonical)
    DistortionPair distortions;
    LinearStrategyPair literal_strategies;  ///< theta-coefficient pinned to the no-SI closed form
    DistortionPair literal_distortions;     ///< labeled cross-check, not the canonical answer
};

/// Single-letter Stackelberg solve with receiver side information over
/// power-normalized linear encoders U = gamma(a)*(X + a*theta). Returns the
/// numeric argmin as canonical, plus the strategy that pins the coefficient
/// to the no-SI closed form, so both readings stay visible.
inline LinearSiResult linear_si_strategies(const ModelParams& params, const ChannelParams& ch) {
    if (!params.has_si()) throw DomainError("linear_si_strategies requires side-information fields");
    capacity(ch);
    const CovMatrix model = validate_model(params);

    auto outcome_at = [&](double a) {
        const double gamma = detail::full_power_gain(params, ch, a);
        return detail::noisy_game(model, ch, gamma, a, true);
    };
    auto objective = [&](double a) { return outcome_at(a).distortions.d_e; };
    const double anchor = std::max(1.0, std::abs(closed_form_alpha(params.r_theta, params.rho_xtheta)));
    const ScalarMinResult res = minimize_expanding(objective, -10.0 * anchor, 10.0 * anchor, 1e-9);
    const double a_best = polish_parabolic(objective, res.argmin);

    LinearSiResult out;
    {
        const detail::NoisyOutcome best = outcome_at(a_best);
        detail::check_full_power(best.power, ch.p_t);
        out.strategies = {detail::full_power_gain(params, ch, a_best), a_best, 0.0, best.dec_y,
                          best.dec_w};
        out.distortions = best.distortions;
    }
    {
        const double a_lit = closed_form_alpha(params.r_theta, params.rho_xtheta);
        const detail::NoisyOutcome lit = outcome_at(a_lit);
        detail::check_full_power(lit.power, ch.p_t);
        out.literal_strategies = {detail::full_power_gain(params, ch, a_lit), a_lit, 0.0, lit.dec_y,
                                  lit.dec_w};
        out.literal_distortions = lit.distortions;
    }
    return out;
}

struct MatchReport {
    bool holds = false;
    double residual = 0.0;          ///< |rho_xw + rho_thetaw * beta(C)|
    double beta_at_capacity = 0.0;
    double capacity_bits = 0.0;
    double i_yw_bits = 0.0;         ///< at the capacity-rate test channel
    double corr_yw = 0.0;
};

/// Tests the parameter relation under which the single-letter linear pair
/// meets the Shannon outer bound: rho_xw = -rho_thetaw * beta(C), with beta
/// taken from the rate-constrained oracle argmin at channel capacity. When
/// it holds, Y and W must come out independent at that test channel.
inline MatchReport matching_condition(const ModelParams& params, const ChannelParams& ch) {
    if (!params.has_si()) throw DomainError("matching_condition requires side-information fields");
    MatchReport report;
    report.capacity_bits = capacity(ch);
    const RDPoint pt = beta_star(params, report.capacity_bits);
    report.beta_at_capacity = pt.beta;
    report.residual = std::abs(*params.rho_xw + *params.rho_thetaw * pt.beta);
    report.holds = report.residual < 1e-9;
    report.i_yw_bits = pt.i_yw;
    const double cov_yw = params.sigma_x2 * (*params.rho_xw + *params.rho_thetaw * pt.beta);
    const double var_y =
        params.sigma_x2 * (1.0 + pt.beta * pt.beta * params.r_theta + 2.0 * pt.beta * params.rho_xtheta) +
        pt.sigma_s2;
    const double var_w = params.sigma_x2 * *params.r_w;
    report.corr_yw = cov_yw / std::sqrt(var_y * var_w);
    if (report.holds && (report.i_yw_bits > 1e-9 || std::abs(report.corr_yw) > 1e-9))
        throw InternalInconsistency("matched parameters but Y and W are not independent");
    return report;
}

/// Builds a parameter set satisfying the matching relation by construction:
/// rho_xw = -rho_thetaw * alpha with alpha the no-SI closed-form coefficient.
/// Verifies the fixed point (beta at capacity returns alpha, Y independent
/// of W) before returning; failure is surfaced, never hidden.
inline ModelParams construct_matched_params(double r_theta, double rho_xtheta, double rho_thetaw,
                                            double r_w, double sigma_x2, const ChannelParams& ch) {
    if (!(sigma_x2 > 0.0)) throw NonpositiveVariance("sigma_x2 must be positive");
    if (!(r_theta > rho_xtheta * rho_xtheta)) throw DegeneratePrivateInfo("requires r_theta > rho_xtheta^2");
    if (!(r_w > 0.0)) throw NonpositiveVariance("r_w must be positive");

    const double alpha = closed_form_alpha(r_theta, rho_xtheta);
    ModelParams params;
    params.sigma_x2 = sigma_x2;
    params.rho_xtheta = rho_xtheta;
    params.r_theta = r_theta;
    params.rho_xw = -rho_thetaw * alpha;
    params.rho_thetaw = rho_thetaw;
    params.r_w = r_w;
    validate_model(params);  // throws NotPositiveDefinite when incompatible

    const double cap = capacity(ch);
    const RDPoint pt = beta_star(params, cap);
    if (std::abs(pt.beta - alpha) > 1e-4 || pt.i_yw > 1e-9) {
        std::ostringstream msg;
        msg << "matched-parameter fixed point failed verification: beta(C) = " << pt.beta
            << " vs alpha = " << alpha << ", I(Y;W) = " << pt.i_yw << " bits";
        throw FixedPointNotConfirmed(msg.str());
    }
    return params;
}

struct OptimalityReport {
    DistortionPair linear;           ///< best single-letter linear scheme
    DistortionPair rd_at_capacity;   ///< strategic rate-distortion oracle at R = C
    double gap_d_e = 0.0;            ///< signed relative gap, linear vs bound
    double gap_d_d = 0.0;
    double capacity_bits = 0.0;
    double beta_at_capacity = 0.0;
    bool meets_outer_bound = false;  ///< both |gaps| below 1e-6
    double tolerance = 1e-6;
};

/// Compares the best single-letter linear scheme against the strategic
/// rate-distortion oracle evaluated at channel capacity. Vanishing gaps mean
/// the scheme meets the Shannon outer bound, which is expected exactly when
/// the matching condition holds.
inline OptimalityReport optimality_audit(const ModelParams& params, const ChannelParams& ch) {
    if (!params.has_si()) throw DomainError("optimality_audit requires side-information fields");
    OptimalityReport report;
    report.capacity_bits = capacity(ch);
    const LinearSiResult lin = linear_si_strategies(params, ch);
    const RDPoint pt = beta_star(params, report.capacity_bits);
    report.linear = lin.distortions;
    report.rd_at_capacity = pt.distortions;
    report.beta_at_capacity = pt.beta;
    report.gap_d_e = (lin.distortions.d_e - pt.distortions.d_e) / pt.distortions.d_e;
    report.gap_d_d = (lin.distortions.d_d - pt.distortions.d_d) / pt.distortions.d_d;
    report.meets_outer_bound =
        std::abs(report.gap_d_e) < report.tolerance && std::abs(report.gap_d_d) < report.tolerance;
    return report;
}

}  // namespace stratcomm
