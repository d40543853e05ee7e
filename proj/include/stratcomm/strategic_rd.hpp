#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stratcomm/equilibrium.hpp"
#include "stratcomm/errors.hpp"
#include "stratcomm/gaussian_core.hpp"
#include "stratcomm/solver.hpp"
#include "stratcomm/types.hpp"

namespace stratcomm {

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct RdOutcome {
    DistortionPair distortions;
    double dec_y = 0.0;
    double dec_w = 0.0;
    double i_yw = 0.0;  ///< bits
};

/// Oracle distortions of the test channel Y = X + beta*theta + w_coeff*W + S
/// against the conditional-mean decoder (on Y, or on (Y, W)). sigma_s2 = 0
/// drops S exactly; sigma_s2 = +inf is the analytic Y-carries-nothing limit.
/// `model` is the validated covariance of (X, theta[, W]).
inline RdOutcome test_channel_distortions(const CovMatrix& model, double beta, double sigma_s2,
                                          bool decoder_uses_w, double w_coeff = 0.0) {
    const Eigen::Index dim = model.rows();
    if ((decoder_uses_w || w_coeff != 0.0) && dim < 3)
        throw DomainError("side information requested but the model has no W");
    if (!(sigma_s2 >= 0.0)) throw DomainError("sigma_s2 must be nonnegative");

    RdOutcome out;
    if (std::isinf(sigma_s2)) {
        // Y is pure noise; the decoder falls back to W alone (or the prior mean).
        Eigen::VectorXd err = Eigen::VectorXd::Zero(dim);
        err(0) = 1.0;
        err(1) = 1.0;
        if (decoder_uses_w) {
            const ConditionalResult dec = conditional(model, 0, {2});
            out.dec_w = dec.coefficients(0);
            out.distortions.d_d = dec.residual_variance;
            err(2) -= out.dec_w;
        } else {
            out.distortions.d_d = model(0, 0);
        }
        out.distortions.d_e = quadratic_form(model, err);
        return out;
    }

    const bool with_s = sigma_s2 > 0.0;
    const Eigen::Index base_dim = dim + (with_s ? 1 : 0);
    CovMatrix base = CovMatrix::Zero(base_dim, base_dim);
    base.topLeftCorner(dim, dim) = model;
    if (with_s) base(dim, dim) = sigma_s2;

    Eigen::VectorXd v_y = Eigen::VectorXd::Zero(base_dim);
    v_y(0) = 1.0;
    v_y(1) = beta;
    if (dim > 2) v_y(2) = w_coeff;
    if (with_s) v_y(dim) = 1.0;

    std::vector<Eigen::VectorXd> vecs;
    for (Eigen::Index i = 0; i < dim; ++i) vecs.push_back(Eigen::VectorXd::Unit(base_dim, i));
    vecs.push_back(v_y);
    const CovMatrix aug = lincomb_cov(base, vecs);  // (X, theta[, W], Y)
    const Eigen::Index y = dim;

    IndexSet given{y};
    if (decoder_uses_w) given.push_back(2);
    const ConditionalResult dec = conditional(aug, 0, given);
    out.dec_y = dec.coefficients(0);
    out.dec_w = decoder_uses_w ? dec.coefficients(1) : 0.0;
    out.distortions.d_d = dec.residual_variance;

    Eigen::VectorXd err = Eigen::VectorXd::Zero(base_dim);
    err(0) = 1.0;
    err(1) = 1.0;
    err -= out.dec_y * v_y;
    if (decoder_uses_w) err(2) -= out.dec_w;
    out.distortions.d_e = quadratic_form(base, err);
    out.i_yw = (dim > 2) ? mutual_information(aug, {y}, {2}) : 0.0;
    return out;
}

/// var(X + beta*theta | W) / sigma_x2; the bracketed factor shared by the
/// side-information rate expression and its inverse.
inline double conditional_signal_factor(const ModelParams& p, double beta) {
    const double plain = 1.0 + beta * beta * p.r_theta + 2.0 * beta * p.rho_xtheta;
    if (!p.has_si()) return plain;
    const double cross = *p.rho_xw + beta * *p.rho_thetaw;
    return plain - cross * cross / *p.r_w;
}

}  // namespace detail

/// Printed closed form for the receiver distortion along the no-SI curve.
/// Kept verbatim as a cross-check column; the oracle value is canonical and
/// the two are never merged. Known to drift from the oracle as the rate
/// grows (see formula_audit).
inline double paper_d_d_no_si(double r, double rho, double sigma_x2, double rate_bits) {
    const double a_value = closed_form_a_value(r, rho);
    const double p = std::pow(2.0, -2.0 * rate_bits);
    const double eq_ratio = (r - rho * rho) * (a_value - 1.0) /
                            (a_value * (2.0 * r + a_value * rho + rho));
    return sigma_x2 * p * (1.0 + (p - 1.0) * eq_ratio);
}

/// Printed closed form for the transmitter distortion along the no-SI curve
/// (verbatim cross-check; see paper_d_d_no_si).
inline double paper_d_e_no_si(double r, double rho, double sigma_x2, double rate_bits) {
    const double a_value = closed_form_a_value(r, rho);
    const double p = std::pow(2.0, -2.0 * rate_bits);
    return sigma_x2 *
           (1.0 + 2.0 * rho + r - (1.0 - p) * (a_value * (r + rho) + rho) / (a_value - 1.0));
}

/// Printed closed form for the transmitter distortion of the side-information
/// test channel (verbatim cross-check; contains no W terms by its printed
/// form, so the gap to the oracle quantifies what the printed expression
/// leaves out).
inline double paper_d_e_si(const ModelParams& p, double beta, double sigma_s2) {
    const double r = p.r_theta;
    const double rho = p.rho_xtheta;
    const double denom = 1.0 + beta * beta * r + 2.0 * beta * rho + sigma_s2 / p.sigma_x2;
    return p.sigma_x2 *
           (1.0 + 2.0 * rho + r - (1.0 + beta * rho) * (beta * beta * r + 2.0 * beta * rho) / denom);
}

/// Strategic rate-distortion point without side information: the test-channel
/// coefficient equals the noiseless equilibrium coefficient at every rate,
/// and sigma_s2 is set so the channel carries exactly `rate` bits.
inline RDPoint rd_point_no_si(double r, double rho, double sigma_x2, double rate) {
    if (!(sigma_x2 > 0.0)) throw NonpositiveVariance("sigma_x2 must be positive");
    if (!(r > rho * rho)) throw DegeneratePrivateInfo("requires r > rho^2");
    if (!(rate >= 0.0)) throw DomainError("rate must be nonnegative");

    ModelParams params;
    params.sigma_x2 = sigma_x2;
    params.rho_xtheta = rho;
    params.r_theta = r;
    const CovMatrix model = validate_model(params);
    const double beta = closed_form_alpha(r, rho);

    RDPoint point;
    point.rate = rate;
    point.beta = beta;
    if (rate == 0.0) {
        point.sigma_s2 = detail::kInf;
    } else if (std::isinf(rate)) {
        point.sigma_s2 = 0.0;
    } else {
        const double signal = 1.0 + beta * beta * r + 2.0 * beta * rho;
        point.sigma_s2 = sigma_x2 * signal / (std::pow(2.0, 2.0 * rate) - 1.0);
    }
    const detail::RdOutcome outcome =
        detail::test_channel_distortions(model, beta, point.sigma_s2, false);
    point.distortions = outcome.distortions;
    point.d_d_paper = paper_d_d_no_si(r, rho, sigma_x2, rate);
    point.d_e_paper = paper_d_e_no_si(r, rho, sigma_x2, rate);
    point.i_yw = 0.0;
    return point;
}

/// Rate of the side-information test channel Y = X + beta*theta + S in bits,
/// evaluated by the closed form and asserted against the mutual-information
/// route I(X,theta; Y) - I(Y; W) on the explicit four-variable covariance.
inline double wz_rate(const ModelParams& params, double beta, double sigma_s2) {
    if (!params.has_si()) throw DomainError("wz_rate requires side-information fields");
    if (!(sigma_s2 > 0.0)) throw DomainError("sigma_s2 must be positive");
    const CovMatrix model = validate_model(params);
    if (std::isinf(sigma_s2)) return 0.0;

    const double factor = detail::conditional_signal_factor(params, beta);
    const double rate = 0.5 * std::log2(1.0 + params.sigma_x2 * factor / sigma_s2);

    // Independent route through the conditioning oracle.
    CovMatrix base = CovMatrix::Zero(4, 4);
    base.topLeftCorner(3, 3) = model;
    base(3, 3) = sigma_s2;
    Eigen::VectorXd v_y(4);
    v_y << 1.0, beta, 0.0, 1.0;
    std::vector<Eigen::VectorXd> vecs{Eigen::VectorXd::Unit(4, 0), Eigen::VectorXd::Unit(4, 1),
                                      Eigen::VectorXd::Unit(4, 2), v_y};
    const CovMatrix aug = lincomb_cov(base, vecs);
    const double rate_mi = mutual_information(aug, {0, 1}, {3}) - mutual_information(aug, {3}, {2});
    if (std::abs(rate - rate_mi) > 1e-10 * std::max(1.0, std::abs(rate))) {
        std::ostringstream msg;
        msg << "rate formula and mutual-information route disagree: " << rate << " vs " << rate_mi;
        throw InternalInconsistency(msg.str());
    }
    return rate;
}

/// Inverse of wz_rate in sigma_s2. Round-trips with wz_rate to 1e-12.
inline double wz_sigma_s2(const ModelParams& params, double beta, double rate) {
    if (!params.has_si()) throw DomainError("wz_sigma_s2 requires side-information fields");
    if (!(rate > 0.0)) throw DomainError("rate must be positive");
    validate_model(params);
    if (std::isinf(rate)) return 0.0;
    const double factor = detail::conditional_signal_factor(params, beta);
    if (!(factor > 0.0))
        throw DomainError("conditional signal variance is nonpositive; covariance is invalid");
    return params.sigma_x2 * factor / (std::pow(2.0, 2.0 * rate) - 1.0);
}

struct WzDistortions {
    DistortionPair oracle;
    double d_e_paper = 0.0;  ///< printed-formula cross-check, never merged with the oracle
    double dec_y = 0.0;
    double dec_w = 0.0;
    double i_yw = 0.0;  ///< bits
};

/// Oracle distortions of the side-information test channel, with the printed
/// transmitter-distortion formula evaluated verbatim alongside.
inline WzDistortions wz_distortions(const ModelParams& params, double beta, double sigma_s2) {
    if (!params.has_si()) throw DomainError("wz_distortions requires side-information fields");
    const CovMatrix model = validate_model(params);
    const detail::RdOutcome outcome = detail::test_channel_distortions(model, beta, sigma_s2, true);
    WzDistortions out;
    out.oracle = outcome.distortions;
    out.d_e_paper = paper_d_e_si(params, beta, sigma_s2);
    out.dec_y = outcome.dec_y;
    out.dec_w = outcome.dec_w;
    out.i_yw = outcome.i_yw;
    return out;
}

/// Rate-constrained leader coefficient: beta*(R) minimizes the oracle D_E
/// over the test-channel coefficient, with sigma_s2 tied to the rate. The
/// argmin from the grid+golden search is polished by parabolic refinement so
/// downstream analytic identities see a ~1e-10-accurate coefficient.
inline RDPoint beta_star(const ModelParams& params, double rate) {
    if (!params.has_si()) throw DomainError("beta_star requires side-information fields");
    if (!(rate > 0.0)) throw DomainError("rate must be positive");
    const CovMatrix model = validate_model(params);

    auto objective = [&](double beta) {
        const double s2 = wz_sigma_s2(params, beta, rate);
        return detail::test_channel_distortions(model, beta, s2, true).distortions.d_e;
    };
    const ScalarMinResult res = minimize_expanding(objective, -10.0, 10.0, 1e-9);
    const double beta = polish_parabolic(objective, res.argmin);

    RDPoint point;
    point.rate = rate;
    point.beta = beta;
    point.sigma_s2 = wz_sigma_s2(params, beta, rate);
    const detail::RdOutcome outcome =
        detail::test_channel_distortions(model, beta, point.sigma_s2, true);
    point.distortions = outcome.distortions;
    point.d_e_paper = paper_d_e_si(params, beta, point.sigma_s2);
    point.d_d_paper = std::nullopt;  // no printed receiver-distortion analogue with SI
    point.i_yw = outcome.i_yw;
    return point;
}

/// Strategic rate-distortion curve with side information: beta_star at each
/// rate. Receiver distortion must be nonincreasing in rate along the curve.
inline std::vector<RDPoint> wz_curve(const ModelParams& params, const std::vector<double>& rates) {
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (!(rates[i] > 0.0)) throw DomainError("rates must be positive");
        if (i > 0 && rates[i] < rates[i - 1]) throw DomainError("rates must be sorted ascending");
    }
    std::vector<RDPoint> curve;
    curve.reserve(rates.size());
    for (double r : rates) curve.push_back(beta_star(params, r));
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (curve[i].distortions.d_d > curve[i - 1].distortions.d_d + 1e-12 * params.sigma_x2)
            throw InternalInconsistency("receiver distortion increased along the curve");
    }
    return curve;
}

struct RateLossRow {
    double a = 0.0;
    double b = 0.0;
    double sigma_s2 = 0.0;
    double conditional_rate_bits = 0.0;  ///< I(X,theta; Y | W)
    double deviation_rate = 0.0;         ///< vs the b = 0 row
    double deviation_d_e = 0.0;
    double deviation_d_d = 0.0;
    double mi_route_gap = 0.0;  ///< chain-rule route vs Schur route
};

struct RateLossReport {
    std::vector<RateLossRow> rows;
    double max_deviation = 0.0;
    double max_mi_route_gap = 0.0;
    double tolerance = 1e-10;
    bool pass = false;
};

/// Encoder-side-information audit for the rate-constrained setting: with the
/// decoder conditioning on (Y, W), mixing W into Y = X + a*theta + b*W + S
/// changes neither I(X,theta; Y | W) nor either distortion, for fixed
/// (a, sigma_s2). The conditional rate is computed two ways per row.
inline RateLossReport rate_loss_audit(const ModelParams& params, double rate,
                                      const std::vector<double>& b_grid,
                                      const std::vector<double>& a_grid = {0.25, 0.618, 1.0, 2.0}) {
    if (!params.has_si()) throw DomainError("rate_loss_audit requires side-information fields");
    if (!(rate > 0.0)) throw DomainError("rate must be positive");
    const CovMatrix model = validate_model(params);

    auto evaluate = [&](double a, double b, double sigma_s2, RateLossRow& row) {
        CovMatrix base = CovMatrix::Zero(4, 4);
        base.topLeftCorner(3, 3) = model;
        base(3, 3) = sigma_s2;
        Eigen::VectorXd v_y(4);
        v_y << 1.0, a, b, 1.0;
        std::vector<Eigen::VectorXd> vecs{Eigen::VectorXd::Unit(4, 0), Eigen::VectorXd::Unit(4, 1),
                                          Eigen::VectorXd::Unit(4, 2), v_y};
        const CovMatrix aug = lincomb_cov(base, vecs);  // (X, theta, W, Y)
        const double chain = mutual_information(aug, {0, 1, 2}, {3}) - mutual_information(aug, {2}, {3});
        const double var_y_given_w = conditional(aug, 3, {2}).residual_variance;
        const double var_y_given_all = conditional(aug, 3, {0, 1, 2}).residual_variance;
        const double schur = 0.5 * std::log2(var_y_given_w / var_y_given_all);
        row.conditional_rate_bits = chain;
        row.mi_route_gap = std::abs(chain - schur);
        const detail::RdOutcome outcome =
            detail::test_channel_distortions(model, a, sigma_s2, true, b);
        row.a = a;
        row.b = b;
        row.sigma_s2 = sigma_s2;
        return outcome.distortions;
    };

    RateLossReport report;
    const double scale = 1e-3 * params.sigma_x2;
    for (double a : a_grid) {
        const double sigma_s2 = wz_sigma_s2(params, a, rate);
        RateLossRow ref_row;
        const DistortionPair ref = evaluate(a, 0.0, sigma_s2, ref_row);
        report.max_mi_route_gap = std::max(report.max_mi_route_gap, ref_row.mi_route_gap);
        for (double b : b_grid) {
            RateLossRow row;
            const DistortionPair got = evaluate(a, b, sigma_s2, row);
            row.deviation_rate = std::abs(row.conditional_rate_bits - ref_row.conditional_rate_bits) /
                                 std::max(1.0, std::abs(ref_row.conditional_rate_bits));
            row.deviation_d_e = detail::relative_gap(got.d_e, ref.d_e, scale);
            row.deviation_d_d = detail::relative_gap(got.d_d, ref.d_d, scale);
            report.max_deviation = std::max(
                {report.max_deviation, row.deviation_rate, row.deviation_d_e, row.deviation_d_d});
            report.max_mi_route_gap = std::max(report.max_mi_route_gap, row.mi_route_gap);
            report.rows.push_back(row);
        }
    }
    report.pass = report.max_deviation < report.tolerance &&
                  report.max_mi_route_gap < report.tolerance;
    return report;
}

struct FormulaAuditRow {
    int set_id = 0;
    bool has_si = false;
    double rate = 0.0;
    double beta = 0.0;
    double sigma_s2 = 0.0;
    double oracle_d_e = 0.0;
    double oracle_d_d = 0.0;
    std::optional<double> paper_d_d;  ///< no-SI printed receiver formula
    std::optional<double> paper_d_e;  ///< no-SI printed transmitter formula
    double paper_d_e_si_form = 0.0;   ///< SI-form printed transmitter formula (no W terms)
    double gap_d_d = 0.0;             ///< |paper - oracle| / oracle, when the paper column exists
    double gap_d_e = 0.0;
    double gap_d_e_si_form = 0.0;
};

struct FormulaAuditReport {
    std::vector<FormulaAuditRow> rows;
    bool discrepancy_flagged = false;
    std::string narrative;
    double max_gap_d_d = 0.0;
    double max_gap_d_e = 0.0;
};

/// Ten stock parameter sets for the printed-formula audit: six without side
/// information spanning the (r, rho) domain, four with.
inline std::vector<ModelParams> builtin_formula_audit_sets() {
    auto no_si = [](double sigma_x2, double rho, double r) {
        ModelParams p;
        p.sigma_x2 = sigma_x2;
        p.rho_xtheta = rho;
        p.r_theta = r;
        return p;
    };
    auto si = [](double sigma_x2, double rho, double r, double rho_xw, double rho_thetaw, double r_w) {
        ModelParams p;
        p.sigma_x2 = sigma_x2;
        p.rho_xtheta = rho;
        p.r_theta = r;
        p.rho_xw = rho_xw;
        p.rho_thetaw = rho_thetaw;
        p.r_w = r_w;
        return p;
    };
    return {no_si(1.0, 0.0, 1.0),   no_si(1.0, 0.3, 1.0),  no_si(1.0, -0.5, 2.0),
            no_si(2.0, 0.2, 0.5),   no_si(1.0, 1.0, 3.0),  no_si(1.0, -0.9, 1.5),
            si(1.0, 0.2, 1.0, 0.4, 0.3, 1.0), si(1.0, 0.0, 1.0, 0.5, 0.0, 1.0),
            si(2.0, -0.3, 1.5, 0.2, 0.4, 1.2), si(1.0, 0.1, 0.8, -0.3, 0.5, 2.0)};
}

/// Evaluates the printed distortion formulas verbatim alongside the oracle on
/// a rate grid. No tolerance ties the two columns together; the report exists
/// to surface the gap, in particular the large-rate drift of the printed
/// no-SI formulas away from the noiseless-equilibrium values the oracle
/// reaches.
inline FormulaAuditReport formula_audit(const std::vector<ModelParams>& sets,
                                        const std::vector<double>& rates) {
    FormulaAuditReport report;
    for (std::size_t k = 0; k < sets.size(); ++k) {
        const ModelParams& p = sets[k];
        const CovMatrix model = validate_model(p);
        for (double rate : rates) {
            FormulaAuditRow row;
            row.set_id = int(k);
            row.has_si = p.has_si();
            row.rate = rate;
            if (p.has_si()) {
                const RDPoint pt = beta_star(p, rate);
                row.beta = pt.beta;
                row.sigma_s2 = pt.sigma_s2;
                row.oracle_d_e = pt.distortions.d_e;
                row.oracle_d_d = pt.distortions.d_d;
                row.paper_d_e_si_form = *pt.d_e_paper;
            } else {
                const RDPoint pt = rd_point_no_si(p.r_theta, p.rho_xtheta, p.sigma_x2, rate);
                row.beta = pt.beta;
                row.sigma_s2 = pt.sigma_s2;
                row.oracle_d_e = pt.distortions.d_e;
                row.oracle_d_d = pt.distortions.d_d;
                row.paper_d_d = pt.d_d_paper;
                row.paper_d_e = pt.d_e_paper;
                row.paper_d_e_si_form = paper_d_e_si(p, pt.beta, pt.sigma_s2);
                row.gap_d_d = std::abs(*row.paper_d_d - row.oracle_d_d) / std::abs(row.oracle_d_d);
                row.gap_d_e = std::abs(*row.paper_d_e - row.oracle_d_e) / std::abs(row.oracle_d_e);
                report.max_gap_d_d = std::max(report.max_gap_d_d, row.gap_d_d);
                report.max_gap_d_e = std::max(report.max_gap_d_e, row.gap_d_e);
            }
            row.gap_d_e_si_form =
                std::abs(row.paper_d_e_si_form - row.oracle_d_e) / std::abs(row.oracle_d_e);
            report.rows.push_back(row);
        }
    }

    // Flag the documented large-rate drift: the printed no-SI receiver formula
    // tends to zero with the rate while the oracle tends to the noiseless
    // equilibrium distortion (~0.2763932 * sigma_x2 at r=1, rho=0).
    for (const FormulaAuditRow& row : report.rows) {
        if (!row.has_si && row.rate >= 4.0 && (row.gap_d_d > 0.01 || row.gap_d_e > 0.01))
            report.discrepancy_flagged = true;
    }
    if (report.discrepancy_flagged) {
        std::ostringstream msg;
        msg << "printed-formula columns drift from the conditioning oracle at large rates "
            << "(max relative gaps: D_D " << report.max_gap_d_d << ", D_E " << report.max_gap_d_e
            << "); the oracle columns are canonical";
        report.narrative = msg.str();
    } else {
        report.narrative = "printed-formula columns stayed within 1% of the oracle on this grid";
    }
    return report;
}

}  // namespace stratcomm
