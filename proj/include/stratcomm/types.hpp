#pragma once

#include <Eigen/Dense>

#include <optional>

namespace stratcomm {

/// Symmetric positive-semidefinite covariance matrix, in source units^2.
using CovMatrix = Eigen::MatrixXd;

/// Second-order statistics of (X, theta[, W]), normalized by sigma_x2.
///
/// NOTE: rho_xtheta and r_theta are sigma_x2-normalized second moments, NOT
/// correlation coefficients: corr(X, theta) = rho_xtheta / sqrt(r_theta).
/// The three side-information fields are all-or-none; absent means there is
/// no side information W. All variables are zero mean. Index convention for
/// the covariance built from these: 0 = X, 1 = theta, 2 = W.
struct ModelParams {
    double sigma_x2 = 1.0;
    double rho_xtheta = 0.0;
    double r_theta = 1.0;
    std::optional<double> rho_xw;
    std::optional<double> rho_thetaw;
    std::optional<double> r_w;

    bool has_si() const { return rho_xw.has_value() && rho_thetaw.has_value() && r_w.has_value(); }
};

/// Additive Gaussian channel: transmit power budget and noise variance.
struct ChannelParams {
    double p_t = 1.0;
    double sigma_n2 = 1.0;
};

struct DistortionPair {
    double d_e = 0.0;  ///< transmitter cost E[(X + theta - Xhat)^2]
    double d_d = 0.0;  ///< receiver cost E[(X - Xhat)^2]
};

enum class SolveMethod { closed_form, numeric };

/// Equilibrium of the noiseless one-shot game.
struct EquilibriumReport {
    double alpha = 0.0;      ///< encoder theta-coefficient in Y = X + alpha*theta
    double decoder_y = 0.0;  ///< decoder coefficient on Y (kappa in the no-SI closed form)
    double decoder_w = 0.0;  ///< decoder coefficient on W; 0 without side information
    DistortionPair distortions;
    double a_value = 0.0;    ///< the intermediate A = sqrt(1 + 4(r + rho)) of the no-SI closed form
    SolveMethod method = SolveMethod::closed_form;
};

/// One point of a strategic rate-distortion curve.
struct RDPoint {
    double rate = 0.0;      ///< bits
    double beta = 0.0;      ///< test-channel theta-coefficient in Y = X + beta*theta + S
    double sigma_s2 = 0.0;  ///< test-channel noise variance (+inf at the zero-rate endpoint)
    DistortionPair distortions;       ///< oracle-computed (exact Gaussian conditioning)
    std::optional<double> d_e_paper;  ///< printed-formula cross-check; never merged with the oracle value
    std::optional<double> d_d_paper;
    double i_yw = 0.0;      ///< I(Y; W) in bits; 0 without side information
};

/// Power-normalized linear encoder U = enc_scale*(X + enc_alpha*theta + enc_w*W)
/// and linear decoder Xhat = dec_y*Y + dec_w*W.
struct LinearStrategyPair {
    double enc_scale = 1.0;
    double enc_alpha = 0.0;
    double enc_w = 0.0;
    double dec_y = 0.0;
    double dec_w = 0.0;
};

}  // namespace stratcomm
