#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "stratcomm/errors.hpp"
#include "stratcomm/gaussian_core.hpp"
#include "stratcomm/rng.hpp"
#include "stratcomm/types.hpp"

namespace stratcomm {

/// Empirical distortions and power with standard errors. stderr fields are
/// the sample standard deviation of the per-sample squared error over sqrt(n).
struct SimResult {
    std::int64_t n_samples = 0;
    double d_e_hat = 0.0;
    double d_e_stderr = 0.0;
    double d_d_hat = 0.0;
    double d_d_stderr = 0.0;
    double power_hat = 0.0;
    double power_stderr = 0.0;
    std::uint64_t seed = 0;
};

namespace detail {

// Fixed stream roles; W and dither streams are simply unused when absent, so
// the X/theta/noise draws never depend on which features are enabled.
enum Stream : std::uint64_t { kStreamX = 0, kStreamTheta = 1, kStreamW = 2, kStreamNoise = 3, kStreamDither = 4 };

// Fixed shard width. Per-shard partial sums are accumulated sequentially and
// reduced in shard order, so results are bit-identical for any worker count.
constexpr std::int64_t kShardSize = 1 << 16;

struct Accumulator {
    double sum = 0.0;
    double sum_sq = 0.0;
    void add(double x) {
        sum += x;
        sum_sq += x * x;
    }
    void merge(const Accumulator& other) {
        sum += other.sum;
        sum_sq += other.sum_sq;
    }
};

struct Partials {
    Accumulator d_e, d_d, power;
};

inline std::pair<double, double> mean_and_stderr(const Accumulator& acc, std::int64_t n) {
    const double mean = acc.sum / double(n);
    const double var = std::max(acc.sum_sq - double(n) * mean * mean, 0.0) / double(n - 1);
    return {mean, std::sqrt(var / double(n))};
}

template <typename Body>
void run_sharded(std::int64_t n, int threads, Body&& body) {
    const std::int64_t n_shards = (n + kShardSize - 1) / kShardSize;
    threads = std::max(1, threads);
    if (threads == 1) {
        for (std::int64_t s = 0; s < n_shards; ++s) body(s);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::int64_t s = next.fetch_add(1); s < n_shards; s = next.fetch_add(1)) body(s);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

/// Draws of (X, theta[, W]): row k is the lower-triangular model factor
/// applied to the standard normal variates of sample index k. Deterministic
/// given the seed.
inline Eigen::MatrixXd sample_source(const ModelParams& params, std::int64_t n, std::uint64_t seed) {
    if (n < 1) throw DomainError("need at least one sample");
    const CovMatrix cov = validate_model(params);
    const auto factor = detail::cholesky_lower(cov);
    if (!factor) throw NotPositiveDefinite("model covariance is not positive definite");
    const Eigen::Index dim = cov.rows();

    Eigen::MatrixXd draws(n, dim);
    for (std::int64_t k = 0; k < n; ++k) {
        Eigen::Vector3d z;
        z(0) = standard_normal(seed, detail::kStreamX, std::uint64_t(k));
        z(1) = standard_normal(seed, detail::kStreamTheta, std::uint64_t(k));
        if (dim > 2) z(2) = standard_normal(seed, detail::kStreamW, std::uint64_t(k));
        for (Eigen::Index i = 0; i < dim; ++i) {
            double v = 0.0;
            for (Eigen::Index j = 0; j <= i; ++j) v += (*factor)(i, j) * z(j);
            draws(k, i) = v;
        }
    }
    return draws;
}

/// Seeded simulation of the single-letter game: per-sample Xhat = dec_y*Y +
/// dec_w*W with Y = U + N in noisy mode and Y = U otherwise. `dither_var`
/// adds an independent noise term to U for exploratory stochastic-encoder
/// runs; equilibrium claims never use it.
inline SimResult simulate_game(const ModelParams& params,
                               const std::optional<ChannelParams>& channel,
                               const LinearStrategyPair& strategies, std::int64_t n,
                               std::uint64_t seed, int threads = 1, double dither_var = 0.0) {
    if (n < 2) throw DomainError("need at least two samples");
    if (!(dither_var >= 0.0)) throw DomainError("dither_var must be nonnegative");
    if (!params.has_si() && (strategies.enc_w != 0.0 || strategies.dec_w != 0.0))
        throw InconsistentStrategy("W coefficients require side-information fields");
    if (channel && !(channel->sigma_n2 > 0.0 && channel->p_t > 0.0))
        throw DomainError("channel parameters must be positive");

    const CovMatrix cov = validate_model(params);
    const auto factor_opt = detail::cholesky_lower(cov);
    if (!factor_opt) throw NotPositiveDefinite("model covariance is not positive definite");
    const Eigen::MatrixXd factor = *factor_opt;
    const bool si = cov.rows() > 2;
    const double sigma_n = channel ? std::sqrt(channel->sigma_n2) : 0.0;
    const double sigma_dither = std::sqrt(dither_var);

    const std::int64_t n_shards = (n + detail::kShardSize - 1) / detail::kShardSize;
    std::vector<detail::Partials> partials(static_cast<std::size_t>(n_shards));
    detail::run_sharded(n, threads, [&](std::int64_t shard) {
        detail::Partials acc;
        const std::int64_t lo = shard * detail::kShardSize;
        const std::int64_t hi = std::min(n, lo + detail::kShardSize);
        for (std::int64_t k = lo; k < hi; ++k) {
            const double zx = standard_normal(seed, detail::kStreamX, std::uint64_t(k));
            const double zt = standard_normal(seed, detail::kStreamTheta, std::uint64_t(k));
            const double x = factor(0, 0) * zx;
            const double theta = factor(1, 0) * zx + factor(1, 1) * zt;
            double w = 0.0;
            if (si) {
                const double zw = standard_normal(seed, detail::kStreamW, std::uint64_t(k));
                w = factor(2, 0) * zx + factor(2, 1) * zt + factor(2, 2) * zw;
            }
            double u = strategies.enc_scale *
                       (x + strategies.enc_alpha * theta + strategies.enc_w * w);
            if (sigma_dither > 0.0)
                u += sigma_dither * standard_normal(seed, detail::kStreamDither, std::uint64_t(k));
            double y = u;
            if (channel)
                y += sigma_n * standard_normal(seed, detail::kStreamNoise, std::uint64_t(k));
            const double xhat = strategies.dec_y * y + strategies.dec_w * w;
            const double err_e = x + theta - xhat;
            const double err_d = x - xhat;
            acc.d_e.add(err_e * err_e);
            acc.d_d.add(err_d * err_d);
            acc.power.add(u * u);
        }
        partials[std::size_t(shard)] = acc;
    });

    detail::Partials total;
    for (const auto& p : partials) {
        total.d_e.merge(p.d_e);
        total.d_d.merge(p.d_d);
        total.power.merge(p.power);
    }

    SimResult result;
    result.n_samples = n;
    result.seed = seed;
    std::tie(result.d_e_hat, result.d_e_stderr) = detail::mean_and_stderr(total.d_e, n);
    std::tie(result.d_d_hat, result.d_d_stderr) = detail::mean_and_stderr(total.d_d, n);
    std::tie(result.power_hat, result.power_stderr) = detail::mean_and_stderr(total.power, n);
    return result;
}

struct DeviationRow {
    double offset = 0.0;
    double alpha = 0.0;
    SimResult sim;
    double margin = 0.0;  ///< d_e(offset) + 5*combined stderr - d_e(0); negative flags an improvement
};

struct DeviationReport {
    std::vector<DeviationRow> rows;
    double equilibrium_alpha = 0.0;
    double worst_margin = 0.0;
    bool pass = false;  ///< no offset improved D_E beyond the 5-stderr band
};

/// Empirical Stackelberg check around a reported equilibrium coefficient:
/// for each offset the follower's best response is recomputed analytically
/// for that perturbed encoder, the game is simulated, and the zero-offset
/// transmitter distortion must not be beaten by more than 5 combined
/// standard errors.
inline DeviationReport deviation_audit(const ModelParams& params,
                                       const std::optional<ChannelParams>& channel,
                                       double equilibrium_alpha, const std::vector<double>& offsets,
                                       std::int64_t n, std::uint64_t seed, int threads = 1) {
    if (std::find(offsets.begin(), offsets.end(), 0.0) == offsets.end())
        throw DomainError("offset grid must contain 0");
    const CovMatrix model = validate_model(params);
    const bool use_w = params.has_si();

    auto strategy_at = [&](double a) {
        LinearStrategyPair pair;
        pair.enc_alpha = a;
        if (channel) {
            const double signal =
                params.sigma_x2 * (1.0 + 2.0 * a * params.rho_xtheta + a * a * params.r_theta);
            pair.enc_scale = std::sqrt(channel->p_t / signal);
        } else {
            pair.enc_scale = 1.0;
        }
        // Exact follower best response for this encoder.
        const Eigen::Index dim = model.rows();
        const Eigen::Index base_dim = dim + (channel ? 1 : 0);
        CovMatrix base = CovMatrix::Zero(base_dim, base_dim);
        base.topLeftCorner(dim, dim) = model;
        if (channel) base(dim, dim) = channel->sigma_n2;
        Eigen::VectorXd v_y = Eigen::VectorXd::Zero(base_dim);
        v_y(0) = pair.enc_scale;
        v_y(1) = pair.enc_scale * a;
        if (channel) v_y(dim) = 1.0;
        std::vector<Eigen::VectorXd> vecs;
        for (Eigen::Index i = 0; i < dim; ++i) vecs.push_back(Eigen::VectorXd::Unit(base_dim, i));
        vecs.push_back(v_y);
        const CovMatrix aug = lincomb_cov(base, vecs);
        IndexSet given{dim};
        if (use_w) given.push_back(2);
        const ConditionalResult dec = conditional(aug, 0, given);
        pair.dec_y = dec.coefficients(0);
        pair.dec_w = use_w ? dec.coefficients(1) : 0.0;
        return pair;
    };

    DeviationReport report;
    report.equilibrium_alpha = equilibrium_alpha;
    const SimResult at_eq =
        simulate_game(params, channel, strategy_at(equilibrium_alpha), n, seed, threads);
    report.worst_margin = std::numeric_limits<double>::infinity();
    for (double offset : offsets) {
        DeviationRow row;
        row.offset = offset;
        row.alpha = equilibrium_alpha + offset;
        row.sim = (offset == 0.0)
                      ? at_eq
                      : simulate_game(params, channel, strategy_at(row.alpha), n, seed, threads);
        const double combined =
            std::sqrt(row.sim.d_e_stderr * row.sim.d_e_stderr + at_eq.d_e_stderr * at_eq.d_e_stderr);
        row.margin = row.sim.d_e_hat + 5.0 * combined - at_eq.d_e_hat;
        if (offset != 0.0) report.worst_margin = std::min(report.worst_margin, row.margin);
        report.rows.push_back(row);
    }
    report.pass = report.worst_margin >= 0.0;
    return report;
}

}  // namespace stratcomm
