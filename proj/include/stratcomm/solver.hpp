#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <utility>

#include "stratcomm/errors.hpp"

namespace stratcomm {

struct ScalarMinResult {
    double argmin = 0.0;
    double value = 0.0;
    int evaluations = 0;
    std::pair<double, double> bracket_used{0.0, 0.0};
};

/// Global bracketed scalar minimization: a coarse grid scan (default 1001
/// points) locates the best cell, then golden-section refinement shrinks the
/// winning cell's closed neighborhood (one cell on each side) to width <= tol.
/// Ties break toward the smaller argument; the returned point is the best
/// point actually evaluated, so its value never exceeds any grid value.
/// Deterministic: no randomized steps.
template <typename F>
ScalarMinResult minimize_scalar(F&& f, double lo, double hi, double tol = 1e-9,
                                int grid_points = 1001) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
        throw InvalidBracket("requires lo < hi and finite endpoints");
    if (!(tol > 0.0)) throw InvalidBracket("tol must be positive");
    if (grid_points < 3) throw InvalidBracket("grid needs at least 3 points");

    int evals = 0;
    auto eval = [&](double x) {
        const double y = f(x);
        ++evals;
        if (!std::isfinite(y)) throw NonFiniteEvaluation("objective returned a non-finite value");
        return y;
    };

    double best_x = lo;
    double best_y = eval(lo);
    int best_i = 0;
    const double step = (hi - lo) / double(grid_points - 1);
    for (int i = 1; i < grid_points; ++i) {
        const double x = (i == grid_points - 1) ? hi : lo + step * double(i);
        const double y = eval(x);
        if (y < best_y) {
            best_y = y;
            best_x = x;
            best_i = i;
        }
    }

    // Golden-section refinement inside [x_{i-1}, x_{i+1}].
    double a = std::max(lo, lo + step * double(best_i - 1));
    double b = std::min(hi, lo + step * double(best_i + 1));
    constexpr double kInvPhi = 0.6180339887498949;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = eval(x1);
    double f2 = eval(x2);
    auto consider = [&](double x, double y) {
        if (y < best_y || (y == best_y && x < best_x)) {
            best_y = y;
            best_x = x;
        }
    };
    consider(x1, f1);
    consider(x2, f2);
    while (b - a > tol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = eval(x1);
            consider(x1, f1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = eval(x2);
            consider(x2, f2);
        }
    }

    return {best_x, best_y, evals, {lo, hi}};
}

/// minimize_scalar with the bracket-expansion policy used by the equilibrium
/// coefficient searches: when the argmin lands within 1% of an endpoint, the
/// bracket is doubled around its center and the search repeats, at most three
/// times.
template <typename F>
ScalarMinResult minimize_expanding(F&& f, double lo, double hi, double tol = 1e-9,
                                   int grid_points = 1001) {
    for (int attempt = 0; attempt <= 3; ++attempt) {
        ScalarMinResult res = minimize_scalar(f, lo, hi, tol, grid_points);
        const double margin = 0.01 * (hi - lo);
        if (res.argmin - lo >= margin && hi - res.argmin >= margin) return res;
        const double center = (lo + hi) / 2.0;
        const double half = hi - lo;  // doubled width
        lo = center - half;
        hi = center + half;
    }
    throw BracketExpansionExceeded("argmin stayed at the bracket edge after three expansions");
}

/// Local refinement of a smooth interior minimum by successive parabolic fits
/// on shrinking symmetric stencils. Stays within +-steps[0] of the input
/// point. Used where an argmin from golden-section needs to feed an analytic
/// identity at ~1e-10 accuracy.
template <typename F>
double polish_parabolic(F&& f, double x, std::initializer_list<double> steps = {1e-4, 1e-6}) {
    for (double h : steps) {
        const double fm = f(x - h);
        const double f0 = f(x);
        const double fp = f(x + h);
        if (!std::isfinite(fm) || !std::isfinite(f0) || !std::isfinite(fp)) return x;
        const double curvature = fp - 2.0 * f0 + fm;
        // Skip a step whose curvature signal is within ~32x of the rounding
        // noise in the stencil; fitting through noise would move the point
        // randomly instead of refining it.
        const double noise_floor =
            32.0 * std::numeric_limits<double>::epsilon() *
            std::max({std::abs(fm), std::abs(f0), std::abs(fp), 1e-300});
        if (!(curvature > noise_floor)) continue;
        double vertex = x - 0.5 * h * (fp - fm) / curvature;
        vertex = std::min(std::max(vertex, x - h), x + h);
        x = vertex;
    }
    return x;
}

}  // namespace stratcomm
