#include "stratcomm/strategic_rd.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace stratcomm;
using testsupport::Uniform;

namespace {

ModelParams with_si(double sigma_x2, double rho, double r, double rho_xw, double rho_thetaw,
                    double r_w) {
    ModelParams p;
    p.sigma_x2 = sigma_x2;
    p.rho_xtheta = rho;
    p.r_theta = r;
    p.rho_xw = rho_xw;
    p.rho_thetaw = rho_thetaw;
    p.r_w = r_w;
    return p;
}

}  // namespace

TEST(RdPointNoSi, ZeroRateEndpoint) {
    const RDPoint pt = rd_point_no_si(1.0, 0.3, 2.0, 0.0);
    EXPECT_NEAR(pt.distortions.d_d, 2.0, 1e-14);
    EXPECT_NEAR(pt.distortions.d_e, 2.0 * (1.0 + 0.6 + 1.0), 1e-13);
    // Printed formulas agree with the oracle at this endpoint.
    EXPECT_NEAR(*pt.d_d_paper, pt.distortions.d_d, 1e-12);
    EXPECT_NEAR(*pt.d_e_paper, pt.distortions.d_e, 1e-12);
    EXPECT_TRUE(std::isinf(pt.sigma_s2));
    EXPECT_EQ(pt.i_yw, 0.0);
}

TEST(RdPointNoSi, InfiniteRateRecoversNoiselessEquilibrium) {
    const double inf = std::numeric_limits<double>::infinity();
    const RDPoint pt = rd_point_no_si(1.0, 0.0, 1.0, inf);
    EXPECT_NEAR(pt.distortions.d_d, 0.2763932022500210, 1e-9);
    EXPECT_NEAR(pt.distortions.d_e, 0.3819660112501051, 1e-9);
    EXPECT_EQ(pt.sigma_s2, 0.0);
    // The printed formulas drift from the noiseless equilibrium in this limit;
    // both columns are reported so the audit can surface the gap.
    EXPECT_NEAR(*pt.d_d_paper, 0.0, 1e-12);
    EXPECT_GT(std::abs(*pt.d_d_paper - pt.distortions.d_d), 0.27);
    EXPECT_GT(std::abs(*pt.d_e_paper - pt.distortions.d_e), 0.19 - 1e-3);
}

TEST(RdPointNoSi, HalfBitFixture) {
    const RDPoint pt = rd_point_no_si(1.0, 0.0, 1.0, 0.5);
    EXPECT_NEAR(pt.beta, 0.6180339887498949, 1e-12);
    EXPECT_NEAR(pt.sigma_s2, 1.3819660112501051, 1e-12);
    EXPECT_NEAR(pt.distortions.d_d, 0.6381966011250105, 1e-12);
    EXPECT_NEAR(pt.distortions.d_e, 1.1909830056250526, 1e-12);
}

TEST(WzRate, UninformativeWReducesToPlainRate) {
    const ModelParams p = with_si(1.0, 0.1, 1.2, 0.0, 0.0, 1.0);
    const double beta = 0.7;
    const double s2 = 0.8;
    const double rate = wz_rate(p, beta, s2);
    const double plain =
        0.5 * std::log2(1.0 + (1.0 + beta * beta * 1.2 + 2.0 * beta * 0.1) / s2);
    EXPECT_NEAR(rate, plain, 1e-13);
}

TEST(WzRate, PureNoiseChannelCarriesNothing) {
    const ModelParams p = with_si(1.0, 0.1, 1.2, 0.3, 0.2, 1.0);
    EXPECT_NEAR(wz_rate(p, 0.5, 1e9), 0.0, 1e-8);
    EXPECT_EQ(wz_rate(p, 0.5, std::numeric_limits<double>::infinity()), 0.0);
}

TEST(WzRate, HandComputedFixture) {
    const ModelParams p = with_si(1.0, 0.0, 1.0, 0.5, 0.0, 1.0);
    const double rate = wz_rate(p, 0.618034, 1.0);
    EXPECT_NEAR(rate, 0.5 * std::log2(2.131966011), 1e-8);
    EXPECT_NEAR(rate, 0.5461, 1e-4);
}

TEST(WzSigmaS2, RoundTripsWithRate) {
    Uniform u(31);
    for (int trial = 0; trial < 40; ++trial) {
        const ModelParams p = testsupport::random_si_params(u);
        const double beta = u.range(-2.0, 2.0);
        const double rate = u.range(0.05, 6.0);
        const double s2 = wz_sigma_s2(p, beta, rate);
        ASSERT_GT(s2, 0.0);
        EXPECT_NEAR(wz_rate(p, beta, s2), rate, 1e-12 * std::max(1.0, rate));
    }
}

TEST(WzSigmaS2, LimitsAndPreconditions) {
    const ModelParams p = with_si(1.0, 0.0, 1.0, 0.5, 0.0, 1.0);
    EXPECT_NEAR(wz_sigma_s2(p, 0.618034, 20.0), 0.0, 1e-11);
    EXPECT_EQ(wz_sigma_s2(p, 0.618034, std::numeric_limits<double>::infinity()), 0.0);
    EXPECT_THROW(wz_sigma_s2(p, 0.618034, 0.0), DomainError);
    EXPECT_THROW(wz_sigma_s2(p, 0.618034, -1.0), DomainError);
    // Inversion of the hand-computed rate fixture.
    const double rate = wz_rate(p, 0.618034, 1.0);
    EXPECT_NEAR(wz_sigma_s2(p, 0.618034, rate), 1.0, 1e-10);
}

TEST(WzDistortions, IndependentWDropsOutOfConditioning) {
    const ModelParams p = with_si(1.0, 0.0, 1.0, 0.0, 0.0, 1.0);
    const double beta = closed_form_alpha(1.0, 0.0);
    for (double s2 : {0.0, 0.5, 2.0}) {
        const WzDistortions wz = wz_distortions(p, beta, s2);
        const RDPoint plain = rd_point_no_si(1.0, 0.0, 1.0, 0.0);
        (void)plain;
        const detail::RdOutcome no_w =
            detail::test_channel_distortions(validate_model(p), beta, s2, false);
        EXPECT_LT(testsupport::rel_diff(wz.oracle.d_e, no_w.distortions.d_e), 1e-12);
        EXPECT_LT(testsupport::rel_diff(wz.oracle.d_d, no_w.distortions.d_d), 1e-12);
        EXPECT_NEAR(wz.dec_w, 0.0, 1e-13);
        // The printed transmitter formula differs from the oracle even here;
        // it is reported as a cross-check field only.
        EXPECT_TRUE(std::isfinite(wz.d_e_paper));
    }
}

TEST(WzDistortions, InfiniteNoiseFallsBackToSideInformationOnly) {
    const ModelParams p = with_si(1.0, 0.1, 1.0, 0.5, 0.3, 1.0);
    const WzDistortions wz = wz_distortions(p, 0.7, std::numeric_limits<double>::infinity());
    EXPECT_NEAR(wz.oracle.d_d, 1.0 - 0.25, 1e-13);  // var(X|W) = 1 - rho_xw^2/r_w
    const WzDistortions nearly = wz_distortions(p, 0.7, 1e12);
    EXPECT_NEAR(nearly.oracle.d_d, wz.oracle.d_d, 1e-9);
}

TEST(WzDistortions, PriorMeanDecoderAtZeroBetaInfiniteNoise) {
    const ModelParams p = with_si(1.0, 0.2, 1.1, 0.0, 0.4, 1.0);
    const WzDistortions wz = wz_distortions(p, 0.0, std::numeric_limits<double>::infinity());
    // rho_xw = 0 so E[X|W] = 0: the decoder outputs the prior mean.
    EXPECT_NEAR(wz.oracle.d_d, 1.0, 1e-13);
    EXPECT_NEAR(wz.oracle.d_e, 1.0 + 2.0 * 0.2 + 1.1, 1e-13);
    EXPECT_NEAR(wz.d_e_paper, 1.0 + 2.0 * 0.2 + 1.1, 1e-13);
}

TEST(BetaStar, UninformativeWMatchesNoSiCoefficient) {
    const ModelParams p = with_si(1.0, 0.25, 1.3, 0.0, 0.0, 1.0);
    const double alpha = closed_form_alpha(1.3, 0.25);
    for (double rate : {0.4, 1.0, 3.0}) {
        const RDPoint pt = beta_star(p, rate);
        EXPECT_NEAR(pt.beta, alpha, 1e-6);
        EXPECT_NEAR(pt.i_yw, 0.0, 1e-12);
    }
}

TEST(BetaStar, RateIndependenceWithCorrelatedW) {
    // With the oracle objective the side-information game reduces exactly to
    // a no-SI game on the W-residual source, so the argmin does not move with
    // the rate. Frozen as a regression fixture.
    const ModelParams p = with_si(1.0, 0.2, 1.0, 0.4, 0.3, 1.0);
    const RDPoint lo = beta_star(p, 0.5);
    const RDPoint hi = beta_star(p, 2.0);
    EXPECT_NEAR(lo.beta, 0.5898909412534249, 1e-7);
    EXPECT_NEAR(hi.beta, 0.5898909412534249, 1e-7);
    EXPECT_NEAR(lo.beta, hi.beta, 1e-7);
    EXPECT_GT(lo.i_yw, 1e-3);  // Y genuinely correlates with W here
}

TEST(BetaStar, OneSidedPerturbationsNeverImprove) {
    Uniform u(32);
    for (int trial = 0; trial < 3; ++trial) {
        const ModelParams p = testsupport::random_si_params(u);
        const double rate = u.range(0.3, 3.0);
        const RDPoint pt = beta_star(p, rate);
        for (int i = 0; i <= 200; ++i) {
            const double beta = pt.beta - 1.0 + 0.01 * double(i);
            const double d_e =
                wz_distortions(p, beta, wz_sigma_s2(p, beta, rate)).oracle.d_e;
            EXPECT_GE(d_e, pt.distortions.d_e - 1e-10);
        }
    }
}

TEST(BetaStar, YIndependentOfWExactlyWhenCrossCovarianceVanishes) {
    Uniform u(33);
    for (int trial = 0; trial < 10; ++trial) {
        const ModelParams p = testsupport::random_si_params(u);
        const double rate = u.range(0.3, 3.0);
        const RDPoint pt = beta_star(p, rate);
        const double cross = *p.rho_xw + pt.beta * *p.rho_thetaw;
        if (std::abs(cross) < 1e-12) {
            EXPECT_LT(pt.i_yw, 1e-12);
        } else {
            EXPECT_GT(pt.i_yw, 0.0);
        }
    }
}

TEST(WzCurve, MonotoneReceiverDistortionAndNoiselessLimit) {
    const ModelParams p = with_si(1.0, 0.2, 1.0, 0.4, 0.3, 1.0);
    const std::vector<double> rates{0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 14.0};
    const std::vector<RDPoint> curve = wz_curve(p, rates);
    ASSERT_EQ(curve.size(), rates.size());
    for (std::size_t i = 1; i < curve.size(); ++i)
        EXPECT_LE(curve[i].distortions.d_d, curve[i - 1].distortions.d_d + 1e-12);
    // Ceiling: the decoder always holds W.
    const double ceiling = 1.0 - 0.4 * 0.4 / 1.0;
    for (const RDPoint& pt : curve) EXPECT_LE(pt.distortions.d_d, ceiling + 1e-12);
    // Large rate approaches the noiseless SI equilibrium.
    const EquilibriumReport eq = solve_stackelberg(p, true);
    EXPECT_NEAR(curve.back().distortions.d_e, eq.distortions.d_e, 1e-6);
    EXPECT_NEAR(curve.back().distortions.d_d, eq.distortions.d_d, 1e-6);
}

TEST(WzCurve, RejectsUnsortedOrNonpositiveRates) {
    const ModelParams p = with_si(1.0, 0.0, 1.0, 0.3, 0.2, 1.0);
    EXPECT_THROW(wz_curve(p, {1.0, 0.5}), DomainError);
    EXPECT_THROW(wz_curve(p, {0.0, 1.0}), DomainError);
}

TEST(RateLossAudit, ZeroMixingExactAndWGridInvariant) {
    Uniform u(34);
    for (int trial = 0; trial < 5; ++trial) {
        const ModelParams p = testsupport::random_si_params(u);
        const RateLossReport rep = rate_loss_audit(p, 1.0, {-3.0, -1.0, 1.0, 3.0});
        EXPECT_LT(rep.max_deviation, 1e-10);
        EXPECT_LT(rep.max_mi_route_gap, 1e-10);
        EXPECT_TRUE(rep.pass);
    }
}

TEST(FormulaAudit, FlagsTheLargeRateDrift) {
    const FormulaAuditReport rep = formula_audit(builtin_formula_audit_sets(),
                                                 {0.4, 1.0, 2.0, 4.0, 8.0});
    EXPECT_TRUE(rep.discrepancy_flagged);
    EXPECT_GT(rep.max_gap_d_d, 0.5);
    EXPECT_FALSE(rep.narrative.empty());
    // Oracle columns at the golden fixture match the hand-computed values.
    bool found = false;
    for (const auto& row : rep.rows) {
        if (row.set_id == 0 && row.rate == 8.0) {
            // Convergence to the noiseless equilibrium is O(2^-2R).
            EXPECT_NEAR(row.oracle_d_d, 0.2763932022500210, 1e-4);
            EXPECT_NEAR(row.oracle_d_e, 0.3819660112501051, 1e-4);
            found = true;
        }
    }
    EXPECT_TRUE(found);
}
