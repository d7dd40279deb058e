#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>

#include "poseuq/evidential.hpp"
#include "poseuq/gradcheck.hpp"
#include "poseuq/pose_math.hpp"
#include "poseuq/rng.hpp"

using namespace poseuq;

namespace {

// Inverse-gamma draw via a Gamma(alpha, 1) from Marsaglia-Tsang on our own Rng.
double gamma_draw(double shape, Rng& rng) {
    if (shape < 1.0) return gamma_draw(shape + 1.0, rng) * std::pow(rng.uniform(), 1.0 / shape);
    const double d = shape - 1.0 / 3.0, c = 1.0 / std::sqrt(9.0 * d);
    while (true) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
}

double normal_pdf(double y, double mu, double var) {
    return std::exp(-0.5 * (y - mu) * (y - mu) / var) / std::sqrt(2.0 * kPi * var);
}

}  // namespace

TEST(NigMoments, Examples) {
    const auto m1 = nig_moments({0.0, 1.0, 2.0, 1.0});
    EXPECT_EQ(m1.mean, 0.0);
    EXPECT_DOUBLE_EQ(m1.epistemic_var, 1.0);
    const auto m2 = nig_moments({2.5, 4.0, 3.0, 8.0});
    EXPECT_EQ(m2.mean, 2.5);
    EXPECT_DOUBLE_EQ(m2.epistemic_var, 1.0);
}

TEST(NigMoments, RejectsInvalid) {
    EXPECT_THROW(nig_moments({0.0, 1.0, 1.0, 1.0}), std::domain_error);
    EXPECT_THROW(nig_moments({0.0, 0.0, 2.0, 1.0}), std::domain_error);
    EXPECT_THROW(nig_moments({0.0, 1.0, 2.0, 0.0}), std::domain_error);
    EXPECT_THROW(nig_moments({0.0, -1.0, 2.0, 1.0}), std::domain_error);
}

TEST(NigMoments, MonteCarloHierarchy) {
    // sigma^2 ~ InvGamma(alpha, beta), mu ~ N(gamma, sigma^2 / nu)
    const NIGParams p{0.0, 1.0, 2.0, 1.0};
    Rng rng(101);
    const int n = 1000000;
    double s = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double sigma2 = p.beta / gamma_draw(p.alpha, rng);
        const double mu = p.gamma + std::sqrt(sigma2 / p.nu) * rng.normal();
        s += mu;
        ss += mu * mu;
    }
    const double mean = s / n;
    const double var = ss / n - mean * mean;
    EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(Aleatoric, Value) { EXPECT_DOUBLE_EQ(aleatoric_var({0.0, 3.0, 3.0, 4.0}), 2.0); }

TEST(EvidencePhi, Examples) {
    EXPECT_DOUBLE_EQ(evidence_phi({0.0, 1.0, 2.0, 1.0}), 4.0);
    EXPECT_DOUBLE_EQ(evidence_phi({0.0, 0.5, 1.5, 1.0}), 2.5);
    EXPECT_DOUBLE_EQ(evidence_phi({0.0, 10.0, 3.0, 1.0}), 23.0);
}

TEST(PredictiveStudent, Examples) {
    const auto a = predictive_student({0.0, 1.0, 1.5, 0.75});
    EXPECT_EQ(a.loc, 0.0);
    EXPECT_DOUBLE_EQ(a.scale_sq, 1.0);
    EXPECT_DOUBLE_EQ(a.dof, 3.0);
    const auto b = predictive_student({1.0, 3.0, 2.0, 6.0});
    EXPECT_EQ(b.loc, 1.0);
    EXPECT_DOUBLE_EQ(b.scale_sq, 4.0);
    EXPECT_DOUBLE_EQ(b.dof, 4.0);
}

TEST(PredictiveStudent, DofAboveTwo) {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const NIGParams p{rng.normal(), rng.uniform(1e-3, 10.0), 1.0 + rng.uniform(1e-9, 10.0), rng.uniform(1e-3, 10.0)};
        EXPECT_GT(predictive_student(p).dof, 2.0);
    }
}

TEST(StudentPdf, CauchyAtMode) {
    EXPECT_NEAR(student_t_pdf(0.0, {0.0, 1.0, 1.0}), 1.0 / kPi, 1e-15);
}

TEST(StudentPdf, SymmetricAndMaximalAtLoc) {
    Rng rng(13);
    for (int i = 0; i < 200; ++i) {
        const StudentTParams st{rng.normal(), rng.uniform(0.1, 5.0), rng.uniform(0.5, 30.0)};
        const double d = rng.uniform(0.0, 10.0);
        EXPECT_NEAR(student_t_pdf(st.loc + d, st), student_t_pdf(st.loc - d, st), 1e-15);
        EXPECT_LE(student_t_pdf(st.loc + d, st), student_t_pdf(st.loc, st));
        EXPECT_GT(student_t_pdf(st.loc + d, st), 0.0);
    }
}

TEST(StudentPdf, MatchesClosedForm) {
    const StudentTParams st{0.5, 2.0, 5.0};
    const double y = 1.7;
    const double v = st.dof;
    const double expected = std::tgamma((v + 1) / 2) / (std::tgamma(v / 2) * std::sqrt(v * kPi * st.scale_sq)) *
                            std::pow(1 + (y - st.loc) * (y - st.loc) / (v * st.scale_sq), -(v + 1) / 2);
    EXPECT_NEAR(student_t_pdf(y, st), expected, 1e-14);
}

TEST(StudentPdf, IntegratesToOne) {
    Rng rng(19);
    for (int i = 0; i < 10; ++i) {
        const StudentTParams st{rng.normal(), rng.uniform(0.1, 4.0), rng.uniform(2.0, 20.0)};
        const double s = std::sqrt(st.scale_sq);
        const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
            [&](double y) { return student_t_pdf(y, st); }, st.loc - 50 * s, st.loc + 50 * s, 15, 1e-13);
        // The tails beyond 50 scales hold a little mass for small dof.
        const double tail = 2.0 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                                      [&](double y) { return student_t_pdf(y, st); }, st.loc + 50 * s,
                                      std::numeric_limits<double>::infinity(), 15, 1e-13);
        EXPECT_NEAR(integral + tail, 1.0, 1e-6);
        if (st.dof >= 5.0) EXPECT_NEAR(integral, 1.0, 1e-6);
    }
}

TEST(StudentPdf, LargeDofApproachesNormal) {
    const StudentTParams st{0.3, 2.0, 1e6};
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double y = st.loc - 5.0 + 10.0 * i / 99.0;
        worst = std::max(worst, std::abs(student_t_pdf(y, st) - normal_pdf(y, st.loc, st.scale_sq)));
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(ClippedDensity, Examples) {
    // Density 0.5 at the mode: scale_sq chosen so the Cauchy peak is 0.5.
    const StudentTParams half{0.0, 1.0 / (0.25 * kPi * kPi), 1.0};
    EXPECT_NEAR(clipped_density(0.0, half), 0.5, 1e-12);
    const StudentTParams st{0.0, 1.0, 3.0};
    EXPECT_LT(student_t_pdf(1e3, st), 1e-8);
    EXPECT_EQ(clipped_density(1e3, st), 0.04);
    EXPECT_EQ(clipped_density(1e6, st), 0.04);
    EXPECT_LE(1.0 / clipped_density(1e6, st), 25.0);
}

TEST(ClippedDensity, MonotoneAndBoundedBelow) {
    const StudentTParams st{0.0, 1.0, 4.0};
    double prev = clipped_density(0.0, st);
    for (int i = 1; i < 200; ++i) {
        const double y = 0.1 * i;
        const double c = clipped_density(y, st);
        EXPECT_GE(c, 0.04);
        EXPECT_LE(c, prev);  // raw density decreases away from loc
        EXPECT_EQ(c, std::max(student_t_pdf(y, st), 0.04));
        prev = c;
    }
}

TEST(PredictiveLogPdfGrad, MatchesFiniteDifference) {
    Rng rng(43);
    for (int i = 0; i < 200; ++i) {
        const NIGParams p{rng.normal(), rng.uniform(0.05, 5.0), 1.0 + rng.uniform(0.05, 5.0), rng.uniform(0.05, 5.0)};
        const double y = p.gamma + 2.0 * rng.normal();
        const NIGGrad g = predictive_log_pdf_grad(y, p);
        const std::vector<double> x{p.gamma, p.nu, p.alpha, p.beta};
        auto f = [&](std::span<const double> v) {
            return student_t_log_pdf(y, predictive_student({v[0], v[1], v[2], v[3]}));
        };
        EXPECT_LT(relative_error(g.gamma, central_difference(f, x, 0)), 1e-6);
        EXPECT_LT(relative_error(g.nu, central_difference(f, x, 1)), 1e-6);
        EXPECT_LT(relative_error(g.alpha, central_difference(f, x, 2)), 1e-6);
        EXPECT_LT(relative_error(g.beta, central_difference(f, x, 3)), 1e-6);
    }
}

TEST(NigValidity, IsValid) {
    EXPECT_TRUE(is_valid({0.0, 1.0, 2.0, 1.0}));
    EXPECT_FALSE(is_valid({0.0, 1.0, 1.0, 1.0}));
    EXPECT_FALSE(is_valid({std::numeric_limits<double>::quiet_NaN(), 1.0, 2.0, 1.0}));
}
