#include <gtest/gtest.h>

#include <cmath>

#include "poseuq/calibration.hpp"

using namespace poseuq;

namespace {

PredictionRecord record(std::uint64_t id, std::array<double, 6> mean, std::array<double, 6> var,
                        std::array<double, 6> truth) {
    PredictionRecord r;
    r.id = id;
    r.prediction.mean = mean;
    r.prediction.var = var;
    r.truth = make_pose(Translation{truth[0], truth[1], truth[2]}, EulerTriple{truth[3], truth[4], truth[5]});
    return r;
}

// Truth drawn from the stated predictive: the ideal calibrated generator.
PredictionLog generated(std::size_t n, std::uint64_t seed, double var_scale) {
    Rng rng(seed);
    PredictionLog log;
    for (std::size_t i = 0; i < n; ++i) {
        std::array<double, 6> mean{}, var{}, truth{};
        for (int c = 0; c < 6; ++c) {
            mean[c] = is_angular(c) ? rng.uniform(-0.5, 0.5) : rng.normal() * 3.0;
            var[c] = is_angular(c) ? rng.uniform(1e-4, 1e-2) : rng.uniform(0.01, 1.0);
            truth[c] = mean[c] + std::sqrt(var[c]) * rng.normal();
            var[c] *= var_scale;
        }
        log.records.push_back(record(i, mean, var, truth));
    }
    return log;
}

}  // namespace

TEST(CentralZ, Known) {
    EXPECT_NEAR(central_z(0.6826894921370859), 1.0, 1e-12);
    EXPECT_NEAR(central_z(0.95), 1.959963984540054, 1e-12);
    EXPECT_THROW(central_z(1.0), std::invalid_argument);
}

TEST(Coverage, Examples) {
    PredictionLog log;
    log.records.push_back(record(0, {0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1}, {0.5, 0, 0, 0, 0, 0}));
    log.records.push_back(record(1, {0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1}, {2.0, 0, 0, 0, 0, 0}));
    EXPECT_DOUBLE_EQ(coverage_at_level(log, 0, 0.6826894921370859), 0.5);
    EXPECT_DOUBLE_EQ(coverage_at_level(log, 0, 0.99), 1.0);
    EXPECT_DOUBLE_EQ(coverage_at_level(log, 1, 0.1), 1.0);
}

TEST(Coverage, AngularResidualWraps) {
    PredictionLog log;
    log.records.push_back(record(0, {0, 0, 0, 0, 0, kPi - 0.05}, {1, 1, 1, 1, 1, 0.01}, {0, 0, 0, 0, 0, -kPi + 0.05}));
    EXPECT_DOUBLE_EQ(coverage_at_level(log, 5, 0.6826894921370859), 1.0);
}

TEST(Curve, LevelsAndMonotone) {
    const auto log = generated(2000, 1, 1.0);
    for (int c = 0; c < 6; ++c) {
        const auto curve = calibration_curve(log, c, 19);
        ASSERT_EQ(curve.levels.size(), 19u);
        EXPECT_DOUBLE_EQ(curve.levels.front(), 0.05);
        EXPECT_DOUBLE_EQ(curve.levels.back(), 0.95);
        for (std::size_t i = 1; i < curve.observed.size(); ++i) EXPECT_GE(curve.observed[i], curve.observed[i - 1]);
        EXPECT_DOUBLE_EQ(mean_calibration_error(curve), curve.mce);
    }
}

TEST(Curve, CalibratedGeneratorHasSmallError) {
    const auto log = generated(10000, 2, 1.0);
    for (int c = 0; c < 6; ++c) EXPECT_LT(calibration_curve(log, c).mce, 0.02);
}

TEST(Curve, InflatingVarianceRaisesCoverage) {
    const auto a = generated(3000, 3, 1.0);
    const auto b = generated(3000, 3, 4.0);
    for (double level : {0.2, 0.5, 0.8}) EXPECT_GE(coverage_at_level(b, 0, level), coverage_at_level(a, 0, level));
}

TEST(Curve, OverconfidentApproachesHalf) {
    const auto log = generated(2000, 4, 1e-12);
    for (int c = 0; c < 6; ++c) EXPECT_NEAR(calibration_curve(log, c).mce, 0.5, 0.01);
}

TEST(Curve, StudentKindNeedsStudent) {
    const auto log = generated(10, 5, 1.0);
    EXPECT_THROW(coverage_at_level(log, 0, 0.5, PredictiveKind::StudentT), std::invalid_argument);
}

TEST(Curve, StudentKindOnGeneratedTruth) {
    Rng rng(6);
    PredictionLog log;
    for (std::uint64_t i = 0; i < 20000; ++i) {
        // t with dof 4 as normal / sqrt(chi2_4 / 4)
        double g = 0.0;
        for (int k = 0; k < 4; ++k) {
            const double z = rng.normal();
            g += z * z;
        }
        const double t = rng.normal() / std::sqrt(g / 4.0);
        auto r = record(i, {0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1}, {2.0 * t, 0, 0, 0, 0, 0});
        std::array<StudentTParams, 6> st{};
        st.fill({0.0, 4.0, 4.0});
        r.prediction.student = st;
        log.records.push_back(r);
    }
    EXPECT_LT(calibration_curve(log, 0, 19, PredictiveKind::StudentT).mce, 0.02);
}

TEST(Curve, RejectsBadInput) {
    const auto log = generated(10, 7, 1.0);
    EXPECT_THROW(calibration_curve(log, 6), std::out_of_range);
    EXPECT_THROW(calibration_curve(log, 0, 1), std::invalid_argument);
    EXPECT_THROW(coverage_at_level(PredictionLog{}, 0, 0.5), std::invalid_argument);
}
