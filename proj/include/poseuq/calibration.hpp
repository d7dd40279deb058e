#pragma once

#include <vector>

#include "poseuq/prediction_log.hpp"

namespace poseuq {

/// Gaussian uses N(mean, var) for every method. StudentT uses the evidential
/// Student-t predictive and needs records that carry it.
enum class PredictiveKind { Gaussian, StudentT };

struct CalibrationCurve {
    int component = 0;
    std::vector<double> levels;
    std::vector<double> observed;
    double mce = 0.0;
    /// Standard deviation of |observed - level| across levels.
    double mce_spread = 0.0;
};

/// Standard-normal central quantile: P(|Z| <= z) = level.
double central_z(double level);

/// Fraction of records whose (wrapped) residual lies in the central
/// level-credible interval of the component's predictive.
double coverage_at_level(const PredictionLog& log, int component, double level,
                         PredictiveKind kind = PredictiveKind::Gaussian);

/// Levels k / (n_levels + 1), k = 1..n_levels.
CalibrationCurve calibration_curve(const PredictionLog& log, int component, int n_levels = 19,
                                   PredictiveKind kind = PredictiveKind::Gaussian);

double mean_calibration_error(const CalibrationCurve& curve);

}  // namespace poseuq
