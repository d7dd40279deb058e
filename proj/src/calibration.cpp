#include "poseuq/calibration.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <stdexcept>

#include "poseuq/kernels.hpp"

namespace poseuq {

namespace {

void check_component(int component) {
    if (component < 0 || component > 5) throw std::out_of_range("component index must be in [0, 6)");
}

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must be in (0, 1)");
}

double residual(const PredictionRecord& r, int c, double center) {
    const double y = r.truth.components()[c];
    return is_angular(c) ? wrap_angle(y - center) : y - center;
}

}  // namespace

double central_z(double level) {
    check_level(level);
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, 0.5 + level / 2.0);
}

double coverage_at_level(const PredictionLog& log, int component, double level, PredictiveKind kind) {
    check_component(component);
    check_level(level);
    if (log.records.empty()) throw std::invalid_argument("coverage_at_level: empty log");
    const std::size_t n = log.records.size();

    if (kind == PredictiveKind::Gaussian) {
        std::vector<double> res(n), var(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& r = log.records[i];
            res[i] = residual(r, component, r.prediction.mean[component]);
            var[i] = r.prediction.var[component];
        }
        return static_cast<double>(kernels::count_covered_parallel(res, var, central_z(level))) /
               static_cast<double>(n);
    }

    std::size_t covered = 0;
    for (const auto& r : log.records) {
        if (!r.prediction.student) throw std::invalid_argument("coverage_at_level: record lacks a Student-t predictive");
        const StudentTParams& st = (*r.prediction.student)[component];
        const boost::math::students_t_distribution<double> dist(st.dof);
        const double t = boost::math::quantile(dist, 0.5 + level / 2.0);
        if (std::abs(residual(r, component, st.loc)) <= t * std::sqrt(st.scale_sq)) ++covered;
    }
    return static_cast<double>(covered) / static_cast<double>(n);
}

CalibrationCurve calibration_curve(const PredictionLog& log, int component, int n_levels, PredictiveKind kind) {
    check_component(component);
    if (n_levels < 2) throw std::invalid_argument("calibration_curve: n_levels must be >= 2");
    CalibrationCurve curve;
    curve.component = component;
    for (int k = 1; k <= n_levels; ++k) {
        const double level = static_cast<double>(k) / static_cast<double>(n_levels + 1);
        curve.levels.push_back(level);
        curve.observed.push_back(coverage_at_level(log, component, level, kind));
    }
    curve.mce = mean_calibration_error(curve);
    double ss = 0.0;
    for (std::size_t i = 0; i < curve.levels.size(); ++i) {
        const double d = std::abs(curve.observed[i] - curve.levels[i]) - curve.mce;
        ss += d * d;
    }
    curve.mce_spread = std::sqrt(ss / static_cast<double>(curve.levels.size()));
    return curve;
}

double mean_calibration_error(const CalibrationCurve& curve) {
    if (curve.levels.size() != curve.observed.size() || curve.levels.empty()) {
        throw std::invalid_argument("mean_calibration_error: malformed curve");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < curve.levels.size(); ++i) sum += std::abs(curve.observed[i] - curve.levels[i]);
    return sum / static_cast<double>(curve.levels.size());
}

}  // namespace poseuq
