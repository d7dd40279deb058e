#include "poseuq/gating.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace poseuq {

namespace {

double nearest_rank(std::vector<double> values, double quantile) {
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    // The small slack absorbs representation error, e.g. (1 - 0.15) * 100.
    auto rank = static_cast<std::size_t>(std::ceil(quantile * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

}  // namespace

Traces uncertainty_traces(const UncertainPose& u) {
    return {u.var[0] + u.var[1] + u.var[2], u.var[3] + u.var[4] + u.var[5]};
}

GateThresholds percentile_thresholds(const PredictionLog& log, double percentile) {
    if (!(percentile > 0.0 && percentile < 1.0)) throw std::invalid_argument("percentile must be in (0, 1)");
    const double needed = std::ceil(1.0 / percentile - 1e-9);
    if (static_cast<double>(log.records.size()) < needed) {
        throw std::invalid_argument("percentile_thresholds: log needs at least " + std::to_string(static_cast<long>(needed)) +
                                    " records");
    }
    std::vector<double> tr, rot;
    tr.reserve(log.records.size());
    rot.reserve(log.records.size());
    for (const auto& r : log.records) {
        const Traces t = uncertainty_traces(r.prediction);
        tr.push_back(t.tr);
        rot.push_back(t.rot);
    }
    return {nearest_rank(std::move(tr), 1.0 - percentile), nearest_rank(std::move(rot), 1.0 - percentile), percentile};
}

bool discard(const Traces& t, const GateThresholds& thr, GateRule rule) {
    switch (rule) {
        case GateRule::TranslationOnly: return t.tr > thr.tr;
        case GateRule::RotationOnly: return t.rot > thr.rot;
        case GateRule::And: break;
    }
    return t.tr > thr.tr && t.rot > thr.rot;
}

ErrorStats error_stats(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("error_stats: empty");
    ErrorStats s;
    const std::size_t n = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(n));
    std::sort(values.begin(), values.end());
    s.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    return s;
}

double translation_error(const PredictionRecord& r) {
    const auto& m = r.prediction.mean;
    const auto& t = r.truth.translation;
    return std::hypot(m[0] - t.x, m[1] - t.y, m[2] - t.z);
}

double rotation_error_deg(const PredictionRecord& r) {
    const auto& m = r.prediction.mean;
    const UnitQuaternion q = euler_to_quat(EulerTriple{m[3], m[4], m[5]});
    return quat_angular_distance(q, r.truth.quaternion()) * 180.0 / kPi;
}

GateReport apply_gate(const PredictionLog& log, const GateThresholds& thr, GateRule rule) {
    if (thr.tr < 0.0 || thr.rot < 0.0) throw std::invalid_argument("apply_gate: thresholds must be >= 0");
    GateReport rep;
    rep.thresholds = thr;
    rep.total = log.records.size();
    rep.decisions.reserve(rep.total);
    std::vector<double> tr_err, rot_err;
    for (const auto& r : log.records) {
        const bool out = discard(uncertainty_traces(r.prediction), thr, rule);
        rep.decisions.push_back(out);
        if (out) {
            ++rep.discarded;
        } else {
            ++rep.retained;
            tr_err.push_back(translation_error(r));
            rot_err.push_back(rotation_error_deg(r));
        }
    }
    rep.discarded_fraction = rep.total ? static_cast<double>(rep.discarded) / static_cast<double>(rep.total) : 0.0;
    if (!tr_err.empty()) {
        rep.tr_error = error_stats(std::move(tr_err));
        rep.rot_error_deg = error_stats(std::move(rot_err));
    }
    return rep;
}

std::vector<GateReport> confidence_sweep(const PredictionLog& log, std::span<const double> percentiles) {
    for (std::size_t i = 0; i < percentiles.size(); ++i) {
        if (!(percentiles[i] > 0.0 && percentiles[i] < 1.0)) throw std::invalid_argument("sweep percentiles must be in (0, 1)");
        if (i > 0 && !(percentiles[i] > percentiles[i - 1])) {
            throw std::invalid_argument("sweep percentiles must be strictly increasing");
        }
    }
    std::vector<GateReport> out(percentiles.size());
    const auto n = static_cast<std::ptrdiff_t>(percentiles.size());
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[i] = apply_gate(log, percentile_thresholds(log, percentiles[i]));
        } catch (...) {
#pragma omp critical
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    return out;
}

GateReport apply_gate_split(const PredictionLog& fit_log, const PredictionLog& eval_log, double percentile) {
    return apply_gate(eval_log, percentile_thresholds(fit_log, percentile));
}

}  // namespace poseuq
