#pragma once

#include <optional>
#include <span>
#include <vector>

#include "poseuq/prediction_log.hpp"

namespace poseuq {

struct Traces {
    double tr = 0.0;   // Var[x] + Var[y] + Var[z]
    double rot = 0.0;  // Var[roll] + Var[pitch] + Var[yaw]
};

Traces uncertainty_traces(const UncertainPose& u);

struct GateThresholds {
    double tr = 0.0;
    double rot = 0.0;
    double percentile = 0.15;
};

/// Nearest-rank (1 - percentile)-quantile of each trace population.
/// Requires at least 1/percentile records.
GateThresholds percentile_thresholds(const PredictionLog& log, double percentile);

/// And discards when both traces exceed their thresholds (the default gate);
/// the single-trace rules exist for comparison.
enum class GateRule { And, TranslationOnly, RotationOnly };

bool discard(const Traces& t, const GateThresholds& thr, GateRule rule = GateRule::And);

struct ErrorStats {
    double median = 0.0;
    double mean = 0.0;
    double std = 0.0;  // population
};

ErrorStats error_stats(std::vector<double> values);

/// Euclidean translation error (m) and quaternion angular distance (deg) of a record.
double translation_error(const PredictionRecord& r);
double rotation_error_deg(const PredictionRecord& r);

struct GateReport {
    GateThresholds thresholds;
    std::size_t total = 0;
    std::size_t retained = 0;
    std::size_t discarded = 0;
    double discarded_fraction = 0.0;
    /// Empty when every record was discarded.
    std::optional<ErrorStats> tr_error;
    std::optional<ErrorStats> rot_error_deg;
    std::vector<bool> decisions;  // true = discarded, in record order

    bool retained_empty() const { return retained == 0; }
};

GateReport apply_gate(const PredictionLog& log, const GateThresholds& thr, GateRule rule = GateRule::And);

/// One report per percentile, thresholds refit each time on the same log.
/// Percentiles must be strictly increasing in (0, 1).
std::vector<GateReport> confidence_sweep(const PredictionLog& log, std::span<const double> percentiles);

/// Thresholds fit on one log, applied to another.
GateReport apply_gate_split(const PredictionLog& fit_log, const PredictionLog& eval_log, double percentile);

}  // namespace poseuq
