#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "poseuq/calibration.hpp"
#include "poseuq/gating.hpp"

namespace poseuq {

/// Round-trip formatting of a double ("%.17g"); non-finite values as "nan"/"inf"/"-inf".
std::string fmt_num(double v);

/// Throws ArtifactError naming the path.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& content);

// calibration_<tag>.csv
inline constexpr const char* kCalibrationHeader = "method,component,level,observed";
std::string calibration_csv(Method m, const std::vector<CalibrationCurve>& curves);
std::vector<CalibrationCurve> parse_calibration_csv(const std::string& text);

struct SweepRow {
    double percentile = 0.0;
    double threshold_tr = 0.0;
    double threshold_rot = 0.0;
    std::size_t total = 0;
    std::size_t retained = 0;
    std::size_t discarded = 0;
    double discarded_fraction = 0.0;
    /// Empty when nothing was retained.
    std::optional<double> tr_mean, tr_median, rot_mean_deg, rot_median_deg;
};

SweepRow sweep_row(const GateReport& r);

// sweep_<tag>.csv
inline constexpr const char* kSweepHeader =
    "method,percentile,threshold_tr,threshold_rot,total,retained,discarded,discarded_fraction,"
    "tr_mean,tr_median,rot_mean_deg,rot_median_deg";
std::string sweep_csv(Method m, const std::vector<SweepRow>& rows);
std::vector<SweepRow> parse_sweep_csv(const std::string& text);

// gate_<tag>.json
nlohmann::json gate_report_json(Method m, const GateReport& r, const PredictionLog& log);

struct SummaryRow {
    Method method = Method::DER;
    std::size_t records = 0;
    double noise_tr_median = 0.0;
    double noise_rot_median_deg = 0.0;
    ErrorStats tr;
    ErrorStats rot_deg;
    double gate_percentile = 0.0;
    double discarded_fraction = 0.0;
    std::optional<ErrorStats> gated_tr;
    std::optional<ErrorStats> gated_rot_deg;
    std::array<double, 6> mce{};
    double mce_mean = 0.0;
};

/// Everything here is recomputed from the prediction log.
SummaryRow summarize(const PredictionLog& log, double gate_percentile, int calibration_levels);

// summary.csv
inline constexpr const char* kSummaryHeader =
    "method,records,noise_tr_median,noise_rot_median_deg,tr_mean,tr_median,tr_std,rot_mean_deg,rot_median_deg,"
    "rot_std_deg,gate_percentile,discarded_fraction,gated_tr_mean,gated_tr_median,gated_rot_mean_deg,"
    "gated_rot_median_deg,mce_x,mce_y,mce_z,mce_roll,mce_pitch,mce_yaw,mce_mean";
std::string summary_csv(const std::vector<SummaryRow>& rows);
nlohmann::json summary_json(const std::vector<SummaryRow>& rows);

/// Six panels, one per component, each with the y = x diagonal.
std::string calibration_svg(const std::string& title, const std::vector<CalibrationCurve>& curves);
/// Mean translation and rotation error against the percentile, one series per method.
std::string sweep_svg(const std::map<Method, std::vector<SweepRow>>& series);

/// Reads predictions, calibration and sweep tables for each method from dir
/// and writes calibration_<tag>.svg, sweep.svg, summary.csv and summary.json.
void emit_report(const std::filesystem::path& dir, const std::vector<Method>& methods, double gate_percentile,
                 int calibration_levels);

}  // namespace poseuq
