#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "poseuq/dataset.hpp"
#include "poseuq/gating.hpp"
#include "poseuq/losses.hpp"
#include "poseuq/regressor.hpp"
#include "poseuq/sampling.hpp"

namespace poseuq {

/// Bad or inconsistent configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A required artifact is missing or unreadable, or an output cannot be written.
class ArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::vector<Method> methods = {Method::DER, Method::DE, Method::MCD};
    DatasetConfig dataset;
    std::size_t hidden1 = 64;
    std::size_t hidden2 = 64;
    LossConfig loss;
    TrainSchedule schedule;
    SamplerConfig sampler;
    double gate_percentile = 0.15;
    std::vector<double> sweep_percentiles = {0.05, 0.10, 0.15, 0.25, 0.40};
    int calibration_levels = 19;
    std::filesystem::path output_dir = "poseuq_out";
};

/// Throws ConfigError naming the offending field.
void validate(const ExperimentConfig& cfg);

/// Nested JSON document; see docs/config.md. output_dir is omitted from the
/// digest so identical runs in different directories produce identical files.
nlohmann::json config_to_json(const ExperimentConfig& cfg, bool with_output_dir = true);
/// Unknown keys are rejected. Missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies "a.b.c=value". The value is parsed as JSON when possible, else
/// taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

std::string config_digest(const ExperimentConfig& cfg);

/// Lowercase file tag of a method: "der", "de", "mcd".
std::string method_tag(Method m);

/// Seeds used to train (and for MCD, to sample) a method.
std::vector<std::uint64_t> method_seeds(const ExperimentConfig& cfg, Method m);

// Stages. Each reads what it needs from cfg.output_dir and writes its own
// artifacts there, so the CLI verbs can run them one at a time.
void stage_gen(const ExperimentConfig& cfg);
void stage_train(const ExperimentConfig& cfg, Method m);
void stage_predict(const ExperimentConfig& cfg, Method m);
void stage_calibrate(const ExperimentConfig& cfg, Method m);
void stage_gate(const ExperimentConfig& cfg, Method m);
void stage_sweep(const ExperimentConfig& cfg, Method m);

/// gen, then train/predict/calibrate/gate/sweep for every method, then the report.
void run_experiment(const ExperimentConfig& cfg);

/// Errors of a log summarized without gating.
struct ErrorSummary {
    ErrorStats tr;
    ErrorStats rot_deg;
};
ErrorSummary ungated_errors(const PredictionLog& log);

/// Euclidean norm of the target translation and angular size of the target
/// rotation (deg): the error of simply keeping the rough pose.
ErrorSummary injected_noise(const PredictionLog& log);

}  // namespace poseuq
