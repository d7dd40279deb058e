#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poseuq/evidential.hpp"
#include "poseuq/regressor.hpp"

namespace poseuq {

enum class Method { MCD, DE, DER };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

inline constexpr std::array<const char*, 6> kComponentNames = {"x", "y", "z", "roll", "pitch", "yaw"};

inline bool is_angular(int component) { return component >= 3; }

/// Per-component mean and epistemic variance, order (x, y, z, roll, pitch, yaw).
struct UncertainPose {
    std::array<double, 6> mean{};
    std::array<double, 6> var{};
    Method method = Method::DER;
    /// Student-t predictive per component; only evidential predictions carry it.
    std::optional<std::array<StudentTParams, 6>> student;
};

struct SamplerConfig {
    std::size_t n_samples = 30;
    double dropout_p = 0.3;
    std::size_t n_models = 5;
    std::vector<std::uint64_t> seeds;
};

void validate(const SamplerConfig& cfg, Method method);

/// Population mean/variance per component (divisor n). Angular components
/// are averaged as offsets from their circular mean, then wrapped.
UncertainPose sample_moments(std::span<const Pose6> samples, Method method);

/// n_samples dropout passes; pass i draws its mask from derive_seed(rng_seed, i).
/// When retained is given the raw samples are copied into it.
UncertainPose mcd_predict(const RegressorParams& params, std::span<const double> input, const SamplerConfig& cfg,
                          std::uint64_t rng_seed, std::vector<Pose6>* retained = nullptr);

/// One deterministic pass per ensemble member.
UncertainPose de_predict(std::span<const RegressorParams> ensemble, std::span<const double> input,
                         std::vector<Pose6>* retained = nullptr);

/// Mean gamma and variance beta / (nu (alpha - 1)) per component.
UncertainPose der_predict(const RegressorParams& params, std::span<const double> input);
UncertainPose uncertain_pose_from(const EvidentialPrediction& pred);

}  // namespace poseuq
