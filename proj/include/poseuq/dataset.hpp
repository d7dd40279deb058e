#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "poseuq/regressor.hpp"
#include "poseuq/rng.hpp"

namespace poseuq {

struct DatasetConfig {
    std::size_t landmarks = 6;
    double jitter_sigma = 0.05;        // m, observation noise on the camera-frame landmarks
    std::size_t train_size = 4000;
    std::size_t val_size = 4541;
    std::uint64_t seed = 0;
    double max_translation = 2.0;      // m, per axis
    double max_rotation_deg = 10.0;    // per axis
    double mismatch_prob = 0.05;       // chance an observed landmark is a spurious point
    double feature_scale = 10.0;       // m, divides every coordinate in the feature vector
    double layout_spread = 1.5;        // m, upper bound of the per-scene layout perturbation

    std::size_t feature_dim() const { return 6 * landmarks; }
};

void validate(const DatasetConfig& cfg);

/// Canonical landmark layout in the camera frame, shared by every scene of a
/// dataset: lateral +-6 m, vertical +-3 m, depth 5..15 m.
using LandmarkTemplate = std::vector<std::array<double, 3>>;
LandmarkTemplate make_template(std::size_t landmarks, std::uint64_t seed);

/// A rough camera pose and the misalignment that corrects it:
/// true = init * misalignment. Features are the landmark cloud expressed in
/// the init frame (from the map) followed by the same landmarks observed from
/// the true camera, with jitter and occasional mismatches.
struct SyntheticScene {
    std::vector<std::array<double, 3>> landmarks_world;
    Pose6 true_pose;     // camera-to-world, quaternion form
    Pose6 init_pose;     // camera-to-world, quaternion form
    Pose6 misalignment;  // Euler form; the regression target
    std::vector<double> features;
};

/// Landmarks are the template moved by isotropic Gaussian offsets whose
/// standard deviation is drawn per scene from U(0, layout_spread).
SyntheticScene make_scene(const DatasetConfig& cfg, const LandmarkTemplate& tmpl, Rng& rng);

struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> validation;
};

/// Train and validation come from independent seed streams of cfg.seed and
/// share one template.
Dataset gen_dataset(const DatasetConfig& cfg);

void write_samples(const std::filesystem::path& path, std::span<const Sample> samples);
std::vector<Sample> read_samples(const std::filesystem::path& path);

}  // namespace poseuq
