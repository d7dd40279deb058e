#pragma once

#include <array>
#include <span>

#include "poseuq/evidential.hpp"
#include "poseuq/pose_math.hpp"

namespace poseuq {

enum class EvidentialVariant { NLL, D };
enum class Branch { Translation, Rotation };

struct LossConfig {
    double lambda_tr = 0.1;
    double lambda_rot = 0.01;
    double s_tr = 1.0;
    double s_rot = 1.0;
    double s_evd_tr = 0.1;
    double s_evd_rot = 0.1;
    EvidentialVariant evd_variant = EvidentialVariant::D;
    bool use_geometric = true;
    double clip_floor = kDefaultClipFloor;
};

void validate(const LossConfig& cfg);

/// Three NIGs per branch: translation (x, y, z), rotation (roll, pitch, yaw).
struct EvidentialPrediction {
    std::array<NIGParams, 3> translation;
    std::array<NIGParams, 3> rotation;

    const NIGParams& component(int c) const { return c < 3 ? translation[c] : rotation[c - 3]; }
    NIGParams& component(int c) { return c < 3 ? translation[c] : rotation[c - 3]; }
    /// Pose made of the NIG locations.
    Pose6 mean_pose() const;
};

struct LossBreakdown {
    double total = 0.0;
    double geometric_tr = 0.0;
    double geometric_rot = 0.0;
    double evd_tr = 0.0;
    double evd_rot = 0.0;
    // Density term (L^D, or L^NLL for the NLL variant) and regularizer L^R.
    double density_tr = 0.0;
    double density_rot = 0.0;
    double reg_tr = 0.0;
    double reg_rot = 0.0;

    LossBreakdown& operator+=(const LossBreakdown& o);
    LossBreakdown& operator*=(double s);
};

double loss_nll(std::span<const NIGParams> preds, std::span<const double> targets);
double loss_d(std::span<const NIGParams> preds, std::span<const double> targets, double clip_floor = kDefaultClipFloor);
double loss_r(std::span<const NIGParams> preds, std::span<const double> targets, bool angular);

/// Single-element L^D contribution, smooth_l1(1 / clipped density).
double density_term(const NIGParams& p, double y, double clip_floor);

double loss_evd(const EvidentialPrediction& pred, const Pose6& target, const LossConfig& cfg, Branch branch);
double loss_geometric(const Pose6& pred_mean, const Pose6& target, Branch branch);

LossBreakdown loss_final(const EvidentialPrediction& pred, const Pose6& target, const LossConfig& cfg);
/// Geometric-only objective for heads that emit a point estimate.
LossBreakdown loss_final(const Pose6& pred, const Pose6& target, const LossConfig& cfg);

/// d loss_final / d NIG fields, indexed by component (x, y, z, roll, pitch, yaw).
using EvidentialGrad = std::array<NIGGrad, 6>;

LossBreakdown loss_final_grad(const EvidentialPrediction& pred, const Pose6& target, const LossConfig& cfg,
                              EvidentialGrad& grad);
/// d loss_final / d (x, y, z, roll, pitch, yaw) for a point-estimate pose.
LossBreakdown loss_final_grad(const Pose6& pred, const Pose6& target, const LossConfig& cfg,
                              std::array<double, 6>& grad);

}  // namespace poseuq
