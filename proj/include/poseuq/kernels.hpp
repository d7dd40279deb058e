#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "poseuq/regressor.hpp"

// Data-parallel inner loops. Every kernel has a serial reference and an
// OpenMP version; both produce bitwise-identical results because per-item
// work is written to its own slot and reductions run in index order.
namespace poseuq::kernels {

/// Batch mean of loss_final and its gradient (written into grad).
/// masks is either empty or one mask per batch element.
LossBreakdown batch_gradient_serial(const RegressorParams& params, std::span<const Sample* const> batch,
                                    const LossConfig& cfg, std::span<const DropoutMask> masks,
                                    std::span<double> grad);
LossBreakdown batch_gradient_parallel(const RegressorParams& params, std::span<const Sample* const> batch,
                                      const LossConfig& cfg, std::span<const DropoutMask> masks,
                                      std::span<double> grad);

/// Deterministic (dropout-free) forward pass over many inputs.
std::vector<RegressorOutput> predict_batch_serial(const RegressorParams& params, std::span<const Sample> samples);
std::vector<RegressorOutput> predict_batch_parallel(const RegressorParams& params, std::span<const Sample> samples);

/// n stochastic forward passes at drop probability p; pass i uses a mask
/// drawn from derive_seed(seed, i).
std::vector<Pose6> dropout_samples_serial(const RegressorParams& params, std::span<const double> input,
                                          std::size_t n, double p, std::uint64_t seed);
std::vector<Pose6> dropout_samples_parallel(const RegressorParams& params, std::span<const double> input,
                                            std::size_t n, double p, std::uint64_t seed);

/// Number of i with |residual_i| <= z * sqrt(variance_i).
std::size_t count_covered_serial(std::span<const double> residuals, std::span<const double> variances, double z);
std::size_t count_covered_parallel(std::span<const double> residuals, std::span<const double> variances, double z);

}  // namespace poseuq::kernels
