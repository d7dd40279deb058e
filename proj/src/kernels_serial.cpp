#include <cmath>
#include <stdexcept>

#include "poseuq/kernels.hpp"

namespace poseuq::kernels {

namespace {

void check_masks(std::span<const Sample* const> batch, std::span<const DropoutMask> masks) {
    if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
    if (!masks.empty() && masks.size() != batch.size()) throw std::invalid_argument("batch_gradient: one mask per sample");
}

}  // namespace

LossBreakdown batch_gradient_serial(const RegressorParams& params, std::span<const Sample* const> batch,
                                    const LossConfig& cfg, std::span<const DropoutMask> masks,
                                    std::span<double> grad) {
    check_masks(batch, masks);
    const std::size_t p = params.values.size();
    std::vector<double> sample_grad(p);
    std::fill(grad.begin(), grad.end(), 0.0);
    LossBreakdown total;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const DropoutMask* mask = masks.empty() ? nullptr : &masks[i];
        total += sample_loss_grad(params, *batch[i], cfg, mask, sample_grad);
        for (std::size_t k = 0; k < p; ++k) grad[k] += sample_grad[k];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& g : grad) g *= inv;
    total *= inv;
    return total;
}

std::vector<RegressorOutput> predict_batch_serial(const RegressorParams& params, std::span<const Sample> samples) {
    std::vector<RegressorOutput> out;
    out.reserve(samples.size());
    for (const Sample& s : samples) out.push_back(forward(params, s.features));
    return out;
}

std::vector<Pose6> dropout_samples_serial(const RegressorParams& params, std::span<const double> input,
                                          std::size_t n, double p, std::uint64_t seed) {
    std::vector<Pose6> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, i));
        const DropoutMask mask = sample_dropout_mask(params.arch.hidden2, p, rng);
        out.push_back(forward_plain(params, input, &mask));
    }
    return out;
}

std::size_t count_covered_serial(std::span<const double> residuals, std::span<const double> variances, double z) {
    if (residuals.size() != variances.size()) throw std::invalid_argument("count_covered: length mismatch");
    std::size_t covered = 0;
    for (std::size_t i = 0; i < residuals.size(); ++i) {
        if (std::abs(residuals[i]) <= z * std::sqrt(variances[i])) ++covered;
    }
    return covered;
}

}  // namespace poseuq::kernels
