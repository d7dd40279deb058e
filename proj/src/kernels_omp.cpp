#include <cmath>
#include <optional>
#include <stdexcept>

#include "poseuq/kernels.hpp"

namespace poseuq::kernels {

LossBreakdown batch_gradient_parallel(const RegressorParams& params, std::span<const Sample* const> batch,
                                      const LossConfig& cfg, std::span<const DropoutMask> masks,
                                      std::span<double> grad) {
    if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
    if (!masks.empty() && masks.size() != batch.size()) throw std::invalid_argument("batch_gradient: one mask per sample");
    const std::size_t p = params.values.size();
    const auto n = static_cast<std::ptrdiff_t>(batch.size());
    std::vector<double> per_sample(batch.size() * p);
    std::vector<LossBreakdown> losses(batch.size());

    // Exceptions may not escape an OpenMP region; capture the first and rethrow.
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            const DropoutMask* mask = masks.empty() ? nullptr : &masks[i];
            losses[i] = sample_loss_grad(params, *batch[i], cfg, mask,
                                         std::span<double>(per_sample.data() + i * p, p));
        } catch (...) {
#pragma omp critical
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);

    std::fill(grad.begin(), grad.end(), 0.0);
    LossBreakdown total;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        total += losses[i];
        const double* g = per_sample.data() + i * p;
        for (std::size_t k = 0; k < p; ++k) grad[k] += g[k];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& g : grad) g *= inv;
    total *= inv;
    return total;
}

std::vector<RegressorOutput> predict_batch_parallel(const RegressorParams& params, std::span<const Sample> samples) {
    std::vector<std::optional<RegressorOutput>> slots(samples.size());
    const auto n = static_cast<std::ptrdiff_t>(samples.size());
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            slots[i] = forward(params, samples[i].features);
        } catch (...) {
#pragma omp critical
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    std::vector<RegressorOutput> out;
    out.reserve(samples.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

std::vector<Pose6> dropout_samples_parallel(const RegressorParams& params, std::span<const double> input,
                                            std::size_t n, double p, std::uint64_t seed) {
    std::vector<Pose6> out(n);
    const auto count = static_cast<std::ptrdiff_t>(n);
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
            const DropoutMask mask = sample_dropout_mask(params.arch.hidden2, p, rng);
            out[i] = forward_plain(params, input, &mask);
        } catch (...) {
#pragma omp critical
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    return out;
}

std::size_t count_covered_parallel(std::span<const double> residuals, std::span<const double> variances, double z) {
    if (residuals.size() != variances.size()) throw std::invalid_argument("count_covered: length mismatch");
    const auto n = static_cast<std::ptrdiff_t>(residuals.size());
    long long covered = 0;
#pragma omp parallel for reduction(+ : covered) schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        if (std::abs(residuals[i]) <= z * std::sqrt(variances[i])) ++covered;
    }
    return static_cast<std::size_t>(covered);
}

}  // namespace poseuq::kernels
