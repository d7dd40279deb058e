#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "poseuq/losses.hpp"
#include "poseuq/rng.hpp"

namespace poseuq {

enum class HeadKind { Plain, Evidential };

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& s);

/// Trunk input -> hidden1 -> hidden2 (tanh), then one linear head per branch.
/// Plain heads emit (x, y, z) and a raw quaternion; evidential heads emit four
/// unconstrained values per component.
struct Architecture {
    std::size_t input_dim = 0;
    std::size_t hidden1 = 64;
    std::size_t hidden2 = 64;
    HeadKind head = HeadKind::Plain;
    double dropout_p = 0.0;

    std::size_t translation_outputs() const { return head == HeadKind::Plain ? 3 : 12; }
    std::size_t rotation_outputs() const { return head == HeadKind::Plain ? 4 : 12; }
    std::size_t param_count() const;
    bool operator==(const Architecture&) const = default;
};

void validate(const Architecture& arch);

/// All weights in one flat vector. Layout: W1 (h1 x in), b1, W2 (h2 x h1), b2,
/// Wt (tr_out x h2), bt, Wr (rot_out x h2), br; matrices row-major.
struct RegressorParams {
    Architecture arch;
    std::vector<double> values;

    struct Offsets {
        std::size_t w1, b1, w2, b2, wt, bt, wr, br, end;
    };
    Offsets offsets() const;
    bool operator==(const RegressorParams&) const = default;
};

/// Uniform fan-in scaled initialization, biases zero.
RegressorParams init_params(const Architecture& arch, std::uint64_t seed);

/// Four pre-activation values (gamma, nu, alpha, beta) for each of the six components.
struct RawEvidentialOutput {
    std::array<std::array<double, 4>, 6> raw{};
};

inline constexpr double kHeadEps = 1e-6;

double softplus(double x);
EvidentialPrediction apply_head_constraints(const RawEvidentialOutput& raw);

/// Per-unit multipliers on the hidden2 features entering the heads:
/// 0 for dropped units, 1/(1-p) for kept ones.
using DropoutMask = std::vector<double>;
DropoutMask sample_dropout_mask(std::size_t units, double p, Rng& rng);
inline DropoutMask sample_dropout_mask(const Architecture& arch, Rng& rng) {
    return sample_dropout_mask(arch.hidden2, arch.dropout_p, rng);
}

using RegressorOutput = std::variant<Pose6, EvidentialPrediction>;

RegressorOutput forward(const RegressorParams& params, std::span<const double> input,
                        const DropoutMask* mask = nullptr);
Pose6 forward_plain(const RegressorParams& params, std::span<const double> input, const DropoutMask* mask = nullptr);
EvidentialPrediction forward_evidential(const RegressorParams& params, std::span<const double> input,
                                        const DropoutMask* mask = nullptr);

struct Sample {
    std::vector<double> features;
    Pose6 target;  // Euler form
};

/// Loss of one sample and, when grad is non-empty, its gradient with respect
/// to params.values (overwritten, not accumulated).
LossBreakdown sample_loss_grad(const RegressorParams& params, const Sample& sample, const LossConfig& cfg,
                               const DropoutMask* mask, std::span<double> grad);
LossBreakdown sample_loss(const RegressorParams& params, const Sample& sample, const LossConfig& cfg,
                          const DropoutMask* mask = nullptr);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam(const RegressorParams& params);
void adam_update(RegressorParams& params, std::span<const double> grad, AdamState& state, double lr);

class TrainingDivergence : public std::runtime_error {
public:
    TrainingDivergence(const std::string& what, int epoch, LossBreakdown breakdown)
        : std::runtime_error(what), epoch_(epoch), breakdown_(breakdown) {}
    int epoch() const { return epoch_; }
    const LossBreakdown& breakdown() const { return breakdown_; }

private:
    int epoch_;
    LossBreakdown breakdown_;
};

/// One Adam step on the batch mean of loss_final. Returns the pre-update
/// breakdown. Dropout masks, when the architecture has dropout, come from rng.
LossBreakdown train_step(RegressorParams& params, std::span<const Sample* const> batch, const LossConfig& cfg,
                         AdamState& adam, double lr, Rng* dropout_rng = nullptr);

struct TrainSchedule {
    int epochs_total = 60;
    int epochs_phase1 = 23;
    double lr = 1e-3;
    std::size_t batch_size = 24;
    double s_evd_phase1 = 0.1;
    double s_evd_phase2 = 5e-3;
    std::uint64_t seed = 0;
};

void validate(const TrainSchedule& schedule);

struct EpochRecord {
    int epoch = 0;
    int phase = 1;
    double s_evd = 0.0;
    LossBreakdown train;       // mean over the epoch's batches
    LossBreakdown validation;  // mean over the validation set
    double val_tr_error_mean = 0.0;   // meters
    double val_rot_error_mean = 0.0;  // degrees
};

struct FitResult {
    RegressorParams params;
    std::vector<EpochRecord> log;
};

/// Two-phase training: s_evd_phase1 for epochs_phase1 epochs, then
/// s_evd_phase2 for the rest, on one continuing parameter/optimizer state.
FitResult fit(const Architecture& arch, const TrainSchedule& schedule, std::span<const Sample> train,
              std::span<const Sample> validation, const LossConfig& cfg);

/// Central differences on a random subset of parameters; worst relative error.
double finite_diff_check(const RegressorParams& params, const Sample& sample, const LossConfig& cfg,
                         std::size_t n_params = 100, std::uint64_t seed = 0, double h = 1e-5);

struct Checkpoint {
    RegressorParams params;
    TrainSchedule schedule;
    std::uint64_t seed = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace poseuq
