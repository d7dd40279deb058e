#include "poseuq/sampling.hpp"

#include <cmath>
#include <stdexcept>

#include "poseuq/kernels.hpp"

namespace poseuq {

std::string to_string(Method m) {
    switch (m) {
        case Method::MCD: return "MCD";
        case Method::DE: return "DE";
        case Method::DER: return "DER";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    if (s == "MCD" || s == "mcd") return Method::MCD;
    if (s == "DE" || s == "de") return Method::DE;
    if (s == "DER" || s == "der") return Method::DER;
    throw std::invalid_argument("unknown method: " + s);
}

void validate(const SamplerConfig& cfg, Method method) {
    if (method == Method::MCD) {
        if (cfg.n_samples < 2) throw std::invalid_argument("SamplerConfig: n_samples must be >= 2");
        if (!(cfg.dropout_p > 0.0 && cfg.dropout_p < 1.0)) throw std::invalid_argument("SamplerConfig: dropout_p must be in (0, 1)");
    }
    if (method == Method::DE) {
        if (cfg.n_models < 2) throw std::invalid_argument("SamplerConfig: n_models must be >= 2");
        if (!cfg.seeds.empty() && cfg.seeds.size() != cfg.n_models) {
            throw std::invalid_argument("SamplerConfig: seeds must list one seed per ensemble member");
        }
    }
}

UncertainPose sample_moments(std::span<const Pose6> samples, Method method) {
    if (samples.size() < 2) throw std::invalid_argument("sample_moments: need at least 2 samples");
    const double n = static_cast<double>(samples.size());
    std::vector<std::array<double, 6>> comps;
    comps.reserve(samples.size());
    for (const Pose6& s : samples) comps.push_back(s.components());

    UncertainPose out;
    out.method = method;
    for (int c = 0; c < 6; ++c) {
        double mean = 0.0;
        if (!is_angular(c)) {
            for (const auto& v : comps) mean += v[c];
            mean /= n;
        } else {
            double sx = 0.0, sy = 0.0;
            for (const auto& v : comps) {
                sx += std::cos(v[c]);
                sy += std::sin(v[c]);
            }
            const double ref = (sx == 0.0 && sy == 0.0) ? comps.front()[c] : std::atan2(sy, sx);
            double offset = 0.0;
            for (const auto& v : comps) offset += wrap_angle(v[c] - ref);
            mean = wrap_angle(ref + offset / n);
        }
        double var = 0.0;
        for (const auto& v : comps) {
            const double d = is_angular(c) ? wrap_angle(v[c] - mean) : v[c] - mean;
            var += d * d;
        }
        out.mean[c] = mean;
        out.var[c] = var / n;
    }
    return out;
}

UncertainPose mcd_predict(const RegressorParams& params, std::span<const double> input, const SamplerConfig& cfg,
                          std::uint64_t rng_seed, std::vector<Pose6>* retained) {
    validate(cfg, Method::MCD);
    if (params.arch.head != HeadKind::Plain) throw std::invalid_argument("mcd_predict: requires a plain head");
    auto samples = kernels::dropout_samples_parallel(params, input, cfg.n_samples, cfg.dropout_p, rng_seed);
    UncertainPose out = sample_moments(samples, Method::MCD);
    if (retained) *retained = std::move(samples);
    return out;
}

UncertainPose de_predict(std::span<const RegressorParams> ensemble, std::span<const double> input,
                         std::vector<Pose6>* retained) {
    if (ensemble.size() < 2) throw std::invalid_argument("de_predict: need at least 2 models");
    for (const auto& m : ensemble) {
        if (m.arch.head != HeadKind::Plain) throw std::invalid_argument("de_predict: all members need a plain head");
    }
    std::vector<Pose6> samples;
    samples.reserve(ensemble.size());
    for (const auto& m : ensemble) samples.push_back(forward_plain(m, input));
    UncertainPose out = sample_moments(samples, Method::DE);
    if (retained) *retained = std::move(samples);
    return out;
}

UncertainPose uncertain_pose_from(const EvidentialPrediction& pred) {
    UncertainPose out;
    out.method = Method::DER;
    std::array<StudentTParams, 6> st{};
    for (int c = 0; c < 6; ++c) {
        const NIGParams& p = pred.component(c);
        const NIGMoments m = nig_moments(p);
        out.mean[c] = is_angular(c) ? wrap_angle(m.mean) : m.mean;
        out.var[c] = m.epistemic_var;
        st[c] = predictive_student(p);
        st[c].loc = out.mean[c];
    }
    out.student = st;
    return out;
}

UncertainPose der_predict(const RegressorParams& params, std::span<const double> input) {
    return uncertain_pose_from(forward_evidential(params, input));
}

}  // namespace poseuq
