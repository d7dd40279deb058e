#include "poseuq/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "poseuq/gradcheck.hpp"
#include "poseuq/kernels.hpp"

namespace poseuq {

namespace {

constexpr int kCheckpointVersion = 1;

struct Activations {
    std::vector<double> h1;
    std::vector<double> h2;
    std::vector<double> head_in;
    std::vector<double> out_tr;
    std::vector<double> out_rot;
};

// y = W x + b with W row-major (rows x cols).
void affine(const double* w, const double* b, std::span<const double> x, std::size_t rows, std::vector<double>& y) {
    const std::size_t cols = x.size();
    y.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = w + i * cols;
        double acc = b[i];
        for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
}

void run_forward(const RegressorParams& params, std::span<const double> input, const DropoutMask* mask,
                 Activations& act) {
    const Architecture& a = params.arch;
    if (input.size() != a.input_dim) throw std::invalid_argument("forward: input dimension mismatch");
    if (params.values.size() != a.param_count()) throw std::invalid_argument("forward: parameter count mismatch");
    if (mask && mask->size() != a.hidden2) throw std::invalid_argument("forward: dropout mask size mismatch");
    const auto o = params.offsets();
    const double* v = params.values.data();

    affine(v + o.w1, v + o.b1, input, a.hidden1, act.h1);
    for (double& h : act.h1) h = std::tanh(h);
    affine(v + o.w2, v + o.b2, act.h1, a.hidden2, act.h2);
    for (double& h : act.h2) h = std::tanh(h);

    act.head_in = act.h2;
    if (mask) {
        for (std::size_t j = 0; j < a.hidden2; ++j) act.head_in[j] *= (*mask)[j];
    }
    affine(v + o.wt, v + o.bt, act.head_in, a.translation_outputs(), act.out_tr);
    affine(v + o.wr, v + o.br, act.head_in, a.rotation_outputs(), act.out_rot);
}

// Accumulates parameter gradients given d loss / d head outputs.
void run_backward(const RegressorParams& params, std::span<const double> input, const DropoutMask* mask,
                  const Activations& act, std::span<const double> d_tr, std::span<const double> d_rot,
                  std::span<double> grad) {
    const Architecture& a = params.arch;
    const auto o = params.offsets();
    const double* v = params.values.data();
    double* g = grad.data();
    const std::size_t h1 = a.hidden1, h2 = a.hidden2;

    std::vector<double> d_head_in(h2, 0.0);
    auto head_back = [&](std::size_t w_off, std::size_t b_off, std::span<const double> d_out) {
        for (std::size_t i = 0; i < d_out.size(); ++i) {
            const double di = d_out[i];
            g[b_off + i] += di;
            if (di == 0.0) continue;
            double* gw = g + w_off + i * h2;
            const double* w = v + w_off + i * h2;
            for (std::size_t j = 0; j < h2; ++j) {
                gw[j] += di * act.head_in[j];
                d_head_in[j] += di * w[j];
            }
        }
    };
    head_back(o.wt, o.bt, d_tr);
    head_back(o.wr, o.br, d_rot);

    std::vector<double> d_z2(h2);
    for (std::size_t j = 0; j < h2; ++j) {
        const double d_h2 = mask ? d_head_in[j] * (*mask)[j] : d_head_in[j];
        d_z2[j] = d_h2 * (1.0 - act.h2[j] * act.h2[j]);
    }

    std::vector<double> d_h1(h1, 0.0);
    for (std::size_t i = 0; i < h2; ++i) {
        const double di = d_z2[i];
        g[o.b2 + i] += di;
        double* gw = g + o.w2 + i * h1;
        const double* w = v + o.w2 + i * h1;
        for (std::size_t j = 0; j < h1; ++j) {
            gw[j] += di * act.h1[j];
            d_h1[j] += di * w[j];
        }
    }

    const std::size_t in = a.input_dim;
    for (std::size_t i = 0; i < h1; ++i) {
        const double di = d_h1[i] * (1.0 - act.h1[i] * act.h1[i]);
        g[o.b1 + i] += di;
        double* gw = g + o.w1 + i * in;
        for (std::size_t j = 0; j < in; ++j) gw[j] += di * input[j];
    }
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

RawEvidentialOutput raw_from(const Activations& act) {
    RawEvidentialOutput raw;
    for (int c = 0; c < 6; ++c) {
        const std::vector<double>& src = c < 3 ? act.out_tr : act.out_rot;
        const std::size_t base = 4 * static_cast<std::size_t>(c % 3);
        for (int k = 0; k < 4; ++k) raw.raw[c][k] = src[base + k];
    }
    return raw;
}

std::array<double, 4> raw_quaternion(const Activations& act) {
    // Identity bias so that a zero pre-activation maps to the identity rotation.
    return {act.out_rot[0], act.out_rot[1], act.out_rot[2], act.out_rot[3] + 1.0};
}

Pose6 plain_pose(const Activations& act) {
    const auto p = raw_quaternion(act);
    return make_pose(Translation{act.out_tr[0], act.out_tr[1], act.out_tr[2]}, UnitQuaternion{p[0], p[1], p[2], p[3]});
}

}  // namespace

std::string to_string(HeadKind kind) { return kind == HeadKind::Plain ? "plain" : "evidential"; }

HeadKind head_kind_from_string(const std::string& s) {
    if (s == "plain") return HeadKind::Plain;
    if (s == "evidential") return HeadKind::Evidential;
    throw std::invalid_argument("unknown head kind: " + s);
}

std::size_t Architecture::param_count() const {
    return hidden1 * input_dim + hidden1 + hidden2 * hidden1 + hidden2 + translation_outputs() * hidden2 +
           translation_outputs() + rotation_outputs() * hidden2 + rotation_outputs();
}

void validate(const Architecture& arch) {
    if (arch.input_dim == 0 || arch.hidden1 == 0 || arch.hidden2 == 0) {
        throw std::invalid_argument("Architecture: layer sizes must be positive");
    }
    if (!(arch.dropout_p >= 0.0 && arch.dropout_p < 1.0)) throw std::invalid_argument("Architecture: dropout_p must be in [0, 1)");
}

RegressorParams::Offsets RegressorParams::offsets() const {
    Offsets o{};
    const auto& a = arch;
    o.w1 = 0;
    o.b1 = o.w1 + a.hidden1 * a.input_dim;
    o.w2 = o.b1 + a.hidden1;
    o.b2 = o.w2 + a.hidden2 * a.hidden1;
    o.wt = o.b2 + a.hidden2;
    o.bt = o.wt + a.translation_outputs() * a.hidden2;
    o.wr = o.bt + a.translation_outputs();
    o.br = o.wr + a.rotation_outputs() * a.hidden2;
    o.end = o.br + a.rotation_outputs();
    return o;
}

RegressorParams init_params(const Architecture& arch, std::uint64_t seed) {
    validate(arch);
    RegressorParams p{arch, std::vector<double>(arch.param_count(), 0.0)};
    const auto o = p.offsets();
    Rng rng(seed);
    auto fill = [&](std::size_t off, std::size_t count, std::size_t fan_in) {
        const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
        for (std::size_t i = 0; i < count; ++i) p.values[off + i] = rng.uniform(-bound, bound);
    };
    fill(o.w1, o.b1 - o.w1, arch.input_dim);
    fill(o.w2, o.b2 - o.w2, arch.hidden1);
    fill(o.wt, o.bt - o.wt, arch.hidden2);
    fill(o.wr, o.br - o.wr, arch.hidden2);
    return p;
}

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

EvidentialPrediction apply_head_constraints(const RawEvidentialOutput& raw) {
    EvidentialPrediction out;
    for (int c = 0; c < 6; ++c) {
        const auto& r = raw.raw[c];
        NIGParams& p = out.component(c);
        p.gamma = r[0];
        p.nu = softplus(r[1]) + kHeadEps;
        p.alpha = softplus(r[2]) + 1.0 + kHeadEps;
        p.beta = softplus(r[3]) + kHeadEps;
    }
    return out;
}

DropoutMask sample_dropout_mask(std::size_t units, double p, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout probability must be in [0, 1)");
    DropoutMask mask(units, 1.0);
    if (p <= 0.0) return mask;
    const double keep = 1.0 / (1.0 - p);
    for (double& m : mask) m = rng.uniform() < p ? 0.0 : keep;
    return mask;
}

RegressorOutput forward(const RegressorParams& params, std::span<const double> input, const DropoutMask* mask) {
    if (params.arch.head == HeadKind::Plain) return forward_plain(params, input, mask);
    return forward_evidential(params, input, mask);
}

Pose6 forward_plain(const RegressorParams& params, std::span<const double> input, const DropoutMask* mask) {
    if (params.arch.head != HeadKind::Plain) throw std::invalid_argument("forward_plain: evidential head");
    Activations act;
    run_forward(params, input, mask, act);
    return plain_pose(act);
}

EvidentialPrediction forward_evidential(const RegressorParams& params, std::span<const double> input,
                                        const DropoutMask* mask) {
    if (params.arch.head != HeadKind::Evidential) throw std::invalid_argument("forward_evidential: plain head");
    Activations act;
    run_forward(params, input, mask, act);
    return apply_head_constraints(raw_from(act));
}

LossBreakdown sample_loss_grad(const RegressorParams& params, const Sample& sample, const LossConfig& cfg,
                               const DropoutMask* mask, std::span<double> grad) {
    const bool want_grad = !grad.empty();
    if (want_grad && grad.size() != params.values.size()) throw std::invalid_argument("gradient buffer size mismatch");
    Activations act;
    run_forward(params, sample.features, mask, act);

    std::vector<double> d_tr(params.arch.translation_outputs(), 0.0);
    std::vector<double> d_rot(params.arch.rotation_outputs(), 0.0);
    LossBreakdown loss;

    if (params.arch.head == HeadKind::Plain) {
        const Pose6 pred = plain_pose(act);
        std::array<double, 6> g{};
        const Pose6 pred_euler = make_pose(pred.translation, pred.euler());
        loss = loss_final_grad(pred_euler, sample.target, cfg, g);
        if (want_grad) {
            for (int c = 0; c < 3; ++c) d_tr[c] = g[c];
            const auto jac = quat_to_euler_jacobian(raw_quaternion(act));
            for (int k = 0; k < 4; ++k) {
                d_rot[k] = jac[0][k] * g[3] + jac[1][k] * g[4] + jac[2][k] * g[5];
            }
        }
    } else {
        const RawEvidentialOutput raw = raw_from(act);
        const EvidentialPrediction pred = apply_head_constraints(raw);
        EvidentialGrad g{};
        loss = loss_final_grad(pred, sample.target, cfg, g);
        if (want_grad) {
            for (int c = 0; c < 6; ++c) {
                auto& dst = c < 3 ? d_tr : d_rot;
                const std::size_t base = 4 * static_cast<std::size_t>(c % 3);
                dst[base + 0] = g[c].gamma;
                dst[base + 1] = g[c].nu * sigmoid(raw.raw[c][1]);
                dst[base + 2] = g[c].alpha * sigmoid(raw.raw[c][2]);
                dst[base + 3] = g[c].beta * sigmoid(raw.raw[c][3]);
            }
        }
    }

    if (want_grad) {
        std::fill(grad.begin(), grad.end(), 0.0);
        run_backward(params, sample.features, mask, act, d_tr, d_rot, grad);
    }
    return loss;
}

LossBreakdown sample_loss(const RegressorParams& params, const Sample& sample, const LossConfig& cfg,
                          const DropoutMask* mask) {
    return sample_loss_grad(params, sample, cfg, mask, {});
}

AdamState make_adam(const RegressorParams& params) {
    AdamState s;
    s.m.assign(params.values.size(), 0.0);
    s.v.assign(params.values.size(), 0.0);
    return s;
}

void adam_update(RegressorParams& params, std::span<const double> grad, AdamState& state, double lr) {
    if (grad.size() != params.values.size() || state.m.size() != grad.size()) {
        throw std::invalid_argument("adam_update: size mismatch");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < grad.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params.values[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
}

LossBreakdown train_step(RegressorParams& params, std::span<const Sample* const> batch, const LossConfig& cfg,
                         AdamState& adam, double lr, Rng* dropout_rng) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    std::vector<DropoutMask> masks;
    if (params.arch.dropout_p > 0.0) {
        if (!dropout_rng) throw std::invalid_argument("train_step: dropout requires an rng");
        masks.reserve(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) masks.push_back(sample_dropout_mask(params.arch, *dropout_rng));
    }
    std::vector<double> grad(params.values.size());
    const LossBreakdown loss = kernels::batch_gradient_parallel(params, batch, cfg, masks, grad);
    if (!std::isfinite(loss.total)) throw TrainingDivergence("non-finite training loss", 0, loss);
    for (double g : grad) {
        if (!std::isfinite(g)) throw TrainingDivergence("non-finite gradient", 0, loss);
    }
    adam_update(params, grad, adam, lr);
    return loss;
}

void validate(const TrainSchedule& s) {
    if (s.epochs_total < 1) throw std::invalid_argument("TrainSchedule: epochs_total must be >= 1");
    if (s.epochs_phase1 < 0 || s.epochs_phase1 > s.epochs_total) {
        throw std::invalid_argument("TrainSchedule: epochs_phase1 must be in [0, epochs_total]");
    }
    if (!(s.lr >= 0.0)) throw std::invalid_argument("TrainSchedule: lr must be >= 0");
    if (s.batch_size == 0) throw std::invalid_argument("TrainSchedule: batch_size must be >= 1");
    if (!(s.s_evd_phase1 >= 0.0) || !(s.s_evd_phase2 >= 0.0)) throw std::invalid_argument("TrainSchedule: s_evd must be >= 0");
}

FitResult fit(const Architecture& arch, const TrainSchedule& schedule, std::span<const Sample> train,
              std::span<const Sample> validation, const LossConfig& cfg) {
    validate(arch);
    validate(schedule);
    validate(cfg);
    if (train.empty()) throw std::invalid_argument("fit: empty training set");
    if (arch.head == HeadKind::Plain && !cfg.use_geometric) {
        throw std::invalid_argument("fit: a plain head needs the geometric loss");
    }

    FitResult result{init_params(arch, derive_seed(schedule.seed, 0)), {}};
    RegressorParams& params = result.params;
    AdamState adam = make_adam(params);
    Rng shuffle_rng(derive_seed(schedule.seed, 1));
    Rng dropout_rng(derive_seed(schedule.seed, 2));

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<const Sample*> batch;

    for (int epoch = 1; epoch <= schedule.epochs_total; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.phase = epoch <= schedule.epochs_phase1 ? 1 : 2;
        rec.s_evd = rec.phase == 1 ? schedule.s_evd_phase1 : schedule.s_evd_phase2;
        LossConfig epoch_cfg = cfg;
        epoch_cfg.s_evd_tr = rec.s_evd;
        epoch_cfg.s_evd_rot = rec.s_evd;

        shuffle_rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
            const std::size_t stop = std::min(order.size(), start + schedule.batch_size);
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(&train[order[i]]);
            LossBreakdown b;
            try {
                b = train_step(params, batch, epoch_cfg, adam, schedule.lr, &dropout_rng);
            } catch (const TrainingDivergence& e) {
                throw TrainingDivergence(e.what(), epoch, e.breakdown());
            }
            b *= static_cast<double>(batch.size()) / static_cast<double>(train.size());
            rec.train += b;
        }

        if (!validation.empty()) {
            const auto outputs = kernels::predict_batch_parallel(params, validation);
            const double inv_n = 1.0 / static_cast<double>(validation.size());
            for (std::size_t i = 0; i < validation.size(); ++i) {
                const Sample& s = validation[i];
                Pose6 mean;
                LossBreakdown l;
                if (const auto* ev = std::get_if<EvidentialPrediction>(&outputs[i])) {
                    l = loss_final(*ev, s.target, epoch_cfg);
                    mean = ev->mean_pose();
                } else {
                    const Pose6& p = std::get<Pose6>(outputs[i]);
                    mean = make_pose(p.translation, p.euler());
                    l = loss_final(mean, s.target, epoch_cfg);
                }
                l *= inv_n;
                rec.validation += l;
                const auto m = mean.components();
                const auto y = s.target.components();
                rec.val_tr_error_mean += std::hypot(m[0] - y[0], m[1] - y[1], m[2] - y[2]) * inv_n;
                rec.val_rot_error_mean +=
                    quat_angular_distance(mean.quaternion(), s.target.quaternion()) * 180.0 / kPi * inv_n;
            }
            if (!std::isfinite(rec.validation.total)) {
                throw TrainingDivergence("non-finite validation loss", epoch, rec.validation);
            }
        }
        result.log.push_back(rec);
    }
    return result;
}

double finite_diff_check(const RegressorParams& params, const Sample& sample, const LossConfig& cfg,
                         std::size_t n_params, std::uint64_t seed, double h) {
    std::vector<double> grad(params.values.size());
    sample_loss_grad(params, sample, cfg, nullptr, grad);

    std::vector<std::size_t> idx(params.values.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(idx));
    idx.resize(std::min(n_params, idx.size()));

    RegressorParams probe = params;
    auto loss_at = [&](std::span<const double> values) {
        std::copy(values.begin(), values.end(), probe.values.begin());
        return sample_loss(probe, sample, cfg).total;
    };
    double worst = 0.0;
    for (std::size_t i : idx) {
        const double numeric = central_difference(loss_at, params.values, i, h);
        worst = std::max(worst, relative_error(grad[i], numeric));
    }
    return worst;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto& a = ckpt.params.arch;
    const auto& s = ckpt.schedule;
    nlohmann::json j;
    j["format"] = "poseuq-checkpoint";
    j["version"] = kCheckpointVersion;
    j["seed"] = ckpt.seed;
    j["architecture"] = {{"input_dim", a.input_dim}, {"hidden1", a.hidden1}, {"hidden2", a.hidden2},
                         {"head", to_string(a.head)}, {"dropout_p", a.dropout_p}};
    j["schedule"] = {{"epochs_total", s.epochs_total}, {"epochs_phase1", s.epochs_phase1}, {"lr", s.lr},
                     {"batch_size", s.batch_size},     {"s_evd_phase1", s.s_evd_phase1},   {"s_evd_phase2", s.s_evd_phase2},
                     {"seed", s.seed}};
    j["params"] = ckpt.params.values;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
    out << j.dump() << '\n';
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed checkpoint " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "poseuq-checkpoint") throw std::runtime_error("not a checkpoint: " + path.string());
    if (j.value("version", -1) != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
    Checkpoint c;
    try {
        const auto& a = j.at("architecture");
        c.params.arch.input_dim = a.at("input_dim").get<std::size_t>();
        c.params.arch.hidden1 = a.at("hidden1").get<std::size_t>();
        c.params.arch.hidden2 = a.at("hidden2").get<std::size_t>();
        c.params.arch.head = head_kind_from_string(a.at("head").get<std::string>());
        c.params.arch.dropout_p = a.at("dropout_p").get<double>();
        const auto& s = j.at("schedule");
        c.schedule.epochs_total = s.at("epochs_total").get<int>();
        c.schedule.epochs_phase1 = s.at("epochs_phase1").get<int>();
        c.schedule.lr = s.at("lr").get<double>();
        c.schedule.batch_size = s.at("batch_size").get<std::size_t>();
        c.schedule.s_evd_phase1 = s.at("s_evd_phase1").get<double>();
        c.schedule.s_evd_phase2 = s.at("s_evd_phase2").get<double>();
        c.schedule.seed = s.at("seed").get<std::uint64_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.params.values = j.at("params").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed checkpoint " + path.string() + ": " + e.what());
    }
    validate(c.params.arch);
    if (c.params.values.size() != c.params.arch.param_count()) {
        throw std::runtime_error("checkpoint parameter count does not match its architecture");
    }
    return c;
}

}  // namespace poseuq
