#include "poseuq/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace poseuq {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
    if (a != b) throw std::invalid_argument("loss: prediction/target length mismatch");
    if (a == 0) throw std::invalid_argument("loss: empty batch");
}

// Signed difference pred - target used by every distance d(.).
double difference(double pred, double target, bool angular) {
    return angular ? wrap_angle(pred - target) : pred - target;
}

// Target as seen from gamma, so rotational residuals never cross the wrap.
double effective_target(double y, double gamma, bool angular) {
    return angular ? gamma + wrap_angle(y - gamma) : y;
}

struct ComponentTerms {
    double density = 0.0;
    double reg = 0.0;
    double geo = 0.0;
    NIGGrad d_density;
    NIGGrad d_reg;
    double d_geo = 0.0;  // w.r.t. gamma
};

ComponentTerms component_terms(const NIGParams& p, double y, bool angular, const LossConfig& cfg, bool want_grad) {
    ComponentTerms t;
    const double y_eff = effective_target(y, p.gamma, angular);
    const StudentTParams st = predictive_student(p);
    const double log_pdf = student_t_log_pdf(y_eff, st);

    if (cfg.evd_variant == EvidentialVariant::NLL) {
        t.density = -log_pdf;
        if (want_grad) t.d_density = predictive_log_pdf_grad(y_eff, p) * -1.0;
    } else {
        const double pdf = std::exp(log_pdf);
        if (pdf < cfg.clip_floor) {
            t.density = smooth_l1(1.0 / cfg.clip_floor);
        } else {
            const double inv = 1.0 / pdf;
            t.density = smooth_l1(inv);
            // d/dtheta sl1(1/p) = sl1'(1/p) * (-1/p) * dlog p/dtheta
            if (want_grad) t.d_density = predictive_log_pdf_grad(y_eff, p) * (-smooth_l1_grad(inv) * inv);
        }
    }

    const double diff = difference(p.gamma, y, angular);
    const double dist = smooth_l1(diff);
    const double phi = evidence_phi(p);
    t.reg = dist * phi;
    t.geo = dist;
    if (want_grad) {
        const double dd = smooth_l1_grad(diff);
        t.d_reg = {dd * phi, 2.0 * dist, dist, 0.0};
        t.d_geo = dd;
    }
    return t;
}

LossBreakdown evaluate(const EvidentialPrediction& pred, const Pose6& target, const LossConfig& cfg,
                       EvidentialGrad* grad) {
    validate(cfg);
    const auto y = target.components();
    std::array<ComponentTerms, 6> terms;
    for (int c = 0; c < 6; ++c) terms[c] = component_terms(pred.component(c), y[c], c >= 3, cfg, grad != nullptr);

    LossBreakdown out;
    for (int c = 0; c < 3; ++c) {
        out.density_tr += terms[c].density / 3.0;
        out.reg_tr += terms[c].reg / 3.0;
        out.density_rot += terms[c + 3].density / 3.0;
        out.reg_rot += terms[c + 3].reg / 3.0;
        if (cfg.use_geometric) {
            out.geometric_tr += terms[c].geo / 3.0;
            out.geometric_rot += terms[c + 3].geo / 3.0;
        }
    }
    out.evd_tr = out.density_tr + cfg.lambda_tr * out.reg_tr;
    out.evd_rot = out.density_rot + cfg.lambda_rot * out.reg_rot;
    out.total = cfg.s_rot * (out.geometric_rot + cfg.s_evd_rot * out.evd_rot) +
                cfg.s_tr * (out.geometric_tr + cfg.s_evd_tr * out.evd_tr);

    if (grad) {
        for (int c = 0; c < 6; ++c) {
            const bool rot = c >= 3;
            const double s = rot ? cfg.s_rot : cfg.s_tr;
            const double s_evd = rot ? cfg.s_evd_rot : cfg.s_evd_tr;
            const double lambda = rot ? cfg.lambda_rot : cfg.lambda_tr;
            NIGGrad g = terms[c].d_density;
            g += terms[c].d_reg * lambda;
            g = g * (s * s_evd / 3.0);
            if (cfg.use_geometric) g.gamma += s / 3.0 * terms[c].d_geo;
            (*grad)[c] = g;
        }
    }
    return out;
}

}  // namespace

void validate(const LossConfig& cfg) {
    const double fields[] = {cfg.lambda_tr, cfg.lambda_rot, cfg.s_tr, cfg.s_rot, cfg.s_evd_tr, cfg.s_evd_rot};
    for (double f : fields) {
        if (!(f >= 0.0) || !std::isfinite(f)) throw std::invalid_argument("LossConfig: scale factors must be finite and >= 0");
    }
    if (!(cfg.clip_floor > 0.0)) throw std::invalid_argument("LossConfig: clip_floor must be > 0");
}

Pose6 EvidentialPrediction::mean_pose() const {
    return make_pose(Translation{translation[0].gamma, translation[1].gamma, translation[2].gamma},
                     EulerTriple{rotation[0].gamma, rotation[1].gamma, rotation[2].gamma});
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
    total += o.total;
    geometric_tr += o.geometric_tr;
    geometric_rot += o.geometric_rot;
    evd_tr += o.evd_tr;
    evd_rot += o.evd_rot;
    density_tr += o.density_tr;
    density_rot += o.density_rot;
    reg_tr += o.reg_tr;
    reg_rot += o.reg_rot;
    return *this;
}

LossBreakdown& LossBreakdown::operator*=(double s) {
    total *= s;
    geometric_tr *= s;
    geometric_rot *= s;
    evd_tr *= s;
    evd_rot *= s;
    density_tr *= s;
    density_rot *= s;
    reg_tr *= s;
    reg_rot *= s;
    return *this;
}

double loss_nll(std::span<const NIGParams> preds, std::span<const double> targets) {
    check_lengths(preds.size(), targets.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) sum -= student_t_log_pdf(targets[i], predictive_student(preds[i]));
    return sum / static_cast<double>(preds.size());
}

double density_term(const NIGParams& p, double y, double clip_floor) {
    return smooth_l1(1.0 / clipped_density(y, predictive_student(p), clip_floor));
}

double loss_d(std::span<const NIGParams> preds, std::span<const double> targets, double clip_floor) {
    check_lengths(preds.size(), targets.size());
    if (!(clip_floor > 0.0)) throw std::invalid_argument("loss_d: clip_floor must be > 0");
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) sum += density_term(preds[i], targets[i], clip_floor);
    return sum / static_cast<double>(preds.size());
}

double loss_r(std::span<const NIGParams> preds, std::span<const double> targets, bool angular) {
    check_lengths(preds.size(), targets.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double d = angular ? angular_smooth_l1(preds[i].gamma, targets[i]) : smooth_l1(targets[i] - preds[i].gamma);
        sum += d * evidence_phi(preds[i]);
    }
    return sum / static_cast<double>(preds.size());
}

double loss_evd(const EvidentialPrediction& pred, const Pose6& target, const LossConfig& cfg, Branch branch) {
    const LossBreakdown b = evaluate(pred, target, cfg, nullptr);
    return branch == Branch::Translation ? b.evd_tr : b.evd_rot;
}

double loss_geometric(const Pose6& pred_mean, const Pose6& target, Branch branch) {
    if (pred_mean.is_euler() != target.is_euler()) {
        throw std::invalid_argument("loss_geometric: both poses must use the same rotation representation");
    }
    const auto p = pred_mean.components();
    const auto y = target.components();
    double sum = 0.0;
    if (branch == Branch::Translation) {
        for (int c = 0; c < 3; ++c) sum += smooth_l1(p[c] - y[c]);
    } else {
        for (int c = 3; c < 6; ++c) sum += angular_smooth_l1(p[c], y[c]);
    }
    return sum / 3.0;
}

LossBreakdown loss_final(const EvidentialPrediction& pred, const Pose6& target, const LossConfig& cfg) {
    return evaluate(pred, target, cfg, nullptr);
}

LossBreakdown loss_final_grad(const EvidentialPrediction& pred, const Pose6& target, const LossConfig& cfg,
                              EvidentialGrad& grad) {
    return evaluate(pred, target, cfg, &grad);
}

LossBreakdown loss_final(const Pose6& pred, const Pose6& target, const LossConfig& cfg) {
    std::array<double, 6> unused{};
    return loss_final_grad(pred, target, cfg, unused);
}

LossBreakdown loss_final_grad(const Pose6& pred, const Pose6& target, const LossConfig& cfg,
                              std::array<double, 6>& grad) {
    validate(cfg);
    const auto p = pred.components();
    const auto y = target.components();
    LossBreakdown out;
    for (int c = 0; c < 6; ++c) {
        const bool rot = c >= 3;
        const double diff = difference(p[c], y[c], rot);
        const double s = rot ? cfg.s_rot : cfg.s_tr;
        (rot ? out.geometric_rot : out.geometric_tr) += smooth_l1(diff) / 3.0;
        grad[c] = s / 3.0 * smooth_l1_grad(diff);
    }
    out.total = cfg.s_rot * out.geometric_rot + cfg.s_tr * out.geometric_tr;
    return out;
}

}  // namespace poseuq
