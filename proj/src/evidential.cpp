#include "poseuq/evidential.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <stdexcept>

#include "poseuq/pose_math.hpp"

namespace poseuq {

bool is_valid(const NIGParams& p) {
    return std::isfinite(p.gamma) && std::isfinite(p.nu) && std::isfinite(p.alpha) && std::isfinite(p.beta) &&
           p.nu > 0.0 && p.alpha > 1.0 && p.beta > 0.0;
}

void validate(const NIGParams& p) {
    if (!std::isfinite(p.gamma)) throw std::domain_error("NIG gamma must be finite");
    if (!(p.nu > 0.0) || !std::isfinite(p.nu)) throw std::domain_error("NIG nu must be > 0");
    if (!(p.alpha > 1.0) || !std::isfinite(p.alpha)) throw std::domain_error("NIG alpha must be > 1");
    if (!(p.beta > 0.0) || !std::isfinite(p.beta)) throw std::domain_error("NIG beta must be > 0");
}

NIGMoments nig_moments(const NIGParams& p) {
    validate(p);
    return {p.gamma, p.beta / (p.nu * (p.alpha - 1.0))};
}

double aleatoric_var(const NIGParams& p) {
    validate(p);
    return p.beta / (p.alpha - 1.0);
}

double evidence_phi(const NIGParams& p) { return 2.0 * p.nu + p.alpha; }

StudentTParams predictive_student(const NIGParams& p) {
    validate(p);
    return {p.gamma, p.beta * (1.0 + p.nu) / (p.nu * p.alpha), 2.0 * p.alpha};
}

double student_t_log_pdf(double y, const StudentTParams& st) {
    const double v = st.dof;
    const double r = y - st.loc;
    return std::lgamma((v + 1.0) / 2.0) - std::lgamma(v / 2.0) - 0.5 * std::log(v * kPi * st.scale_sq) -
           (v + 1.0) / 2.0 * std::log1p(r * r / (v * st.scale_sq));
}

double student_t_pdf(double y, const StudentTParams& st) { return std::exp(student_t_log_pdf(y, st)); }

double clipped_density(double y, const StudentTParams& st, double floor) {
    if (!(floor > 0.0)) throw std::invalid_argument("clip floor must be > 0");
    const double d = student_t_pdf(y, st);
    return d < floor ? floor : d;
}

NIGGrad predictive_log_pdf_grad(double y, const NIGParams& p) {
    // log p = lgamma(a+1/2) - lgamma(a) - 1/2 log(pi/nu) + a log(Om) - (a+1/2) log(nu r^2 + Om)
    // with Om = 2 beta (1 + nu), r = y - gamma.
    const double r = y - p.gamma;
    const double om = 2.0 * p.beta * (1.0 + p.nu);
    const double d = p.nu * r * r + om;
    const double a = p.alpha;
    NIGGrad g;
    g.gamma = (2.0 * a + 1.0) * p.nu * r / d;
    g.nu = 0.5 / p.nu + a * 2.0 * p.beta / om - (a + 0.5) * (r * r + 2.0 * p.beta) / d;
    g.alpha = boost::math::digamma(a + 0.5) - boost::math::digamma(a) + std::log(om) - std::log(d);
    g.beta = a / p.beta - (2.0 * a + 1.0) * (1.0 + p.nu) / d;
    return g;
}

}  // namespace poseuq
