#pragma once

namespace poseuq {

/// Normal-Inverse-Gamma parameters for one regressed scalar.
/// Invariants: nu > 0, alpha > 1, beta > 0.
struct NIGParams {
    double gamma = 0.0;
    double nu = 1.0;
    double alpha = 2.0;
    double beta = 1.0;
};

/// Student-t with a squared-scale second parameter.
struct StudentTParams {
    double loc = 0.0;
    double scale_sq = 1.0;
    double dof = 1.0;
};

struct NIGMoments {
    double mean = 0.0;
    double epistemic_var = 0.0;
};

inline constexpr double kDefaultClipFloor = 0.04;

bool is_valid(const NIGParams& p);
/// Throws std::domain_error when the NIG invariants are violated.
void validate(const NIGParams& p);

/// E[mu] = gamma, Var[mu] = beta / (nu (alpha - 1)).
NIGMoments nig_moments(const NIGParams& p);
/// E[sigma^2] = beta / (alpha - 1).
double aleatoric_var(const NIGParams& p);
/// Phi = 2 nu + alpha.
double evidence_phi(const NIGParams& p);

/// St(gamma, beta (1 + nu) / (nu alpha), 2 alpha).
StudentTParams predictive_student(const NIGParams& p);

double student_t_pdf(double y, const StudentTParams& st);
double student_t_log_pdf(double y, const StudentTParams& st);
double clipped_density(double y, const StudentTParams& st, double floor = kDefaultClipFloor);

/// Gradient of log p(y | m) with respect to (gamma, nu, alpha, beta), where p
/// is the Student-t predictive of the NIG.
struct NIGGrad {
    double gamma = 0.0;
    double nu = 0.0;
    double alpha = 0.0;
    double beta = 0.0;

    NIGGrad& operator+=(const NIGGrad& o) {
        gamma += o.gamma;
        nu += o.nu;
        alpha += o.alpha;
        beta += o.beta;
        return *this;
    }
    NIGGrad operator*(double s) const { return {gamma * s, nu * s, alpha * s, beta * s}; }
};

NIGGrad predictive_log_pdf_grad(double y, const NIGParams& p);

}  // namespace poseuq
