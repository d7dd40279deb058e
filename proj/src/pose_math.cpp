#include "poseuq/pose_math.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace poseuq {

namespace {

constexpr double kGimbalEps = 1e-12;

}  // namespace

EulerTriple Pose6::euler() const {
    if (const auto* e = std::get_if<EulerTriple>(&rotation)) return *e;
    return quat_to_euler(std::get<UnitQuaternion>(rotation));
}

UnitQuaternion Pose6::quaternion() const {
    if (const auto* q = std::get_if<UnitQuaternion>(&rotation)) return canonical(normalized(*q));
    return euler_to_quat(std::get<EulerTriple>(rotation));
}

std::array<double, 6> Pose6::components() const {
    const EulerTriple e = euler();
    return {translation.x, translation.y, translation.z, e.roll, e.pitch, e.yaw};
}

Pose6 make_pose(const Translation& t, const EulerTriple& e) {
    return Pose6{t, EulerTriple{wrap_angle(e.roll), wrap_angle(e.pitch), wrap_angle(e.yaw)}};
}

Pose6 make_pose(const Translation& t, const UnitQuaternion& q) {
    return Pose6{t, canonical(normalized(q))};
}

double wrap_angle(double theta) {
    if (!std::isfinite(theta)) throw std::domain_error("wrap_angle: non-finite angle");
    double r = std::remainder(theta, 2.0 * kPi);
    if (r <= -kPi) r += 2.0 * kPi;
    return r;
}

double smooth_l1(double x) {
    const double a = std::abs(x);
    return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) {
    if (x >= 1.0) return 1.0;
    if (x <= -1.0) return -1.0;
    return x;
}

double angular_smooth_l1(double pred, double target) {
    return smooth_l1(wrap_angle(pred - target));
}

UnitQuaternion normalized(const UnitQuaternion& q) {
    const double n = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z + q.w * q.w);
    if (!(n > 0.0) || !std::isfinite(n)) throw std::domain_error("quaternion has zero or non-finite norm");
    return {q.x / n, q.y / n, q.z / n, q.w / n};
}

UnitQuaternion canonical(const UnitQuaternion& q) {
    if (q.w < 0.0) return {-q.x, -q.y, -q.z, -q.w};
    return q;
}

EulerTriple quat_to_euler(const UnitQuaternion& raw) {
    const UnitQuaternion q = normalized(raw);
    const double s = 2.0 * (q.w * q.y - q.z * q.x);
    EulerTriple e;
    if (s >= 1.0 - kGimbalEps) {
        e.pitch = kPi / 2.0;
        e.roll = 0.0;
        e.yaw = wrap_angle(-2.0 * std::atan2(q.x, q.w));
        return e;
    }
    if (s <= -1.0 + kGimbalEps) {
        e.pitch = -kPi / 2.0;
        e.roll = 0.0;
        e.yaw = wrap_angle(2.0 * std::atan2(q.x, q.w));
        return e;
    }
    e.roll = wrap_angle(std::atan2(2.0 * (q.w * q.x + q.y * q.z), 1.0 - 2.0 * (q.x * q.x + q.y * q.y)));
    e.pitch = std::asin(s);
    e.yaw = wrap_angle(std::atan2(2.0 * (q.w * q.z + q.x * q.y), 1.0 - 2.0 * (q.y * q.y + q.z * q.z)));
    return e;
}

UnitQuaternion euler_to_quat(const EulerTriple& e) {
    const double cr = std::cos(e.roll / 2.0), sr = std::sin(e.roll / 2.0);
    const double cp = std::cos(e.pitch / 2.0), sp = std::sin(e.pitch / 2.0);
    const double cy = std::cos(e.yaw / 2.0), sy = std::sin(e.yaw / 2.0);
    UnitQuaternion q{
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
        cr * cp * cy + sr * sp * sy,
    };
    return canonical(normalized(q));
}

double quat_angular_distance(const UnitQuaternion& q1, const UnitQuaternion& q2) {
    const UnitQuaternion a = normalized(q1);
    const UnitQuaternion b = normalized(q2);
    double dot = std::abs(a.x * b.x + a.y * b.y + a.z * b.z + a.w * b.w);
    if (dot > 1.0) dot = 1.0;
    return 2.0 * std::acos(dot);
}

UnitQuaternion multiply(const UnitQuaternion& a, const UnitQuaternion& b) {
    return {
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
    };
}

UnitQuaternion conjugate(const UnitQuaternion& q) { return {-q.x, -q.y, -q.z, q.w}; }

std::array<double, 3> rotate(const UnitQuaternion& q, const std::array<double, 3>& v) {
    // v' = v + 2 w (u x v) + 2 u x (u x v), u = (x, y, z)
    const double ux = q.x, uy = q.y, uz = q.z;
    const double cx = uy * v[2] - uz * v[1];
    const double cy = uz * v[0] - ux * v[2];
    const double cz = ux * v[1] - uy * v[0];
    const double ccx = uy * cz - uz * cy;
    const double ccy = uz * cx - ux * cz;
    const double ccz = ux * cy - uy * cx;
    return {v[0] + 2.0 * (q.w * cx + ccx), v[1] + 2.0 * (q.w * cy + ccy), v[2] + 2.0 * (q.w * cz + ccz)};
}

std::array<std::array<double, 4>, 3> quat_to_euler_jacobian(const std::array<double, 4>& p) {
    const double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3]);
    if (!(n > 0.0)) throw std::domain_error("quat_to_euler_jacobian: zero quaternion");
    const double x = p[0] / n, y = p[1] / n, z = p[2] / n, w = p[3] / n;

    // Derivatives with respect to the unit quaternion (x, y, z, w).
    std::array<std::array<double, 4>, 3> dq{};
    {
        const double a = 2.0 * (w * x + y * z);
        const double b = 1.0 - 2.0 * (x * x + y * y);
        const std::array<double, 4> da{2.0 * w, 2.0 * z, 2.0 * y, 2.0 * x};
        const std::array<double, 4> db{-4.0 * x, -4.0 * y, 0.0, 0.0};
        const double den = a * a + b * b;
        for (int k = 0; k < 4; ++k) dq[0][k] = (b * da[k] - a * db[k]) / den;
    }
    {
        const double s = 2.0 * (w * y - z * x);
        const std::array<double, 4> ds{-2.0 * z, 2.0 * w, -2.0 * x, 2.0 * y};
        const double c = std::sqrt(std::max(1.0 - s * s, kGimbalEps));
        for (int k = 0; k < 4; ++k) dq[1][k] = ds[k] / c;
    }
    {
        const double a = 2.0 * (w * z + x * y);
        const double b = 1.0 - 2.0 * (y * y + z * z);
        const std::array<double, 4> da{2.0 * y, 2.0 * x, 2.0 * w, 2.0 * z};
        const std::array<double, 4> db{0.0, -4.0 * y, -4.0 * z, 0.0};
        const double den = a * a + b * b;
        for (int k = 0; k < 4; ++k) dq[2][k] = (b * da[k] - a * db[k]) / den;
    }

    // Chain through q = p / |p|: dq/dp = (I - q q^T) / |p|.
    const std::array<double, 4> u{x, y, z, w};
    std::array<std::array<double, 4>, 3> jac{};
    for (int r = 0; r < 3; ++r) {
        double proj = 0.0;
        for (int k = 0; k < 4; ++k) proj += dq[r][k] * u[k];
        for (int k = 0; k < 4; ++k) jac[r][k] = (dq[r][k] - proj * u[k]) / n;
    }
    return jac;
}

}  // namespace poseuq
