#pragma once

#include <array>
#include <numbers>
#include <variant>

namespace poseuq {

inline constexpr double kPi = std::numbers::pi;

/// Roll, pitch, yaw in radians. Intrinsic Z-Y-X (yaw, then pitch, then roll).
struct EulerTriple {
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;

    std::array<double, 3> as_array() const { return {roll, pitch, yaw}; }
    bool operator==(const EulerTriple&) const = default;
};

/// Hamilton quaternion stored as (x, y, z, w).
struct UnitQuaternion {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double w = 1.0;

    bool operator==(const UnitQuaternion&) const = default;
};

struct Translation {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    std::array<double, 3> as_array() const { return {x, y, z}; }
    bool operator==(const Translation&) const = default;
};

/// A 6-DoF misalignment: translation in meters plus a rotation in either
/// representation.
struct Pose6 {
    Translation translation;
    std::variant<EulerTriple, UnitQuaternion> rotation;

    bool is_euler() const { return std::holds_alternative<EulerTriple>(rotation); }
    /// Rotation as Euler angles, converting from the quaternion form if needed.
    EulerTriple euler() const;
    UnitQuaternion quaternion() const;
    /// (x, y, z, roll, pitch, yaw).
    std::array<double, 6> components() const;
};

Pose6 make_pose(const Translation& t, const EulerTriple& e);
Pose6 make_pose(const Translation& t, const UnitQuaternion& q);

/// Wraps to (-pi, pi]. Throws std::domain_error on non-finite input.
double wrap_angle(double theta);

double smooth_l1(double x);
/// d/dx smooth_l1(x).
double smooth_l1_grad(double x);

/// smooth_l1 of the wrapped difference pred - target.
double angular_smooth_l1(double pred, double target);

/// Renormalizes internally; rejects a zero quaternion. Gimbal lock puts
/// the residual rotation on yaw with roll = 0.
EulerTriple quat_to_euler(const UnitQuaternion& q);
/// Output is canonicalized to w >= 0.
UnitQuaternion euler_to_quat(const EulerTriple& e);

/// 2 acos(|<q1, q2>|), in [0, pi].
double quat_angular_distance(const UnitQuaternion& q1, const UnitQuaternion& q2);

UnitQuaternion normalized(const UnitQuaternion& q);
UnitQuaternion canonical(const UnitQuaternion& q);
UnitQuaternion multiply(const UnitQuaternion& a, const UnitQuaternion& b);
UnitQuaternion conjugate(const UnitQuaternion& q);
std::array<double, 3> rotate(const UnitQuaternion& q, const std::array<double, 3>& v);

/// Jacobian of quat_to_euler with respect to a raw (not necessarily unit)
/// quaternion p = (x, y, z, w), evaluated through the normalization q = p/|p|.
/// Row i is d(euler_i)/d(p).
std::array<std::array<double, 4>, 3> quat_to_euler_jacobian(const std::array<double, 4>& p);

}  // namespace poseuq
