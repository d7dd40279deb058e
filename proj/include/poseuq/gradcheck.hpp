#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace poseuq {

/// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// (f(x + h e_i) - f(x - h e_i)) / 2h
template <typename F>
double central_difference(F&& f, std::span<const double> x, std::size_t i, double h = 1e-5) {
    std::vector<double> probe(x.begin(), x.end());
    probe[i] = x[i] + h;
    const double up = f(std::span<const double>(probe));
    probe[i] = x[i] - h;
    const double down = f(std::span<const double>(probe));
    return (up - down) / (2.0 * h);
}

}  // namespace poseuq
