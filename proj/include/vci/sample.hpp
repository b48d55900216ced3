#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "vci/errors.hpp"

namespace vci {

using Vec = std::vector<double>;

// Flat real-valued state vector with shape metadata. All samplers operate on
// the flat view; shape only matters for tensor I/O.
struct Sample {
    Vec data;
    std::vector<std::size_t> shape;

    Sample() = default;
    explicit Sample(Vec d) : data(std::move(d)), shape{data.size()} {}
    Sample(Vec d, std::vector<std::size_t> s) : data(std::move(d)), shape(std::move(s)) {}

    static Sample zeros(std::size_t n) { return Sample(Vec(n, 0.0)); }

    std::size_t dim() const { return data.size(); }

    bool finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_same_dim(const Sample& a, const Sample& b, const char* where) {
    if (a.dim() != b.dim())
        throw config_error(std::string(where) + ": dimension mismatch (" +
                           std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")");
}

inline void require_same_dim(const Vec& a, const Vec& b, const char* where) {
    if (a.size() != b.size())
        throw config_error(std::string(where) + ": dimension mismatch (" +
                           std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
}

// out = ca*a + cb*b
inline Vec lincomb(double ca, const Vec& a, double cb, const Vec& b) {
    require_same_dim(a, b, "lincomb");
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = ca * a[i] + cb * b[i];
    return out;
}

inline Vec scaled(double c, const Vec& a) {
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = c * a[i];
    return out;
}

inline Vec sub(const Vec& a, const Vec& b) { return lincomb(1.0, a, -1.0, b); }

inline double l2_norm(const Vec& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

inline double mean(const Vec& a) {
    return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
}

// Unbiased sample variance.
inline double variance(const Vec& a) {
    double mu = mean(a);
    double s = 0.0;
    for (double v : a) s += (v - mu) * (v - mu);
    return s / static_cast<double>(a.size() - 1);
}

} // namespace vci
