#pragma once

// Shared test utilities: independent oracles and randomized case generators.
// Everything here is deliberately written along different code paths than
// the library implementations it checks.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "vci/config.hpp"
#include "vci/gmm.hpp"
#include "vci/rng.hpp"
#include "vci/sample.hpp"

namespace vci::testing {

// Two-pass Pearson correlation (textbook form), oracle for the single-pass
// implementation.
inline double pearson_two_pass(const Vec& a, const Vec& b) {
    const std::size_t n = a.size();
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

// Spearman rank correlation with average ranks on ties.
inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = 0.5 * (i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    return pearson_two_pass(ranks(x), ranks(y));
}

// Random GMM with well-conditioned components, for property sweeps.
inline GmmSpec random_gmm(RngStream& rng, std::size_t dim, int n_classes, int comps_per_class) {
    GmmSpec gmm;
    gmm.dim = dim;
    for (int c = 0; c < n_classes; ++c) {
        ClassMixture cls;
        cls.prior = 1.0 / n_classes;
        Vec weights(comps_per_class);
        double wsum = 0.0;
        for (auto& w : weights) {
            w = 0.2 + rng.uniform();
            wsum += w;
        }
        for (int k = 0; k < comps_per_class; ++k) {
            GmmComponent comp;
            comp.weight = weights[k] / wsum;
            comp.mean.resize(dim);
            for (auto& m : comp.mean) m = 4.0 * (rng.uniform() - 0.5);
            comp.var = 0.2 + rng.uniform();
            cls.components.push_back(std::move(comp));
        }
        gmm.classes.push_back(std::move(cls));
    }
    // Nudge the weights so the simplex constraint holds to machine precision.
    for (auto& cls : gmm.classes) {
        double s = 0.0;
        for (auto& comp : cls.components) s += comp.weight;
        for (auto& comp : cls.components) comp.weight /= s;
    }
    gmm.validate();
    return gmm;
}

} // namespace vci::testing
