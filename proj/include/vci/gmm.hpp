#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vci/errors.hpp"
#include "vci/rng.hpp"
#include "vci/sample.hpp"

namespace vci {

// Prompt surrogate: a class label, or null for unconditional.
struct Condition {
    std::optional<int> label;

    static Condition none() { return {}; }
    static Condition cls(int k) { return {k}; }

    bool is_null() const { return !label.has_value(); }
};

struct GmmComponent {
    double weight = 1.0;
    Vec mean;
    double var = 1.0; // isotropic
};

struct ClassMixture {
    double prior = 1.0;
    std::vector<GmmComponent> components;
};

// Class-conditional isotropic Gaussian mixture. The unconditional
// distribution is the prior-weighted pool of all classes.
struct GmmSpec {
    std::size_t dim = 0;
    std::vector<ClassMixture> classes;

    void validate() const {
        if (dim < 1) throw config_error("gmm: dim must be >= 1");
        if (classes.empty()) throw config_error("gmm: at least one class required");
        double prior_sum = 0.0;
        for (std::size_t c = 0; c < classes.size(); ++c) {
            const auto& cls = classes[c];
            if (!(cls.prior >= 0.0)) throw config_error("gmm: negative class prior");
            prior_sum += cls.prior;
            if (cls.components.empty())
                throw config_error("gmm: class " + std::to_string(c) + " has no components");
            double wsum = 0.0;
            for (const auto& comp : cls.components) {
                if (!(comp.weight >= 0.0)) throw config_error("gmm: negative component weight");
                if (!(comp.var > 0.0)) throw config_error("gmm: component variance must be > 0");
                if (comp.mean.size() != dim) throw config_error("gmm: component mean has wrong dim");
                wsum += comp.weight;
            }
            if (std::fabs(wsum - 1.0) > 1e-9)
                throw config_error("gmm: class " + std::to_string(c) + " weights sum to " +
                                   std::to_string(wsum) + ", expected 1");
        }
        if (std::fabs(prior_sum - 1.0) > 1e-9)
            throw config_error("gmm: class priors sum to " + std::to_string(prior_sum));
    }

    void check_class(int k) const {
        if (k < 0 || static_cast<std::size_t>(k) >= classes.size())
            throw config_error("gmm: class " + std::to_string(k) + " not defined");
    }

    // Mixture addressed by a condition: one class, or the pooled mixture.
    std::vector<GmmComponent> mixture_for(const Condition& c) const {
        if (!c.is_null()) {
            check_class(*c.label);
            return classes[static_cast<std::size_t>(*c.label)].components;
        }
        std::vector<GmmComponent> pooled;
        for (const auto& cls : classes)
            for (const auto& comp : cls.components) {
                GmmComponent g = comp;
                g.weight *= cls.prior;
                pooled.push_back(std::move(g));
            }
        return pooled;
    }
};

namespace detail {

inline double log_sum_exp(const Vec& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// Per-component log densities of the mixture diffused to noise level
// alpha_bar: means scale by sqrt(abar), variances become abar*s^2 + 1 - abar.
inline Vec diffused_component_logps(const std::vector<GmmComponent>& mix, const Vec& x,
                                    double alpha_bar) {
    const double sqrt_ab = std::sqrt(alpha_bar);
    const std::size_t d = x.size();
    Vec logps(mix.size());
    for (std::size_t k = 0; k < mix.size(); ++k) {
        const double v = alpha_bar * mix[k].var + (1.0 - alpha_bar);
        double q = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double r = x[i] - sqrt_ab * mix[k].mean[i];
            q += r * r;
        }
        const double logw = mix[k].weight > 0.0 ? std::log(mix[k].weight)
                                                : -std::numeric_limits<double>::infinity();
        logps[k] = logw - 0.5 * q / v -
                   0.5 * static_cast<double>(d) * std::log(6.283185307179586 * v);
    }
    return logps;
}

} // namespace detail

// log p_t(x | c) of the diffused mixture; alpha_bar = 1 gives the data density.
inline double gmm_log_density(const GmmSpec& gmm, const Vec& x, const Condition& c,
                              double alpha_bar) {
    if (x.size() != gmm.dim) throw config_error("gmm_log_density: dimension mismatch");
    return detail::log_sum_exp(detail::diffused_component_logps(gmm.mixture_for(c), x, alpha_bar));
}

// grad_x log p_t(x | c) in closed form via component responsibilities.
inline Vec gmm_score(const GmmSpec& gmm, const Vec& x, const Condition& c, double alpha_bar) {
    if (x.size() != gmm.dim) throw config_error("gmm_score: dimension mismatch");
    const auto mix = gmm.mixture_for(c);
    const Vec logps = detail::diffused_component_logps(mix, x, alpha_bar);
    const double lse = detail::log_sum_exp(logps);
    const double sqrt_ab = std::sqrt(alpha_bar);
    Vec score(x.size(), 0.0);
    for (std::size_t k = 0; k < mix.size(); ++k) {
        const double resp = std::exp(logps[k] - lse);
        if (resp == 0.0) continue;
        const double v = alpha_bar * mix[k].var + (1.0 - alpha_bar);
        for (std::size_t i = 0; i < x.size(); ++i)
            score[i] += resp * (sqrt_ab * mix[k].mean[i] - x[i]) / v;
    }
    return score;
}

// Mean of the clean mixture addressed by c.
inline Vec gmm_mean(const GmmSpec& gmm, const Condition& c) {
    const auto mix = gmm.mixture_for(c);
    Vec mu(gmm.dim, 0.0);
    for (const auto& comp : mix)
        for (std::size_t i = 0; i < gmm.dim; ++i) mu[i] += comp.weight * comp.mean[i];
    return mu;
}

// Covariance of the clean mixture (dense, row-major dim x dim).
inline std::vector<Vec> gmm_covariance(const GmmSpec& gmm, const Condition& c) {
    const auto mix = gmm.mixture_for(c);
    const Vec mu = gmm_mean(gmm, c);
    std::vector<Vec> cov(gmm.dim, Vec(gmm.dim, 0.0));
    for (const auto& comp : mix) {
        for (std::size_t i = 0; i < gmm.dim; ++i) {
            cov[i][i] += comp.weight * comp.var;
            for (std::size_t j = 0; j < gmm.dim; ++j)
                cov[i][j] += comp.weight * (comp.mean[i] - mu[i]) * (comp.mean[j] - mu[j]);
        }
    }
    return cov;
}

// Draw one clean sample from the mixture addressed by c.
inline Sample gmm_draw(const GmmSpec& gmm, const Condition& c, RngStream& rng) {
    const auto mix = gmm.mixture_for(c);
    Vec weights(mix.size());
    for (std::size_t k = 0; k < mix.size(); ++k) weights[k] = mix[k].weight;
    const std::size_t k = rng.categorical(weights);
    Sample s = Sample::zeros(gmm.dim);
    const double sd = std::sqrt(mix[k].var);
    for (std::size_t i = 0; i < gmm.dim; ++i) s.data[i] = mix[k].mean[i] + sd * rng.gaussian();
    return s;
}

// log p(c | x) under the clean mixture and class priors. Computed as
// -log1p(sum of odds against c) so near-saturated posteriors keep their
// sub-epsilon tail instead of flushing to exactly 0.
inline double gmm_log_class_posterior(const GmmSpec& gmm, const Vec& x, int cls) {
    gmm.check_class(cls);
    Vec joint(gmm.classes.size());
    for (std::size_t c = 0; c < gmm.classes.size(); ++c) {
        const double lp = gmm_log_density(gmm, x, Condition::cls(static_cast<int>(c)), 1.0);
        const double prior = gmm.classes[c].prior;
        joint[c] = (prior > 0.0 ? std::log(prior) : -std::numeric_limits<double>::infinity()) + lp;
    }
    double odds = 0.0;
    for (std::size_t c = 0; c < gmm.classes.size(); ++c)
        if (c != static_cast<std::size_t>(cls))
            odds += std::exp(joint[c] - joint[static_cast<std::size_t>(cls)]);
    return -std::log1p(odds);
}

} // namespace vci
