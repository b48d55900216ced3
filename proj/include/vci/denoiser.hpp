#pragma once

#include <concepts>
#include <map>
#include <utility>
#include <vector>

#include "vci/errors.hpp"
#include "vci/gmm.hpp"
#include "vci/sample.hpp"
#include "vci/schedule.hpp"

namespace vci {

struct GuidanceConfig {
    double w_src = 3.0;
    double w_tgt = 15.0;

    void validate() const {
        if (w_src < 0.0 || w_tgt < 0.0) throw config_error("guidance scales must be >= 0");
    }
};

struct NoisePrediction {
    Vec eps;
    int nfe_cost = 1; // elementary denoiser evaluations consumed
};

// Anything that predicts the injected noise for (x, t, c) under a schedule.
template <typename D>
concept NoisePredictor = requires(const D& d, const Sample& x, Timestep t, const Condition& c,
                                  const NoiseSchedule& sched) {
    { d.predict(x, t, c, sched) } -> std::convertible_to<NoisePrediction>;
};

// Exact noise predictor for a known mixture:
//   eps*(x, t, c) = -sqrt(1 - abar_t) * grad_x log p_t(x | c),
// the unique minimizer of the denoising objective for this data distribution.
inline NoisePrediction gmm_predict_noise(const GmmSpec& gmm, const Sample& x, Timestep t,
                                         const Condition& c, const NoiseSchedule& sched) {
    if (x.dim() != gmm.dim) throw config_error("gmm_predict_noise: dimension mismatch");
    if (t < 1 || t > sched.T())
        throw config_error("gmm_predict_noise: t=" + std::to_string(t) + " out of range");
    const double ab = sched.alpha_bar(t);
    const double coeff = -std::sqrt(1.0 - ab);
    Vec eps = gmm_score(gmm, x.data, c, ab);
    for (double& v : eps) v *= coeff;
    return {std::move(eps), 1};
}

struct GmmDenoiser {
    GmmSpec gmm;

    NoisePrediction predict(const Sample& x, Timestep t, const Condition& c,
                            const NoiseSchedule& sched) const {
        return gmm_predict_noise(gmm, x, t, c, sched);
    }
};

// Classifier-free guidance: eps_uncond + w * (eps_cond - eps_uncond).
// Short-circuits to a single branch when the combination is an identity.
template <NoisePredictor D>
NoisePrediction cfg_predict(const D& base, const Sample& x, Timestep t, const Condition& c,
                            double w, const NoiseSchedule& sched) {
    if (c.is_null() || w == 0.0) return base.predict(x, t, Condition::none(), sched);
    if (w == 1.0) return base.predict(x, t, c, sched);
    NoisePrediction uncond = base.predict(x, t, Condition::none(), sched);
    NoisePrediction cond = base.predict(x, t, c, sched);
    NoisePrediction out;
    out.eps = lincomb(1.0 - w, uncond.eps, w, cond.eps);
    out.nfe_cost = uncond.nfe_cost + cond.nfe_cost;
    return out;
}

// Finite-difference score oracle, independent of the closed-form path:
// central differences of log p_t per coordinate, scaled by -sqrt(1 - abar_t).
inline Vec score_oracle_fd(const GmmSpec& gmm, const Sample& x, Timestep t, const Condition& c,
                           double h, const NoiseSchedule& sched) {
    if (!(h > 0.0)) throw config_error("score_oracle_fd: h must be > 0");
    const double ab = sched.alpha_bar(t);
    Vec grad(x.dim());
    Vec probe = x.data;
    for (std::size_t i = 0; i < x.dim(); ++i) {
        const double xi = probe[i];
        probe[i] = xi + h;
        const double up = gmm_log_density(gmm, probe, c, ab);
        probe[i] = xi - h;
        const double dn = gmm_log_density(gmm, probe, c, ab);
        probe[i] = xi;
        grad[i] = (up - dn) / (2.0 * h);
    }
    const double coeff = -std::sqrt(1.0 - ab);
    for (double& v : grad) v *= coeff;
    return grad;
}

// Test fixture: replays recorded eps per timestep, ignoring x and c.
class ScriptedDenoiser {
public:
    explicit ScriptedDenoiser(std::vector<std::pair<Timestep, Vec>> tape) {
        for (auto& [t, eps] : tape) tape_[t] = std::move(eps);
    }

    NoisePrediction predict(const Sample&, Timestep t, const Condition&,
                            const NoiseSchedule&) const {
        auto it = tape_.find(t);
        if (it == tape_.end())
            throw fixture_error("scripted denoiser: no tape entry for t=" + std::to_string(t));
        return {it->second, 1};
    }

private:
    std::map<Timestep, Vec> tape_;
};

static_assert(NoisePredictor<GmmDenoiser>);
static_assert(NoisePredictor<ScriptedDenoiser>);

} // namespace vci
