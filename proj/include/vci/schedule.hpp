#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vci/errors.hpp"

namespace vci {

using Timestep = int;

enum class ScheduleKind { linear, scaled_linear, cosine };

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "scaled_linear") return ScheduleKind::scaled_linear;
    if (s == "cosine") return ScheduleKind::cosine;
    throw config_error("unknown schedule kind: " + s);
}

// Variance schedule over a horizon T. Timesteps are 1-based; t = 0 denotes
// clean data, with the convention alpha_bar(0) = 1 so the final reverse step
// lands exactly on x_0 and posterior_var(1) = 0.
class NoiseSchedule {
public:
    NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
        const std::size_t T = betas_.size();
        if (T == 0) throw config_error("schedule: T must be >= 1");
        alphas_.resize(T);
        alpha_bars_.resize(T);
        posterior_vars_.resize(T);
        double prod = 1.0;
        for (std::size_t i = 0; i < T; ++i) {
            const double b = betas_[i];
            if (!(b > 0.0 && b < 1.0))
                throw config_error("schedule: beta out of (0,1) at t=" + std::to_string(i + 1));
            alphas_[i] = 1.0 - b;
            const double prev = prod;
            prod *= alphas_[i];
            alpha_bars_[i] = prod;
            posterior_vars_[i] = (1.0 - prev) / (1.0 - prod) * b;
        }
    }

    Timestep T() const { return static_cast<Timestep>(betas_.size()); }

    double beta(Timestep t) const { check(t); return betas_[t - 1]; }
    double alpha(Timestep t) const { check(t); return alphas_[t - 1]; }

    // alpha_bar(0) == 1 by convention.
    double alpha_bar(Timestep t) const {
        if (t == 0) return 1.0;
        check(t);
        return alpha_bars_[t - 1];
    }

    // beta-tilde: posterior variance of q(x_{t-1} | x_t, x_0).
    double posterior_var(Timestep t) const { check(t); return posterior_vars_[t - 1]; }

    const std::vector<double>& betas() const { return betas_; }
    const std::vector<double>& alpha_bars() const { return alpha_bars_; }

private:
    void check(Timestep t) const {
        if (t < 1 || t > T())
            throw config_error("schedule: timestep " + std::to_string(t) + " outside [1," +
                               std::to_string(T()) + "]");
    }

    std::vector<double> betas_;
    std::vector<double> alphas_;
    std::vector<double> alpha_bars_;
    std::vector<double> posterior_vars_;
};

inline NoiseSchedule build_schedule(ScheduleKind kind, Timestep T, double beta_min, double beta_max) {
    if (T < 1) throw config_error("build_schedule: T must be >= 1");
    if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0))
        throw config_error("build_schedule: need 0 < beta_min <= beta_max < 1");

    std::vector<double> betas(static_cast<std::size_t>(T));
    auto linspace_at = [T](double lo, double hi, Timestep i) {
        if (T == 1) return lo;
        return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(T - 1);
    };
    switch (kind) {
        case ScheduleKind::linear:
            for (Timestep i = 0; i < T; ++i) betas[i] = linspace_at(beta_min, beta_max, i);
            break;
        case ScheduleKind::scaled_linear:
            for (Timestep i = 0; i < T; ++i) {
                const double s = linspace_at(std::sqrt(beta_min), std::sqrt(beta_max), i);
                betas[i] = s * s;
            }
            break;
        case ScheduleKind::cosine: {
            // squaredcos_cap_v2: beta_t = 1 - abar(t/T)/abar((t-1)/T), capped.
            auto abar = [](double u) {
                const double s = 0.008;
                const double c = std::cos((u + s) / (1.0 + s) * 1.5707963267948966);
                return c * c;
            };
            for (Timestep i = 0; i < T; ++i) {
                const double t1 = static_cast<double>(i) / T;
                const double t2 = static_cast<double>(i + 1) / T;
                betas[i] = std::min(1.0 - abar(t2) / abar(t1), 0.999);
            }
            break;
        }
    }
    return NoiseSchedule(std::move(betas));
}

// Default DDPM-convention schedule used when a config does not name one.
inline NoiseSchedule default_schedule() {
    return build_schedule(ScheduleKind::linear, 1000, 1e-4, 0.02);
}

// Strictly decreasing few-step grid over [1, T]. The reverse sweep visits
// these in order; the step after the last entry always targets t = 0.
struct TimestepGrid {
    std::vector<Timestep> steps; // t_K > ... > t_1

    std::size_t size() const { return steps.size(); }
    Timestep at(std::size_t i) const { return steps[i]; }

    // Timestep the sweep moves to after position i (0 past the end).
    Timestep prev(std::size_t i) const { return i + 1 < steps.size() ? steps[i + 1] : 0; }
};

// Even spacing over [1, T] including both endpoints, rounded to nearest.
// Deterministic and idempotent for fixed (T, n_steps).
inline TimestepGrid select_timesteps(Timestep T, int n_steps) {
    if (n_steps < 1) throw config_error("select_timesteps: n_steps must be >= 1");
    if (n_steps > T)
        throw config_error("select_timesteps: n_steps " + std::to_string(n_steps) +
                           " exceeds T " + std::to_string(T));
    TimestepGrid grid;
    grid.steps.resize(static_cast<std::size_t>(n_steps));
    if (n_steps == 1) {
        grid.steps[0] = T;
        return grid;
    }
    for (int k = 0; k < n_steps; ++k) {
        const double pos = 1.0 + static_cast<double>(T - 1) * k / (n_steps - 1);
        grid.steps[static_cast<std::size_t>(n_steps - 1 - k)] =
            static_cast<Timestep>(std::llround(pos));
    }
    return grid;
}

// Sampling-variance policy for the generalized reverse update.
//   ddim: sigma = 0 (deterministic trajectory)
//   ddpm: sigma^2 = beta-tilde for the (t, prev) pair
//   vci:  sigma^2 = 1 - alpha_bar(prev), cancelling the directional term
//   eta:  sigma = eta * sqrt(beta-tilde)
struct SigmaPolicy {
    enum class Mode { ddpm, ddim, vci, eta };
    Mode mode = Mode::ddim;
    double eta = 0.0;

    static SigmaPolicy ddpm() { return {Mode::ddpm, 0.0}; }
    static SigmaPolicy ddim() { return {Mode::ddim, 0.0}; }
    static SigmaPolicy vci() { return {Mode::vci, 0.0}; }
    static SigmaPolicy with_eta(double e) { return {Mode::eta, e}; }

    std::string name() const {
        switch (mode) {
            case Mode::ddpm: return "ddpm";
            case Mode::ddim: return "ddim";
            case Mode::vci: return "vci";
            case Mode::eta: return "eta:" + std::to_string(eta);
        }
        return "?";
    }
};

inline SigmaPolicy sigma_policy_from_string(const std::string& s) {
    if (s == "ddpm") return SigmaPolicy::ddpm();
    if (s == "ddim") return SigmaPolicy::ddim();
    if (s == "vci") return SigmaPolicy::vci();
    if (s.rfind("eta:", 0) == 0) {
        try {
            return SigmaPolicy::with_eta(std::stod(s.substr(4)));
        } catch (const std::exception&) {
            throw config_error("bad eta value in policy: " + s);
        }
    }
    throw config_error("unknown sigma policy: " + s);
}

// Sigma for one reverse step t -> prev. For grid pairs wider than one raw
// timestep, beta-tilde generalizes to
//   ((1 - abar_prev) / (1 - abar_t)) * (1 - abar_t / abar_prev),
// which reduces to the schedule's posterior variance when prev == t-1.
inline double sigma(const NoiseSchedule& sched, Timestep t, Timestep prev, const SigmaPolicy& policy) {
    if (t <= prev || prev < 0)
        throw config_error("sigma: need t > prev >= 0, got t=" + std::to_string(t) +
                           " prev=" + std::to_string(prev));
    const double ab_t = sched.alpha_bar(t);
    const double ab_prev = sched.alpha_bar(prev);
    switch (policy.mode) {
        case SigmaPolicy::Mode::ddim:
            return 0.0;
        case SigmaPolicy::Mode::vci:
            return std::sqrt(1.0 - ab_prev);
        case SigmaPolicy::Mode::ddpm:
        case SigmaPolicy::Mode::eta: {
            const double beta_eff = 1.0 - ab_t / ab_prev;
            const double var = (1.0 - ab_prev) / (1.0 - ab_t) * beta_eff;
            const double sd = std::sqrt(std::max(var, 0.0));
            return policy.mode == SigmaPolicy::Mode::ddpm ? sd : policy.eta * sd;
        }
    }
    return 0.0;
}

} // namespace vci
