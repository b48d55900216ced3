#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "vci/denoiser.hpp"
#include "vci/errors.hpp"
#include "vci/rng.hpp"
#include "vci/sample.hpp"
#include "vci/schedule.hpp"

namespace vci {

// Ordered (t, state) pairs of one run plus exact NFE accounting. Timesteps
// decrease for reverse sweeps, increase for inversion.
struct Trajectory {
    std::vector<std::pair<Timestep, Sample>> states;
    long nfe = 0;

    void record(Timestep t, const Sample& x) { states.emplace_back(t, x); }
};

// One raw forward transition: x_t = sqrt(alpha_t) x_{t-1} + sqrt(beta_t) noise.
inline Sample forward_step(const Sample& x_prev, Timestep t, const Sample& noise,
                           const NoiseSchedule& sched) {
    require_same_dim(x_prev, noise, "forward_step");
    Sample out = x_prev;
    out.data = lincomb(std::sqrt(sched.alpha(t)), x_prev.data, std::sqrt(sched.beta(t)), noise.data);
    return out;
}

// Closed-form marginal: x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) noise.
inline Sample forward_marginal(const Sample& x0, Timestep t, const Sample& noise,
                               const NoiseSchedule& sched) {
    require_same_dim(x0, noise, "forward_marginal");
    if (t < 1 || t > sched.T())
        throw config_error("forward_marginal: t out of range");
    const double ab = sched.alpha_bar(t);
    Sample out = x0;
    out.data = lincomb(std::sqrt(ab), x0.data, std::sqrt(1.0 - ab), noise.data);
    return out;
}

// Clean-sample estimate: (x_t - sqrt(1 - abar_t) eps) / sqrt(abar_t).
inline Sample estimate_x0(const Sample& x_t, Timestep t, const Vec& eps,
                          const NoiseSchedule& sched) {
    require_same_dim(x_t.data, eps, "estimate_x0");
    const double ab = sched.alpha_bar(t);
    const double c = std::sqrt(1.0 - ab);
    const double inv = 1.0 / std::sqrt(ab);
    Sample out = x_t;
    for (std::size_t i = 0; i < out.dim(); ++i) out.data[i] = (x_t.data[i] - c * eps[i]) * inv;
    return out;
}

// Directional coefficient sqrt(1 - abar_prev - sigma^2). Radicands within
// rounding error of zero count as zero, so sigma = sqrt(1 - abar_prev)
// cancels the term exactly; anything more negative is a policy mistake.
inline double direction_coeff(double alpha_bar_prev, double sigma_t) {
    const double radicand = 1.0 - alpha_bar_prev - sigma_t * sigma_t;
    if (radicand <= 0.0) {
        if (radicand < -1e-12)
            throw numeric_error("reverse_update: sigma too large for this step (radicand " +
                                std::to_string(radicand) + ")");
        return 0.0;
    }
    if (radicand < 1e-14) return 0.0;
    return std::sqrt(radicand);
}

// Generalized reverse update
//   x_prev = sqrt(abar_prev) x0_hat + sqrt(1 - abar_prev - sigma^2) eps + sigma z.
inline Sample reverse_update(const Sample& x_t, Timestep t, Timestep prev, const Vec& eps,
                             double sigma_t, const Sample& fresh_noise,
                             const NoiseSchedule& sched) {
    require_same_dim(x_t.data, eps, "reverse_update");
    require_same_dim(x_t, fresh_noise, "reverse_update");
    if (t <= prev || prev < 0) throw config_error("reverse_update: need t > prev >= 0");

    const double ab_prev = sched.alpha_bar(prev);
    const double dir = direction_coeff(ab_prev, sigma_t);
    const Sample x0_hat = estimate_x0(x_t, t, eps, sched);
    const double mean_c = std::sqrt(ab_prev);

    Sample out = x_t;
    for (std::size_t i = 0; i < out.dim(); ++i)
        out.data[i] = mean_c * x0_hat.data[i] + dir * eps[i] + sigma_t * fresh_noise.data[i];
    return out;
}

// Full reverse sweep from x_T ~ N(0, I) along the grid. Fresh noise is drawn
// only for steps with sigma > 0, one draw per coordinate in coordinate order.
template <NoisePredictor D>
std::pair<Sample, Trajectory> sample(const D& denoiser, const NoiseSchedule& sched,
                                     const TimestepGrid& grid, const SigmaPolicy& policy,
                                     const Condition& c, double guidance, RngStream& rng,
                                     std::size_t dim) {
    if (grid.steps.empty()) throw config_error("sample: empty timestep grid");
    if (grid.steps.front() > sched.T()) throw config_error("sample: grid exceeds horizon");

    Trajectory traj;
    Sample x = rng.gaussian_sample(dim);
    traj.record(grid.at(0), x);

    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Timestep t = grid.at(i);
        const Timestep prev = grid.prev(i);
        NoisePrediction pred = cfg_predict(denoiser, x, t, c, guidance, sched);
        traj.nfe += pred.nfe_cost;
        const double sig = sigma(sched, t, prev, policy);
        Sample z = sig > 0.0 ? rng.gaussian_sample(dim) : Sample::zeros(dim);
        x = reverse_update(x, t, prev, pred.eps, sig, z, sched);
        traj.record(prev, x);
    }
    return {std::move(x), std::move(traj)};
}

// Deterministic sweep from a given latent at grid position `start_index`
// down to t = 0 (used after inversion or partial noising).
template <NoisePredictor D>
std::pair<Sample, Trajectory> sample_from(const D& denoiser, const NoiseSchedule& sched,
                                          const TimestepGrid& grid, std::size_t start_index,
                                          const SigmaPolicy& policy, const Condition& c,
                                          double guidance, Sample x, RngStream& rng) {
    Trajectory traj;
    traj.record(grid.at(start_index), x);
    for (std::size_t i = start_index; i < grid.size(); ++i) {
        const Timestep t = grid.at(i);
        const Timestep prev = grid.prev(i);
        NoisePrediction pred = cfg_predict(denoiser, x, t, c, guidance, sched);
        traj.nfe += pred.nfe_cost;
        const double sig = sigma(sched, t, prev, policy);
        Sample z = sig > 0.0 ? rng.gaussian_sample(x.dim()) : Sample::zeros(x.dim());
        x = reverse_update(x, t, prev, pred.eps, sig, z, sched);
        traj.record(prev, x);
    }
    return {std::move(x), std::move(traj)};
}

// Deterministic DDIM inversion: integrate the sigma = 0 update in increasing
// t, evaluating eps at the current (less noisy) state. Inverts every grid
// entry <= t_start and returns the latent at the highest such timestep.
template <NoisePredictor D>
std::pair<Sample, Trajectory> ddim_invert(const D& denoiser, const Sample& x0, const Condition& c,
                                          const TimestepGrid& grid, Timestep t_start,
                                          double guidance, const NoiseSchedule& sched) {
    if (t_start > sched.T()) throw config_error("ddim_invert: t_start exceeds horizon");

    Trajectory traj;
    Sample x = x0;
    traj.record(0, x);
    Timestep prev = 0;
    for (std::size_t i = grid.size(); i-- > 0;) { // ascending t
        const Timestep t = grid.at(i);
        if (t > t_start) break;
        NoisePrediction pred = cfg_predict(denoiser, x, t, c, guidance, sched);
        traj.nfe += pred.nfe_cost;
        const double ab_t = sched.alpha_bar(t);
        const double ab_prev = sched.alpha_bar(prev);
        const double ratio = std::sqrt(ab_t / ab_prev);
        const double dir = std::sqrt(1.0 - ab_t) - ratio * std::sqrt(1.0 - ab_prev);
        for (std::size_t j = 0; j < x.dim(); ++j)
            x.data[j] = ratio * x.data[j] + dir * pred.eps[j];
        prev = t;
        traj.record(t, x);
    }
    return {std::move(x), std::move(traj)};
}

} // namespace vci
