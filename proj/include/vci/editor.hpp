#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vci/denoiser.hpp"
#include "vci/errors.hpp"
#include "vci/sampler.hpp"

namespace vci {

enum class EditMode { vci, control_vci, sdedit, ddim_inversion };

inline EditMode edit_mode_from_string(const std::string& s) {
    if (s == "vci") return EditMode::vci;
    if (s == "control-vci" || s == "control_vci") return EditMode::control_vci;
    if (s == "sdedit") return EditMode::sdedit;
    if (s == "ddim-inv" || s == "ddim_inversion") return EditMode::ddim_inversion;
    throw config_error("unknown edit mode: " + s);
}

inline std::string to_string(EditMode m) {
    switch (m) {
        case EditMode::vci: return "vci";
        case EditMode::control_vci: return "control_vci";
        case EditMode::sdedit: return "sdedit";
        case EditMode::ddim_inversion: return "ddim_inversion";
    }
    return "?";
}

// A full editing job: the input, the prompt pair, and every knob the loop needs.
struct EditRequest {
    Sample x0;
    Condition c_src;
    Condition c_tgt;
    double phi = 0.61;
    EditMode mode = EditMode::control_vci;
    TimestepGrid grid;
    GuidanceConfig guidance;
    std::optional<Timestep> t_start; // sdedit / ddim_inversion only
    std::uint64_t seed = 0;

    void validate(const NoiseSchedule& sched) const {
        if (!(phi >= 0.0 && phi <= 1.0)) throw config_error("edit: phi must lie in [0,1]");
        guidance.validate();
        if (grid.steps.empty()) throw config_error("edit: empty timestep grid");
        if (grid.steps.front() > sched.T()) throw config_error("edit: grid exceeds horizon");
        const bool needs_tstart = mode == EditMode::sdedit || mode == EditMode::ddim_inversion;
        if (needs_tstart && !t_start)
            throw config_error("edit: t_start required for " + to_string(mode));
        if (t_start && *t_start > sched.T()) throw config_error("edit: t_start exceeds horizon");
        if (t_start && *t_start < 0) throw config_error("edit: t_start must be >= 0");
    }
};

// Paired latents of the two editing branches at one noise level. Both start
// from the same draw, so x_src == x_tgt at initialization.
struct BranchState {
    Sample x_src;
    Sample x_tgt;
    Timestep t;
};

struct StepLog {
    Timestep t;
    double delta_norm;
    double cons_norm;
    double edit_norm;
    double edit_var; // empirical second moment check on eps_edit
};

struct EditResult {
    Sample output;
    long nfe = 0;
    double wall_time_s = 0.0;
    std::vector<StepLog> per_step_log;
};

// The consistent noise that makes the consistency function return x0 exactly:
//   eps_cons = (x_t - sqrt(abar_t) x0) / sqrt(1 - abar_t).
inline Vec consistent_noise(const Sample& x_t_src, const Sample& x0, Timestep t,
                            const NoiseSchedule& sched) {
    require_same_dim(x_t_src, x0, "consistent_noise");
    if (t < 1 || t > sched.T())
        throw config_error("consistent_noise: t=" + std::to_string(t) + " outside [1,T]");
    const double ab = sched.alpha_bar(t);
    const double s = std::sqrt(ab);
    const double inv = 1.0 / std::sqrt(1.0 - ab);
    Vec eps(x_t_src.dim());
    for (std::size_t i = 0; i < eps.size(); ++i)
        eps[i] = (x_t_src.data[i] - s * x0.data[i]) * inv;
    return eps;
}

// Edit-noise blends:
//   control_vci: (phi / sqrt(2)) delta + sqrt(1 - phi^2) eps_cons
//                (variance-matched; phi = 0 reproduces eps_cons bit-for-bit)
//   vci:         delta + eps_cons (phi ignored)
inline Vec blend_edit_noise(const Vec& delta, const Vec& eps_cons, double phi, EditMode mode) {
    require_same_dim(delta, eps_cons, "blend_edit_noise");
    if (mode == EditMode::vci) return lincomb(1.0, delta, 1.0, eps_cons);
    if (mode != EditMode::control_vci)
        throw config_error("blend_edit_noise: mode must be vci or control_vci");
    if (!(phi >= 0.0 && phi <= 1.0)) throw config_error("blend_edit_noise: phi outside [0,1]");
    const double cd = phi / std::sqrt(2.0);
    const double cc = std::sqrt(1.0 - phi * phi);
    return lincomb(cd, delta, cc, eps_cons);
}

namespace detail {

inline StepLog make_step_log(Timestep t, const Vec& delta, const Vec& cons, const Vec& edit) {
    StepLog log;
    log.t = t;
    log.delta_norm = l2_norm(delta);
    log.cons_norm = l2_norm(cons);
    log.edit_norm = l2_norm(edit);
    log.edit_var = edit.size() > 1 ? variance(edit) : 0.0;
    return log;
}

class WallTimer {
public:
    WallTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

} // namespace detail

// Dual-branch inversion-free editing loop. Both branches start from the same
// Gaussian init and share one fresh draw z per step; the source branch is
// advanced analytically as sqrt(abar_prev) x0 + sqrt(1 - abar_prev) z, never
// through the denoiser, so consistent_noise recovers the injected z exactly.
template <NoisePredictor D>
EditResult vci_edit(const EditRequest& req, const D& denoiser, const NoiseSchedule& sched) {
    if (req.mode != EditMode::vci && req.mode != EditMode::control_vci)
        throw config_error("vci_edit: mode must be vci or control_vci");
    req.validate(sched);

    detail::WallTimer timer;
    RngStream rng(req.seed);
    const std::size_t n = req.x0.dim();

    Sample x_src = rng.gaussian_sample(n);
    Sample x_tgt = x_src;

    EditResult res;
    for (std::size_t i = 0; i < req.grid.size(); ++i) {
        const Timestep t = req.grid.at(i);
        const Timestep prev = req.grid.prev(i);

        NoisePrediction eps_src = cfg_predict(denoiser, x_src, t, req.c_src, req.guidance.w_src, sched);
        NoisePrediction eps_tgt = cfg_predict(denoiser, x_tgt, t, req.c_tgt, req.guidance.w_tgt, sched);
        res.nfe += eps_src.nfe_cost + eps_tgt.nfe_cost;

        const Vec delta = sub(eps_tgt.eps, eps_src.eps);
        const Vec eps_cons = consistent_noise(x_src, req.x0, t, sched);
        const Vec eps_edit = blend_edit_noise(delta, eps_cons, req.phi, req.mode);
        res.per_step_log.push_back(detail::make_step_log(t, delta, eps_cons, eps_edit));

        const Sample f_tgt = estimate_x0(x_tgt, t, eps_edit, sched);
        const double a = std::sqrt(sched.alpha_bar(prev));
        const double b = std::sqrt(1.0 - sched.alpha_bar(prev));
        const Sample z = prev > 0 ? rng.gaussian_sample(n) : Sample::zeros(n);
        x_tgt.data = lincomb(a, f_tgt.data, b, z.data);
        x_src.data = lincomb(a, req.x0.data, b, z.data);
    }

    res.output = std::move(x_tgt);
    res.output.shape = req.x0.shape;
    res.wall_time_s = timer.seconds();
    return res;
}

// SDEdit baseline: noise the input to t_start with one fresh draw, then run
// the deterministic sampler down the grid portion below t_start under c_tgt.
template <NoisePredictor D>
EditResult sdedit(const EditRequest& req, const D& denoiser, const NoiseSchedule& sched) {
    if (req.mode != EditMode::sdedit) throw config_error("sdedit: wrong mode");
    req.validate(sched);
    const Timestep t_start = *req.t_start;

    detail::WallTimer timer;
    EditResult res;

    if (t_start == 0) { // no noising, no steps
        res.output = req.x0;
        res.wall_time_s = timer.seconds();
        return res;
    }

    RngStream rng(req.seed);
    Sample x = forward_marginal(req.x0, t_start, rng.gaussian_sample(req.x0.dim()), sched);

    // Sweep pairs: t_start -> first grid entry strictly below it, then onward.
    std::vector<Timestep> sweep{t_start};
    for (Timestep t : req.grid.steps)
        if (t < t_start) sweep.push_back(t);

    const SigmaPolicy policy = SigmaPolicy::ddim();
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        const Timestep t = sweep[i];
        const Timestep prev = i + 1 < sweep.size() ? sweep[i + 1] : 0;
        NoisePrediction pred = cfg_predict(denoiser, x, t, req.c_tgt, req.guidance.w_tgt, sched);
        res.nfe += pred.nfe_cost;
        const double sig = sigma(sched, t, prev, policy);
        x = reverse_update(x, t, prev, pred.eps, sig, Sample::zeros(x.dim()), sched);
    }

    res.output = std::move(x);
    res.output.shape = req.x0.shape;
    res.wall_time_s = timer.seconds();
    return res;
}

// DDIM partial-inversion baseline: invert with c_src up to t_start, then
// resample deterministically down with c_tgt.
template <NoisePredictor D>
EditResult ddim_inversion_edit(const EditRequest& req, const D& denoiser,
                               const NoiseSchedule& sched) {
    if (req.mode != EditMode::ddim_inversion) throw config_error("ddim_inversion_edit: wrong mode");
    req.validate(sched);
    const Timestep t_start = *req.t_start;

    detail::WallTimer timer;
    EditResult res;

    auto [latent, inv_traj] =
        ddim_invert(denoiser, req.x0, req.c_src, req.grid, t_start, req.guidance.w_src, sched);
    res.nfe += inv_traj.nfe;

    const Timestep reached = inv_traj.states.back().first;
    if (reached == 0) { // nothing inverted; no-op edit
        res.output = req.x0;
        res.wall_time_s = timer.seconds();
        return res;
    }

    std::size_t start_index = 0;
    while (req.grid.at(start_index) != reached) ++start_index;

    RngStream rng(req.seed);
    auto [out, traj] = sample_from(denoiser, sched, req.grid, start_index, SigmaPolicy::ddim(),
                                   req.c_tgt, req.guidance.w_tgt, std::move(latent), rng);
    res.nfe += traj.nfe;
    res.output = std::move(out);
    res.output.shape = req.x0.shape;
    res.wall_time_s = timer.seconds();
    return res;
}

// Mode dispatch for the harness and CLI.
template <NoisePredictor D>
EditResult run_edit(const EditRequest& req, const D& denoiser, const NoiseSchedule& sched) {
    switch (req.mode) {
        case EditMode::vci:
        case EditMode::control_vci: return vci_edit(req, denoiser, sched);
        case EditMode::sdedit: return sdedit(req, denoiser, sched);
        case EditMode::ddim_inversion: return ddim_inversion_edit(req, denoiser, sched);
    }
    throw config_error("run_edit: unknown mode");
}

} // namespace vci
