#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <sys/utsname.h>

#include "vci/config.hpp"
#include "vci/editor.hpp"
#include "vci/errors.hpp"
#include "vci/metrics.hpp"

namespace vci {

// Canonical float formatting for every CSV cell: shortest round-trip form,
// identical across runs and worker counts.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string machine_metadata() {
    utsname u{};
    std::string desc = "unknown";
    if (uname(&u) == 0)
        desc = std::string(u.sysname) + " " + u.machine + " " + u.nodename;
    return desc + ", hw_concurrency=" + std::to_string(std::thread::hardware_concurrency());
}

// Runs f(0..n-1) on `workers` threads. Work is indexed, results must be
// written to per-index slots, so scheduling never affects output bytes.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& f) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    pool.reserve(count);
    for (int w = 0; w < count; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Per-run metric bundle shared by the sweep and the `edit` + `metrics` CLI
// path, so a single sweep cell reproduces the standalone invocation exactly.
struct RunMetrics {
    double feature = 0.0;
    double alignment = 0.0;
    double pcc = 0.0;
    long nfe = 0;
    double wall_time_s = 0.0;
};

inline RunMetrics compute_edit_metrics(const EditResult& res, const Sample& x0,
                                       const GmmSpec& gmm, const Condition& c_tgt,
                                       const FeatureEmbedder& embedder) {
    RunMetrics m;
    m.feature = feature_distance(embedder, res.output, x0);
    m.alignment = alignment_score(gmm, res.output, c_tgt);
    m.pcc = pearson_cc(res.output.data, x0.data);
    m.nfe = res.nfe;
    m.wall_time_s = res.wall_time_s;
    return m;
}

struct SweepRow {
    std::string method;
    std::string axis_kind; // "phi" or "t_start"
    double axis_value = 0.0;
    double feature_mean = 0.0, feature_std = 0.0;
    double alignment_mean = 0.0, alignment_std = 0.0;
    double frechet = 0.0, frechet_std = 0.0; // set-level, std fixed at 0
    double pcc_mean = 0.0, pcc_std = 0.0;
    double nfe_mean = 0.0, nfe_std = 0.0;
    double wall_mean = 0.0, wall_std = 0.0;
};

struct TradeoffTable {
    std::vector<SweepRow> rows;
};

struct BenchRow {
    std::string method;
    int steps = 0;
    long nfe = 0;
    int repetitions = 0;
    double wall_mean = 0.0, wall_std = 0.0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
};

// (x0 draw seed, edit seed) for sweep job `global_index` under a master seed.
inline std::pair<std::uint64_t, std::uint64_t> sweep_job_seeds(std::uint64_t master,
                                                               std::uint64_t global_index) {
    const std::uint64_t job = RngStream::derive_seed(master, global_index);
    return {RngStream::derive_seed(job, 0), RngStream::derive_seed(job, 1)};
}

namespace detail {

inline bool uses_phi_axis(EditMode m) {
    return m == EditMode::vci || m == EditMode::control_vci;
}

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
    double mu = 0.0;
    for (double x : v) mu += x;
    mu /= static_cast<double>(v.size());
    if (v.size() < 2) return {mu, 0.0};
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return {mu, std::sqrt(s / static_cast<double>(v.size() - 1))};
}

// Fréchet between two run-output sets; singleton sets degrade to point masses.
inline double set_frechet(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    auto build = [](const std::vector<Vec>& v) {
        if (v.size() >= 2) return EmbeddingSet::fit(v);
        std::vector<Vec> zero_cov(v.front().size(), Vec(v.front().size(), 0.0));
        return EmbeddingSet::from_moments(v.front(), zero_cov);
    };
    return frechet_distance(build(a), build(b));
}

struct SweepPoint {
    EditMode method;
    std::string axis_kind;
    double axis_value;
};

inline EditRequest make_sweep_request(const RunConfig& cfg, const NoiseSchedule& sched,
                                      const SweepPoint& pt) {
    EditRequest req;
    req.mode = pt.method;
    req.c_src = Condition::cls(cfg.edit.src_class);
    req.c_tgt = Condition::cls(cfg.edit.tgt_class);
    req.guidance = cfg.sweep.guidance;
    const int steps = uses_phi_axis(pt.method) ? cfg.edit.steps : cfg.sweep.baseline_steps;
    req.grid = select_timesteps(sched.T(), steps);
    if (uses_phi_axis(pt.method)) {
        req.phi = pt.axis_value;
    } else {
        req.phi = cfg.edit.phi;
        TStartSpec spec{cfg.sweep.t_start_unit, pt.axis_value};
        req.t_start = spec.resolve(sched.T(), req.grid);
    }
    return req;
}

} // namespace detail

// Fig.-2-style trade-off sweep: for every (method, axis value) runs
// seeds_per_point edits on fresh draws from the source class and aggregates
// all metrics. Deterministic given the master seed, regardless of workers.
inline TradeoffTable run_sweep(const RunConfig& cfg, std::uint64_t master_seed, int workers = 1) {
    const NoiseSchedule sched = cfg.schedule.build();
    const GmmDenoiser denoiser{cfg.gmm};
    const FeatureEmbedder embedder = FeatureEmbedder::make_default(
        cfg.embedder.seed, cfg.gmm.dim, cfg.embedder.depth, cfg.embedder.width_factor);
    const Condition c_tgt = Condition::cls(cfg.edit.tgt_class);

    std::vector<detail::SweepPoint> points;
    for (EditMode m : cfg.sweep.methods) {
        const bool phi_axis = detail::uses_phi_axis(m);
        const auto& axis = phi_axis ? cfg.sweep.phi_values : cfg.sweep.t_start_values;
        if (axis.empty())
            throw config_error("sweep: empty axis for method " + to_string(m));
        for (double v : axis) points.push_back({m, phi_axis ? "phi" : "t_start", v});
    }

    const std::size_t seeds = static_cast<std::size_t>(cfg.sweep.seeds_per_point);
    const std::size_t n_jobs = points.size() * seeds;

    struct JobResult {
        RunMetrics metrics;
        Vec input;
        Vec output;
    };
    std::vector<JobResult> results(n_jobs);

    parallel_for(n_jobs, workers, [&](std::size_t job) {
        const std::size_t point_idx = job / seeds;
        const auto& pt = points[point_idx];
        EditRequest req = detail::make_sweep_request(cfg, sched, pt);
        const auto [x0_seed, edit_seed] = sweep_job_seeds(master_seed, job);
        RngStream draw_rng(x0_seed);
        req.x0 = gmm_draw(cfg.gmm, Condition::cls(cfg.edit.src_class), draw_rng);
        req.seed = edit_seed;
        const EditResult res = run_edit(req, denoiser, sched);
        results[job] = {compute_edit_metrics(res, req.x0, cfg.gmm, c_tgt, embedder),
                        req.x0.data, res.output.data};
    });

    TradeoffTable table;
    for (std::size_t p = 0; p < points.size(); ++p) {
        std::vector<double> feat(seeds), align(seeds), pcc(seeds), nfe(seeds), wall(seeds);
        std::vector<Vec> inputs(seeds), outputs(seeds);
        for (std::size_t s = 0; s < seeds; ++s) {
            const auto& r = results[p * seeds + s];
            feat[s] = r.metrics.feature;
            align[s] = r.metrics.alignment;
            pcc[s] = r.metrics.pcc;
            nfe[s] = static_cast<double>(r.metrics.nfe);
            wall[s] = r.metrics.wall_time_s;
            inputs[s] = r.input;
            outputs[s] = r.output;
        }
        SweepRow row;
        row.method = to_string(points[p].method);
        row.axis_kind = points[p].axis_kind;
        row.axis_value = points[p].axis_value;
        std::tie(row.feature_mean, row.feature_std) = detail::mean_std(feat);
        std::tie(row.alignment_mean, row.alignment_std) = detail::mean_std(align);
        row.frechet = detail::set_frechet(outputs, inputs);
        std::tie(row.pcc_mean, row.pcc_std) = detail::mean_std(pcc);
        std::tie(row.nfe_mean, row.nfe_std) = detail::mean_std(nfe);
        std::tie(row.wall_mean, row.wall_std) = detail::mean_std(wall);
        table.rows.push_back(std::move(row));
    }
    return table;
}

// Deterministic CSV. Wall-clock columns are only emitted when with_timing is
// set; the default output is byte-identical across runs and worker counts.
inline void write_tradeoff_csv(const TradeoffTable& table, std::ostream& os,
                               std::uint64_t master_seed, bool with_timing = false) {
    os << "# tradeoff sweep, master_seed=" << master_seed << "\n";
    if (with_timing) os << "# machine: " << machine_metadata() << "\n";
    os << "method,axis_kind,axis_value,feature_mean,feature_std,alignment_mean,alignment_std,"
          "frechet,frechet_std,pcc_mean,pcc_std,nfe_mean,nfe_std";
    if (with_timing) os << ",wall_mean_s,wall_std_s";
    os << "\n";
    for (const auto& r : table.rows) {
        os << r.method << ',' << r.axis_kind << ',' << fmt_double(r.axis_value) << ','
           << fmt_double(r.feature_mean) << ',' << fmt_double(r.feature_std) << ','
           << fmt_double(r.alignment_mean) << ',' << fmt_double(r.alignment_std) << ','
           << fmt_double(r.frechet) << ',' << fmt_double(r.frechet_std) << ','
           << fmt_double(r.pcc_mean) << ',' << fmt_double(r.pcc_std) << ','
           << fmt_double(r.nfe_mean) << ',' << fmt_double(r.nfe_std);
        if (with_timing) os << ',' << fmt_double(r.wall_mean) << ',' << fmt_double(r.wall_std);
        os << "\n";
    }
}

inline void write_tradeoff_csv(const TradeoffTable& table, const std::string& path,
                               std::uint64_t master_seed, bool with_timing = false) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw format_error("cannot open " + path);
    write_tradeoff_csv(table, os, master_seed, with_timing);
}

namespace detail {

inline EditRequest make_bench_request(const RunConfig& cfg, const NoiseSchedule& sched,
                                      EditMode method) {
    EditRequest req;
    req.mode = method;
    req.c_src = Condition::cls(cfg.edit.src_class);
    req.c_tgt = Condition::cls(cfg.edit.tgt_class);
    req.guidance = cfg.edit.guidance;
    req.phi = cfg.edit.phi;
    if (uses_phi_axis(method)) {
        req.grid = select_timesteps(sched.T(), cfg.bench.vci_steps);
    } else {
        req.grid = select_timesteps(sched.T(), cfg.bench.baseline_steps);
        if (method == EditMode::ddim_inversion) {
            const double k = cfg.bench.ddim_invert_frac * cfg.bench.baseline_steps;
            TStartSpec spec{TStartSpec::Unit::grid_steps, k};
            req.t_start = spec.resolve(sched.T(), req.grid);
        } else {
            TStartSpec spec{TStartSpec::Unit::fraction_of_T, cfg.bench.sdedit_t_frac};
            req.t_start = spec.resolve(sched.T(), req.grid);
        }
    }
    return req;
}

inline int cfg_factor(double w, bool conditional) {
    if (!conditional || w == 0.0 || w == 1.0) return 1;
    return 2;
}

// NFE predicted from first principles, used to cross-check the counters.
inline long expected_nfe(const EditRequest& req) {
    const int f_src = cfg_factor(req.guidance.w_src, !req.c_src.is_null());
    const int f_tgt = cfg_factor(req.guidance.w_tgt, !req.c_tgt.is_null());
    switch (req.mode) {
        case EditMode::vci:
        case EditMode::control_vci:
            return static_cast<long>(req.grid.size()) * (f_src + f_tgt);
        case EditMode::sdedit: {
            long pairs = *req.t_start > 0 ? 1 : 0;
            for (Timestep t : req.grid.steps)
                if (t < *req.t_start) ++pairs;
            return pairs * f_tgt;
        }
        case EditMode::ddim_inversion: {
            long inverted = 0;
            for (Timestep t : req.grid.steps)
                if (t <= *req.t_start) ++inverted;
            return inverted * (f_src + f_tgt);
        }
    }
    return 0;
}

} // namespace detail

// Table-1-style efficiency benchmark: exact NFE accounting plus empirical
// wall times over >= 3 repetitions. Verifies the canonical budgets
// (ControlVCI at 8 steps with CFG = 32; 80%-inverted 200-step DDIM editing
// = 640, at least a 10x gap).
inline BenchReport bench(const RunConfig& cfg, std::uint64_t master_seed) {
    if (cfg.bench.repetitions < 3) throw config_error("bench: need >= 3 repetitions");
    const NoiseSchedule sched = cfg.schedule.build();
    const GmmDenoiser denoiser{cfg.gmm};

    BenchReport report;
    long nfe_control_vci = -1, nfe_ddim = -1;
    for (std::size_t m = 0; m < cfg.bench.methods.size(); ++m) {
        const EditMode method = cfg.bench.methods[m];
        EditRequest req = detail::make_bench_request(cfg, sched, method);
        const auto [x0_seed, edit_seed] = sweep_job_seeds(master_seed, m);
        RngStream draw_rng(x0_seed);
        req.x0 = gmm_draw(cfg.gmm, Condition::cls(cfg.edit.src_class), draw_rng);
        req.seed = edit_seed;

        std::vector<double> walls;
        long nfe = -1;
        for (int rep = 0; rep < cfg.bench.repetitions; ++rep) {
            const EditResult res = run_edit(req, denoiser, sched);
            if (nfe >= 0 && res.nfe != nfe)
                throw numeric_error("bench: NFE not constant across repetitions");
            nfe = res.nfe;
            walls.push_back(res.wall_time_s);
        }
        if (nfe != detail::expected_nfe(req))
            throw numeric_error("bench: measured NFE " + std::to_string(nfe) +
                                " != expected " + std::to_string(detail::expected_nfe(req)) +
                                " for " + to_string(method));

        BenchRow row;
        row.method = to_string(method);
        row.steps = static_cast<int>(req.grid.size());
        row.nfe = nfe;
        row.repetitions = cfg.bench.repetitions;
        std::tie(row.wall_mean, row.wall_std) = detail::mean_std(walls);
        report.rows.push_back(std::move(row));

        if (method == EditMode::control_vci && cfg.bench.vci_steps == 8) nfe_control_vci = nfe;
        if (method == EditMode::ddim_inversion && cfg.bench.baseline_steps == 200 &&
            cfg.bench.ddim_invert_frac == 0.8)
            nfe_ddim = nfe;
    }

    if (nfe_control_vci > 0 && cfg.edit.guidance.w_src != 1.0 && cfg.edit.guidance.w_tgt != 1.0 &&
        nfe_control_vci != 32)
        throw numeric_error("bench: ControlVCI(8 steps, CFG) NFE is " +
                            std::to_string(nfe_control_vci) + ", expected 32");
    if (nfe_ddim > 0 && cfg.edit.guidance.w_src != 1.0 && cfg.edit.guidance.w_tgt != 1.0) {
        if (nfe_ddim != 640)
            throw numeric_error("bench: DDIM-inversion(200 steps, 80%, CFG) NFE is " +
                                std::to_string(nfe_ddim) + ", expected 640");
        if (nfe_control_vci > 0 && nfe_ddim < 10 * nfe_control_vci)
            throw numeric_error("bench: NFE gap below 10x");
    }
    return report;
}

// Deterministic part of the report (method, steps, NFE).
inline void write_bench_csv(const BenchReport& report, std::ostream& os) {
    os << "method,steps,nfe,repetitions\n";
    for (const auto& r : report.rows)
        os << r.method << ',' << r.steps << ',' << r.nfe << ',' << r.repetitions << "\n";
}

inline void write_bench_csv(const BenchReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw format_error("cannot open " + path);
    write_bench_csv(report, os);
}

// Human-readable report including wall times; not part of any determinism
// contract, hence the machine metadata header.
inline void print_bench_report(const BenchReport& report, std::ostream& os) {
    os << "# machine: " << machine_metadata() << "\n";
    os << "method,steps,nfe,wall_mean_s,wall_std_s\n";
    for (const auto& r : report.rows)
        os << r.method << ',' << r.steps << ',' << r.nfe << ',' << fmt_double(r.wall_mean) << ','
           << fmt_double(r.wall_std) << "\n";
}

} // namespace vci
