// vci — command-line front end for the sampling/editing toolkit.
//
// Subcommands: schedule inspect, denoiser check, sample, invert, edit,
// metrics, sweep, bench. Exit codes: 0 success, 2 configuration error,
// 3 numeric/format error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "vci/vci.hpp"

namespace {

using namespace vci;

struct Options {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out;
    int workers = 1;

    // schedule overrides
    std::string schedule_kind;
    int T = 0;
    double beta_min = 0.0, beta_max = 0.0;

    // sampling / editing
    int steps = 0;
    std::string policy = "ddim";
    std::optional<int> cls;
    double guidance = 1.0;
    std::string input;
    std::string mode;
    std::optional<int> src_class, tgt_class;
    std::optional<double> phi, w_src, w_tgt;
    std::optional<double> t_start;
    std::string t_start_unit = "timestep";
    std::string log_steps;
    std::string timing_out;

    // metrics
    std::string kind;
    std::string a_path, b_path;
};

RunConfig load(const Options& opt) {
    return opt.config_path.empty() ? default_config() : load_config(opt.config_path);
}

NoiseSchedule make_schedule(const Options& opt, const RunConfig& cfg) {
    ScheduleConfig sc = cfg.schedule;
    if (!opt.schedule_kind.empty()) sc.kind = schedule_kind_from_string(opt.schedule_kind);
    if (opt.T > 0) sc.T = opt.T;
    if (opt.beta_min > 0.0) sc.beta_min = opt.beta_min;
    if (opt.beta_max > 0.0) sc.beta_max = opt.beta_max;
    return sc.build();
}

void require_out(const Options& opt) {
    if (opt.out.empty()) throw config_error("--out is required");
}

int cmd_schedule_inspect(const Options& opt) {
    const RunConfig cfg = load(opt);
    const NoiseSchedule sched = make_schedule(opt, cfg);
    std::cout << "t,beta,alpha_bar,posterior_var\n";
    for (Timestep t = 1; t <= sched.T(); ++t)
        std::cout << t << ',' << fmt_double(sched.beta(t)) << ',' << fmt_double(sched.alpha_bar(t))
                  << ',' << fmt_double(sched.posterior_var(t)) << "\n";
    return 0;
}

int cmd_denoiser_check(const Options& opt) {
    const RunConfig cfg = load(opt);
    const NoiseSchedule sched = make_schedule(opt, cfg);
    RngStream rng(opt.seed);

    double max_rel = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Sample x = rng.gaussian_sample(cfg.gmm.dim);
        const Timestep t = 1 + static_cast<Timestep>(rng.uniform() * sched.T());
        const int n_classes = static_cast<int>(cfg.gmm.classes.size());
        const int pick = static_cast<int>(rng.uniform() * (n_classes + 1));
        const Condition c = pick == n_classes ? Condition::none() : Condition::cls(pick);

        const NoisePrediction pred = gmm_predict_noise(cfg.gmm, x, t, c, sched);
        const Vec oracle = score_oracle_fd(cfg.gmm, x, t, c, 1e-4, sched);
        double sup = 0.0, scale = 0.0;
        for (std::size_t j = 0; j < pred.eps.size(); ++j) {
            sup = std::max(sup, std::fabs(pred.eps[j] - oracle[j]));
            scale = std::max(scale, std::fabs(pred.eps[j]));
        }
        max_rel = std::max(max_rel, sup / (1.0 + scale));
    }
    std::cout << "max_rel_error," << fmt_double(max_rel) << "\n";
    if (max_rel > 1e-4)
        throw numeric_error("denoiser check failed: max relative error " + fmt_double(max_rel));
    return 0;
}

int cmd_sample(const Options& opt) {
    require_out(opt);
    const RunConfig cfg = load(opt);
    const NoiseSchedule sched = make_schedule(opt, cfg);
    const GmmDenoiser denoiser{cfg.gmm};
    const int steps = opt.steps > 0 ? opt.steps : cfg.edit.steps;
    const TimestepGrid grid = select_timesteps(sched.T(), steps);
    const SigmaPolicy policy = sigma_policy_from_string(opt.policy);
    const Condition c = opt.cls ? Condition::cls(*opt.cls) : Condition::none();

    RngStream rng(opt.seed);
    auto [out, traj] = sample(denoiser, sched, grid, policy, c, opt.guidance, rng, cfg.gmm.dim);
    store_tensor(opt.out, out);
    std::cout << "nfe," << traj.nfe << "\n";
    return 0;
}

Timestep resolve_t_start(const Options& opt, const NoiseSchedule& sched, const TimestepGrid& grid,
                         const RunConfig& cfg) {
    if (!opt.t_start) return cfg.edit.t_start.resolve(sched.T(), grid);
    TStartSpec spec{TStartSpec::unit_from_string(opt.t_start_unit), *opt.t_start};
    return spec.resolve(sched.T(), grid);
}

int cmd_invert(const Options& opt) {
    require_out(opt);
    if (opt.input.empty()) throw config_error("--input is required");
    const RunConfig cfg = load(opt);
    const NoiseSchedule sched = make_schedule(opt, cfg);
    const GmmDenoiser denoiser{cfg.gmm};
    const int steps = opt.steps > 0 ? opt.steps : cfg.edit.steps;
    const TimestepGrid grid = select_timesteps(sched.T(), steps);
    const Timestep t_start = resolve_t_start(opt, sched, grid, cfg);
    const Condition c = opt.cls ? Condition::cls(*opt.cls) : Condition::none();

    const Sample x0 = load_tensor(opt.input);
    auto [latent, traj] = ddim_invert(denoiser, x0, c, grid, t_start, opt.guidance, sched);
    store_tensor(opt.out, latent);
    std::cout << "t_reached," << traj.states.back().first << "\nnfe," << traj.nfe << "\n";
    return 0;
}

int cmd_edit(const Options& opt) {
    require_out(opt);
    if (opt.input.empty()) throw config_error("--input is required");
    const RunConfig cfg = load(opt);
    const NoiseSchedule sched = make_schedule(opt, cfg);
    const GmmDenoiser denoiser{cfg.gmm};

    EditRequest req;
    req.mode = opt.mode.empty() ? cfg.edit.mode : edit_mode_from_string(opt.mode);
    req.x0 = load_tensor(opt.input);
    req.c_src = Condition::cls(opt.src_class.value_or(cfg.edit.src_class));
    req.c_tgt = Condition::cls(opt.tgt_class.value_or(cfg.edit.tgt_class));
    req.phi = opt.phi.value_or(cfg.edit.phi);
    req.guidance.w_src = opt.w_src.value_or(cfg.edit.guidance.w_src);
    req.guidance.w_tgt = opt.w_tgt.value_or(cfg.edit.guidance.w_tgt);
    const int steps = opt.steps > 0 ? opt.steps : cfg.edit.steps;
    req.grid = select_timesteps(sched.T(), steps);
    if (req.mode == EditMode::sdedit || req.mode == EditMode::ddim_inversion)
        req.t_start = resolve_t_start(opt, sched, req.grid, cfg);
    req.seed = opt.seed;

    const EditResult res = run_edit(req, denoiser, sched);
    store_tensor(opt.out, res.output);
    if (!opt.log_steps.empty()) {
        std::ofstream os(opt.log_steps, std::ios::trunc);
        if (!os) throw format_error("cannot open " + opt.log_steps);
        os << "t,delta_norm,cons_norm,edit_norm,edit_var\n";
        for (const auto& log : res.per_step_log)
            os << log.t << ',' << fmt_double(log.delta_norm) << ',' << fmt_double(log.cons_norm)
               << ',' << fmt_double(log.edit_norm) << ',' << fmt_double(log.edit_var) << "\n";
    }
    std::cout << "nfe," << res.nfe << "\n";
    return 0;
}

int cmd_metrics(const Options& opt) {
    const RunConfig cfg = load(opt);
    if (opt.a_path.empty()) throw config_error("--a is required");
    double value = 0.0;
    if (opt.kind == "frechet") {
        if (opt.b_path.empty()) throw config_error("--b is required for frechet");
        value = frechet_distance(EmbeddingSet::fit(load_tensor_set(opt.a_path)),
                                 EmbeddingSet::fit(load_tensor_set(opt.b_path)));
    } else if (opt.kind == "pcc") {
        if (opt.b_path.empty()) throw config_error("--b is required for pcc");
        value = pearson_cc(load_tensor(opt.a_path).data, load_tensor(opt.b_path).data);
    } else if (opt.kind == "feature") {
        if (opt.b_path.empty()) throw config_error("--b is required for feature");
        const Sample a = load_tensor(opt.a_path);
        const FeatureEmbedder embedder = FeatureEmbedder::make_default(
            cfg.embedder.seed, a.dim(), cfg.embedder.depth, cfg.embedder.width_factor);
        value = feature_distance(embedder, a, load_tensor(opt.b_path));
    } else if (opt.kind == "alignment") {
        if (!opt.cls) throw config_error("--class is required for alignment");
        value = alignment_score(cfg.gmm, load_tensor(opt.a_path), Condition::cls(*opt.cls));
    } else {
        throw config_error("unknown metric kind: " + opt.kind);
    }
    std::cout << opt.kind << ',' << fmt_double(value) << "\n";
    return 0;
}

int cmd_sweep(const Options& opt) {
    require_out(opt);
    const RunConfig cfg = load(opt);
    const TradeoffTable table = run_sweep(cfg, opt.seed, opt.workers);
    write_tradeoff_csv(table, opt.out, opt.seed, false);
    if (!opt.timing_out.empty()) write_tradeoff_csv(table, opt.timing_out, opt.seed, true);
    return 0;
}

int cmd_bench(const Options& opt) {
    const RunConfig cfg = load(opt);
    const BenchReport report = bench(cfg, opt.seed);
    if (!opt.out.empty()) write_bench_csv(report, opt.out);
    print_bench_report(report, std::cout);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffusion sampling and inversion-free editing toolkit"};
    app.require_subcommand(1);

    Options opt;
    app.add_option("--config", opt.config_path, "JSON run configuration")->capture_default_str();
    app.add_option("--seed", opt.seed, "master seed")->capture_default_str();
    app.add_option("--workers", opt.workers, "worker threads")->capture_default_str();

    auto add_schedule_flags = [&](CLI::App* cmd) {
        cmd->add_option("--schedule", opt.schedule_kind, "schedule kind: linear|scaled_linear|cosine");
        cmd->add_option("--T", opt.T, "horizon override");
        cmd->add_option("--beta-min", opt.beta_min, "beta_min override");
        cmd->add_option("--beta-max", opt.beta_max, "beta_max override");
    };

    CLI::App* schedule = app.add_subcommand("schedule", "noise schedule utilities");
    CLI::App* inspect = schedule->add_subcommand("inspect", "print t,beta,alpha_bar,posterior_var CSV");
    add_schedule_flags(inspect);
    schedule->require_subcommand(1);

    CLI::App* denoiser_cmd = app.add_subcommand("denoiser", "denoiser utilities");
    CLI::App* check = denoiser_cmd->add_subcommand("check", "oracle-equivalence suite; prints max error");
    add_schedule_flags(check);
    denoiser_cmd->require_subcommand(1);

    CLI::App* sample_cmd = app.add_subcommand("sample", "generate via the reverse sweep");
    add_schedule_flags(sample_cmd);
    sample_cmd->add_option("--steps", opt.steps, "grid size");
    sample_cmd->add_option("--policy", opt.policy, "ddpm|ddim|vci|eta:<v>")->capture_default_str();
    sample_cmd->add_option("--class", [&opt](const CLI::results_t& r) {
        opt.cls = std::stoi(r[0]);
        return true;
    }, "condition class (unconditional when absent)");
    sample_cmd->add_option("--guidance", opt.guidance, "CFG scale")->capture_default_str();
    sample_cmd->add_option("--out", opt.out, "output tensor file");

    CLI::App* invert_cmd = app.add_subcommand("invert", "deterministic DDIM inversion");
    add_schedule_flags(invert_cmd);
    invert_cmd->add_option("--input", opt.input, "input tensor file");
    invert_cmd->add_option("--steps", opt.steps, "grid size");
    invert_cmd->add_option("--class", [&opt](const CLI::results_t& r) {
        opt.cls = std::stoi(r[0]);
        return true;
    }, "inversion condition class");
    invert_cmd->add_option("--guidance", opt.guidance, "CFG scale")->capture_default_str();
    invert_cmd->add_option("--t-start", [&opt](const CLI::results_t& r) {
        opt.t_start = std::stod(r[0]);
        return true;
    }, "inversion stop point");
    invert_cmd->add_option("--t-start-unit", opt.t_start_unit, "timestep|grid|fraction")
        ->capture_default_str();
    invert_cmd->add_option("--out", opt.out, "latent tensor file");

    CLI::App* edit_cmd = app.add_subcommand("edit", "inversion-free or baseline editing");
    add_schedule_flags(edit_cmd);
    edit_cmd->add_option("--mode", opt.mode, "vci|control-vci|sdedit|ddim-inv");
    edit_cmd->add_option("--input", opt.input, "input tensor file");
    edit_cmd->add_option("--src-class", [&opt](const CLI::results_t& r) {
        opt.src_class = std::stoi(r[0]);
        return true;
    }, "source prompt class");
    edit_cmd->add_option("--tgt-class", [&opt](const CLI::results_t& r) {
        opt.tgt_class = std::stoi(r[0]);
        return true;
    }, "target prompt class");
    edit_cmd->add_option("--phi", [&opt](const CLI::results_t& r) {
        opt.phi = std::stod(r[0]);
        return true;
    }, "edit strength in [0,1]");
    edit_cmd->add_option("--w-src", [&opt](const CLI::results_t& r) {
        opt.w_src = std::stod(r[0]);
        return true;
    }, "source guidance scale");
    edit_cmd->add_option("--w-tgt", [&opt](const CLI::results_t& r) {
        opt.w_tgt = std::stod(r[0]);
        return true;
    }, "target guidance scale");
    edit_cmd->add_option("--steps", opt.steps, "grid size");
    edit_cmd->add_option("--t-start", [&opt](const CLI::results_t& r) {
        opt.t_start = std::stod(r[0]);
        return true;
    }, "noising/inversion start (sdedit, ddim-inv)");
    edit_cmd->add_option("--t-start-unit", opt.t_start_unit, "timestep|grid|fraction")
        ->capture_default_str();
    edit_cmd->add_option("--out", opt.out, "output tensor file");
    edit_cmd->add_option("--log-steps", opt.log_steps, "write per-step log CSV here");

    CLI::App* metrics_cmd = app.add_subcommand("metrics", "metric kernels; prints kind,value");
    metrics_cmd->add_option("--kind", opt.kind, "frechet|pcc|feature|alignment");
    metrics_cmd->add_option("--a", opt.a_path, "tensor file or directory");
    metrics_cmd->add_option("--b", opt.b_path, "tensor file or directory");
    metrics_cmd->add_option("--class", [&opt](const CLI::results_t& r) {
        opt.cls = std::stoi(r[0]);
        return true;
    }, "target class for alignment");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "phi / t_start trade-off sweep");
    sweep_cmd->add_option("--out", opt.out, "trade-off CSV (deterministic)");
    sweep_cmd->add_option("--timing-out", opt.timing_out, "CSV including wall-clock columns");

    CLI::App* bench_cmd = app.add_subcommand("bench", "NFE/latency benchmark");
    bench_cmd->add_option("--out", opt.out, "deterministic NFE CSV");

    // global flags (--config/--seed/--workers) may follow any subcommand
    for (CLI::App* sub : {schedule, inspect, denoiser_cmd, check, sample_cmd, invert_cmd, edit_cmd,
                          metrics_cmd, sweep_cmd, bench_cmd})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(schedule)) return cmd_schedule_inspect(opt);
        if (app.got_subcommand(denoiser_cmd)) return cmd_denoiser_check(opt);
        if (app.got_subcommand(sample_cmd)) return cmd_sample(opt);
        if (app.got_subcommand(invert_cmd)) return cmd_invert(opt);
        if (app.got_subcommand(edit_cmd)) return cmd_edit(opt);
        if (app.got_subcommand(metrics_cmd)) return cmd_metrics(opt);
        if (app.got_subcommand(sweep_cmd)) return cmd_sweep(opt);
        if (app.got_subcommand(bench_cmd)) return cmd_bench(opt);
        throw vci::config_error("no subcommand selected");
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const vci::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const vci::numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const vci::format_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
