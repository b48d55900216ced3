#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "vci/editor.hpp"
#include "vci/errors.hpp"
#include "vci/gmm.hpp"
#include "vci/schedule.hpp"

namespace vci {

struct ScheduleConfig {
    ScheduleKind kind = ScheduleKind::linear;
    Timestep T = 1000;
    double beta_min = 1e-4;
    double beta_max = 0.02;

    NoiseSchedule build() const { return build_schedule(kind, T, beta_min, beta_max); }
};

// Where a t_start value lives: a raw timestep, a count of grid steps, or a
// fraction of the horizon. Table-style "T_start=80 on a 100-step grid"
// corresponds to unit `grid`.
struct TStartSpec {
    enum class Unit { timestep, grid_steps, fraction_of_T };
    Unit unit = Unit::fraction_of_T;
    double value = 0.5;

    Timestep resolve(Timestep T, const TimestepGrid& grid) const {
        switch (unit) {
            case Unit::timestep: {
                const auto t = static_cast<Timestep>(std::llround(value));
                if (t < 0 || t > T) throw config_error("t_start timestep outside [0,T]");
                return t;
            }
            case Unit::grid_steps: {
                const auto k = static_cast<std::size_t>(std::llround(value));
                if (k > grid.size()) throw config_error("t_start grid count exceeds grid size");
                if (k == 0) return 0;
                return grid.steps[grid.size() - k]; // k-th smallest grid entry
            }
            case Unit::fraction_of_T: {
                if (value < 0.0 || value > 1.0) throw config_error("t_start fraction outside [0,1]");
                return static_cast<Timestep>(std::llround(value * T));
            }
        }
        throw config_error("bad t_start unit");
    }

    static Unit unit_from_string(const std::string& s) {
        if (s == "timestep") return Unit::timestep;
        if (s == "grid") return Unit::grid_steps;
        if (s == "fraction") return Unit::fraction_of_T;
        throw config_error("unknown t_start unit: " + s);
    }
};

struct EditDefaults {
    EditMode mode = EditMode::control_vci;
    double phi = 0.61;
    GuidanceConfig guidance{3.0, 15.0};
    int steps = 8;
    TStartSpec t_start{TStartSpec::Unit::fraction_of_T, 0.5};
    int src_class = 0;
    int tgt_class = 1;
};

struct SweepConfig {
    std::vector<double> phi_values{0.10, 0.25, 0.40, 0.55, 0.70, 0.85, 0.95};
    std::vector<double> t_start_values;
    TStartSpec::Unit t_start_unit = TStartSpec::Unit::fraction_of_T;
    int seeds_per_point = 100;
    int baseline_steps = 50; // grid size for the t_start-controlled methods
    // Guidance used inside the sweep. The exact-score denoiser realizes CFG
    // as a literal extrapolation of class means by w, so the trade-off curve
    // only resolves at modest scales; large w saturates both metric axes.
    GuidanceConfig guidance{1.0, 1.5};
    std::vector<EditMode> methods{EditMode::control_vci};
};

struct EmbedderConfig {
    std::uint64_t seed = 7;
    std::size_t depth = 3;
    std::size_t width_factor = 2;
};

struct BenchConfig {
    int repetitions = 5;
    int vci_steps = 8;
    int baseline_steps = 200;
    double ddim_invert_frac = 0.8; // fraction of grid steps inverted
    double sdedit_t_frac = 0.5;    // fraction of T
    std::vector<EditMode> methods{EditMode::control_vci, EditMode::vci, EditMode::sdedit,
                                  EditMode::ddim_inversion};
};

struct RunConfig {
    ScheduleConfig schedule;
    GmmSpec gmm;
    EditDefaults edit;
    SweepConfig sweep;
    EmbedderConfig embedder;
    BenchConfig bench;
    std::string out_dir = "out";
};

// Two well-separated classes, two components each: enough structure for the
// trade-off experiments while staying desk-scale.
inline GmmSpec default_gmm() {
    GmmSpec gmm;
    gmm.dim = 2;
    gmm.classes = {
        {0.5, {{0.6, {-2.0, 0.0}, 0.4}, {0.4, {-1.0, 1.5}, 0.3}}},
        {0.5, {{0.5, {2.0, 0.0}, 0.4}, {0.5, {1.5, -1.5}, 0.3}}},
    };
    gmm.validate();
    return gmm;
}

inline RunConfig default_config() {
    RunConfig cfg;
    cfg.gmm = default_gmm();
    return cfg;
}

namespace detail {

using nlohmann::json;

inline TStartSpec parse_t_start(const json& j) {
    TStartSpec spec;
    if (j.is_number()) {
        spec.unit = TStartSpec::Unit::timestep;
        spec.value = j.get<double>();
        return spec;
    }
    spec.unit = TStartSpec::unit_from_string(j.value("unit", "fraction"));
    spec.value = j.at("value").get<double>();
    return spec;
}

inline GmmSpec parse_gmm(const json& j) {
    GmmSpec gmm;
    gmm.dim = j.at("dim").get<std::size_t>();
    const auto& classes = j.at("classes");
    const double default_prior = classes.empty() ? 1.0 : 1.0 / classes.size();
    for (const auto& jc : classes) {
        ClassMixture cls;
        cls.prior = jc.value("prior", default_prior);
        for (const auto& jk : jc.at("components")) {
            GmmComponent comp;
            comp.weight = jk.value("weight", 1.0);
            comp.mean = jk.at("mean").get<Vec>();
            comp.var = jk.value("var", 1.0);
            cls.components.push_back(std::move(comp));
        }
        gmm.classes.push_back(std::move(cls));
    }
    gmm.validate();
    return gmm;
}

inline std::vector<EditMode> parse_methods(const json& j) {
    std::vector<EditMode> out;
    for (const auto& m : j) out.push_back(edit_mode_from_string(m.get<std::string>()));
    if (out.empty()) throw config_error("config: empty method list");
    return out;
}

} // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
    RunConfig cfg = default_config();
    try {
        if (j.contains("schedule")) {
            const auto& js = j["schedule"];
            cfg.schedule.kind = schedule_kind_from_string(js.value("kind", "linear"));
            cfg.schedule.T = js.value("T", cfg.schedule.T);
            cfg.schedule.beta_min = js.value("beta_min", cfg.schedule.beta_min);
            cfg.schedule.beta_max = js.value("beta_max", cfg.schedule.beta_max);
        }
        if (j.contains("gmm")) cfg.gmm = detail::parse_gmm(j["gmm"]);
        if (j.contains("edit")) {
            const auto& je = j["edit"];
            cfg.edit.mode = edit_mode_from_string(je.value("mode", to_string(cfg.edit.mode)));
            cfg.edit.phi = je.value("phi", cfg.edit.phi);
            cfg.edit.guidance.w_src = je.value("w_src", cfg.edit.guidance.w_src);
            cfg.edit.guidance.w_tgt = je.value("w_tgt", cfg.edit.guidance.w_tgt);
            cfg.edit.steps = je.value("steps", cfg.edit.steps);
            cfg.edit.src_class = je.value("src_class", cfg.edit.src_class);
            cfg.edit.tgt_class = je.value("tgt_class", cfg.edit.tgt_class);
            if (je.contains("t_start")) cfg.edit.t_start = detail::parse_t_start(je["t_start"]);
        }
        if (j.contains("sweep")) {
            const auto& js = j["sweep"];
            if (js.contains("phi_values")) cfg.sweep.phi_values = js["phi_values"].get<std::vector<double>>();
            if (js.contains("t_start_values"))
                cfg.sweep.t_start_values = js["t_start_values"].get<std::vector<double>>();
            if (js.contains("t_start_unit"))
                cfg.sweep.t_start_unit = TStartSpec::unit_from_string(js["t_start_unit"].get<std::string>());
            cfg.sweep.seeds_per_point = js.value("seeds_per_point", cfg.sweep.seeds_per_point);
            cfg.sweep.baseline_steps = js.value("baseline_steps", cfg.sweep.baseline_steps);
            cfg.sweep.guidance.w_src = js.value("w_src", cfg.sweep.guidance.w_src);
            cfg.sweep.guidance.w_tgt = js.value("w_tgt", cfg.sweep.guidance.w_tgt);
            if (js.contains("methods")) cfg.sweep.methods = detail::parse_methods(js["methods"]);
        }
        if (j.contains("embedder")) {
            const auto& je = j["embedder"];
            cfg.embedder.seed = je.value("seed", cfg.embedder.seed);
            cfg.embedder.depth = je.value("depth", cfg.embedder.depth);
            cfg.embedder.width_factor = je.value("width_factor", cfg.embedder.width_factor);
        }
        if (j.contains("bench")) {
            const auto& jb = j["bench"];
            cfg.bench.repetitions = jb.value("repetitions", cfg.bench.repetitions);
            cfg.bench.vci_steps = jb.value("vci_steps", cfg.bench.vci_steps);
            cfg.bench.baseline_steps = jb.value("baseline_steps", cfg.bench.baseline_steps);
            cfg.bench.ddim_invert_frac = jb.value("ddim_invert_frac", cfg.bench.ddim_invert_frac);
            cfg.bench.sdedit_t_frac = jb.value("sdedit_t_frac", cfg.bench.sdedit_t_frac);
            if (jb.contains("methods")) cfg.bench.methods = detail::parse_methods(jb["methods"]);
        }
        cfg.out_dir = j.value("out_dir", cfg.out_dir);
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("config: ") + e.what());
    }
    if (cfg.sweep.seeds_per_point < 1) throw config_error("config: seeds_per_point must be >= 1");
    if (cfg.bench.repetitions < 3) throw config_error("config: bench repetitions must be >= 3");
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw config_error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config parse error in " + path + ": " + e.what());
    }
    return parse_config(j);
}

} // namespace vci
