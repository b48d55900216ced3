#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "vci/schedule.hpp"

using namespace vci;
using Catch::Approx;

namespace {

// Extended-precision cumulative product, independent of NoiseSchedule.
long double alpha_bar_oracle(const std::vector<double>& betas, std::size_t t) {
    long double prod = 1.0L;
    for (std::size_t i = 0; i < t; ++i) prod *= (1.0L - static_cast<long double>(betas[i]));
    return prod;
}

} // namespace

TEST_CASE("linear schedule matches hand products") {
    const NoiseSchedule sched = build_schedule(ScheduleKind::linear, 3, 0.1, 0.3);
    CHECK(sched.beta(1) == Approx(0.1));
    CHECK(sched.beta(2) == Approx(0.2));
    CHECK(sched.beta(3) == Approx(0.3));
    CHECK(sched.alpha_bar(1) == Approx(0.9));
    CHECK(sched.alpha_bar(2) == Approx(0.72));
    CHECK(sched.alpha_bar(3) == Approx(0.504));
    CHECK(sched.alpha_bar(0) == 1.0);
}

TEST_CASE("single-step schedule") {
    const NoiseSchedule sched = build_schedule(ScheduleKind::linear, 1, 0.1, 0.1);
    CHECK(sched.T() == 1);
    CHECK(sched.beta(1) == Approx(0.1));
    CHECK(sched.alpha_bar(1) == Approx(0.9));
    CHECK(sched.posterior_var(1) == 0.0);
}

TEST_CASE("default schedule against extended-precision product oracle") {
    const NoiseSchedule sched = build_schedule(ScheduleKind::linear, 1000, 1e-4, 0.02);
    const long double oracle = alpha_bar_oracle(sched.betas(), 1000);
    CHECK(static_cast<double>(oracle) < 5e-5);
    // incremental products match a from-scratch recomputation
    for (Timestep t : {1, 17, 250, 500, 999, 1000}) {
        const long double ref = alpha_bar_oracle(sched.betas(), static_cast<std::size_t>(t));
        CHECK(std::fabs(sched.alpha_bar(t) - static_cast<double>(ref)) <=
              1e-12 * static_cast<double>(ref));
    }
}

TEST_CASE("schedule invariants across kinds") {
    for (ScheduleKind kind : {ScheduleKind::linear, ScheduleKind::scaled_linear, ScheduleKind::cosine}) {
        const NoiseSchedule sched = build_schedule(kind, 100, 1e-4, 0.05);
        double last = 1.0;
        for (Timestep t = 1; t <= sched.T(); ++t) {
            CHECK(sched.beta(t) > 0.0);
            CHECK(sched.beta(t) < 1.0);
            CHECK(sched.alpha(t) == 1.0 - sched.beta(t));
            CHECK(sched.alpha_bar(t) < last);
            CHECK(sched.alpha_bar(t) == Approx(last * sched.alpha(t)));
            CHECK(sched.posterior_var(t) >= 0.0);
            last = sched.alpha_bar(t);
        }
        CHECK(sched.posterior_var(1) == 0.0);
    }
}

TEST_CASE("schedule rejects bad parameters") {
    CHECK_THROWS_AS(build_schedule(ScheduleKind::linear, 0, 0.1, 0.2), config_error);
    CHECK_THROWS_AS(build_schedule(ScheduleKind::linear, 10, 0.0, 0.2), config_error);
    CHECK_THROWS_AS(build_schedule(ScheduleKind::linear, 10, 0.3, 0.2), config_error);
    CHECK_THROWS_AS(build_schedule(ScheduleKind::linear, 10, 0.1, 1.0), config_error);
}

TEST_CASE("timestep grids") {
    SECTION("single step") {
        const TimestepGrid g = select_timesteps(1000, 1);
        REQUIRE(g.size() == 1);
        CHECK(g.at(0) == 1000);
        CHECK(g.prev(0) == 0);
    }
    SECTION("identity grid") {
        const TimestepGrid g = select_timesteps(200, 200);
        REQUIRE(g.size() == 200);
        for (std::size_t i = 0; i < 200; ++i) CHECK(g.at(i) == 200 - static_cast<Timestep>(i));
    }
    SECTION("8 of 1000, frozen golden values") {
        const TimestepGrid g = select_timesteps(1000, 8);
        const std::vector<Timestep> golden{1000, 857, 715, 572, 429, 286, 144, 1};
        CHECK(g.steps == golden);
    }
    SECTION("strictly decreasing, ends at 1, includes T") {
        for (int n : {2, 3, 7, 13, 64, 999, 1000}) {
            const TimestepGrid g = select_timesteps(1000, n);
            REQUIRE(g.size() == static_cast<std::size_t>(n));
            CHECK(g.at(0) == 1000);
            CHECK(g.steps.back() == 1);
            for (std::size_t i = 1; i < g.size(); ++i) CHECK(g.at(i) < g.at(i - 1));
        }
    }
    SECTION("deterministic and idempotent") {
        const TimestepGrid a = select_timesteps(777, 13);
        const TimestepGrid b = select_timesteps(777, 13);
        CHECK(a.steps == b.steps);
    }
    SECTION("rejects n_steps > T") {
        CHECK_THROWS_AS(select_timesteps(10, 11), config_error);
        CHECK_THROWS_AS(select_timesteps(10, 0), config_error);
    }
}

TEST_CASE("sigma policies on the T=3 schedule") {
    const NoiseSchedule sched = build_schedule(ScheduleKind::linear, 3, 0.1, 0.3);

    CHECK(sigma(sched, 2, 1, SigmaPolicy::vci()) == Approx(std::sqrt(0.1)).epsilon(1e-12));
    CHECK(sigma(sched, 2, 1, SigmaPolicy::ddim()) == 0.0);
    CHECK(sigma(sched, 3, 2, SigmaPolicy::ddim()) == 0.0);
    // beta-tilde hand check: ((1-0.9)/(1-0.72)) * 0.2
    CHECK(sigma(sched, 2, 1, SigmaPolicy::ddpm()) == Approx(0.267261).epsilon(1e-5));
    // eta interpolation hits ddpm at eta=1 and ddim at eta=0
    CHECK(sigma(sched, 2, 1, SigmaPolicy::with_eta(1.0)) ==
          Approx(sigma(sched, 2, 1, SigmaPolicy::ddpm())).epsilon(1e-12));
    CHECK(sigma(sched, 2, 1, SigmaPolicy::with_eta(0.0)) == 0.0);

    CHECK_THROWS_AS(sigma(sched, 1, 1, SigmaPolicy::ddpm()), config_error);
    CHECK_THROWS_AS(sigma(sched, 1, 2, SigmaPolicy::ddpm()), config_error);
}

TEST_CASE("sigma radicand is nonnegative for every policy and pair") {
    const NoiseSchedule sched = build_schedule(ScheduleKind::linear, 50, 1e-3, 0.08);
    for (Timestep t = 1; t <= 50; ++t) {
        for (Timestep prev = 0; prev < t; ++prev) {
            for (const SigmaPolicy& p : {SigmaPolicy::ddpm(), SigmaPolicy::ddim(),
                                         SigmaPolicy::vci(), SigmaPolicy::with_eta(0.5)}) {
                const double s = sigma(sched, t, prev, p);
                const double radicand = 1.0 - sched.alpha_bar(prev) - s * s;
                CHECK(radicand >= -1e-12);
                if (p.mode == SigmaPolicy::Mode::vci) CHECK(std::fabs(radicand) <= 1e-12);
            }
        }
    }
}

TEST_CASE("posterior variance identity") {
    // beta-tilde equals the generalized pair form at prev == t-1
    const NoiseSchedule sched = build_schedule(ScheduleKind::scaled_linear, 40, 5e-4, 0.03);
    for (Timestep t = 2; t <= 40; ++t) {
        const double s = sigma(sched, t, t - 1, SigmaPolicy::ddpm());
        CHECK(s * s == Approx(sched.posterior_var(t)).epsilon(1e-12));
    }
}
