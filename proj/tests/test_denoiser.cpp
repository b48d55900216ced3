#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "vci/denoiser.hpp"
#include "vci/schedule.hpp"

using namespace vci;
using Catch::Approx;

namespace {

GmmSpec single_component_gmm() {
    GmmSpec gmm;
    gmm.dim = 2;
    gmm.classes = {{1.0, {{1.0, {0.0, 0.0}, 1.0}}}};
    gmm.validate();
    return gmm;
}

// T=3 toy schedule: alpha_bar(2) == 0.72.
NoiseSchedule toy_schedule() { return build_schedule(ScheduleKind::linear, 3, 0.1, 0.3); }

} // namespace

TEST_CASE("closed-form noise prediction for a single unit Gaussian") {
    const GmmSpec gmm = single_component_gmm();
    const NoiseSchedule sched = toy_schedule();
    // eps* = sqrt(1-abar) (x - sqrt(abar) mu) / (abar s^2 + 1 - abar) = sqrt(0.28) x
    const Sample x(Vec{1.0, 1.0});
    const NoisePrediction pred = gmm_predict_noise(gmm, x, 2, Condition::cls(0), sched);
    CHECK(pred.nfe_cost == 1);
    CHECK(pred.eps[0] == Approx(0.529150).epsilon(1e-5));
    CHECK(pred.eps[1] == Approx(0.529150).epsilon(1e-5));
}

TEST_CASE("score vanishes at the diffused mode") {
    GmmSpec gmm;
    gmm.dim = 2;
    gmm.classes = {{1.0, {{1.0, {1.5, -0.5}, 0.7}}}};
    gmm.validate();
    const NoiseSchedule sched = toy_schedule();
    const double sqrt_ab = std::sqrt(sched.alpha_bar(2));
    const Sample mode(Vec{1.5 * sqrt_ab, -0.5 * sqrt_ab});
    const NoisePrediction pred = gmm_predict_noise(gmm, mode, 2, Condition::cls(0), sched);
    CHECK(std::fabs(pred.eps[0]) < 1e-12);
    CHECK(std::fabs(pred.eps[1]) < 1e-12);
}

TEST_CASE("symmetric two-component mixture has zero score at the origin") {
    GmmSpec gmm;
    gmm.dim = 2;
    gmm.classes = {{1.0, {{0.5, {2.0, 0.0}, 0.5}, {0.5, {-2.0, 0.0}, 0.5}}}};
    gmm.validate();
    const NoiseSchedule sched = toy_schedule();
    const NoisePrediction pred =
        gmm_predict_noise(gmm, Sample(Vec{0.0, 0.0}), 2, Condition::cls(0), sched);
    CHECK(std::fabs(pred.eps[0]) < 1e-12);
    CHECK(std::fabs(pred.eps[1]) < 1e-12);
}

TEST_CASE("noise prediction is linear in x for a single component") {
    const GmmSpec gmm = single_component_gmm();
    const NoiseSchedule sched = toy_schedule();
    const Sample x1(Vec{0.3, -1.1});
    const Sample x2(Vec{0.6, -2.2});
    const Vec e1 = gmm_predict_noise(gmm, x1, 2, Condition::cls(0), sched).eps;
    const Vec e2 = gmm_predict_noise(gmm, x2, 2, Condition::cls(0), sched).eps;
    CHECK(e2[0] == Approx(2.0 * e1[0]).epsilon(1e-12));
    CHECK(e2[1] == Approx(2.0 * e1[1]).epsilon(1e-12));
}

TEST_CASE("denoiser predictions are pure") {
    RngStream rng(123);
    const GmmSpec gmm = testing::random_gmm(rng, 3, 2, 2);
    const NoiseSchedule sched = default_schedule();
    const Sample x = rng.gaussian_sample(3);
    const NoisePrediction a = gmm_predict_noise(gmm, x, 500, Condition::cls(1), sched);
    const NoisePrediction b = gmm_predict_noise(gmm, x, 500, Condition::cls(1), sched);
    CHECK(a.eps == b.eps);
}

TEST_CASE("finite-difference oracle agrees with the closed form") {
    const GmmSpec gmm = single_component_gmm();
    const NoiseSchedule sched = toy_schedule();
    const Sample x(Vec{1.0, 1.0});
    const Vec fd = score_oracle_fd(gmm, x, 2, Condition::cls(0), 1e-4, sched);
    CHECK(fd[0] == Approx(0.529150).margin(1e-6));
    CHECK(fd[1] == Approx(0.529150).margin(1e-6));

    SECTION("oracle equivalence over random draws") {
        RngStream rng(99);
        const GmmSpec mixture = testing::random_gmm(rng, 2, 2, 3);
        const NoiseSchedule full = default_schedule();
        for (int i = 0; i < 100; ++i) {
            const Sample probe = rng.gaussian_sample(2);
            const Timestep t = 1 + static_cast<Timestep>(rng.uniform() * full.T());
            const Condition c = rng.uniform() < 0.5 ? Condition::none() : Condition::cls(i % 2);
            const Vec closed = gmm_predict_noise(mixture, probe, t, c, full).eps;
            const Vec oracle = score_oracle_fd(mixture, probe, t, c, 1e-4, full);
            double sup = 0.0, scale = 0.0;
            for (std::size_t j = 0; j < closed.size(); ++j) {
                sup = std::max(sup, std::fabs(closed[j] - oracle[j]));
                scale = std::max(scale, std::fabs(closed[j]));
            }
            CHECK(sup / (1.0 + scale) <= 1e-4);
        }
    }

    SECTION("second-order convergence in h") {
        // On a two-component mixture the log density has nonzero third
        // derivatives, so halving h by 10 shrinks the error ~100x.
        GmmSpec mixture;
        mixture.dim = 1;
        mixture.classes = {{1.0, {{0.5, {1.0}, 0.4}, {0.5, {-1.0}, 0.6}}}};
        mixture.validate();
        const Sample probe(Vec{0.37});
        const Vec exact = gmm_predict_noise(mixture, probe, 2, Condition::cls(0), sched).eps;
        const Vec coarse = score_oracle_fd(mixture, probe, 2, Condition::cls(0), 1e-2, sched);
        const Vec fine = score_oracle_fd(mixture, probe, 2, Condition::cls(0), 1e-4, sched);
        const double err_coarse = std::fabs(coarse[0] - exact[0]);
        const double err_fine = std::fabs(fine[0] - exact[0]);
        // h shrinks 100x, so an O(h^2) scheme shrinks the error ~10^4x
        const double ratio = err_coarse / err_fine;
        CHECK(ratio > 2e3);
        CHECK(ratio < 5e4);
    }

    SECTION("h must be positive") {
        CHECK_THROWS_AS(score_oracle_fd(gmm, x, 2, Condition::cls(0), 0.0, sched), config_error);
    }
}

TEST_CASE("classifier-free guidance combination") {
    const NoiseSchedule sched = toy_schedule();
    GmmSpec gmm;
    gmm.dim = 2;
    gmm.classes = {
        {0.5, {{1.0, {1.0, 0.0}, 0.5}}},
        {0.5, {{1.0, {-1.0, 0.0}, 0.5}}},
    };
    gmm.validate();
    const GmmDenoiser den{gmm};
    const Sample x(Vec{0.4, -0.2});
    const Condition c = Condition::cls(0);

    SECTION("w=1 short-circuits to the conditional branch") {
        const NoisePrediction guided = cfg_predict(den, x, 2, c, 1.0, sched);
        const NoisePrediction cond = den.predict(x, 2, c, sched);
        CHECK(guided.eps == cond.eps); // bit-for-bit
        CHECK(guided.nfe_cost == 1);
    }
    SECTION("w=0 gives the unconditional branch") {
        const NoisePrediction guided = cfg_predict(den, x, 2, c, 0.0, sched);
        const NoisePrediction uncond = den.predict(x, 2, Condition::none(), sched);
        CHECK(guided.eps == uncond.eps);
        CHECK(guided.nfe_cost == 1);
    }
    SECTION("linear extrapolation and NFE cost 2") {
        const NoisePrediction guided = cfg_predict(den, x, 2, c, 3.0, sched);
        const NoisePrediction cond = den.predict(x, 2, c, sched);
        const NoisePrediction uncond = den.predict(x, 2, Condition::none(), sched);
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(guided.eps[i] ==
                  Approx(uncond.eps[i] + 3.0 * (cond.eps[i] - uncond.eps[i])).epsilon(1e-12));
        CHECK(guided.nfe_cost == 2);
    }
    SECTION("the w=3 formula on scripted branches") {
        // eps_uncond = [0,0], eps_cond = [1,0] -> [3,0]
        const Vec uncond{0.0, 0.0};
        const Vec cond{1.0, 0.0};
        const Vec out = lincomb(1.0 - 3.0, uncond, 3.0, cond);
        CHECK(out[0] == 3.0);
        CHECK(out[1] == 0.0);
    }
    SECTION("null condition always takes the unconditional branch") {
        const NoisePrediction guided = cfg_predict(den, x, 2, Condition::none(), 7.0, sched);
        CHECK(guided.nfe_cost == 1);
    }
}

TEST_CASE("scripted denoiser replays its tape") {
    const NoiseSchedule sched = toy_schedule();
    const ScriptedDenoiser den({{3, Vec{0.0, 0.0}}});
    const Sample x(Vec{0.5, 0.5});
    const NoisePrediction pred = den.predict(x, 3, Condition::none(), sched);
    CHECK(pred.eps == Vec{0.0, 0.0});
    CHECK(pred.nfe_cost == 1);
    CHECK_THROWS_AS(den.predict(x, 2, Condition::none(), sched), fixture_error);
}

TEST_CASE("denoiser rejects bad inputs") {
    const GmmSpec gmm = single_component_gmm();
    const NoiseSchedule sched = toy_schedule();
    CHECK_THROWS_AS(gmm_predict_noise(gmm, Sample(Vec{1.0}), 2, Condition::cls(0), sched),
                    config_error);
    CHECK_THROWS_AS(gmm_predict_noise(gmm, Sample(Vec{1.0, 1.0}), 4, Condition::cls(0), sched),
                    config_error);
    CHECK_THROWS_AS(gmm_predict_noise(gmm, Sample(Vec{1.0, 1.0}), 0, Condition::cls(0), sched),
                    config_error);
}
