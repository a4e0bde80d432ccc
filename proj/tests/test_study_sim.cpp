#include "powerlag/study_sim.hpp"

#include "powerlag/errors.hpp"
#include "powerlag/variance.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace powerlag;

TEST_CASE("calendar arithmetic") {
    // 2020-07-15 was a Wednesday
    const long z = days_from_civil(2020, 7, 15);
    CHECK(weekday_from_days(z) == 3);
    int y, m, d;
    civil_from_days(z, y, m, d);
    CHECK(y == 2020);
    CHECK(m == 7);
    CHECK(d == 15);
    CHECK(days_from_civil(1970, 1, 1) == 0);
    CHECK(weekday_from_days(0) == 4); // Thursday
}

TEST_CASE("time-stratified referents for 2020-07-15") {
    // Panel from 2020-06-01; July 15 is day index 30 + 14 = 44.
    ExposurePanel p;
    p.unit_ids = {"u"};
    const int days = 91;
    p.times.resize(days);
    p.values.resize(1, days);
    for (int t = 0; t < days; ++t) {
        p.times[t] = t;
        p.values(0, t) = t;
    }
    Calendar cal{2020, 6, 1};
    auto pools = referent_pools(p, cal, 0);
    // Wednesdays of July 2020: 1, 8, 15, 22, 29 -> indices 30, 37, 44, 51, 58
    std::vector<int> expect{30, 37, 51, 58};
    CHECK(pools[44] == expect);

    MatchResult match = match_case_crossover({{0, 44}}, cal, p, 0);
    REQUIRE(match.design.n_strata() == 1);
    CHECK(match.design.strata[0].rows.rows() == 5);
    CHECK(match.design.strata[0].rows(0, 0) == 44.0); // case row first
}

TEST_CASE("a 31-day single month yields strata of size 4 or 5") {
    ExposurePanel p;
    p.unit_ids = {"u"};
    p.times.resize(31);
    p.values.resize(1, 31);
    for (int t = 0; t < 31; ++t) {
        p.times[t] = t;
        p.values(0, t) = std::sin(t * 0.7);
    }
    Calendar cal{2020, 7, 1};
    std::vector<Event> events;
    for (int t = 0; t < 31; ++t) {
        events.push_back({0, t});
    }
    MatchResult match = match_case_crossover(events, cal, p, 0);
    CHECK(match.design.n_strata() == 31);
    for (const auto &s : match.design.strata) {
        CHECK((s.rows.rows() == 4 || s.rows.rows() == 5));
    }
}

TEST_CASE("a constant-exposure month contributes zero Fisher information") {
    ExposurePanel p;
    p.unit_ids = {"u"};
    p.times.resize(31);
    p.values = Eigen::MatrixXd::Constant(1, 31, 3.0);
    for (int t = 0; t < 31; ++t) {
        p.times[t] = t;
    }
    Calendar cal{2020, 7, 1};
    MatchResult match = match_case_crossover({{0, 10}}, cal, p, 0);
    REQUIRE(match.design.n_strata() == 1);
    CHECK(fisher_info_null(match.design, 0) == doctest::Approx(0.0));
}

TEST_CASE("gen_outcomes null model event rate") {
    ExposurePanel truth = gen_exposure_panel(100, 100, 10.0, 4.0, 0.3, 0.0, 71);
    OutcomeModel model;
    model.K = 1.0;
    model.baseline_a = 0.05;
    model.baseline_b = 0.0;
    model.effects.push_back({"x", LagEffect::with_weights({0.0, 0.0, 0.0}, {1, 0, 0})});

    auto events = gen_outcomes({&truth}, model, 3);
    const double expected = 0.05 * 100 * (100 - 2);
    CHECK(std::abs(static_cast<double>(events.size()) - expected) <
          4.0 * std::sqrt(expected));

    // doubling K doubles the expected count
    model.K = 2.0;
    auto doubled = gen_outcomes({&truth}, model, 3);
    CHECK(std::abs(static_cast<double>(doubled.size()) - 2.0 * expected) <
          4.0 * std::sqrt(2.0 * expected));
}

TEST_CASE("gen_outcomes aborts when p >= 1") {
    ExposurePanel truth = gen_exposure_panel(5, 30, 10.0, 1.0, 0.0, 0.0, 5);
    OutcomeModel model;
    model.K = 30.0;
    model.baseline_a = 0.05;
    model.effects.push_back({"x", LagEffect::from_theta({0.1})});
    CHECK_THROWS_AS(gen_outcomes({&truth}, model, 1), NumericError);
}

TEST_CASE("run_replicates is reproducible across thread counts") {
    ScenarioConfig cfg;
    cfg.test = {0.05, 0.8, Sidedness::TwoSided};
    cfg.effect = LagEffect::from_theta({0.05, 0.12, 0.03});
    cfg.sim.units = 30;
    cfg.sim.days = 80;
    cfg.sim.baseline_a = 0.03;
    cfg.sim.baseline_b = 0.0;
    REQUIRE(validate_scenario(cfg).ok());

    auto a = run_replicates(cfg, 6, 12345, 1);
    auto b = run_replicates(cfg, 6, 12345, 4);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t r = 0; r < a.records.size(); ++r) {
        CHECK(a.records[r].usable == b.records[r].usable);
        if (a.records[r].usable) {
            for (std::size_t i = 0; i < a.records[r].theta_hat.size(); ++i) {
                // bitwise equality, not approximate
                CHECK(a.records[r].theta_hat[i] == b.records[r].theta_hat[i]);
                CHECK(a.records[r].se_hat[i] == b.records[r].se_hat[i]);
            }
        }
    }
    CHECK(a.summary.mean_theta_hat == b.summary.mean_theta_hat);
    CHECK(a.summary.reject_rate == b.summary.reject_rate);
}

TEST_CASE("measured == truth recovers the generating effects") {
    ScenarioConfig cfg;
    cfg.test = {0.05, 0.8, Sidedness::TwoSided};
    cfg.effect = LagEffect::from_theta({0.05, 0.12, 0.03});
    cfg.sim.units = 60;
    cfg.sim.days = 100;
    cfg.sim.exposure_mean = 10.0;
    cfg.sim.exposure_var = 1.0;
    cfg.sim.baseline_a = 0.04;
    cfg.sim.baseline_b = 0.005;
    REQUIRE(validate_scenario(cfg).ok());

    const int R = 60;
    auto batch = run_replicates(cfg, R, 777, 0);
    REQUIRE(batch.summary.replicates_converged > R / 2);
    for (int l = 0; l < 3; ++l) {
        const double se_mean = batch.summary.sd_theta_hat[l] /
                               std::sqrt(static_cast<double>(batch.summary.replicates_converged));
        CHECK(std::abs(batch.summary.mean_theta_hat[l] - cfg.effect.theta[l]) <
              3.5 * se_mean + 0.02 * std::abs(cfg.effect.theta[l]));
    }
}

TEST_CASE("confounder panels enter generation and analysis") {
    ScenarioConfig cfg;
    cfg.test = {0.05, 0.8, Sidedness::TwoSided};
    cfg.effect = LagEffect::from_theta({0.001, 0.0024, 0.0006});
    cfg.sim.units = 40;
    cfg.sim.days = 80;
    cfg.sim.baseline_a = 0.03;
    cfg.sim.baseline_b = 0.0;
    cfg.sim.confounders = true;
    REQUIRE(validate_scenario(cfg).ok());

    auto rec = run_single_replicate(cfg, 0, 4242);
    CHECK(rec.usable);
    // 3 lags + 3 O3 lags + 2 temperature lags in the fitted model
    CHECK(rec.theta_hat.size() == 4); // lags + cumulative are reported
}
