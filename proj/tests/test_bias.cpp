#include "powerlag/bias.hpp"

#include "powerlag/error_sim.hpp"
#include "powerlag/errors.hpp"
#include "powerlag/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace powerlag;

namespace {
const LagEffect kPaperTheta = LagEffect::from_theta({0.001, 0.0024, 0.0006});
}

TEST_CASE("lambda_linear") {
    CHECK(lambda_linear(1.0, 4.0, 1.0) == doctest::Approx(0.8));
    CHECK(lambda_linear(0.5, 3.0, 0.0) == doctest::Approx(2.0)); // 1/gamma1
    // overestimation is possible: 8.8 / (7.744 + 1)
    CHECK(lambda_linear(0.88, 10.0, 1.0) == doctest::Approx(8.8 / 8.744).epsilon(1e-12));

    // scale invariance under (V, V_u) -> (cV, cV_u)
    Rng rng(8);
    for (int rep = 0; rep < 30; ++rep) {
        const double g = 0.2 + rng.uniform();
        const double v = 0.5 + rng.uniform() * 4;
        const double vu = rng.uniform();
        const double c = 0.1 + rng.uniform() * 9;
        CHECK(lambda_linear(g, c * v, c * vu) ==
              doctest::Approx(lambda_linear(g, v, vu)).epsilon(1e-12));
    }
}

TEST_CASE("theta_eq19 with the Figure-2 inputs") {
    // R^2 = 0.919, gamma1 = 0.88, lag 0
    const double plus = theta_eq19(kPaperTheta, 0.919, 0.88, Eq19Sign::Plus, 0);
    CHECK(plus == doctest::Approx(1.298e-3).epsilon(1e-3));
    CHECK(plus ==
          doctest::Approx(0.919 * (0.001 + 0.081 * 0.003) / 0.88).epsilon(1e-12));

    const double minus = theta_eq19(kPaperTheta, 0.919, 0.88, Eq19Sign::Minus, 0);
    CHECK(minus == doctest::Approx(7.91e-4).epsilon(2e-3));
    CHECK(minus ==
          doctest::Approx(0.919 * (0.001 - 0.081 * 0.003) / 0.88).epsilon(1e-12));

    // R^2 = 1: the residual-confounding term vanishes for either sign
    CHECK(theta_eq19(kPaperTheta, 1.0, 0.88, Eq19Sign::Plus, 1) ==
          doctest::Approx(0.0024 / 0.88).epsilon(1e-12));
    CHECK(theta_eq19(kPaperTheta, 1.0, 0.88, Eq19Sign::Minus, 1) ==
          doctest::Approx(0.0024 / 0.88).epsilon(1e-12));
}

TEST_CASE("theta_eq19 plus >= minus when the other lags sum positive") {
    Rng rng(14);
    for (int rep = 0; rep < 40; ++rep) {
        std::vector<double> theta;
        for (int l = 0; l < 3; ++l) {
            theta.push_back(rng.uniform() * 0.01); // nonnegative
        }
        if (theta[0] + theta[1] + theta[2] == 0.0) {
            continue;
        }
        auto effect = LagEffect::from_theta(theta);
        const double r2 = 0.3 + 0.69 * rng.uniform();
        const double g1 = 0.2 + rng.uniform();
        for (int lag = 0; lag < 3; ++lag) {
            CHECK(theta_eq19(effect, r2, g1, Eq19Sign::Plus, lag) >=
                  theta_eq19(effect, r2, g1, Eq19Sign::Minus, lag) - 1e-15);
        }
    }
}

TEST_CASE("theta_eq20") {
    CHECK(theta_eq20(0.004, 0.919, 0.88) == doctest::Approx(4.177e-3).epsilon(1e-3));
    CHECK(theta_eq20(0.7, 0.9, 0.9) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(theta_eq20(0.01, 0.5, 1.0) == doctest::Approx(0.005).epsilon(1e-12));
}

TEST_CASE("calibration with measured == truth returns theta exactly") {
    ExposurePanel truth = gen_exposure_panel(20, 60, 10.0, 4.0, 0.4, 0.2, 71);
    ValidationDesign v = build_validation_design(truth, truth, 2);
    CalibrationFit fit = compute_calibration(v);
    for (int j = 0; j < 3; ++j) {
        for (int l = 0; l < 3; ++l) {
            CHECK(fit.eta_star(j, l) == doctest::Approx(j == l ? 1.0 : 0.0).epsilon(1e-8));
            CHECK(std::abs(fit.resid_coefs(j, l)) < 1e-8);
        }
    }
    BiasReport report = calib_bias_approx(v, kPaperTheta);
    for (int l = 0; l < 3; ++l) {
        CHECK(report.theta_biased[l] ==
              doctest::Approx(kPaperTheta.theta[l]).epsilon(1e-8));
    }
    CHECK(report.theta_bar_biased == doctest::Approx(0.004).epsilon(1e-8));
}

TEST_CASE("calibration recovers the classical attenuation with uncorrelated lags") {
    // rho_time = 0 makes lag columns independent; classical error with
    // gamma1 = 1 attenuates each lag by lambda = V / (V + V_u).
    const double var_x = 4.0, var_u = 1.0;
    ExposurePanel truth = gen_exposure_panel(60, 220, 50.0, var_x, 0.0, 0.0, 5);
    ErrorSpec spec;
    spec.family = ErrorFamily::AdditiveLinear;
    spec.gamma1 = 1.0;
    spec.iid_noise_var = var_u;
    ExposurePanel measured = apply_error(truth, spec, 6);

    ValidationDesign v = build_validation_design(truth, measured, 2);
    BiasReport report = calib_bias_approx(v, kPaperTheta);
    const double lambda = lambda_linear(1.0, var_x, var_u);
    for (int l = 0; l < 3; ++l) {
        CHECK(report.theta_biased[l] ==
              doctest::Approx(lambda * kPaperTheta.theta[l]).epsilon(0.05));
    }
}

TEST_CASE("bl_bias_approx recovers a planted correction") {
    // u^BL = 0.1 x_g at lag 0 (single-lag): theta^BL = 1.1 theta
    ExposurePanel group = gen_exposure_panel(30, 120, 10.0, 4.0, 0.3, 0.0, 9);
    ExposurePanel truth = group;
    truth.values *= 1.1; // truth - group = 0.1 group
    std::vector<std::string> identity = group.unit_ids;
    truth.unit_ids = identity;

    auto effect = LagEffect::from_theta({0.02});
    BiasReport report = bl_bias_approx(truth, group, identity, effect, 0);
    CHECK(report.theta_biased[0] == doctest::Approx(0.02 * 1.1).epsilon(1e-6));
}

TEST_CASE("pure Berkson aggregation leaves theta almost unbiased") {
    ExposurePanel truth = gen_exposure_panel(60, 160, 10.0, 4.0, 0.4, 0.0, 13);
    GroupMapping mapping = block_group_mapping(60, 6);
    ExposurePanel grouped = aggregate_groups(truth, mapping, AggregationMode::Additive);
    ExposurePanel group_per_unit = expand_to_units(grouped, mapping, truth.unit_ids);

    auto effect = LagEffect::from_theta({0.01, 0.02, 0.005});
    BiasReport report =
        bl_bias_approx(truth, group_per_unit, truth.unit_ids, effect, 2);
    // Correction terms shrink toward zero; allow small sampling wiggle.
    for (int l = 0; l < 3; ++l) {
        CHECK(std::abs(report.correction[l]) < 0.15 * std::abs(effect.theta[l]) + 5e-4);
    }
}

TEST_CASE("mb_bias") {
    CHECK(mb_bias(0.3, 1.0) == doctest::Approx(0.3));
    CHECK(mb_bias(0.0, 2.0) == doctest::Approx(0.0));
    // u ~ N(0, 0.1): E[exp(u)] = exp(0.05)
    Rng rng(64);
    double sum = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
        sum += std::exp(rng.normal(0.0, std::sqrt(0.1)));
    }
    CHECK(mb_bias(1.0, sum / n) == doctest::Approx(std::exp(0.05)).epsilon(3e-3));
}

TEST_CASE("mc_attenuation") {
    CHECK(mc_attenuation(0.7, 2.0, 3.0, 0.0) == doctest::Approx(0.7));
    CHECK(mc_attenuation(1.0, 1.0, 2.0, 0.25) == doctest::Approx(1.0 / 2.25).epsilon(1e-12));
    Rng rng(15);
    for (int rep = 0; rep < 30; ++rep) {
        const double theta = rng.normal();
        const double v = 0.2 + rng.uniform() * 3;
        const double e = rng.normal(0.0, 2.0);
        const double vu = 0.01 + rng.uniform();
        CHECK(std::abs(mc_attenuation(theta, v, e, vu)) < std::abs(theta) + 1e-15);
        // linear in theta
        CHECK(mc_attenuation(2.0 * theta, v, e, vu) ==
              doctest::Approx(2.0 * mc_attenuation(theta, v, e, vu)).epsilon(1e-12));
        CHECK(mb_bias(2.0 * theta, 1.3) == doctest::Approx(2.0 * mb_bias(theta, 1.3)));
    }
}

TEST_CASE("poly_bias_factor") {
    CHECK(poly_bias_factor(1.0, 1.0) == doctest::Approx(1.0));
    CHECK(poly_bias_factor(0.9, 0.9) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(poly_bias_factor(0.8, 0.5) == doctest::Approx(0.64 / 0.25).epsilon(1e-12));
    CHECK_THROWS_AS(poly_bias_factor(0.9, 0.0), ConfigError);
}

TEST_CASE("compose_ce") {
    BiasReport ll;
    ll.theta_biased = {0.8e-3, 2.0e-3, 0.5e-3};
    BiasReport bl;
    bl.correction = {0.0, 0.0, 0.0};
    bl.theta_biased = {1e-3, 2.4e-3, 0.6e-3};

    auto same = compose_ce(ll, bl);
    CHECK(same.theta_biased == ll.theta_biased);

    bl.correction = {1e-4, -2e-4, 3e-4};
    auto ce = compose_ce(ll, bl);
    CHECK(ce.theta_biased[0] == doctest::Approx(0.9e-3));
    CHECK(ce.theta_biased[1] == doctest::Approx(1.8e-3));
    CHECK(ce.theta_biased[2] == doctest::Approx(0.8e-3));
    CHECK(ce.theta_bar_biased ==
          doctest::Approx(ce.theta_biased[0] + ce.theta_biased[1] + ce.theta_biased[2]));

    // zero LL bias: composing onto the true theta returns the BL report
    BiasReport truth_ll;
    truth_ll.theta_biased = {1e-3, 2.4e-3, 0.6e-3};
    BiasReport blr;
    blr.correction = {2e-4, 1e-4, -1e-4};
    blr.theta_biased = {1.2e-3, 2.5e-3, 0.5e-3};
    auto ce2 = compose_ce(truth_ll, blr);
    for (int l = 0; l < 3; ++l) {
        CHECK(ce2.theta_biased[l] == doctest::Approx(blr.theta_biased[l]).epsilon(1e-12));
    }

    BiasReport short_bl;
    short_bl.correction = {0.0};
    CHECK_THROWS_AS(compose_ce(ll, short_bl), DataError);
}
