#include "powerlag/error_sim.hpp"

#include "powerlag/bias.hpp"
#include "powerlag/errors.hpp"
#include "powerlag/variance.hpp"

#include <doctest.h>

#include <cmath>

using namespace powerlag;

namespace {

double matrix_mean(const Eigen::MatrixXd &m) { return m.mean(); }

double matrix_var(const Eigen::MatrixXd &m) {
    const double mu = m.mean();
    return (m.array() - mu).square().mean();
}

double lag1_autocorr(const Eigen::MatrixXd &m) {
    double num = 0.0, den = 0.0;
    const double mu = m.mean();
    for (Eigen::Index u = 0; u < m.rows(); ++u) {
        for (Eigen::Index t = 1; t < m.cols(); ++t) {
            num += (m(u, t) - mu) * (m(u, t - 1) - mu);
        }
        for (Eigen::Index t = 0; t < m.cols(); ++t) {
            den += (m(u, t) - mu) * (m(u, t) - mu);
        }
    }
    return num / den;
}

} // namespace

TEST_CASE("gen_exposure_panel hits the requested moments at paper scale") {
    // 784 census tracts x 92 days, variance 13.8
    ExposurePanel p = gen_exposure_panel(784, 92, 12.0, 13.8, 0.5, 0.3, 2024);
    CHECK(matrix_mean(p.values) == doctest::Approx(12.0).epsilon(0.05));
    CHECK(matrix_var(p.values) == doctest::Approx(13.8).epsilon(0.05));
    CHECK(p.values.minCoeff() >= 0.0);
}

TEST_CASE("identical seed gives identical panel bit-for-bit") {
    ExposurePanel a = gen_exposure_panel(40, 50, 10.0, 4.0, 0.6, 0.2, 7);
    ExposurePanel b = gen_exposure_panel(40, 50, 10.0, 4.0, 0.6, 0.2, 7);
    CHECK(a.values == b.values);
    ExposurePanel c = gen_exposure_panel(40, 50, 10.0, 4.0, 0.6, 0.2, 8);
    CHECK(a.values != c.values);
}

TEST_CASE("rho_time = 0 gives white columns") {
    ExposurePanel p = gen_exposure_panel(200, 200, 0.0, 1.0, 0.0, 0.0, 3);
    CHECK(std::abs(lag1_autocorr(p.values)) < 0.02);
}

TEST_CASE("noise field matches its stated autocorrelation and variance") {
    NoiseField f = gen_noise_field(120, 120, 0.7, 0.4, 2.5, 99);
    CHECK(lag1_autocorr(f.values) == doctest::Approx(0.7).epsilon(0.07));
    CHECK(matrix_var(f.values) == doctest::Approx(2.5).epsilon(0.1));
}

TEST_CASE("apply_error identity cases") {
    ExposurePanel truth = gen_exposure_panel(20, 40, 10.0, 4.0, 0.5, 0.0, 11);

    ErrorSpec all;
    all.family = ErrorFamily::AdditiveLinearLike;
    all.gamma1 = 1.0;
    all.gamma0 = 0.0;
    all.noise_scale = 0.0;
    ExposurePanel m = apply_error(truth, all, 1);
    CHECK(m.values == truth.values);
    CHECK(m.kind == PanelKind::Measured);

    // all noise scales zero: exactly the affine map
    all.gamma1 = 0.88;
    all.gamma0 = 1.5;
    ExposurePanel affine = apply_error(truth, all, 1);
    CHECK((affine.values - (0.88 * truth.values.array() + 1.5).matrix()).norm() == 0.0);

    // log-affine map for MLL with noise off
    ErrorSpec mll;
    mll.family = ErrorFamily::MultLinearLike;
    mll.gamma_m1 = 0.9;
    mll.gamma_m0 = 0.1;
    mll.noise_scale = 0.0;
    mll.gamma_noise.shape = 0.0;
    ExposurePanel lg = apply_error(truth, mll, 2);
    Eigen::MatrixXd expect =
        (0.1 + 0.9 * truth.values.array().log()).exp().matrix();
    CHECK((lg.values - expect).norm() < 1e-12);
}

TEST_CASE("planted ALL parameters are recovered by OLS") {
    ExposurePanel truth = gen_exposure_panel(60, 120, 12.0, 13.8, 0.5, 0.2, 21);
    ErrorSpec all;
    all.family = ErrorFamily::AdditiveLinearLike;
    all.gamma1 = 0.88;
    all.gamma0 = 0.9;
    all.noise_scale = 1.2;
    all.autocorr.rho_time = 0.8;
    all.autocorr.rho_space = 0.3;
    ExposurePanel measured = apply_error(truth, all, 22);

    const Eigen::Index n = truth.values.size();
    Eigen::VectorXd y(n), x(n);
    Eigen::MatrixXd X(n, 2);
    Eigen::Index k = 0;
    for (Eigen::Index u = 0; u < truth.values.rows(); ++u) {
        for (Eigen::Index t = 0; t < truth.values.cols(); ++t, ++k) {
            y(k) = measured.values(u, t);
            X(k, 0) = 1.0;
            X(k, 1) = truth.values(u, t);
        }
    }
    auto fit = ols_fit(y, X);
    CHECK(fit.coef(1) == doctest::Approx(0.88).epsilon(0.03));
    CHECK(fit.coef(0) == doctest::Approx(0.9).epsilon(0.35));
}

TEST_CASE("MLL log-log slope recovers gamma_m1 = 0.9") {
    // variance kept small enough that the zero-truncation never bites
    ExposurePanel truth = gen_exposure_panel(60, 120, 12.0, 4.0, 0.5, 0.2, 31);
    ErrorSpec mll;
    mll.family = ErrorFamily::MultLinearLike;
    mll.gamma_m1 = 0.9;
    mll.noise_scale = 0.2;
    mll.autocorr.rho_time = 0.7;
    ExposurePanel measured = apply_error(truth, mll, 32);

    const Eigen::Index n = truth.values.size();
    Eigen::VectorXd y(n);
    Eigen::MatrixXd X(n, 2);
    Eigen::Index k = 0;
    for (Eigen::Index u = 0; u < truth.values.rows(); ++u) {
        for (Eigen::Index t = 0; t < truth.values.cols(); ++t, ++k) {
            y(k) = std::log(measured.values(u, t));
            X(k, 0) = 1.0;
            X(k, 1) = std::log(truth.values(u, t));
        }
    }
    auto fit = ols_fit(y, X);
    CHECK(fit.coef(1) == doctest::Approx(0.9).epsilon(0.05));
}

TEST_CASE("aggregate_groups") {
    // single-unit groups are the identity
    ExposurePanel p = gen_exposure_panel(10, 20, 10.0, 4.0, 0.3, 0.0, 41);
    GroupMapping singles = block_group_mapping(10, 10);
    ExposurePanel same = aggregate_groups(p, singles, AggregationMode::Additive);
    CHECK((same.values - p.values).norm() == 0.0);

    // geometric mean of 1 and 9 is 3
    ExposurePanel two;
    two.unit_ids = {"a", "b"};
    two.times = {0};
    two.values.resize(2, 1);
    two.values << 1.0, 9.0;
    GroupMapping both{{"g", "g"}, {1.0, 1.0}};
    ExposurePanel geo = aggregate_groups(two, both, AggregationMode::Multiplicative);
    CHECK(geo.values(0, 0) == doctest::Approx(3.0).epsilon(1e-12));

    // additive aggregation preserves the weighted grand mean per time
    ExposurePanel w = gen_exposure_panel(12, 6, 5.0, 1.0, 0.0, 0.0, 43);
    GroupMapping weighted = block_group_mapping(12, 3);
    for (std::size_t u = 0; u < 12; ++u) {
        weighted.weight_of_unit[u] = 1.0 + static_cast<double>(u % 4);
    }
    ExposurePanel agg = aggregate_groups(w, weighted, AggregationMode::Additive);
    for (int t = 0; t < 6; ++t) {
        double num = 0.0, den = 0.0, gnum = 0.0, gden = 0.0;
        for (int u = 0; u < 12; ++u) {
            num += weighted.weight_of_unit[u] * w.values(u, t);
            den += weighted.weight_of_unit[u];
        }
        for (Eigen::Index g = 0; g < agg.values.rows(); ++g) {
            double wg = 0.0;
            for (int u = 0; u < 12; ++u) {
                if (weighted.group_of_unit[u] == agg.unit_ids[static_cast<std::size_t>(g)]) {
                    wg += weighted.weight_of_unit[u];
                }
            }
            gnum += wg * agg.values(g, t);
            gden += wg;
        }
        CHECK(gnum / gden == doctest::Approx(num / den).epsilon(1e-10));
    }

    // empty mapping / unmapped unit
    GroupMapping bad{{"g"}, {1.0}};
    CHECK_THROWS_AS(aggregate_groups(p, bad, AggregationMode::Additive), DataError);
}

TEST_CASE("the X^new pipeline produces nonzero BL correction terms") {
    // X^new = exp(g1 x + kappa e1 - e2), additive group aggregation: the
    // group value is a transformed proxy whose deviation from truth is
    // correlated with it.
    ExposurePanel truth = gen_exposure_panel(80, 140, 10.0, 4.0, 0.4, 0.2, 55);
    ErrorSpec bl;
    bl.family = ErrorFamily::AdditiveBerksonLike;
    bl.gamma1 = 0.12;
    bl.noise_scale = 0.3;
    bl.autocorr.rho_time = 0.6;
    bl.autocorr.rho_space = 0.4;
    ExposurePanel xnew = apply_error(truth, bl, 56);
    GroupMapping mapping = block_group_mapping(80, 8);
    ExposurePanel grouped = aggregate_groups(xnew, mapping, AggregationMode::Additive);
    ExposurePanel per_unit = expand_to_units(grouped, mapping, truth.unit_ids);

    auto effect = LagEffect::from_theta({0.05, 0.12, 0.03});
    BiasReport report = bl_bias_approx(truth, per_unit, truth.unit_ids, effect, 2);
    double total = 0.0;
    for (double c : report.correction) {
        total += std::abs(c);
    }
    CHECK(total > 1e-3);
}

TEST_CASE("apply_error rejects nonpositive values under multiplicative error") {
    ExposurePanel p;
    p.unit_ids = {"a"};
    p.times = {0};
    p.values.resize(1, 1);
    p.values << -1.0;
    ErrorSpec mc;
    mc.family = ErrorFamily::MultClassical;
    mc.iid_noise_var = 0.1;
    CHECK_THROWS_AS(apply_error(p, mc, 1), DataError);
}
